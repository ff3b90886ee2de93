//! The conformal group of the sphere as unimodular 2×2 complex matrices.
//!
//! A [`MobiusMap`] acts through stereographic coordinates as
//! `z ↦ (az + b)/(cz + d)`. Orientation-reversing maps carry a `reflect`
//! flag on [`ConformalMap`], meaning the Möbius action is pre-composed with
//! `z ↦ z̄`.
//!
//! Points are pushed through the action in homogeneous coordinates
//! `[z1 : z2]`, choosing the chart `z = z1/z2` on the southern hemisphere
//! and `ζ = 1/z` on the northern one (`|z| > 1`), so no evaluation ever
//! divides by a vanishing denominator.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{cap_area, PlanePoint, Point3};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `[[a, b], [c, d]]` with `ad − bc = 1`, sign-normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl MobiusMap {
    pub const IDENTITY: MobiusMap = MobiusMap {
        a: ONE,
        b: ZERO,
        c: ZERO,
        d: ONE,
    };

    /// Divides by a square root of the determinant, then fixes the overall
    /// sign so the first nonzero entry has positive real part (or zero real
    /// part and positive imaginary part).
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        let scale = [a, b, c, d]
            .iter()
            .map(|z| z.norm_sqr())
            .fold(0.0, f64::max);
        if !det.is_finite() || det.norm() <= 1e-28 * scale.max(1e-300) || scale == 0.0 {
            return Err(Error::DegenerateMatrix(det.norm()));
        }
        let k = det.sqrt().inv();
        Ok(MobiusMap {
            a: a * k,
            b: b * k,
            c: c * k,
            d: d * k,
        }
        .sign_normalized())
    }

    fn sign_normalized(self) -> Self {
        let lead = [self.a, self.b, self.c, self.d]
            .into_iter()
            .find(|z| z.norm() > 1e-300)
            .unwrap_or(ONE);
        let flip = lead.re < 0.0 || (lead.re == 0.0 && lead.im < 0.0);
        if flip {
            MobiusMap {
                a: -self.a,
                b: -self.b,
                c: -self.c,
                d: -self.d,
            }
        } else {
            self
        }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }
    pub fn b(&self) -> Complex64 {
        self.b
    }
    pub fn c(&self) -> Complex64 {
        self.c
    }
    pub fn d(&self) -> Complex64 {
        self.d
    }
    pub fn entries(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix product `self · other`, renormalized.
    pub fn mul(&self, o: &MobiusMap) -> MobiusMap {
        let a = self.a * o.a + self.b * o.c;
        let b = self.a * o.b + self.b * o.d;
        let c = self.c * o.a + self.d * o.c;
        let d = self.c * o.b + self.d * o.d;
        MobiusMap::new(a, b, c, d).expect("product of unimodular matrices is invertible")
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap::new(self.d, -self.b, -self.c, self.a).expect("unimodular")
    }

    /// Entry-wise complex conjugate.
    pub fn conj(&self) -> MobiusMap {
        MobiusMap {
            a: self.a.conj(),
            b: self.b.conj(),
            c: self.c.conj(),
            d: self.d.conj(),
        }
        .sign_normalized()
    }

    /// Largest entry modulus.
    pub fn max_entry(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Action on the extended plane.
    pub fn apply_plane(&self, x: &PlanePoint) -> PlanePoint {
        let (z1, z2) = match x {
            PlanePoint::Finite(z) => (*z, ONE),
            PlanePoint::Infinity => (ONE, ZERO),
        };
        let p = self.a * z1 + self.b * z2;
        let q = self.c * z1 + self.d * z2;
        if q.norm() == 0.0 {
            PlanePoint::Infinity
        } else {
            PlanePoint::Finite(p / q)
        }
    }

    fn act(&self, z1: Complex64, z2: Complex64) -> (Complex64, Complex64) {
        (self.a * z1 + self.b * z2, self.c * z1 + self.d * z2)
    }
}

/// Chart used to write a sphere point in homogeneous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// `[z : 1]` scaled, accurate on the southern hemisphere.
    Plane,
    /// `[1 : ζ]` scaled, `ζ = 1/z`, accurate on the northern hemisphere.
    Inverted,
}

impl Chart {
    pub fn for_point(w: &Point3) -> Chart {
        if w.w3() > 0.0 {
            Chart::Inverted
        } else {
            Chart::Plane
        }
    }
}

/// Homogeneous coordinates of a sphere point with `|z1|² + |z2|²` of order one.
fn homogeneous(w: &Point3, chart: Chart) -> (Complex64, Complex64) {
    let [w1, w2, w3] = w.as_array();
    match chart {
        // z = (w1 + i w2)/(1 − w3)
        Chart::Plane => (Complex64::new(w1, w2), Complex64::new(1.0 - w3, 0.0)),
        // z = (1 + w3)/(w1 − i w2)
        Chart::Inverted => (Complex64::new(1.0 + w3, 0.0), Complex64::new(w1, -w2)),
    }
}

fn from_homogeneous(p: Complex64, q: Complex64) -> Point3 {
    let pp = p.norm_sqr();
    let qq = q.norm_sqr();
    let n = pp + qq;
    let x = p * q.conj();
    Point3::new(2.0 * x.re / n, 2.0 * x.im / n, (pp - qq) / n)
}

/// An element of the full conformal group of the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapFile", into = "MapFile")]
pub struct ConformalMap {
    pub mobius: MobiusMap,
    /// Pre-compose the Möbius action with `z ↦ z̄`.
    pub reflect: bool,
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
    d: [f64; 2],
    #[serde(default)]
    reflect: bool,
}

impl TryFrom<MapFile> for ConformalMap {
    type Error = Error;
    fn try_from(f: MapFile) -> Result<Self> {
        let z = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        Ok(ConformalMap {
            mobius: MobiusMap::new(z(f.a), z(f.b), z(f.c), z(f.d))?,
            reflect: f.reflect,
        })
    }
}

impl From<ConformalMap> for MapFile {
    fn from(m: ConformalMap) -> Self {
        let v = |z: Complex64| [z.re, z.im];
        MapFile {
            a: v(m.mobius.a),
            b: v(m.mobius.b),
            c: v(m.mobius.c),
            d: v(m.mobius.d),
            reflect: m.reflect,
        }
    }
}

impl From<MobiusMap> for ConformalMap {
    fn from(mobius: MobiusMap) -> Self {
        ConformalMap {
            mobius,
            reflect: false,
        }
    }
}

impl ConformalMap {
    pub const IDENTITY: ConformalMap = ConformalMap {
        mobius: MobiusMap::IDENTITY,
        reflect: false,
    };

    /// `z ↦ λz`.
    pub fn dilation(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        let s = lambda.sqrt();
        Ok(MobiusMap::new(
            Complex64::new(s, 0.0),
            ZERO,
            ZERO,
            Complex64::new(1.0 / s, 0.0),
        )?
        .into())
    }

    /// `z ↦ z + β`; takes the south pole to `S⁻¹(β)`.
    pub fn translation(beta: &PlanePoint) -> Result<Self> {
        let beta = beta
            .finite()
            .ok_or_else(|| Error::InvalidArgument("translation by the point at infinity".into()))?;
        Ok(MobiusMap::new(ONE, beta, ZERO, ONE)?.into())
    }

    /// Rigid rotation of the sphere by `angle` about `axis` (right-handed).
    pub fn rotation(axis: &Point3, angle: f64) -> Self {
        // H(0, q) = q1 σx − q2 σy + q3 σz, so the spin lift of a right-handed
        // rotation is cos(θ/2) + i sin(θ/2)(n1 σx − n2 σy + n3 σz)
        let [n1, n2, n3] = axis.as_array();
        let (s, c) = (0.5 * angle).sin_cos();
        let i = Complex64::i();
        let a = Complex64::new(c, 0.0) + i * s * n3;
        let d = Complex64::new(c, 0.0) - i * s * n3;
        let b = i * s * Complex64::new(n1, n2);
        let cc = i * s * Complex64::new(n1, -n2);
        MobiusMap::new(a, b, cc, d)
            .expect("SU(2) element is unimodular")
            .into()
    }

    /// The inversion `x ↦ x/|x|²` of the plane, i.e. `z ↦ 1/z̄`.
    pub fn inversion() -> Self {
        ConformalMap {
            mobius: MobiusMap::new(ZERO, ONE, ONE, ZERO).expect("unimodular up to scale"),
            reflect: true,
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &ConformalMap) -> ConformalMap {
        // C ∘ M = conj(M) ∘ C
        let inner = if self.reflect {
            other.mobius.conj()
        } else {
            other.mobius
        };
        ConformalMap {
            mobius: self.mobius.mul(&inner),
            reflect: self.reflect ^ other.reflect,
        }
    }

    pub fn inverse(&self) -> ConformalMap {
        // (M ∘ C)⁻¹ = C ∘ M⁻¹ = conj(M⁻¹) ∘ C
        let inv = self.mobius.inverse();
        ConformalMap {
            mobius: if self.reflect { inv.conj() } else { inv },
            reflect: self.reflect,
        }
    }

    fn prepare(&self, w: &Point3) -> Point3 {
        if self.reflect {
            w.conj()
        } else {
            *w
        }
    }

    /// Image of a sphere point.
    pub fn apply(&self, w: &Point3) -> Point3 {
        let w = self.prepare(w);
        let (z1, z2) = homogeneous(&w, Chart::for_point(&w));
        let (p, q) = self.mobius.act(z1, z2);
        from_homogeneous(p, q)
    }

    /// Image of a point of the extended plane.
    pub fn apply_plane(&self, x: &PlanePoint) -> PlanePoint {
        let x = match (self.reflect, x) {
            (true, PlanePoint::Finite(z)) => PlanePoint::Finite(z.conj()),
            _ => *x,
        };
        self.mobius.apply_plane(&x)
    }

    /// `J_τ(ω)^{1/2} = (|z1|² + |z2|²) / (|a z1 + b z2|² + |c z1 + d z2|²)`,
    /// the homogeneous form of `(1 + |z|²)/(|az + b|² + |cz + d|²)`.
    pub fn jacobian_sqrt(&self, w: &Point3) -> f64 {
        let w = self.prepare(w);
        jacobian_sqrt_in_chart(&self.mobius, &w, Chart::for_point(&w))
    }

    /// Area distortion factor with respect to the round metric.
    pub fn jacobian(&self, w: &Point3) -> f64 {
        let s = self.jacobian_sqrt(w);
        s * s
    }

    pub fn is_holomorphic(&self) -> bool {
        !self.reflect
    }
}

pub(crate) fn jacobian_sqrt_in_chart(m: &MobiusMap, w: &Point3, chart: Chart) -> f64 {
    let (z1, z2) = homogeneous(w, chart);
    let (p, q) = m.act(z1, z2);
    (z1.norm_sqr() + z2.norm_sqr()) / (p.norm_sqr() + q.norm_sqr())
}

/// Estimates `σ(τ(B(p, r))) / σ(B(p, r))` without the closed-form Jacobian.
///
/// Möbius maps send circles to circles, so the image of the cap is again a
/// cap. Its boundary is sampled densely, the supporting plane is recovered
/// from the sampled polygon (Newell normal, mean offset) and the image area
/// follows from the cap height.
pub fn jacobian_area_oracle(tau: &ConformalMap, p: &Point3, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "cap radius {r} outside (0, 0.5)"
        )));
    }
    const SAMPLES: usize = 1 << 12;
    let pv = p.as_array();
    let helper = if pv[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let e1 = normalize(cross(&pv, &helper));
    let e2 = cross(&pv, &e1);
    let (sr, cr) = r.sin_cos();
    let boundary: Vec<[f64; 3]> = (0..SAMPLES)
        .map(|k| {
            let (st, ct) = (2.0 * PI * k as f64 / SAMPLES as f64).sin_cos();
            let q: [f64; 3] = std::array::from_fn(|i| cr * pv[i] + sr * (ct * e1[i] + st * e2[i]));
            tau.apply(&Point3::from(q)).as_array()
        })
        .collect();
    let mut normal = [0.0; 3];
    for k in 0..SAMPLES {
        let c = cross(&boundary[k], &boundary[(k + 1) % SAMPLES]);
        normal.iter_mut().zip(c).for_each(|(n, x)| *n += x);
    }
    let normal = normalize(normal);
    let offset = boundary.iter().map(|v| dot(&normal, v)).sum::<f64>() / SAMPLES as f64;
    // the image cap is the side of the plane containing τ(p)
    let inside = dot(&normal, &tau.apply(p).as_array()) >= offset;
    let height = if inside { 1.0 - offset } else { 1.0 + offset };
    Ok(2.0 * PI * height / cap_area(r)?)
}

fn cross(u: &[f64; 3], v: &[f64; 3]) -> [f64; 3] {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

fn dot(u: &[f64; 3], v: &[f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

fn normalize(u: [f64; 3]) -> [f64; 3] {
    let n = dot(&u, &u).sqrt();
    [u[0] / n, u[1] / n, u[2] / n]
}

/// One of the generating transformations, for closed-form mass and centre of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Dilation {
        lambda: f64,
    },
    /// Translation taking the south pole to `target`.
    Translation {
        target: Point3,
    },
    Rotation {
        axis: Point3,
        angle: f64,
    },
    Inversion,
}

impl Generator {
    pub fn to_map(&self) -> Result<ConformalMap> {
        match *self {
            Generator::Dilation { lambda } => ConformalMap::dilation(lambda),
            Generator::Translation { target } => {
                let beta = crate::sphere::stereo_project(&target);
                ConformalMap::translation(&beta)
            }
            Generator::Rotation { axis, angle } => Ok(ConformalMap::rotation(&axis, angle)),
            Generator::Inversion => Ok(ConformalMap::inversion()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_grid, stereo_inverse, stereo_project};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut impl Rng) -> Point3 {
        loop {
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n2: f64 = v.iter().map(|c: &f64| c * c).sum();
            if n2 > 0.01 && n2 < 1.0 {
                return Point3::new(v[0], v[1], v[2]);
            }
        }
    }

    fn random_mobius(rng: &mut impl Rng) -> ConformalMap {
        loop {
            let mut z = || Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let (a, b, c, d) = (z(), z(), z(), z());
            if let Ok(m) = MobiusMap::new(a, b, c, d) {
                if m.max_entry() < 6.0 {
                    return m.into();
                }
            }
        }
    }

    /// Remark formula evaluated in the plane chart directly.
    fn jacobian_via_plane(tau: &ConformalMap, w: &Point3) -> f64 {
        let z = stereo_project(&tau.prepare(w)).finite().unwrap();
        let m = &tau.mobius;
        let num = 1.0 + z.norm_sqr();
        let den = (m.a * z + m.b).norm_sqr() + (m.c * z + m.d).norm_sqr();
        (num / den).powi(2)
    }

    fn close(p: &Point3, q: &Point3, tol: f64) -> bool {
        p.distance(q) < tol
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(ConformalMap::dilation(1.0).unwrap(), ConformalMap::IDENTITY);
        let d4 = ConformalMap::dilation(4.0).unwrap();
        assert_eq!(d4.mobius.a(), Complex64::new(2.0, 0.0));
        assert_eq!(d4.mobius.d(), Complex64::new(0.5, 0.0));
        for lambda in [0.3, 2.0, 7.0] {
            let d = ConformalMap::dilation(lambda).unwrap();
            assert!(close(&d.apply(&Point3::SOUTH), &Point3::SOUTH, 1e-15));
        }
        assert!(ConformalMap::dilation(0.0).is_err());
        assert!(ConformalMap::dilation(-1.0).is_err());
    }

    #[test]
    fn translation_examples() {
        let t0 = ConformalMap::translation(&PlanePoint::new(0.0, 0.0)).unwrap();
        assert_eq!(t0, ConformalMap::IDENTITY);
        let beta = stereo_project(&Point3::SOUTH);
        assert_eq!(
            ConformalMap::translation(&beta).unwrap(),
            ConformalMap::IDENTITY
        );
        let t = ConformalMap::translation(&PlanePoint::new(1.0, 0.0)).unwrap();
        assert!(close(
            &t.apply(&Point3::SOUTH),
            &Point3::new(1.0, 0.0, 0.0),
            1e-15
        ));
        assert!(ConformalMap::translation(&PlanePoint::Infinity).is_err());
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(
            ConformalMap::rotation(&Point3::new(0.3, 0.2, 0.9), 0.0),
            ConformalMap::IDENTITY
        );
        let r = ConformalMap::rotation(&Point3::new(1.0, 0.0, 0.0), PI);
        let m = r.mobius;
        assert!(m.a().norm() < 1e-15 && m.d().norm() < 1e-15);
        assert!((m.b() - Complex64::i()).norm() < 1e-15);
        assert!((m.c() - Complex64::i()).norm() < 1e-15);
        let grid = build_grid(6, 1.0).unwrap();
        for w in grid.nodes() {
            let img = r.apply(w);
            assert!(close(&img, &Point3::new(w.w1(), -w.w2(), -w.w3()), 1e-14));
        }
    }

    #[test]
    fn rotation_matches_rodrigues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = random_point(&mut rng);
            let angle = rng.gen_range(-3.0..3.0);
            let r = ConformalMap::rotation(&n, angle);
            let w = random_point(&mut rng);
            let (s, c) = f64::sin_cos(angle);
            let nv = n.as_array();
            let wv = w.as_array();
            let nxw = cross(&nv, &wv);
            let nd = dot(&nv, &wv);
            let expect = Point3::new(
                wv[0] * c + nxw[0] * s + nv[0] * nd * (1.0 - c),
                wv[1] * c + nxw[1] * s + nv[1] * nd * (1.0 - c),
                wv[2] * c + nxw[2] * s + nv[2] * nd * (1.0 - c),
            );
            assert!(close(&r.apply(&w), &expect, 1e-13));
            assert!((r.jacobian(&w) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn inversion_examples() {
        let inv = ConformalMap::inversion();
        let twice = inv.compose(&inv);
        assert!(!twice.reflect);
        assert_eq!(twice.mobius, MobiusMap::IDENTITY);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w = random_point(&mut rng);
            assert!((inv.jacobian(&w) - 1.0).abs() < 1e-14);
            assert!(close(&inv.apply(&inv.apply(&w)), &w, 1e-14));
            let t = rng.gen_range(0.0..2.0 * PI);
            let eq = Point3::new(t.cos(), t.sin(), 0.0);
            assert!(close(&inv.apply(&eq), &eq, 1e-15));
        }
        // x ↦ x/|x|² in the plane
        let x = PlanePoint::new(2.0, 1.0);
        let img = inv.apply_plane(&x).finite().unwrap();
        assert!((img - Complex64::new(0.4, 0.2)).norm() < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let w = Point3::new(0.2, -0.5, 0.3);
        assert!(close(&ConformalMap::IDENTITY.apply(&w), &w, 1e-15));
        let d2 = ConformalMap::dilation(2.0).unwrap();
        let img = d2.apply(&Point3::new(1.0, 0.0, 0.0));
        assert!(close(&img, &Point3::new(0.8, 0.0, 0.6), 1e-15));
        let via_plane = stereo_inverse(&d2.apply_plane(&PlanePoint::new(1.0, 0.0)));
        assert!(close(&img, &via_plane, 1e-15));
        // pole of cz + d goes to the north pole; ∞ goes to a/c
        let m: ConformalMap = MobiusMap::new(ONE, ONE, ONE, Complex64::new(2.0, 0.0))
            .unwrap()
            .into();
        let pole = stereo_inverse(&PlanePoint::new(-2.0, 0.0));
        assert!(close(&m.apply(&pole), &Point3::NORTH, 1e-15));
        let at_inf = m.apply(&Point3::NORTH);
        assert!(close(
            &at_inf,
            &stereo_inverse(&PlanePoint::new(1.0, 0.0)),
            1e-15
        ));
        let t = ConformalMap::translation(&PlanePoint::new(0.4, 0.0)).unwrap();
        assert!(close(&t.apply(&Point3::NORTH), &Point3::NORTH, 1e-15));
    }

    #[test]
    fn composition_is_a_group_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut t1 = random_mobius(&mut rng);
            let mut t2 = random_mobius(&mut rng);
            t1.reflect = rng.gen_bool(0.5);
            t2.reflect = rng.gen_bool(0.5);
            let w = random_point(&mut rng);
            let lhs = t1.compose(&t2).apply(&w);
            let rhs = t1.apply(&t2.apply(&w));
            assert!(close(&lhs, &rhs, 1e-12));
            let back = t1.inverse().apply(&t1.apply(&w));
            assert!(close(&back, &w, 1e-12));
            let id = t1.compose(&t1.inverse());
            assert!(!id.reflect);
            let e = id.mobius.entries();
            assert!((e[0] - ONE).norm() < 1e-12 && e[1].norm() < 1e-12);
            assert!(e[2].norm() < 1e-12 && (e[3] - ONE).norm() < 1e-12);
            assert!((t1.compose(&t2).mobius.det() - ONE).norm() < 1e-13);
            assert!((t1.inverse().mobius.det() - ONE).norm() < 1e-13);
        }
        let d6 = ConformalMap::dilation(2.0)
            .unwrap()
            .compose(&ConformalMap::dilation(3.0).unwrap());
        let expect = ConformalMap::dilation(6.0).unwrap();
        for (x, y) in d6.mobius.entries().iter().zip(expect.mobius.entries()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn jacobian_examples() {
        let grid = build_grid(8, 1.0).unwrap();
        for w in grid.nodes() {
            assert_eq!(ConformalMap::IDENTITY.jacobian(w), 1.0);
        }
        let d2 = ConformalMap::dilation(2.0).unwrap();
        assert!((d2.jacobian(&Point3::SOUTH) - 4.0).abs() < 1e-14);
        assert!((d2.jacobian(&Point3::new(1.0, 0.0, 0.0)) - 0.64).abs() < 1e-14);
        let t = ConformalMap::translation(&PlanePoint::new(1.0, 0.0)).unwrap();
        assert!((t.jacobian(&Point3::SOUTH) - 0.25).abs() < 1e-15);
        // dilation formula λ²((1+|x|²)/(1+λ²|x|²))² away from the axis
        let w = Point3::new(0.3, 0.4, -0.2);
        let x2 = stereo_project(&w).finite().unwrap().norm_sqr();
        let expect = 4.0 * ((1.0 + x2) / (1.0 + 4.0 * x2)).powi(2);
        assert!((d2.jacobian(&w) - expect).abs() < 1e-14);
    }

    #[test]
    fn jacobian_agrees_with_plane_formula_and_across_charts() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let mut tau = random_mobius(&mut rng);
            tau.reflect = rng.gen_bool(0.3);
            let w = random_point(&mut rng);
            let j = tau.jacobian(&w);
            assert!(j > 0.0 && j.is_finite());
            if w.w3() < 0.9 {
                let plane = jacobian_via_plane(&tau, &w);
                assert!(((j - plane) / plane).abs() < 1e-12);
            }
            // both charts must agree in the overlap band around the equator
            let band = Point3::new(w.w1(), w.w2(), 0.3 * w.w3());
            let pw = tau.prepare(&band);
            let a = jacobian_sqrt_in_chart(&tau.mobius, &pw, Chart::Plane);
            let b = jacobian_sqrt_in_chart(&tau.mobius, &pw, Chart::Inverted);
            assert!(((a - b) / a).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_positive_on_grid_including_poles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let grid = build_grid(24, 1.0).unwrap();
        for _ in 0..10 {
            let tau = random_mobius(&mut rng);
            for w in grid.nodes().iter().chain([&Point3::NORTH, &Point3::SOUTH]) {
                let j = tau.jacobian(w);
                assert!(j > 0.0 && j.is_finite());
            }
        }
    }

    #[test]
    fn chain_rule_and_left_rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let t1 = random_mobius(&mut rng);
            let t2 = random_mobius(&mut rng);
            let w = random_point(&mut rng);
            let lhs = t1.compose(&t2).jacobian(&w);
            let rhs = t1.jacobian(&t2.apply(&w)) * t2.jacobian(&w);
            assert!(((lhs - rhs) / lhs).abs() < 1e-11);
            let rho = ConformalMap::rotation(&random_point(&mut rng), rng.gen_range(0.0..6.0));
            let jr = rho.compose(&t1).jacobian(&w);
            let j = t1.jacobian(&w);
            assert!(((jr - j) / j).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_integrates_to_one() {
        let grid = build_grid(80, 1.0).unwrap();
        for tau in [
            ConformalMap::dilation(2.0).unwrap(),
            ConformalMap::translation(&PlanePoint::new(0.7, -0.4)).unwrap(),
            ConformalMap::inversion(),
        ] {
            let s = crate::sphere::sample(&grid, |w| tau.jacobian(w));
            let m = crate::sphere::integrate(&grid, &s).unwrap();
            assert!((m - 1.0).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn area_oracle_examples() {
        let p = Point3::new(0.2, 0.5, -0.6);
        let id = jacobian_area_oracle(&ConformalMap::IDENTITY, &p, 0.1).unwrap();
        assert!((id - 1.0).abs() < 1e-10);
        let rot = ConformalMap::rotation(&Point3::new(1.0, 1.0, 0.0), 0.8);
        let r = jacobian_area_oracle(&rot, &p, 0.1).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
        assert!(jacobian_area_oracle(&rot, &p, 0.6).is_err());
        assert!(jacobian_area_oracle(&rot, &p, 0.0).is_err());

        let d2 = ConformalMap::dilation(2.0).unwrap();
        let e1 = jacobian_area_oracle(&d2, &Point3::SOUTH, 0.05).unwrap() - 4.0;
        let e2 = jacobian_area_oracle(&d2, &Point3::SOUTH, 0.025).unwrap() - 4.0;
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn sign_normalization() {
        let m = MobiusMap::new(-ONE, ZERO, ZERO, -ONE).unwrap();
        assert_eq!(m, MobiusMap::IDENTITY);
        let inv = ConformalMap::inversion();
        assert_eq!(inv.mobius.b(), Complex64::i());
        assert!(MobiusMap::new(ONE, ONE, ONE, ONE).is_err());
    }

    #[test]
    fn map_json_layout() {
        let t = ConformalMap::translation(&PlanePoint::new(0.5, -1.0)).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"a":[1.0,0.0],"b":[0.5,-1.0],"c":[0.0,0.0],"d":[1.0,0.0],"reflect":false}"#
        );
        let back: ConformalMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
