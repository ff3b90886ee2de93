//! Minkowski space as 2×2 Hermitian matrices and the spin homomorphism
//! `SL(2,ℂ) → SO⁺(1,3)` defined by `A H(v) A* = H(Λ(A) v)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::{ConformalMap, MobiusMap};
use crate::sphere::Point3;

/// A vector `(t, q1, q2, q3)` of `ℝ^{1,3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiVec {
    pub t: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl MinkowskiVec {
    pub const fn new(t: f64, q1: f64, q2: f64, q3: f64) -> Self {
        MinkowskiVec { t, q1, q2, q3 }
    }

    /// The future-pointing null vector `(1, ω)`.
    pub fn lightlike(w: &Point3) -> Self {
        let [q1, q2, q3] = w.as_array();
        MinkowskiVec { t: 1.0, q1, q2, q3 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.t, self.q1, self.q2, self.q3]
    }

    /// `t² − |q|²`.
    pub fn quadratic_form(&self) -> f64 {
        self.t * self.t - self.q1 * self.q1 - self.q2 * self.q2 - self.q3 * self.q3
    }

    fn scale(&self, k: f64) -> Self {
        MinkowskiVec::new(k * self.t, k * self.q1, k * self.q2, k * self.q3)
    }
}

impl From<[f64; 4]> for MinkowskiVec {
    fn from(v: [f64; 4]) -> Self {
        MinkowskiVec::new(v[0], v[1], v[2], v[3])
    }
}

/// `[[t + q3, q1 + i q2], [q1 − i q2, t − q3]]`, stored by its real parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hermitian2 {
    v: MinkowskiVec,
}

impl Hermitian2 {
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let MinkowskiVec { t, q1, q2, q3 } = self.v;
        [
            [Complex64::new(t + q3, 0.0), Complex64::new(q1, q2)],
            [Complex64::new(q1, -q2), Complex64::new(t - q3, 0.0)],
        ]
    }

    pub fn det(&self) -> f64 {
        let m = self.matrix();
        (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re
    }

    pub fn vector(&self) -> MinkowskiVec {
        self.v
    }

    /// Reads a Hermitian matrix back into Minkowski coordinates.
    fn decode(h: &[[Complex64; 2]; 2]) -> MinkowskiVec {
        MinkowskiVec {
            t: 0.5 * (h[0][0].re + h[1][1].re),
            q3: 0.5 * (h[0][0].re - h[1][1].re),
            q1: h[0][1].re,
            q2: h[0][1].im,
        }
    }
}

pub fn hermitian_of(v: &MinkowskiVec) -> Hermitian2 {
    Hermitian2 { v: *v }
}

/// A 4×4 real matrix acting on `(t, q1, q2, q3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 16]", into = "[f64; 16]")]
pub struct LorentzMatrix {
    m: [[f64; 4]; 4],
}

impl From<[f64; 16]> for LorentzMatrix {
    fn from(a: [f64; 16]) -> Self {
        LorentzMatrix {
            m: std::array::from_fn(|i| std::array::from_fn(|j| a[4 * i + j])),
        }
    }
}

impl From<LorentzMatrix> for [f64; 16] {
    fn from(l: LorentzMatrix) -> Self {
        std::array::from_fn(|k| l.m[k / 4][k % 4])
    }
}

const ETA: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

impl LorentzMatrix {
    pub const IDENTITY: LorentzMatrix = LorentzMatrix {
        m: [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
    };

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn apply(&self, v: &MinkowskiVec) -> MinkowskiVec {
        let x = v.as_array();
        MinkowskiVec::from(std::array::from_fn(|i| {
            (0..4).map(|j| self.m[i][j] * x[j]).sum::<f64>()
        }))
    }

    pub fn mul(&self, o: &LorentzMatrix) -> LorentzMatrix {
        LorentzMatrix {
            m: std::array::from_fn(|i| {
                std::array::from_fn(|j| (0..4).map(|k| self.m[i][k] * o.m[k][j]).sum())
            }),
        }
    }

    pub fn max_abs_diff(&self, o: &LorentzMatrix) -> f64 {
        (0..16)
            .map(|k| (self.m[k / 4][k % 4] - o.m[k / 4][k % 4]).abs())
            .fold(0.0, f64::max)
    }

    /// Max-norm of `MᵀηM − η`.
    pub fn metric_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let g: f64 = (0..4).map(|k| self.m[k][i] * ETA[k] * self.m[k][j]).sum();
                let target = if i == j { ETA[i] } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn det(&self) -> f64 {
        // cofactor expansion along the first row
        let m = &self.m;
        let minor = |skip: usize| {
            let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
            let r = |i: usize, j: usize| m[i][cols[j]];
            r(1, 0) * (r(2, 1) * r(3, 2) - r(2, 2) * r(3, 1))
                - r(1, 1) * (r(2, 0) * r(3, 2) - r(2, 2) * r(3, 0))
                + r(1, 2) * (r(2, 0) * r(3, 1) - r(2, 1) * r(3, 0))
        };
        (0..4)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * m[0][j] * minor(j))
            .sum()
    }

    /// First row `(Λ00, Λ01, Λ02, Λ03)`; `J_τ^{-1/2}(ω) = Λ00 + (Λ01, Λ02, Λ03)·ω`.
    pub fn time_row(&self) -> [f64; 4] {
        self.m[0]
    }
}

fn conjugate(a: &MobiusMap, h: &Hermitian2) -> MinkowskiVec {
    let [aa, ab, ac, ad] = a.entries();
    let am = [[aa, ab], [ac, ad]];
    let hm = h.matrix();
    let mut ah = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            ah[i][j] = am[i][0] * hm[0][j] + am[i][1] * hm[1][j];
        }
    }
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = ah[i][0] * am[j][0].conj() + ah[i][1] * am[j][1].conj();
        }
    }
    Hermitian2::decode(&out)
}

/// `Λ(A)`, assembled from its action on the lightlike/Pauli basis
/// `b1 = (1,0,0,1)`, `b2 = (1,0,0,−1)`, `b3 = (0,1,1,0)`, `b4 = (0,1,−1,0)`.
pub fn lorentz_lift(a: &MobiusMap) -> LorentzMatrix {
    let image = |v: [f64; 4]| conjugate(a, &hermitian_of(&MinkowskiVec::from(v))).as_array();
    let l1 = image([1.0, 0.0, 0.0, 1.0]);
    let l2 = image([1.0, 0.0, 0.0, -1.0]);
    let l3 = image([0.0, 1.0, 1.0, 0.0]);
    let l4 = image([0.0, 1.0, -1.0, 0.0]);
    // e0 = (b1+b2)/2, e3 = (b1−b2)/2, e1 = (b3+b4)/2, e2 = (b3−b4)/2
    let cols: [[f64; 4]; 4] = [
        std::array::from_fn(|i| 0.5 * (l1[i] + l2[i])),
        std::array::from_fn(|i| 0.5 * (l3[i] + l4[i])),
        std::array::from_fn(|i| 0.5 * (l3[i] - l4[i])),
        std::array::from_fn(|i| 0.5 * (l1[i] - l2[i])),
    ];
    LorentzMatrix {
        m: std::array::from_fn(|i| std::array::from_fn(|j| cols[j][i])),
    }
}

/// Max-norm of `Λ(AB) − Λ(A)Λ(B)`.
pub fn homomorphism_check(a: &MobiusMap, b: &MobiusMap) -> f64 {
    lorentz_lift(&a.mul(b)).max_abs_diff(&lorentz_lift(a).mul(&lorentz_lift(b)))
}

/// Euclidean norm of `(1, τ(ω)) − J_τ(ω)^{1/2} Λ_τ (1, ω)`.
pub fn lightcone_identity_residual(tau: &ConformalMap, w: &Point3) -> Result<f64> {
    if tau.reflect {
        return Err(Error::OrientationReversing);
    }
    let lhs = MinkowskiVec::lightlike(&tau.apply(w)).as_array();
    let rhs = lorentz_lift(&tau.mobius)
        .apply(&MinkowskiVec::lightlike(w))
        .scale(tau.jacobian_sqrt(w))
        .as_array();
    Ok(lhs
        .iter()
        .zip(rhs)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::PlanePoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(rng: &mut impl Rng) -> MobiusMap {
        loop {
            let mut z = || Complex64::new(rng.gen_range(-1.4..1.4), rng.gen_range(-1.4..1.4));
            let (a, b, cc, d) = (z(), z(), z(), z());
            if let Ok(m) = MobiusMap::new(a, b, cc, d) {
                if m.max_entry() <= 2.0 {
                    return m;
                }
            }
        }
    }

    fn random_point(rng: &mut impl Rng) -> Point3 {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        Point3::from_spherical(z, (1.0 - z * z).sqrt(), phi)
    }

    #[test]
    fn hermitian_examples() {
        let id = hermitian_of(&MinkowskiVec::new(1.0, 0.0, 0.0, 0.0)).matrix();
        assert_eq!(id, [[c(1.0), c(0.0)], [c(0.0), c(1.0)]]);
        let h = hermitian_of(&MinkowskiVec::new(1.0, 0.0, 0.0, 1.0)).matrix();
        assert_eq!(h, [[c(2.0), c(0.0)], [c(0.0), c(0.0)]]);
        assert_eq!(
            hermitian_of(&MinkowskiVec::new(2.0, 1.0, 0.0, 0.0)).det(),
            3.0
        );
    }

    #[test]
    fn det_equals_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v = MinkowskiVec::from(std::array::from_fn::<f64, 4, _>(|_| {
                rng.gen_range(-3.0..3.0)
            }));
            let h = hermitian_of(&v);
            assert!((h.det() - v.quadratic_form()).abs() < 1e-13);
            let back = Hermitian2::decode(&h.matrix()).as_array();
            assert!(back
                .iter()
                .zip(v.as_array())
                .all(|(x, y)| (x - y).abs() < 1e-15 * (1.0 + y.abs())));
        }
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lorentz_lift(&MobiusMap::IDENTITY), LorentzMatrix::IDENTITY);
        let minus = MobiusMap::new(c(-1.0), c(0.0), c(0.0), c(-1.0)).unwrap();
        assert_eq!(lorentz_lift(&minus), LorentzMatrix::IDENTITY);

        let boost = lorentz_lift(
            &MobiusMap::new(c(2f64.sqrt()), c(0.0), c(0.0), c(0.5f64.sqrt())).unwrap(),
        );
        let expect = LorentzMatrix {
            m: [
                [1.25, 0.0, 0.0, 0.75],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.75, 0.0, 0.0, 1.25],
            ],
        };
        assert!(boost.max_abs_diff(&expect) < 1e-15);
        let up = boost.apply(&MinkowskiVec::new(1.0, 0.0, 0.0, 1.0));
        let down = boost.apply(&MinkowskiVec::new(1.0, 0.0, 0.0, -1.0));
        let near = |a: [f64; 4], b: [f64; 4]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(near(up.as_array(), [2.0, 0.0, 0.0, 2.0]));
        assert!(near(down.as_array(), [0.5, 0.0, 0.0, -0.5]));
    }

    #[test]
    fn lift_of_random_maps_is_proper_orthochronous() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let l = lorentz_lift(&random_matrix(&mut rng));
            assert!(l.metric_residual() < 1e-11);
            assert!((l.det() - 1.0).abs() < 1e-11);
            assert!(l.get(0, 0) >= 1.0 - 1e-12);
            let v = MinkowskiVec::from(std::array::from_fn::<f64, 4, _>(|_| {
                rng.gen_range(-2.0..2.0)
            }));
            let n2: f64 = v.as_array().iter().map(|x| x * x).sum();
            assert!(
                (l.apply(&v).quadratic_form() - v.quadratic_form()).abs() <= 1e-10 * (1.0 + n2)
            );
            assert!(l.apply(&MinkowskiVec::lightlike(&random_point(&mut rng))).t > 0.0);
        }
    }

    #[test]
    fn homomorphism() {
        assert_eq!(
            homomorphism_check(&MobiusMap::IDENTITY, &MobiusMap::IDENTITY),
            0.0
        );
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let a = random_matrix(&mut rng);
            let b = random_matrix(&mut rng);
            assert!(homomorphism_check(&a, &b) < 1e-11);
            let prod = lorentz_lift(&a).mul(&lorentz_lift(&a.inverse()));
            assert!(prod.max_abs_diff(&LorentzMatrix::IDENTITY) < 1e-11);
        }
    }

    #[test]
    fn lightcone_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let w = random_point(&mut rng);
        assert!(lightcone_identity_residual(&ConformalMap::IDENTITY, &w).unwrap() < 1e-15);
        let d2 = ConformalMap::dilation(2.0).unwrap();
        assert!(lightcone_identity_residual(&d2, &Point3::SOUTH).unwrap() < 1e-15);
        for _ in 0..20 {
            let tau: ConformalMap = random_matrix(&mut rng).into();
            for _ in 0..100 {
                let w = random_point(&mut rng);
                assert!(lightcone_identity_residual(&tau, &w).unwrap() < 1e-11);
            }
        }
        assert_eq!(
            lightcone_identity_residual(&ConformalMap::inversion(), &w),
            Err(Error::OrientationReversing)
        );
    }

    #[test]
    fn time_row_gives_inverse_sqrt_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..50 {
            let tau: ConformalMap = random_matrix(&mut rng).into();
            let row = lorentz_lift(&tau.mobius).time_row();
            let w = random_point(&mut rng);
            let inv = row[0] + row[1] * w.w1() + row[2] * w.w2() + row[3] * w.w3();
            assert!((inv * tau.jacobian_sqrt(&w) - 1.0).abs() < 1e-12);
        }
        let t = ConformalMap::translation(&PlanePoint::new(1.0, 0.0)).unwrap();
        assert!((lorentz_lift(&t.mobius).get(0, 0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn json_is_row_major() {
        let boost = lorentz_lift(
            &MobiusMap::new(c(2f64.sqrt()), c(0.0), c(0.0), c(0.5f64.sqrt())).unwrap(),
        );
        let v: Vec<f64> = serde_json::from_str(&serde_json::to_string(&boost).unwrap()).unwrap();
        assert_eq!(v.len(), 16);
        assert!((v[3] - 0.75).abs() < 1e-15 && (v[12] - 0.75).abs() < 1e-15);
    }
}
