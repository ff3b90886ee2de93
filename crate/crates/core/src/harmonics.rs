//! Band-limited real spherical-harmonic fields.
//!
//! The basis is real and orthonormal for the normalized measure, so
//! `Y_00 ≡ 1`, `∫ Y_lm² dω = 1`, and the mean of a field is its `(0,0)`
//! coefficient. Coefficients are stored flat in `(l ascending, m ascending)`
//! order, index `l² + l + m`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{check_len, integrate, Point3, SphericalGrid};

#[inline]
pub fn coeff_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

#[inline]
pub fn coeff_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

#[inline]
fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized associated Legendre values `P̄_l^m(x)`, `0 ≤ m ≤ l ≤ l_max`,
/// scaled so that `½∫_{-1}^{1} P̄² dx = 1`. `s` is `sqrt(1 − x²)`.
fn legendre_table(x: f64, s: f64, l_max: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(tri_index(l_max, l_max) + 1, 0.0);
    let mut pmm = 1.0;
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        out[tri_index(m, m)] = pmm;
        if m == l_max {
            break;
        }
        let mf = m as f64;
        let mut p_prev = pmm;
        let mut p_cur = (2.0 * mf + 3.0).sqrt() * x * pmm;
        out[tri_index(m + 1, m)] = p_cur;
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let l1 = lf - 1.0;
            let b = ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
            let p_next = a * (x * p_cur - b * p_prev);
            out[tri_index(l, m)] = p_next;
            p_prev = p_cur;
            p_cur = p_next;
        }
    }
}

/// Value of the real basis function `Y_lm` at a point.
pub fn basis_value(l: usize, m: i64, w: &Point3) -> f64 {
    let mut table = Vec::new();
    let s = w.w1().hypot(w.w2());
    legendre_table(w.w3(), s, l, &mut table);
    let p = table[tri_index(l, m.unsigned_abs() as usize)];
    if m == 0 {
        return p;
    }
    let phi = w.w2().atan2(w.w1());
    let mf = m.unsigned_abs() as f64;
    if m > 0 {
        SQRT_2 * p * (mf * phi).cos()
    } else {
        SQRT_2 * p * (mf * phi).sin()
    }
}

/// A real function on the sphere given by its harmonic coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldFile", into = "FieldFile")]
pub struct HarmonicField {
    l_max: usize,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldFile {
    l_max: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<FieldFile> for HarmonicField {
    type Error = Error;
    fn try_from(f: FieldFile) -> Result<Self> {
        HarmonicField::new(f.l_max, f.coeffs)
    }
}

impl From<HarmonicField> for FieldFile {
    fn from(f: HarmonicField) -> Self {
        FieldFile {
            l_max: f.l_max,
            coeffs: f.coeffs,
        }
    }
}

impl HarmonicField {
    pub fn new(l_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != coeff_count(l_max) {
            return Err(Error::InvalidArgument(format!(
                "l_max {l_max} needs {} coefficients, got {}",
                coeff_count(l_max),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(HarmonicField { l_max, coeffs })
    }

    pub fn zeros(l_max: usize) -> Self {
        HarmonicField {
            l_max,
            coeffs: vec![0.0; coeff_count(l_max)],
        }
    }

    pub fn constant(l_max: usize, c: f64) -> Self {
        let mut f = Self::zeros(l_max);
        f.coeffs[0] = c;
        f
    }

    /// Field with a single nonzero coefficient.
    pub fn mode(l_max: usize, l: usize, m: i64, value: f64) -> Self {
        let mut f = Self::zeros(l_max.max(l));
        f.set(l, m, value);
        f
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        debug_assert!(m.unsigned_abs() as usize <= l);
        if l > self.l_max {
            return 0.0;
        }
        self.coeffs[coeff_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, value: f64) {
        assert!(l <= self.l_max && m.unsigned_abs() as usize <= l);
        self.coeffs[coeff_index(l, m)] = value;
    }

    /// `∫ u dω`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// Iterates `(l, m, coefficient)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, f64)> + '_ {
        (0..=self.l_max).flat_map(move |l| {
            let li = l as i64;
            (-li..=li).map(move |m| (l, m, self.coeffs[coeff_index(l, m)]))
        })
    }

    /// `∫|∇u|² dω = Σ l(l+1) u_lm²`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.iter()
            .map(|(l, _, c)| (l * (l + 1)) as f64 * c * c)
            .sum()
    }

    /// `∫|∇(u − v)|² dω` over the common support of both coefficient sets.
    pub fn energy_distance(&self, other: &HarmonicField) -> f64 {
        let l_max = self.l_max.max(other.l_max);
        (0..=l_max)
            .flat_map(|l| {
                let li = l as i64;
                (-li..=li).map(move |m| (l, m))
            })
            .map(|(l, m)| {
                let d = self.get(l, m) - other.get(l, m);
                (l * (l + 1)) as f64 * d * d
            })
            .sum()
    }

    /// `Σ l(l+1) u_lm v_lm = ∫ ∇u·∇v dω`.
    pub fn energy_inner(&self, other: &HarmonicField) -> f64 {
        let l_max = self.l_max.min(other.l_max);
        (1..=l_max)
            .flat_map(|l| {
                let li = l as i64;
                (-li..=li).map(move |m| (l, m))
            })
            .map(|(l, m)| (l * (l + 1)) as f64 * self.get(l, m) * other.get(l, m))
            .sum()
    }

    /// Sum of squared coefficients, `∫ u² dω`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Spectral Laplace–Beltrami operator (multiplier `−l(l+1)`).
    pub fn laplacian(&self) -> HarmonicField {
        let mut out = self.clone();
        for l in 0..=self.l_max {
            let li = l as i64;
            let mult = -((l * (l + 1)) as f64);
            for m in -li..=li {
                out.coeffs[coeff_index(l, m)] *= mult;
            }
        }
        out
    }

    /// Zero-pads or truncates to a new band limit.
    pub fn with_l_max(&self, l_max: usize) -> HarmonicField {
        let mut coeffs = vec![0.0; coeff_count(l_max)];
        let n = coeffs.len().min(self.coeffs.len());
        coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        HarmonicField { l_max, coeffs }
    }

    pub fn add(&self, other: &HarmonicField) -> HarmonicField {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &HarmonicField) -> HarmonicField {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &HarmonicField, sign: f64) -> HarmonicField {
        let l_max = self.l_max.max(other.l_max);
        let mut out = self.with_l_max(l_max);
        for (c, o) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *c += sign * o;
        }
        out
    }

    pub fn scaled(&self, k: f64) -> HarmonicField {
        HarmonicField {
            l_max: self.l_max,
            coeffs: self.coeffs.iter().map(|c| k * c).collect(),
        }
    }

    pub fn plus_constant(&self, c: f64) -> HarmonicField {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Pointwise evaluation at an arbitrary point, `O(l_max²)`.
    pub fn eval(&self, w: &Point3) -> f64 {
        let mut table = Vec::new();
        self.eval_with(w, &mut table)
    }

    fn eval_with(&self, w: &Point3, table: &mut Vec<f64>) -> f64 {
        let s = w.w1().hypot(w.w2());
        legendre_table(w.w3(), s, self.l_max, table);
        let e = if s > 0.0 {
            Complex64::new(w.w1() / s, w.w2() / s)
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut total = 0.0;
        let mut rot = Complex64::new(1.0, 0.0);
        for m in 0..=self.l_max {
            let mut c_sum = 0.0;
            let mut s_sum = 0.0;
            for l in m..=self.l_max {
                let p = table[tri_index(l, m)];
                c_sum += self.coeffs[coeff_index(l, m as i64)] * p;
                if m > 0 {
                    s_sum += self.coeffs[coeff_index(l, -(m as i64))] * p;
                }
            }
            if m == 0 {
                total += c_sum;
            } else {
                total += SQRT_2 * (c_sum * rot.re + s_sum * rot.im);
            }
            rot *= e;
        }
        total
    }

    /// Evaluates at many points in parallel.
    pub fn eval_many(&self, points: &[Point3]) -> Vec<f64> {
        points
            .par_iter()
            .map_init(Vec::new, |table, p| self.eval_with(p, table))
            .collect()
    }

    /// Random field for property sweeps: `(0,0)` uniform in `[-scale, scale]`,
    /// degree-`l` coefficients uniform in `[-scale, scale] / sqrt(2l + 1)` so
    /// every degree carries comparable power.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, l_max: usize, scale: f64) -> HarmonicField {
        let mut f = HarmonicField::zeros(l_max);
        for l in 0..=l_max {
            let amp = scale / ((2 * l + 1) as f64).sqrt();
            let li = l as i64;
            for m in -li..=li {
                f.coeffs[coeff_index(l, m)] = amp * rng.gen_range(-1.0..=1.0);
            }
        }
        f
    }
}

/// Samples aligned with the nodes of a grid.
#[derive(Debug, Clone)]
pub struct GridField<'g> {
    grid: &'g SphericalGrid,
    samples: Vec<f64>,
}

impl<'g> GridField<'g> {
    pub fn new(grid: &'g SphericalGrid, samples: Vec<f64>) -> Result<Self> {
        check_len(grid, samples.len())?;
        Ok(GridField { grid, samples })
    }

    pub fn grid(&self) -> &'g SphericalGrid {
        self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn integrate(&self) -> f64 {
        integrate(self.grid, &self.samples).expect("length checked on construction")
    }
}

fn require_band(grid: &SphericalGrid, l_max: usize) -> Result<()> {
    if grid.band_limit_exact() < l_max {
        return Err(Error::InsufficientGrid {
            required: l_max,
            available: grid.band_limit_exact(),
        });
    }
    Ok(())
}

fn trig_table(n: usize) -> (Vec<f64>, Vec<f64>) {
    let d = 2.0 * PI / n as f64;
    (0..n)
        .map(|i| ((d * i as f64).cos(), (d * i as f64).sin()))
        .unzip()
}

/// Evaluates a field on every node of a grid.
pub fn synthesize<'g>(f: &HarmonicField, grid: &'g SphericalGrid) -> Result<GridField<'g>> {
    require_band(grid, f.l_max)?;
    Ok(GridField {
        grid,
        samples: synthesize_unchecked(f, grid),
    })
}

fn synthesize_unchecked(f: &HarmonicField, grid: &SphericalGrid) -> Vec<f64> {
    let n_phi = grid.phi_count();
    let l_max = f.l_max;
    let (cos_t, sin_t) = trig_table(n_phi);
    let mut samples = vec![0.0; grid.len()];
    samples
        .par_chunks_mut(n_phi)
        .enumerate()
        .for_each_init(Vec::new, |table, (j, ring)| {
            legendre_table(grid.ring_cos()[j], grid.ring_sin()[j], l_max, table);
            let mut a = vec![0.0; l_max + 1];
            let mut b = vec![0.0; l_max + 1];
            for m in 0..=l_max {
                let mut c_sum = 0.0;
                let mut s_sum = 0.0;
                for l in m..=l_max {
                    let p = table[tri_index(l, m)];
                    c_sum += f.coeffs[coeff_index(l, m as i64)] * p;
                    if m > 0 {
                        s_sum += f.coeffs[coeff_index(l, -(m as i64))] * p;
                    }
                }
                let k = if m == 0 { 1.0 } else { SQRT_2 };
                a[m] = k * c_sum;
                b[m] = k * s_sum;
            }
            for (k, out) in ring.iter_mut().enumerate() {
                let mut v = 0.0;
                for m in 0..=l_max {
                    let idx = (m * k) % n_phi;
                    v += a[m] * cos_t[idx] + b[m] * sin_t[idx];
                }
                *out = v;
            }
        });
    samples
}

/// Quadrature projection of grid samples onto harmonics of degree `≤ l_max`.
pub fn analyze(g: &GridField<'_>, l_max: usize) -> Result<HarmonicField> {
    analyze_samples(g.grid, &g.samples, l_max)
}

pub fn analyze_samples(
    grid: &SphericalGrid,
    samples: &[f64],
    l_max: usize,
) -> Result<HarmonicField> {
    require_band(grid, l_max)?;
    check_len(grid, samples.len())?;
    let n_phi = grid.phi_count();
    let (cos_t, sin_t) = trig_table(n_phi);
    let per_ring: Vec<Vec<f64>> = samples
        .par_chunks(n_phi)
        .enumerate()
        .map_init(Vec::new, |table, (j, ring)| {
            legendre_table(grid.ring_cos()[j], grid.ring_sin()[j], l_max, table);
            let rw = grid.ring_weight()[j];
            let mut out = vec![0.0; coeff_count(l_max)];
            for m in 0..=l_max {
                let mut fc = 0.0;
                let mut fs = 0.0;
                for (k, v) in ring.iter().enumerate() {
                    let idx = (m * k) % n_phi;
                    fc += v * cos_t[idx];
                    fs += v * sin_t[idx];
                }
                let k = if m == 0 { rw } else { SQRT_2 * rw };
                for l in m..=l_max {
                    let p = k * table[tri_index(l, m)];
                    out[coeff_index(l, m as i64)] = p * fc;
                    if m > 0 {
                        out[coeff_index(l, -(m as i64))] = p * fs;
                    }
                }
            }
            out
        })
        .collect();
    let mut coeffs = vec![0.0; coeff_count(l_max)];
    for ring in &per_ring {
        for (c, r) in coeffs.iter_mut().zip(ring) {
            *c += r;
        }
    }
    HarmonicField::new(l_max, coeffs)
}

/// Samples of `f` and of `Δf` on every node.
pub fn laplacian_samples(f: &HarmonicField, grid: &SphericalGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    require_band(grid, f.l_max)?;
    Ok((
        synthesize_unchecked(f, grid),
        synthesize_unchecked(&f.laplacian(), grid),
    ))
}

/// A projected field together with an estimate of what the projection lost.
#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub field: HarmonicField,
    /// Dirichlet energy of the discarded modes, estimated on the grid.
    pub tail_energy: f64,
    /// `∫ (f − Pf)² dω`, estimated on the grid.
    pub tail_l2: f64,
}

/// Projects non-band-limited samples to `l_max` and estimates the tail from
/// the extra degrees the grid resolves plus the residual beyond them.
pub fn project(grid: &SphericalGrid, samples: &[f64], l_max: usize) -> Result<Projection> {
    require_band(grid, l_max)?;
    let l_ext = grid.band_limit_exact();
    let full = analyze_samples(grid, samples, l_ext)?;
    let recon = synthesize_unchecked(&full, grid);
    let resid: Vec<f64> = samples
        .iter()
        .zip(&recon)
        .map(|(s, r)| (s - r) * (s - r))
        .collect();
    let resid_l2 = integrate(grid, &resid)?;

    let mut mid_energy = 0.0;
    let mut mid_l2 = 0.0;
    for (l, _, c) in full.iter().filter(|(l, _, _)| *l > l_max) {
        mid_energy += (l * (l + 1)) as f64 * c * c;
        mid_l2 += c * c;
    }
    let beyond = ((l_ext + 1) * (l_ext + 2)) as f64;
    Ok(Projection {
        field: full.with_l_max(l_max),
        tail_energy: mid_energy + beyond * resid_l2,
        tail_l2: mid_l2 + resid_l2,
    })
}


#[cfg(test)]
#[allow(unused_imports)]
pub(crate) use tests::fd_energy;
