//! Stereographic geometry and quadrature on the unit sphere.
//!
//! All integrals exposed here are taken against the normalized surface
//! measure `dω = dσ / 4π`, so the sphere has total mass one. The only
//! un-normalized quantity is [`cap_area`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold on `w3` above which a point is treated as the north pole.
pub const NORTH_POLE_TOL: f64 = 1e-14;

/// A point on the unit sphere. Construction always renormalizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    w: [f64; 3],
}

impl Point3 {
    pub const NORTH: Point3 = Point3 { w: [0.0, 0.0, 1.0] };
    pub const SOUTH: Point3 = Point3 {
        w: [0.0, 0.0, -1.0],
    };

    /// Builds a unit vector from a nonzero direction.
    pub fn new(w1: f64, w2: f64, w3: f64) -> Self {
        let n = (w1 * w1 + w2 * w2 + w3 * w3).sqrt();
        debug_assert!(n > 0.0, "Point3::new called with the zero vector");
        let mut p = Point3 {
            w: [w1 / n, w2 / n, w3 / n],
        };
        // one extra pass brings |w| to within an ulp or two of 1
        let n2 = p.norm_sq().sqrt();
        if n2 != 1.0 {
            p.w.iter_mut().for_each(|c| *c /= n2);
        }
        p
    }

    pub fn from_spherical(cos_theta: f64, sin_theta: f64, phi: f64) -> Self {
        Self::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta)
    }

    #[inline]
    pub fn w1(&self) -> f64 {
        self.w[0]
    }
    #[inline]
    pub fn w2(&self) -> f64 {
        self.w[1]
    }
    #[inline]
    pub fn w3(&self) -> f64 {
        self.w[2]
    }
    #[inline]
    pub fn as_array(&self) -> [f64; 3] {
        self.w
    }

    pub fn dot(&self, v: &[f64; 3]) -> f64 {
        self.w[0] * v[0] + self.w[1] * v[1] + self.w[2] * v[2]
    }

    fn norm_sq(&self) -> f64 {
        self.w.iter().map(|c| c * c).sum()
    }

    /// Reflection `z ↦ z̄` in stereographic coordinates.
    pub fn conj(&self) -> Self {
        Point3 {
            w: [self.w[0], -self.w[1], self.w[2]],
        }
    }

    /// Great-circle distance.
    pub fn distance(&self, other: &Point3) -> f64 {
        let d = [
            self.w[0] - other.w[0],
            self.w[1] - other.w[1],
            self.w[2] - other.w[2],
        ];
        let chord = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        2.0 * (0.5 * chord).min(1.0).asin()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(w: [f64; 3]) -> Self {
        Point3::new(w[0], w[1], w[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.w
    }
}

/// A point of the extended plane `ℂ ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanePoint {
    Finite(Complex64),
    Infinity,
}

impl PlanePoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        PlanePoint::Finite(Complex64::new(x1, x2))
    }

    pub fn finite(&self) -> Option<Complex64> {
        match self {
            PlanePoint::Finite(z) => Some(*z),
            PlanePoint::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, PlanePoint::Infinity)
    }
}

/// Stereographic projection from the north pole.
pub fn stereo_project(w: &Point3) -> PlanePoint {
    let [w1, w2, w3] = w.as_array();
    if w3 >= 1.0 - NORTH_POLE_TOL {
        return PlanePoint::Infinity;
    }
    // 1 - w3 cancels badly near the north pole; use (w1² + w2²)/(1 + w3) there
    let denom = if w3 > 0.0 {
        (w1 * w1 + w2 * w2) / (1.0 + w3)
    } else {
        1.0 - w3
    };
    PlanePoint::Finite(Complex64::new(w1 / denom, w2 / denom))
}

/// Inverse stereographic projection; infinity maps to the north pole.
pub fn stereo_inverse(x: &PlanePoint) -> Point3 {
    match x {
        PlanePoint::Infinity => Point3::NORTH,
        PlanePoint::Finite(z) => {
            let r2 = z.norm_sqr();
            if r2 > 1.0 {
                // divide through by |z|² to keep the third component accurate
                let inv = 1.0 / r2;
                let s = 1.0 / (1.0 + inv);
                Point3::new(2.0 * z.re * inv * s, 2.0 * z.im * inv * s, (1.0 - inv) * s)
            } else {
                let s = 1.0 / (1.0 + r2);
                Point3::new(2.0 * z.re * s, 2.0 * z.im * s, (r2 - 1.0) * s)
            }
        }
    }
}

/// Area `2π(1 − cos r)` of a geodesic cap of radius `r`, un-normalized.
pub fn cap_area(r: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&r) {
        return Err(Error::InvalidArgument(format!(
            "cap radius {r} outside [0, π]"
        )));
    }
    // 1 − cos r = 2 sin²(r/2), without the cancellation
    let s = (0.5 * r).sin();
    Ok(4.0 * PI * s * s)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes in descending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Serializable description of a grid; nodes and weights are regenerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub theta_count: usize,
    pub phi_count: usize,
    pub band_limit_exact: usize,
}

impl GridDescriptor {
    pub fn build(&self) -> Result<SphericalGrid> {
        SphericalGrid::from_counts(self.theta_count, self.phi_count)
    }
}

/// Gauss–Legendre in `cos θ` crossed with a uniform azimuthal grid.
///
/// Nodes are stored ring by ring: node `j * phi_count + k` sits at
/// `cos θ = ring_cos[j]`, `φ = 2πk / phi_count`. `band_limit_exact` is the
/// largest `L` for which every product of two harmonics of degree `≤ L` is
/// integrated exactly, so projection at band `L` is exact.
#[derive(Debug, Clone)]
pub struct SphericalGrid {
    nodes: Vec<Point3>,
    weights: Vec<f64>,
    ring_cos: Vec<f64>,
    ring_sin: Vec<f64>,
    ring_weight: Vec<f64>,
    theta_count: usize,
    phi_count: usize,
    band_limit_exact: usize,
}

impl SphericalGrid {
    pub fn from_counts(theta_count: usize, phi_count: usize) -> Result<Self> {
        if theta_count == 0 || phi_count == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one ring and one azimuthal node".into(),
            ));
        }
        let (x, w) = gauss_legendre(theta_count);
        let ring_sin: Vec<f64> = x.iter().map(|&c| ((1.0 - c) * (1.0 + c)).sqrt()).collect();
        let dphi = 2.0 * PI / phi_count as f64;
        let mut nodes = Vec::with_capacity(theta_count * phi_count);
        for j in 0..theta_count {
            for k in 0..phi_count {
                nodes.push(Point3::from_spherical(x[j], ring_sin[j], dphi * k as f64));
            }
        }
        // normalized measure: GL weights sum to 2, azimuth contributes 1/phi_count
        let raw_total: f64 = pairwise_sum(&w) * phi_count as f64;
        let ring_weight: Vec<f64> = w.iter().map(|wj| wj / raw_total).collect();
        let weights = ring_weight
            .iter()
            .flat_map(|&rw| std::iter::repeat_n(rw, phi_count))
            .collect();
        let band_limit_exact = (theta_count - 1).min((phi_count - 1) / 2);
        Ok(SphericalGrid {
            nodes,
            weights,
            ring_cos: x,
            ring_sin,
            ring_weight,
            theta_count,
            phi_count,
            band_limit_exact,
        })
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            theta_count: self.theta_count,
            phi_count: self.phi_count,
            band_limit_exact: self.band_limit_exact,
        }
    }

    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn theta_count(&self) -> usize {
        self.theta_count
    }
    pub fn phi_count(&self) -> usize {
        self.phi_count
    }
    pub fn band_limit_exact(&self) -> usize {
        self.band_limit_exact
    }
    pub(crate) fn ring_cos(&self) -> &[f64] {
        &self.ring_cos
    }
    pub(crate) fn ring_sin(&self) -> &[f64] {
        &self.ring_sin
    }
    pub(crate) fn ring_weight(&self) -> &[f64] {
        &self.ring_weight
    }

    /// Next grid in the refinement sequence: θ-nodes ×1.5, φ matched.
    pub fn refined(&self, growth: f64) -> Result<SphericalGrid> {
        let theta = ((self.theta_count as f64) * growth).ceil() as usize;
        let theta = theta.max(self.theta_count + 1);
        SphericalGrid::from_counts(theta, 2 * theta)
    }
}

/// Gauss–Legendre grid resolving harmonics up to `target_band`.
pub fn build_grid(target_band: usize, oversample: f64) -> Result<SphericalGrid> {
    if !(oversample >= 1.0) || !oversample.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "oversample must be a finite number ≥ 1, got {oversample}"
        )));
    }
    let theta = (oversample * (target_band as f64 + 1.0)).ceil() as usize;
    let theta = theta.max(target_band + 1);
    SphericalGrid::from_counts(theta, (2 * theta).max(2 * target_band + 1))
}

/// `∫ f dω` as a weighted pairwise sum over the grid nodes.
pub fn integrate(grid: &SphericalGrid, samples: &[f64]) -> Result<f64> {
    check_len(grid, samples.len())?;
    let w = grid.weights();
    Ok(pairwise_by(samples.len(), &|i| w[i] * samples[i]))
}

/// Several integrals at once; `f(i)` returns the integrand values at node `i`.
pub fn integrate_with<const K: usize, F>(grid: &SphericalGrid, f: F) -> [f64; K]
where
    F: Fn(usize, &Point3) -> [f64; K] + Sync,
{
    let w = grid.weights();
    let nodes = grid.nodes();
    pairwise_array(nodes.len(), &|i| {
        let mut v = f(i, &nodes[i]);
        v.iter_mut().for_each(|c| *c *= w[i]);
        v
    })
}

pub(crate) fn check_len(grid: &SphericalGrid, got: usize) -> Result<()> {
    if got != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got,
        });
    }
    Ok(())
}

const PAIRWISE_BLOCK: usize = 64;
const PARALLEL_CUTOFF: usize = 1 << 14;

/// Pairwise summation with a fixed split structure (reproducible under rayon).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_by(values.len(), &|i| values[i])
}

fn pairwise_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: &F) -> f64 {
    fn rec<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
        let len = hi - lo;
        if len <= PAIRWISE_BLOCK {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + len / 2;
        if len >= PARALLEL_CUTOFF {
            let (a, b) = rayon::join(|| rec(lo, mid, f), || rec(mid, hi, f));
            a + b
        } else {
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, n, f)
}

fn pairwise_array<const K: usize, F: Fn(usize) -> [f64; K] + Sync>(n: usize, f: &F) -> [f64; K] {
    fn add<const K: usize>(mut a: [f64; K], b: [f64; K]) -> [f64; K] {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        a
    }
    fn rec<const K: usize, F: Fn(usize) -> [f64; K] + Sync>(
        lo: usize,
        hi: usize,
        f: &F,
    ) -> [f64; K] {
        let len = hi - lo;
        if len <= PAIRWISE_BLOCK {
            return (lo..hi).map(f).fold([0.0; K], add);
        }
        let mid = lo + len / 2;
        if len >= PARALLEL_CUTOFF {
            let (a, b) = rayon::join(|| rec(lo, mid, f), || rec(mid, hi, f));
            add(a, b)
        } else {
            add(rec(lo, mid, f), rec(mid, hi, f))
        }
    }
    rec(0, n, f)
}

/// Evaluates `f` at every grid node, in parallel, preserving node order.
pub fn sample<F>(grid: &SphericalGrid, f: F) -> Vec<f64>
where
    F: Fn(&Point3) -> f64 + Sync + Send,
{
    grid.nodes().par_iter().map(f).collect()
}
