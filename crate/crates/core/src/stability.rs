//! Gradient-norm distance to the extremal manifold and the stability check
//! `I_{2/3}(u) ≥ dist²/6`.
//!
//! The manifold is charted by `τ(m) = dilation(e^{log λ}) ∘ translation(β)`.
//! For a band-limited `u`,
//!
//! ```text
//! ∫|∇(u − ψ_τ)|² = E(u) + 2∫ψ_τ Δu dω + E(ψ_τ),
//! ```
//!
//! where `E(ψ_τ) = (9/2)(artanh s − s)/s` depends only on `s = |a_τ|`, and
//! the middle term involves only the degrees of `u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convergence::{scalar_change, Quadrature};
use crate::error::{Error, Result};
use crate::functionals::{functional_i, CRITICAL_ALPHA};
use crate::harmonics::{laplacian_samples, project, HarmonicField};
use crate::lorentz::lorentz_lift;
use crate::mobius::ConformalMap;
use crate::nelder_mead::{cmp_points, NelderMead};
use crate::normalize::normalize;
use crate::sampling::random_plane_point;
use crate::sphere::{GridDescriptor, PlanePoint, Point3, SphericalGrid};

pub const MAX_LOG_LAMBDA: f64 = 2.772_588_722_239_781; // ln 16
pub const MAX_SHIFT: f64 = 8.0;
pub const SLACK_TOL: f64 = 1e-8;
const BOUNDARY_MARGIN: f64 = 1e-5;
const POLISH_STEP: f64 = 1e-3;
const MAX_POLISH_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub log_lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl ManifoldPoint {
    pub const IDENTITY: ManifoldPoint = ManifoldPoint {
        log_lambda: 0.0,
        beta1: 0.0,
        beta2: 0.0,
    };

    pub fn new(log_lambda: f64, beta1: f64, beta2: f64) -> Self {
        ManifoldPoint {
            log_lambda,
            beta1,
            beta2,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.log_lambda, self.beta1, self.beta2]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        ManifoldPoint::new(x[0], x[1], x[2])
    }

    pub fn shift_norm(&self) -> f64 {
        self.beta1.hypot(self.beta2)
    }

    pub fn in_box(&self) -> bool {
        self.log_lambda.abs() <= MAX_LOG_LAMBDA && self.shift_norm() <= MAX_SHIFT
    }

    pub fn on_boundary(&self) -> bool {
        self.log_lambda.abs() >= MAX_LOG_LAMBDA - BOUNDARY_MARGIN
            || self.shift_norm() >= MAX_SHIFT - BOUNDARY_MARGIN
    }

    /// Nearest point of the search box.
    pub fn clamped(&self) -> Self {
        let ll = self.log_lambda.clamp(-MAX_LOG_LAMBDA, MAX_LOG_LAMBDA);
        let r = self.shift_norm();
        let k = if r > MAX_SHIFT { MAX_SHIFT / r } else { 1.0 };
        ManifoldPoint::new(ll, self.beta1 * k, self.beta2 * k)
    }

    /// `z ↦ λ(z + β)`.
    pub fn to_map(&self) -> Result<ConformalMap> {
        let d = ConformalMap::dilation(self.log_lambda.exp())?;
        let t = ConformalMap::translation(&PlanePoint::new(self.beta1, self.beta2))?;
        Ok(d.compose(&t))
    }
}

/// `∫|∇ψ|² dω` for an extremal whose centre of mass has norm `s`.
pub fn extremal_energy(s: f64) -> f64 {
    if s < 1e-2 {
        let s2 = s * s;
        4.5 * s2 * (1.0 / 3.0 + s2 * (1.0 / 5.0 + s2 * (1.0 / 7.0 + s2 / 9.0)))
    } else {
        4.5 * (s.atanh() - s) / s
    }
}

/// `(Λ00, v)` with `J_τ^{-1/2}(ω) = Λ00 + v·ω`.
fn jacobian_row(tau: &ConformalMap) -> (f64, [f64; 3]) {
    let row = lorentz_lift(&tau.mobius).time_row();
    (row[0], [row[1], row[2], row[3]])
}

/// The distance objective for one field on one grid.
#[derive(Debug, Clone)]
pub struct Objective {
    energy_u: f64,
    nodes: Vec<Point3>,
    /// Quadrature weight times `Δu` at each node.
    weighted_laplacian: Vec<f64>,
    grid: GridDescriptor,
}

impl Objective {
    pub fn new(u: &HarmonicField, grid: &SphericalGrid) -> Result<Self> {
        let (_, lap) = laplacian_samples(u, grid)?;
        Ok(Objective {
            energy_u: u.dirichlet_energy(),
            nodes: grid.nodes().to_vec(),
            weighted_laplacian: lap.iter().zip(grid.weights()).map(|(d, w)| d * w).collect(),
            grid: grid.descriptor(),
        })
    }

    pub fn grid(&self) -> GridDescriptor {
        self.grid
    }

    /// `∫|∇(u − ψ_τ)|² dω`.
    pub fn at_map(&self, tau: &ConformalMap) -> f64 {
        let (t, v) = jacobian_row(tau);
        let vv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let cross: f64 = self
            .nodes
            .iter()
            .zip(&self.weighted_laplacian)
            .map(|(w, d)| d * (t + w.dot(&v)).ln())
            .sum();
        // ψ = −(3/2) ln(Λ00 + v·ω) up to a constant
        self.energy_u - 3.0 * cross + extremal_energy(vv / t)
    }

    /// `+∞` outside the search box.
    pub fn at(&self, m: &ManifoldPoint) -> f64 {
        if !m.in_box() {
            return f64::INFINITY;
        }
        match m.to_map() {
            Ok(tau) => self.at_map(&tau),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Builds objectives on successive refinement levels until the values at
/// `points` agree between two levels. Returns the level index with it.
fn resolved_objective(
    u: &HarmonicField,
    quad: &Quadrature,
    points: &[ManifoldPoint],
    first: usize,
) -> Result<(usize, Objective, bool)> {
    let levels = quad.level_count();
    let mut k = first.min(levels - 1);
    let mut obj = Objective::new(u, quad.level(k))?;
    let mut prev: Vec<f64> = points.iter().map(|m| obj.at(m)).collect();
    while k + 1 < levels {
        let next_obj = Objective::new(u, quad.level(k + 1))?;
        let next: Vec<f64> = points.iter().map(|m| next_obj.at(m)).collect();
        let change = prev
            .iter()
            .zip(&next)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| scalar_change(*a, *b))
            .fold(0.0, f64::max);
        k += 1;
        obj = next_obj;
        if change < quad.policy().rel_tol {
            return Ok((k, obj, true));
        }
        prev = next;
    }
    Ok((k, obj, false))
}

/// Tail energy above `l_max` of `ψ_{τ(m)}` on the base grid.
pub fn psi_tail_energy(m: &ManifoldPoint, l_max: usize, quad: &Quadrature) -> Result<f64> {
    let tau = m.to_map()?;
    let samples = crate::sphere::sample(quad.base(), |w| 1.5 * tau.jacobian_sqrt(w).ln());
    Ok(project(quad.base(), &samples, l_max)?.tail_energy)
}

fn check_tail(m: &ManifoldPoint, l_max: usize, quad: &Quadrature) -> Result<f64> {
    let tail = psi_tail_energy(m, l_max, quad)?;
    let limit = quad.policy().tail_limit;
    if tail > limit {
        return Err(Error::TailTooLarge { tail, limit });
    }
    Ok(tail)
}

/// `∫|∇(u − ψ_{τ(m)})|² dω`, refined until converged.
pub fn grad_distance(
    u: &HarmonicField,
    m: &ManifoldPoint,
    l_max: usize,
    quad: &Quadrature,
) -> Result<f64> {
    check_tail(m, l_max, quad)?;
    let (_, obj, converged) = resolved_objective(u, quad, &[*m], 0)?;
    if !converged {
        return Err(Error::NotConverged {
            last_change: f64::NAN,
        });
    }
    Ok(obj.at(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub seed: u64,
    pub random_starts: usize,
    pub simplex: NelderMead,
    /// Most negative slack accepted on a converged run.
    pub slack_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            seed: 0,
            random_starts: 3,
            simplex: NelderMead::default(),
            slack_tol: SLACK_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Identity,
    Normalization,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub kind: StartKind,
    pub start: ManifoldPoint,
    pub start_value: f64,
    pub argmin: ManifoldPoint,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub hit_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSearch {
    pub distance: f64,
    pub argmin: ManifoldPoint,
    pub starts: Vec<StartSummary>,
    /// Grid the final value was resolved on.
    pub grid: GridDescriptor,
    pub converged: bool,
    pub hit_boundary: bool,
    pub all_starts_hit_boundary: bool,
    /// Objective at the normalization start before any search.
    pub warm_start_value: Option<f64>,
    /// `warm_start_value ≤ 6·distance`.
    pub warm_start_dominant: Option<bool>,
    pub psi_tail_energy: f64,
}

fn warm_start(u: &HarmonicField, quad: &Quadrature) -> Option<ManifoldPoint> {
    let n = normalize(u, quad).ok()?;
    let x0 = n.x0.finite()?;
    Some(ManifoldPoint::new(-n.lambda0.ln(), -x0.re, -x0.im))
}

fn random_start<R: Rng>(rng: &mut R) -> ManifoldPoint {
    let ll = rng.gen_range(-MAX_LOG_LAMBDA..=MAX_LOG_LAMBDA);
    let b = random_plane_point(rng, MAX_SHIFT)
        .finite()
        .unwrap_or_default();
    ManifoldPoint::new(ll, b.re, b.im)
}

pub fn distance_to_manifold(
    u: &HarmonicField,
    l_max: usize,
    quad: &Quadrature,
) -> Result<ManifoldSearch> {
    distance_to_manifold_with(u, l_max, quad, &SearchOptions::default())
}

/// Multi-start simplex search over the chart box.
pub fn distance_to_manifold_with(
    u: &HarmonicField,
    l_max: usize,
    quad: &Quadrature,
    opts: &SearchOptions,
) -> Result<ManifoldSearch> {
    let warm = warm_start(u, quad).map(|m| m.clamped());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![(StartKind::Identity, ManifoldPoint::IDENTITY)];
    if let Some(m) = warm {
        starts.push((StartKind::Normalization, m));
    }
    starts.extend((0..opts.random_starts).map(|_| (StartKind::Random, random_start(&mut rng))));

    let anchors: Vec<ManifoldPoint> = starts.iter().take(2).map(|s| s.1).collect();
    let (mut level, mut obj, _) = resolved_objective(u, quad, &anchors, 0)?;

    let mut summaries: Vec<StartSummary> = starts
        .par_iter()
        .map(|&(kind, start)| {
            let r = opts
                .simplex
                .minimize(|x| obj.at(&ManifoldPoint::from_array(*x)), start.as_array());
            let argmin = ManifoldPoint::from_array(r.x);
            StartSummary {
                kind,
                start,
                start_value: obj.at(&start),
                argmin,
                value: r.value,
                iterations: r.iterations,
                evaluations: r.evaluations,
                converged: r.converged,
                hit_boundary: argmin.on_boundary(),
            }
        })
        .collect();

    let best = *summaries
        .iter()
        .min_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then_with(|| cmp_points(&a.argmin.as_array(), &b.argmin.as_array()))
        })
        .expect("at least one start");

    let mut argmin = best.argmin;
    let mut value = best.value;
    let mut converged = best.converged;
    let mut resolved = false;
    for _ in 0..MAX_POLISH_ROUNDS {
        let (k, finer, ok) = resolved_objective(u, quad, &[argmin], level)?;
        if k == level || scalar_change(value, finer.at(&argmin)) < quad.policy().rel_tol {
            value = finer.at(&argmin);
            resolved = ok || k == level;
            break;
        }
        level = k;
        obj = finer;
        let polish = NelderMead {
            initial_step: POLISH_STEP,
            ..opts.simplex
        };
        let r = polish.minimize(
            |x| obj.at(&ManifoldPoint::from_array(*x)),
            argmin.as_array(),
        );
        argmin = ManifoldPoint::from_array(r.x);
        value = r.value;
        converged = r.converged;
    }

    let warm_start_value = summaries
        .iter()
        .find(|s| s.kind == StartKind::Normalization)
        .map(|s| s.start_value);
    let distance = value.max(0.0);
    let hit_boundary = argmin.on_boundary();
    let all_starts_hit_boundary = summaries.iter().all(|s| s.hit_boundary);
    summaries.sort_by_key(|s| s.kind as u8);
    let psi_tail_energy = check_tail(&argmin, l_max, quad)?;
    Ok(ManifoldSearch {
        distance,
        argmin,
        starts: summaries,
        grid: obj.grid(),
        converged: converged && resolved && !hit_boundary,
        hit_boundary,
        all_starts_hit_boundary,
        warm_start_value,
        warm_start_dominant: warm_start_value.map(|w| w <= 6.0 * distance + 1e-9),
        psi_tail_energy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `I_{2/3}(u)`.
    pub deficit: f64,
    pub distance: f64,
    /// `deficit − distance/6`.
    pub slack: f64,
    pub argmin: ManifoldPoint,
    pub converged: bool,
    pub search: ManifoldSearch,
}

pub fn stability_check(
    u: &HarmonicField,
    l_max: usize,
    quad: &Quadrature,
) -> Result<StabilityReport> {
    stability_check_with(u, l_max, quad, &SearchOptions::default())
}

/// Deficit, distance and slack; a converged run with `slack < −slack_tol` is an
/// [`Error::InvariantViolation`].
pub fn stability_check_with(
    u: &HarmonicField,
    l_max: usize,
    quad: &Quadrature,
    opts: &SearchOptions,
) -> Result<StabilityReport> {
    let f = functional_i(CRITICAL_ALPHA, u, quad)?;
    let search = distance_to_manifold_with(u, l_max, quad, opts)?;
    let slack = f.value - search.distance / 6.0;
    let converged = f.converged && search.converged;
    if converged && slack < -opts.slack_tol {
        return Err(Error::InvariantViolation(format!(
            "stability slack {slack:e} (deficit {:e}, distance {:e})",
            f.value, search.distance
        )));
    }
    Ok(StabilityReport {
        deficit: f.value,
        distance: search.distance,
        slack,
        argmin: search.argmin,
        converged,
        search,
    })
}
