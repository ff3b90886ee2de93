//! Grid-refinement policy for integrals of non-band-limited integrands.
//!
//! A [`Quadrature`] owns a base grid and lazily builds the refinement
//! sequence (θ-nodes ×1.5 per step, φ = 2θ). A quantity is accepted once two
//! successive grids agree to the relative tolerance; past the θ-node cap the
//! finest value is returned with `converged = false`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{GridDescriptor, SphericalGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementPolicy {
    pub growth: f64,
    pub rel_tol: f64,
    pub max_theta: usize,
    /// Largest projection tail energy accepted from a field projection.
    pub tail_limit: f64,
}

impl Default for RefinementPolicy {
    fn default() -> Self {
        RefinementPolicy {
            growth: 1.5,
            rel_tol: 1e-9,
            max_theta: 512,
            tail_limit: 1e-6,
        }
    }
}

/// A value computed under the refinement policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refined<T> {
    pub value: T,
    /// Finest grid evaluated.
    pub grid: GridDescriptor,
    pub converged: bool,
    /// Relative change between the last two grids.
    pub last_change: f64,
}

impl<T> Refined<T> {
    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn require(self) -> Result<Refined<T>> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                last_change: self.last_change,
            })
        }
    }
}

/// Base grid plus refinement policy.
#[derive(Debug)]
pub struct Quadrature {
    levels: Vec<OnceLock<SphericalGrid>>,
    policy: RefinementPolicy,
}

impl Clone for Quadrature {
    fn clone(&self) -> Self {
        Quadrature {
            levels: self.levels.clone(),
            policy: self.policy,
        }
    }
}

impl Quadrature {
    pub fn new(base: SphericalGrid) -> Self {
        Self::with_policy(base, RefinementPolicy::default())
    }

    pub fn with_policy(base: SphericalGrid, policy: RefinementPolicy) -> Self {
        let mut theta = base.theta_count();
        let mut count = 1;
        while theta < policy.max_theta {
            theta = next_theta(theta, policy.growth).min(policy.max_theta);
            count += 1;
        }
        let levels: Vec<OnceLock<SphericalGrid>> = (0..count).map(|_| OnceLock::new()).collect();
        let _ = levels[0].set(base);
        Quadrature { levels, policy }
    }

    pub fn base(&self) -> &SphericalGrid {
        self.level(0)
    }

    pub fn policy(&self) -> &RefinementPolicy {
        &self.policy
    }

    /// Grid `k` of the refinement sequence (0 is the base grid).
    pub fn level(&self, k: usize) -> &SphericalGrid {
        self.levels[k].get_or_init(|| {
            let prev = self.level(k - 1);
            let theta =
                next_theta(prev.theta_count(), self.policy.growth).min(self.policy.max_theta);
            SphericalGrid::from_counts(theta, (2 * theta).max(prev.phi_count()))
                .expect("refined grid counts are positive")
        })
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Evaluates `f` on successively finer grids until two agree; `change`
    /// measures the relative difference between consecutive values.
    pub fn refine<T, F, D>(&self, f: F, change: D) -> Result<Refined<T>>
    where
        F: Fn(&SphericalGrid) -> Result<T>,
        D: Fn(&T, &T) -> f64,
    {
        let mut prev = f(self.level(0))?;
        let mut last_change = f64::INFINITY;
        for k in 1..self.levels.len() {
            let grid = self.level(k);
            let next = f(grid)?;
            last_change = change(&prev, &next);
            if last_change < self.policy.rel_tol {
                return Ok(Refined {
                    value: next,
                    grid: grid.descriptor(),
                    converged: true,
                    last_change,
                });
            }
            prev = next;
        }
        Ok(Refined {
            value: prev,
            grid: self.level(self.levels.len() - 1).descriptor(),
            converged: false,
            last_change,
        })
    }

    /// Refines a fixed-size vector of integrals with max-norm relative change.
    pub fn refine_array<const K: usize, F>(&self, f: F) -> Result<Refined<[f64; K]>>
    where
        F: Fn(&SphericalGrid) -> Result<[f64; K]>,
    {
        self.refine(f, |a, b| vector_change(a, b))
    }

    pub fn refine_scalar<F>(&self, f: F) -> Result<Refined<f64>>
    where
        F: Fn(&SphericalGrid) -> Result<f64>,
    {
        self.refine(f, |a, b| scalar_change(*a, *b))
    }
}

impl From<SphericalGrid> for Quadrature {
    fn from(grid: SphericalGrid) -> Self {
        Quadrature::new(grid)
    }
}

fn next_theta(theta: usize, growth: f64) -> usize {
    ((theta as f64 * growth).ceil() as usize).max(theta + 1)
}

/// `|a − b| / (1 + |b|)`.
pub fn scalar_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

/// `max |aᵢ − bᵢ| / (1 + max |bᵢ|)`.
pub fn vector_change(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    diff / (1.0 + scale)
}
