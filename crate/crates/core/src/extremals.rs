//! The extremal family `ψ_τ = (3/4) ln J_τ + c_τ`.

use serde::{Deserialize, Serialize};

use crate::convergence::{Quadrature, Refined};
use crate::error::{Error, Result};
use crate::harmonics::{laplacian_samples, project, Projection};
use crate::lorentz::lorentz_lift;
use crate::mobius::{ConformalMap, Generator};
use crate::sphere::{integrate_with, GridDescriptor, Point3, SphericalGrid};

const MASS_FLOOR_TOL: f64 = 1e-10;
const NORMALIZER_TOL: f64 = 1e-8;

/// A conformal map with the integrals that define its extremal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremal {
    pub tau: ConformalMap,
    /// `M_τ = ∫ J_τ^{3/2} dω`.
    pub mass: f64,
    /// `a_τ = ∫ ω J_τ^{3/2} dω / M_τ`.
    pub com: [f64; 3],
    /// `c_τ = −(1/2) ln M_τ`.
    pub normalizer: f64,
    #[serde(skip_serializing, default)]
    pub grid_used: Option<GridDescriptor>,
}

impl Extremal {
    /// `ψ_τ(ω)`.
    pub fn psi(&self, w: &Point3) -> f64 {
        1.5 * self.tau.jacobian_sqrt(w).ln() + self.normalizer
    }

    /// `e^{2ψ_τ(ω)} = J_τ^{3/2} / M_τ`.
    pub fn density(&self, w: &Point3) -> f64 {
        self.tau.jacobian_sqrt(w).powi(3) / self.mass
    }

    /// `|∇ψ_τ(ω)|²`, exact.
    ///
    /// With `J^{-1/2}(ω) = Λ00 + v·ω` from the lift, `ψ = −(3/2) ln(Λ00 + v·ω) + c`
    /// and the tangential gradient follows in closed form.
    pub fn gradient_density(&self, w: &Point3) -> f64 {
        let w = if self.tau.reflect { w.conj() } else { *w };
        let row = lorentz_lift(&self.tau.mobius).time_row();
        let v = [row[1], row[2], row[3]];
        let vw = w.dot(&v);
        let vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let den = row[0] + vw;
        2.25 * (vv - vw * vw).max(0.0) / (den * den)
    }

    /// `∫ |∇ψ_τ|² dω` under the refinement policy.
    pub fn dirichlet_energy(&self, quad: &Quadrature) -> Result<Refined<f64>> {
        quad.refine_scalar(|g| Ok(integrate_with(g, |_, w| [self.gradient_density(w)])[0]))
    }

    pub fn com_norm(&self) -> f64 {
        norm3(&self.com)
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `[∫J^{3/2}, ∫ω₁J^{3/2}, ∫ω₂J^{3/2}, ∫ω₃J^{3/2}]` on one grid.
fn moments(tau: &ConformalMap, grid: &SphericalGrid) -> [f64; 4] {
    integrate_with(grid, |_, w| {
        let j = tau.jacobian_sqrt(w).powi(3);
        [j, w.w1() * j, w.w2() * j, w.w3() * j]
    })
}

fn refined_moments(tau: &ConformalMap, quad: &Quadrature) -> Result<Refined<[f64; 4]>> {
    quad.refine_array(|g| Ok(moments(tau, g)))?.require()
}

pub fn mass_numeric(tau: &ConformalMap, quad: &Quadrature) -> Result<f64> {
    Ok(refined_moments(tau, quad)?.value[0])
}

pub fn com_numeric(tau: &ConformalMap, quad: &Quadrature) -> Result<[f64; 3]> {
    let m = refined_moments(tau, quad)?.value;
    Ok([m[1] / m[0], m[2] / m[0], m[3] / m[0]])
}

pub fn mass_closed_form(g: &Generator) -> Result<f64> {
    Ok(match *g {
        Generator::Dilation { lambda } => {
            positive_lambda(lambda)?;
            (1.0 + lambda * lambda) / (2.0 * lambda)
        }
        Generator::Translation { target } => {
            let p3 = finite_target(&target)?;
            0.5 * (3.0 - p3) / (1.0 - p3)
        }
        Generator::Rotation { .. } | Generator::Inversion => 1.0,
    })
}

pub fn com_closed_form(g: &Generator) -> Result<[f64; 3]> {
    Ok(match *g {
        Generator::Dilation { lambda } => {
            positive_lambda(lambda)?;
            let l2 = lambda * lambda;
            [0.0, 0.0, (1.0 - l2) / (1.0 + l2)]
        }
        Generator::Translation { target } => {
            let p3 = finite_target(&target)?;
            let k = 1.0 / (3.0 - p3);
            [
                -2.0 * target.w1() * k,
                -2.0 * target.w2() * k,
                (1.0 + p3) * k,
            ]
        }
        Generator::Rotation { .. } | Generator::Inversion => [0.0; 3],
    })
}

fn positive_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dilation factor {lambda}")))
    }
}

fn finite_target(p: &Point3) -> Result<f64> {
    if crate::sphere::stereo_project(p).is_infinite() {
        Err(Error::InvalidArgument(
            "translation to the north pole".into(),
        ))
    } else {
        Ok(p.w3())
    }
}

/// Mass and centre of mass read off the Lorentz lift: `J^{-1/2} = Λ00(1 − a·ω)`,
/// so `M_τ = Λ00` and `a_τ = −(Λ01, Λ02, Λ03)/Λ00`.
pub fn mass_com_from_lift(tau: &ConformalMap) -> (f64, [f64; 3]) {
    let row = lorentz_lift(&tau.mobius).time_row();
    let a = [-row[1] / row[0], -row[2] / row[0], -row[3] / row[0]];
    let a = if tau.reflect { [a[0], -a[1], a[2]] } else { a };
    (row[0], a)
}

/// Computes mass, centre of mass and normalizer, then checks the extremal
/// invariants (`M ≥ 1`, `|a| < 1`, `e^{4c} = 1 − |a|²`).
pub fn build_extremal(tau: &ConformalMap, quad: &Quadrature) -> Result<Extremal> {
    let r = refined_moments(tau, quad)?;
    let m = r.value;
    let mass = m[0];
    let com = [m[1] / mass, m[2] / mass, m[3] / mass];
    let normalizer = -0.5 * mass.ln();
    let e = Extremal {
        tau: *tau,
        mass,
        com,
        normalizer,
        grid_used: Some(r.grid),
    };
    check_extremal(&e)?;
    Ok(e)
}

fn check_extremal(e: &Extremal) -> Result<()> {
    if !(e.mass >= 1.0 - MASS_FLOOR_TOL) {
        return Err(Error::InvariantViolation(format!(
            "mass {} below 1",
            e.mass
        )));
    }
    let a2 = e.com.iter().map(|x| x * x).sum::<f64>();
    if !(a2 < 1.0) {
        return Err(Error::InvariantViolation(format!(
            "centre of mass outside the unit ball (|a|² = {a2})"
        )));
    }
    let gap = ((4.0 * e.normalizer).exp() - (1.0 - a2)).abs();
    if !(gap <= NORMALIZER_TOL) {
        return Err(Error::InvariantViolation(format!(
            "e^(4c) differs from 1 − |a|² by {gap:e}"
        )));
    }
    Ok(())
}

/// `ψ_τ` projected to degree `l_max` on the base grid, with its tail estimate.
pub fn psi_field(e: &Extremal, l_max: usize, quad: &Quadrature) -> Result<Projection> {
    let p = psi_projection(e, l_max, quad.base())?;
    let limit = quad.policy().tail_limit;
    if p.tail_energy > limit {
        return Err(Error::TailTooLarge {
            tail: p.tail_energy,
            limit,
        });
    }
    Ok(p)
}

/// Projection without the tail check.
pub fn psi_projection(e: &Extremal, l_max: usize, grid: &SphericalGrid) -> Result<Projection> {
    let samples = crate::sphere::sample(grid, |w| e.psi(w));
    project(grid, &samples, l_max)
}

/// `max |J^{1/2} − M(1 − |a|²)/(1 − a·ω)|` over the grid nodes.
pub fn tauhalf_residual(e: &Extremal, grid: &SphericalGrid) -> f64 {
    let a2 = e.com.iter().map(|x| x * x).sum::<f64>();
    let r = crate::sphere::sample(grid, |w| {
        let predicted = e.mass * (1.0 - a2) / (1.0 - w.dot(&e.com));
        (e.tau.jacobian_sqrt(w) - predicted).abs()
    });
    r.into_iter().fold(0.0, f64::max)
}

/// Sup over the base grid of `|(2/3)Δψ + (1 − a·ω)/(1 − |a|²) e^{2ψ} − 1|`,
/// with `ψ` the degree-`l_max` projection.
pub fn el_residual(e: &Extremal, l_max: usize, quad: &Quadrature) -> Result<f64> {
    let grid = quad.base();
    let psi = psi_field(e, l_max, quad)?.field;
    let a2 = e.com.iter().map(|x| x * x).sum::<f64>();
    let (values, lap) = laplacian_samples(&psi, grid)?;
    let worst = grid
        .nodes()
        .iter()
        .zip(values.iter().zip(&lap))
        .map(|(w, (v, d))| {
            let weight = (1.0 - w.dot(&e.com)) / (1.0 - a2);
            ((2.0 / 3.0) * d + weight * (2.0 * v).exp() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}
