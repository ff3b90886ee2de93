//! The functionals `I_α` and `J_α`, and the conformal action `u ↦ u∘τ + ψ_τ`.
//!
//! Energy and mean come exactly from the coefficients; the exponential
//! moments `∫e^{2u}` and `∫ωᵢe^{2u}` go through the refinement policy.

use serde::{Deserialize, Serialize};

use crate::convergence::{scalar_change, Quadrature, Refined};
use crate::error::{Error, Result};
use crate::extremals::{build_extremal, Extremal};
use crate::harmonics::{project, synthesize, HarmonicField, Projection};
use crate::mobius::ConformalMap;
use crate::sphere::{integrate_with, GridDescriptor, SphericalGrid};

pub const CRITICAL_ALPHA: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub alpha: f64,
    /// `∫|∇u|² dω`.
    pub energy: f64,
    /// `∫u dω`.
    pub mean: f64,
    /// `ln ∫e^{2u} dω`.
    pub log_mass: f64,
    /// `(∫e^{2u})² − Σᵢ(∫ωᵢe^{2u})²`.
    pub lorentzian: f64,
    pub value: f64,
    pub grid: GridDescriptor,
    pub converged: bool,
}

/// `[∫e^{2u}, ∫ω₁e^{2u}, ∫ω₂e^{2u}, ∫ω₃e^{2u}]` on one grid.
pub fn exp_moments(u: &HarmonicField, grid: &SphericalGrid) -> Result<[f64; 4]> {
    let samples = if grid.band_limit_exact() >= u.l_max() {
        synthesize(u, grid)?.into_samples()
    } else {
        u.eval_many(grid.nodes())
    };
    Ok(integrate_with(grid, |i, w| {
        let e = (2.0 * samples[i]).exp();
        [e, w.w1() * e, w.w2() * e, w.w3() * e]
    }))
}

fn lorentzian(m: &[f64; 4]) -> f64 {
    m[0] * m[0] - m[1] * m[1] - m[2] * m[2] - m[3] * m[3]
}

fn i_value(alpha: f64, energy: f64, mean: f64, m: &[f64; 4]) -> f64 {
    alpha * energy + 2.0 * mean - 0.5 * lorentzian(m).ln()
}

/// `I_α(u) = α∫|∇u|² + 2∫u − (1/2) ln[(∫e^{2u})² − Σ(∫ωᵢe^{2u})²]`.
///
/// Grids are refined until the value moves by less than the policy
/// tolerance; `converged` records whether that happened below the cap.
pub fn functional_i(alpha: f64, u: &HarmonicField, quad: &Quadrature) -> Result<FunctionalReport> {
    let energy = u.dirichlet_energy();
    let mean = u.mean();
    let r: Refined<[f64; 4]> = quad.refine(
        |g| exp_moments(u, g),
        |a, b| {
            scalar_change(
                i_value(alpha, energy, mean, a),
                i_value(alpha, energy, mean, b),
            )
        },
    )?;
    let m = r.value;
    let lor = lorentzian(&m);
    if !(lor > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "non-positive lorentzian {lor:e}"
        )));
    }
    Ok(FunctionalReport {
        alpha,
        energy,
        mean,
        log_mass: m[0].ln(),
        lorentzian: lor,
        value: alpha * energy + 2.0 * mean - 0.5 * lor.ln(),
        grid: r.grid,
        converged: r.converged,
    })
}

/// `J_α(u) = α∫|∇u|² + 2∫u − ln ∫e^{2u}`.
pub fn onofri_j(alpha: f64, u: &HarmonicField, quad: &Quadrature) -> Result<f64> {
    let energy = u.dirichlet_energy();
    let mean = u.mean();
    let r = quad
        .refine_scalar(|g| Ok(exp_moments(u, g)?[0]))?
        .require()?;
    Ok(alpha * energy + 2.0 * mean - r.value.ln())
}

/// `I_α(u) − (α − 2/3)∫|∇u|²`.
pub fn cg_bound_slack(alpha: f64, u: &HarmonicField, quad: &Quadrature) -> Result<f64> {
    if !(alpha >= CRITICAL_ALPHA) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} below the critical value 2/3"
        )));
    }
    let r = functional_i(alpha, u, quad)?;
    Ok(r.value - (alpha - CRITICAL_ALPHA) * r.energy)
}

/// Samples of `u∘τ + ψ_τ` on the grid nodes.
pub fn transformed_samples(u: &HarmonicField, e: &Extremal, grid: &SphericalGrid) -> Vec<f64> {
    let images: Vec<_> = grid.nodes().iter().map(|w| e.tau.apply(w)).collect();
    let composed = u.eval_many(&images);
    let psi = crate::sphere::sample(grid, |w| e.psi(w));
    composed.iter().zip(&psi).map(|(a, b)| a + b).collect()
}

/// `u_τ = u∘τ + ψ_τ`, projected to `l_max` on the base grid.
pub fn transform(
    u: &HarmonicField,
    tau: &ConformalMap,
    l_max: usize,
    quad: &Quadrature,
) -> Result<Projection> {
    let e = build_extremal(tau, quad)?;
    transform_with(u, &e, l_max, quad)
}

/// As [`transform`], reusing an already built extremal.
pub fn transform_with(
    u: &HarmonicField,
    e: &Extremal,
    l_max: usize,
    quad: &Quadrature,
) -> Result<Projection> {
    let grid = quad.base();
    let p = project(grid, &transformed_samples(u, e, grid), l_max)?;
    let limit = quad.policy().tail_limit;
    if p.tail_energy > limit {
        return Err(Error::TailTooLarge {
            tail: p.tail_energy,
            limit,
        });
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceCheck {
    /// `|∫|∇(u∘τ)|² − ∫|∇u|²|` with `u∘τ` projected.
    pub difference: f64,
    pub tail_energy: f64,
}

/// Conformal invariance of the Dirichlet integral, checked through projection.
pub fn dirichlet_invariance_check(
    u: &HarmonicField,
    tau: &ConformalMap,
    l_max: usize,
    grid: &SphericalGrid,
) -> Result<InvarianceCheck> {
    let images: Vec<_> = grid.nodes().iter().map(|w| tau.apply(w)).collect();
    let p = project(grid, &u.eval_many(&images), l_max)?;
    Ok(InvarianceCheck {
        difference: (p.field.dirichlet_energy() - u.dirichlet_energy()).abs(),
        tail_energy: p.tail_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremals::psi_field;
    use crate::sphere::{build_grid, PlanePoint, Point3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad(band: usize) -> Quadrature {
        Quadrature::new(build_grid(band, 1.0).unwrap())
    }

    fn w3_field(l_max: usize, eps: f64) -> HarmonicField {
        HarmonicField::mode(l_max, 1, 0, eps * 3f64.sqrt())
    }

    #[test]
    fn onofri_examples() {
        let q = quad(16);
        assert_eq!(onofri_j(1.0, &HarmonicField::zeros(4), &q).unwrap(), 0.0);
        let c = HarmonicField::constant(4, 0.7);
        assert!(onofri_j(0.3, &c, &q).unwrap().abs() < 1e-14);

        let q = quad(64);
        let e = build_extremal(&ConformalMap::dilation(2.0).unwrap(), &q).unwrap();
        // (1/2) ln J = (2/3)(ψ − c)
        let half_log_j = psi_field(&e, 48, &q).unwrap().field.scaled(2.0 / 3.0);
        let j1 = onofri_j(1.0, &half_log_j, &q).unwrap();
        assert!(j1.abs() < 1e-6, "{j1}");
    }

    #[test]
    fn functional_i_examples() {
        let q = quad(16);
        let r = functional_i(CRITICAL_ALPHA, &HarmonicField::zeros(4), &q).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.lorentzian, 1.0);
        assert!(r.converged);

        let q = quad(48);
        let e = build_extremal(&ConformalMap::dilation(2.0).unwrap(), &q).unwrap();
        let psi = psi_field(&e, 32, &q).unwrap().field;
        let r = functional_i(CRITICAL_ALPHA, &psi, &q).unwrap();
        assert!(r.value.abs() < 1e-8, "{}", r.value);

        let q = quad(16);
        let r = functional_i(CRITICAL_ALPHA, &w3_field(4, 0.1), &q).unwrap();
        assert!(r.value >= 0.0);
        let assembled = r.alpha * r.energy + 2.0 * r.mean - 0.5 * r.lorentzian.ln();
        assert_eq!(r.value, assembled);
    }

    #[test]
    fn shift_invariance_and_ordering() {
        let q = quad(24);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let u = HarmonicField::random(&mut rng, 6, 0.4);
            let base = functional_i(CRITICAL_ALPHA, &u, &q).unwrap().value;
            let shifted = functional_i(CRITICAL_ALPHA, &u.plus_constant(1.3), &q)
                .unwrap()
                .value;
            assert!((base - shifted).abs() < 1e-10);
            for alpha in [CRITICAL_ALPHA, 1.0, 2.0] {
                let i = functional_i(alpha, &u, &q).unwrap().value;
                let j = onofri_j(alpha, &u, &q).unwrap();
                assert!(i - j >= -1e-10);
            }
        }
    }

    #[test]
    fn slack_examples() {
        let q = quad(16);
        assert_eq!(
            cg_bound_slack(1.0, &HarmonicField::zeros(4), &q).unwrap(),
            0.0
        );
        assert!(cg_bound_slack(0.5, &HarmonicField::zeros(4), &q).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..10 {
            let u = HarmonicField::random(&mut rng, 6, 0.5);
            for alpha in [CRITICAL_ALPHA, 1.0, 2.0] {
                assert!(cg_bound_slack(alpha, &u, &q).unwrap() >= -1e-8);
            }
        }
    }

    #[test]
    fn transform_examples() {
        let q = quad(24);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let u = HarmonicField::random(&mut rng, 6, 0.3);
        let same = transform(&u, &ConformalMap::IDENTITY, 6, &q).unwrap().field;
        assert!(same.sub(&u).coeffs().iter().all(|c| c.abs() < 1e-12));

        let q = quad(48);
        let tau = ConformalMap::translation(&PlanePoint::new(0.3, 0.2)).unwrap();
        let zero = transform(&HarmonicField::zeros(4), &tau, 32, &q)
            .unwrap()
            .field;
        let e = build_extremal(&tau, &q).unwrap();
        let psi = psi_field(&e, 32, &q).unwrap().field;
        assert!(zero.sub(&psi).coeffs().iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn conformal_invariance_of_i() {
        let q = quad(72);
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let u = HarmonicField::random(&mut rng, 6, 0.4);
        let before = functional_i(CRITICAL_ALPHA, &u, &q).unwrap().value;
        for tau in [
            ConformalMap::dilation(1.5).unwrap(),
            ConformalMap::translation(&PlanePoint::new(-0.4, 0.5)).unwrap(),
            ConformalMap::inversion(),
        ] {
            let ut = transform(&u, &tau, 56, &q).unwrap().field;
            let after = functional_i(CRITICAL_ALPHA, &ut, &q).unwrap().value;
            assert!((after - before).abs() < 1e-6, "{before} {after}");
        }
    }

    #[test]
    fn dirichlet_invariance_examples() {
        let grid = build_grid(64, 1.0).unwrap();
        let u = w3_field(8, 1.0);
        let rot = ConformalMap::rotation(&Point3::new(1.0, 2.0, 0.5), 0.9);
        assert!(
            dirichlet_invariance_check(&u, &rot, 8, &grid)
                .unwrap()
                .difference
                < 1e-10
        );
        let d2 = ConformalMap::dilation(2.0).unwrap();
        let check = dirichlet_invariance_check(&w3_field(32, 1.0), &d2, 32, &grid).unwrap();
        assert!(check.difference < 1e-6, "{check:?}");
        let c = HarmonicField::constant(4, 2.0);
        assert!(
            dirichlet_invariance_check(&c, &d2, 8, &grid)
                .unwrap()
                .difference
                < 1e-12
        );
    }

    #[test]
    fn report_json_has_all_fields() {
        let q = quad(8);
        let r = functional_i(1.0, &HarmonicField::zeros(2), &q).unwrap();
        let v = serde_json::to_value(r).unwrap();
        for key in [
            "alpha",
            "energy",
            "mean",
            "log_mass",
            "lorentzian",
            "value",
            "grid",
            "converged",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
