//! Centre-of-mass normalization: find `τ(z) = λ₀z + x₀` with
//! `∫ ω e^{2u_τ} dω = 0`, where `u_τ = u∘τ + ψ_τ`.
//!
//! With `E₀ = ∫e^{2u}` and `Eᵢ = ∫ωᵢe^{2u}`, the plane weights pull back as
//! `∫ f(x)/(1+|x|²)³ dx = (π/2)∫ f (1 − ω₃) dω`, giving
//! `x₀ = (E₁, E₂)/(E₀ − E₃)`. The dilation comes either from its closed
//! form or from bisection on the third moment of `e^{2u_τ}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::convergence::{vector_change, Quadrature, Refined};
use crate::error::{Error, Result};
use crate::extremals::build_extremal;
use crate::functionals::exp_moments;
use crate::harmonics::HarmonicField;
use crate::mobius::ConformalMap;
use crate::sphere::{integrate_with, PlanePoint, Point3, SphericalGrid};

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const AGREEMENT_TOL: f64 = 1e-8;
const G_TOL: f64 = 1e-12;
const BRACKET_LIMITS: (f64, f64) = (1e-6, 1e6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    RootFind,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationResult {
    pub x0: PlanePoint,
    pub lambda0: f64,
    /// `z ↦ λ₀z + x₀`.
    pub tau: ConformalMap,
    pub residual_com_norm: f64,
    pub method: Method,
    pub closed_form_lambda: Option<f64>,
    pub bisection_lambda: Option<f64>,
    /// Sign changes of the third moment seen across the final bracket.
    pub bracket_sign_changes: usize,
}

/// `∫ω e^{2u} dω / ∫e^{2u} dω`.
pub fn com_of_exp(u: &HarmonicField, quad: &Quadrature) -> Result<[f64; 3]> {
    let m = quad.refine_array(|g| exp_moments(u, g))?.require()?.value;
    Ok([m[1] / m[0], m[2] / m[0], m[3] / m[0]])
}

fn moments(u: &HarmonicField, quad: &Quadrature) -> Result<Refined<[f64; 4]>> {
    quad.refine_array(|g| exp_moments(u, g))?.require()
}

/// The weighted plane mean `∫x e^{2u∘S⁻¹}/(1+|x|²)³ dx / ∫e^{2u∘S⁻¹}/(1+|x|²)³ dx`.
pub fn solve_x0(u: &HarmonicField, quad: &Quadrature) -> Result<PlanePoint> {
    Ok(x0_from_moments(&moments(u, quad)?.value))
}

fn x0_from_moments(m: &[f64; 4]) -> PlanePoint {
    let d = m[0] - m[3];
    PlanePoint::new(m[1] / d, m[2] / d)
}

/// `λ₀² = (P − (1 + |x₀|²)A) / A` with `P = ∫e^{2u∘S⁻¹}/(1+|x|²)² dx = π E₀`
/// and `A = ∫e^{2u∘S⁻¹}/(1+|x|²)³ dx = (π/2)(E₀ − E₃)`.
fn closed_form_lambda(m: &[f64; 4], x0: Complex64) -> Result<f64> {
    let p = PI * m[0];
    let a = 0.5 * PI * (m[0] - m[3]);
    let numerator = p - (1.0 + x0.norm_sqr()) * a;
    if !(numerator > 0.0 && a > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "closed-form dilation numerator {numerator:e} is not positive"
        )));
    }
    Ok((numerator / a).sqrt())
}

fn finite(x0: &PlanePoint) -> Result<Complex64> {
    x0.finite()
        .ok_or_else(|| Error::InvalidArgument("x0 must be finite".into()))
}

/// Closed-form `λ₀` for a given `x₀`.
pub fn solve_lambda0(u: &HarmonicField, x0: &PlanePoint, quad: &Quadrature) -> Result<f64> {
    closed_form_lambda(&moments(u, quad)?.value, finite(x0)?)
}

/// `z ↦ λz + x₀`.
pub fn normalizing_map(lambda: f64, x0: &PlanePoint) -> Result<ConformalMap> {
    Ok(ConformalMap::translation(x0)?.compose(&ConformalMap::dilation(lambda)?))
}

/// Third moment of `e^{2(u∘τ_λ)} J_λ^{3/2}`; the normalizer `e^{2c}` is
/// dropped since only the sign matters.
fn third_moment(
    u: &HarmonicField,
    x0: &PlanePoint,
    lambda: f64,
    grid: &SphericalGrid,
) -> Result<f64> {
    let tau = normalizing_map(lambda, x0)?;
    let images: Vec<Point3> = grid.nodes().iter().map(|w| tau.apply(w)).collect();
    let values = u.eval_many(&images);
    Ok(integrate_with(grid, |i, w| {
        [w.w3() * (2.0 * values[i]).exp() * tau.jacobian_sqrt(w).powi(3)]
    })[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub lambda: f64,
    pub sign_changes: usize,
}

/// Brackets the root of `g(λ) = ∫ω₃ e^{2u_τ}` by geometric expansion
/// (factor 10) from `start` and bisects in `ln λ` on a fixed grid.
pub fn bisect_lambda0(
    u: &HarmonicField,
    x0: &PlanePoint,
    start: f64,
    grid: &SphericalGrid,
) -> Result<Bisection> {
    finite(x0)?;
    let g = |l: f64| third_moment(u, x0, l, grid);
    let (lo_lim, hi_lim) = BRACKET_LIMITS;
    let mut lo = start;
    let mut hi = start;
    let g0 = g(start)?;
    if g0 == 0.0 {
        return Ok(Bisection {
            lambda: start,
            sign_changes: 1,
        });
    }
    // g > 0 for small λ and g < 0 for large λ
    if g0 > 0.0 {
        loop {
            hi *= 10.0;
            if hi > hi_lim {
                return Err(Error::BracketNotFound { lo, hi: hi_lim });
            }
            if g(hi)? <= 0.0 {
                break;
            }
            lo = hi;
        }
    } else {
        loop {
            lo /= 10.0;
            if lo < lo_lim {
                return Err(Error::BracketNotFound { lo: lo_lim, hi });
            }
            if g(lo)? >= 0.0 {
                break;
            }
            hi = lo;
        }
    }
    let sign_changes = count_sign_changes(&g, lo, hi)?;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut mid = 0.5 * (a + b);
    for _ in 0..200 {
        mid = 0.5 * (a + b);
        let v = g(mid.exp())?;
        if v.abs() < G_TOL || (b - a) < 1e-15 {
            break;
        }
        if v > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Bisection {
        lambda: mid.exp(),
        sign_changes,
    })
}

fn count_sign_changes<G: Fn(f64) -> Result<f64>>(g: &G, lo: f64, hi: f64) -> Result<usize> {
    const SCAN: usize = 16;
    let mut changes = 0;
    let mut prev = g(lo)?.signum();
    for k in 1..=SCAN {
        let l = (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / SCAN as f64).exp();
        let s = g(l)?.signum();
        if s != prev && s != 0.0 {
            changes += 1;
            prev = s;
        }
    }
    Ok(changes)
}

/// Norm of `∫ω e^{2u_τ} / ∫e^{2u_τ}` from pointwise samples of `u∘τ + ψ_τ`.
pub fn residual_com(u: &HarmonicField, tau: &ConformalMap, quad: &Quadrature) -> Result<f64> {
    let e = build_extremal(tau, quad)?;
    let m = quad
        .refine_array(|g| {
            let images: Vec<Point3> = g.nodes().iter().map(|w| tau.apply(w)).collect();
            let values = u.eval_many(&images);
            Ok(integrate_with(g, |i, w| {
                let v = (2.0 * values[i]).exp() * e.density(w);
                [v, w.w1() * v, w.w2() * v, w.w3() * v]
            }))
        })?
        .require()?
        .value;
    Ok((m[1] * m[1] + m[2] * m[2] + m[3] * m[3]).sqrt() / m[0])
}

/// Grid on which the bisection runs: the one where `g(λ)` settles.
fn bisection_grid(
    u: &HarmonicField,
    x0: &PlanePoint,
    lambda: f64,
    quad: &Quadrature,
) -> Result<SphericalGrid> {
    let r = quad
        .refine(
            |g| third_moment(u, x0, lambda, g),
            |a, b| vector_change(&[*a], &[*b]),
        )?
        .require()?;
    r.grid.build()
}

/// Runs both solver paths, cross-checks them and verifies the residual.
pub fn normalize(u: &HarmonicField, quad: &Quadrature) -> Result<NormalizationResult> {
    normalize_from(u, quad, 1.0)
}

/// As [`normalize`], with the bisection bracket grown from `start`.
pub fn normalize_from(
    u: &HarmonicField,
    quad: &Quadrature,
    start: f64,
) -> Result<NormalizationResult> {
    let m = moments(u, quad)?.value;
    let x0 = x0_from_moments(&m);
    let closed = closed_form_lambda(&m, finite(&x0)?);
    let probe = *closed.as_ref().unwrap_or(&1.0);
    let grid = bisection_grid(u, &x0, probe, quad)?;
    let bisected = bisect_lambda0(u, &x0, start, &grid);

    let (lambda0, method) = match (&closed, &bisected) {
        (Ok(c), Ok(b)) => {
            if (c - b.lambda).abs() > AGREEMENT_TOL * c.max(1.0) {
                return Err(Error::InvariantViolation(format!(
                    "closed-form λ₀ = {c} and bisection λ₀ = {} disagree",
                    b.lambda
                )));
            }
            (*c, Method::Hybrid)
        }
        (Ok(c), Err(_)) => (*c, Method::ClosedForm),
        (Err(_), Ok(b)) => (b.lambda, Method::RootFind),
        (Err(e), Err(_)) => return Err(e.clone()),
    };
    let mut tau = normalizing_map(lambda0, &x0)?;
    let mut residual = residual_com(u, &tau, quad)?;
    let mut method = method;
    if residual >= RESIDUAL_TOL {
        if let Ok(b) = &bisected {
            let alt = normalizing_map(b.lambda, &x0)?;
            let r = residual_com(u, &alt, quad)?;
            if r < residual {
                tau = alt;
                residual = r;
                method = Method::RootFind;
            }
        }
    }
    if residual >= RESIDUAL_TOL {
        return Err(Error::InvariantViolation(format!(
            "centre of mass {residual:e} after normalization"
        )));
    }
    Ok(NormalizationResult {
        x0,
        lambda0: if method == Method::RootFind {
            bisected.as_ref().map(|b| b.lambda).unwrap_or(lambda0)
        } else {
            lambda0
        },
        tau,
        residual_com_norm: residual,
        method,
        closed_form_lambda: closed.ok(),
        bisection_lambda: bisected.as_ref().ok().map(|b| b.lambda),
        bracket_sign_changes: bisected.map(|b| b.sign_changes).unwrap_or(0),
    })
}
