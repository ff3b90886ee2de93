//! Seeded random conformal maps and fields for property sweeps.

use rand::Rng;

use crate::error::Result;
use crate::extremals::mass_com_from_lift;
use crate::harmonics::HarmonicField;
use crate::mobius::{ConformalMap, Generator};
use crate::sphere::{stereo_inverse, PlanePoint, Point3};

/// Bounds for the random map family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapBounds {
    pub max_factors: usize,
    /// Dilation factors are drawn log-uniformly from `[1/max_lambda, max_lambda]`.
    pub max_lambda: f64,
    pub max_shift: f64,
    /// Probability that a factor is the inversion.
    pub inversion_rate: f64,
    /// Compositions whose extremal centre of mass exceeds this are redrawn.
    pub max_com_norm: f64,
}

impl Default for MapBounds {
    fn default() -> Self {
        MapBounds {
            max_factors: 3,
            max_lambda: 4.0,
            max_shift: 2.0,
            inversion_rate: 0.1,
            max_com_norm: 0.85,
        }
    }
}

pub fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> Point3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Point3::new(r * phi.cos(), r * phi.sin(), z)
}

/// A point of the closed disk of radius `r`, uniform in area.
pub fn random_plane_point<R: Rng + ?Sized>(rng: &mut R, r: f64) -> PlanePoint {
    let rho = r * rng.gen_range(0.0f64..=1.0).sqrt();
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    PlanePoint::new(rho * t.cos(), rho * t.sin())
}

pub fn random_generator<R: Rng + ?Sized>(rng: &mut R, bounds: &MapBounds) -> Generator {
    if rng.gen_bool(bounds.inversion_rate.clamp(0.0, 1.0)) {
        return Generator::Inversion;
    }
    match rng.gen_range(0..3) {
        0 => {
            let k = bounds.max_lambda.ln();
            Generator::Dilation {
                lambda: rng.gen_range(-k..=k).exp(),
            }
        }
        1 => Generator::Translation {
            target: stereo_inverse(&random_plane_point(rng, bounds.max_shift)),
        },
        _ => Generator::Rotation {
            axis: random_axis(rng),
            angle: rng.gen_range(0.0..std::f64::consts::TAU),
        },
    }
}

/// A composition of 1 to `max_factors` random generators, redrawn until the
/// centre of mass of its extremal lies within `max_com_norm`.
pub fn random_bounded_map<R: Rng + ?Sized>(
    rng: &mut R,
    bounds: &MapBounds,
) -> Result<(ConformalMap, Vec<Generator>)> {
    loop {
        let n = rng.gen_range(1..=bounds.max_factors.max(1));
        let gens: Vec<Generator> = (0..n).map(|_| random_generator(rng, bounds)).collect();
        let mut tau = ConformalMap::IDENTITY;
        for g in &gens {
            tau = tau.compose(&g.to_map()?);
        }
        let (_, a) = mass_com_from_lift(&tau);
        if (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt() <= bounds.max_com_norm {
            return Ok((tau, gens));
        }
    }
}

/// Coefficients uniform in `[−scale, scale]/√(2l+1)` up to degree `l_max`.
pub fn random_field<R: Rng + ?Sized>(rng: &mut R, l_max: usize, scale: f64) -> HarmonicField {
    HarmonicField::random(rng, l_max, scale)
}
