//! Invariant suites behind `onofri verify`.

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use onofri_core::extremals::{
    build_extremal, com_closed_form, com_numeric, el_residual, mass_closed_form, mass_numeric,
    psi_field, tauhalf_residual,
};
use onofri_core::functionals::{functional_i, transform, CRITICAL_ALPHA};
use onofri_core::harmonics::{analyze_samples, HarmonicField};
use onofri_core::lorentz::{homomorphism_check, lightcone_identity_residual, lorentz_lift};
use onofri_core::mobius::{jacobian_area_oracle, ConformalMap, Generator, MobiusMap};
use onofri_core::sampling::{random_axis, random_bounded_map, random_plane_point, MapBounds};
use onofri_core::sphere::{integrate, sample, stereo_inverse, stereo_project, PlanePoint};

use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Suite {
    Geometry,
    Jacobian,
    MassCom,
    Lorentz,
    Invariance,
    Extremal,
    Tauhalf,
    El,
    All,
}

impl Suite {
    const EACH: [Suite; 8] = [
        Suite::Geometry,
        Suite::Jacobian,
        Suite::MassCom,
        Suite::Lorentz,
        Suite::Invariance,
        Suite::Extremal,
        Suite::Tauhalf,
        Suite::El,
    ];

    fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Jacobian => "jacobian",
            Suite::MassCom => "mass_com",
            Suite::Lorentz => "lorentz",
            Suite::Invariance => "invariance",
            Suite::Extremal => "extremal",
            Suite::Tauhalf => "tauhalf",
            Suite::El => "el",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub suite: Suite,
    pub check: String,
    /// The measured quantity, when it is not itself the residual.
    pub value: Option<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

struct Rows<'a> {
    cfg: &'a RunConfig,
    suite: Suite,
    rows: Vec<Row>,
}

impl Rows<'_> {
    fn push(&mut self, check: impl Into<String>, value: Option<f64>, residual: f64, tol: f64) {
        let tolerance = self.cfg.tol(tol);
        self.rows.push(Row {
            suite: self.suite,
            check: check.into(),
            value,
            residual,
            tolerance,
            pass: residual <= tolerance,
        });
    }

    fn residual(&mut self, check: impl Into<String>, residual: f64, tol: f64) {
        self.push(check, None, residual, tol);
    }
}

fn rng_for(cfg: &RunConfig, suite: Suite) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(suite as u64);
    rng
}

fn bounded_maps(rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<ConformalMap>, Failure> {
    let b = MapBounds::default();
    (0..n).map(|_| Ok(random_bounded_map(rng, &b)?.0)).collect()
}

pub fn run(cfg: &RunConfig, suite: Suite) -> Result<Vec<Row>, Failure> {
    let mut out = Rows {
        cfg,
        suite,
        rows: Vec::new(),
    };
    let mut rng = rng_for(cfg, suite);
    match suite {
        Suite::Geometry => geometry(&mut out, cfg)?,
        Suite::Jacobian => jacobian(&mut out, cfg, &mut rng)?,
        Suite::MassCom => mass_com(&mut out, cfg, &mut rng)?,
        Suite::Lorentz => lorentz(&mut out, &mut rng)?,
        Suite::Invariance => invariance(&mut out, cfg, &mut rng)?,
        Suite::Extremal => extremal(&mut out, cfg, &mut rng)?,
        Suite::Tauhalf => tauhalf(&mut out, cfg, &mut rng)?,
        Suite::El => el(&mut out, cfg, &mut rng)?,
        Suite::All => {
            for s in Suite::EACH {
                out.rows.extend(run(cfg, s)?);
            }
        }
    }
    Ok(out.rows)
}

fn geometry(out: &mut Rows, cfg: &RunConfig) -> Result<(), Failure> {
    let quad = cfg.quadrature()?;
    let grid = quad.base();
    let round_trip = grid
        .nodes()
        .iter()
        .map(|w| stereo_inverse(&stereo_project(w)).distance(w))
        .fold(0.0, f64::max);
    out.residual("stereographic round trip", round_trip, 1e-13);
    let min_w = grid.weights().iter().copied().fold(f64::INFINITY, f64::min);
    out.push(
        "smallest weight is positive",
        Some(min_w),
        if min_w > 0.0 { 0.0 } else { 1.0 },
        0.0,
    );
    let ones = vec![1.0; grid.len()];
    out.residual(
        "weights sum to 1",
        (integrate(grid, &ones)? - 1.0).abs(),
        1e-13,
    );
    // ∫Y_lm dω for every l ≥ 1 at once: analyse the constant 1
    let c = analyze_samples(grid, &ones, grid.band_limit_exact())?;
    let worst = c
        .iter()
        .filter(|(l, _, _)| *l > 0)
        .map(|(_, _, v)| v.abs())
        .fold(0.0, f64::max);
    out.residual(
        format!(
            "harmonics integrate to 0 up to degree {}",
            grid.band_limit_exact()
        ),
        worst,
        1e-13,
    );
    Ok(())
}

fn jacobian(out: &mut Rows, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let quad = cfg.quadrature()?;
    let rot = ConformalMap::rotation(&random_axis(rng), rng.gen_range(0.0..std::f64::consts::TAU));
    let iso = (0..10)
        .map(|_| (rot.jacobian(&random_axis(rng)) - 1.0).abs())
        .fold(0.0, f64::max);
    out.residual("rotation Jacobian is 1", iso, 1e-14);
    let inv = (0..10)
        .map(|_| (ConformalMap::inversion().jacobian(&random_axis(rng)) - 1.0).abs())
        .fold(0.0, f64::max);
    out.residual("inversion Jacobian is 1", inv, 1e-14);

    let maps = bounded_maps(rng, 6)?;
    let mut chain: f64 = 0.0;
    let mut positive = true;
    let mut mass: f64 = 0.0;
    let mut area: f64 = 0.0;
    for pair in maps.chunks(2) {
        let (t1, t2) = (pair[0], pair[1]);
        let both = t1.compose(&t2);
        for _ in 0..20 {
            let w = random_axis(rng);
            let lhs = both.jacobian(&w);
            let rhs = t1.jacobian(&t2.apply(&w)) * t2.jacobian(&w);
            chain = chain.max((lhs - rhs).abs() / rhs.max(1.0));
        }
    }
    for tau in &maps {
        positive &= quad.base().nodes().iter().all(|w| {
            let j = tau.jacobian(w);
            j.is_finite() && j > 0.0
        });
        let total = quad
            .refine_scalar(|g| integrate(g, &sample(g, |w| tau.jacobian(w))))?
            .require()?
            .value;
        mass = mass.max((total - 1.0).abs());
        let p = random_axis(rng);
        let exact = tau.jacobian(&p);
        area = area.max((jacobian_area_oracle(tau, &p, 0.01)? - exact).abs() / exact);
    }
    out.residual("chain rule", chain, 1e-11);
    out.push(
        "positive and finite on nodes",
        None,
        if positive { 0.0 } else { 1.0 },
        0.0,
    );
    out.residual("total mass of J is 1", mass, 1e-9);
    out.residual("area ratio at r = 0.01 (relative)", area, 1e-3);
    Ok(())
}

fn mass_com(out: &mut Rows, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let quad = cfg.quadrature()?;
    let mut gens: Vec<(String, Generator)> = [0.25, 0.5, 2.0, 4.0]
        .into_iter()
        .map(|lambda| (format!("dilation {lambda}"), Generator::Dilation { lambda }))
        .collect();
    for _ in 0..10 {
        let beta = random_plane_point(rng, 2.0);
        let z = beta.finite().unwrap_or_default();
        gens.push((
            format!("translation ({:.3}, {:.3})", z.re, z.im),
            Generator::Translation {
                target: stereo_inverse(&beta),
            },
        ));
    }
    for (label, g) in gens {
        let tau = g.to_map()?;
        let m = mass_numeric(&tau, &quad)?;
        out.push(
            format!("mass, {label}"),
            Some(m),
            (m - mass_closed_form(&g)?).abs(),
            1e-10,
        );
        let a = com_numeric(&tau, &quad)?;
        let b = com_closed_form(&g)?;
        let err = (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push(format!("centre of mass, {label}"), Some(norm), err, 1e-10);
    }
    Ok(())
}

fn random_mobius(rng: &mut ChaCha8Rng) -> MobiusMap {
    loop {
        let mut z = || {
            let p = random_plane_point(rng, 2.0).finite().unwrap_or_default();
            num_complex::Complex64::new(p.re, p.im)
        };
        let (a, b, c, d) = (z(), z(), z(), z());
        if (a * d - b * c).norm() > 0.1 {
            if let Ok(m) = MobiusMap::new(a, b, c, d) {
                return m;
            }
        }
    }
}

fn lorentz(out: &mut Rows, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let maps: Vec<MobiusMap> = (0..20).map(|_| random_mobius(rng)).collect();
    let (mut metric, mut hom, mut cone): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (i, m) in maps.iter().enumerate() {
        metric = metric.max(lorentz_lift(m).metric_residual());
        hom = hom.max(homomorphism_check(m, &maps[(i + 1) % maps.len()]));
        let tau = ConformalMap::from(*m);
        for _ in 0..100 {
            cone = cone.max(lightcone_identity_residual(&tau, &random_axis(rng))?);
        }
    }
    out.residual("metric preserved", metric, 1e-11);
    out.residual("homomorphism", hom, 1e-11);
    out.residual("light-cone identity", cone, 1e-11);
    Ok(())
}

/// Degree of `u∘τ + ψ_τ` projections in the invariance suite.
const INVARIANCE_LMAX: usize = 80;

fn invariance(out: &mut Rows, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let l_max = cfg.l_max.max(INVARIANCE_LMAX);
    let quad = cfg.quadrature_at_least(l_max + 16)?;
    let maps = bounded_maps(rng, 5)?;
    for k in 0..10 {
        let l = rng.gen_range(2..=8);
        let s = rng.gen_range(0.25..=0.5);
        let u = HarmonicField::random(rng, l, s);
        let base = functional_i(CRITICAL_ALPHA, &u, &quad)?.value;
        let mut worst: f64 = 0.0;
        for tau in &maps {
            let ut = transform(&u, tau, l_max, &quad)?.field;
            worst = worst.max((functional_i(CRITICAL_ALPHA, &ut, &quad)?.value - base).abs());
        }
        out.push(
            format!("field {k} (degree {l}), 5 maps"),
            Some(base),
            worst,
            1e-6,
        );
    }
    Ok(())
}

fn extremal(out: &mut Rows, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let quad = cfg.quadrature()?;
    let (mut nf1, mut zero, mut mass_floor): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    for tau in bounded_maps(rng, 20)? {
        let e = build_extremal(&tau, &quad)?;
        let a2: f64 = e.com.iter().map(|x| x * x).sum();
        nf1 = nf1.max(((4.0 * e.normalizer).exp() - (1.0 - a2)).abs());
        mass_floor = mass_floor.min(e.mass);
        let psi = psi_field(&e, cfg.l_max, &quad)?.field;
        zero = zero.max(functional_i(CRITICAL_ALPHA, &psi, &quad)?.value.abs());
    }
    out.push(
        "smallest mass is at least 1",
        Some(mass_floor),
        (1.0 - mass_floor).max(0.0),
        1e-10,
    );
    out.residual("e^(4c) = 1 - |a|^2", nf1, 1e-8);
    out.residual(
        format!("I_2/3 of extremals at degree {}", cfg.l_max),
        zero,
        1e-8,
    );
    Ok(())
}

fn tauhalf(out: &mut Rows, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let quad = cfg.quadrature()?;
    let worst = bounded_maps(rng, 20)?
        .iter()
        .map(|tau| Ok(tauhalf_residual(&build_extremal(tau, &quad)?, quad.base())))
        .collect::<Result<Vec<f64>, Failure>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.residual("J^(1/2) = M(1 - |a|^2)/(1 - a.w) at nodes", worst, 1e-8);
    Ok(())
}

fn el(out: &mut Rows, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let quad = cfg.quadrature()?;
    let mut maps: Vec<(String, ConformalMap)> = Vec::new();
    for lambda in [0.5, 0.75, 1.5, 2.0] {
        maps.push((
            format!("dilation {lambda}"),
            ConformalMap::dilation(lambda)?,
        ));
    }
    for _ in 0..5 {
        let beta = random_plane_point(rng, 1.0);
        let z = beta.finite().unwrap_or_default();
        maps.push((
            format!("translation ({:.3}, {:.3})", z.re, z.im),
            ConformalMap::translation(&beta)?,
        ));
    }
    maps.push((
        "translation (1, 0)".into(),
        ConformalMap::translation(&PlanePoint::new(1.0, 0.0))?,
    ));
    for (label, tau) in maps {
        let r = el_residual(&build_extremal(&tau, &quad)?, cfg.l_max, &quad)?;
        out.residual(format!("sup residual, {label}"), r, 1e-6);
    }
    Ok(())
}

pub fn print_table(rows: &[Row]) {
    println!(
        "{:<11} {:<46} {:>12} {:>10} {:>10}  status",
        "suite", "check", "value", "residual", "tolerance"
    );
    for r in rows {
        let value = r.value.map(|v| format!("{v:.10}")).unwrap_or_default();
        println!(
            "{:<11} {:<46} {:>12} {:>10.2e} {:>10.1e}  {}",
            r.suite.name(),
            r.check,
            value,
            r.residual,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
}
