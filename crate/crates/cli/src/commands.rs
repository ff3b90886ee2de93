use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use onofri_core::functionals::{functional_i, transform, FunctionalReport};
use onofri_core::harmonics::HarmonicField;
use onofri_core::lorentz::{lightcone_identity_residual, lorentz_lift, LorentzMatrix};
use onofri_core::mobius::{ConformalMap, MobiusMap};
use onofri_core::normalize::{normalize, NormalizationResult};
use onofri_core::sphere::Point3;
use onofri_core::stability::{stability_check_with, SearchOptions, StabilityReport, SLACK_TOL};
use onofri_core::Error;

use crate::config::RunConfig;
use crate::failure::Failure;

pub const LIFT_TOL: f64 = 1e-10;
pub const NORMALIZE_TOL: f64 = 1e-10;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("malformed {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::violation(format!("cannot write {}: {e}", path.display())))
}

/// Pretty JSON to `--out`, or to standard output.
pub fn emit<T: Serialize>(cfg: &RunConfig, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    match &cfg.out {
        Some(p) => write_file(p, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::violation(e.to_string())),
    }
}

/// Accepts decimals and fractions such as `2/3`.
pub fn parse_alpha(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in {s}"))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in {s}"))?;
            n / d
        }
        None => s.trim().parse().map_err(|_| format!("not a number: {s}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite number: {s}"))
    }
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    config: &'a RunConfig,
    report: FunctionalReport,
}

pub fn eval(cfg: &RunConfig, field: &Path, alpha: f64) -> Result<bool, Failure> {
    let u: HarmonicField = read_json(field)?;
    let report = functional_i(alpha, &u, &cfg.quadrature()?)?;
    emit(
        cfg,
        &EvalOutput {
            config: cfg,
            report,
        },
    )?;
    if !report.converged {
        eprintln!(
            "quadrature did not converge (finest grid {:?})",
            report.grid
        );
    }
    Ok(report.converged)
}

#[derive(Serialize)]
struct NormalizeOutput<'a> {
    config: &'a RunConfig,
    result: NormalizationResult,
    field_file: PathBuf,
    /// Dirichlet energy of the normalized field, tail included.
    nonconstant_energy: f64,
    tail_energy: f64,
}

/// `<dir>/<stem>.normalized.json` beside the input.
pub fn normalized_path(input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    input.with_file_name(format!("{stem}.normalized.json"))
}

pub fn normalize_cmd(cfg: &RunConfig, field: &Path) -> Result<bool, Failure> {
    let u: HarmonicField = read_json(field)?;
    let quad = cfg.quadrature()?;
    let result = normalize(&u, &quad)?;
    let p = transform(&u, &result.tau, cfg.l_max, &quad)?;
    let field_file = normalized_path(field);
    let mut text = serde_json::to_string_pretty(&p.field).expect("fields serialize");
    text.push('\n');
    write_file(&field_file, &text)?;
    let pass = result.residual_com_norm < cfg.tol(NORMALIZE_TOL);
    emit(
        cfg,
        &NormalizeOutput {
            config: cfg,
            result,
            field_file,
            nonconstant_energy: p.field.dirichlet_energy() + p.tail_energy,
            tail_energy: p.tail_energy,
        },
    )?;
    Ok(pass)
}

#[derive(Serialize)]
struct SampleReport {
    seed: u64,
    report: StabilityReport,
}

#[derive(Serialize)]
struct StabilityOutput<'a> {
    config: &'a RunConfig,
    samples: Vec<SampleReport>,
    failures: Vec<SampleFailure>,
    min_slack: Option<f64>,
    all_converged: bool,
}

#[derive(Serialize)]
struct SampleFailure {
    seed: u64,
    error: String,
}

#[derive(Serialize)]
struct CsvRow {
    seed: u64,
    deficit: f64,
    distance: f64,
    slack: f64,
    log_lambda: f64,
    beta1: f64,
    beta2: f64,
}

pub struct RandomFields {
    pub count: usize,
    pub max_degree: usize,
    pub scale: f64,
}

/// The field of sample `seed`: degree in `2..=max_degree`, amplitude in
/// `[scale/2, scale]`.
pub fn random_sample(seed: u64, max_degree: usize, scale: f64) -> HarmonicField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.gen_range(2.min(max_degree)..=max_degree);
    let s = rng.gen_range(0.5 * scale..=scale);
    HarmonicField::random(&mut rng, l, s)
}

pub fn stability_cmd(
    cfg: &RunConfig,
    field: Option<&Path>,
    random: Option<RandomFields>,
    csv_path: Option<&Path>,
) -> Result<bool, Failure> {
    let quad = cfg.quadrature()?;
    let inputs: Vec<(u64, HarmonicField)> = match (field, random) {
        (Some(p), None) => vec![(cfg.seed, read_json(p)?)],
        (None, Some(r)) => {
            if !(r.scale > 0.0) {
                return Err(Failure::usage("--scale must be positive"));
            }
            (0..r.count as u64)
                .map(|i| {
                    let s = cfg.seed.wrapping_add(i);
                    (s, random_sample(s, r.max_degree, r.scale))
                })
                .collect()
        }
        _ => return Err(Failure::usage("give either a field file or --random")),
    };

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (seed, u) in &inputs {
        let opts = SearchOptions {
            seed: *seed,
            slack_tol: cfg.tol(SLACK_TOL),
            ..SearchOptions::default()
        };
        match stability_check_with(u, cfg.l_max, &quad, &opts) {
            Ok(report) => samples.push(SampleReport {
                seed: *seed,
                report,
            }),
            Err(
                e @ (Error::InvariantViolation(_)
                | Error::TailTooLarge { .. }
                | Error::NotConverged { .. }),
            ) => {
                eprintln!("sample {seed}: {e}");
                failures.push(SampleFailure {
                    seed: *seed,
                    error: e.to_string(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    for s in &samples {
        let r = &s.report;
        csv.serialize(CsvRow {
            seed: s.seed,
            deficit: r.deficit,
            distance: r.distance,
            slack: r.slack,
            log_lambda: r.argmin.log_lambda,
            beta1: r.argmin.beta1,
            beta2: r.argmin.beta2,
        })
        .map_err(|e| Failure::violation(e.to_string()))?;
    }
    let bytes = csv
        .into_inner()
        .map_err(|e| Failure::violation(e.to_string()))?;
    if let Some(p) = csv_path {
        write_file(p, &String::from_utf8_lossy(&bytes))?;
    }

    let min_slack = samples.iter().map(|s| s.report.slack).reduce(f64::min);
    let all_converged = samples.iter().all(|s| s.report.converged);
    let pass = failures.is_empty();
    emit(
        cfg,
        &StabilityOutput {
            config: cfg,
            samples,
            failures,
            min_slack,
            all_converged,
        },
    )?;
    Ok(pass)
}

/// Möbius matrix as written by users: entries need not be unimodular.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MatrixFile {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub d: [f64; 2],
    #[serde(default)]
    pub reflect: bool,
}

#[derive(Serialize)]
struct LiftOutput<'a> {
    config: &'a RunConfig,
    input: MatrixFile,
    renormalized: bool,
    matrix: LorentzMatrix,
    metric_residual: f64,
    lightcone_residual: f64,
    pass: bool,
}

fn lift_samples() -> [Point3; 8] {
    [
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(-1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, -1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(0.0, 0.0, -1.0),
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(-1.0, 2.0, -2.0),
    ]
}

pub fn lift(cfg: &RunConfig, path: &Path) -> Result<bool, Failure> {
    let input: MatrixFile = read_json(path)?;
    if input.reflect {
        return Err(Failure::usage(
            "orientation-reversing maps have no Lorentz lift",
        ));
    }
    let z = |v: [f64; 2]| Complex64::new(v[0], v[1]);
    let (a, b, c, d) = (z(input.a), z(input.b), z(input.c), z(input.d));
    let det = a * d - b * c;
    let renormalized = (det - 1.0).norm() > 1e-12;
    if renormalized {
        eprintln!("warning: determinant {det} is not 1; renormalizing");
    }
    let m = MobiusMap::new(a, b, c, d)?;
    let matrix = lorentz_lift(&m);
    let tau = ConformalMap::from(m);
    let metric_residual = matrix.metric_residual();
    let lightcone_residual = lift_samples()
        .iter()
        .map(|w| lightcone_identity_residual(&tau, w))
        .collect::<Result<Vec<f64>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let tol = cfg.tol(LIFT_TOL);
    let pass = metric_residual <= tol && lightcone_residual <= tol;
    emit(
        cfg,
        &LiftOutput {
            config: cfg,
            input,
            renormalized,
            matrix,
            metric_residual,
            lightcone_residual,
            pass,
        },
    )?;
    Ok(pass)
}
