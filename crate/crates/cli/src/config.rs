use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use onofri_core::convergence::{Quadrature, RefinementPolicy};
use onofri_core::sphere::build_grid;

use crate::failure::Failure;

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Target band limit of the base quadrature grid.
    #[arg(long, global = true, default_value_t = 48)]
    pub grid_band: usize,
    /// Node-count multiplier for the base grid (≥ 1).
    #[arg(long, global = true, default_value_t = 1.0)]
    pub oversample: f64,
    /// Largest θ-node count the refinement policy may reach.
    #[arg(long, global = true, default_value_t = 512)]
    pub refine_cap: usize,
    /// Degree used for projected fields.
    #[arg(long, global = true, default_value_t = 32)]
    pub lmax: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Where to write the JSON report (default: standard output).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Multiplies every pass/fail tolerance.
    #[arg(long, global = true, env = "ONOFRI_TOL_SCALE", default_value_t = 1.0)]
    pub tol_scale: f64,
}

/// The settings a run used, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub grid_band: usize,
    pub oversample: f64,
    pub refine_cap: usize,
    pub l_max: usize,
    pub tol_scale: f64,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_opts(o: &GlobalOpts, input: Option<&Path>) -> Result<Self, Failure> {
        if !(o.tol_scale > 0.0 && o.tol_scale.is_finite()) {
            return Err(Failure::usage(format!(
                "tolerance scale must be positive, got {}",
                o.tol_scale
            )));
        }
        if o.jobs == Some(0) {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        Ok(RunConfig {
            grid_band: o.grid_band,
            oversample: o.oversample,
            refine_cap: o.refine_cap,
            l_max: o.lmax,
            tol_scale: o.tol_scale,
            seed: o.seed,
            jobs: o.jobs,
            input: input.map(Path::to_path_buf),
            out: o.out.clone(),
        })
    }

    pub fn tol(&self, base: f64) -> f64 {
        base * self.tol_scale
    }

    pub fn quadrature(&self) -> Result<Quadrature, Failure> {
        self.quadrature_at_least(0)
    }

    /// Base grid with band at least `band`.
    pub fn quadrature_at_least(&self, band: usize) -> Result<Quadrature, Failure> {
        let grid = build_grid(self.grid_band.max(band), self.oversample)?;
        let policy = RefinementPolicy {
            max_theta: self.refine_cap,
            ..RefinementPolicy::default()
        };
        Ok(Quadrature::with_policy(grid, policy))
    }
}
