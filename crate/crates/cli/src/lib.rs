//! Reproducible command-line runs on top of `zeroscope`.
//!
//! A run is fully described by a [`RunConfig`]. Every output file embeds it,
//! and `--config <output file>` replays the run byte for byte.

pub mod config;
pub mod eval;
pub mod output;
pub mod tasks;

use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;

pub use config::{BackendChoice, CorrMethod, ModelSpec, Protocol, RunConfig, Task};
pub use output::OutputOptions;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const THREADS_ENV: &str = "ZEROSCOPE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<zeroscope::Error> for CliError {
    fn from(e: zeroscope::Error) -> Self {
        use zeroscope::Error as E;
        match e {
            E::IndexOutOfRange { .. }
            | E::SelfLoop(_)
            | E::DuplicateBond(..)
            | E::DuplicateField(_)
            | E::InvalidSize(_)
            | E::CapExceeded { .. }
            | E::InhomogeneousCoupling
            | E::Invalid(_)
            | E::Json(_) => CliError::Config(e.to_string()),
            E::Io(_) => CliError::Output(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Files written by a run, a human-readable summary, and whether a
/// tolerance check failed.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub violated: bool,
}

impl Outcome {
    pub(crate) fn ok(files: Vec<PathBuf>, summary: String) -> Self {
        Outcome {
            files,
            summary,
            violated: false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.violated {
            EXIT_TOLERANCE
        } else {
            0
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "zeroscope",
    version,
    about = "Complex partition-function zeroes from simulated quantum-circuit return probabilities"
)]
pub struct CliArgs {
    /// `cylinder:NxL[,k=..][,ky=..][,h=..]`, `chain:N[,periodic][,k=..][,h=..]`,
    /// or a model JSON file. Complex values are written like `0.2-0.5i`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    #[arg(long, value_enum)]
    pub protocol: Option<Protocol>,
    /// k, x, tanh_k, h, fugacity or kick_h.
    #[arg(long)]
    pub plane: Option<String>,
    /// re0,re1,im0,im1
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// NxM grid points (re × im), or N for a square grid.
    #[arg(long)]
    pub res: Option<String>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random points checked by `verify`.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Spin indices `i,j` for `corr` (site (row, col) is row·n_circ + col).
    #[arg(long)]
    pub sites: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<CorrMethod>,
    /// Probe strength for the perturbative correlation estimators.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Grid minima must lie below this fraction of the median |Z|².
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Detection radius in grid cells for `noise`.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Relative tolerance for `verify`.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Negate every coupling and field, so that ferromagnetic couplings can be
    /// entered as positive numbers.
    #[arg(long)]
    pub flip_sign: bool,
    /// Perturb the effective backend in `verify` to check the failure path.
    #[arg(long)]
    pub force_mismatch: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Re-run the config embedded in an earlier output file (CSV or JSON).
    /// Other run flags are then ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write PNG heatmaps of grids.
    #[arg(long)]
    pub png: bool,
}

impl CliArgs {
    fn has_run_flags(&self) -> bool {
        self.model.is_some()
            || self.task.is_some()
            || self.backend.is_some()
            || self.protocol.is_some()
            || self.plane.is_some()
            || self.window.is_some()
            || self.res.is_some()
            || self.shots.is_some()
            || self.seed.is_some()
            || self.samples.is_some()
            || self.sites.is_some()
            || self.method.is_some()
            || self.delta.is_some()
            || self.threshold.is_some()
            || self.radius.is_some()
            || self.tolerance.is_some()
            || self.flip_sign
            || self.force_mismatch
    }

    /// Resolves flags (or an embedded config) into a validated run.
    pub fn resolve(&self) -> Result<(RunConfig, OutputOptions), CliError> {
        let out = OutputOptions {
            dir: self.out.clone(),
            png: self.png,
        };
        if let Some(path) = &self.config {
            if self.has_run_flags() {
                log::warn!("--config given: other run flags are ignored");
            }
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let config = RunConfig::from_output(&text)?;
            config.validate()?;
            return Ok((config, out));
        }
        let model = self
            .model
            .as_deref()
            .ok_or_else(|| CliError::Config("--model is required".into()))?;
        let task = self.task.ok_or_else(|| CliError::Config("--task is required".into()))?;
        let mut c = RunConfig::new(ModelSpec::parse(model)?, task);
        if let Some(v) = self.backend {
            c.backend = v;
        }
        if let Some(v) = self.protocol {
            c.protocol = v;
        }
        if let Some(v) = &self.plane {
            c.plane = v.parse()?;
        }
        if let Some(v) = &self.window {
            c.window = config::parse_window(v)?;
        }
        if let Some(v) = &self.res {
            c.res = config::parse_res(v)?;
        }
        if let Some(v) = self.shots {
            c.shots = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = &self.sites {
            c.sites = config::parse_sites(v)?;
        }
        if let Some(v) = self.method {
            c.corr_method = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.threshold {
            c.threshold = v;
        }
        if let Some(v) = self.radius {
            c.radius = v;
        }
        if let Some(v) = self.tolerance {
            c.tolerance = v;
        }
        c.flip_sign = self.flip_sign;
        c.force_mismatch = self.force_mismatch;
        c.validate()?;
        Ok((c, out))
    }
}

pub fn execute(config: &RunConfig, out: &OutputOptions) -> Result<Outcome, CliError> {
    tasks::run(config, out)
}
