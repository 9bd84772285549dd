//! Command-line front end: sweeps, dense references, comparisons, timing
//! and spectrum dumps.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when a
//! sweep stops early (partial output is still written), 3 when `compare`
//! finds differences above its bounds.

mod commands;
mod config;
mod target;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{
    bench, cmd_bench, cmd_compare, cmd_reference, cmd_spectrum, cmd_track, compare_trajectories, reference_run,
    target_path, write_trajectory, BenchReport, Comparison, Timing, DEFAULT_MAX_DZETA, DEFAULT_MAX_REL_ERR,
};
pub use config::{sweep_grid, RunConfig, Source, TargetSelector, DEFAULT_SEED, DEFAULT_SYNTHETIC_MACHINES};
pub use target::{box_score, read_vector, select_targets, TARGET_TIE};

use crate::tracker::Integrator;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_THRESHOLD: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "eigtrack", version, about = "Track eigenvalues of parameterized matrix pencils sE(p) - A(p)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Follow selected eigenvalues along a parameter sweep by continuation.
    Track(RunArgs),
    /// Follow selected eigenvalues by dense eigendecomposition at every grid point.
    Reference(RunArgs),
    /// Compare a tracked trajectory with a reference trajectory.
    Compare(CompareArgs),
    /// Time continuation against repeated dense eigendecomposition.
    Bench(RunArgs),
    /// Write the finite spectrum at one parameter value.
    Spectrum(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Fem,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags given here take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// companion, two-machine, six-machine, synthetic, or a JSON spec file.
    #[arg(long)]
    pub model: Option<String>,
    /// Tab-separated list of `p`, `E` file, `A` file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Swept parameter: mu, z, droop[:k], inertia[:k], tf[:k].
    #[arg(long)]
    pub param: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dp: Option<f64>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    #[arg(long, value_enum, num_args = 0..=1, default_missing_value = "on")]
    pub corrector: Option<Switch>,
    #[arg(long)]
    pub adaptive: bool,
    /// Imaginary perturbation for real eigenvalues; 0 disables it.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated indices into the initial spectrum.
    #[arg(long, value_delimiter = ',')]
    pub target_index: Option<Vec<usize>>,
    /// re0,re1,im0,im1
    #[arg(long, allow_hyphen_values = true, value_parser = parse_box)]
    pub target_box: Option<[f64; 4]>,
    /// File with a reference eigenvector, one `re,im` entry per line.
    #[arg(long)]
    pub target_mac: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include eigenvectors in JSON output.
    #[arg(long)]
    pub vectors: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Machine count of the synthetic model.
    #[arg(long)]
    pub machines: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub tracked: PathBuf,
    pub reference: PathBuf,
    #[arg(long)]
    pub max_rel_err: Option<f64>,
    #[arg(long)]
    pub max_dzeta: Option<f64>,
    /// Per-point report CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_box(text: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = text
        .split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|_| format!("bad number '{f}'")))
        .collect::<Result<_, _>>()?;
    <[f64; 4]>::try_from(v).map_err(|v| format!("expected re0,re1,im0,im1, got {} values", v.len()))
}

impl RunArgs {
    fn flags(&self) -> RunConfig {
        RunConfig {
            model: self.model.clone(),
            manifest: self.manifest.clone(),
            param: self.param.clone(),
            from: self.from,
            to: self.to,
            dp: self.dp,
            integrator: self.integrator.map(|i| match i {
                IntegratorArg::Fem => Integrator::Fem,
                IntegratorArg::Rk4 => Integrator::Rk4,
            }),
            corrector: self.corrector.map(|s| s == Switch::On),
            adaptive: self.adaptive.then_some(true),
            eps: self.eps,
            target_index: self.target_index.clone(),
            target_box: self.target_box,
            target_mac: self.target_mac.clone(),
            out: self.out.clone(),
            vectors: self.vectors.then_some(true),
            seed: self.seed,
            machines: self.machines,
            ..RunConfig::default()
        }
    }

    /// Flags layered over the config file, if any.
    pub fn resolve(&self) -> crate::Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        Ok(self.flags().over(base))
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Compare(a) => {
            let cfg = RunConfig {
                out: a.out.clone(),
                max_rel_err: a.max_rel_err,
                max_dzeta: a.max_dzeta,
                ..RunConfig::default()
            };
            cmd_compare(&a.tracked, &a.reference, &cfg)
        }
        Command::Track(a) | Command::Reference(a) | Command::Bench(a) | Command::Spectrum(a) => {
            let cfg = match a.resolve() {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_ERROR;
                }
            };
            match cli.command {
                Command::Track(_) => cmd_track(&cfg),
                Command::Reference(_) => cmd_reference(&cfg),
                Command::Bench(_) => cmd_bench(&cfg),
                _ => cmd_spectrum(&cfg),
            }
        }
    }
}
