//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed verification or runtime failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::config::{ExperimentConfig, OutputFormat};
use super::experiment::run_experiment_with;
use super::output::{render, write_records};
use super::verify::run_verification;
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::par::{self, Execution};
use crate::regularity::{estimate_l, RegularityParams, SearchMode};
use crate::rng;
use crate::sensing::{sample_block_unitary, sample_sphere};

#[derive(Parser, Debug)]
#[command(name = "pr-kaczmarz", version, about = "Randomized Kaczmarz phase retrieval experiments")]
struct Cli {
    /// Worker threads (0 = automatic). Overrides PR_KACZMARZ_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run on the calling thread only.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Sphere,
    Unitary,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Auto,
    Dense,
    Random,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the trials described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output`; stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `format`.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Also write the JSON trial summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run the identity and Monte-Carlo self-checks; exit 1 on any failure.
    Verify {
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the regularity constant for one sampled ensemble and emit a JSON report.
    EstimateL {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 20.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0 / 80.0)]
        c0: f64,
        #[arg(long, default_value_t = 40_000)]
        budget: usize,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "sphere")]
        model: Model,
        /// Seeds the ensemble, the signal and the search.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Io { .. } | Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => 2,
        _ => 1,
    }
}

fn emit(bytes: &[u8], out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => std::io::stdout().lock().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn execute(command: Command, exec: Execution) -> Result<i32> {
    match command {
        Command::Run { config, seed, out, format, summary } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(f) = format {
                cfg.format = match f {
                    Format::Csv => OutputFormat::Csv,
                    Format::Json => OutputFormat::Json,
                };
            }
            let out = out.or(cfg.output_path.clone());
            let records = run_experiment_with(&cfg, exec)?;
            write_records(&records, cfg.format, out.as_deref())?;
            if let Some(p) = summary {
                emit(&render(&records, OutputFormat::Json)?, Some(&p))?;
            }
            let failed = records.iter().filter(|r| r.failed).count();
            if failed > 0 {
                eprintln!("{failed} of {} trials failed", records.len());
            }
            Ok(0)
        }
        Command::Verify { trials, seed, out } => {
            let report = run_verification(trials, seed, exec)?;
            for c in &report.checks {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(p) = out {
                let mut bytes = serde_json::to_vec_pretty(&report)?;
                bytes.push(b'\n');
                emit(&bytes, Some(&p))?;
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::EstimateL { n, m, alpha, c0, budget, mode, model, seed, out } => {
            let params = RegularityParams {
                c0,
                alpha,
                budget,
                seed: rng::derive_seed(seed, 3),
                mode: match mode {
                    Mode::Auto => None,
                    Mode::Dense => Some(SearchMode::DenseNet),
                    Mode::Random => Some(SearchMode::RandomWithRefinement),
                },
            };
            params.validate()?;
            let ensemble = match model {
                Model::Sphere => sample_sphere(n, m, rng::derive_seed(seed, 1))?,
                Model::Unitary => {
                    if n == 0 || !m.is_multiple_of(n) {
                        return Err(Error::invalid("unitary model needs m to be a multiple of n"));
                    }
                    sample_block_unitary(n, m / n, rng::derive_seed(seed, 1))?
                }
            };
            let z = ComplexVector::random_unit(n, &mut rng::substream(seed, 2));
            let report = estimate_l(&ensemble, &z, &params, exec)?;
            let mut bytes = serde_json::to_vec_pretty(&report)?;
            bytes.push(b'\n');
            emit(&bytes, out.as_ref())?;
            Ok(0)
        }
    }
}

/// Parses `args` (including the program name) and runs the selected subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let exec = if cli.serial { Execution::Serial } else { Execution::default() };
    let threads = match cli.threads {
        Some(0) => None,
        Some(t) => Some(t),
        None => par::threads_from_env(),
    };
    match par::with_threads(threads, move || execute(cli.command, exec)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
