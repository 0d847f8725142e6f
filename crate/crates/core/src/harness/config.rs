//! `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored. Keys are
//! unique. Nested settings use a dotted prefix (`solver.max_iters`).
//!
//! ```text
//! model = sphere            # sphere | unitary | provided
//! n = 50
//! m = 2000                  # or `blocks = 40` for the unitary model
//! num_trials = 20
//! master_seed = 7
//! signal = random           # random | file:<path to JSON [[re, im], ...]>
//! ensemble_file = <path>    # required for model = provided
//! output = results.csv
//! format = csv              # csv | json
//! solver.max_iters = 10000
//! solver.stop = aligned:1e-8  # aligned:<tol> | residual:<tol>
//! solver.row_rule = uniform # uniform | inverse_norm
//! solver.zero_threshold = 1e-14
//! spectral.truncation_multiplier = 3
//! spectral.power_iters_max = 1000
//! spectral.power_tol = 1e-8
//! init.scaling = isotropic  # isotropic | lambda0
//! regularity.c0 = 0.0125    # any regularity.* key enables the per-trial L estimate
//! regularity.alpha = 20
//! regularity.budget = 40000
//! regularity.mode = auto    # auto | dense | random
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{InitScaling, SpectralConfig};
use crate::linalg::ComplexVector;
use crate::regularity::{RegularityParams, SearchMode};
use crate::sensing::{SensingEnsemble, SensingModel};
use crate::solver::{RowRule, SolverConfig, StopRule};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SignalMode {
    /// Fresh `z` per trial, uniform on the unit sphere.
    RandomUnitSphere,
    Provided(ComplexVector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: SensingModel,
    pub n: usize,
    pub m: usize,
    pub num_trials: usize,
    /// `solver.seed` is replaced per trial.
    pub solver: SolverConfig,
    /// `spectral.seed` is replaced per trial.
    pub spectral: SpectralConfig,
    pub init_scaling: InitScaling,
    pub regularity: Option<RegularityParams>,
    pub signal: SignalMode,
    /// Shared by all trials when `model` is [`SensingModel::Provided`].
    pub ensemble: Option<SensingEnsemble>,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Sphere model with `max_iters = 200 n` and default everything else.
    pub fn new(model: SensingModel, n: usize, m: usize, num_trials: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            model,
            n,
            m,
            num_trials,
            solver: SolverConfig { max_iters: 200 * n as u64, ..SolverConfig::default() },
            spectral: SpectralConfig::default(),
            init_scaling: InitScaling::default(),
            regularity: None,
            signal: SignalMode::RandomUnitSphere,
            ensemble: None,
            output_path: None,
            format: OutputFormat::Csv,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 {
            return Err(Error::invalid("num_trials must be >= 1"));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid("n and m must be >= 1"));
        }
        match self.model {
            SensingModel::BlockUnitary if !self.m.is_multiple_of(self.n) => {
                return Err(Error::invalid("unitary model needs m to be a multiple of n"));
            }
            SensingModel::Provided => match &self.ensemble {
                None => return Err(Error::invalid("provided model needs an ensemble")),
                Some(e) if e.n() != self.n || e.m() != self.m => {
                    return Err(Error::invalid("provided ensemble does not match n and m"));
                }
                _ => {}
            },
            _ => {}
        }
        if let SignalMode::Provided(z) = &self.signal {
            if z.dim() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, found: z.dim() });
            }
        }
        self.solver.validate()?;
        self.spectral.validate()?;
        if let Some(r) = &self.regularity {
            r.validate()?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_base(&text, path.parent())
    }

    /// Parses config text; relative file references resolve against the working directory.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_base(text, None)
    }

    fn parse_with_base(text: &str, base: Option<&Path>) -> Result<Self> {
        let resolve = |p: &str| match base {
            Some(b) if Path::new(p).is_relative() => b.join(p),
            _ => PathBuf::from(p),
        };
        let mut seen = HashSet::new();
        let mut model = None;
        let (mut n, mut m, mut blocks) = (None, None, None);
        let mut cfg = ExperimentConfig::new(SensingModel::SphereUniform, 1, 1, 1, 0);
        let mut max_iters = None;
        let mut regularity: Option<RegularityParams> = None;
        let mut signal_line = None;
        let mut ensemble_file = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |msg: String| Error::Config { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found `{content}`")))?;
            if key.is_empty() || value.is_empty() {
                return Err(err(format!("empty key or value in `{content}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            let reg = || regularity.clone().unwrap_or_default();
            match key {
                "model" => model = Some(value.parse::<SensingModel>().map_err(|e| err(e.to_string()))?),
                "n" => n = Some(num(value, line)?),
                "m" => m = Some(num(value, line)?),
                "blocks" => blocks = Some(num::<usize>(value, line)?),
                "num_trials" => cfg.num_trials = num(value, line)?,
                "master_seed" => cfg.master_seed = num(value, line)?,
                "signal" => signal_line = Some((value.to_string(), line)),
                "ensemble_file" => ensemble_file = Some((resolve(value), line)),
                "output" => cfg.output_path = Some(PathBuf::from(value)),
                "format" => cfg.format = value.parse().map_err(|e: Error| err(e.to_string()))?,
                "solver.max_iters" => max_iters = Some(num(value, line)?),
                "solver.stop" => cfg.solver.stop = parse_stop(value).ok_or_else(|| err(format!("bad stop rule `{value}`")))?,
                "solver.row_rule" => {
                    cfg.solver.row_rule = match value {
                        "uniform" => RowRule::Uniform,
                        "inverse_norm" => RowRule::InverseNormWeighted,
                        other => return Err(err(format!("unknown row rule `{other}`"))),
                    }
                }
                "solver.zero_threshold" => cfg.solver.zero_threshold = num(value, line)?,
                "solver.history_stride" => cfg.solver.history_stride = Some(num(value, line)?),
                "spectral.truncation_multiplier" => cfg.spectral.truncation_multiplier = num(value, line)?,
                "spectral.power_iters_max" => cfg.spectral.power_iters_max = num(value, line)?,
                "spectral.power_tol" => cfg.spectral.power_tol = num(value, line)?,
                "init.scaling" => {
                    cfg.init_scaling = match value {
                        "isotropic" => InitScaling::Isotropic,
                        "lambda0" => InitScaling::Lambda0,
                        other => return Err(err(format!("unknown init scaling `{other}`"))),
                    }
                }
                "regularity.c0" => regularity = Some(RegularityParams { c0: num(value, line)?, ..reg() }),
                "regularity.alpha" => regularity = Some(RegularityParams { alpha: num(value, line)?, ..reg() }),
                "regularity.budget" => regularity = Some(RegularityParams { budget: num(value, line)?, ..reg() }),
                "regularity.mode" => {
                    let mode = match value {
                        "auto" => None,
                        "dense" => Some(SearchMode::DenseNet),
                        "random" => Some(SearchMode::RandomWithRefinement),
                        other => return Err(err(format!("unknown search mode `{other}`"))),
                    };
                    regularity = Some(RegularityParams { mode, ..reg() });
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }

        let missing = |k: &str| Error::Config { line: 0, msg: format!("missing required key `{k}`") };
        cfg.model = model.ok_or_else(|| missing("model"))?;
        cfg.n = n.ok_or_else(|| missing("n"))?;
        cfg.m = match (m, blocks) {
            (Some(_), Some(_)) => {
                return Err(Error::Config { line: 0, msg: "give either `m` or `blocks`, not both".into() });
            }
            (Some(m), None) => m,
            (None, Some(k)) => k * cfg.n,
            (None, None) => return Err(missing("m")),
        };
        cfg.solver.max_iters = max_iters.unwrap_or(200 * cfg.n as u64);
        cfg.regularity = regularity;
        if let Some((value, line)) = signal_line {
            cfg.signal = match value.as_str() {
                "random" => SignalMode::RandomUnitSphere,
                v => match v.strip_prefix("file:") {
                    Some(p) => SignalMode::Provided(load_signal(&resolve(p.trim()))?),
                    None => return Err(Error::Config { line, msg: format!("bad signal `{v}`") }),
                },
            };
        }
        if let Some((path, line)) = ensemble_file {
            if cfg.model != SensingModel::Provided {
                return Err(Error::Config { line, msg: "ensemble_file needs model = provided".into() });
            }
            cfg.ensemble = Some(SensingEnsemble::load_json(&path)?);
        }
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::Config { line: 0, msg },
            other => other,
        })?;
        Ok(cfg)
    }
}

fn num<T: FromStr>(value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Config { line, msg: format!("cannot parse `{value}`") })
}

fn parse_stop(value: &str) -> Option<StopRule> {
    let (kind, tol) = value.split_once(':')?;
    let tol: f64 = tol.trim().parse().ok()?;
    match kind.trim() {
        "aligned" => Some(StopRule::AlignedRelative(tol)),
        "residual" => Some(StopRule::Residual(tol)),
        _ => None,
    }
}

fn load_signal(path: &Path) -> Result<ComplexVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
