//! Seeded trial batches and empirical rate fitting.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SignalMode};
use crate::error::{Error, Result};
use crate::init::{spectral_estimate, InitScaling, SpectralConfig};
use crate::linalg::{dist_phase_aligned, ComplexVector};
use crate::par::{self, Execution};
use crate::regularity::{estimate_l, RegularityReport};
use crate::rng;
use crate::sensing::{measure, sample_block_unitary, sample_sphere, unitary_side_condition, SensingEnsemble, SensingModel};
use crate::solver::{Kaczmarz, SolverConfig, StopReason};

/// Errors at or below this are excluded from rate fits.
pub const ERROR_FLOOR: f64 = 1e-14;

const TAG_SIGNAL: u64 = 1;
const TAG_ENSEMBLE: u64 = 2;
const TAG_INIT: u64 = 3;
const TAG_SOLVER: u64 = 4;

/// Error sample at an epoch boundary (`k = epoch · n`). Errors are relative to `‖z‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSample {
    pub epoch: u64,
    pub aligned_error: f64,
    pub raw_error: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub model: SensingModel,
    pub failed: bool,
    pub failure: Option<String>,
    pub init_scaling: InitScaling,
    /// Relative aligned error of the starting point actually used.
    pub init_aligned_error: Option<f64>,
    pub init_aligned_error_lambda0: Option<f64>,
    pub init_aligned_error_isotropic: Option<f64>,
    pub init_raw_error: Option<f64>,
    pub iterations_run: u64,
    pub converged: bool,
    pub stop_reason: Option<StopReason>,
    pub final_aligned_error: Option<f64>,
    pub final_raw_error: Option<f64>,
    pub final_residual: Option<f64>,
    pub epochs: Vec<EpochSample>,
    /// `exp` of the least-squares slope of log aligned error against epoch.
    pub rate: Option<f64>,
    pub unitary_side_condition: Option<bool>,
    pub regularity: Option<RegularityReport>,
}

impl TrialRecord {
    fn empty(trial_id: usize, seed: u64, cfg: &ExperimentConfig) -> Self {
        TrialRecord {
            trial_id,
            seed,
            n: cfg.n,
            m: cfg.m,
            model: cfg.model,
            failed: false,
            failure: None,
            init_scaling: cfg.init_scaling,
            init_aligned_error: None,
            init_aligned_error_lambda0: None,
            init_aligned_error_isotropic: None,
            init_raw_error: None,
            iterations_run: 0,
            converged: false,
            stop_reason: None,
            final_aligned_error: None,
            final_raw_error: None,
            final_residual: None,
            epochs: Vec::new(),
            rate: None,
            unitary_side_condition: (cfg.model == SensingModel::BlockUnitary)
                .then(|| unitary_side_condition(cfg.n, cfg.m)),
            regularity: None,
        }
    }
}

/// Least-squares fit of `log e = a + b t`, returning `exp(b)`. Samples at or below
/// [`ERROR_FLOOR`] are dropped; `None` with fewer than three left.
pub fn fit_rate_series(epochs: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        epochs.iter().zip(errors).filter(|(_, &e)| e > ERROR_FLOOR && e.is_finite()).map(|(&t, &e)| (t, e.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let (mt, ml) = pts.iter().fold((0.0, 0.0), |(a, b), (t, l)| (a + t / k, b + l / k));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, l)| (a + (t - mt) * (l - ml), b + (t - mt).powi(2)));
    if sxx == 0.0 {
        return None;
    }
    Some((sxy / sxx).exp())
}

pub fn fit_rate(record: &TrialRecord) -> Option<f64> {
    let t: Vec<f64> = record.epochs.iter().map(|s| s.epoch as f64).collect();
    let e: Vec<f64> = record.epochs.iter().map(|s| s.aligned_error).collect();
    fit_rate_series(&t, &e)
}

pub fn trial_seed(master_seed: u64, trial_id: usize) -> u64 {
    rng::derive_seed(master_seed, trial_id as u64)
}

/// Ensemble used by the trial with per-trial seed `seed`.
pub fn trial_ensemble(cfg: &ExperimentConfig, seed: u64) -> Result<SensingEnsemble> {
    let s = rng::derive_seed(seed, TAG_ENSEMBLE);
    match cfg.model {
        SensingModel::SphereUniform => sample_sphere(cfg.n, cfg.m, s),
        SensingModel::BlockUnitary => sample_block_unitary(cfg.n, cfg.m / cfg.n, s),
        SensingModel::Provided => cfg.ensemble.clone().ok_or_else(|| Error::invalid("provided model needs an ensemble")),
    }
}

fn run_trial_inner(cfg: &ExperimentConfig, rec: &mut TrialRecord, exec: Execution) -> Result<()> {
    let seed = rec.seed;
    let z = match &cfg.signal {
        SignalMode::RandomUnitSphere => {
            ComplexVector::random_unit(cfg.n, &mut rng::substream(seed, TAG_SIGNAL))
        }
        SignalMode::Provided(z) => z.clone(),
    };
    let z_norm = z.norm();
    let scale = if z_norm > 0.0 { z_norm } else { 1.0 };
    let ensemble = trial_ensemble(cfg, seed)?;
    let y = measure(&ensemble, &z)?;

    let spectral = SpectralConfig { seed: rng::derive_seed(seed, TAG_INIT), ..cfg.spectral.clone() };
    let est = spectral_estimate(&ensemble, &y, &spectral)?;
    let rel = |x: &ComplexVector| dist_phase_aligned(x, &z).map(|d| (d.aligned / scale, d.raw / scale));
    rec.init_aligned_error_lambda0 = Some(rel(&est.initial_point(InitScaling::Lambda0))?.0);
    rec.init_aligned_error_isotropic = Some(rel(&est.initial_point(InitScaling::Isotropic))?.0);
    let x0 = est.initial_point(cfg.init_scaling);
    let (a0, r0) = rel(&x0)?;
    rec.init_aligned_error = Some(a0);
    rec.init_raw_error = Some(r0);

    if let Some(params) = &cfg.regularity {
        rec.regularity = Some(estimate_l(&ensemble, &z, params, exec)?);
    }

    let solver_cfg = SolverConfig { seed: rng::derive_seed(seed, TAG_SOLVER), ..cfg.solver.clone() };
    let state = Kaczmarz::new(&ensemble, &y, solver_cfg)?.solve(x0, Some(&z))?;
    let n = cfg.n as u64;
    rec.epochs = state
        .history
        .iter()
        .filter(|p| p.k % n == 0)
        .map(|p| EpochSample {
            epoch: p.k / n,
            aligned_error: p.aligned_error.unwrap_or(f64::NAN) / scale,
            raw_error: p.raw_error.unwrap_or(f64::NAN) / scale,
            residual: p.residual,
        })
        .collect();
    let last = state.last().copied().expect("solve records at least one point");
    rec.iterations_run = state.k;
    rec.stop_reason = state.stop_reason;
    rec.converged = state.stop_reason == Some(StopReason::AlignedTolerance)
        || state.stop_reason == Some(StopReason::ResidualTolerance);
    rec.final_aligned_error = last.aligned_error.map(|e| e / scale);
    rec.final_raw_error = last.raw_error.map(|e| e / scale);
    rec.final_residual = Some(last.residual);
    rec.rate = fit_rate(rec);
    Ok(())
}

/// Runs one trial. Failures are captured in the record, not returned.
pub fn run_trial(cfg: &ExperimentConfig, trial_id: usize, exec: Execution) -> TrialRecord {
    let mut rec = TrialRecord::empty(trial_id, trial_seed(cfg.master_seed, trial_id), cfg);
    if let Err(e) = run_trial_inner(cfg, &mut rec, exec) {
        rec.failed = true;
        rec.failure = Some(e.to_string());
    }
    rec
}

/// All trials of `cfg`, sorted by `trial_id`. Output does not depend on `exec`.
pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    Ok(par::map_indexed(exec, cfg.num_trials, |t| run_trial(cfg, t, exec)))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    run_experiment_with(cfg, Execution::default())
}
