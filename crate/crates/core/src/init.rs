//! Truncated spectral initialization.
//!
//! `λ₀ = sqrt((1/m) Σ y_i²)` and `Y = (1/m) Σ y_i² a_i a_i^* · 1(y_i ≤ c·λ₀)`; the
//! initial point is `λ₀` times the unit leading eigenvector of `Y`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sqr, ComplexVector, SquareMatrix};
use crate::rng;
use crate::sensing::{MeasurementSet, SensingEnsemble};

/// How the unit eigenvector is scaled into an initial point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScaling {
    /// `λ₀ · x̃`. For rows with `E‖a‖² = n` (Gaussian) `λ₀ ≈ ‖z‖`.
    Lambda0,
    /// `λ₀ · sqrt(n / mean ‖a_i‖²) · x̃`, an estimate of `‖z‖` for any isotropic
    /// ensemble. For unit-norm rows this is `λ₀ √n`.
    #[default]
    Isotropic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Truncation `y_i ≤ truncation_multiplier · λ₀`.
    pub truncation_multiplier: f64,
    pub power_iters_max: usize,
    /// Stop once `‖Y v − μ v‖ ≤ power_tol · μ`.
    pub power_tol: f64,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { truncation_multiplier: 3.0, power_iters_max: 1000, power_tol: 1e-8, seed: 0 }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.truncation_multiplier > 0.0) {
            return Err(Error::invalid("truncation_multiplier must be positive"));
        }
        if !(self.power_tol > 0.0) {
            return Err(Error::invalid("power_tol must be positive"));
        }
        if self.power_iters_max == 0 {
            return Err(Error::invalid("power_iters_max must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SpectralEstimate {
    pub lambda0: f64,
    /// Unit leading eigenvector, phase fixed so its largest-modulus entry is real positive.
    pub direction: ComplexVector,
    pub eigenvalue: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Rows kept by the truncation.
    pub kept: usize,
    pub matrix: SquareMatrix,
    mean_row_norm_sqr: f64,
}

impl SpectralEstimate {
    pub fn norm_estimate(&self, scaling: InitScaling) -> f64 {
        let n = self.direction.dim() as f64;
        match scaling {
            InitScaling::Lambda0 => self.lambda0,
            InitScaling::Isotropic => self.lambda0 * (n / self.mean_row_norm_sqr).sqrt(),
        }
    }

    pub fn initial_point(&self, scaling: InitScaling) -> ComplexVector {
        self.direction.scaled_real(self.norm_estimate(scaling))
    }
}

/// Builds the truncated matrix and its leading eigenpair.
pub fn spectral_estimate(
    ensemble: &SensingEnsemble,
    y: &MeasurementSet,
    cfg: &SpectralConfig,
) -> Result<SpectralEstimate> {
    cfg.validate()?;
    y.check_matches(ensemble)?;
    let n = ensemble.n();
    let m = ensemble.m() as f64;
    let lambda0 = (y.values().iter().map(|v| v * v).sum::<f64>() / m).sqrt();
    if lambda0 == 0.0 {
        return Err(Error::ZeroInput("all measurements are zero"));
    }
    let cutoff = cfg.truncation_multiplier * lambda0;
    let mut mat = SquareMatrix::zeros(n);
    let mut kept = 0;
    for (a, &yi) in ensemble.rows().zip(y.values()) {
        if yi <= cutoff {
            mat.add_outer(yi * yi / m, a);
            kept += 1;
        }
    }

    let mut r = rng::stream(cfg.seed);
    let mut v = ComplexVector::random_normal(n, &mut r).normalized()?.into_inner();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut mu = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.power_iters_max {
        mat.apply(&v, &mut w);
        iterations += 1;
        mu = dot(&v, &w).re;
        residual = w.iter().zip(&v).map(|(wi, vi)| (wi - vi * mu).norm_sqr()).sum::<f64>().sqrt();
        if residual <= cfg.power_tol * mu {
            break;
        }
        let s = norm_sqr(&w).sqrt();
        if s == 0.0 {
            return Err(Error::ZeroInput("truncated spectral matrix is zero"));
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / s);
    }
    if !(residual <= cfg.power_tol * mu) {
        return Err(Error::NotConverged { iters: iterations, residual });
    }

    let mut direction = ComplexVector::new(v)?;
    let pivot = direction[direction.argmax_modulus()];
    direction = direction.scaled(pivot.conj() / pivot.norm());
    let mean_row_norm_sqr = ensemble.row_norms_sqr().iter().sum::<f64>() / m;
    Ok(SpectralEstimate {
        lambda0,
        direction,
        eigenvalue: mu,
        residual,
        iterations,
        kept,
        matrix: mat,
        mean_row_norm_sqr,
    })
}

/// `λ₀` times the leading eigenvector of the truncated matrix.
pub fn spectral_init(ensemble: &SensingEnsemble, y: &MeasurementSet, cfg: &SpectralConfig) -> Result<ComplexVector> {
    Ok(spectral_estimate(ensemble, y, cfg)?.initial_point(InitScaling::Lambda0))
}
