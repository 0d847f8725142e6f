//! The amplitude objective `f(x) = (1/m) Σ (|a_i^* x| − y_i)²`, its directional
//! derivatives, wedge sets and the regularity-constant estimator.

mod estimate;
mod lemmas;

pub use estimate::{
    estimate_l, evaluate_direction, DirectionTerms, RegularityParams, RegularityReport, SearchMode,
};
pub use lemmas::{
    phase_expectation, projection_mass_fraction, validate_lemmas, wedge_fraction, ExpectationCheck,
    LemmaReport, ProjectionMassCheck, WedgeCheck, MIN_TRIALS as LEMMA_MIN_TRIALS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, ComplexVector};
use crate::sensing::{MeasurementSet, SensingEnsemble};

fn check_inputs(ensemble: &SensingEnsemble, y: &MeasurementSet, x: &ComplexVector) -> Result<()> {
    y.check_matches(ensemble)?;
    ensemble.check_dim(x)
}

/// `f(x) = (1/m) Σ_i (|a_i^* x| − y_i)²`.
pub fn objective_f(ensemble: &SensingEnsemble, y: &MeasurementSet, x: &ComplexVector) -> Result<f64> {
    check_inputs(ensemble, y, x)?;
    let sum: f64 = ensemble
        .rows()
        .zip(y.values())
        .map(|(a, &yi)| (dot(a, x.as_slice()).norm() - yi).powi(2))
        .sum();
    Ok(sum / ensemble.m() as f64)
}

/// `f'_v(x) = (1/m) Σ_i (1 − y_i/|a_i^*x|) · 2 Re((a_i^*v) · conj(a_i^*x))`.
///
/// Fails with [`Error::Nonsmooth`] if some `a_i^* x` vanishes; the one-sided derivative
/// exists there but this closed form does not apply.
pub fn dir_deriv_f(
    ensemble: &SensingEnsemble,
    y: &MeasurementSet,
    x: &ComplexVector,
    v: &ComplexVector,
) -> Result<f64> {
    check_inputs(ensemble, y, x)?;
    ensemble.check_dim(v)?;
    let mut sum = 0.0;
    for (i, (a, &yi)) in ensemble.rows().zip(y.values()).enumerate() {
        let ax = dot(a, x.as_slice());
        let modulus = ax.norm();
        if modulus == 0.0 {
            return Err(Error::Nonsmooth { index: i });
        }
        let av = dot(a, v.as_slice());
        sum += (1.0 - yi / modulus) * 2.0 * (av * ax.conj()).re;
    }
    Ok(sum / ensemble.m() as f64)
}

/// Single-row objective `f_i(x) = (|a^* z| − |a^* x|)²`.
pub fn fi(a: &ComplexVector, z: &ComplexVector, x: &ComplexVector) -> Result<f64> {
    let y = crate::linalg::inner(a, z)?.norm();
    Ok((y - crate::linalg::inner(a, x)?.norm()).powi(2))
}

/// Second directional derivative of `f_i` along `v` at `x`:
/// `2|a^*v|² − y·2|a^*v|²/|a^*x| + y·(2Re((a^*v)·conj(a^*x)))²/(2|a^*x|³)`, `y = |a^*z|`.
pub fn second_dir_deriv_fi(
    a: &ComplexVector,
    z: &ComplexVector,
    x: &ComplexVector,
    v: &ComplexVector,
) -> Result<f64> {
    let y = crate::linalg::inner(a, z)?.norm();
    let ax = crate::linalg::inner(a, x)?;
    let av = crate::linalg::inner(a, v)?;
    let modulus = ax.norm();
    if modulus == 0.0 {
        return Err(Error::Nonsmooth { index: 0 });
    }
    let av_sq = av.norm_sqr();
    let cross = 2.0 * (av * ax.conj()).re;
    Ok(2.0 * av_sq - y * 2.0 * av_sq / modulus + y * cross * cross / (2.0 * modulus.powi(3)))
}

/// `S(v, β) = { i : β |a_i^* v| ≥ |a_i^* z| }` (0-based indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeSet {
    pub indices: Vec<usize>,
    pub v: ComplexVector,
    pub beta: f64,
    pub m: usize,
}

impl WedgeSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn fraction(&self) -> f64 {
        self.indices.len() as f64 / self.m as f64
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &WedgeSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }
}

pub fn wedge(
    ensemble: &SensingEnsemble,
    z: &ComplexVector,
    v: &ComplexVector,
    beta: f64,
) -> Result<WedgeSet> {
    ensemble.check_dim(z)?;
    ensemble.check_dim(v)?;
    if !(beta > 0.0) {
        return Err(Error::invalid("wedge parameter beta must be positive"));
    }
    let indices = ensemble
        .rows()
        .enumerate()
        .filter(|(_, a)| beta * dot(a, v.as_slice()).norm() >= dot(a, z.as_slice()).norm())
        .map(|(i, _)| i)
        .collect();
    Ok(WedgeSet { indices, v: v.clone(), beta, m: ensemble.m() })
}
