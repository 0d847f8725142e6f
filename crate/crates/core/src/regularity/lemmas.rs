//! Monte-Carlo checks of the closed-form constants used in the regularity bounds.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, ComplexVector};
use crate::par::{self, Execution, MC_CHUNK};
use crate::rng;
use crate::sensing::sample_sphere;

use super::wedge;

/// Projection-mass threshold constant: `‖P_{span(v,z)} a‖² ≥ 0.8/n`.
pub const PROJECTION_MASS_C1: f64 = 0.8;
pub const PROJECTION_MASS_BOUND: f64 = 0.75;

const TAG_PAIR: u64 = 0x7061_6972;
const TAG_MASS: u64 = 1;
const TAG_EXPECT: u64 = 2;
const TAG_WEDGE: u64 = 3;

/// Random orthonormal pair `(z, v)` in `C^n`, `n ≥ 2`.
fn orthonormal_pair(n: usize, seed: u64) -> Result<(ComplexVector, ComplexVector)> {
    if n < 2 {
        return Err(Error::invalid("need n >= 2 for an orthonormal pair"));
    }
    let mut r = rng::substream(seed, TAG_PAIR);
    let z = ComplexVector::random_unit(n, &mut r);
    loop {
        let u = ComplexVector::random_normal(n, &mut r);
        let mut v = u.clone();
        v.axpy(-dot(z.as_slice(), u.as_slice()), &z)?;
        if v.norm() > 1e-8 {
            return Ok((z, v.normalized()?));
        }
    }
}

/// Fraction of uniform unit `a ∈ C^n` with `‖P_{span(v,z)} a‖² ≥ c1/n`.
pub fn projection_mass_fraction(n: usize, c1: f64, samples: usize, seed: u64, exec: Execution) -> Result<f64> {
    let (z, v) = orthonormal_pair(n, seed)?;
    let threshold = c1 / n as f64;
    let counts = par::chunked(exec, samples, MC_CHUNK, rng::derive_seed(seed, TAG_MASS), |r, count| {
        let mut a = vec![Complex64::new(0.0, 0.0); n];
        let mut hits = 0usize;
        for _ in 0..count {
            rng::fill_unit_sphere(r, &mut a);
            let mass = dot(z.as_slice(), &a).norm_sqr() + dot(v.as_slice(), &a).norm_sqr();
            if mass >= threshold {
                hits += 1;
            }
        }
        hits
    });
    Ok(counts.iter().sum::<usize>() as f64 / samples as f64)
}

/// Monte-Carlo mean of `(2Re((b^*ẑ)(v̂^*b)))² / (2|b^*ẑ|²)` for `b` uniform on the unit
/// sphere of `C²`, `ẑ = [1, 0]`, `v̂ = [cos θ, sin θ]`.
pub fn phase_expectation(theta: f64, samples: usize, seed: u64, exec: Execution) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    let sums = par::chunked(exec, samples, MC_CHUNK, rng::derive_seed(seed, TAG_EXPECT), |r, count| {
        let mut b = [Complex64::new(0.0, 0.0); 2];
        let mut acc = 0.0;
        for _ in 0..count {
            rng::fill_unit_sphere(r, &mut b);
            let bz = b[0].conj();
            let vb = b[0] * c + b[1] * s;
            let x = 2.0 * (bz * vb).re;
            acc += x * x / (2.0 * bz.norm_sqr());
        }
        acc
    });
    sums.iter().sum::<f64>() / samples as f64
}

/// Fractions `|S(v, β)|/N` for a random orthonormal pair in `C^n` and `N` sphere samples,
/// one entry per `β`. All `β` share the same samples.
pub fn wedge_fraction(n: usize, betas: &[f64], samples: usize, seed: u64, exec: Execution) -> Result<Vec<f64>> {
    let (z, v) = orthonormal_pair(n, seed)?;
    let counts = par::chunked(exec, samples, MC_CHUNK, rng::derive_seed(seed, TAG_WEDGE), |r, count| {
        let e = sample_sphere(n, count, r.random()).expect("n, count >= 1");
        betas.iter().map(|&b| wedge(&e, &z, &v, b).map(|w| w.len())).collect::<Result<Vec<_>>>()
    });
    let mut totals = vec![0usize; betas.len()];
    for chunk in counts {
        for (t, c) in totals.iter_mut().zip(chunk?) {
            *t += c;
        }
    }
    Ok(totals.into_iter().map(|t| t as f64 / samples as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMassCheck {
    pub n: usize,
    pub c1: f64,
    pub fraction: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationCheck {
    pub theta: f64,
    pub estimate: f64,
    /// `½cos²θ + ¼sin²θ`, the reference constant for this expectation.
    pub stated_target: f64,
    /// `cos²θ + ½sin²θ`, the exact value of the expectation as written.
    pub exact_target: f64,
    pub tolerance: f64,
    pub stated_passed: bool,
    pub exact_passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeCheck {
    pub beta: f64,
    pub fraction: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub projection_mass: ProjectionMassCheck,
    pub expectation: Vec<ExpectationCheck>,
    pub wedge: Vec<WedgeCheck>,
    /// Projection mass, exact expectation values and wedge fractions all within tolerance.
    pub passed: bool,
    /// Whether the reference `½cos²θ + ¼sin²θ` values were also matched.
    pub stated_expectation_passed: bool,
}

pub const MIN_TRIALS: usize = 100_000;

/// Runs the three Monte-Carlo checks with `trials` samples each.
///
/// Tolerances are the fixed values `0.01` (mass, expectation) and `0.002` (wedge), widened
/// to four standard errors when `trials` is too small for the fixed value to be meaningful.
pub fn validate_lemmas(n: usize, trials: usize, seed: u64, exec: Execution) -> Result<LemmaReport> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!("lemma validation needs at least {MIN_TRIALS} trials")));
    }
    let big_n = trials as f64;

    let fraction = projection_mass_fraction(n, PROJECTION_MASS_C1, trials, seed, exec)?;
    let mass_tol = 0.01f64.max(4.0 * (0.25 / big_n).sqrt());
    let projection_mass = ProjectionMassCheck {
        n,
        c1: PROJECTION_MASS_C1,
        fraction,
        bound: PROJECTION_MASS_BOUND,
        tolerance: mass_tol,
        passed: fraction >= PROJECTION_MASS_BOUND - mass_tol,
    };

    let expectation: Vec<ExpectationCheck> = [0.0, FRAC_PI_4, FRAC_PI_2]
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let estimate = phase_expectation(theta, trials, rng::derive_seed(seed, 10 + k as u64), exec);
            let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
            let stated_target = 0.5 * c2 + 0.25 * s2;
            let exact_target = c2 + 0.5 * s2;
            // The summand lies in [0, 2]; its standard deviation is below 1.
            let tolerance = 0.01f64.max(4.0 / big_n.sqrt());
            ExpectationCheck {
                theta,
                estimate,
                stated_target,
                exact_target,
                tolerance,
                stated_passed: (estimate - stated_target).abs() <= tolerance,
                exact_passed: (estimate - exact_target).abs() <= tolerance,
            }
        })
        .collect();

    let betas = [0.5, 1.0, 2.0];
    let fractions = wedge_fraction(n, &betas, trials, rng::derive_seed(seed, 20), exec)?;
    let wedge: Vec<WedgeCheck> = betas
        .iter()
        .zip(fractions)
        .map(|(&beta, fraction)| {
            let target = beta * beta / (1.0 + beta * beta);
            let tolerance = 0.002f64.max(4.0 * (target * (1.0 - target) / big_n).sqrt());
            WedgeCheck { beta, fraction, target, tolerance, passed: (fraction - target).abs() <= tolerance }
        })
        .collect();

    let passed =
        projection_mass.passed && expectation.iter().all(|e| e.exact_passed) && wedge.iter().all(|w| w.passed);
    let stated_expectation_passed = expectation.iter().all(|e| e.stated_passed);
    Ok(LemmaReport { n, trials, seed, projection_mass, expectation, wedge, passed, stated_expectation_passed })
}
