//! Randomized Kaczmarz iteration for phase retrieval.
//!
//! Each step picks one row `a_r` and replaces the iterate by its nearest point on the
//! magnitude constraint set `{w : |a_r^* w| = y_r}`.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{aligned_unchecked, dot, norm_sqr, ComplexVector};
use crate::regularity::objective_f;
use crate::rng::{self, StreamRng};
use crate::sensing::{MeasurementSet, SensingEnsemble};

pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRule {
    /// Each row with probability `1/m`.
    #[default]
    Uniform,
    /// Row `i` with probability proportional to `1/‖a_i‖²`. Identical in law to
    /// [`RowRule::Uniform`] when every row has unit norm. Note that the classical
    /// linear-system analysis samples proportional to `‖a_i‖²` instead.
    InverseNormWeighted,
}

/// Stopping tolerance; exactly one is active.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Experiment mode: stop when `aligned(x, z) / ‖z‖ ≤ tol`. Needs the true signal.
    AlignedRelative(f64),
    /// Blind mode: stop when `f(x) ≤ tol`, evaluated at history points.
    Residual(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: u64,
    pub stop: StopRule,
    pub row_rule: RowRule,
    /// `|a^* x|` below this triggers the degenerate fallback of the projection.
    pub zero_threshold: f64,
    pub seed: u64,
    /// Iterations between history samples; `None` means one epoch (`n` iterations).
    pub history_stride: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 100_000,
            stop: StopRule::AlignedRelative(1e-8),
            row_rule: RowRule::Uniform,
            zero_threshold: DEFAULT_ZERO_THRESHOLD,
            seed: 0,
            history_stride: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.zero_threshold > 0.0 && self.zero_threshold.is_finite()) {
            return Err(Error::invalid("zero_threshold must be positive"));
        }
        let tol = match self.stop {
            StopRule::AlignedRelative(t) | StopRule::Residual(t) => t,
        };
        if !(tol >= 0.0) {
            return Err(Error::invalid("stopping tolerance must be nonnegative"));
        }
        if self.history_stride == Some(0) {
            return Err(Error::invalid("history_stride must be >= 1"));
        }
        Ok(())
    }

    fn stride(&self, n: usize) -> u64 {
        self.history_stride.unwrap_or(n as u64).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub k: u64,
    /// `‖x − z‖`, when the signal is known.
    pub raw_error: Option<f64>,
    /// Phase-aligned `min_θ ‖x − e^{iθ}z‖`, when the signal is known.
    pub aligned_error: Option<f64>,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AlignedTolerance,
    ResidualTolerance,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub x: ComplexVector,
    pub k: u64,
    rng: StreamRng,
    pub history: Vec<HistoryPoint>,
    pub stop_reason: Option<StopReason>,
}

impl SolverState {
    pub fn new(x0: ComplexVector, seed: u64) -> Self {
        SolverState { x: x0, k: 0, rng: rng::stream(seed), history: Vec::new(), stop_reason: None }
    }

    pub fn last(&self) -> Option<&HistoryPoint> {
        self.history.last()
    }
}

/// Nearest point to `x` on `{w : |a^* w| = y}`:
/// `x − (1 − y/|a^*x|)·(a^*x)·a/‖a‖²`, or `x + y·a/‖a‖²` when `|a^*x| < τ`.
pub fn project_magnitude(
    x: &ComplexVector,
    a: &ComplexVector,
    y: f64,
    zero_threshold: f64,
) -> Result<ComplexVector> {
    if x.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: a.dim() });
    }
    let a_norm_sqr = a.norm_sqr();
    if a_norm_sqr == 0.0 {
        return Err(Error::ZeroInput("sensing vector has zero norm"));
    }
    if !(y >= 0.0) {
        return Err(Error::invalid("magnitude must be nonnegative"));
    }
    if !(zero_threshold > 0.0) {
        return Err(Error::invalid("zero_threshold must be positive"));
    }
    let mut out = x.clone();
    project_in_place(out.as_mut_slice(), a.as_slice(), a_norm_sqr, y, zero_threshold);
    Ok(out)
}

#[inline]
pub(crate) fn project_in_place(
    x: &mut [Complex64],
    a: &[Complex64],
    a_norm_sqr: f64,
    y: f64,
    zero_threshold: f64,
) {
    let c = dot(a, x);
    let modulus = c.norm();
    let coeff = if modulus >= zero_threshold {
        // Target a^* w = y·c/|c|; move along a by the shortfall.
        c * (y / modulus - 1.0)
    } else {
        Complex64::new(y, 0.0)
    } / a_norm_sqr;
    for (xi, ai) in x.iter_mut().zip(a) {
        *xi += ai * coeff;
    }
}

enum RowSampler {
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
}

impl RowSampler {
    fn sample(&self, rng: &mut StreamRng) -> usize {
        match self {
            RowSampler::Uniform(m) => rng.random_range(0..*m),
            RowSampler::Weighted(w) => w.sample(rng),
        }
    }
}

/// Kaczmarz solver bound to one ensemble and its measurements.
pub struct Kaczmarz<'a> {
    ensemble: &'a SensingEnsemble,
    y: &'a MeasurementSet,
    cfg: SolverConfig,
    sampler: RowSampler,
}

impl<'a> Kaczmarz<'a> {
    pub fn new(ensemble: &'a SensingEnsemble, y: &'a MeasurementSet, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        y.check_matches(ensemble)?;
        let sampler = match cfg.row_rule {
            RowRule::Uniform => RowSampler::Uniform(ensemble.m()),
            RowRule::InverseNormWeighted => {
                let w: Vec<f64> = ensemble.row_norms_sqr().iter().map(|s| s.recip()).collect();
                RowSampler::Weighted(WeightedIndex::new(w).map_err(|e| Error::invalid(e.to_string()))?)
            }
        };
        Ok(Kaczmarz { ensemble, y, cfg, sampler })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// One projection step; returns the selected row.
    pub fn step(&self, state: &mut SolverState) -> Result<usize> {
        self.ensemble.check_dim(&state.x)?;
        Ok(self.step_unchecked(state))
    }

    fn step_unchecked(&self, state: &mut SolverState) -> usize {
        let r = self.sampler.sample(&mut state.rng);
        project_in_place(
            state.x.as_mut_slice(),
            self.ensemble.row(r),
            self.ensemble.row_norm_sqr(r),
            self.y.values()[r],
            self.cfg.zero_threshold,
        );
        state.k += 1;
        r
    }

    fn record(&self, state: &mut SolverState, z: Option<&ComplexVector>) -> HistoryPoint {
        let d = z.map(|z| aligned_unchecked(state.x.as_slice(), z.as_slice()));
        let point = HistoryPoint {
            k: state.k,
            raw_error: d.map(|d| d.raw),
            aligned_error: d.map(|d| d.aligned),
            residual: objective_f(self.ensemble, self.y, &state.x).expect("dims checked"),
        };
        state.history.push(point);
        point
    }

    /// Iterates from `x0` until the stopping rule fires or `max_iters` is reached.
    /// `z` is required in experiment mode and, when given, is used for error history.
    pub fn solve(&self, x0: ComplexVector, z: Option<&ComplexVector>) -> Result<SolverState> {
        self.ensemble.check_dim(&x0)?;
        if let Some(z) = z {
            self.ensemble.check_dim(z)?;
        }
        let aligned_target = match self.cfg.stop {
            StopRule::AlignedRelative(tol) => {
                let z = z.ok_or_else(|| Error::invalid("aligned stopping rule needs the true signal"))?;
                let scale = if z.norm() > 0.0 { z.norm() } else { 1.0 };
                Some((z, tol * scale))
            }
            StopRule::Residual(_) => None,
        };
        let residual_tol = match self.cfg.stop {
            StopRule::Residual(t) => Some(t),
            StopRule::AlignedRelative(_) => None,
        };
        let stride = self.cfg.stride(self.ensemble.n());
        let mut state = SolverState::new(x0, self.cfg.seed);

        let first = self.record(&mut state, z);
        if aligned_target.is_some_and(|(_, t)| first.aligned_error.unwrap() <= t) {
            state.stop_reason = Some(StopReason::AlignedTolerance);
            return Ok(state);
        }
        if residual_tol.is_some_and(|t| first.residual <= t) {
            state.stop_reason = Some(StopReason::ResidualTolerance);
            return Ok(state);
        }

        while state.k < self.cfg.max_iters {
            self.step_unchecked(&mut state);
            if let Some((z, target)) = aligned_target {
                if aligned_unchecked(state.x.as_slice(), z.as_slice()).aligned <= target {
                    state.stop_reason = Some(StopReason::AlignedTolerance);
                    break;
                }
            }
            if state.k.is_multiple_of(stride) {
                let p = self.record(&mut state, z);
                if residual_tol.is_some_and(|t| p.residual <= t) {
                    state.stop_reason = Some(StopReason::ResidualTolerance);
                    break;
                }
            }
        }
        if state.stop_reason.is_none() {
            state.stop_reason = Some(StopReason::MaxIters);
        }
        if state.history.last().map(|p| p.k) != Some(state.k) {
            self.record(&mut state, z);
        }
        Ok(state)
    }
}

/// Single Kaczmarz step on an owned state.
pub fn step(
    mut state: SolverState,
    ensemble: &SensingEnsemble,
    y: &MeasurementSet,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    Kaczmarz::new(ensemble, y, cfg.clone())?.step(&mut state)?;
    Ok(state)
}

pub fn solve(
    ensemble: &SensingEnsemble,
    y: &MeasurementSet,
    x0: ComplexVector,
    cfg: &SolverConfig,
    z: Option<&ComplexVector>,
) -> Result<SolverState> {
    Kaczmarz::new(ensemble, y, cfg.clone())?.solve(x0, z)
}

/// Mean squared post-projection distance `(1/m) Σ_i ‖P_i x − z‖²` over all rows.
pub fn mean_projected_sq_distance(
    ensemble: &SensingEnsemble,
    y: &MeasurementSet,
    x: &ComplexVector,
    z: &ComplexVector,
    zero_threshold: f64,
) -> Result<f64> {
    y.check_matches(ensemble)?;
    ensemble.check_dim(x)?;
    ensemble.check_dim(z)?;
    let mut total = 0.0;
    let mut buf = x.as_slice().to_vec();
    for i in 0..ensemble.m() {
        buf.copy_from_slice(x.as_slice());
        project_in_place(&mut buf, ensemble.row(i), ensemble.row_norm_sqr(i), y.values()[i], zero_threshold);
        total += norm_sqr(&buf.iter().zip(z.iter()).map(|(a, b)| a - b).collect::<Vec<_>>());
    }
    Ok(total / ensemble.m() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cis, inner};
    use crate::regularity::dir_deriv_f;
    use crate::sensing::{measure, sample_sphere};
    use proptest::prelude::*;

    /// `min_θ ‖w(θ) − x‖` over `w(θ) = x + (y e^{iθ} − a^*x)·a/‖a‖²` on a uniform grid.
    fn grid_oracle(x: &ComplexVector, a: &ComplexVector, y: f64, points: usize) -> (f64, ComplexVector) {
        let c = inner(a, x).unwrap();
        let an = a.norm_sqr();
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..points {
            let t = std::f64::consts::TAU * k as f64 / points as f64;
            let d = (cis(t) * y - c).norm() / an.sqrt();
            if d < best.0 {
                best = (d, t);
            }
        }
        let mut w = x.clone();
        w.axpy((cis(best.1) * y - c) / an, a).unwrap();
        (best.0, w)
    }

    #[test]
    fn fixed_point_when_constraint_holds() {
        let mut rng = rng::stream(1);
        let x = ComplexVector::random_normal(4, &mut rng);
        let a = ComplexVector::random_unit(4, &mut rng);
        let y = inner(&a, &x).unwrap().norm();
        let p = project_magnitude(&x, &a, y, 1e-14).unwrap();
        assert!((&p - &x).norm() < 1e-14);
    }

    #[test]
    fn zero_magnitude_projects_onto_hyperplane() {
        let mut rng = rng::stream(2);
        let x = ComplexVector::random_normal(3, &mut rng);
        let a = ComplexVector::random_normal(3, &mut rng);
        let p = project_magnitude(&x, &a, 0.0, 1e-14).unwrap();
        let mut expect = x.clone();
        expect.axpy(-inner(&a, &x).unwrap() / a.norm_sqr(), &a).unwrap();
        assert!((&p - &expect).norm() < 1e-14);
        assert!(inner(&a, &p).unwrap().norm() < 1e-14);
    }

    #[test]
    fn degenerate_case_uses_unit_phase() {
        let a = ComplexVector::basis(2, 0);
        let x = ComplexVector::basis(2, 1);
        let p = project_magnitude(&x, &a, 0.7, 1e-14).unwrap();
        assert_eq!(p[0], Complex64::new(0.7, 0.0));
        assert_eq!(p[1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn projection_errors() {
        let x = ComplexVector::zeros(2);
        assert!(project_magnitude(&x, &ComplexVector::zeros(2), 1.0, 1e-14).is_err());
        assert!(project_magnitude(&x, &ComplexVector::zeros(3), 1.0, 1e-14).is_err());
        assert!(project_magnitude(&x, &ComplexVector::basis(2, 0), -1.0, 1e-14).is_err());
    }

    #[test]
    fn projection_matches_grid_oracle() {
        let mut rng = rng::stream(3);
        for _ in 0..5 {
            let x = ComplexVector::random_normal(3, &mut rng);
            let a = ComplexVector::random_normal(3, &mut rng);
            let y = rng.random_range(0.0..2.0);
            let p = project_magnitude(&x, &a, y, 1e-14).unwrap();
            let (best, w) = grid_oracle(&x, &a, y, 1_000_000);
            assert!(((&p - &x).norm() - best).abs() < 1e-8);
            assert!((&p - &w).norm() < 1e-5);
            // Non-expansive towards the nearest constraint point.
            assert!((&p - &w).norm() <= (&x - &w).norm() + 1e-10);
        }
    }

    #[test]
    fn step_leaves_solution_fixed() {
        let e = sample_sphere(4, 40, 5).unwrap();
        let mut rng = rng::stream(6);
        let z = ComplexVector::random_unit(4, &mut rng);
        let y = measure(&e, &z).unwrap();
        let cfg = SolverConfig::default();
        let mut state = SolverState::new(z.clone(), 1);
        for _ in 0..50 {
            state = step(state, &e, &y, &cfg).unwrap();
        }
        assert_eq!(state.k, 50);
        assert!((&state.x - &z).norm() < 1e-13);
    }

    #[test]
    fn single_row_system_converges_in_one_step() {
        let a = ComplexVector::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
        let e = SensingEnsemble::from_vectors(std::slice::from_ref(&a), 0).unwrap();
        let z = ComplexVector::basis(2, 0);
        let y = measure(&e, &z).unwrap();
        let cfg = SolverConfig { stop: StopRule::Residual(1e-20), history_stride: Some(1), ..Default::default() };
        let x0 = ComplexVector::basis(2, 1);
        let s = solve(&e, &y, x0, &cfg, None).unwrap();
        assert_eq!(s.k, 1);
        assert_eq!(s.stop_reason, Some(StopReason::ResidualTolerance));
        assert!((inner(&a, &s.x).unwrap().norm() - y.values()[0]).abs() < 1e-12);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let e = sample_sphere(5, 60, 7).unwrap();
        let mut rng = rng::stream(8);
        let z = ComplexVector::random_unit(5, &mut rng);
        let y = measure(&e, &z).unwrap();
        let x0 = ComplexVector::random_unit(5, &mut rng);
        let cfg = SolverConfig { max_iters: 300, seed: 99, ..Default::default() };
        let a = solve(&e, &y, x0.clone(), &cfg, Some(&z)).unwrap();
        let b = solve(&e, &y, x0, &cfg, Some(&z)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn starting_at_solution_stops_immediately() {
        let e = sample_sphere(6, 100, 9).unwrap();
        let mut rng = rng::stream(10);
        let z = ComplexVector::random_unit(6, &mut rng);
        let y = measure(&e, &z).unwrap();
        let s = solve(&e, &y, z.clone(), &SolverConfig::default(), Some(&z)).unwrap();
        assert_eq!(s.k, 0);
        assert_eq!(s.history.len(), 1);
        assert_eq!(s.history[0].aligned_error, Some(0.0));
        assert_eq!(s.stop_reason, Some(StopReason::AlignedTolerance));
    }

    #[test]
    fn experiment_mode_requires_signal() {
        let e = sample_sphere(3, 20, 1).unwrap();
        let y = measure(&e, &ComplexVector::basis(3, 0)).unwrap();
        let err = solve(&e, &y, ComplexVector::basis(3, 1), &SolverConfig::default(), None);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn residual_stop_reports_tolerance() {
        let e = sample_sphere(4, 80, 11).unwrap();
        let mut rng = rng::stream(12);
        let z = ComplexVector::random_unit(4, &mut rng);
        let y = measure(&e, &z).unwrap();
        let mut x0 = z.clone();
        x0.axpy(Complex64::new(0.1, 0.0), &ComplexVector::random_unit(4, &mut rng)).unwrap();
        let cfg = SolverConfig { stop: StopRule::Residual(1e-20), max_iters: 20_000, ..Default::default() };
        let s = solve(&e, &y, x0, &cfg, None).unwrap();
        assert_eq!(s.stop_reason, Some(StopReason::ResidualTolerance));
        assert!(s.last().unwrap().residual <= 1e-20);
        assert!(s.history.windows(2).all(|w| w[0].k < w[1].k));
    }

    #[test]
    fn inverse_norm_rule_accepts_non_unit_rows() {
        let mut rng = rng::stream(13);
        let rows: Vec<ComplexVector> =
            (0..30).map(|_| ComplexVector::random_normal(3, &mut rng)).collect();
        let e = SensingEnsemble::from_vectors(&rows, 0).unwrap();
        let z = ComplexVector::random_unit(3, &mut rng);
        let y = measure(&e, &z).unwrap();
        let cfg = SolverConfig { row_rule: RowRule::InverseNormWeighted, max_iters: 200, ..Default::default() };
        let mut state = SolverState::new(ComplexVector::random_unit(3, &mut rng), 4);
        let k = Kaczmarz::new(&e, &y, cfg).unwrap();
        for _ in 0..20 {
            let r = k.step(&mut state).unwrap();
            let got = inner(&e.vector(r), &state.x).unwrap().norm();
            assert!((got - y.values()[r]).abs() <= 1e-10 * y.values()[r].max(1.0));
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig { max_iters: 0, ..Default::default() },
            SolverConfig { zero_threshold: 0.0, ..Default::default() },
            SolverConfig { stop: StopRule::Residual(-1.0), ..Default::default() },
            SolverConfig { history_stride: Some(0), ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn contraction_identity_small() {
        let e = sample_sphere(8, 64, 14).unwrap();
        let mut rng = rng::stream(15);
        let z = ComplexVector::random_unit(8, &mut rng);
        let y = measure(&e, &z).unwrap();
        let x = ComplexVector::random_unit(8, &mut rng);
        let lhs = mean_projected_sq_distance(&e, &y, &x, &z, 1e-14).unwrap();
        let v = &z - &x;
        let rhs = objective_f(&e, &y, &x).unwrap() + dir_deriv_f(&e, &y, &x, &v).unwrap() + v.norm_sqr();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn step_satisfies_selected_constraint(seed in any::<u64>()) {
            let mut rng = rng::stream(seed);
            let e = sample_sphere(4, 16, seed).unwrap();
            let z = ComplexVector::random_unit(4, &mut rng);
            let y = measure(&e, &z).unwrap();
            let k = Kaczmarz::new(&e, &y, SolverConfig::default()).unwrap();
            let mut state = SolverState::new(ComplexVector::random_normal(4, &mut rng), seed);
            let r = k.step(&mut state).unwrap();
            let got = inner(&e.vector(r), &state.x).unwrap().norm();
            prop_assert!((got - y.values()[r]).abs() <= 1e-10 * y.values()[r].max(1e-3));
        }
    }
}
