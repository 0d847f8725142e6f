//! Self-check suite behind the `verify` subcommand: exact identities on random instances
//! plus the Monte-Carlo lemma checks.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{cis, dot, phase_grid, ComplexVector};
use crate::par::Execution;
use crate::regularity::{dir_deriv_f, fi, objective_f, second_dir_deriv_fi, validate_lemmas, LemmaReport};
use crate::rng;
use crate::sensing::{measure, sample_block_unitary, sample_sphere, MeasurementSet};
use crate::solver::{mean_projected_sq_distance, project_magnitude, DEFAULT_ZERO_THRESHOLD};

pub const LEMMA_DIMS: [usize; 3] = [4, 16, 64];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<Check>,
    pub lemmas: Vec<LemmaReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

fn projection_check(seed: u64) -> Result<Check> {
    let mut r = rng::substream(seed, 1);
    let mut worst = 0.0f64;
    for k in 0..300 {
        let n = [2, 3, 8][k % 3];
        let x = ComplexVector::random_normal(n, &mut r);
        let a = ComplexVector::random_normal(n, &mut r);
        let y = a.norm() * ComplexVector::random_normal(1, &mut r)[0].norm();
        let p = project_magnitude(&x, &a, y, DEFAULT_ZERO_THRESHOLD)?;
        let got = (&p - &x).norm();
        let ax = dot(a.as_slice(), x.as_slice());
        let grid = phase_grid(1 << 16)
            .map(|t| (cis(t) * y - ax).norm() / a.norm())
            .fold(f64::INFINITY, f64::min);
        let feasible = (dot(a.as_slice(), p.as_slice()).norm() - y).abs();
        worst = worst.max(got - grid).max(feasible);
    }
    Ok(check("projection optimality", worst <= 1e-8, format!("worst excess {worst:.3e}")))
}

fn contraction_check(seed: u64) -> Result<Check> {
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let e = sample_sphere(8, 64, rng::derive_seed(seed, 100 + k))?;
        let mut r = rng::substream(seed, 200 + k);
        let z = ComplexVector::random_unit(8, &mut r);
        let x = ComplexVector::random_unit(8, &mut r);
        let y = measure(&e, &z)?;
        let lhs = mean_projected_sq_distance(&e, &y, &x, &z, DEFAULT_ZERO_THRESHOLD)?;
        let v = &z - &x;
        let rhs = objective_f(&e, &y, &x)? + dir_deriv_f(&e, &y, &x, &v)? + v.norm_sqr();
        worst = worst.max((lhs - rhs).abs() / lhs.abs());
    }
    Ok(check("one-step contraction identity", worst <= 1e-10, format!("worst relative gap {worst:.3e}")))
}

fn derivative_checks(seed: u64) -> Result<Vec<Check>> {
    let (mut first, mut second, mut bound_ok) = (0.0f64, 0.0f64, true);
    for k in 0..200u64 {
        let e = sample_sphere(4, 20, rng::derive_seed(seed, 300 + k))?;
        let mut r = rng::substream(seed, 400 + k);
        let z = ComplexVector::random_unit(4, &mut r);
        let x = ComplexVector::random_unit(4, &mut r);
        let v = ComplexVector::random_unit(4, &mut r);
        let y: MeasurementSet = measure(&e, &z)?;
        let t = 1e-6;
        let mut xt = x.clone();
        xt.axpy(t.into(), &v)?;
        let fd = (objective_f(&e, &y, &xt)? - objective_f(&e, &y, &x)?) / t;
        let exact = dir_deriv_f(&e, &y, &x, &v)?;
        first = first.max((fd - exact).abs() / exact.abs().max(1e-12));

        let a = e.vector((k % 20) as usize);
        let h = 1e-4;
        let at = |s: f64| -> Result<f64> {
            let mut p = x.clone();
            p.axpy(s.into(), &v)?;
            fi(&a, &z, &p)
        };
        let cd = (at(h)? - 2.0 * at(0.0)? + at(-h)?) / (h * h);
        let exact2 = second_dir_deriv_fi(&a, &z, &x, &v)?;
        second = second.max((cd - exact2).abs() / exact2.abs().max(1e-12));

        let at_z = second_dir_deriv_fi(&a, &z, &z, &v)?;
        let cap = 2.0 * dot(a.as_slice(), v.as_slice()).norm_sqr();
        bound_ok &= at_z >= -1e-12 && at_z <= cap * (1.0 + 1e-12) + 1e-15;
    }
    Ok(vec![
        check("first directional derivative", first < 1e-4, format!("worst relative error {first:.3e}")),
        check("second directional derivative", second < 1e-3, format!("worst relative error {second:.3e}")),
        check("second derivative bound at z", bound_ok, String::new()),
    ])
}

fn unitarity_check(seed: u64) -> Result<Check> {
    let e = sample_block_unitary(50, 40, rng::derive_seed(seed, 500))?;
    let d = e.max_block_unitarity_defect();
    Ok(check("block unitarity", d <= 1e-12, format!("max defect {d:.3e}")))
}

/// Runs every check. `trials` is the Monte-Carlo sample count per lemma check.
pub fn run_verification(trials: usize, seed: u64, exec: Execution) -> Result<VerifyReport> {
    let mut checks = vec![projection_check(seed)?, contraction_check(seed)?];
    checks.extend(derivative_checks(seed)?);
    checks.push(unitarity_check(seed)?);
    let mut lemmas = Vec::new();
    for (k, &n) in LEMMA_DIMS.iter().enumerate() {
        let rep = validate_lemmas(n, trials, rng::derive_seed(seed, 600 + k as u64), exec)?;
        let m = &rep.projection_mass;
        checks.push(check(
            &format!("projection mass n={n}"),
            m.passed,
            format!("fraction {:.4} vs bound {} (tol {:.4})", m.fraction, m.bound, m.tolerance),
        ));
        for w in &rep.wedge {
            checks.push(check(
                &format!("wedge probability n={n} beta={}", w.beta),
                w.passed,
                format!("fraction {:.4} vs {:.4} (tol {:.4})", w.fraction, w.target, w.tolerance),
            ));
        }
        if k == 0 {
            for x in &rep.expectation {
                checks.push(check(
                    &format!("phase expectation theta={:.4}", x.theta),
                    x.exact_passed,
                    format!(
                        "estimate {:.4} vs exact {:.4} (tol {:.4}); reference constant {:.4}",
                        x.estimate, x.exact_target, x.tolerance, x.stated_target
                    ),
                ));
            }
        }
        lemmas.push(rep);
    }
    Ok(VerifyReport { seed, trials, checks, lemmas })
}
