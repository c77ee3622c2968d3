//! Small oracle-backed self-check: random configurations compared against
//! the dense operator and dense least squares.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::operators::{CoefSeq, MomentOperator};
use crate::oracle::{dense_frame_bounds, dense_least_squares, densify};
use crate::sampling::{generate_jittered_set, theoretical_frame_bounds, BoundSource, SamplingSet};
use crate::solvers::{run_fixed_level, run_multilevel, FixedStop, Method, StopConfig, TailSource};
use crate::spaces::{project, GridSignal, Spectrum};

type C64 = Complex<f64>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<28} worst {:.3e} (tol {:.0e}, {} cases)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.cases
        )
    }
}

fn check(name: &'static str, worst: f64, tolerance: f64, cases: usize) -> Check {
    Check { name, passed: worst <= tolerance, worst, tolerance, cases }
}

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn spec_dist(a: &Spectrum<f64>, b: &Spectrum<f64>) -> f64 {
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Runs every check on `cases` random configurations drawn from `seed`.
pub fn run_checks(cases: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut adj, mut dense, mut range, mut norm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut bracket, mut bounds, mut cg, mut lw) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut admissible = 0;
    for case in 0..cases {
        let len = 64;
        let level = rng.random_range(0..=6usize);
        let r = rng.random_range(4..=30);
        let s = Arc::new(generate_jittered_set::<f64>(r, rng.random_range(0.0..0.9), seed ^ case as u64)?);
        let op = MomentOperator::new(level, s.clone(), len, BoundSource::Theoretical)?;
        let d = densify(&op);

        let x = GridSignal::new((0..len).map(|_| random_c(&mut rng)).collect())?;
        let c = CoefSeq::new((0..r).map(|_| random_c(&mut rng)).collect());
        let tx = op.analyze(&x)?;
        adj = adj.max((tx.inner(&c) - x.inner(&op.adjoint(&c)?)).norm() / (x.norm() * c.norm()));
        dense = dense.max(d.apply(&op.space().spectrum(&x, level)?)?.sub(&tx).norm() / x.norm());
        let a = op.adjoint(&c)?;
        range = range.max(project(&a, level)?.sub(&a).norm() / a.norm().max(1.0));
        norm = norm.max(d.normal_matrix().symmetric_eigen().eigenvalues.max() - 1.0);

        if !s.is_admissible(level) {
            continue;
        }
        admissible += 1;
        let exact = dense_frame_bounds(&d);
        let theo = theoretical_frame_bounds(&s, level)?;
        bracket = bracket.max(theo.lower - exact.lower).max(exact.upper - theo.upper);
        let est = op.empirical_frame_bounds()?;
        bounds = bounds.max((est.lower - exact.lower).abs()).max((est.upper - exact.upper).abs());

        let truth = Spectrum::from_fn(level, |_| random_c(&mut rng));
        let y = d.apply(&truth)?;
        let ls = dense_least_squares(&d, &y)?;
        let (x_cg, _) = run_fixed_level(Method::Cg, &op, &y, FixedStop::Relative(0.0), 2 * level + 1)?;
        cg = cg.max(spec_dist(&x_cg, &ls));
        let (x_lw, _) = run_fixed_level(Method::Lw, &op, &y, FixedStop::Relative(1e-11), 10_000)?;
        lw = lw.max(spec_dist(&x_lw, &ls));
    }

    let mut recovery = 0.0f64;
    let s = Arc::new(SamplingSet::new((0..24).map(|j| j as f64 / 24.0).collect())?);
    let truth = Spectrum::from_fn(4, |n| C64::new(1.0 / (1.0 + n.abs() as f64), 0.0));
    let raw = CoefSeq::new(s.points().iter().zip(s.weights()).map(|(&t, &w)| truth.eval(t) * w.sqrt()).collect());
    let tails: Vec<f64> = (0..=11).map(|n| if n >= 4 { 0.0 } else { 1.0 }).collect();
    for method in [Method::Cg, Method::Lw] {
        let mut cfg = StopConfig::new(method, 0.0);
        cfg.tails = TailSource::KnownTruth(tails.clone());
        let res = run_multilevel(method, &raw, s.clone(), 64, &cfg)?;
        recovery = recovery.max(spec_dist(&res.spectrum.resized(4), &truth) / truth.norm_sqr().sqrt());
    }

    Ok(vec![
        check("adjointness", adj, 1e-10, cases),
        check("dense matvec", dense, 1e-10, cases),
        check("range containment", range, 1e-12, cases),
        check("scaled norm above one", norm, 1e-8, cases),
        check("theoretical bracket", bracket, 1e-10, admissible),
        check("estimated frame bounds", bounds, 1e-5, admissible),
        check("cgne vs least squares", cg, 1e-6, admissible),
        check("landweber vs least squares", lw, 1e-6, admissible),
        check("noiseless recovery", recovery, 1e-6, 2),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_pass() {
        let checks = run_checks(20, 1).unwrap();
        assert_eq!(checks.len(), 9);
        for c in &checks {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn display_line() {
        let c = check("x", 2.0, 1.0, 3);
        assert!(c.to_string().starts_with("FAIL x"));
    }
}
