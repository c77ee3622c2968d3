//! Level iterations and the multi-level drivers.
//!
//! Level `N` sees the data `y_N = s_N · raw` with `raw_j = √w_j x^δ(t_j)`;
//! `δ` and the tail norms enter the rules multiplied by `s_N` as well.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::cgne::CgneState;
use super::landweber::LandweberState;
use super::stopping::{tail_update, Carry, Method, StopConfig, StopFlavor};
use crate::error::{Error, Result};
use crate::operators::{CoefSeq, MomentOperator};
use crate::sampling::{BoundSource, SamplingSet};
use crate::scalar::Real;
use crate::spaces::{GridSignal, GridSpace, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LevelDiscrepancy,
    GlobalDiscrepancy,
    IterCap,
    /// `T* r = 0`: the normal equations are solved and CG cannot move.
    NormalEquations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GlobalDiscrepancy,
    LevelCap,
    InitialAccept,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelTrace {
    pub level: usize,
    pub iterations: usize,
    /// Scaled residual norms of `x_0 .. x_final`.
    pub residuals: Vec<f64>,
    /// `‖x_{k+1} - x_k‖` per step.
    pub increments: Vec<f64>,
    /// `ε_N` used in the level rule, raw units.
    pub tail_estimate: f64,
    /// `Σ w_j |y_j|² - ‖x_final‖²`, the recursive estimate of `‖x* - P_N x*‖²`.
    pub tail_energy_estimate: Option<f64>,
    pub scale: f64,
    pub bound_source: BoundSource,
    pub stop: StopReason,
    pub elapsed_secs: f64,
}

/// Passed to observers before every step and once at the end of a level.
pub struct IterateInfo<'a, T: Real> {
    pub level: usize,
    pub k: usize,
    pub x: &'a Spectrum<T>,
    /// Scaled residual norm of `x`.
    pub residual: T,
    pub scale: T,
    /// `ε_N` in raw units.
    pub eps: T,
}

pub struct LevelRun<T: Real> {
    /// The iterate on which the level stopped.
    pub x: Spectrum<T>,
    /// The iterate before it; equal to `x` after zero iterations.
    pub previous: Spectrum<T>,
    pub trace: LevelTrace,
}

enum Iter<T: Real> {
    Cg(CgneState<T>),
    Lw(LandweberState<T>),
}

impl<T: Real> Iter<T> {
    fn new(method: Method, op: &MomentOperator<T>, y: &CoefSeq<T>, x: &Spectrum<T>) -> Result<Self> {
        Ok(match method {
            Method::Cg => Iter::Cg(CgneState::with_initial(op, y, x)?),
            Method::Lw => Iter::Lw(LandweberState::with_initial(op, y, x)?),
        })
    }

    fn x(&self) -> &Spectrum<T> {
        match self {
            Iter::Cg(s) => &s.x,
            Iter::Lw(s) => &s.x,
        }
    }

    fn residual(&self) -> T {
        match self {
            Iter::Cg(s) => s.residual_norm(),
            Iter::Lw(s) => s.residual_norm(),
        }
    }

    fn step(&mut self, op: &MomentOperator<T>, y: &CoefSeq<T>) -> Result<()> {
        match self {
            Iter::Cg(s) => s.step(op),
            Iter::Lw(s) => s.step(op, y),
        }
    }
}

fn diff_norm<T: Real>(a: &Spectrum<T>, b: &Spectrum<T>) -> T {
    a.coeffs().iter().zip(b.coeffs()).map(|(p, q)| (p - q).norm_sqr()).fold(T::zero(), |s, v| s + v).sqrt()
}

/// Runs one level from `x_init` with tail norm `eps` (raw units).
pub fn run_level<T: Real>(
    method: Method,
    op: &MomentOperator<T>,
    y: &CoefSeq<T>,
    x_init: &Spectrum<T>,
    cfg: &StopConfig<T>,
    eps: T,
) -> Result<LevelRun<T>> {
    run_level_with(method, op, y, x_init, cfg, eps, 0, &mut |_| {})
}

/// As [`run_level`], performing at least `min_iters` steps before any rule
/// is consulted and reporting every iterate to `observer`.
#[allow(clippy::too_many_arguments)]
pub fn run_level_with<T: Real>(
    method: Method,
    op: &MomentOperator<T>,
    y: &CoefSeq<T>,
    x_init: &Spectrum<T>,
    cfg: &StopConfig<T>,
    eps: T,
    min_iters: usize,
    observer: &mut dyn FnMut(&IterateInfo<'_, T>),
) -> Result<LevelRun<T>> {
    if y.len() != op.sampling().len() {
        return Err(Error::SizeMismatch { expected: op.sampling().len(), got: y.len() });
    }
    let started = Instant::now();
    let level = op.level();
    let scale = op.scale();
    let rules = cfg.discrepancy(scale);
    let eps_scaled = eps * scale;
    let y_norm = y.norm();
    let cap = cfg.max_iters_at(level);

    let mut it = Iter::new(method, op, y, x_init)?;
    let mut previous = it.x().clone();
    let mut residuals = vec![it.residual().as_f64()];
    let mut increments = Vec::new();
    let mut last_increment: Option<T> = None;

    let stop = loop {
        let k = residuals.len() - 1;
        let residual = it.residual();
        observer(&IterateInfo { level, k, x: it.x(), residual, scale, eps });
        if k >= min_iters {
            if rules.global(residual, y_norm) {
                break StopReason::GlobalDiscrepancy;
            }
            let level_done = match cfg.flavor {
                StopFlavor::LwIncrement => last_increment.is_some_and(|d| rules.increment(d)),
                _ => rules.level(residual, y_norm, eps_scaled),
            };
            if level_done {
                break StopReason::LevelDiscrepancy;
            }
        }
        if k >= cap {
            log::warn!("level {level}: iteration cap {cap} reached (residual {residual})");
            break StopReason::IterCap;
        }
        let before = it.x().clone();
        match it.step(op, y) {
            Ok(()) => {}
            Err(Error::NormalEquationsSolved | Error::ZeroDirection) => break StopReason::NormalEquations,
            Err(e) => return Err(e),
        }
        let inc = diff_norm(it.x(), &before);
        increments.push(inc.as_f64());
        last_increment = Some(inc);
        residuals.push(it.residual().as_f64());
        previous = before;
    };

    let trace = LevelTrace {
        level,
        iterations: residuals.len() - 1,
        residuals,
        increments,
        tail_estimate: eps.as_f64(),
        tail_energy_estimate: None,
        scale: scale.as_f64(),
        bound_source: op.scaling_bound().1,
        stop,
        elapsed_secs: started.elapsed().as_secs_f64(),
    };
    let x = match it {
        Iter::Cg(s) => s.x,
        Iter::Lw(s) => s.x,
    };
    Ok(LevelRun { x, previous, trace })
}

#[derive(Clone, Debug)]
pub struct MultiLevelResult<T: Real> {
    pub spectrum: Spectrum<T>,
    pub x: GridSignal<T>,
    pub final_level: usize,
    pub start_level: usize,
    /// Total number of steps over all levels.
    pub total_iterations: usize,
    pub traces: Vec<LevelTrace>,
    pub termination: Termination,
}

/// Serializable summary of a multi-level run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTrace<'a> {
    pub termination: Termination,
    pub final_level: usize,
    pub start_level: usize,
    pub total_iterations: usize,
    pub levels: &'a [LevelTrace],
}

impl<T: Real> MultiLevelResult<T> {
    pub fn trace(&self) -> RunTrace<'_> {
        RunTrace {
            termination: self.termination,
            final_level: self.final_level,
            start_level: self.start_level,
            total_iterations: self.total_iterations,
            levels: &self.traces,
        }
    }

    pub fn trace_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.trace())?)
    }
}

/// Multi-level CGNE (`Method::Cg`) or Landweber (`Method::Lw`) on the raw
/// measurements `raw_j = √w_j x^δ(t_j)`.
pub fn run_multilevel<T: Real>(
    method: Method,
    raw: &CoefSeq<T>,
    sampling: Arc<SamplingSet<T>>,
    grid_len: usize,
    cfg: &StopConfig<T>,
) -> Result<MultiLevelResult<T>> {
    run_multilevel_with(method, raw, sampling, grid_len, cfg, &mut |_| {})
}

pub fn run_multilevel_with<T: Real>(
    method: Method,
    raw: &CoefSeq<T>,
    sampling: Arc<SamplingSet<T>>,
    grid_len: usize,
    cfg: &StopConfig<T>,
    observer: &mut dyn FnMut(&IterateInfo<'_, T>),
) -> Result<MultiLevelResult<T>> {
    cfg.validate()?;
    if raw.len() != sampling.len() {
        return Err(Error::SizeMismatch { expected: sampling.len(), got: raw.len() });
    }
    let space = GridSpace::<T>::new(grid_len)?;
    let frame_cap = (sampling.len() - 1) / 2;
    let max_level = cfg.max_level.unwrap_or(frame_cap).min(space.max_level());
    let raw_energy = raw.norm_sqr();
    let make = |level: usize| MomentOperator::new(level, sampling.clone(), grid_len, cfg.bound_source);

    let tail_at = |level: usize, carried_norm_sqr: Option<T>| -> T {
        match cfg.tails.fixed(level) {
            Some(e) => e,
            None => tail_update(raw_energy, carried_norm_sqr.unwrap_or_else(T::zero)).sqrt(),
        }
    };

    let finish = |spectrum: Spectrum<T>, final_level, start_level, traces: Vec<LevelTrace>, termination| {
        let x = space.synthesize(&spectrum)?;
        let total_iterations = traces.iter().map(|t: &LevelTrace| t.iterations).sum();
        Ok(MultiLevelResult { spectrum, x, final_level, start_level, total_iterations, traces, termination })
    };

    // At x = 0 the residual is the data itself.
    let mut op = make(0)?;
    let y0 = raw.scaled(op.scale());
    let rules0 = cfg.discrepancy(op.scale());
    if rules0.global(y0.norm(), y0.norm()) {
        return finish(Spectrum::zeros(0), 0, 0, Vec::new(), Termination::InitialAccept);
    }

    let mut start = 0;
    if !cfg.tails.is_recursive() {
        // Renumbering: first level whose rule is violated at x = 0.
        let violated = |op: &MomentOperator<T>, level: usize| {
            let y_norm = raw.norm() * op.scale();
            !cfg.discrepancy(op.scale()).level(y_norm, y_norm, tail_at(level, None) * op.scale())
        };
        while start < max_level && !violated(&op, start) {
            start += 1;
            op = make(start)?;
        }
        if start > 0 {
            log::info!("starting at level {start}");
        }
    }

    let mut x = Spectrum::zeros(start);
    let mut eps = tail_at(start, None);
    let mut traces = Vec::new();
    let mut level = start;
    loop {
        let y = raw.scaled(op.scale());
        let run = run_level_with(method, &op, &y, &x, cfg, eps, 1, observer)?;
        let mut trace = run.trace;
        let terminal_norm_sqr = run.x.norm_sqr();
        trace.tail_energy_estimate = Some(tail_update(raw_energy, terminal_norm_sqr).as_f64());
        log::debug!(
            "level {level}: {} iterations, stop {:?}, eps {}",
            trace.iterations,
            trace.stop,
            trace.tail_estimate
        );
        let stop = trace.stop;
        traces.push(trace);

        if stop == StopReason::GlobalDiscrepancy {
            return finish(run.x, level, start, traces, Termination::GlobalDiscrepancy);
        }
        if level >= max_level {
            return finish(run.x, level, start, traces, Termination::LevelCap);
        }

        let next = make(level + 1)?;
        let y_next = raw.scaled(next.scale());
        let r_next = y_next.sub(&next.analyze_spectrum(&run.x.resized(level + 1))?).norm();
        if cfg.discrepancy(next.scale()).global(r_next, y_next.norm()) {
            return finish(run.x, level, start, traces, Termination::GlobalDiscrepancy);
        }

        x = match cfg.carry {
            Carry::Terminal => run.x,
            Carry::LastViolating => run.previous,
        };
        level += 1;
        eps = tail_at(level, Some(x.norm_sqr()));
        op = next;
    }
}

/// Single-level stopping for the fixed-level baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FixedStop<T> {
    /// `‖r‖ <= ρ‖y‖`.
    Relative(T),
    /// `‖r‖ <= τ s_N δ` with raw `δ`.
    Discrepancy { tau: T, delta: T },
}

/// Plain CGNE or Landweber at one level, starting from zero.
pub fn run_fixed_level<T: Real>(
    method: Method,
    op: &MomentOperator<T>,
    y: &CoefSeq<T>,
    stop: FixedStop<T>,
    max_iters: usize,
) -> Result<(Spectrum<T>, LevelTrace)> {
    if y.len() != op.sampling().len() {
        return Err(Error::SizeMismatch { expected: op.sampling().len(), got: y.len() });
    }
    let started = Instant::now();
    let y_norm = y.norm();
    let threshold = match stop {
        FixedStop::Relative(rho) => rho * y_norm,
        FixedStop::Discrepancy { tau, delta } => tau * delta * op.scale(),
    };
    let mut it = Iter::new(method, op, y, &Spectrum::zeros(op.level()))?;
    let mut residuals = vec![it.residual().as_f64()];
    let mut increments = Vec::new();
    let reason = loop {
        if it.residual() <= threshold {
            break StopReason::LevelDiscrepancy;
        }
        if residuals.len() > max_iters {
            break StopReason::IterCap;
        }
        let before = it.x().clone();
        match it.step(op, y) {
            Ok(()) => {}
            Err(Error::NormalEquationsSolved | Error::ZeroDirection) => break StopReason::NormalEquations,
            Err(e) => return Err(e),
        }
        increments.push(diff_norm(it.x(), &before).as_f64());
        residuals.push(it.residual().as_f64());
    };
    let trace = LevelTrace {
        level: op.level(),
        iterations: residuals.len() - 1,
        residuals,
        increments,
        tail_estimate: 0.0,
        tail_energy_estimate: None,
        scale: op.scale().as_f64(),
        bound_source: op.scaling_bound().1,
        stop: reason,
        elapsed_secs: started.elapsed().as_secs_f64(),
    };
    let x = match it {
        Iter::Cg(s) => s.x,
        Iter::Lw(s) => s.x,
    };
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dense_least_squares, densify};
    use crate::solvers::TailSource;
    use num_complex::Complex;

    fn regular(r: usize) -> Arc<SamplingSet<f64>> {
        Arc::new(SamplingSet::new((0..r).map(|j| j as f64 / r as f64).collect()).unwrap())
    }

    fn band(m: usize) -> Spectrum<f64> {
        Spectrum::from_fn(m, |n| Complex::new(1.0 / (1.0 + n.abs() as f64), 0.3 * n as f64 / (1.0 + (n * n) as f64)))
    }

    fn raw_of(s: &SamplingSet<f64>, x: &Spectrum<f64>) -> CoefSeq<f64> {
        CoefSeq::new(s.points().iter().zip(s.weights()).map(|(&t, &w)| x.eval(t) * w.sqrt()).collect())
    }

    fn spec_err(a: &Spectrum<f64>, b: &Spectrum<f64>) -> f64 {
        let d = a.degree().max(b.degree());
        diff_norm(&a.resized(d), &b.resized(d)) / b.norm_sqr().sqrt()
    }

    #[test]
    fn satisfied_rule_means_zero_iterations() {
        let s = crate::sampling::generate_jittered_set::<f64>(20, 0.5, 3).unwrap();
        let op = MomentOperator::new(3, Arc::new(s), 64, BoundSource::Theoretical).unwrap();
        let y = CoefSeq::new(vec![Complex::new(0.1, 0.0); 20]);
        let x0 = band(2);
        let cfg = StopConfig::new(Method::Lw, 0.0);
        let run = run_level(Method::Lw, &op, &y, &x0, &cfg, 1e6).unwrap();
        assert_eq!(run.trace.iterations, 0);
        assert_eq!(run.trace.stop, StopReason::LevelDiscrepancy);
        assert_eq!(run.x, x0.resized(3));
    }

    #[test]
    fn noiseless_level_runs_to_solution() {
        let s = crate::sampling::generate_jittered_set::<f64>(25, 0.5, 11).unwrap();
        let op = MomentOperator::new(4, Arc::new(s), 64, BoundSource::Theoretical).unwrap();
        let truth = band(4);
        let y = raw_of(op.sampling(), &truth).scaled(op.scale());
        let dense = dense_least_squares(&densify(&op), &y).unwrap();
        for method in [Method::Cg, Method::Lw] {
            let mut cfg = StopConfig::new(method, 0.0);
            cfg.max_iters = Some(100_000);
            let run = run_level(method, &op, &y, &Spectrum::zeros(4), &cfg, 0.0).unwrap();
            assert!(*run.trace.residuals.last().unwrap() < 1e-10, "{method}: {:?}", run.trace.stop);
            assert!(spec_err(&run.x, &dense) < 1e-8);
        }
    }

    #[test]
    fn landweber_increment_below_residual() {
        let s = crate::sampling::generate_jittered_set::<f64>(30, 0.8, 5).unwrap();
        let op = MomentOperator::new(6, Arc::new(s), 64, BoundSource::Theoretical).unwrap();
        let y = raw_of(op.sampling(), &band(9)).scaled(op.scale());
        let cfg = StopConfig::new(Method::Lw, 0.01);
        let run = run_level(Method::Lw, &op, &y, &Spectrum::zeros(6), &cfg, 0.0).unwrap();
        for (inc, res) in run.trace.increments.iter().zip(&run.trace.residuals) {
            assert!(*inc <= res + 1e-14);
        }
    }

    #[test]
    fn constant_signal_stops_at_level_zero() {
        let s = regular(9);
        let truth = Spectrum::from_fn(0, |_| Complex::new(2.0, 0.0));
        let raw = raw_of(&s, &truth);
        for method in [Method::Cg, Method::Lw] {
            let mut cfg = StopConfig::new(method, 0.0);
            cfg.tails = TailSource::KnownTruth(vec![0.0]);
            cfg.max_iters = Some(10_000);
            let res = run_multilevel(method, &raw, s.clone(), 32, &cfg).unwrap();
            assert_eq!(res.final_level, 0);
            assert_eq!(res.termination, Termination::GlobalDiscrepancy);
            assert!(res.traces[0].residuals.last().unwrap() < &1e-12);
        }
    }

    #[test]
    fn small_noisy_fixture() {
        // x* in X_5, 40 regular samples, 1% noise.
        let s = regular(40);
        let truth = band(5);
        let clean = raw_of(&s, &truth);
        let noise = CoefSeq::new((0..40).map(|j| Complex::new(((j * 7919) % 13) as f64 - 6.0, 0.0)).collect());
        let noise = noise.scaled(0.01 * clean.norm() / noise.norm());
        let mut raw = clean.clone();
        raw.add_scaled(1.0, &noise);
        let cfg = StopConfig::new(Method::Lw, noise.norm());
        let res = run_multilevel(Method::Lw, &raw, s, 64, &cfg).unwrap();
        assert!(res.final_level <= 7, "level {}", res.final_level);
        assert!(spec_err(&res.spectrum, &truth) <= 0.1);
        assert!(res.traces.iter().all(|t| t.stop != StopReason::IterCap));
    }

    #[test]
    fn level_cap_termination() {
        let s = regular(40);
        let raw = raw_of(&s, &band(12));
        let mut cfg = StopConfig::new(Method::Cg, 1e-6);
        cfg.max_level = Some(2);
        let res = run_multilevel(Method::Cg, &raw, s, 64, &cfg).unwrap();
        assert_eq!(res.termination, Termination::LevelCap);
        assert_eq!(res.final_level, 2);
        assert_eq!(res.traces.len(), 3);
        assert!(res.traces.iter().skip(1).all(|t| t.iterations >= 1));
    }

    #[test]
    fn fixed_level_thresholds() {
        let s = crate::sampling::generate_jittered_set::<f64>(25, 0.5, 2).unwrap();
        let op = MomentOperator::new(5, Arc::new(s), 64, BoundSource::Theoretical).unwrap();
        let y = raw_of(op.sampling(), &band(5)).scaled(op.scale());
        let (x, trace) = run_fixed_level(Method::Cg, &op, &y, FixedStop::Relative(1.0), 100).unwrap();
        assert_eq!(trace.iterations, 0);
        assert_eq!(x, Spectrum::zeros(5));

        let dense = dense_least_squares(&densify(&op), &y).unwrap();
        let (x, _) = run_fixed_level(Method::Cg, &op, &y, FixedStop::Relative(1e-8), 100).unwrap();
        assert!(spec_err(&x, &dense) < 1e-6);
    }

    #[test]
    fn trace_serializes() {
        let s = regular(12);
        let raw = raw_of(&s, &band(2));
        let res = run_multilevel(Method::Lw, &raw, s, 32, &StopConfig::new(Method::Lw, 1e-3)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&res.trace_json().unwrap()).unwrap();
        assert_eq!(v["final_level"], res.final_level);
        let levels = v["levels"].as_array().unwrap();
        assert_eq!(levels.len(), res.traces.len());
        assert!(levels[0]["residuals"].is_array() && levels[0]["stop"].is_string());
    }

    #[test]
    fn zero_data_is_accepted_at_once() {
        let s = regular(10);
        let res = run_multilevel(Method::Cg, &CoefSeq::zeros(10), s, 32, &StopConfig::new(Method::Cg, 0.0)).unwrap();
        assert_eq!(res.termination, Termination::InitialAccept);
        assert_eq!(res.total_iterations, 0);
    }
}
