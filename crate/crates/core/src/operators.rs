//! The scaled sampling (moment) operator `T_N: X_N -> ℓ²` over a sampling
//! set, its adjoint, and frame-bound estimation.
//!
//! `T_N x = { s_N √w_j (P_N x)(t_j) }_j` and
//! `T_N* c = s_N Σ_j √w_j c_j K^N_{t_j}` where `K^N_t(u) = D_N(u - t)`.
//! Both are applied through the Fourier coefficients of `X_N`: point values
//! are exact trigonometric sums at the off-grid `t_j`, never grid
//! interpolation.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex;
use crate::eigen::{lanczos_extremes, Extremes};
use crate::error::{Error, Result};
use crate::sampling::{theoretical_frame_bounds, BoundSource, FrameBounds, SamplingSet};
use crate::scalar::Real;
use crate::spaces::{unit_phase, GridSignal, GridSpace, Spectrum};


/// One complex entry per sampling point.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefSeq<T> {
    values: Vec<Complex<T>>,
}

impl<T: Real> CoefSeq<T> {
    pub fn new(values: Vec<Complex<T>>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![Complex::new(T::zero(), T::zero()); len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    /// `Σ a_j conj(b_j)`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.len(), other.len(), "sequence length mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b.conj())
    }

    pub fn norm_sqr(&self) -> T {
        self.values.iter().map(|v| v.norm_sqr()).fold(T::zero(), |a, b| a + b)
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "sequence length mismatch");
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: T, other: &Self) {
        assert_eq!(self.len(), other.len(), "sequence length mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * factor;
        }
    }
}

/// Writes `j,t,re,im` rows (one per sampling point) with a header.
pub fn write_measurements<T: Real, W: Write>(
    sampling: &SamplingSet<T>,
    values: &[Complex<T>],
    mut out: W,
) -> Result<()> {
    if values.len() != sampling.len() {
        return Err(Error::SizeMismatch { expected: sampling.len(), got: values.len() });
    }
    writeln!(out, "j,t,re,im")?;
    for (j, (t, v)) in sampling.points().iter().zip(values).enumerate() {
        writeln!(out, "{},{},{},{}", j, t, v.re, v.im)?;
    }
    Ok(())
}

/// Reads `j,t,re,im` rows; rows are sorted by `t` before building the set.
pub fn read_measurements<T: Real, R: BufRead>(input: R) -> Result<(SamplingSet<T>, Vec<Complex<T>>)> {
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('j') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse { line: i + 1, msg: format!("expected 4 columns, got {}", fields.len()) });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|e| Error::Parse { line: i + 1, msg: format!("{s:?}: {e}") })
        };
        rows.push((parse(fields[1])?, parse(fields[2])?, parse(fields[3])?));
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let set = SamplingSet::new(rows.iter().map(|r| T::lit(r.0)).collect())?;
    let values = rows.iter().map(|r| Complex::new(T::lit(r.1), T::lit(r.2))).collect();
    Ok((set, values))
}

/// Scaled analysis operator of one level.
#[derive(Clone, Debug)]
pub struct MomentOperator<T: Real> {
    level: usize,
    sampling: Arc<SamplingSet<T>>,
    space: GridSpace<T>,
    scale: T,
    scaling_bound: T,
    bound_source: BoundSource,
    sqrt_weights: Vec<T>,
    /// Row-major `r × (2N+1)` table of `e^{2πi n t_j}`.
    phases: Vec<Complex<T>>,
}

impl<T: Real> MomentOperator<T> {
    /// Builds `T_N` scaled by `1/√B`.
    ///
    /// With `BoundSource::Theoretical`, `B` is the adaptive-weights upper
    /// bound when `(2N+1)γ < 1`; otherwise (or with `Empirical`) `B` is a
    /// power-iteration estimate of the largest eigenvalue of the unscaled
    /// frame operator, padded by its residual so that `||T_N|| <= 1`.
    pub fn new(level: usize, sampling: Arc<SamplingSet<T>>, grid_len: usize, source: BoundSource) -> Result<Self> {
        let space = GridSpace::new(grid_len)?;
        space.check_level(level)?;
        let d = level as isize;
        let mut phases = Vec::with_capacity(sampling.len() * (2 * level + 1));
        for &t in sampling.points() {
            phases.extend((-d..=d).map(|n| unit_phase(n, t)));
        }
        let sqrt_weights = sampling.weights().iter().map(|w| w.sqrt()).collect();
        let mut op = Self {
            level,
            sampling,
            space,
            scale: T::one(),
            scaling_bound: T::one(),
            bound_source: source,
            sqrt_weights,
            phases,
        };

        let theoretical = match source {
            BoundSource::Theoretical => theoretical_frame_bounds(&op.sampling, level).ok(),
            BoundSource::Empirical => None,
        };
        let (bound, used) = match theoretical {
            Some(b) => (b.upper, BoundSource::Theoretical),
            None => {
                let e = op.frame_extremes()?;
                (e.max + e.max_resid, BoundSource::Empirical)
            }
        };
        op.scaling_bound = bound;
        op.bound_source = used;
        op.scale = T::one() / bound.sqrt();
        Ok(op)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn sampling(&self) -> &Arc<SamplingSet<T>> {
        &self.sampling
    }

    pub fn space(&self) -> &GridSpace<T> {
        &self.space
    }

    pub fn grid_len(&self) -> usize {
        self.space.len()
    }

    /// `s_N = 1/√B`.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// The `B` behind the scale and where it came from.
    pub fn scaling_bound(&self) -> (T, BoundSource) {
        (self.scaling_bound, self.bound_source)
    }

    pub fn sqrt_weights(&self) -> &[T] {
        &self.sqrt_weights
    }

    fn dim(&self) -> usize {
        2 * self.level + 1
    }

    fn check_coefs(&self, c: &CoefSeq<T>) -> Result<()> {
        if c.len() != self.sampling.len() {
            return Err(Error::SizeMismatch { expected: self.sampling.len(), got: c.len() });
        }
        Ok(())
    }

    /// Unscaled: `√w_j Σ_n a_n e^{2πint_j}`.
    fn sample_coeffs(&self, a: &[Complex<T>]) -> Vec<Complex<T>> {
        let d = self.dim();
        self.phases
            .chunks_exact(d)
            .zip(&self.sqrt_weights)
            .map(|(row, &sw)| {
                row.iter().zip(a).fold(Complex::new(T::zero(), T::zero()), |acc, (p, a)| acc + p * a) * sw
            })
            .collect()
    }

    /// Unscaled adjoint of [`Self::sample_coeffs`]: `a_n = Σ_j √w_j c_j e^{-2πint_j}`.
    fn gather_coeffs(&self, c: &[Complex<T>]) -> Vec<Complex<T>> {
        let d = self.dim();
        let mut out = vec![Complex::new(T::zero(), T::zero()); d];
        for ((row, &sw), cj) in self.phases.chunks_exact(d).zip(&self.sqrt_weights).zip(c) {
            let weighted = cj * sw;
            for (o, p) in out.iter_mut().zip(row) {
                *o += p.conj() * weighted;
            }
        }
        out
    }

    /// Unscaled frame operator on coefficient vectors of `X_N`.
    fn frame_coeffs(&self, a: &[Complex<T>]) -> Vec<Complex<T>> {
        self.gather_coeffs(&self.sample_coeffs(a))
    }

    pub fn analyze_spectrum(&self, s: &Spectrum<T>) -> Result<CoefSeq<T>> {
        if s.degree() != self.level {
            return Err(Error::SizeMismatch { expected: self.dim(), got: s.coeffs().len() });
        }
        let mut out = self.sample_coeffs(s.coeffs());
        out.iter_mut().for_each(|v| *v *= self.scale);
        Ok(CoefSeq::new(out))
    }

    /// `T_N x`; only `P_N x` contributes.
    pub fn analyze(&self, x: &GridSignal<T>) -> Result<CoefSeq<T>> {
        if x.len() != self.grid_len() {
            return Err(Error::SizeMismatch { expected: self.grid_len(), got: x.len() });
        }
        self.analyze_spectrum(&self.space.spectrum(x, self.level)?)
    }

    pub fn adjoint_spectrum(&self, c: &CoefSeq<T>) -> Result<Spectrum<T>> {
        self.check_coefs(c)?;
        let mut a = self.gather_coeffs(c.values());
        a.iter_mut().for_each(|v| *v *= self.scale);
        Spectrum::new(self.level, a)
    }

    /// `T_N* c`, a grid signal in `X_N`.
    pub fn adjoint(&self, c: &CoefSeq<T>) -> Result<GridSignal<T>> {
        self.space.synthesize(&self.adjoint_spectrum(c)?)
    }

    /// `S_N x = T_N* T_N x`.
    pub fn frame_apply(&self, x: &GridSignal<T>) -> Result<GridSignal<T>> {
        self.adjoint(&self.analyze(x)?)
    }

    /// Frame bounds of the unscaled family `{√w_j K^N_{t_j}}` from the
    /// extreme eigenvalues of the frame operator on `X_N`.
    pub fn empirical_frame_bounds(&self) -> Result<FrameBounds<T>> {
        let e = self.frame_extremes()?;
        if e.min <= e.max * T::lit(1e-12) {
            return Err(Error::SingularFrame { level: self.level, lower: e.min.as_f64() });
        }
        Ok(FrameBounds { lower: e.min, upper: e.max, source: BoundSource::Empirical })
    }

    /// Extreme eigenvalues of the unscaled frame operator on `X_N`. The total
    /// weight sets the scale of the residual tolerance.
    pub fn frame_extremes(&self) -> Result<Extremes<T>> {
        let total_weight = self.sampling.weights().iter().fold(T::zero(), |a, b| a + *b);
        lanczos_extremes(|v| self.frame_coeffs(v), self.dim(), total_weight, self.level as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::generate_jittered_set;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use crate::spaces::{dirichlet_kernel, eval_at, project, synthesize};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn regular(r: usize) -> Arc<SamplingSet<f64>> {
        Arc::new(SamplingSet::new((0..r).map(|j| j as f64 / r as f64).collect()).unwrap())
    }

    fn random_signal(len: usize, seed: u64) -> GridSignal<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridSignal::new((0..len).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .unwrap()
    }

    fn random_coefs(len: usize, seed: u64) -> CoefSeq<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CoefSeq::new((0..len).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
    }

    #[test]
    fn scale_from_theoretical_bound() {
        // γ = 0.1, N = 2: density 0.5, B = 2.25
        let op = MomentOperator::new(2, regular(10), 32, BoundSource::Theoretical).unwrap();
        assert_abs_diff_eq!(op.scale(), 1.0 / 1.5, epsilon = 1e-12);
        assert_eq!(op.scaling_bound().1, BoundSource::Theoretical);

        let dense = MomentOperator::new(2, regular(4096), 64, BoundSource::Theoretical).unwrap();
        assert!((dense.scale() - 1.0).abs() < 2e-3);
    }

    #[test]
    fn falls_back_to_empirical_beyond_nyquist() {
        let op = MomentOperator::new(6, regular(13), 32, BoundSource::Theoretical).unwrap();
        assert_eq!(op.scaling_bound().1, BoundSource::Empirical);
        // tight frame with r = 2N+1: B = 1
        assert!((op.scale() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn level_too_large() {
        assert!(matches!(
            MomentOperator::new(16, regular(40), 32, BoundSource::Theoretical),
            Err(Error::LevelTooLarge { .. })
        ));
    }

    #[test]
    fn analyze_examples() {
        let s = Arc::new(generate_jittered_set::<f64>(25, 0.5, 4).unwrap());
        let op = MomentOperator::new(5, s.clone(), 64, BoundSource::Theoretical).unwrap();
        let zero = op.analyze(&GridSignal::zeros(64)).unwrap();
        assert!(zero.norm() == 0.0);

        let x = random_signal(64, 1);
        let px = project(&x, 5).unwrap();
        let a = op.analyze(&x).unwrap();
        let b = op.analyze(&px).unwrap();
        assert!(a.sub(&b).norm() < 1e-13);

        for (j, (&t, &w)) in s.points().iter().zip(s.weights()).enumerate() {
            let want = eval_at(&x, 5, t).unwrap() * (op.scale() * w.sqrt());
            assert!((a.values()[j] - want).norm() < 1e-13);
        }
        assert!(matches!(op.analyze(&GridSignal::zeros(32)), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn adjoint_examples() {
        let s = Arc::new(generate_jittered_set::<f64>(20, 0.7, 9).unwrap());
        let op = MomentOperator::new(4, s.clone(), 48, BoundSource::Theoretical).unwrap();
        assert!(op.adjoint(&CoefSeq::zeros(20)).unwrap().norm() == 0.0);

        let j = 7;
        let mut e = CoefSeq::zeros(20);
        e.values[j] = c(1.0, 0.0);
        let got = op.adjoint(&e).unwrap();
        let tj = s.points()[j];
        let factor = op.scale() * s.weights()[j].sqrt();
        for l in 0..48 {
            let u = l as f64 / 48.0;
            let want = dirichlet_kernel(4, u - tj) * factor;
            assert!((got.values()[l] - c(want, 0.0)).norm() < 1e-12);
        }
        assert!(matches!(op.adjoint(&CoefSeq::zeros(3)), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn adjointness_and_range() {
        for seed in 0..10u64 {
            let r = 10 + seed as usize * 3;
            let s = Arc::new(generate_jittered_set::<f64>(r, 0.8, seed).unwrap());
            let level = (seed as usize % 5) + 1;
            let op = MomentOperator::new(level, s, 40, BoundSource::Theoretical).unwrap();
            let x = random_signal(40, seed + 50);
            let cs = random_coefs(r, seed + 70);
            let lhs = op.analyze(&x).unwrap().inner(&cs);
            let rhs = x.inner(&op.adjoint(&cs).unwrap());
            assert!((lhs - rhs).norm() <= 1e-10 * x.norm() * cs.norm());

            let ad = op.adjoint(&cs).unwrap();
            assert!(project(&ad, level).unwrap().sub(&ad).norm() < 1e-12);
        }
    }

    #[test]
    fn frame_apply_properties() {
        let dense = regular(64);
        let op = MomentOperator::new(3, dense, 32, BoundSource::Theoretical).unwrap();
        let x = synthesize(&Spectrum::from_fn(3, |n| c(n as f64, 1.0)), 32).unwrap();
        let sx = op.frame_apply(&x).unwrap();
        let want = x.scaled(op.scale() * op.scale());
        assert!(sx.sub(&want).norm() < 1e-12);

        let s = Arc::new(generate_jittered_set::<f64>(30, 0.9, 2).unwrap());
        let op = MomentOperator::new(6, s, 32, BoundSource::Theoretical).unwrap();
        for seed in 0..5 {
            let x = random_signal(32, seed);
            let y = random_signal(32, seed + 10);
            assert!(op.frame_apply(&x).unwrap().inner(&x).re >= 0.0);
            let a = op.frame_apply(&x).unwrap().inner(&y);
            let b = x.inner(&op.frame_apply(&y).unwrap());
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn empirical_bounds_tight_for_regular() {
        let op = MomentOperator::new(2, regular(5), 64, BoundSource::Empirical).unwrap();
        let b = op.empirical_frame_bounds().unwrap();
        assert_abs_diff_eq!(b.lower, b.upper, epsilon = 1e-6);
        assert_abs_diff_eq!(b.upper, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn theoretical_bracket_empirical() {
        for seed in 0..10 {
            let s = Arc::new(generate_jittered_set::<f64>(30, 0.9, seed).unwrap());
            let level = crate::sampling::nyquist_level(&s).min(8);
            let op = MomentOperator::new(level, s.clone(), 64, BoundSource::Theoretical).unwrap();
            let emp = op.empirical_frame_bounds().unwrap();
            let theo = theoretical_frame_bounds(&s, level).unwrap();
            assert!(theo.lower <= emp.lower + 1e-8, "{theo:?} {emp:?}");
            assert!(emp.upper <= theo.upper + 1e-8, "{theo:?} {emp:?}");
            assert!(emp.lower <= emp.upper);
        }
    }

    #[test]
    fn scaled_norm_at_most_one() {
        for seed in 0..10u64 {
            let s = Arc::new(generate_jittered_set::<f64>(17, 0.95, seed).unwrap());
            for level in [1, 4, 8] {
                for source in [BoundSource::Theoretical, BoundSource::Empirical] {
                    let op = MomentOperator::new(level, s.clone(), 64, source).unwrap();
                    let b = op.empirical_frame_bounds().unwrap();
                    let norm_sq = b.upper * op.scale() * op.scale();
                    assert!(norm_sq <= 1.0 + 1e-8, "level {level} {source:?}: {norm_sq}");
                }
            }
        }
    }

    #[test]
    fn measurement_csv_round_trip() {
        let s = generate_jittered_set::<f64>(6, 0.4, 1).unwrap();
        let vals: Vec<_> = (0..6).map(|j| c(j as f64, -(j as f64))).collect();
        let mut buf = Vec::new();
        write_measurements(&s, &vals, &mut buf).unwrap();
        let (s2, v2) = read_measurements::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(s2, s);
        assert_eq!(v2, vals);
        assert!(write_measurements(&s, &vals[..3], Vec::new()).is_err());
    }

    #[test]
    fn f32_operator() {
        let s = Arc::new(generate_jittered_set::<f32>(21, 0.5, 3).unwrap());
        let op = MomentOperator::<f32>::new(4, s, 32, BoundSource::Theoretical).unwrap();
        let x = GridSignal::<f32>::from_fn(32, |t| Complex::new((std::f32::consts::TAU * t).cos(), 0.0));
        let cs = op.analyze(&x).unwrap();
        let lhs = cs.inner(&cs);
        let rhs = x.inner(&op.adjoint(&cs).unwrap());
        assert!((lhs - rhs).norm() < 1e-4);
    }
}
