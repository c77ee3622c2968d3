//! Grid signals on the periodic unit interval and the nested
//! trigonometric-polynomial subspaces `X_N = span{e^{2πint} : |n| <= N}`.
//!
//! Signals live on a uniform `L`-point grid with the inner product
//! `<x, y> = (1/L) Σ x_l conj(y_l)`, under which the exponentials
//! `e^{2πint}` (`|n| < L/2`) are orthonormal. The orthogonal projector onto
//! `X_N` is therefore an exact truncation of the discrete Fourier transform.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dirichlet kernel `D_N(t) = sin((2N+1)πt) / sin(πt)`, 1-periodic, with the
/// removable singularity at integer `t` filled by `2N+1`.
pub fn dirichlet_kernel<T: Real>(degree: usize, t: T) -> T {
    let u = t - t.round();
    let order = T::from_count(2 * degree + 1);
    if u == T::zero() {
        return order;
    }
    let pi = T::PI();
    (order * pi * u).sin() / (pi * u).sin()
}

/// `e^{2πi n t}`.
pub(crate) fn unit_phase<T: Real>(n: isize, t: T) -> Complex<T> {
    // Reduce n*t modulo 1 first so large products keep full precision.
    let nt = T::from_isize(n).expect("frequency representable") * t;
    let frac = nt - nt.floor();
    Complex::from_polar(T::one(), T::TAU() * frac)
}

/// A complex-valued signal sampled at the nodes `l/L`, `l = 0..L`.
#[derive(Clone, PartialEq)]
pub struct GridSignal<T> {
    values: Vec<Complex<T>>,
}

impl<T: Real> GridSignal<T> {
    pub fn new(values: Vec<Complex<T>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { values })
    }

    pub fn from_real(values: &[T]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex::new(v, T::zero())).collect())
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "grid size must be positive");
        Self { values: vec![Complex::new(T::zero(), T::zero()); len] }
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(len: usize, mut f: impl FnMut(T) -> Complex<T>) -> Self {
        assert!(len > 0, "grid size must be positive");
        let step = T::one() / T::from_count(len);
        Self { values: (0..len).map(|l| f(T::from_count(l) * step)).collect() }
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

    pub fn node(&self, l: usize) -> T {
        T::from_count(l) / T::from_count(self.len())
    }

    /// Grid inner product `(1/L) Σ x_l conj(y_l)`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.len(), other.len(), "grid size mismatch");
        let sum = self
            .values
            .iter()
            .zip(&other.values)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b.conj());
        sum / T::from_count(self.len())
    }

    pub fn norm_sqr(&self) -> T {
        self.values.iter().map(|v| v.norm_sqr()).fold(T::zero(), |a, b| a + b)
            / T::from_count(self.len())
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "grid size mismatch");
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: T, other: &Self) {
        assert_eq!(self.len(), other.len(), "grid size mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * factor;
        }
    }

    /// Writes `index,re,im` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{}", i, v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let rows = read_triples(input, "index")?;
        let mut values = Vec::with_capacity(rows.len());
        for (line, (idx, re, im)) in rows {
            if idx != values.len() as f64 {
                return Err(Error::Parse { line, msg: format!("expected index {}", values.len()) });
            }
            values.push(Complex::new(T::lit(re), T::lit(im)));
        }
        Self::new(values)
    }
}

impl<T: Real> fmt::Debug for GridSignal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSignal").field("len", &self.len()).field("norm", &self.norm()).finish()
    }
}

/// Coefficients `a_n`, `n = -N..=N`, of a trigonometric polynomial of degree `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    degree: usize,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    /// `coeffs[k]` holds `a_{k-N}`.
    pub fn new(degree: usize, coeffs: Vec<Complex<T>>) -> Result<Self> {
        let expected = 2 * degree + 1;
        if coeffs.len() != expected {
            return Err(Error::SpectrumLength { degree, expected, got: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { degree, coeffs })
    }

    pub fn zeros(degree: usize) -> Self {
        Self { degree, coeffs: vec![Complex::new(T::zero(), T::zero()); 2 * degree + 1] }
    }

    pub fn from_fn(degree: usize, f: impl FnMut(isize) -> Complex<T>) -> Self {
        let d = degree as isize;
        Self { degree, coeffs: (-d..=d).map(f).collect() }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Zero-pads or truncates to another degree.
    pub fn resized(&self, degree: usize) -> Self {
        Self::from_fn(degree, |n| self.coeff(n))
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    /// `a_n`, zero outside `|n| <= N`.
    pub fn coeff(&self, n: isize) -> Complex<T> {
        if n.unsigned_abs() > self.degree {
            return Complex::new(T::zero(), T::zero());
        }
        self.coeffs[(n + self.degree as isize) as usize]
    }

    pub fn set_coeff(&mut self, n: isize, value: Complex<T>) {
        assert!(n.unsigned_abs() <= self.degree, "frequency {n} outside degree {}", self.degree);
        self.coeffs[(n + self.degree as isize) as usize] = value;
    }

    pub fn frequencies(&self) -> impl Iterator<Item = isize> {
        let d = self.degree as isize;
        -d..=d
    }

    /// Σ |a_n|², equal to the grid norm² of the synthesized signal.
    pub fn norm_sqr(&self) -> T {
        self.coeffs.iter().map(|c| c.norm_sqr()).fold(T::zero(), |a, b| a + b)
    }

    /// `p(t) = Σ a_n e^{2πint}` at an arbitrary real `t`.
    pub fn eval(&self, t: T) -> Complex<T> {
        self.frequencies()
            .zip(&self.coeffs)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (n, a)| acc + a * unit_phase(n, t))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,re,im")?;
        for (n, a) in self.frequencies().zip(&self.coeffs) {
            writeln!(out, "{},{},{}", n, a.re, a.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let rows = read_triples(input, "n")?;
        if rows.len() % 2 == 0 {
            return Err(Error::Parse { line: 0, msg: "spectrum needs an odd number of rows".into() });
        }
        let degree = rows.len() / 2;
        let mut coeffs = Vec::with_capacity(rows.len());
        for (k, (line, (n, re, im))) in rows.into_iter().enumerate() {
            let expected = k as f64 - degree as f64;
            if n != expected {
                return Err(Error::Parse { line, msg: format!("expected frequency {expected}") });
            }
            coeffs.push(Complex::new(T::lit(re), T::lit(im)));
        }
        Self::new(degree, coeffs)
    }
}

type Triple = (usize, (f64, f64, f64));

fn read_triples<R: BufRead>(input: R, first_col: &str) -> Result<Vec<Triple>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(first_col) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 3 columns, got {}", fields.len()) });
        }
        let mut parsed = [0.0f64; 3];
        for (slot, field) in parsed.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|e| Error::Parse { line: line_no, msg: format!("{field:?}: {e}") })?;
        }
        rows.push((line_no, (parsed[0], parsed[1], parsed[2])));
    }
    Ok(rows)
}

/// FFT context for one grid size. Cheap to clone; plans are shared.
#[derive(Clone)]
pub struct GridSpace<T: Real> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for GridSpace<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpace").field("len", &self.len).finish()
    }
}

impl<T: Real> GridSpace<T> {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyGrid);
        }
        let mut planner = FftPlanner::new();
        Ok(Self { len, forward: planner.plan_fft_forward(len), inverse: planner.plan_fft_inverse(len) })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Largest degree representable on this grid.
    pub fn max_level(&self) -> usize {
        (self.len - 1) / 2
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if 2 * level + 1 > self.len {
            return Err(Error::LevelTooLarge { level, grid: self.len });
        }
        Ok(())
    }

    fn check_len(&self, x: &GridSignal<T>) -> Result<()> {
        if x.len() != self.len {
            return Err(Error::SizeMismatch { expected: self.len, got: x.len() });
        }
        Ok(())
    }

    fn bin(&self, n: isize) -> usize {
        n.rem_euclid(self.len as isize) as usize
    }

    /// Normalized DFT: `x̂[k] = (1/L) Σ_l x_l e^{-2πikl/L}`.
    pub fn dft(&self, x: &GridSignal<T>) -> Result<Vec<Complex<T>>> {
        self.check_len(x)?;
        let mut buf = x.values().to_vec();
        self.forward.process(&mut buf);
        let inv_len = T::one() / T::from_count(self.len);
        buf.iter_mut().for_each(|v| *v *= inv_len);
        Ok(buf)
    }

    /// Inverse of [`GridSpace::dft`].
    fn idft(&self, mut bins: Vec<Complex<T>>) -> GridSignal<T> {
        self.inverse.process(&mut bins);
        GridSignal { values: bins }
    }

    /// Fourier coefficients of `x` at `|n| <= level`.
    pub fn spectrum(&self, x: &GridSignal<T>, level: usize) -> Result<Spectrum<T>> {
        self.check_level(level)?;
        let bins = self.dft(x)?;
        Ok(Spectrum::from_fn(level, |n| bins[self.bin(n)]))
    }

    pub fn synthesize(&self, s: &Spectrum<T>) -> Result<GridSignal<T>> {
        self.check_level(s.degree())?;
        let mut bins = vec![Complex::new(T::zero(), T::zero()); self.len];
        for (n, a) in s.frequencies().zip(s.coeffs()) {
            bins[self.bin(n)] = *a;
        }
        Ok(self.idft(bins))
    }

    /// Orthogonal projection onto `X_N`.
    pub fn project(&self, x: &GridSignal<T>, level: usize) -> Result<GridSignal<T>> {
        self.synthesize(&self.spectrum(x, level)?)
    }

    /// `(P_N x)(t)` at an arbitrary real `t`.
    pub fn eval_at(&self, x: &GridSignal<T>, level: usize, t: T) -> Result<Complex<T>> {
        Ok(self.spectrum(x, level)?.eval(t))
    }

    /// `||x - P_N x||²`, summed over the discarded Fourier bins.
    pub fn tail_energy(&self, x: &GridSignal<T>, level: usize) -> Result<T> {
        self.check_level(level)?;
        let bins = self.dft(x)?;
        let energy = bins
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let n = if *k <= self.len / 2 { *k } else { self.len - *k };
                n > level
            })
            .map(|(_, v)| v.norm_sqr())
            .fold(T::zero(), |a, b| a + b);
        Ok(energy)
    }
}

pub fn project<T: Real>(x: &GridSignal<T>, level: usize) -> Result<GridSignal<T>> {
    GridSpace::new(x.len())?.project(x, level)
}

pub fn synthesize<T: Real>(s: &Spectrum<T>, len: usize) -> Result<GridSignal<T>> {
    GridSpace::new(len)?.synthesize(s)
}

pub fn analyze_spectrum<T: Real>(x: &GridSignal<T>, level: usize) -> Result<Spectrum<T>> {
    GridSpace::new(x.len())?.spectrum(x, level)
}

pub fn eval_at<T: Real>(x: &GridSignal<T>, level: usize, t: T) -> Result<Complex<T>> {
    GridSpace::new(x.len())?.eval_at(x, level, t)
}

pub fn tail_energy<T: Real>(x: &GridSignal<T>, level: usize) -> Result<T> {
    GridSpace::new(x.len())?.tail_energy(x, level)
}
