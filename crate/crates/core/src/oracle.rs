//! Dense reference implementations for small instances, always in `f64`.
//!
//! The analysis operator is materialized as the `r × (2N+1)` matrix
//! `M_{j,n} = s_N √w_j e^{2πint_j}` acting on coefficients `a_{-N..N}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::operators::{CoefSeq, MomentOperator};
use crate::sampling::{BoundSource, FrameBounds};
use crate::scalar::Real;
use crate::spaces::Spectrum;

type C64 = Complex<f64>;

#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
    pub level: usize,
    pub scale: f64,
    pub points: Vec<f64>,
}

fn phase(n: isize, t: f64) -> C64 {
    // reduce n·t mod 1 before scaling by 2π
    let u = (n as f64 * t).rem_euclid(1.0);
    C64::from_polar(1.0, std::f64::consts::TAU * u)
}

/// Builds the matrix from the sampling data of `op`, independently of
/// its phase tables.
pub fn densify<T: Real>(op: &MomentOperator<T>) -> DenseOperator {
    let level = op.level();
    let d = level as isize;
    let scale = op.scale().as_f64();
    let points: Vec<f64> = op.sampling().points().iter().map(|t| t.as_f64()).collect();
    let weights: Vec<f64> = op.sampling().weights().iter().map(|w| w.as_f64()).collect();
    let matrix = DMatrix::from_fn(points.len(), 2 * level + 1, |j, k| {
        phase(k as isize - d, points[j]) * (scale * weights[j].sqrt())
    });
    DenseOperator { matrix, level, scale, points }
}

impl DenseOperator {
    pub fn apply(&self, s: &Spectrum<f64>) -> Result<CoefSeq<f64>> {
        if s.degree() != self.level {
            return Err(Error::SizeMismatch { expected: self.matrix.ncols(), got: s.coeffs().len() });
        }
        let a = DVector::from_column_slice(s.coeffs());
        Ok(CoefSeq::new((&self.matrix * a).iter().copied().collect()))
    }

    /// `D^H D`.
    pub fn normal_matrix(&self) -> DMatrix<C64> {
        self.matrix.adjoint() * &self.matrix
    }
}

/// Minimizer of `‖D a - y‖` from the normal equations.
pub fn dense_least_squares(d: &DenseOperator, y: &CoefSeq<f64>) -> Result<Spectrum<f64>> {
    if y.len() != d.matrix.nrows() {
        return Err(Error::SizeMismatch { expected: d.matrix.nrows(), got: y.len() });
    }
    let rhs = d.matrix.adjoint() * DVector::from_column_slice(y.values());
    let chol = d.normal_matrix().cholesky().ok_or(Error::SingularNormalMatrix)?;
    let a = chol.solve(&rhs);
    Spectrum::new(d.level, a.iter().copied().collect())
}

/// Extreme eigenvalues of the unscaled `D^H D`.
pub fn dense_frame_bounds(d: &DenseOperator) -> FrameBounds<f64> {
    let unscaled = d.normal_matrix() / C64::new(d.scale * d.scale, 0.0);
    let eig = unscaled.symmetric_eigen();
    let lower = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    FrameBounds { lower, upper, source: BoundSource::Empirical }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{generate_jittered_set, SamplingSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_spectrum(degree: usize, rng: &mut ChaCha8Rng) -> Spectrum<f64> {
        Spectrum::from_fn(degree, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn single_point_level_zero() {
        let s = Arc::new(SamplingSet::new(vec![0.0, 0.5]).unwrap());
        let op = MomentOperator::new(0, s, 8, BoundSource::Theoretical).unwrap();
        let d = densify(&op);
        let want = op.scale() * 0.5f64.sqrt();
        assert!((d.matrix[(0, 0)] - C64::new(want, 0.0)).norm() < 1e-15);
        assert!((d.matrix[(1, 0)] - C64::new(want, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn regular_columns_orthogonal() {
        let s = Arc::new(SamplingSet::new((0..9).map(|j| j as f64 / 9.0).collect()).unwrap());
        let op = MomentOperator::new(4, s, 32, BoundSource::Empirical).unwrap();
        let g = densify(&op).normal_matrix();
        for i in 0..9 {
            for k in 0..9 {
                if i != k {
                    assert!(g[(i, k)].norm() < 1e-13);
                }
            }
        }
        let b = dense_frame_bounds(&densify(&op));
        assert!((b.lower - b.upper).abs() < 1e-12);
    }

    #[test]
    fn matvec_matches_analyze() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..20 {
            let r = rng.random_range(5..40);
            let s = Arc::new(generate_jittered_set::<f64>(r, 0.9, seed).unwrap());
            let level = rng.random_range(0..=8usize);
            let op = MomentOperator::new(level, s, 64, BoundSource::Theoretical).unwrap();
            let a = random_spectrum(level, &mut rng);
            let dense = densify(&op).apply(&a).unwrap();
            let fast = op.analyze_spectrum(&a).unwrap();
            assert!(dense.sub(&fast).norm() < 1e-10);
        }
    }

    #[test]
    fn least_squares_recovers_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Arc::new(generate_jittered_set::<f64>(30, 0.7, 2).unwrap());
        let op = MomentOperator::new(6, s, 64, BoundSource::Theoretical).unwrap();
        let d = densify(&op);
        let a = random_spectrum(6, &mut rng);
        let y = d.apply(&a).unwrap();
        let got = dense_least_squares(&d, &y).unwrap();
        let err: f64 = got.coeffs().iter().zip(a.coeffs()).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-9);
    }

    #[test]
    fn least_squares_orthogonal_data() {
        // Residual of the minimizer is orthogonal to the range.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = Arc::new(generate_jittered_set::<f64>(20, 0.5, 6).unwrap());
        let op = MomentOperator::new(3, s, 32, BoundSource::Theoretical).unwrap();
        let d = densify(&op);
        let y = CoefSeq::new((0..20).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect());
        let a = dense_least_squares(&d, &y).unwrap();
        let r = y.sub(&d.apply(&a).unwrap());
        let g = d.matrix.adjoint() * DVector::from_column_slice(r.values());
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn singular_normal_matrix() {
        let s = Arc::new(SamplingSet::new(vec![0.0, 0.5]).unwrap());
        let op = MomentOperator::new(2, s, 16, BoundSource::Empirical).unwrap();
        let d = densify(&op);
        assert!(matches!(dense_least_squares(&d, &CoefSeq::zeros(2)), Err(Error::SingularNormalMatrix)));
    }
}
