//! Conjugate gradients on the normal equations `T*T x = T*y`.

use crate::error::{Error, Result};
use crate::operators::{CoefSeq, MomentOperator};
use crate::scalar::Real;
use crate::spaces::{GridSignal, Spectrum};

/// Iterate, residual `r_k = y - T x_k` and direction `w_k` in data space.
#[derive(Clone, Debug)]
pub struct CgneState<T: Real> {
    pub x: Spectrum<T>,
    pub r: CoefSeq<T>,
    pub w: CoefSeq<T>,
    pub k: usize,
    /// `‖T* r_k‖²`.
    grad_sqr: T,
}

impl<T: Real> CgneState<T> {
    /// `x_0 = 0, r_0 = w_0 = y`.
    pub fn new(op: &MomentOperator<T>, y: &CoefSeq<T>) -> Result<Self> {
        Self::with_initial(op, y, &Spectrum::zeros(op.level()))
    }

    /// Restarts from `x_init`, re-embedded at the operator's level.
    pub fn with_initial(op: &MomentOperator<T>, y: &CoefSeq<T>, x_init: &Spectrum<T>) -> Result<Self> {
        let x = x_init.resized(op.level());
        let r = y.sub(&op.analyze_spectrum(&x)?);
        let grad_sqr = op.adjoint_spectrum(&r)?.norm_sqr();
        Ok(Self { x, w: r.clone(), r, k: 0, grad_sqr })
    }

    pub fn residual_norm(&self) -> T {
        self.r.norm()
    }

    pub fn signal(&self, len: usize) -> Result<GridSignal<T>> {
        crate::spaces::synthesize(&self.x, len)
    }

    /// One update. Fails with `NormalEquationsSolved` when `T* r_k = 0`
    /// and `ZeroDirection` when `T d_k = 0`; the state is unchanged then.
    pub fn step(&mut self, op: &MomentOperator<T>) -> Result<()> {
        if self.grad_sqr <= T::zero() {
            return Err(Error::NormalEquationsSolved);
        }
        let d = op.adjoint_spectrum(&self.w)?;
        let td = op.analyze_spectrum(&d)?;
        let td_sqr = td.norm_sqr();
        if td_sqr <= T::zero() {
            return Err(Error::ZeroDirection);
        }
        let alpha = self.grad_sqr / td_sqr;
        for (x, d) in self.x.coeffs_mut().iter_mut().zip(d.coeffs()) {
            *x += d * alpha;
        }
        self.r.add_scaled(-alpha, &td);
        let grad_sqr = op.adjoint_spectrum(&self.r)?.norm_sqr();
        let beta = grad_sqr / self.grad_sqr;
        let mut w = self.r.clone();
        w.add_scaled(beta, &self.w);
        self.w = w;
        self.grad_sqr = grad_sqr;
        self.k += 1;
        Ok(())
    }
}

/// Grid-signal form of one CGNE update.
pub fn cgne_step<T: Real>(state: &CgneState<T>, op: &MomentOperator<T>) -> Result<CgneState<T>> {
    let mut next = state.clone();
    next.step(op)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{generate_jittered_set, BoundSource, SamplingSet};
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_coefs(len: usize, seed: u64) -> CoefSeq<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CoefSeq::new((0..len).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
    }

    #[test]
    fn tight_frame_one_step() {
        let s = Arc::new(SamplingSet::new((0..7).map(|j| j as f64 / 7.0).collect()).unwrap());
        let op = MomentOperator::new(3, s, 32, BoundSource::Empirical).unwrap();
        let y = random_coefs(7, 1);
        let mut st = CgneState::new(&op, &y).unwrap();
        st.step(&op).unwrap();
        assert!(st.residual_norm() < 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = Arc::new(generate_jittered_set::<f64>(9, 0.5, 3).unwrap());
        let op = MomentOperator::new(2, s, 32, BoundSource::Theoretical).unwrap();
        let mut st = CgneState::new(&op, &CoefSeq::zeros(9)).unwrap();
        assert!(matches!(st.step(&op), Err(Error::NormalEquationsSolved)));
        assert_eq!(st.x.norm_sqr(), 0.0);
        assert_eq!(st.residual_norm(), 0.0);
    }

    #[test]
    fn residual_recurrence_matches_direct() {
        let s = Arc::new(generate_jittered_set::<f64>(25, 0.8, 5).unwrap());
        let op = MomentOperator::new(6, s, 64, BoundSource::Theoretical).unwrap();
        let y = random_coefs(25, 2);
        let mut st = CgneState::new(&op, &y).unwrap();
        for _ in 0..13 {
            if st.step(&op).is_err() {
                break;
            }
            let direct = y.sub(&op.analyze_spectrum(&st.x).unwrap());
            assert!(direct.sub(&st.r).norm() < 1e-9);
        }
    }

    #[test]
    fn residual_non_increasing() {
        let s = Arc::new(generate_jittered_set::<f64>(30, 0.9, 8).unwrap());
        let op = MomentOperator::new(7, s, 64, BoundSource::Theoretical).unwrap();
        let y = random_coefs(30, 4);
        let mut st = CgneState::new(&op, &y).unwrap();
        let mut prev = st.residual_norm();
        while st.k < 15 && st.step(&op).is_ok() {
            assert!(st.residual_norm() <= prev + 1e-12);
            prev = st.residual_norm();
        }
    }

    #[test]
    fn functional_step_leaves_input() {
        let s = Arc::new(generate_jittered_set::<f64>(12, 0.3, 1).unwrap());
        let op = MomentOperator::new(2, s, 16, BoundSource::Theoretical).unwrap();
        let st = CgneState::new(&op, &random_coefs(12, 9)).unwrap();
        let next = cgne_step(&st, &op).unwrap();
        assert_eq!(st.k, 0);
        assert_eq!(next.k, 1);
        assert!(next.residual_norm() < st.residual_norm());
        assert_eq!(next.signal(16).unwrap().len(), 16);
    }
}
