//! Landweber–Richardson iteration `x <- x - T*(Tx - y)`.

use crate::error::{Error, Result};
use crate::operators::{CoefSeq, MomentOperator};
use crate::scalar::Real;
use crate::spaces::{GridSignal, Spectrum};

/// Iterate and its exact residual `y - T x`.
#[derive(Clone, Debug)]
pub struct LandweberState<T: Real> {
    pub x: Spectrum<T>,
    pub r: CoefSeq<T>,
    pub k: usize,
}

impl<T: Real> LandweberState<T> {
    pub fn with_initial(op: &MomentOperator<T>, y: &CoefSeq<T>, x_init: &Spectrum<T>) -> Result<Self> {
        let x = x_init.resized(op.level());
        let r = y.sub(&op.analyze_spectrum(&x)?);
        Ok(Self { x, r, k: 0 })
    }

    pub fn residual_norm(&self) -> T {
        self.r.norm()
    }

    pub fn step(&mut self, op: &MomentOperator<T>, y: &CoefSeq<T>) -> Result<()> {
        let g = op.adjoint_spectrum(&self.r)?;
        for (x, g) in self.x.coeffs_mut().iter_mut().zip(g.coeffs()) {
            *x += *g;
        }
        self.r = y.sub(&op.analyze_spectrum(&self.x)?);
        self.k += 1;
        Ok(())
    }
}

/// One step on a grid signal; only `P_N x` enters, and the result lies in `X_N`.
pub fn landweber_step<T: Real>(x: &GridSignal<T>, op: &MomentOperator<T>, y: &CoefSeq<T>) -> Result<GridSignal<T>> {
    if y.len() != op.sampling().len() {
        return Err(Error::SizeMismatch { expected: op.sampling().len(), got: y.len() });
    }
    let residual = y.sub(&op.analyze(x)?);
    let mut out = op.space().project(x, op.level())?;
    out.add_scaled(T::one(), &op.adjoint(&residual)?);
    Ok(out)
}
