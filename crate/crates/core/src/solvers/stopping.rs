//! Stopping parameters and the discrepancy-type rules.
//!
//! Thresholds carry the constant `c = 2(1+η)`, or `1+η` with the factor two
//! dropped. Squared forms compare `‖r‖²` against `c·bound·‖y‖`; linear forms
//! compare `‖r‖` against `c·bound`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::BoundSource;
use crate::scalar::Real;
use crate::spaces::GridSignal;

/// Residuals at or below `RESIDUAL_FLOOR · eps · ‖y‖` count as zero.
pub const RESIDUAL_FLOOR: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cg,
    Lw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopFlavor {
    /// `‖r‖² <= c(δ+ε)‖y‖` per level, `‖r‖² <= cτδ‖y‖` globally.
    CgSquared,
    /// `‖r‖ <= c(δ+ε)` per level, `‖r‖ <= cτδ` globally.
    LwLinear,
    /// Per level `‖x_{k+1} - x_k‖ <= cτδ`; global rule as `LwLinear`.
    LwIncrement,
    /// CG iteration with the linear rules.
    CgWithLwStop,
}

impl StopFlavor {
    pub fn default_for(method: Method) -> Self {
        match method {
            Method::Cg => StopFlavor::CgSquared,
            Method::Lw => StopFlavor::LwLinear,
        }
    }

    pub fn is_squared(self) -> bool {
        self == StopFlavor::CgSquared
    }
}

macro_rules! text_enum {
    ($ty:ty { $($name:literal => $variant:expr),* $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)*
                    other => Err(Error::Config(format!("unknown {}: {other:?}", stringify!($ty)))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $(v if *v == $variant => $name,)*
                    _ => unreachable!(),
                };
                f.write_str(name)
            }
        }
    };
}

text_enum!(Method { "cg" => Method::Cg, "lw" => Method::Lw });
text_enum!(StopFlavor {
    "cg_squared" => StopFlavor::CgSquared,
    "lw_linear" => StopFlavor::LwLinear,
    "lw_increment" => StopFlavor::LwIncrement,
    "cg_with_lw_stop" => StopFlavor::CgWithLwStop,
});

/// Where the per-level tail norms `ε_N ≈ ‖x* - P_N x*‖` come from.
///
/// Sequences are indexed by level and given in raw (unscaled) units;
/// levels past the end of a sequence use zero.
#[derive(Clone, Debug, PartialEq)]
pub enum TailSource<T> {
    KnownTruth(Vec<T>),
    UserSupplied(Vec<T>),
    /// `ε²_0 = Σ w_j |y_j|²`, then `ε²_{N+1} = max(0, Σ w_j |y_j|² - ‖x_N‖²)`.
    Recursive,
}

impl<T: Real> TailSource<T> {
    /// Tail norm for `level` when it does not depend on the iterates.
    pub fn fixed(&self, level: usize) -> Option<T> {
        match self {
            TailSource::KnownTruth(v) | TailSource::UserSupplied(v) => {
                Some(v.get(level).copied().unwrap_or_else(T::zero))
            }
            TailSource::Recursive => None,
        }
    }

    pub fn is_recursive(&self) -> bool {
        matches!(self, TailSource::Recursive)
    }
}

/// Which iterate of a finished level seeds the next one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carry {
    /// The first iterate that satisfied the level rule.
    Terminal,
    /// The last iterate that still violated it.
    LastViolating,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StopConfig<T> {
    pub eta: T,
    pub tau: T,
    /// Weighted ℓ² norm of the data error, raw units.
    pub delta: T,
    pub tails: TailSource<T>,
    pub flavor: StopFlavor,
    pub drop_factor_two: bool,
    /// Defaults to `floor((r-1)/2)`, capped by the grid.
    pub max_level: Option<usize>,
    /// Defaults to `50·(2N+1)` at level `N`.
    pub max_iters: Option<usize>,
    pub bound_source: BoundSource,
    pub carry: Carry,
}

impl<T: Real> StopConfig<T> {
    pub fn new(method: Method, delta: T) -> Self {
        Self {
            eta: T::lit(0.1),
            tau: T::lit(1.5),
            delta,
            tails: TailSource::Recursive,
            flavor: StopFlavor::default_for(method),
            drop_factor_two: false,
            max_level: None,
            max_iters: None,
            bound_source: BoundSource::Theoretical,
            carry: Carry::Terminal,
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eta > T::zero()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.tau > T::one()) {
            return bad(format!("tau must exceed 1, got {}", self.tau));
        }
        if !(self.delta >= T::zero()) || !self.delta.is_finite() {
            return bad(format!("delta must be finite and non-negative, got {}", self.delta));
        }
        if self.max_iters == Some(0) {
            return bad("max_iters must be positive".into());
        }
        if let TailSource::KnownTruth(v) | TailSource::UserSupplied(v) = &self.tails {
            if v.iter().any(|e| !(*e >= T::zero()) || !e.is_finite()) {
                return bad("tail estimates must be finite and non-negative".into());
            }
        }
        Ok(())
    }

    /// `2(1+η)`, or `1+η` with the factor two dropped.
    pub fn factor(&self) -> T {
        let c = T::one() + self.eta;
        if self.drop_factor_two {
            c
        } else {
            c + c
        }
    }

    pub fn max_iters_at(&self, level: usize) -> usize {
        self.max_iters.unwrap_or(50 * (2 * level + 1))
    }

    /// Thresholds in the data space of an operator scaled by `scale`.
    pub fn discrepancy(&self, scale: T) -> Discrepancy<T> {
        Discrepancy {
            factor: self.factor(),
            tau: self.tau,
            delta: self.delta * scale,
            squared: self.flavor.is_squared(),
        }
    }
}

/// The rules with `δ` already expressed in the units of the residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discrepancy<T> {
    pub factor: T,
    pub tau: T,
    pub delta: T,
    pub squared: bool,
}

impl<T: Real> Discrepancy<T> {
    fn below(&self, residual: T, y_norm: T, bound: T) -> bool {
        if is_zero_residual(residual, y_norm) {
            return true;
        }
        if self.squared {
            residual * residual <= self.factor * bound * y_norm
        } else {
            residual <= self.factor * bound
        }
    }

    /// `eps` must be in the same units as `delta`.
    pub fn level(&self, residual: T, y_norm: T, eps: T) -> bool {
        self.below(residual, y_norm, self.delta + eps)
    }

    pub fn global(&self, residual: T, y_norm: T) -> bool {
        self.below(residual, y_norm, self.tau * self.delta)
    }

    pub fn increment(&self, increment: T) -> bool {
        increment <= self.factor * self.tau * self.delta
    }
}

pub fn is_zero_residual<T: Real>(residual: T, y_norm: T) -> bool {
    residual <= T::lit(RESIDUAL_FLOOR) * T::epsilon() * y_norm
}

fn unscaled<T: Real>(flavor: StopFlavor, cfg: &StopConfig<T>) -> Discrepancy<T> {
    Discrepancy { squared: flavor.is_squared(), ..cfg.discrepancy(T::one()) }
}

/// Level rule; `true` means stop iterating at this level.
pub fn level_stop<T: Real>(flavor: StopFlavor, residual: T, y_norm: T, cfg: &StopConfig<T>, eps: T) -> bool {
    unscaled(flavor, cfg).level(residual, y_norm, eps)
}

/// Final rule; `true` terminates the multi-level iteration.
pub fn global_stop<T: Real>(flavor: StopFlavor, residual: T, y_norm: T, cfg: &StopConfig<T>) -> bool {
    let flavor = if flavor == StopFlavor::LwIncrement { StopFlavor::LwLinear } else { flavor };
    unscaled(flavor, cfg).global(residual, y_norm)
}

pub fn increment_stop<T: Real>(x_next: &GridSignal<T>, x_curr: &GridSignal<T>, cfg: &StopConfig<T>) -> bool {
    cfg.discrepancy(T::one()).increment(x_next.sub(x_curr).norm())
}

/// `max(0, raw_energy - approx_norm_sq)`, the squared tail estimate.
pub fn tail_update<T: Real>(raw_energy: T, approx_norm_sq: T) -> T {
    let diff = raw_energy - approx_norm_sq;
    if diff < T::zero() {
        log::debug!("tail estimate clamped at zero ({})", diff);
        return T::zero();
    }
    diff
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn cfg(method: Method, eta: f64, tau: f64, delta: f64) -> StopConfig<f64> {
        StopConfig { eta, tau, ..StopConfig::new(method, delta) }
    }

    #[test]
    fn level_stop_examples() {
        let c = cfg(Method::Lw, 0.1, 1.5, 0.05);
        assert!(!level_stop(StopFlavor::LwLinear, 0.45, 1.0, &c, 0.15));
        assert!(level_stop(StopFlavor::LwLinear, 0.43, 1.0, &c, 0.15));

        let z = cfg(Method::Lw, 0.1, 1.5, 0.0);
        assert!(!level_stop(StopFlavor::LwLinear, 1e-6, 1.0, &z, 0.0));
        assert!(!level_stop(StopFlavor::CgSquared, 1e-6, 1.0, &z, 0.0));
        assert!(level_stop(StopFlavor::LwLinear, 0.0, 1.0, &z, 0.0));
        assert!(level_stop(StopFlavor::CgSquared, 0.0, 1.0, &z, 0.0));
    }

    #[test]
    fn squared_form_uses_data_norm() {
        // bound 2.2·0.2·‖y‖ = 0.44 against r² = 0.36
        let c = cfg(Method::Cg, 0.1, 1.5, 0.05);
        assert!(level_stop(StopFlavor::CgSquared, 0.6, 1.0, &c, 0.15));
        assert!(!level_stop(StopFlavor::CgSquared, 0.6, 0.5, &c, 0.15));
    }

    #[test]
    fn global_stop_examples() {
        let c = cfg(Method::Lw, 0.1, 1.5, 0.1);
        assert!(global_stop(StopFlavor::LwLinear, 0.3, 1.0, &c));
        assert!(!global_stop(StopFlavor::LwLinear, 0.34, 1.0, &c));
        assert!(global_stop(StopFlavor::CgSquared, 0.5, 1.0, &c));
        assert!(global_stop(StopFlavor::LwIncrement, 0.3, 1.0, &c));

        let z = cfg(Method::Lw, 0.1, 1.5, 0.0);
        assert!(!global_stop(StopFlavor::LwLinear, 1e-9, 1.0, &z));
        assert!(global_stop(StopFlavor::LwLinear, 0.0, 1.0, &z));
    }

    #[test]
    fn dropping_factor_two() {
        let mut c = cfg(Method::Lw, 0.1, 1.5, 0.1);
        c.drop_factor_two = true;
        assert!((c.factor() - 1.1).abs() < 1e-15);
        assert!(!global_stop(StopFlavor::LwLinear, 0.3, 1.0, &c));
        assert!(global_stop(StopFlavor::LwLinear, 0.16, 1.0, &c));
    }

    #[test]
    fn increment_stop_examples() {
        let x = GridSignal::new(vec![Complex::new(1.0, 0.0); 4]).unwrap();
        let c = cfg(Method::Lw, 0.1, 1.5, 0.1);
        assert!(increment_stop(&x, &x, &c));
        let z = cfg(Method::Lw, 0.1, 1.5, 0.0);
        let y = x.scaled(1.0 + 1e-9);
        assert!(!increment_stop(&y, &x, &z));
        let step = x.scaled(1.3);
        assert!(increment_stop(&step, &x, &c));
        assert!(!increment_stop(&x.scaled(1.34), &x, &c));
    }

    #[test]
    fn tail_update_examples() {
        assert_eq!(tail_update(2.5, 0.0), 2.5);
        assert_eq!(tail_update(2.5, 2.5), 0.0);
        assert_eq!(tail_update(2.5, 3.0), 0.0);
        assert!((tail_update(2.5f64, 1.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn scaled_thresholds() {
        let c = cfg(Method::Lw, 0.1, 1.5, 0.1);
        let d = c.discrepancy(0.5);
        assert!((d.delta - 0.05).abs() < 1e-15);
        assert!(d.global(0.16, 1.0));
        assert!(!d.global(0.17, 1.0));
    }

    #[test]
    fn validation() {
        let mut c = cfg(Method::Cg, 0.1, 1.5, 0.1);
        assert!(c.validate().is_ok());
        c.tau = 1.0;
        assert!(c.validate().is_err());
        c.tau = 1.5;
        c.eta = 0.0;
        assert!(c.validate().is_err());
        c.eta = 0.1;
        c.delta = -1.0;
        assert!(c.validate().is_err());
        c.delta = 0.0;
        c.max_iters = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for f in [StopFlavor::CgSquared, StopFlavor::LwLinear, StopFlavor::LwIncrement, StopFlavor::CgWithLwStop] {
            assert_eq!(f.to_string().parse::<StopFlavor>().unwrap(), f);
        }
        assert_eq!("lw".parse::<Method>().unwrap(), Method::Lw);
        assert!("gmres".parse::<Method>().is_err());
        assert_eq!(StopFlavor::default_for(Method::Cg), StopFlavor::CgSquared);
    }

    #[test]
    fn tails_past_end_are_zero() {
        let t = TailSource::KnownTruth(vec![1.0, 0.5]);
        assert_eq!(t.fixed(1), Some(0.5));
        assert_eq!(t.fixed(7), Some(0.0));
        assert_eq!(TailSource::<f64>::Recursive.fixed(0), None);
    }
}
