//! Multi-level CGNE and Landweber solvers for moment problems on nested
//! spaces of periodic trigonometric polynomials.
//!
//! The ambient space is the set of complex signals on a uniform `L`-point
//! grid over `[0, 1)`; level `N` is the subspace of trigonometric
//! polynomials of degree at most `N`. Irregular samples `x(t_j)` with
//! adaptive weights `w_j` define a scaled analysis operator per level, and
//! the drivers in [`solvers`] climb through the levels until a discrepancy
//! rule says the data are explained.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar type. The dense [`oracle`] and the
//! [`experiment`] harness work in `f64`.

pub mod eigen;
pub mod error;
pub mod experiment;
pub mod operators;
pub mod oracle;
pub mod sampling;
pub mod scalar;
pub mod solvers;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
pub use operators::{CoefSeq, MomentOperator};
pub use sampling::{generate_jittered_set, nyquist_level, theoretical_frame_bounds, BoundSource, FrameBounds, SamplingSet};
pub use scalar::Real;
pub use solvers::{
    run_fixed_level, run_level, run_multilevel, FixedStop, Method, MultiLevelResult, StopConfig, StopFlavor,
    TailSource, Termination,
};
pub use spaces::{dirichlet_kernel, GridSignal, GridSpace, Spectrum};

pub type GridSignal64 = GridSignal<f64>;
pub type Spectrum64 = Spectrum<f64>;
pub type GridSpace64 = GridSpace<f64>;
pub type SamplingSet64 = SamplingSet<f64>;
pub type CoefSeq64 = CoefSeq<f64>;
pub type MomentOperator64 = MomentOperator<f64>;
pub type StopConfig64 = StopConfig<f64>;
pub type MultiLevelResult64 = MultiLevelResult<f64>;

pub type GridSignal32 = GridSignal<f32>;
pub type Spectrum32 = Spectrum<f32>;
pub type GridSpace32 = GridSpace<f32>;
pub type SamplingSet32 = SamplingSet<f32>;
pub type CoefSeq32 = CoefSeq<f32>;
pub type MomentOperator32 = MomentOperator<f32>;
pub type StopConfig32 = StopConfig<f32>;
pub type MultiLevelResult32 = MultiLevelResult<f32>;
