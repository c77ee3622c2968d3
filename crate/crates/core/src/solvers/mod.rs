//! Inner iterations, stopping rules and the multi-level drivers.

pub mod cgne;
pub mod landweber;
pub mod multilevel;
pub mod stopping;

pub use cgne::{cgne_step, CgneState};
pub use landweber::{landweber_step, LandweberState};
pub use multilevel::{
    run_fixed_level, run_level, run_level_with, run_multilevel, run_multilevel_with, FixedStop, IterateInfo,
    LevelRun, LevelTrace, MultiLevelResult, RunTrace, StopReason, Termination,
};
pub use stopping::{
    global_stop, increment_stop, level_stop, tail_update, Carry, Discrepancy, Method, StopConfig, StopFlavor,
    TailSource,
};
