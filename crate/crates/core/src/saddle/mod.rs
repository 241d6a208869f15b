//! Stochastic mirror descent for `min_{x in box} max_{y in simplex}` bilinear problems,
//! optionally with a capped-orthant slack block on the minimizing side.

mod accumulate;
pub mod diagnostics;
mod estimator;
mod problem;
mod run;
mod schedule;

pub use accumulate::{Averaging, BoxAverager, SimplexAverager};
pub use estimator::{BoundedEstimator, DualWeights, EstimatorBounds, IterateView, NormKind, SparseGradient};
pub use problem::{exact_gap, BilinearProblem, BlockGradients, SaddleProblem};
pub use run::{run_smd, Averages, Checkpoint, Estimators, SmdOptions, SmdRun, TraceStep};
pub use schedule::{
    capped_divergence_bound, schedule_for, schedule_three_block, schedule_with, CheckpointPlan, ScheduleConstants,
    SmdSchedule,
};
