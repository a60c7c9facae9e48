//! Pipeline orchestration and the serving simulator.

mod autoscale;
mod cache;
mod dag;
mod sim;

pub use autoscale::{autoscale_step, Observation, ScaleAction, ScalingPolicy, ScalingState};
pub use cache::{CacheConfig, Lookup, LruTtlCache};
pub use dag::{
    run_pipeline, PipelineDag, PipelineReport, StageContext, StagePolicy, StageReport, StageStatus, Task, TaskOutcome,
    STAGE_NAMES,
};
pub use sim::{simulate_service, LogRecord, ServiceTime, SimMetrics, SimReport, WorkloadSpec};
