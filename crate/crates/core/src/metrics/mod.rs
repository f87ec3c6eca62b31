//! Split evaluation, the logarithmic probe schedule, phases and metric logs.

mod evaluate;
pub mod phases;
mod record;
mod schedule;

pub use evaluate::{evaluate_all_splits, evaluate_epoch, EpochEvaluation};
pub use phases::{annotate_phases, PhaseAnnotation, PhaseMode};
pub use record::{metrics_to_string, read_metrics, write_metrics, MetricRecord, Split};
pub use schedule::{build_schedule, EpochSchedule};
