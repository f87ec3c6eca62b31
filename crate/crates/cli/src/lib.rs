//! Orchestration behind the `ddlab` binary: config-driven training runs,
//! their analysis, and SVG reports.

pub mod analyze;
pub mod config;
mod fsutil;
pub mod report;
pub mod run;
mod svg;

pub use analyze::cmd_analyze;
pub use config::RunConfig;
pub use report::cmd_report;
pub use run::{cmd_train, RunPaths, TrainOptions};

/// A mistake in the invocation, config or inputs rather than a bug or an
/// environment failure. Maps to exit code 1.
#[derive(Debug)]
pub struct UserError(pub String);

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

/// 1 for user errors, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let user = err.chain().any(|e| {
        e.is::<UserError>()
            || matches!(
                e.downcast_ref::<ddlab_core::Error>(),
                Some(
                    ddlab_core::Error::InvalidSpec(_)
                        | ddlab_core::Error::InvalidOptim(_)
                        | ddlab_core::Error::InvalidArgument(_)
                        | ddlab_core::Error::LayerOutOfRange { .. }
                        | ddlab_core::Error::InsufficientHistory(_)
                )
            )
    });
    if user {
        1
    } else {
        2
    }
}
