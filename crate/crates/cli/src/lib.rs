//! Pipeline orchestration behind the `tweetstack` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use artifacts::{Layout, ModelKind};
pub use commands::{
    cmd_evaluate, cmd_ingest, cmd_inspect, cmd_stack, cmd_synth, cmd_train, cmd_tsne, EvalSplit, EvalTarget,
    InspectView,
};
pub use config::RunConfig;
pub use error::{CliError, Result};
