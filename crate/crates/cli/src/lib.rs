//! Command-line pipeline: synthetic corpus generation, training, scoring,
//! plotting, clustering and evaluation.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_cluster, cmd_demo, cmd_eval, cmd_gen, cmd_plot, cmd_score, cmd_train};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
