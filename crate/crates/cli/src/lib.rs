//! Library face of the command-line tool, so the binary stays thin and the
//! acceptance suite can drive every command in-process.

pub mod commands;
pub mod config;
pub mod verify;

pub use commands::{CommandOutput, RenderSpec};
pub use config::RunConfig;
pub use verify::{run_verify, VerifyReport};
