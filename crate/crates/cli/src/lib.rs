//! Command-line front end: training, evaluation, demonstration generation
//! and the live session server.

pub mod commands;
pub mod protocol;
pub mod server;
pub mod session;

pub use commands::{run, Cli};
