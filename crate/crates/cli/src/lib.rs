//! Library side of the `adele` command-line tool: configuration resolution
//! and the command runners, exposed for testing.

pub mod commands;
pub mod config;
pub mod text;
