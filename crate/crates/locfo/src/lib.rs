//! The `locfo` command-line tool: JSON formats and subcommands over `locfo-core`.

pub mod cli;
pub mod io;

pub use cli::run;
