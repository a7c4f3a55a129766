//! Library side of the `dualband` command: configuration files, presets,
//! sweeps, scenario runs and report writing.

pub mod config;
pub mod error;
pub mod presets;
pub mod report;
pub mod run;
pub mod sweeps;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
