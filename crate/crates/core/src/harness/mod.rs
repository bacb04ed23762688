//! Synthetic tasks, experiment configuration and runners behind the CLI.

pub mod data;
pub mod glucose;
pub mod config;
pub mod run;
pub mod output;
