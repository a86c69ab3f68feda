//! Std companion to `sed-core`: configuration files, binary snapshots,
//! CSV/JSON output directories, parallel ensembles and the `sed` CLI.

pub mod cli;
pub mod config_file;
pub mod ensemble;
pub mod output;
pub mod snapshot;
