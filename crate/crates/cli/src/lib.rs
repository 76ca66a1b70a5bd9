//! Experiment driver around the numerical core: configured flow runs with
//! persisted series, certificates, and snapshots; verification suites; and
//! parameter sweeps.

pub mod commands;
pub mod config;
pub mod output;
pub mod suites;
