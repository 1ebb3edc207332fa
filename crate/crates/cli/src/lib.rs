//! Experiment runner: presets, configuration files, tables, plots and the
//! acceptance criteria.

pub mod acceptance;
pub mod checks;
pub mod config;
pub mod experiments;
pub mod output;
pub mod suite;
pub mod svg;
