//! Experiment harness: configurations, the fixed test family, log-log slope
//! fitting, and the sweep runners behind the `pathslice` CLI.

pub mod config;
pub mod defaults;
pub mod family;
pub mod fitting;
pub mod report;
pub mod runners;
