//! Scenario runner and command-line front end for the rough-volatility
//! filtering experiments.

pub mod config;
pub mod error;
pub mod output;
pub mod plotdata;
pub mod probes;
pub mod scenario;

pub use config::{builtin, load_config, parse_config, resolve, FilterMode, ScenarioConfig, Variant};
pub use error::{ExpError, ExpResult};
pub use scenario::{run_in_memory, run_scenario, run_seed, RunMetrics, ScenarioResult, StateMetrics, VariantResult};
