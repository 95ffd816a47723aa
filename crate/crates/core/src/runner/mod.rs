//! Scenario files, built-in presets and parameter sweeps.

pub mod config;
pub mod presets;
pub mod sweep;

pub use config::{load_scenario, parse_scenario, Scenario};
pub use presets::{preset, presets, Preset};
pub use sweep::{parse_systems, run_sweep, write_csv, Axis, Evaluated, SweepRow, SweepSpec, CSV_HEADER};
