//! TOML scenario files.
//!
//! ```toml
//! [channel.direct]
//! pbar.pd_p.0 = 0.6          # dotted or quoted keys both work
//! "delta.sd_s.00" = 0.3
//!
//! [policy-grid]
//! points = 41
//!
//! [arrivals]
//! lambda_p = 0.1
//! lambda_e = 0.8
//!
//! [simulation]
//! replicas = 20
//! slots = 100000
//! seed = 7
//! ```
//!
//! `[channel.physical]` takes the fields of [`PhysicalConfig`] instead.

use std::path::Path;

use serde::Deserialize;

use crate::channel::{ChannelSource, ChannelTable, DirectProbabilities, PhysicalConfig};
use crate::error::{Error, Result};
use crate::optimize::GridSpec;
use crate::sim::{Arrivals, SimConfig, DEFAULT_BLOWUP_THRESHOLD, DEFAULT_WARMUP_FRACTION};

/// Everything needed to evaluate one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub channel: ChannelSource,
    pub grid: GridSpec,
    pub arrivals: Arrivals,
    pub sim: SimConfig,
}

impl Scenario {
    pub fn table(&self) -> Result<ChannelTable> {
        ChannelTable::build(&self.channel)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    channel: RawChannel,
    #[serde(rename = "policy-grid", default)]
    policy_grid: RawGrid,
    arrivals: RawArrivals,
    #[serde(default)]
    simulation: RawSimulation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    physical: Option<PhysicalConfig>,
    direct: Option<toml::Table>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default)]
    exhaustive_gamma: bool,
}

impl Default for RawGrid {
    fn default() -> Self {
        Self {
            points: default_points(),
            exhaustive_gamma: false,
        }
    }
}

fn default_points() -> usize {
    GridSpec::default().points
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArrivals {
    #[serde(default)]
    lambda_p: f64,
    lambda_e: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    #[serde(default = "default_replicas")]
    replicas: usize,
    #[serde(default = "default_slots")]
    slots: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_warmup")]
    warmup_fraction: f64,
    #[serde(default = "default_blowup")]
    blowup_threshold: u64,
}

impl Default for RawSimulation {
    fn default() -> Self {
        Self {
            replicas: default_replicas(),
            slots: default_slots(),
            seed: 0,
            warmup_fraction: default_warmup(),
            blowup_threshold: default_blowup(),
        }
    }
}

fn default_replicas() -> usize {
    20
}

fn default_slots() -> u64 {
    100_000
}

fn default_warmup() -> f64 {
    DEFAULT_WARMUP_FRACTION
}

fn default_blowup() -> u64 {
    DEFAULT_BLOWUP_THRESHOLD
}

/// Flattens nested tables into dotted keys, so `pbar.pd_p.0 = x` and
/// `"pbar.pd_p.0" = x` mean the same thing.
fn flatten(prefix: &str, table: &toml::Table, out: &mut DirectProbabilities) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            toml::Value::Float(x) => {
                out.set(key, *x);
            }
            toml::Value::Integer(i) => {
                out.set(key, *i as f64);
            }
            other => {
                return Err(Error::config(
                    format!("channel.direct.{key}"),
                    format!("expected a number, got {}", other.type_str()),
                ))
            }
        }
    }
    Ok(())
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text)?;
    let channel = match (raw.channel.physical, raw.channel.direct) {
        (Some(p), None) => ChannelSource::Physical(p),
        (None, Some(t)) => {
            let mut d = DirectProbabilities::new();
            flatten("", &t, &mut d)?;
            ChannelSource::Direct(d)
        }
        (Some(_), Some(_)) => {
            return Err(Error::config("channel", "give either `physical` or `direct`, not both"))
        }
        (None, None) => return Err(Error::config("channel", "missing `physical` or `direct` section")),
    };
    ChannelTable::build(&channel)?;

    let mut grid = GridSpec::new(raw.policy_grid.points)
        .map_err(|e| remap(e, "policy-grid.points"))?;
    grid.exhaustive_gamma = raw.policy_grid.exhaustive_gamma;

    let arrivals = Arrivals::new(raw.arrivals.lambda_p, raw.arrivals.lambda_e)
        .map_err(|e| remap_prefixed(e, "arrivals"))?;

    let s = raw.simulation;
    let sim = SimConfig {
        replicas: s.replicas,
        slots: s.slots,
        seed: s.seed,
        warmup_fraction: s.warmup_fraction,
        blowup_threshold: s.blowup_threshold,
    };
    sim.validate().map_err(|e| remap_prefixed(e, "simulation"))?;

    Ok(Scenario {
        channel,
        grid,
        arrivals,
        sim,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
    parse_scenario(&text)
}

fn remap(e: Error, entry: &str) -> Error {
    match e {
        Error::Config { reason, .. } => Error::config(entry, reason),
        other => other,
    }
}

fn remap_prefixed(e: Error, section: &str) -> Error {
    match e {
        Error::Config { entry, reason } => Error::config(format!("{section}.{entry}"), reason),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIRECT: &str = r#"
[channel.direct]
pbar.pd_p.0 = 0.6
pbar.ps.0 = 0.8
pbar.sd_s.0 = 0.7
pbar.sd_p.0 = 0.8
"dhat.sd_s" = 0.5
dhat.sd_p = 0.5
delta.pd_p.00 = 0.5
delta.pd_p.01 = 0.5
delta.sd_s.00 = 0.5
delta.sd_s.10 = 0.5
delta.sd_p.00 = 0.5
delta.sd_p.10 = 0.5

[policy-grid]
points = 21

[arrivals]
lambda_p = 0.1
lambda_e = 0.8

[simulation]
replicas = 4
slots = 1000
seed = 3
"#;

    #[test]
    fn direct_scenario_parses() {
        let s = parse_scenario(DIRECT).unwrap();
        assert_eq!(s.grid.points, 21);
        assert_eq!(s.arrivals.lambda_e, 0.8);
        assert_eq!(s.sim.replicas, 4);
        assert_eq!(s.table().unwrap().pd_p(), 0.6);
    }

    #[test]
    fn out_of_range_probability_names_entry() {
        let text = DIRECT.replace("pbar.ps.0 = 0.8", "pbar.ps.0 = 1.8");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("pbar.ps.0"), "{err}");
    }

    #[test]
    fn bad_arrival_names_entry() {
        let text = DIRECT.replace("lambda_e = 0.8", "lambda_e = 1.5");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("arrivals.lambda_e"), "{err}");
    }

    #[test]
    fn unknown_section_rejected() {
        let text = format!("{DIRECT}\n[bogus]\nx = 1\n");
        assert!(matches!(parse_scenario(&text), Err(Error::Toml(_))));
    }

    #[test]
    fn physical_scenario_parses() {
        let text = r#"
[channel.physical]
bits = 1000.0
slot_s = 1e-3
bandwidth_hz = 1e6
tau_s = 1e-4
energy_j = 1e-6
p_primary_w = 1e-3
noise_w = { d_p = 1e-4, s = 1e-4, d_s = 1e-4 }
sigma = { pd_p = 1.0, ps = 2.0, sd_s = 1.5, sd_p = 1.0, pd_s = 0.3 }

[arrivals]
lambda_e = 0.5
"#;
        let s = parse_scenario(text).unwrap();
        assert!(matches!(s.channel, ChannelSource::Physical(_)));
        assert_eq!(s.grid.points, 41);
        assert_eq!(s.arrivals.lambda_p, 0.0);
    }

    #[test]
    fn both_channel_forms_rejected() {
        let text = DIRECT.replace(
            "[policy-grid]",
            "[channel.physical]\nbits = 1.0\n\n[policy-grid]",
        );
        assert!(parse_scenario(&text).is_err());
    }
}
