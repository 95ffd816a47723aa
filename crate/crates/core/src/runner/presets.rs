//! Built-in scenarios.

use crate::channel::{table_keys, ChannelSource, DirectProbabilities};
use crate::error::{Error, Result};
use crate::optimize::GridSpec;
use crate::sim::{Arrivals, SimConfig};

use super::config::Scenario;
use super::sweep::Axis;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// The variable the preset is meant to be swept over.
    pub free_variable: Axis,
    /// Other values worth sweeping for a family of curves.
    pub family: Option<(Axis, &'static [f64])>,
    pub scenario: Scenario,
}

/// Interference reduction keys, the entries an MPR-strength sweep sets.
pub fn mpr_keys() -> Vec<String> {
    table_keys().into_iter().filter(|k| k.starts_with("delta.")).collect()
}

/// Channel shared by `fig2` and `fig3`: the primary destination never
/// decodes on its own, so every primary packet depends on the relay.
fn relay_only_channel() -> DirectProbabilities {
    DirectProbabilities::new()
        .with("pbar.pd_p.0", 0.0)
        .with("delta.pd_p.00", 0.0)
        .with("delta.pd_p.01", 0.0)
        .with("pbar.ps.0", 0.8)
        .with("pbar.sd_s.0", 0.7)
        .with("pbar.sd_p.0", 0.8)
        .with("delta.sd_s.00", 0.3)
        .with("delta.sd_p.00", 0.3)
        .with("delta.sd_s.10", 0.2)
        .with("delta.sd_p.10", 0.2)
        .with("dhat.sd_s", 0.7)
        .with("dhat.sd_p", 0.7)
}

/// Channel of `fig5` with every interference reduction set to `x`.
pub fn mpr_channel(x: f64) -> DirectProbabilities {
    let mut d = DirectProbabilities::new()
        .with("pbar.pd_p.0", 0.6)
        .with("pbar.ps.0", 0.8)
        .with("pbar.sd_s.0", 0.7)
        .with("pbar.sd_p.0", 0.8)
        .with("dhat.sd_s", 0.5)
        .with("dhat.sd_p", 0.5);
    for k in mpr_keys() {
        d.set(k, x);
    }
    d
}

fn scenario(channel: DirectProbabilities, lambda_e: f64) -> Scenario {
    Scenario {
        channel: ChannelSource::Direct(channel),
        grid: GridSpec::default(),
        arrivals: Arrivals {
            lambda_p: 0.0,
            lambda_e,
        },
        sim: SimConfig::new(20, 100_000, 1),
    }
}

pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "fig2",
            description: "relay-only primary link, energy arrival rate 0.9",
            free_variable: Axis::LambdaP,
            family: None,
            scenario: scenario(relay_only_channel(), 0.9),
        },
        Preset {
            name: "fig3",
            description: "relay-only primary link, family of energy arrival rates",
            free_variable: Axis::LambdaP,
            family: Some((Axis::LambdaE, &[0.3, 0.6, 0.9, 1.0])),
            scenario: scenario(relay_only_channel(), 1.0),
        },
        Preset {
            name: "fig5",
            description: "multipacket reception strength X shared by all interference reductions",
            free_variable: Axis::Mpr,
            family: Some((Axis::Mpr, &[0.0, 0.25, 0.5, 0.75, 1.0])),
            scenario: scenario(mpr_channel(0.5), 0.8),
        },
    ]
}

pub fn preset(name: &str) -> Result<Preset> {
    let all = presets();
    let available = all.iter().map(|p| p.name).collect::<Vec<_>>().join(", ");
    all.into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            available,
        })
}
