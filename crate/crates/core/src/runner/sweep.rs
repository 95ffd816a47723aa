//! Parameter sweeps and their CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{ChannelSource, ChannelTable};
use crate::error::{Error, Result};
use crate::optimize::{optimize, GridSpec, OptimizationResult, System};
use crate::rates::PolicyParams;
use crate::sim::{self, Arrivals, SimConfig, SimReport};

use super::config::Scenario;
use super::presets::mpr_keys;

/// The quantity varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    LambdaP,
    LambdaE,
    /// Common value of every interference reduction (direct channels only).
    Mpr,
    /// Packet size in bits (physical channels only).
    Bits,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::LambdaP => "lambda_p",
            Axis::LambdaE => "lambda_e",
            Axis::Mpr => "X",
            Axis::Bits => "B",
        }
    }

    fn check(self, v: f64) -> Result<()> {
        let ok = match self {
            Axis::Bits => v > 0.0 && v.is_finite(),
            _ => (0.0..=1.0).contains(&v),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(self.label(), format!("value {v} is outside the domain")))
        }
    }

    /// `scenario` with this axis set to `v`.
    pub fn apply(self, scenario: &Scenario, v: f64) -> Result<Scenario> {
        self.check(v)?;
        let mut s = scenario.clone();
        match self {
            Axis::LambdaP => s.arrivals.lambda_p = v,
            Axis::LambdaE => s.arrivals.lambda_e = v,
            Axis::Mpr => match &mut s.channel {
                ChannelSource::Direct(d) => {
                    for k in mpr_keys() {
                        d.set(k, v);
                    }
                }
                ChannelSource::Physical(_) => {
                    return Err(Error::config("axis", "X sweeps need a direct channel"));
                }
            },
            Axis::Bits => match &mut s.channel {
                ChannelSource::Physical(p) => p.bits = v,
                ChannelSource::Direct(_) => {
                    return Err(Error::config("axis", "B sweeps need a physical channel"));
                }
            },
        }
        Ok(s)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda_p" | "λ_p" | "lp" => Ok(Axis::LambdaP),
            "lambda_e" | "λ_e" | "le" => Ok(Axis::LambdaE),
            "X" | "x" | "mpr" => Ok(Axis::Mpr),
            "B" | "b" | "bits" => Ok(Axis::Bits),
            _ => Err(Error::config("axis", format!("unknown axis `{s}` (lambda_p, lambda_e, X, B)"))),
        }
    }
}

/// A row source: one optimised system or the simulated real protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Evaluated {
    Bound(System),
    /// The real protocol simulated under the policy that is optimal for
    /// the backlogged-energy system (with `α = 1`).
    Sim,
}

impl Evaluated {
    pub fn label(self) -> &'static str {
        match self {
            Evaluated::Bound(s) => s.label(),
            Evaluated::Sim => "SIM",
        }
    }
}

impl FromStr for Evaluated {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("sim") {
            Ok(Evaluated::Sim)
        } else {
            s.parse().map(Evaluated::Bound)
        }
    }
}

/// Parses a comma-separated system list such as `S1,S2,S3,SC,SIM`.
pub fn parse_systems(list: &str) -> Result<Vec<Evaluated>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub systems: Vec<Evaluated>,
    pub grid: GridSpec,
    pub sim: SimConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config("step", format!("must be > 0, got {}", self.step)));
        }
        if self.systems.is_empty() {
            return Err(Error::config("systems", "no system selected"));
        }
        self.axis.check(self.from)?;
        self.axis.check(self.to)?;
        if self.systems.contains(&Evaluated::Sim) {
            self.sim.validate()?;
        }
        Ok(())
    }

    /// `from, from + step, …` up to `to`; empty when `to < from`.
    pub fn values(&self) -> Vec<f64> {
        if self.to < self.from || !(self.step > 0.0) {
            return Vec::new();
        }
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| {
                let v = self.from + k as f64 * self.step;
                (v * 1e12).round() / 1e12
            })
            .collect()
    }
}

/// One output line.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub system: Evaluated,
    pub result: OptimizationResult,
    pub policy: PolicyParams,
    pub sim: Option<SimReport>,
}

impl SweepRow {
    pub fn feasible(&self) -> bool {
        match (&self.sim, self.system) {
            (Some(r), Evaluated::Sim) => self.result.feasible && r.empirically_stable(),
            _ => self.result.feasible,
        }
    }
}

pub const CSV_HEADER: [&str; 17] = [
    "axis_value",
    "system",
    "mu_s_star",
    "feasible",
    "beta",
    "f",
    "alpha",
    "omega",
    "gamma",
    "mu_p",
    "lambda_r",
    "mu_r",
    "pi_p",
    "pi_r",
    "nu0",
    "sim_mu_s",
    "sim_ci",
];

fn evaluate(
    system: Evaluated,
    table: &ChannelTable,
    arrivals: Arrivals,
    grid: GridSpec,
    sim_cfg: &SimConfig,
) -> Result<(OptimizationResult, PolicyParams, Option<SimReport>)> {
    match system {
        Evaluated::Bound(s) => {
            let r = optimize(s, table, arrivals.lambda_e, arrivals.lambda_p, grid)?;
            Ok((r, r.best_policy, None))
        }
        Evaluated::Sim => {
            let r = optimize(System::S3, table, arrivals.lambda_e, arrivals.lambda_p, grid)?;
            let policy = PolicyParams {
                alpha: 1.0,
                ..r.best_policy
            };
            let report = if r.feasible {
                Some(sim::run(table, &policy, arrivals, sim_cfg)?)
            } else {
                None
            };
            Ok((r, policy, report))
        }
    }
}

/// Evaluates every (sweep value, system) pair, in sweep order.
pub fn run_sweep(scenario: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points: Vec<Vec<SweepRow>> = spec
        .values()
        .into_par_iter()
        .map(|v| {
            let s = spec.axis.apply(scenario, v)?;
            let table = s.table()?;
            spec.systems
                .iter()
                .map(|&system| {
                    let (result, policy, sim) = evaluate(system, &table, s.arrivals, spec.grid, &spec.sim)?;
                    Ok(SweepRow {
                        axis_value: v,
                        system,
                        result,
                        policy,
                        sim,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(points.into_iter().flatten().collect())
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        let p = &row.policy;
        let r = &row.result.best_rates;
        let (sim_mu, sim_ci) = match &row.sim {
            Some(rep) => (num(rep.mu_s.mean), num(rep.mu_s.half_width)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            num(row.axis_value),
            row.system.label().to_string(),
            num(row.result.objective),
            row.feasible().to_string(),
            num(p.beta),
            num(p.f),
            num(p.alpha),
            num(p.omega),
            num(p.gamma),
            num(r.mu_p),
            num(r.lambda_r),
            num(r.mu_r),
            num(r.pi_p),
            num(r.pi_r),
            num(r.nu0),
            sim_mu,
            sim_ci,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::presets::preset;

    fn spec(from: f64, to: f64, step: f64, systems: &str) -> SweepSpec {
        SweepSpec {
            axis: Axis::LambdaP,
            from,
            to,
            step,
            systems: parse_systems(systems).unwrap(),
            grid: GridSpec::new(11).unwrap(),
            sim: SimConfig::new(2, 2_000, 1),
        }
    }

    #[test]
    fn values_include_endpoint() {
        let v = spec(0.0, 0.3, 0.05, "S3").values();
        assert_eq!(v.len(), 7);
        assert_eq!(v[6], 0.3);
        assert!(spec(0.4, 0.3, 0.05, "S3").values().is_empty());
    }

    #[test]
    fn empty_range_gives_header_only() {
        let s = preset("fig2").unwrap().scenario;
        let rows = run_sweep(&s, &spec(0.5, 0.1, 0.1, "S2,S3")).unwrap();
        assert!(rows.is_empty());
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn rows_follow_sweep_order() {
        let s = preset("fig2").unwrap().scenario;
        let rows = run_sweep(&s, &spec(0.0, 0.4, 0.1, "S3,S2")).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0].system, Evaluated::Bound(System::S3));
        assert_eq!(rows[1].system, Evaluated::Bound(System::S2));
        assert!(rows.windows(2).all(|w| w[0].axis_value <= w[1].axis_value));
        assert!(!rows.last().unwrap().feasible());
    }

    #[test]
    fn sim_rows_carry_interval() {
        let s = preset("fig2").unwrap().scenario;
        let rows = run_sweep(&s, &spec(0.1, 0.1, 0.1, "SIM")).unwrap();
        let sim = rows[0].sim.as_ref().unwrap();
        assert!(sim.mu_s.half_width.is_finite());
        assert_eq!(rows[0].policy.alpha, 1.0);
    }

    #[test]
    fn bad_specs_rejected() {
        let s = preset("fig2").unwrap().scenario;
        assert!(run_sweep(&s, &spec(0.0, 0.3, 0.0, "S3")).is_err());
        assert!(run_sweep(&s, &spec(0.0, 1.3, 0.5, "S3")).is_err());
        assert!(parse_systems("S3,S9").is_err());
        let mut b = spec(100.0, 200.0, 100.0, "S3");
        b.axis = Axis::Bits;
        assert!(run_sweep(&s, &b).is_err());
    }
}
