//! Maximum stable secondary throughput of each dominated system.
//!
//! Every program has the same shape: maximise `μ_s` subject to
//! `λ_r <= μ_r` and `λ_p <= μ_p`. Parameters that admit a closed-form
//! elimination are solved for directly; the rest are searched on a uniform
//! grid over `[0, 1]`.
//!
//! `Γ` is always eliminated. `μ_r` is linear in `Γ` while `λ_r` and `π_p`
//! do not depend on it, and on the feasible side `Γ π_r = λ_r / (μ_r / Γ)`,
//! so `μ_s` is flat for every `Γ` above the smallest stabilising value. The
//! raw `Γ` axis can be searched instead with [`GridSpec::exhaustive_gamma`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelTable, Start};
use crate::error::{Error, Result};
use crate::queue::{energy_empty_prob, BernoulliQueue, STABILITY_TOL};
use crate::rates::{rates_s1, rates_s2, rates_s3, PolicyParams, RateVector};

pub const DEFAULT_GRID_POINTS: usize = 41;

/// Uniform grid of `points` values on `[0, 1]` per searched axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub points: usize,
    /// Search `Γ` on the grid too instead of solving for it.
    pub exhaustive_gamma: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            exhaustive_gamma: false,
        }
    }
}

impl GridSpec {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::config("grid", format!("need at least 2 points per axis, got {points}")));
        }
        Ok(Self {
            points,
            exhaustive_gamma: false,
        })
    }

    pub fn exhaustive(mut self) -> Self {
        self.exhaustive_gamma = true;
        self
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.points - 1) as f64
    }

    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            1.0
        } else {
            k as f64 * self.step()
        }
    }

    /// Halves the step; every point of `self` is also a point of the result.
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * (self.points - 1) + 1,
            ..*self
        }
    }
}

/// The systems whose throughput can be optimised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum System {
    S1,
    S2,
    S3,
    /// Conventional scheme, outer bound (`S3` rates with the pinned policy).
    Conventional,
    /// Conventional scheme, inner bound (`S2` rates with the pinned policy).
    ConventionalInner,
}

impl System {
    pub fn label(self) -> &'static str {
        match self {
            System::S1 => "S1",
            System::S2 => "S2",
            System::S3 => "S3",
            System::Conventional => "SC",
            System::ConventionalInner => "SC_INNER",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(System::S1),
            "S2" => Ok(System::S2),
            "S3" => Ok(System::S3),
            "SC" | "S_C" => Ok(System::Conventional),
            "SC_INNER" => Ok(System::ConventionalInner),
            _ => Err(Error::config("systems", format!("unknown system `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub system: System,
    pub best_policy: PolicyParams,
    pub best_rates: RateVector,
    pub feasible: bool,
    pub grid: GridSpec,
    /// `μ_s*`; zero when infeasible.
    pub objective: f64,
    /// Smallest `max(λ_r - μ_r, λ_p - μ_p)` seen over the grid, each point
    /// taken with its most favourable `α` and `Γ`. Positive iff infeasible.
    pub min_violation: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    objective: f64,
    policy: PolicyParams,
    rates: RateVector,
}

impl Candidate {
    fn key(&self) -> [f64; 5] {
        let p = &self.policy;
        [p.beta, p.f, p.alpha, p.omega, p.gamma]
    }

    /// Higher objective wins; ties go to the lexicographically smallest
    /// `(β, f, α, ω, Γ)`, which makes the reduction order irrelevant.
    fn beats(&self, other: &Candidate) -> bool {
        match self.objective.partial_cmp(&other.objective) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => lex_less(&self.key(), &other.key()),
        }
    }
}

fn lex_less(a: &[f64; 5], b: &[f64; 5]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Less) => return true,
            Some(Ordering::Greater) => return false,
            _ => {}
        }
    }
    false
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    best: Option<Candidate>,
    violation: f64,
}

impl Outcome {
    const EMPTY: Outcome = Outcome {
        best: None,
        violation: f64::INFINITY,
    };

    fn merge(self, other: Outcome) -> Outcome {
        let best = match (self.best, other.best) {
            (Some(a), Some(b)) => Some(if b.beats(&a) { b } else { a }),
            (a, b) => a.or(b),
        };
        Outcome {
            best,
            violation: self.violation.min(other.violation),
        }
    }
}

fn violation(lambda_p: f64, r: &RateVector) -> f64 {
    (r.lambda_r - r.mu_r).max(lambda_p - r.mu_p)
}

/// Visits every point of a `dims`-dimensional grid in parallel.
fn search<F>(grid: &GridSpec, dims: u32, eval: F) -> Result<Outcome>
where
    F: Fn(&[f64]) -> Result<Outcome> + Sync,
{
    let n = grid.points;
    let total = n.checked_pow(dims).ok_or_else(|| Error::config("grid", "too many points"))?;
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut coords = [0.0; 5];
            for c in coords.iter_mut().take(dims as usize).rev() {
                *c = grid.value(idx % n);
                idx /= n;
            }
            eval(&coords[..dims as usize])
        })
        .try_reduce(|| Outcome::EMPTY, |a, b| Ok(a.merge(b)))
}

/// Settles `Γ` for a policy whose other parameters are fixed. `rates` must
/// evaluate the system at the given `Γ`.
fn settle_gamma<R>(grid: &GridSpec, lambda_p: f64, base: PolicyParams, rates: R) -> Result<Outcome>
where
    R: Fn(&PolicyParams) -> Result<RateVector>,
{
    let with = |gamma: f64| PolicyParams { gamma, ..base };
    if grid.exhaustive_gamma {
        let mut out = Outcome::EMPTY;
        for k in 0..grid.points {
            let policy = with(grid.value(k));
            let r = rates(&policy)?;
            let best = r.feasible().then_some(Candidate {
                objective: r.mu_s,
                policy,
                rates: r,
            });
            out = out.merge(Outcome {
                best,
                violation: violation(lambda_p, &r),
            });
        }
        return Ok(out);
    }

    let full = rates(&with(1.0))?;
    let violation = violation(lambda_p, &full);
    let gamma = if !full.stable_p {
        None
    } else if full.lambda_r <= 0.0 {
        Some(0.0)
    } else if full.mu_r <= 0.0 {
        None
    } else {
        let g = full.lambda_r / full.mu_r;
        (g <= 1.0 + STABILITY_TOL).then_some(g.min(1.0))
    };
    let best = match gamma {
        Some(g) => {
            let policy = with(g);
            let r = rates(&policy)?;
            if !r.feasible() {
                return Err(Error::Invariant(format!(
                    "closed-form relay share {g} leaves the relaying queue unstable ({} > {})",
                    r.lambda_r, r.mu_r
                )));
            }
            Some(Candidate {
                objective: r.mu_s,
                policy,
                rates: r,
            })
        }
        None => None,
    };
    Ok(Outcome { best, violation })
}

fn finish(system: System, grid: GridSpec, out: Outcome, fallback: PolicyParams, rates: RateVector) -> OptimizationResult {
    match out.best {
        Some(c) => OptimizationResult {
            system,
            best_policy: c.policy,
            best_rates: c.rates,
            feasible: true,
            grid,
            objective: c.objective,
            min_violation: out.violation,
        },
        None => OptimizationResult {
            system,
            best_policy: fallback,
            best_rates: rates,
            feasible: false,
            grid,
            objective: 0.0,
            min_violation: out.violation,
        },
    }
}

/// Smallest `α` that stabilises the primary queue of `S1` for fixed `f`
/// and `β`; `None` when even `α = 1` does not.
pub fn s1_alpha(table: &ChannelTable, lambda_e: f64, lambda_p: f64, f: f64, beta: f64) -> Result<Option<f64>> {
    let nu0 = energy_empty_prob(BernoulliQueue::new(lambda_e, 1.0 - f)?);
    let (f_bar, nu_bar) = (1.0 - f, 1.0 - nu0);
    let direct = table.pd_p() * ((1.0 - nu_bar * f_bar) + table.pd_p_delta(Start::Zero) * f_bar * nu_bar);
    let capture = table.relay_capture() * beta;
    if lambda_p <= direct + capture * f * nu_bar + STABILITY_TOL {
        return Ok(Some(0.0));
    }
    if nu0 <= 0.0 || capture <= 0.0 {
        return Ok(None);
    }
    let alpha = ((lambda_p - direct) / capture - f * nu_bar) / nu0;
    Ok((alpha <= 1.0 + STABILITY_TOL).then_some(alpha.clamp(0.0, 1.0)))
}

/// Smallest `Γ` that stabilises the relaying queue of `S1`; `None` when
/// even `Γ = 1` does not.
pub fn s1_gamma(table: &ChannelTable, lambda_e: f64, f: f64, beta: f64, alpha: f64) -> Result<Option<f64>> {
    let nu0 = energy_empty_prob(BernoulliQueue::new(lambda_e, 1.0 - f)?);
    let nu_bar = 1.0 - nu0;
    let inflow = table.relay_capture() * (alpha * nu0 + f * nu_bar) * beta;
    if inflow <= 0.0 {
        return Ok(Some(0.0));
    }
    let outflow = table.sd_p().pbar[0] * (1.0 - f) * nu_bar * table.sd_p().delta[0];
    if outflow <= 0.0 {
        return Ok(None);
    }
    let gamma = inflow / outflow;
    Ok((gamma <= 1.0 + STABILITY_TOL).then_some(gamma.min(1.0)))
}

/// `S1`: grid over `(f, β)`, `α` and `Γ` in closed form, `ω = 1`.
pub fn optimize_s1(table: &ChannelTable, lambda_e: f64, lambda_p: f64, grid: GridSpec) -> Result<OptimizationResult> {
    let eval = |c: &[f64]| -> Result<Outcome> {
        let (beta, f) = (c[0], c[1]);
        let alpha = s1_alpha(table, lambda_e, lambda_p, f, beta)?;
        let probe = PolicyParams {
            f,
            omega: 1.0,
            alpha: alpha.unwrap_or(1.0),
            beta,
            gamma: 0.0,
        };
        match alpha {
            None => {
                let r = rates_s1(table, lambda_e, lambda_p, &PolicyParams { gamma: 1.0, ..probe })?;
                Ok(Outcome {
                    best: None,
                    violation: violation(lambda_p, &r),
                })
            }
            Some(_) if grid.exhaustive_gamma => {
                settle_gamma(&grid, lambda_p, probe, |p| rates_s1(table, lambda_e, lambda_p, p))
            }
            Some(alpha) => {
                let full = rates_s1(table, lambda_e, lambda_p, &PolicyParams { gamma: 1.0, ..probe })?;
                let best = match s1_gamma(table, lambda_e, f, beta, alpha)? {
                    Some(gamma) => {
                        let policy = PolicyParams { gamma, ..probe };
                        let r = rates_s1(table, lambda_e, lambda_p, &policy)?;
                        r.feasible().then_some(Candidate {
                            objective: r.mu_s,
                            policy,
                            rates: r,
                        })
                    }
                    None => None,
                };
                Ok(Outcome {
                    best,
                    violation: violation(lambda_p, &full),
                })
            }
        }
    };
    let out = search(&grid, 2, eval)?;
    let fallback = PolicyParams::conventional(1.0);
    let rates = rates_s1(table, lambda_e, lambda_p, &fallback)?;
    Ok(finish(System::S1, grid, out, fallback, rates))
}

/// `S2`: grid over `(β, f, α, ω)`, `Γ` in closed form.
pub fn optimize_s2(table: &ChannelTable, lambda_e: f64, lambda_p: f64, grid: GridSpec) -> Result<OptimizationResult> {
    let eval = |c: &[f64]| -> Result<Outcome> {
        let base = PolicyParams {
            beta: c[0],
            f: c[1],
            alpha: c[2],
            omega: c[3],
            gamma: 0.0,
        };
        settle_gamma(&grid, lambda_p, base, |p| rates_s2(table, lambda_e, lambda_p, p))
    };
    let out = search(&grid, 4, eval)?;
    let fallback = PolicyParams::conventional(1.0);
    let rates = rates_s2(table, lambda_e, lambda_p, &fallback)?;
    Ok(finish(System::S2, grid, out, fallback, rates))
}

/// `S3`: grid over `(β, f, ω)`, `Γ` in closed form; `α` plays no role and
/// is reported as 0.
pub fn optimize_s3(table: &ChannelTable, lambda_p: f64, grid: GridSpec) -> Result<OptimizationResult> {
    let eval = |c: &[f64]| -> Result<Outcome> {
        let base = PolicyParams {
            beta: c[0],
            f: c[1],
            alpha: 0.0,
            omega: c[2],
            gamma: 0.0,
        };
        settle_gamma(&grid, lambda_p, base, |p| rates_s3(table, lambda_p, p))
    };
    let out = search(&grid, 3, eval)?;
    let fallback = PolicyParams {
        alpha: 0.0,
        ..PolicyParams::conventional(1.0)
    };
    let rates = rates_s3(table, lambda_p, &fallback)?;
    Ok(finish(System::S3, grid, out, fallback, rates))
}

/// Conventional scheme with only `Γ` free. `inner` selects the `S2` rates
/// at `lambda_e`; otherwise the `S3` rates (an always-charged user) are used.
pub fn optimize_conventional(
    table: &ChannelTable,
    lambda_e: f64,
    lambda_p: f64,
    grid: GridSpec,
    inner: bool,
) -> Result<OptimizationResult> {
    let rates = |p: &PolicyParams| {
        if inner {
            rates_s2(table, lambda_e, lambda_p, p)
        } else {
            rates_s3(table, lambda_p, p)
        }
    };
    let out = settle_gamma(&grid, lambda_p, PolicyParams::conventional(0.0), rates)?;
    let fallback = PolicyParams::conventional(1.0);
    let system = if inner {
        System::ConventionalInner
    } else {
        System::Conventional
    };
    Ok(finish(system, grid, out, fallback, rates(&fallback)?))
}

/// Dispatches to the optimiser of `system`.
pub fn optimize(
    system: System,
    table: &ChannelTable,
    lambda_e: f64,
    lambda_p: f64,
    grid: GridSpec,
) -> Result<OptimizationResult> {
    match system {
        System::S1 => optimize_s1(table, lambda_e, lambda_p, grid),
        System::S2 => optimize_s2(table, lambda_e, lambda_p, grid),
        System::S3 => optimize_s3(table, lambda_p, grid),
        System::Conventional => optimize_conventional(table, lambda_e, lambda_p, grid, false),
        System::ConventionalInner => optimize_conventional(table, lambda_e, lambda_p, grid, true),
    }
}
