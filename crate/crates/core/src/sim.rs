//! Slot-level Monte Carlo simulation of the relaying protocol.
//!
//! Each slot runs, in order: Bernoulli arrivals, the primary transmission,
//! the secondary decision tree, queue selection, independent channel draws
//! and packet dispositions. Queue states seen by the decision are taken
//! after the arrivals of the same slot; packets admitted to the relaying
//! queue can only be served from the next slot on.
//!
//! Rate estimators mirror the analytic quantities: `μ_p`, `μ_r` and `μ_e`
//! are services per slot in which the queue was nonempty at decision time,
//! `μ_s` and `λ_r` are per slot.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::channel::{ChannelTable, Start};
use crate::error::{Error, Result};
use crate::rates::PolicyParams;

pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
pub const DEFAULT_BLOWUP_THRESHOLD: u64 = 100_000;

/// Which system a replica simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    /// The real protocol.
    Original,
    /// Primary user always transmits, dummy packets when its queue is empty.
    S1,
    /// One energy packet drained per slot.
    S2,
    /// Energy queue never empty.
    S3,
}

/// The dominated systems accepted by [`run_dominated`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    S1,
    S2,
    S3,
}

impl From<Variant> for Mode {
    fn from(v: Variant) -> Mode {
        match v {
            Variant::S1 => Mode::S1,
            Variant::S2 => Mode::S2,
            Variant::S3 => Mode::S3,
        }
    }
}

/// Per-slot arrival probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arrivals {
    pub lambda_p: f64,
    pub lambda_e: f64,
}

impl Arrivals {
    pub fn new(lambda_p: f64, lambda_e: f64) -> Result<Self> {
        for (name, v) in [("lambda_p", lambda_p), ("lambda_e", lambda_e)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { lambda_p, lambda_e })
    }
}

/// Queue lengths and random stream of one replica. The secondary data
/// queue is saturated and not tracked.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub q_p: u64,
    pub q_r: u64,
    pub q_e: u64,
    pub slot: u64,
    rng: ChaCha8Rng,
}

impl NetworkState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            q_p: 0,
            q_r: 0,
            q_e: 0,
            slot: 0,
            rng,
        }
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Action {
    AccessZero,
    AccessTau,
    Receive,
    Idle,
}

impl Action {
    pub fn start(self) -> Option<Start> {
        match self {
            Action::AccessZero => Some(Start::Zero),
            Action::AccessTau => Some(Start::Tau),
            Action::Receive | Action::Idle => None,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Action::AccessZero => "access0",
            Action::AccessTau => "access_tau",
            Action::Receive => "receive",
            Action::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QueueUsed {
    Own,
    Relay,
    None,
}

/// Outcome of a channel draw; `None` when the link was not exercised.
pub type Draw = Option<bool>;

/// Everything that happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotTrace {
    pub slot: u64,
    pub primary_arrival: bool,
    pub energy_arrival: bool,
    /// The primary user transmitted (possibly a dummy packet).
    pub pu_active: bool,
    /// The transmitted primary packet was a dummy.
    pub dummy: bool,
    /// Energy available at decision time.
    pub energy: bool,
    /// Relaying queue nonempty at decision time.
    pub relay_backlog: bool,
    pub action: Action,
    pub queue: QueueUsed,
    pub pd_p: Draw,
    pub ps: Draw,
    pub sd_s: Draw,
    pub sd_p: Draw,
    pub primary_delivered: bool,
    pub admitted: bool,
    pub relay_delivered: bool,
    pub own_delivered: bool,
    pub energy_used: bool,
    pub q_p: u64,
    pub q_r: u64,
    pub q_e: u64,
}

impl SlotTrace {
    pub fn transmits(&self) -> bool {
        self.action.start().is_some()
    }
}

fn draw_label(d: Draw) -> &'static str {
    match d {
        None => "-",
        Some(true) => "1",
        Some(false) => "0",
    }
}

impl fmt::Display for SlotTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let queue = match self.queue {
            QueueUsed::Own => "own",
            QueueUsed::Relay => "relay",
            QueueUsed::None => "none",
        };
        write!(
            f,
            "slot={} pu={} dummy={} su={} queue={} pd_p={} ps={} sd_s={} sd_p={} \
             delivered={} admitted={} relayed={} own={} energy_used={} q_p={} q_r={} q_e={}",
            self.slot,
            u8::from(self.pu_active),
            u8::from(self.dummy),
            self.action.label(),
            queue,
            draw_label(self.pd_p),
            draw_label(self.ps),
            draw_label(self.sd_s),
            draw_label(self.sd_p),
            u8::from(self.primary_delivered),
            u8::from(self.admitted),
            u8::from(self.relay_delivered),
            u8::from(self.own_delivered),
            u8::from(self.energy_used),
            self.q_p,
            self.q_r,
            self.q_e,
        )
    }
}

/// Advances `state` by one slot.
pub fn step(
    state: &mut NetworkState,
    table: &ChannelTable,
    pol: &PolicyParams,
    arrivals: Arrivals,
    mode: Mode,
) -> SlotTrace {
    let primary_arrival = state.bernoulli(arrivals.lambda_p);
    let energy_arrival = state.bernoulli(arrivals.lambda_e);
    state.q_p += u64::from(primary_arrival);
    if mode != Mode::S3 {
        state.q_e += u64::from(energy_arrival);
    }

    let real = state.q_p > 0;
    let pu_active = real || mode == Mode::S1;
    let energy = mode == Mode::S3 || state.q_e > 0;
    let relay_backlog = state.q_r > 0;

    let action = if energy {
        if !state.bernoulli(pol.f) {
            Action::AccessZero
        } else if !pu_active {
            Action::AccessTau
        } else if mode == Mode::S1 || state.bernoulli(pol.omega) {
            Action::Receive
        } else {
            Action::AccessTau
        }
    } else if state.bernoulli(pol.alpha) {
        Action::Receive
    } else {
        Action::Idle
    };
    let start = action.start();

    let queue = match start {
        None => QueueUsed::None,
        Some(_) if relay_backlog && state.bernoulli(pol.gamma) => QueueUsed::Relay,
        Some(_) => QueueUsed::Own,
    };

    let pd_p = pu_active.then(|| state.bernoulli(table.primary_success(start)));
    let ps = (pu_active && action == Action::Receive).then(|| state.bernoulli(table.ps()));
    let (mut sd_s, mut sd_p) = (None, None);
    if let Some(i) = start {
        match queue {
            QueueUsed::Relay => sd_p = Some(state.bernoulli(table.sd_p().success(i, pu_active))),
            _ => sd_s = Some(state.bernoulli(table.sd_s().success(i, pu_active))),
        }
    }

    let primary_delivered = pd_p == Some(true);
    let admitted = pd_p == Some(false) && ps == Some(true) && state.bernoulli(pol.beta);
    if real && (primary_delivered || admitted) {
        state.q_p -= 1;
    }
    let relay_delivered = sd_p == Some(true);
    if relay_delivered {
        state.q_r -= 1;
    }
    if admitted {
        state.q_r += 1;
    }
    let own_delivered = sd_s == Some(true);

    let energy_used = match mode {
        Mode::S3 => start.is_some(),
        Mode::S2 => energy,
        Mode::Original | Mode::S1 => start.is_some(),
    };
    match mode {
        Mode::S3 => {}
        Mode::S2 => state.q_e = 0,
        Mode::Original | Mode::S1 => state.q_e -= u64::from(energy_used),
    }

    let trace = SlotTrace {
        slot: state.slot,
        primary_arrival,
        energy_arrival,
        pu_active,
        dummy: pu_active && !real,
        energy,
        relay_backlog,
        action,
        queue,
        pd_p,
        ps,
        sd_s,
        sd_p,
        primary_delivered: real && primary_delivered,
        admitted,
        relay_delivered,
        own_delivered,
        energy_used,
        q_p: state.q_p,
        q_r: state.q_r,
        q_e: state.q_e,
    };
    state.slot += 1;
    trace
}

/// Replication budget and diagnostics of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub replicas: usize,
    pub slots: u64,
    pub seed: u64,
    /// Leading fraction of each replica excluded from the estimates.
    pub warmup_fraction: f64,
    /// Queue length above which a growing queue is reported as unstable.
    pub blowup_threshold: u64,
}

impl SimConfig {
    pub fn new(replicas: usize, slots: u64, seed: u64) -> Self {
        Self {
            replicas,
            slots,
            seed,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        }
    }

    pub fn warmup_slots(&self) -> u64 {
        (self.slots as f64 * self.warmup_fraction).floor() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::config("replicas", "need at least one replica"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config(
                "warmup_fraction",
                format!("must lie in [0, 1), got {}", self.warmup_fraction),
            ));
        }
        if self.slots <= self.warmup_slots() {
            return Err(Error::config("slots", "no slots left after warm-up"));
        }
        Ok(())
    }
}

/// Integer bookkeeping of one replica over the whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlowCounts {
    pub primary_arrivals: u64,
    pub primary_direct: u64,
    pub primary_admitted: u64,
    pub dummy_admitted: u64,
    pub relay_delivered: u64,
    pub energy_arrivals: u64,
    pub energy_used: u64,
    pub transmissions: u64,
}

impl FlowCounts {
    fn record(&mut self, t: &SlotTrace) {
        self.primary_arrivals += u64::from(t.primary_arrival);
        self.primary_direct += u64::from(t.primary_delivered);
        self.primary_admitted += u64::from(t.admitted && !t.dummy);
        self.dummy_admitted += u64::from(t.admitted && t.dummy);
        self.relay_delivered += u64::from(t.relay_delivered);
        self.energy_arrivals += u64::from(t.energy_arrival);
        self.energy_used += u64::from(t.energy_used);
        self.transmissions += u64::from(t.transmits());
    }

    /// Every packet that entered a queue either left it or is still there.
    pub fn reconciles(&self, state: &NetworkState, mode: Mode) -> bool {
        let primary = self.primary_arrivals == self.primary_direct + self.primary_admitted + state.q_p;
        let relay = self.primary_admitted + self.dummy_admitted == self.relay_delivered + state.q_r;
        let energy = mode == Mode::S3 || self.energy_arrivals == self.energy_used + state.q_e;
        primary && relay && energy
    }
}

/// Counts over the measured (post warm-up) slots of one replica.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
struct Tally {
    slots: u64,
    pu_active: u64,
    primary_served: u64,
    relay_busy: u64,
    relay_served: u64,
    energy_busy: u64,
    energy_used: u64,
    admitted: u64,
    own_delivered: u64,
    sum_q_p: f64,
    sum_q_r: f64,
    sum_q_e: f64,
}

impl Tally {
    fn record(&mut self, t: &SlotTrace) {
        self.slots += 1;
        self.pu_active += u64::from(t.pu_active);
        self.primary_served += u64::from(t.pd_p == Some(true) || t.admitted);
        self.relay_busy += u64::from(t.relay_backlog);
        self.relay_served += u64::from(t.relay_delivered);
        self.energy_busy += u64::from(t.energy);
        self.energy_used += u64::from(t.energy_used);
        self.admitted += u64::from(t.admitted);
        self.own_delivered += u64::from(t.own_delivered);
        self.sum_q_p += t.q_p as f64;
        self.sum_q_r += t.q_r as f64;
        self.sum_q_e += t.q_e as f64;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Estimates of one replica; conditional rates are `None` when their
/// conditioning event never occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicaResult {
    pub mu_s: f64,
    pub mu_p: Option<f64>,
    pub mu_r: Option<f64>,
    pub mu_e: Option<f64>,
    pub lambda_r: f64,
    pub nu0: f64,
    pub pi_p: f64,
    pub pi_r: f64,
    pub primary_throughput: f64,
    pub relay_throughput: f64,
    pub mean_q_p: f64,
    pub mean_q_r: f64,
    pub mean_q_e: f64,
    pub unstable: bool,
    pub flows: FlowCounts,
    pub conserved: bool,
}

/// Mean across replicas with a 95 % Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    /// Replicas that produced a value.
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                half_width: f64::NAN,
                samples: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Estimate {
                mean,
                half_width: f64::INFINITY,
                samples: n,
            };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        Estimate {
            mean,
            half_width: t * (var / n as f64).sqrt(),
            samples: n,
        }
    }

    /// `|mean - target| <= k` half-widths.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub mode: Mode,
    pub mu_s: Estimate,
    pub mu_p: Estimate,
    pub mu_r: Estimate,
    pub mu_e: Estimate,
    pub lambda_r: Estimate,
    pub nu0: Estimate,
    pub pi_p: Estimate,
    pub pi_r: Estimate,
    /// Real primary packets delivered directly or by relay, per slot.
    pub primary_throughput: Estimate,
    pub relay_throughput: Estimate,
    pub mean_q_p: Estimate,
    pub mean_q_r: Estimate,
    pub mean_q_e: Estimate,
    /// Replicas whose primary or relaying queue diverged.
    pub unstable_replicas: usize,
    pub replicas: Vec<ReplicaResult>,
}

impl SimReport {
    pub fn empirically_stable(&self) -> bool {
        self.unstable_replicas == 0
    }

    pub fn conserved(&self) -> bool {
        self.replicas.iter().all(|r| r.conserved)
    }
}

/// Runs one replica, feeding every slot to `observe`.
pub fn run_replica<F>(
    mode: Mode,
    table: &ChannelTable,
    pol: &PolicyParams,
    arrivals: Arrivals,
    cfg: &SimConfig,
    replica: u64,
    mut observe: F,
) -> ReplicaResult
where
    F: FnMut(&SlotTrace),
{
    let mut state = NetworkState::new(cfg.seed, replica);
    let warmup = cfg.warmup_slots();
    let half = cfg.slots / 2;
    let mut flows = FlowCounts::default();
    let mut tally = Tally::default();
    let (mut mid_p, mut mid_r) = (0, 0);
    for _ in 0..cfg.slots {
        let t = step(&mut state, table, pol, arrivals, mode);
        flows.record(&t);
        if t.slot >= warmup {
            tally.record(&t);
        }
        if t.slot + 1 == half {
            (mid_p, mid_r) = (state.q_p, state.q_r);
        }
        observe(&t);
    }

    let limit = cfg.blowup_threshold;
    let unstable = (state.q_p > limit && state.q_p > mid_p) || (state.q_r > limit && state.q_r > mid_r);
    let slots = tally.slots as f64;
    // Real primary packets leaving the relaying queue are not told apart
    // from dummies, so relayed throughput is scaled by the real share.
    let admitted_total = flows.primary_admitted + flows.dummy_admitted;
    let real_share = if admitted_total == 0 {
        0.0
    } else {
        flows.primary_admitted as f64 / admitted_total as f64
    };
    let relay_throughput = tally.relay_served as f64 / slots;
    let pu_den = tally.pu_active;
    ReplicaResult {
        mu_s: tally.own_delivered as f64 / slots,
        mu_p: ratio(tally.primary_served, pu_den),
        mu_r: ratio(tally.relay_served, tally.relay_busy),
        mu_e: ratio(tally.energy_used, tally.energy_busy),
        lambda_r: tally.admitted as f64 / slots,
        nu0: 1.0 - tally.energy_busy as f64 / slots,
        pi_p: pu_den as f64 / slots,
        pi_r: tally.relay_busy as f64 / slots,
        primary_throughput: flows.primary_direct as f64 / cfg.slots as f64
            + real_share * flows.relay_delivered as f64 / cfg.slots as f64,
        relay_throughput,
        mean_q_p: tally.sum_q_p / slots,
        mean_q_r: tally.sum_q_r / slots,
        mean_q_e: tally.sum_q_e / slots,
        unstable,
        conserved: flows.reconciles(&state, mode),
        flows,
    }
}

fn simulate(
    mode: Mode,
    table: &ChannelTable,
    pol: &PolicyParams,
    arrivals: Arrivals,
    cfg: &SimConfig,
) -> Result<SimReport> {
    cfg.validate()?;
    pol.validate()?;
    let replicas: Vec<ReplicaResult> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|k| run_replica(mode, table, pol, arrivals, cfg, k, |_| {}))
        .collect();

    let est = |f: &dyn Fn(&ReplicaResult) -> Option<f64>| {
        let xs: Vec<f64> = replicas.iter().filter_map(f).collect();
        Estimate::from_samples(&xs)
    };
    Ok(SimReport {
        mode,
        mu_s: est(&|r| Some(r.mu_s)),
        mu_p: est(&|r| r.mu_p),
        mu_r: est(&|r| r.mu_r),
        mu_e: est(&|r| r.mu_e),
        lambda_r: est(&|r| Some(r.lambda_r)),
        nu0: est(&|r| Some(r.nu0)),
        pi_p: est(&|r| Some(r.pi_p)),
        pi_r: est(&|r| Some(r.pi_r)),
        primary_throughput: est(&|r| Some(r.primary_throughput)),
        relay_throughput: est(&|r| Some(r.relay_throughput)),
        mean_q_p: est(&|r| Some(r.mean_q_p)),
        mean_q_r: est(&|r| Some(r.mean_q_r)),
        mean_q_e: est(&|r| Some(r.mean_q_e)),
        unstable_replicas: replicas.iter().filter(|r| r.unstable).count(),
        replicas,
    })
}

/// Simulates the real protocol.
pub fn run(table: &ChannelTable, pol: &PolicyParams, arrivals: Arrivals, cfg: &SimConfig) -> Result<SimReport> {
    simulate(Mode::Original, table, pol, arrivals, cfg)
}

/// Simulates one of the dominated systems.
pub fn run_dominated(
    variant: Variant,
    table: &ChannelTable,
    pol: &PolicyParams,
    arrivals: Arrivals,
    cfg: &SimConfig,
) -> Result<SimReport> {
    simulate(variant.into(), table, pol, arrivals, cfg)
}

/// Writes one line per slot of replica `replica` to `out`.
pub fn write_trace<W: Write>(
    mode: Mode,
    table: &ChannelTable,
    pol: &PolicyParams,
    arrivals: Arrivals,
    cfg: &SimConfig,
    replica: u64,
    out: &mut W,
) -> Result<ReplicaResult> {
    cfg.validate()?;
    let mut err = None;
    let result = run_replica(mode, table, pol, arrivals, cfg, replica, |t| {
        if err.is_none() {
            if let Err(e) = writeln!(out, "{t}") {
                err = Some(e);
            }
        }
    });
    match err {
        Some(e) => Err(e.into()),
        None => Ok(result),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DirectProbabilities;

    fn table(p: f64) -> ChannelTable {
        let mut d = DirectProbabilities::new()
            .with("pbar.pd_p.0", p)
            .with("pbar.ps.0", p)
            .with("pbar.sd_s.0", p)
            .with("pbar.sd_p.0", p)
            .with("dhat.sd_s", 1.0)
            .with("dhat.sd_p", 1.0);
        for k in [
            "delta.pd_p.00",
            "delta.pd_p.01",
            "delta.sd_s.00",
            "delta.sd_s.10",
            "delta.sd_p.00",
            "delta.sd_p.10",
        ] {
            d.set(k, 1.0);
        }
        ChannelTable::from_direct(&d).unwrap()
    }

    fn pol(f: f64, omega: f64, alpha: f64, beta: f64, gamma: f64) -> PolicyParams {
        PolicyParams::new(f, omega, alpha, beta, gamma).unwrap()
    }

    #[test]
    fn no_energy_and_no_alpha_idles() {
        let t = table(0.5);
        let mut s = NetworkState::new(1, 0);
        for _ in 0..200 {
            let tr = step(&mut s, &t, &pol(0.5, 0.5, 0.0, 1.0, 0.5), Arrivals::new(0.3, 0.0).unwrap(), Mode::Original);
            assert_eq!(tr.action, Action::Idle);
            assert!(!tr.admitted);
            assert_eq!(s.q_r, 0);
            assert_eq!(s.q_e, 0);
        }
    }

    #[test]
    fn perfect_channel_never_relays() {
        let t = table(1.0);
        let mut s = NetworkState::new(2, 0);
        s.q_p = 5;
        let arr = Arrivals::new(0.0, 0.5).unwrap();
        for _ in 0..5 {
            let tr = step(&mut s, &t, &pol(1.0, 1.0, 1.0, 1.0, 0.5), arr, Mode::Original);
            assert!(tr.primary_delivered);
            assert!(!tr.admitted);
        }
        assert_eq!(s.q_p, 0);
        assert_eq!(s.q_r, 0);
    }

    #[test]
    fn energy_is_causal() {
        let t = table(0.6);
        let arr = Arrivals::new(0.3, 0.4).unwrap();
        let mut s = NetworkState::new(3, 0);
        let (mut arrived, mut used) = (0u64, 0u64);
        for _ in 0..10_000 {
            let tr = step(&mut s, &t, &pol(0.3, 0.5, 0.5, 0.5, 0.5), arr, Mode::Original);
            arrived += u64::from(tr.energy_arrival);
            used += u64::from(tr.transmits());
            assert!(used <= arrived);
        }
    }

    #[test]
    fn admission_requires_its_conditions() {
        let t = table(0.5);
        let cfg = SimConfig::new(1, 20_000, 9);
        let arr = Arrivals::new(0.3, 0.5).unwrap();
        for mode in [Mode::Original, Mode::S1, Mode::S2, Mode::S3] {
            run_replica(mode, &t, &pol(0.5, 0.5, 0.5, 0.7, 0.5), arr, &cfg, 0, |tr| {
                if tr.admitted {
                    assert_eq!(tr.action, Action::Receive);
                    assert!(tr.pu_active);
                    assert_eq!(tr.pd_p, Some(false));
                    assert_eq!(tr.ps, Some(true));
                }
                assert!(!(tr.sd_s.is_some() && tr.sd_p.is_some()));
            });
        }
    }

    #[test]
    fn saturated_su_alone_hits_solo_success() {
        let t = table(0.7);
        let cfg = SimConfig::new(8, 20_000, 4);
        let r = run_dominated(Variant::S3, &t, &pol(0.0, 0.0, 0.0, 0.0, 0.0), Arrivals::new(0.0, 0.3).unwrap(), &cfg).unwrap();
        assert!(r.mu_s.covers(0.7, 3.0), "{:?}", r.mu_s);
        assert_eq!(r.pi_r.mean, 0.0);
    }

    #[test]
    fn same_seed_same_report() {
        let t = table(0.6);
        let cfg = SimConfig::new(3, 5_000, 11);
        let arr = Arrivals::new(0.2, 0.6).unwrap();
        let p = pol(0.4, 0.6, 0.3, 0.8, 0.4);
        assert_eq!(run(&t, &p, arr, &cfg).unwrap(), run(&t, &p, arr, &cfg).unwrap());
    }

    #[test]
    fn flows_reconcile() {
        let t = table(0.6);
        let cfg = SimConfig::new(4, 10_000, 5);
        let arr = Arrivals::new(0.3, 0.6).unwrap();
        for mode in [Mode::Original, Mode::S1, Mode::S2, Mode::S3] {
            let r = simulate(mode, &t, &pol(0.4, 0.6, 0.3, 0.8, 0.4), arr, &cfg).unwrap();
            assert!(r.conserved(), "{mode:?}");
        }
    }

    #[test]
    fn overload_is_flagged() {
        let t = table(0.2);
        let mut cfg = SimConfig::new(2, 20_000, 6);
        cfg.blowup_threshold = 1_000;
        let r = run(&t, &pol(0.0, 0.0, 0.0, 0.0, 0.0), Arrivals::new(0.9, 0.5).unwrap(), &cfg).unwrap();
        assert_eq!(r.unstable_replicas, 2);
        assert!(!r.empirically_stable());
    }

    #[test]
    fn trace_has_one_line_per_slot() {
        let t = table(0.6);
        let cfg = SimConfig::new(1, 50, 1);
        let mut buf = Vec::new();
        write_trace(Mode::Original, &t, &pol(0.5, 0.5, 0.5, 0.5, 0.5), Arrivals::new(0.3, 0.5).unwrap(), &cfg, 0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 50);
        assert!(text.starts_with("slot=0 "));
    }

    #[test]
    fn bad_budget_rejected() {
        assert!(SimConfig::new(0, 100, 1).validate().is_err());
        let mut c = SimConfig::new(1, 100, 1);
        c.warmup_fraction = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn student_t_half_width() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        // t_{0.975, 2} = 4.302653
        assert!((e.half_width - 4.302653 / 3f64.sqrt()).abs() < 1e-5);
        assert!(Estimate::from_samples(&[]).mean.is_nan());
    }
}
