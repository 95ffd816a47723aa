//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use cogrelay::channel::{ChannelTable, DirectProbabilities, LinkGains, NoisePower, PhysicalConfig};
use cogrelay::rates::{rates_s1, rates_s2, rates_s3, PolicyParams, RateVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub const MPR_KEYS: [&str; 6] = [
    "delta.pd_p.00",
    "delta.pd_p.01",
    "delta.sd_s.00",
    "delta.sd_s.10",
    "delta.sd_p.00",
    "delta.sd_p.10",
];

pub fn physical() -> PhysicalConfig {
    PhysicalConfig {
        bits: 1000.0,
        slot_s: 1e-3,
        bandwidth_hz: 1e6,
        tau_s: 1e-4,
        energy_j: 1e-6,
        p_primary_w: 1e-3,
        noise_w: NoisePower {
            d_p: 1e-4,
            s: 1e-4,
            d_s: 1e-4,
        },
        sigma: LinkGains {
            pd_p: 1.0,
            ps: 2.0,
            sd_s: 1.5,
            sd_p: 1.0,
            pd_s: 0.3,
        },
    }
}

/// One SINR threshold event written out from the raw physical parameters.
#[derive(Debug, Clone, Copy)]
pub struct SinrEvent {
    pub name: &'static str,
    pub threshold: f64,
    pub wanted: f64,
    pub interferer: Option<f64>,
}

impl SinrEvent {
    /// Success probability in closed form for Rayleigh fading.
    pub fn exact(&self) -> f64 {
        let solo = (-self.threshold / self.wanted).exp();
        match self.interferer {
            None => solo,
            Some(i) => solo / (1.0 + self.threshold * i / self.wanted),
        }
    }

    /// Fraction of `draws` exponential fade draws that clear the threshold.
    pub fn monte_carlo<R: Rng>(&self, draws: usize, rng: &mut R) -> f64 {
        let mut hits = 0usize;
        for _ in 0..draws {
            let h: f64 = Exp1.sample(rng);
            let signal = self.wanted * h;
            let interference = match self.interferer {
                Some(i) => {
                    let g: f64 = Exp1.sample(rng);
                    i * g
                }
                None => 0.0,
            };
            if signal >= self.threshold * (1.0 + interference) {
                hits += 1;
            }
        }
        hits as f64 / draws as f64
    }
}

/// Every table entry of `cfg` as the success event it stands for, paired
/// with the value read from `table`.
pub fn sinr_events(cfg: &PhysicalConfig, table: &ChannelTable) -> Vec<(SinrEvent, f64)> {
    let t = cfg.slot_s;
    let su_air = [t, t - cfg.tau_s];
    let rate = |air: f64| cfg.bits / (cfg.bandwidth_hz * air);
    let thr = |air: f64| rate(air).exp2() - 1.0;
    let su_snr = |i: usize, noise: f64| cfg.energy_j / su_air[i] / noise;
    let pu_snr = |noise: f64| cfg.p_primary_w / noise;
    let n = &cfg.noise_w;
    let g = &cfg.sigma;

    let mut out = vec![];
    let pd_p = SinrEvent {
        name: "pd_p solo",
        threshold: thr(t),
        wanted: pu_snr(n.d_p) * g.pd_p,
        interferer: None,
    };
    out.push((pd_p, table.pd_p()));
    for (i, name) in [(0, "pd_p vs su@0"), (1, "pd_p vs su@tau")] {
        let e = SinrEvent {
            name,
            interferer: Some(su_snr(i, n.d_p) * g.sd_p),
            ..pd_p
        };
        let start = if i == 0 { cogrelay::channel::Start::Zero } else { cogrelay::channel::Start::Tau };
        out.push((e, table.pd_p() * table.pd_p_delta(start)));
    }
    out.push((
        SinrEvent {
            name: "ps solo",
            threshold: thr(t),
            wanted: pu_snr(n.s) * g.ps,
            interferer: None,
        },
        table.ps(),
    ));
    for (link, noise, gain, pu_gain) in [
        (table.sd_s(), n.d_s, g.sd_s, g.pd_s),
        (table.sd_p(), n.d_p, g.sd_p, g.pd_p),
    ] {
        for i in 0..2 {
            let solo = SinrEvent {
                name: if gain == g.sd_s { "sd_s" } else { "sd_p" },
                threshold: thr(su_air[i]),
                wanted: su_snr(i, noise) * gain,
                interferer: None,
            };
            out.push((solo, link.pbar[i]));
            let busy = SinrEvent {
                interferer: Some(pu_snr(noise) * pu_gain),
                ..solo
            };
            out.push((busy, link.pbar[i] * link.delta[i]));
        }
    }
    out
}

/// Stationary law of the energy queue chain on `0..=n` (reflecting at `n`),
/// from the global balance equations solved by the Thomas algorithm.
///
/// Row 0 is replaced by `π_0 = 1`; the result is normalised afterwards.
pub fn energy_chain_thomas(lambda: f64, mu: f64, n: usize) -> Vec<f64> {
    let up0 = lambda;
    let up = lambda * (1.0 - mu);
    let down = mu * (1.0 - lambda);
    let m = n + 1;
    // (P^T - I) π = 0: row j couples π_{j-1}, π_j, π_{j+1}.
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    b[0] = 1.0;
    d[0] = 1.0;
    for j in 1..m {
        a[j] = if j == 1 { up0 } else { up };
        let out_up = if j == n { 0.0 } else { up };
        b[j] = -(out_up + down);
        c[j] = if j + 1 < m { down } else { 0.0 };
    }
    // Forward sweep.
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for j in 1..m {
        let den = b[j] - a[j] * cp[j - 1];
        cp[j] = c[j] / den;
        dp[j] = (d[j] - a[j] * dp[j - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = dp[m - 1];
    for j in (0..m - 1).rev() {
        x[j] = dp[j] - cp[j] * x[j + 1];
    }
    let total: f64 = x.iter().sum();
    x.iter().map(|v| v / total).collect()
}

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// A random but well-conditioned direct channel table.
pub fn random_table<R: Rng>(rng: &mut R) -> ChannelTable {
    let mut d = DirectProbabilities::new()
        .with("pbar.pd_p.0", uniform(rng, 0.0, 0.8))
        .with("pbar.ps.0", uniform(rng, 0.3, 1.0))
        .with("pbar.sd_s.0", uniform(rng, 0.3, 1.0))
        .with("pbar.sd_p.0", uniform(rng, 0.3, 1.0))
        .with("dhat.sd_s", uniform(rng, 0.4, 1.0))
        .with("dhat.sd_p", uniform(rng, 0.4, 1.0));
    for k in MPR_KEYS {
        d.set(k, uniform(rng, 0.1, 1.0));
    }
    ChannelTable::from_direct(&d).unwrap()
}

pub fn random_policy<R: Rng>(rng: &mut R) -> PolicyParams {
    PolicyParams::new(
        rng.random(),
        rng.random(),
        rng.random(),
        rng.random(),
        rng.random(),
    )
    .unwrap()
}

/// Which dominated system a set of closed forms belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    S1,
    S2,
    S3,
}

pub fn bound_rates(b: Bound, t: &ChannelTable, le: f64, lp: f64, p: &PolicyParams) -> RateVector {
    match b {
        Bound::S1 => rates_s1(t, le, lp, p).unwrap(),
        Bound::S2 => rates_s2(t, le, lp, p).unwrap(),
        Bound::S3 => rates_s3(t, lp, p).unwrap(),
    }
}

/// Plain five-dimensional grid search over every policy parameter.
pub fn brute_force(b: Bound, t: &ChannelTable, le: f64, lp: f64, n: usize) -> Option<(f64, PolicyParams)> {
    let v = |k: usize| k as f64 / (n - 1) as f64;
    let mut best: Option<(f64, PolicyParams)> = None;
    for i in 0..n.pow(5) {
        let k = [i % n, (i / n) % n, (i / n / n) % n, (i / n / n / n) % n, i / n / n / n / n];
        let p = PolicyParams::new(v(k[0]), v(k[1]), v(k[2]), v(k[3]), v(k[4])).unwrap();
        if b == Bound::S1 && p.omega != 1.0 {
            continue;
        }
        let r = bound_rates(b, t, le, lp, &p);
        if r.lambda_r <= r.mu_r + 1e-12 && lp <= r.mu_p + 1e-12 && best.is_none_or(|(m, _)| r.mu_s > m) {
            best = Some((r.mu_s, p));
        }
    }
    best
}
