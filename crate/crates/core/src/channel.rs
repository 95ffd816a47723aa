//! Per-slot packet success probabilities under Rayleigh block fading.
//!
//! Every link is characterised by its solo success probability `P̄_{jk,i}`
//! (transmitter `j` alone, starting at instant `i`), the reduction factor
//! `δ_{jk,in}` applied when the other user interferes from instant `n`, and
//! the delay ratio `δ̂_{jk} = P̄_{jk,1} / P̄_{jk,0}` for secondary links.
//!
//! A [`ChannelTable`] is built either from a [`PhysicalConfig`] (closed-form
//! outage expressions) or from [`DirectProbabilities`] that list the entries
//! verbatim. The table is immutable once built.

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Slack allowed on identities that hold exactly in closed form.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// A directed data link of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Link {
    /// Primary transmitter to primary destination.
    PdP,
    /// Primary transmitter to the secondary user (relay reception).
    Ps,
    /// Secondary user to its own destination.
    SdS,
    /// Secondary user to the primary destination (relayed packets).
    SdP,
}

impl Link {
    pub const ALL: [Link; 4] = [Link::PdP, Link::Ps, Link::SdS, Link::SdP];

    pub fn key(self) -> &'static str {
        match self {
            Link::PdP => "pd_p",
            Link::Ps => "ps",
            Link::SdS => "sd_s",
            Link::SdP => "sd_p",
        }
    }

    pub fn from_key(key: &str) -> Option<Link> {
        Link::ALL.into_iter().find(|l| l.key() == key)
    }

    /// True when the transmitter is the primary user.
    pub fn is_primary(self) -> bool {
        matches!(self, Link::PdP | Link::Ps)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Instant at which a transmission starts within the slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Start {
    /// `t = 0`, the whole slot is used.
    Zero,
    /// `t = τ`, after the decision interval.
    Tau,
}

impl Start {
    pub const BOTH: [Start; 2] = [Start::Zero, Start::Tau];

    pub fn index(self) -> usize {
        match self {
            Start::Zero => 0,
            Start::Tau => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Start> {
        match i {
            0 => Some(Start::Zero),
            1 => Some(Start::Tau),
            _ => None,
        }
    }
}

/// Noise power at each receiver, in Watts.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisePower {
    pub d_p: f64,
    pub s: f64,
    pub d_s: f64,
}

/// Mean fading power gain of each link that carries data or interference.
///
/// `pd_s` is the interference path from the primary transmitter to the
/// secondary destination; it never carries data.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkGains {
    pub pd_p: f64,
    pub ps: f64,
    pub sd_s: f64,
    pub sd_p: f64,
    pub pd_s: f64,
}

/// Physical description of the network, from which every success
/// probability follows in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    /// Packet size in bits.
    pub bits: f64,
    /// Slot length `T` in seconds.
    pub slot_s: f64,
    /// Channel bandwidth `W` in Hz.
    pub bandwidth_hz: f64,
    /// Decision interval `τ` in seconds, `0 <= τ < T`.
    pub tau_s: f64,
    /// Energy carried by one harvested packet, in Joules.
    pub energy_j: f64,
    /// Primary transmit power in Watts.
    pub p_primary_w: f64,
    pub noise_w: NoisePower,
    pub sigma: LinkGains,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Primary,
    Secondary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Receiver {
    PrimaryDest,
    SecondaryUser,
    SecondaryDest,
}

impl PhysicalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bits", self.bits),
            ("slot_s", self.slot_s),
            ("bandwidth_hz", self.bandwidth_hz),
            ("energy_j", self.energy_j),
            ("p_primary_w", self.p_primary_w),
            ("noise_w.d_p", self.noise_w.d_p),
            ("noise_w.s", self.noise_w.s),
            ("noise_w.d_s", self.noise_w.d_s),
            ("sigma.pd_p", self.sigma.pd_p),
            ("sigma.ps", self.sigma.ps),
            ("sigma.sd_s", self.sigma.sd_s),
            ("sigma.sd_p", self.sigma.sd_p),
            ("sigma.pd_s", self.sigma.pd_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.tau_s.is_finite() && self.tau_s >= 0.0 && self.tau_s < self.slot_s) {
            return Err(Error::config(
                "tau_s",
                format!("must satisfy 0 <= tau < T = {}, got {}", self.slot_s, self.tau_s),
            ));
        }
        Ok(())
    }

    /// `τ / T`.
    pub fn tau_fraction(&self) -> f64 {
        self.tau_s / self.slot_s
    }

    fn airtime(&self, node: Node, start: Start) -> f64 {
        match node {
            Node::Primary => self.slot_s,
            Node::Secondary => self.slot_s - start.index() as f64 * self.tau_s,
        }
    }

    /// Spectral efficiency `B / (W T_j^{(i)})` in bits/s/Hz.
    fn spectral_efficiency(&self, node: Node, start: Start) -> f64 {
        self.bits / (self.bandwidth_hz * self.airtime(node, start))
    }

    fn tx_power(&self, node: Node, start: Start) -> f64 {
        match node {
            Node::Primary => self.p_primary_w,
            // A fixed energy budget spread over the remaining airtime.
            Node::Secondary => self.energy_j / self.airtime(node, start),
        }
    }

    fn noise(&self, rx: Receiver) -> f64 {
        match rx {
            Receiver::PrimaryDest => self.noise_w.d_p,
            Receiver::SecondaryUser => self.noise_w.s,
            Receiver::SecondaryDest => self.noise_w.d_s,
        }
    }

    fn gain(&self, tx: Node, rx: Receiver) -> Option<f64> {
        match (tx, rx) {
            (Node::Primary, Receiver::PrimaryDest) => Some(self.sigma.pd_p),
            (Node::Primary, Receiver::SecondaryUser) => Some(self.sigma.ps),
            (Node::Primary, Receiver::SecondaryDest) => Some(self.sigma.pd_s),
            (Node::Secondary, Receiver::PrimaryDest) => Some(self.sigma.sd_p),
            (Node::Secondary, Receiver::SecondaryDest) => Some(self.sigma.sd_s),
            (Node::Secondary, Receiver::SecondaryUser) => None,
        }
    }

    /// Received SNR `γ_{jk,i} = P_j^{(i)} / N_k`.
    fn snr(&self, tx: Node, rx: Receiver, start: Start) -> f64 {
        self.tx_power(tx, start) / self.noise(rx)
    }

    /// Mean received SNR `γ σ` of `tx -> rx`.
    fn mean_snr(&self, tx: Node, rx: Receiver, start: Start) -> Option<f64> {
        self.gain(tx, rx).map(|g| self.snr(tx, rx, start) * g)
    }

    /// Parameters of the SINR threshold event for `link` started at `start`,
    /// with the other user as interferer starting at `interferer`.
    ///
    /// Returns the decoding threshold `2^R - 1`, the mean SNR of the wanted
    /// signal and the mean INR of the interferer (`None` for `Ps`, which is
    /// never interfered with).
    pub fn outage_event(
        &self,
        link: Link,
        start: Start,
        interferer: Start,
    ) -> Result<(f64, f64, Option<f64>)> {
        let (tx, rx, other) = endpoints(link);
        check_start(link, start)?;
        let threshold = success_threshold(self.spectral_efficiency(tx, start));
        let wanted = self
            .mean_snr(tx, rx, start)
            .ok_or_else(|| Error::Channel(format!("link {link} has no gain")))?;
        let inr = match other {
            Some(v) => {
                if v == Node::Primary && interferer == Start::Tau {
                    return Err(Error::Channel(format!(
                        "the primary user only starts at t = 0; interferer instant 1 invalid for {link}"
                    )));
                }
                self.mean_snr(v, rx, interferer)
            }
            None => None,
        };
        Ok((threshold, wanted, inr))
    }
}

fn endpoints(link: Link) -> (Node, Receiver, Option<Node>) {
    match link {
        Link::PdP => (Node::Primary, Receiver::PrimaryDest, Some(Node::Secondary)),
        Link::Ps => (Node::Primary, Receiver::SecondaryUser, None),
        Link::SdS => (Node::Secondary, Receiver::SecondaryDest, Some(Node::Primary)),
        Link::SdP => (Node::Secondary, Receiver::PrimaryDest, Some(Node::Primary)),
    }
}

fn check_start(link: Link, start: Start) -> Result<()> {
    if link.is_primary() && start == Start::Tau {
        return Err(Error::Channel(format!(
            "the primary user transmits from the start of the slot; start instant 1 invalid for {link}"
        )));
    }
    Ok(())
}

/// Minimum SINR for decoding at spectral efficiency `rate`: `2^rate - 1`.
pub fn success_threshold(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

/// `exp(-(2^R - 1) / (γ σ))`, the probability that a lone transmission is
/// not in outage.
pub fn solo_success_prob(threshold: f64, mean_snr: f64) -> Result<f64> {
    if !(mean_snr > 0.0) {
        return Err(Error::Channel(format!("mean SNR must be > 0, got {mean_snr}")));
    }
    Ok((-threshold / mean_snr).exp())
}

/// `1 / (1 + (2^R - 1) γ_v σ_v / (γ_j σ_j))`, the factor by which an
/// interferer of mean INR `interferer` scales the solo success probability.
pub fn interference_factor(threshold: f64, mean_snr: f64, interferer: f64) -> Result<f64> {
    if !(mean_snr > 0.0) {
        return Err(Error::Channel(format!("mean SNR must be > 0, got {mean_snr}")));
    }
    if interferer < 0.0 {
        return Err(Error::Channel(format!("interferer power must be >= 0, got {interferer}")));
    }
    Ok(1.0 / (1.0 + threshold * interferer / mean_snr))
}

/// `(1 + a) / (1 + a / (1 - τ/T))`.
pub fn rho_from_parts(a: f64, tau_fraction: f64) -> f64 {
    (1.0 + a) / (1.0 + a / (1.0 - tau_fraction))
}

/// Solo success probability `P̄_{jk,i}` of `link` starting at `start`.
pub fn solo_success(cfg: &PhysicalConfig, link: Link, start: Start) -> Result<f64> {
    let (threshold, wanted, _) = cfg.outage_event(link, start, Start::Zero)?;
    solo_success_prob(threshold, wanted)
}

/// Interference reduction `δ_{jk,in}` for `link` started at `start` while
/// the other user transmits from `interferer`.
///
/// Secondary links are only ever interfered with by the primary user at
/// `n = 0`; the primary data link may see the secondary user at either
/// instant; `Ps` is never interfered with.
pub fn interference_reduction(
    cfg: &PhysicalConfig,
    link: Link,
    start: Start,
    interferer: Start,
) -> Result<f64> {
    let (threshold, wanted, inr) = cfg.outage_event(link, start, interferer)?;
    let inr = inr.ok_or_else(|| {
        Error::Channel(format!("link {link} never transmits under interference"))
    })?;
    interference_factor(threshold, wanted, inr)
}

/// Ratio `δ_{pd_p,01} / δ_{pd_p,00}`: how much a delayed secondary access
/// degrades the primary link relative to an immediate one.
pub fn rho_ratio(cfg: &PhysicalConfig) -> f64 {
    let threshold = success_threshold(cfg.spectral_efficiency(Node::Primary, Start::Zero));
    let su = cfg.snr(Node::Secondary, Receiver::PrimaryDest, Start::Zero) * cfg.sigma.sd_p;
    let pu = cfg.snr(Node::Primary, Receiver::PrimaryDest, Start::Zero) * cfg.sigma.pd_p;
    rho_from_parts(threshold * su / pu, cfg.tau_fraction())
}

/// Probabilities of one secondary link (`sd_s` or `sd_p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondaryLink {
    /// `P̄_{sk,0}`, `P̄_{sk,1}`.
    pub pbar: [f64; 2],
    /// `δ_{sk,00}`, `δ_{sk,10}`: primary interferes, secondary starts at 0 / τ.
    pub delta: [f64; 2],
    /// `δ̂_{sk}`.
    pub dhat: f64,
}

impl SecondaryLink {
    /// Success probability from `start`, with or without the primary active.
    pub fn success(&self, start: Start, primary_active: bool) -> f64 {
        let i = start.index();
        if primary_active {
            self.pbar[i] * self.delta[i]
        } else {
            self.pbar[i]
        }
    }
}

/// Immutable set of success probabilities consumed by the rate equations
/// and the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTable {
    pd_p: f64,
    /// `δ_{pd_p,00}`, `δ_{pd_p,01}`.
    pd_p_delta: [f64; 2],
    ps: f64,
    sd_s: SecondaryLink,
    sd_p: SecondaryLink,
}

/// Where a [`ChannelTable`] comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Physical(PhysicalConfig),
    Direct(DirectProbabilities),
}

impl ChannelTable {
    pub fn build(source: &ChannelSource) -> Result<Self> {
        match source {
            ChannelSource::Physical(cfg) => Self::from_physical(cfg),
            ChannelSource::Direct(d) => Self::from_direct(d),
        }
    }

    pub fn from_physical(cfg: &PhysicalConfig) -> Result<Self> {
        cfg.validate()?;
        let secondary = |link: Link| -> Result<SecondaryLink> {
            let p0 = solo_success(cfg, link, Start::Zero)?;
            let p1 = solo_success(cfg, link, Start::Tau)?;
            Ok(SecondaryLink {
                pbar: [p0, p1],
                delta: [
                    interference_reduction(cfg, link, Start::Zero, Start::Zero)?,
                    interference_reduction(cfg, link, Start::Tau, Start::Zero)?,
                ],
                dhat: if p0 > 0.0 { p1 / p0 } else { 0.0 },
            })
        };
        let table = ChannelTable {
            pd_p: solo_success(cfg, Link::PdP, Start::Zero)?,
            pd_p_delta: [
                interference_reduction(cfg, Link::PdP, Start::Zero, Start::Zero)?,
                interference_reduction(cfg, Link::PdP, Start::Zero, Start::Tau)?,
            ],
            ps: solo_success(cfg, Link::Ps, Start::Zero)?,
            sd_s: secondary(Link::SdS)?,
            sd_p: secondary(Link::SdP)?,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn from_direct(d: &DirectProbabilities) -> Result<Self> {
        d.check_keys()?;
        let secondary = |link: Link| -> Result<SecondaryLink> {
            let p0 = d.require(&pbar_key(link, Start::Zero))?;
            let p1_key = pbar_key(link, Start::Tau);
            let dhat_key = dhat_key(link);
            let (p1, dhat) = match (d.get(&p1_key), d.get(&dhat_key)) {
                (Some(p1), Some(dhat)) => {
                    if (dhat * p0 - p1).abs() > CONSISTENCY_TOL {
                        return Err(Error::config(
                            dhat_key,
                            format!("{dhat} * {p0} disagrees with {p1_key} = {p1}"),
                        ));
                    }
                    (p1, dhat)
                }
                (None, Some(dhat)) => (dhat * p0, dhat),
                (Some(p1), None) => {
                    if p0 <= 0.0 {
                        return Err(Error::config(
                            dhat_key,
                            "delay ratio is undefined when the t = 0 success probability is 0; give it explicitly",
                        ));
                    }
                    (p1, p1 / p0)
                }
                (None, None) => {
                    return Err(Error::config(dhat_key, format!("missing (or give {p1_key})")));
                }
            };
            Ok(SecondaryLink {
                pbar: [p0, p1],
                delta: [
                    d.require(&delta_key(link, Start::Zero, Start::Zero))?,
                    d.require(&delta_key(link, Start::Tau, Start::Zero))?,
                ],
                dhat,
            })
        };
        let table = ChannelTable {
            pd_p: d.require(&pbar_key(Link::PdP, Start::Zero))?,
            pd_p_delta: [
                d.require(&delta_key(Link::PdP, Start::Zero, Start::Zero))?,
                d.require(&delta_key(Link::PdP, Start::Zero, Start::Tau))?,
            ],
            ps: d.require(&pbar_key(Link::Ps, Start::Zero))?,
            sd_s: secondary(Link::SdS)?,
            sd_p: secondary(Link::SdP)?,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let unit = |key: String, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("must lie in [0, 1], got {v}")));
            }
            Ok(())
        };
        unit(pbar_key(Link::PdP, Start::Zero), self.pd_p)?;
        unit(pbar_key(Link::Ps, Start::Zero), self.ps)?;
        for n in Start::BOTH {
            unit(delta_key(Link::PdP, Start::Zero, n), self.pd_p_delta[n.index()])?;
        }
        for (link, s) in [(Link::SdS, &self.sd_s), (Link::SdP, &self.sd_p)] {
            for i in Start::BOTH {
                unit(pbar_key(link, i), s.pbar[i.index()])?;
                unit(delta_key(link, i, Start::Zero), s.delta[i.index()])?;
            }
            unit(dhat_key(link), s.dhat)?;
            if s.pbar[1] > s.pbar[0] + CONSISTENCY_TOL {
                return Err(Error::config(
                    pbar_key(link, Start::Tau),
                    format!(
                        "delayed access cannot succeed more often than immediate access ({} > {})",
                        s.pbar[1], s.pbar[0]
                    ),
                ));
            }
            if (s.dhat * s.pbar[0] - s.pbar[1]).abs() > CONSISTENCY_TOL {
                return Err(Error::config(dhat_key(link), "inconsistent with the success pair"));
            }
        }
        Ok(())
    }

    /// `P̄_{pd_p,0}`.
    pub fn pd_p(&self) -> f64 {
        self.pd_p
    }

    /// `δ_{pd_p,0n}` with the secondary user starting at `n`.
    pub fn pd_p_delta(&self, interferer: Start) -> f64 {
        self.pd_p_delta[interferer.index()]
    }

    /// `P̄_{ps,0}`.
    pub fn ps(&self) -> f64 {
        self.ps
    }

    pub fn sd_s(&self) -> &SecondaryLink {
        &self.sd_s
    }

    pub fn sd_p(&self) -> &SecondaryLink {
        &self.sd_p
    }

    /// Probability that the primary destination fails while the secondary
    /// user decodes the same packet: `P_{pd_p,0} P̄_{ps,0}`.
    pub fn relay_capture(&self) -> f64 {
        (1.0 - self.pd_p) * self.ps
    }

    /// Primary success probability given the secondary user's behaviour.
    pub fn primary_success(&self, su_start: Option<Start>) -> f64 {
        match su_start {
            None => self.pd_p,
            Some(n) => self.pd_p * self.pd_p_delta(n),
        }
    }

    /// Generic lookup of `P̄_{jk,i}`; `None` for combinations that do not exist.
    pub fn solo(&self, link: Link, start: Start) -> Option<f64> {
        match (link, start) {
            (Link::PdP, Start::Zero) => Some(self.pd_p),
            (Link::Ps, Start::Zero) => Some(self.ps),
            (Link::SdS, i) => Some(self.sd_s.pbar[i.index()]),
            (Link::SdP, i) => Some(self.sd_p.pbar[i.index()]),
            _ => None,
        }
    }

    /// Generic lookup of `δ_{jk,in}`; `None` for combinations that do not exist.
    pub fn delta(&self, link: Link, start: Start, interferer: Start) -> Option<f64> {
        match (link, start, interferer) {
            (Link::PdP, Start::Zero, n) => Some(self.pd_p_delta[n.index()]),
            (Link::SdS, i, Start::Zero) => Some(self.sd_s.delta[i.index()]),
            (Link::SdP, i, Start::Zero) => Some(self.sd_p.delta[i.index()]),
            _ => None,
        }
    }

    /// Generic lookup of `δ̂_{jk}` (secondary links only).
    pub fn dhat(&self, link: Link) -> Option<f64> {
        match link {
            Link::SdS => Some(self.sd_s.dhat),
            Link::SdP => Some(self.sd_p.dhat),
            _ => None,
        }
    }

    /// Flattened view using the same keys as [`DirectProbabilities`].
    pub fn to_direct(&self) -> DirectProbabilities {
        let mut d = DirectProbabilities::default();
        for link in Link::ALL {
            for i in Start::BOTH {
                if let Some(v) = self.solo(link, i) {
                    d.set(pbar_key(link, i), v);
                }
                for n in Start::BOTH {
                    if let Some(v) = self.delta(link, i, n) {
                        d.set(delta_key(link, i, n), v);
                    }
                }
            }
            if let Some(v) = self.dhat(link) {
                d.set(dhat_key(link), v);
            }
        }
        d
    }
}

pub fn pbar_key(link: Link, start: Start) -> String {
    format!("pbar.{}.{}", link.key(), start.index())
}

pub fn delta_key(link: Link, start: Start, interferer: Start) -> String {
    format!("delta.{}.{}{}", link.key(), start.index(), interferer.index())
}

pub fn dhat_key(link: Link) -> String {
    format!("dhat.{}", link.key())
}

/// Success probabilities given verbatim, keyed as `pbar.<link>.<i>`,
/// `delta.<link>.<i><n>` and `dhat.<link>`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectProbabilities {
    entries: BTreeMap<String, f64>,
}

impl DirectProbabilities {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.entries.insert(key.into(), value);
        self
    }

    pub fn with(mut self, key: impl Into<String>, value: f64) -> Self {
        self.set(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    fn require(&self, key: &str) -> Result<f64> {
        self.get(key).ok_or_else(|| Error::config(key, "missing"))
    }

    /// Rejects keys that name no entry of the table.
    fn check_keys(&self) -> Result<()> {
        for key in self.entries.keys() {
            if !is_table_key(key) {
                return Err(Error::config(key.clone(), "not a channel table entry"));
            }
        }
        Ok(())
    }
}

/// Every key a [`DirectProbabilities`] may carry.
pub fn table_keys() -> Vec<String> {
    let mut keys = vec![
        pbar_key(Link::PdP, Start::Zero),
        pbar_key(Link::Ps, Start::Zero),
        delta_key(Link::PdP, Start::Zero, Start::Zero),
        delta_key(Link::PdP, Start::Zero, Start::Tau),
    ];
    for link in [Link::SdS, Link::SdP] {
        for i in Start::BOTH {
            keys.push(pbar_key(link, i));
            keys.push(delta_key(link, i, Start::Zero));
        }
        keys.push(dhat_key(link));
    }
    keys
}

fn is_table_key(key: &str) -> bool {
    table_keys().iter().any(|k| k == key)
}
