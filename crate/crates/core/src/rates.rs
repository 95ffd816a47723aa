//! Closed-form mean rates of the dominated systems.
//!
//! * `S1`: the primary user always transmits (dummy packets when its queue
//!   is empty), so the secondary user never finds an idle slot.
//! * `S2`: one energy packet is drained every slot, `μ_e = 1`.
//! * `S3`: the energy queue is never empty.
//!
//! `S1` and `S2` are inner bounds on the secondary throughput of the real
//! protocol, `S3` is an outer bound. Every function here is a single forward
//! pass: `μ_p` never depends on the relaying queue, so the occupancy of the
//! primary queue can be fixed before the relay rates are evaluated.

use serde::Serialize;

use crate::channel::{ChannelTable, Start};
use crate::error::{Error, Result};
use crate::queue::{energy_empty_prob, is_stable, occupancy, BernoulliQueue};

/// The five decision probabilities of the secondary user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyParams {
    /// Receive (rather than access at `t = 0`) when energy is available.
    pub f: f64,
    /// Keep receiving at `t = τ` when the primary user turns out to be busy.
    pub omega: f64,
    /// Receive when the energy queue is empty.
    pub alpha: f64,
    /// Admit a decoded, undelivered primary packet to the relaying queue.
    pub beta: f64,
    /// Serve the relaying queue (when nonempty) rather than the own queue.
    pub gamma: f64,
}

impl PolicyParams {
    pub fn new(f: f64, omega: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            f,
            omega,
            alpha,
            beta,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f", self.f),
            ("omega", self.omega),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// The conventional scheme: always sense for `τ`, relay every decodable
    /// undelivered packet, access only idle slots. Only `Γ` is free.
    pub fn conventional(gamma: f64) -> Self {
        Self {
            f: 1.0,
            omega: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma,
        }
    }
}

/// Which policy parameters a system does not use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Ignored {
    /// `S1` pins `ω = 1`; set when the caller supplied something else.
    pub omega: bool,
    /// `S3` never has an empty energy queue, so `α` never matters.
    pub alpha: bool,
}

/// Mean rates (packets/slot) and occupancy probabilities of one system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateVector {
    pub mu_p: f64,
    pub mu_s: f64,
    pub mu_r: f64,
    /// Energy consumption rate. `S1`: `1 - f`; `S2`: 1; `S3`: `1 - π_p f ω`.
    pub mu_e: f64,
    pub lambda_r: f64,
    pub pi_p: f64,
    pub pi_r: f64,
    /// Probability that the energy queue is empty.
    pub nu0: f64,
    pub stable_p: bool,
    pub stable_r: bool,
    #[serde(skip)]
    pub ignored: Ignored,
}

impl RateVector {
    pub fn feasible(&self) -> bool {
        self.stable_p && self.stable_r
    }
}

fn bar(x: f64) -> f64 {
    1.0 - x
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Backlogged primary user.
pub fn rates_s1(
    table: &ChannelTable,
    lambda_e: f64,
    lambda_p: f64,
    pol: &PolicyParams,
) -> Result<RateVector> {
    check_rate("lambda_e", lambda_e)?;
    check_rate("lambda_p", lambda_p)?;
    pol.validate()?;
    let PolicyParams {
        f,
        alpha,
        beta,
        gamma,
        ..
    } = *pol;

    let mu_e = bar(f);
    let nu0 = energy_empty_prob(BernoulliQueue::new(lambda_e, mu_e)?);
    let has_energy = bar(nu0);
    // Fraction of slots in which the secondary user transmits (from t = 0).
    let access = bar(f) * has_energy;
    let receive = alpha * nu0 + f * has_energy;

    let mu_r = table.sd_p().pbar[0] * gamma * access * table.sd_p().delta[0];
    let lambda_r = table.relay_capture() * receive * beta;
    let relay = occupancy(lambda_r, mu_r);
    let mu_s = table.sd_s().pbar[0]
        * access
        * table.sd_s().delta[0]
        * (bar(gamma) * relay.prob + bar(relay.prob));
    let mu_p = table.pd_p() * ((1.0 - access) + table.pd_p_delta(Start::Zero) * access)
        + table.relay_capture() * receive * beta;

    Ok(RateVector {
        mu_p,
        mu_s,
        mu_r,
        mu_e,
        lambda_r,
        pi_p: 1.0,
        pi_r: relay.prob,
        nu0,
        stable_p: is_stable(lambda_p, mu_p),
        stable_r: relay.stable,
        ignored: Ignored {
            omega: pol.omega != 1.0,
            alpha: false,
        },
    })
}

/// One energy packet drained per slot.
pub fn rates_s2(
    table: &ChannelTable,
    lambda_e: f64,
    lambda_p: f64,
    pol: &PolicyParams,
) -> Result<RateVector> {
    check_rate("lambda_e", lambda_e)?;
    check_rate("lambda_p", lambda_p)?;
    pol.validate()?;
    let PolicyParams {
        f,
        omega,
        alpha,
        beta,
        gamma,
    } = *pol;
    let le = lambda_e;
    let nu0 = bar(le);
    let (sd_s, sd_p) = (table.sd_s(), table.sd_p());

    let mu_p = table.pd_p()
        * ((bar(le) + f * le * omega)
            + le * (table.pd_p_delta(Start::Zero) * bar(f)
                + table.pd_p_delta(Start::Tau) * f * bar(omega)))
        + table.relay_capture() * (alpha * bar(le) + f * le * omega) * beta;
    let primary = occupancy(lambda_p, mu_p);
    let pi_p = primary.prob;

    let mu_r = le
        * sd_p.pbar[0]
        * gamma
        * (bar(f) * (pi_p * sd_p.delta[0] + bar(pi_p))
            + f * sd_p.dhat * (sd_p.delta[1] * bar(omega) * pi_p + bar(pi_p)));
    let lambda_r = table.relay_capture() * (alpha * bar(le) + f * le * omega) * beta * pi_p;
    let relay = occupancy(lambda_r, mu_r);
    let pi_r = relay.prob;

    let mu_s = sd_s.pbar[0]
        * le
        * (bar(f) * (pi_p * sd_s.delta[0] + bar(pi_p))
            + sd_s.dhat * f * (bar(omega) * pi_p * sd_s.delta[1] + bar(pi_p)))
        * (bar(gamma) * pi_r + bar(pi_r));

    Ok(RateVector {
        mu_p,
        mu_s,
        mu_r,
        mu_e: 1.0,
        lambda_r,
        pi_p,
        pi_r,
        nu0,
        stable_p: primary.stable,
        stable_r: relay.stable,
        ignored: Ignored::default(),
    })
}

/// Backlogged energy queue.
pub fn rates_s3(table: &ChannelTable, lambda_p: f64, pol: &PolicyParams) -> Result<RateVector> {
    check_rate("lambda_p", lambda_p)?;
    pol.validate()?;
    let PolicyParams {
        f,
        omega,
        beta,
        gamma,
        ..
    } = *pol;
    let (sd_s, sd_p) = (table.sd_s(), table.sd_p());

    let mu_p = table.pd_p()
        * (f * omega
            + (table.pd_p_delta(Start::Zero) * bar(f)
                + table.pd_p_delta(Start::Tau) * f * bar(omega)))
        + table.relay_capture() * f * omega * beta;
    let primary = occupancy(lambda_p, mu_p);
    let pi_p = primary.prob;

    let mu_r = sd_p.pbar[0]
        * gamma
        * (bar(f) * (pi_p * sd_p.delta[0] + bar(pi_p))
            + f * sd_p.dhat * (bar(omega) * pi_p * sd_p.delta[1] + bar(pi_p)));
    let lambda_r = table.relay_capture() * f * omega * beta * pi_p;
    let relay = occupancy(lambda_r, mu_r);
    let pi_r = relay.prob;

    let mu_s = sd_s.pbar[0]
        * (bar(f) * (pi_p * sd_s.delta[0] + bar(pi_p))
            + f * sd_s.dhat * (bar(omega) * pi_p * sd_s.delta[1] + bar(pi_p)))
        * (bar(gamma) * pi_r + bar(pi_r));

    Ok(RateVector {
        mu_p,
        mu_s,
        mu_r,
        mu_e: 1.0 - pi_p * f * omega,
        lambda_r,
        pi_p,
        pi_r,
        nu0: 0.0,
        stable_p: primary.stable,
        stable_r: relay.stable,
        ignored: Ignored {
            omega: false,
            alpha: true,
        },
    })
}

/// Inner (`S2` at the given `λ_e`) and outer (`S3`) rates of the
/// conventional scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConventionalRates {
    pub inner: RateVector,
    pub outer: RateVector,
}

pub fn rates_conventional(
    table: &ChannelTable,
    lambda_e: f64,
    lambda_p: f64,
    gamma: f64,
) -> Result<ConventionalRates> {
    let pol = PolicyParams::conventional(gamma);
    pol.validate()?;
    Ok(ConventionalRates {
        inner: rates_s2(table, lambda_e, lambda_p, &pol)?,
        outer: rates_s3(table, lambda_p, &pol)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DirectProbabilities;

    fn fig2_table() -> ChannelTable {
        ChannelTable::from_direct(
            &DirectProbabilities::new()
                .with("pbar.pd_p.0", 0.0)
                .with("pbar.ps.0", 0.8)
                .with("pbar.sd_s.0", 0.7)
                .with("pbar.sd_p.0", 0.8)
                .with("dhat.sd_s", 0.7)
                .with("dhat.sd_p", 0.7)
                .with("delta.pd_p.00", 0.0)
                .with("delta.pd_p.01", 0.0)
                .with("delta.sd_s.00", 0.3)
                .with("delta.sd_s.10", 0.2)
                .with("delta.sd_p.00", 0.3)
                .with("delta.sd_p.10", 0.2),
        )
        .unwrap()
    }

    fn mpr_table(x: f64) -> ChannelTable {
        let mut d = DirectProbabilities::new()
            .with("pbar.pd_p.0", 0.6)
            .with("pbar.ps.0", 0.8)
            .with("pbar.sd_s.0", 0.7)
            .with("pbar.sd_p.0", 0.8)
            .with("dhat.sd_s", 0.5)
            .with("dhat.sd_p", 0.5);
        for k in [
            "delta.pd_p.00",
            "delta.pd_p.01",
            "delta.sd_s.00",
            "delta.sd_s.10",
            "delta.sd_p.00",
            "delta.sd_p.10",
        ] {
            d.set(k, x);
        }
        ChannelTable::from_direct(&d).unwrap()
    }

    fn pol(f: f64, omega: f64, alpha: f64, beta: f64, gamma: f64) -> PolicyParams {
        PolicyParams::new(f, omega, alpha, beta, gamma).unwrap()
    }

    #[test]
    fn no_relay_service_flags_instability() {
        let t = fig2_table();
        let r = rates_s1(&t, 0.9, 0.1, &pol(0.5, 1.0, 1.0, 1.0, 0.0)).unwrap();
        assert_eq!(r.mu_r, 0.0);
        assert!(r.lambda_r > 0.0);
        assert!(!r.stable_r);
        assert_eq!(r.pi_r, 1.0);
    }

    #[test]
    fn s1_without_energy_serves_nothing() {
        let t = mpr_table(0.5);
        let r = rates_s1(&t, 0.0, 0.1, &pol(0.3, 1.0, 0.5, 0.5, 0.5)).unwrap();
        assert_eq!(r.nu0, 1.0);
        assert_eq!(r.mu_s, 0.0);
        assert_eq!(r.mu_e, 0.7);
    }

    #[test]
    fn s1_flags_supplied_omega() {
        let t = mpr_table(0.5);
        assert!(rates_s1(&t, 0.5, 0.1, &pol(0.3, 0.2, 0.5, 0.5, 0.5)).unwrap().ignored.omega);
        assert!(!rates_s1(&t, 0.5, 0.1, &pol(0.3, 1.0, 0.5, 0.5, 0.5)).unwrap().ignored.omega);
        assert!(rates_s3(&t, 0.1, &pol(0.3, 0.2, 0.5, 0.5, 0.5)).unwrap().ignored.alpha);
    }

    #[test]
    fn s1_alpha_closed_form_meets_primary_constraint() {
        // α from the primary constraint at equality puts μ_p exactly on λ_p.
        let t = mpr_table(0.4);
        let (le, lp, f, beta) = (0.3, 0.65, 0.5, 1.0);
        let nu0 = 1.0 - le / (1.0 - f);
        let base = t.pd_p() * ((1.0 - (1.0 - nu0) * (1.0 - f)) + t.pd_p_delta(Start::Zero) * (1.0 - f) * (1.0 - nu0));
        let alpha = ((lp - base) / (t.relay_capture() * beta) - f * (1.0 - nu0)) / nu0;
        assert!((0.0..=1.0).contains(&alpha), "alpha = {alpha}");
        let r = rates_s1(&t, le, lp, &pol(f, 1.0, alpha, beta, 1.0)).unwrap();
        assert!((r.mu_p - lp).abs() < 1e-14);
    }

    #[test]
    fn s2_backlogged_energy_removes_empty_terms() {
        let t = mpr_table(0.5);
        let r = rates_s2(&t, 1.0, 0.1, &pol(0.4, 0.6, 0.9, 0.7, 0.3)).unwrap();
        let r0 = rates_s2(&t, 1.0, 0.1, &pol(0.4, 0.6, 0.0, 0.7, 0.3)).unwrap();
        assert_eq!(r.nu0, 0.0);
        assert_eq!(r, r0);
    }

    #[test]
    fn full_cooperation_primary_rate() {
        let t = mpr_table(0.5);
        let expected = t.pd_p() + (1.0 - t.pd_p()) * t.ps();
        for le in [0.0, 0.3, 1.0] {
            let r = rates_s2(&t, le, 0.1, &pol(1.0, 1.0, 1.0, 1.0, 0.5)).unwrap();
            assert!((r.mu_p - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn s2_perfect_mpr_no_listening() {
        let t = mpr_table(1.0);
        let (le, lp) = (0.8, 0.2);
        let r = rates_s2(&t, le, lp, &pol(0.0, 0.3, 0.6, 0.9, 0.7)).unwrap();
        let expected = 0.7 * le * ((1.0 - 0.7) * r.pi_r + (1.0 - r.pi_r));
        assert!((r.mu_s - expected).abs() < 1e-15);
    }

    #[test]
    fn s3_corner_values() {
        let t = mpr_table(0.5);
        let r = rates_s3(&t, 0.1, &pol(0.0, 0.5, 0.5, 0.5, 0.5)).unwrap();
        assert!((r.mu_p - 0.6 * 0.5).abs() < 1e-15);

        let beta = 0.7;
        let r = rates_s3(&t, 0.2, &pol(1.0, 1.0, 0.0, beta, 0.5)).unwrap();
        let cap = 0.4 * 0.8;
        assert!((r.mu_p - (0.6 + cap * beta)).abs() < 1e-15);
        assert!((r.lambda_r - cap * beta * r.pi_p).abs() < 1e-15);
    }

    #[test]
    fn monopolising_relay_starves_own_queue() {
        // λ_p large enough to keep the relaying queue saturated with Γ = 1.
        let t = fig2_table();
        let r = rates_s3(&t, 0.35, &pol(1.0, 1.0, 0.0, 1.0, 1.0)).unwrap();
        assert!(r.pi_p < 1.0);
        assert_eq!(r.pi_r, 1.0);
        assert_eq!(r.mu_s, 0.0);
    }

    #[test]
    fn energy_service_rates() {
        let t = mpr_table(0.3);
        let p = pol(0.35, 0.4, 0.2, 0.6, 0.4);
        assert_eq!(rates_s1(&t, 0.2, 0.1, &p).unwrap().mu_e, 0.65);
        assert_eq!(rates_s2(&t, 0.2, 0.1, &p).unwrap().mu_e, 1.0);
    }

    #[test]
    fn conventional_pins_parameters() {
        let t = fig2_table();
        let c = rates_conventional(&t, 0.9, 0.1, 0.0).unwrap();
        assert!(c.outer.lambda_r > 0.0);
        assert!(!c.outer.stable_r && !c.inner.stable_r);
        let c = rates_conventional(&t, 1.0, 0.1, 0.6).unwrap();
        let direct = rates_s3(&t, 0.1, &PolicyParams::conventional(0.6)).unwrap();
        assert_eq!(c.outer, direct);
    }

    #[test]
    fn degenerate_relay_queue_is_empty() {
        let t = mpr_table(0.5);
        let r = rates_s3(&t, 0.0, &pol(0.5, 0.5, 0.0, 1.0, 0.0)).unwrap();
        assert_eq!((r.mu_r, r.lambda_r, r.pi_r), (0.0, 0.0, 0.0));
        assert!(r.stable_r);
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let t = mpr_table(0.5);
        assert!(PolicyParams::new(1.1, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(rates_s2(&t, 1.5, 0.1, &pol(0.1, 0.1, 0.1, 0.1, 0.1)).is_err());
        assert!(rates_s3(&t, -0.1, &pol(0.1, 0.1, 0.1, 0.1, 0.1)).is_err());
    }
}
