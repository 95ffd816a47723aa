//! Stationary analysis of decoupled discrete-time Bernoulli queues.
//!
//! The energy queue of a secondary user receives one packet per slot with
//! probability `λ` and, whenever nonempty, releases one with probability `μ`.
//! Its chain moves `k -> k+1` w.p. `λ(1-μ)`, `k -> k-1` w.p. `μ(1-λ)` for
//! `k >= 1` and `0 -> 1` w.p. `λ`, giving `ν_0 = 1 - λ/μ` and the geometric
//! law `ν_k = ν_0 η^k / (1 - μ)` with `η = λ(1-μ) / ((1-λ)μ)`.

use crate::error::{Error, Result};

/// Absolute slack on `λ <= μ` so that points placed exactly on the stability
/// boundary by a closed form are not rejected by round-off.
pub const STABILITY_TOL: f64 = 1e-12;

/// A queue `Q` is stable iff `μ >= λ`; the boundary counts as stable.
pub fn is_stable(arrival: f64, service: f64) -> bool {
    arrival <= service + STABILITY_TOL
}

/// Arrival and service probabilities of one Bernoulli queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliQueue {
    pub arrival: f64,
    pub service: f64,
}

impl BernoulliQueue {
    pub fn new(arrival: f64, service: f64) -> Result<Self> {
        for (name, v) in [("arrival", arrival), ("service", service)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { arrival, service })
    }

    pub fn is_stable(&self) -> bool {
        is_stable(self.arrival, self.service)
    }

    /// `η = λ(1-μ) / ((1-λ)μ)`, the ratio of consecutive state probabilities.
    pub fn eta(&self) -> f64 {
        self.arrival * (1.0 - self.service) / ((1.0 - self.arrival) * self.service)
    }
}

/// Probability that the energy queue is empty, `max(0, 1 - λ/μ)`.
///
/// A queue with `λ >= μ` saturates and is never empty; a queue that never
/// receives anything is always empty.
pub fn energy_empty_prob(q: BernoulliQueue) -> f64 {
    if q.arrival == 0.0 {
        return 1.0;
    }
    if q.service == 0.0 {
        return 0.0;
    }
    (1.0 - q.arrival / q.service).max(0.0)
}

/// Stationary probabilities `[ν_0, …, ν_max_state]`.
///
/// Only defined when the queue is positive recurrent (`λ < μ`); `μ = 1`
/// degenerates to the two-state law `[1-λ, λ, 0, …]`.
pub fn energy_state_probs(q: BernoulliQueue, max_state: usize) -> Result<Vec<f64>> {
    let mut probs = vec![0.0; max_state + 1];
    if q.arrival == 0.0 {
        probs[0] = 1.0;
        return Ok(probs);
    }
    if q.service == 1.0 {
        probs[0] = 1.0 - q.arrival;
        if max_state >= 1 {
            probs[1] = q.arrival;
        }
        return Ok(probs);
    }
    if q.arrival >= q.service {
        return Err(Error::Unstable {
            arrival: q.arrival,
            service: q.service,
        });
    }
    let nu0 = energy_empty_prob(q);
    let eta = q.eta();
    probs[0] = nu0;
    let mut term = nu0 / (1.0 - q.service);
    for p in probs.iter_mut().skip(1) {
        term *= eta;
        *p = term;
    }
    Ok(probs)
}

/// Mass beyond `max_state` of the stationary law, `Σ_{k > max} ν_k`.
pub fn energy_tail_mass(q: BernoulliQueue, max_state: usize) -> Result<f64> {
    if q.arrival == 0.0 {
        return Ok(0.0);
    }
    if q.service == 1.0 {
        return Ok(if max_state == 0 { q.arrival } else { 0.0 });
    }
    if q.arrival >= q.service {
        return Err(Error::Unstable {
            arrival: q.arrival,
            service: q.service,
        });
    }
    let eta = q.eta();
    let nu0 = energy_empty_prob(q);
    // Σ_{k > m} ν_0 η^k / (1-μ) = ν_0 η^{m+1} / ((1-μ)(1-η))
    Ok(nu0 * eta.powi(max_state as i32 + 1) / ((1.0 - q.service) * (1.0 - eta)))
}

/// Probability that a queue is nonempty, with its stability verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupancy {
    pub prob: f64,
    pub stable: bool,
}

/// `min(1, λ/μ)`. Unstable inputs are clamped to 1 and flagged; a queue with
/// neither arrivals nor service is empty.
pub fn occupancy(arrival: f64, service: f64) -> Occupancy {
    if arrival <= 0.0 {
        return Occupancy {
            prob: 0.0,
            stable: true,
        };
    }
    if service <= 0.0 {
        return Occupancy {
            prob: 1.0,
            stable: false,
        };
    }
    Occupancy {
        prob: (arrival / service).min(1.0),
        stable: is_stable(arrival, service),
    }
}
