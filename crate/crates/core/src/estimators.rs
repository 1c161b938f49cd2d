//! Forecast models used by non-participating agents, and the error envelope
//! that bounds the smoothing forecast error along any trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing weights `β(t)` for `t ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSchedule {
    Constant(f64),
    /// `β(t) = seq[(t - 2) mod len]`; the sequence repeats when exhausted.
    Sequence(Vec<f64>),
}

impl BetaSchedule {
    /// Weight applied in the update that produces `θ̂(t)`.
    pub fn beta_at(&self, t: usize) -> f64 {
        match self {
            BetaSchedule::Constant(b) => *b,
            BetaSchedule::Sequence(seq) => seq[t.saturating_sub(2) % seq.len()],
        }
    }

    pub(crate) fn check_within(&self, beta_min: f64, beta_max: f64) -> Result<()> {
        let values: &[f64] = match self {
            BetaSchedule::Constant(b) => std::slice::from_ref(b),
            BetaSchedule::Sequence(seq) if seq.is_empty() => {
                return Err(Error::config("beta sequence is empty"))
            }
            BetaSchedule::Sequence(seq) => seq,
        };
        match values
            .iter()
            .find(|b| !(**b >= beta_min && **b <= beta_max))
        {
            Some(b) => Err(Error::config(format!(
                "smoothing weight {b} outside [beta_min, beta_max] = [{beta_min}, {beta_max}]"
            ))),
            None => Ok(()),
        }
    }
}

/// Simple exponential smoothing of the disobedience fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingState {
    pub theta_hat: f64,
    pub schedule: BetaSchedule,
}

impl SmoothingState {
    pub fn new(theta_hat: f64, schedule: BetaSchedule) -> Self {
        Self {
            theta_hat,
            schedule,
        }
    }

    /// `θ̂(k+1) = β(k+1) θ(k) + (1 − β(k+1)) θ̂(k)`.
    pub fn update(mut self, theta_observed: f64, k: usize) -> Result<Self> {
        let beta = self.schedule.beta_at(k + 1);
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::config(format!(
                "smoothing weight {beta} outside (0, 1)"
            )));
        }
        self.theta_hat = (beta * theta_observed + (1.0 - beta) * self.theta_hat).clamp(0.0, 1.0);
        Ok(self)
    }
}

/// Luenberger-style observer of the aggregate regret `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuenbergerState {
    pub m_hat: f64,
    pub gain: Vec<f64>,
    /// Round index of `m_hat`.
    pub k: usize,
}

impl LuenbergerState {
    pub fn new(m_hat: f64, gain: Vec<f64>) -> Self {
        Self { m_hat, gain, k: 1 }
    }

    /// `m̂[k+1] = k/(k+1) m̂[k] + u[k]/(k+1) + L (ℓ[k] − ℓ̂[k])`.
    ///
    /// `latencies_predicted` is the latency the agents expected at their
    /// forecast flows plus their own response.
    pub fn update(
        mut self,
        u: f64,
        latencies_observed: &[f64],
        latencies_predicted: &[f64],
    ) -> Self {
        let k = self.k as f64;
        let correction: f64 = self
            .gain
            .iter()
            .zip(latencies_observed.iter().zip(latencies_predicted))
            .map(|(l, (obs, pred))| l * (obs - pred))
            .sum();
        self.m_hat = k / (k + 1.0) * self.m_hat + u / (k + 1.0) + correction;
        self.k += 1;
        self
    }
}

/// `δ̃(k) = Σ_{t=2..k} (1 − β_min)^{k−t} / t`, summed directly.
pub fn delta_tilde(k: usize, beta_min: f64) -> f64 {
    let gamma = 1.0 - beta_min;
    (2..=k).fold(0.0, |acc, t| acc * gamma + 1.0 / t as f64)
}

/// Lower and upper bounds on the forecast error `e_θ(k)` given
/// `e_θ(1) = e1`, valid when regret is a running average bounded by `m_max`.
pub fn e_theta_envelope(k: usize, e1: f64, beta_min: f64, schedule: &BetaSchedule) -> (f64, f64) {
    let decay: f64 = (2..=k).map(|t| 1.0 - schedule.beta_at(t)).product();
    let spread = 2.0 * delta_tilde(k, beta_min);
    (decay * e1 - spread, decay * e1 + spread)
}

/// Envelope for `k = 1..=rounds`, computed incrementally. Entry `k - 1`
/// matches [`e_theta_envelope`] at `k`.
pub fn envelope_series(
    rounds: usize,
    e1: f64,
    beta_min: f64,
    schedule: &BetaSchedule,
) -> Vec<(f64, f64)> {
    let gamma = 1.0 - beta_min;
    let mut out = Vec::with_capacity(rounds);
    let mut decay = 1.0;
    let mut delta = 0.0;
    for k in 1..=rounds {
        if k >= 2 {
            decay *= 1.0 - schedule.beta_at(k);
            delta = delta * gamma + 1.0 / k as f64;
        }
        out.push((decay * e1 - 2.0 * delta, decay * e1 + 2.0 * delta));
    }
    out
}
