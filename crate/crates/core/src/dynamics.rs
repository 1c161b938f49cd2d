//! The repeated game: one round samples a state, routes participants
//! according to their aggregate regret, routes non-participants by best
//! response to their forecast, and feeds the realized latencies back into
//! both populations' updates.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::BweProblem;
use crate::error::{Error, Result};
use crate::estimators::{LuenbergerState, SmoothingState};
use crate::model::{
    forecast_flows, p_flows, DisobedienceMatrix, EstimatorKind, GameConfig, LatencyModel, Scenario,
    Signal,
};

/// `u = π_ωᵀ (I − P) ℓ`: recommendation sub-optimality aggregated over
/// all participants.
pub fn instantaneous_regret(
    signal: &Signal,
    p: &DisobedienceMatrix,
    ell: &[f64],
    omega: usize,
) -> f64 {
    let pi = signal.row(omega);
    pi.iter()
        .zip(p.identity_minus(ell))
        .map(|(a, b)| a * b)
        .sum()
}

/// Aggregate regret after round `k`.
pub fn regret_update(m: f64, u: f64, k: usize, scenario: &Scenario) -> f64 {
    match scenario {
        Scenario::Baseline | Scenario::DynamicNu => {
            let k = k as f64;
            k / (k + 1.0) * m + u / (k + 1.0)
        }
        Scenario::Discounted { lambda } => lambda * m + (1.0 - lambda) * u,
    }
}

/// Fraction of participants that disobey: `[m]⁺ / m_max`, clamped to `[0, 1]`.
pub fn theta_of_m(m: f64, m_max: f64) -> f64 {
    (m.max(0.0) / m_max).clamp(0.0, 1.0)
}

/// Recovers the disobedience fraction from observed total flows by
/// inverting the participant flow map in least squares.
pub fn recover_theta(
    signal: &Signal,
    p: &DisobedienceMatrix,
    observed_total: &[f64],
    omega: usize,
    y_known: &[f64],
) -> Result<f64> {
    let pi = signal.row(omega);
    let direction = p.transpose_minus_identity(pi);
    let norm2: f64 = direction.iter().map(|c| c * c).sum();
    let scale: f64 = pi.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if norm2 <= 1e-24 * scale.max(1.0) || norm2 == 0.0 {
        return Err(Error::Unidentifiable { omega });
    }
    let proj: f64 = observed_total
        .iter()
        .zip(y_known)
        .zip(pi.iter().zip(&direction))
        .map(|((f, y), (pi_i, c))| c * (f - y - pi_i))
        .sum();
    Ok((proj / norm2).clamp(0.0, 1.0))
}

/// Inverts a strictly increasing link latency by bisection. Returns `None`
/// when the target is below the free-flow latency or the link is flat.
pub fn invert_link_latency(
    model: &LatencyModel,
    omega: usize,
    link: usize,
    target: f64,
) -> Option<f64> {
    let at_zero = model.link_latency(omega, link, 0.0);
    if target < at_zero {
        return None;
    }
    let mut hi = 1.0;
    while model.link_latency(omega, link, hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model.link_latency(omega, link, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorState {
    Smoothing(SmoothingState),
    Luenberger(LuenbergerState),
}

/// Everything that carries over from one round to the next.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub k: usize,
    pub m: f64,
    pub theta_hat: f64,
    pub estimator: EstimatorState,
    pub nu_current: f64,
    pub rng: ChaCha8Rng,
    /// Number of times `m` had to be clamped to `[-m_max, m_max]`.
    pub clamp_events: usize,
}

impl SimulationState {
    pub fn initial(cfg: &GameConfig) -> Self {
        let (estimator, theta_hat) = match &cfg.estimator {
            EstimatorKind::Smoothing => (
                EstimatorState::Smoothing(SmoothingState::new(
                    cfg.theta_hat_init,
                    cfg.beta_schedule.clone(),
                )),
                cfg.theta_hat_init,
            ),
            EstimatorKind::Luenberger { gain } => {
                let m_hat = cfg.theta_hat_init * cfg.m_max;
                (
                    EstimatorState::Luenberger(LuenbergerState::new(m_hat, gain.clone())),
                    theta_of_m(m_hat, cfg.m_max),
                )
            }
        };
        Self {
            k: 1,
            m: cfg.m_init,
            theta_hat,
            estimator,
            nu_current: cfg.nu(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            clamp_events: 0,
        }
    }

    /// Draws a state by inverse CDF over the prior, in state order.
    fn sample_state(&mut self, mu: &[f64]) -> usize {
        let r: f64 = self.rng.gen();
        let mut cum = 0.0;
        for (w, p) in mu.iter().enumerate() {
            cum += p;
            if r < cum {
                return w;
            }
        }
        mu.len() - 1
    }
}

/// One row of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub omega: usize,
    pub theta: f64,
    pub theta_hat: f64,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub y: Vec<f64>,
    pub ell: Vec<f64>,
    pub u: f64,
    pub m: f64,
    pub m_next: f64,
    pub e_theta: f64,
    /// `max_i |x_i − π_{ω,i}|`: distance of participant flows from full obedience.
    pub flow_gap: f64,
    pub nu: f64,
}

/// Plays one round with a state drawn from the prior.
pub fn step(
    cfg: &GameConfig,
    state: SimulationState,
) -> Result<(SimulationState, TrajectoryRecord)> {
    advance(cfg, state, None, None)
}

/// Plays one round in a given state. The RNG is not consumed.
pub fn step_in_state(
    cfg: &GameConfig,
    state: SimulationState,
    omega: usize,
) -> Result<(SimulationState, TrajectoryRecord)> {
    if omega >= cfg.latency.n_states() {
        return Err(Error::config(format!("state index {omega} out of range")));
    }
    advance(cfg, state, Some(omega), None)
}

fn advance(
    cfg: &GameConfig,
    mut state: SimulationState,
    forced_omega: Option<usize>,
    frozen_m: Option<f64>,
) -> Result<(SimulationState, TrajectoryRecord)> {
    let k = state.k;
    if let Some(m) = frozen_m {
        state.m = m;
    }
    let omega = match forced_omega {
        Some(w) => w,
        None => state.sample_state(cfg.prior.probs()),
    };

    let rescaled;
    let signal = if state.nu_current == cfg.nu() {
        &cfg.signal
    } else {
        rescaled = cfg.signal.rescaled(state.nu_current)?;
        &rescaled
    };
    let p = &cfg.disobedience;

    let theta = theta_of_m(state.m, cfg.m_max);
    let x = p_flows(signal, p, theta, omega);
    let x_hat = forecast_flows(signal, p, state.theta_hat, omega);
    let y = BweProblem::with_signal(cfg, signal)
        .solve(state.theta_hat)
        .map_err(|e| Error::Round {
            round: k,
            source: Box::new(e),
        })?
        .y;
    let total: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
    let ell = cfg.latency.eval(omega, &total)?;
    let u = instantaneous_regret(signal, p, &ell, omega);

    let mut m_next = regret_update(state.m, u, k, &cfg.scenario);
    if m_next.abs() > cfg.m_max {
        warn!(
            "round {k}: regret {m_next} outside [-{0}, {0}], clamping",
            cfg.m_max
        );
        m_next = m_next.clamp(-cfg.m_max, cfg.m_max);
        state.clamp_events += 1;
    }
    if let Some(m) = frozen_m {
        m_next = m;
    }

    let pi = signal.row(omega);
    let flow_gap = x
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let record = TrajectoryRecord {
        k,
        omega,
        theta,
        theta_hat: state.theta_hat,
        x,
        x_hat,
        y,
        ell,
        u,
        m: state.m,
        m_next,
        e_theta: theta - state.theta_hat,
        flow_gap,
        nu: state.nu_current,
    };

    let (estimator, theta_hat_next) = match state.estimator {
        EstimatorState::Smoothing(s) => {
            let s = s.update(theta, k)?;
            let th = s.theta_hat;
            (EstimatorState::Smoothing(s), th)
        }
        EstimatorState::Luenberger(obs) => {
            let forecast_total: Vec<f64> = record
                .x_hat
                .iter()
                .zip(&record.y)
                .map(|(a, b)| a + b)
                .collect();
            let ell_hat = cfg.latency.eval(omega, &forecast_total)?;
            let obs = obs.update(u, &record.ell, &ell_hat);
            let th = theta_of_m(obs.m_hat, cfg.m_max);
            (EstimatorState::Luenberger(obs), th)
        }
    };

    state.estimator = estimator;
    state.theta_hat = theta_hat_next;
    state.m = m_next;
    if cfg.scenario == Scenario::DynamicNu {
        state.nu_current = theta;
    }
    state.k = k + 1;
    Ok((state, record))
}

/// Runs `cfg.rounds` rounds from the configured initial state.
pub fn simulate(cfg: &GameConfig) -> Result<Vec<TrajectoryRecord>> {
    cfg.validate()?;
    run_rounds(cfg, None)
}

/// Runs the dynamics with the aggregate regret pinned at `m` every round,
/// so only the forecast moves.
pub fn simulate_frozen_m(cfg: &GameConfig, m: f64) -> Result<Vec<TrajectoryRecord>> {
    cfg.validate()?;
    if m.abs() > cfg.m_max {
        return Err(Error::config(format!(
            "frozen m = {m} outside [-m_max, m_max]"
        )));
    }
    run_rounds(cfg, Some(m))
}

fn run_rounds(cfg: &GameConfig, frozen_m: Option<f64>) -> Result<Vec<TrajectoryRecord>> {
    let mut state = SimulationState::initial(cfg);
    let mut out = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let (next, record) = advance(cfg, state, None, frozen_m)?;
        state = next;
        out.push(record);
    }
    Ok(out)
}

/// Time-averaged absolute gap between realized and forecast participant
/// flows, per link.
pub fn calibration_score(trajectory: &[TrajectoryRecord]) -> Vec<f64> {
    let Some(first) = trajectory.first() else {
        return Vec::new();
    };
    let mut acc = vec![0.0; first.x.len()];
    for rec in trajectory {
        for (a, (x, xh)) in acc.iter_mut().zip(rec.x.iter().zip(&rec.x_hat)) {
            *a += (x - xh).abs();
        }
    }
    let k = trajectory.len() as f64;
    acc.into_iter().map(|a| a / k).collect()
}
