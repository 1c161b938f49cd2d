//! Domain types for the parallel-link routing game and the two flow maps
//! shared by the rest of the crate.
//!
//! Link latencies are polynomials whose coefficients depend on the network
//! state, `ℓ_{ω,i}(f) = Σ_d α[d][ω][i] f^d`. Participating agents receive a
//! state-dependent recommendation vector `π_ω` of mass `ν`; the fraction `θ`
//! that disobeys is rerouted through the row-stochastic matrix `P`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::BetaSchedule;

/// Tolerance for simplex membership of user-supplied vectors.
pub const INPUT_SIMPLEX_TOL: f64 = 1e-12;
/// Tolerance for simplex membership of computed vectors.
pub const OUTPUT_SIMPLEX_TOL: f64 = 1e-10;

/// State-dependent polynomial link latencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    states: Vec<String>,
    /// `coeffs[d][ω][i]`
    coeffs: Vec<Vec<Vec<f64>>>,
    n: usize,
}

impl LatencyModel {
    /// Builds a model from a coefficient tensor indexed `[degree][state][link]`.
    pub fn new(states: Vec<String>, coeffs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let s = states.len();
        if s == 0 {
            return Err(Error::config("latency model needs at least one state"));
        }
        if coeffs.is_empty() {
            return Err(Error::config("coefficient tensor is empty"));
        }
        let n = coeffs[0].first().map_or(0, Vec::len);
        if n < 2 {
            return Err(Error::config(format!("need at least 2 links, got {n}")));
        }
        for (d, by_state) in coeffs.iter().enumerate() {
            if by_state.len() != s {
                return Err(Error::config(format!(
                    "coefficient tensor degree {d} has {} state rows, expected {s}",
                    by_state.len()
                )));
            }
            for (w, row) in by_state.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::config(format!(
                        "coefficient tensor [{d}][{}] has {} links, expected {n}",
                        states[w],
                        row.len()
                    )));
                }
                for (i, &a) in row.iter().enumerate() {
                    if !a.is_finite() {
                        return Err(Error::config(format!(
                            "coefficient alpha[{d}][{}][{}] is not finite",
                            states[w],
                            i + 1
                        )));
                    }
                    if d <= 1 && a < 0.0 {
                        return Err(Error::config(format!(
                            "coefficient alpha[{d}][{}][{}] = {a} must be nonnegative",
                            states[w],
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { states, coeffs, n })
    }

    pub fn n_links(&self) -> usize {
        self.n
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn coeffs(&self) -> &[Vec<Vec<f64>>] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, d: usize, omega: usize, link: usize) -> f64 {
        self.coeffs[d][omega][link]
    }

    /// True when every link latency in every state has a positive
    /// coefficient of degree at least one.
    pub fn is_strictly_increasing(&self) -> bool {
        (0..self.n_states()).all(|w| {
            (0..self.n).all(|i| (1..self.coeffs.len()).any(|d| self.coeffs[d][w][i] > 0.0))
        })
    }

    /// Latency of a single link at flow `f` (Horner evaluation).
    #[inline]
    pub fn link_latency(&self, omega: usize, link: usize, f: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, by_state| acc * f + by_state[omega][link])
    }

    /// Per-link latencies in state `omega` for the flow vector `f`.
    pub fn eval(&self, omega: usize, f: &[f64]) -> Result<Vec<f64>> {
        if omega >= self.n_states() {
            return Err(Error::config(format!(
                "state index {omega} out of range for {} states",
                self.n_states()
            )));
        }
        if f.len() != self.n {
            return Err(Error::config(format!(
                "flow vector has {} entries, model has {} links",
                f.len(),
                self.n
            )));
        }
        Ok(f.iter()
            .enumerate()
            .map(|(i, &fi)| self.link_latency(omega, i, fi))
            .collect())
    }

    /// Upper bound on the positive part of the aggregate regret: the sum over
    /// links and degrees of the largest coefficient across states.
    pub fn m_max_default(&self) -> f64 {
        let mut total = 0.0;
        for by_state in &self.coeffs {
            for i in 0..self.n {
                total += by_state
                    .iter()
                    .map(|row| row[i])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        total
    }
}

/// Prior distribution over network states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    mu0: Vec<f64>,
}

impl Prior {
    pub fn new(mu0: Vec<f64>) -> Result<Self> {
        if mu0.is_empty() {
            return Err(Error::config("prior is empty"));
        }
        if let Some((w, p)) = mu0
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p <= 0.0)
        {
            return Err(Error::config(format!(
                "prior entry {w} is {p}; every state needs positive probability"
            )));
        }
        let total: f64 = mu0.iter().sum();
        if (total - 1.0).abs() > INPUT_SIMPLEX_TOL {
            return Err(Error::config(format!("prior sums to {total}, expected 1")));
        }
        Ok(Self { mu0 })
    }

    pub fn probs(&self) -> &[f64] {
        &self.mu0
    }

    pub fn len(&self) -> usize {
        self.mu0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu0.is_empty()
    }
}

/// Per-state recommendation vectors, each of mass `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pi: Vec<Vec<f64>>,
    nu: f64,
}

impl Signal {
    pub fn new(pi: Vec<Vec<f64>>, nu: f64) -> Result<Self> {
        Self::with_labels(pi, nu, None)
    }

    /// Same as [`Signal::new`] but names states in validation messages.
    pub fn with_labels(pi: Vec<Vec<f64>>, nu: f64, states: Option<&[String]>) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::config(format!(
                "participation nu = {nu} outside [0, 1]"
            )));
        }
        if pi.is_empty() {
            return Err(Error::config("signal has no state rows"));
        }
        let n = pi[0].len();
        for (w, row) in pi.iter().enumerate() {
            let label = states
                .and_then(|s| s.get(w).cloned())
                .unwrap_or_else(|| format!("{w}"));
            if row.len() != n {
                return Err(Error::config(format!(
                    "signal row {label} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::config(format!(
                    "signal row {label} has a negative entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - nu).abs() > INPUT_SIMPLEX_TOL {
                return Err(Error::config(format!(
                    "signal row {label} sums to {total}, expected nu={nu}"
                )));
            }
        }
        Ok(Self { pi, nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn row(&self, omega: usize) -> &[f64] {
        &self.pi[omega]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.pi
    }

    pub fn n_links(&self) -> usize {
        self.pi[0].len()
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    /// Rescales every row proportionally to mass `new_nu`.
    ///
    /// Fails when the current mass is zero, since the row directions are lost.
    pub fn rescaled(&self, new_nu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&new_nu) {
            return Err(Error::config(format!(
                "participation nu = {new_nu} outside [0, 1]"
            )));
        }
        if self.nu <= 0.0 {
            return Err(Error::config("cannot rescale a signal of zero mass"));
        }
        let factor = new_nu / self.nu;
        let pi = self
            .pi
            .iter()
            .map(|row| row.iter().map(|p| p * factor).collect())
            .collect();
        Ok(Self { pi, nu: new_nu })
    }
}

/// Row-stochastic, zero-diagonal routing of disobeying participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisobedienceMatrix {
    p: Vec<Vec<f64>>,
}

impl DisobedienceMatrix {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        let n = p.len();
        if n < 2 {
            return Err(Error::config("disobedience matrix needs at least 2 rows"));
        }
        for (i, row) in p.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(format!(
                    "disobedience row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            if row[i] != 0.0 {
                return Err(Error::config(format!(
                    "disobedience diagonal entry {} is {}, must be 0",
                    i + 1,
                    row[i]
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::config(format!(
                    "disobedience row {} has a negative entry",
                    i + 1
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > INPUT_SIMPLEX_TOL {
                return Err(Error::config(format!(
                    "disobedience row {} sums to {total}, expected 1",
                    i + 1
                )));
            }
        }
        Ok(Self { p })
    }

    /// Swap matrix for two links, uniform off-diagonal otherwise.
    pub fn default_for(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("disobedience matrix needs at least 2 links"));
        }
        let off = 1.0 / (n as f64 - 1.0);
        let p = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { off }).collect())
            .collect();
        Ok(Self { p })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i][j]
    }

    /// `(Pᵀ − I) v`
    pub fn transpose_minus_identity(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.p[j][i] * v[j]).sum::<f64>() - v[i])
            .collect()
    }

    /// `(I − P) v`
    pub fn identity_minus(&self, v: &[f64]) -> Vec<f64> {
        self.p
            .iter()
            .zip(v)
            .map(|(row, vi)| vi - row.iter().zip(v).map(|(p, vj)| p * vj).sum::<f64>())
            .collect()
    }
}

/// Flows routed by participants when a fraction `theta` disobeys:
/// `π_ω + θ (Pᵀ − I) π_ω`. The recommendation row already carries mass `ν`.
pub fn p_flows(signal: &Signal, p: &DisobedienceMatrix, theta: f64, omega: usize) -> Vec<f64> {
    let pi = signal.row(omega);
    let shift = p.transpose_minus_identity(pi);
    pi.iter()
        .zip(&shift)
        .map(|(a, b)| (a + theta * b).max(0.0))
        .collect()
}

/// Non-participants' forecast of participant flows. Same affine map as
/// [`p_flows`], driven by the forecast `theta_hat`.
pub fn forecast_flows(
    signal: &Signal,
    p: &DisobedienceMatrix,
    theta_hat: f64,
    omega: usize,
) -> Vec<f64> {
    p_flows(signal, p, theta_hat, omega)
}

/// How participant regret is aggregated over rounds, and whether
/// participation itself moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    /// Running average of instantaneous regrets.
    Baseline,
    /// Exponentially discounted aggregation `λ m + (1 − λ) u`.
    Discounted { lambda: f64 },
    /// Running average, with the participation rate following `θ(k)`.
    DynamicNu,
}

/// How non-participants form their forecast `θ̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorKind {
    Smoothing,
    /// Observer on the aggregate regret with output-error gain per link.
    /// Only `gain = 0` has a convergence guarantee.
    Luenberger {
        gain: Vec<f64>,
    },
}

/// Fully resolved simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub latency: LatencyModel,
    pub prior: Prior,
    pub signal: Signal,
    pub disobedience: DisobedienceMatrix,
    pub m_max: f64,
    pub m_init: f64,
    pub theta_hat_init: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_schedule: BetaSchedule,
    pub scenario: Scenario,
    pub estimator: EstimatorKind,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub rounds: usize,
    pub seed: u64,
    /// Accept `m_max` below [`LatencyModel::m_max_default`].
    pub allow_small_m_max: bool,
    /// Reject latencies that are not strictly increasing.
    pub require_strict_increase: bool,
}

pub const DEFAULT_SOLVER_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_ROUNDS: usize = 5000;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_BETA_MIN: f64 = 0.3;
pub const DEFAULT_BETA_MAX: f64 = 0.7;

impl GameConfig {
    /// Config with every tunable at its default: `m_max` from the latency
    /// bound, `m(1) = 0`, `θ̂(1) = 0`, constant `β = 0.5`.
    pub fn new(
        latency: LatencyModel,
        prior: Prior,
        signal: Signal,
        disobedience: DisobedienceMatrix,
    ) -> Result<Self> {
        let m_max = latency.m_max_default();
        let cfg = Self {
            latency,
            prior,
            signal,
            disobedience,
            m_max,
            m_init: 0.0,
            theta_hat_init: 0.0,
            beta_min: DEFAULT_BETA_MIN,
            beta_max: DEFAULT_BETA_MAX,
            beta_schedule: BetaSchedule::Constant(DEFAULT_BETA),
            scenario: Scenario::Baseline,
            estimator: EstimatorKind::Smoothing,
            solver_tol: DEFAULT_SOLVER_TOL,
            max_iter: DEFAULT_MAX_ITER,
            rounds: DEFAULT_ROUNDS,
            seed: 0,
            allow_small_m_max: false,
            require_strict_increase: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_links(&self) -> usize {
        self.latency.n_links()
    }

    pub fn nu(&self) -> f64 {
        self.signal.nu()
    }

    /// Mass of the non-participating population.
    pub fn b_mass(&self) -> f64 {
        1.0 - self.signal.nu()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.latency.n_links();
        let s = self.latency.n_states();
        if self.prior.len() != s {
            return Err(Error::config(format!(
                "prior has {} entries, latency model has {s} states",
                self.prior.len()
            )));
        }
        if self.signal.n_states() != s || self.signal.n_links() != n {
            return Err(Error::config(format!(
                "signal is {}x{}, expected {s}x{n}",
                self.signal.n_states(),
                self.signal.n_links()
            )));
        }
        if self.disobedience.n() != n {
            return Err(Error::config(format!(
                "disobedience matrix is {0}x{0}, expected {n}x{n}",
                self.disobedience.n()
            )));
        }
        if self.require_strict_increase && !self.latency.is_strictly_increasing() {
            return Err(Error::config(
                "latencies must be strictly increasing: some link has no positive coefficient of degree >= 1",
            ));
        }
        if !(self.m_max.is_finite() && self.m_max > 0.0) {
            return Err(Error::config(format!(
                "m_max = {} must be positive",
                self.m_max
            )));
        }
        let bound = self.latency.m_max_default();
        if self.m_max < bound && !self.allow_small_m_max {
            return Err(Error::config(format!(
                "m_max = {} is below the regret bound {bound}; set allow_small_m_max to override",
                self.m_max
            )));
        }
        if !(self.m_init.is_finite() && self.m_init.abs() <= self.m_max) {
            return Err(Error::config(format!(
                "m_init = {} outside [-m_max, m_max] = [-{1}, {1}]",
                self.m_init, self.m_max
            )));
        }
        if !(0.0..=1.0).contains(&self.theta_hat_init) {
            return Err(Error::config(format!(
                "theta_hat_init = {} outside [0, 1]",
                self.theta_hat_init
            )));
        }
        if !(0.0 < self.beta_min && self.beta_min <= self.beta_max && self.beta_max < 1.0) {
            return Err(Error::config(format!(
                "beta bounds ({}, {}) must satisfy 0 < beta_min <= beta_max < 1",
                self.beta_min, self.beta_max
            )));
        }
        self.beta_schedule
            .check_within(self.beta_min, self.beta_max)?;
        match &self.scenario {
            Scenario::Discounted { lambda } if !(*lambda > 0.0 && *lambda < 1.0) => {
                return Err(Error::config(format!(
                    "discount factor lambda = {lambda} must lie in (0, 1)"
                )));
            }
            Scenario::DynamicNu if self.signal.nu() <= 0.0 => {
                return Err(Error::config(
                    "dynamic participation needs a signal with positive mass to rescale",
                ));
            }
            _ => {}
        }
        if let EstimatorKind::Luenberger { gain } = &self.estimator {
            if gain.len() != n {
                return Err(Error::config(format!(
                    "observer gain has {} entries, expected {n}",
                    gain.len()
                )));
            }
            if gain.iter().any(|g| !g.is_finite()) {
                return Err(Error::config("observer gain must be finite"));
            }
        }
        if !(self.solver_tol.is_finite() && self.solver_tol > 0.0) {
            return Err(Error::config(format!(
                "solver_tol = {} must be positive",
                self.solver_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be positive"));
        }
        Ok(())
    }
}
