//! TOML configuration files.
//!
//! Keys mirror [`GameConfig`]. The coefficient tensor is nested as
//! `coeffs[degree][state][link]`. Optional keys fall back to defaults:
//! `m_max` to the latency regret bound, `disobedience` to the swap /
//! uniform matrix, `beta` to 0.5 within `[0.3, 0.7]`, `rounds` to 5000 and
//! `solver_tol` to 1e-8. The initial regret may be given either as `m_init`
//! or as the disobedience fraction `theta_init` (then `m_init = theta_init * m_max`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::BetaSchedule;
use crate::model::{
    DisobedienceMatrix, EstimatorKind, GameConfig, LatencyModel, Prior, Scenario, Signal,
    DEFAULT_BETA, DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_MAX_ITER, DEFAULT_ROUNDS,
    DEFAULT_SOLVER_TOL,
};

/// On-disk layout of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub states: Vec<String>,
    pub prior: Vec<f64>,
    pub coeffs: Vec<Vec<Vec<f64>>>,
    pub nu: f64,
    pub signal: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disobedience: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<f64>,
    #[serde(default)]
    pub allow_small_m_max: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_init: Option<f64>,
    #[serde(default)]
    pub theta_hat_init: f64,
    #[serde(default = "default_beta_min")]
    pub beta_min: f64,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    #[serde(default = "default_beta")]
    pub beta: BetaSchedule,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub require_strict_increase: bool,
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
}

fn default_beta_min() -> f64 {
    DEFAULT_BETA_MIN
}
fn default_beta_max() -> f64 {
    DEFAULT_BETA_MAX
}
fn default_beta() -> BetaSchedule {
    BetaSchedule::Constant(DEFAULT_BETA)
}
fn default_solver_tol() -> f64 {
    DEFAULT_SOLVER_TOL
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_rounds() -> usize {
    DEFAULT_ROUNDS
}
fn default_scenario() -> Scenario {
    Scenario::Baseline
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::Smoothing
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    /// Validates and fills in defaults.
    pub fn resolve(self) -> Result<GameConfig> {
        let latency = LatencyModel::new(self.states, self.coeffs)?;
        let prior = Prior::new(self.prior)?;
        let signal = Signal::with_labels(self.signal, self.nu, Some(latency.states()))?;
        let disobedience = match self.disobedience {
            Some(p) => DisobedienceMatrix::new(p)?,
            None => DisobedienceMatrix::default_for(latency.n_links())?,
        };
        let m_max = self.m_max.unwrap_or_else(|| latency.m_max_default());
        let m_init = match (self.m_init, self.theta_init) {
            (Some(_), Some(_)) => {
                return Err(Error::config("give either m_init or theta_init, not both"))
            }
            (Some(m), None) => m,
            (None, Some(t)) if (0.0..=1.0).contains(&t) => t * m_max,
            (None, Some(t)) => {
                return Err(Error::config(format!("theta_init = {t} outside [0, 1]")))
            }
            (None, None) => 0.0,
        };
        let cfg = GameConfig {
            latency,
            prior,
            signal,
            disobedience,
            m_max,
            m_init,
            theta_hat_init: self.theta_hat_init,
            beta_min: self.beta_min,
            beta_max: self.beta_max,
            beta_schedule: self.beta,
            scenario: self.scenario,
            estimator: self.estimator,
            solver_tol: self.solver_tol,
            max_iter: self.max_iter,
            rounds: self.rounds,
            seed: self.seed,
            allow_small_m_max: self.allow_small_m_max,
            require_strict_increase: self.require_strict_increase,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully explicit file for a resolved config.
    pub fn from_config(cfg: &GameConfig) -> Self {
        Self {
            states: cfg.latency.states().to_vec(),
            prior: cfg.prior.probs().to_vec(),
            coeffs: cfg.latency.coeffs().to_vec(),
            nu: cfg.signal.nu(),
            signal: cfg.signal.rows().to_vec(),
            disobedience: Some(cfg.disobedience.rows().to_vec()),
            m_max: Some(cfg.m_max),
            allow_small_m_max: cfg.allow_small_m_max,
            m_init: Some(cfg.m_init),
            theta_init: None,
            theta_hat_init: cfg.theta_hat_init,
            beta_min: cfg.beta_min,
            beta_max: cfg.beta_max,
            beta: cfg.beta_schedule.clone(),
            solver_tol: cfg.solver_tol,
            max_iter: cfg.max_iter,
            rounds: cfg.rounds,
            seed: cfg.seed,
            require_strict_increase: cfg.require_strict_increase,
            scenario: cfg.scenario,
            estimator: cfg.estimator.clone(),
        }
    }
}

pub fn load_config_str(text: &str, origin: &str) -> Result<GameConfig> {
    ConfigFile::parse(text, origin)?.resolve()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<GameConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    load_config_str(&text, &path.display().to_string())
}

/// Canonical TOML dump of a resolved config.
pub fn resolved_toml(cfg: &GameConfig) -> String {
    toml::to_string(&ConfigFile::from_config(cfg)).expect("config serializes to TOML")
}

/// SHA-256 of [`resolved_toml`], hex encoded.
pub fn config_digest(cfg: &GameConfig) -> String {
    let digest = Sha256::digest(resolved_toml(cfg).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
