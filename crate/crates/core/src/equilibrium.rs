//! Best response of non-participating agents to a forecast of participant
//! flows, its variational-inequality certificate, and the obedience check
//! for a signal.
//!
//! Given a forecast `θ`, non-participants (mass `1 − ν`) settle on the
//! Wardrop response `y(θ)` with respect to *expected* latencies, where the
//! expectation is over the prior and participant flows follow the forecast
//! map. This is the minimizer of the separable convex potential
//!
//! ```text
//! f(y, θ) = Σ_i ∫_0^{y_i} E_ω[ ℓ_{ω,i}(x̂_i(θ, ω) + s) ] ds
//! ```
//!
//! over the simplex of mass `1 − ν`. We minimize it by projected gradient
//! descent with Armijo backtracking and stop once the VI margin certifies
//! the iterate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{forecast_flows, DisobedienceMatrix, GameConfig, LatencyModel, Prior, Signal};
use crate::simplex::project_onto_simplex;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// Solver output for one forecast value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    pub y: Vec<f64>,
    pub theta: f64,
    pub potential_value: f64,
    /// Most negative VI slack over the simplex vertices.
    pub vi_margin: f64,
    pub iterations: usize,
}

/// The best-response problem for one population split.
///
/// `signal` fixes the participant recommendation (and hence `ν`), while
/// `demand` is the mass of non-participants. The two are independent so
/// that dynamic participation can move `ν` without moving `demand`.
#[derive(Debug, Clone, Copy)]
pub struct BweProblem<'a> {
    latency: &'a LatencyModel,
    prior: &'a Prior,
    signal: &'a Signal,
    disobedience: &'a DisobedienceMatrix,
    demand: f64,
    tol: f64,
    max_iter: usize,
}

impl<'a> BweProblem<'a> {
    pub fn from_config(cfg: &'a GameConfig) -> Self {
        Self::with_signal(cfg, &cfg.signal)
    }

    /// Problem with the config's populations but a different participant signal.
    pub fn with_signal(cfg: &'a GameConfig, signal: &'a Signal) -> Self {
        Self {
            latency: &cfg.latency,
            prior: &cfg.prior,
            signal,
            disobedience: &cfg.disobedience,
            demand: cfg.b_mass(),
            tol: cfg.solver_tol,
            max_iter: cfg.max_iter,
        }
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    pub fn n_links(&self) -> usize {
        self.latency.n_links()
    }

    fn forecast_table(&self, theta: f64) -> Vec<Vec<f64>> {
        (0..self.latency.n_states())
            .map(|w| forecast_flows(self.signal, self.disobedience, theta, w))
            .collect()
    }

    fn expected_latency_with(&self, table: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let mu = self.prior.probs();
        (0..self.n_links())
            .map(|i| {
                table
                    .iter()
                    .enumerate()
                    .map(|(w, xhat)| mu[w] * self.latency.link_latency(w, i, xhat[i] + y[i]))
                    .sum()
            })
            .collect()
    }

    /// Closed-form potential: each monomial `α (a + s)^d` integrates to
    /// `α ((a + y)^{d+1} − a^{d+1}) / (d + 1)`.
    fn potential_with(&self, table: &[Vec<f64>], y: &[f64]) -> f64 {
        let mu = self.prior.probs();
        let coeffs = self.latency.coeffs();
        let mut total = 0.0;
        for (w, xhat) in table.iter().enumerate() {
            for i in 0..self.n_links() {
                let a = xhat[i];
                let b = a + y[i];
                let (mut pa, mut pb) = (a, b);
                let mut link = 0.0;
                for (d, by_state) in coeffs.iter().enumerate() {
                    link += by_state[w][i] * (pb - pa) / (d as f64 + 1.0);
                    pa *= a;
                    pb *= b;
                }
                total += mu[w] * link;
            }
        }
        total
    }

    /// Diagonal of the potential's Hessian.
    fn curvature_with(&self, table: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let mu = self.prior.probs();
        let coeffs = self.latency.coeffs();
        (0..self.n_links())
            .map(|i| {
                let mut h = 0.0;
                for (w, xhat) in table.iter().enumerate() {
                    let f = xhat[i] + y[i];
                    let mut pow = 1.0;
                    for (d, by_state) in coeffs.iter().enumerate().skip(1) {
                        h += mu[w] * d as f64 * by_state[w][i] * pow;
                        pow *= f;
                    }
                }
                h
            })
            .collect()
    }

    fn margin_of(&self, grad: &[f64], y: &[f64]) -> f64 {
        let min_grad = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let dot: f64 = grad.iter().zip(y).map(|(g, v)| g * v).sum();
        self.demand * min_grad - dot
    }

    /// `E_ω[ℓ_{ω,i}(x̂_i(θ, ω) + y_i)]` for every link.
    pub fn expected_latency(&self, theta: f64, y: &[f64]) -> Vec<f64> {
        self.expected_latency_with(&self.forecast_table(theta), y)
    }

    pub fn potential(&self, theta: f64, y: &[f64]) -> f64 {
        self.potential_with(&self.forecast_table(theta), y)
    }

    /// `min_z Σ_i E[ℓ_i] (z_i − y_i)` over the simplex vertices `z`.
    /// Nonnegative (up to tolerance) iff `y` solves the VI.
    pub fn vi_margin(&self, theta: f64, y: &[f64]) -> f64 {
        let grad = self.expected_latency(theta, y);
        self.margin_of(&grad, y)
    }

    /// Solves from the uniform split.
    pub fn solve(&self, theta: f64) -> Result<BestResponse> {
        let n = self.n_links();
        self.solve_from(theta, &vec![self.demand / n as f64; n])
    }

    /// Solves from `start`, which is first projected onto the feasible simplex.
    pub fn solve_from(&self, theta: f64, start: &[f64]) -> Result<BestResponse> {
        let n = self.n_links();
        if start.len() != n {
            return Err(Error::config(format!(
                "start point has {} entries, expected {n}",
                start.len()
            )));
        }
        if self.demand <= 0.0 {
            return Ok(BestResponse {
                y: vec![0.0; n],
                theta,
                potential_value: 0.0,
                vi_margin: 0.0,
                iterations: 0,
            });
        }
        let table = self.forecast_table(theta);
        let mut y = project_onto_simplex(start, self.demand);
        let mut f = self.potential_with(&table, &y);
        let mut step = 1.0;
        let mut trial = vec![0.0; n];

        for iterations in 0..self.max_iter {
            let grad = self.expected_latency_with(&table, &y);
            let vi_margin = self.margin_of(&grad, &y);
            if vi_margin >= -self.tol {
                return Ok(BestResponse {
                    y,
                    theta,
                    potential_value: f,
                    vi_margin,
                    iterations,
                });
            }
            let h_max = self
                .curvature_with(&table, &y)
                .into_iter()
                .fold(0.0, f64::max);
            // Linear objectives accept any step, so go straight for the corner.
            step = if h_max > 0.0 {
                1.0 / h_max
            } else {
                (2.0 * step).max(1e6)
            };

            let mut accepted = false;
            while step >= MIN_STEP {
                for ((t, yi), gi) in trial.iter_mut().zip(&y).zip(&grad) {
                    *t = yi - step * gi;
                }
                let candidate = project_onto_simplex(&trial, self.demand);
                let decrease: f64 = grad
                    .iter()
                    .zip(candidate.iter().zip(&y))
                    .map(|(g, (c, yi))| g * (c - yi))
                    .sum();
                let f_new = self.potential_with(&table, &candidate);
                if f_new <= f + ARMIJO * decrease {
                    accepted = decrease < 0.0 || candidate != y;
                    y = candidate;
                    f = f_new;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // No representable descent left; the iterate is as good as it gets.
                return Err(Error::Solver {
                    theta,
                    iterations,
                    vi_margin,
                    last_iterate: y,
                });
            }
        }
        let vi_margin = self.vi_margin(theta, &y);
        if vi_margin >= -self.tol {
            return Ok(BestResponse {
                y,
                theta,
                potential_value: f,
                vi_margin,
                iterations: self.max_iter,
            });
        }
        Err(Error::Solver {
            theta,
            iterations: self.max_iter,
            vi_margin,
            last_iterate: y,
        })
    }
}

pub fn expected_latency(cfg: &GameConfig, theta: f64, y: &[f64]) -> Vec<f64> {
    BweProblem::from_config(cfg).expected_latency(theta, y)
}

pub fn potential(cfg: &GameConfig, theta: f64, y: &[f64]) -> f64 {
    BweProblem::from_config(cfg).potential(theta, y)
}

pub fn solve_bwe(cfg: &GameConfig, theta: f64) -> Result<BestResponse> {
    BweProblem::from_config(cfg).solve(theta)
}

pub fn verify_vi(cfg: &GameConfig, theta: f64, y: &[f64]) -> f64 {
    BweProblem::from_config(cfg).vi_margin(theta, y)
}

/// Obedience verdict for a signal, using the best response at `θ = 0` as
/// the witness population split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObedienceReport {
    pub obedient: bool,
    pub tol: f64,
    /// Which non-participant split was tested.
    pub witness: &'static str,
    pub y0: BestResponse,
    /// Largest slack of the recommendation-following inequalities.
    pub worst_obedience_slack: f64,
    /// Largest slack of the non-participant equilibrium inequalities.
    pub worst_nash_slack: f64,
    /// `[i][j]`: expected gain from following `i` instead of switching to `j`,
    /// weighted by the recommendation mass on `i`. Positive means violated.
    pub obedience_slacks: Vec<Vec<f64>>,
    /// `[i][j]`: same comparison weighted by the non-participant mass on `i`.
    pub nash_slacks: Vec<Vec<f64>>,
}

pub fn check_obedience(cfg: &GameConfig, tol: f64) -> Result<ObedienceReport> {
    let y0 = solve_bwe(cfg, 0.0)?;
    let n = cfg.n_links();
    let mu = cfg.prior.probs();
    let mut obedience = vec![vec![0.0; n]; n];
    let mut nash = vec![vec![0.0; n]; n];
    for (w, &p) in mu.iter().enumerate() {
        let pi = cfg.signal.row(w);
        let lat: Vec<f64> = (0..n)
            .map(|i| cfg.latency.link_latency(w, i, pi[i] + y0.y[i]))
            .collect();
        for i in 0..n {
            for j in 0..n {
                let diff = lat[i] - lat[j];
                obedience[i][j] += p * pi[i] * diff;
                nash[i][j] += p * y0.y[i] * diff;
            }
        }
    }
    let worst = |m: &[Vec<f64>]| {
        m.iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let worst_obedience_slack = worst(&obedience);
    let worst_nash_slack = worst(&nash);
    Ok(ObedienceReport {
        obedient: worst_obedience_slack <= tol && worst_nash_slack <= tol,
        tol,
        witness: "y(0)",
        y0,
        worst_obedience_slack,
        worst_nash_slack,
        obedience_slacks: obedience,
        nash_slacks: nash,
    })
}

/// Largest `‖y(θ_{t+1}) − y(θ_t)‖₁ / Δθ` over a uniform grid on `[0, 1]`.
pub fn lipschitz_estimate(cfg: &GameConfig, grid_size: usize) -> Result<f64> {
    lipschitz_estimate_on(cfg, 0.0, 1.0, grid_size)
}

/// [`lipschitz_estimate`] restricted to `[lo, hi]`.
pub fn lipschitz_estimate_on(cfg: &GameConfig, lo: f64, hi: f64, grid_size: usize) -> Result<f64> {
    if grid_size < 2 {
        return Err(Error::config("lipschitz grid needs at least 2 points"));
    }
    if !(lo < hi) {
        return Err(Error::config(format!("empty interval [{lo}, {hi}]")));
    }
    let problem = BweProblem::from_config(cfg);
    let dt = (hi - lo) / (grid_size - 1) as f64;
    let mut prev = problem.solve(lo)?.y;
    let mut worst: f64 = 0.0;
    for t in 1..grid_size {
        let y = problem.solve(lo + t as f64 * dt)?.y;
        let dist: f64 = y.iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum();
        worst = worst.max(dist / dt);
        prev = y;
    }
    Ok(worst)
}
