//! Test-only oracles. Nothing here calls into the solver; expected
//! latencies and potentials are rebuilt from the raw coefficients.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use signal_routing::model::{DisobedienceMatrix, GameConfig, LatencyModel, Prior, Signal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random point on the simplex of the given mass.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize, mass: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut v: Vec<f64> = raw.iter().map(|r| r / total * mass).collect();
    let drift = mass - v.iter().sum::<f64>();
    v[0] += drift;
    v[0] = v[0].max(0.0);
    v
}

/// Signal rows whose sum is exactly `nu` in floating point.
pub fn random_signal(rng: &mut ChaCha8Rng, s: usize, n: usize, nu: f64) -> Signal {
    let rows = (0..s).map(|_| random_simplex(rng, n, nu)).collect();
    Signal::new(rows, nu).expect("random signal")
}

/// Strictly increasing affine latencies on `n` links and `s` states.
pub fn random_affine_config(rng: &mut ChaCha8Rng, n: usize, s: usize) -> GameConfig {
    let states = (0..s).map(|w| format!("s{w}")).collect();
    let a0: Vec<Vec<f64>> = (0..s)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect())
        .collect();
    let a1: Vec<Vec<f64>> = (0..s)
        .map(|_| (0..n).map(|_| rng.gen_range(1.0..5.0)).collect())
        .collect();
    let latency = LatencyModel::new(states, vec![a0, a1]).unwrap();
    let mu: Vec<f64> = {
        let raw: Vec<f64> = (0..s).map(|_| rng.gen_range(0.2..1.0)).collect();
        let t: f64 = raw.iter().sum();
        let mut mu: Vec<f64> = raw.iter().map(|r| r / t).collect();
        let drift = 1.0 - mu.iter().sum::<f64>();
        mu[0] += drift;
        mu
    };
    let nu = rng.gen_range(0.1..0.9);
    let signal = loop {
        let rows: Vec<Vec<f64>> = (0..s).map(|_| random_simplex(rng, n, nu)).collect();
        if let Ok(sig) = Signal::new(rows, nu) {
            break sig;
        }
    };
    let mut cfg = GameConfig::new(
        latency,
        Prior::new(mu).unwrap(),
        signal,
        DisobedienceMatrix::default_for(n).unwrap(),
    )
    .unwrap();
    cfg.require_strict_increase = true;
    cfg
}

/// Participant flow forecast written out from the definition.
fn forecast(cfg: &GameConfig, theta: f64, w: usize) -> Vec<f64> {
    let n = cfg.n_links();
    let pi = cfg.signal.row(w);
    (0..n)
        .map(|i| {
            let inflow: f64 = (0..n).map(|j| cfg.disobedience.get(j, i) * pi[j]).sum();
            pi[i] * (1.0 - theta) + theta * inflow
        })
        .collect()
}

/// Expected latency of one link at non-participant flow `v`.
pub fn oracle_link_latency(cfg: &GameConfig, theta: f64, link: usize, v: f64) -> f64 {
    let coeffs = cfg.latency.coeffs();
    cfg.prior
        .probs()
        .iter()
        .enumerate()
        .map(|(w, mu)| {
            let f = forecast(cfg, theta, w)[link] + v;
            let lat: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(d, by_state)| by_state[w][link] * f.powi(d as i32))
                .sum();
            mu * lat
        })
        .sum()
}

/// `∫_0^v E[ℓ_link] ds` by composite Simpson (exact for cubics).
pub fn oracle_link_potential(cfg: &GameConfig, theta: f64, link: usize, v: f64) -> f64 {
    let panels = 8;
    let h = v / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = p as f64 * h;
        let b = a + h;
        acc += h / 6.0
            * (oracle_link_latency(cfg, theta, link, a)
                + 4.0 * oracle_link_latency(cfg, theta, link, 0.5 * (a + b))
                + oracle_link_latency(cfg, theta, link, b));
    }
    acc
}

/// Minimizes the potential over the lattice `{y : y_i ∈ step·ℕ, Σ y = mass}`
/// by exhaustive search. Supports two or three links.
pub fn grid_best_response(cfg: &GameConfig, theta: f64, step: f64) -> Vec<f64> {
    let n = cfg.n_links();
    let mass = cfg.b_mass();
    let cells = (mass / step).round() as usize;
    let h = mass / cells as f64;
    let tables: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..=cells)
                .map(|c| oracle_link_potential(cfg, theta, i, c as f64 * h))
                .collect()
        })
        .collect();
    let mut best = (f64::INFINITY, vec![0.0; n]);
    match n {
        2 => {
            for a in 0..=cells {
                let f = tables[0][a] + tables[1][cells - a];
                if f < best.0 {
                    best = (f, vec![a as f64 * h, (cells - a) as f64 * h]);
                }
            }
        }
        3 => {
            for a in 0..=cells {
                for b in 0..=(cells - a) {
                    let c = cells - a - b;
                    let f = tables[0][a] + tables[1][b] + tables[2][c];
                    if f < best.0 {
                        best = (f, vec![a as f64 * h, b as f64 * h, c as f64 * h]);
                    }
                }
            }
        }
        _ => panic!("grid oracle supports 2 or 3 links"),
    }
    best.1
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
