//! The two-link affine network used throughout the examples and tests.

use crate::model::{DisobedienceMatrix, GameConfig, LatencyModel, Prior, Signal};

/// Two parallel links, two states, affine latencies:
///
/// ```text
///            link 1  link 2
/// alpha_0 w1    5      25
///         w2   20      15
/// alpha_1 w1    4       2
///         w2    1       2
/// ```
pub fn two_link_affine_latency() -> LatencyModel {
    LatencyModel::new(
        vec!["w1".into(), "w2".into()],
        vec![
            vec![vec![5.0, 25.0], vec![20.0, 15.0]],
            vec![vec![4.0, 2.0], vec![1.0, 2.0]],
        ],
    )
    .expect("preset latency model is valid")
}

/// Recommends link 1 in state w1 and link 2 in state w2, with mass `nu`.
/// Obedient on [`two_link_affine_latency`] with prior (0.6, 0.4).
pub fn state_revealing_signal(nu: f64) -> Signal {
    Signal::new(vec![vec![nu, 0.0], vec![0.0, nu]], nu).expect("preset signal is valid")
}

/// Baseline run on the two-link network: prior (0.6, 0.4), `θ(1) = 0.5`,
/// `θ̂(1) = 0.25`, `m_max` at its default bound, state-revealing signal.
pub fn two_link_baseline(nu: f64) -> GameConfig {
    let mut cfg = GameConfig::new(
        two_link_affine_latency(),
        Prior::new(vec![0.6, 0.4]).expect("preset prior is valid"),
        state_revealing_signal(nu),
        DisobedienceMatrix::default_for(2).expect("two links"),
    )
    .expect("preset config is valid");
    cfg.m_init = 0.5 * cfg.m_max;
    cfg.theta_hat_init = 0.25;
    cfg.require_strict_increase = true;
    cfg
}
