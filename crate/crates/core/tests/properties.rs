mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use signal_routing::dynamics::{
    instantaneous_regret, recover_theta, simulate, step, SimulationState,
};
use signal_routing::equilibrium::{expected_latency, potential, solve_bwe, verify_vi, BweProblem};
use signal_routing::model::{
    p_flows, DisobedienceMatrix, LatencyModel, Scenario, OUTPUT_SIMPLEX_TOL,
};
use signal_routing::presets::two_link_baseline;

fn arb_latency() -> impl Strategy<Value = LatencyModel> {
    (2usize..5, 1usize..4, 0usize..4).prop_flat_map(|(n, s, deg)| {
        prop::collection::vec(
            prop::collection::vec(prop::collection::vec(0.0f64..10.0, n), s),
            deg + 1,
        )
        .prop_map(move |coeffs| {
            let states = (0..s).map(|w| format!("s{w}")).collect();
            LatencyModel::new(states, coeffs).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn p_flows_stay_on_simplex_and_are_affine(seed in any::<u64>(), n in 2usize..6, theta in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let nu = r.gen_range(0.0..=1.0);
        let sig = random_signal(&mut r, 1, n, nu);
        let p = DisobedienceMatrix::new(
            (0..n).map(|i| {
                let mut row = random_simplex(&mut r, n - 1, 1.0);
                row.insert(i, 0.0);
                row
            }).collect()
        );
        // random rows may miss the 1e-12 sum check; fall back to the default
        let p = p.unwrap_or_else(|_| DisobedienceMatrix::default_for(n).unwrap());
        let x = p_flows(&sig, &p, theta, 0);
        prop_assert!(x.iter().all(|v| *v >= 0.0));
        prop_assert!((x.iter().sum::<f64>() - nu).abs() < OUTPUT_SIMPLEX_TOL);
        let x0 = p_flows(&sig, &p, 0.0, 0);
        let x1 = p_flows(&sig, &p, 1.0, 0);
        for i in 0..n {
            prop_assert!((x[i] - ((1.0 - theta) * x0[i] + theta * x1[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn latency_is_monotone(model in arb_latency(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = model.n_links();
        let f: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..2.0)).collect();
        let base = model.eval(0, &f).unwrap();
        for i in 0..n {
            let mut g = f.clone();
            g[i] += 1e-3;
            prop_assert!(model.eval(0, &g).unwrap()[i] >= base[i]);
        }
    }

    #[test]
    fn m_max_bounds_instantaneous_regret(model in arb_latency(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = model.n_links();
        let bound = model.m_max_default();
        let nu = r.gen_range(0.0..=1.0);
        let sig = random_signal(&mut r, model.n_states(), n, nu);
        let p = DisobedienceMatrix::default_for(n).unwrap();
        for w in 0..model.n_states() {
            let mass = r.gen_range(0.0..=1.0);
            let f = random_simplex(&mut r, n, mass);
            let ell = model.eval(w, &f).unwrap();
            let u = instantaneous_regret(&sig, &p, &ell, w);
            prop_assert!(u.abs() <= bound + 1e-12, "u = {}, bound = {}", u, bound);
        }
    }

    #[test]
    fn recover_theta_round_trips(seed in any::<u64>(), n in 2usize..5, theta in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let nu = r.gen_range(0.05..=1.0);
        let sig = random_signal(&mut r, 1, n, nu);
        let p = DisobedienceMatrix::default_for(n).unwrap();
        let y = random_simplex(&mut r, n, 1.0 - nu);
        let x = p_flows(&sig, &p, theta, 0);
        let f: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        match recover_theta(&sig, &p, &f, 0, &y) {
            Ok(rec) => prop_assert!((rec - theta).abs() < 1e-10, "{} vs {}", rec, theta),
            Err(_) => {
                // only nearly uniform recommendations are uninformative
                let d = p.transpose_minus_identity(sig.row(0));
                prop_assert!(d.iter().map(|v| v * v).sum::<f64>() < 1e-20);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn solver_output_is_certified_and_minimal(seed in any::<u64>(), n in 2usize..4, s in 1usize..4) {
        let mut r = rng(seed);
        let cfg = random_affine_config(&mut r, n, s);
        let theta = r.gen_range(0.0..=1.0);
        let br = solve_bwe(&cfg, theta).unwrap();
        prop_assert!(br.y.iter().all(|v| *v >= 0.0));
        prop_assert!((br.y.iter().sum::<f64>() - cfg.b_mass()).abs() < OUTPUT_SIMPLEX_TOL);
        prop_assert!(br.vi_margin >= -cfg.solver_tol);
        prop_assert!(verify_vi(&cfg, theta, &br.y) >= -cfg.solver_tol);
        for _ in 0..100 {
            let z = random_simplex(&mut r, n, cfg.b_mass());
            prop_assert!(br.potential_value <= potential(&cfg, theta, &z) + 1e-12);
        }
    }

    #[test]
    fn solver_is_start_independent(seed in any::<u64>(), n in 2usize..4) {
        let mut r = rng(seed);
        let cfg = random_affine_config(&mut r, n, 2);
        let theta = r.gen_range(0.0..=1.0);
        let problem = BweProblem::from_config(&cfg);
        let mut corner = vec![0.0; n];
        corner[n - 1] = cfg.b_mass();
        let a = problem.solve(theta).unwrap();
        let b = problem.solve_from(theta, &corner).unwrap();
        prop_assert!(linf(&a.y, &b.y) < 1e-6);
    }

    #[test]
    fn potential_matches_quadrature(seed in any::<u64>(), n in 2usize..4) {
        let mut r = rng(seed);
        let cfg = random_affine_config(&mut r, n, 2);
        let theta = r.gen_range(0.0..=1.0);
        let y = random_simplex(&mut r, n, cfg.b_mass());
        let oracle: f64 = (0..n).map(|i| oracle_link_potential(&cfg, theta, i, y[i])).sum();
        prop_assert!((potential(&cfg, theta, &y) - oracle).abs() < 1e-10 * oracle.abs().max(1.0));
        let lat = expected_latency(&cfg, theta, &y);
        for i in 0..n {
            prop_assert!((lat[i] - oracle_link_latency(&cfg, theta, i, y[i])).abs() < 1e-12 * lat[i].max(1.0));
        }
    }
}

#[test]
fn degenerate_populations() {
    let full = two_link_baseline(1.0);
    assert_eq!(solve_bwe(&full, 0.7).unwrap().y, vec![0.0, 0.0]);

    let mut r = rng(5);
    let mut cfg = random_affine_config(&mut r, 3, 2);
    cfg.signal = signal_routing::model::Signal::new(vec![vec![0.0; 3]; 2], 0.0).unwrap();
    let a = solve_bwe(&cfg, 0.0).unwrap();
    let b = solve_bwe(&cfg, 0.9).unwrap();
    assert!((a.y.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert!(linf(&a.y, &b.y) < 1e-12);
}

#[test]
fn polynomial_latencies_solve() {
    // cubic latencies exercise the higher-degree potential terms
    let latency = LatencyModel::new(
        vec!["a".into(), "b".into()],
        vec![
            vec![vec![1.0, 2.0, 0.5], vec![0.0, 1.0, 3.0]],
            vec![vec![1.0, 0.5, 2.0], vec![2.0, 1.0, 0.1]],
            vec![vec![0.0, 3.0, 1.0], vec![1.0, 0.0, 0.0]],
            vec![vec![2.0, 0.0, 1.0], vec![0.5, 4.0, 1.0]],
        ],
    )
    .unwrap();
    let cfg = signal_routing::model::GameConfig::new(
        latency,
        signal_routing::model::Prior::new(vec![0.3, 0.7]).unwrap(),
        signal_routing::model::Signal::new(vec![vec![0.1, 0.1, 0.2], vec![0.2, 0.2, 0.0]], 0.4)
            .unwrap(),
        DisobedienceMatrix::default_for(3).unwrap(),
    )
    .unwrap();
    for theta in [0.0, 0.3, 1.0] {
        let br = solve_bwe(&cfg, theta).unwrap();
        assert!(br.vi_margin >= -1e-8);
        let grid = grid_best_response(&cfg, theta, 1e-3);
        assert!(linf(&br.y, &grid) < 2e-3, "{:?} vs {:?}", br.y, grid);
    }
}

#[test]
fn trajectories_conserve_mass_and_bound_regret() {
    for scenario in [
        Scenario::Baseline,
        Scenario::Discounted { lambda: 0.9 },
        Scenario::DynamicNu,
    ] {
        let mut cfg = two_link_baseline(0.5);
        cfg.scenario = scenario;
        cfg.rounds = 400;
        cfg.seed = 11;
        let traj = simulate(&cfg).unwrap();
        for rec in &traj {
            let mass: f64 = rec.x.iter().chain(&rec.y).sum();
            let expected = match scenario {
                Scenario::DynamicNu => rec.nu + (1.0 - cfg.nu()),
                _ => 1.0,
            };
            assert!(
                (mass - expected).abs() < 1e-10,
                "{scenario:?} round {}",
                rec.k
            );
            assert!(rec.m.abs() <= cfg.m_max && rec.m_next.abs() <= cfg.m_max);
            assert!((0.0..=1.0).contains(&rec.theta) && (0.0..=1.0).contains(&rec.theta_hat));
        }
    }
}

#[test]
fn recorded_flows_reveal_theta() {
    // Non-participants can back out theta from observed latencies.
    let mut cfg = two_link_baseline(0.5);
    cfg.seed = 3;
    let mut state = SimulationState::initial(&cfg);
    for _ in 0..30 {
        let (next, rec) = step(&cfg, state).unwrap();
        state = next;
        let totals: Vec<f64> = (0..2)
            .map(|i| {
                signal_routing::dynamics::invert_link_latency(
                    &cfg.latency,
                    rec.omega,
                    i,
                    rec.ell[i],
                )
                .unwrap()
            })
            .collect();
        let theta =
            recover_theta(&cfg.signal, &cfg.disobedience, &totals, rec.omega, &rec.y).unwrap();
        assert!(
            (theta - rec.theta).abs() < 1e-8,
            "round {}: {theta} vs {}",
            rec.k,
            rec.theta
        );
    }
}

#[test]
fn same_seed_same_trajectory() {
    let mut cfg = two_link_baseline(0.5);
    cfg.rounds = 300;
    cfg.seed = 99;
    assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed = 100;
    assert_ne!(simulate(&cfg).unwrap(), simulate(&other).unwrap());
}
