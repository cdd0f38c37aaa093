mod common;

use common::{random_graph, uniform_states};
use ftc_core::consensus::{consensus_limit, make_process, Engine, RatioProcess};
use ftc_core::graph::{DiGraph, GraphModel};
use ftc_core::hull::DEFAULT_HULL_TOL;
use ftc_core::scalar::{max_pairwise_distance, Norm};
use ftc_core::termination::{
    bandwidth_bits, bit_step, minmax_envelope, radius_step, run_box_termination, run_hull_termination,
    TerminationError,
};
use ftc_core::{run_algorithm1, ConsensusProcess, StochasticMatrix, StopConfig, StoppingMethod, WeightKind};
use proptest::prelude::*;

fn column(g: &DiGraph) -> StochasticMatrix<f64> {
    StochasticMatrix::for_graph(g, WeightKind::ColumnStochastic)
}

fn norm() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L1), Just(Norm::L2), Just(Norm::LInf)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn windows_satisfy_ball_and_envelope_bounds(
        n in 1usize..=25,
        d in 1usize..=4,
        seed in any::<u64>(),
        norm in norm(),
        slack in 0usize..3,
    ) {
        let g = random_graph(n, seed);
        let x0 = uniform_states(n, d, seed);
        let mut cfg = StopConfig::new(1e-4);
        cfg.norm = norm;
        cfg.d_bound = Some(g.diameter() + slack);
        cfg.record_states = true;
        let tr = run_algorithm1(&g, &column(&g), x0.clone(), &cfg).unwrap();
        prop_assert!(tr.simultaneous());
        prop_assert!(!tr.windows.is_empty());
        for w in &tr.windows {
            prop_assert!(w.ball_excess(norm) <= 1e-9, "ball excess {}", w.ball_excess(norm));
            prop_assert!(w.envelope_bound_excess(norm) <= 1e-9);
            prop_assert!(w.rbar.iter().all(|r| *r >= 0.0));
        }
        let avg = consensus_limit(&x0, Engine::Ratio, &column(&g)).unwrap();
        let chk = tr.guarantee(Some(&avg));
        prop_assert!(chk.ok, "{:?}", chk);

        // Recorded states line up with the windows and the final states.
        let states = tr.states.as_ref().unwrap();
        prop_assert_eq!(states.len(), tr.halt_k + 1);
        prop_assert_eq!(&states[tr.halt_k], &tr.final_states);
        for w in &tr.windows {
            prop_assert_eq!(&states[w.start_k], &w.start_states);
            prop_assert_eq!(&states[w.end_k], &w.end_states);
        }
    }

    #[test]
    fn envelope_holds_every_state(n in 1usize..20, d in 1usize..4, seed in any::<u64>()) {
        let g = random_graph(n, seed);
        let mut p = RatioProcess::new(uniform_states(n, d, seed), column(&g)).unwrap();
        let mut prev = minmax_envelope(p.estimates(), 0);
        for k in 1..100 {
            p.advance().unwrap();
            let env = minmax_envelope(p.estimates(), k);
            prop_assert!(p.estimates().iter().all(|c| env.contains(c)));
            for s in 0..d {
                // The ratio division may round one ulp past the old bound.
                let slack = 1e-12 * prev.upper[s].abs().max(prev.lower[s].abs()).max(1.0);
                prop_assert!(env.upper[s] <= prev.upper[s] + slack && env.lower[s] >= prev.lower[s] - slack);
            }
            prev = env;
        }
    }
}

#[test]
fn radius_vanishes_and_envelope_converges() {
    for seed in 0..30u64 {
        let n = 3 + (seed as usize * 7) % 23;
        let g = random_graph(n, seed);
        // A threshold far below the target keeps windows coming after every
        // node's radius has dropped under 1e-6.
        let mut cfg = StopConfig::new(1e-11);
        cfg.k_max = 100_000;
        let tr = run_algorithm1(&g, &column(&g), uniform_states(n, 3, seed), &cfg).unwrap();
        let w = tr.windows.iter().find(|w| w.max_radius() < 1e-6);
        assert!(w.is_some(), "seed {seed}: no window with every radius below 1e-6");
        let spread = minmax_envelope(&tr.final_states, tr.halt_k).spread(Norm::L2);
        assert!(spread < 1e-6, "seed {seed}: envelope {spread}");
        assert!(tr.windows.last().unwrap().rbar.iter().any(|&r| r < 1e-11));
    }
}

#[test]
fn ring_with_loose_bound_halts_together() {
    let g = DiGraph::generate(9, GraphModel::Ring, 0).unwrap();
    let mut cfg = StopConfig::new(1e-3);
    cfg.d_bound = Some(12);
    let tr = run_algorithm1(&g, &column(&g), uniform_states(9, 2, 0), &cfg).unwrap();
    assert!(tr.simultaneous());
    assert_eq!(tr.window_len, 12);
    assert_eq!((tr.halt_k - 1) % 12, 0);
    assert!(tr.guarantee(None).ok);
}

#[test]
fn bits_reach_everyone_in_diameter_rounds() {
    for seed in 0..20 {
        let g = random_graph(15, seed);
        for start in 0..15 {
            let mut b = vec![false; 15];
            b[start] = true;
            for _ in 0..g.diameter() {
                b = bit_step(&g, &b);
            }
            assert!(b.iter().all(|&x| x));
        }
    }
}

#[test]
fn radius_is_max_over_in_neighbors() {
    let g = DiGraph::from_edges(3, [(1, 0), (2, 1), (0, 2)]).unwrap();
    let r_old = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
    let r_new = vec![vec![0.0, 1.0], vec![0.5, 0.0], vec![0.0, 0.0]];
    let out = radius_step(&g, &r_new, &r_old, &[0.0, 0.25, 3.0], Norm::L2).unwrap();
    // Node 0 hears from {0, 2}: max(|r0_new - r0_old| + R0, |r0_new - r2_old| + R2).
    assert_eq!(out[0], (1.0f64 + 3.0).max(1.0 + 3.0));
    // Node 1 hears from {0, 1}.
    assert_eq!(out[1], (0.5f64 + 0.0).max(0.5 + 0.25));
}

#[test]
fn invalid_configs() {
    let g = random_graph(6, 1);
    let p = column(&g);
    let x0 = uniform_states(6, 2, 1);
    for rho in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(run_algorithm1(&g, &p, x0.clone(), &StopConfig::new(rho)), Err(TerminationError::InvalidRho)));
    }
    if g.diameter() > 0 {
        let mut cfg = StopConfig::new(0.1);
        cfg.d_bound = Some(g.diameter() - 1);
        assert!(matches!(run_algorithm1(&g, &p, x0.clone(), &cfg), Err(TerminationError::BoundBelowDiameter { .. })));
    }
    let mut cfg = StopConfig::new(1e-300);
    cfg.k_max = 50;
    assert!(matches!(run_algorithm1(&g, &p, x0, &cfg), Err(TerminationError::NotHalted { k_max: 50, .. })));
}

#[test]
fn all_criteria_meet_the_guarantee() {
    for seed in 0..10 {
        let g = random_graph(10, seed);
        let x0 = uniform_states(10, 3, seed);
        let cfg = StopConfig::new(1e-3);
        let avg = consensus_limit(&x0, Engine::Ratio, &column(&g)).unwrap();
        let tr = run_algorithm1(&g, &column(&g), x0.clone(), &cfg).unwrap();
        assert!(tr.guarantee(Some(&avg)).ok);

        let mut proc = RatioProcess::new(x0.clone(), column(&g)).unwrap();
        let boxed = run_box_termination(&g, &mut proc, &cfg).unwrap();
        assert!(boxed.simultaneous());
        assert!(max_pairwise_distance(&boxed.final_states, Norm::L2) <= 2e-3);

        let mut proc = RatioProcess::new(x0.clone(), column(&g)).unwrap();
        let hull = run_hull_termination(&g, &mut proc, &cfg, DEFAULT_HULL_TOL).unwrap();
        assert!(hull.simultaneous());
        assert!(max_pairwise_distance(&hull.final_states, Norm::L2) <= 2e-3);
        assert!(hull.max_hull_size >= 1 && hull.max_hull_size <= 10);
    }
}

#[test]
fn box_and_hull_agree_in_one_dimension() {
    for seed in 0..10 {
        let g = random_graph(8, seed);
        let x0 = uniform_states(8, 1, seed);
        let cfg = StopConfig::new(1e-4);
        let mut a = RatioProcess::new(x0.clone(), column(&g)).unwrap();
        let mut b = RatioProcess::new(x0, column(&g)).unwrap();
        let boxed = run_box_termination(&g, &mut a, &cfg).unwrap();
        let hull = run_hull_termination(&g, &mut b, &cfg, DEFAULT_HULL_TOL).unwrap();
        assert_eq!(boxed.halt_k, hull.halt_k);
        for (u, v) in boxed.window_values.iter().zip(&hull.window_values) {
            assert!((u - v).abs() <= 1e-12, "{u} vs {v}");
        }
    }
}

#[test]
fn radius_protocol_runs_on_the_row_engine() {
    let g = random_graph(12, 4);
    let a = StochasticMatrix::for_graph(&g, WeightKind::RowStochastic);
    let x0 = uniform_states(12, 2, 4);
    let limit = consensus_limit(&x0, Engine::Row, &a).unwrap();
    let mut proc = make_process(Engine::Row, x0, a).unwrap();
    let tr = ftc_core::run_radius_termination(&g, proc.as_mut(), &StopConfig::new(1e-4)).unwrap();
    assert!(tr.simultaneous());
    assert!(tr.guarantee(Some(&limit)).ok);
}

#[test]
fn bandwidth_accounting() {
    assert_eq!(bandwidth_bits(StoppingMethod::Radius, 32, 10, 0), 33);
    assert_eq!(bandwidth_bits(StoppingMethod::Box, 32, 10, 0), 640);
    assert_eq!(bandwidth_bits(StoppingMethod::Hull, 32, 10, 4), 1280);
}

#[test]
fn f32_algorithm1_smoke() {
    let g = random_graph(10, 2);
    let p = StochasticMatrix::<f32>::for_graph(&g, WeightKind::ColumnStochastic);
    let x0: Vec<Vec<f32>> = uniform_states(10, 3, 2)
        .into_iter()
        .map(|v| v.into_iter().map(|c| c as f32).collect())
        .collect();
    let tr = run_algorithm1(&g, &p, x0, &StopConfig::new(1e-3f32)).unwrap();
    assert!(tr.simultaneous());
    assert!(tr.guarantee(None).ok);
}
