//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ftc_core::applications::funccalc::{funccalc_init, holder_check, HolderFunction, MaxCoordinate};
use ftc_core::applications::lse::{run_lse_consensus, Basis, LseStatus};
use ftc_core::consensus::{
    consensus_limit, is_convex_decreasing, make_process, ratio_step, scalar_vector_equivalence_check,
};
use ftc_core::hull::{extreme_points, run_hull_consensus, DEFAULT_HULL_TOL};
use ftc_core::scalar::Norm;
use ftc_core::termination::{bandwidth_bits, minmax_envelope};
use ftc_core::{
    run_algorithm1, DiGraph, Engine, GraphModel, PointSet, StochasticMatrix, StopConfig, StoppingMethod,
    TerminationTrace, WeightKind,
};
use ftc_harness::experiment::initial_states;
use ftc_harness::{run_experiment, ExperimentConfig, RunStatus, Stopping, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn graph(n: usize, seed: u64) -> DiGraph {
    let p = (2.5 / n as f64).clamp(0.15, 0.9);
    DiGraph::generate(n, GraphModel::ErdosRenyi { p }, seed).expect("graph")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn c1_hull_nesting() -> Outcome {
    let t = Instant::now();
    let mut pairs = 0;
    for run in 0..100u64 {
        let n = 5 + (run as usize * 7) % 16;
        let d = 2 + (run as usize % 3);
        let g = graph(n, run);
        for engine in [Engine::Ratio, Engine::Row] {
            let w = StochasticMatrix::for_graph(&g, engine.weight_kind());
            let mut p = make_process(engine, initial_states(n, d, run), w).map_err(|e| e.to_string())?;
            let mut prev = PointSet::new(p.estimates().to_vec()).map_err(|e| e.to_string())?;
            for k in 0..50 {
                p.advance().map_err(|e| e.to_string())?;
                let next = PointSet::new(p.estimates().to_vec()).map_err(|e| e.to_string())?;
                let ok = is_convex_decreasing(&prev, &next, DEFAULT_HULL_TOL).map_err(|e| e.to_string())?;
                ensure(ok, || format!("run {run} {engine:?}: hull grew at step {}", k + 1))?;
                prev = next;
                pairs += 1;
            }
        }
    }
    within(t.elapsed(), 30.0)?;
    Ok(format!("{pairs} consecutive snapshot pairs nested in {:.2}s", t.elapsed().as_secs_f64()))
}

fn c2_hull_exactness() -> Outcome {
    let t = Instant::now();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=15);
        let d = rng.random_range(1..=3);
        let g = graph(n, seed);
        let data: Vec<PointSet<f64>> = (0..n)
            .map(|_| {
                let m = rng.random_range(1..=3);
                PointSet::new((0..m).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect())
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let union = PointSet::union(d, data.iter()).map_err(|e| e.to_string())?;
        let central = extreme_points(&union, DEFAULT_HULL_TOL).map_err(|e| e.to_string())?;
        let ext = run_hull_consensus(&data, &g, g.diameter(), DEFAULT_HULL_TOL).map_err(|e| e.to_string())?;
        for (i, e) in ext.iter().enumerate() {
            ensure(*e == central, || format!("instance {seed}: node {i} differs from centralized set"))?;
        }
    }
    within(t.elapsed(), 10.0)?;
    Ok(format!("50 instances exact at every node in {:.2}s", t.elapsed().as_secs_f64()))
}

/// The 50 traces shared by criteria 3, 4 and 6.
fn algorithm1_traces() -> Result<Vec<(DiGraph, TerminationTrace<f64>)>, String> {
    (0..50u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let n = rng.random_range(2..=25);
            let d = rng.random_range(1..=5);
            let g = graph(n, seed);
            let p = StochasticMatrix::for_graph(&g, WeightKind::ColumnStochastic);
            let mut cfg = StopConfig::new(10f64.powi(-rng.random_range(2..=6)));
            cfg.norm = [Norm::L1, Norm::L2, Norm::LInf][seed as usize % 3];
            cfg.d_bound = Some(g.diameter() + rng.random_range(0..=2));
            cfg.record_states = true;
            let tr = run_algorithm1(&g, &p, initial_states(n, d, seed), &cfg).map_err(|e| format!("trace {seed}: {e}"))?;
            Ok((g, tr))
        })
        .collect()
}

fn c3_ball_containment(traces: &[(DiGraph, TerminationTrace<f64>)]) -> Outcome {
    let mut windows = 0;
    for (idx, (_, tr)) in traces.iter().enumerate() {
        let states = tr.states.as_ref().ok_or("states not recorded")?;
        for w in &tr.windows {
            let (start, end) = (&states[w.start_k], &states[w.end_k]);
            for (i, ri) in end.iter().enumerate() {
                for (j, rj) in start.iter().enumerate() {
                    let dist = tr.norm.dist(ri, rj);
                    ensure(dist <= w.rbar[i] + 1e-9, || {
                        format!("trace {idx} window {}: |r_{i} - r_{j}| = {dist} > R = {}", w.l, w.rbar[i])
                    })?;
                }
            }
            windows += 1;
        }
    }
    Ok(format!("{windows} windows over {} traces", traces.len()))
}

fn c4_radius_bound(traces: &[(DiGraph, TerminationTrace<f64>)]) -> Outcome {
    let mut windows = 0;
    for (idx, (_, tr)) in traces.iter().enumerate() {
        let states = tr.states.as_ref().ok_or("states not recorded")?;
        for w in &tr.windows {
            let spread = minmax_envelope(&states[w.start_k], w.start_k).spread(tr.norm);
            let len = (w.end_k - w.start_k) as f64;
            for (i, &r) in w.rbar.iter().enumerate() {
                ensure(r <= len * spread + 1e-9, || {
                    format!("trace {idx} window {} node {i}: R = {r} > {len} * {spread}", w.l)
                })?;
            }
            windows += 1;
        }
    }
    // Vanishing: every node's window radius drops below 1e-6.
    let mut worst_k = 0;
    for seed in 0..30u64 {
        let n = 2 + (seed as usize * 5) % 24;
        let g = graph(n, 500 + seed);
        let p = StochasticMatrix::for_graph(&g, WeightKind::ColumnStochastic);
        let mut cfg = StopConfig::new(1e-11);
        cfg.k_max = 100_000;
        let tr = run_algorithm1(&g, &p, initial_states(n, 3, seed), &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let w = tr.windows.iter().find(|w| w.max_radius() < 1e-6);
        let w = w.ok_or_else(|| format!("seed {seed}: radii never all below 1e-6"))?;
        worst_k = worst_k.max(w.end_k);
    }
    Ok(format!("bound holds on {windows} windows; all radii < 1e-6 by k = {worst_k} on 30 instances"))
}

fn large_graph() -> Result<DiGraph, String> {
    for seed in 0..10_000u64 {
        let g = DiGraph::generate(25, GraphModel::ErdosRenyi { p: 0.1 }, seed).map_err(|e| e.to_string())?;
        if g.diameter() == 6 {
            return Ok(g);
        }
    }
    Err("no diameter-6 instance found".into())
}

fn c5_large_instance() -> Result<(String, bool), String> {
    let g = large_graph()?;
    let seed = g.seed().unwrap_or(0);
    let cfg = ExperimentConfig {
        n: 25,
        dim: 10,
        topology: Topology::ErdosRenyi,
        edge_prob: 0.1,
        seed,
        engine: Engine::Ratio,
        stopping: Stopping::Radius,
        rho: 0.01,
        rho_relative: true,
        ..Default::default()
    };
    let t = Instant::now();
    let rep = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let s = &rep.summary;
    ensure(s.diameter == 6, || format!("diameter {}", s.diameter))?;
    ensure(s.status == RunStatus::Halted, || format!("status {:?}", s.status))?;
    let k = s.halt_k.unwrap_or(0);
    ensure((s.diameter..=600).contains(&k), || format!("halt at {k}"))?;
    ensure(s.final_spread <= 2.0 * s.rho, || format!("spread {} > 2 rho", s.final_spread))?;
    ensure(s.max_distance_to_limit <= 2.0 * s.rho, || format!("distance {} > 2 rho", s.max_distance_to_limit))?;
    within(elapsed, 5.0)?;
    Ok((
        format!(
            "seed {seed}, D = 6, rho = {:.4}, halt at k = {k}, spread {:.2e}, to average {:.2e}, {:.3}s",
            s.rho,
            s.final_spread,
            s.max_distance_to_limit,
            elapsed.as_secs_f64()
        ),
        s.simultaneous == Some(true),
    ))
}

fn c6_simultaneity(traces: &[(DiGraph, TerminationTrace<f64>)], large_simultaneous: bool) -> Outcome {
    for (idx, (_, tr)) in traces.iter().enumerate() {
        ensure(tr.node_halt_k.iter().all(|&k| k == tr.halt_k), || format!("trace {idx} halted unevenly"))?;
    }
    ensure(large_simultaneous, || "25-node run halted unevenly".into())?;
    Ok(format!("{} traces plus the 25-node run", traces.len()))
}

fn c7_bandwidth() -> Outcome {
    let radius = bandwidth_bits(StoppingMethod::Radius, 32, 10, 0);
    let boxed = bandwidth_bits(StoppingMethod::Box, 32, 10, 0);
    ensure(radius == 33, || format!("radius {radius}"))?;
    ensure(boxed == 640, || format!("box {boxed}"))?;
    ensure(boxed > 19 * radius, || "ratio not above 19".into())?;
    Ok(format!("radius {radius} bits, box {boxed} bits, ratio {:.2}", boxed as f64 / radius as f64))
}

/// 3x3 solve by Cramer's rule.
fn cramer(m: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let base = [[m[0][0], m[0][1], m[0][2]], [m[1][0], m[1][1], m[1][2]], [m[2][0], m[2][1], m[2][2]]];
    let dm = det(&base);
    (0..3)
        .map(|c| {
            let mut a = base;
            for r in 0..3 {
                a[r][c] = z[r];
            }
            det(&a) / dm
        })
        .collect()
}

fn c8_lse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data: Vec<(f64, f64)> = (0..10)
        .map(|i| {
            let x = -1.0 + 2.0 * (i as f64 + rng.random::<f64>()) / 10.0;
            (x, 0.3 + x - 1.2 * x * x + 0.05 * (rng.random::<f64>() - 0.5))
        })
        .collect();
    let g = graph(10, 8);
    let p = StochasticMatrix::for_graph(&g, WeightKind::ColumnStochastic);
    let tr = run_lse_consensus(&p, &data, &Basis::polynomial(2), 10_000).map_err(|e| e.to_string())?;
    let oracle = cramer(&tr.truth.m, &tr.truth.z);
    let gap = Norm::L2.dist(&oracle, &tr.theta_hat);
    ensure(gap < 1e-9, || format!("centralized estimate off by {gap}"))?;
    let n0 = tr.settled_after(1e-6).ok_or("estimates never settle below 1e-6")?;
    let mut checked = 0;
    for r in &tr.records {
        if let LseStatus::Bounded { bound, .. } = &r.status {
            ensure(bound.holds, || format!("bound fails at n = {} node {}: {:?}", r.n, r.node, bound))?;
            checked += 1;
        }
    }
    ensure(checked > 0, || "precondition never met".into())?;
    Ok(format!("error < 1e-6 from n0 = {n0}; bound held on {checked} node-iterations"))
}

fn c9_funccalc() -> Outcome {
    let n = 10;
    let g = graph(n, 9);
    let p = StochasticMatrix::for_graph(&g, WeightKind::ColumnStochastic);
    let u: Vec<f64> = initial_states(n, 1, 9).into_iter().map(|v| v[0]).collect();
    let mut state = funccalc_init(&u);
    let limit = consensus_limit(&state.x, Engine::Ratio, &p).map_err(|e| e.to_string())?;
    ensure(Norm::LInf.dist(&limit, &u) < 1e-8, || "analytic limit differs from u".into())?;
    for k in 0..5000 {
        for r in &state.r {
            let chk = holder_check(&MaxCoordinate, r, &u, Norm::L2);
            ensure(chk.holds, || format!("Hölder bound fails at k = {k}: {chk:?}"))?;
        }
        state = ratio_step(&state, &p).map_err(|e| e.to_string())?;
    }
    let err = state.r.iter().map(|r| Norm::LInf.dist(r, &u)).fold(0.0, f64::max);
    ensure(err < 1e-8, || format!("consensus estimate off by {err}"))?;

    let rho = 1e-3;
    let tr = run_algorithm1(&g, &p, funccalc_init(&u).x, &StopConfig::new(rho)).map_err(|e| e.to_string())?;
    let f = MaxCoordinate;
    let bound = HolderFunction::<f64>::constant(&f, Norm::L2, n) * (2.0 * rho);
    let worst = tr.final_states.iter().map(|r| (f.eval(r) - f.eval(&u)).abs()).fold(0.0, f64::max);
    ensure(worst <= bound, || format!("at halt |f(r_i) - f(u)| = {worst} > {bound}"))?;
    Ok(format!("limit error {err:.1e}; at halt k = {} worst {worst:.2e} <= {bound}", tr.halt_k))
}

fn c10_scalar_vector() -> Outcome {
    for seed in 0..20u64 {
        let n = 3 + seed as usize;
        let d = 2 + seed as usize % 4;
        let g = graph(n, seed);
        for engine in [Engine::Ratio, Engine::Row] {
            let w = StochasticMatrix::for_graph(&g, engine.weight_kind());
            let same = scalar_vector_equivalence_check(&initial_states(n, d, seed), engine, &w, 100)
                .map_err(|e| e.to_string())?;
            ensure(same, || format!("instance {seed} {engine:?} differs"))?;
        }
    }
    Ok("20 instances, both engines, 100 steps, bit-identical".into())
}

/// Runs the binary inside `cwd` with a relative output directory, so that
/// two runs see identical arguments.
fn run_cli(args: &[&str], cwd: &Path) -> Result<(i32, Vec<u8>), String> {
    std::fs::create_dir_all(cwd).map_err(|e| e.to_string())?;
    let o = Command::new(env!("CARGO_BIN_EXE_ftc"))
        .args(args)
        .args(["--out-dir", "out"])
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((o.status.code().unwrap_or(-1), o.stdout))
}

fn c11_determinism() -> Outcome {
    let invocations: [&[&str]; 5] = [
        &["run", "--nodes", "12", "--dim", "4", "--seed", "7", "--rho-relative", "0.01"],
        &["compare", "--nodes", "10", "--dim", "3", "--seed", "2", "--rho", "1e-3"],
        &["hull", "--nodes", "9", "--dim", "2", "--seed", "5", "--points-per-node", "2"],
        &["lse", "--nodes", "10", "--seed", "3", "--iterations", "300"],
        &["funccalc", "--nodes", "8", "--seed", "4", "--rho", "1e-3"],
    ];
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (idx, args) in invocations.iter().enumerate() {
        let (da, db) = (a.path().join(idx.to_string()), b.path().join(idx.to_string()));
        let (ca, sa) = run_cli(args, &da)?;
        let (cb, sb) = run_cli(args, &db)?;
        let (da, db) = (da.join("out"), db.join("out"));
        ensure(ca == 0 && cb == 0, || format!("{args:?} exited {ca}/{cb}"))?;
        ensure(sa == sb, || format!("{args:?}: stdout differs"))?;
        let mut names: Vec<_> = std::fs::read_dir(&da).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
        names.sort();
        ensure(!names.is_empty(), || format!("{args:?} wrote nothing"))?;
        for name in names {
            let x = std::fs::read(da.join(&name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(db.join(&name)).map_err(|e| e.to_string())?;
            ensure(x == y, || format!("{args:?}: {name:?} differs"))?;
            files += 1;
        }
    }
    Ok(format!("5 subcommands run twice, {files} output files byte-identical"))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, res: Outcome| {
        match res {
            Ok(detail) => println!("[PASS] {id:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {id:>2} {name}: {why}");
            }
        }
    };
    report(1, "hull nesting", c1_hull_nesting());
    report(2, "hull consensus exactness", c2_hull_exactness());
    match algorithm1_traces() {
        Ok(traces) => {
            report(3, "ball containment", c3_ball_containment(&traces));
            report(4, "radius bound and vanishing", c4_radius_bound(&traces));
            let (c5, simultaneous) = match c5_large_instance() {
                Ok((detail, sim)) => (Ok(detail), sim),
                Err(e) => (Err(e), false),
            };
            report(5, "25-node, 10-dimensional run", c5);
            report(6, "simultaneous halt", c6_simultaneity(&traces, simultaneous));
        }
        Err(e) => {
            for (id, name) in [(3, "ball containment"), (4, "radius bound and vanishing"), (6, "simultaneous halt")] {
                report(id, name, Err(e.clone()));
            }
            report(5, "25-node, 10-dimensional run", c5_large_instance().map(|(d, _)| d));
        }
    }
    report(7, "bandwidth table", c7_bandwidth());
    report(8, "least squares", c8_lse());
    report(9, "function calculation", c9_funccalc());
    report(10, "scalar-vector equivalence", c10_scalar_vector());
    report(11, "determinism", c11_determinism());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
