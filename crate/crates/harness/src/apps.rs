//! Runners behind the `hull`, `lse` and `funccalc` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use ftc_core::applications::funccalc::{builtin, funccalc_init};
use ftc_core::applications::lse::{run_lse_consensus, Basis, LseStatus};
use ftc_core::hull::{extreme_points, hull_consensus_trace, DEFAULT_HULL_TOL};
use ftc_core::{run_algorithm1, DiGraph, PointSet, StochasticMatrix, StopConfig, WeightKind};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiment::initial_states;
use crate::HarnessError;

/// Stream for generated LSE datasets.
pub const LSE_STREAM: u64 = 2;
/// Stream for per-node hull point sets beyond the first point.
pub const HULL_STREAM: u64 = 3;

fn graph_for(cfg: &ExperimentConfig) -> Result<DiGraph, HarnessError> {
    let mut g = DiGraph::generate(cfg.n, cfg.model(), cfg.seed)?;
    if let Some(b) = cfg.d_bound {
        g = g.with_diameter_bound(b)?;
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HullSummary {
    pub n: usize,
    pub dim: usize,
    pub rounds: usize,
    pub agreed: bool,
    pub matches_centralized: bool,
    pub extreme_count: usize,
    pub max_set_size: usize,
}

#[derive(Clone, Debug)]
pub struct HullReport {
    pub summary: HullSummary,
    /// Agreed extreme set in wire format.
    pub extreme_wire: String,
    /// One line per round and node: `t node <wire>`.
    pub trace: String,
}

impl HullReport {
    pub fn exit_code(&self) -> i32 {
        if self.summary.agreed && self.summary.matches_centralized {
            0
        } else {
            3
        }
    }
}

/// Hull consensus on random point sets (`points_per_node` points per node)
/// for `D` rounds, checked against the centralized extreme set.
pub fn run_hull(cfg: &ExperimentConfig, points_per_node: usize) -> Result<HullReport, HarnessError> {
    cfg.validate()?;
    if points_per_node == 0 {
        return Err(HarnessError::Config("points per node must be at least 1".into()));
    }
    let g = graph_for(cfg)?;
    let first = initial_states(cfg.n, cfg.dim, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(HULL_STREAM);
    let data: Vec<PointSet<f64>> = first
        .into_iter()
        .map(|p| {
            let mut pts = vec![p];
            for _ in 1..points_per_node {
                pts.push((0..cfg.dim).map(|_| rng.sample(Open01)).collect());
            }
            PointSet::new(pts)
        })
        .collect::<Result<_, _>>()
        .map_err(ftc_core::HullError::from)?;
    let rounds = g.diameter_bound();
    let trace = hull_consensus_trace(&data, &g, rounds, DEFAULT_HULL_TOL)?;
    let central = extreme_points(&PointSet::union(cfg.dim, data.iter())?, DEFAULT_HULL_TOL)?;
    let last = trace.last().expect("trace holds the initial round");
    let agreed = last.iter().all(|s| s.ext == last[0].ext);
    let matches_centralized = last.iter().all(|s| s.ext == central);
    let mut dump = String::new();
    let mut max_set_size = 0;
    for (t, round) in trace.iter().enumerate() {
        for (i, s) in round.iter().enumerate() {
            max_set_size = max_set_size.max(s.ext.len());
            let _ = writeln!(dump, "{t} {i} {}", s.ext.to_wire());
        }
    }
    Ok(HullReport {
        summary: HullSummary {
            n: cfg.n,
            dim: cfg.dim,
            rounds,
            agreed,
            matches_centralized,
            extreme_count: central.len(),
            max_set_size,
        },
        extreme_wire: last[0].ext.to_wire(),
        trace: dump,
    })
}

/// Reads `x,y` rows; a header line is allowed.
pub fn read_dataset(path: &Path) -> Result<Vec<(f64, f64)>, HarnessError> {
    let bad = |msg: String| HarnessError::Data(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad(format!("row {} has {} fields, expected 2", line + 1, rec.len())));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => out.push((x, y)),
            _ if line == 0 => continue,
            _ => return Err(bad(format!("row {} is not numeric", line + 1))),
        }
    }
    if out.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(out)
}

/// Dataset with `x` spread over `[-1, 1]` and `y` a noisy quadratic.
pub fn generated_dataset(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(LSE_STREAM);
    (0..n)
        .map(|i| {
            let x = -1.0 + 2.0 * (i as f64 + rng.random::<f64>()) / n as f64;
            let noise: f64 = rng.random::<f64>() - 0.5;
            (x, 1.0 - 0.5 * x + 2.0 * x * x + 0.1 * noise)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LseSummary {
    pub nodes: usize,
    pub degree: u32,
    pub iterations: usize,
    pub theta_hat: Vec<f64>,
    /// First iteration after which every node stays within `1e-6` of `theta_hat`.
    pub settled_after: Option<usize>,
    pub bound_rows: usize,
    pub bound_violations: usize,
    pub max_final_error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LseReport {
    pub summary: LseSummary,
    pub bound_csv: String,
}

impl LseReport {
    pub fn exit_code(&self) -> i32 {
        if self.summary.bound_violations > 0 {
            3
        } else {
            0
        }
    }
}

/// Consensus least squares with one sample per node.
pub fn run_lse(
    cfg: &ExperimentConfig,
    data: &[(f64, f64)],
    degree: u32,
    iterations: usize,
) -> Result<LseReport, HarnessError> {
    let cfg = ExperimentConfig { n: data.len(), ..cfg.clone() };
    cfg.validate()?;
    let g = graph_for(&cfg)?;
    let p = StochasticMatrix::for_graph(&g, WeightKind::ColumnStochastic);
    let tr = run_lse_consensus(&p, data, &Basis::polynomial(degree), iterations)?;
    let mut bound_rows = 0;
    let mut bound_violations = 0;
    for r in &tr.records {
        if let LseStatus::Bounded { bound, .. } = &r.status {
            bound_rows += 1;
            bound_violations += usize::from(!bound.holds);
        }
    }
    let max_final_error = tr
        .records
        .iter()
        .filter(|r| r.n == iterations)
        .map(|r| match &r.status {
            LseStatus::Singular => None,
            LseStatus::Estimate { error, .. } => Some(*error),
            LseStatus::Bounded { bound, .. } => Some(bound.error),
        })
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max));
    Ok(LseReport {
        summary: LseSummary {
            nodes: data.len(),
            degree,
            iterations,
            theta_hat: tr.theta_hat.clone(),
            settled_after: tr.settled_after(1e-6),
            bound_rows,
            bound_violations,
            max_final_error,
        },
        bound_csv: tr.to_csv(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunccalcSummary {
    pub function: String,
    pub nodes: usize,
    pub halt_k: usize,
    pub rho: f64,
    pub c: f64,
    pub alpha: f64,
    pub bound: f64,
    pub max_error: f64,
    pub holds: bool,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FunccalcReport {
    pub summary: FunccalcSummary,
    /// `node,value,lhs,bound,holds` at the halt.
    pub csv: String,
}

impl FunccalcReport {
    pub fn exit_code(&self) -> i32 {
        if self.summary.holds {
            0
        } else {
            3
        }
    }
}

/// Each node learns the full vector of node values by ratio consensus with
/// radius termination, then evaluates `function` locally.
pub fn run_funccalc(cfg: &ExperimentConfig, function: &str) -> Result<FunccalcReport, HarnessError> {
    cfg.validate()?;
    let f = builtin::<f64>(function)
        .ok_or_else(|| HarnessError::Config(format!("unknown function `{function}`: expected max, mean or sum")))?;
    let g = graph_for(cfg)?;
    let u: Vec<f64> = initial_states(cfg.n, 1, cfg.seed).into_iter().map(|v| v[0]).collect();
    let rho = if cfg.rho_relative { cfg.rho * cfg.norm.of(&u) } else { cfg.rho };
    let p = StochasticMatrix::for_graph(&g, WeightKind::ColumnStochastic);
    let sc = StopConfig { rho, d_bound: cfg.d_bound, norm: cfg.norm, k_max: cfg.k_max, record_states: false };
    let tr = run_algorithm1(&g, &p, funccalc_init(&u).x, &sc)?;
    let (c, alpha) = (f.constant(cfg.norm, cfg.n), f.exponent());
    let bound = c * (2.0 * rho).powf(alpha);
    let target = f.eval(&u);
    let mut csv = String::from("node,value,lhs,bound,holds\n");
    let mut max_error: f64 = 0.0;
    for (i, r) in tr.final_states.iter().enumerate() {
        let v = f.eval(r);
        let lhs = (v - target).abs();
        max_error = max_error.max(lhs);
        let _ = writeln!(csv, "{i},{v:.16e},{lhs:.16e},{bound:.16e},{}", u8::from(lhs <= bound));
    }
    Ok(FunccalcReport {
        summary: FunccalcSummary {
            function: f.name().to_string(),
            nodes: cfg.n,
            halt_k: tr.halt_k,
            rho,
            c,
            alpha,
            bound,
            max_error,
            holds: max_error <= bound && tr.simultaneous(),
            u,
        },
        csv,
    })
}
