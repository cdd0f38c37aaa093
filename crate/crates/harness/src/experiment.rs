//! End-to-end experiment runs and criterion comparison.

use std::fmt::Write as _;
use std::path::Path;

use ftc_core::consensus::{append_state_csv, consensus_limit, make_process, STATE_CSV_HEADER};
use ftc_core::hull::DEFAULT_HULL_TOL;
use ftc_core::scalar::max_pairwise_distance;
use ftc_core::termination::{
    bandwidth_bits, minmax_envelope, run_box_termination, run_hull_termination, run_radius_termination,
    StopOutcome, TerminationTrace,
};
use ftc_core::{
    ConsensusError, ConsensusProcess, DiGraph, Engine, Norm, StochasticMatrix, StopConfig, StoppingMethod,
    TerminationError,
};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, Stopping};
use crate::HarnessError;

/// ChaCha stream for initial states; graphs use stream 0 of the same seed.
pub const STATE_STREAM: u64 = 1;

/// Slack used by the verification pass for the window checks.
pub const CHECK_SLACK: f64 = 1e-9;

/// Initial states drawn uniformly from the open cube `(0, 1)^d`.
pub fn initial_states(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STATE_STREAM);
    (0..n).map(|_| (0..d).map(|_| rng.sample(Open01)).collect()).collect()
}

/// Graph, weights, initial states and the threshold for one config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub graph: DiGraph,
    pub weights: StochasticMatrix<f64>,
    pub initial: Vec<Vec<f64>>,
    pub limit: Vec<f64>,
    /// Absolute threshold.
    pub rho: f64,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Setup, HarnessError> {
    cfg.validate()?;
    let mut graph = DiGraph::generate(cfg.n, cfg.model(), cfg.seed)?;
    if let Some(b) = cfg.d_bound {
        graph = graph.with_diameter_bound(b)?;
    }
    let weights = StochasticMatrix::for_graph(&graph, cfg.engine.weight_kind());
    let initial = initial_states(cfg.n, cfg.dim, cfg.seed);
    let limit = consensus_limit(&initial, cfg.engine, &weights)?;
    let rho = if cfg.rho_relative { cfg.rho * cfg.norm.of(&limit) } else { cfg.rho };
    if cfg.stopping != Stopping::None && !(rho > 0.0) {
        return Err(HarnessError::Config(format!("threshold resolves to {rho}")));
    }
    Ok(Setup { graph, weights, initial, limit, rho })
}

/// Wraps a process and keeps every state it passes through.
struct Recorder {
    inner: Box<dyn ConsensusProcess<f64>>,
    csv: String,
    history: Vec<Vec<Vec<f64>>>,
}

impl Recorder {
    fn new(inner: Box<dyn ConsensusProcess<f64>>) -> Self {
        let mut csv = String::from(STATE_CSV_HEADER);
        append_state_csv(&mut csv, 0, inner.as_ref());
        let history = vec![inner.estimates().to_vec()];
        Recorder { inner, csv, history }
    }
}

impl ConsensusProcess<f64> for Recorder {
    fn advance(&mut self) -> Result<(), ConsensusError> {
        self.inner.advance()?;
        append_state_csv(&mut self.csv, self.inner.iteration(), self.inner.as_ref());
        self.history.push(self.inner.estimates().to_vec());
        Ok(())
    }

    fn estimates(&self) -> &[Vec<f64>] {
        self.inner.estimates()
    }

    fn iteration(&self) -> usize {
        self.inner.iteration()
    }

    fn mass(&self) -> Option<(&[Vec<f64>], &[f64])> {
        self.inner.mass()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Halted,
    NotHalted,
    FixedSteps,
}

/// Run summary. Every check is recomputed from the recorded states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub status: RunStatus,
    pub halt_k: Option<usize>,
    pub iterations: usize,
    pub windows: usize,
    pub window_len: Option<usize>,
    pub final_spread: f64,
    pub max_distance_to_limit: f64,
    /// Absolute threshold used by the stopping rule.
    pub rho: f64,
    pub rho_input: f64,
    pub rho_relative: bool,
    pub limit_norm: f64,
    pub guarantee_2rho_ok: Option<bool>,
    pub simultaneous: Option<bool>,
    pub ball_containment_ok: Option<bool>,
    pub radius_bound_ok: Option<bool>,
    pub extra_bits_per_interaction: Option<u64>,
    pub bits_per_float: u64,
    pub max_hull_size: Option<usize>,
    /// Smallest window value seen before giving up, when not halted.
    pub smallest_window_value: Option<f64>,
    pub n: usize,
    pub dim: usize,
    pub diameter: usize,
    pub diameter_bound: usize,
    pub engine: Engine,
    pub stopping: Stopping,
    pub norm: Norm,
}

impl Summary {
    /// Names of the checks that failed.
    pub fn violations(&self) -> Vec<&'static str> {
        [
            ("guarantee_2rho", self.guarantee_2rho_ok),
            ("simultaneous", self.simultaneous),
            ("ball_containment", self.ball_containment_ok),
            ("radius_bound", self.radius_bound_ok),
        ]
        .into_iter()
        .filter(|(_, ok)| *ok == Some(false))
        .map(|(name, _)| name)
        .collect()
    }

    /// 0 ok, 2 not halted, 3 a check failed.
    pub fn exit_code(&self) -> i32 {
        if !self.violations().is_empty() {
            3
        } else if self.status == RunStatus::NotHalted {
            2
        } else {
            0
        }
    }
}

/// Everything an experiment emits.
#[derive(Clone, Debug)]
pub struct Report {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub graph_json: String,
    pub states_csv: String,
    pub termination_csv: Option<String>,
}

impl Report {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Writes `config.json`, `graph.json`, `states.csv`, `termination.csv`
    /// (when a stopping rule ran) and `summary.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.json"), self.config.to_json() + "\n")?;
        std::fs::write(dir.join("graph.json"), self.graph_json.clone() + "\n")?;
        std::fs::write(dir.join("states.csv"), &self.states_csv)?;
        if let Some(t) = &self.termination_csv {
            std::fs::write(dir.join("termination.csv"), t)?;
        }
        std::fs::write(dir.join("summary.json"), self.summary_json() + "\n")?;
        Ok(())
    }
}

enum Finished {
    Radius(TerminationTrace<f64>),
    Window(StopOutcome<f64>),
    NotHalted(f64),
    Fixed,
}

fn stop_config(cfg: &ExperimentConfig, setup: &Setup) -> StopConfig<f64> {
    StopConfig {
        rho: setup.rho,
        d_bound: cfg.d_bound,
        norm: cfg.norm,
        k_max: cfg.k_max,
        record_states: false,
    }
}

fn run_method(
    method: Stopping,
    cfg: &ExperimentConfig,
    setup: &Setup,
    rec: &mut Recorder,
) -> Result<Finished, HarnessError> {
    let sc = stop_config(cfg, setup);
    let g = &setup.graph;
    let result = match method {
        Stopping::None => {
            for _ in 0..cfg.steps {
                rec.advance()?;
            }
            return Ok(Finished::Fixed);
        }
        Stopping::Radius => run_radius_termination(g, rec, &sc).map(Finished::Radius),
        Stopping::Box => run_box_termination(g, rec, &sc).map(Finished::Window),
        Stopping::Hull => run_hull_termination(g, rec, &sc, DEFAULT_HULL_TOL).map(Finished::Window),
    };
    match result {
        Ok(f) => Ok(f),
        Err(TerminationError::NotHalted { smallest, .. }) => Ok(Finished::NotHalted(smallest)),
        Err(e) => Err(e.into()),
    }
}

fn stopping_method(s: Stopping) -> Option<StoppingMethod> {
    match s {
        Stopping::Radius => Some(StoppingMethod::Radius),
        Stopping::Box => Some(StoppingMethod::Box),
        Stopping::Hull => Some(StoppingMethod::Hull),
        Stopping::None => None,
    }
}

/// Termination CSV for the window-based criteria: one row per node at each
/// window end, with the criterion value in the `R` column.
fn window_csv(out: &StopOutcome<f64>, n: usize) -> String {
    let mut s = String::from("k,node,R,b,window_l,halt_flag\n");
    for (idx, &v) in out.window_values.iter().enumerate() {
        let k = (idx + 1) * out.window_len;
        for node in 0..n {
            let _ = writeln!(
                s,
                "{k},{node},{v:.16e},{},{},{}",
                u8::from(v < out.rho),
                idx + 1,
                u8::from(k == out.halt_k)
            );
        }
    }
    s
}

fn verify(
    cfg: &ExperimentConfig,
    setup: &Setup,
    rec: &Recorder,
    finished: &Finished,
    method: Stopping,
) -> Result<Summary, HarnessError> {
    let norm = cfg.norm;
    let history = &rec.history;
    let last = history.last().expect("history has the initial state");
    let final_spread = max_pairwise_distance(last, norm);
    let max_distance_to_limit = last.iter().map(|c| norm.dist(c, &setup.limit)).fold(0.0, f64::max);
    let halted = matches!(finished, Finished::Radius(_) | Finished::Window(_));
    let guarantee =
        halted.then(|| final_spread <= 2.0 * setup.rho && max_distance_to_limit <= 2.0 * setup.rho);

    let mut summary = Summary {
        status: match finished {
            Finished::NotHalted(_) => RunStatus::NotHalted,
            Finished::Fixed => RunStatus::FixedSteps,
            _ => RunStatus::Halted,
        },
        halt_k: None,
        iterations: history.len() - 1,
        windows: 0,
        window_len: None,
        final_spread,
        max_distance_to_limit,
        rho: setup.rho,
        rho_input: cfg.rho,
        rho_relative: cfg.rho_relative,
        limit_norm: norm.of(&setup.limit),
        guarantee_2rho_ok: guarantee,
        simultaneous: None,
        ball_containment_ok: None,
        radius_bound_ok: None,
        extra_bits_per_interaction: None,
        bits_per_float: cfg.bits_per_float,
        max_hull_size: None,
        smallest_window_value: None,
        n: cfg.n,
        dim: cfg.dim,
        diameter: setup.graph.diameter(),
        diameter_bound: cfg.d_bound.unwrap_or(setup.graph.diameter_bound()),
        engine: cfg.engine,
        stopping: method,
        norm,
    };
    let (b, d) = (cfg.bits_per_float, cfg.dim as u64);
    match finished {
        Finished::Radius(tr) => {
            if tr.halt_k != summary.iterations {
                return Err(HarnessError::Invariant(format!(
                    "halt at {} but {} iterations recorded",
                    tr.halt_k, summary.iterations
                )));
            }
            summary.halt_k = Some(tr.halt_k);
            summary.windows = tr.windows.len();
            summary.window_len = Some(tr.window_len);
            summary.simultaneous = Some(tr.simultaneous());
            let mut ball = true;
            let mut bound = true;
            for w in &tr.windows {
                let (start, end) = (&history[w.start_k], &history[w.end_k]);
                for (center, &r) in end.iter().zip(&w.rbar) {
                    ball &= start.iter().all(|s| norm.dist(center, s) <= r + CHECK_SLACK);
                }
                let env = minmax_envelope(start, w.start_k).spread(norm);
                let len = (w.end_k - w.start_k) as f64;
                bound &= w.rbar.iter().all(|&r| r <= len * env + CHECK_SLACK);
            }
            summary.ball_containment_ok = Some(ball);
            summary.radius_bound_ok = Some(bound);
            summary.extra_bits_per_interaction = Some(bandwidth_bits(StoppingMethod::Radius, b, d, 0));
        }
        Finished::Window(out) => {
            summary.halt_k = Some(out.halt_k);
            summary.windows = out.window_values.len();
            summary.window_len = Some(out.window_len);
            summary.simultaneous = Some(out.simultaneous());
            let hull_size = out.max_hull_size as u64;
            summary.extra_bits_per_interaction = Some(bandwidth_bits(out.method, b, d, hull_size));
            if out.method == StoppingMethod::Hull {
                summary.max_hull_size = Some(out.max_hull_size);
            }
        }
        Finished::NotHalted(smallest) => {
            let w = summary.diameter_bound.max(1);
            // Radius checks fall on k = l * w before the update that ends
            // the window; the box and hull windows end on multiples of w.
            summary.windows = match method {
                Stopping::Radius => summary.iterations.saturating_sub(1) / w,
                _ => summary.iterations / w,
            };
            summary.window_len = Some(w);
            summary.smallest_window_value = smallest.is_finite().then_some(*smallest);
            summary.extra_bits_per_interaction =
                stopping_method(method).map(|m| bandwidth_bits(m, b, d, cfg.n as u64));
        }
        Finished::Fixed => {}
    }
    Ok(summary)
}

fn run_with(cfg: &ExperimentConfig, setup: &Setup, method: Stopping) -> Result<Report, HarnessError> {
    let process = make_process(cfg.engine, setup.initial.clone(), setup.weights.clone())?;
    let mut rec = Recorder::new(process);
    let finished = run_method(method, cfg, setup, &mut rec)?;
    let summary = verify(cfg, setup, &rec, &finished, method)?;
    let termination_csv = match &finished {
        Finished::Radius(tr) => Some(tr.to_csv()),
        Finished::Window(out) => Some(window_csv(out, cfg.n)),
        _ => None,
    };
    Ok(Report {
        config: ExperimentConfig { stopping: method, ..cfg.clone() },
        summary,
        graph_json: setup.graph.to_json(),
        states_csv: rec.csv,
        termination_csv,
    })
}

/// Generates the graph and states, runs the configured engine and stopping
/// rule, verifies the outcome and writes the outputs when `out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let setup = prepare(cfg)?;
    let report = run_with(cfg, &setup, cfg.stopping)?;
    if let Some(dir) = &cfg.out_dir {
        report.write_to(dir)?;
    }
    Ok(report)
}

/// One line of the criterion comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: StoppingMethod,
    pub halt_k: Option<usize>,
    pub extra_bits: u64,
    pub final_spread: f64,
    pub max_distance_to_limit: f64,
    pub guarantee_2rho_ok: Option<bool>,
    pub max_hull_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub rho: f64,
    pub bits_per_float: u64,
    pub dim: usize,
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>8} {:>12} {:>14} {:>14} {:>6}\n",
            "method", "halt_k", "extra_bits", "spread", "to_limit", "2rho"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<8} {:>8} {:>12} {:>14.6e} {:>14.6e} {:>6}",
                r.method.to_string(),
                r.halt_k.map_or("-".into(), |k| k.to_string()),
                r.extra_bits,
                r.final_spread,
                r.max_distance_to_limit,
                match r.guarantee_2rho_ok {
                    Some(true) => "ok",
                    Some(false) => "FAIL",
                    None => "-",
                }
            );
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("method,halt_k,extra_bits,final_spread,max_distance_to_limit,guarantee_2rho_ok\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.16e},{:.16e},{}",
                r.method,
                r.halt_k.map_or(String::new(), |k| k.to_string()),
                r.extra_bits,
                r.final_spread,
                r.max_distance_to_limit,
                r.guarantee_2rho_ok.map_or(String::new(), |b| u8::from(b).to_string())
            );
        }
        s
    }
}

/// Runs the radius, box and hull rules on the same graph and initial states.
pub fn compare_criteria(cfg: &ExperimentConfig) -> Result<Comparison, HarnessError> {
    let mut base = cfg.clone();
    if base.stopping == Stopping::None {
        base.stopping = Stopping::Radius;
    }
    let setup = prepare(&base)?;
    let mut rows = Vec::new();
    for method in [Stopping::Radius, Stopping::Box, Stopping::Hull] {
        let rep = run_with(&base, &setup, method)?;
        let s = &rep.summary;
        rows.push(CompareRow {
            method: stopping_method(method).expect("method is a stopping rule"),
            halt_k: s.halt_k,
            extra_bits: s.extra_bits_per_interaction.unwrap_or(0),
            final_spread: s.final_spread,
            max_distance_to_limit: s.max_distance_to_limit,
            guarantee_2rho_ok: s.guarantee_2rho_ok,
            max_hull_size: s.max_hull_size,
        });
    }
    let cmp = Comparison { rho: setup.rho, bits_per_float: cfg.bits_per_float, dim: cfg.dim, rows };
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("compare.csv"), cmp.csv())?;
        std::fs::write(
            dir.join("compare.json"),
            serde_json::to_string_pretty(&cmp).expect("comparison serializes") + "\n",
        )?;
    }
    Ok(cmp)
}
