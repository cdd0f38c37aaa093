//! Finite-time stopping for vector consensus.
//!
//! The radius protocol lets every node maintain `R_i`, the radius of a ball
//! around its own current estimate that contains every node's estimate from
//! the start of the current window:
//!
//! ```text
//! R_i(k+1) = max_{j in N_i^-} ( ||r_i(k+1) - r_j(k)|| + R_j(k) )
//! ```
//!
//! Windows have length `D` (a diameter bound). At each window boundary a node
//! whose radius fell below `rho` raises a convergence bit, bits are OR-flooded
//! for one more window, and all nodes stop together once their bit is set.
//! The extra traffic is one scalar and one bit per link per round.
//!
//! The module also provides the coordinatewise min/max envelope, the box
//! criterion built on it, a hull-diameter criterion, and bandwidth accounting
//! for the three.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{ConsensusError, ConsensusProcess, RatioProcess};
use crate::graph::DiGraph;
use crate::hull::{hull_diameter, run_hull_consensus, HullError};
use crate::pointset::PointSet;
use crate::scalar::{max_pairwise_distance, Norm, Scalar};
use crate::weights::StochasticMatrix;

/// Default iteration cap for stopping runs.
pub const DEFAULT_K_MAX: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerminationError {
    #[error("expected {expected} nodes, found {found}")]
    NodeCountMismatch { expected: usize, found: usize },
    #[error("node {node} has dimension {found}, expected {expected}")]
    DimensionMismatch { node: usize, expected: usize, found: usize },
    #[error("tolerance rho must be positive and finite")]
    InvalidRho,
    #[error("diameter bound {bound} is below the graph diameter {diameter}")]
    BoundBelowDiameter { bound: usize, diameter: usize },
    #[error("no halt within k_max = {k_max} iterations (smallest radius seen {smallest})")]
    NotHalted { k_max: usize, smallest: f64 },
    #[error("nodes halted at different iterations at k = {k}")]
    NonSimultaneousHalt { k: usize },
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Hull(#[from] HullError),
}

fn check_states<T: Scalar>(states: &[Vec<T>], n: usize, d: usize) -> Result<(), TerminationError> {
    if states.len() != n {
        return Err(TerminationError::NodeCountMismatch { expected: n, found: states.len() });
    }
    for (node, s) in states.iter().enumerate() {
        if s.len() != d {
            return Err(TerminationError::DimensionMismatch { node, expected: d, found: s.len() });
        }
    }
    Ok(())
}

/// One radius round. `r_new` are the estimates at `k+1`, `r_old` and
/// `radius_old` the estimates and radii at `k`.
pub fn radius_step<T: Scalar>(
    g: &DiGraph,
    r_new: &[Vec<T>],
    r_old: &[Vec<T>],
    radius_old: &[T],
    norm: Norm,
) -> Result<Vec<T>, TerminationError> {
    let n = g.node_count();
    let d = r_new.first().map_or(0, Vec::len);
    check_states(r_new, n, d)?;
    check_states(r_old, n, d)?;
    if radius_old.len() != n {
        return Err(TerminationError::NodeCountMismatch { expected: n, found: radius_old.len() });
    }
    Ok((0..n)
        .map(|i| {
            g.in_neighbors(i)
                .iter()
                .map(|&j| norm.dist(&r_new[i], &r_old[j]) + radius_old[j])
                .fold(T::zero(), T::max)
        })
        .collect())
}

/// One OR-flooding round of the convergence bits.
pub fn bit_step(g: &DiGraph, bits: &[bool]) -> Vec<bool> {
    (0..g.node_count())
        .map(|i| g.in_neighbors(i).iter().any(|&j| bits[j]))
        .collect()
}

/// Coordinatewise maximum and minimum over all nodes at one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxEnvelope<T> {
    pub upper: Vec<T>,
    pub lower: Vec<T>,
    pub k: usize,
}

impl<T: Scalar> MinMaxEnvelope<T> {
    /// `||M - m||`.
    pub fn spread(&self, norm: Norm) -> T {
        norm.dist(&self.upper, &self.lower)
    }

    pub fn contains(&self, c: &[T]) -> bool {
        c.iter()
            .zip(self.upper.iter().zip(&self.lower))
            .all(|(&v, (&hi, &lo))| lo <= v && v <= hi)
    }
}

/// Exact coordinatewise extrema of `states`, labelled with iteration `k`.
pub fn minmax_envelope<T: Scalar>(states: &[Vec<T>], k: usize) -> MinMaxEnvelope<T> {
    let d = states.first().map_or(0, Vec::len);
    let mut upper = vec![T::neg_infinity(); d];
    let mut lower = vec![T::infinity(); d];
    for s in states {
        for (c, &v) in s.iter().enumerate() {
            upper[c] = upper[c].max(v);
            lower[c] = lower[c].min(v);
        }
    }
    MinMaxEnvelope { upper, lower, k }
}

/// Box test: `||M - m|| < rho`.
pub fn box_criterion<T: Scalar>(states: &[Vec<T>], rho: T, norm: Norm) -> bool {
    minmax_envelope(states, 0).spread(norm) < rho
}

/// Settings shared by the stopping runners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopConfig<T> {
    pub rho: T,
    /// Window length override; must not be below the graph diameter.
    /// `None` uses the graph's diameter bound.
    pub d_bound: Option<usize>,
    pub norm: Norm,
    pub k_max: usize,
    /// Keep every iteration's estimates in the trace.
    pub record_states: bool,
}

impl<T: Scalar> StopConfig<T> {
    pub fn new(rho: T) -> Self {
        StopConfig { rho, d_bound: None, norm: Norm::L2, k_max: DEFAULT_K_MAX, record_states: false }
    }

    /// Window length in rounds. A single-node graph has diameter zero; its
    /// windows still last one round.
    fn window(&self, g: &DiGraph) -> Result<usize, TerminationError> {
        if !(self.rho > T::zero()) || !self.rho.is_finite() {
            return Err(TerminationError::InvalidRho);
        }
        let bound = self.d_bound.unwrap_or_else(|| g.diameter_bound());
        if bound < g.diameter() {
            return Err(TerminationError::BoundBelowDiameter { bound, diameter: g.diameter() });
        }
        Ok(bound.max(1))
    }
}

/// Radius and bit values held by every node after iteration `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub k: usize,
    pub radius: Vec<T>,
    pub bits: Vec<bool>,
    /// Index of the window in progress (first window is 1).
    pub window: usize,
}

/// One completed radius window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowRecord<T> {
    /// Window index, starting at 1.
    pub l: usize,
    /// Iteration at which the radii were last zero.
    pub start_k: usize,
    /// Iteration whose radii were read as the window result.
    pub end_k: usize,
    /// Per-node window radius.
    pub rbar: Vec<T>,
    pub start_states: Vec<Vec<T>>,
    pub end_states: Vec<Vec<T>>,
    pub start_envelope: MinMaxEnvelope<T>,
}

impl<T: Scalar> WindowRecord<T> {
    pub fn len(&self) -> usize {
        self.end_k - self.start_k
    }

    /// `max_{i,j} ( ||r_i(end) - r_j(start)|| - rbar_i )`; nonpositive when
    /// every window-start state lies in every node's ball.
    pub fn ball_excess(&self, norm: Norm) -> T {
        let mut worst = T::neg_infinity();
        for (center, &radius) in self.end_states.iter().zip(&self.rbar) {
            for s in &self.start_states {
                worst = worst.max(norm.dist(center, s) - radius);
            }
        }
        worst
    }

    /// `max_i ( rbar_i - len * ||M(start) - m(start)|| )`; nonpositive when the
    /// envelope bound on the radii holds.
    pub fn envelope_bound_excess(&self, norm: Norm) -> T {
        let bound = T::from_count(self.len()) * self.start_envelope.spread(norm);
        self.rbar.iter().fold(T::neg_infinity(), |w, &r| w.max(r - bound))
    }

    pub fn max_radius(&self) -> T {
        self.rbar.iter().copied().fold(T::zero(), T::max)
    }
}

/// Independent check of the stopping guarantee on a set of final estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct GuaranteeCheck<T> {
    pub max_pairwise: T,
    /// Largest distance to the reference consensus value, if one was given.
    pub max_to_limit: Option<T>,
    pub bound: T,
    pub ok: bool,
}

/// Checks that final estimates are pairwise within `bound` and, when a limit
/// is supplied, within `bound` of it.
pub fn verify_guarantee<T: Scalar>(
    final_states: &[Vec<T>],
    limit: Option<&[T]>,
    bound: T,
    norm: Norm,
) -> GuaranteeCheck<T> {
    let max_pairwise = max_pairwise_distance(final_states, norm);
    let max_to_limit = limit.map(|c| {
        final_states
            .iter()
            .map(|s| norm.dist(s, c))
            .fold(T::zero(), T::max)
    });
    let ok = max_pairwise <= bound && max_to_limit.is_none_or(|m| m <= bound);
    GuaranteeCheck { max_pairwise, max_to_limit, bound, ok }
}

/// Full record of a radius-protocol run.
#[derive(Clone, Debug, PartialEq)]
pub struct TerminationTrace<T> {
    pub rho: T,
    pub norm: Norm,
    pub window_len: usize,
    /// Iterations completed when the nodes stopped; final estimates are the
    /// states after this many updates.
    pub halt_k: usize,
    /// Per-node stopping iteration.
    pub node_halt_k: Vec<usize>,
    pub windows: Vec<WindowRecord<T>>,
    pub iterations: Vec<IterationRecord<T>>,
    pub initial: Vec<Vec<T>>,
    pub final_states: Vec<Vec<T>>,
    /// Estimates for `k = 0..=halt_k` when recording was requested.
    pub states: Option<Vec<Vec<Vec<T>>>>,
}

impl<T: Scalar> TerminationTrace<T> {
    pub fn simultaneous(&self) -> bool {
        self.node_halt_k.iter().all(|&k| k == self.halt_k)
    }

    /// Pairwise spread of the final estimates and, optionally, distance to
    /// the limit, both against `2 rho`.
    pub fn guarantee(&self, limit: Option<&[T]>) -> GuaranteeCheck<T> {
        verify_guarantee(&self.final_states, limit, T::lit(2.0) * self.rho, self.norm)
    }

    /// CSV with columns `k,node,R,b,window_l,halt_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,node,R,b,window_l,halt_flag\n");
        for it in &self.iterations {
            let halt = u8::from(it.k == self.halt_k);
            for (node, (r, &b)) in it.radius.iter().zip(&it.bits).enumerate() {
                out.push_str(&format!(
                    "{},{},{:.16e},{},{},{}\n",
                    it.k,
                    node,
                    r.to_f64_lossy(),
                    u8::from(b),
                    it.window,
                    halt
                ));
            }
        }
        out
    }
}

/// Runs the radius protocol alongside any consensus process until all nodes
/// stop.
///
/// Check points are `k = l * D` for `l = 1, 2, ...`. At a check point a node
/// whose flooded bit is set stops; otherwise it records its window radius,
/// raises its bit if the radius is below `rho` and resets its radius if not.
/// Every node moves on to the next window either way.
pub fn run_radius_termination<T: Scalar, P: ConsensusProcess<T> + ?Sized>(
    g: &DiGraph,
    process: &mut P,
    cfg: &StopConfig<T>,
) -> Result<TerminationTrace<T>, TerminationError> {
    let n = g.node_count();
    let window_len = cfg.window(g)?;
    let initial = process.estimates().to_vec();
    let d = initial.first().map_or(0, Vec::len);
    check_states(&initial, n, d)?;

    let mut radius = vec![T::zero(); n];
    let mut bits = vec![false; n];
    let mut l = 1;
    let mut k = 0;
    let mut window_start = 0;
    let mut start_states = initial.clone();
    let mut start_envelope = minmax_envelope(&start_states, 0);
    let mut windows = Vec::new();
    let mut iterations = vec![IterationRecord { k: 0, radius: radius.clone(), bits: bits.clone(), window: l }];
    let mut states = cfg.record_states.then(|| vec![initial.clone()]);
    let mut smallest = T::infinity();

    loop {
        if k >= cfg.k_max {
            return Err(TerminationError::NotHalted { k_max: cfg.k_max, smallest: smallest.to_f64_lossy() });
        }
        let r_old = process.estimates().to_vec();
        process.advance()?;
        let r_new = process.estimates();
        let mut radius_new = radius_step(g, r_new, &r_old, &radius, cfg.norm)?;
        let mut bits_new = bit_step(g, &bits);
        if let Some(hist) = states.as_mut() {
            hist.push(r_new.to_vec());
        }

        if k == l * window_len {
            let stopping = bits_new.iter().filter(|&&b| b).count();
            if stopping == n {
                let halt_k = k + 1;
                iterations.push(IterationRecord { k: halt_k, radius: radius_new, bits: bits_new, window: l });
                return Ok(TerminationTrace {
                    rho: cfg.rho,
                    norm: cfg.norm,
                    window_len,
                    halt_k,
                    node_halt_k: vec![halt_k; n],
                    windows,
                    iterations,
                    initial,
                    final_states: r_new.to_vec(),
                    states,
                });
            }
            if stopping > 0 {
                return Err(TerminationError::NonSimultaneousHalt { k });
            }
            windows.push(WindowRecord {
                l,
                start_k: window_start,
                end_k: k + 1,
                rbar: radius_new.clone(),
                start_states: std::mem::take(&mut start_states),
                end_states: r_new.to_vec(),
                start_envelope,
            });
            for i in 0..n {
                smallest = smallest.min(radius_new[i]);
                if radius_new[i] < cfg.rho {
                    bits_new[i] = true;
                } else {
                    radius_new[i] = T::zero();
                    bits_new[i] = false;
                }
            }
            l += 1;
            window_start = k + 1;
            start_states = r_new.to_vec();
            start_envelope = minmax_envelope(&start_states, window_start);
        }

        radius = radius_new;
        bits = bits_new;
        k += 1;
        iterations.push(IterationRecord { k, radius: radius.clone(), bits: bits.clone(), window: l });
    }
}

/// Ratio consensus with radius-based finite-time termination.
pub fn run_algorithm1<T: Scalar>(
    g: &DiGraph,
    p: &StochasticMatrix<T>,
    x0: Vec<Vec<T>>,
    cfg: &StopConfig<T>,
) -> Result<TerminationTrace<T>, TerminationError> {
    let mut process = RatioProcess::new(x0, p.clone())?;
    run_radius_termination(g, &mut process, cfg)
}

/// Stopping rule used in comparisons and bandwidth accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoppingMethod {
    Radius,
    Box,
    Hull,
}

impl std::fmt::Display for StoppingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StoppingMethod::Radius => "radius",
            StoppingMethod::Box => "box",
            StoppingMethod::Hull => "hull",
        })
    }
}

/// Extra bits per neighbor interaction beyond the consensus payload.
///
/// Radius: one float and one bit. Box: a max and a min vector. Hull: the
/// current extreme set.
pub fn bandwidth_bits(method: StoppingMethod, bits_per_float: u64, d: u64, hull_size: u64) -> u64 {
    match method {
        StoppingMethod::Radius => bits_per_float + 1,
        StoppingMethod::Box => 2 * bits_per_float * d,
        StoppingMethod::Hull => bits_per_float * d * hull_size,
    }
}

/// Result of a window-based box or hull stopping run.
#[derive(Clone, Debug, PartialEq)]
pub struct StopOutcome<T> {
    pub method: StoppingMethod,
    pub rho: T,
    pub norm: Norm,
    pub window_len: usize,
    pub halt_k: usize,
    pub node_halt_k: Vec<usize>,
    /// Criterion value (`||M - m||` or hull diameter) per window.
    pub window_values: Vec<T>,
    /// Largest extreme set exchanged (hull method only).
    pub max_hull_size: usize,
    pub final_states: Vec<Vec<T>>,
}

impl<T: Scalar> StopOutcome<T> {
    pub fn simultaneous(&self) -> bool {
        self.node_halt_k.iter().all(|&k| k == self.halt_k)
    }
}

/// Box criterion evaluated distributedly: at each window start every node
/// seeds a max and a min vector with its own estimate, floods them for `D`
/// rounds while consensus keeps running, and stops when `||M - m|| < rho`.
pub fn run_box_termination<T: Scalar, P: ConsensusProcess<T> + ?Sized>(
    g: &DiGraph,
    process: &mut P,
    cfg: &StopConfig<T>,
) -> Result<StopOutcome<T>, TerminationError> {
    let n = g.node_count();
    let window_len = cfg.window(g)?;
    let d = process.estimates().first().map_or(0, Vec::len);
    check_states(process.estimates(), n, d)?;
    let mut window_values = Vec::new();
    loop {
        let start_k = process.iteration();
        let mut upper = process.estimates().to_vec();
        let mut lower = upper.clone();
        for _ in 0..window_len {
            if process.iteration() >= cfg.k_max {
                let smallest = window_values.iter().copied().fold(T::infinity(), T::min);
                return Err(TerminationError::NotHalted { k_max: cfg.k_max, smallest: smallest.to_f64_lossy() });
            }
            process.advance()?;
            upper = flood(g, &upper, T::max);
            lower = flood(g, &lower, T::min);
        }
        let values: Vec<T> = upper.iter().zip(&lower).map(|(u, l)| cfg.norm.dist(u, l)).collect();
        debug_assert!(values.iter().all(|v| *v == values[0]), "flooded envelopes agree after D rounds");
        window_values.push(values[0]);
        let stopping = values.iter().filter(|&&v| v < cfg.rho).count();
        if stopping == n {
            let halt_k = process.iteration();
            return Ok(StopOutcome {
                method: StoppingMethod::Box,
                rho: cfg.rho,
                norm: cfg.norm,
                window_len,
                halt_k,
                node_halt_k: vec![halt_k; n],
                window_values,
                max_hull_size: 0,
                final_states: process.estimates().to_vec(),
            });
        }
        if stopping > 0 {
            return Err(TerminationError::NonSimultaneousHalt { k: start_k + window_len });
        }
    }
}

fn flood<T: Scalar>(g: &DiGraph, vals: &[Vec<T>], pick: fn(T, T) -> T) -> Vec<Vec<T>> {
    (0..g.node_count())
        .map(|i| {
            let nbrs = g.in_neighbors(i);
            let mut acc = vals[nbrs[0]].clone();
            for &j in &nbrs[1..] {
                for (a, &v) in acc.iter_mut().zip(&vals[j]) {
                    *a = pick(*a, v);
                }
            }
            acc
        })
        .collect()
}

/// Hull criterion: at each window start the nodes run the peer-to-peer hull
/// protocol on their current estimates for `D` rounds and stop when the
/// diameter of the agreed extreme set is below `rho`.
pub fn run_hull_termination<T: Scalar, P: ConsensusProcess<T> + ?Sized>(
    g: &DiGraph,
    process: &mut P,
    cfg: &StopConfig<T>,
    tol: T,
) -> Result<StopOutcome<T>, TerminationError> {
    let n = g.node_count();
    let window_len = cfg.window(g)?;
    let d = process.estimates().first().map_or(0, Vec::len);
    check_states(process.estimates(), n, d)?;
    let mut window_values = Vec::new();
    let mut max_hull_size = 0;
    loop {
        let start_k = process.iteration();
        let seeds: Vec<PointSet<T>> = process
            .estimates()
            .iter()
            .map(|c| PointSet::with_dim(d, vec![c.clone()]))
            .collect::<Result<_, _>>()
            .map_err(HullError::from)?;
        let ext = run_hull_consensus(&seeds, g, window_len, tol)?;
        max_hull_size = max_hull_size.max(ext.iter().map(PointSet::len).max().unwrap_or(0));
        for _ in 0..window_len {
            if process.iteration() >= cfg.k_max {
                let smallest = window_values.iter().copied().fold(T::infinity(), T::min);
                return Err(TerminationError::NotHalted { k_max: cfg.k_max, smallest: smallest.to_f64_lossy() });
            }
            process.advance()?;
        }
        let values: Vec<T> = ext
            .iter()
            .map(|e| hull_diameter(e, cfg.norm))
            .collect::<Result<_, _>>()?;
        window_values.push(values[0]);
        let stopping = values.iter().filter(|&&v| v < cfg.rho).count();
        if stopping == n {
            let halt_k = process.iteration();
            return Ok(StopOutcome {
                method: StoppingMethod::Hull,
                rho: cfg.rho,
                norm: cfg.norm,
                window_len,
                halt_k,
                node_halt_k: vec![halt_k; n],
                window_values,
                max_hull_size,
                final_states: process.estimates().to_vec(),
            });
        }
        if stopping > 0 {
            return Err(TerminationError::NonSimultaneousHalt { k: start_k + window_len });
        }
    }
}
