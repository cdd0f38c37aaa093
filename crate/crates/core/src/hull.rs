//! Extreme points, hull membership and the peer-to-peer convex hull protocol.
//!
//! Each node starts from the extreme points of its own data and, every
//! synchronous round, replaces its set by the extreme points of the union of
//! the sets held by its in-neighbors. After `diameter` rounds every node holds
//! the extreme set of the global data, in the same canonical order.

use thiserror::Error;

use crate::graph::DiGraph;
use crate::lp::{fit_convex_combination, LpError};
use crate::pointset::{PointSet, PointSetError};
use crate::scalar::{Norm, Scalar};

/// Default slack for geometric inclusion tests.
pub const DEFAULT_HULL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error("point set is empty")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("expected one state per node ({expected}), found {found}")]
    NodeCountMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    PointSet(#[from] PointSetError),
}

/// `true` when `p` lies in the convex hull of `s` up to L1 slack `tol`.
pub fn hull_membership<T: Scalar>(p: &[T], s: &PointSet<T>, tol: T) -> Result<bool, HullError> {
    if s.is_empty() {
        return Err(HullError::Empty);
    }
    if p.len() != s.dim() {
        return Err(HullError::DimensionMismatch { expected: s.dim(), found: p.len() });
    }
    if s.contains_exact(p) {
        return Ok(true);
    }
    // Outside the bounding box by more than tol in some coordinate: the L1
    // distance is at least that gap.
    for r in 0..p.len() {
        let (lo, hi) = s
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), q| (lo.min(q[r]), hi.max(q[r])));
        if p[r] < lo - tol || p[r] > hi + tol {
            return Ok(false);
        }
    }
    let fit = fit_convex_combination(s.points(), p)?;
    Ok(fit.distance <= tol)
}

/// Extreme points of `co(s)`: the points of `s` that are not convex
/// combinations of the others.
///
/// Points are examined in canonical order and a point found inside the hull
/// of the remaining ones is dropped before the next test. Removing a
/// non-extreme point leaves the hull unchanged, so near-duplicates keep one
/// representative instead of eliminating each other.
///
/// A point within `tol` of the remaining hull is also dropped, so each removal
/// can shrink the hull by up to `tol`. Inside a cluster of points closer than
/// `tol` the losses add up: every input point lies within `removed * tol` of
/// the result, and within `tol` when no two points are that close.
pub fn extreme_points<T: Scalar>(s: &PointSet<T>, tol: T) -> Result<PointSet<T>, HullError> {
    if s.is_empty() {
        return Err(HullError::Empty);
    }
    let mut keep: Vec<Vec<T>> = s.points().to_vec();
    let mut idx = 0;
    while idx < keep.len() {
        if keep.len() == 1 {
            break;
        }
        let candidate = keep[idx].clone();
        let others: Vec<Vec<T>> = keep
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != idx)
            .map(|(_, q)| q.clone())
            .collect();
        let others = PointSet::with_dim(s.dim(), others)?;
        if hull_membership(&candidate, &others, tol)? {
            keep.remove(idx);
        } else {
            idx += 1;
        }
    }
    Ok(PointSet::with_dim(s.dim(), keep)?)
}

/// One node's view in the hull protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct HullNodeState<T> {
    /// Current extreme-point estimate, canonically ordered.
    pub ext: PointSet<T>,
    /// Rounds completed.
    pub t: usize,
}

impl<T: Scalar> HullNodeState<T> {
    /// Initial state: the extreme points of the node's own data.
    pub fn init(data: &PointSet<T>, tol: T) -> Result<Self, HullError> {
        Ok(HullNodeState { ext: extreme_points(data, tol)?, t: 0 })
    }
}

/// One synchronous round: every node merges its in-neighbors' sets.
pub fn hull_round<T: Scalar>(
    states: &[HullNodeState<T>],
    g: &DiGraph,
    tol: T,
) -> Result<Vec<HullNodeState<T>>, HullError> {
    if states.len() != g.node_count() {
        return Err(HullError::NodeCountMismatch { expected: g.node_count(), found: states.len() });
    }
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    let dim = first.ext.dim();
    if let Some(bad) = states.iter().find(|s| s.ext.dim() != dim) {
        return Err(HullError::DimensionMismatch { expected: dim, found: bad.ext.dim() });
    }
    (0..g.node_count())
        .map(|i| {
            let union = PointSet::union(dim, g.in_neighbors(i).iter().map(|&j| &states[j].ext))?;
            Ok(HullNodeState { ext: extreme_points(&union, tol)?, t: states[i].t + 1 })
        })
        .collect()
}

/// Runs the hull protocol for `rounds` rounds from per-node data and returns
/// every intermediate configuration, starting with round 0.
pub fn hull_consensus_trace<T: Scalar>(
    data: &[PointSet<T>],
    g: &DiGraph,
    rounds: usize,
    tol: T,
) -> Result<Vec<Vec<HullNodeState<T>>>, HullError> {
    if data.len() != g.node_count() {
        return Err(HullError::NodeCountMismatch { expected: g.node_count(), found: data.len() });
    }
    let mut states: Vec<HullNodeState<T>> = data
        .iter()
        .map(|s| HullNodeState::init(s, tol))
        .collect::<Result<_, _>>()?;
    let mut trace = Vec::with_capacity(rounds + 1);
    for _ in 0..rounds {
        let next = hull_round(&states, g, tol)?;
        trace.push(std::mem::replace(&mut states, next));
    }
    trace.push(states);
    Ok(trace)
}

/// Per-node extreme sets after `rounds` rounds of the hull protocol.
pub fn run_hull_consensus<T: Scalar>(
    data: &[PointSet<T>],
    g: &DiGraph,
    rounds: usize,
    tol: T,
) -> Result<Vec<PointSet<T>>, HullError> {
    let mut trace = hull_consensus_trace(data, g, rounds, tol)?;
    let last = trace.pop().expect("trace has at least the initial round");
    Ok(last.into_iter().map(|s| s.ext).collect())
}

/// Largest pairwise distance within `e`; for an extreme set this is the
/// diameter of the whole hull.
pub fn hull_diameter<T: Scalar>(e: &PointSet<T>, norm: Norm) -> Result<T, HullError> {
    if e.is_empty() {
        return Err(HullError::Empty);
    }
    Ok(crate::scalar::max_pairwise_distance(e.points(), norm))
}

/// Checks that every later node state stays within the hull diameter of
/// `extreme_k` from the consensus limit.
///
/// `later` holds per-node state snapshots taken at or after the time
/// `extreme_k` was computed.
pub fn distance_from_convergence_bound<T: Scalar>(
    extreme_k: &PointSet<T>,
    later: &[Vec<Vec<T>>],
    limit: &[T],
    norm: Norm,
) -> Result<bool, HullError> {
    let bound = hull_diameter(extreme_k, norm)? + T::lit(DEFAULT_HULL_TOL);
    for snapshot in later {
        for c in snapshot {
            if c.len() != limit.len() {
                return Err(HullError::DimensionMismatch { expected: limit.len(), found: c.len() });
            }
            if norm.dist(c, limit) > bound {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
