//! Ratio (push-sum) and row-stochastic consensus over `R^d` node states.
//!
//! Both engines are pure step functions. Each node's new value is a weighted
//! sum over its in-neighbors taken in ascending node order, so a run is
//! bit-reproducible and a `d`-dimensional run matches `d` scalar runs
//! exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hull::{hull_membership, HullError};
use crate::pointset::PointSet;
use crate::scalar::{dot, mean_vector, Scalar};
use crate::weights::{StochasticMatrix, WeightKind};

/// Iteration cap for the left Perron vector.
pub const PERRON_MAX_ITERS: usize = 100_000;
/// L1 change between Perron iterates treated as converged.
pub const PERRON_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("state has {found} nodes, weights have {expected}")]
    NodeCountMismatch { expected: usize, found: usize },
    #[error("node {node} has dimension {found}, expected {expected}")]
    DimensionMismatch { node: usize, expected: usize, found: usize },
    #[error("weights are {found:?}, engine needs {expected:?}")]
    WrongWeightKind { expected: WeightKind, found: WeightKind },
    #[error("denominator of node {node} is not positive ({value})")]
    NonPositiveDenominator { node: usize, value: f64 },
    #[error("no initial states")]
    Empty,
    #[error("Perron vector did not converge within {0} iterations")]
    PerronNotConverged(usize),
    #[error(transparent)]
    Hull(#[from] HullError),
}

/// Which linear consensus update to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Push-sum with a column-stochastic matrix.
    Ratio,
    /// Direct averaging with a row-stochastic matrix.
    Row,
}

impl Engine {
    pub fn weight_kind(self) -> WeightKind {
        match self {
            Engine::Ratio => WeightKind::ColumnStochastic,
            Engine::Row => WeightKind::RowStochastic,
        }
    }
}

fn check_dims<T: Scalar>(states: &[Vec<T>], n: usize) -> Result<usize, ConsensusError> {
    if states.len() != n {
        return Err(ConsensusError::NodeCountMismatch { expected: n, found: states.len() });
    }
    let d = states.first().map_or(0, Vec::len);
    for (node, s) in states.iter().enumerate() {
        if s.len() != d {
            return Err(ConsensusError::DimensionMismatch { node, expected: d, found: s.len() });
        }
    }
    Ok(d)
}

fn check_kind<T>(w: &StochasticMatrix<T>, expected: WeightKind) -> Result<(), ConsensusError>
where
    T: Scalar,
{
    if w.kind() != expected {
        return Err(ConsensusError::WrongWeightKind { expected, found: w.kind() });
    }
    Ok(())
}

/// Push-sum state: numerators `x`, denominators `y` and ratios `r = x / y`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioState<T> {
    pub x: Vec<Vec<T>>,
    pub y: Vec<T>,
    pub r: Vec<Vec<T>>,
    pub k: usize,
}

impl<T: Scalar> RatioState<T> {
    /// Initial state with `y_i = 1` and `r_i = x_i`.
    pub fn new(x0: Vec<Vec<T>>) -> Self {
        let n = x0.len();
        RatioState { r: x0.clone(), x: x0, y: vec![T::one(); n], k: 0 }
    }

    pub fn node_count(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

/// Node `j`'s ratio update from the in-neighbor values only:
/// `x'_j = sum p_ji x_i`, `y'_j = sum p_ji y_i`, `r'_j = x'_j / y'_j`.
pub fn ratio_node_update<T: Scalar>(
    j: usize,
    state: &RatioState<T>,
    p: &StochasticMatrix<T>,
) -> Result<(Vec<T>, T, Vec<T>), ConsensusError> {
    let d = state.dim();
    let mut x = vec![T::zero(); d];
    let mut y = T::zero();
    for &i in p.support(j) {
        let w = p.get(j, i);
        for (acc, &v) in x.iter_mut().zip(&state.x[i]) {
            *acc += w * v;
        }
        y += w * state.y[i];
    }
    if !(y > T::zero()) {
        return Err(ConsensusError::NonPositiveDenominator { node: j, value: y.to_f64_lossy() });
    }
    let r = x.iter().map(|&v| v / y).collect();
    Ok((x, y, r))
}

/// One synchronous push-sum round.
pub fn ratio_step<T: Scalar>(
    state: &RatioState<T>,
    p: &StochasticMatrix<T>,
) -> Result<RatioState<T>, ConsensusError> {
    check_kind(p, WeightKind::ColumnStochastic)?;
    check_dims(&state.x, p.size())?;
    if let Some(node) = state.y.iter().position(|&y| !(y > T::zero())) {
        return Err(ConsensusError::NonPositiveDenominator {
            node,
            value: state.y[node].to_f64_lossy(),
        });
    }
    let n = p.size();
    let mut next = RatioState {
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        k: state.k + 1,
    };
    for j in 0..n {
        let (x, y, r) = ratio_node_update(j, state, p)?;
        next.x.push(x);
        next.y.push(y);
        next.r.push(r);
    }
    Ok(next)
}

/// Row-stochastic state `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowState<T> {
    pub z: Vec<Vec<T>>,
    pub k: usize,
}

impl<T: Scalar> RowState<T> {
    pub fn new(z0: Vec<Vec<T>>) -> Self {
        RowState { z: z0, k: 0 }
    }
}

/// Node `i`'s averaging update `z'_i = sum a_ij z_j`.
pub fn row_node_update<T: Scalar>(i: usize, z: &[Vec<T>], a: &StochasticMatrix<T>) -> Vec<T> {
    let d = z.first().map_or(0, Vec::len);
    let mut out = vec![T::zero(); d];
    for &j in a.support(i) {
        let w = a.get(i, j);
        for (acc, &v) in out.iter_mut().zip(&z[j]) {
            *acc += w * v;
        }
    }
    out
}

/// One synchronous row-stochastic round.
pub fn row_step<T: Scalar>(
    state: &RowState<T>,
    a: &StochasticMatrix<T>,
) -> Result<RowState<T>, ConsensusError> {
    check_kind(a, WeightKind::RowStochastic)?;
    check_dims(&state.z, a.size())?;
    let z = (0..a.size()).map(|i| row_node_update(i, &state.z, a)).collect();
    Ok(RowState { z, k: state.k + 1 })
}

/// A running consensus process whose per-node estimates can be observed.
///
/// Stopping criteria are written against this trait so they apply to either
/// engine.
pub trait ConsensusProcess<T: Scalar> {
    /// Advances one synchronous round.
    fn advance(&mut self) -> Result<(), ConsensusError>;
    /// Current per-node estimates (ratio states or row states).
    fn estimates(&self) -> &[Vec<T>];
    /// Iterations completed.
    fn iteration(&self) -> usize;
    /// Numerators and denominators, when the engine has them.
    fn mass(&self) -> Option<(&[Vec<T>], &[T])> {
        None
    }
}

/// Ratio consensus bundled with its weights.
#[derive(Clone, Debug)]
pub struct RatioProcess<T> {
    pub state: RatioState<T>,
    pub weights: StochasticMatrix<T>,
}

impl<T: Scalar> RatioProcess<T> {
    pub fn new(x0: Vec<Vec<T>>, weights: StochasticMatrix<T>) -> Result<Self, ConsensusError> {
        check_kind(&weights, WeightKind::ColumnStochastic)?;
        check_dims(&x0, weights.size())?;
        Ok(RatioProcess { state: RatioState::new(x0), weights })
    }
}

impl<T: Scalar> ConsensusProcess<T> for RatioProcess<T> {
    fn advance(&mut self) -> Result<(), ConsensusError> {
        self.state = ratio_step(&self.state, &self.weights)?;
        Ok(())
    }

    fn estimates(&self) -> &[Vec<T>] {
        &self.state.r
    }

    fn iteration(&self) -> usize {
        self.state.k
    }

    fn mass(&self) -> Option<(&[Vec<T>], &[T])> {
        Some((&self.state.x, &self.state.y))
    }
}

/// Row-stochastic consensus bundled with its weights.
#[derive(Clone, Debug)]
pub struct RowProcess<T> {
    pub state: RowState<T>,
    pub weights: StochasticMatrix<T>,
}

impl<T: Scalar> RowProcess<T> {
    pub fn new(z0: Vec<Vec<T>>, weights: StochasticMatrix<T>) -> Result<Self, ConsensusError> {
        check_kind(&weights, WeightKind::RowStochastic)?;
        check_dims(&z0, weights.size())?;
        Ok(RowProcess { state: RowState::new(z0), weights })
    }
}

impl<T: Scalar> ConsensusProcess<T> for RowProcess<T> {
    fn advance(&mut self) -> Result<(), ConsensusError> {
        self.state = row_step(&self.state, &self.weights)?;
        Ok(())
    }

    fn estimates(&self) -> &[Vec<T>] {
        &self.state.z
    }

    fn iteration(&self) -> usize {
        self.state.k
    }
}

/// Boxes the process matching `engine`.
pub fn make_process<T: Scalar>(
    engine: Engine,
    initial: Vec<Vec<T>>,
    weights: StochasticMatrix<T>,
) -> Result<Box<dyn ConsensusProcess<T>>, ConsensusError> {
    Ok(match engine {
        Engine::Ratio => Box::new(RatioProcess::new(initial, weights)?),
        Engine::Row => Box::new(RowProcess::new(initial, weights)?),
    })
}

/// Left Perron vector `pi` of a row-stochastic matrix (`pi A = pi`,
/// `sum pi = 1`) by power iteration from the uniform vector.
pub fn left_perron_vector<T: Scalar>(a: &StochasticMatrix<T>) -> Result<Vec<T>, ConsensusError> {
    check_kind(a, WeightKind::RowStochastic)?;
    let n = a.size();
    let tol = T::lit(PERRON_TOL);
    let mut pi = vec![T::one() / T::from_count(n); n];
    for _ in 0..PERRON_MAX_ITERS {
        let mut next = vec![T::zero(); n];
        for i in 0..n {
            for &j in a.support(i) {
                next[j] += pi[i] * a.get(i, j);
            }
        }
        let total = next.iter().fold(T::zero(), |s, &v| s + v);
        next.iter_mut().for_each(|v| *v /= total);
        let change = pi.iter().zip(&next).fold(T::zero(), |s, (&a, &b)| s + (a - b).abs());
        pi = next;
        if change < tol {
            return Ok(pi);
        }
    }
    Err(ConsensusError::PerronNotConverged(PERRON_MAX_ITERS))
}

/// Analytic consensus value.
///
/// Ratio engine: the average of the initial numerators. Row engine:
/// `sum_j pi_j z_j(0)` with `pi` the left Perron vector of the weights.
pub fn consensus_limit<T: Scalar>(
    initial: &[Vec<T>],
    engine: Engine,
    weights: &StochasticMatrix<T>,
) -> Result<Vec<T>, ConsensusError> {
    if initial.is_empty() {
        return Err(ConsensusError::Empty);
    }
    check_kind(weights, engine.weight_kind())?;
    let d = check_dims(initial, weights.size())?;
    match engine {
        Engine::Ratio => Ok(mean_vector(initial)),
        Engine::Row => {
            let pi = left_perron_vector(weights)?;
            let mut out = vec![T::zero(); d];
            for (z, &w) in initial.iter().zip(&pi) {
                for (acc, &v) in out.iter_mut().zip(z) {
                    *acc += w * v;
                }
            }
            Ok(out)
        }
    }
}

/// Support function `h_S(u) = max_{x in S} <x, u>`.
pub fn support_function<T: Scalar>(s: &PointSet<T>, u: &[T]) -> Result<T, HullError> {
    if s.is_empty() {
        return Err(HullError::Empty);
    }
    if u.len() != s.dim() {
        return Err(HullError::DimensionMismatch { expected: s.dim(), found: u.len() });
    }
    Ok(s.iter().map(|x| dot(x, u)).fold(T::neg_infinity(), T::max))
}

/// `true` when `co(next)` is contained in `co(prev)` up to `tol`, decided by
/// hull membership of every point of `next`.
pub fn is_convex_decreasing<T: Scalar>(
    prev: &PointSet<T>,
    next: &PointSet<T>,
    tol: T,
) -> Result<bool, HullError> {
    if prev.dim() != next.dim() {
        return Err(HullError::DimensionMismatch { expected: prev.dim(), found: next.dim() });
    }
    for p in next {
        if !hull_membership(p, prev, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Header for state snapshots written by [`append_state_csv`].
pub const STATE_CSV_HEADER: &str = "k,node,coord,x,y,r\n";

/// Appends rows `k,node,coord,x,y,r` with 17 significant digits. Engines
/// without numerators and denominators write `x = r` and `y = 1`.
pub fn append_state_csv<T: Scalar>(out: &mut String, k: usize, process: &dyn ConsensusProcess<T>) {
    use std::fmt::Write;
    let r = process.estimates();
    let mass = process.mass();
    for (node, rv) in r.iter().enumerate() {
        for (coord, &rc) in rv.iter().enumerate() {
            let (x, y) = match mass {
                Some((x, y)) => (x[node][coord], y[node]),
                None => (rc, T::one()),
            };
            let _ = writeln!(
                out,
                "{k},{node},{coord},{:.16e},{:.16e},{:.16e}",
                x.to_f64_lossy(),
                y.to_f64_lossy(),
                rc.to_f64_lossy()
            );
        }
    }
}

/// Redundant nesting check through support functions: `h_next(u) <= h_prev(u)
/// + tol` along `directions` random unit vectors drawn from `seed`. A pass is
/// necessary for nesting but not sufficient.
pub fn support_nesting_check<T: Scalar>(
    prev: &PointSet<T>,
    next: &PointSet<T>,
    directions: usize,
    seed: u64,
    tol: T,
) -> Result<bool, HullError> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let d = prev.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..directions {
        // Normalized Gaussian samples are uniform on the sphere.
        let u: Vec<T> = loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 1e-12 {
                break v.iter().map(|x| T::lit(x / len)).collect();
            }
        };
        if support_function(next, &u)? > support_function(prev, &u)? + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs `engine` for `steps` rounds in dimension `d` and again once per
/// coordinate, and reports whether every coordinate matches bit for bit.
pub fn scalar_vector_equivalence_check<T: Scalar>(
    initial: &[Vec<T>],
    engine: Engine,
    weights: &StochasticMatrix<T>,
    steps: usize,
) -> Result<bool, ConsensusError> {
    let d = check_dims(initial, weights.size())?;
    let run = |init: Vec<Vec<T>>| -> Result<Vec<Vec<T>>, ConsensusError> {
        let mut proc = make_process(engine, init, weights.clone())?;
        for _ in 0..steps {
            proc.advance()?;
        }
        Ok(proc.estimates().to_vec())
    };
    let full = run(initial.to_vec())?;
    for c in 0..d {
        let projected = initial.iter().map(|v| vec![v[c]]).collect();
        let scalar = run(projected)?;
        let same = full
            .iter()
            .zip(&scalar)
            .all(|(v, s)| v[c].to_f64_lossy().to_bits() == s[0].to_f64_lossy().to_bits());
        if !same {
            return Ok(false);
        }
    }
    Ok(true)
}
