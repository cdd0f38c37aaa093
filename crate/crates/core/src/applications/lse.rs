//! Least squares estimation by average consensus.
//!
//! Node `j` holds one sample `(x_j, y_j)` and forms `g^j = (g_1(x_j), ..,
//! g_M(x_j))`. Averaging `g^j (g^j)^T` and `g^j y_j` over the network gives
//! the normal-equation terms `M` and `z`, so every node can estimate
//! `theta_i = M_i^{-1} z_i` and bound its own error from local quantities.
//! Both terms travel as one flattened ratio-consensus payload of length
//! `M^2 + M`.

use thiserror::Error;

use crate::consensus::{ratio_step, ConsensusError, RatioState};
use crate::linalg::{self, euclid, mat_sub, operator_norm, vec_sub, LinalgError, Matrix};
use crate::scalar::Scalar;
use crate::weights::StochasticMatrix;

/// Gram matrices with a larger 2-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Slack allowed when checking the error bound.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LseError {
    #[error("dataset is empty")]
    EmptyData,
    #[error("basis is empty")]
    EmptyBasis,
    #[error("matrix is singular")]
    Singular,
    #[error("matrix condition number {0:e} exceeds the limit")]
    IllConditioned(f64),
    #[error("bound not applicable: m * ||M_i - M|| = {0} >= 1")]
    BoundInapplicable(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(LinalgError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
}

impl From<LinalgError> for LseError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Singular => LseError::Singular,
            other => LseError::Linalg(other),
        }
    }
}

/// Monomial basis `g_s(x) = x^{p_s}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    powers: Vec<u32>,
}

impl Basis {
    /// `1, x, .., x^degree`.
    pub fn polynomial(degree: u32) -> Self {
        Basis { powers: (0..=degree).collect() }
    }

    pub fn monomials(powers: Vec<u32>) -> Self {
        Basis { powers }
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn eval<T: Scalar>(&self, x: T) -> Vec<T> {
        self.powers.iter().map(|&p| x.powi(p as i32)).collect()
    }
}

/// Per-node normal-equation terms `(M_i, z_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LseNodeState<T> {
    pub m: Matrix<T>,
    pub z: Vec<T>,
}

impl<T: Scalar> LseNodeState<T> {
    /// Node state for one sample: `(g g^T, g y)`.
    pub fn from_sample(x: T, y: T, basis: &Basis) -> Self {
        let g = basis.eval(x);
        let m = g.iter().map(|&a| g.iter().map(|&b| a * b).collect()).collect();
        let z = g.iter().map(|&a| a * y).collect();
        LseNodeState { m, z }
    }

    /// Row-major `M` followed by `z`.
    pub fn to_payload(&self) -> Vec<T> {
        let mut out: Vec<T> = self.m.iter().flatten().copied().collect();
        out.extend_from_slice(&self.z);
        out
    }

    pub fn from_payload(payload: &[T], basis_len: usize) -> Result<Self, LseError> {
        let mm = basis_len * basis_len;
        if payload.len() != mm + basis_len {
            return Err(LseError::Dimension(format!(
                "payload has {} entries, expected {}",
                payload.len(),
                mm + basis_len
            )));
        }
        let m = payload[..mm].chunks(basis_len).map(<[T]>::to_vec).collect();
        Ok(LseNodeState { m, z: payload[mm..].to_vec() })
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        let n = self.m.len();
        (0..n).all(|i| (0..i).all(|j| (self.m[i][j] - self.m[j][i]).abs() <= tol))
    }
}

/// Network averages `M = (1/N) sum g g^T` and `z = (1/N) sum g y`.
pub fn normal_equations<T: Scalar>(data: &[(T, T)], basis: &Basis) -> Result<LseNodeState<T>, LseError> {
    if data.is_empty() {
        return Err(LseError::EmptyData);
    }
    if basis.is_empty() {
        return Err(LseError::EmptyBasis);
    }
    let payloads: Vec<Vec<T>> = data
        .iter()
        .map(|&(x, y)| LseNodeState::from_sample(x, y, basis).to_payload())
        .collect();
    LseNodeState::from_payload(&crate::scalar::mean_vector(&payloads), basis.len())
}

fn checked_solve<T: Scalar>(m: &[Vec<T>], z: &[T]) -> Result<Vec<T>, LseError> {
    if z.len() != m.len() {
        return Err(LseError::Dimension(format!("z has {} entries, M is {}x{}", z.len(), m.len(), m.len())));
    }
    let cond = linalg::condition_number(m)?;
    if !(cond <= T::lit(MAX_CONDITION)) {
        return Err(LseError::IllConditioned(cond.to_f64_lossy()));
    }
    Ok(linalg::solve(m, z)?)
}

/// Centralized estimate `theta = M^{-1} z`.
pub fn lse_batch<T: Scalar>(data: &[(T, T)], basis: &Basis) -> Result<Vec<T>, LseError> {
    let ne = normal_equations(data, basis)?;
    checked_solve(&ne.m, &ne.z)
}

/// A node's estimate `theta_i = M_i^{-1} z_i`. Early in a run `M_i` is
/// typically rank deficient and this returns an error.
pub fn lse_consensus_estimate<T: Scalar>(m_i: &[Vec<T>], z_i: &[T]) -> Result<Vec<T>, LseError> {
    checked_solve(m_i, z_i)
}

/// Locally computable error bound for a node's estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct LseBound<T> {
    /// `||M_i^{-1}||_op`.
    pub m: T,
    /// `m^2 (|z_i| + |z_i - z|) / (1 - m ||M_i - M||_op)`.
    pub c: T,
    /// `m |z_i - z| + c ||M_i - M||_op`.
    pub bound: T,
    /// Actual error `|theta_i - theta|`.
    pub error: T,
    pub holds: bool,
}

/// Evaluates the perturbation bound on `|theta_i - theta|`.
pub fn lse_error_bound<T: Scalar>(
    m_i: &[Vec<T>],
    z_i: &[T],
    m_true: &[Vec<T>],
    z_true: &[T],
) -> Result<LseBound<T>, LseError> {
    let inv_i = linalg::inverse(m_i)?;
    let m = operator_norm(&inv_i)?;
    let dm = operator_norm(&mat_sub(m_i, m_true))?;
    let dz = euclid(&vec_sub(z_i, z_true));
    let denom = T::one() - m * dm;
    if !(denom > T::zero()) {
        return Err(LseError::BoundInapplicable((m * dm).to_f64_lossy()));
    }
    let c = m * m * (euclid(z_i) + dz) / denom;
    let bound = m * dz + c * dm;
    let theta_i = linalg::mat_vec(&inv_i, z_i);
    let theta = linalg::solve(m_true, z_true)?;
    let error = euclid(&vec_sub(&theta_i, &theta));
    Ok(LseBound { m, c, bound, error, holds: error <= bound + T::lit(BOUND_SLACK) })
}

/// Per-node status at one iteration of a consensus LSE run.
#[derive(Clone, Debug, PartialEq)]
pub enum LseStatus<T> {
    /// `M_i` not invertible (or too ill-conditioned) yet.
    Singular,
    /// Estimate available but the bound's precondition fails.
    Estimate { theta: Vec<T>, error: T },
    Bounded { theta: Vec<T>, bound: LseBound<T> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LseRecord<T> {
    pub n: usize,
    pub node: usize,
    pub status: LseStatus<T>,
}

/// Consensus LSE run over a fixed number of iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct LseTrace<T> {
    pub theta_hat: Vec<T>,
    pub truth: LseNodeState<T>,
    pub records: Vec<LseRecord<T>>,
    pub final_state: RatioState<T>,
}

impl<T: Scalar> LseTrace<T> {
    /// CSV with columns `n,node,lhs,bound,holds`; `bound` and `holds` are
    /// empty where the bound does not apply and rows where `M_i` is singular
    /// are omitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,node,lhs,bound,holds\n");
        for rec in &self.records {
            match &rec.status {
                LseStatus::Singular => {}
                LseStatus::Estimate { error, .. } => {
                    out.push_str(&format!("{},{},{:.16e},,\n", rec.n, rec.node, error.to_f64_lossy()));
                }
                LseStatus::Bounded { bound, .. } => out.push_str(&format!(
                    "{},{},{:.16e},{:.16e},{}\n",
                    rec.n,
                    rec.node,
                    bound.error.to_f64_lossy(),
                    bound.bound.to_f64_lossy(),
                    u8::from(bound.holds)
                )),
            }
        }
        out
    }

    /// First iteration after which every node's error stays below `eps`.
    pub fn settled_after(&self, eps: T) -> Option<usize> {
        let last = self.records.last()?.n;
        let mut settled = Some(last);
        for n in (0..=last).rev() {
            let ok = self.records.iter().filter(|r| r.n == n).all(|r| match &r.status {
                LseStatus::Singular => false,
                LseStatus::Estimate { error, .. } => *error < eps,
                LseStatus::Bounded { bound, .. } => bound.error < eps,
            });
            if ok {
                settled = Some(n);
            } else {
                return if n == last { None } else { settled };
            }
        }
        settled
    }
}

/// Runs ratio consensus on the LSE payloads for `iterations` rounds, one
/// sample per node, and evaluates every node's estimate and bound each round.
pub fn run_lse_consensus<T: Scalar>(
    p: &StochasticMatrix<T>,
    data: &[(T, T)],
    basis: &Basis,
    iterations: usize,
) -> Result<LseTrace<T>, LseError> {
    if data.len() != p.size() {
        return Err(LseError::Dimension(format!("{} samples for {} nodes", data.len(), p.size())));
    }
    let truth = normal_equations(data, basis)?;
    let theta_hat = checked_solve(&truth.m, &truth.z)?;
    let payloads = data
        .iter()
        .map(|&(x, y)| LseNodeState::from_sample(x, y, basis).to_payload())
        .collect();
    let mut state = RatioState::new(payloads);
    let mut records = Vec::with_capacity((iterations + 1) * data.len());
    for n in 0..=iterations {
        if n > 0 {
            state = ratio_step(&state, p)?;
        }
        for (node, r) in state.r.iter().enumerate() {
            let local = LseNodeState::from_payload(r, basis.len())?;
            let status = match lse_consensus_estimate(&local.m, &local.z) {
                Err(LseError::Singular | LseError::IllConditioned(_)) => LseStatus::Singular,
                Err(e) => return Err(e),
                Ok(theta) => match lse_error_bound(&local.m, &local.z, &truth.m, &truth.z) {
                    Ok(bound) => LseStatus::Bounded { theta, bound },
                    Err(LseError::BoundInapplicable(_)) => {
                        let error = euclid(&vec_sub(&theta, &theta_hat));
                        LseStatus::Estimate { theta, error }
                    }
                    Err(e) => return Err(e),
                },
            };
            records.push(LseRecord { n, node, status });
        }
    }
    Ok(LseTrace { theta_hat, truth, records, final_state: state })
}
