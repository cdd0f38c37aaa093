//! Column- and row-stochastic weight matrices.
//!
//! Entries are indexed `[receiver][sender]` in both kinds, so the update
//! `x(k+1) = W x(k)` reads row `i` of `W` for node `i`, and `W[i][j] > 0`
//! exactly when `(i, j)` is an edge of the graph.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DiGraph;
use crate::scalar::Scalar;

/// Column/row sums must match one within this slack.
pub const STOCHASTIC_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// Every column sums to one: senders split their mass among receivers.
    ColumnStochastic,
    /// Every row sums to one: receivers average what they hear.
    RowStochastic,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("matrix is not square ({rows} rows, row {row} has {len} entries)")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("empty matrix")]
    Empty,
    #[error("negative or non-finite entry at ({0}, {1})")]
    InvalidEntry(usize, usize),
    #[error("diagonal entry {0} is not strictly positive")]
    ZeroDiagonal(usize),
    #[error("{kind:?} sum {index} equals {sum}, expected 1")]
    NotStochastic { kind: WeightKind, index: usize, sum: f64 },
}

/// Dense nonnegative stochastic matrix together with its support pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix<T> {
    kind: WeightKind,
    n: usize,
    w: Vec<T>,
    /// Per row: column indices with positive weight, ascending.
    support: Vec<Vec<usize>>,
}

impl<T: Scalar> StochasticMatrix<T> {
    /// Equal-splitting weights for `g`.
    ///
    /// Column kind: sender `j` gives `1 / out_degree(j)` to each receiver.
    /// Row kind: receiver `i` gives `1 / in_degree(i)` to each sender.
    pub fn for_graph(g: &DiGraph, kind: WeightKind) -> Self {
        let n = g.node_count();
        let mut w = vec![T::zero(); n * n];
        for i in 0..n {
            for &j in g.in_neighbors(i) {
                w[i * n + j] = match kind {
                    WeightKind::ColumnStochastic => T::one() / T::from_count(g.out_degree(j)),
                    WeightKind::RowStochastic => T::one() / T::from_count(g.in_degree(i)),
                };
            }
        }
        let support = (0..n).map(|i| g.in_neighbors(i).to_vec()).collect();
        StochasticMatrix { kind, n, w, support }
    }

    /// Validates a dense matrix given as rows `[receiver][sender]`.
    ///
    /// The implied graph need not be strongly connected; that is left to the
    /// caller (e.g. a reducible row-stochastic matrix still has a limit).
    pub fn from_rows(kind: WeightKind, rows: &[Vec<T>]) -> Result<Self, WeightError> {
        let n = rows.len();
        if n == 0 {
            return Err(WeightError::Empty);
        }
        let mut w = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(WeightError::NotSquare { rows: n, row: r, len: row.len() });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < T::zero() {
                    return Err(WeightError::InvalidEntry(r, c));
                }
            }
            if row[r] <= T::zero() {
                return Err(WeightError::ZeroDiagonal(r));
            }
            w.extend_from_slice(row);
        }
        let tol = T::lit(STOCHASTIC_SUM_TOL);
        for idx in 0..n {
            let sum = match kind {
                WeightKind::ColumnStochastic => (0..n).fold(T::zero(), |a, r| a + w[r * n + idx]),
                WeightKind::RowStochastic => (0..n).fold(T::zero(), |a, c| a + w[idx * n + c]),
            };
            if (sum - T::one()).abs() > tol {
                return Err(WeightError::NotStochastic {
                    kind,
                    index: idx,
                    sum: sum.to_f64_lossy(),
                });
            }
        }
        let support = (0..n)
            .map(|r| (0..n).filter(|&c| w[r * n + c] > T::zero()).collect())
            .collect();
        Ok(StochasticMatrix { kind, n, w, support })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Weight node `receiver` applies to the value from `sender`.
    pub fn get(&self, receiver: usize, sender: usize) -> T {
        self.w[receiver * self.n + sender]
    }

    /// Senders with positive weight into `receiver`, ascending.
    pub fn support(&self, receiver: usize) -> &[usize] {
        &self.support[receiver]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.w.chunks(self.n).map(<[T]>::to_vec).collect()
    }

    /// `true` when the positive pattern equals the edge set of `g`.
    pub fn matches_graph(&self, g: &DiGraph) -> bool {
        self.n == g.node_count() && (0..self.n).all(|i| self.support[i] == g.in_neighbors(i))
    }

    pub fn row_sum(&self, r: usize) -> T {
        self.w[r * self.n..(r + 1) * self.n]
            .iter()
            .fold(T::zero(), |a, &v| a + v)
    }

    pub fn column_sum(&self, c: usize) -> T {
        (0..self.n).fold(T::zero(), |a, r| a + self.w[r * self.n + c])
    }
}
