//! Dense phase-one simplex for convex-combination feasibility.
//!
//! Given points `q_1..q_m` and a target `p`, solves
//!
//! ```text
//! minimize   sum_r (e+_r + e-_r)
//! subject to sum_q t_q (q_r - p_r) + e+_r - e-_r = 0   for each coordinate r
//!            sum_q t_q = 1,   t, e+, e- >= 0
//! ```
//!
//! The optimum is the L1 distance from `p` to the convex hull of the points,
//! so `p` lies in the hull exactly when the optimum is zero. The residual
//! pairs `e+`/`e-` play the role of phase-one artificials, and a basis with
//! `t_1 = 1` is feasible from the start. Pivoting follows Bland's rule.
//!
//! At optimality the simplex multipliers of the coordinate rows give a
//! direction `u` with `|u_r| <= 1` and `<u, q> <= <u, p> - distance` for
//! every point, i.e. a separating direction whenever `p` is outside.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("no points to combine")]
    NoPoints,
    #[error("point has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),
}

/// Result of projecting a point onto a hull in the L1 sense.
#[derive(Clone, Debug, PartialEq)]
pub struct HullFit<T> {
    /// L1 distance from the target to the convex hull.
    pub distance: T,
    /// Convex weights of the closest hull point, one per input point.
    pub weights: Vec<T>,
    /// Dual certificate; separates the target when `distance > 0`.
    pub direction: Vec<T>,
}

struct Tableau<T> {
    rows: usize,
    cols: usize,
    /// `rows` constraint rows followed by the reduced-cost row, each `cols + 1`
    /// wide (last entry is the right-hand side).
    a: Vec<T>,
    basis: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    fn at(&self, r: usize, c: usize) -> T {
        self.a[r * (self.cols + 1) + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = T::one() / self.at(pr, pc);
        for c in 0..w {
            self.a[pr * w + c] *= inv;
        }
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == T::zero() {
                continue;
            }
            for c in 0..w {
                let v = self.a[pr * w + c];
                self.a[r * w + c] -= f * v;
            }
            self.a[r * w + pc] = T::zero();
        }
        self.basis[pr] = pc;
    }
}

/// L1 distance from `target` to the convex hull of `points`, with weights and
/// a dual separating direction.
pub fn fit_convex_combination<T: Scalar>(points: &[Vec<T>], target: &[T]) -> Result<HullFit<T>, LpError> {
    let m = points.len();
    if m == 0 {
        return Err(LpError::NoPoints);
    }
    let d = target.len();
    for q in points {
        if q.len() != d {
            return Err(LpError::DimensionMismatch { expected: d, found: q.len() });
        }
    }
    // Columns: t_0..t_{m-1}, then e+_r at m + 2r and e-_r at m + 2r + 1.
    let cols = m + 2 * d;
    let rows = d + 1;
    let w = cols + 1;
    let mut a = vec![T::zero(); (rows + 1) * w];
    for r in 0..d {
        for (qi, q) in points.iter().enumerate() {
            a[r * w + qi] = q[r] - target[r];
        }
        a[r * w + m + 2 * r] = T::one();
        a[r * w + m + 2 * r + 1] = -T::one();
    }
    for qi in 0..m {
        a[d * w + qi] = T::one();
    }
    a[d * w + cols] = T::one();
    // Objective row holds costs; reduced costs are formed by pivoting below.
    for r in 0..d {
        a[rows * w + m + 2 * r] = T::one();
        a[rows * w + m + 2 * r + 1] = T::one();
    }

    let mut tab = Tableau { rows, cols, a, basis: vec![usize::MAX; rows] };
    tab.pivot(d, 0);
    for r in 0..d {
        // After eliminating t_0 the right-hand side is p_r - q0_r; choose the
        // residual variable whose sign keeps it nonnegative.
        let rhs = tab.at(r, cols);
        let col = if rhs >= T::zero() { m + 2 * r } else { m + 2 * r + 1 };
        tab.pivot(r, col);
    }

    let eps = T::epsilon() * T::lit(1024.0);
    let limit = 50 * (rows + cols) + 100;
    let mut pivots = 0;
    loop {
        let entering = (0..cols).find(|&c| tab.at(rows, c) < -eps);
        let Some(pc) = entering else { break };
        let mut leave: Option<(usize, T)> = None;
        for r in 0..rows {
            let coef = tab.at(r, pc);
            if coef > eps {
                let ratio = tab.at(r, cols) / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio || (ratio == bratio && tab.basis[r] < tab.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
        }
        // Objective is bounded below by zero, so an entering column always has
        // a positive pivot candidate up to round-off.
        let Some((pr, _)) = leave else { break };
        tab.pivot(pr, pc);
        pivots += 1;
        if pivots > limit {
            return Err(LpError::PivotLimit(limit));
        }
    }

    let mut weights = vec![T::zero(); m];
    let mut residual = vec![T::zero(); cols];
    for r in 0..rows {
        let var = tab.basis[r];
        residual[var] = tab.at(r, cols).max(T::zero());
        if var < m {
            weights[var] = residual[var];
        }
    }
    let distance = (0..d).fold(T::zero(), |acc, r| acc + residual[m + 2 * r] + residual[m + 2 * r + 1]);
    // Reduced cost of e+_r is 1 - y_r.
    let direction = (0..d).map(|r| T::one() - tab.at(rows, m + 2 * r)).collect();
    Ok(HullFit { distance, weights, direction })
}
