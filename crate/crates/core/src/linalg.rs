//! Small dense linear algebra: Gaussian elimination, inverses and the
//! spectral (operator 2-) norm by power iteration.

use thiserror::Error;

use crate::scalar::Scalar;

/// Iteration cap for the operator-norm power iteration.
pub const OP_NORM_MAX_ITERS: usize = 100_000;
/// Relative change in the eigenvalue estimate treated as converged.
pub const OP_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
}

pub type Matrix<T> = Vec<Vec<T>>;

fn check_square<T>(a: &[Vec<T>]) -> Result<usize, LinalgError> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(LinalgError::NotSquare);
    }
    Ok(n)
}

pub fn identity<T: Scalar>(n: usize) -> Matrix<T> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect()
}

pub fn mat_vec<T: Scalar>(a: &[Vec<T>], v: &[T]) -> Vec<T> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(T::zero(), |s, (&x, &y)| s + x * y))
        .collect()
}

/// `a^T v`.
pub fn mat_t_vec<T: Scalar>(a: &[Vec<T>], v: &[T]) -> Vec<T> {
    let cols = a.first().map_or(0, Vec::len);
    let mut out = vec![T::zero(); cols];
    for (row, &s) in a.iter().zip(v) {
        for (o, &x) in out.iter_mut().zip(row) {
            *o += x * s;
        }
    }
    out
}

pub fn mat_sub<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Matrix<T> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(&x, &y)| x - y).collect())
        .collect()
}

pub fn vec_sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Euclidean length.
pub fn euclid<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt()
}

/// LU factorization with partial pivoting, kept as the permuted combined
/// factor for repeated solves.
struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

fn factor<T: Scalar>(a: &[Vec<T>]) -> Result<Lu<T>, LinalgError> {
    let n = check_square(a)?;
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return Err(LinalgError::Singular);
    }
    let tiny = T::epsilon() * scale * T::from_count(n);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, lu[r][col].abs()))
            .fold((col, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tiny {
            return Err(LinalgError::Singular);
        }
        lu.swap(col, piv);
        perm.swap(col, piv);
        for r in col + 1..n {
            let f = lu[r][col] / lu[col][col];
            lu[r][col] = f;
            for c in col + 1..n {
                let v = lu[col][c];
                lu[r][c] -= f * v;
            }
        }
    }
    Ok(Lu { lu, perm })
}

impl<T: Scalar> Lu<T> {
    fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.len();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for c in 0..r {
                let v = x[c];
                x[r] -= self.lu[r][c] * v;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let v = x[c];
                x[r] -= self.lu[r][c] * v;
            }
            x[r] /= self.lu[r][r];
        }
        x
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Result<Vec<T>, LinalgError> {
    let lu = factor(a)?;
    if b.len() != a.len() {
        return Err(LinalgError::Dimension(format!("rhs has {} entries, matrix {}", b.len(), a.len())));
    }
    Ok(lu.solve(b))
}

pub fn inverse<T: Scalar>(a: &[Vec<T>]) -> Result<Matrix<T>, LinalgError> {
    let lu = factor(a)?;
    let n = a.len();
    let cols: Vec<Vec<T>> = identity::<T>(n).iter().map(|e| lu.solve(e)).collect();
    Ok((0..n).map(|r| (0..n).map(|c| cols[c][r]).collect()).collect())
}

/// `||a||_op = sqrt(lambda_max(a^T a))`, by power iteration on `a^T a`.
pub fn operator_norm<T: Scalar>(a: &[Vec<T>]) -> Result<T, LinalgError> {
    let cols = a.first().map_or(0, Vec::len);
    if cols == 0 {
        return Ok(T::zero());
    }
    if a.iter().any(|r| r.len() != cols) {
        return Err(LinalgError::Dimension("ragged matrix".into()));
    }
    // Deterministic start with distinct entries so it is not orthogonal to
    // the dominant direction for structured inputs.
    let mut v: Vec<T> = (0..cols).map(|i| T::one() + T::lit(0.1) * T::from_count(i)).collect();
    let nv = euclid(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let tol = T::lit(OP_NORM_TOL);
    let mut lambda = T::zero();
    for _ in 0..OP_NORM_MAX_ITERS {
        let w = mat_t_vec(a, &mat_vec(a, &v));
        let next_lambda = w.iter().zip(&v).fold(T::zero(), |s, (&x, &y)| s + x * y);
        let nw = euclid(&w);
        if nw == T::zero() {
            // v fell in the null space; the start vector has positive
            // overlap with every column, so this only happens for a = 0.
            return Ok(T::zero());
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (next_lambda - lambda).abs() <= tol * next_lambda.abs() {
            return Ok(next_lambda.max(T::zero()).sqrt());
        }
        lambda = next_lambda;
    }
    Err(LinalgError::NoConvergence(OP_NORM_MAX_ITERS))
}

/// 2-norm condition number `||a|| ||a^-1||`.
pub fn condition_number<T: Scalar>(a: &[Vec<T>]) -> Result<T, LinalgError> {
    let inv = inverse(a)?;
    Ok(operator_norm(a)? * operator_norm(&inv)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        let x = solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0_f64).abs() < 1e-15 && (x[1] - 2.0_f64).abs() < 1e-15);
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert_eq!(solve(&a, &[1.0, 1.0]), Err(LinalgError::Singular));
        assert_eq!(inverse(&[vec![0.0_f64]]), Err(LinalgError::Singular));
        assert_eq!(inverse::<f64>(&[vec![1.0, 2.0]]), Err(LinalgError::NotSquare));
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = vec![vec![4.0, 1.0, 0.5], vec![1.0, 3.0, -1.0], vec![0.5, -1.0, 2.0]];
        let inv = inverse(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i][k] * inv[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn operator_norm_analytic_cases() {
        assert!((operator_norm(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap() - 3.0_f64).abs() < 1e-9);
        assert!((operator_norm(&identity::<f64>(4)).unwrap() - 1.0).abs() < 1e-12);
        let t = 0.7_f64;
        let rot = vec![vec![2.0 * t.cos(), -2.0 * t.sin()], vec![2.0 * t.sin(), 2.0 * t.cos()]];
        assert!((operator_norm(&rot).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(operator_norm(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap(), 0.0);
        // Rank one: ||u v^T|| = |u| |v|.
        let u = [1.0, 2.0];
        let v = [3.0, -1.0, 0.5];
        let m: Vec<Vec<f64>> = u.iter().map(|a| v.iter().map(|b| a * b).collect()).collect();
        let expect = euclid(&u) * euclid(&v);
        assert!((operator_norm(&m).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn condition_of_diagonal() {
        let c = condition_number(&[vec![10.0, 0.0], vec![0.0, 0.1]]).unwrap();
        assert!((c - 100.0_f64).abs() < 1e-6);
    }
}
