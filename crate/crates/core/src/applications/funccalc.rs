//! Distributed evaluation of a function of all node values.
//!
//! Node `i` starts with `N u_i e_i`, so ratio consensus drives every
//! estimate toward the full vector `u`. A Hölder continuous `f` then gives
//! `|f(r_i) - f(u)| <= C ||r_i - u||^alpha` from any node's estimate.

use crate::consensus::RatioState;
use crate::scalar::{Norm, Scalar};

/// Slack allowed when checking the Hölder bound.
pub const HOLDER_SLACK: f64 = 1e-12;

/// Initial ratio state: node `i` holds `N u_i` in coordinate `i`.
pub fn funccalc_init<T: Scalar>(u: &[T]) -> RatioState<T> {
    let n = u.len();
    let big_n = T::from_count(n);
    let x0 = (0..n)
        .map(|i| {
            let mut v = vec![T::zero(); n];
            v[i] = big_n * u[i];
            v
        })
        .collect();
    RatioState::new(x0)
}

/// A function with Hölder constants `(C, alpha)` for a given norm.
pub trait HolderFunction<T: Scalar> {
    fn name(&self) -> &str;
    fn eval(&self, r: &[T]) -> T;
    /// `C` for vectors of length `n` measured in `norm`.
    fn constant(&self, norm: Norm, n: usize) -> T;
    fn exponent(&self) -> T;
}

/// `max_k r_k`: 1-Lipschitz in every p-norm.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxCoordinate;

impl<T: Scalar> HolderFunction<T> for MaxCoordinate {
    fn name(&self) -> &str {
        "max"
    }
    fn eval(&self, r: &[T]) -> T {
        r.iter().fold(T::neg_infinity(), |m, &x| m.max(x))
    }
    fn constant(&self, _norm: Norm, _n: usize) -> T {
        T::one()
    }
    fn exponent(&self) -> T {
        T::one()
    }
}

/// `(1/N) sum_k r_k`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Mean;

/// `|sum_k v_k| <= n^{1 - 1/p} ||v||_p`.
fn sum_constant<T: Scalar>(norm: Norm, n: usize) -> T {
    let n = T::from_count(n);
    match norm {
        Norm::L1 => T::one(),
        Norm::LInf => n,
        _ => n.powf(T::one() - T::one() / T::lit(norm.p())),
    }
}

impl<T: Scalar> HolderFunction<T> for Mean {
    fn name(&self) -> &str {
        "mean"
    }
    fn eval(&self, r: &[T]) -> T {
        Sum.eval(r) / T::from_count(r.len())
    }
    fn constant(&self, norm: Norm, n: usize) -> T {
        sum_constant::<T>(norm, n) / T::from_count(n)
    }
    fn exponent(&self) -> T {
        T::one()
    }
}

/// `sum_k r_k`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sum;

impl<T: Scalar> HolderFunction<T> for Sum {
    fn name(&self) -> &str {
        "sum"
    }
    fn eval(&self, r: &[T]) -> T {
        r.iter().fold(T::zero(), |s, &x| s + x)
    }
    fn constant(&self, norm: Norm, n: usize) -> T {
        sum_constant(norm, n)
    }
    fn exponent(&self) -> T {
        T::one()
    }
}

/// User-supplied function with declared constants, valid for any norm the
/// caller vouches for.
pub struct Custom<T> {
    pub name: String,
    pub f: Box<dyn Fn(&[T]) -> T + Send + Sync>,
    pub c: T,
    pub alpha: T,
}

impl<T: Scalar> HolderFunction<T> for Custom<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn eval(&self, r: &[T]) -> T {
        (self.f)(r)
    }
    fn constant(&self, _norm: Norm, _n: usize) -> T {
        self.c
    }
    fn exponent(&self) -> T {
        self.alpha
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderCheck<T> {
    /// `|f(r_i) - f(r_bar)|`.
    pub lhs: T,
    /// `C ||r_i - r_bar||^alpha`.
    pub rhs: T,
    pub holds: bool,
}

/// Checks the Hölder bound for one estimate `r_i` against the limit `r_bar`.
pub fn funccalc_error<T: Scalar>(
    f: impl Fn(&[T]) -> T,
    c: T,
    alpha: T,
    r_i: &[T],
    r_bar: &[T],
    norm: Norm,
) -> HolderCheck<T> {
    let lhs = (f(r_i) - f(r_bar)).abs();
    let rhs = c * norm.dist(r_i, r_bar).powf(alpha);
    HolderCheck { lhs, rhs, holds: lhs <= rhs + T::lit(HOLDER_SLACK) }
}

/// [`funccalc_error`] with the constants declared by `f` for `norm`.
pub fn holder_check<T: Scalar, F: HolderFunction<T> + ?Sized>(
    f: &F,
    r_i: &[T],
    r_bar: &[T],
    norm: Norm,
) -> HolderCheck<T> {
    funccalc_error(
        |r| f.eval(r),
        f.constant(norm, r_bar.len()),
        f.exponent(),
        r_i,
        r_bar,
        norm,
    )
}

/// Built-in function by name: `max`, `mean` or `sum`.
pub fn builtin<T: Scalar>(name: &str) -> Option<Box<dyn HolderFunction<T> + Send + Sync>> {
    match name {
        "max" => Some(Box::new(MaxCoordinate)),
        "mean" => Some(Box::new(Mean)),
        "sum" => Some(Box::new(Sum)),
        _ => None,
    }
}
