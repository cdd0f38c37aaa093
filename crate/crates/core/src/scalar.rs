//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All engines, geometry and termination code are written against [`Scalar`]
//! so they run unchanged in `f32` or `f64`. Tolerances are supplied by the
//! caller in the same scalar type.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point type usable as a consensus state coordinate.
pub trait Scalar:
    'static
    + Send
    + Sync
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Converts a count into this scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// Widens to `f64` for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Inner product `<a, b>`, summed in index order.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Vector norms used for distances between node states.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    LInf,
    /// General `p`-norm with `1 <= p < inf`.
    Lp(f64),
}

impl Default for Norm {
    fn default() -> Self {
        Norm::L2
    }
}

impl Norm {
    /// Builds the norm for a given `p`, mapping `1`, `2` and `inf` onto the
    /// dedicated variants.
    pub fn from_p(p: f64) -> Option<Norm> {
        if p.is_nan() || p < 1.0 {
            None
        } else if p.is_infinite() {
            Some(Norm::LInf)
        } else if p == 1.0 {
            Some(Norm::L1)
        } else if p == 2.0 {
            Some(Norm::L2)
        } else {
            Some(Norm::Lp(p))
        }
    }

    pub fn p(&self) -> f64 {
        match *self {
            Norm::L1 => 1.0,
            Norm::L2 => 2.0,
            Norm::LInf => f64::INFINITY,
            Norm::Lp(p) => p,
        }
    }

    pub fn of<T: Scalar>(&self, v: &[T]) -> T {
        match *self {
            Norm::L1 => v.iter().fold(T::zero(), |acc, x| acc + x.abs()),
            Norm::L2 => v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt(),
            Norm::LInf => v.iter().fold(T::zero(), |acc, x| acc.max(x.abs())),
            Norm::Lp(p) => {
                let p = T::lit(p);
                v.iter()
                    .fold(T::zero(), |acc, x| acc + x.abs().powf(p))
                    .powf(T::one() / p)
            }
        }
    }

    /// `||a - b||` without allocating the difference.
    pub fn dist<T: Scalar>(&self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), b.len());
        match *self {
            Norm::L1 => a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs()),
            Norm::L2 => a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
                .sqrt(),
            Norm::LInf => a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs())),
            Norm::Lp(p) => {
                let p = T::lit(p);
                a.iter()
                    .zip(b)
                    .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs().powf(p))
                    .powf(T::one() / p)
            }
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "max" | "linf" => Ok(Norm::LInf),
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| format!("invalid norm `{s}`: expected 1, 2, inf or p >= 1"))?;
                Norm::from_p(p).ok_or_else(|| format!("invalid norm `{s}`: p must be >= 1"))
            }
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::L1 => write!(f, "1"),
            Norm::L2 => write!(f, "2"),
            Norm::LInf => write!(f, "inf"),
            Norm::Lp(p) => write!(f, "{p}"),
        }
    }
}

/// Largest pairwise distance among a set of vectors.
pub fn max_pairwise_distance<T: Scalar>(points: &[Vec<T>], norm: Norm) -> T {
    let mut best = T::zero();
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            best = best.max(norm.dist(p, q));
        }
    }
    best
}

/// Componentwise arithmetic mean of a nonempty list of equal-length vectors.
pub fn mean_vector<T: Scalar>(points: &[Vec<T>]) -> Vec<T> {
    let d = points.first().map_or(0, Vec::len);
    let mut acc = vec![T::zero(); d];
    for p in points {
        for (a, &v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let n = T::from_count(points.len());
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_simple_vector() {
        let v = [3.0_f64, -4.0];
        assert_eq!(Norm::L1.of(&v), 7.0);
        assert_eq!(Norm::L2.of(&v), 5.0);
        assert_eq!(Norm::LInf.of(&v), 4.0);
        assert!((Norm::Lp(3.0).of(&v) - (27.0_f64 + 64.0).powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn norm_parsing() {
        assert_eq!("2".parse::<Norm>().unwrap(), Norm::L2);
        assert_eq!("inf".parse::<Norm>().unwrap(), Norm::LInf);
        assert_eq!("1".parse::<Norm>().unwrap(), Norm::L1);
        assert_eq!("3".parse::<Norm>().unwrap(), Norm::Lp(3.0));
        assert!("0.5".parse::<Norm>().is_err());
        assert!("abc".parse::<Norm>().is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let v = [3.0_f32, 4.0];
        assert_eq!(Norm::L2.of(&v), 5.0_f32);
        assert_eq!(Norm::L2.dist(&v, &[0.0, 0.0]), 5.0_f32);
    }
}
