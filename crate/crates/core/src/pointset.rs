//! Finite point sets in canonical (lexicographic, duplicate-free) order.

use std::cmp::Ordering;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PointSetError {
    #[error("point set is empty")]
    Empty,
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("malformed wire message: {0}")]
    Wire(String),
}

/// Canonically ordered set of points in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<T> {
    dim: usize,
    points: Vec<Vec<T>>,
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).expect("finite coordinates") {
            Ordering::Equal => continue,
            ord => return ord,
        }
    }
    a.len().cmp(&b.len())
}

impl<T: Scalar> PointSet<T> {
    /// Canonicalizes `points`; the dimension is taken from the first point.
    pub fn new(points: Vec<Vec<T>>) -> Result<Self, PointSetError> {
        let dim = points.first().ok_or(PointSetError::Empty)?.len();
        Self::with_dim(dim, points)
    }

    /// Canonicalizes `points`, which may be empty, in dimension `dim`.
    pub fn with_dim(dim: usize, mut points: Vec<Vec<T>>) -> Result<Self, PointSetError> {
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(PointSetError::DimensionMismatch { index, expected: dim, found: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(PointSetError::NonFinite(index));
            }
        }
        points.sort_by(|a, b| lex_cmp(a, b));
        points.dedup();
        Ok(PointSet { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vec<T>> {
        self.points.iter()
    }

    pub fn contains_exact(&self, p: &[T]) -> bool {
        self.points.binary_search_by(|q| lex_cmp(q, p)).is_ok()
    }

    /// Canonical union of several sets of the same dimension.
    pub fn union<'a, I>(dim: usize, sets: I) -> Result<Self, PointSetError>
    where
        I: IntoIterator<Item = &'a PointSet<T>>,
    {
        let mut all = Vec::new();
        for s in sets {
            all.extend(s.points.iter().cloned());
        }
        Self::with_dim(dim, all)
    }

    /// Serializes as `d m x_11 .. x_1d .. x_m1 .. x_md` with 17 significant digits.
    pub fn to_wire(&self) -> String {
        let mut out = format!("{} {}", self.dim, self.points.len());
        for p in &self.points {
            for v in p {
                out.push(' ');
                out.push_str(&format!("{:.16e}", v.to_f64_lossy()));
            }
        }
        out
    }

    pub fn from_wire(s: &str) -> Result<Self, PointSetError> {
        let mut tokens = s.split_whitespace();
        let mut next_count = |what: &str| -> Result<usize, PointSetError> {
            tokens
                .next()
                .ok_or_else(|| PointSetError::Wire(format!("missing {what}")))?
                .parse()
                .map_err(|_| PointSetError::Wire(format!("bad {what}")))
        };
        let dim = next_count("dimension")?;
        let m = next_count("count")?;
        if dim == 0 {
            return Err(PointSetError::Wire("dimension must be positive".into()));
        }
        let values: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().map_err(|_| PointSetError::Wire(format!("bad number `{t}`"))))
            .collect::<Result<_, _>>()?;
        if values.len() != dim * m {
            return Err(PointSetError::Wire(format!(
                "expected {} coordinates, found {}",
                dim * m,
                values.len()
            )));
        }
        let points = values
            .chunks(dim)
            .map(|c| c.iter().map(|&v| T::lit(v)).collect())
            .collect();
        Self::with_dim(dim, points)
    }
}

impl<'a, T> IntoIterator for &'a PointSet<T> {
    type Item = &'a Vec<T>;
    type IntoIter = std::slice::Iter<'a, Vec<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}
