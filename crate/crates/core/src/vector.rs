//! Dense real vectors in `R^n` with the Euclidean inner product.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense point of `R^n` with `n >= 1` and finite entries.
///
/// Vectors are values: every arithmetic helper returns a new vector. Results
/// of arithmetic are not re-validated, so callers that need the finiteness
/// guarantee after a computation must check [`Vector::is_finite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = entries.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonfiniteEntry { index, value });
        }
        Ok(Vector(entries))
    }

    /// Builds a vector without validation. Used for intermediate results.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Vector(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be positive");
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    /// Unchecked dot product; panics in debug builds on mismatched lengths.
    pub(crate) fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * factor).collect())
    }

    /// Returns `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn map(&self, f: impl FnMut(&f64) -> f64) -> Vector {
        Vector(self.0.iter().map(f).collect())
    }

    pub(crate) fn zip_map(&self, other: &Vector, mut f: impl FnMut(f64, f64) -> f64) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub(crate) fn axpy_in_place(&mut self, factor: f64, other: &Vector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Vector::new(entries)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Euclidean inner product `sum_j a_j b_j`.
pub fn inner(a: &Vector, b: &Vector) -> Result<f64> {
    b.check_dim(a.dim())?;
    Ok(a.dot(b))
}

/// Euclidean norm `sqrt(<a, a>)`.
pub fn norm(a: &Vector) -> f64 {
    a.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(inner(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
    }

    #[test]
    fn inner_rejects_mismatched_dims() {
        let err = inner(&v(&[1.0, 2.0]), &v(&[1.0])).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&v(&[0.0, 0.0, 0.0])), 0.0);
        assert_eq!(norm(&v(&[3.0, 4.0])), 5.0);
    }

    #[test]
    fn construction_rejects_bad_entries() {
        assert_eq!(Vector::new(vec![]), Err(Error::EmptyVector));
        assert!(matches!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(Error::NonfiniteEntry { index: 1, .. })
        ));
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let x: Vector = serde_json::from_str("[1.5, -2.0]").unwrap();
        assert_eq!(x, v(&[1.5, -2.0]));
        assert!(serde_json::from_str::<Vector>("[]").is_err());
        assert_eq!(serde_json::to_string(&x).unwrap(), "[1.5,-2.0]");
    }
}
