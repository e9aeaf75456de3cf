//! Convex level-set functions and proxable functions used by cutters and costs.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

use super::CutterSpec;

/// A differentiable convex function with closed-form value and gradient.
///
/// `AbsSum` (the l1 norm) is not differentiable; its gradient is the sign
/// subgradient. It is accepted as a superiorization cost but rejected as the
/// level function of a subgradient projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ConvexFunctionSpec {
    /// `f(x) = x^T Q x + <c, x> + d`
    Quadratic { q: Vec<Vec<f64>>, c: Vector, d: f64 },
    /// `f(x) = <a, x> - b`
    Affine { a: Vector, b: f64 },
    /// `f(x) = ||x - center||^2 - r^2`
    NormSquaredMinus { center: Vector, r: f64 },
    /// `f(x) = ||x||_1`
    AbsSum,
}

impl ConvexFunctionSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConvexFunctionSpec::Quadratic { c, .. } => Some(c.dim()),
            ConvexFunctionSpec::Affine { a, .. } => Some(a.dim()),
            ConvexFunctionSpec::NormSquaredMinus { center, .. } => Some(center.dim()),
            ConvexFunctionSpec::AbsSum => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexFunctionSpec::Quadratic { q, c, d } => {
                let n = c.dim();
                if q.len() != n || q.iter().any(|row| row.len() != n) {
                    return Err(Error::InvalidSpec(format!(
                        "quadratic form must be {n}x{n} to match c"
                    )));
                }
                if !d.is_finite() || q.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("quadratic has non-finite entries".into()));
                }
                let scale = q.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
                for i in 0..n {
                    for j in 0..i {
                        if (q[i][j] - q[j][i]).abs() > 1e-12 * scale {
                            return Err(Error::InvalidSpec(format!(
                                "quadratic form is not symmetric at ({i},{j})"
                            )));
                        }
                    }
                }
                let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
                let min_eig = SymmetricEigen::new(m)
                    .eigenvalues
                    .iter()
                    .fold(f64::INFINITY, |a, &b| a.min(b));
                if min_eig < -1e-10 * scale {
                    return Err(Error::InvalidSpec(format!(
                        "quadratic form is not positive semidefinite (min eigenvalue {min_eig:e})"
                    )));
                }
                Ok(())
            }
            ConvexFunctionSpec::Affine { a, b } => {
                if a.norm() == 0.0 {
                    return Err(Error::InvalidSpec("affine function has zero slope".into()));
                }
                if !b.is_finite() {
                    return Err(Error::InvalidSpec("affine offset is not finite".into()));
                }
                Ok(())
            }
            ConvexFunctionSpec::NormSquaredMinus { r, .. } => {
                if !r.is_finite() {
                    return Err(Error::InvalidSpec("radius is not finite".into()));
                }
                Ok(())
            }
            ConvexFunctionSpec::AbsSum => Ok(()),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            ConvexFunctionSpec::Quadratic { q, c, d } => {
                let quad: f64 = q
                    .iter()
                    .zip(x.iter())
                    .map(|(row, xi)| xi * row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>())
                    .sum();
                quad + c.dot(x) + d
            }
            ConvexFunctionSpec::Affine { a, b } => a.dot(x) - b,
            ConvexFunctionSpec::NormSquaredMinus { center, r } => {
                x.sub(center).norm_squared() - r * r
            }
            ConvexFunctionSpec::AbsSum => x.l1_norm(),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            ConvexFunctionSpec::Quadratic { q, c, .. } => {
                let n = x.dim();
                let entries = (0..n)
                    .map(|i| {
                        let row: f64 = (0..n).map(|j| (q[i][j] + q[j][i]) * x[j]).sum();
                        row + c[i]
                    })
                    .collect();
                Vector::from_raw(entries)
            }
            ConvexFunctionSpec::Affine { a, .. } => a.clone(),
            ConvexFunctionSpec::NormSquaredMinus { center, .. } => x.sub(center).scale(2.0),
            ConvexFunctionSpec::AbsSum => x.map(|&v| if v == 0.0 { 0.0 } else { v.signum() }),
        }
    }
}

/// A function whose proximal map has a closed form or a finite algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ProxableFunctionSpec {
    /// `g(x) = ||x||_1`
    AbsSum,
    /// `g(x) = ||x||^2 / 2`
    SquaredNorm,
    /// Indicator of the set described by a projection-kind cutter.
    Indicator { set: Box<CutterSpec> },
}

impl ProxableFunctionSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            ProxableFunctionSpec::Indicator { set } => set.dim(),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ProxableFunctionSpec::Indicator { set } = self {
            if !set.is_projection() {
                return Err(Error::InvalidSpec(
                    "indicator resolvents require a projection-kind set".into(),
                ));
            }
            set.validate()?;
        }
        Ok(())
    }

    /// `prox_{gamma g}(x) = argmin_u g(u) + ||u - x||^2 / (2 gamma)`.
    pub fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        match self {
            ProxableFunctionSpec::AbsSum => {
                Ok(x.map(|&v| v.signum() * (v.abs() - gamma).max(0.0)))
            }
            ProxableFunctionSpec::SquaredNorm => Ok(x.scale(1.0 / (1.0 + gamma))),
            ProxableFunctionSpec::Indicator { set } => super::apply(set, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_value_and_gradient() {
        let f = ConvexFunctionSpec::Quadratic {
            q: vec![vec![2.0, 1.0], vec![1.0, 3.0]],
            c: v(&[1.0, -1.0]),
            d: -4.0,
        };
        f.validate().unwrap();
        let x = v(&[1.0, 2.0]);
        // x^T Q x = 2 + 2*2 + 12 = 18; <c,x> = -1; d = -4
        assert_eq!(f.value(&x), 13.0);
        // 2Qx + c = (2*(2+2)+1, 2*(1+6)-1)
        assert_eq!(f.gradient(&x), v(&[9.0, 13.0]));
    }

    #[test]
    fn quadratic_gradient_matches_finite_differences() {
        let f = ConvexFunctionSpec::Quadratic {
            q: vec![vec![1.0, 0.2, 0.0], vec![0.2, 2.0, 0.3], vec![0.0, 0.3, 0.5]],
            c: v(&[0.1, -0.4, 2.0]),
            d: 1.0,
        };
        let x = v(&[0.3, -1.2, 0.7]);
        let g = f.gradient(&x);
        let h = 1e-6;
        for j in 0..3 {
            let mut plus = x.clone().into_vec();
            let mut minus = x.clone().into_vec();
            plus[j] += h;
            minus[j] -= h;
            let fd = (f.value(&v(&plus)) - f.value(&v(&minus))) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "coordinate {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn quadratic_validation() {
        let asym = ConvexFunctionSpec::Quadratic {
            q: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            c: v(&[0.0, 0.0]),
            d: 0.0,
        };
        assert!(asym.validate().is_err());
        let indefinite = ConvexFunctionSpec::Quadratic {
            q: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
            c: v(&[0.0, 0.0]),
            d: 0.0,
        };
        assert!(indefinite.validate().is_err());
        let wrong_shape = ConvexFunctionSpec::Quadratic {
            q: vec![vec![1.0]],
            c: v(&[0.0, 0.0]),
            d: 0.0,
        };
        assert!(wrong_shape.validate().is_err());
    }

    #[test]
    fn prox_closed_forms() {
        let x = v(&[2.0, -0.5, 0.0]);
        assert_eq!(
            ProxableFunctionSpec::AbsSum.prox(1.0, &x).unwrap(),
            v(&[1.0, 0.0, 0.0])
        );
        assert_eq!(
            ProxableFunctionSpec::SquaredNorm.prox(1.0, &x).unwrap(),
            v(&[1.0, -0.25, 0.0])
        );
    }

    #[test]
    fn abs_sum_prox_solves_the_scalar_subproblem() {
        // argmin_u |u| + (u - 2)^2 / 2 by dense scan
        let best = (0..=40000)
            .map(|i| -2.0 + i as f64 * 1e-4)
            .min_by(|a, b| {
                let fa = a.abs() + (a - 2.0).powi(2) / 2.0;
                let fb = b.abs() + (b - 2.0).powi(2) / 2.0;
                fa.total_cmp(&fb)
            })
            .unwrap();
        let p = ProxableFunctionSpec::AbsSum.prox(1.0, &v(&[2.0])).unwrap();
        assert!((p[0] - best).abs() < 1e-4);
        assert_eq!(p[0], 1.0);
    }
}
