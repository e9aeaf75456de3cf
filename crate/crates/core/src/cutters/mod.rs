//! Continuous cutter operators.
//!
//! A cutter `T` satisfies `<x - T(x), q - T(x)> <= 0` for every `x` and every
//! `q` in `Fix(T)`. The catalog covers orthogonal projections onto simple
//! closed convex sets, subgradient projections onto zero-sublevel sets of
//! differentiable convex functions, and resolvents of proxable functions.

mod functions;
mod l1;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

pub use functions::{ConvexFunctionSpec, ProxableFunctionSpec};
pub use l1::project_l1_ball;

/// Values of `f(x)` at or below this threshold count as `f(x) <= 0` in the
/// subgradient projection.
pub const SUBGRADIENT_ZERO_THRESHOLD: f64 = 1e-14;

/// Declarative description of a cutter. The JSON field names are part of the
/// problem file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CutterSpec {
    /// Projection onto `{x : <a, x> <= b}`.
    Halfspace { a: Vector, b: f64 },
    /// Projection onto `{x : <a, x> = b}`.
    Hyperplane { a: Vector, b: f64 },
    Ball { center: Vector, radius: f64 },
    Box { lo: Vector, hi: Vector },
    /// Projection onto `{x : ||x||_1 <= radius}`.
    #[serde(rename = "l1ball")]
    L1Ball { radius: f64 },
    /// Subgradient projection onto `{x : f(x) <= 0}`.
    #[serde(rename = "subgradient")]
    SubgradientProjection { f: ConvexFunctionSpec },
    /// `prox_{gamma g}`.
    Resolvent { g: ProxableFunctionSpec, gamma: f64 },
}

/// Names of every cutter kind, in JSON spelling.
pub const CUTTER_KINDS: [&str; 7] = [
    "halfspace",
    "hyperplane",
    "ball",
    "box",
    "l1ball",
    "subgradient",
    "resolvent",
];

impl CutterSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CutterSpec::Halfspace { .. } => "halfspace",
            CutterSpec::Hyperplane { .. } => "hyperplane",
            CutterSpec::Ball { .. } => "ball",
            CutterSpec::Box { .. } => "box",
            CutterSpec::L1Ball { .. } => "l1ball",
            CutterSpec::SubgradientProjection { .. } => "subgradient",
            CutterSpec::Resolvent { .. } => "resolvent",
        }
    }

    /// Ambient dimension, when the spec pins one down.
    pub fn dim(&self) -> Option<usize> {
        match self {
            CutterSpec::Halfspace { a, .. } | CutterSpec::Hyperplane { a, .. } => Some(a.dim()),
            CutterSpec::Ball { center, .. } => Some(center.dim()),
            CutterSpec::Box { lo, .. } => Some(lo.dim()),
            CutterSpec::L1Ball { .. } => None,
            CutterSpec::SubgradientProjection { f } => f.dim(),
            CutterSpec::Resolvent { g, .. } => g.dim(),
        }
    }

    /// Orthogonal projections onto a set.
    pub fn is_projection(&self) -> bool {
        matches!(
            self,
            CutterSpec::Halfspace { .. }
                | CutterSpec::Hyperplane { .. }
                | CutterSpec::Ball { .. }
                | CutterSpec::Box { .. }
                | CutterSpec::L1Ball { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CutterSpec::Halfspace { a, b } | CutterSpec::Hyperplane { a, b } => {
                if a.norm() == 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "{} normal vector is zero",
                        self.kind_name()
                    )));
                }
                if !b.is_finite() {
                    return Err(Error::InvalidSpec("offset is not finite".into()));
                }
            }
            CutterSpec::Ball { radius, .. } | CutterSpec::L1Ball { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "{} radius must be positive, got {radius}",
                        self.kind_name()
                    )));
                }
            }
            CutterSpec::Box { lo, hi } => {
                hi.check_dim(lo.dim())?;
                if let Some(j) = (0..lo.dim()).find(|&j| lo[j] > hi[j]) {
                    return Err(Error::InvalidSpec(format!(
                        "box has lo > hi in coordinate {j}"
                    )));
                }
            }
            CutterSpec::SubgradientProjection { f } => {
                if matches!(f, ConvexFunctionSpec::AbsSum) {
                    return Err(Error::InvalidSpec(
                        "subgradient projection needs a differentiable function".into(),
                    ));
                }
                f.validate()?;
            }
            CutterSpec::Resolvent { g, gamma } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "resolvent step must be positive, got {gamma}"
                    )));
                }
                g.validate()?;
            }
        }
        Ok(())
    }

    /// The function whose zero-sublevel set is `Fix(T)`, for subgradient kinds.
    pub fn level_function(&self) -> Option<&ConvexFunctionSpec> {
        match self {
            CutterSpec::SubgradientProjection { f } => Some(f),
            _ => None,
        }
    }

    fn check_input(&self, x: &Vector) -> Result<()> {
        match self.dim() {
            Some(n) => x.check_dim(n),
            None => Ok(()),
        }
    }
}

/// Evaluates `T(x)`.
pub fn apply(spec: &CutterSpec, x: &Vector) -> Result<Vector> {
    spec.check_input(x)?;
    let image = match spec {
        CutterSpec::Halfspace { a, b } => {
            let excess = a.dot(x) - b;
            if excess > 0.0 {
                x.add_scaled(-excess / a.norm_squared(), a)
            } else {
                x.clone()
            }
        }
        CutterSpec::Hyperplane { a, b } => {
            let excess = a.dot(x) - b;
            x.add_scaled(-excess / a.norm_squared(), a)
        }
        CutterSpec::Ball { center, radius } => {
            let offset = x.sub(center);
            let dist = offset.norm();
            if dist > *radius {
                center.add_scaled(radius / dist, &offset)
            } else {
                x.clone()
            }
        }
        CutterSpec::Box { lo, hi } => {
            let clipped = x.zip_map(lo, f64::max);
            clipped.zip_map(hi, f64::min)
        }
        CutterSpec::L1Ball { radius } => project_l1_ball(x, *radius),
        CutterSpec::SubgradientProjection { f } => {
            let value = f.value(x);
            if value <= SUBGRADIENT_ZERO_THRESHOLD {
                x.clone()
            } else {
                let grad = f.gradient(x);
                let gg = grad.norm_squared();
                if gg == 0.0 {
                    return Err(Error::ZeroGradientAtPositiveValue { value });
                }
                x.add_scaled(-value / gg, &grad)
            }
        }
        CutterSpec::Resolvent { g, gamma } => g.prox(*gamma, x)?,
    };
    Ok(image)
}

/// `||T(x) - x||`, zero exactly on `Fix(T)`.
pub fn residual(spec: &CutterSpec, x: &Vector) -> Result<f64> {
    Ok(apply(spec, x)?.distance(x))
}

/// `d(x, Fix(T))` for kinds with a closed-form distance; `None` otherwise.
pub fn fixed_point_distance(spec: &CutterSpec, x: &Vector) -> Result<Option<f64>> {
    spec.check_input(x)?;
    let d = match spec {
        CutterSpec::Hyperplane { a, b } => Some((a.dot(x) - b).abs() / a.norm()),
        CutterSpec::Halfspace { a, b } => Some((a.dot(x) - b).max(0.0) / a.norm()),
        CutterSpec::Ball { center, radius } => Some((x.distance(center) - radius).max(0.0)),
        CutterSpec::Box { .. } | CutterSpec::L1Ball { .. } => Some(residual(spec, x)?),
        CutterSpec::SubgradientProjection { f } => match f {
            ConvexFunctionSpec::NormSquaredMinus { center, r } => {
                Some((x.distance(center) - r.abs()).max(0.0))
            }
            ConvexFunctionSpec::Affine { a, b } => Some((a.dot(x) - b).max(0.0) / a.norm()),
            _ => None,
        },
        CutterSpec::Resolvent { .. } => None,
    };
    Ok(d)
}

/// `<x - T(x), q - T(x)>`; nonpositive whenever `q` lies in `Fix(T)`.
pub fn check_separator(spec: &CutterSpec, x: &Vector, q: &Vector) -> Result<f64> {
    q.check_dim(x.dim())?;
    let t = apply(spec, x)?;
    Ok(x.sub(&t).dot(&q.sub(&t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    fn halfspace(a: &[f64], b: f64) -> CutterSpec {
        CutterSpec::Halfspace { a: v(a), b }
    }

    #[test]
    fn halfspace_projection() {
        let h = halfspace(&[1.0, 0.0], 1.0);
        assert_eq!(apply(&h, &v(&[3.0, 4.0])).unwrap(), v(&[1.0, 4.0]));
        assert_eq!(residual(&h, &v(&[3.0, 4.0])).unwrap(), 2.0);
        assert_eq!(fixed_point_distance(&h, &v(&[0.0, 5.0])).unwrap(), Some(0.0));
    }

    #[test]
    fn subgradient_projection_of_unit_disc() {
        let spec = CutterSpec::SubgradientProjection {
            f: ConvexFunctionSpec::NormSquaredMinus {
                center: v(&[0.0, 0.0]),
                r: 1.0,
            },
        };
        // f = 3, grad = (4, 0): x - 3/16 * (4, 0)
        assert_eq!(apply(&spec, &v(&[2.0, 0.0])).unwrap(), v(&[1.25, 0.0]));
        let inside = v(&[0.5, -0.5]);
        assert_eq!(apply(&spec, &inside).unwrap(), inside);
        assert_eq!(fixed_point_distance(&spec, &v(&[2.0, 0.0])).unwrap(), Some(1.0));
    }

    #[test]
    fn subgradient_projection_boundary_guard() {
        let spec = CutterSpec::SubgradientProjection {
            f: ConvexFunctionSpec::NormSquaredMinus {
                center: v(&[0.0]),
                r: 1.0,
            },
        };
        // f(x) = 5e-15 is below the guard and counts as feasible
        let x = v(&[(1.0f64 + 5e-15).sqrt()]);
        assert_eq!(apply(&spec, &x).unwrap(), x);
    }

    #[test]
    fn subgradient_projection_with_empty_sublevel_set_errors() {
        // f(x) = x^T 0 x + <0, x> + 1 is positive with zero gradient everywhere
        let spec = CutterSpec::SubgradientProjection {
            f: ConvexFunctionSpec::Quadratic {
                q: vec![vec![0.0]],
                c: v(&[0.0]),
                d: 1.0,
            },
        };
        assert!(matches!(
            apply(&spec, &v(&[3.0])),
            Err(Error::ZeroGradientAtPositiveValue { .. })
        ));
    }

    #[test]
    fn resolvent_of_abs_value() {
        let spec = CutterSpec::Resolvent {
            g: ProxableFunctionSpec::AbsSum,
            gamma: 1.0,
        };
        assert_eq!(apply(&spec, &v(&[2.0])).unwrap(), v(&[1.0]));
        assert_eq!(fixed_point_distance(&spec, &v(&[2.0])).unwrap(), None);
    }

    #[test]
    fn ball_projection() {
        let ball = CutterSpec::Ball {
            center: v(&[0.0, 0.0]),
            radius: 1.0,
        };
        let inside = v(&[0.3, 0.4]);
        assert_eq!(apply(&ball, &inside).unwrap(), inside);
        assert_eq!(fixed_point_distance(&ball, &v(&[2.0, 0.0])).unwrap(), Some(1.0));
        assert_eq!(apply(&ball, &v(&[0.0, -3.0])).unwrap(), v(&[0.0, -1.0]));
    }

    #[test]
    fn hyperplane_distance() {
        let h = CutterSpec::Hyperplane {
            a: v(&[3.0, 4.0]),
            b: 0.0,
        };
        // |<(3,4),(3,4)> - 0| / 5
        assert_eq!(fixed_point_distance(&h, &v(&[3.0, 4.0])).unwrap(), Some(5.0));
        assert!(residual(&h, &v(&[3.0, 4.0])).unwrap() - 5.0 < 1e-14);
    }

    #[test]
    fn box_clamps_coordinates() {
        let b = CutterSpec::Box {
            lo: v(&[0.0, -1.0]),
            hi: v(&[1.0, 1.0]),
        };
        assert_eq!(apply(&b, &v(&[2.0, -3.0])).unwrap(), v(&[1.0, -1.0]));
        assert_eq!(fixed_point_distance(&b, &v(&[2.0, -3.0])).unwrap(), Some(5f64.sqrt()));
    }

    #[test]
    fn separator_examples() {
        let h = halfspace(&[1.0, 0.0], 0.0);
        assert_eq!(
            check_separator(&h, &v(&[2.0, 0.0]), &v(&[-1.0, 3.0])).unwrap(),
            -2.0
        );
        let fixed = v(&[-1.0, 7.0]);
        assert_eq!(check_separator(&h, &fixed, &v(&[-4.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = halfspace(&[1.0, 0.0], 0.0);
        assert!(matches!(
            apply(&h, &v(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(check_separator(&h, &v(&[1.0, 2.0]), &v(&[1.0])).is_err());
    }

    #[test]
    fn validation_catches_degenerate_specs() {
        assert!(halfspace(&[0.0, 0.0], 1.0).validate().is_err());
        assert!(CutterSpec::Box {
            lo: v(&[1.0]),
            hi: v(&[0.0])
        }
        .validate()
        .is_err());
        assert!(CutterSpec::L1Ball { radius: 0.0 }.validate().is_err());
        assert!(CutterSpec::SubgradientProjection {
            f: ConvexFunctionSpec::AbsSum
        }
        .validate()
        .is_err());
        assert!(CutterSpec::Resolvent {
            g: ProxableFunctionSpec::Indicator {
                set: Box::new(CutterSpec::Resolvent {
                    g: ProxableFunctionSpec::SquaredNorm,
                    gamma: 1.0
                })
            },
            gamma: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn json_encoding_uses_format_field_names() {
        let spec: CutterSpec =
            serde_json::from_str(r#"{"type":"halfspace","a":[1.0,0.0],"b":1.0}"#).unwrap();
        assert_eq!(spec, halfspace(&[1.0, 0.0], 1.0));
        let l1: CutterSpec = serde_json::from_str(r#"{"type":"l1ball","radius":2.0}"#).unwrap();
        assert_eq!(l1, CutterSpec::L1Ball { radius: 2.0 });
        let sub: CutterSpec = serde_json::from_str(
            r#"{"type":"subgradient","f":{"form":"norm_squared_minus","center":[0,0],"r":1}}"#,
        )
        .unwrap();
        assert_eq!(sub.kind_name(), "subgradient");
        let res: CutterSpec = serde_json::from_str(
            r#"{"type":"resolvent","g":{"form":"indicator","set":{"type":"ball","center":[0],"radius":1}},"gamma":0.5}"#,
        )
        .unwrap();
        assert_eq!(res.dim(), Some(1));
    }
}
