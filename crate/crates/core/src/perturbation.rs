//! Adaptive perturbation budgets and the policies that pick perturbation
//! vectors inside them.
//!
//! With residual `r = ||T_i(x^k) - x^k||`, relaxation `lambda` and radius
//! `sigma`, a perturbation `e^{k,i}` is admissible when
//!
//! ```text
//! ||e^{k,i}|| <= 1/2 * lambda (2 - lambda) r^2 / (sqrt(zeta) + lambda r + 2 sigma),
//! zeta = (lambda r + 2 sigma)^2 + lambda (2 - lambda) r^2.
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::Sigma;
use crate::cutters::ConvexFunctionSpec;
use crate::error::{Error, Result};
use crate::vector::Vector;

/// Steering directions with a gradient norm at or below this are treated as zero.
pub const GRADIENT_FLOOR: f64 = 1e-14;

pub const DEFAULT_RHO: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetInputs {
    pub lambda: f64,
    pub residual: f64,
    pub sigma: Sigma,
}

impl BudgetInputs {
    pub fn new(lambda: f64, residual: f64, sigma: Sigma) -> Self {
        debug_assert!((0.0..=2.0).contains(&lambda), "lambda {lambda} outside [0, 2]");
        debug_assert!(residual >= 0.0);
        BudgetInputs {
            lambda,
            residual,
            sigma,
        }
    }
}

/// `zeta = (lambda r + 2 sigma)^2 + lambda (2 - lambda) r^2`.
pub fn zeta(input: &BudgetInputs) -> Result<f64> {
    let sigma = input.sigma.finite().ok_or(Error::InfiniteSigma)?;
    let (l, r) = (input.lambda, input.residual);
    Ok((l * r + 2.0 * sigma).powi(2) + l * (2.0 - l) * r * r)
}

/// Largest admissible `||e^{k,i}||`. Zero for infinite `sigma`, zero residual,
/// or `lambda` in `{0, 2}`.
pub fn budget(input: &BudgetInputs) -> f64 {
    let Ok(z) = zeta(input) else {
        return 0.0;
    };
    let sigma = input.sigma.finite().unwrap_or(f64::INFINITY);
    let (l, r) = (input.lambda, input.residual);
    let numerator = l * (2.0 - l) * r * r;
    let denominator = z.sqrt() + l * r + 2.0 * sigma;
    if numerator == 0.0 || denominator == 0.0 {
        return 0.0;
    }
    0.5 * numerator / denominator
}

/// Radius of the set `E_theta(x, q, lambda, i)`:
/// `theta lambda (2 - lambda) r^2 / (sqrt(zeta) + lambda r + ||x - q||)` with
/// `zeta = (lambda r + ||x - q||)^2 + lambda (2 - lambda) r^2`.
///
/// Returns zero when the denominator vanishes.
pub fn theta_budget(theta: f64, lambda: f64, residual: f64, anchor_distance: f64) -> f64 {
    let alpha1 = lambda * residual + anchor_distance;
    let alpha2 = lambda * (2.0 - lambda) * residual * residual;
    let denominator = (alpha1 * alpha1 + alpha2).sqrt() + alpha1;
    if denominator == 0.0 {
        return 0.0;
    }
    theta * alpha2 / denominator
}

/// Rule for choosing `e^{k,i}` inside its budget. JSON tag: `policy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PerturbationPolicy {
    Zero,
    /// Uniformly random direction of length `rho * budget`.
    #[serde(rename = "random")]
    RandomDirection {
        #[serde(default = "default_rho")]
        rho: f64,
    },
    /// Normalized negative gradient of `cost`, of length `rho * budget`.
    Superiorized {
        #[serde(default = "default_rho")]
        rho: f64,
        cost: ConvexFunctionSpec,
    },
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

impl PerturbationPolicy {
    pub fn validate(&self) -> Result<()> {
        let rho = match self {
            PerturbationPolicy::Zero => return Ok(()),
            PerturbationPolicy::RandomDirection { rho } => *rho,
            PerturbationPolicy::Superiorized { rho, cost } => {
                cost.validate()?;
                *rho
            }
        };
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidConfig(format!(
                "perturbation fraction rho must lie in [0, 1), got {rho}"
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, PerturbationPolicy::Zero)
    }
}

/// Produces one perturbation vector at `x` with norm `rho * budget_value`
/// (or zero).
pub fn generate<R: Rng + ?Sized>(
    policy: &PerturbationPolicy,
    budget_value: f64,
    x: &Vector,
    rng: &mut R,
) -> Vector {
    let n = x.dim();
    match policy {
        PerturbationPolicy::Zero => Vector::zeros(n),
        _ if budget_value <= 0.0 => Vector::zeros(n),
        PerturbationPolicy::RandomDirection { rho } => {
            let direction = loop {
                let draw: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let d = Vector::from_raw(draw);
                if d.norm() > 0.0 {
                    break d;
                }
            };
            direction.scale(rho * budget_value / direction.norm())
        }
        PerturbationPolicy::Superiorized { rho, cost } => {
            let grad = cost.gradient(x);
            let g = grad.norm();
            if g <= GRADIENT_FLOOR {
                Vector::zeros(n)
            } else {
                grad.scale(-rho * budget_value / g)
            }
        }
    }
}

/// `sum_i w(i) e^i`, accumulated in the given order.
pub fn aggregate<'a, I>(per_index: I) -> Result<Option<Vector>>
where
    I: IntoIterator<Item = (f64, &'a Vector)>,
{
    let mut total: Option<Vector> = None;
    for (w, e) in per_index {
        match total.as_mut() {
            None => total = Some(e.scale(w)),
            Some(t) => {
                e.check_dim(t.dim())?;
                t.axpy_in_place(w, e);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::keyed_rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    fn inputs(lambda: f64, residual: f64, sigma: f64) -> BudgetInputs {
        BudgetInputs::new(lambda, residual, Sigma::Finite(sigma))
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta(&inputs(1.0, 1.0, 1.0)).unwrap(), 10.0);
        assert_eq!(zeta(&inputs(0.0, 5.0, 1.0)).unwrap(), 4.0);
        assert_eq!(zeta(&inputs(1.0, 0.0, 2.0)).unwrap(), 16.0);
        assert_eq!(
            zeta(&BudgetInputs::new(1.0, 1.0, Sigma::Infinite)),
            Err(Error::InfiniteSigma)
        );
    }

    #[test]
    fn budget_examples() {
        let expected = 0.5 / (10f64.sqrt() + 3.0);
        assert!((budget(&inputs(1.0, 1.0, 1.0)) - expected).abs() < 1e-15);
        assert!((expected - 0.081139).abs() < 1e-6);
        assert_eq!(budget(&inputs(2.0, 3.0, 1.0)), 0.0);
        assert_eq!(budget(&inputs(0.0, 3.0, 1.0)), 0.0);
        assert_eq!(budget(&inputs(1.0, 0.0, 1.0)), 0.0);
        assert_eq!(budget(&BudgetInputs::new(1.0, 4.0, Sigma::Infinite)), 0.0);
    }

    #[test]
    fn budget_satisfies_the_fejer_quadratic() {
        let (l, r, s) = (1.0, 1.0, 1.0);
        let t = budget(&inputs(l, r, s));
        let a1 = l * r + 2.0 * s;
        let a2 = l * (2.0 - l) * r * r;
        assert!(t * t + 2.0 * a1 * t - a2 <= 0.0);
    }

    #[test]
    fn theta_budget_examples() {
        let expected = 1.0 / (10f64.sqrt() + 3.0);
        assert!((theta_budget(1.0, 1.0, 1.0, 2.0) - expected).abs() < 1e-15);
        assert!((expected - 0.162278).abs() < 1e-6);
        assert_eq!(theta_budget(1.0, 1.0, 0.0, 0.0), 0.0);
        assert_eq!(theta_budget(1.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn theta_budget_matches_budget_at_half() {
        for &(l, r, s) in &[(1.0, 1.0, 1.0), (0.3, 2.5, 0.7), (1.9, 0.01, 10.0)] {
            let a = budget(&inputs(l, r, s));
            let b = theta_budget(0.5, l, r, 2.0 * s);
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn generate_zero_policy() {
        let mut rng = keyed_rng(0, 0, 0);
        let e = generate(&PerturbationPolicy::Zero, 5.0, &v(&[1.0, 2.0]), &mut rng);
        assert_eq!(e, v(&[0.0, 0.0]));
    }

    #[test]
    fn generate_random_direction_has_requested_length() {
        let mut rng = keyed_rng(3, 1, 4);
        let policy = PerturbationPolicy::RandomDirection { rho: 0.9 };
        let e = generate(&policy, 0.1, &v(&[1.0, 2.0, 3.0]), &mut rng);
        assert!((e.norm() - 0.09).abs() < 1e-12);
        assert!(e.norm() < 0.1);
    }

    #[test]
    fn generate_superiorized_follows_negative_gradient() {
        let mut rng = keyed_rng(0, 0, 0);
        let policy = PerturbationPolicy::Superiorized {
            rho: 0.5,
            cost: ConvexFunctionSpec::NormSquaredMinus {
                center: v(&[0.0, 0.0]),
                r: 0.0,
            },
        };
        let e = generate(&policy, 0.2, &v(&[1.0, 0.0]), &mut rng);
        assert!((e[0] + 0.1).abs() < 1e-15);
        assert_eq!(e[1], 0.0);
        // stationary point of the cost: no steering
        let e = generate(&policy, 0.2, &v(&[0.0, 0.0]), &mut rng);
        assert_eq!(e.norm(), 0.0);
    }

    #[test]
    fn aggregate_examples() {
        let zero = v(&[0.0, 0.0]);
        let e = aggregate([(0.5, &zero), (0.5, &zero)]).unwrap().unwrap();
        assert_eq!(e, zero);
        let (e1, e2) = (v(&[2.0, 2.0]), v(&[9.0, 9.0]));
        assert_eq!(aggregate([(1.0, &e1), (0.0, &e2)]).unwrap().unwrap(), e1);
        let (e1, e2) = (v(&[1.0, 0.0]), v(&[0.0, 1.0]));
        assert_eq!(
            aggregate([(0.5, &e1), (0.5, &e2)]).unwrap().unwrap(),
            v(&[0.5, 0.5])
        );
        let short = v(&[1.0]);
        assert!(aggregate([(0.5, &e1), (0.5, &short)]).is_err());
    }

    #[test]
    fn policy_json_forms() {
        let p: PerturbationPolicy = serde_json::from_str(r#"{"policy":"zero"}"#).unwrap();
        assert!(p.is_zero());
        let p: PerturbationPolicy =
            serde_json::from_str(r#"{"policy":"random","rho":0.99}"#).unwrap();
        assert_eq!(p, PerturbationPolicy::RandomDirection { rho: 0.99 });
        let p: PerturbationPolicy = serde_json::from_str(
            r#"{"policy":"superiorized","rho":0.5,"cost":{"form":"abs_sum"}}"#,
        )
        .unwrap();
        assert!(p.validate().is_ok());
        let bad = PerturbationPolicy::RandomDirection { rho: 1.0 };
        assert!(bad.validate().is_err());
    }
}
