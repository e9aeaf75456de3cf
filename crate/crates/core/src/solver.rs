//! The generalized block-iterative projection iteration
//!
//! ```text
//! x^{k+1} = x^k + lambda_k (T_{w_k}(x^k) - x^k) + e^k,
//! T_w(x) = sum_i w(i) T_i(x),   e^k = sum_i w_k(i) e^{k,i},
//! ```
//!
//! with every `e^{k,i}` inside its adaptive budget, plus stopping rules,
//! helpers for choosing `sigma` and a Fejer-monotonicity audit.

use serde::{Deserialize, Serialize};

use crate::config::{validate_config, Sigma, SolverConfig};
use crate::cutters::{apply, fixed_point_distance, residual, ConvexFunctionSpec, CutterSpec};
use crate::error::{Error, Result};
use crate::perturbation::{aggregate, budget, generate, BudgetInputs, PerturbationPolicy};
use crate::rng::keyed_rng;
use crate::trace::{IterationRecord, RunResult, Status};
use crate::vector::Vector;
use crate::weights::WeightSchedule;

/// Largest cutter residual a witness may have.
pub const WITNESS_TOLERANCE: f64 = 1e-10;

/// A common fixed point problem: find `x` in the intersection of `Fix(T_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    dimension: usize,
    cutters: Vec<CutterSpec>,
    x0: Vector,
    sigma: Sigma,
    witness: Option<Vector>,
    cost: Option<ConvexFunctionSpec>,
}

impl Problem {
    pub fn new(
        dimension: usize,
        cutters: Vec<CutterSpec>,
        x0: Vector,
        sigma: Sigma,
        witness: Option<Vector>,
        cost: Option<ConvexFunctionSpec>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidProblem("dimension must be positive".into()));
        }
        if cutters.is_empty() {
            return Err(Error::InvalidProblem("at least one cutter is required".into()));
        }
        for (i, c) in cutters.iter().enumerate() {
            c.validate()
                .map_err(|e| Error::InvalidProblem(format!("cutter {i}: {e}")))?;
            if let Some(n) = c.dim() {
                if n != dimension {
                    return Err(Error::DimensionMismatch {
                        expected: dimension,
                        found: n,
                    });
                }
            }
        }
        x0.check_dim(dimension)?;
        sigma.validate()?;
        if let Some(f) = &cost {
            f.validate()?;
            if let Some(n) = f.dim() {
                if n != dimension {
                    return Err(Error::DimensionMismatch {
                        expected: dimension,
                        found: n,
                    });
                }
            }
        }
        if let Some(q) = &witness {
            q.check_dim(dimension)?;
            for (index, c) in cutters.iter().enumerate() {
                let r = residual(c, q)?;
                if !(r <= WITNESS_TOLERANCE) {
                    return Err(Error::InfeasibleWitness { index, residual: r });
                }
            }
        }
        Ok(Problem {
            dimension,
            cutters,
            x0,
            sigma,
            witness,
            cost,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn m(&self) -> usize {
        self.cutters.len()
    }

    pub fn cutters(&self) -> &[CutterSpec] {
        &self.cutters
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn sigma(&self) -> Sigma {
        self.sigma
    }

    pub fn witness(&self) -> Option<&Vector> {
        self.witness.as_ref()
    }

    pub fn cost(&self) -> Option<&ConvexFunctionSpec> {
        self.cost.as_ref()
    }

    /// Same problem started from another point.
    pub fn with_x0(&self, x0: Vector) -> Result<Self> {
        x0.check_dim(self.dimension)?;
        Ok(Problem { x0, ..self.clone() })
    }

    /// Largest residual `max_i ||T_i(x) - x||`.
    pub fn max_residual(&self, x: &Vector) -> Result<f64> {
        self.cutters
            .iter()
            .try_fold(0.0, |m, c| Ok(f64::max(m, residual(c, x)?)))
    }
}

/// A termination test, evaluated at every iterate before a step is taken.
/// The iteration cap of the configuration is always in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StoppingRule {
    MaxIterations,
    /// `max_i d(x^k, Q_i) <= eps`.
    MaxDistance { eps: f64 },
    /// `max_i f_i(x^k) <= eps` over the level functions of subgradient cutters.
    MaxFunctionValue { eps: f64 },
    /// `max_i ||T_i(x^k) - x^k|| <= tol`.
    ResidualBelow { tol: f64 },
}

impl StoppingRule {
    fn check_capability(&self, problem: &Problem) -> Result<()> {
        let threshold_ok = |t: f64| t >= 0.0 && !t.is_nan();
        match *self {
            StoppingRule::MaxIterations => Ok(()),
            StoppingRule::ResidualBelow { tol } if threshold_ok(tol) => Ok(()),
            StoppingRule::MaxDistance { eps } if threshold_ok(eps) => {
                for (i, c) in problem.cutters().iter().enumerate() {
                    if fixed_point_distance(c, problem.x0())?.is_none() {
                        return Err(Error::InvalidStoppingRule(format!(
                            "cutter {i} ({}) has no closed-form distance",
                            c.kind_name()
                        )));
                    }
                }
                Ok(())
            }
            StoppingRule::MaxFunctionValue { eps } if threshold_ok(eps) => {
                if let Some(i) = problem
                    .cutters()
                    .iter()
                    .position(|c| c.level_function().is_none())
                {
                    return Err(Error::InvalidStoppingRule(format!(
                        "cutter {i} has no level-set function"
                    )));
                }
                Ok(())
            }
            other => Err(Error::InvalidStoppingRule(format!(
                "threshold must be nonnegative: {other:?}"
            ))),
        }
    }

    fn fires(&self, problem: &Problem, x: &Vector, max_residual: f64) -> Result<Option<Status>> {
        let status = match *self {
            StoppingRule::MaxIterations => None,
            StoppingRule::ResidualBelow { tol } => {
                (max_residual <= tol).then_some(Status::ResidualConverged)
            }
            StoppingRule::MaxDistance { eps } => {
                let mut worst = 0.0f64;
                for c in problem.cutters() {
                    let d = fixed_point_distance(c, x)?.ok_or_else(|| {
                        Error::InvalidStoppingRule("cutter lost its distance formula".into())
                    })?;
                    worst = worst.max(d);
                }
                (worst <= eps).then_some(Status::DistanceConverged)
            }
            StoppingRule::MaxFunctionValue { eps } => {
                let worst = problem
                    .cutters()
                    .iter()
                    .filter_map(|c| c.level_function())
                    .map(|f| f.value(x))
                    .fold(f64::NEG_INFINITY, f64::max);
                (worst <= eps).then_some(Status::FunctionConverged)
            }
        };
        Ok(status)
    }
}

/// Everything a run needs besides the problem.
#[derive(Debug, Clone, Copy)]
pub struct RunSetup<'a> {
    pub config: &'a SolverConfig,
    pub schedule: &'a WeightSchedule,
    pub policy: &'a PerturbationPolicy,
}

impl RunSetup<'_> {
    fn validate(&self, problem: &Problem) -> Result<()> {
        validate_config(self.config)?;
        self.policy.validate()?;
        if self.schedule.m() != problem.m() {
            return Err(Error::InvalidSchedule(format!(
                "schedule covers {} indices but the problem has {} cutters",
                self.schedule.m(),
                problem.m()
            )));
        }
        if let PerturbationPolicy::Superiorized { cost, .. } = self.policy {
            if let Some(n) = cost.dim() {
                if n != problem.dimension() {
                    return Err(Error::DimensionMismatch {
                        expected: problem.dimension(),
                        found: n,
                    });
                }
            }
        }
        Ok(())
    }
}

struct StepOutcome {
    next: Vector,
    perturbation_norm: f64,
    budget_bound: f64,
    lambda: f64,
}

/// Takes one step from `x`. `images[i]` may hold a precomputed `T_i(x)`;
/// missing images are evaluated only for indices with positive weight.
fn advance(
    problem: &Problem,
    setup: &RunSetup<'_>,
    k: usize,
    x: &Vector,
    images: &mut [Option<Vector>],
) -> Result<StepOutcome> {
    let config = setup.config;
    let lambda = config.lambda_at(k);
    let weights = setup.schedule.weights_at(k);

    let mut direction = Vector::zeros(x.dim());
    let mut perturbations = Vec::new();
    let mut budget_bound = 0.0;
    for (i, w) in weights.support() {
        if images[i].is_none() {
            images[i] = Some(apply(&problem.cutters()[i], x)?);
        }
        let offset = images[i].as_ref().expect("image evaluated above").sub(x);
        let cap = budget(&BudgetInputs::new(lambda, offset.norm(), config.sigma));
        budget_bound += w * cap;
        let mut rng = keyed_rng(config.seed, k as u64, i as u64);
        perturbations.push((w, generate(setup.policy, cap, x, &mut rng)));
        direction.axpy_in_place(w, &offset);
    }
    let e = aggregate(perturbations.iter().map(|(w, e)| (*w, e)))?
        .unwrap_or_else(|| Vector::zeros(x.dim()));
    let next = x.add_scaled(lambda, &direction).add(&e);
    if !next.is_finite() {
        return Err(Error::NonfiniteIterate { k: k + 1 });
    }
    Ok(StepOutcome {
        next,
        perturbation_norm: e.norm(),
        budget_bound,
        lambda,
    })
}

fn record_for(
    problem: &Problem,
    k: usize,
    x: &Vector,
    per_index_residuals: Vec<Option<f64>>,
    outcome: Option<&StepOutcome>,
    lambda: f64,
) -> IterationRecord {
    let max_residual = per_index_residuals
        .iter()
        .flatten()
        .fold(0.0f64, |m, &r| m.max(r));
    IterationRecord {
        k,
        max_residual,
        per_index_residuals,
        perturbation_norm: outcome.map_or(0.0, |o| o.perturbation_norm),
        budget_bound: outcome.map_or(0.0, |o| o.budget_bound),
        lambda,
        distance_to_witness: problem.witness().map(|q| x.distance(q)),
        distance_from_start: x.distance(problem.x0()),
    }
}

/// One iteration from `x_k`. Only indices with positive weight are evaluated,
/// so the record's residuals are `None` elsewhere.
pub fn step(
    problem: &Problem,
    setup: &RunSetup<'_>,
    k: usize,
    x_k: &Vector,
) -> Result<(Vector, IterationRecord)> {
    setup.validate(problem)?;
    x_k.check_dim(problem.dimension())?;
    let mut images = vec![None; problem.m()];
    let outcome = advance(problem, setup, k, x_k, &mut images)?;
    let residuals = images
        .iter()
        .map(|img| img.as_ref().map(|t| t.distance(x_k)))
        .collect();
    let record = record_for(problem, k, x_k, residuals, Some(&outcome), outcome.lambda);
    Ok((outcome.next, record))
}

/// Iterates until a stopping rule fires or the iteration cap is reached.
///
/// Rules are checked in order at every iterate, starting with `x^0`. An empty
/// rule list means `ResidualBelow(config.residual_tolerance)`.
pub fn run(
    problem: &Problem,
    setup: &RunSetup<'_>,
    stopping: &[StoppingRule],
) -> Result<RunResult> {
    setup.validate(problem)?;
    let default_rule = [StoppingRule::ResidualBelow {
        tol: setup.config.residual_tolerance,
    }];
    let rules = if stopping.is_empty() {
        &default_rule[..]
    } else {
        stopping
    };
    for rule in rules {
        rule.check_capability(problem)?;
    }

    let max_iterations = setup.config.max_iterations;
    let mut x = problem.x0().clone();
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    for k in 0..=max_iterations {
        if setup.config.keep_iterates {
            iterates.push(x.clone());
        }
        let mut images = problem
            .cutters()
            .iter()
            .map(|c| apply(c, &x).map(Some))
            .collect::<Result<Vec<_>>>()?;
        let residuals: Vec<Option<f64>> = images
            .iter()
            .map(|img| img.as_ref().map(|t| t.distance(&x)))
            .collect();
        let max_residual = residuals.iter().flatten().fold(0.0f64, |m, &r| m.max(r));

        let mut status = None;
        for rule in rules {
            if let Some(s) = rule.fires(problem, &x, max_residual)? {
                status = Some(s);
                break;
            }
        }
        if status.is_none() && k == max_iterations {
            status = Some(Status::MaxIterations);
        }
        if let Some(status) = status {
            let lambda = setup.config.lambda_at(k);
            trace.push(record_for(problem, k, &x, residuals, None, lambda));
            return Ok(RunResult {
                final_point: x,
                status,
                iterations_used: k,
                trace,
                iterates,
            });
        }

        let outcome = advance(problem, setup, k, &x, &mut images)?;
        trace.push(record_for(problem, k, &x, residuals, Some(&outcome), outcome.lambda));
        x = outcome.next;
    }
    unreachable!("the loop returns at k = max_iterations")
}

/// `r + ||x0 - c0|| + margin`, a valid `sigma` whenever the solution set lies
/// in the ball `B[c0, r]`.
pub fn sigma_from_ball(c0: &Vector, r: f64, x0: &Vector, margin: f64) -> Result<f64> {
    x0.check_dim(c0.dim())?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidConfig(format!("ball radius must be nonnegative, got {r}")));
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidConfig(format!("margin must be positive, got {margin}")));
    }
    Ok(r + x0.distance(c0) + margin)
}

/// `||x0|| + epsilon + margin`, a valid `sigma` when the problem includes the
/// constraint `||x||_1 <= epsilon`.
pub fn sigma_from_l1(x0: &Vector, epsilon: f64, margin: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidConfig(format!("margin must be positive, got {margin}")));
    }
    Ok(x0.norm() + epsilon + margin)
}

/// `max_k (||x^{k+1} - q|| - ||x^k - q||)`, or zero for fewer than two points.
pub fn fejer_audit(iterates: &[Vector], q: &Vector) -> f64 {
    let distances: Vec<f64> = iterates.iter().map(|x| x.distance(q)).collect();
    fejer_audit_distances(&distances)
}

/// Largest increase between consecutive entries of a distance sequence.
pub fn fejer_audit_distances(distances: &[f64]) -> f64 {
    distances
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}

/// Fejer audit on the witness distances recorded in a run's trace.
pub fn fejer_audit_trace(result: &RunResult) -> Option<f64> {
    let distances: Option<Vec<f64>> = result.trace.iter().map(|r| r.distance_to_witness).collect();
    distances.map(|d| fejer_audit_distances(&d))
}
