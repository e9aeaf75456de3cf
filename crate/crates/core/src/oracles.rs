//! Randomized property suites for the guarantees the solver relies on:
//! perturbed Fejer monotonicity of a relaxed cutter step, the cutter
//! (separator) inequality, the algebra of the perturbation budget, global
//! convergence of the iteration, and convergence into the intersection of the
//! fixed-point sets whose weights are not summable.
//!
//! Every trial is a pure function of `(seed, index)`; the trial's digest string
//! is enough to replay it.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{Relaxation, Sigma, SolverConfig};
use crate::cutters::{
    apply, check_separator, fixed_point_distance, residual, ConvexFunctionSpec, CutterSpec,
    ProxableFunctionSpec,
};
use crate::error::Result;
use crate::perturbation::{budget, theta_budget, BudgetInputs, PerturbationPolicy};
use crate::problems::gen_linear_feasibility;
use crate::rng::keyed_rng;
use crate::solver::{fejer_audit, fejer_audit_trace, run, Problem, RunSetup, StoppingRule};
use crate::trace::Status;
use crate::vector::Vector;
use crate::weights::{divergence_profile, IntraBlock, Regime, WeightSchedule};

/// Absolute slack for inequality checks.
pub const TOLERANCE: f64 = 1e-10;
/// Slack for the identity between the two budget formulas.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Slack on the containment ball `B[x0, 2 sigma]`.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-8;
/// Feasibility required of the limit in the summable-weight scenario.
pub const QHAT_TOLERANCE: f64 = 1e-5;

// stream tags keep the suites' random streams apart
const TAG_FEJER: u64 = 1;
const TAG_STRICT: u64 = 2;
const TAG_SEPARATOR: u64 = 3;
const TAG_BUDGET: u64 = 4;
const TAG_SCHEDULE: u64 = 5;
const TAG_QNE: u64 = 6;
const TAG_QHAT: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub inputs_digest: String,
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
    pub passed: bool,
    /// Cutter kind or schedule regime exercised, for coverage accounting.
    pub label: &'static str,
}

impl TrialOutcome {
    /// Passes when `lhs <= rhs + tolerance`.
    pub fn at_most(digest: String, label: &'static str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let violation = (lhs - rhs - tolerance).max(0.0);
        TrialOutcome {
            inputs_digest: digest,
            lhs,
            rhs,
            violation,
            passed: violation == 0.0 && !lhs.is_nan(),
            label,
        }
    }

    /// Passes when `lhs < rhs`.
    pub fn strictly_below(digest: String, label: &'static str, lhs: f64, rhs: f64) -> Self {
        let passed = lhs < rhs;
        TrialOutcome {
            inputs_digest: digest,
            lhs,
            rhs,
            violation: if passed { 0.0 } else { lhs - rhs },
            passed,
            label,
        }
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vector {
    Vector::from_raw((0..n).map(|_| rng.random_range(-half_width..half_width)).collect())
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let g = Vector::from_raw((0..n).map(|_| rng.sample(StandardNormal)).collect());
        let len = g.norm();
        if len > 1e-9 {
            return g.scale(1.0 / len);
        }
    }
}

/// Projection kinds, in rotation order.
pub const PROJECTION_KINDS: [&str; 5] = ["halfspace", "hyperplane", "ball", "box", "l1ball"];

/// Every cutter variant the separator sweep rotates through.
pub const CUTTER_VARIANTS: [&str; 11] = [
    "halfspace",
    "hyperplane",
    "ball",
    "box",
    "l1ball",
    "subgradient/norm_squared_minus",
    "subgradient/affine",
    "subgradient/quadratic",
    "resolvent/abs_sum",
    "resolvent/squared_norm",
    "resolvent/indicator",
];

/// A cutter together with a certified point of its fixed-point set.
struct CertifiedCutter {
    spec: CutterSpec,
    fixed_point: Vector,
}

fn random_projection_cutter(rng: &mut ChaCha8Rng, n: usize, kind: &str) -> CertifiedCutter {
    let spec = match kind {
        "halfspace" => CutterSpec::Halfspace {
            a: random_unit(rng, n).scale(rng.random_range(0.2..3.0)),
            b: rng.random_range(-2.0..2.0),
        },
        "hyperplane" => CutterSpec::Hyperplane {
            a: random_unit(rng, n).scale(rng.random_range(0.2..3.0)),
            b: rng.random_range(-2.0..2.0),
        },
        "ball" => CutterSpec::Ball {
            center: uniform_in(rng, n, 2.0),
            radius: rng.random_range(0.1..3.0),
        },
        "box" => {
            let lo = uniform_in(rng, n, 3.0);
            let widths = Vector::from_raw((0..n).map(|_| rng.random_range(0.0..3.0)).collect());
            let hi = lo.add(&widths);
            CutterSpec::Box { lo, hi }
        }
        "l1ball" => CutterSpec::L1Ball {
            radius: rng.random_range(0.1..4.0),
        },
        other => unreachable!("not a projection kind: {other}"),
    };
    let fixed_point = sample_fixed_point(rng, &spec, n);
    CertifiedCutter { spec, fixed_point }
}

/// A random point of `Fix(T)` for projection kinds: either the projection of a
/// random point (often on the boundary) or a point pulled towards the interior.
fn sample_fixed_point(rng: &mut ChaCha8Rng, spec: &CutterSpec, n: usize) -> Vector {
    let z = uniform_in(rng, n, 6.0);
    let on_set = apply(spec, &z).expect("projection of a matching dimension");
    if rng.random_bool(0.5) {
        return on_set;
    }
    // move towards an interior anchor; convex combinations stay in the set
    let anchor = match spec {
        CutterSpec::Ball { center, .. } => center.clone(),
        CutterSpec::Box { lo, hi } => lo.add(hi).scale(0.5),
        CutterSpec::L1Ball { .. } => Vector::zeros(n),
        CutterSpec::Halfspace { a, .. } => on_set.add_scaled(-rng.random_range(0.0..2.0), a),
        _ => on_set.clone(),
    };
    let t = rng.random_range(0.0..1.0);
    on_set.scale(1.0 - t).add(&anchor.scale(t))
}

fn random_cutter(rng: &mut ChaCha8Rng, n: usize, variant: &str) -> CertifiedCutter {
    if PROJECTION_KINDS.contains(&variant) {
        return random_projection_cutter(rng, n, variant);
    }
    match variant {
        "subgradient/norm_squared_minus" => {
            let center = uniform_in(rng, n, 2.0);
            let r: f64 = rng.random_range(0.1..3.0);
            let fixed_point = center.add_scaled(r * rng.random::<f64>(), &random_unit(rng, n));
            CertifiedCutter {
                spec: CutterSpec::SubgradientProjection {
                    f: ConvexFunctionSpec::NormSquaredMinus { center, r },
                },
                fixed_point,
            }
        }
        "subgradient/affine" => {
            let a = random_unit(rng, n).scale(rng.random_range(0.2..3.0));
            let b = rng.random_range(-2.0..2.0);
            let half = CutterSpec::Halfspace { a: a.clone(), b };
            let fixed_point = sample_fixed_point(rng, &half, n);
            CertifiedCutter {
                spec: CutterSpec::SubgradientProjection {
                    f: ConvexFunctionSpec::Affine { a, b },
                },
                fixed_point,
            }
        }
        "subgradient/quadratic" => {
            // Q = B^T B / n is positive semidefinite; d puts q0 in the sublevel set
            let b: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let q: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|l| b[l][i] * b[l][j]).sum::<f64>() / n as f64)
                        .collect()
                })
                .collect();
            let c = uniform_in(rng, n, 1.0);
            let q0 = uniform_in(rng, n, 2.0);
            let base = ConvexFunctionSpec::Quadratic {
                q: q.clone(),
                c: c.clone(),
                d: 0.0,
            };
            let d = -base.value(&q0) - rng.random_range(0.0..2.0);
            let f = ConvexFunctionSpec::Quadratic { q, c, d };
            let mut fixed_point = q0.clone();
            let step = random_unit(rng, n);
            let mut scale = rng.random_range(0.0..2.0);
            for _ in 0..40 {
                let candidate = q0.add_scaled(scale, &step);
                if f.value(&candidate) <= 0.0 {
                    fixed_point = candidate;
                    break;
                }
                scale *= 0.5;
            }
            CertifiedCutter {
                spec: CutterSpec::SubgradientProjection { f },
                fixed_point,
            }
        }
        "resolvent/abs_sum" => CertifiedCutter {
            spec: CutterSpec::Resolvent {
                g: ProxableFunctionSpec::AbsSum,
                gamma: rng.random_range(0.05..3.0),
            },
            fixed_point: Vector::zeros(n),
        },
        "resolvent/squared_norm" => CertifiedCutter {
            spec: CutterSpec::Resolvent {
                g: ProxableFunctionSpec::SquaredNorm,
                gamma: rng.random_range(0.05..3.0),
            },
            fixed_point: Vector::zeros(n),
        },
        "resolvent/indicator" => {
            let kind = *PROJECTION_KINDS.choose(rng).expect("nonempty");
            let inner = random_projection_cutter(rng, n, kind);
            CertifiedCutter {
                spec: CutterSpec::Resolvent {
                    g: ProxableFunctionSpec::Indicator {
                        set: Box::new(inner.spec),
                    },
                    gamma: rng.random_range(0.05..3.0),
                },
                fixed_point: inner.fixed_point,
            }
        }
        other => unreachable!("unknown cutter variant {other}"),
    }
}

fn short_label(variant: &str) -> &'static str {
    CUTTER_VARIANTS
        .iter()
        .copied()
        .find(|v| *v == variant)
        .unwrap_or("unknown")
}

fn relaxed_perturbed_step(x: &Vector, tx: &Vector, lambda: f64, e: &Vector) -> Vector {
    x.add_scaled(lambda, &tx.sub(x)).add(e)
}

/// `y = x + lambda (T(x) - x) + e` with `||e||` exactly on the `E_1` boundary;
/// checks `||y - q|| <= ||x - q||`.
pub fn perturbed_fejer_trial(seed: u64, index: u64) -> TrialOutcome {
    let mut rng = keyed_rng(seed, TAG_FEJER, index);
    let kind = PROJECTION_KINDS[index as usize % PROJECTION_KINDS.len()];
    let n = rng.random_range(1..=6);
    let cutter = random_projection_cutter(&mut rng, n, kind);
    let q = &cutter.fixed_point;
    let x = if rng.random_bool(0.1) {
        sample_fixed_point(&mut rng, &cutter.spec, n)
    } else {
        uniform_in(&mut rng, n, 6.0)
    };
    let lambda = match rng.random_range(0..20) {
        0 => 0.0,
        1 => 2.0,
        _ => rng.random_range(0.0..=2.0),
    };
    let tx = apply(&cutter.spec, &x).expect("dimensions match");
    let r = tx.distance(&x);
    let radius = theta_budget(1.0, lambda, r, x.distance(q));
    let e = random_unit(&mut rng, n).scale(radius);
    let y = relaxed_perturbed_step(&x, &tx, lambda, &e);
    TrialOutcome::at_most(
        format!("perturbed_fejer seed={seed} index={index} kind={kind} lambda={lambda}"),
        kind,
        y.distance(q),
        x.distance(q),
        TOLERANCE,
    )
}

/// Strict variant: `x` outside `Fix(T)`, `lambda` in `[0.05, 1.95]` and
/// `||e||` at 99% of the `E_1` radius; checks `||y - q|| < ||x - q||`.
pub fn strict_fejer_trial(seed: u64, index: u64) -> TrialOutcome {
    let mut rng = keyed_rng(seed, TAG_STRICT, index);
    let kind = PROJECTION_KINDS[index as usize % PROJECTION_KINDS.len()];
    let n = rng.random_range(1..=6);
    let cutter = random_projection_cutter(&mut rng, n, kind);
    let q = &cutter.fixed_point;
    // keep x clearly outside so the decrease is visible in double precision
    // widen the sampling box until a candidate lands outside
    let mut half_width = 6.0;
    let x = loop {
        let candidate = uniform_in(&mut rng, n, half_width);
        if residual(&cutter.spec, &candidate).expect("dimensions match") >= 0.1 {
            break candidate;
        }
        half_width *= 1.1;
    };
    let lambda = rng.random_range(0.05..=1.95);
    let tx = apply(&cutter.spec, &x).expect("dimensions match");
    let r = tx.distance(&x);
    let radius = 0.99 * theta_budget(1.0, lambda, r, x.distance(q));
    let e = random_unit(&mut rng, n).scale(radius);
    let y = relaxed_perturbed_step(&x, &tx, lambda, &e);
    TrialOutcome::strictly_below(
        format!("strict_fejer seed={seed} index={index} kind={kind} lambda={lambda}"),
        kind,
        y.distance(q),
        x.distance(q),
    )
}

/// `<x - T(x), q - T(x)> <= 0` for a random cutter of any kind and `q` in `Fix(T)`.
pub fn separator_trial(seed: u64, index: u64) -> TrialOutcome {
    let mut rng = keyed_rng(seed, TAG_SEPARATOR, index);
    let variant = CUTTER_VARIANTS[index as usize % CUTTER_VARIANTS.len()];
    let n = rng.random_range(1..=6);
    let cutter = random_cutter(&mut rng, n, variant);
    let x = uniform_in(&mut rng, n, 6.0);
    let value = check_separator(&cutter.spec, &x, &cutter.fixed_point).expect("valid cutter");
    TrialOutcome::at_most(
        format!("separator seed={seed} index={index} variant={variant}"),
        short_label(variant),
        value,
        0.0,
        TOLERANCE,
    )
}

/// `||T(x) - q|| <= ||x - q||`, and for projections also `T(T(x)) = T(x)`.
pub fn quasi_nonexpansive_trial(seed: u64, index: u64) -> TrialOutcome {
    let mut rng = keyed_rng(seed, TAG_QNE, index);
    let variant = CUTTER_VARIANTS[index as usize % CUTTER_VARIANTS.len()];
    let n = rng.random_range(1..=6);
    let cutter = random_cutter(&mut rng, n, variant);
    let x = uniform_in(&mut rng, n, 6.0);
    let q = &cutter.fixed_point;
    let tx = apply(&cutter.spec, &x).expect("valid cutter");
    let mut excess = tx.distance(q) - x.distance(q);
    if cutter.spec.is_projection() {
        let ttx = apply(&cutter.spec, &tx).expect("valid cutter");
        excess = excess.max(ttx.distance(&tx));
    }
    TrialOutcome::at_most(
        format!("quasi_nonexpansive seed={seed} index={index} variant={variant}"),
        short_label(variant),
        excess,
        0.0,
        TOLERANCE,
    )
}

/// Budget algebra on random inputs: the Fejer quadratic, the identity with
/// the `E_theta` radius at `theta = 1/2`, and the exact zero cases.
pub fn budget_trial(seed: u64, index: u64) -> TrialOutcome {
    let mut rng = keyed_rng(seed, TAG_BUDGET, index);
    let lambda = match rng.random_range(0..10) {
        0 => 0.0,
        1 => 2.0,
        _ => rng.random_range(0.0..=2.0),
    };
    let r = if rng.random_range(0..10) == 0 {
        0.0
    } else {
        rng.random_range(1e-3..10.0)
    };
    let sigma = if rng.random_range(0..10) == 0 {
        Sigma::Infinite
    } else {
        Sigma::Finite(rng.random_range(1e-2..10.0))
    };
    let t = budget(&BudgetInputs::new(lambda, r, sigma));
    let mut violation: f64 = 0.0;

    let should_vanish = lambda == 0.0 || lambda == 2.0 || r == 0.0 || sigma.is_infinite();
    if should_vanish != (t == 0.0) || !(t >= 0.0) || !t.is_finite() {
        violation = violation.max(t.abs().max(f64::MIN_POSITIVE));
    }
    let mut quadratic = 0.0;
    if let Sigma::Finite(s) = sigma {
        let alpha1 = lambda * r + 2.0 * s;
        let alpha2 = lambda * (2.0 - lambda) * r * r;
        quadratic = t * t + 2.0 * alpha1 * t - alpha2;
        violation = violation.max(quadratic - TOLERANCE);
        let identity_gap = (t - theta_budget(0.5, lambda, r, 2.0 * s)).abs();
        violation = violation.max(identity_gap - IDENTITY_TOLERANCE);
    }
    let violation = violation.max(0.0);
    TrialOutcome {
        inputs_digest: format!(
            "budget seed={seed} index={index} lambda={lambda} r={r} sigma={sigma:?}"
        ),
        lhs: quadratic,
        rhs: 0.0,
        violation,
        passed: violation == 0.0,
        label: "budget",
    }
}

fn random_regime(rng: &mut ChaCha8Rng, m: usize, which: usize) -> Regime {
    let random_index = |rng: &mut ChaCha8Rng| rng.random_range(1..=m);
    match which % 8 {
        0 => Regime::SequentialCyclic,
        1 => Regime::SequentialAlmostCyclic {
            period_bound: 2 * m - 1 + rng.random_range(0..4),
            order_seed: rng.random(),
        },
        2 => {
            let mut control: Vec<usize> = (1..=m).collect();
            control.extend((0..rng.random_range(0..m)).map(|_| random_index(rng)));
            control.shuffle(rng);
            Regime::SequentialRepetitive { control }
        }
        3 => Regime::SimultaneousUniform,
        4 => Regime::SimultaneousDrifting {
            selector: (0..rng.random_range(1..4)).map(|_| random_index(rng)).collect(),
        },
        5 => {
            let mut order: Vec<usize> = (1..=m).collect();
            order.shuffle(rng);
            let cut = rng.random_range(1..=m);
            let mut partition = vec![order[..cut].to_vec()];
            if cut < m {
                partition.push(order[cut..].to_vec());
            }
            let intra = if rng.random_bool(0.5) {
                IntraBlock::Uniform
            } else {
                IntraBlock::Explicit(partition.iter().map(|b| random_simplex(rng, b.len())).collect())
            };
            Regime::BlockClassicalCyclic { partition, intra }
        }
        6 => {
            let blocks: Vec<Vec<usize>> = (0..rng.random_range(1..4))
                .map(|_| {
                    let mut all: Vec<usize> = (1..=m).collect();
                    all.shuffle(rng);
                    all.truncate(rng.random_range(1..=m));
                    all
                })
                .collect();
            Regime::BlockGeneralized {
                blocks,
                intra: IntraBlock::Uniform,
            }
        }
        _ => Regime::SummableIndex {
            index: random_index(rng),
        },
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // absorb rounding so the weights sum to one
    let head: f64 = w[..len - 1].iter().sum();
    w[len - 1] = (1.0 - head).max(0.0);
    w
}

/// A projection-kind cutter whose set contains `q`.
fn cutter_containing(rng: &mut ChaCha8Rng, q: &Vector, kind: &str) -> CutterSpec {
    let n = q.dim();
    match kind {
        "halfspace" => {
            let a = random_unit(rng, n);
            CutterSpec::Halfspace {
                b: a.dot(q) + rng.random_range(0.0..1.0),
                a,
            }
        }
        "hyperplane" => {
            let a = random_unit(rng, n);
            CutterSpec::Hyperplane { b: a.dot(q), a }
        }
        "ball" => {
            let radius = rng.random_range(0.5..3.0);
            CutterSpec::Ball {
                center: q.add_scaled(radius * rng.random::<f64>(), &random_unit(rng, n)),
                radius,
            }
        }
        "box" => {
            let lo = q.map(|v| v - rng.random_range(0.0..1.0));
            let hi = q.map(|v| v + rng.random_range(0.0..1.0));
            CutterSpec::Box { lo, hi }
        }
        _ => CutterSpec::L1Ball {
            radius: q.l1_norm() + rng.random_range(0.01..1.0),
        },
    }
}

/// A few GBIP iterations under a random control regime, with maximal in-budget
/// perturbations; checks Fejer monotonicity against a common fixed point and
/// containment in `B[x0, 2 sigma]`.
pub fn schedule_fejer_trial(seed: u64, index: u64) -> TrialOutcome {
    let mut rng = keyed_rng(seed, TAG_SCHEDULE, index);
    let n = rng.random_range(1..=5);
    let m = rng.random_range(2..=5);
    let q = uniform_in(&mut rng, n, 2.0);
    let cutters: Vec<CutterSpec> = (0..m)
        .map(|_| {
            let kind = *PROJECTION_KINDS.choose(&mut rng).expect("nonempty");
            cutter_containing(&mut rng, &q, kind)
        })
        .collect();
    let x0 = uniform_in(&mut rng, n, 8.0);
    let sigma = x0.distance(&q) + rng.random_range(0.01..2.0);
    let problem = Problem::new(n, cutters, x0, Sigma::Finite(sigma), None, None)
        .expect("constructed instance is valid");
    let regime = random_regime(&mut rng, m, (index / 10) as usize);
    let label = regime.name();
    let schedule = WeightSchedule::new(regime, m).expect("constructed schedule is valid");
    let policy = match rng.random_range(0..3) {
        0 => PerturbationPolicy::Zero,
        1 => PerturbationPolicy::RandomDirection { rho: 0.99 },
        _ => PerturbationPolicy::Superiorized {
            rho: 0.99,
            cost: ConvexFunctionSpec::NormSquaredMinus {
                center: uniform_in(&mut rng, n, 5.0),
                r: 0.0,
            },
        },
    };
    let config = SolverConfig {
        tau1: 0.05,
        tau2: 0.05,
        lambda: Relaxation::Cycled {
            list: (0..7).map(|_| rng.random_range(0.05..=1.95)).collect(),
        },
        sigma: Sigma::Finite(sigma),
        max_iterations: 30,
        residual_tolerance: 0.0,
        seed: rng.random(),
        keep_iterates: true,
    };
    let setup = RunSetup {
        config: &config,
        schedule: &schedule,
        policy: &policy,
    };
    let digest = format!("schedule_fejer seed={seed} index={index} regime={label}");
    match run(&problem, &setup, &[StoppingRule::MaxIterations]) {
        Ok(result) => {
            let fejer = fejer_audit(&result.iterates, &q);
            let containment = result.max_distance_from_start() - 2.0 * sigma;
            let excess = (fejer - TOLERANCE).max(containment - CONTAINMENT_TOLERANCE);
            TrialOutcome::at_most(digest, label, excess, 0.0, 0.0)
        }
        Err(err) => TrialOutcome {
            inputs_digest: format!("{digest} error={err}"),
            lhs: f64::NAN,
            rhs: 0.0,
            violation: f64::INFINITY,
            passed: false,
            label,
        },
    }
}

/// One configuration of the convergence scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRun {
    pub name: String,
    pub status: Status,
    pub iterations_used: usize,
    pub iteration_cap: usize,
    pub final_max_residual: f64,
    pub residual_tolerance: f64,
    pub max_distance_from_start: f64,
    pub two_sigma: f64,
    pub fejer_violation: f64,
}

impl ConvergenceRun {
    pub fn converged(&self) -> bool {
        self.final_max_residual <= self.residual_tolerance
    }

    pub fn contained(&self) -> bool {
        self.max_distance_from_start <= self.two_sigma + CONTAINMENT_TOLERANCE
    }

    pub fn fejer_ok(&self) -> bool {
        self.fejer_violation <= TOLERANCE
    }

    pub fn passed(&self) -> bool {
        self.converged() && self.contained() && self.fejer_ok()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub seed: u64,
    pub runs: Vec<ConvergenceRun>,
}

impl ConvergenceReport {
    pub fn outcome(&self) -> TrialOutcome {
        let worst_ratio = self
            .runs
            .iter()
            .map(|r| r.final_max_residual / r.residual_tolerance)
            .fold(0.0, f64::max);
        let passed = self.runs.iter().all(ConvergenceRun::passed);
        let violation = self
            .runs
            .iter()
            .map(|r| {
                (r.final_max_residual - r.residual_tolerance)
                    .max(r.fejer_violation - TOLERANCE)
                    .max(r.max_distance_from_start - r.two_sigma - CONTAINMENT_TOLERANCE)
                    .max(0.0)
            })
            .fold(0.0, f64::max);
        TrialOutcome {
            inputs_digest: format!("convergence seed={}", self.seed),
            lhs: worst_ratio,
            rhs: 1.0,
            violation,
            passed,
            label: "convergence",
        }
    }
}

/// Iteration caps and tolerances of the convergence scenario.
pub const UNPERTURBED_CAP: usize = 50_000;
pub const PERTURBED_CAP: usize = 200_000;
pub const UNPERTURBED_TOLERANCE: f64 = 1e-6;
pub const PERTURBED_TOLERANCE: f64 = 1e-4;

/// Runs a problem with a witness under one configuration and audits it.
pub fn audited_run(
    name: &str,
    problem: &Problem,
    regime: Regime,
    policy: PerturbationPolicy,
    tolerance: f64,
    cap: usize,
    seed: u64,
) -> Result<ConvergenceRun> {
    let sigma = problem.sigma();
    let config = SolverConfig {
        tau1: 0.05,
        tau2: 0.05,
        lambda: Relaxation::Constant(1.0),
        sigma,
        max_iterations: cap,
        residual_tolerance: tolerance,
        seed,
        keep_iterates: false,
    };
    let schedule = WeightSchedule::new(regime, problem.m())?;
    let setup = RunSetup {
        config: &config,
        schedule: &schedule,
        policy: &policy,
    };
    let result = run(problem, &setup, &[StoppingRule::ResidualBelow { tol: tolerance }])?;
    Ok(ConvergenceRun {
        name: name.to_string(),
        status: result.status,
        iterations_used: result.iterations_used,
        iteration_cap: cap,
        final_max_residual: result.final_max_residual(),
        residual_tolerance: tolerance,
        max_distance_from_start: result.max_distance_from_start(),
        two_sigma: sigma.finite().map_or(f64::INFINITY, |s| 2.0 * s),
        fejer_violation: fejer_audit_trace(&result).unwrap_or(0.0),
    })
}

/// The linear feasibility scenario `(m, n, radius) = (20, 10, 5)` under cyclic
/// and simultaneous control, each with zero and random perturbations.
pub fn convergence_trial(instance_seed: u64) -> Result<ConvergenceReport> {
    let problem = gen_linear_feasibility(instance_seed, 20, 10, 5.0)?;
    convergence_trial_on(&problem, instance_seed)
}

pub fn convergence_trial_on(problem: &Problem, seed: u64) -> Result<ConvergenceReport> {
    let random = PerturbationPolicy::RandomDirection { rho: 0.99 };
    let configs = [
        ("cyclic/zero", Regime::SequentialCyclic, PerturbationPolicy::Zero, UNPERTURBED_TOLERANCE, UNPERTURBED_CAP),
        ("simultaneous/zero", Regime::SimultaneousUniform, PerturbationPolicy::Zero, UNPERTURBED_TOLERANCE, UNPERTURBED_CAP),
        ("cyclic/random", Regime::SequentialCyclic, random.clone(), PERTURBED_TOLERANCE, PERTURBED_CAP),
        ("simultaneous/random", Regime::SimultaneousUniform, random, PERTURBED_TOLERANCE, PERTURBED_CAP),
    ];
    let runs = configs
        .into_iter()
        .map(|(name, regime, policy, tol, cap)| audited_run(name, problem, regime, policy, tol, cap, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport { seed, runs })
}

#[derive(Debug, Clone, Serialize)]
pub struct QhatReport {
    pub seed: u64,
    /// `d(limit, Q_i)` for `i = 1, 2, 3` under the summable-weight schedule.
    pub summable_distances: [f64; 3],
    /// The same distances under uniform weights.
    pub divergent_distances: [f64; 3],
    /// Partial sums of the weights of index 3 under the summable schedule.
    pub summable_weight_total: f64,
}

impl QhatReport {
    pub fn summable_ok(&self) -> bool {
        self.summable_distances[0].max(self.summable_distances[1]) <= QHAT_TOLERANCE
    }

    pub fn divergent_ok(&self) -> bool {
        self.divergent_distances.iter().all(|&d| d <= QHAT_TOLERANCE)
    }

    pub fn outcome(&self) -> TrialOutcome {
        let lhs = self.summable_distances[0].max(self.summable_distances[1]);
        let divergent = self.divergent_distances.iter().copied().fold(0.0, f64::max);
        let violation = (lhs - QHAT_TOLERANCE).max(divergent - QHAT_TOLERANCE).max(0.0);
        TrialOutcome {
            inputs_digest: format!(
                "qhat seed={} d(limit,Q3)={:e} summable_total={}",
                self.seed, self.summable_distances[2], self.summable_weight_total
            ),
            lhs,
            rhs: QHAT_TOLERANCE,
            violation,
            passed: self.summable_ok() && self.divergent_ok(),
            label: "qhat",
        }
    }
}

/// Three halfspaces in the plane: a strip `Q1 ∩ Q2` and a third halfspace
/// `Q3` orthogonal to it, with the start point outside `Q1` and `Q3`.
pub fn qhat_instance(seed: u64) -> Result<Problem> {
    let mut rng = keyed_rng(seed, TAG_QHAT, 0);
    let angle = rng.random_range(0.0..2.0 * PI);
    let u = Vector::from_raw(vec![angle.cos(), angle.sin()]);
    let v = Vector::from_raw(vec![-angle.sin(), angle.cos()]);
    let half_width = rng.random_range(0.5..2.0);
    let shift = rng.random_range(-1.0..1.0);
    let offset = rng.random_range(-1.0..1.0);
    let cutters = vec![
        CutterSpec::Halfspace {
            a: u.clone(),
            b: shift + half_width,
        },
        CutterSpec::Halfspace {
            a: u.scale(-1.0),
            b: half_width - shift,
        },
        CutterSpec::Halfspace {
            a: v.clone(),
            b: offset,
        },
    ];
    let x0 = u
        .scale(shift + half_width + rng.random_range(1.0..4.0))
        .add(&v.scale(offset + rng.random_range(3.0..6.0)));
    let witness = u.scale(shift).add(&v.scale(offset - 1.0));
    let sigma = x0.distance(&witness) + 1.0;
    Problem::new(2, cutters, x0, Sigma::Finite(sigma), Some(witness), None)
}

/// Iterations used by the summable-weight scenario.
pub const QHAT_ITERATIONS: usize = 2_000;

pub fn qhat_trial(instance_seed: u64) -> Result<QhatReport> {
    let problem = qhat_instance(instance_seed)?;
    let limit_distances = |regime: Regime| -> Result<[f64; 3]> {
        let config = SolverConfig {
            lambda: Relaxation::Constant(1.0),
            sigma: problem.sigma(),
            max_iterations: QHAT_ITERATIONS,
            seed: instance_seed,
            ..SolverConfig::default()
        };
        let schedule = WeightSchedule::new(regime, 3)?;
        let setup = RunSetup {
            config: &config,
            schedule: &schedule,
            policy: &PerturbationPolicy::Zero,
        };
        let result = run(&problem, &setup, &[StoppingRule::MaxIterations])?;
        let mut d = [0.0; 3];
        for (slot, c) in d.iter_mut().zip(problem.cutters()) {
            *slot = fixed_point_distance(c, &result.final_point)?.expect("halfspaces have distances");
        }
        Ok(d)
    };
    let summable = Regime::SummableIndex { index: 3 };
    let summable_weight_total =
        divergence_profile(&WeightSchedule::new(summable.clone(), 3)?, QHAT_ITERATIONS)[2];
    Ok(QhatReport {
        seed: instance_seed,
        summable_distances: limit_distances(summable)?,
        divergent_distances: limit_distances(Regime::SimultaneousUniform)?,
        summable_weight_total,
    })
}

/// The property suites available from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Fejer,
    Cutter,
    Budget,
    Convergence,
    Qhat,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fejer" => Ok(Suite::Fejer),
            "cutter" => Ok(Suite::Cutter),
            "budget" => Ok(Suite::Budget),
            "convergence" => Ok(Suite::Convergence),
            "qhat" => Ok(Suite::Qhat),
            other => Err(format!(
                "unknown suite {other:?} (expected fejer, cutter, budget, convergence or qhat)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub worst_violation: f64,
    /// Digest of the first failing trial, if any.
    pub first_failure: Option<String>,
    pub coverage: BTreeMap<&'static str, usize>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        SuiteReport {
            suite,
            trials: 0,
            passed: 0,
            failed: 0,
            worst_violation: 0.0,
            first_failure: None,
            coverage: BTreeMap::new(),
        }
    }

    fn record(&mut self, outcome: TrialOutcome) {
        self.trials += 1;
        *self.coverage.entry(outcome.label).or_default() += 1;
        if outcome.passed {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(outcome.inputs_digest.clone());
            }
        }
        if outcome.violation > self.worst_violation || outcome.violation.is_nan() {
            self.worst_violation = outcome.violation;
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0 && self.trials > 0
    }
}

/// Runs `trials` seeded trials of a suite.
///
/// The Fejer suite runs one boundary and one strict trial per index plus a
/// multi-step schedule trial every tenth index; the cutter suite runs a
/// separator and a quasi-nonexpansivity trial per index. The convergence and
/// qhat suites treat the trial index as an instance seed offset.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new(suite);
    for i in 0..trials as u64 {
        match suite {
            Suite::Fejer => {
                report.record(perturbed_fejer_trial(seed, i));
                report.record(strict_fejer_trial(seed, i));
                if i % 10 == 0 {
                    report.record(schedule_fejer_trial(seed, i));
                }
            }
            Suite::Cutter => {
                report.record(separator_trial(seed, i));
                report.record(quasi_nonexpansive_trial(seed, i));
            }
            Suite::Budget => report.record(budget_trial(seed, i)),
            Suite::Convergence => report.record(match convergence_trial(seed + i) {
                Ok(r) => r.outcome(),
                Err(e) => error_outcome(format!("convergence seed={} error={e}", seed + i), "convergence"),
            }),
            Suite::Qhat => report.record(match qhat_trial(seed + i) {
                Ok(r) => r.outcome(),
                Err(e) => error_outcome(format!("qhat seed={} error={e}", seed + i), "qhat"),
            }),
        }
    }
    report
}

fn error_outcome(digest: String, label: &'static str) -> TrialOutcome {
    TrialOutcome {
        inputs_digest: digest,
        lhs: f64::NAN,
        rhs: 0.0,
        violation: f64::INFINITY,
        passed: false,
        label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn zero_perturbation_unit_step_is_quasi_nonexpansive() {
        let h = CutterSpec::Halfspace {
            a: v(&[1.0, 0.0]),
            b: 0.0,
        };
        let x = v(&[1.0, 2.0]);
        let q = v(&[-3.0, 0.5]);
        let tx = apply(&h, &x).unwrap();
        let y = relaxed_perturbed_step(&x, &tx, 1.0, &Vector::zeros(2));
        assert!(y.distance(&q) < x.distance(&q));
    }

    #[test]
    fn fixed_point_start_has_zero_budget() {
        let h = CutterSpec::Ball {
            center: v(&[0.0, 0.0]),
            radius: 1.0,
        };
        let x = v(&[0.2, 0.1]);
        let tx = apply(&h, &x).unwrap();
        let r = tx.distance(&x);
        assert_eq!(theta_budget(1.0, 1.3, r, x.distance(&v(&[0.0, 0.5]))), 0.0);
        assert_eq!(relaxed_perturbed_step(&x, &tx, 1.3, &Vector::zeros(2)), x);
    }

    #[test]
    fn strict_decrease_on_a_constructed_halfspace_case() {
        let h = CutterSpec::Halfspace {
            a: v(&[1.0, 0.0]),
            b: 0.0,
        };
        let x = v(&[1.0, 0.0]);
        let tx = apply(&h, &x).unwrap();
        for q in [v(&[0.0, 0.0]), v(&[-2.0, 3.0]), v(&[0.0, -1.0])] {
            let y = relaxed_perturbed_step(&x, &tx, 1.0, &Vector::zeros(2));
            assert!(y.distance(&q) < x.distance(&q));
        }
    }

    #[test]
    fn trials_are_reproducible() {
        assert_eq!(perturbed_fejer_trial(4, 17), perturbed_fejer_trial(4, 17));
        assert_eq!(separator_trial(4, 17), separator_trial(4, 17));
        assert_eq!(schedule_fejer_trial(4, 30), schedule_fejer_trial(4, 30));
    }

    #[test]
    fn small_sweeps_pass() {
        for suite in [Suite::Fejer, Suite::Cutter, Suite::Budget] {
            let report = run_suite(suite, 200, 11);
            assert!(report.all_passed(), "{report:?}");
        }
    }

    #[test]
    fn sweeps_cover_every_kind_and_regime_within_1000_trials() {
        let cutter = run_suite(Suite::Cutter, 1000, 1);
        for variant in CUTTER_VARIANTS {
            assert!(cutter.coverage.get(variant).copied().unwrap_or(0) > 0, "{variant}");
        }
        let fejer = run_suite(Suite::Fejer, 1000, 1);
        for name in [
            "sequential_cyclic",
            "sequential_almost_cyclic",
            "sequential_repetitive",
            "simultaneous_uniform",
            "simultaneous_drifting",
            "block_classical",
            "block_generalized",
            "summable_index",
        ] {
            assert!(fejer.coverage.get(name).copied().unwrap_or(0) > 0, "{name}");
        }
        for kind in PROJECTION_KINDS {
            assert!(fejer.coverage.get(kind).copied().unwrap_or(0) > 0, "{kind}");
        }
    }

    #[test]
    fn detector_flags_a_failing_comparison() {
        let bad = TrialOutcome::at_most("x".into(), "t", 1.0, 0.5, TOLERANCE);
        assert!(!bad.passed);
        assert!((bad.violation - (0.5 - TOLERANCE)).abs() < 1e-15);
        let tie = TrialOutcome::strictly_below("x".into(), "t", 1.0, 1.0);
        assert!(!tie.passed);
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("qhat".parse::<Suite>().unwrap(), Suite::Qhat);
        assert!("fejr".parse::<Suite>().is_err());
    }
}
