//! Problem files and reproducible instance generators.
//!
//! A problem file is a JSON document
//!
//! ```json
//! {"dimension": 2,
//!  "cutters": [{"type": "halfspace", "a": [1.0, 0.0], "b": 1.0}],
//!  "x0": [3.0, 4.0],
//!  "sigma": 10.0,
//!  "witness": [0.0, 0.0],
//!  "cost": {"form": "abs_sum"}}
//! ```
//!
//! `sigma` may also be the string `"infinity"`; `witness` and `cost` are optional.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Sigma;
use crate::cutters::{ConvexFunctionSpec, CutterSpec, CUTTER_KINDS};
use crate::error::{Error, Result};
use crate::solver::{sigma_from_ball, sigma_from_l1, Problem};
use crate::vector::Vector;

/// Margin added by the generators when they pick `sigma`.
pub const SIGMA_MARGIN: f64 = 1.0;

/// Serialized form of a [`Problem`]; field order is the canonical file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub cutters: Vec<CutterSpec>,
    pub x0: Vector,
    pub sigma: Sigma,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<ConvexFunctionSpec>,
}

impl From<&Problem> for ProblemFile {
    fn from(p: &Problem) -> Self {
        ProblemFile {
            dimension: p.dimension(),
            cutters: p.cutters().to_vec(),
            x0: p.x0().clone(),
            sigma: p.sigma(),
            witness: p.witness().cloned(),
            cost: p.cost().cloned(),
        }
    }
}

impl TryFrom<ProblemFile> for Problem {
    type Error = Error;

    fn try_from(f: ProblemFile) -> Result<Problem> {
        Problem::new(f.dimension, f.cutters, f.x0, f.sigma, f.witness, f.cost)
    }
}

fn scan_cutter_kinds(value: &Value, path: &str) -> Result<()> {
    let Some(obj) = value.as_object() else {
        return Ok(());
    };
    if let Some(kind) = obj.get("type").and_then(Value::as_str) {
        if !CUTTER_KINDS.contains(&kind) {
            return Err(Error::UnknownCutterKind {
                kind: kind.to_string(),
                path: path.to_string(),
            });
        }
    }
    if let Some(set) = obj.get("g").and_then(|g| g.get("set")) {
        scan_cutter_kinds(set, &format!("{path}.g.set"))?;
    }
    Ok(())
}

/// Parses and validates a problem from JSON text.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if let Some(cutters) = value.get("cutters").and_then(Value::as_array) {
        for (i, c) in cutters.iter().enumerate() {
            scan_cutter_kinds(c, &format!("cutters[{i}]"))?;
        }
    }
    let file: ProblemFile = serde_path_to_error::deserialize(value).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    Problem::try_from(file)
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

pub fn problem_to_json(problem: &Problem) -> String {
    let mut text = serde_json::to_string_pretty(&ProblemFile::from(problem))
        .expect("problem files always serialize");
    text.push('\n');
    text
}

/// Writes a problem file. Floats use the shortest representation that
/// round-trips exactly.
pub fn save_problem(problem: &Problem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, problem_to_json(problem))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let g = Vector::from_raw(gaussian(rng, n));
        let len = g.norm();
        if len > 1e-12 {
            return g.scale(1.0 / len);
        }
    }
}

fn require(cond: bool, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidProblem(message.to_string()))
    }
}

/// `m` random halfspaces in `R^n` whose intersection strictly contains a point
/// drawn uniformly from `B[0, radius]`.
///
/// Each halfspace is `<a_i, x> <= <a_i, q*> + u_i` with unit `a_i` and
/// `u_i ~ U[0.01, 1]`. The start point is placed so that at least a quarter of
/// the halfspaces are violated, and `sigma = ||x0|| + radius + margin` since
/// `q*` lies in `B[0, radius]`.
pub fn gen_linear_feasibility(seed: u64, m: usize, n: usize, radius: f64) -> Result<Problem> {
    require(m >= 1 && n >= 1, "linear instances need m >= 1 and n >= 1")?;
    require(radius > 0.0 && radius.is_finite(), "radius must be positive")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let witness = unit_vector(&mut rng, n).scale(radius * rng.random::<f64>().powf(1.0 / n as f64));
    let cutters: Vec<CutterSpec> = (0..m)
        .map(|_| {
            let a = unit_vector(&mut rng, n);
            let b = a.dot(&witness) + rng.random_range(0.01..=1.0);
            CutterSpec::Halfspace { a, b }
        })
        .collect();

    let wanted = (m / 4).max(1);
    let violated = |x: &Vector| {
        cutters
            .iter()
            .filter(|c| matches!(c, CutterSpec::Halfspace { a, b } if a.dot(x) > *b))
            .count()
    };
    let mut x0 = witness.clone();
    for _ in 0..1000 {
        let reach = 2.0 * radius + rng.random_range(2.0..6.0);
        x0 = witness.add_scaled(reach, &unit_vector(&mut rng, n));
        if violated(&x0) >= wanted {
            break;
        }
    }
    let sigma = sigma_from_ball(&Vector::zeros(n), radius, &x0, SIGMA_MARGIN)?;
    Problem::new(n, cutters, x0, Sigma::Finite(sigma), Some(witness), None)
}

/// `m` discs in the plane sharing a drawn point `q*`.
///
/// Disc `i` has radius `R_i ~ U[1, 3]` and its center sits at distance
/// `max(R_i - overlap * t_i, 0)` from `q*` with `t_i ~ U[0.5, 1]`, so `q*` is
/// inside every disc at depth at least `min(R_i, overlap / 2)`. `sigma` comes
/// from the first disc, which contains the whole solution set.
pub fn gen_disc_intersection(seed: u64, m: usize, overlap: f64) -> Result<Problem> {
    require(m >= 2, "disc instances need m >= 2")?;
    require(overlap > 0.0 && overlap.is_finite(), "overlap must be positive")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let witness = Vector::from_raw(vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
    let cutters: Vec<CutterSpec> = (0..m)
        .map(|_| {
            let radius = rng.random_range(1.0..3.0);
            let depth = overlap * rng.random_range(0.5..=1.0);
            let offset = (radius - depth).max(0.0);
            let center = witness.add_scaled(offset, &unit_vector(&mut rng, 2));
            CutterSpec::Ball { center, radius }
        })
        .collect();
    let x0 = witness.add_scaled(rng.random_range(8.0..12.0), &unit_vector(&mut rng, 2));
    let CutterSpec::Ball { center, radius } = &cutters[0] else {
        unreachable!("all disc cutters are balls")
    };
    let sigma = sigma_from_ball(center, *radius, &x0, SIGMA_MARGIN)?;
    Problem::new(2, cutters, x0, Sigma::Finite(sigma), Some(witness), None)
}

/// A consistent underdetermined system `Ax = y` (`s` hyperplanes in `R^n`)
/// together with the constraint `||x||_1 <= epsilon`.
///
/// The planted solution is sparse with `||x*||_1 <= 0.9 epsilon`; the cost is
/// the l1 norm, and `sigma = ||x0|| + epsilon + margin`.
pub fn gen_l1_constrained(seed: u64, s: usize, n: usize, epsilon: f64) -> Result<Problem> {
    require(s >= 1 && n >= 1, "l1 instances need s >= 1 and n >= 1")?;
    require(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let support = (n / 3).max(1);
    let mut planted = vec![0.0; n];
    let mut indices: Vec<usize> = (0..n).collect();
    for j in 0..support {
        let pick = rng.random_range(j..n);
        indices.swap(j, pick);
        planted[indices[j]] = rng.sample::<f64, _>(StandardNormal);
    }
    let planted = Vector::from_raw(planted);
    let l1 = planted.l1_norm();
    let target = 0.9 * epsilon * rng.random_range(0.5..=1.0);
    let witness = if l1 > 0.0 {
        planted.scale(target / l1)
    } else {
        planted
    };

    let mut cutters: Vec<CutterSpec> = (0..s)
        .map(|_| {
            let a = Vector::from_raw(gaussian(&mut rng, n));
            let b = a.dot(&witness);
            CutterSpec::Hyperplane { a, b }
        })
        .collect();
    cutters.push(CutterSpec::L1Ball { radius: epsilon });

    let x0 = Vector::from_raw(gaussian(&mut rng, n));
    let sigma = sigma_from_l1(&x0, epsilon, SIGMA_MARGIN)?;
    Problem::new(
        n,
        cutters,
        x0,
        Sigma::Finite(sigma),
        Some(witness),
        Some(ConvexFunctionSpec::AbsSum),
    )
}
