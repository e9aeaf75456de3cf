//! Per-iteration records and run results.

use serde::{Deserialize, Serialize};

use crate::vector::Vector;

/// Diagnostics for one iterate `x^k` and the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Largest fixed-point residual among the evaluated indices.
    pub max_residual: f64,
    /// `Some(r_i)` for every evaluated index. A full run evaluates all of them.
    pub per_index_residuals: Vec<Option<f64>>,
    /// Norm of the aggregated perturbation `e^k`; zero on the final record.
    pub perturbation_norm: f64,
    /// Sum over indices of `w_k(i) * budget(k, i)`.
    pub budget_bound: f64,
    pub lambda: f64,
    pub distance_to_witness: Option<f64>,
    pub distance_from_start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ResidualConverged,
    DistanceConverged,
    FunctionConverged,
    MaxIterations,
}

impl Status {
    pub fn is_converged(self) -> bool {
        !matches!(self, Status::MaxIterations)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_point: Vector,
    pub status: Status,
    /// Number of steps taken; the trace holds one more record than this.
    pub iterations_used: usize,
    pub trace: Vec<IterationRecord>,
    /// `x^0, x^1, ...` when the configuration asks for them, else empty.
    pub iterates: Vec<Vector>,
}

impl RunResult {
    pub fn final_record(&self) -> &IterationRecord {
        self.trace.last().expect("a run always records its final iterate")
    }

    pub fn final_max_residual(&self) -> f64 {
        self.final_record().max_residual
    }

    /// Largest `||x^k - x^0||` along the run.
    pub fn max_distance_from_start(&self) -> f64 {
        self.trace
            .iter()
            .map(|r| r.distance_from_start)
            .fold(0.0, f64::max)
    }
}
