//! Exact desk-scale solver: primal simplex plus branch-and-bound.

mod bb;
pub mod simplex;

pub use bb::bb_solve;
pub use simplex::{simplex_solve, LpProblem, LpRow, LpSolution, LpStatus};

use std::fmt;

use serde::Serialize;

use crate::mip::{MipModel, DEFAULT_FEASTOL, DEFAULT_INTTOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    UnboundedRelaxation,
    NodeLimit,
    TimeLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::UnboundedRelaxation => "unbounded_relaxation",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveLimits {
    pub max_nodes: usize,
    pub max_seconds: f64,
    /// Absolute optimality gap.
    pub gap: f64,
    pub feastol: f64,
    pub inttol: f64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            max_nodes: 1_000_000,
            max_seconds: 3600.0,
            gap: 1e-6,
            feastol: DEFAULT_FEASTOL,
            inttol: DEFAULT_INTTOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective of the returned assignment in the model's own sense.
    pub objective: f64,
    /// Indexed by variable id; empty when no feasible point was found.
    pub assignment: Vec<f64>,
    pub node_count: usize,
    pub iterations: usize,
    /// Proven bound on the optimum in the model's sense.
    pub best_bound: f64,
}

/// Solve the LP relaxation of `model`: integrality, SOS1 and indicators dropped.
pub fn solve_lp_relaxation(model: &MipModel) -> SolveResult {
    let lp = LpProblem::from_model(model);
    let sol = simplex_solve(&lp);
    let status = match sol.status {
        LpStatus::Optimal => SolveStatus::Optimal,
        LpStatus::Infeasible => SolveStatus::Infeasible,
        LpStatus::Unbounded => SolveStatus::UnboundedRelaxation,
        LpStatus::NumericalFailure | LpStatus::IterationLimit => SolveStatus::NumericalFailure,
    };
    let objective = if status == SolveStatus::Optimal {
        model.objective().value(&sol.x)
    } else {
        f64::NAN
    };
    SolveResult {
        status,
        objective,
        assignment: if status == SolveStatus::Optimal { sol.x } else { Vec::new() },
        node_count: 0,
        iterations: sol.iterations,
        best_bound: objective,
    }
}
