//! Monotone discretization of the Dirichlet problem for large solutions: a uniform
//! lattice, the blow-up profile prescribed on the layer `0 < d < delta`, exterior data
//! outside, and linear solves or policy iteration on the core nodes `d >= delta`.

mod assemble;
mod fft;
mod linear;
mod mesh;
mod policy;
mod shrink;
mod stencil;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::barriers::BoundaryFn;
use crate::error::{invalid, Result};
use crate::field::FieldRef;
use crate::kernels::{EllipticityBounds, Kernel, KernelFamily};
use crate::Point;

pub use assemble::{assemble, DiscreteOperator, MonotonicityReport};
pub use linear::{solve_linear, LinearSolve};
pub use mesh::{build_mesh, Mesh, MeshSummary, NodeKind};
pub use policy::{solve, solve_isaacs, solve_with_initial, Solution, SolveReport};
pub use shrink::{shrink_and_refine, ConvergenceRow, ConvergenceTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    /// Layer width.
    pub delta: f64,
    /// Lattice spacing; `delta / 4` when absent.
    pub spacing: Option<f64>,
    /// Half-width, in cells, of the cube handled by the second-moment stencil.
    pub near_cells: usize,
    pub max_policy_iterations: usize,
    /// Bound on the relative discrete residual of the nonlinear equation.
    pub tolerance: f64,
    /// Relative residual of each linear solve.
    pub linear_tolerance: f64,
    pub max_linear_iterations: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            delta: 0.05,
            spacing: None,
            near_cells: 1,
            max_policy_iterations: 50,
            tolerance: 1e-8,
            linear_tolerance: 1e-11,
            max_linear_iterations: 3000,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", "must be positive"));
        }
        if let Some(h) = self.spacing {
            if !(h > 0.0 && h <= self.delta) {
                return Err(invalid("spacing", "must be positive and at most delta"));
            }
        }
        if !(self.tolerance > 0.0) || !(self.linear_tolerance > 0.0) {
            return Err(invalid("tolerance", "tolerances must be positive"));
        }
        if self.max_policy_iterations == 0 || self.max_linear_iterations == 0 {
            return Err(invalid("max_policy_iterations", "iteration budgets must be positive"));
        }
        if self.near_cells == 0 {
            return Err(invalid("near_cells", "must be at least 1"));
        }
        Ok(())
    }

    pub fn spacing_or_default(&self) -> f64 {
        self.spacing.unwrap_or(0.25 * self.delta)
    }
}

/// The operator `I` of the equation `I u = f`.
#[derive(Debug, Clone)]
pub enum SolverOperator {
    Linear(Kernel<f64>),
    /// `inf_i sup_j L_ij`.
    Isaacs(KernelFamily<f64>),
    /// Extremal operators over kernels whose angular part takes the values `gamma` or
    /// `Gamma` on each of four angular bins (dimension two; one bin in dimension one).
    PucciPlus { bounds: EllipticityBounds<f64>, order: f64, dim: usize },
    PucciMinus { bounds: EllipticityBounds<f64>, order: f64, dim: usize },
}

impl SolverOperator {
    pub fn order(&self) -> f64 {
        match self {
            SolverOperator::Linear(k) => k.order(),
            SolverOperator::Isaacs(f) => f.order(),
            SolverOperator::PucciPlus { order, .. } | SolverOperator::PucciMinus { order, .. } => *order,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SolverOperator::Linear(k) => k.dim(),
            SolverOperator::Isaacs(f) => f.dim(),
            SolverOperator::PucciPlus { dim, .. } | SolverOperator::PucciMinus { dim, .. } => *dim,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SolverOperator::Linear(_) => "linear",
            SolverOperator::Isaacs(_) => "isaacs",
            SolverOperator::PucciPlus { .. } => "pucci_plus",
            SolverOperator::PucciMinus { .. } => "pucci_minus",
        }
    }
}

/// Boundary trace `h`, right-hand side `f` and exterior data `g` (zero when absent).
#[derive(Clone)]
pub struct ProblemData {
    pub h: BoundaryFn<f64>,
    pub f: Option<FieldRef<f64>>,
    pub g: Option<FieldRef<f64>>,
}

impl ProblemData {
    pub fn new(h: BoundaryFn<f64>) -> Self {
        ProblemData { h, f: None, g: None }
    }

    pub fn constant_trace(value: f64) -> Self {
        Self::new(Arc::new(move |_: &Point<f64>| value))
    }

    pub fn with_f(mut self, f: FieldRef<f64>) -> Self {
        self.f = Some(f);
        self
    }

    pub fn with_g(mut self, g: FieldRef<f64>) -> Self {
        self.g = Some(g);
        self
    }
}
