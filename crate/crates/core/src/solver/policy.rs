use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::assemble::MonotonicityReport;
use super::linear::thin;
use super::mesh::MeshSummary;
use super::{assemble, build_mesh, solve_linear, DiscreteOperator, Mesh, ProblemData, SolveConfig, SolverOperator};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernels::KernelFamily;
use crate::Point;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub operator: String,
    pub mesh: MeshSummary,
    pub policy_iterations: usize,
    /// Rows whose control changed after each linear solve.
    pub policy_changes: Vec<usize>,
    pub linear_iterations: Vec<usize>,
    /// Relative discrete residual after each linear solve.
    pub residual_history: Vec<f64>,
    pub max_residual: f64,
    pub monotonicity: MonotonicityReport,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

/// Discrete solution with its prescribed layer and exterior data.
#[derive(Clone)]
pub struct Solution {
    mesh: Arc<Mesh>,
    s: f64,
    core: Vec<f64>,
    lattice: Vec<f64>,
    data: ProblemData,
}

fn keys(t: f64) -> [f64; 4] {
    let a = -0.5;
    let w = |x: f64| {
        let x = x.abs();
        if x <= 1.0 {
            (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
        } else if x < 2.0 {
            a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
        } else {
            0.0
        }
    };
    [w(1.0 + t), w(t), w(1.0 - t), w(2.0 - t)]
}

impl Solution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    /// Values at the core nodes, in the order of [`Mesh::core_nodes`].
    pub fn core_values(&self) -> &[f64] {
        &self.core
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    /// Exterior data outside the domain, the prescribed profile `h(proj x) d^{s-1}` in the
    /// layer, cubic interpolation of the nodal values in the core.
    pub fn value_at(&self, x: &Point<f64>) -> f64 {
        let dom = &self.mesh.domain;
        let d = dom.signed_distance(x);
        if d <= 0.0 {
            return self.data.g.as_ref().map_or(0.0, |g| g.value(x));
        }
        if d < self.mesh.delta {
            return dom.project(x).map_or(0.0, |p| (self.data.h)(&p) * d.powf(self.s - 1.0));
        }
        let m = &self.mesh;
        let dim = m.dim;
        let mut base = [0i64; 3];
        let mut w = [[0.0; 4]; 3];
        for k in 0..dim {
            let t = (x[k] - m.origin[k]) / m.spacing;
            let i = t.floor();
            base[k] = i as i64;
            w[k] = keys(t - i);
        }
        let count = 4usize.pow(dim as u32);
        let mut total = 0.0;
        for c in 0..count {
            let mut rest = c;
            let mut idx = 0usize;
            let mut stride = 1usize;
            let mut weight = 1.0;
            for k in 0..dim {
                let o = rest % 4;
                rest /= 4;
                let i = (base[k] + o as i64 - 1).clamp(0, m.shape[k] as i64 - 1) as usize;
                idx += i * stride;
                stride *= m.shape[k];
                weight *= w[k][o];
            }
            total += weight * self.lattice[idx];
        }
        total
    }

    /// `(x, d(x), u, d^{1-s} u)` for every core node.
    pub fn node_rows(&self) -> Vec<(Point<f64>, f64, f64, f64)> {
        self.mesh
            .core
            .iter()
            .zip(&self.core)
            .map(|(&i, &u)| {
                let d = self.mesh.distance(i);
                (self.mesh.point(i), d, u, d.powf(1.0 - self.s) * u)
            })
            .collect()
    }
}

/// Policy iteration on an assembled operator.
pub(crate) fn run_policy(opr: &mut DiscreteOperator, data: &ProblemData, cfg: &SolveConfig, initial: Option<&[f64]>) -> Result<(Solution, SolveReport)> {
    let start = Instant::now();
    let n = opr.n_rows();
    let mut u: Vec<f64> = match initial {
        Some(v) if v.len() == n => v.to_vec(),
        Some(_) => return Err(crate::error::invalid("initial", "initial guess length differs from the core node count")),
        None => vec![0.0; n],
    };
    let vals = opr.operator_values(&u);
    let sel = opr.select(&vals, 0.0);
    opr.set_policy(sel.iter().map(|s| s.0).collect())?;
    let affine0 = opr.affine();
    let scale = 1.0
        + opr
            .rhs
            .iter()
            .zip(&affine0)
            .map(|(f, a)| (f - a).abs())
            .fold(0.0, f64::max);
    let tie = 1e-11 * scale;
    let vals = opr.operator_values(&u);
    let mut policy: Vec<u32> = opr.select(&vals, tie).into_iter().map(|s| s.0).collect();
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut history = Vec::new();
    let mut changes = Vec::new();
    let mut lin_its = Vec::new();
    for it in 1..=cfg.max_policy_iterations {
        opr.set_policy(policy.clone())?;
        seen.insert(policy.clone());
        let affine = opr.affine();
        let b: Vec<f64> = opr.rhs.iter().zip(&affine).map(|(f, a)| f - a).collect();
        let lin = solve_linear(opr, &b, Some(&u), cfg)?;
        lin_its.push(lin.iterations);
        u = lin.values;
        let vals = opr.operator_values(&u);
        let sel = opr.select(&vals, tie);
        let res = sel
            .iter()
            .zip(&opr.rhs)
            .map(|((_, v), f)| (v - f).abs())
            .fold(0.0, f64::max)
            / scale;
        history.push(res);
        let new_policy: Vec<u32> = sel.into_iter().map(|s| s.0).collect();
        let changed = new_policy.iter().zip(&policy).filter(|(a, b)| a != b).count();
        changes.push(changed);
        if changed == 0 {
            if res > cfg.tolerance {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: res,
                    history: thin(&history, 200),
                });
            }
            let mesh = opr.mesh.clone();
            let mut lattice = opr.point_data().to_vec();
            for (c, &i) in mesh.core.iter().enumerate() {
                lattice[i] = u[c];
            }
            let report = SolveReport {
                operator: String::new(),
                mesh: mesh.summary(),
                policy_iterations: it,
                policy_changes: changes,
                linear_iterations: lin_its,
                residual_history: history,
                max_residual: res,
                monotonicity: opr.monotonicity(),
                wall_clock_seconds: start.elapsed().as_secs_f64(),
            };
            let sol = Solution {
                mesh,
                s: opr.s,
                core: u,
                lattice,
                data: data.clone(),
            };
            return Ok((sol, report));
        }
        if seen.contains(&new_policy) {
            return Err(Error::PolicyCycling {
                iterations: it,
                history: thin(&history, 200),
            });
        }
        policy = new_policy;
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_policy_iterations,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history: thin(&history, 200),
    })
}

/// Builds the mesh, assembles and solves `I u = f` with the layer and exterior data.
pub fn solve(op: &SolverOperator, dom: &Domain<f64>, data: &ProblemData, cfg: &SolveConfig) -> Result<(Solution, SolveReport)> {
    solve_with_initial(op, dom, data, cfg, None)
}

pub fn solve_with_initial(
    op: &SolverOperator,
    dom: &Domain<f64>,
    data: &ProblemData,
    cfg: &SolveConfig,
    initial: Option<&[f64]>,
) -> Result<(Solution, SolveReport)> {
    let mesh = Arc::new(build_mesh(dom, cfg)?);
    let mut opr = assemble(op, &mesh, data, cfg)?;
    let (sol, mut rep) = run_policy(&mut opr, data, cfg, initial)?;
    rep.operator = op.label().into();
    Ok((sol, rep))
}

/// Policy iteration for `inf_i sup_j L_ij u = f` on a given mesh.
pub fn solve_isaacs(fam: &KernelFamily<f64>, mesh: &Arc<Mesh>, data: &ProblemData, cfg: &SolveConfig) -> Result<(Solution, SolveReport)> {
    let op = SolverOperator::Isaacs(fam.clone());
    let mut opr = assemble(&op, mesh, data, cfg)?;
    let (sol, mut rep) = run_policy(&mut opr, data, cfg, None)?;
    rep.operator = op.label().into();
    Ok((sol, rep))
}
