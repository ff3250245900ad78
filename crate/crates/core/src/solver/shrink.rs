use serde::Serialize;

use super::{solve, ProblemData, SolveConfig, SolverOperator};
use crate::error::{invalid, Result};
use crate::geometry::Domain;
use crate::Point;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub spacing: f64,
    pub core_nodes: usize,
    pub probe_values: Vec<f64>,
    /// Largest change of a probe value with respect to the previous row.
    pub difference: Option<f64>,
    /// Largest relative deviation from the reference, when one is given.
    pub reference_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub probes: Vec<Vec<f64>>,
    pub rows: Vec<ConvergenceRow>,
    /// Ratios of consecutive differences.
    pub contraction: Vec<f64>,
}

/// Solves on the inner domains `d >= delta_k` for a decreasing sequence of layer widths,
/// refining the lattice with `delta` (fixed ratio `spacing / delta`), and tabulates the
/// solutions on a fixed probe set.
pub fn shrink_and_refine(
    op: &SolverOperator,
    dom: &Domain<f64>,
    data: &ProblemData,
    deltas: &[f64],
    cfg: &SolveConfig,
    probes: &[Point<f64>],
    reference: Option<&(dyn Fn(&Point<f64>) -> f64 + Sync)>,
) -> Result<ConvergenceTable> {
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("deltas", "layer widths must decrease"));
    }
    let dmax = deltas.first().copied().unwrap_or(0.0);
    if probes.iter().any(|p| dom.signed_distance(p) < dmax) {
        return Err(invalid("probes", "probe points must lie in the core of the widest layer"));
    }
    let ratio = cfg.spacing.map_or(0.25, |h| h / cfg.delta);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &delta in deltas {
        let c = SolveConfig {
            delta,
            spacing: Some(ratio * delta),
            ..cfg.clone()
        };
        let (sol, rep) = solve(op, dom, data, &c)?;
        let values: Vec<f64> = probes.iter().map(|p| sol.value_at(p)).collect();
        let difference = rows.last().map(|prev| {
            prev.probe_values
                .iter()
                .zip(&values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        let reference_error = reference.map(|r| {
            probes
                .iter()
                .zip(&values)
                .map(|(p, v)| {
                    let e = r(p);
                    (v - e).abs() / e.abs().max(1e-300)
                })
                .fold(0.0, f64::max)
        });
        rows.push(ConvergenceRow {
            delta,
            spacing: c.spacing_or_default(),
            core_nodes: rep.mesh.core_nodes,
            probe_values: values,
            difference,
            reference_error,
        });
    }
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.difference).collect();
    let contraction = diffs.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(ConvergenceTable {
        probes: probes.iter().map(|p| p.to_f64(dom.dim())).collect(),
        rows,
        contraction,
    })
}
