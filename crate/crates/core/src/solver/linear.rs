use rayon::prelude::*;
use serde::Serialize;

use super::{DiscreteOperator, SolveConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSolve {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Relative residual norms, one per iteration.
    pub residual_history: Vec<f64>,
}

/// Chunk sums in parallel, combined in a fixed order so the result does not depend on
/// the thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    parts.iter().sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A u = rhs` for the current policy of `opr` with Jacobi-preconditioned
/// BiCGStab, starting from `initial` (zero when absent).
pub fn solve_linear(opr: &DiscreteOperator, rhs: &[f64], initial: Option<&[f64]>, cfg: &SolveConfig) -> Result<LinearSolve> {
    let n = opr.n_rows();
    let diag = opr.diagonal();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&diag).map(|(x, d)| x / d).collect() };
    let mut x: Vec<f64> = initial.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm(rhs);
    if bnorm == 0.0 && initial.is_none() {
        return Ok(LinearSolve {
            values: x,
            iterations: 0,
            residual_history: vec![0.0],
        });
    }
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let ax = opr.apply_linear(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let r0 = r.clone();
    let mut history = vec![norm(&r) / scale];
    if history[0] <= cfg.linear_tolerance {
        return Ok(LinearSolve {
            values: x,
            iterations: 0,
            residual_history: history,
        });
    }
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 1..=cfg.max_linear_iterations {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = precond(&p);
        v = opr.apply_linear(&ph);
        let denom = dot(&r0, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) / scale <= cfg.linear_tolerance {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            history.push(norm(&s) / scale);
            return Ok(LinearSolve {
                values: x,
                iterations: it,
                residual_history: history,
            });
        }
        let sh = precond(&s);
        let t = opr.apply_linear(&sh);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        let res = norm(&r) / scale;
        history.push(res);
        if res <= cfg.linear_tolerance {
            return Ok(LinearSolve {
                values: x,
                iterations: it,
                residual_history: history,
            });
        }
    }
    let residual = *history.last().unwrap_or(&f64::NAN);
    Err(Error::NoConvergence {
        iterations: history.len() - 1,
        residual,
        history: thin(&history, 200),
    })
}

pub(crate) fn thin(h: &[f64], max: usize) -> Vec<f64> {
    if h.len() <= max {
        return h.to_vec();
    }
    let step = h.len().div_ceil(max);
    h.iter().step_by(step).copied().chain(h.last().copied()).collect()
}
