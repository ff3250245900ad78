use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::Serialize;

use super::fft::Convolver;
use super::mesh::{Mesh, NodeKind};
use super::stencil::{angular_bin, near_stencil, Basis};
use super::{ProblemData, SolveConfig, SolverOperator};
use crate::error::{invalid, Error, Result};
use crate::field::{Integrability, ScalarField};
use crate::quadrature::GaussRule;
use crate::Point;

/// One linear operator a row may realize: a nonnegative combination of basis kernels
/// plus its near-field stencil.
#[derive(Debug, Clone)]
pub(crate) struct RowOperator {
    pub coeffs: Vec<(usize, f64)>,
    pub near: Vec<([i64; 3], f64)>,
    pub near_sum: f64,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Control {
    Single,
    InfSup { ni: usize, nj: usize },
    Sup,
    Inf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub rows: usize,
    pub monotone_rows: usize,
    /// Smallest off-diagonal weight over every row operator.
    pub min_offdiagonal: f64,
    /// Largest `|sum of all weights + mass beyond the stencil| / |diagonal|`.
    pub constant_defect: f64,
}

/// Discrete operator on the core nodes of a mesh. Rows are `sum_b c_b (W_b * U)(i) +
/// near(U)(i)` where `U` holds the unknowns on core nodes and cell averages of the data
/// elsewhere; the control selects, row by row, which combination `c` is realized.
pub struct DiscreteOperator {
    pub(crate) mesh: Arc<Mesh>,
    pub(crate) s: f64,
    bases: Vec<Basis>,
    range: [usize; 3],
    stencils: Vec<Vec<f64>>,
    spectra: Vec<Vec<Complex<f64>>>,
    beyond: Vec<f64>,
    far_diag: Vec<f64>,
    pub(crate) operators: Vec<RowOperator>,
    pub(crate) control: Control,
    known: Vec<f64>,
    point_data: Vec<f64>,
    far_known: Vec<Vec<f64>>,
    pub(crate) rhs: Vec<f64>,
    pub(crate) policy: Vec<u32>,
    conv: Convolver,
}

fn data_value(mesh: &Mesh, data: &ProblemData, s: f64, y: &Point<f64>) -> f64 {
    let d = mesh.domain.signed_distance(y);
    if d > 0.0 {
        match mesh.domain.project(y) {
            Ok(p) => (data.h)(&p) * d.powf(s - 1.0),
            Err(_) => 0.0,
        }
    } else {
        data.g.as_ref().map_or(0.0, |g| g.value(y))
    }
}

fn cell_average(mesh: &Mesh, idx: usize, sub: usize, f: &(dyn Fn(&Point<f64>) -> f64 + Sync)) -> f64 {
    let dim = mesh.dim;
    let h = mesh.spacing;
    let c = mesh.point(idx);
    let count = sub.pow(dim as u32);
    let mut total = 0.0;
    for k in 0..count {
        let mut y = c;
        let mut rest = k;
        for a in 0..dim {
            let i = rest % sub;
            rest /= sub;
            y[a] += h * ((i as f64 + 0.5) / sub as f64 - 0.5);
        }
        total += f(&y);
    }
    total / count as f64
}

fn bases_for(op: &SolverOperator) -> Result<(Vec<Basis>, Vec<Vec<(usize, f64)>>, Vec<String>, Control)> {
    let s = op.order();
    match op {
        SolverOperator::Linear(k) => {
            let k2 = k.clone();
            let basis = Basis {
                dim: k.dim(),
                s,
                angular: Arc::new(move |q| k2.angular(q)),
                breaks: k.anisotropy().angle_breaks(),
            };
            Ok((vec![basis], vec![vec![(0, 1.0)]], vec!["kernel".into()], Control::Single))
        }
        SolverOperator::Isaacs(fam) => {
            let (ni, nj) = fam.shape();
            let mut bases = Vec::new();
            let mut ops = Vec::new();
            let mut labels = Vec::new();
            for (i, j, k) in fam.iter() {
                let k2 = k.clone();
                ops.push(vec![(bases.len(), 1.0)]);
                labels.push(format!("member ({i}, {j})"));
                bases.push(Basis {
                    dim: k.dim(),
                    s,
                    angular: Arc::new(move |q| k2.angular(q)),
                    breaks: k.anisotropy().angle_breaks(),
                });
            }
            Ok((bases, ops, labels, Control::InfSup { ni, nj }))
        }
        SolverOperator::PucciPlus { bounds, dim, .. } | SolverOperator::PucciMinus { bounds, dim, .. } => {
            let control = if matches!(op, SolverOperator::PucciPlus { .. }) { Control::Sup } else { Control::Inf };
            let (lo, hi) = (bounds.gamma, bounds.big_gamma);
            match dim {
                1 => {
                    let b = Basis {
                        dim: 1,
                        s,
                        angular: Arc::new(|_| 1.0),
                        breaks: vec![],
                    };
                    Ok((
                        vec![b],
                        vec![vec![(0, lo)], vec![(0, hi)]],
                        vec!["gamma".into(), "Gamma".into()],
                        control,
                    ))
                }
                2 => {
                    let edges: Vec<f64> = (0..=4).map(|k| k as f64 * PI / 4.0).collect();
                    let bases: Vec<Basis> = (0..4)
                        .map(|b| Basis {
                            dim: 2,
                            s,
                            angular: angular_bin(edges[b], edges[b + 1]),
                            breaks: edges.clone(),
                        })
                        .collect();
                    let mut ops = Vec::new();
                    let mut labels = Vec::new();
                    for mask in 0..16usize {
                        ops.push((0..4).map(|b| (b, if mask >> b & 1 == 1 { hi } else { lo })).collect());
                        labels.push(format!("bins {mask:04b}"));
                    }
                    Ok((bases, ops, labels, control))
                }
                _ => Err(invalid("dim", "extremal operators are discretized in dimensions 1 and 2 only")),
            }
        }
    }
}

fn growth_power(f: &dyn ScalarField<f64>) -> f64 {
    match f.integrability() {
        Integrability::Compact { .. } => 0.0,
        Integrability::Growth { power, .. } => power.max(0.0),
    }
}

/// `int_{x + z outside [lo, hi]} (g(x + z) - gbar) K(z) dz`.
fn exterior_tail(basis: &Basis, x: &Point<f64>, lo: [f64; 3], hi: [f64; 3], g: &dyn ScalarField<f64>, gbar: f64) -> f64 {
    let s2 = 2.0 * basis.s;
    let k = (1.0 / (s2 - growth_power(g)).max(1e-3)).min(16.0);
    let rule = GaussRule::get(16);
    let mut rl = [0.0; 3];
    let mut rh = [0.0; 3];
    for a in 0..basis.dim {
        rl[a] = lo[a] - x[a];
        rh[a] = hi[a] - x[a];
    }
    basis.box_sphere_integral(rl, rh, 12, |q, re| {
        let radial = rule.integrate(0.0, 1.0, |v: f64| {
            let r = re * v.powf(-k);
            (g.value(&x.along(q, r)) - gbar) * k * re.powf(-s2) * v.powf(s2 * k - 1.0)
        });
        (basis.angular)(q) * radial
    })
}

/// Assembles the discrete operator of `op` on `mesh` with the data of `data`.
pub fn assemble(op: &SolverOperator, mesh: &Arc<Mesh>, data: &ProblemData, cfg: &SolveConfig) -> Result<DiscreteOperator> {
    cfg.validate()?;
    if op.dim() != mesh.dim {
        return Err(invalid("operator", "operator dimension differs from the mesh"));
    }
    let s = op.order();
    let (bases, coeffs, labels, control) = bases_for(op)?;
    let dim = mesh.dim;
    let h = mesh.spacing;
    let m = cfg.near_cells as i64;
    let mut range = [0usize; 3];
    for k in 0..dim {
        range[k] = mesh.shape[k] - 1;
    }
    let offsets_len: usize = (0..dim).map(|k| 2 * range[k] + 1).product();
    let offset_of = |idx: usize| {
        let mut off = [0i64; 3];
        let mut rest = idx;
        for k in 0..dim {
            let w = 2 * range[k] + 1;
            off[k] = (rest % w) as i64 - range[k] as i64;
            rest /= w;
        }
        off
    };
    let mut stencils = Vec::new();
    let mut beyond = Vec::new();
    let mut far_diag = Vec::new();
    let mut moments = Vec::new();
    let mut half_beyond = [0.0; 3];
    for k in 0..dim {
        half_beyond[k] = (range[k] as f64 + 0.5) * h;
    }
    for b in &bases {
        let w: Vec<f64> = (0..offsets_len)
            .into_par_iter()
            .map(|idx| {
                let off = offset_of(idx);
                let inf = off[..dim].iter().map(|o| o.abs()).max().unwrap_or(0);
                if inf <= m {
                    0.0
                } else {
                    b.cell_weight(&off, h, inf <= m + 3)
                }
            })
            .collect();
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeWeight {
                row: 0,
                weight: *v,
                context: format!("far-field cell weight at offset {:?}", &offset_of(i)[..dim]),
            });
        }
        let r = b.mass_beyond(half_beyond);
        let total: f64 = w.iter().sum();
        far_diag.push(-(total + r));
        beyond.push(r);
        moments.push(b.near_moment((m as f64 + 0.5) * h));
        stencils.push(w);
    }
    let mut operators = Vec::new();
    for (o, (c, label)) in coeffs.into_iter().zip(labels).enumerate() {
        let mut mm = [[0.0; 3]; 3];
        for &(b, cb) in &c {
            for k in 0..3 {
                for l in 0..3 {
                    mm[k][l] += cb * moments[b][k][l];
                }
            }
        }
        let near = near_stencil(dim, &mm, h).map_err(|(weight, context)| Error::NegativeWeight {
            row: o,
            weight,
            context: format!("{context} of row operator {label}"),
        })?;
        let near_sum = near.iter().map(|e| e.1).sum();
        operators.push(RowOperator {
            coeffs: c,
            near,
            near_sum,
            label,
        });
    }
    let conv = Convolver::new(dim, mesh.shape);
    let spectra: Vec<Vec<Complex<f64>>> = stencils
        .iter()
        .zip(&far_diag)
        .map(|(w, d)| {
            conv.stencil_spectrum(|off| {
                if off[..dim].iter().all(|&o| o == 0) {
                    return *d;
                }
                let mut idx = 0usize;
                let mut stride = 1usize;
                for k in 0..dim {
                    idx += (off[k] + range[k] as i64) as usize * stride;
                    stride *= 2 * range[k] + 1;
                }
                w[idx]
            })
        })
        .collect();

    let near_boundary = 2.0 * h * (dim as f64).sqrt();
    let fine = match dim {
        1 => 64,
        2 => 12,
        _ => 6,
    };
    let value = |y: &Point<f64>| data_value(mesh, data, s, y);
    let (known, point_data): (Vec<f64>, Vec<f64>) = (0..mesh.len())
        .into_par_iter()
        .map(|idx| {
            if mesh.kinds[idx] == NodeKind::Core {
                return (0.0, 0.0);
            }
            let sd = mesh.signed_distance[idx];
            let p = mesh.point(idx);
            let pv = value(&p);
            if sd < -near_boundary && data.g.is_none() {
                return (0.0, 0.0);
            }
            let sub = if sd.abs() < near_boundary { fine } else { 3 };
            (cell_average(mesh, idx, sub, &value), pv)
        })
        .unzip();

    let spec_refs: Vec<&[Complex<f64>]> = spectra.iter().map(|v| v.as_slice()).collect();
    let conv_known = conv.apply(&known, &spec_refs);
    let mut far_known: Vec<Vec<f64>> = conv_known
        .into_iter()
        .map(|full| mesh.core.iter().map(|&i| full[i]).collect())
        .collect();
    if let Some(g) = &data.g {
        let (lo, hi) = mesh.cell_box();
        let gbar = box_face_mean(dim, lo, hi, g.as_ref());
        let ones: Vec<f64> = vec![1.0; mesh.len()];
        let inside = conv.apply(&ones, &spec_refs);
        for (b, basis) in bases.iter().enumerate() {
            let tails: Vec<f64> = mesh
                .core
                .par_iter()
                .map(|&i| {
                    let x = mesh.point(i);
                    -gbar * inside[b][i] + exterior_tail(basis, &x, lo, hi, g.as_ref(), gbar)
                })
                .collect();
            for (fk, t) in far_known[b].iter_mut().zip(tails) {
                *fk += t;
            }
        }
    }
    let rhs: Vec<f64> = match &data.f {
        Some(f) => mesh.core.par_iter().map(|&i| f.value(&mesh.point(i))).collect(),
        None => vec![0.0; mesh.core.len()],
    };
    let policy = vec![0u32; mesh.core.len()];
    Ok(DiscreteOperator {
        mesh: mesh.clone(),
        s,
        bases,
        range,
        stencils,
        spectra,
        beyond,
        far_diag,
        operators,
        control,
        known,
        point_data,
        far_known,
        rhs,
        policy,
        conv,
    })
}

impl DiscreteOperator {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_rows(&self) -> usize {
        self.mesh.core.len()
    }

    pub fn n_operators(&self) -> usize {
        self.operators.len()
    }

    /// Description of each row operator the control can select.
    pub fn operator_labels(&self) -> Vec<&str> {
        self.operators.iter().map(|o| o.label.as_str()).collect()
    }

    pub fn policy(&self) -> &[u32] {
        &self.policy
    }

    pub fn set_policy(&mut self, policy: Vec<u32>) -> Result<()> {
        if policy.len() != self.n_rows() || policy.iter().any(|&p| p as usize >= self.operators.len()) {
            return Err(invalid("policy", "wrong length or operator index out of range"));
        }
        self.policy = policy;
        Ok(())
    }

    /// Right-hand side `f` at the core nodes.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Point values of the prescribed data on non-core nodes (zero on core nodes).
    pub fn point_data(&self) -> &[f64] {
        &self.point_data
    }

    pub(crate) fn embed(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.len()];
        for (c, &i) in self.mesh.core.iter().enumerate() {
            full[i] = u[c];
        }
        full
    }

    fn far(&self, full: &[f64]) -> Vec<Vec<f64>> {
        let refs: Vec<&[Complex<f64>]> = self.spectra.iter().map(|v| v.as_slice()).collect();
        self.conv
            .apply(full, &refs)
            .into_iter()
            .map(|v| self.mesh.core.iter().map(|&i| v[i]).collect())
            .collect()
    }

    fn near_value(&self, o: usize, full: &[f64], lattice: usize) -> f64 {
        let op = &self.operators[o];
        let centre = full[lattice];
        op.near
            .iter()
            .map(|(off, w)| {
                let j = self.mesh.offset(lattice, off).expect("near neighbour inside the lattice");
                w * (full[j] - centre)
            })
            .sum()
    }

    /// Linear part `A u` under the current policy.
    pub fn apply_linear(&self, u: &[f64]) -> Vec<f64> {
        let full = self.embed(u);
        let fr = self.far(&full);
        (0..self.n_rows())
            .into_par_iter()
            .map(|c| {
                let o = self.policy[c] as usize;
                let far: f64 = self.operators[o].coeffs.iter().map(|&(b, cb)| cb * fr[b][c]).sum();
                far + self.near_value(o, &full, self.mesh.core[c])
            })
            .collect()
    }

    /// Contribution of the prescribed data under the current policy.
    pub fn affine(&self) -> Vec<f64> {
        (0..self.n_rows())
            .into_par_iter()
            .map(|c| {
                let o = self.policy[c] as usize;
                let far: f64 = self.operators[o].coeffs.iter().map(|&(b, cb)| cb * self.far_known[b][c]).sum();
                far + self.near_value(o, &self.known, self.mesh.core[c])
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows())
            .map(|c| {
                let op = &self.operators[self.policy[c] as usize];
                op.coeffs.iter().map(|&(b, cb)| cb * self.far_diag[b]).sum::<f64>() - op.near_sum
            })
            .collect()
    }

    /// Values of every row operator at every row for core values `u`.
    pub(crate) fn operator_values(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let mut full = self.embed(u);
        for (f, k) in full.iter_mut().zip(&self.known) {
            *f += k;
        }
        let fr = self.far(&self.embed(u));
        (0..self.n_rows())
            .into_par_iter()
            .map(|c| {
                let lat = self.mesh.core[c];
                self.operators
                    .iter()
                    .enumerate()
                    .map(|(o, op)| {
                        let far: f64 = op.coeffs.iter().map(|&(b, cb)| cb * (fr[b][c] + self.far_known[b][c])).sum();
                        far + self.near_value(o, &full, lat)
                    })
                    .collect()
            })
            .collect()
    }

    /// Row-wise choice realizing the control at the given operator values, lowest index
    /// on ties (values within `tie` of each other count as equal).
    pub(crate) fn select(&self, values: &[Vec<f64>], tie: f64) -> Vec<(u32, f64)> {
        values
            .par_iter()
            .map(|v| match self.control {
                Control::Single => (0, v[0]),
                Control::Sup => argbest(v.iter().copied().enumerate(), tie, true),
                Control::Inf => argbest(v.iter().copied().enumerate(), tie, false),
                Control::InfSup { ni, nj } => {
                    let inner: Vec<(u32, f64)> = (0..ni)
                        .map(|i| argbest((0..nj).map(|j| (i * nj + j, v[i * nj + j])), tie, true))
                        .collect();
                    let (k, val) = argbest(inner.iter().enumerate().map(|(i, (_, x))| (i, *x)), tie, false);
                    (inner[k as usize].0, val)
                }
            })
            .collect()
    }

    /// `I_h(u) - f` at the core nodes.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let vals = self.operator_values(u);
        self.select(&vals, 0.0)
            .into_iter()
            .zip(&self.rhs)
            .map(|((_, v), f)| v - f)
            .collect()
    }

    /// Row values under the current policy of a field sampled at every lattice node,
    /// with its contribution from outside the lattice box integrated directly.
    pub fn apply_field(&self, field: &dyn ScalarField<f64>) -> Vec<f64> {
        let full: Vec<f64> = (0..self.mesh.len()).into_par_iter().map(|i| field.value(&self.mesh.point(i))).collect();
        let (lo, hi) = self.mesh.cell_box();
        let gbar = box_face_mean(self.mesh.dim, lo, hi, field);
        let ones = vec![1.0; self.mesh.len()];
        let refs: Vec<&[Complex<f64>]> = self.spectra.iter().map(|v| v.as_slice()).collect();
        let gather = |v: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            v.into_iter().map(|v| self.mesh.core.iter().map(|&i| v[i]).collect()).collect()
        };
        let fr = gather(self.conv.apply(&full, &refs));
        let inside = gather(self.conv.apply(&ones, &refs));
        (0..self.n_rows())
            .into_par_iter()
            .map(|c| {
                let o = self.policy[c] as usize;
                let lat = self.mesh.core[c];
                let x = self.mesh.point(lat);
                let far: f64 = self.operators[o]
                    .coeffs
                    .iter()
                    .map(|&(b, cb)| {
                        let tail = -gbar * inside[b][c] + exterior_tail(&self.bases[b], &x, lo, hi, field, gbar);
                        cb * (fr[b][c] + tail)
                    })
                    .sum();
                far + self.near_value(o, &full, lat)
            })
            .collect()
    }

    /// Scans every row: the off-diagonal weights of its operator are the far-field cell
    /// weights combined with the near stencil.
    pub fn monotonicity(&self) -> MonotonicityReport {
        let dim = self.mesh.dim;
        let per_op: Vec<(f64, f64)> = self
            .operators
            .iter()
            .map(|op| {
                let mut combined = vec![0.0; self.stencils[0].len()];
                for &(b, cb) in &op.coeffs {
                    for (c, w) in combined.iter_mut().zip(&self.stencils[b]) {
                        *c += cb * w;
                    }
                }
                for (off, w) in &op.near {
                    let mut idx = 0usize;
                    let mut stride = 1usize;
                    for k in 0..dim {
                        idx += (off[k] + self.range[k] as i64) as usize * stride;
                        stride *= 2 * self.range[k] + 1;
                    }
                    combined[idx] += w;
                }
                let mut centre = 0usize;
                let mut stride = 1usize;
                for k in 0..dim {
                    centre += self.range[k] * stride;
                    stride *= 2 * self.range[k] + 1;
                }
                let min = combined
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != centre)
                    .map(|(_, w)| *w)
                    .fold(f64::INFINITY, f64::min);
                let diag: f64 = op.coeffs.iter().map(|&(b, cb)| cb * self.far_diag[b]).sum::<f64>() - op.near_sum;
                let beyond: f64 = op.coeffs.iter().map(|&(b, cb)| cb * self.beyond[b]).sum();
                let off_sum: f64 = combined.iter().sum();
                (min, (off_sum + diag + beyond).abs() / diag.abs())
            })
            .collect();
        let monotone_rows = self.policy.iter().filter(|&&p| per_op[p as usize].0 >= 0.0).count();
        MonotonicityReport {
            rows: self.n_rows(),
            monotone_rows,
            min_offdiagonal: per_op.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            constant_defect: per_op.iter().map(|p| p.1).fold(0.0, f64::max),
        }
    }
}

/// Mean of the field over the centres of the faces of the box.
fn box_face_mean(dim: usize, lo: [f64; 3], hi: [f64; 3], f: &dyn ScalarField<f64>) -> f64 {
    let mut total = 0.0;
    for k in 0..dim {
        for side in [lo[k], hi[k]] {
            let mut c = Point::zero();
            for a in 0..dim {
                c[a] = 0.5 * (lo[a] + hi[a]);
            }
            c[k] = side;
            total += f.value(&c);
        }
    }
    total / (2 * dim) as f64
}

fn argbest<I: Iterator<Item = (usize, f64)>>(it: I, tie: f64, max: bool) -> (u32, f64) {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in it {
        best = match best {
            None => Some((k, v)),
            Some((bk, bv)) => {
                let better = if max { v > bv + tie } else { v < bv - tie };
                if better {
                    Some((k, v))
                } else {
                    Some((bk, bv))
                }
            }
        };
    }
    let (k, v) = best.expect("nonempty control set");
    (k as u32, v)
}
