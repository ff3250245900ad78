use serde::Serialize;

use super::SolveConfig;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Domain, Shape};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// `d >= delta`: carries an unknown.
    Core,
    /// `0 < d < delta`: prescribed blow-up profile.
    Layer,
    /// Outside the domain: exterior data.
    Exterior,
}

/// Uniform lattice on a box around a bounded domain, with every node classified.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub(crate) domain: Domain<f64>,
    pub(crate) dim: usize,
    pub(crate) spacing: f64,
    pub(crate) delta: f64,
    pub(crate) origin: [f64; 3],
    pub(crate) shape: [usize; 3],
    pub(crate) kinds: Vec<NodeKind>,
    pub(crate) signed_distance: Vec<f64>,
    /// Lattice index of each core node.
    pub(crate) core: Vec<usize>,
    /// Core number of each lattice node.
    pub(crate) core_of: Vec<Option<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshSummary {
    pub spacing: f64,
    pub delta: f64,
    pub lattice: [usize; 3],
    pub core_nodes: usize,
    pub layer_nodes: usize,
    pub exterior_nodes: usize,
}

/// Lattice centred on the domain centre with spacing `cfg.spacing` (default `delta / 4`).
pub fn build_mesh(dom: &Domain<f64>, cfg: &SolveConfig) -> Result<Mesh> {
    cfg.validate()?;
    let center = match dom.shape() {
        Shape::Ball { center, .. } | Shape::Superellipse { center, .. } => *center,
        Shape::HalfSpace { .. } => return Err(invalid("domain", "the solver needs a bounded domain")),
    };
    let delta = cfg.delta;
    if delta >= 0.5 * dom.inradius() {
        return Err(Error::Domain(format!(
            "layer width {delta} is not below half the inradius {}",
            0.5 * dom.inradius()
        )));
    }
    let h = cfg.spacing_or_default();
    let dim = dom.dim();
    let (lo, hi) = dom.bounding_box();
    let margin = (cfg.near_cells as f64 + 3.0) * h;
    let mut origin = [0.0; 3];
    let mut shape = [1usize; 3];
    for k in 0..dim {
        let half = (center[k] - lo[k]).max(hi[k] - center[k]) + margin;
        let m = (half / h).ceil() as usize;
        origin[k] = center[k] - m as f64 * h;
        shape[k] = 2 * m + 1;
    }
    let total: usize = shape.iter().product();
    if total > 60_000_000 {
        return Err(invalid("spacing", format!("lattice with {total} nodes is too large")));
    }
    let mut kinds = Vec::with_capacity(total);
    let mut sd = Vec::with_capacity(total);
    let mut core = Vec::new();
    let mut core_of = Vec::with_capacity(total);
    for idx in 0..total {
        let x = node_point(dim, &origin, &shape, h, idx);
        let d = dom.signed_distance(&x);
        let kind = if d >= delta {
            NodeKind::Core
        } else if d > 0.0 {
            NodeKind::Layer
        } else {
            NodeKind::Exterior
        };
        if kind == NodeKind::Core {
            core_of.push(Some(core.len() as u32));
            core.push(idx);
        } else {
            core_of.push(None);
        }
        kinds.push(kind);
        sd.push(d);
    }
    if core.is_empty() {
        return Err(invalid("spacing", "no lattice node lies in the core region"));
    }
    Ok(Mesh {
        domain: dom.clone(),
        dim,
        spacing: h,
        delta,
        origin,
        shape,
        kinds,
        signed_distance: sd,
        core,
        core_of,
    })
}

pub(crate) fn node_point(dim: usize, origin: &[f64; 3], shape: &[usize; 3], h: f64, idx: usize) -> Point<f64> {
    let mut p = Point::zero();
    let mut rest = idx;
    for k in 0..dim {
        let i = rest % shape[k];
        rest /= shape[k];
        p[k] = origin[k] + i as f64 * h;
    }
    p
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn domain(&self) -> &Domain<f64> {
        &self.domain
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    pub fn point(&self, idx: usize) -> Point<f64> {
        node_point(self.dim, &self.origin, &self.shape, self.spacing, idx)
    }

    pub fn core_nodes(&self) -> &[usize] {
        &self.core
    }

    pub fn core_points(&self) -> Vec<Point<f64>> {
        self.core.iter().map(|&i| self.point(i)).collect()
    }

    pub fn core_index(&self, idx: usize) -> Option<usize> {
        self.core_of[idx].map(|c| c as usize)
    }

    /// Distance to the boundary (zero outside).
    pub fn distance(&self, idx: usize) -> f64 {
        self.signed_distance[idx].max(0.0)
    }

    pub(crate) fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = idx;
        for k in 0..self.dim {
            out[k] = rest % self.shape[k];
            rest /= self.shape[k];
        }
        out
    }

    /// Lattice index of `base + offset`, if inside the lattice.
    pub(crate) fn offset(&self, idx: usize, off: &[i64; 3]) -> Option<usize> {
        let m = self.multi_index(idx);
        let mut out = 0usize;
        let mut stride = 1usize;
        for k in 0..self.dim {
            let v = m[k] as i64 + off[k];
            if v < 0 || v >= self.shape[k] as i64 {
                return None;
            }
            out += v as usize * stride;
            stride *= self.shape[k];
        }
        Some(out)
    }

    /// Box `[lo, hi]` covered by the cells of the lattice.
    pub(crate) fn cell_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..self.dim {
            lo[k] = self.origin[k] - 0.5 * self.spacing;
            hi[k] = self.origin[k] + (self.shape[k] as f64 - 0.5) * self.spacing;
        }
        (lo, hi)
    }

    pub fn summary(&self) -> MeshSummary {
        let count = |k: NodeKind| self.kinds.iter().filter(|&&x| x == k).count();
        MeshSummary {
            spacing: self.spacing,
            delta: self.delta,
            lattice: self.shape,
            core_nodes: self.core.len(),
            layer_nodes: count(NodeKind::Layer),
            exterior_nodes: count(NodeKind::Exterior),
        }
    }
}
