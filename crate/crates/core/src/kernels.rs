//! Homogeneous jump kernels `a(z/|z|) / |z|^{N+2s}`, ellipticity bounds and kernel families.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::sample_directions;
use crate::special::gamma;
use crate::{Point, Real};

/// Angular profile of a kernel. Every variant is even in the direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anisotropy<T> {
    Constant { value: T },
    /// Planar profile, piecewise constant in the angle modulo pi. `breaks` starts at 0 and
    /// is increasing inside `[0, pi)`; sector `k` spans `breaks[k]..breaks[k+1]` (the last
    /// one wraps to pi).
    Sectors { breaks: Vec<T>, values: Vec<T> },
    /// Piecewise constant in `|q_N|`, with `edges` increasing from 0 to 1.
    Zonal { edges: Vec<T>, values: Vec<T> },
    /// `sum_k coeffs[k] * q_N^(2k)`.
    ZonalPoly { coeffs: Vec<T> },
    /// Nearest-direction lookup in a symmetrized table.
    Table { dirs: Vec<Point<T>>, values: Vec<T> },
}

impl<T: Real> Anisotropy<T> {
    pub fn constant(value: T) -> Self {
        Anisotropy::Constant { value }
    }

    /// Planar sectors given over the full circle. Rejects profiles that are not even.
    pub fn sectors_full_circle(breaks: &[T], values: &[T]) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(invalid("anisotropy", "sector breaks and values must have equal nonzero length"));
        }
        let tau = T::lit(2.0 * PI);
        if breaks[0] != T::zero() || breaks.windows(2).any(|w| w[1] <= w[0]) || breaks[breaks.len() - 1] >= tau {
            return Err(invalid("anisotropy", "sector breaks must increase from 0 inside [0, 2pi)"));
        }
        let full = |th: T| {
            let th = th.wrap(tau);
            let k = breaks.iter().rposition(|&b| b <= th).unwrap_or(0);
            values[k]
        };
        let n = 720;
        for k in 0..n {
            let th = T::lit(PI * (k as f64 + 0.37) / n as f64);
            let (a, b) = (full(th), full(th + T::PI()));
            if (a - b).abs() > T::epsilon() * (T::one() + a.abs()) * T::lit(16.0) {
                return Err(invalid(
                    "anisotropy",
                    format!("profile is not even: a({th}) = {a} but a({th} + pi) = {b}"),
                ));
            }
        }
        let mut hb: Vec<T> = breaks.iter().copied().filter(|&b| b < T::PI()).collect();
        let mut hv: Vec<T> = hb.iter().map(|&b| full(b)).collect();
        let mut k = 0;
        while k + 1 < hv.len() {
            if hv[k] == hv[k + 1] {
                hb.remove(k + 1);
                hv.remove(k + 1);
            } else {
                k += 1;
            }
        }
        Self::sectors(hb, hv)
    }

    /// Planar sectors given over `[0, pi)`.
    pub fn sectors(breaks: Vec<T>, values: Vec<T>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(invalid("anisotropy", "sector breaks and values must have equal nonzero length"));
        }
        if breaks[0] != T::zero() || breaks.windows(2).any(|w| w[1] <= w[0]) || breaks[breaks.len() - 1] >= T::PI() {
            return Err(invalid("anisotropy", "sector breaks must increase from 0 inside [0, pi)"));
        }
        Ok(Anisotropy::Sectors { breaks, values })
    }

    pub fn zonal(edges: Vec<T>, values: Vec<T>) -> Result<Self> {
        if edges.len() != values.len() + 1 || values.is_empty() {
            return Err(invalid("anisotropy", "zonal edges must have one more entry than values"));
        }
        if edges[0] != T::zero() || edges[edges.len() - 1] != T::one() || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("anisotropy", "zonal edges must increase from 0 to 1"));
        }
        Ok(Anisotropy::Zonal { edges, values })
    }

    /// Table of sampled directions. Antipodal duplicates are averaged so the lookup is even.
    pub fn table(dirs: Vec<Point<T>>, values: Vec<T>) -> Result<Self> {
        if dirs.is_empty() || dirs.len() != values.len() {
            return Err(invalid("anisotropy", "table needs matching nonempty directions and values"));
        }
        let dirs: Vec<Point<T>> = dirs
            .iter()
            .map(|d| d.normalized().ok_or_else(|| invalid("anisotropy", "zero direction in table")))
            .collect::<Result<_>>()?;
        let tol = T::lit(1e-9);
        let mut out_d: Vec<Point<T>> = Vec::new();
        let mut out_v: Vec<(T, usize)> = Vec::new();
        for (d, v) in dirs.iter().zip(&values) {
            match out_d.iter().position(|e| (e.dot(d).abs() - T::one()).abs() < tol) {
                Some(k) => {
                    out_v[k].0 += *v;
                    out_v[k].1 += 1;
                }
                None => {
                    out_d.push(*d);
                    out_v.push((*v, 1));
                }
            }
        }
        let values = out_v
            .into_iter()
            .map(|(s, c)| s / T::from_usize_lossy(c))
            .collect();
        Ok(Anisotropy::Table { dirs: out_d, values })
    }

    /// Value at a unit direction `q` in dimension `dim`.
    pub fn value(&self, q: &Point<T>, dim: usize) -> T {
        match self {
            Anisotropy::Constant { value } => *value,
            Anisotropy::Sectors { breaks, values } => {
                let th = q[1].atan2(q[0]).wrap(T::PI());
                let k = breaks.iter().rposition(|&b| b <= th).unwrap_or(0);
                values[k]
            }
            Anisotropy::Zonal { edges, values } => {
                let c = q[dim - 1].abs().min(T::one());
                let k = edges[1..].iter().position(|&e| c < e).unwrap_or(values.len() - 1);
                values[k]
            }
            Anisotropy::ZonalPoly { coeffs } => {
                let c2 = q[dim - 1] * q[dim - 1];
                coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * c2 + c)
            }
            Anisotropy::Table { dirs, values } => {
                let mut best = 0;
                let mut best_dot = -T::one();
                for (k, d) in dirs.iter().enumerate() {
                    let c = d.dot(q).abs();
                    if c > best_dot {
                        best_dot = c;
                        best = k;
                    }
                }
                values[best]
            }
        }
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let sc = |v: &[T]| v.iter().map(|&x| x * c).collect::<Vec<_>>();
        match self {
            Anisotropy::Constant { value } => Anisotropy::Constant { value: *value * c },
            Anisotropy::Sectors { breaks, values } => Anisotropy::Sectors {
                breaks: breaks.clone(),
                values: sc(values),
            },
            Anisotropy::Zonal { edges, values } => Anisotropy::Zonal {
                edges: edges.clone(),
                values: sc(values),
            },
            Anisotropy::ZonalPoly { coeffs } => Anisotropy::ZonalPoly { coeffs: sc(coeffs) },
            Anisotropy::Table { dirs, values } => Anisotropy::Table {
                dirs: dirs.clone(),
                values: sc(values),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Anisotropy::Constant { .. })
    }

    /// Planar break angles (absolute, in `[0, pi)`).
    pub fn angle_breaks(&self) -> Vec<f64> {
        match self {
            Anisotropy::Sectors { breaks, .. } if breaks.len() > 1 => breaks.iter().map(|b| b.as_f64()).collect(),
            _ => Vec::new(),
        }
    }

    /// Break values of `|q_N|`.
    pub fn zonal_breaks(&self) -> Vec<f64> {
        match self {
            Anisotropy::Zonal { edges, .. } => edges.iter().map(|e| e.as_f64()).collect(),
            _ => Vec::new(),
        }
    }

    fn check_dimension(&self, dim: usize) -> Result<()> {
        match self {
            Anisotropy::Sectors { .. } if dim != 2 => Err(invalid("anisotropy", "sector profiles need dimension 2")),
            Anisotropy::Table { dirs, .. } if dirs.iter().any(|d| d.0[dim..].iter().any(|c| *c != T::zero())) => {
                Err(invalid("anisotropy", "table direction has more coordinates than the dimension"))
            }
            _ => Ok(()),
        }
    }
}

/// `C_{N,s}`: the constant making the symbol of the normalized operator `-|xi|^{2s}`.
pub fn normalizing_constant(dim: usize, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("order s = {s} is outside (0, 1)")));
    }
    if dim == 0 {
        return Err(invalid("dim", "dimension must be at least 1"));
    }
    let h = dim as f64 / 2.0;
    Ok(s * 4f64.powf(s) * gamma(h + s) / (PI.powf(h) * gamma(1.0 - s)))
}

/// `K(z) = a(z/|z|) |z|^{-(N+2s)}`, optionally times `C_{N,s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Kernel<T> {
    dim: usize,
    order: T,
    anisotropy: Anisotropy<T>,
    normalized: bool,
    #[serde(skip)]
    normalizer: T,
}

impl<T: Real> Kernel<T> {
    pub fn new(dim: usize, order: T, anisotropy: Anisotropy<T>, normalized: bool) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid("dim", format!("dimension {dim} is not in 1..=3")));
        }
        let c = normalizing_constant(dim, order.as_f64())?;
        anisotropy.check_dimension(dim)?;
        for q in sample_directions::<T>(dim, 512) {
            let a = anisotropy.value(&q, dim);
            if !(a >= T::zero()) || !a.is_finite() {
                return Err(invalid("anisotropy", format!("value {a} at direction {q} is not a nonnegative number")));
            }
        }
        Ok(Kernel {
            dim,
            order,
            anisotropy,
            normalized,
            normalizer: T::lit(c),
        })
    }

    pub fn isotropic(dim: usize, order: T, normalized: bool) -> Result<Self> {
        Self::new(dim, order, Anisotropy::constant(T::one()), normalized)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> T {
        self.order
    }

    pub fn anisotropy(&self) -> &Anisotropy<T> {
        &self.anisotropy
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `C_{N,s}` for this kernel's dimension and order.
    pub fn normalizer(&self) -> T {
        if self.normalizer == T::zero() {
            T::lit(normalizing_constant(self.dim, self.order.as_f64()).unwrap_or(0.0))
        } else {
            self.normalizer
        }
    }

    /// Angular factor including the normalizer when requested.
    #[inline]
    pub fn angular(&self, q: &Point<T>) -> T {
        let a = self.anisotropy.value(q, self.dim);
        if self.normalized {
            a * self.normalizer()
        } else {
            a
        }
    }

    /// `K(z)`; errors at the origin.
    pub fn value(&self, z: &Point<T>) -> Result<T> {
        let r = z.norm();
        if r == T::zero() {
            return Err(Error::Domain("kernel is singular at the origin".into()));
        }
        let q = *z * r.recip();
        let p = T::from_usize_lossy(self.dim) + T::lit(2.0) * self.order;
        Ok(self.angular(&q) * r.powf(-p))
    }

    /// Same kernel with the anisotropy multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Kernel {
            anisotropy: self.anisotropy.scaled(c),
            ..self.clone()
        }
    }
}

/// `0 < gamma <= Gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EllipticityBounds<T> {
    pub gamma: T,
    pub big_gamma: T,
}

impl<T: Real> EllipticityBounds<T> {
    pub fn new(gamma: T, big_gamma: T) -> Result<Self> {
        if !(gamma > T::zero()) || !(big_gamma >= gamma) || !big_gamma.is_finite() {
            return Err(invalid("bounds", format!("need 0 < gamma <= Gamma, got ({gamma}, {big_gamma})")));
        }
        Ok(EllipticityBounds { gamma, big_gamma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct EllipticityReport<T> {
    pub ok: bool,
    /// Direction with the largest violation, or the extreme direction when none.
    pub worst_direction: Point<T>,
    pub worst_value: T,
}

/// Samples `n_dirs` quasi-uniform directions and checks `gamma <= a <= Gamma`.
pub fn check_ellipticity<T: Real>(kernel: &Kernel<T>, bounds: &EllipticityBounds<T>, n_dirs: usize) -> EllipticityReport<T> {
    let mut worst = (T::neg_infinity(), Point::zero(), T::zero());
    for q in sample_directions::<T>(kernel.dim, n_dirs) {
        let a = kernel.angular(&q);
        let excess = (bounds.gamma - a).max(a - bounds.big_gamma);
        if excess > worst.0 {
            worst = (excess, q, a);
        }
    }
    EllipticityReport {
        ok: worst.0 <= T::zero(),
        worst_direction: worst.1,
        worst_value: worst.2,
    }
}

/// Finite two-index family `K_ij` sharing dimension and order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KernelFamily<T> {
    members: Vec<Vec<Kernel<T>>>,
    bounds: EllipticityBounds<T>,
}

impl<T: Real> KernelFamily<T> {
    pub fn new(members: Vec<Vec<Kernel<T>>>, bounds: EllipticityBounds<T>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyIndexSet("outer index set I"));
        }
        if members.iter().any(|row| row.is_empty()) {
            return Err(Error::EmptyIndexSet("inner index set J"));
        }
        let first = &members[0][0];
        for (i, row) in members.iter().enumerate() {
            for (j, k) in row.iter().enumerate() {
                if k.dim != first.dim || k.order != first.order {
                    return Err(invalid("family", format!("member ({i}, {j}) has a different dimension or order")));
                }
                let rep = check_ellipticity(k, &bounds, 256);
                if !rep.ok {
                    return Err(invalid(
                        "family",
                        format!("member ({i}, {j}) takes value {} at {}", rep.worst_value, rep.worst_direction),
                    ));
                }
            }
        }
        Ok(KernelFamily { members, bounds })
    }

    /// Family with one member.
    pub fn singleton(kernel: Kernel<T>, bounds: EllipticityBounds<T>) -> Result<Self> {
        Self::new(vec![vec![kernel]], bounds)
    }

    pub fn members(&self) -> &[Vec<Kernel<T>>] {
        &self.members
    }

    pub fn bounds(&self) -> &EllipticityBounds<T> {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.members[0][0].dim
    }

    pub fn order(&self) -> T {
        self.members[0][0].order
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.members.len(), self.members.iter().map(Vec::len).max().unwrap_or(0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Kernel<T>)> {
        self.members
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, k)| (i, j, k)))
    }
}
