//! Domains described by exact or iteratively refined distance oracles.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{orthonormal_complement, sample_directions};
use crate::{Point, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape<T> {
    Ball {
        center: Point<T>,
        radius: T,
    },
    /// `{x : x . normal > offset}`; `half_width` sizes the box used for sampling and meshing.
    HalfSpace {
        normal: Point<T>,
        offset: T,
        half_width: T,
    },
    /// `{x : sum_i |(x_i - c_i) / a_i|^p < 1}` with `p >= 2`.
    Superellipse {
        center: Point<T>,
        semi_axes: Point<T>,
        exponent: T,
    },
}

/// A bounded (or boxed) domain with its distance function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Domain<T> {
    dim: usize,
    shape: Shape<T>,
    inradius: T,
    diameter: T,
}

/// Orthonormal frame at a boundary point; the last axis is the inward normal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryFrame<T> {
    pub origin: Point<T>,
    pub normal: Point<T>,
    pub tangents: Vec<Point<T>>,
}

impl<T: Real> BoundaryFrame<T> {
    /// Maps local coordinates (tangential first, normal last) to world coordinates.
    pub fn to_world(&self, local: &Point<T>) -> Point<T> {
        let n = self.tangents.len();
        let mut p = self.origin + self.normal * local[n];
        for (k, t) in self.tangents.iter().enumerate() {
            p += *t * local[k];
        }
        p
    }

    pub fn to_local(&self, x: &Point<T>) -> Point<T> {
        let v = *x - self.origin;
        let n = self.tangents.len();
        let mut out = Point::zero();
        for (k, t) in self.tangents.iter().enumerate() {
            out[k] = v.dot(t);
        }
        out[n] = v.dot(&self.normal);
        out
    }

    /// Gram matrix of (tangents, normal).
    pub fn gram(&self) -> Vec<Vec<T>> {
        let mut basis = self.tangents.clone();
        basis.push(self.normal);
        basis
            .iter()
            .map(|a| basis.iter().map(|b| a.dot(b)).collect())
            .collect()
    }
}

impl<T: Real> Domain<T> {
    pub fn ball(dim: usize, center: Point<T>, radius: T) -> Result<Self> {
        check_dim(dim)?;
        if !(radius > T::zero()) {
            return Err(invalid("radius", "must be positive"));
        }
        Ok(Domain {
            dim,
            shape: Shape::Ball { center, radius },
            inradius: radius,
            diameter: radius * T::lit(2.0),
        })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Self::ball(dim, Point::zero(), T::one()).expect("unit ball is valid")
    }

    pub fn half_space(dim: usize, normal: Point<T>, offset: T, half_width: T) -> Result<Self> {
        check_dim(dim)?;
        let normal = normal
            .normalized()
            .ok_or_else(|| invalid("normal", "must be nonzero"))?;
        if !(half_width > T::zero()) {
            return Err(invalid("half_width", "must be positive"));
        }
        Ok(Domain {
            dim,
            shape: Shape::HalfSpace { normal, offset, half_width },
            inradius: half_width,
            diameter: half_width * T::lit(2.0) * T::from_usize_lossy(dim).sqrt(),
        })
    }

    pub fn superellipse(dim: usize, center: Point<T>, semi_axes: Point<T>, exponent: T) -> Result<Self> {
        check_dim(dim)?;
        if dim == 1 {
            return Err(invalid("shape", "superellipses need dimension 2 or 3"));
        }
        if (0..dim).any(|k| !(semi_axes[k] > T::zero())) {
            return Err(invalid("semi_axes", "must be positive"));
        }
        if !(exponent >= T::lit(2.0)) {
            return Err(invalid("exponent", "must be at least 2"));
        }
        let mut d = Domain {
            dim,
            shape: Shape::Superellipse { center, semi_axes, exponent },
            inradius: T::zero(),
            diameter: T::zero(),
        };
        let inr = (0..dim).map(|k| semi_axes[k]).fold(T::infinity(), T::min);
        let rmax = sample_directions::<T>(dim, 4096)
            .iter()
            .map(|u| d.radial(u))
            .fold(T::zero(), T::max);
        d.inradius = inr;
        d.diameter = rmax * T::lit(2.0);
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    pub fn inradius(&self) -> T {
        self.inradius
    }

    pub fn diameter(&self) -> T {
        self.diameter
    }

    /// Center of the smallest ball used for bounding the domain, if bounded.
    pub fn bounding_ball(&self) -> Option<(Point<T>, T)> {
        match &self.shape {
            Shape::Ball { center, radius } => Some((*center, *radius)),
            Shape::Superellipse { center, .. } => Some((*center, self.diameter / T::lit(2.0))),
            Shape::HalfSpace { .. } => None,
        }
    }

    /// Axis-aligned box enclosing the domain (the sampling box for half-spaces).
    pub fn bounding_box(&self) -> (Point<T>, Point<T>) {
        let mut lo = Point::zero();
        let mut hi = Point::zero();
        match &self.shape {
            Shape::Ball { center, radius } => {
                for k in 0..self.dim {
                    lo[k] = center[k] - *radius;
                    hi[k] = center[k] + *radius;
                }
            }
            Shape::Superellipse { center, semi_axes, .. } => {
                for k in 0..self.dim {
                    lo[k] = center[k] - semi_axes[k];
                    hi[k] = center[k] + semi_axes[k];
                }
            }
            Shape::HalfSpace { normal, offset, half_width } => {
                let base = *normal * *offset;
                for k in 0..self.dim {
                    lo[k] = base[k] - *half_width;
                    hi[k] = base[k] + *half_width;
                }
            }
        }
        (lo, hi)
    }

    /// Positive inside, negative outside.
    pub fn signed_distance(&self, x: &Point<T>) -> T {
        match &self.shape {
            Shape::Ball { center, radius } => *radius - x.dist(center),
            Shape::HalfSpace { normal, offset, .. } => x.dot(normal) - *offset,
            Shape::Superellipse { .. } => {
                let inside = self.level(x) < T::one();
                let d = match self.closest_points(x).first() {
                    Some((_, d)) => *d,
                    None => T::zero(),
                };
                if inside {
                    d
                } else {
                    -d
                }
            }
        }
    }

    /// Distance to the boundary inside the domain, zero elsewhere.
    pub fn distance(&self, x: &Point<T>) -> T {
        if !self.contains(x) {
            return T::zero();
        }
        self.signed_distance(x).max(T::zero())
    }

    pub fn contains(&self, x: &Point<T>) -> bool {
        match &self.shape {
            Shape::Superellipse { .. } => self.level(x) < T::one(),
            _ => self.signed_distance(x) > T::zero(),
        }
    }

    /// `d(x)^tau` inside, 0 outside.
    pub fn d_tau(&self, tau: T, x: &Point<T>) -> T {
        let d = self.distance(x);
        if d > T::zero() {
            d.powf(tau)
        } else {
            T::zero()
        }
    }

    /// Membership in the open layer `{0 < d < delta}`.
    pub fn in_layer(&self, delta: T, x: &Point<T>) -> bool {
        let d = self.distance(x);
        d > T::zero() && d < delta
    }

    /// Radius of a ball around `x` on which the distance function is smooth.
    pub fn regular_radius(&self, x: &Point<T>) -> T {
        let sd = self.signed_distance(x);
        match &self.shape {
            Shape::Ball { center, .. } if sd > T::zero() => sd.min(x.dist(center)),
            Shape::Superellipse { .. } if sd > T::zero() => {
                let c = self.closest_points(x);
                match c.get(1) {
                    Some((_, d2)) => sd.min((*d2 - c[0].1) / T::lit(2.0)),
                    None => sd,
                }
            }
            _ => sd.abs(),
        }
    }

    /// Nearest boundary point.
    pub fn project(&self, x: &Point<T>) -> Result<Point<T>> {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let v = *x - *center;
                let n = v.norm();
                if n <= T::epsilon() * *radius * T::lit(16.0) {
                    return Err(Error::AmbiguousProjection { point: x.to_string() });
                }
                Ok(*center + v * (*radius / n))
            }
            Shape::HalfSpace { normal, offset, .. } => Ok(*x - *normal * (x.dot(normal) - *offset)),
            Shape::Superellipse { .. } => {
                let cands = self.closest_points(x);
                let (p0, d0) = cands.first().copied().ok_or_else(|| Error::AmbiguousProjection { point: x.to_string() })?;
                if let Some((p1, d1)) = cands.get(1) {
                    let tol = T::lit(1e-9) * (T::one() + d0);
                    if (*d1 - d0).abs() < tol && p1.dist(&p0) > T::lit(1e-6) * self.diameter {
                        return Err(Error::AmbiguousProjection { point: x.to_string() });
                    }
                }
                Ok(p0)
            }
        }
    }

    /// Unit inward normal at a boundary point (computed from the gradient, no boundary check).
    pub fn inward_normal(&self, x0: &Point<T>) -> Point<T> {
        match &self.shape {
            Shape::Ball { center, .. } => (*center - *x0).normalized().unwrap_or_else(|| Point::axis(0)),
            Shape::HalfSpace { normal, .. } => *normal,
            Shape::Superellipse { .. } => -self.level_gradient(x0).normalized().unwrap_or_else(|| Point::axis(0)),
        }
    }

    /// Frame at `x0`, which must lie on the boundary.
    pub fn boundary_frame(&self, x0: &Point<T>) -> Result<BoundaryFrame<T>> {
        let sd = self.signed_distance(x0);
        let tol = T::lit(1e-9) * (T::one() + self.diameter);
        if sd.abs() > tol {
            return Err(Error::NotOnBoundary {
                point: x0.to_string(),
                distance: sd.abs().as_f64(),
            });
        }
        let normal = self.inward_normal(x0);
        let tangents = match self.dim {
            1 => Vec::new(),
            2 => vec![Point::from_slice(&[normal[1], -normal[0]])],
            _ => {
                let (a, b) = orthonormal_complement(&normal);
                vec![a, b]
            }
        };
        Ok(BoundaryFrame { origin: *x0, normal, tangents })
    }

    /// Positive parameters `r` where `x + r q` crosses the boundary, sorted.
    pub fn ray_crossings(&self, x: &Point<T>, q: &Point<T>) -> Vec<T> {
        let mut out = Vec::new();
        match &self.shape {
            Shape::Ball { center, radius } => {
                let v = *x - *center;
                let b = v.dot(q);
                let c = v.norm_sq() - *radius * *radius;
                let disc = b * b - c;
                if disc > T::zero() {
                    let sq = disc.sqrt();
                    // stable roots of r^2 + 2br + c
                    let r1 = if b > T::zero() { -b - sq } else { -b + sq };
                    let r2 = if r1 != T::zero() { c / r1 } else { -b - sq };
                    for r in [r1, r2] {
                        if r > T::zero() {
                            out.push(r);
                        }
                    }
                }
            }
            Shape::HalfSpace { normal, offset, .. } => {
                let qn = q.dot(normal);
                if qn != T::zero() {
                    let r = (*offset - x.dot(normal)) / qn;
                    if r > T::zero() {
                        out.push(r);
                    }
                }
            }
            Shape::Superellipse { center, .. } => {
                let rad = self.diameter / T::lit(2.0);
                let v = *x - *center;
                let b = v.dot(q);
                let c = v.norm_sq() - rad * rad;
                let disc = b * b - c;
                if disc > T::zero() {
                    let sq = disc.sqrt();
                    let (t0, t1) = (-b - sq, -b + sq);
                    let f = |t: T| self.level(&x.along(q, t)) - T::one();
                    let tm = golden_min(&f, t0, t1);
                    if f(tm) < T::zero() {
                        for (lo, hi) in [(tm, t0), (tm, t1)] {
                            let r = bisect(&f, lo, hi);
                            if r > T::zero() {
                                out.push(r);
                            }
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite crossing"));
        out
    }

    /// Ray parameter of closest approach to the center of a ball, where the distance
    /// function is least regular.
    pub fn ray_medial_point(&self, x: &Point<T>, q: &Point<T>) -> Option<T> {
        match &self.shape {
            Shape::Ball { center, .. } => {
                let r = (*center - *x).dot(q);
                (r > T::zero()).then_some(r)
            }
            _ => None,
        }
    }

    /// Quasi-uniform boundary points.
    pub fn boundary_samples(&self, n: usize) -> Vec<Point<T>> {
        let n = n.max(1);
        match &self.shape {
            Shape::HalfSpace { normal, offset, half_width } => {
                let base = *normal * *offset;
                match self.dim {
                    1 => vec![base],
                    2 => {
                        let t = Point::from_slice(&[normal[1], -normal[0]]);
                        (0..n)
                            .map(|k| {
                                let u = T::lit(-1.0 + 2.0 * (k as f64 + 0.5) / n as f64);
                                base + t * (u * *half_width)
                            })
                            .collect()
                    }
                    _ => {
                        let (a, b) = orthonormal_complement(normal);
                        let m = (n as f64).sqrt().ceil() as usize;
                        let mut out = Vec::with_capacity(m * m);
                        for i in 0..m {
                            for j in 0..m {
                                let u = T::lit(-1.0 + 2.0 * (i as f64 + 0.5) / m as f64);
                                let v = T::lit(-1.0 + 2.0 * (j as f64 + 0.5) / m as f64);
                                out.push(base + a * (u * *half_width) + b * (v * *half_width));
                            }
                        }
                        out
                    }
                }
            }
            Shape::Ball { center, radius } => sample_directions::<T>(self.dim, n)
                .into_iter()
                .map(|u| *center + u * *radius)
                .collect(),
            Shape::Superellipse { center, .. } => sample_directions::<T>(self.dim, n)
                .into_iter()
                .map(|u| *center + u * self.radial(&u))
                .collect(),
        }
    }

    /// Points at inward distances spread log-uniformly over `[d_min, d_max]`, placed along
    /// the inward normals of quasi-uniform boundary points. Distances are recomputed, so
    /// on curved boundaries they may differ slightly from the nominal ones.
    pub fn layer_points(&self, n: usize, d_min: T, d_max: T) -> Vec<Point<T>> {
        let anchors = self.boundary_samples(n);
        let golden = 0.618_033_988_749_894_9_f64;
        anchors
            .iter()
            .enumerate()
            .map(|(k, y0)| {
                let frac = T::lit((k as f64 * golden + 0.5).fract());
                let d = d_min * (d_max / d_min).powf(frac);
                *y0 + self.inward_normal(y0) * d
            })
            .filter(|x| self.contains(x))
            .collect()
    }

    /// Deterministic quasi-random points of the domain with distance at least `d_min`.
    pub fn interior_points(&self, n: usize, d_min: T) -> Vec<Point<T>> {
        let (lo, hi) = self.bounding_box();
        let bases = [2u64, 3, 5];
        let mut out = Vec::with_capacity(n);
        let mut k = 1u64;
        while out.len() < n && k < 1000 * n as u64 + 1000 {
            let mut x = Point::zero();
            for (j, &b) in bases.iter().enumerate().take(self.dim) {
                let u = T::lit(radical_inverse(k, b));
                x[j] = lo[j] + (hi[j] - lo[j]) * u;
            }
            if self.distance(&x) >= d_min && self.contains(&x) {
                out.push(x);
            }
            k += 1;
        }
        out
    }

    fn level(&self, x: &Point<T>) -> T {
        match &self.shape {
            Shape::Superellipse { center, semi_axes, exponent } => (0..self.dim)
                .map(|k| ((x[k] - center[k]) / semi_axes[k]).abs().powf(*exponent))
                .sum(),
            _ => unreachable!("level set only defined for superellipses"),
        }
    }

    fn level_gradient(&self, x: &Point<T>) -> Point<T> {
        let mut g = Point::zero();
        if let Shape::Superellipse { center, semi_axes, exponent } = &self.shape {
            for k in 0..self.dim {
                let y = (x[k] - center[k]) / semi_axes[k];
                g[k] = *exponent * y.abs().powf(*exponent - T::one()) * y.signum() / semi_axes[k];
            }
        }
        g
    }

    /// Boundary radius along unit direction `u` from the center.
    fn radial(&self, u: &Point<T>) -> T {
        match &self.shape {
            Shape::Superellipse { semi_axes, exponent, .. } => {
                let s: T = (0..self.dim).map(|k| (u[k] / semi_axes[k]).abs().powf(*exponent)).sum();
                s.powf(-exponent.recip())
            }
            Shape::Ball { radius, .. } => *radius,
            Shape::HalfSpace { .. } => T::infinity(),
        }
    }

    /// Local minimizers of `|x - y|` over the boundary, sorted by distance.
    fn closest_points(&self, x: &Point<T>) -> Vec<(Point<T>, T)> {
        let Shape::Superellipse { center, .. } = &self.shape else {
            return Vec::new();
        };
        let samples = match self.dim {
            2 => 96,
            _ => 600,
        };
        let dirs = sample_directions::<T>(self.dim, samples);
        let mut cand: Vec<(T, Point<T>)> = dirs
            .iter()
            .map(|u| {
                let y = *center + *u * self.radial(u);
                (y.dist(x), y)
            })
            .collect();
        cand.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distance"));
        let mut out: Vec<(Point<T>, T)> = Vec::new();
        for (_, y0) in cand.iter().take(6) {
            if let Some(y) = self.newton_projection(x, *y0) {
                let d = y.dist(x);
                if !out.iter().any(|(p, _)| p.dist(&y) < T::lit(1e-7) * self.diameter) {
                    out.push((y, d));
                }
            }
        }
        if out.is_empty() {
            let (d, y) = cand[0];
            out.push((y, d));
        }
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distance"));
        out
    }

    /// Solves `y - x = lambda grad F(y)`, `F(y) = 1` by Newton's method.
    fn newton_projection(&self, x: &Point<T>, y0: Point<T>) -> Option<Point<T>> {
        let Shape::Superellipse { center, semi_axes, exponent } = &self.shape else {
            return None;
        };
        let n = self.dim;
        let p = *exponent;
        let mut y = y0;
        let g0 = self.level_gradient(&y);
        let mut lam = (y - *x).dot(&g0) / g0.norm_sq().max(T::min_positive_value());
        for _ in 0..50 {
            let g = self.level_gradient(&y);
            let mut a = [[T::zero(); 5]; 4];
            for k in 0..n {
                let t = (y[k] - center[k]) / semi_axes[k];
                let h = p * (p - T::one()) * t.abs().powf(p - T::lit(2.0)) / (semi_axes[k] * semi_axes[k]);
                a[k][k] = T::one() - lam * h;
                a[k][n] = -g[k];
                a[n][k] = g[k];
                a[k][n + 1] = -(y[k] - x[k] - lam * g[k]);
            }
            a[n][n + 1] = -(self.level(&y) - T::one());
            let sol = solve_small(&mut a, n + 1)?;
            let mut step = T::zero();
            for k in 0..n {
                y[k] += sol[k];
                step = step.max(sol[k].abs());
            }
            lam += sol[n];
            if !y.is_finite() {
                return None;
            }
            if step < T::epsilon() * T::lit(8.0) * (T::one() + self.diameter) {
                break;
            }
        }
        ((self.level(&y) - T::one()).abs() < T::lit(1e-8)).then_some(y)
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(invalid("dim", format!("dimension {dim} is not in 1..=3")))
    }
}

fn solve_small<T: Real>(a: &mut [[T; 5]; 4], n: usize) -> Option<[T; 4]> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))?;
        if a[piv][col].abs() < T::min_positive_value() {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
        }
    }
    let mut x = [T::zero(); 4];
    for r in (0..n).rev() {
        let mut s = a[r][n];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

fn golden_min<T: Real, F: Fn(T) -> T>(f: &F, mut a: T, mut b: T) -> T {
    let g = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / T::lit(2.0)
}

/// Root of `f` between `inside` (f < 0) and `outside` (f >= 0).
fn bisect<T: Real, F: Fn(T) -> T>(f: &F, mut inside: T, mut outside: T) -> T {
    for _ in 0..200 {
        let m = (inside + outside) / T::lit(2.0);
        if m == inside || m == outside {
            break;
        }
        if f(m) < T::zero() {
            inside = m;
        } else {
            outside = m;
        }
    }
    (inside + outside) / T::lit(2.0)
}

/// Angle helper for planar boundary parametrizations.
pub fn polar_point<T: Real>(theta: f64) -> Point<T> {
    Point::from_f64(&[theta.cos(), theta.sin()])
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Point<f64> {
        Point::from_f64(c)
    }

    #[test]
    fn ball_distance_examples() {
        let b = Domain::<f64>::unit_ball(2);
        assert_eq!(b.distance(&p(&[0.0, 0.0])), 1.0);
        assert_eq!(b.distance(&p(&[0.5, 0.0])), 0.5);
        assert_eq!(b.distance(&p(&[2.0, 0.0])), 0.0);
        assert!((b.d_tau(-0.5, &p(&[0.75, 0.0])) - 2.0).abs() < 1e-14);
        assert!((b.d_tau(2.0, &p(&[0.9, 0.0])) - 0.01).abs() < 1e-14);
        assert_eq!(b.d_tau(0.0, &p(&[0.3, 0.0])), 1.0);
        assert_eq!(b.d_tau(0.0, &p(&[1.3, 0.0])), 0.0);
    }

    #[test]
    fn projection_examples() {
        let b = Domain::<f64>::unit_ball(2);
        assert_eq!(b.project(&p(&[0.5, 0.0])).unwrap(), p(&[1.0, 0.0]));
        assert!(matches!(b.project(&p(&[0.0, 0.0])), Err(Error::AmbiguousProjection { .. })));
        let se = Domain::superellipse(2, Point::zero(), p(&[2.0, 1.0]), 4.0).unwrap();
        let y = se.project(&p(&[1.2, 0.0])).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-10 && y[1].abs() < 1e-10, "{y}");
        let y = se.project(&p(&[0.0, 0.5])).unwrap();
        assert!(y[0].abs() < 1e-10 && (y[1] - 1.0).abs() < 1e-10, "{y}");
    }

    #[test]
    fn frame_examples() {
        let b = Domain::<f64>::unit_ball(2);
        let f = b.boundary_frame(&p(&[1.0, 0.0])).unwrap();
        assert!((f.normal - p(&[-1.0, 0.0])).norm() < 1e-15);
        let f = b.boundary_frame(&p(&[0.0, 1.0])).unwrap();
        assert!((f.normal - p(&[0.0, -1.0])).norm() < 1e-15);
        assert!(b.boundary_frame(&p(&[0.0, 0.5])).is_err());
        let b3 = Domain::<f64>::unit_ball(3);
        let q = p(&[0.48, 0.6, 0.64]);
        let f = b3.boundary_frame(&q).unwrap();
        for (i, row) in f.gram().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-12);
            }
        }
        let loc = p(&[0.1, -0.2, 0.3]);
        assert!((f.to_local(&f.to_world(&loc)) - loc).norm() < 1e-14);
    }

    #[test]
    fn ray_crossings_match_signed_distance_zero() {
        let doms = vec![
            Domain::<f64>::unit_ball(2),
            Domain::half_space(2, p(&[0.0, 1.0]), 0.0, 1.0).unwrap(),
            Domain::superellipse(2, Point::zero(), p(&[1.5, 1.0]), 3.0).unwrap(),
        ];
        let x = p(&[0.2, 0.3]);
        for d in &doms {
            for k in 0..12 {
                let th = 0.3 + k as f64 * 0.5;
                let q = p(&[th.cos(), th.sin()]);
                for r in d.ray_crossings(&x, &q) {
                    assert!(d.signed_distance(&x.along(&q, r)).abs() < 1e-9);
                }
            }
        }
        let outside = p(&[-3.0, 0.1]);
        let hits = doms[0].ray_crossings(&outside, &p(&[1.0, 0.0]));
        assert_eq!(hits.len(), 2);
        let hits = doms[2].ray_crossings(&outside, &p(&[1.0, 0.0]));
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn eikonal_property() {
        let doms = vec![
            Domain::<f64>::unit_ball(2),
            Domain::superellipse(2, Point::zero(), p(&[1.5, 1.0]), 4.0).unwrap(),
            Domain::superellipse(3, Point::zero(), p(&[1.5, 1.0, 1.2]), 2.0).unwrap(),
        ];
        let h = 1e-6;
        for d in &doms {
            let dim = d.dim();
            for (k, u) in sample_directions::<f64>(dim, 40).iter().enumerate() {
                let x = *u * (0.2 + 0.015 * k as f64);
                if d.distance(&x) < d.inradius() / 100.0 || d.regular_radius(&x) < 1e-3 {
                    continue;
                }
                let mut g = 0.0;
                for a in 0..dim {
                    let e = Point::axis(a) * h;
                    let dd = (d.distance(&(x + e)) - d.distance(&(x - e))) / (2.0 * h);
                    g += dd * dd;
                }
                assert!((g.sqrt() - 1.0).abs() < 1e-4, "{x}: {}", g.sqrt());
            }
        }
    }

    #[test]
    fn superellipse_inradius_and_diameter() {
        let se = Domain::superellipse(2, Point::zero(), p(&[1.0, 1.0]), 4.0).unwrap();
        assert_eq!(se.inradius(), 1.0);
        let expect = 2.0 * 2f64.sqrt() * 0.5f64.powf(0.25);
        assert!((se.diameter() - expect).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn distance_equals_projection_gap(x in -0.99f64..0.99, y in -0.99f64..0.99, which in 0usize..3) {
            let d = match which {
                0 => Domain::<f64>::unit_ball(2),
                1 => Domain::half_space(2, p(&[0.0, 1.0]), -1.0, 1.0).unwrap(),
                _ => Domain::superellipse(2, Point::zero(), p(&[1.2, 1.0]), 4.0).unwrap(),
            };
            let pt = p(&[x, y]);
            prop_assume!(d.contains(&pt) && d.regular_radius(&pt) > 1e-3);
            let proj = d.project(&pt).unwrap();
            prop_assert!((d.distance(&pt) - pt.dist(&proj)).abs() < 1e-10);
        }

        #[test]
        fn layers_are_nested(x in -1.0f64..1.0, y in -1.0f64..1.0, d1 in 0.01f64..0.5, extra in 0.0f64..0.5) {
            let b = Domain::<f64>::unit_ball(2);
            let pt = p(&[x, y]);
            if b.in_layer(d1, &pt) {
                prop_assert!(b.in_layer(d1 + extra, &pt));
            }
        }

        #[test]
        fn d_tau_is_multiplicative(x in -0.7f64..0.7, y in -0.7f64..0.7, t1 in -0.9f64..2.0, t2 in -0.9f64..2.0) {
            let b = Domain::<f64>::unit_ball(2);
            let pt = p(&[x, y]);
            let lhs = b.d_tau(t1 + t2, &pt);
            let rhs = b.d_tau(t1, &pt) * b.d_tau(t2, &pt);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
        }
    }
}
