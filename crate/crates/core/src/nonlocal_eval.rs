//! Principal-value evaluation of nonlocal operators at a point.
//!
//! Every operator is reduced to per-direction radial integrals
//! `psi(q) = int_0^inf F(r) r^{-1-2s} dr` where `F(r)` is a symmetrized difference along
//! the line through `x` with direction `q`. The collection of `psi` values on an angular
//! rule is a [`DirectionalProfile`], from which linear, extremal and min-max operators
//! are read off without further field evaluations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{HalfspacePower, Integrability, RayBreak, ScalarField};
use crate::kernels::{EllipticityBounds, Kernel, KernelFamily};
use crate::quadrature::{integrate_pieces, plan_segment, GaussRule, Piece, SphereOptions, SphereRule};
use crate::{Point, Real};

/// What happens beyond the last field singularity for fields that are not compactly
/// supported. Compact fields always get the exact closed-form tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Only compactly supported fields are accepted.
    AnalyticZero,
    /// Truncate at `r_far` and add the growth-bound estimate of the remainder to the error.
    GrowthBound,
    /// Integrate to infinity through the substitution `r = R v^{-k}`.
    #[default]
    Mapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub r_near: f64,
    #[serde(alias = "R_far")]
    pub r_far: f64,
    pub near_levels: usize,
    pub sphere_order: usize,
    pub radial_order: usize,
    /// Dyadic grading levels toward singular endpoints, radial and angular.
    pub grade_levels: usize,
    pub tail_mode: TailMode,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            r_near: 0.25,
            r_far: 1e3,
            near_levels: 4,
            sphere_order: 6,
            radial_order: 6,
            grade_levels: 3,
            tail_mode: TailMode::Mapped,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_near > 0.0 && self.r_near < self.r_far && self.r_far.is_finite()) {
            return Err(invalid("r_near", format!("need 0 < r_near < r_far, got {} and {}", self.r_near, self.r_far)));
        }
        for (name, v) in [
            ("near_levels", self.near_levels),
            ("sphere_order", self.sphere_order),
            ("radial_order", self.radial_order),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Doubles every resolution parameter.
    pub fn refined(&self) -> Self {
        QuadratureConfig {
            near_levels: self.near_levels * 2,
            sphere_order: self.sphere_order * 2,
            radial_order: self.radial_order * 2,
            grade_levels: self.grade_levels * 2,
            ..self.clone()
        }
    }

    /// Halves every resolution parameter (rounding up).
    pub fn coarsened(&self) -> Self {
        QuadratureConfig {
            near_levels: self.near_levels.div_ceil(2).max(1),
            sphere_order: self.sphere_order.div_ceil(2).max(1),
            radial_order: self.radial_order.div_ceil(2).max(1),
            grade_levels: self.grade_levels.div_ceil(2),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EvalResult<T> {
    pub value: T,
    pub error_estimate: T,
}

impl<T: Real> EvalResult<T> {
    pub fn new(value: T, error_estimate: T) -> Self {
        EvalResult {
            value,
            error_estimate: error_estimate.abs(),
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// `self + c * other` with errors added.
    pub fn add_scaled(&self, c: T, other: &Self) -> Self {
        Self::new(self.value + c * other.value, self.error_estimate + c.abs() * other.error_estimate)
    }
}

/// Directions where the angular factor jumps; the angular rule is split there.
#[derive(Debug, Clone, Default)]
pub struct AngularBreaks {
    pub angles: Vec<f64>,
    pub zonal: Vec<f64>,
}

impl AngularBreaks {
    pub fn of_kernel<T: Real>(k: &Kernel<T>) -> Self {
        AngularBreaks {
            angles: k.anisotropy().angle_breaks(),
            zonal: k.anisotropy().zonal_breaks(),
        }
    }

    pub fn of_family<T: Real>(fam: &KernelFamily<T>) -> Self {
        let mut out = AngularBreaks::default();
        for (_, _, k) in fam.iter() {
            let b = Self::of_kernel(k);
            out.angles.extend(b.angles);
            out.zonal.extend(b.zonal);
        }
        for v in [&mut out.angles, &mut out.zonal] {
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        }
        out
    }
}

/// Radial integrals on one angular rule.
#[derive(Debug, Clone)]
pub struct ProfileLevel<T> {
    pub dirs: Vec<Point<T>>,
    pub weights: Vec<T>,
    pub psi: Vec<T>,
}

impl<T: Real> ProfileLevel<T> {
    fn reduce(&self, f: impl Fn(&Point<T>, T) -> T) -> T {
        let sum: T = self
            .dirs
            .iter()
            .zip(&self.weights)
            .zip(&self.psi)
            .map(|((q, w), p)| *w * f(q, *p))
            .sum();
        sum * T::lit(0.5)
    }
}

/// Per-direction radial integrals at two resolutions plus a bound on any truncated tail.
#[derive(Debug, Clone)]
pub struct DirectionalProfile<T> {
    pub dim: usize,
    pub order: T,
    pub fine: ProfileLevel<T>,
    pub coarse: ProfileLevel<T>,
    /// Bound on `|psi(q)|` lost to truncation, the same for every direction.
    pub tail_bound: T,
}

impl<T: Real> DirectionalProfile<T> {
    fn reduce(&self, f: impl Fn(&Point<T>, T) -> T, tail_weight: impl Fn(&Point<T>) -> T) -> EvalResult<T> {
        let v = self.fine.reduce(&f);
        let c = self.coarse.reduce(&f);
        let tail = if self.tail_bound > T::zero() {
            self.fine.reduce(|q, _| tail_weight(q)) * self.tail_bound
        } else {
            T::zero()
        };
        EvalResult::new(v, (v - c).abs() + tail)
    }

    fn check_kernel(&self, k: &Kernel<T>) -> Result<()> {
        if k.dim() != self.dim {
            return Err(invalid("kernel", format!("dimension {} does not match field dimension {}", k.dim(), self.dim)));
        }
        if (k.order() - self.order).abs() > T::lit(1e-12) {
            return Err(invalid("kernel", format!("order {} does not match profile order {}", k.order(), self.order)));
        }
        Ok(())
    }

    pub fn linear(&self, k: &Kernel<T>) -> Result<EvalResult<T>> {
        self.check_kernel(k)?;
        Ok(self.reduce(|q, p| k.angular(q) * p, |q| k.angular(q)))
    }

    /// Supremum (`plus`) or infimum over anisotropies with values in `[gamma, Gamma]`.
    pub fn pucci(&self, b: &EllipticityBounds<T>, plus: bool) -> EvalResult<T> {
        let (up, down) = if plus { (b.big_gamma, b.gamma) } else { (b.gamma, b.big_gamma) };
        self.reduce(
            |_, p| if p > T::zero() { up * p } else { down * p },
            |_| b.big_gamma,
        )
    }

    /// `min_i max_j` of the member values; the error is the largest member error.
    pub fn isaacs(&self, fam: &KernelFamily<T>) -> Result<EvalResult<T>> {
        let mut best: Option<EvalResult<T>> = None;
        for row in fam.members() {
            let mut inner: Option<EvalResult<T>> = None;
            for k in row {
                let r = self.linear(k)?;
                inner = Some(match inner {
                    None => r,
                    Some(cur) => EvalResult::new(
                        cur.value.max(r.value),
                        cur.error_estimate.max(r.error_estimate),
                    ),
                });
            }
            let inner = inner.ok_or(Error::EmptyIndexSet("inner index set J"))?;
            best = Some(match best {
                None => inner,
                Some(cur) => EvalResult::new(
                    cur.value.min(inner.value),
                    cur.error_estimate.max(inner.error_estimate),
                ),
            });
        }
        best.ok_or(Error::EmptyIndexSet("outer index set I"))
    }

    /// Profile of `self + c * other`; both must live on the same angular rules.
    pub fn combine(&self, c: T, other: &Self) -> Result<Self> {
        let same = |a: &ProfileLevel<T>, b: &ProfileLevel<T>| {
            a.dirs.len() == b.dirs.len() && a.dirs.iter().zip(&b.dirs).all(|(p, q)| p.dist(q) <= T::lit(1e-12))
        };
        if self.dim != other.dim || !same(&self.fine, &other.fine) || !same(&self.coarse, &other.coarse) {
            return Err(invalid("profile", "profiles were computed on different angular rules"));
        }
        let mix = |a: &ProfileLevel<T>, b: &ProfileLevel<T>| ProfileLevel {
            dirs: a.dirs.clone(),
            weights: a.weights.clone(),
            psi: a.psi.iter().zip(&b.psi).map(|(x, y)| *x + c * *y).collect(),
        };
        Ok(DirectionalProfile {
            dim: self.dim,
            order: self.order,
            fine: mix(&self.fine, &other.fine),
            coarse: mix(&self.coarse, &other.coarse),
            tail_bound: self.tail_bound + c.abs() * other.tail_bound,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Tail<T> {
    /// `F(r) = constant` for `r > start`.
    Closed { start: T, constant: T },
    /// `|F(r)| <~ r^growth` at infinity.
    Open { growth: T },
}

/// The symmetrized difference along lines through a point.
trait RayProblem<T: Real>: Sync {
    fn pair(&self, q: &Point<T>, r: T) -> T;
    fn breaks(&self, q: &Point<T>, out: &mut Vec<RayBreak<T>>);
}

struct LinearRay<'a, T> {
    field: &'a dyn ScalarField<T>,
    x: Point<T>,
}

impl<T: Real> RayProblem<T> for LinearRay<'_, T> {
    fn pair(&self, q: &Point<T>, r: T) -> T {
        self.field.second_difference(&self.x, &(*q * r))
    }
    fn breaks(&self, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        self.field.ray_breaks(&self.x, q, out);
        self.field.ray_breaks(&self.x, &-*q, out);
    }
}

struct BilinearRay<'a, T> {
    f: &'a dyn ScalarField<T>,
    g: &'a dyn ScalarField<T>,
    x: Point<T>,
    fx: T,
    gx: T,
}

impl<T: Real> RayProblem<T> for BilinearRay<'_, T> {
    fn pair(&self, q: &Point<T>, r: T) -> T {
        let z = *q * r;
        let (p, m) = (self.x + z, self.x - z);
        let bp = (self.f.value(&p) - self.fx) * (self.g.value(&p) - self.gx);
        let bm = (self.f.value(&m) - self.fx) * (self.g.value(&m) - self.gx);
        T::lit(0.5) * (bp + bm)
    }
    fn breaks(&self, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        for field in [self.f, self.g] {
            field.ray_breaks(&self.x, q, out);
            field.ray_breaks(&self.x, &-*q, out);
        }
    }
}

struct RadialPlan<'a, T> {
    cfg: &'a QuadratureConfig,
    rule: std::sync::Arc<GaussRule>,
    s: T,
    r_near: T,
    /// Minimal start of an open tail.
    tail_floor: T,
    tail: Tail<T>,
}

impl<T: Real> RadialPlan<'_, T> {
    fn psi(&self, problem: &dyn RayProblem<T>, q: &Point<T>) -> T {
        let s2 = self.s + self.s;
        let weight = |r: T| r.powf(-(T::one() + s2));
        let f = |r: T| problem.pair(q, r) * weight(r);
        let rule = &*self.rule;

        let mut total = T::zero();
        let mut hi = self.r_near;
        for _ in 0..self.cfg.near_levels {
            let lo = hi * T::lit(std::f64::consts::FRAC_1_SQRT_2);
            total += rule.integrate(lo, hi, f);
            hi = lo;
        }
        // innermost ball: F(r) = a r^2 + b r^4 + O(r^6)
        let eps = hi;
        let half = eps * T::lit(0.5);
        let g1 = problem.pair(q, eps) / (eps * eps);
        let g2 = problem.pair(q, half) / (half * half);
        let a = (T::lit(4.0) * g2 - g1) / T::lit(3.0);
        let b = (g1 - g2) / (T::lit(0.75) * eps * eps);
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        total += a * eps.powf(two - s2) / (two - s2) + b * eps.powf(four - s2) / (four - s2);

        let mut breaks = Vec::new();
        problem.breaks(q, &mut breaks);
        breaks.retain(|b| b.r.is_finite() && b.r > self.r_near * T::lit(1.0 + 1e-12));
        breaks.sort_by(|a, b| a.r.partial_cmp(&b.r).unwrap_or(std::cmp::Ordering::Equal));
        let mut merged: Vec<RayBreak<T>> = Vec::with_capacity(breaks.len());
        for b in breaks {
            match merged.last_mut() {
                Some(last) if b.r - last.r <= T::lit(1e-12) * b.r => last.exponent = last.exponent.min(b.exponent),
                _ => merged.push(b),
            }
        }

        let end = match self.tail {
            Tail::Closed { start, .. } => {
                merged.retain(|b| b.r <= start);
                start
            }
            Tail::Open { .. } => {
                let last = merged.last().map(|b| b.r).unwrap_or(T::zero());
                self.tail_floor.max(last * two).max(self.r_near * two)
            }
        };
        let mut nodes: Vec<(T, Option<f64>)> = vec![(self.r_near, None)];
        for b in &merged {
            nodes.push((b.r, Some(b.exponent.max(-0.999))));
        }
        let last = nodes.last().map(|n| n.0).unwrap_or(self.r_near);
        if end > last * T::lit(1.0 + 1e-12) {
            nodes.push((end, None));
        }
        let mut pieces: Vec<Piece<T>> = Vec::new();
        for w in nodes.windows(2) {
            plan_segment(w[0].0, w[1].0, w[0].1, w[1].1, self.cfg.grade_levels, true, &mut pieces);
        }
        total += integrate_pieces(&pieces, rule, f);
        let end = nodes.last().map(|n| n.0).unwrap_or(end);

        match self.tail {
            Tail::Closed { constant, .. } => total += constant * end.powf(-s2) / s2,
            Tail::Open { growth } => {
                let p = growth.min(s2 - self.s * T::lit(0.5)).max(T::zero());
                let k = (two / (s2 - p)).min(T::lit(16.0));
                let e0 = (k * (s2 - p) - T::one()).as_f64().max(0.0);
                let mut tail_pieces = Vec::new();
                plan_segment(T::zero(), T::one(), Some(e0), None, self.cfg.grade_levels, false, &mut tail_pieces);
                let expo = s2 * k - T::one();
                let inner = integrate_pieces(&tail_pieces, rule, |v| {
                    let r = end * v.powf(-k);
                    if !r.is_finite() {
                        return T::zero();
                    }
                    let val = problem.pair(q, r) * v.powf(expo);
                    if val.is_finite() {
                        val
                    } else {
                        T::zero()
                    }
                });
                total += k * end.powf(-s2) * inner;
            }
        }
        total
    }
}

fn check_order<T: Real>(s: T) -> Result<()> {
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::Domain(format!("order s = {s} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_point<T: Real>(dim: usize, x: &Point<T>) -> Result<()> {
    if !x.is_finite() || (dim..3).any(|k| x[k] != T::zero()) {
        return Err(invalid("x", format!("{x} is not a finite point of R^{dim}")));
    }
    Ok(())
}

struct ProfileSpec<T> {
    dim: usize,
    s: T,
    smooth: T,
    axis: Option<Point<T>>,
    tail: Tail<T>,
    tail_floor: T,
    tail_bound: T,
}

fn build_profile<T: Real>(
    problem: &dyn RayProblem<T>,
    spec: &ProfileSpec<T>,
    breaks: &AngularBreaks,
    cfg: &QuadratureConfig,
) -> Result<DirectionalProfile<T>> {
    cfg.validate()?;
    let level = |c: &QuadratureConfig| {
        let opts = SphereOptions {
            axis: spec.axis,
            angle_breaks: breaks.angles.clone(),
            zonal_breaks: breaks.zonal.clone(),
            tangent_exponent: (2.0 * spec.s.as_f64() - 1.0).min(0.0),
        };
        let sphere = SphereRule::half_sphere(spec.dim, c.sphere_order, c.grade_levels, &opts);
        let plan = RadialPlan {
            cfg: c,
            rule: GaussRule::get(c.radial_order),
            s: spec.s,
            r_near: T::lit(c.r_near).min(spec.smooth * T::lit(0.5)),
            tail_floor: spec.tail_floor,
            tail: spec.tail,
        };
        let psi = sphere.dirs.iter().map(|q| plan.psi(problem, q)).collect();
        ProfileLevel {
            dirs: sphere.dirs,
            weights: sphere.weights,
            psi,
        }
    };
    Ok(DirectionalProfile {
        dim: spec.dim,
        order: spec.s,
        fine: level(cfg),
        coarse: level(&cfg.coarsened()),
        tail_bound: spec.tail_bound,
    })
}

fn smooth_radius_at<T: Real>(field: &dyn ScalarField<T>, x: &Point<T>) -> Result<T> {
    let r = field.smooth_radius(x);
    if !(r > T::zero()) {
        return Err(Error::PvUndefined { point: x.to_string() });
    }
    Ok(r)
}

/// Tail description and truncation bound for a single field evaluated at `x`.
fn field_tail<T: Real>(field: &dyn ScalarField<T>, x: &Point<T>, ux: T, s: T, cfg: &QuadratureConfig) -> Result<(Tail<T>, T)> {
    let s2 = s + s;
    match field.integrability() {
        Integrability::Compact { center, radius } => Ok((
            Tail::Closed {
                start: x.dist(&center) + radius,
                constant: -T::lit(2.0) * ux,
            },
            T::zero(),
        )),
        Integrability::Growth { bound, power } => {
            if power >= s2 {
                return Err(Error::NonIntegrable {
                    diagnostic: format!("declared growth power {power} is not below 2s = {s2}"),
                });
            }
            match cfg.tail_mode {
                TailMode::AnalyticZero => Err(invalid(
                    "tail_mode",
                    "analytic_zero needs a compactly supported field",
                )),
                TailMode::Mapped => Ok((Tail::Open { growth: power }, T::zero())),
                TailMode::GrowthBound => {
                    let r = T::lit(cfg.r_far);
                    let bound = T::lit(2.0) * bound * (T::one() + x.norm() + r).powf(power) * r.powf(-s2) / (s2 - power);
                    Ok((
                        Tail::Closed {
                            start: r,
                            constant: -T::lit(2.0) * ux,
                        },
                        bound,
                    ))
                }
            }
        }
    }
}

/// Radial integrals of `u` at `x` for every direction of the angular rule.
pub fn profile<T: Real>(
    u: &dyn ScalarField<T>,
    x: &Point<T>,
    s: T,
    breaks: &AngularBreaks,
    cfg: &QuadratureConfig,
) -> Result<DirectionalProfile<T>> {
    check_order(s)?;
    check_point(u.dim(), x)?;
    let smooth = smooth_radius_at(u, x)?;
    let ux = u.value(x);
    let (tail, tail_bound) = field_tail(u, x, ux, s, cfg)?;
    let spec = ProfileSpec {
        dim: u.dim(),
        s,
        smooth,
        axis: u.singular_axis(x),
        tail,
        tail_floor: T::one() + x.norm(),
        tail_bound,
    };
    build_profile(&LinearRay { field: u, x: *x }, &spec, breaks, cfg)
}

pub fn linear_op<T: Real>(k: &Kernel<T>, u: &dyn ScalarField<T>, x: &Point<T>, cfg: &QuadratureConfig) -> Result<EvalResult<T>> {
    if k.dim() != u.dim() {
        return Err(invalid("kernel", "kernel and field dimensions differ"));
    }
    profile(u, x, k.order(), &AngularBreaks::of_kernel(k), cfg)?.linear(k)
}

/// `(-Delta)^s` with the sign convention `L u = PV int (u(y) - u(x)) K`.
pub fn frac_laplacian<T: Real>(u: &dyn ScalarField<T>, x: &Point<T>, s: T, cfg: &QuadratureConfig) -> Result<EvalResult<T>> {
    check_order(s)?;
    let k = Kernel::isotropic(u.dim(), s, true)?;
    linear_op(&k, u, x, cfg)
}

pub fn pucci_plus<T: Real>(
    u: &dyn ScalarField<T>,
    x: &Point<T>,
    b: &EllipticityBounds<T>,
    s: T,
    cfg: &QuadratureConfig,
) -> Result<EvalResult<T>> {
    Ok(profile(u, x, s, &AngularBreaks::default(), cfg)?.pucci(b, true))
}

pub fn pucci_minus<T: Real>(
    u: &dyn ScalarField<T>,
    x: &Point<T>,
    b: &EllipticityBounds<T>,
    s: T,
    cfg: &QuadratureConfig,
) -> Result<EvalResult<T>> {
    Ok(profile(u, x, s, &AngularBreaks::default(), cfg)?.pucci(b, false))
}

pub fn isaacs_op<T: Real>(
    fam: &KernelFamily<T>,
    u: &dyn ScalarField<T>,
    x: &Point<T>,
    cfg: &QuadratureConfig,
) -> Result<EvalResult<T>> {
    if fam.dim() != u.dim() {
        return Err(invalid("family", "family and field dimensions differ"));
    }
    profile(u, x, fam.order(), &AngularBreaks::of_family(fam), cfg)?.isaacs(fam)
}

/// `B(f, g)(x) = 1/2 PV int (f(y) - f(x)) (g(y) - g(x)) K(x - y) dy`.
pub fn bilinear_form<T: Real>(
    k: &Kernel<T>,
    f: &dyn ScalarField<T>,
    g: &dyn ScalarField<T>,
    x: &Point<T>,
    cfg: &QuadratureConfig,
) -> Result<EvalResult<T>> {
    let s = k.order();
    let s2 = s + s;
    if f.dim() != k.dim() || g.dim() != k.dim() {
        return Err(invalid("kernel", "kernel and field dimensions differ"));
    }
    check_point(k.dim(), x)?;
    let smooth = smooth_radius_at(f, x)?.min(smooth_radius_at(g, x)?);
    let (fx, gx) = (f.value(x), g.value(x));
    let growth = |i: Integrability<T>| match i {
        Integrability::Compact { .. } => T::zero(),
        Integrability::Growth { power, .. } => power,
    };
    let tail = match (f.integrability(), g.integrability()) {
        (Integrability::Compact { center: c1, radius: r1 }, Integrability::Compact { center: c2, radius: r2 }) => Tail::Closed {
            start: (x.dist(&c1) + r1).max(x.dist(&c2) + r2),
            constant: fx * gx,
        },
        (a, b) => Tail::Open {
            growth: growth(a) + growth(b),
        },
    };
    let problem = BilinearRay { f, g, x: *x, fx, gx };
    let tail_floor = T::one() + x.norm();
    if let Tail::Open { .. } = tail {
        // the symmetrized product must decay against r^{2s} along every sampled direction
        for q in crate::quadrature::sample_directions::<T>(k.dim(), 16) {
            let mut prev = T::infinity();
            for j in [8, 16, 24] {
                let r = tail_floor * T::lit(2f64.powi(j));
                let v = (problem.pair(&q, r) * r.powf(-s2)).abs();
                if v > prev * T::lit(1.5) && v > T::lit(1e-300) {
                    return Err(Error::NonIntegrable {
                        diagnostic: format!("|F(r)| r^(-2s) grows along direction {q}: {prev:e} -> {v:e} at r = {r:e}"),
                    });
                }
                prev = v;
            }
        }
    }
    let spec = ProfileSpec {
        dim: k.dim(),
        s,
        smooth,
        axis: f.singular_axis(x).or_else(|| g.singular_axis(x)),
        tail,
        tail_floor,
        tail_bound: T::zero(),
    };
    let prof = build_profile(&problem, &spec, &AngularBreaks::of_kernel(k), cfg)?;
    let res = prof.linear(k)?;
    if !res.value.is_finite() || !res.error_estimate.is_finite() {
        return Err(Error::NonIntegrable {
            diagnostic: format!("non-finite value {} (estimate {})", res.value, res.error_estimate),
        });
    }
    Ok(res)
}

/// `c_K(tau) = PV int [(y_N)_+^tau - 1] K(y - e_N) dy` for `-1 < tau < 2s`.
///
/// Scaling each ray through `e_N` reduces it to `psi_1(tau) * 1/2 int a(q) |q_N|^{2s} dS`,
/// with `psi_1` the one-dimensional radial integral at the point 1.
pub fn c_constant<T: Real>(k: &Kernel<T>, tau: T, cfg: &QuadratureConfig) -> Result<EvalResult<T>> {
    let s = k.order();
    if !(tau > -T::one() && tau < s + s) {
        return Err(Error::Domain(format!("tau = {tau} must lie in (-1, 2s) = (-1, {})", s + s)));
    }
    let field = HalfspacePower { dim: 1, tau };
    let prof = profile(&field, &Point::axis(0), s, &AngularBreaks::default(), cfg)?;
    let psi = |l: &ProfileLevel<T>| l.psi[0];
    let (psi_f, psi_c) = (psi(&prof.fine), psi(&prof.coarse));

    let dim = k.dim();
    let n = dim - 1;
    let b = AngularBreaks::of_kernel(k);
    let moment = |c: &QuadratureConfig| {
        let opts = SphereOptions {
            axis: Some(Point::axis(n)),
            angle_breaks: b.angles.clone(),
            zonal_breaks: b.zonal.clone(),
            tangent_exponent: 2.0 * s.as_f64(),
        };
        let rule = SphereRule::<T>::half_sphere(dim, c.sphere_order, c.grade_levels, &opts);
        let sum: T = rule
            .dirs
            .iter()
            .zip(&rule.weights)
            .map(|(q, w)| *w * k.angular(q) * q[n].abs().powf(s + s))
            .sum();
        sum * T::lit(0.5)
    };
    let (m_f, m_c) = (moment(cfg), moment(&cfg.coarsened()));
    let value = psi_f * m_f;
    Ok(EvalResult::new(value, (value - psi_c * m_c).abs()))
}

/// Evaluates `op` at every point in parallel; results keep the input order.
pub fn evaluate_points<T: Real, F>(points: &[Point<T>], op: F) -> Vec<Result<EvalResult<T>>>
where
    F: Fn(&Point<T>) -> Result<EvalResult<T>> + Sync,
{
    points.par_iter().map(&op).collect()
}
