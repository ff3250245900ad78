//! Scalar fields on R^N together with the metadata the quadrature needs: where they are
//! smooth, where rays cross their singular sets, and how they behave at infinity.

use std::sync::Arc;

use serde::Serialize;

use crate::geometry::{Domain, Shape};
use crate::{Point, Real};

/// A point where a ray `x + r q` crosses a singular set of the field, with the local
/// power-type exponent of the field there (0 for a jump, 1 for a kink).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayBreak<T> {
    pub r: T,
    pub exponent: f64,
}

/// Behaviour at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub enum Integrability<T> {
    /// Vanishes outside the closed ball.
    Compact { center: Point<T>, radius: T },
    /// `|u(y)| <= bound (1 + |y|)^power` away from the singular set along every ray that is
    /// not tangent to it, with `power < 2s`.
    Growth { bound: T, power: T },
}

pub trait ScalarField<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Point<T>) -> T;

    /// Radius of an open ball around `x` on which the field is C^2. Zero when it is not
    /// C^2 at `x`.
    fn smooth_radius(&self, _x: &Point<T>) -> T {
        T::infinity()
    }

    /// Appends crossings of the ray `x + r q` (r > 0) with the singular set.
    fn ray_breaks(&self, _x: &Point<T>, _q: &Point<T>, _out: &mut Vec<RayBreak<T>>) {}

    /// Normal of the nearest singular surface, used to grade angular quadrature toward
    /// tangential directions.
    fn singular_axis(&self, _x: &Point<T>) -> Option<Point<T>> {
        None
    }

    fn integrability(&self) -> Integrability<T>;

    /// `u(x + z) + u(x - z) - 2 u(x)`.
    fn second_difference(&self, x: &Point<T>, z: &Point<T>) -> T {
        self.value(&(*x + *z)) + self.value(&(*x - *z)) - T::lit(2.0) * self.value(x)
    }
}

pub type FieldRef<T> = Arc<dyn ScalarField<T>>;

fn domain_integrability<T: Real>(domain: &Domain<T>, power: T) -> Integrability<T> {
    match domain.bounding_ball() {
        Some((center, radius)) => Integrability::Compact { center, radius },
        None => Integrability::Growth {
            bound: T::one(),
            power: power.max(T::zero()),
        },
    }
}

fn domain_axis<T: Real>(domain: &Domain<T>, x: &Point<T>) -> Option<Point<T>> {
    let p = domain.project(x).ok()?;
    Some(domain.inward_normal(&p))
}

fn domain_breaks<T: Real>(domain: &Domain<T>, x: &Point<T>, q: &Point<T>, exponent: f64, out: &mut Vec<RayBreak<T>>) {
    for r in domain.ray_crossings(x, q) {
        out.push(RayBreak { r, exponent });
    }
}

/// `u = c`.
#[derive(Debug, Clone)]
pub struct ConstantField<T> {
    pub dim: usize,
    pub value: T,
}

impl<T: Real> ScalarField<T> for ConstantField<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &Point<T>) -> T {
        self.value
    }
    fn integrability(&self) -> Integrability<T> {
        Integrability::Growth {
            bound: self.value.abs(),
            power: T::zero(),
        }
    }
    fn second_difference(&self, _x: &Point<T>, _z: &Point<T>) -> T {
        T::zero()
    }
}

/// `slope . y + offset`.
#[derive(Debug, Clone)]
pub struct Affine<T> {
    pub dim: usize,
    pub slope: Point<T>,
    pub offset: T,
}

impl<T: Real> ScalarField<T> for Affine<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point<T>) -> T {
        self.slope.dot(x) + self.offset
    }
    fn integrability(&self) -> Integrability<T> {
        Integrability::Growth {
            bound: self.slope.norm() + self.offset.abs(),
            power: T::one(),
        }
    }
    fn second_difference(&self, _x: &Point<T>, _z: &Point<T>) -> T {
        T::zero()
    }
}

/// `|y - apex|`.
#[derive(Debug, Clone)]
pub struct Cone<T> {
    pub dim: usize,
    pub apex: Point<T>,
}

impl<T: Real> ScalarField<T> for Cone<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point<T>) -> T {
        x.dist(&self.apex)
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        x.dist(&self.apex)
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        let v = self.apex - *x;
        let r = v.dot(q);
        if r > T::zero() && (v - *q * r).norm() <= T::lit(1e-12) * v.norm() {
            out.push(RayBreak { r, exponent: 1.0 });
        }
    }
    fn integrability(&self) -> Integrability<T> {
        Integrability::Growth {
            bound: T::one() + self.apex.norm(),
            power: T::one(),
        }
    }
}

/// `|x - center|^exponent` with `exponent > 0`.
#[derive(Debug, Clone)]
pub struct RadialPower<T> {
    pub dim: usize,
    pub center: Point<T>,
    pub exponent: T,
}

impl<T: Real> ScalarField<T> for RadialPower<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point<T>) -> T {
        x.dist(&self.center).powf(self.exponent)
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        x.dist(&self.center)
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        let v = self.center - *x;
        let r = v.dot(q);
        if r > T::zero() && (v - *q * r).norm() <= T::lit(1e-12) * v.norm() {
            out.push(RayBreak {
                r,
                exponent: self.exponent.as_f64(),
            });
        }
    }
    fn integrability(&self) -> Integrability<T> {
        Integrability::Growth {
            bound: (T::one() + self.center.norm()).powf(self.exponent),
            power: self.exponent,
        }
    }
}

/// `d(x)^tau` inside the domain, zero outside.
#[derive(Debug, Clone)]
pub struct DistPow<T> {
    pub domain: Domain<T>,
    pub tau: T,
}

impl<T: Real> ScalarField<T> for DistPow<T> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        self.domain.d_tau(self.tau, x)
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        self.domain.regular_radius(x)
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        domain_breaks(&self.domain, x, q, self.tau.as_f64(), out);
        if let Some(r) = self.domain.ray_medial_point(x, q) {
            if self.domain.contains(&x.along(q, r)) {
                out.push(RayBreak { r, exponent: 1.0 });
            }
        }
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        domain_axis(&self.domain, x)
    }
    fn integrability(&self) -> Integrability<T> {
        domain_integrability(&self.domain, self.tau)
    }
}

/// `(R^2 - |x - c|^2)_+^e`; with `e = s - 1` on the unit ball this is s-harmonic.
#[derive(Debug, Clone)]
pub struct BallProfile<T> {
    pub domain: Domain<T>,
    pub exponent: T,
}

impl<T: Real> BallProfile<T> {
    pub fn unit(dim: usize, exponent: T) -> Self {
        BallProfile {
            domain: Domain::unit_ball(dim),
            exponent,
        }
    }

    fn parts(&self) -> (Point<T>, T) {
        match self.domain.shape() {
            Shape::Ball { center, radius } => (*center, *radius),
            _ => unreachable!("ball profile is built on a ball"),
        }
    }
}

impl<T: Real> ScalarField<T> for BallProfile<T> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        let (c, r) = self.parts();
        let w = r * r - x.dist(&c).powi(2);
        if w > T::zero() {
            w.powf(self.exponent)
        } else {
            T::zero()
        }
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        self.domain.signed_distance(x).abs()
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        domain_breaks(&self.domain, x, q, self.exponent.as_f64(), out);
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        let (c, _) = self.parts();
        (c - *x).normalized()
    }
    fn integrability(&self) -> Integrability<T> {
        domain_integrability(&self.domain, T::zero())
    }
}

/// `(y_N)_+^tau`.
#[derive(Debug, Clone)]
pub struct HalfspacePower<T> {
    pub dim: usize,
    pub tau: T,
}

impl<T: Real> ScalarField<T> for HalfspacePower<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point<T>) -> T {
        let y = x[self.dim - 1];
        if y > T::zero() {
            y.powf(self.tau)
        } else {
            T::zero()
        }
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        x[self.dim - 1].abs()
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        let n = self.dim - 1;
        if q[n] != T::zero() {
            let r = -x[n] / q[n];
            if r > T::zero() {
                out.push(RayBreak { r, exponent: self.tau.as_f64() });
            }
        }
    }
    fn singular_axis(&self, _x: &Point<T>) -> Option<Point<T>> {
        Some(Point::axis(self.dim - 1))
    }
    fn integrability(&self) -> Integrability<T> {
        Integrability::Growth {
            bound: T::one(),
            power: self.tau.max(T::zero()),
        }
    }
    fn second_difference(&self, x: &Point<T>, z: &Point<T>) -> T {
        let n = self.dim - 1;
        let (y, h) = (x[n], z[n]);
        if y > T::zero() && y + h > T::zero() && y - h > T::zero() {
            // y^tau [ (1+t)^tau + (1-t)^tau - 2 ] without cancellation
            let t = h / y;
            let a = (self.tau * t.ln_1p()).exp_m1();
            let b = (self.tau * (-t).ln_1p()).exp_m1();
            y.powf(self.tau) * (a + b)
        } else {
            self.value(&(*x + *z)) + self.value(&(*x - *z)) - T::lit(2.0) * self.value(x)
        }
    }
}

/// `(p' . y') (y_N)_+^{s-1}` where `y'` are the first `N - 1` coordinates.
#[derive(Debug, Clone)]
pub struct HalfspaceLinearProfile<T> {
    pub dim: usize,
    pub slope: Point<T>,
    pub s: T,
}

impl<T: Real> ScalarField<T> for HalfspaceLinearProfile<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point<T>) -> T {
        let n = self.dim - 1;
        let y = x[n];
        if y > T::zero() {
            let lin: T = (0..n).map(|k| self.slope[k] * x[k]).sum();
            lin * y.powf(self.s - T::one())
        } else {
            T::zero()
        }
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        x[self.dim - 1].abs()
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        let n = self.dim - 1;
        if q[n] != T::zero() {
            let r = -x[n] / q[n];
            if r > T::zero() {
                out.push(RayBreak {
                    r,
                    exponent: (self.s - T::one()).as_f64(),
                });
            }
        }
    }
    fn singular_axis(&self, _x: &Point<T>) -> Option<Point<T>> {
        Some(Point::axis(self.dim - 1))
    }
    fn integrability(&self) -> Integrability<T> {
        Integrability::Growth {
            bound: self.slope.norm(),
            power: self.s,
        }
    }
}

/// Indicator of the domain.
#[derive(Debug, Clone)]
pub struct Indicator<T> {
    pub domain: Domain<T>,
}

impl<T: Real> ScalarField<T> for Indicator<T> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        if self.domain.contains(x) {
            T::one()
        } else {
            T::zero()
        }
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        self.domain.signed_distance(x).abs()
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        domain_breaks(&self.domain, x, q, 0.0, out);
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        domain_axis(&self.domain, x)
    }
    fn integrability(&self) -> Integrability<T> {
        domain_integrability(&self.domain, T::zero())
    }
    fn second_difference(&self, x: &Point<T>, z: &Point<T>) -> T {
        let c = self.value(x);
        self.value(&(*x + *z)) - c + self.value(&(*x - *z)) - c
    }
}

/// `amplitude * exp(-|x - c|^2 / (2 sigma^2))`, treated as vanishing beyond 40 sigma.
#[derive(Debug, Clone)]
pub struct Gaussian<T> {
    pub dim: usize,
    pub center: Point<T>,
    pub sigma: T,
    pub amplitude: T,
}

impl<T: Real> ScalarField<T> for Gaussian<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point<T>) -> T {
        let r2 = x.dist(&self.center).powi(2);
        if r2 > (self.sigma * T::lit(40.0)).powi(2) {
            return T::zero();
        }
        self.amplitude * (-r2 / (T::lit(2.0) * self.sigma * self.sigma)).exp()
    }
    fn integrability(&self) -> Integrability<T> {
        Integrability::Compact {
            center: self.center,
            radius: self.sigma * T::lit(40.0),
        }
    }
}

/// `(1/2) x^T H x` times a smooth radial cutoff equal to 1 on `|x| <= inner` and 0 beyond `outer`.
#[derive(Debug, Clone)]
pub struct WindowedQuadratic<T> {
    pub dim: usize,
    pub hessian: [[T; 3]; 3],
    pub inner: T,
    pub outer: T,
}

impl<T: Real> WindowedQuadratic<T> {
    fn window(&self, r: T) -> T {
        let bump = |t: T| if t > T::zero() { (-t.recip()).exp() } else { T::zero() };
        let a = bump(self.outer - r);
        let b = bump(r - self.inner);
        if a + b == T::zero() {
            T::zero()
        } else {
            a / (a + b)
        }
    }
}

impl<T: Real> ScalarField<T> for WindowedQuadratic<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point<T>) -> T {
        let r = x.norm();
        if r >= self.outer {
            return T::zero();
        }
        let mut q = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                q += x[i] * self.hessian[i][j] * x[j];
            }
        }
        q * T::lit(0.5) * self.window(r)
    }
    fn integrability(&self) -> Integrability<T> {
        Integrability::Compact {
            center: Point::zero(),
            radius: self.outer,
        }
    }
}

/// Pointwise product.
#[derive(Clone)]
pub struct Product<T> {
    pub a: FieldRef<T>,
    pub b: FieldRef<T>,
}

impl<T: Real> ScalarField<T> for Product<T> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        self.a.value(x) * self.b.value(x)
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        self.a.smooth_radius(x).min(self.b.smooth_radius(x))
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        self.a.ray_breaks(x, q, out);
        self.b.ray_breaks(x, q, out);
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        self.a.singular_axis(x).or_else(|| self.b.singular_axis(x))
    }
    fn integrability(&self) -> Integrability<T> {
        match (self.a.integrability(), self.b.integrability()) {
            (c @ Integrability::Compact { radius: r1, .. }, d @ Integrability::Compact { radius: r2, .. }) => {
                if r1 <= r2 {
                    c
                } else {
                    d
                }
            }
            (c @ Integrability::Compact { .. }, _) | (_, c @ Integrability::Compact { .. }) => c,
            (Integrability::Growth { bound: m1, power: p1 }, Integrability::Growth { bound: m2, power: p2 }) => {
                Integrability::Growth {
                    bound: m1 * m2,
                    power: p1 + p2,
                }
            }
        }
    }
}

/// `sum_k c_k u_k`.
#[derive(Clone)]
pub struct LinearCombination<T> {
    pub terms: Vec<(T, FieldRef<T>)>,
}

impl<T: Real> ScalarField<T> for LinearCombination<T> {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        self.terms.iter().map(|(c, f)| *c * f.value(x)).sum()
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        self.terms
            .iter()
            .map(|(_, f)| f.smooth_radius(x))
            .fold(T::infinity(), T::min)
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        for (_, f) in &self.terms {
            f.ray_breaks(x, q, out);
        }
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        self.terms.iter().find_map(|(_, f)| f.singular_axis(x))
    }
    fn integrability(&self) -> Integrability<T> {
        let mut compact: Option<(Point<T>, T)> = None;
        let mut growth: Option<(T, T)> = None;
        for (c, f) in &self.terms {
            match f.integrability() {
                Integrability::Compact { center, radius } => {
                    compact = Some(match compact {
                        None => (center, radius),
                        Some((c0, r0)) => (c0, r0.max(center.dist(&c0) + radius)),
                    });
                }
                Integrability::Growth { bound, power } => {
                    let (m, p) = growth.unwrap_or((T::zero(), T::zero()));
                    growth = Some((m + c.abs() * bound, p.max(power)));
                }
            }
        }
        match (growth, compact) {
            (Some((bound, power)), _) => Integrability::Growth { bound, power },
            (None, Some((center, radius))) => Integrability::Compact { center, radius },
            (None, None) => Integrability::Growth {
                bound: T::zero(),
                power: T::zero(),
            },
        }
    }
    fn second_difference(&self, x: &Point<T>, z: &Point<T>) -> T {
        self.terms.iter().map(|(c, f)| *c * f.second_difference(x, z)).sum()
    }
}

/// `y -> u(y - shift)`.
#[derive(Clone)]
pub struct Shifted<T> {
    pub inner: FieldRef<T>,
    pub shift: Point<T>,
}

impl<T: Real> ScalarField<T> for Shifted<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        self.inner.value(&(*x - self.shift))
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        self.inner.smooth_radius(&(*x - self.shift))
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        self.inner.ray_breaks(&(*x - self.shift), q, out);
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        self.inner.singular_axis(&(*x - self.shift))
    }
    fn integrability(&self) -> Integrability<T> {
        match self.inner.integrability() {
            Integrability::Compact { center, radius } => Integrability::Compact {
                center: center + self.shift,
                radius,
            },
            Integrability::Growth { bound, power } => Integrability::Growth {
                bound: bound * (T::one() + self.shift.norm()).powf(power),
                power,
            },
        }
    }
    fn second_difference(&self, x: &Point<T>, z: &Point<T>) -> T {
        self.inner.second_difference(&(*x - self.shift), z)
    }
}

/// `y -> u(lambda y)`.
#[derive(Clone)]
pub struct Dilated<T> {
    pub inner: FieldRef<T>,
    pub factor: T,
}

impl<T: Real> ScalarField<T> for Dilated<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        self.inner.value(&(*x * self.factor))
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        self.inner.smooth_radius(&(*x * self.factor)) / self.factor
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        let start = out.len();
        self.inner.ray_breaks(&(*x * self.factor), q, out);
        for b in &mut out[start..] {
            b.r /= self.factor;
        }
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        self.inner.singular_axis(&(*x * self.factor))
    }
    fn integrability(&self) -> Integrability<T> {
        match self.inner.integrability() {
            Integrability::Compact { center, radius } => Integrability::Compact {
                center: center * self.factor.recip(),
                radius: radius / self.factor,
            },
            Integrability::Growth { bound, power } => Integrability::Growth {
                bound: bound * self.factor.max(T::one()).powf(power),
                power,
            },
        }
    }
    fn second_difference(&self, x: &Point<T>, z: &Point<T>) -> T {
        self.inner.second_difference(&(*x * self.factor), &(*z * self.factor))
    }
}

/// Checks the declared growth bound at the given sample points; returns the first violation.
pub fn growth_violation<T: Real>(field: &dyn ScalarField<T>, samples: &[Point<T>]) -> Option<Point<T>> {
    let Integrability::Growth { bound, power } = field.integrability() else {
        return match field.integrability() {
            Integrability::Compact { center, radius } => samples
                .iter()
                .find(|x| x.dist(&center) > radius && field.value(x) != T::zero())
                .copied(),
            _ => None,
        };
    };
    samples
        .iter()
        .find(|x| field.value(x).abs() > bound * (T::one() + x.norm()).powf(power) * (T::one() + T::lit(1e-12)))
        .copied()
}
