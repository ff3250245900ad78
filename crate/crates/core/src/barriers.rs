//! Boundary barriers for large solutions: moduli of continuity, the extension of boundary
//! data, the auxiliary supersolutions `w1`, `w2`, the barriers `V_y^eta`, `U_y^eta` with
//! their envelopes, and sampled certification of the operator inequalities.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{Cone, DistPow, Integrability, Product, RayBreak, ScalarField};
use crate::geometry::Domain;
use crate::kernels::{normalizing_constant, EllipticityBounds, KernelFamily};
use crate::nonlocal_eval::{profile, AngularBreaks, DirectionalProfile, EvalResult, QuadratureConfig};
use crate::{Point, Real};

/// Boundary data as an evaluator on boundary points.
pub type BoundaryFn<T> = Arc<dyn Fn(&Point<T>) -> T + Send + Sync>;

/// `t^3 (10 - 15 t + 6 t^2)`, clamped to `[0, 1]`.
pub(crate) fn quintic_step<T: Real>(t: T) -> T {
    let t = t.max(T::zero()).min(T::one());
    t * t * t * (T::lit(10.0) - T::lit(15.0) * t + T::lit(6.0) * t * t)
}

/// Piecewise-linear concave nondecreasing function with `m(0) = 0`, constant after its
/// last knot.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Modulus<T> {
    knots: Vec<(T, T)>,
}

impl<T: Real> Modulus<T> {
    pub fn zero() -> Self {
        Modulus {
            knots: vec![(T::zero(), T::zero())],
        }
    }

    /// Least concave majorant through the origin of the samples `(t, |h difference|)`,
    /// multiplied by `inflate`.
    pub fn from_samples(samples: &[(T, T)], inflate: T) -> Self {
        let mut pts: Vec<(T, T)> = samples
            .iter()
            .copied()
            .filter(|(t, v)| t.is_finite() && v.is_finite() && *t > T::zero())
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut run = T::zero();
        for p in pts.iter_mut() {
            run = run.max(p.1.abs());
            p.1 = run;
        }
        let mut hull: Vec<(T, T)> = vec![(T::zero(), T::zero())];
        for p in pts {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross >= T::zero() {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        if hull.iter().all(|k| k.1 == T::zero()) {
            return Self::zero();
        }
        Modulus {
            knots: hull.into_iter().map(|(t, v)| (t, v * inflate)).collect(),
        }
    }

    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    pub fn is_zero(&self) -> bool {
        self.knots.iter().all(|k| k.1 == T::zero())
    }

    pub fn eval(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        for w in self.knots.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        self.knots.last().map(|k| k.1).unwrap_or(T::zero())
    }

    /// Least-squares slope of `log m` against `log t` over the knots in the lower half of
    /// the sampled range.
    pub fn holder_exponent(&self) -> Option<f64> {
        let t_max = self.knots.last()?.0.as_f64();
        let pts: Vec<(f64, f64)> = self
            .knots
            .iter()
            .filter(|k| k.0 > T::zero() && k.1 > T::zero() && k.0.as_f64() <= 0.5 * t_max)
            .map(|k| (k.0.as_f64().ln(), k.1.as_f64().ln()))
            .collect();
        crate::analysis::fit_line(&pts).map(|f| f.0)
    }
}

/// Boundary data with its extension: `h(project(x))` within `inradius / 4` of the
/// boundary, the boundary mean beyond `inradius / 2`, and a quintic blend between.
#[derive(Clone)]
pub struct BoundaryData<T> {
    domain: Domain<T>,
    h: BoundaryFn<T>,
    mean: T,
}

impl<T: Real> BoundaryData<T> {
    pub fn new(domain: Domain<T>, h: BoundaryFn<T>) -> Self {
        let samples = domain.boundary_samples(256);
        let mean = samples.iter().map(|y| h(y)).sum::<T>() / T::from_usize_lossy(samples.len().max(1));
        BoundaryData { domain, h, mean }
    }

    pub fn constant(domain: Domain<T>, value: T) -> Self {
        BoundaryData {
            domain,
            h: Arc::new(move |_| value),
            mean: value,
        }
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// `h` at a boundary point.
    pub fn at_boundary(&self, y: &Point<T>) -> T {
        (self.h)(y)
    }

    /// The global extension.
    pub fn value(&self, x: &Point<T>) -> T {
        let d = self.domain.signed_distance(x);
        let inner = self.domain.inradius() * T::lit(0.25);
        let chi = T::one() - quintic_step((d - inner) / inner);
        if chi == T::zero() {
            return self.mean;
        }
        match self.domain.project(x) {
            Ok(p) => chi * (self.h)(&p) + (T::one() - chi) * self.mean,
            Err(_) => self.mean,
        }
    }
}

/// Extends `h` and fits its modulus from pairs of boundary and near-boundary points,
/// inflated by 10%.
pub fn extend_boundary_data<T: Real>(dom: &Domain<T>, h: BoundaryFn<T>, n_boundary: usize) -> (BoundaryData<T>, Modulus<T>) {
    let data = BoundaryData::new(dom.clone(), h);
    let bnd = dom.boundary_samples(n_boundary);
    let mut probes = bnd.clone();
    let r = dom.inradius();
    probes.extend(dom.layer_points(n_boundary, r * T::lit(1e-3), r * T::lit(0.6)));
    let hy: Vec<T> = bnd.iter().map(|y| data.at_boundary(y)).collect();
    let samples: Vec<(T, T)> = probes
        .par_iter()
        .flat_map_iter(|x| {
            let hx = data.value(x);
            bnd.iter()
                .zip(&hy)
                .map(move |(y, v)| (x.dist(y), (hx - *v).abs()))
                .collect::<Vec<_>>()
        })
        .collect();
    let m = Modulus::from_samples(&samples, T::lit(1.1));
    (data, m)
}

/// Operator used in certification.
#[derive(Debug, Clone)]
pub enum OperatorSpec<T> {
    /// `inf_i sup_j L_ij`.
    Family(KernelFamily<T>),
    /// Extremal operators with angular bounds; `M+` for supersolutions and `M-` for
    /// subsolutions.
    Pucci { bounds: EllipticityBounds<T>, order: T },
}

impl<T: Real> OperatorSpec<T> {
    pub fn order(&self) -> T {
        match self {
            OperatorSpec::Family(f) => f.order(),
            OperatorSpec::Pucci { order, .. } => *order,
        }
    }

    pub fn dim_check(&self, dim: usize) -> Result<()> {
        match self {
            OperatorSpec::Family(f) if f.dim() != dim => Err(invalid("operator", "family dimension differs from the domain")),
            _ => Ok(()),
        }
    }

    fn breaks(&self) -> AngularBreaks {
        match self {
            OperatorSpec::Family(f) => AngularBreaks::of_family(f),
            OperatorSpec::Pucci { .. } => AngularBreaks::default(),
        }
    }

    /// Bounds `C (lo, hi)` around the normalizing constant of the isotropic kernel.
    pub fn pucci_around_isotropic(dim: usize, order: T, lo: f64, hi: f64) -> Result<Self> {
        let c = normalizing_constant(dim, order.as_f64())?;
        Ok(OperatorSpec::Pucci {
            bounds: EllipticityBounds::new(T::lit(c * lo), T::lit(c * hi))?,
            order,
        })
    }

    fn apply(&self, prof: &DirectionalProfile<T>, sub: bool) -> Result<EvalResult<T>> {
        match self {
            OperatorSpec::Family(f) => prof.isaacs(f),
            OperatorSpec::Pucci { bounds, .. } => Ok(prof.pucci(bounds, !sub)),
        }
    }

    fn profile_at(&self, field: &dyn ScalarField<T>, x: &Point<T>, cfg: &QuadratureConfig) -> Result<DirectionalProfile<T>> {
        profile(field, x, self.order(), &self.breaks(), cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationPoint {
    pub x: Vec<f64>,
    pub distance: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub required: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub passed: bool,
    /// Supersolution (`value + error <= required`) or subsolution (`value - error >= required`).
    pub kind: String,
    /// The tuned constant (amplitude, coefficient or C2) the report refers to.
    pub parameter: f64,
    pub worst: Option<usize>,
    pub points: Vec<CertificationPoint>,
}

impl CertificationReport {
    fn build(points: Vec<CertificationPoint>, sub: bool, parameter: f64) -> Self {
        let slack = |p: &CertificationPoint| {
            if sub {
                (p.value - p.error_estimate) - p.required
            } else {
                p.required - (p.value + p.error_estimate)
            }
        };
        let worst = points
            .iter()
            .enumerate()
            .min_by(|a, b| slack(a.1).total_cmp(&slack(b.1)))
            .map(|(i, _)| i);
        CertificationReport {
            passed: points.iter().all(|p| p.passed),
            kind: if sub { "subsolution" } else { "supersolution" }.into(),
            parameter,
            worst,
            points,
        }
    }

    fn failure(&self) -> Error {
        match self.worst.map(|i| &self.points[i]) {
            Some(p) => Error::CertificationFailed {
                point: format!("{:?}", p.x),
                value: p.value + if self.kind == "subsolution" { -p.error_estimate } else { p.error_estimate },
                required: p.required,
            },
            None => Error::InsufficientData("no certification points".into()),
        }
    }
}

fn cert_point<T: Real>(dom: &Domain<T>, x: &Point<T>, r: EvalResult<T>, required: T, sub: bool) -> CertificationPoint {
    let passed = if sub {
        r.value - r.error_estimate >= required
    } else {
        r.value + r.error_estimate <= required
    };
    CertificationPoint {
        x: x.to_f64(dom.dim()),
        distance: dom.distance(x).as_f64(),
        value: r.value.as_f64(),
        error_estimate: r.error_estimate.as_f64(),
        required: required.as_f64(),
        passed: passed && r.value.is_finite(),
    }
}

/// Evaluates the operator on `field` at every point and compares with `required(x)`:
/// supersolutions need `value + error <= required`, subsolutions `value - error >= required`.
pub fn verify_supersolution<T: Real>(
    field: &dyn ScalarField<T>,
    op: &OperatorSpec<T>,
    points: &[Point<T>],
    required: &(dyn Fn(&Point<T>) -> T + Sync),
    sub: bool,
    cfg: &QuadratureConfig,
) -> Result<CertificationReport> {
    op.dim_check(field.dim())?;
    let dom_dim = field.dim();
    let rows: Vec<Result<CertificationPoint>> = points
        .par_iter()
        .map(|x| {
            let prof = op.profile_at(field, x, cfg)?;
            let r = op.apply(&prof, sub)?;
            let req = required(x);
            let passed = if sub {
                r.value - r.error_estimate >= req
            } else {
                r.value + r.error_estimate <= req
            };
            Ok(CertificationPoint {
                x: x.to_f64(dom_dim),
                distance: f64::NAN,
                value: r.value.as_f64(),
                error_estimate: r.error_estimate.as_f64(),
                required: req.as_f64(),
                passed: passed && r.value.is_finite(),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CertificationReport::build(rows, sub, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierConfig {
    /// Exponent of `w1 = A d^beta`.
    pub beta: f64,
    /// Exponent of `w2 ~ d^tau` near the boundary.
    pub tau: f64,
    /// Pucci bounds for `w1`, `w2`, as multiples of the isotropic normalizing constant.
    pub pucci_bounds: (f64, f64),
    pub n_layer: usize,
    pub n_interior: usize,
    /// Relative safety margin on the required inequalities.
    pub margin: f64,
    /// Distance band of layer certification points, as multiples of the inradius.
    pub layer_band: (f64, f64),
    pub n_anchors: usize,
    pub n_eta: usize,
    pub n_modulus: usize,
    pub max_doublings: usize,
    pub quadrature: QuadratureConfig,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig {
            beta: 0.2,
            tau: 0.25,
            pucci_bounds: (0.8, 1.25),
            n_layer: 200,
            n_interior: 60,
            margin: 0.1,
            layer_band: (0.01, 0.1),
            n_anchors: 64,
            n_eta: 8,
            n_modulus: 128,
            max_doublings: 30,
            quadrature: QuadratureConfig::default(),
        }
    }
}

impl BarrierConfig {
    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        if !(self.pucci_bounds.0 > 0.0 && self.pucci_bounds.1 >= self.pucci_bounds.0) {
            return Err(invalid("pucci_bounds", "need 0 < lower <= upper"));
        }
        if !(self.layer_band.0 > 0.0 && self.layer_band.1 > self.layer_band.0 && self.layer_band.1 < 0.25) {
            return Err(invalid("layer_band", "need 0 < lower < upper < 0.25"));
        }
        if self.n_layer == 0 || self.n_anchors == 0 || self.n_eta == 0 {
            return Err(invalid("n_layer", "sample counts must be positive"));
        }
        if !(self.margin >= 0.0) {
            return Err(invalid("margin", "must be non-negative"));
        }
        Ok(())
    }
}

/// `A d^beta` with its certification `M+ w1 <= -1`.
#[derive(Debug, Clone)]
pub struct W1<T> {
    pub domain: Domain<T>,
    pub beta: T,
    pub amplitude: T,
    pub report: CertificationReport,
}

impl<T: Real> W1<T> {
    pub fn value(&self, x: &Point<T>) -> T {
        self.amplitude * self.domain.d_tau(self.beta, x)
    }
}

/// Builds `w1 = A d^beta` with `A` set from the sampled operator values; `beta` is halved
/// (at most three times) when some sample has a non-negative value.
pub fn build_w1<T: Real>(dom: &Domain<T>, beta: T, s: T, cfg: &BarrierConfig) -> Result<W1<T>> {
    cfg.validate()?;
    if !(beta > T::zero() && beta < s) {
        return Err(Error::Domain(format!("beta = {beta} must lie in (0, s) = (0, {s})")));
    }
    let op = OperatorSpec::pucci_around_isotropic(dom.dim(), s, cfg.pucci_bounds.0, cfg.pucci_bounds.1)?;
    let r = dom.inradius();
    let mut points = dom.layer_points(cfg.n_layer, r * T::lit(cfg.layer_band.0), r * T::lit(0.25));
    points.extend(dom.interior_points(cfg.n_interior, r * T::lit(0.25)));
    let mut beta = beta;
    let mut last = None;
    for _ in 0..4 {
        let field = DistPow { domain: dom.clone(), tau: beta };
        let vals = eval_points(&field, &op, &points, false, &cfg.quadrature)?;
        let worst = vals.iter().map(|v| -(v.value + v.error_estimate)).fold(T::infinity(), T::min);
        if worst > T::zero() {
            let amplitude = T::lit(1.0 + cfg.margin) / worst;
            let rows = points
                .iter()
                .zip(&vals)
                .map(|(x, v)| {
                    cert_point(
                        dom,
                        x,
                        EvalResult::new(v.value * amplitude, v.error_estimate * amplitude),
                        -T::one(),
                        false,
                    )
                })
                .collect();
            return Ok(W1 {
                domain: dom.clone(),
                beta,
                amplitude,
                report: CertificationReport::build(rows, false, amplitude.as_f64()),
            });
        }
        let rows = points.iter().zip(&vals).map(|(x, v)| cert_point(dom, x, *v, T::zero(), false)).collect();
        last = Some(CertificationReport::build(rows, false, beta.as_f64()));
        beta *= T::lit(0.5);
    }
    Err(last.map(|r| r.failure()).unwrap_or_else(|| Error::InsufficientData("no samples".into())))
}

fn eval_points<T: Real>(
    field: &dyn ScalarField<T>,
    op: &OperatorSpec<T>,
    points: &[Point<T>],
    sub: bool,
    cfg: &QuadratureConfig,
) -> Result<Vec<EvalResult<T>>> {
    points
        .par_iter()
        .map(|x| op.apply(&op.profile_at(field, x, cfg)?, sub))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// `kappa l(d) + b d^beta` where `l(d) = d^tau` near the boundary, blended to the constant
/// `delta0^tau` over `delta0/2 < d < delta0`; zero outside the domain.
#[derive(Debug, Clone)]
pub struct W2Field<T> {
    pub domain: Domain<T>,
    pub tau: T,
    pub delta0: T,
    pub kappa: T,
    pub beta: T,
    pub b: T,
}

impl<T: Real> W2Field<T> {
    fn layer_part(&self, d: T) -> T {
        let chi = T::one() - quintic_step((d - self.delta0 * T::lit(0.5)) / (self.delta0 * T::lit(0.5)));
        chi * d.powf(self.tau) + (T::one() - chi) * self.delta0.powf(self.tau)
    }
}

impl<T: Real> ScalarField<T> for W2Field<T> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        let d = self.domain.distance(x);
        if d <= T::zero() || !self.domain.contains(x) {
            return T::zero();
        }
        let mut v = self.kappa * self.layer_part(d);
        if self.b != T::zero() {
            v += self.b * d.powf(self.beta);
        }
        v
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        let reg = self.domain.regular_radius(x);
        if self.b == T::zero() {
            reg.max(self.domain.signed_distance(x) - self.delta0)
        } else {
            reg
        }
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        let e = if self.b == T::zero() { self.tau } else { self.tau.min(self.beta) };
        for r in self.domain.ray_crossings(x, q) {
            out.push(RayBreak { r, exponent: e.as_f64() });
        }
        if self.b != T::zero() {
            if let Some(r) = self.domain.ray_medial_point(x, q) {
                out.push(RayBreak { r, exponent: 1.0 });
            }
        }
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        let p = self.domain.project(x).ok()?;
        Some(self.domain.inward_normal(&p))
    }
    fn integrability(&self) -> Integrability<T> {
        match self.domain.bounding_ball() {
            Some((center, radius)) => Integrability::Compact { center, radius },
            None => Integrability::Growth {
                bound: self.kappa * self.delta0.powf(self.tau) + self.b,
                power: self.beta.max(T::zero()),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct W2<T> {
    pub field: Arc<W2Field<T>>,
    pub report: CertificationReport,
}

/// Builds `w2` with `M+ w2 <= -d^{tau - 2s}` on the layer `d < delta0 = inradius/4` and
/// `M+ w2 <= 0` inside: `kappa` is read from the samples closest to the boundary, the
/// coefficient of `w1` doubles until every sample passes.
pub fn build_w2<T: Real>(dom: &Domain<T>, tau: T, w1: &W1<T>, s: T, cfg: &BarrierConfig) -> Result<W2<T>> {
    cfg.validate()?;
    if !(tau > T::zero() && tau < s) {
        return Err(Error::Domain(format!("tau = {tau} must lie in (0, s) = (0, {s})")));
    }
    let op = OperatorSpec::pucci_around_isotropic(dom.dim(), s, cfg.pucci_bounds.0, cfg.pucci_bounds.1)?;
    let r = dom.inradius();
    let delta0 = r * T::lit(0.25);
    let layer = dom.layer_points(cfg.n_layer, r * T::lit(cfg.layer_band.0), delta0 * T::lit(0.999));
    let interior = dom.interior_points(cfg.n_interior, delta0);
    let points: Vec<Point<T>> = layer.iter().chain(&interior).copied().collect();
    let n_layer = layer.len();
    let ell = W2Field {
        domain: dom.clone(),
        tau,
        delta0,
        kappa: T::one(),
        beta: w1.beta,
        b: T::zero(),
    };
    let power = DistPow { domain: dom.clone(), tau: w1.beta };
    let profs: Vec<(DirectionalProfile<T>, DirectionalProfile<T>)> = points
        .par_iter()
        .map(|x| Ok((op.profile_at(&ell, x, &cfg.quadrature)?, op.profile_at(&power, x, &cfg.quadrature)?)))
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let s2 = s + s;
    let target = |x: &Point<T>| dom.distance(x).powf(tau - s2);
    let mut kappa_need = T::zero();
    for (i, x) in layer.iter().enumerate() {
        if dom.distance(x) > delta0 * T::lit(0.25) {
            continue;
        }
        let v = op.apply(&profs[i].0, false)?;
        let neg = -(v.value + v.error_estimate);
        if !(neg > T::zero()) {
            let rows = vec![cert_point(dom, x, v, T::zero(), false)];
            return Err(CertificationReport::build(rows, false, 0.0).failure());
        }
        kappa_need = kappa_need.max(target(x) / neg);
    }
    if kappa_need == T::zero() {
        return Err(Error::InsufficientData("no layer samples close to the boundary".into()));
    }
    let kappa = kappa_need * T::lit(1.0 + cfg.margin);
    let mut b = w1.amplitude;
    let mut report = None;
    for _ in 0..=cfg.max_doublings {
        let rows: Vec<CertificationPoint> = points
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mixed = scale_profile(&profs[i].0, kappa).combine(b, &profs[i].1)?;
                let v = op.apply(&mixed, false)?;
                let req = if i < n_layer { -target(x) } else { T::zero() };
                Ok(cert_point(dom, x, v, req, false))
            })
            .collect::<Vec<Result<_>>>()
            .into_iter()
            .collect::<Result<_>>()?;
        let rep = CertificationReport::build(rows, false, b.as_f64());
        if rep.passed {
            let field = Arc::new(W2Field { kappa, b, ..ell });
            return Ok(W2 { field, report: rep });
        }
        report = Some(rep);
        b *= T::lit(2.0);
    }
    Err(report.map(|r| r.failure()).unwrap_or_else(|| Error::InsufficientData("no samples".into())))
}

fn scale_profile<T: Real>(p: &DirectionalProfile<T>, c: T) -> DirectionalProfile<T> {
    let mut out = p.clone();
    for l in [&mut out.fine, &mut out.coarse] {
        for v in l.psi.iter_mut() {
            *v *= c;
        }
    }
    out.tail_bound = p.tail_bound * c.abs();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    Upper,
    Lower,
}

/// `V_y^eta = (h(y) + m(eta) + m(eta)/eta |x - y|) d_+^{s-1} + C2^eta w2` (upper) and
/// `U_y^eta = (h(y) - m(eta) - m(eta)/eta |x - y|) d_+^{s-1} - C2^eta w2` (lower).
#[derive(Debug, Clone)]
pub struct BarrierFunction<T> {
    pub anchor: Point<T>,
    pub eta: T,
    pub h_anchor: T,
    pub m_eta: T,
    pub c2_eta: T,
    pub kind: BarrierKind,
    pub s: T,
    domain: Domain<T>,
    w2: Arc<W2Field<T>>,
}

pub fn make_barrier<T: Real>(
    y: &Point<T>,
    eta: T,
    data: &BoundaryData<T>,
    m: &Modulus<T>,
    w2: Arc<W2Field<T>>,
    c2: T,
    s: T,
    kind: BarrierKind,
) -> Result<BarrierFunction<T>> {
    let dom = data.domain();
    let off = dom.signed_distance(y).abs();
    if off > T::lit(1e-9) * (T::one() + dom.diameter()) {
        return Err(Error::NotOnBoundary {
            point: y.to_string(),
            distance: off.as_f64(),
        });
    }
    if !(eta > T::zero() && eta < T::one()) {
        return Err(Error::Domain(format!("eta = {eta} must lie in (0, 1)")));
    }
    if !(c2 >= T::zero()) {
        return Err(invalid("C2", "must be non-negative"));
    }
    let m_eta = m.eval(eta);
    Ok(BarrierFunction {
        anchor: *y,
        eta,
        h_anchor: data.at_boundary(y),
        m_eta,
        c2_eta: c2 * m_eta / eta,
        kind,
        s,
        domain: dom.clone(),
        w2,
    })
}

impl<T: Real> BarrierFunction<T> {
    fn sign(&self) -> T {
        match self.kind {
            BarrierKind::Upper => T::one(),
            BarrierKind::Lower => -T::one(),
        }
    }

    pub fn slope(&self) -> T {
        self.m_eta / self.eta
    }

    /// Coefficient of `d^{s-1}` at `x`.
    pub fn coefficient(&self, x: &Point<T>) -> T {
        self.h_anchor + self.sign() * (self.m_eta + self.slope() * x.dist(&self.anchor))
    }

    pub fn w2(&self) -> &Arc<W2Field<T>> {
        &self.w2
    }
}

impl<T: Real> ScalarField<T> for BarrierFunction<T> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &Point<T>) -> T {
        let d = self.domain.distance(x);
        if d <= T::zero() || !self.domain.contains(x) {
            return T::zero();
        }
        self.coefficient(x) * d.powf(self.s - T::one()) + self.sign() * self.c2_eta * self.w2.value(x)
    }
    fn smooth_radius(&self, x: &Point<T>) -> T {
        self.domain.regular_radius(x).min(x.dist(&self.anchor))
    }
    fn ray_breaks(&self, x: &Point<T>, q: &Point<T>, out: &mut Vec<RayBreak<T>>) {
        for r in self.domain.ray_crossings(x, q) {
            out.push(RayBreak {
                r,
                exponent: (self.s - T::one()).as_f64(),
            });
        }
        if let Some(r) = self.domain.ray_medial_point(x, q) {
            out.push(RayBreak { r, exponent: 1.0 });
        }
    }
    fn singular_axis(&self, x: &Point<T>) -> Option<Point<T>> {
        let p = self.domain.project(x).ok()?;
        Some(self.domain.inward_normal(&p))
    }
    fn integrability(&self) -> Integrability<T> {
        self.w2.integrability()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    Inf,
    Sup,
}

/// Pointwise infimum (`V`) or supremum (`U`) over a finite set of barriers.
#[derive(Debug, Clone)]
pub struct BarrierEnvelope<T> {
    members: Vec<BarrierFunction<T>>,
    mode: EnvelopeMode,
}

impl<T: Real> BarrierEnvelope<T> {
    pub fn new(members: Vec<BarrierFunction<T>>, mode: EnvelopeMode) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyIndexSet("barrier anchor grid"));
        }
        Ok(BarrierEnvelope { members, mode })
    }

    pub fn members(&self) -> &[BarrierFunction<T>] {
        &self.members
    }

    pub fn mode(&self) -> EnvelopeMode {
        self.mode
    }

    /// Index of the member realizing the envelope at `x` (lowest index on ties).
    pub fn active(&self, x: &Point<T>) -> usize {
        let mut best = 0;
        let mut val = self.members[0].value(x);
        for (i, m) in self.members.iter().enumerate().skip(1) {
            let v = m.value(x);
            let better = match self.mode {
                EnvelopeMode::Inf => v < val,
                EnvelopeMode::Sup => v > val,
            };
            if better {
                best = i;
                val = v;
            }
        }
        best
    }

    pub fn value(&self, x: &Point<T>) -> T {
        self.members[self.active(x)].value(x)
    }
}

pub fn envelope_eval<T: Real>(env: &BarrierEnvelope<T>, x: &Point<T>) -> Result<T> {
    if env.members.is_empty() {
        return Err(Error::EmptyIndexSet("barrier anchor grid"));
    }
    Ok(env.value(x))
}

/// Everything produced by [`build_barrier_set`].
#[derive(Clone)]
pub struct BarrierSet<T> {
    pub data: BoundaryData<T>,
    pub modulus: Modulus<T>,
    pub w1: W1<T>,
    pub w2: W2<T>,
    pub c2_upper: T,
    pub c2_lower: T,
    pub upper: BarrierEnvelope<T>,
    pub lower: BarrierEnvelope<T>,
    pub upper_report: CertificationReport,
    pub lower_report: CertificationReport,
}

fn anchor_grid<T: Real>(
    data: &BoundaryData<T>,
    m: &Modulus<T>,
    w2: &Arc<W2Field<T>>,
    c2: T,
    s: T,
    kind: BarrierKind,
    cfg: &BarrierConfig,
) -> Result<Vec<BarrierFunction<T>>> {
    let anchors = data.domain().boundary_samples(cfg.n_anchors);
    let mut out = Vec::with_capacity(anchors.len() * cfg.n_eta);
    for y in &anchors {
        for k in 1..=cfg.n_eta {
            let eta = T::lit(0.5f64.powi(k as i32));
            out.push(make_barrier(y, eta, data, m, w2.clone(), c2, s, kind)?);
        }
    }
    Ok(out)
}

/// Certifies the envelope at the layer points with `C2` doubling from 1: at every point
/// the active member must satisfy `I V <= -(1 + margin) (C2^eta / 2) d^{tau - 2s}` (upper)
/// or the mirrored inequality (lower). With a zero modulus the barriers reduce to
/// `h d^{s-1}`, `C2` has no effect, and the report is returned as evaluated.
#[allow(clippy::too_many_arguments)]
fn certify_envelope<T: Real>(
    data: &BoundaryData<T>,
    m: &Modulus<T>,
    w2: &W2<T>,
    s: T,
    kind: BarrierKind,
    op: &OperatorSpec<T>,
    points: &[Point<T>],
    cfg: &BarrierConfig,
) -> Result<(T, BarrierEnvelope<T>, CertificationReport)> {
    let dom = data.domain();
    let qcfg = &cfg.quadrature;
    let sub = kind == BarrierKind::Lower;
    let dpow: Arc<dyn ScalarField<T>> = Arc::new(DistPow {
        domain: dom.clone(),
        tau: s - T::one(),
    });
    let base: Vec<(DirectionalProfile<T>, DirectionalProfile<T>)> = points
        .par_iter()
        .map(|x| Ok((op.profile_at(dpow.as_ref(), x, qcfg)?, op.profile_at(w2.field.as_ref(), x, qcfg)?)))
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let mut cone_cache: HashMap<(usize, usize), DirectionalProfile<T>> = HashMap::new();
    let s2 = s + s;
    let tau = w2.field.tau;
    let mut c2 = T::one();
    let mut last = None;
    for _ in 0..=cfg.max_doublings {
        let members = anchor_grid(data, m, &w2.field, c2, s, kind, cfg)?;
        let env = BarrierEnvelope::new(members, if sub { EnvelopeMode::Sup } else { EnvelopeMode::Inf })?;
        let actives: Vec<usize> = points.iter().map(|x| env.active(x)).collect();
        let n_eta = cfg.n_eta;
        let missing: Vec<(usize, usize)> = actives
            .iter()
            .enumerate()
            .map(|(i, a)| (i, a / n_eta))
            .filter(|key| !cone_cache.contains_key(key))
            .collect();
        let computed: Vec<((usize, usize), DirectionalProfile<T>)> = missing
            .par_iter()
            .map(|&(i, anchor)| {
                let apex = env.members()[anchor * n_eta].anchor;
                let cone = Product {
                    a: dpow.clone(),
                    b: Arc::new(Cone { dim: dom.dim(), apex }),
                };
                Ok(((i, anchor), op.profile_at(&cone, &points[i], qcfg)?))
            })
            .collect::<Vec<Result<_>>>()
            .into_iter()
            .collect::<Result<_>>()?;
        cone_cache.extend(computed);
        let rows: Vec<CertificationPoint> = points
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let b = &env.members()[actives[i]];
                let sign = if sub { -T::one() } else { T::one() };
                let cone = &cone_cache[&(i, actives[i] / n_eta)];
                let prof = scale_profile(&base[i].0, b.h_anchor + sign * b.m_eta)
                    .combine(sign * b.slope(), cone)?
                    .combine(sign * b.c2_eta, &base[i].1)?;
                let v = op.apply(&prof, sub)?;
                let mag = T::lit(1.0 + cfg.margin) * b.c2_eta * T::lit(0.5) * dom.distance(x).powf(tau - s2);
                Ok(cert_point(dom, x, v, -sign * mag, sub))
            })
            .collect::<Vec<Result<_>>>()
            .into_iter()
            .collect::<Result<_>>()?;
        let rep = CertificationReport::build(rows, sub, c2.as_f64());
        if rep.passed || m.is_zero() {
            return Ok((c2, env, rep));
        }
        last = Some(rep);
        c2 *= T::lit(2.0);
    }
    Err(last.map(|r| r.failure()).unwrap_or_else(|| Error::InsufficientData("no samples".into())))
}

/// Fits the modulus of `h`, builds and certifies `w1`, `w2`, and finds `C2` for both
/// envelopes. `op` is the operator the barriers are certified against.
pub fn build_barrier_set<T: Real>(
    dom: &Domain<T>,
    h: BoundaryFn<T>,
    s: T,
    op: &OperatorSpec<T>,
    cfg: &BarrierConfig,
) -> Result<BarrierSet<T>> {
    cfg.validate()?;
    op.dim_check(dom.dim())?;
    if (op.order() - s).abs() > T::lit(1e-12) {
        return Err(invalid("operator", "operator order differs from s"));
    }
    let (data, modulus) = extend_boundary_data(dom, h, cfg.n_modulus);
    let w1 = build_w1(dom, T::lit(cfg.beta), s, cfg)?;
    let w2 = build_w2(dom, T::lit(cfg.tau), &w1, s, cfg)?;
    let r = dom.inradius();
    let points = dom.layer_points(cfg.n_layer, r * T::lit(cfg.layer_band.0), r * T::lit(cfg.layer_band.1));
    let (c2_upper, upper, upper_report) = certify_envelope(&data, &modulus, &w2, s, BarrierKind::Upper, op, &points, cfg)?;
    let (c2_lower, lower, lower_report) = certify_envelope(&data, &modulus, &w2, s, BarrierKind::Lower, op, &points, cfg)?;
    Ok(BarrierSet {
        data,
        modulus,
        w1,
        w2,
        c2_upper,
        c2_lower,
        upper,
        lower,
        upper_report,
        lower_report,
    })
}
