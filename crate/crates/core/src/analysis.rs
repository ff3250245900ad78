//! Experiments on computed and closed-form solutions. Every report is plain data with a
//! deterministic layout, so two runs with the same inputs serialize identically.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::barriers::BoundaryFn;
use crate::field::{Affine, DistPow, HalfspaceLinearProfile, HalfspacePower, Indicator, Product, RadialPower, ScalarField};
use crate::kernels::normalizing_constant;
use crate::nonlocal_eval::{bilinear_form, c_constant, frac_laplacian, linear_op, pucci_minus};
use crate::quadrature::{SphereOptions, SphereRule};
use crate::{Anisotropy, Domain, EllipticityBounds, Error, Kernel, Point, QuadratureConfig, Result};

/// A pointwise evaluator: a closed-form field or an interpolated discrete solution.
pub type Probe<'a> = &'a (dyn Fn(&Point<f64>) -> f64 + Sync);

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Least-squares line through `(x, y)` pairs: slope, intercept and the standard error of
/// the slope.
pub fn fit_line(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, intercept, se))
}

fn check_boundary_point(dom: &Domain<f64>, x0: &Point<f64>) -> Result<()> {
    let d = dom.signed_distance(x0).abs();
    if d > 1e-9 * (1.0 + dom.inradius()) {
        return Err(Error::NotOnBoundary {
            point: x0.to_string(),
            distance: d,
        });
    }
    Ok(())
}

fn check_decreasing(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(invalid(name, "distances must be finite and positive"));
    }
    if v.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid(name, "distances must be strictly decreasing"));
    }
    Ok(())
}

/// `n` distances from `hi` down to `lo`, geometrically spaced.
pub fn geometric_distances(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![hi];
    }
    (0..n).map(|k| hi * (lo / hi).powf(k as f64 / (n - 1) as f64)).collect()
}

fn gradient(u: Probe, x: &Point<f64>, dim: usize, step: f64) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            let e = Point::<f64>::axis(k) * step;
            (u(&(*x + e)) - u(&(*x - e))) / (2.0 * step)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct RayProfile {
    pub boundary_point: Vec<f64>,
    pub trace: f64,
    pub distances: Vec<f64>,
    /// `d^{1-s} u` at each distance.
    pub renormalized: Vec<f64>,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub s: f64,
    pub rays: Vec<RayProfile>,
    pub smallest_distance: f64,
    pub max_error_at_smallest: f64,
    pub max_relative_error_at_smallest: f64,
    /// Slope of the log of the worst error against the log of the distance.
    pub modulus_exponent: Option<f64>,
    pub warnings: Vec<String>,
}

/// Samples `|d^{1-s} u - h(x0)|` along inward normals from the given boundary points.
///
/// `distances` must decrease strictly and stay below half the inradius. Sample points
/// closer to the boundary than `layer` are dropped with a warning.
pub fn boundary_profile(
    u: Probe,
    dom: &Domain<f64>,
    h: &BoundaryFn<f64>,
    s: f64,
    rays: &[Point<f64>],
    distances: &[f64],
    layer: f64,
) -> Result<ProfileReport> {
    check_decreasing("distances", distances)?;
    if rays.is_empty() {
        return Err(invalid("rays", "at least one boundary point is required"));
    }
    if distances[0] > 0.5 * dom.inradius() {
        return Err(invalid("distances", format!("{} exceeds half the inradius", distances[0])));
    }
    for x0 in rays {
        check_boundary_point(dom, x0)?;
    }
    let mut warnings = Vec::new();
    let kept: Vec<f64> = distances.iter().copied().filter(|t| *t >= layer * (1.0 - 1e-12)).collect();
    for t in distances.iter().filter(|t| **t < layer * (1.0 - 1e-12)) {
        warnings.push(format!("distance {t} lies inside the prescribed layer of width {layer} and was skipped"));
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData("every sample distance lies inside the layer".into()));
    }
    let profiles: Vec<RayProfile> = rays
        .par_iter()
        .map(|x0| {
            let n = dom.inward_normal(x0);
            let trace = h(x0);
            let mut out = RayProfile {
                boundary_point: x0.to_f64(dom.dim()),
                trace,
                distances: Vec::new(),
                renormalized: Vec::new(),
                errors: Vec::new(),
            };
            for t in &kept {
                let x = x0.along(&n, *t);
                let d = dom.distance(&x);
                let r = d.powf(1.0 - s) * u(&x);
                out.distances.push(d);
                out.renormalized.push(r);
                out.errors.push((r - trace).abs());
            }
            out
        })
        .collect();
    let last = kept.len() - 1;
    let mut max_err: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for p in &profiles {
        max_err = max_err.max(p.errors[last]);
        if p.trace != 0.0 {
            max_rel = max_rel.max(p.errors[last] / p.trace.abs());
        }
    }
    let worst: Vec<(f64, f64)> = (0..kept.len())
        .filter_map(|i| {
            let e = profiles.iter().map(|p| p.errors[i]).fold(0.0, f64::max);
            (e > 0.0).then(|| (kept[i].ln(), e.ln()))
        })
        .collect();
    let modulus_exponent = if worst.len() >= 3 { fit_line(&worst).map(|f| f.0) } else { None };
    Ok(ProfileReport {
        s,
        rays: profiles,
        smallest_distance: kept[last],
        max_error_at_smallest: max_err,
        max_relative_error_at_smallest: max_rel,
        modulus_exponent,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateSample {
    pub distance: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub band: (f64, f64),
    pub samples: Vec<RateSample>,
    pub slope: f64,
    pub slope_std_error: f64,
    /// Two standard errors either side of the slope.
    pub confidence: (f64, f64),
    pub decades: f64,
}

/// Fits `log |Du|` against `log d` over points at distances in `band` along the inward
/// normals of `rays`. Gradients use centered differences with step `min(spacing, d/10)`.
pub fn gradient_rate(
    u: Probe,
    dom: &Domain<f64>,
    band: (f64, f64),
    rays: &[Point<f64>],
    per_ray: usize,
    spacing: Option<f64>,
) -> Result<RateReport> {
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("band", "need 0 < d_min < d_max"));
    }
    let dists = geometric_distances(hi, lo, per_ray);
    let dim = dom.dim();
    let samples: Vec<RateSample> = rays
        .par_iter()
        .flat_map_iter(|x0| {
            let n = dom.inward_normal(x0);
            dists
                .iter()
                .filter_map(|t| {
                    let x = x0.along(&n, *t);
                    let d = dom.distance(&x);
                    if d < lo * (1.0 - 1e-9) || d > hi * (1.0 + 1e-9) {
                        return None;
                    }
                    let step = spacing.map_or(d / 10.0, |h| h.min(d / 10.0));
                    let g = norm(&gradient(u, &x, dim, step));
                    (g > 0.0 && g.is_finite()).then_some(RateSample {
                        distance: d,
                        gradient_norm: g,
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if samples.len() < 10 {
        return Err(Error::InsufficientData(format!("{} valid gradient samples, need at least 10", samples.len())));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|r| (r.distance.ln(), r.gradient_norm.ln())).collect();
    let (slope, _, se) = fit_line(&pts).ok_or_else(|| Error::InsufficientData("all samples share one distance".into()))?;
    let dmin = samples.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
    let dmax = samples.iter().map(|r| r.distance).fold(0.0, f64::max);
    Ok(RateReport {
        band,
        samples,
        slope,
        slope_std_error: se,
        confidence: (slope - 2.0 * se, slope + 2.0 * se),
        decades: (dmax / dmin).log10(),
    })
}

/// `v(y) = d^{1-s} u(z + d R y)` with `R` the boundary frame at `z`, so that `e_N` sits at
/// distance `d` along the inward normal.
pub struct RescaledField<'a> {
    u: Probe<'a>,
    frame: crate::BoundaryFrame<f64>,
    scale: f64,
    s: f64,
}

impl RescaledField<'_> {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn value(&self, y: &Point<f64>) -> f64 {
        self.scale.powf(1.0 - self.s) * (self.u)(&self.frame.to_world(&(*y * self.scale)))
    }

    pub fn gradient(&self, y: &Point<f64>, step: f64) -> Vec<f64> {
        let dim = self.frame.tangents.len() + 1;
        let f = |p: &Point<f64>| self.value(p);
        gradient(&f, y, dim, step)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RescaledSample {
    pub scale: f64,
    pub value_at_normal: f64,
    pub gradient_at_normal: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RescaledReport {
    pub boundary_point: Vec<f64>,
    pub trace: f64,
    pub s: f64,
    pub samples: Vec<RescaledSample>,
    /// The blow-up limit `h(z) (y_N)_+^{s-1}` and its gradient at `e_N`.
    pub value_target: f64,
    pub gradient_target: Vec<f64>,
}

pub fn rescaled_family<'a>(
    u: Probe<'a>,
    dom: &Domain<f64>,
    z: &Point<f64>,
    trace: f64,
    s: f64,
    scales: &[f64],
) -> Result<(Vec<RescaledField<'a>>, RescaledReport)> {
    check_boundary_point(dom, z)?;
    let quarter = dom.inradius() / 4.0;
    if scales.iter().any(|d| !(*d > 0.0 && *d < quarter)) {
        return Err(invalid("scales", format!("each scale must lie in (0, {quarter})")));
    }
    let frame = dom.boundary_frame(z)?;
    let dim = dom.dim();
    let fields: Vec<RescaledField> = scales
        .iter()
        .map(|&d| RescaledField {
            u,
            frame: frame.clone(),
            scale: d,
            s,
        })
        .collect();
    let en = Point::<f64>::axis(dim - 1);
    let samples = fields
        .iter()
        .map(|v| RescaledSample {
            scale: v.scale,
            value_at_normal: v.value(&en),
            gradient_at_normal: v.gradient(&en, 0.05),
        })
        .collect();
    let mut gradient_target = vec![0.0; dim];
    gradient_target[dim - 1] = trace * (s - 1.0);
    let report = RescaledReport {
        boundary_point: z.to_f64(dim),
        trace,
        s,
        samples,
        value_target: trace,
        gradient_target,
    };
    Ok((fields, report))
}

/// Least-squares fit of `y = c + sum_j a_j x_j`; returns `c`.
fn fit_with_powers(rows: &[(f64, Vec<f64>)]) -> Option<f64> {
    let m = rows.first()?.1.len() + 1;
    let scale: Vec<f64> = (0..m)
        .map(|j| {
            let n: f64 = rows.iter().map(|r| if j == 0 { 1.0 } else { r.1[j - 1] * r.1[j - 1] }).sum();
            n.sqrt()
        })
        .collect();
    let col = |r: &(f64, Vec<f64>), j: usize| if j == 0 { 1.0 } else { r.1[j - 1] } / scale[j];
    let mut a = vec![vec![0.0; m + 1]; m];
    for r in rows {
        for i in 0..m {
            for j in 0..m {
                a[i][j] += col(r, i) * col(r, j);
            }
            a[i][m] += col(r, i) * r.0;
        }
    }
    for c in 0..m {
        let piv = (c..m).max_by(|x, y| a[*x][c].abs().total_cmp(&a[*y][c].abs()))?;
        a.swap(c, piv);
        if a[c][c].abs() < 1e-300 {
            return None;
        }
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let c0 = a[0][m] / a[0][0] / scale[0];
    c0.is_finite().then_some(c0)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaSample {
    pub distance: f64,
    pub value: f64,
    pub error_estimate: f64,
    /// `L(d^tau xi) / (xi rho^{tau - 2s})`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub s: f64,
    pub tau: f64,
    pub alpha: f64,
    pub center: Vec<f64>,
    pub approach: Vec<f64>,
    pub c_constant: f64,
    pub c_error_estimate: f64,
    pub samples: Vec<LemmaSample>,
    /// Powers of `rho` fitted as corrections to the ratio.
    pub correction_exponents: Vec<f64>,
    pub extrapolated: f64,
    pub discrepancy: f64,
    /// Slope of `log |ratio - c_K(tau)|` against `log rho`.
    pub residual_slope: Option<f64>,
}

/// Evaluates `L_K(d^tau xi)` with `xi = |x - center|^alpha` at points approaching the
/// boundary point `approach` along its inward normal, and compares the normalized values
/// with `c_K(tau)`.
#[allow(clippy::too_many_arguments)]
pub fn product_formula_check(
    k: &Kernel<f64>,
    dom: &Domain<f64>,
    tau: f64,
    alpha: f64,
    center: &Point<f64>,
    approach: &Point<f64>,
    distances: &[f64],
    cfg: &QuadratureConfig,
) -> Result<LemmaReport> {
    let s = k.order();
    if !(alpha > 0.0 && alpha < 2.0 * s) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 2s)")));
    }
    if !(tau > -1.0 && tau < 2.0 * s) {
        return Err(Error::Domain(format!("tau = {tau} must lie in (-1, 2s)")));
    }
    check_decreasing("distances", distances)?;
    if distances[0] > dom.inradius() / 10.0 {
        return Err(Error::Domain(format!("distance {} is outside the asymptotic regime", distances[0])));
    }
    check_boundary_point(dom, center)?;
    check_boundary_point(dom, approach)?;
    let dim = dom.dim();
    let xi = RadialPower {
        dim,
        center: *center,
        exponent: alpha,
    };
    let field = Product {
        a: Arc::new(DistPow {
            domain: dom.clone(),
            tau,
        }),
        b: Arc::new(xi.clone()),
    };
    let c = c_constant(k, tau, cfg)?;
    let normal = dom.inward_normal(approach);
    let samples = distances
        .par_iter()
        .map(|&rho| {
            let x = approach.along(&normal, rho);
            let r = linear_op(k, &field, &x, cfg)?;
            let scale = xi.value(&x) * rho.powf(tau - 2.0 * s);
            Ok(LemmaSample {
                distance: rho,
                value: r.value,
                error_estimate: r.error_estimate,
                ratio: r.value / scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut exponents = vec![s, 2.0 * s - tau.max(0.0), 2.0 * s];
    exponents.sort_by(f64::total_cmp);
    exponents.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    exponents.truncate(samples.len().saturating_sub(2));
    let rows: Vec<(f64, Vec<f64>)> = samples
        .iter()
        .map(|r| (r.ratio, exponents.iter().map(|p| r.distance.powf(*p)).collect()))
        .collect();
    let extrapolated = fit_with_powers(&rows).ok_or_else(|| Error::DivergentExtrapolation("singular correction fit".into()))?;
    let resid: Vec<(f64, f64)> = samples
        .iter()
        .filter(|r| r.ratio != c.value)
        .map(|r| (r.distance.ln(), (r.ratio - c.value).abs().ln()))
        .collect();
    let residual_slope = if resid.len() >= 3 { fit_line(&resid).map(|f| f.0) } else { None };
    Ok(LemmaReport {
        s,
        tau,
        alpha,
        center: center.to_f64(dim),
        approach: approach.to_f64(dim),
        c_constant: c.value,
        c_error_estimate: c.error_estimate,
        samples,
        correction_exponents: exponents,
        extrapolated,
        discrepancy: extrapolated - c.value,
        residual_slope,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatorSample {
    pub point: Vec<f64>,
    pub distance: f64,
    pub value: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatorReport {
    pub s: f64,
    pub diameter: f64,
    pub samples: Vec<IndicatorSample>,
    pub all_negative: bool,
    pub max_value: f64,
    /// Largest `c` with `M^- chi <= -c diam^{-2s}` at every sample.
    pub fitted_constant: f64,
}

/// Evaluates the minimal Pucci operator on the indicator of the domain.
pub fn indicator_check(
    dom: &Domain<f64>,
    bounds: &EllipticityBounds<f64>,
    s: f64,
    points: &[Point<f64>],
    cfg: &QuadratureConfig,
) -> Result<IndicatorReport> {
    let floor = dom.inradius() / 20.0;
    if points.is_empty() {
        return Err(invalid("points", "at least one sample point is required"));
    }
    if let Some(x) = points.iter().find(|x| !dom.contains(x) || dom.distance(x) < floor * (1.0 - 1e-12)) {
        return Err(invalid("points", format!("{x} is closer than inradius/20 to the boundary")));
    }
    let chi = Indicator { domain: dom.clone() };
    let samples = points
        .par_iter()
        .map(|x| {
            let r = pucci_minus(&chi, x, bounds, s, cfg)?;
            Ok(IndicatorSample {
                point: x.to_f64(dom.dim()),
                distance: dom.distance(x),
                value: r.value,
                error_estimate: r.error_estimate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let diameter = dom.diameter();
    let max_value = samples.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(IndicatorReport {
        s,
        diameter,
        all_negative: samples.iter().all(|r| r.value + r.error_estimate < 0.0),
        max_value,
        fitted_constant: -max_value * diameter.powf(2.0 * s),
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub values: Vec<f64>,
    pub limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCoefficients {
    pub dim: usize,
    pub orders: Vec<f64>,
    pub entries: Vec<LimitEntry>,
}

/// Polynomial through `(t_i, v_i)` evaluated at `t = 0` (Neville).
fn extrapolate_to_zero(t: &[f64], v: &[f64]) -> f64 {
    let mut p = v.to_vec();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (t[i + m] * p[i] - t[i] * p[i + 1]) / (t[i + m] - t[i]);
        }
    }
    p[0]
}

/// `A^k_{ij}(s) = C_{N,s} / (2 (2 - 2s)) int q_k^2 a_ij(q) dS` along `orders`, extrapolated to
/// `s = 1` through the last three orders.
pub fn limit_coefficients(members: &[Vec<Anisotropy<f64>>], dim: usize, orders: &[f64], sphere_order: usize) -> Result<LimitCoefficients> {
    if orders.len() < 2 {
        return Err(invalid("orders", "at least two orders are required"));
    }
    if orders.iter().any(|s| !(*s > 0.0 && *s < 1.0)) || orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("orders", "orders must increase strictly inside (0, 1)"));
    }
    if members.is_empty() || members.iter().any(|r| r.is_empty()) {
        return Err(Error::EmptyIndexSet("anisotropy family"));
    }
    let mut entries = Vec::new();
    for (i, row) in members.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            Kernel::new(dim, 0.5, a.clone(), false)?;
            let opts = SphereOptions {
                angle_breaks: a.angle_breaks(),
                zonal_breaks: a.zonal_breaks(),
                ..SphereOptions::default()
            };
            let rule = SphereRule::<f64>::half_sphere(dim, sphere_order, 0, &opts);
            for k in 0..dim {
                let moment: f64 = rule.dirs.iter().zip(&rule.weights).map(|(q, w)| w * q[k] * q[k] * a.value(q, dim)).sum();
                let values = orders
                    .iter()
                    .map(|&s| Ok(normalizing_constant(dim, s)? / (2.0 * (2.0 - 2.0 * s)) * moment))
                    .collect::<Result<Vec<f64>>>()?;
                let tail = values.len().saturating_sub(3);
                let t: Vec<f64> = orders[tail..].iter().map(|s| 1.0 - s).collect();
                let limit = extrapolate_to_zero(&t, &values[tail..]);
                let last = values[values.len() - 1];
                let spread = (last - values[0]).abs();
                if !limit.is_finite() || (limit - last).abs() > spread + 1e-12 * last.abs() {
                    return Err(Error::DivergentExtrapolation(format!(
                        "entry ({i}, {j}, {k}): limit {limit} moves further than the sampled spread {spread}"
                    )));
                }
                entries.push(LimitEntry { i, j, k, values, limit });
            }
        }
    }
    Ok(LimitCoefficients {
        dim,
        orders: orders.to_vec(),
        entries,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HalfspaceSample {
    pub point: Vec<f64>,
    pub value: f64,
    pub error_estimate: f64,
    pub refined_value: f64,
    pub refined_error_estimate: f64,
    /// Ratio of the coarse to the refined error estimate.
    pub decay: f64,
    /// `2 B((y_N)_+^{s-1}, p' . y')`, which equals the operator when both factors are harmonic.
    pub bilinear: f64,
    pub bilinear_error_estimate: f64,
    pub gradient: Vec<f64>,
    pub gradient_expected: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HalfspaceReport {
    pub s: f64,
    pub slope: Vec<f64>,
    pub samples: Vec<HalfspaceSample>,
    pub within_estimate: bool,
    pub min_decay: f64,
    pub decomposition_consistent: bool,
}

/// `n` points with `x_N` spread over `[0.1, 1]` and tangential coordinates in `[-0.5, 0.5]`.
pub fn halfspace_samples(dim: usize, n: usize) -> Vec<Point<f64>> {
    (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
            let mut x = Point::zero();
            for k in 0..dim - 1 {
                x[k] = 0.5 * ((i * (k + 2)) as f64 * 0.618_033_988_749_895).fract() * 2.0 - 0.5;
            }
            x[dim - 1] = 0.1 + 0.9 * t;
            x
        })
        .collect()
}

/// Checks that `(p' . x') (x_N)_+^{s-1}` is annihilated by the fractional Laplacian, that the
/// product rule reduces to twice the bilinear form, and that its gradient matches the closed form.
pub fn halfspace_checks(slope: &[f64], s: f64, points: &[Point<f64>], cfg: &QuadratureConfig) -> Result<HalfspaceReport> {
    let dim = slope.len() + 1;
    if dim > 3 {
        return Err(invalid("slope", "at most two tangential coordinates are supported"));
    }
    if slope.iter().all(|c| *c == 0.0) {
        return Err(invalid("slope", "the tangential slope must be nonzero"));
    }
    if let Some(x) = points.iter().find(|x| !(x[dim - 1] > 0.0)) {
        return Err(invalid("points", format!("{x} is not inside the half-space")));
    }
    let p = Point::from_f64(slope);
    let u = HalfspaceLinearProfile { dim, slope: p, s };
    let u1 = HalfspacePower { dim, tau: s - 1.0 };
    let u2 = Affine { dim, slope: p, offset: 0.0 };
    let k = Kernel::isotropic(dim, s, true)?;
    let fine_cfg = cfg.refined();
    let samples = points
        .par_iter()
        .map(|x| {
            let coarse = frac_laplacian(&u, x, s, cfg)?;
            let fine = frac_laplacian(&u, x, s, &fine_cfg)?;
            let b = bilinear_form(&k, &u1, &u2, x, &fine_cfg)?;
            let xn = x[dim - 1];
            let f = |y: &Point<f64>| u.value(y);
            let g = gradient(&f, x, dim, xn / 100.0);
            let lin: f64 = (0..dim - 1).map(|j| slope[j] * x[j]).sum();
            let mut expected: Vec<f64> = slope.iter().map(|c| c * xn.powf(s - 1.0)).collect();
            expected.push((s - 1.0) * lin * xn.powf(s - 2.0));
            Ok(HalfspaceSample {
                point: x.to_f64(dim),
                value: coarse.value,
                error_estimate: coarse.error_estimate,
                refined_value: fine.value,
                refined_error_estimate: fine.error_estimate,
                decay: coarse.error_estimate / fine.error_estimate.max(f64::MIN_POSITIVE),
                bilinear: 2.0 * b.value,
                bilinear_error_estimate: 2.0 * b.error_estimate,
                gradient: g,
                gradient_expected: expected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let floor = 1e-10;
    Ok(HalfspaceReport {
        s,
        slope: slope.to_vec(),
        within_estimate: samples
            .iter()
            .all(|r| r.value.abs() <= r.error_estimate.max(floor) && r.refined_value.abs() <= r.refined_error_estimate.max(floor)),
        min_decay: samples.iter().map(|r| r.decay).fold(f64::INFINITY, f64::min),
        decomposition_consistent: samples
            .iter()
            .all(|r| (r.refined_value - r.bilinear).abs() <= r.refined_error_estimate + r.bilinear_error_estimate + floor),
        samples,
    })
}
