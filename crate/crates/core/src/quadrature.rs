//! Gauss–Legendre rules, graded segment plans and half-sphere direction rules.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use crate::{Point, Real};

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    fn compute(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Cached rule with `n` nodes.
    pub fn get(n: usize) -> Arc<GaussRule> {
        static CACHE: OnceLock<RwLock<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
        if let Some(r) = cache.read().expect("gauss cache poisoned").get(&n) {
            return r.clone();
        }
        let rule = Arc::new(Self::compute(n));
        cache
            .write()
            .expect("gauss cache poisoned")
            .entry(n)
            .or_insert(rule)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<T: Real, F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += T::lit(*w) * f(mid + half * T::lit(*x));
        }
        acc * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// How a piece of a segment is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceKind {
    Plain,
    /// Power-type singularity `|t - endpoint|^exponent` at the left or right end.
    Singular { at_left: bool, exponent: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Piece<T> {
    pub a: T,
    pub b: T,
    pub kind: PieceKind,
}

/// Exponent of the substitution `t = L v^m` used on singular pieces.
fn substitution_power(exponent: f64) -> f64 {
    if exponent < 0.0 {
        2.0 / (exponent + 1.0)
    } else {
        2.0
    }
}

impl<T: Real> Piece<T> {
    pub fn integrate<F: FnMut(T) -> T>(&self, rule: &GaussRule, mut f: F) -> T {
        match self.kind {
            PieceKind::Plain => rule.integrate(self.a, self.b, f),
            PieceKind::Singular { at_left, exponent } => {
                let m = substitution_power(exponent);
                let mt = T::lit(m);
                let len = self.b - self.a;
                let (p, sign) = if at_left {
                    (self.a, T::one())
                } else {
                    (self.b, -T::one())
                };
                // Offsets where rounding in the integrand dominates are replaced by the power
                // law through the first trusted offset. For a negative exponent the threshold
                // balances amplified rounding against the neglected regular part.
                let eps = T::epsilon();
                let rel = if exponent < 0.0 {
                    eps.powf(T::one() / (T::one() - T::lit(exponent))).max(T::lit(64.0) * eps)
                } else {
                    T::lit(64.0) * eps
                };
                let floor = rel * p.abs().max(len);
                let beta = T::lit(exponent);
                let mut at_floor: Option<T> = None;
                rule.integrate(T::zero(), T::one(), |v| {
                    if v <= T::zero() {
                        return T::zero();
                    }
                    let vm1 = v.powf(mt - T::one());
                    let t = len * vm1 * v;
                    let val = if t < floor && floor < len {
                        let base = *at_floor.get_or_insert_with(|| f(p + sign * floor));
                        base * (t / floor).powf(beta)
                    } else {
                        f(p + sign * t)
                    };
                    val * mt * len * vm1
                })
            }
        }
    }
}

/// Builds the integration pieces of `[a, b]`, graded toward singular endpoints.
///
/// With `geometric` set, long stretches away from singular ends are split into
/// pieces whose endpoint ratio is at most two.
pub fn plan_segment<T: Real>(
    a: T,
    b: T,
    sing_a: Option<f64>,
    sing_b: Option<f64>,
    grade_levels: usize,
    geometric: bool,
    out: &mut Vec<Piece<T>>,
) {
    if b <= a {
        return;
    }
    let two = T::lit(2.0);
    match (sing_a, sing_b) {
        (Some(_), Some(_)) => {
            let mid = (a + b) / two;
            plan_segment(a, mid, sing_a, None, grade_levels, geometric, out);
            plan_segment(mid, b, None, sing_b, grade_levels, geometric, out);
        }
        (None, Some(beta)) => {
            let c = if geometric && a > T::zero() && b > two * a {
                geometric_pieces(a, b / two, out);
                b / two
            } else {
                a
            };
            let len = b - c;
            let mut lo = c;
            for k in 0..grade_levels {
                let hi = b - len * T::lit(0.5f64.powi(k as i32 + 1));
                out.push(Piece { a: lo, b: hi, kind: PieceKind::Plain });
                lo = hi;
            }
            out.push(Piece {
                a: lo,
                b,
                kind: PieceKind::Singular { at_left: false, exponent: beta },
            });
        }
        (Some(beta), None) => {
            let c = if geometric && a > T::zero() && b > two * a {
                two * a
            } else {
                b
            };
            let len = c - a;
            let mut hi = c;
            let mut graded = Vec::with_capacity(grade_levels + 1);
            for k in 0..grade_levels {
                let lo = a + len * T::lit(0.5f64.powi(k as i32 + 1));
                graded.push(Piece { a: lo, b: hi, kind: PieceKind::Plain });
                hi = lo;
            }
            out.push(Piece {
                a,
                b: hi,
                kind: PieceKind::Singular { at_left: true, exponent: beta },
            });
            out.extend(graded.into_iter().rev());
            if c < b {
                geometric_pieces(c, b, out);
            }
        }
        (None, None) => {
            if geometric && a > T::zero() {
                geometric_pieces(a, b, out);
            } else {
                out.push(Piece { a, b, kind: PieceKind::Plain });
            }
        }
    }
}

fn geometric_pieces<T: Real>(a: T, b: T, out: &mut Vec<Piece<T>>) {
    let ratio = (b / a).ln() / T::lit(2f64.ln());
    let n = ratio.ceil().to_usize().unwrap_or(1).max(1);
    let step = (b / a).powf(T::one() / T::from_usize_lossy(n));
    let mut lo = a;
    for k in 0..n {
        let hi = if k + 1 == n { b } else { lo * step };
        out.push(Piece { a: lo, b: hi, kind: PieceKind::Plain });
        lo = hi;
    }
}

/// Integrates over all pieces with a common rule.
pub fn integrate_pieces<T: Real, F: FnMut(T) -> T>(pieces: &[Piece<T>], rule: &GaussRule, mut f: F) -> T {
    pieces.iter().map(|p| p.integrate(rule, &mut f)).sum()
}

/// Directions covering one hemisphere with weights doubled, so that for an even
/// integrand `sum w_i f(q_i)` approximates the integral over the full sphere.
#[derive(Debug, Clone)]
pub struct SphereRule<T> {
    pub dim: usize,
    pub dirs: Vec<Point<T>>,
    pub weights: Vec<T>,
}

/// Options for [`SphereRule::half_sphere`].
#[derive(Debug, Clone)]
pub struct SphereOptions<T> {
    /// Grade toward directions orthogonal to this axis.
    pub axis: Option<Point<T>>,
    /// Planar break angles (dimension two), absolute and taken modulo pi.
    pub angle_breaks: Vec<f64>,
    /// Break values of `|q_N|` (dimension three).
    pub zonal_breaks: Vec<f64>,
    /// Exponent of the angular singularity at tangent directions.
    pub tangent_exponent: f64,
}

impl<T: Real> Default for SphereOptions<T> {
    fn default() -> Self {
        SphereOptions {
            axis: None,
            angle_breaks: Vec::new(),
            zonal_breaks: Vec::new(),
            tangent_exponent: 0.0,
        }
    }
}

impl<T: Real> SphereRule<T> {
    pub fn half_sphere(dim: usize, order: usize, grade_levels: usize, opts: &SphereOptions<T>) -> Self {
        match dim {
            1 => SphereRule {
                dim,
                dirs: vec![Point::axis(0)],
                weights: vec![T::lit(2.0)],
            },
            2 => Self::circle(order, grade_levels, opts),
            3 => Self::sphere3(order, grade_levels, opts),
            _ => panic!("unsupported dimension {dim}"),
        }
    }

    fn circle(order: usize, grade_levels: usize, opts: &SphereOptions<T>) -> Self {
        let theta0 = match opts.axis {
            Some(ax) => ax[1].as_f64().atan2(ax[0].as_f64()) + PI / 2.0,
            None => 0.0,
        };
        let mut cuts: Vec<f64> = opts
            .angle_breaks
            .iter()
            .map(|&b| (b - theta0).rem_euclid(PI))
            .filter(|&t| t > 1e-12 && t < PI - 1e-12)
            .collect();
        cuts.push(0.0);
        cuts.push(PI);
        if opts.axis.is_none() {
            cuts.push(PI / 2.0);
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite break"));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let sing = opts.axis.map(|_| opts.tangent_exponent);
        let mut pieces = Vec::new();
        for (k, w) in cuts.windows(2).enumerate() {
            let sa = if k == 0 { sing } else { None };
            let sb = if k + 2 == cuts.len() { sing } else { None };
            plan_segment(w[0], w[1], sa, sb, grade_levels, false, &mut pieces);
        }
        let rule = GaussRule::get(order);
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        for p in &pieces {
            collect_piece_nodes(p, &rule, |t, w| {
                let th = theta0 + t;
                dirs.push(Point::from_f64(&[th.cos(), th.sin()]));
                weights.push(T::lit(2.0 * w));
            });
        }
        SphereRule { dim: 2, dirs, weights }
    }

    fn sphere3(order: usize, grade_levels: usize, opts: &SphereOptions<T>) -> Self {
        let axis = opts.axis.unwrap_or_else(|| Point::axis(2));
        let axis = axis.normalized().unwrap_or_else(|| Point::axis(2));
        let aligned = (axis[2].as_f64() - 1.0).abs() < 1e-12;
        let mut cuts = vec![0.0, PI / 2.0];
        if aligned {
            for &c in &opts.zonal_breaks {
                if c > 1e-12 && c < 1.0 - 1e-12 {
                    cuts.push(c.acos());
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite break"));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let sing = opts.axis.map(|_| opts.tangent_exponent);
        let mut pieces = Vec::new();
        for (k, w) in cuts.windows(2).enumerate() {
            let sb = if k + 2 == cuts.len() { sing } else { None };
            plan_segment(w[0], w[1], None, sb, grade_levels, false, &mut pieces);
        }
        let (u1, u2) = orthonormal_complement(&axis);
        let rule = GaussRule::get(order);
        let n_phi = 2 * order.max(2);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        for p in &pieces {
            collect_piece_nodes(p, &rule, |th, w| {
                let (st, ct) = th.sin_cos();
                for j in 0..n_phi {
                    let ph = (j as f64 + 0.5) * dphi;
                    let (sp, cp) = ph.sin_cos();
                    let q = axis * T::lit(ct) + u1 * T::lit(st * cp) + u2 * T::lit(st * sp);
                    dirs.push(q);
                    weights.push(T::lit(2.0 * w * st * dphi));
                }
            });
        }
        SphereRule { dim: 3, dirs, weights }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Enumerates the (node, weight) pairs a piece would use, in f64.
fn collect_piece_nodes<T: Real, F: FnMut(f64, f64)>(p: &Piece<T>, rule: &GaussRule, mut f: F) {
    let a = p.a.as_f64();
    let b = p.b.as_f64();
    match p.kind {
        PieceKind::Plain => {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                f(mid + half * x, w * half);
            }
        }
        PieceKind::Singular { at_left, exponent } => {
            let m = substitution_power(exponent);
            let len = b - a;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let v = 0.5 * (x + 1.0);
                let t = len * v.powf(m);
                let jac = m * len * v.powf(m - 1.0) * 0.5 * w;
                let node = if at_left { a + t } else { b - t };
                f(node, jac);
            }
        }
    }
}

/// Two unit vectors completing `axis` to an orthonormal basis of R^3.
pub fn orthonormal_complement<T: Real>(axis: &Point<T>) -> (Point<T>, Point<T>) {
    let pick = if axis[0].abs() < T::lit(0.9) {
        Point::axis(0)
    } else {
        Point::axis(1)
    };
    let u1 = (pick - *axis * pick.dot(axis))
        .normalized()
        .expect("non-degenerate complement");
    let u2 = cross(axis, &u1);
    (u1, u2)
}

pub fn cross<T: Real>(a: &Point<T>, b: &Point<T>) -> Point<T> {
    Point([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

/// Quasi-uniform unit directions on the full sphere of R^dim.
pub fn sample_directions<T: Real>(dim: usize, n: usize) -> Vec<Point<T>> {
    let n = n.max(1);
    match dim {
        1 => (0..n)
            .map(|k| Point::from_f64(&[if k % 2 == 0 { 1.0 } else { -1.0 }]))
            .collect(),
        2 => (0..n)
            .map(|k| {
                let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                Point::from_f64(&[th.cos(), th.sin()])
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let ph = golden * k as f64;
                    Point::from_f64(&[r * ph.cos(), r * ph.sin(), z])
                })
                .collect()
        }
        _ => panic!("unsupported dimension {dim}"),
    }
}
