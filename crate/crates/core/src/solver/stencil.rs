//! Quadrature weights of the discrete operators: cell integrals of the kernel, the mass
//! beyond a box, and the second-moment stencil of the near region.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::quadrature::GaussRule;
use crate::Point;

pub(crate) type Angular = Arc<dyn Fn(&Point<f64>) -> f64 + Send + Sync>;

/// A kernel `a(z/|z|) |z|^{-N-2s}` used as a building block of row operators.
#[derive(Clone)]
pub(crate) struct Basis {
    pub dim: usize,
    pub s: f64,
    pub angular: Angular,
    /// Planar break angles of `a`.
    pub breaks: Vec<f64>,
}

impl Basis {
    pub(crate) fn kernel(&self, z: &Point<f64>) -> f64 {
        let r = z.norm();
        let q = *z * (1.0 / r);
        (self.angular)(&q) * r.powf(-(self.dim as f64) - 2.0 * self.s)
    }

    /// `sum over box faces of int phi(p/|p|, |p|) L / |p|^N dA` over the faces of the box
    /// `[lo, hi]` (containing the origin), which equals the sphere integral of
    /// `phi(q, r(q))` with `r(q)` the exit distance of the box along `q`.
    pub(crate) fn box_sphere_integral<F: Fn(&Point<f64>, f64) -> f64>(&self, lo: [f64; 3], hi: [f64; 3], order: usize, phi: F) -> f64 {
        let dim = self.dim;
        let n = dim as i32;
        if dim == 1 {
            return phi(&Point::from_f64(&[1.0]), hi[0]) + phi(&Point::from_f64(&[-1.0]), -lo[0]);
        }
        let rule = GaussRule::get(order);
        let mut total = 0.0;
        for k in 0..dim {
            for sign in [-1.0, 1.0] {
                let lk = if sign > 0.0 { hi[k] } else { -lo[k] };
                let mut face = Point::zero();
                face[k] = sign * lk;
                let eval = |p: &Point<f64>| {
                    let r = p.norm();
                    phi(&(*p * (1.0 / r)), r) * lk / r.powi(n)
                };
                if dim == 2 {
                    let other = 1 - k;
                    let mut cuts = vec![lo[other], 0.0, hi[other]];
                    for &th in &self.breaks {
                        for q in [[th.cos(), th.sin()], [-th.cos(), -th.sin()]] {
                            if q[k] * sign <= 1e-14 {
                                continue;
                            }
                            let t = q[other] * lk / (q[k] * sign);
                            if t > lo[other] && t < hi[other] {
                                cuts.push(t);
                            }
                        }
                    }
                    cuts.sort_by(|a, b| a.total_cmp(b));
                    let span = hi[other] - lo[other];
                    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * span);
                    for w in cuts.windows(2) {
                        total += rule.integrate(w[0], w[1], |t| {
                            let mut p = face;
                            p[other] = t;
                            eval(&p)
                        });
                    }
                } else {
                    let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                    for (ua, va) in [(lo[a], 0.0), (0.0, hi[a])] {
                        for (ub, vb) in [(lo[b], 0.0), (0.0, hi[b])] {
                            total += rule.integrate(ua, va, |ta| {
                                rule.integrate(ub, vb, |tb| {
                                    let mut p = face;
                                    p[a] = ta;
                                    p[b] = tb;
                                    eval(&p)
                                })
                            });
                        }
                    }
                }
            }
        }
        total
    }

    fn symmetric<F: Fn(&Point<f64>, f64) -> f64>(&self, half: [f64; 3], phi: F) -> f64 {
        let order = if self.dim == 2 { 24 } else { 16 };
        self.box_sphere_integral([-half[0], -half[1], -half[2]], half, order, phi)
    }

    /// `int_{outside box} K`.
    pub(crate) fn mass_beyond(&self, half: [f64; 3]) -> f64 {
        let s2 = 2.0 * self.s;
        self.symmetric(half, |q, r| (self.angular)(q) * r.powf(-s2) / s2)
    }

    /// `int_{cube of half-width c} z z^T K`.
    pub(crate) fn near_moment(&self, c: f64) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        let e = 2.0 - 2.0 * self.s;
        for k in 0..self.dim {
            for l in k..self.dim {
                let v = self.symmetric([c; 3], |q, r| (self.angular)(q) * q[k] * q[l] * r.powf(e) / e);
                m[k][l] = v;
                m[l][k] = v;
            }
        }
        m
    }

    /// `int_{cell at offset j} K` for a cell of side `h`, away from the origin.
    pub(crate) fn cell_weight(&self, off: &[i64; 3], h: f64, near: bool) -> f64 {
        let (sub, order) = if near { (4usize, 3usize) } else { (1, 2) };
        let rule = GaussRule::get(order);
        let dim = self.dim;
        let sh = h / sub as f64;
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(sub * order);
        for i in 0..sub {
            let a = -0.5 * h + i as f64 * sh;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                pts.push((a + 0.5 * sh * (x + 1.0), 0.5 * sh * w));
            }
        }
        let m = pts.len();
        let count = m.pow(dim as u32);
        let mut total = 0.0;
        for idx in 0..count {
            let mut z = Point::zero();
            let mut w = 1.0;
            let mut rest = idx;
            for k in 0..dim {
                let (t, wt) = pts[rest % m];
                rest /= m;
                z[k] = off[k] as f64 * h + t;
                w *= wt;
            }
            total += w * self.kernel(&z);
        }
        total
    }
}

/// Nonnegative decomposition `M = sum_e alpha_e e e^T` over lattice directions `e_k` and
/// `e_k +- e_l`, returned as second-difference weights `alpha_e / (2 h^2)` at `+-e`.
/// Fails with the most negative coefficient when `M` is not diagonally dominant.
pub(crate) fn near_stencil(dim: usize, m: &[[f64; 3]; 3], h: f64) -> std::result::Result<Vec<([i64; 3], f64)>, (f64, String)> {
    let mut out = Vec::new();
    let scale = 1.0 / (2.0 * h * h);
    let tol = 1e-12 * (0..dim).map(|k| m[k][k].abs()).fold(0.0, f64::max);
    for k in 0..dim {
        let mut alpha = m[k][k];
        for l in 0..dim {
            if l != k {
                alpha -= m[k][l].abs();
            }
        }
        if alpha < -tol {
            return Err((alpha, format!("axis {k} of the near second-moment stencil")));
        }
        let alpha = alpha.max(0.0);
        if alpha > 0.0 {
            let mut e = [0i64; 3];
            e[k] = 1;
            out.push((e, alpha * scale));
            out.push(([-e[0], -e[1], -e[2]], alpha * scale));
        }
    }
    for k in 0..dim {
        for l in (k + 1)..dim {
            let v = m[k][l];
            if v.abs() <= tol {
                continue;
            }
            let mut e = [0i64; 3];
            e[k] = 1;
            e[l] = if v > 0.0 { 1 } else { -1 };
            out.push((e, v.abs() * scale));
            out.push(([-e[0], -e[1], -e[2]], v.abs() * scale));
        }
    }
    Ok(out)
}

/// Indicator of planar directions with angle (mod pi) in `[a, b)`, one half on the edges.
pub(crate) fn angular_bin(a: f64, b: f64) -> Angular {
    Arc::new(move |q: &Point<f64>| {
        let th = q[1].atan2(q[0]).rem_euclid(PI);
        let edge = |t: f64| {
            let d = (th - t).rem_euclid(PI);
            d < 1e-12 || PI - d < 1e-12
        };
        if edge(a) || edge(b) {
            0.5
        } else if th > a && th < b {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(dim: usize, s: f64) -> Basis {
        Basis {
            dim,
            s,
            angular: Arc::new(|_| 1.0),
            breaks: vec![],
        }
    }

    #[test]
    fn mass_beyond_ball_matches_closed_form_on_cube_limit() {
        // Mass outside a cube lies between the masses outside the inscribed and circumscribed balls.
        for dim in 1..=3 {
            let b = iso(dim, 0.4);
            let m = b.mass_beyond([1.0; 3]);
            let area = crate::special::sphere_area(dim);
            let inner = area / 0.8;
            let outer = area * (dim as f64).sqrt().powf(-0.8) / 0.8;
            assert!(m <= inner + 1e-12 && m >= outer - 1e-12, "{dim}: {m} {inner} {outer}");
        }
    }

    #[test]
    fn cell_weights_reproduce_annulus_mass() {
        let b = iso(2, 0.5);
        let h = 0.1;
        let mut sum = 0.0;
        for i in -20i64..=20 {
            for j in -20i64..=20 {
                if i.abs().max(j.abs()) > 2 {
                    sum += b.cell_weight(&[i, j, 0], h, i.abs().max(j.abs()) <= 5);
                }
            }
        }
        let exact = b.mass_beyond([2.5 * h, 2.5 * h, 0.0]) - b.mass_beyond([20.5 * h, 20.5 * h, 0.0]);
        assert!((sum - exact).abs() < 1e-4 * exact, "{sum} {exact}");
    }

    #[test]
    fn isotropic_moment_is_diagonal() {
        let b = iso(2, 0.5);
        let m = b.near_moment(1.0);
        assert!(m[0][1].abs() < 1e-12);
        assert!((m[0][0] - m[1][1]).abs() < 1e-12);
        let st = near_stencil(2, &m, 0.1).unwrap();
        assert_eq!(st.len(), 4);
    }

    #[test]
    fn skewed_moment_is_rejected() {
        let m = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0; 3]];
        assert!(near_stencil(2, &m, 0.1).is_err());
    }
}
