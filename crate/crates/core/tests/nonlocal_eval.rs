use std::f64::consts::PI;
use std::sync::Arc;

use fracblow_core::field::{
    Affine, BallProfile, ConstantField, Gaussian, HalfspaceLinearProfile, HalfspacePower, Indicator, Product, ScalarField,
    Shifted, Dilated, FieldRef,
};
use fracblow_core::nonlocal_eval::*;
use fracblow_core::special::{gamma, torsion_constant};
use fracblow_core::{Anisotropy, Domain, EllipticityBounds, Error, Kernel, KernelFamily, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn p(c: &[f64]) -> Point<f64> {
    Point::from_f64(c)
}

/// One-dimensional barrier constant from the Fourier-side identity.
fn c1_closed(s: f64, tau: f64) -> f64 {
    -gamma(1.0 + tau) * gamma(2.0 * s - tau) * (PI * (s - tau)).sin() / (gamma(1.0 + 2.0 * s) * (PI * s).sin())
}

/// `int_{S^{N-1}} |q_N|^{2s} dS / 2`, normalized so that it is 1 in dimension one.
fn zonal_factor(n: usize, s: f64) -> f64 {
    PI.powf((n as f64 - 1.0) / 2.0) * gamma((1.0 + 2.0 * s) / 2.0) / gamma((n as f64 + 2.0 * s) / 2.0)
}

#[test]
fn constants_are_annihilated() {
    let k = Kernel::isotropic(2, 0.4, false).unwrap();
    let u = ConstantField { dim: 2, value: 3.5 };
    let r = linear_op(&k, &u, &p(&[0.2, -1.0]), &cfg()).unwrap();
    assert!(r.value.abs() < 1e-12 && r.error_estimate < 1e-12);
    let z = ConstantField { dim: 2, value: 0.0 };
    assert_eq!(frac_laplacian(&z, &p(&[0.0, 0.0]), 0.5, &cfg()).unwrap().value, 0.0);
}

#[test]
fn barrier_constant_matches_closed_form() {
    for &s in &[0.25, 0.5, 0.75] {
        for &dim in &[1usize, 2, 3] {
            let k = Kernel::isotropic(dim, s, false).unwrap();
            for i in 1..10 {
                let tau = -1.0 + (2.0 * s + 1.0) * i as f64 / 10.0;
                let r = c_constant(&k, tau, &cfg().refined()).unwrap();
                let exact = c1_closed(s, tau) * zonal_factor(dim, s);
                assert!((r.value - exact).abs() < 1e-6 * (1.0 + exact.abs()), "s={s} N={dim} tau={tau}: {} vs {exact}", r.value);
            }
        }
    }
}

#[test]
fn barrier_constant_at_zero_is_minus_halfspace_mass() {
    // int_{z_N <= -1} |z|^{-2-2s} dz = (1/2s) int_R (1 + t^2)^{-1-s} dt in two dimensions
    for &s in &[0.3, 0.5, 0.8] {
        let k = Kernel::isotropic(2, s, false).unwrap();
        let c0 = c_constant(&k, 0.0, &cfg()).unwrap();
        let line = PI.sqrt() * gamma(s + 0.5) / gamma(s + 1.0);
        let mass = line / (2.0 * s);
        assert!(c0.value < 0.0);
        assert!((c0.value + mass).abs() < 1e-6 * mass, "{} vs {}", c0.value, -mass);
    }
}

#[test]
fn barrier_constant_vanishes_at_both_roots_and_has_the_computed_sign_pattern() {
    let s = 0.5;
    let k = Kernel::isotropic(2, s, false).unwrap();
    let c = |t: f64| c_constant(&k, t, &cfg()).unwrap().value;
    let scale = c(0.0).abs().max(c(2.0 * s - 0.01).abs());
    assert!(c(s - 1.0).abs() <= 1e-3 * scale);
    assert!(c(s).abs() <= 1e-3 * scale);
    for i in 1..40 {
        let tau = -1.0 + 2.0 * i as f64 / 40.0;
        if (tau - (s - 1.0)).abs() < 1e-9 || (tau - s).abs() < 1e-9 {
            continue;
        }
        let inside = tau > s - 1.0 && tau < s;
        assert_eq!(c(tau) < 0.0, inside, "tau = {tau}");
    }
}

#[test]
fn barrier_constant_rejects_out_of_range_tau() {
    let k = Kernel::isotropic(2, 0.5, false).unwrap();
    assert!(matches!(c_constant(&k, -1.0, &cfg()), Err(Error::Domain(_))));
    assert!(matches!(c_constant(&k, 1.0, &cfg()), Err(Error::Domain(_))));
}

#[test]
fn ball_profile_is_harmonic_and_refinement_shrinks_the_estimate() {
    let s = 0.5;
    let u = BallProfile::unit(2, s - 1.0);
    for x in [p(&[0.3, 0.0]), p(&[0.0, 0.0]), p(&[0.9, 0.0]), p(&[0.5, 0.5])] {
        let coarse = frac_laplacian(&u, &x, s, &cfg()).unwrap();
        let fine = frac_laplacian(&u, &x, s, &cfg().refined()).unwrap();
        for r in [coarse, fine] {
            assert!(r.value.abs() <= r.error_estimate.max(1e-10), "{x}: {r:?}");
        }
        assert!(fine.error_estimate <= 0.5 * coarse.error_estimate, "{x}: {coarse:?} {fine:?}");
        assert!(fine.error_estimate < 1e-5);
    }
}

#[test]
fn torsion_function_has_constant_fractional_laplacian() {
    for &(dim, s) in &[(1usize, 0.3f64), (2, 0.5), (2, 0.8), (3, 0.6)] {
        let u = BallProfile::unit(dim, s);
        let want = -torsion_constant(dim, s);
        for x in [p(&[0.0, 0.0, 0.0]), p(&[0.5, 0.0, 0.0]), p(&[-0.2, 0.7, 0.0])] {
            let mut x = x;
            for k in dim..3 {
                x[k] = 0.0;
            }
            let r = frac_laplacian(&u, &x, s, &cfg().refined()).unwrap();
            assert!((r.value - want).abs() < 1e-5 * want.abs(), "N={dim} s={s} x={x}: {} vs {want}", r.value);
        }
    }
}

#[test]
fn halfspace_large_solution_is_harmonic() {
    for &(dim, s) in &[(1usize, 0.5f64), (2, 0.5), (2, 0.3), (3, 0.7)] {
        let u = HalfspacePower { dim, tau: s - 1.0 };
        let r = frac_laplacian(&u, &Point::axis(dim - 1), s, &cfg().refined()).unwrap();
        assert!(r.value.abs() < 1e-7, "N={dim} s={s}: {r:?}");
    }
}

#[test]
fn near_one_order_matches_finite_difference_laplacian() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = Gaussian { dim: 2, center: p(&[0.1, -0.2]), sigma: 1.0, amplitude: 1.0 };
    for _ in 0..5 {
        let x = p(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let h: f64 = 1e-3;
        let mut lap: f64 = -4.0 * u.value(&x);
        for k in 0..2 {
            let e = Point::<f64>::axis(k) * h;
            lap += u.value(&(x + e)) + u.value(&(x - e));
        }
        lap /= h * h;
        let r = frac_laplacian(&u, &x, 0.99, &cfg().refined()).unwrap();
        assert!((r.value - lap).abs() < 0.05 * lap.abs(), "{} vs {lap}", r.value);
    }
}

#[test]
fn indicator_matches_exterior_integral() {
    let s = 0.5;
    let ind = Indicator { domain: Domain::unit_ball(2) };
    let k = Kernel::isotropic(2, s, false).unwrap();
    for &rho in &[0.0, 0.3, 0.8] {
        let n = 20000;
        let oracle: f64 = (0..n)
            .map(|i| {
                let th = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                let r = -rho * th.cos() + (1.0 - rho * rho * th.sin().powi(2)).sqrt();
                r.powf(-2.0 * s) / (2.0 * s)
            })
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64;
        let r = linear_op(&k, &ind, &p(&[rho, 0.0]), &cfg()).unwrap();
        assert!((r.value + oracle).abs() < 1e-6 * oracle, "rho={rho}: {} vs {}", r.value, -oracle);
    }
}

#[test]
fn extremal_operators_sandwich_class_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = EllipticityBounds::new(0.5, 2.0).unwrap();
    let fields: Vec<FieldRef<f64>> = vec![
        Arc::new(Gaussian { dim: 2, center: p(&[0.0, 0.0]), sigma: 0.5, amplitude: 1.0 }),
        Arc::new(BallProfile::unit(2, -0.4)),
    ];
    let kernels = [
        Kernel::isotropic(2, 0.6, false).unwrap().scaled(0.7),
        Kernel::new(2, 0.6, Anisotropy::sectors_full_circle(&[0.0, PI / 3.0, PI, 4.0 * PI / 3.0], &[0.5, 2.0, 0.5, 2.0]).unwrap(), false).unwrap(),
    ];
    for u in &fields {
        for _ in 0..4 {
            let x = p(&[rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)]);
            let hi = pucci_plus(u.as_ref(), &x, &b, 0.6, &cfg()).unwrap();
            let lo = pucci_minus(u.as_ref(), &x, &b, 0.6, &cfg()).unwrap();
            for k in &kernels {
                let l = linear_op(k, u.as_ref(), &x, &cfg()).unwrap();
                let tol = hi.error_estimate + lo.error_estimate + l.error_estimate + 1e-10;
                assert!(lo.value <= l.value + tol && l.value <= hi.value + tol, "{lo:?} {l:?} {hi:?}");
            }
        }
    }
}

#[test]
fn degenerate_bounds_collapse_to_the_linear_operator() {
    let b = EllipticityBounds::new(1.3, 1.3).unwrap();
    let u = Gaussian { dim: 3, center: p(&[0.1, 0.0, 0.2]), sigma: 0.7, amplitude: 1.0 };
    let x = p(&[0.3, -0.1, 0.0]);
    let k = Kernel::isotropic(3, 0.4, false).unwrap().scaled(1.3);
    let l = linear_op(&k, &u, &x, &cfg()).unwrap().value;
    let hi = pucci_plus(&u, &x, &b, 0.4, &cfg()).unwrap().value;
    let lo = pucci_minus(&u, &x, &b, 0.4, &cfg()).unwrap().value;
    assert!((hi - l).abs() < 1e-10 && (lo - l).abs() < 1e-10);
}

#[test]
fn isaacs_operator_is_min_max_of_members() {
    let b = EllipticityBounds::new(0.5, 2.0).unwrap();
    let base = Kernel::isotropic(2, 0.5, false).unwrap();
    let scales = [[0.5, 2.0], [1.0, 0.7]];
    let members: Vec<Vec<_>> = scales.iter().map(|r| r.iter().map(|&c| base.scaled(c)).collect()).collect();
    let fam = KernelFamily::new(members, b).unwrap();
    let u = Gaussian { dim: 2, center: p(&[0.0, 0.0]), sigma: 0.4, amplitude: 1.0 };
    for x in [p(&[0.0, 0.0]), p(&[1.5, 0.0])] {
        let single = linear_op(&base, &u, &x, &cfg()).unwrap().value;
        let brute = scales
            .iter()
            .map(|r| r.iter().map(|c| c * single).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        let v = isaacs_op(&fam, &u, &x, &cfg()).unwrap();
        assert!((v.value - brute).abs() < 1e-10, "{} vs {brute}", v.value);
        let hi = pucci_plus(&u, &x, &b, 0.5, &cfg()).unwrap().value;
        let lo = pucci_minus(&u, &x, &b, 0.5, &cfg()).unwrap().value;
        assert!(lo <= v.value + 1e-10 && v.value <= hi + 1e-10);
    }
    let single = KernelFamily::singleton(base.clone(), b).unwrap();
    let x = p(&[0.2, 0.1]);
    let a = isaacs_op(&single, &u, &x, &cfg()).unwrap().value;
    assert!((a - linear_op(&base, &u, &x, &cfg()).unwrap().value).abs() < 1e-14);
}

#[test]
fn product_rule_holds() {
    let k = Kernel::new(2, 0.45, Anisotropy::sectors_full_circle(&[0.0, 0.3, 1.5, PI, 0.3 + PI, 1.5 + PI], &[1.8, 1.0, 1.8, 1.8, 1.0, 1.8]).unwrap(), false).unwrap();
    let f: FieldRef<f64> = Arc::new(Gaussian { dim: 2, center: p(&[0.2, 0.0]), sigma: 0.5, amplitude: 1.0 });
    let g: FieldRef<f64> = Arc::new(Gaussian { dim: 2, center: p(&[-0.3, 0.4]), sigma: 0.8, amplitude: 2.0 });
    let fg = Product { a: f.clone(), b: g.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let x = p(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let c = cfg();
        let lfg = linear_op(&k, &fg, &x, &c).unwrap();
        let lf = linear_op(&k, f.as_ref(), &x, &c).unwrap();
        let lg = linear_op(&k, g.as_ref(), &x, &c).unwrap();
        let bb = bilinear_form(&k, f.as_ref(), g.as_ref(), &x, &c).unwrap();
        let (fx, gx) = (f.value(&x), g.value(&x));
        let lhs = lfg.value - fx * lg.value - gx * lf.value - 2.0 * bb.value;
        let tol = lfg.error_estimate + fx.abs() * lg.error_estimate + gx.abs() * lf.error_estimate + 2.0 * bb.error_estimate + 1e-10;
        assert!(lhs.abs() <= tol, "{lhs} > {tol}");
        let ff = bilinear_form(&k, f.as_ref(), f.as_ref(), &x, &c).unwrap();
        assert!(ff.value >= 0.0);
    }
}

#[test]
fn bilinear_form_of_constant_vanishes_and_detects_divergence() {
    let k = Kernel::isotropic(2, 0.5, false).unwrap();
    let c = ConstantField { dim: 2, value: 2.0 };
    let g = Gaussian { dim: 2, center: p(&[0.0, 0.0]), sigma: 1.0, amplitude: 1.0 };
    let r = bilinear_form(&k, &c, &g, &p(&[0.3, 0.3]), &cfg()).unwrap();
    assert!(r.value.abs() < 1e-14);
    let lin = Affine { dim: 2, slope: p(&[1.0, 0.5]), offset: 0.0 };
    assert!(matches!(bilinear_form(&k, &lin, &lin, &p(&[0.0, 0.0]), &cfg()), Err(Error::NonIntegrable { .. })));
}

#[test]
fn halfspace_linear_decomposition_terms_vanish() {
    let s = 0.5;
    let k = Kernel::isotropic(2, s, true).unwrap();
    let f = HalfspacePower { dim: 2, tau: s - 1.0 };
    let g = Affine { dim: 2, slope: p(&[1.0, 0.0]), offset: 0.0 };
    let x = p(&[0.0, 1.0]);
    let b = bilinear_form(&k, &f, &g, &x, &cfg()).unwrap();
    assert!(b.value.abs() < 1e-10, "{b:?}");
    let prod = HalfspaceLinearProfile { dim: 2, slope: p(&[1.0]), s };
    for x in [p(&[0.0, 0.5]), p(&[0.4, 0.3]), p(&[-1.0, 2.0])] {
        let r = frac_laplacian(&prod, &x, s, &cfg().refined()).unwrap();
        assert!(r.value.abs() < 1e-6, "{x}: {r:?}");
    }
}

#[test]
fn translation_and_scaling_covariance() {
    let s = 0.35;
    let k = Kernel::new(2, s, Anisotropy::sectors_full_circle(&[0.0, 1.0, PI, 1.0 + PI], &[1.0, 3.0, 1.0, 3.0]).unwrap(), false).unwrap();
    let u: FieldRef<f64> = Arc::new(BallProfile::unit(2, s));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let x = p(&[rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
        let v = p(&[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
        let base = linear_op(&k, u.as_ref(), &x, &cfg()).unwrap();
        let sh = Shifted { inner: u.clone(), shift: v };
        let moved = linear_op(&k, &sh, &(x + v), &cfg()).unwrap();
        assert!((base.value - moved.value).abs() <= 2.0 * (base.error_estimate + moved.error_estimate) + 1e-9);
        let lam = 1.7;
        let dil = Dilated { inner: u.clone(), factor: lam };
        let scaled = linear_op(&k, &dil, &(x * (1.0 / lam)), &cfg()).unwrap();
        let want = lam.powf(2.0 * s) * base.value;
        assert!((scaled.value - want).abs() <= 2.0 * (scaled.error_estimate + base.error_estimate) + 1e-9, "{} vs {want}", scaled.value);
    }
}

#[test]
fn refinement_changes_smooth_values_by_less_than_the_estimate() {
    let s = 0.6;
    let fields: Vec<(FieldRef<f64>, Point<f64>)> = vec![
        (Arc::new(Gaussian { dim: 2, center: p(&[0.0, 0.0]), sigma: 0.5, amplitude: 1.0 }), p(&[0.2, 0.1])),
        (Arc::new(BallProfile::unit(2, s)), p(&[0.5, 0.2])),
        (Arc::new(Gaussian { dim: 3, center: p(&[0.0, 0.0, 0.0]), sigma: 1.0, amplitude: 1.0 }), p(&[0.2, 0.1, -0.3])),
    ];
    for (u, x) in &fields {
        let c = cfg();
        let a = frac_laplacian(u.as_ref(), x, s, &c).unwrap();
        let b = frac_laplacian(u.as_ref(), x, s, &c.refined()).unwrap();
        assert!((a.value - b.value).abs() <= a.error_estimate + 1e-12, "{a:?} {b:?}");
    }
}

#[test]
fn growth_tail_modes_agree() {
    let s = 0.5;
    let u = HalfspacePower { dim: 2, tau: -0.3 };
    let x = p(&[0.2, 0.5]);
    let mapped = frac_laplacian(&u, &x, s, &cfg().refined()).unwrap();
    let truncated = frac_laplacian(&u, &x, s, &QuadratureConfig { tail_mode: TailMode::GrowthBound, r_far: 1e4, ..cfg().refined() }).unwrap();
    assert!(truncated.error_estimate > 0.0);
    assert!((mapped.value - truncated.value).abs() <= truncated.error_estimate + mapped.error_estimate);
    let strict = QuadratureConfig { tail_mode: TailMode::AnalyticZero, ..cfg() };
    assert!(frac_laplacian(&u, &x, s, &strict).is_err());
}

#[test]
fn principal_value_requires_regularity() {
    let dom = Domain::unit_ball(2);
    let u = fracblow_core::field::DistPow { domain: dom, tau: -0.5 };
    let err = frac_laplacian(&u, &p(&[1.0, 0.0]), 0.5, &cfg()).unwrap_err();
    assert!(matches!(err, Error::PvUndefined { .. }));
    assert!(QuadratureConfig { r_near: 0.0, ..cfg() }.validate().is_err());
    assert!(QuadratureConfig { sphere_order: 0, ..cfg() }.validate().is_err());
}

#[test]
fn parallel_evaluation_preserves_order() {
    let u = Gaussian { dim: 2, center: p(&[0.0, 0.0]), sigma: 0.5, amplitude: 1.0 };
    let pts: Vec<_> = (0..16).map(|i| p(&[i as f64 * 0.1, 0.0])).collect();
    let par = evaluate_points(&pts, |x| frac_laplacian(&u, x, 0.5, &cfg()));
    for (x, r) in pts.iter().zip(par) {
        assert_eq!(r.unwrap(), frac_laplacian(&u, x, 0.5, &cfg()).unwrap());
    }
}
