use std::f64::consts::PI;
use std::sync::Arc;

use fracblow_core::analysis::*;
use fracblow_core::barriers::BoundaryFn;
use fracblow_core::field::ConstantField;
use fracblow_core::geometry::polar_point;
use fracblow_core::solver::{solve, ProblemData, SolveConfig, SolverOperator};
use fracblow_core::special::torsion_constant;
use fracblow_core::*;

fn exact_ball(s: f64) -> impl Fn(&Point<f64>) -> f64 + Sync {
    move |x| {
        let w = 1.0 - x.norm_sq();
        if w > 0.0 {
            w.powf(s - 1.0)
        } else {
            0.0
        }
    }
}

fn circle(n: usize) -> Vec<Point<f64>> {
    (0..n).map(|k| polar_point(2.0 * PI * (k as f64 + 0.25) / n as f64)).collect()
}

fn constant_trace(c: f64) -> BoundaryFn<f64> {
    Arc::new(move |_: &Point<f64>| c)
}

#[test]
fn exact_profile_errors_follow_the_closed_form() {
    let s = 0.5;
    let u = exact_ball(s);
    let h = 2f64.powf(s - 1.0);
    let dists = geometric_distances(0.4, 0.01, 8);
    let rep = boundary_profile(&u, &Domain::unit_ball(2), &constant_trace(h), s, &circle(6), &dists, 0.0).unwrap();
    for ray in &rep.rays {
        for (d, e) in ray.distances.iter().zip(&ray.errors) {
            let want = ((2.0 - d).powf(s - 1.0) - h).abs();
            assert!((e - want).abs() < 1e-12, "{e} vs {want}");
        }
    }
    assert!((rep.smallest_distance - 0.01).abs() < 1e-15);
    let q = rep.modulus_exponent.unwrap();
    assert!((q - 1.0).abs() < 0.05, "{q}");
    assert!(rep.warnings.is_empty());
}

#[test]
fn profile_skips_layer_points_and_rejects_bad_input() {
    let s = 0.5;
    let u = exact_ball(s);
    let dom = Domain::unit_ball(2);
    let h = constant_trace(1.0);
    let rep = boundary_profile(&u, &dom, &h, s, &circle(2), &[0.3, 0.2, 0.05], 0.1).unwrap();
    assert_eq!(rep.warnings.len(), 1);
    assert_eq!(rep.rays[0].distances.len(), 2);
    assert!(boundary_profile(&u, &dom, &h, s, &circle(2), &[0.1, 0.2], 0.0).is_err());
    assert!(boundary_profile(&u, &dom, &h, s, &circle(2), &[0.6, 0.2], 0.0).is_err());
    assert!(matches!(
        boundary_profile(&u, &dom, &h, s, &[Point::zero()], &[0.2], 0.0),
        Err(Error::NotOnBoundary { .. })
    ));
}

#[test]
fn solved_profile_matches_trace_and_bounded_solution_has_zero_trace() {
    let s = 0.5;
    let dom = Domain::unit_ball(2);
    let cfg = SolveConfig {
        delta: 0.1,
        ..SolveConfig::default()
    };
    let op = SolverOperator::Linear(Kernel::isotropic(2, s, true).unwrap());
    let h = 2f64.powf(s - 1.0);
    let (sol, _) = solve(&op, &dom, &ProblemData::constant_trace(h), &cfg).unwrap();
    let probe = |x: &Point<f64>| sol.value_at(x);
    let rep = boundary_profile(&probe, &dom, &constant_trace(h), s, &circle(8), &[0.4, 0.2, 0.1], 0.1).unwrap();
    assert!(rep.max_relative_error_at_smallest < 0.05, "{}", rep.max_relative_error_at_smallest);

    let data = ProblemData::constant_trace(0.0).with_f(Arc::new(ConstantField { dim: 2, value: -1.0 }));
    let (sol, _) = solve(&op, &dom, &data, &cfg).unwrap();
    let probe = |x: &Point<f64>| sol.value_at(x);
    let rep = boundary_profile(&probe, &dom, &constant_trace(0.0), s, &circle(8), &[0.4, 0.2, 0.1], 0.1).unwrap();
    let bound = 1.0 / torsion_constant(2, s);
    for ray in &rep.rays {
        assert!(ray.errors.windows(2).all(|w| w[1] < w[0]), "{:?}", ray.errors);
        for (d, e) in ray.distances.iter().zip(&ray.errors) {
            assert!(*e <= 1.1 * bound * d.powf(1.0 - s) * 2f64.powf(s), "{e} at {d}");
        }
    }
}

#[test]
fn gradient_rate_recovers_power_exponents() {
    let dom = Domain::unit_ball(2);
    for beta in [-0.5, 0.3, 1.5] {
        let u = move |x: &Point<f64>| (1.0 - x.norm()).max(0.0).powf(beta);
        let rep = gradient_rate(&u, &dom, (0.01, 0.2), &circle(4), 6, None).unwrap();
        assert!((rep.slope - (beta - 1.0)).abs() < 0.02, "beta {beta}: {}", rep.slope);
        assert!(rep.confidence.0 <= rep.slope && rep.slope <= rep.confidence.1);
        assert!(rep.decades > 1.2);
    }
    let s = 0.5;
    let rep = gradient_rate(&exact_ball(s), &dom, (0.01, 0.1), &circle(6), 5, None).unwrap();
    assert!((rep.slope - (s - 2.0)).abs() < 0.05, "{}", rep.slope);
    let few = gradient_rate(&exact_ball(s), &dom, (0.01, 0.1), &circle(1), 5, None);
    assert!(matches!(few, Err(Error::InsufficientData(_))));
}

#[test]
fn vanishing_trace_breaks_the_lower_gradient_bound() {
    let s = 0.5;
    let dom = Domain::half_space(2, Point::axis(1), 0.0, 4.0).unwrap();
    let u = |x: &Point<f64>| if x[1] > 0.0 { x[0] * x[1].powf(s - 1.0) } else { 0.0 };
    let rep = gradient_rate(&u, &dom, (0.01, 0.5), &[Point::zero()], 12, None).unwrap();
    assert!((rep.slope - (s - 1.0)).abs() < 0.02, "{}", rep.slope);
    for r in &rep.samples {
        assert!((r.gradient_norm - r.distance.powf(s - 1.0)).abs() < 1e-6 * r.gradient_norm);
    }
}

#[test]
fn rescaled_exact_profile_approaches_the_half_space_limit() {
    let s = 0.5;
    let u = exact_ball(s);
    let h = 2f64.powf(s - 1.0);
    let z = polar_point(0.7);
    let scales = [0.2, 0.1, 0.05, 0.01];
    let (fields, rep) = rescaled_family(&u, &Domain::unit_ball(2), &z, h, s, &scales).unwrap();
    for (v, d) in fields.iter().zip(scales) {
        let want = (2.0 - d).powf(s - 1.0);
        assert!((v.value(&Point::axis(1)) - want).abs() < 1e-12);
    }
    let errs: Vec<f64> = rep.samples.iter().map(|r| (r.value_at_normal - rep.value_target).abs()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    let last = rep.samples.last().unwrap();
    assert!(last.gradient_at_normal[0].abs() < 1e-8);
    let gn = last.gradient_at_normal[1];
    assert!((gn - rep.gradient_target[1]).abs() < 0.02 * rep.gradient_target[1].abs(), "{gn} vs {:?}", rep.gradient_target);
    assert!(rescaled_family(&u, &Domain::unit_ball(2), &z, h, s, &[0.3]).is_err());
}

fn lemma(tau: f64, alpha: f64, s: f64) -> LemmaReport {
    let k = Kernel::isotropic(2, s, false).unwrap();
    let dom = Domain::unit_ball(2);
    let dists = geometric_distances(0.08, 0.0025, 6);
    product_formula_check(&k, &dom, tau, alpha, &polar_point(PI), &polar_point(0.0), &dists, &QuadratureConfig::default()).unwrap()
}

#[test]
fn product_formula_leading_constant() {
    let r = lemma(0.3, 0.4, 0.5);
    assert!((r.extrapolated - r.c_constant).abs() < 0.02 * r.c_constant.abs(), "{r:#?}");
    let r = lemma(0.0, 0.5, 0.5);
    assert!(r.c_constant < 0.0);
    assert!((r.extrapolated - r.c_constant).abs() < 0.05 * r.c_constant.abs(), "{r:#?}");
    let r = lemma(-0.5, 0.5, 0.5);
    assert!(r.c_constant.abs() < 1e-6);
    let first = r.samples[0].ratio.abs();
    let last = r.samples.last().unwrap().ratio.abs();
    assert!(last < 0.5 * first, "{r:#?}");
}

#[test]
fn product_formula_rejects_out_of_range_parameters() {
    let k = Kernel::isotropic(2, 0.5, false).unwrap();
    let dom = Domain::unit_ball(2);
    let c = QuadratureConfig::default();
    let (a, b) = (polar_point(PI), polar_point(0.0));
    for (tau, alpha) in [(0.0, 1.2), (1.1, 0.5), (-1.0, 0.5), (0.0, 0.0)] {
        assert!(matches!(product_formula_check(&k, &dom, tau, alpha, &a, &b, &[0.05], &c), Err(Error::Domain(_))));
    }
    assert!(matches!(product_formula_check(&k, &dom, 0.0, 0.5, &a, &b, &[0.5], &c), Err(Error::Domain(_))));
}

/// `int_{|y| > 1} |x - y|^{-2-2s} dy` for `x = (rho, 0)`.
fn exterior_integral(rho: f64, s: f64) -> f64 {
    let n = 20000;
    (0..n)
        .map(|i| {
            let th = 2.0 * PI * (i as f64 + 0.5) / n as f64;
            let r = -rho * th.cos() + (1.0 - rho * rho * th.sin().powi(2)).sqrt();
            r.powf(-2.0 * s) / (2.0 * s)
        })
        .sum::<f64>()
        * 2.0
        * PI
        / n as f64
}

#[test]
fn indicator_is_strictly_negative() {
    let s = 0.5;
    let dom = Domain::unit_ball(2);
    let pts = dom.interior_points(50, 0.05);
    let bounds = EllipticityBounds::new(0.5, 2.0).unwrap();
    let rep = indicator_check(&dom, &bounds, s, &pts, &QuadratureConfig::default()).unwrap();
    assert_eq!(rep.samples.len(), 50);
    assert!(rep.all_negative && rep.fitted_constant > 0.0);
    let flat = EllipticityBounds::new(1.3, 1.3).unwrap();
    let pts = [Point::zero(), Point::from_f64(&[0.9, 0.0])];
    let rep = indicator_check(&dom, &flat, s, &pts, &QuadratureConfig::default()).unwrap();
    for (r, rho) in rep.samples.iter().zip([0.0, 0.9]) {
        let want = -1.3 * exterior_integral(rho, s);
        assert!((r.value - want).abs() < 0.01 * want.abs(), "{} vs {want}", r.value);
    }
    assert!(indicator_check(&dom, &flat, s, &[Point::from_f64(&[0.99, 0.0])], &QuadratureConfig::default()).is_err());
}

#[test]
fn limit_coefficients_of_the_isotropic_and_sector_kernels() {
    let orders = [0.9, 0.95, 0.99];
    let iso = limit_coefficients(&[vec![Anisotropy::constant(1.0)]], 2, &orders, 8).unwrap();
    for e in &iso.entries {
        assert!((e.limit - 1.0).abs() < 1e-3, "{e:?}");
        assert!(e.values.iter().all(|v| *v > 0.0));
    }
    assert!((iso.entries[0].limit - iso.entries[1].limit).abs() < 1e-12);

    let a = Anisotropy::sectors_full_circle(&[0.0, PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0], &[1.0, 2.0, 1.0, 2.0, 1.0]).unwrap();
    let rep = limit_coefficients(&[vec![a]], 2, &orders, 8).unwrap();
    let (a1, a2) = (rep.entries[0].limit, rep.entries[1].limit);
    assert!(a2 > a1);
    let want = (1.5 * PI + 1.0) / (1.5 * PI - 1.0);
    assert!((a2 / a1 - want).abs() < 1e-6, "{} vs {want}", a2 / a1);

    assert!(limit_coefficients(&[vec![Anisotropy::constant(1.0)]], 2, &[0.9], 8).is_err());
    assert!(limit_coefficients(&[vec![Anisotropy::constant(1.0)]], 2, &[0.95, 0.9], 8).is_err());
}

#[test]
fn halfspace_profile_checks() {
    let s = 0.5;
    let pts = halfspace_samples(2, 10);
    assert!(pts.iter().all(|x| x[1] >= 0.1 && x[1] <= 1.0));
    let rep = halfspace_checks(&[1.0], s, &pts, &QuadratureConfig::default()).unwrap();
    assert!(rep.within_estimate, "{rep:#?}");
    assert!(rep.min_decay >= 2.0, "{}", rep.min_decay);
    assert!(rep.decomposition_consistent);
    for r in &rep.samples {
        for (g, e) in r.gradient.iter().zip(&r.gradient_expected) {
            assert!((g - e).abs() < 1e-3 * (1.0 + e.abs()), "{g} vs {e}");
        }
    }
    let on_axis = halfspace_checks(&[2.0], s, &[Point::from_f64(&[0.0, 0.25])], &QuadratureConfig::default()).unwrap();
    let g = &on_axis.samples[0].gradient;
    assert!((g[0] - 2.0 * 0.25f64.powf(s - 1.0)).abs() < 1e-6 && g[1].abs() < 1e-9);
    assert!(halfspace_checks(&[0.0], s, &pts, &QuadratureConfig::default()).is_err());
}

#[test]
fn reports_serialize_identically() {
    let s = 0.5;
    let u = exact_ball(s);
    let run = || {
        let rep = gradient_rate(&u, &Domain::unit_ball(2), (0.01, 0.1), &circle(6), 5, None).unwrap();
        format!("{rep:?}")
    };
    assert_eq!(run(), run());
}
