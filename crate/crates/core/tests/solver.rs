use std::f64::consts::PI;
use std::sync::Arc;

use fracblow_core::field::{ConstantField, Gaussian};
use fracblow_core::nonlocal_eval::frac_laplacian;
use fracblow_core::barriers::BoundaryFn;
use fracblow_core::solver::*;
use fracblow_core::special::torsion_constant;
use fracblow_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn laplacian(dim: usize, s: f64) -> SolverOperator {
    SolverOperator::Linear(Kernel::isotropic(dim, s, true).unwrap())
}

fn cfg(delta: f64) -> SolveConfig {
    SolveConfig {
        delta,
        ..SolveConfig::default()
    }
}

fn ball_profile(s: f64) -> impl Fn(&Point<f64>) -> f64 {
    move |x| (1.0 - x.norm_sq()).powf(s - 1.0)
}

#[test]
fn mesh_classifies_nodes_and_counts_snapshot() {
    let dom = Domain::<f64>::unit_ball(2);
    let c = SolveConfig {
        delta: 0.1,
        spacing: Some(0.04),
        ..SolveConfig::default()
    };
    let mesh = build_mesh(&dom, &c).unwrap();
    for &i in mesh.core_nodes() {
        assert!(mesh.distance(i) >= 0.1);
        assert_eq!(mesh.kind(i), NodeKind::Core);
    }
    let summary = mesh.summary();
    let mut expected = 0;
    for i in -30i32..=30 {
        for j in -30i32..=30 {
            if (i * i + j * j) as f64 * 0.04f64.powi(2) <= 0.81 {
                expected += 1;
            }
        }
    }
    assert_eq!(summary.core_nodes, expected);
    assert_eq!(summary.lattice[2], 1);
    assert_eq!(summary.core_nodes + summary.layer_nodes + summary.exterior_nodes, mesh.len());
    let finer = build_mesh(
        &dom,
        &SolveConfig {
            spacing: Some(0.02),
            ..c
        },
    )
    .unwrap();
    assert!(finer.core_nodes().len() >= 3 * summary.core_nodes);
}

#[test]
fn mesh_rejects_wide_layers_and_unbounded_domains() {
    let dom = Domain::<f64>::unit_ball(2);
    assert!(matches!(build_mesh(&dom, &cfg(0.5)), Err(Error::Domain(_))));
    let hs = Domain::half_space(2, Point::axis(1), 0.0, 2.0).unwrap();
    assert!(build_mesh(&hs, &cfg(0.1)).is_err());
}

#[test]
fn assembled_rows_are_monotone_and_annihilate_constants() {
    let dom = Domain::<f64>::unit_ball(2);
    let mesh = Arc::new(build_mesh(&dom, &cfg(0.1)).unwrap());
    let data = ProblemData::constant_trace(1.0).with_g(Arc::new(ConstantField { dim: 2, value: 1.0 }));
    for op in [
        laplacian(2, 0.3),
        SolverOperator::PucciPlus {
            bounds: EllipticityBounds::new(0.5, 2.0).unwrap(),
            order: 0.6,
            dim: 2,
        },
    ] {
        let opr = assemble(&op, &mesh, &data, &cfg(0.1)).unwrap();
        let mono = opr.monotonicity();
        assert_eq!(mono.monotone_rows, mono.rows);
        assert!(mono.min_offdiagonal >= 0.0);
        assert!(mono.constant_defect < 1e-12);
        let rows = opr.apply_field(&ConstantField { dim: 2, value: 1.0 });
        let scale = opr.diagonal().iter().map(|d| d.abs()).fold(0.0, f64::max);
        for r in rows {
            assert!(r.abs() < 1e-10 * scale, "{r} vs {scale}");
        }
    }
}

#[test]
fn strongly_anisotropic_extremal_bounds_break_monotonicity() {
    let dom = Domain::<f64>::unit_ball(2);
    let mesh = Arc::new(build_mesh(&dom, &cfg(0.1)).unwrap());
    let op = SolverOperator::PucciPlus {
        bounds: EllipticityBounds::new(0.01, 10.0).unwrap(),
        order: 0.5,
        dim: 2,
    };
    let r = assemble(&op, &mesh, &ProblemData::constant_trace(1.0), &cfg(0.1));
    assert!(matches!(r, Err(Error::NegativeWeight { .. })));
}

#[test]
fn zero_data_gives_zero_solution() {
    let dom = Domain::<f64>::unit_ball(2);
    let (sol, rep) = solve(&laplacian(2, 0.5), &dom, &ProblemData::constant_trace(0.0), &cfg(0.1)).unwrap();
    assert!(sol.core_values().iter().all(|v| *v == 0.0));
    assert_eq!(rep.linear_iterations, vec![0]);
}

#[test]
fn discrete_rows_match_evaluator_on_smooth_field() {
    let s = 0.5;
    let dom = Domain::<f64>::unit_ball(2);
    let g = Gaussian {
        dim: 2,
        center: Point::from_f64(&[0.1, -0.05]),
        sigma: 0.3,
        amplitude: 1.0,
    };
    let mut errs = Vec::new();
    for delta in [0.1, 0.05] {
        let mesh = Arc::new(build_mesh(&dom, &cfg(delta)).unwrap());
        let opr = assemble(&laplacian(2, s), &mesh, &ProblemData::constant_trace(0.0), &cfg(delta)).unwrap();
        let rows = opr.apply_field(&g);
        let mut worst: f64 = 0.0;
        for (k, &i) in mesh.core_nodes().iter().enumerate().step_by(97) {
            let x = mesh.point(i);
            let exact = frac_laplacian(&g, &x, s, &QuadratureConfig::default()).unwrap().value;
            worst = worst.max((rows[k] - exact).abs());
        }
        errs.push(worst);
    }
    assert!(errs[0] < 0.05, "{errs:?}");
    assert!(errs[1] < 0.6 * errs[0], "{errs:?}");
}

#[test]
fn explicit_large_solution_is_reproduced_and_residual_shrinks() {
    let s = 0.5;
    let dom = Domain::<f64>::unit_ball(2);
    let exact = ball_profile(s);
    let data = ProblemData::constant_trace(2f64.powf(s - 1.0));
    let mut errors = Vec::new();
    let mut residuals = Vec::new();
    for delta in [0.2, 0.1] {
        let (sol, _) = solve(&laplacian(2, s), &dom, &data, &cfg(delta)).unwrap();
        let mut worst: f64 = 0.0;
        for (x, d, u, _) in sol.node_rows() {
            if d >= 2.0 * delta {
                worst = worst.max((u - exact(&x)).abs() / exact(&x));
            }
        }
        errors.push(worst);
        let mesh = Arc::new(build_mesh(&dom, &cfg(delta)).unwrap());
        let opr = assemble(&laplacian(2, s), &mesh, &data, &cfg(delta)).unwrap();
        let vals: Vec<f64> = mesh.core_points().iter().map(&exact).collect();
        let scale = opr.affine().iter().map(|a| a.abs()).fold(0.0, f64::max);
        let r = opr.residual(&vals).iter().map(|r| r.abs()).fold(0.0, f64::max);
        residuals.push(r / scale);
    }
    assert!(errors[1] < 0.03, "{errors:?}");
    assert!(errors[1] < errors[0], "{errors:?}");
    assert!(residuals[1] < residuals[0], "{residuals:?}");
}

#[test]
fn bounded_forcing_gives_torsion_profile_of_inner_ball() {
    let s = 0.5;
    let delta = 0.1;
    let dom = Domain::<f64>::unit_ball(2);
    let data = ProblemData::constant_trace(0.0).with_f(Arc::new(ConstantField { dim: 2, value: -1.0 }));
    let (sol, _) = solve(&laplacian(2, s), &dom, &data, &cfg(delta)).unwrap();
    let r = 1.0 - delta;
    let expect = r.powf(2.0 * s) / torsion_constant(2, s);
    let max = sol.core_values().iter().copied().fold(f64::MIN, f64::max);
    assert!((max - expect).abs() < 0.05 * expect, "{max} vs {expect}");
}

#[test]
fn one_and_three_dimensional_solves_track_the_profile() {
    for (dim, delta, tol) in [(1usize, 0.05, 0.02), (3, 0.15, 0.08)] {
        let s = 0.6;
        let dom = Domain::<f64>::unit_ball(dim);
        let data = ProblemData::constant_trace(2f64.powf(s - 1.0));
        let (sol, _) = solve(&laplacian(dim, s), &dom, &data, &cfg(delta)).unwrap();
        let exact = ball_profile(s);
        let centre = sol.value_at(&Point::zero());
        assert!((centre - 1.0).abs() < tol, "dim {dim}: {centre}");
        let x = Point::axis(0) * 0.5;
        assert!((sol.value_at(&x) - exact(&x)).abs() < tol * exact(&x), "dim {dim}");
    }
}

fn random_trace(c: [f64; 4], shift: f64) -> BoundaryFn<f64> {
    Arc::new(move |y: &Point<f64>| {
        let t = y[1].atan2(y[0]);
        shift + c[0] + c[1] * t.cos() + c[2] * (2.0 * t).sin() + c[3] * (3.0 * t).cos()
    })
}

#[test]
fn discrete_comparison_on_random_ordered_data() {
    let dom = Domain::<f64>::unit_ball(2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = cfg(0.2);
    for trial in 0..20 {
        let op = if trial % 2 == 0 {
            laplacian(2, 0.4)
        } else {
            SolverOperator::PucciMinus {
                bounds: EllipticityBounds::new(0.5, 1.5).unwrap(),
                order: 0.7,
                dim: 2,
            }
        };
        let coef: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let hu = random_trace(coef, 0.0);
        let hv = random_trace(coef, rng.gen_range(0.1..1.0));
        let fu = rng.gen_range(0.0..1.0);
        let fv = fu - rng.gen_range(0.1..1.0);
        let du = ProblemData::new(hu).with_f(Arc::new(ConstantField { dim: 2, value: fu }));
        let dv = ProblemData::new(hv).with_f(Arc::new(ConstantField { dim: 2, value: fv }));
        let (u, _) = solve(&op, &dom, &du, &c).unwrap();
        let (v, _) = solve(&op, &dom, &dv, &c).unwrap();
        for (a, b) in u.core_values().iter().zip(v.core_values()) {
            assert!(a <= b, "trial {trial}: {a} > {b}");
        }
    }
}

fn two_level_family(s: f64, lo: f64, hi: f64) -> KernelFamily<f64> {
    let k = |a: f64| Kernel::new(2, s, Anisotropy::constant(a), false).unwrap();
    KernelFamily::new(vec![vec![k(lo), k(hi)]], EllipticityBounds::new(lo, hi).unwrap()).unwrap()
}

#[test]
fn singleton_family_equals_linear_solve() {
    let s = 0.5;
    let dom = Domain::<f64>::unit_ball(2);
    let k = Kernel::isotropic(2, s, true).unwrap();
    let c = k.normalizer();
    let fam = KernelFamily::singleton(k.clone(), EllipticityBounds::new(0.5 * c, 2.0 * c).unwrap()).unwrap();
    let data = ProblemData::constant_trace(1.0).with_f(Arc::new(ConstantField { dim: 2, value: 0.3 }));
    let conf = cfg(0.1);
    let (lin, _) = solve(&SolverOperator::Linear(k), &dom, &data, &conf).unwrap();
    let mesh = lin.mesh().clone();
    let (isa, rep) = solve_isaacs(&fam, &mesh, &data, &conf).unwrap();
    assert_eq!(rep.policy_iterations, 1);
    for (a, b) in lin.core_values().iter().zip(isa.core_values()) {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
    }
}

#[test]
fn homogeneous_two_level_family_matches_linear_solution() {
    let s = 0.5;
    let dom = Domain::<f64>::unit_ball(2);
    let data = ProblemData::constant_trace(1.0);
    let conf = cfg(0.1);
    let fam = two_level_family(s, 0.5, 2.0);
    let mesh = Arc::new(build_mesh(&dom, &conf).unwrap());
    let (isa, _) = solve_isaacs(&fam, &mesh, &data, &conf).unwrap();
    let lin_k = Kernel::new(2, s, Anisotropy::constant(1.0), false).unwrap();
    let (lin, _) = solve(&SolverOperator::Linear(lin_k), &dom, &data, &conf).unwrap();
    for (a, b) in lin.core_values().iter().zip(isa.core_values()) {
        assert!((a - b).abs() <= 1e-7 * a.abs(), "{a} {b}");
    }
}

#[test]
fn isaacs_picks_the_large_member_where_the_evaluation_is_positive() {
    let s = 0.5;
    let dom = Domain::<f64>::unit_ball(2);
    let conf = cfg(0.1);
    let mesh = Arc::new(build_mesh(&dom, &conf).unwrap());
    let fam = two_level_family(s, 0.5, 2.0);
    let data = ProblemData::constant_trace(1.0);
    let mut opr = assemble(&SolverOperator::Isaacs(fam), &mesh, &data, &conf).unwrap();
    let bump: Vec<f64> = mesh.core_points().iter().map(|x| -(-4.0 * x.norm_sq()).exp()).collect();
    opr.set_policy(vec![0; opr.n_rows()]).unwrap();
    let base: Vec<f64> = opr.apply_linear(&bump).iter().zip(opr.affine()).map(|(a, b)| a + b).collect();
    let res = opr.residual(&bump);
    for (b, r) in base.iter().zip(&res) {
        if *b > 1e-9 {
            assert!((r - 4.0 * b).abs() <= 1e-9 * b.abs().max(1.0));
        } else if *b < -1e-9 {
            assert!((r - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn extremal_solutions_sandwich_the_isaacs_solution() {
    let s = 0.5;
    let dom = Domain::<f64>::unit_ball(2);
    let conf = cfg(0.1);
    let mesh = Arc::new(build_mesh(&dom, &conf).unwrap());
    let bounds = EllipticityBounds::new(0.5, 2.0).unwrap();
    let h: BoundaryFn<f64> = Arc::new(|y: &Point<f64>| 1.0 + 0.5 * y[0]);
    let data = ProblemData::new(h).with_f(Arc::new(Gaussian {
        dim: 2,
        center: Point::zero(),
        sigma: 0.3,
        amplitude: 2.0,
    }));
    let k = |a: f64| Kernel::new(2, s, Anisotropy::constant(a), false).unwrap();
    let fam = KernelFamily::new(vec![vec![k(0.5), k(1.5)], vec![k(2.0), k(1.0)]], bounds).unwrap();
    let (isa, rep) = solve_isaacs(&fam, &mesh, &data, &conf).unwrap();
    assert!(rep.max_residual <= conf.tolerance);
    let (up, rep_up) = solve(&SolverOperator::PucciPlus { bounds, order: s, dim: 2 }, &dom, &data, &conf).unwrap();
    let (dn, _) = solve(&SolverOperator::PucciMinus { bounds, order: s, dim: 2 }, &dom, &data, &conf).unwrap();
    for w in rep_up.residual_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
    }
    for ((a, b), c) in dn.core_values().iter().zip(isa.core_values()).zip(up.core_values()) {
        let tol = 1e-7 * b.abs().max(1.0);
        assert!(*a <= b + tol && *b <= c + tol, "{a} {b} {c}");
    }
}

#[test]
fn solves_from_different_initial_guesses_agree() {
    let dom = Domain::<f64>::unit_ball(2);
    let conf = cfg(0.1);
    let op = SolverOperator::PucciPlus {
        bounds: EllipticityBounds::new(0.5, 2.0).unwrap(),
        order: 0.5,
        dim: 2,
    };
    let h: BoundaryFn<f64> = Arc::new(|y: &Point<f64>| 1.0 + (2.0 * y[1].atan2(y[0])).sin());
    let data = ProblemData::new(h);
    let (a, _) = solve(&op, &dom, &data, &conf).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let init: Vec<f64> = (0..a.core_values().len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let (b, _) = solve_with_initial(&op, &dom, &data, &conf, Some(&init)).unwrap();
    let scale = a.core_values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (x, y) in a.core_values().iter().zip(b.core_values()) {
        assert!((x - y).abs() <= 10.0 * conf.tolerance * scale.max(1.0) * 10.0, "{x} {y}");
    }
}

#[test]
fn shrinking_layers_converge_toward_the_explicit_profile() {
    let s = 0.5;
    let dom = Domain::<f64>::unit_ball(2);
    let probes: Vec<Point<f64>> = (0..8)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 8.0;
            Point::from_f64(&[0.7 * t.cos(), 0.7 * t.sin()])
        })
        .collect();
    let exact = ball_profile(s);
    let table = shrink_and_refine(
        &laplacian(2, s),
        &dom,
        &ProblemData::constant_trace(2f64.powf(s - 1.0)),
        &[0.2, 0.1, 0.05],
        &SolveConfig::default(),
        &probes,
        Some(&exact),
    )
    .unwrap();
    let errs: Vec<f64> = table.rows.iter().map(|r| r.reference_error.unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(table.contraction[0] >= 1.5, "{:?}", table.contraction);
    let zero = shrink_and_refine(
        &laplacian(2, s),
        &dom,
        &ProblemData::constant_trace(0.0),
        &[0.2, 0.1],
        &SolveConfig::default(),
        &probes,
        None,
    )
    .unwrap();
    assert!(zero.rows.iter().all(|r| r.probe_values.iter().all(|v| *v == 0.0)));
}

#[test]
fn probe_values_grow_toward_the_boundary() {
    let s = 0.5;
    let dom = Domain::<f64>::unit_ball(2);
    let (sol, _) = solve(&laplacian(2, s), &dom, &ProblemData::constant_trace(1.0), &cfg(0.05)).unwrap();
    let vals: Vec<f64> = [0.0, 0.3, 0.6, 0.8, 0.9].iter().map(|r| sol.value_at(&Point::from_f64(&[*r, 0.0]))).collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
}
