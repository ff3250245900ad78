use std::path::{Path, PathBuf};

use fracblow_core::analysis::{
    boundary_profile, geometric_distances, gradient_rate, halfspace_checks, halfspace_samples, indicator_check, limit_coefficients,
    product_formula_check,
};
use fracblow_core::barriers::{build_barrier_set, CertificationReport};
use fracblow_core::kernels::normalizing_constant;
use fracblow_core::nonlocal_eval::{c_constant as core_c_constant, evaluate_points, isaacs_op, linear_op, pucci_minus, pucci_plus};
use fracblow_core::solver::{self, shrink_and_refine, Solution};
use fracblow_core::{Domain, EllipticityBounds, Kernel, Point, QuadratureConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, BuiltOperator, ExperimentConfig, Subject};
use crate::output::{self, coord_header, num, Table};
use crate::{CliError, Common};

fn read_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    config::load(&text, overrides).map_err(|e| match (e, path) {
        (CliError::Config(m), Some(p)) => CliError::Config(format!("{}: {m}", p.display())),
        (e, _) => e,
    })
}

fn setup(c: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let cfg = read_config(c.config.as_deref(), &c.overrides)?;
    let dir = output::prepare(c.out.as_ref().unwrap_or(&cfg.output.dir))?;
    Ok((cfg, dir))
}

fn coords(x: &Point<f64>, dim: usize) -> Vec<String> {
    x.to_f64(dim).into_iter().map(num).collect()
}

pub fn eval(c: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(c)?;
    let dom = cfg.domain.build()?;
    let field = cfg
        .field
        .as_ref()
        .ok_or_else(|| CliError::Config("`eval` needs a [field] table".into()))?
        .build(&dom)?;
    let points = cfg.analysis.points(&dom)?;
    let q = &cfg.quadrature;
    let s = cfg.s;
    let op = cfg.operator()?;
    let results = evaluate_points(&points, |x| match &op {
        BuiltOperator::Linear(k) => linear_op(k, field.as_ref(), x, q),
        BuiltOperator::Pucci { bounds, plus: true } => pucci_plus(field.as_ref(), x, bounds, s, q),
        BuiltOperator::Pucci { bounds, plus: false } => pucci_minus(field.as_ref(), x, bounds, s, q),
        BuiltOperator::Isaacs(f) => isaacs_op(f, field.as_ref(), x, q),
    });
    let dim = dom.dim();
    let mut table = Table::new(&[coord_header(dim), vec!["value".into(), "error_estimate".into()]].concat());
    let mut rows = Vec::new();
    for (x, r) in points.iter().zip(results) {
        let r = r?;
        let mut row = coords(x, dim);
        row.extend([num(r.value), num(r.error_estimate)]);
        table.push(row);
        rows.push(json!({ "x": x.to_f64(dim), "value": r.value, "error_estimate": r.error_estimate }));
    }
    output::write_json(&dir, "eval.json", &json!({ "s": s, "operator": cfg.operator, "field": cfg.field, "points": rows }))?;
    table.write(&dir, "eval.csv")
}

pub fn c_constant(s: f64, tau: f64, dim: usize, config: Option<&Path>) -> Result<(), CliError> {
    let (kernel, q) = match config {
        Some(p) => {
            let cfg = read_config(Some(p), &[format!("s={s}")])?;
            let k = cfg.kernel.build(dim, s)?;
            (k, cfg.quadrature)
        }
        None => {
            if !(1..=3).contains(&dim) {
                return Err(CliError::Config(format!("--dim {dim} must be 1, 2 or 3")));
            }
            (Kernel::isotropic(dim, s, true)?, QuadratureConfig::default())
        }
    };
    let r = core_c_constant(&kernel, tau, &q)?;
    let mut t = Table::new(&["s", "tau", "dim", "value", "error_estimate"]);
    t.push(vec![num(s), num(tau), dim.to_string(), num(r.value), num(r.error_estimate)]);
    t.print()
}

fn run_solver(cfg: &ExperimentConfig, dom: &Domain<f64>) -> Result<(Solution, solver::SolveReport), CliError> {
    Ok(solver::solve(&cfg.solver_operator()?, dom, &cfg.problem_data()?, &cfg.solver)?)
}

pub fn solve(c: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(c)?;
    let dom = cfg.domain.build()?;
    let (sol, report) = run_solver(&cfg, &dom)?;
    let dim = dom.dim();
    let mut table = Table::new(&[coord_header(dim), vec!["d".into(), "u".into(), "d_pow_1_minus_s_u".into()]].concat());
    for (x, d, u, r) in sol.node_rows() {
        let mut row = coords(&x, dim);
        row.extend([num(d), num(u), num(r)]);
        table.push(row);
    }
    table.write(&dir, "solution.csv")?;

    let reference = cfg.analysis.reference.as_ref().map(|f| f.build(&dom)).transpose()?;
    let reference_error = reference.as_ref().map(|f| {
        sol.node_rows()
            .iter()
            .filter(|(_, d, _, _)| *d >= 2.0 * cfg.solver.delta)
            .map(|(x, _, u, _)| {
                let e = f.value(x);
                (u - e).abs() / e.abs().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    });
    let shrink = if cfg.analysis.shrink_deltas.is_empty() {
        None
    } else {
        let probes: Vec<Point<f64>> = dom.interior_points(8, dom.inradius() / 4.0);
        let r = reference.clone();
        let refer = move |x: &Point<f64>| r.as_ref().map_or(0.0, |f| f.value(x));
        let has_ref = reference.is_some();
        Some(shrink_and_refine(
            &cfg.solver_operator()?,
            &dom,
            &cfg.problem_data()?,
            &cfg.analysis.shrink_deltas,
            &cfg.solver,
            &probes,
            if has_ref { Some(&refer) } else { None },
        )?)
    };
    output::write_json(
        &dir,
        "solve_report.json",
        &json!({
            "s": cfg.s,
            "report": report,
            "max_relative_error_beyond_two_delta": reference_error,
            "shrinking": shrink,
        }),
    )
}

#[derive(Serialize)]
struct CertificationSummary<'a> {
    passed: bool,
    kind: &'a str,
    parameter: f64,
    points: usize,
    worst: Option<usize>,
    worst_slack: Option<f64>,
}

fn summarize(r: &CertificationReport) -> CertificationSummary<'_> {
    let slack = r.worst.map(|i| {
        let p = &r.points[i];
        if r.kind.starts_with("sub") {
            (p.value - p.error_estimate) - p.required
        } else {
            p.required - (p.value + p.error_estimate)
        }
    });
    CertificationSummary {
        passed: r.passed,
        kind: &r.kind,
        parameter: r.parameter,
        points: r.points.len(),
        worst: r.worst,
        worst_slack: slack,
    }
}

pub fn verify_barriers(c: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(c)?;
    let dom = cfg.domain.build()?;
    let h = cfg.data.h.build(dom.dim())?;
    let set = build_barrier_set(&dom, h, cfg.s, &cfg.barrier_operator()?, &cfg.barriers)?;
    let dim = dom.dim();
    let mut table = Table::new(
        &[
            vec!["envelope".to_string()],
            coord_header(dim),
            ["distance", "value", "error_estimate", "required", "passed"].map(String::from).to_vec(),
        ]
        .concat(),
    );
    for (name, rep) in [("upper", &set.upper_report), ("lower", &set.lower_report)] {
        for p in &rep.points {
            let mut row = vec![name.to_string()];
            row.extend(p.x.iter().map(|v| num(*v)));
            row.extend([num(p.distance), num(p.value), num(p.error_estimate), num(p.required), p.passed.to_string()]);
            table.push(row);
        }
    }
    table.write(&dir, "barriers.csv")?;
    let mut pts = dom.layer_points(1000, dom.inradius() * 1e-4, dom.inradius() * 0.5);
    pts.extend(dom.interior_points(1000, 0.0));
    let disorder = pts.iter().filter(|x| set.lower.value(x) > set.upper.value(x)).count();
    let report = json!({
        "s": cfg.s,
        "modulus": { "knots": set.modulus.knots(), "holder_exponent": set.modulus.holder_exponent() },
        "w1": { "beta": set.w1.beta, "amplitude": set.w1.amplitude, "certificate": summarize(&set.w1.report) },
        "w2": {
            "tau": set.w2.field.tau,
            "kappa": set.w2.field.kappa,
            "b": set.w2.field.b,
            "certificate": summarize(&set.w2.report),
        },
        "c2_upper": set.c2_upper,
        "c2_lower": set.c2_lower,
        "upper": summarize(&set.upper_report),
        "lower": summarize(&set.lower_report),
        "ordering": { "points": pts.len(), "violations": disorder },
    });
    output::write_json(&dir, "barriers.json", &report)?;
    if !(set.upper_report.passed && set.lower_report.passed) || disorder > 0 {
        return Err(CliError::Check {
            message: "barrier certification or envelope ordering failed".into(),
            report,
        });
    }
    Ok(())
}

/// Returns the subject to analyse and the layer width below which it is prescribed.
fn subject<'a>(cfg: &ExperimentConfig, dom: &Domain<f64>, holder: &'a mut Option<Solution>) -> Result<(Box<dyn Fn(&Point<f64>) -> f64 + Sync + 'a>, f64, Option<f64>), CliError> {
    match cfg.analysis.subject {
        Subject::Solver => {
            let (sol, _) = run_solver(cfg, dom)?;
            let sol: &'a Solution = holder.insert(sol);
            let spacing = sol.mesh().spacing();
            Ok((Box::new(move |x: &Point<f64>| sol.value_at(x)), cfg.solver.delta, Some(spacing)))
        }
        Subject::Field => {
            let f = cfg
                .field
                .as_ref()
                .ok_or_else(|| CliError::Config("analysis.subject = \"field\" needs a [field] table".into()))?
                .build(dom)?;
            Ok((Box::new(move |x: &Point<f64>| f.value(x)), 0.0, None))
        }
    }
}

pub fn profile(c: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(c)?;
    let dom = cfg.domain.build()?;
    let mut holder = None;
    let (u, layer, _) = subject(&cfg, &dom, &mut holder)?;
    let r = dom.inradius();
    let distances = cfg
        .analysis
        .distances
        .clone()
        .unwrap_or_else(|| geometric_distances(r / 2.5, layer.max(0.01 * r), 6));
    let rays = dom.boundary_samples(cfg.analysis.n_rays);
    let h = cfg.data.h.build(dom.dim())?;
    let rep = boundary_profile(u.as_ref(), &dom, &h, cfg.s, &rays, &distances, layer)?;
    let dim = dom.dim();
    let mut table = Table::new(&[vec!["ray".to_string()], coord_header(dim), ["d", "renormalized", "trace", "error"].map(String::from).to_vec()].concat());
    for (k, ray) in rep.rays.iter().enumerate() {
        for i in 0..ray.distances.len() {
            let mut row = vec![k.to_string()];
            row.extend(ray.boundary_point.iter().map(|v| num(*v)));
            row.extend([num(ray.distances[i]), num(ray.renormalized[i]), num(ray.trace), num(ray.errors[i])]);
            table.push(row);
        }
    }
    table.write(&dir, "profile.csv")?;
    output::write_json(&dir, "profile.json", &rep)
}

pub fn rates(c: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(c)?;
    let dom = cfg.domain.build()?;
    let mut holder = None;
    let (u, _, spacing) = subject(&cfg, &dom, &mut holder)?;
    let band = cfg
        .analysis
        .band
        .map(|b| (b[0], b[1]))
        .unwrap_or((2.0 * cfg.solver.delta, dom.inradius() / 4.0));
    let rays = dom.boundary_samples(cfg.analysis.n_rays);
    let rep = gradient_rate(u.as_ref(), &dom, band, &rays, cfg.analysis.per_ray, spacing)?;
    let mut table = Table::new(&["d", "gradient_norm"]);
    for r in &rep.samples {
        table.push_nums(&[r.distance, r.gradient_norm]);
    }
    table.write(&dir, "rates.csv")?;
    output::write_json(&dir, "rates.json", &json!({ "s": cfg.s, "target_slope": cfg.s - 2.0, "fit": rep }))
}

pub fn limit(c: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(c)?;
    let dim = cfg.domain.dim();
    let a = cfg.kernel.anisotropy()?;
    let members = match &cfg.operator {
        config::OperatorChoice::Isaacs { scales, .. } => scales.iter().map(|row| row.iter().map(|c| a.scaled(*c)).collect()).collect(),
        _ => vec![vec![a]],
    };
    let rep = limit_coefficients(&members, dim, &cfg.analysis.orders, cfg.analysis.sphere_order)?;
    let mut table = Table::new(&["i", "j", "k", "order", "value", "extrapolated"]);
    for e in &rep.entries {
        for (s, v) in rep.orders.iter().zip(&e.values) {
            table.push(vec![e.i.to_string(), e.j.to_string(), e.k.to_string(), num(*s), num(*v), "false".into()]);
        }
        table.push(vec![e.i.to_string(), e.j.to_string(), e.k.to_string(), num(1.0), num(e.limit), "true".into()]);
    }
    table.write(&dir, "limit.csv")?;
    output::write_json(&dir, "limit.json", &rep)
}

pub fn check_lemma(c: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(c)?;
    let dom = cfg.domain.build()?;
    let k = cfg.kernel()?;
    let (center, approach) = cfg.analysis.lemma_points(&dom)?;
    let lemma = product_formula_check(&k, &dom, cfg.analysis.tau, cfg.analysis.alpha, &center, &approach, &cfg.analysis.lemma_distances, &cfg.quadrature)?;
    let cn = normalizing_constant(dom.dim(), cfg.s)?;
    let [lo, hi] = cfg.analysis.indicator_bounds;
    let bounds = EllipticityBounds::new(lo * cn, hi * cn)?;
    let points = cfg.analysis.points(&dom)?;
    let ind = indicator_check(&dom, &bounds, cfg.s, &points, &cfg.quadrature)?;
    let mut table = Table::new(&["rho", "value", "error_estimate", "ratio"]);
    for r in &lemma.samples {
        table.push_nums(&[r.distance, r.value, r.error_estimate, r.ratio]);
    }
    table.write(&dir, "lemma.csv")?;
    let report = json!({ "product_formula": lemma, "indicator": ind });
    output::write_json(&dir, "lemma.json", &report)?;
    if !ind.all_negative {
        return Err(CliError::Check {
            message: "the minimal operator on the indicator is not negative everywhere".into(),
            report,
        });
    }
    Ok(())
}

pub fn check_halfspace(c: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(c)?;
    let slope = &cfg.analysis.halfspace_slope;
    let dim = slope.len() + 1;
    let points = match &cfg.analysis.points {
        Some(p) => p
            .iter()
            .map(|c| {
                if c.len() == dim {
                    Ok(Point::from_f64(c))
                } else {
                    Err(CliError::Config(format!("analysis.points entries need {dim} coordinates")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => halfspace_samples(dim, 10),
    };
    let rep = halfspace_checks(slope, cfg.s, &points, &cfg.quadrature)?;
    let mut header = coord_header(dim);
    header.extend(["value", "error_estimate", "refined_value", "refined_error_estimate", "bilinear", "bilinear_error_estimate"].map(String::from));
    header.extend((1..=dim).map(|k| format!("grad{k}")));
    header.extend((1..=dim).map(|k| format!("grad{k}_expected")));
    let mut table = Table::new(&header);
    for r in &rep.samples {
        let mut row: Vec<f64> = r.point.clone();
        row.extend([r.value, r.error_estimate, r.refined_value, r.refined_error_estimate, r.bilinear, r.bilinear_error_estimate]);
        row.extend(&r.gradient);
        row.extend(&r.gradient_expected);
        table.push_nums(&row);
    }
    table.write(&dir, "halfspace.csv")?;
    output::write_json(&dir, "halfspace.json", &rep)?;
    if !(rep.within_estimate && rep.decomposition_consistent) {
        return Err(CliError::Check {
            message: "half-space profile is not harmonic within the error estimates".into(),
            report: serde_json::to_value(&rep).unwrap_or_default(),
        });
    }
    Ok(())
}
