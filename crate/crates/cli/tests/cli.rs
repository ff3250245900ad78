use std::path::Path;
use std::process::{Command, Output};

const BALL: &str = r#"
s = 0.5

[domain]
kind = "ball"
dim = 2
radius = 1.0

[solver]
delta = 0.1

[data.h]
kind = "linear"
slope = [1.0, 0.0]
offset = 2.0
"#;

fn fracblow(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fracblow"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("FRACBLOW_THREADS", t),
        None => cmd.env_remove("FRACBLOW_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn c_constant_row_vanishes_at_the_critical_exponent() {
    let o = fracblow(&["c-constant", "--s", "0.5", "--tau", "-0.5"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,tau,dim,value,error_estimate"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(&row[..3], &[0.5, -0.5, 1.0]);
    assert!(row[3].abs() <= row[4].max(1e-8), "value {} err {}", row[3], row[4]);
    assert!(lines.next().is_none());
}

#[test]
fn c_constant_is_negative_between_the_roots() {
    // The normalized kernel gives the same one-dimensional constant in every dimension.
    let one = fracblow(&["c-constant", "--s", "0.4", "--tau", "0.1"], None);
    let three = fracblow(&["c-constant", "--s", "0.4", "--tau", "0.1", "--dim", "3"], None);
    let val = |o: &Output| -> f64 {
        let t = String::from_utf8_lossy(&o.stdout).into_owned();
        t.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap()
    };
    let (a, b) = (val(&one), val(&three));
    assert!(a < 0.0);
    assert!((a - b).abs() < 1e-3 * a.abs(), "{a} vs {b}");
}

#[test]
fn unknown_keys_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    for extra in ["bogus = 1\n", "[solver]\nspeed = 3\n", "[analysis]\nn_rayz = 3\n"] {
        let cfg = write_config(dir.path(), &format!("s = 0.5\n{extra}"));
        let o = fracblow(&["solve", "-c", &cfg, "-o", dir.path().to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(1), "{extra}: {}", stderr(&o));
        assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
    }
    let cfg = write_config(dir.path(), "[domain]\nkind = \"ball\"\ndim = 2\nradius = 1.0\ncolour = \"red\"\n");
    let o = fracblow(&["solve", "-c", &cfg], None);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn invalid_parameters_and_usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s = 1.5\n");
    let o = fracblow(&["solve", "-c", &cfg, "-o", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(fracblow(&["no-such-command"], None).status.code(), Some(1));
    assert_eq!(fracblow(&["c-constant", "--s", "0.5", "--tau", "1.2"], None).status.code(), Some(1));
    let o = fracblow(&["solve", "--set", "s"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_lists_every_subcommand() {
    let o = fracblow(&["--help"], None);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for c in [
        "eval",
        "c-constant",
        "solve",
        "verify-barriers",
        "profile",
        "rates",
        "limit",
        "check-lemma",
        "check-halfspace",
    ] {
        assert!(text.contains(c), "{c} missing from help");
    }
    assert!(text.contains("FRACBLOW_THREADS"));
}

#[test]
fn solve_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BALL);
    let mut outputs = Vec::new();
    for (k, threads) in [None, Some("1"), Some("4")].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = fracblow(&["solve", "-c", &cfg, "-o", out.to_str().unwrap()], threads);
        assert!(o.status.success(), "{}", stderr(&o));
        let csv = std::fs::read(out.join("solution.csv")).unwrap();
        let json = std::fs::read(out.join("solve_report.json")).unwrap();
        outputs.push((csv, json));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("x1,x2,d,u,d_pow_1_minus_s_u"));
    let report: serde_json::Value = serde_json::from_slice(&outputs[0].1).unwrap();
    assert!(report["report"].get("wall_clock").is_none());
    // Near the boundary d^{1-s} u follows the trace 2 + x1.
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        if v[2] < 0.15 {
            let h = 2.0 + v[0] / (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!((v[4] - h).abs() < 0.25 * h, "{line}");
        }
    }
}

#[test]
fn overrides_replace_configuration_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BALL);
    let coarse = dir.path().join("coarse");
    let o = fracblow(
        &["solve", "-c", &cfg, "-o", coarse.to_str().unwrap(), "--set", "solver.delta=0.2"],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fine = dir.path().join("fine");
    assert!(fracblow(&["solve", "-c", &cfg, "-o", fine.to_str().unwrap()], None).status.success());
    let rows = |p: &Path| std::fs::read_to_string(p.join("solution.csv")).unwrap().lines().count();
    assert!(rows(&coarse) < rows(&fine));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(coarse.join("solve_report.json")).unwrap()).unwrap();
    assert!(r["s"].as_f64() == Some(0.5));
}

#[test]
fn numerical_failure_exits_with_two_and_writes_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BALL);
    let out = dir.path().join("fail");
    let o = fracblow(
        &[
            "solve",
            "-c",
            &cfg,
            "-o",
            out.to_str().unwrap(),
            "--set",
            "solver.max_linear_iterations=1",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let diag: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("diagnostic.json")).unwrap()).unwrap();
    assert_eq!(diag["error"], "no_convergence");
    assert!(diag["details"]["history"].as_array().unwrap().len() >= 2);
}

#[test]
fn analysis_commands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BALL}\n[field]\nkind = \"ball_profile\"\nexponent = -0.5\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("all");
    let o = out.to_str().unwrap();
    let expect = [
        ("eval", "eval.csv", "x1,x2,value,error_estimate"),
        ("profile", "profile.csv", "ray,x1,x2,d,renormalized,trace,error"),
        ("rates", "rates.csv", "d,gradient_norm"),
        ("limit", "limit.csv", "i,j,k,order,value,extrapolated"),
        ("check-lemma", "lemma.csv", "rho,value,error_estimate,ratio"),
        ("verify-barriers", "barriers.csv", "envelope,x1,x2,distance,value,error_estimate,required,passed"),
    ];
    for (cmd, file, header) in expect {
        let r = fracblow(&[cmd, "-c", &cfg, "-o", o], None);
        assert!(r.status.success(), "{cmd}: {}", stderr(&r));
        let t = std::fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(t.lines().next(), Some(header), "{cmd}");
        assert!(t.lines().count() > 1, "{cmd} wrote no rows");
        let json = out.join(file.replace(".csv", ".json"));
        serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(json).unwrap()).unwrap();
    }
    let r = fracblow(&["check-halfspace", "-c", &cfg, "-o", o], None);
    assert!(r.status.success(), "{}", stderr(&r));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("halfspace.json")).unwrap()).unwrap();
    assert_eq!(rep["within_estimate"], true);
}

#[test]
fn profile_of_an_exact_field_matches_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    // (1 - |x|^2)^{s-1} = d^{s-1} (2 - d)^{s-1}, so d^{1-s} u -> 2^{s-1} at the boundary.
    let text = "s = 0.5\n[domain]\nkind = \"ball\"\ndim = 2\nradius = 1.0\n[data.h]\nkind = \"constant\"\nvalue = 0.7071067811865476\n[field]\nkind = \"ball_profile\"\nexponent = -0.5\n[analysis]\nsubject = \"field\"\ndistances = [0.1, 0.01, 0.001]\n";
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("p");
    let o = fracblow(&["profile", "-c", &cfg, "-o", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("profile.json")).unwrap()).unwrap();
    let err = rep["max_error_at_smallest"].as_f64().unwrap();
    // |(2 - d)^{-1/2} - 2^{-1/2}| at d = 1e-3.
    let exact = (2.0f64 - 1e-3).powf(-0.5) - 2.0f64.powf(-0.5);
    assert!((err - exact).abs() < 1e-9, "{err} vs {exact}");
}

#[test]
fn limit_of_the_isotropic_kernel_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[domain]\nkind = \"ball\"\ndim = 2\nradius = 1.0\n");
    let out = dir.path().join("l");
    let o = fracblow(&["limit", "-c", &cfg, "-o", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("limit.json")).unwrap()).unwrap();
    for e in rep["entries"].as_array().unwrap() {
        let want = if e["i"] == e["j"] { 1.0 } else { 0.0 };
        assert!((e["limit"].as_f64().unwrap() - want).abs() < 1e-3, "{e}");
    }
}
