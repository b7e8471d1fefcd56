use serde_json::Value;
use std::io::Write;
use std::process::{Command, Output};

fn awq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_awq")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Vec<Value> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn config(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

fn c(row: &Value, name: &str) -> (f64, f64) {
    (row[format!("{name}_re")].as_f64().unwrap(), row[format!("{name}_im")].as_f64().unwrap())
}

#[test]
fn asc_degree_zero_is_one() {
    let rows = json(&awq(&["eval", "asc"]));
    let zero: Vec<_> = rows.iter().filter(|r| r["n"] == 0).collect();
    assert_eq!(zero.len(), 5);
    for r in zero {
        assert_eq!(c(r, "value"), (1.0, 0.0));
    }
}

#[test]
fn pbeta_routes_agree_within_printed_tol() {
    let rows = json(&awq(&["eval", "pbeta", "--tol", "1e-10"]));
    for r in &rows {
        assert_eq!(r["tol"], 1e-10);
        assert_eq!(r["agree"], true, "{r}");
        let (s, cl) = (c(r, "sum"), c(r, "closed"));
        let scale = 1f64.max(s.0.hypot(s.1));
        assert!((s.0 - cl.0).hypot(s.1 - cl.1) <= 1e-10 * scale);
    }
    assert!(rows.iter().any(|r| r["m"] == 0));
}

#[test]
fn gr_with_one_variable_matches_aw() {
    let cfg = config(r#"{"kvec": [1.3], "k": 1.3, "degree": 4}"#);
    let path = cfg.path().to_str().unwrap();
    let gr = json(&awq(&["eval", "gr", "--config", path]));
    let aw = json(&awq(&["eval", "aw", "--config", path]));
    assert_eq!(gr.len(), aw.len());
    for (g, a) in gr.iter().zip(&aw) {
        assert_eq!(g["m"].as_str().unwrap(), a["n"].to_string());
        let (gv, av) = (c(g, "value"), c(a, "value"));
        assert!((gv.0 - av.0).hypot(gv.1 - av.1) <= 1e-9 * 1f64.max(av.0.hypot(av.1)), "{g} vs {a}");
    }
}

#[test]
fn verify_hopf_passes() {
    let out = awq(&["verify", "hopf"]);
    let reports = json(&out);
    assert!(reports.len() >= 10);
    for r in &reports {
        assert_eq!(r["pass"], true);
        for key in ["check", "params", "residual", "tol", "nodes", "seconds", "seed"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn failing_checks_exit_three_and_are_named() {
    let out = awq(&["verify", "qseries", "--tol", "1e-40"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("qseries.q_binomial"), "{err}");
}

#[test]
fn invalid_configuration_exits_two() {
    for body in [r#"{"q": 1.5}"#, r#"{"t": 1.2}"#, r#"{"kvec": [1.0, -0.5]}"#, r#"{"bogus": 1}"#, "{not json"] {
        let cfg = config(body);
        let out = awq(&["eval", "aw", "--config", cfg.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(out.stdout.is_empty(), "no output before validation: {body}");
    }
    assert_eq!(awq(&["eval", "aw", "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(awq(&["eval", "aw", "--config", "/nonexistent/awq.json"]).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let a = awq(&["eval", "mv_pbeta", "--format", "csv"]);
    let b = awq(&["eval", "mv_pbeta", "--format", "csv"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let strip = |o: &Output| {
        let mut v = json(o);
        for r in &mut v {
            r.as_object_mut().unwrap().remove("seconds");
        }
        v
    };
    let r1 = strip(&awq(&["verify", "hopf", "--seed", "7"]));
    let r2 = strip(&awq(&["verify", "hopf", "--seed", "7"]));
    let r3 = strip(&awq(&["verify", "hopf", "--seed", "8"]));
    assert_eq!(r1, r2);
    assert_ne!(r1, r3);
}

#[test]
fn alpha_table_echoes_u_and_s() {
    let cfg = config(r#"{"s_angle": 0.4, "u_angle": -1.1, "kvec": [1.0, 0.5, 2.0]}"#);
    let rows = json(&awq(&["table", "alpha", "--config", cfg.path().to_str().unwrap()]));
    assert_eq!(rows.len(), 6);
    let (u, s) = (c(&rows[0], "alpha"), c(&rows[5], "alpha"));
    assert!((u.0 - (-1.1f64).cos()).abs() < 1e-15 && (u.1 - (-1.1f64).sin()).abs() < 1e-15);
    assert!((s.0 - 0.4f64.cos()).abs() < 1e-15 && (s.1 - 0.4f64.sin()).abs() < 1e-15);
}

#[test]
fn grid_table_base_row() {
    let cfg = config(r#"{"t": -2.5, "q": 0.5, "kvec": [1.3, 0.8], "degree": 2}"#);
    let out = awq(&["table", "grid", "--config", cfg.path().to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,y1,y2"));
    let base: Vec<&str> = lines.next().unwrap().rsplitn(3, ',').collect();
    let y1: f64 = base[1].parse().unwrap();
    let y2: f64 = base[0].parse().unwrap();
    assert!((y1 - -2.5 * 0.5f64.powf(-1.3)).abs() < 1e-12);
    assert!((y2 - -2.5 * 0.5f64.powf(-2.1)).abs() < 1e-12);
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let out = awq(&["table", "weights", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("kind,at,value\nwtilde,"));
    assert!(text.contains("\nw,point 0,"));
}
