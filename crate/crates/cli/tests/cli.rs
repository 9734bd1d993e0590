use std::fs;
use std::process::{Command, Output};

fn sgsadmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgsadmm")).args(args).output().expect("binary runs")
}

fn last_row(csv: &str) -> Vec<String> {
    csv.lines().last().unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn solve_tiny_converges() {
    let out = sgsadmm(&["solve", "--preset", "tiny", "--algorithm", "twoblock", "--tau", "1.0", "--stop-tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,primal_res,dual_x_res,dual_y_res,kkt_total,eps_k,cert_x,cert_y,phi_k\n"));
    let kkt: f64 = last_row(&text)[4].parse().unwrap();
    assert!(kkt <= 1e-8);
    assert!(String::from_utf8(out.stderr).unwrap().contains("iterations="));
}

#[test]
fn verify_threeby2_tilted_passes() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("report.csv");
    let out = sgsadmm(&[
        "verify", "--preset", "threeby2", "--algorithm", "sgs", "--inexact", "tilt:7", "--eps", "geom:1e-2:0.5",
        "--out", rep.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(rep).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("check,k,lhs,relation,rhs,slack,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 50);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    for check in ["key,", "residual,", "transport_x,", "fejer,", "limit_phi,"] {
        assert!(rows.iter().any(|r| r.starts_with(check)), "{check}");
    }
}

#[test]
fn gen_then_solve_reproduces_the_preset_run() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("tiny.prob");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(sgsadmm(&["gen", "--preset", "threeby2", "--out", prob.to_str().unwrap()]).status.code(), Some(0));
    let from_preset = sgsadmm(&["solve", "--preset", "threeby2", "--inexact", "tilt:3", "--eps", "pow:1e-2:2", "--log", a.to_str().unwrap()]);
    let from_file = sgsadmm(&["solve", "--input", prob.to_str().unwrap(), "--inexact", "tilt:3", "--eps", "pow:1e-2:2", "--log", b.to_str().unwrap()]);
    assert_eq!(from_preset.status.code(), Some(0));
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn identical_settings_give_identical_logs() {
    let args = ["solve", "--preset", "stress", "--prox", "stress", "--inexact", "tilt:11", "--eps", "geom:1e-1:0.7", "--cross-check"];
    let one = sgsadmm(&args);
    let two = sgsadmm(&args);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(sgsadmm(&["solve", "--preset", "threeby2", "--max-iter", "3"]).status.code(), Some(2));
    assert_eq!(sgsadmm(&["solve", "--preset", "missing"]).status.code(), Some(1));
    assert_eq!(sgsadmm(&["solve", "--preset", "tiny", "--tau", "1.7"]).status.code(), Some(1));
    assert_eq!(sgsadmm(&["solve", "--preset", "tiny", "--algorithm", "threeblock"]).status.code(), Some(1));
    assert_eq!(sgsadmm(&["solve", "--preset", "tiny", "--algorithm", "twoblock", "--inexact", "cg"]).status.code(), Some(1));
    assert_eq!(sgsadmm(&["solve"]).status.code(), Some(1));
}

#[test]
fn malformed_problem_file_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("bad.prob");
    let good = String::from_utf8(sgsadmm(&["gen", "--preset", "tiny"]).stdout).unwrap();
    fs::write(&prob, good.replace("z_dim: 1", "z_dim: one")).unwrap();
    let out = sgsadmm(&["solve", "--input", prob.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("z_dim"), "{err}");
}
