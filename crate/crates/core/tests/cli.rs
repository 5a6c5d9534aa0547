//! Black-box tests of the binary: formats, exit codes, and the
//! config-file/flag precedence contract.

use std::process::Command;

use yamabe_lab::classify::{ClassificationReport, TheoremMatch};
use yamabe_lab::integrate::{integrate_pole_start, IntegratorConfig, Trajectory};
use yamabe_lab::odes::{BoundaryCase, PoleBranch, SolitonParams};

const BIN: &str = env!("CARGO_BIN_EXE_yamabe-lab");

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("spawn binary");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf8 stdout"),
        String::from_utf8(out.stderr).expect("utf8 stderr"),
    )
}

#[test]
fn json_round_trip_is_bitwise() {
    let (code, stdout, _) = run(&[
        "integrate", "--dim", "2", "--lambda", "0", "--case", "pole", "--r-max", "10",
        "--out", "json",
    ]);
    assert_eq!(code, 0);
    let traj: Trajectory = serde_json::from_str(&stdout).expect("parse trajectory");
    let again: Trajectory =
        serde_json::from_str(&serde_json::to_string(&traj).unwrap()).unwrap();
    assert_eq!(traj.samples.len(), again.samples.len());
    for (a, b) in traj.samples.iter().zip(&again.samples) {
        assert_eq!(a.state.r.to_bits(), b.state.r.to_bits());
        assert_eq!(a.state.rho.to_bits(), b.state.rho.to_bits());
        assert_eq!(a.state.drho.to_bits(), b.state.drho.to_bits());
        assert_eq!(a.state.f_pot.to_bits(), b.state.f_pot.to_bits());
        assert_eq!(a.ddrho.to_bits(), b.ddrho.to_bits());
    }

    // The emitted trajectory matches an in-process run with the same setup.
    let params = SolitonParams::new(
        2,
        0.0,
        yamabe_lab::geometry::FiberModel::circle(),
        BoundaryCase::PoleStart { branch: PoleBranch::A },
    )
    .unwrap();
    let cfg = IntegratorConfig { r_max: 10.0, ..Default::default() };
    let local = integrate_pole_start(&params, &cfg).unwrap();
    assert_eq!(local.samples.len(), traj.samples.len());
    for (a, b) in local.samples.iter().zip(&traj.samples) {
        assert_eq!(a.state.rho.to_bits(), b.state.rho.to_bits());
    }
}

#[test]
fn csv_keeps_full_precision() {
    let common = [
        "integrate", "--dim", "2", "--lambda", "0", "--case", "pole", "--r-max", "5",
    ];
    let (code, csv, _) = run(&common);
    assert_eq!(code, 0);
    let (code, json, _) = run(&[&common[..], &["--out", "json"]].concat());
    assert_eq!(code, 0);
    let traj: Trajectory = serde_json::from_str(&json).unwrap();

    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "r,rho,drho,ddrho,F,R,K,k_rad,k_fib,C_steady,residual"
    );
    let mut n = 0;
    for (line, sample) in lines.filter(|l| !l.starts_with('#')).zip(&traj.samples) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 11);
        let parse = |s: &str| s.parse::<f64>().unwrap();
        assert_eq!(parse(fields[0]).to_bits(), sample.state.r.to_bits());
        assert_eq!(parse(fields[1]).to_bits(), sample.state.rho.to_bits());
        assert_eq!(parse(fields[2]).to_bits(), sample.state.drho.to_bits());
        assert_eq!(parse(fields[4]).to_bits(), sample.state.f_pot.to_bits());
        // 2D rows leave the 3D-only columns empty.
        assert_eq!(fields[7], "");
        assert_eq!(fields[8], "");
        n += 1;
    }
    assert_eq!(n, traj.samples.len());
    assert!(csv.lines().any(|l| l.starts_with("# event: HorizonReached")));
}

#[test]
fn breakdown_exits_2() {
    let (code, csv, _) =
        run(&["integrate", "--dim", "2", "--lambda", "1", "--case", "pole"]);
    assert_eq!(code, 2);
    assert!(csv.contains("# event: RhoZero"));
}

#[test]
fn constant_solution_columns() {
    let (code, csv, _) = run(&[
        "integrate", "--dim", "3", "--lambda", "-1", "--rbar", "-2", "--case", "line",
        "--rho0", "1.4142135624", "--drho0", "0", "--r-max", "10", "--r-min", "-10",
    ]);
    assert_eq!(code, 0);
    for line in csv.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let fields: Vec<&str> = line.split(',').collect();
        let rho: f64 = fields[1].parse().unwrap();
        let scal: f64 = fields[5].parse().unwrap();
        // The truncated-decimal seed misses sqrt(2) by ~1e-11 and the
        // constant solution is a saddle, so the columns are constant to
        // the amplified seed error, not to working precision.
        assert!((rho - 1.4142135624).abs() < 1e-6, "{line}");
        assert!((scal + 1.0).abs() < 1e-6, "{line}");
    }
}

#[test]
fn classify_match_and_mismatch() {
    let (code, json, _) =
        run(&["classify", "--dim", "2", "--lambda", "-0.5", "--case", "pole"]);
    assert_eq!(code, 0, "{json}");
    let report: ClassificationReport = serde_json::from_str(&json).unwrap();
    assert_eq!(report.theorem_match, TheoremMatch::Match);
    assert!((report.k_range.1 - 0.25).abs() < 1e-5);
    assert!(report.k_range.0 >= -1e-12);

    // Cutting the horizon short leaves rho' far from its asymptote, which
    // the expected-regime table flags.
    let (code, json, _) = run(&[
        "classify", "--dim", "2", "--lambda", "-0.5", "--case", "pole", "--r-max", "2",
    ]);
    assert_eq!(code, 3, "{json}");
    let report: ClassificationReport = serde_json::from_str(&json).unwrap();
    assert_eq!(report.theorem_match, TheoremMatch::Mismatch);
}

#[test]
fn sweep_grid_rows() {
    let (code, csv, _) = run(&[
        "sweep", "--dim", "2", "--case", "pole", "--lambda-grid", "-3:1:0.5",
    ]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows[0].starts_with("-3,"));
    assert!(rows[8].starts_with("1,"));
}

#[test]
fn sweep_breakdown_table() {
    let (code, csv, _) = run(&[
        "sweep", "--dim", "3", "--rbar", "0", "--lambda", "1", "--case", "line",
        "--seed-grid", "0.5,1x-0.5,0.5",
    ]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert!(row.contains("Breakdown"), "{row}");
        assert!(row.contains("Match"), "{row}");
    }
}

#[test]
fn malformed_or_empty_grid_exits_1() {
    let (code, _, _) = run(&[
        "sweep", "--dim", "2", "--case", "pole", "--lambda-grid", "1:0:0.5",
    ]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&[
        "sweep", "--dim", "2", "--lambda", "0", "--case", "line",
    ]);
    assert_eq!(code, 1, "line-case sweep without a seed grid has an empty grid");
}

#[test]
fn config_file_with_flag_override() {
    let dir = std::env::temp_dir().join("yamabe-lab-test-cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.conf");
    std::fs::write(&path, "# shrinking run\ndim = 2\nlambda = 1\ncase = pole\nr-max = 30\n")
        .unwrap();
    let (code, _, _) = run(&["integrate", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    // Flag wins over the file: lambda 0 reaches the horizon instead.
    let (code, csv, _) = run(&[
        "integrate", "--config", path.to_str().unwrap(), "--lambda", "0",
    ]);
    assert_eq!(code, 0);
    assert!(csv.contains("# event: HorizonReached"));
}

#[test]
fn verify_filter_and_exit() {
    let (code, out, _) = run(&["verify", "--only", "cigar"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains("PASS"));
    let (code, _, err) = run(&["verify", "--only", "no-such-criterion"]);
    assert_eq!(code, 1, "{err}");
}
