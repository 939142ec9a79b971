//! Exit codes and artifacts of the `factorlab` binary.

use std::path::Path;
use std::process::{Command, Output};

fn factorlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_factorlab")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = factorlab(d, &["gen", "--kind", "diffuse", "--seed", "3", "--L", "8", "--n", "32", "--param", "smooth=2", "--out", "phi.m"]);
    assert_eq!(code(&gen), 0, "{}", String::from_utf8_lossy(&gen.stderr));
    let gen = factorlab(d, &["gen", "--kind", "poisson", "--seed", "4", "--L", "8", "--n", "32", "--param", "intensity=0.1", "--total", "1", "--out", "psi.m"]);
    assert_eq!(code(&gen), 0);

    let pp = factorlab(d, &["pp", "phi.m", "--out", "phi.pts", "--trace", "trace.txt"]);
    assert_eq!(code(&pp), 0, "{}", String::from_utf8_lossy(&pp.stderr));
    let pts = std::fs::read_to_string(d.join("phi.pts")).unwrap();
    assert!(pts.starts_with("points v1\n"));
    assert!(d.join("trace.txt").exists());

    let alloc = factorlab(d, &["alloc", "phi.m", "psi.m", "--out", "map.alloc", "--certificate", "cert.csv"]);
    assert_eq!(code(&alloc), 0, "{}", String::from_utf8_lossy(&alloc.stderr));
    let map = factor_alloc::alloc::parse_allocation(&std::fs::read_to_string(d.join("map.alloc")).unwrap()).unwrap();
    let phi = factor_alloc::io::read_measure(&d.join("phi.m")).unwrap();
    let psi = factor_alloc::io::read_measure(&d.join("psi.m")).unwrap();
    assert!(factor_alloc::alloc::verify_balance(&map, &phi, &psi).unwrap().passes(1e-9));
    let cert = std::fs::read_to_string(d.join("cert.csv")).unwrap();
    assert!(cert.starts_with("target_kind,target_id,expected,received,relative_residual\n"));

    let sym = factorlab(d, &["sym", "phi.m"]);
    assert_eq!(code(&sym), 0);
    assert!(String::from_utf8_lossy(&sym.stdout).contains("invariant_dim,0"));
}

#[test]
fn invariant_direction_is_a_verification_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&factorlab(d, &["gen", "--kind", "invariant", "--param", "axes=0", "--out", "inv.m"])), 0);
    let pp = factorlab(d, &["pp", "inv.m"]);
    assert_eq!(code(&pp), 1);
    assert!(String::from_utf8_lossy(&pp.stderr).contains("invariant direction"));
}

#[test]
fn malformed_input_and_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.m"), "measure v1\n2 4 x\n").unwrap();
    assert_eq!(code(&factorlab(d, &["pp", "bad.m"])), 2);
    assert_eq!(code(&factorlab(d, &["pp", "missing.m"])), 2);
    assert_eq!(code(&factorlab(d, &["pp"])), 2);
    assert_eq!(code(&factorlab(d, &["frobnicate"])), 2);
    assert_eq!(code(&factorlab(d, &["verify", "--campaign", "nope"])), 2);
}

#[test]
fn verify_and_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("corpus.manifest"),
        "manifest v1\n41 lattice 2 4 64 gens=16,0;0,16\n31 invariant 2 16 64 axes=0\n5 poisson 2 16 64 intensity=0.08\n",
    )
    .unwrap();
    let v = Command::new(env!("CARGO_BIN_EXE_factorlab"))
        .current_dir(d)
        .env("FACTORLAB_CORPUS", d)
        .args(["verify", "--campaign", "all", "--shifts", "2", "--out", "r.csv", "--svg", "r.svg"])
        .output()
        .unwrap();
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("# timing"));
    assert!(std::fs::read_to_string(d.join("r.svg")).unwrap().starts_with("<svg"));
    assert_eq!(code(&factorlab(d, &["report", "r.csv", "--check", "sym.shell", "--svg", "s.svg"])), 0);

    // a failing record turns the report red
    let broken = csv.replacen(",pass,", ",fail,", 1);
    std::fs::write(d.join("broken.csv"), broken).unwrap();
    assert_eq!(code(&factorlab(d, &["report", "broken.csv"])), 1);
}
