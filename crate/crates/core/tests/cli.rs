//! End-to-end runs of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_soh-adapt"))
}

fn run(args: &[&str]) -> std::process::Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = walk(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.cfg");
    fs::write(&config, "n_cells = 4\ncycles_per_cell = 60\nlambda_grid = 0.01, 0.1\n").unwrap();
    let cfg = config.to_str().unwrap();
    let outputs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            let fleet = out.join("fleet");
            let (o, f) = (out.to_str().unwrap(), fleet.to_str().unwrap());
            run(&["synth", "--seed", "5", "--config", cfg, "--out", f]);
            run(&["ingest", "--input", f, "--config", cfg, "--out", o]);
            run(&["fit-offline", "--input", f, "--config", cfg, "--out", o, "--exclude", "1.1"]);
            run(&["run-online", "--input", f, "--cell", "2.1", "--config", cfg, "--out", o]);
            run(&["alpha-sweep", "--input", f, "--cell", "1.2", "--alphas", "0,1e-4,1", "--config", cfg, "--out", o]);
            run(&["report", "--input", f, "--config", cfg, "--out", o]);
            files(&out)
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    for expected in ["model.txt", "leave_one_out.csv", "2.1_estimates.csv", "1.2_alpha_sweep.csv", "ingest_summary.csv"] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }
    assert!(names.iter().any(|n| n.ends_with("summary.txt")));

    let other = tmp.path().join("c");
    run(&["synth", "--seed", "6", "--config", cfg, "--out", other.to_str().unwrap()]);
    let a = fs::read(tmp.path().join("a/fleet/cell_1.1.csv")).unwrap();
    let c = fs::read(other.join("cell_1.1.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn failures_exit_nonzero_with_a_category() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_cfg = tmp.path().join("bad.cfg");
    fs::write(&bad_cfg, "folds = 1\n").unwrap();
    let out = bin()
        .args(["leave-one-out", "--config", bad_cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]:"));

    let csv = tmp.path().join("x.csv");
    fs::write(&csv, "cell_id,t_s,current_a,voltage_v,temperature_c\na,0,0,3.7,20\na,0,1,3.7,20\n").unwrap();
    let out = bin().args(["ingest", "--input", csv.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[input]:") && err.contains("row 3"), "{err}");
}
