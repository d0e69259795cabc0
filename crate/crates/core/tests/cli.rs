//! End-to-end runs of the `rde` binary.

use std::path::Path;
use std::process::{Command, Output};

use rde_core::io::{load_descriptors_auto, load_model};
use rde_core::solver::principal_angles;

fn rde(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rde"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = rde(dir, args);
    assert!(
        out.status.success(),
        "rde {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn report_err(path: &Path) -> f64 {
    rde_core::evaluation::EvalReport::load(path).unwrap().err_rel_irr
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.csv", "b.csv"] {
        ok(d, &["synth", "--scenario", "gaussian-groups", "--seed", "11", "--out", name]);
    }
    for name in ["a.bin", "b.bin"] {
        ok(d, &["synth", "--scenario", "diagonal-intra", "--seed", "11", "--out", name]);
    }
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());
    assert_eq!(std::fs::read(d.join("a.bin")).unwrap(), std::fs::read(d.join("b.bin")).unwrap());
    let set = load_descriptors_auto(d.join("a.bin")).unwrap();
    assert_eq!(set.len(), 400);
}

#[test]
fn uniform_betas_match_merged_partition() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--scenario", "gaussian-groups", "--seed", "2", "--out", "x.csv"]);
    ok(d, &["partition", "--in", "x.csv", "--out", "p.txt"]);
    let fit = |out: &str, extra: &[&str]| {
        let mut args = vec!["fit", "--in", "x.csv", "--partition", "p.txt", "--out", out, "--dim", "3"];
        args.extend_from_slice(extra);
        ok(d, &args);
        load_model(d.join(out)).unwrap()
    };
    let split = fit("split.json", &["--betas", "1,1,1,1"]);
    let merged = fit("merged.json", &["--betas", "1,1,1,1", "--merge-near-far"]);
    let angles = principal_angles(&split.projection, &merged.projection).unwrap();
    assert!(angles.iter().all(|&a| a <= 1e-6), "{angles:?}");
}

#[test]
fn boundary_shape_pipeline_favours_rde() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--scenario", "boundary-shape", "--seed", "1", "--out", "x.csv"]);
    ok(d, &["partition", "--in", "x.csv", "--out", "p.txt"]);
    for preset in ["rde", "lde"] {
        let model = format!("{preset}.json");
        let report = format!("{preset}-report.json");
        ok(d, &["fit", "--in", "x.csv", "--partition", "p.txt", "--out", &model, "--preset", preset, "--dim", "1"]);
        ok(d, &["eval", "--in", "x.csv", "--partition", "p.txt", "--model", &model, "--out", &report]);
        ok(d, &["plot", "--in", &report, "--out", &format!("{preset}.svg")]);
    }
    let rde_err = report_err(&d.join("rde-report.json"));
    let lde_err = report_err(&d.join("lde-report.json"));
    assert!(rde_err < lde_err, "RDE {rde_err} vs LDE {lde_err}");
    let svg = std::fs::read_to_string(d.join("rde.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("Rel-Far"));
}

#[test]
fn project_and_match_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--scenario", "gaussian-groups", "--seed", "4", "--out", "a.csv"]);
    ok(d, &["synth", "--scenario", "gaussian-groups", "--seed", "5", "--out", "b.csv"]);
    ok(d, &["partition", "--in", "a.csv", "--out", "p.txt", "--cap", "10"]);
    ok(d, &["fit", "--in", "a.csv", "--partition", "p.txt", "--out", "m.json", "--dim", "2", "--mode", "trace-ratio"]);
    ok(d, &["project", "--in", "b.csv", "--model", "m.json", "--out", "e.csv"]);
    assert_eq!(load_descriptors_auto(d.join("e.csv")).unwrap().dim(), 2);
    ok(d, &[
        "eval", "--in", "a.csv", "--partition", "p.txt", "--model", "m.json", "--out", "r.json",
        "--match-with", "b.csv", "--m", "15", "--balance", "off",
    ]);
    let rep = rde_core::evaluation::EvalReport::load(d.join("r.json")).unwrap();
    assert_eq!(rep.matching.unwrap().pairs.len(), 15);
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rde(dir.path(), &["--help"]).status.success());
    for sub in ["synth", "partition", "fit", "project", "eval", "plot"] {
        let out = rde(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(rde(d, &["fit"]).status.code(), Some(1));
    assert_eq!(rde(d, &["synth", "--scenario", "nope", "--out", "x.csv"]).status.code(), Some(1));
    let missing = rde(d, &["partition", "--in", "missing.csv", "--out", "p.txt"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    std::fs::write(d.join("bad.csv"), "group,x0\n0,not-a-number\n").unwrap();
    assert_eq!(rde(d, &["partition", "--in", "bad.csv", "--out", "p.txt"]).status.code(), Some(2));
}
