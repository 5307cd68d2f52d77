use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ple-lab"))
        .args(args)
        .env_remove("PLE_LAB_SEED")
        .output()
        .unwrap()
}

fn lab_env(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ple-lab"))
        .args(args)
        .env("PLE_LAB_SEED", seed)
        .output()
        .unwrap()
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

/// Column `name` of a CSV as floats (empty cells skipped).
fn column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines
        .filter_map(|l| l.split(',').nth(i).filter(|c| !c.is_empty()).map(|c| c.parse().unwrap()))
        .collect()
}

#[test]
fn bias_uniform_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = lab(&["bias", "--family", "uniform", "--a", "1", "--n", "20", "--trials", "100000", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out, "bias.csv");
    let bias = column(&csv, "mc_bias");
    let se = column(&csv, "stderr");
    assert_eq!(bias.len(), 3);
    // mle row first, then the two PLE forms
    assert!((bias[0] + 1.0 / 21.0).abs() < 4.0 * se[0], "{csv}");
    assert!(bias[1].abs() < 4.0 * se[1] && bias[2].abs() < 4.0 * se[2], "{csv}");
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn bias_gaussian_minimum_n() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["bias", "--family", "gaussian", "--n", "2", "--trials", "1000", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lab(&["bias", "--family", "gaussian", "--n", "1", "--trials", "1000", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2_with_usage_text() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let o = lab(&["bias", "--n", "3", "--out", dir]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--family") && err.contains("Usage"), "{err}");

    assert_eq!(lab(&["bias", "--family", "uniform", "--estimator", "nope", "--out", dir]).status.code(), Some(2));
    assert_eq!(lab(&["bias", "--family", "uniform", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(lab(&["bias", "--family", "uniform", "--n", "x", "--out", dir]).status.code(), Some(2));
    assert_eq!(lab(&["madness", "--family", "uniform", "--generations", "0", "--out", dir]).status.code(), Some(2));
    assert_eq!(lab(&["density", "--nodes", "10", "--out", dir]).status.code(), Some(2));
    assert_eq!(lab(&[]).status.code(), Some(2));
    assert_eq!(lab(&["--help"]).status.code(), Some(0));
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["gmm-grid", "--weights", "0.6", "--sizes", "20", "--seeds", "1", "--steps", "20", "--learning-rate", "1e200", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn solver_rejects_unsupported_family_form() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let o = lab(&["solver", "--family", "uniform", "--form", "linear", "--n", "1", "--k", "50", "--out", dir]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lab(&["solver", "--family", "gaussian", "--form", "linear", "--out", dir]).status.code(), Some(2));
}

#[test]
fn madness_rows_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let o = lab(&["madness", "--family", "uniform", "--estimator", "mle", "--n", "20", "--generations", "10", "--trials", "100", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = read(&out, "madness.csv");
    assert!(csv.starts_with("x,y,error\n"));
    let y = column(&csv, "y");
    assert_eq!(y.len(), 11);
    assert!(y.windows(2).all(|w| w[1] < w[0]), "{csv}");
    assert!(read(&out, "madness.svg").starts_with("<svg"));

    let ple = tmp.path().join("p");
    let o = lab(&["madness", "--family", "uniform", "--estimator", "ple-max", "--seed", "1", "--out", ple.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = read(&ple, "madness.csv");
    for (y, e) in column(&csv, "y").iter().zip(column(&csv, "error")) {
        assert!((y - 1.0).abs() <= 4.0 * e, "{csv}");
    }

    let one = tmp.path().join("one");
    assert!(lab(&["madness", "--family", "gaussian", "--generations", "1", "--svg", "false", "--out", one.to_str().unwrap()]).status.success());
    assert_eq!(column(&read(&one, "madness.csv"), "x"), vec![0.0, 1.0]);
    assert!(!one.join("madness.svg").exists());
}

#[test]
fn density_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["density", "--n", "5", "--samples", "50000", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let d = read(tmp.path(), "density.csv");
    assert!(d.starts_with("node,density\n"));
    let h = read(tmp.path(), "histogram.csv");
    let dens = column(&h, "density");
    assert_eq!(dens.len(), 100);
    // histogram integrates to one
    let width = 2.0 / 100.0;
    assert!((dens.iter().sum::<f64>() * width - 1.0).abs() < 1e-9);
}

#[test]
fn gmm_grid_csv_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["gmm-grid", "--weights", "0.6,0.9", "--sizes", "20,40", "--seeds", "3", "--steps", "20", "--kl-samples", "500", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = read(tmp.path(), "grid.csv");
    assert!(grid.starts_with("weight,n,kl_mle_mean,kl_ple_mean,d_mean,d_stderr,rfair_mle,rfair_ple\n"));
    assert_eq!(grid.lines().count(), 5);
    assert_eq!(read(tmp.path(), "seeds.csv").lines().count(), 13);
    assert_eq!(read(tmp.path(), "grid.svg").matches("<rect").count(), 5);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "family = uniform\nn = 5\ntrials = 500\nseed = 3\n").unwrap();
    let out = tmp.path().join("o");
    let o = lab(&["bias", "--config", cfg.to_str().unwrap(), "--n", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let m = ple_lab::RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.config["n"], "7");
    assert_eq!(m.config["trials"], "500");
    assert_eq!(m.seed, 3);
}

#[test]
fn environment_seed_is_a_default() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let base = ["bias", "--family", "uniform", "--trials", "500", "--out"];
    let run = |dir: &Path, extra: &[&str], env: Option<&str>| {
        let mut args: Vec<&str> = base.to_vec();
        args.push(dir.to_str().unwrap());
        args.extend_from_slice(extra);
        let o = match env {
            Some(s) => lab_env(&args, s),
            None => lab(&args),
        };
        assert!(o.status.success());
        ple_lab::RunManifest::read(&dir.join("manifest.json")).unwrap()
    };
    assert_eq!(run(&a, &[], Some("42")).seed, 42);
    assert_eq!(run(&b, &["--seed", "5"], Some("42")).seed, 5);
    assert_eq!(run(&c, &[], None).seed, 0);
    assert_ne!(read(&a, "bias.csv"), read(&c, "bias.csv"));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("1");
    let four = tmp.path().join("4");
    for (dir, t) in [(&one, "1"), (&four, "4")] {
        let o = lab(&["madness", "--family", "gaussian", "--estimator", "ple", "--n", "10", "--trials", "300", "--threads", t, "--out", dir.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(read(&one, "madness.csv"), read(&four, "madness.csv"));
    assert_eq!(read(&one, "madness.svg"), read(&four, "madness.svg"));
}

#[test]
fn rerun_reproduces_and_defaults_next_to_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    assert!(lab(&["solver", "--family", "uniform", "--k", "300", "--datasets", "2", "--out", out.to_str().unwrap()]).status.success());
    let before = read(&out, "solver.csv");
    assert!(lab(&["rerun", out.join("manifest.json").to_str().unwrap()]).status.success());
    assert_eq!(read(&out, "solver.csv"), before);
    assert_eq!(lab(&["rerun", tmp.path().join("missing.json").to_str().unwrap()]).status.code(), Some(1));
}
