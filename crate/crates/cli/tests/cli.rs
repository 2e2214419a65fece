use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_gdmap");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should launch")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Generates a small surrogate dataset and fits a pipeline on it, returning
/// the workspace root. Several tests share this flow.
fn fitted_workspace() -> TempDir {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    fs::create_dir(root.join("data")).unwrap();
    fs::create_dir(root.join("fit")).unwrap();
    run_ok(
        root,
        &[
            "generate", "surrogate", "--grid", "6x5x4", "--dim", "40", "--seed", "1", "--out",
            "data",
        ],
    );
    run_ok(
        root,
        &[
            "fit",
            "--snapshots",
            "data/snapshots.bin",
            "--params",
            "data/params.csv",
            "--out",
            "fit",
            "--holdout-fraction",
            "0.1",
            "--seed",
            "7",
            "--partial-mask-size",
            "7",
            "--pod-rank",
            "3",
        ],
    );
    tmp
}

#[test]
fn generate_writes_data_and_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    fs::create_dir(root.join("out")).unwrap();
    run_ok(
        root,
        &[
            "generate",
            "slow-manifold",
            "--eps",
            "0.01",
            "--n",
            "200",
            "--seed",
            "0",
            "--out",
            "out",
        ],
    );

    let entries: Vec<_> = fs::read_dir(root.join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(entries.len(), 2, "expected exactly two output files, got {entries:?}");
    assert!(entries.contains(&"snapshots.bin".to_string()));
    assert!(entries.contains(&"generate.config".to_string()));

    let config = fs::read_to_string(root.join("out/generate.config")).unwrap();
    assert!(config.contains("# config_hash="));
    // defaults are expanded even when not passed on the command line
    assert!(config.contains("format=binary"));
    assert!(config.contains("eps=0.01"));
    assert!(config.contains("n=200"));
}

#[test]
fn generate_is_deterministic_across_runs() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    for d in ["a", "b"] {
        fs::create_dir(root.join(d)).unwrap();
        run_ok(
            root,
            &["generate", "slow-manifold", "--n", "150", "--seed", "4", "--out", d],
        );
    }
    let a = fs::read(root.join("a/snapshots.bin")).unwrap();
    let b = fs::read(root.join("b/snapshots.bin")).unwrap();
    assert_eq!(a, b, "same seed and settings should produce identical bytes");

    let ca = fs::read_to_string(root.join("a/generate.config")).unwrap();
    let cb = fs::read_to_string(root.join("b/generate.config")).unwrap();
    assert_eq!(ca, cb, "resolved configs should match, paths are not part of them");
}

#[test]
fn missing_output_directory_is_an_io_error_naming_the_path() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["generate", "slow-manifold", "--out", "no/such/dir"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_of(&out);
    assert!(err.contains("no/such/dir"), "error should name the path: {err}");
    assert!(err.contains("does not exist"));
}

#[test]
fn unknown_generator_kind_is_an_invalid_argument() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["generate", "spiral", "--out", "."]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("spiral"));
}

#[test]
fn refit_with_identical_settings_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    fs::create_dir(root.join("data")).unwrap();
    run_ok(
        root,
        &["generate", "surrogate", "--grid", "5x4x4", "--dim", "30", "--seed", "2", "--out", "data"],
    );
    let fit_args = [
        "fit",
        "--snapshots",
        "data/snapshots.bin",
        "--params",
        "data/params.csv",
        "--holdout-fraction",
        "0.1",
        "--seed",
        "11",
        "--partial-mask-size",
        "7",
    ];
    for d in ["f1", "f2"] {
        fs::create_dir(root.join(d)).unwrap();
        let mut args: Vec<&str> = fit_args.to_vec();
        args.extend_from_slice(&["--out", d]);
        run_ok(root, &args);
    }
    for file in ["pipeline.model", "residuals.csv", "holdout.csv", "fit.config"] {
        let a = fs::read(root.join("f1").join(file)).unwrap();
        let b = fs::read(root.join("f2").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical refits");
    }
}

#[test]
fn pipeline_fit_and_predict_round_trip() {
    let tmp = fitted_workspace();
    let root = tmp.path();

    let out = run_ok(
        root,
        &[
            "predict",
            "--pipeline",
            "fit/pipeline.model",
            "--route",
            "obs-to-params",
            "--input",
            "fit/test_snapshots.bin",
            "--actual",
            "fit/test_params.csv",
            "--out",
            "pred.csv",
        ],
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean relative l2 error"), "stdout: {stdout}");

    let report = fs::read_to_string(root.join("pred.csv")).unwrap();
    assert!(report.contains("# route=obs-to-params"));
    assert!(report.contains("# config_hash="));
    assert!(report.contains("# model_config_hash="));
    assert!(report.contains("rel_l2_error"));

    let mean: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("# mean_relative_l2="))
        .expect("mean line present")
        .parse()
        .unwrap();
    assert!(mean < 0.10, "held-out parameter recovery too poor: {mean}");
}

#[test]
fn predict_refuses_mismatched_training_data() {
    let tmp = fitted_workspace();
    let root = tmp.path();
    fs::create_dir(root.join("other")).unwrap();
    run_ok(
        root,
        &["generate", "surrogate", "--grid", "4x4x4", "--dim", "40", "--seed", "9", "--out", "other"],
    );

    let out = run(
        root,
        &[
            "predict",
            "--pipeline",
            "fit/pipeline.model",
            "--route",
            "obs-to-params",
            "--input",
            "fit/test_snapshots.bin",
            "--training",
            "other/snapshots.bin",
            "--out",
            "never.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("training data mismatch"), "stderr: {err}");
    // both hashes are spelled out so the user can see what differs
    assert_eq!(err.matches("hash").count() >= 2, true, "stderr: {err}");
    assert!(!root.join("never.csv").exists());

    // the matrix the model was actually fitted on passes the same guard
    run_ok(
        root,
        &[
            "predict",
            "--pipeline",
            "fit/pipeline.model",
            "--route",
            "obs-to-params",
            "--input",
            "fit/test_snapshots.bin",
            "--training",
            "fit/train_snapshots.bin",
            "--out",
            "ok.csv",
        ],
    );
}

#[test]
fn extend_writes_latent_coordinates_for_each_row() {
    let tmp = fitted_workspace();
    let root = tmp.path();
    run_ok(
        root,
        &[
            "extend",
            "--model",
            "fit/pipeline.model",
            "--input",
            "fit/test_snapshots.bin",
            "--out",
            "latent.csv",
        ],
    );
    let report = fs::read_to_string(root.join("latent.csv")).unwrap();
    let header = report
        .lines()
        .find(|l| !l.starts_with('#'))
        .expect("header row");
    assert!(header.starts_with("row,phi_"), "header: {header}");
}

#[test]
fn extend_rejects_a_pod_basis() {
    let tmp = fitted_workspace();
    let root = tmp.path();
    let out = run(
        root,
        &[
            "extend",
            "--model",
            "fit/pod.model",
            "--input",
            "fit/test_snapshots.bin",
            "--out",
            "x.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("no out-of-sample extension"));
}

#[test]
fn compare_equal_reports_both_methods_on_the_shared_mask() {
    let tmp = fitted_workspace();
    let root = tmp.path();
    run_ok(
        root,
        &[
            "compare",
            "equal",
            "--pipeline",
            "fit/pipeline.model",
            "--pod",
            "fit/pod.model",
            "--input",
            "fit/test_snapshots.bin",
            "--out",
            "eq.csv",
        ],
    );
    let report = fs::read_to_string(root.join("eq.csv")).unwrap();
    assert!(report.contains("# mask="));
    assert!(report.contains("# condition_number="));
    assert!(report.contains("pod_rel_l2,dmap_rel_l2"));
}

#[test]
fn mask_sweep_reports_conditioning_and_errors_per_mask() {
    let tmp = fitted_workspace();
    let root = tmp.path();
    run_ok(
        root,
        &[
            "compare",
            "mask-sweep",
            "--pod",
            "fit/pod.model",
            "--input",
            "fit/test_snapshots.bin",
            "--mask-size",
            "3",
            "--n-masks",
            "6",
            "--seed",
            "5",
            "--out",
            "sweep.csv",
        ],
    );
    let report = fs::read_to_string(root.join("sweep.csv")).unwrap();
    assert!(report.contains("mask_id,indices,cond,known_residual,mean_rel_l2"));
    let data_rows = report
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("mask_id"))
        .count();
    assert_eq!(data_rows, 6);
}

#[test]
fn rank_sweep_reports_energy_and_error_per_rank() {
    let tmp = fitted_workspace();
    let root = tmp.path();
    run_ok(
        root,
        &[
            "compare",
            "rank-sweep",
            "--pod",
            "fit/pod.model",
            "--input",
            "data/snapshots.bin",
            "--mask",
            "1,5,9,13,17,21,25",
            "--test",
            "fit/test_snapshots.bin",
            "--max-rank",
            "5",
            "--out",
            "ranks.csv",
        ],
    );
    let report = fs::read_to_string(root.join("ranks.csv")).unwrap();
    assert!(report.contains("rank,energy_percent,mean_rel_l2"));
    let energies: Vec<f64> = report
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("rank"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(energies.len(), 5);
    for pair in energies.windows(2) {
        assert!(pair[1] >= pair[0], "captured energy must grow with rank");
    }
}

#[test]
fn gh_fit_warns_when_the_spectrum_collapses_to_one_mode() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    fs::create_dir(root.join("data")).unwrap();
    fs::create_dir(root.join("gh")).unwrap();
    run_ok(
        root,
        &["generate", "surrogate", "--grid", "4x4x4", "--dim", "20", "--seed", "3", "--out", "data"],
    );
    // a truncation threshold of 1 keeps only the leading eigenvalue
    let out = run_ok(
        root,
        &[
            "fit",
            "--what",
            "gh",
            "--gh-inputs",
            "data/params.csv",
            "--gh-targets",
            "data/snapshots.bin",
            "--delta",
            "1",
            "--out",
            "gh",
        ],
    );
    let err = stderr_of(&out);
    assert!(err.contains("underfitting"), "expected an underfit warning, got: {err}");
    assert!(root.join("gh/gh.model").exists(), "the model is still written");
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    fs::write(
        root.join("run.cfg"),
        "# comment lines and blank lines are ignored\n\neps=0.05\nn=50\nseed=9\n",
    )
    .unwrap();
    fs::create_dir(root.join("out")).unwrap();
    run_ok(
        root,
        &["generate", "slow-manifold", "--config", "run.cfg", "--n", "80", "--out", "out"],
    );
    let config = fs::read_to_string(root.join("out/generate.config")).unwrap();
    assert!(config.contains("eps=0.05"), "config file value should be used");
    assert!(config.contains("n=80"), "flag should override the config file");
    assert!(config.contains("seed=9"));
}

#[test]
fn malformed_config_file_names_the_line() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    fs::write(root.join("bad.cfg"), "eps=0.01\nnot a key value pair\n").unwrap();
    let out = run(root, &["generate", "slow-manifold", "--config", "bad.cfg", "--out", "."]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_of(&out);
    assert!(err.contains("bad.cfg"), "stderr: {err}");
    assert!(err.contains("line 2"), "stderr: {err}");
}

#[test]
fn saved_models_survive_a_predict_load_cycle_bit_for_bit() {
    let tmp = fitted_workspace();
    let root = tmp.path();
    // predicting twice from the same saved model has to agree exactly
    for name in ["p1.csv", "p2.csv"] {
        run_ok(
            root,
            &[
                "predict",
                "--pipeline",
                "fit/pipeline.model",
                "--route",
                "partial-to-params",
                "--input",
                "fit/test_snapshots.bin",
                "--out",
                name,
            ],
        );
    }
    let a = fs::read(root.join("p1.csv")).unwrap();
    let b = fs::read(root.join("p2.csv")).unwrap();
    assert_eq!(a, b);
}
