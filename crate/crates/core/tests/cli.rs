//! End-to-end tests of the command-line interface: file contracts, exit
//! codes, config precedence, and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corr-ard"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn corr-ard");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("spawn corr-ard").status.code().unwrap_or(-1)
}

/// Noise-free toy dataset: target = 2·f0 − f2.
fn write_toy_csv(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let x = Array2::<f64>::from_shape_fn((n, 4), |_| StandardNormal.sample(&mut rng));
    let mut s = String::from("f0,f1,f2,f3,target\n");
    for i in 0..n {
        let t = 2.0 * x[[i, 0]] - x[[i, 2]];
        for j in 0..4 {
            s.push_str(&format!("{:.12},", x[[i, j]]));
        }
        s.push_str(&format!("{t:.12}\n"));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn fit_then_predict_on_training_data_has_near_zero_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.csv");
    write_toy_csv(&toy, 80, 1);

    // Gaussian fit on noise-free data drives the learned noise variance to
    // its floor and reproduces the targets almost exactly. Standardization
    // is skipped: centering the covariates would leave a small constant the
    // intercept-free model cannot express.
    let fit_dir = dir.path().join("fit");
    run_ok(bin()
        .arg("fit")
        .args(["--algo", "lsr-ard", "--no-standardize"])
        .arg("--input")
        .arg(&toy)
        .arg("--out")
        .arg(&fit_dir));
    assert!(fit_dir.join("model.json").exists());
    assert!(fit_dir.join("fit_report.json").exists());
    assert!(fit_dir.join("manifest.json").exists());

    let pred_dir = dir.path().join("pred");
    run_ok(bin()
        .arg("predict")
        .arg("--model")
        .arg(fit_dir.join("model.json"))
        .arg("--input")
        .arg(&toy)
        .arg("--out")
        .arg(&pred_dir));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pred_dir.join("metrics.json")).unwrap()).unwrap();
    let rmse = metrics["rmse"].as_f64().unwrap();
    assert!(rmse < 1e-3, "training rmse {rmse}");

    // The correntropy fit keeps a little finite-bandwidth shrinkage but the
    // fit is still essentially exact in correlation.
    let fit2 = dir.path().join("fit2");
    run_ok(bin()
        .arg("fit")
        .args(["--algo", "mcr-ard", "--h", "2"])
        .arg("--input")
        .arg(&toy)
        .arg("--out")
        .arg(&fit2));
    let pred2 = dir.path().join("pred2");
    run_ok(bin()
        .arg("predict")
        .arg("--model")
        .arg(fit2.join("model.json"))
        .arg("--input")
        .arg(&toy)
        .arg("--out")
        .arg(&pred2));
    let metrics2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pred2.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics2["correlation"].as_f64().unwrap() > 0.999);
}

#[test]
fn predictions_match_library_predict_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.csv");
    write_toy_csv(&toy, 50, 2);
    let fit_dir = dir.path().join("fit");
    run_ok(bin()
        .arg("fit")
        .args(["--algo", "lsr-ard"])
        .arg("--input")
        .arg(&toy)
        .arg("--out")
        .arg(&fit_dir));
    let pred_dir = dir.path().join("pred");
    run_ok(bin()
        .arg("predict")
        .arg("--model")
        .arg(fit_dir.join("model.json"))
        .arg("--input")
        .arg(&toy)
        .arg("--out")
        .arg(&pred_dir));

    let model: corr_ard::model::ModelFile =
        serde_json::from_str(&fs::read_to_string(fit_dir.join("model.json")).unwrap()).unwrap();
    let data = corr_ard::data::load_dataset_csv(&toy, "target").unwrap();
    let pred = model.predict_raw(&data.x).unwrap();
    let mut expect = String::from("prediction\n");
    for p in pred.iter() {
        expect.push_str(&corr_ard::data::fmt_g17(*p));
        expect.push('\n');
    }
    let got = fs::read_to_string(pred_dir.join("predictions.csv")).unwrap();
    assert_eq!(got, expect);
}

#[test]
fn fit_with_cv_records_selected_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.csv");
    write_toy_csv(&toy, 60, 3);
    let fit_dir = dir.path().join("fit");
    run_ok(bin()
        .arg("fit")
        .args(["--algo", "mcr-ard", "--cv-h", "--seed", "9"])
        .arg("--input")
        .arg(&toy)
        .arg("--out")
        .arg(&fit_dir));
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit_dir.join("model.json")).unwrap()).unwrap();
    let h = model["bandwidth"].as_f64().unwrap();
    // Default 30-point grid between 1 and 1000.
    assert!((1.0..=1000.0).contains(&h));
    let table = fs::read_to_string(fit_dir.join("cv_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 31, "header plus 30 grid rows");
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let no_target = dir.path().join("no_target.csv");
    fs::write(&no_target, "f0,f1\n1.0,2.0\n3.0,4.0\n").unwrap();
    let mut cmd = bin();
    cmd.arg("fit")
        .args(["--algo", "lsr-ard"])
        .arg("--input")
        .arg(&no_target)
        .arg("--out")
        .arg(dir.path().join("o1"));
    let out = cmd.output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("target"), "diagnostic must name the column: {stderr}");

    let bad_value = dir.path().join("bad.csv");
    fs::write(&bad_value, "f0,target\n1.0,abc\n").unwrap();
    assert_eq!(
        exit_code(bin().arg("fit").args(["--algo", "lsr-ard"]).arg("--input").arg(&bad_value)),
        2
    );
}

#[test]
fn all_pruned_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let zeros = dir.path().join("zeros.csv");
    let mut s = String::from("f0,target\n");
    for i in 0..20 {
        s.push_str(&format!("{}.5,0\n", i % 7));
    }
    fs::write(&zeros, s).unwrap();
    assert_eq!(
        exit_code(
            bin()
                .arg("fit")
                .args(["--algo", "lsr-ard"])
                .arg("--input")
                .arg(&zeros)
                .arg("--out")
                .arg(dir.path().join("o"))
        ),
        3
    );
}

#[test]
fn predict_feature_mismatch_exits_2_and_names_features() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.csv");
    write_toy_csv(&toy, 40, 4);
    let fit_dir = dir.path().join("fit");
    run_ok(bin()
        .arg("fit")
        .args(["--algo", "lsr-ard"])
        .arg("--input")
        .arg(&toy)
        .arg("--out")
        .arg(&fit_dir));

    let narrower = dir.path().join("narrow.csv");
    fs::write(&narrower, "f0,f1,f2,target\n1.0,2.0,3.0,0.5\n").unwrap();
    let mut cmd = bin();
    cmd.arg("predict")
        .arg("--model")
        .arg(fit_dir.join("model.json"))
        .arg("--input")
        .arg(&narrower)
        .arg("--out")
        .arg(dir.path().join("p"));
    let out = cmd.output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("f3"));
}

#[test]
fn cv_single_point_grid_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.csv");
    write_toy_csv(&toy, 50, 5);

    let cv1 = dir.path().join("cv1");
    let out = run_ok(bin()
        .arg("cv")
        .arg("--input")
        .arg(&toy)
        .args(["--grid-lo", "5", "--grid-hi", "5", "--grid-n", "1", "--folds", "3", "--seed", "11"])
        .arg("--out")
        .arg(&cv1));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "5");
    let table = fs::read_to_string(cv1.join("cv_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2, "header plus one row");

    let cv2 = dir.path().join("cv2");
    run_ok(bin()
        .arg("cv")
        .arg("--input")
        .arg(&toy)
        .args(["--grid-lo", "1", "--grid-hi", "20", "--grid-n", "4", "--folds", "3", "--seed", "11"])
        .arg("--out")
        .arg(&cv2));
    let cv3 = dir.path().join("cv3");
    run_ok(bin()
        .arg("cv")
        .arg("--input")
        .arg(&toy)
        .args(["--grid-lo", "1", "--grid-hi", "20", "--grid-n", "4", "--folds", "3", "--seed", "11"])
        .arg("--out")
        .arg(&cv3));
    assert_eq!(
        fs::read(cv2.join("cv_table.csv")).unwrap(),
        fs::read(cv3.join("cv_table.csv")).unwrap(),
        "seeded cv runs must be byte-identical"
    );
}

#[test]
fn lagged_design_contract() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let target = dir.path().join("target.csv");
    let t_len = 60;
    let mut s = String::from("time_index,sA,sB\n");
    for i in 0..t_len {
        s.push_str(&format!("{i},{},{}\n", i as f64 * 0.1, (t_len - i) as f64 * 0.05));
    }
    fs::write(&series, s).unwrap();
    let mut ts = String::from("y\n");
    for i in 0..t_len {
        ts.push_str(&format!("{}\n", i as f64 * 0.02));
    }
    fs::write(&target, ts).unwrap();

    // Default 21 lags over 2 sources gives 42 covariates.
    let lag_dir = dir.path().join("lag");
    run_ok(bin()
        .arg("lagged")
        .arg("--series")
        .arg(&series)
        .arg("--target")
        .arg(&target)
        .arg("--out")
        .arg(&lag_dir));
    let design = fs::read_to_string(lag_dir.join("design.csv")).unwrap();
    let header = design.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 43, "42 covariates plus target");
    assert!(header.starts_with("src0_lag20,"));
    assert!(header.contains("src1_lag0"));

    // The produced file matches the library construction.
    let (series_m, _) = corr_ard::data::load_series_csv(&series).unwrap();
    let target_v = corr_ard::data::load_target_csv(&target).unwrap();
    let expect = corr_ard::data::build_lagged_design(
        &series_m,
        &target_v,
        &corr_ard::data::LagSpec::default(),
    )
    .unwrap();
    let written = corr_ard::data::load_dataset_csv(&lag_dir.join("design.csv"), "target").unwrap();
    assert_eq!(written.n_samples(), expect.n_samples());
    for (a, b) in written.x.iter().zip(expect.x.iter()) {
        assert!((a - b).abs() < 1e-12);
    }

    // Too-short series exits 2.
    let short = dir.path().join("short.csv");
    fs::write(&short, "time_index,sA\n0,1.0\n1,2.0\n").unwrap();
    let short_t = dir.path().join("short_t.csv");
    fs::write(&short_t, "y\n0.1\n0.2\n").unwrap();
    assert_eq!(
        exit_code(
            bin()
                .arg("lagged")
                .arg("--series")
                .arg(&short)
                .arg("--target")
                .arg(&short_t)
                .arg("--out")
                .arg(dir.path().join("lag2"))
        ),
        2
    );
}

#[test]
fn bench_fixed_h_skips_cv_and_manifest_records_it() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    run_ok(bin()
        .arg("bench")
        .args([
            "--reps", "1", "--proportions", "0", "--scales", "0.2", "--fixed-h", "10",
            "--dim", "20", "--n-train", "40", "--n-test", "30", "--n-relevant", "3",
            "--seed", "5",
        ])
        .arg("--out")
        .arg(&out_dir));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["selection"]["Fixed"].as_f64(), Some(10.0));
    let results = fs::read_to_string(out_dir.join("bench_results.csv")).unwrap();
    for line in results.lines().skip(1) {
        if line.starts_with("mcr-ard") {
            let h: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
            assert_eq!(h, 10.0);
        }
    }
    // 1 rep, 1 cell, 2 algorithms.
    assert_eq!(results.lines().count(), 3);
}

#[test]
fn config_file_and_env_seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.conf");
    fs::write(
        &config,
        "reps = 2\nproportions = 0\nscales = 0.2\nfixed-h = 10\ndim = 16\nn-train = 30\nn-test = 20\nn-relevant = 2\n",
    )
    .unwrap();

    // Flag beats config: --reps 1 wins over reps = 2.
    let o1 = dir.path().join("o1");
    run_ok(bin()
        .arg("bench")
        .args(["--reps", "1", "--seed", "3"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&o1));
    let m1: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(o1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m1["config"]["reps"].as_u64(), Some(1));
    assert_eq!(m1["config"]["synthetic"]["dim"].as_u64(), Some(16));

    // Config beats default: without the flag, reps = 2 from the file.
    let o2 = dir.path().join("o2");
    run_ok(bin()
        .arg("bench")
        .args(["--seed", "3"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&o2));
    let m2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(o2.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m2["config"]["reps"].as_u64(), Some(2));

    // Environment variable supplies the master seed when no flag is given.
    let o3 = dir.path().join("o3");
    run_ok(bin()
        .arg("bench")
        .env("CORR_ARD_SEED", "777")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&o3));
    let m3: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(o3.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m3["master_seed"].as_u64(), Some(777));
}

#[test]
fn intercept_column_handles_offset_targets() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let n = 60;
    let x = Array1::<f64>::from_shape_fn(n, |_| StandardNormal.sample(&mut rng));
    let mut s = String::from("f0,target\n");
    for i in 0..n {
        s.push_str(&format!("{:.12},{:.12}\n", x[i], 3.0 + 2.0 * x[i]));
    }
    let csv_path = dir.path().join("offset.csv");
    fs::write(&csv_path, s).unwrap();

    let fit_dir = dir.path().join("fit");
    run_ok(bin()
        .arg("fit")
        .args(["--algo", "mcr-ard", "--h", "2", "--intercept"])
        .arg("--input")
        .arg(&csv_path)
        .arg("--out")
        .arg(&fit_dir));
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit_dir.join("model.json")).unwrap()).unwrap();
    let intercept = model["intercept_original"].as_f64().unwrap();
    assert!((intercept - 3.0).abs() < 0.1, "intercept {intercept}");

    let pred_dir = dir.path().join("pred");
    run_ok(bin()
        .arg("predict")
        .arg("--model")
        .arg(fit_dir.join("model.json"))
        .arg("--input")
        .arg(&csv_path)
        .arg("--out")
        .arg(&pred_dir));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pred_dir.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["rmse"].as_f64().unwrap() < 0.1);
}
