//! End-to-end tests of the `faultline` binary: exit statuses (0 success,
//! 1 numerical failure, 2 usage/input error), stderr diagnostics, and the
//! simulate → fit → classify round trip through real files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn faultline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faultline"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn successful_commands_exit_zero() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim.csv");
    let output = faultline(&["simulate", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    assert!(out.exists());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("timestamp,x1,u1,"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    // Unknown subcommand and missing required flag are both clap usage
    // errors.
    let unknown = faultline(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
    let missing_out = faultline(&["simulate", "--seed", "1"]);
    assert_eq!(missing_out.status.code(), Some(2));
    // Unknown config keys are input errors that name the offender.
    let config = write(&dir, "bad.cfg", "sample=10\n");
    let out = dir.path().join("x.csv");
    let bad_key = faultline(&[
        "simulate",
        "--out",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(bad_key.status.code(), Some(2));
    assert!(stderr_of(&bad_key).contains("sample"));
}

#[test]
fn missing_input_files_exit_two_and_name_the_path() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "fit.cfg", "data=/nonexistent/telemetry.csv\ndependent=x1\n");
    let out = dir.path().join("m.csv");
    let output = faultline(&[
        "fit",
        "--out",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("/nonexistent/telemetry.csv"));
}

#[test]
fn malformed_csv_exits_two_and_names_row_and_column() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "timestamp,x1\n0,0.5\n1,not-a-number\n");
    let config = write(
        &dir,
        "fit.cfg",
        &format!("data={}\ndependent=x1\n", data.display()),
    );
    let out = dir.path().join("m.csv");
    let output = faultline(&[
        "fit",
        "--out",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("row 2"), "diagnostic names the row: {stderr}");
}

#[test]
fn rank_deficient_fit_exits_one_and_reports_rank() {
    let dir = TempDir::new().unwrap();
    // Three pairs against p = 2·(1+3)+1 = 9 features at alpha 0 cannot
    // determine the matrix.
    let data = write(
        &dir,
        "d.csv",
        "timestamp,x1,u1,u2,u3\n0,0.1,1.0,0.2,-0.3\n1,0.2,0.5,-0.1,0.4\n2,0.1,0.3,0.2,0.1\n3,0.0,0.2,0.1,0.0\n",
    );
    let config = write(
        &dir,
        "fit.cfg",
        &format!(
            "data={}\ndependent=x1\nindependent=u1,u2,u3\ndegree=2\nalpha=0\n",
            data.display()
        ),
    );
    let out = dir.path().join("m.csv");
    let output = faultline(&[
        "fit",
        "--out",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1), "{}", stderr_of(&output));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("rank"), "diagnostic mentions rank: {stderr}");
}

#[test]
fn classify_dimension_mismatch_exits_two_naming_dimensions() {
    let dir = TempDir::new().unwrap();
    let data = write(
        &dir,
        "d.csv",
        "timestamp,x1,u1\n0,0.5,1.0\n1,0.4,0.9\n2,0.3,0.8\n",
    );
    // The matrix was fitted for k = 2 inputs; the data supplies one.
    let matrix = write(
        &dir,
        "m.csv",
        "# rows=1 cols=4 kernel=1,2,1 window=1\nc0,c1,c2,c3\n0.1,0.2,0.3,0.4\n",
    );
    let config = write(
        &dir,
        "c.cfg",
        &format!(
            "matrix={}\ndata={}\ndependent=x1\nindependent=u1\n",
            matrix.display(),
            data.display()
        ),
    );
    let out = dir.path().join("out.csv");
    let output = faultline(&[
        "classify",
        "--out",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
    let stderr = stderr_of(&output);
    assert!(
        stderr.contains('2') && stderr.contains('1'),
        "diagnostic names both dimensions: {stderr}"
    );
}

#[test]
fn simulate_fit_classify_round_trip_is_all_normal() {
    let dir = TempDir::new().unwrap();
    let truth = dir.path().join("truth.csv");
    let sim_config = write(
        &dir,
        "sim.cfg",
        &format!(
            "n=1\nk=3\ndegree=1\nsamples=80\nnoise=0\ntruth_out={}\n",
            truth.display()
        ),
    );
    let data = dir.path().join("data.csv");
    let sim = faultline(&[
        "simulate",
        "--seed",
        "9",
        "--out",
        data.to_str().unwrap(),
        "--config",
        sim_config.to_str().unwrap(),
    ]);
    assert_eq!(sim.status.code(), Some(0), "{}", stderr_of(&sim));

    let fit_config = write(
        &dir,
        "fit.cfg",
        &format!("data={}\ndependent=x1\nindependent=u1,u2,u3\n", data.display()),
    );
    let matrix = dir.path().join("fitted.csv");
    let fit = faultline(&[
        "fit",
        "--out",
        matrix.to_str().unwrap(),
        "--config",
        fit_config.to_str().unwrap(),
    ]);
    assert_eq!(fit.status.code(), Some(0), "{}", stderr_of(&fit));

    let classify_config = write(
        &dir,
        "cls.cfg",
        &format!(
            "matrix={}\ndata={}\ndependent=x1\nindependent=u1,u2,u3\nwindow=4\n",
            matrix.display(),
            data.display()
        ),
    );
    let decisions = dir.path().join("decisions.csv");
    let classify = faultline(&[
        "classify",
        "--out",
        decisions.to_str().unwrap(),
        "--config",
        classify_config.to_str().unwrap(),
    ]);
    assert_eq!(classify.status.code(), Some(0), "{}", stderr_of(&classify));

    let text = std::fs::read_to_string(&decisions).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("window,value,decision"));
    let mut count = 0usize;
    for line in lines {
        assert!(line.ends_with(",normal"), "unexpected decision row: {line}");
        count += 1;
    }
    assert_eq!(count, 79 / 4, "non-overlapping windows over 79 pairs");
}

#[test]
fn experiment_commands_write_plot_ready_tables() {
    let dir = TempDir::new().unwrap();
    let mc_config = write(&dir, "mc.cfg", "trials=4\nsamples=60\nlags=1,2\n");
    let mc_out = dir.path().join("mc.csv");
    let mc = faultline(&[
        "mc-f1",
        "--seed",
        "5",
        "--out",
        mc_out.to_str().unwrap(),
        "--config",
        mc_config.to_str().unwrap(),
    ]);
    assert_eq!(mc.status.code(), Some(0), "{}", stderr_of(&mc));
    let text = std::fs::read_to_string(&mc_out).unwrap();
    assert!(text.starts_with("trial,seed,frob,lag,f1\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 2);

    let tc_config = write(
        &dir,
        "tc.cfg",
        "counts=8\nresamples=2\nsource_samples=64\ntarget_samples=64\n",
    );
    let tc_out = dir.path().join("tc.csv");
    let tc = faultline(&[
        "transfer-curve",
        "--seed",
        "5",
        "--out",
        tc_out.to_str().unwrap(),
        "--config",
        tc_config.to_str().unwrap(),
    ]);
    assert_eq!(tc.status.code(), Some(0), "{}", stderr_of(&tc));
    let text = std::fs::read_to_string(&tc_out).unwrap();
    assert!(text.starts_with("resample,seed,count,model,arm,mse\n"));
    assert_eq!(text.lines().count(), 1 + 1 + 2 * 2, "header + baseline + 2 resamples × 2 arms");

    let fs_config = write(
        &dir,
        "fs.cfg",
        "window=5\nsource_samples=400\ntarget_train_samples=40\ntarget_valid_samples=200\nfault_samples=100\n",
    );
    let fs_out = dir.path().join("fs.csv");
    let fs = faultline(&[
        "fault-study",
        "--seed",
        "5",
        "--out",
        fs_out.to_str().unwrap(),
        "--config",
        fs_config.to_str().unwrap(),
    ]);
    assert_eq!(fs.status.code(), Some(0), "{}", stderr_of(&fs));
    let text = std::fs::read_to_string(&fs_out).unwrap();
    assert!(text.starts_with("stage,seed,window,truth,metric,value\n"));
    assert!(text.contains(",precision,"));
    assert!(text.contains(",recall,"));
}

#[test]
fn seed_column_lets_any_trial_be_rerun_in_isolation() {
    // The seed echoed in an mc-f1 row is the trial's derived seed: running
    // a single-trial study from the master seed reproduces trial 0's rows.
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "mc.cfg", "trials=3\nsamples=50\nlags=1\n");
    let full_out = dir.path().join("full.csv");
    let full = faultline(&[
        "mc-f1",
        "--seed",
        "21",
        "--out",
        full_out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(full.status.code(), Some(0));
    let full_text = std::fs::read_to_string(&full_out).unwrap();
    let single_config = write(&dir, "one.cfg", "trials=1\nsamples=50\nlags=1\n");
    let single_out = dir.path().join("one.csv");
    let single = faultline(&[
        "mc-f1",
        "--seed",
        "21",
        "--out",
        single_out.to_str().unwrap(),
        "--config",
        single_config.to_str().unwrap(),
    ]);
    assert_eq!(single.status.code(), Some(0));
    let single_text = std::fs::read_to_string(&single_out).unwrap();
    let first_data_row = full_text.lines().nth(1).unwrap();
    assert_eq!(single_text.lines().nth(1), Some(first_data_row));
    assert!(Path::new(env!("CARGO_BIN_EXE_faultline")).exists());
}
