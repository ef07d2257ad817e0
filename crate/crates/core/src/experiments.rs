//! The three reproduction harnesses behind the CLI: the Monte Carlo F1
//! study of the raw 2×2 system, the transfer sample-efficiency curve, and
//! the two-stage fault-classification study.
//!
//! Every harness is a pure function of (config, seed): trials run in
//! parallel over disjoint derived seeds and rows are emitted in a fixed
//! order, so identical invocations produce byte-identical tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bayes::{
    classify_sequence, extract_features_dataset, predict_logistic, train_logistic,
    window_features, ClassifierFeatures, Label,
};
use crate::data::{generate_scenario, synthesize_dataset, Scenario, ScenarioSpec};
use crate::error::{Error, Result};
use crate::estimation::{fit_ls, fit_wls, mse, FitConfig, WlsWeights};
use crate::kernel::{derive_seed, perturb_matrix, simulate, Dataset, TransitionMatrix};
use crate::mlp::{mlp_fit, mlp_mse, MlpModel};

/// A long-form result table: a header plus string rows, one metric value
/// per row. Every row carries the derived seed that produced it, so any
/// single trial can be re-run in isolation. No wall-clock metadata is
/// recorded — outputs must be byte-identical across reruns.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl ExperimentResult {
    fn new(columns: &[&str]) -> Self {
        ExperimentResult {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// The table as CSV text (header + rows, no quoting).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Values of `value_column` over rows matching all (column, value)
    /// filters — the accessor tests and summaries use to pull metrics back
    /// out of the long form.
    pub fn values(&self, value_column: &str, filters: &[(&str, &str)]) -> Result<Vec<f64>> {
        let col = |name: &str| -> Result<usize> {
            self.columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::InvalidInput(format!("no column '{name}' in result")))
        };
        let value_idx = col(value_column)?;
        let filter_idx: Vec<(usize, &str)> = filters
            .iter()
            .map(|(name, v)| Ok((col(name)?, *v)))
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for row in &self.rows {
            if filter_idx.iter().all(|(i, v)| row[*i] == *v) {
                out.push(row[value_idx].parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!(
                        "column '{value_column}' holds non-numeric '{}'",
                        row[value_idx]
                    ))
                })?);
            }
        }
        Ok(out)
    }
}

/// Binary confusion counts with fault as the positive class. Empty
/// denominators score 0 by convention.
#[derive(Debug, Clone, Copy, Default)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Confusion {
    fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Fault, Label::Fault) => self.tp += 1,
            (Label::Normal, Label::Fault) => self.fp += 1,
            (Label::Fault, Label::Normal) => self.fn_ += 1,
            (Label::Normal, Label::Normal) => {}
        }
    }

    fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

// ---------------------------------------------------------------------
// Monte Carlo F1 study
// ---------------------------------------------------------------------

/// Parameters of the Monte Carlo F1 study over the fixed 2×2 system
/// A = diag(0.9, −0.4).
#[derive(Debug, Clone, PartialEq)]
pub struct McF1Config {
    pub trials: usize,
    pub samples: usize,
    /// Non-overlapping window lengths to classify at.
    pub lags: Vec<usize>,
    /// Entry-wise sigma of the faulted matrix B around A.
    pub sigma: f64,
    pub noise_scale: f64,
}

impl Default for McF1Config {
    fn default() -> Self {
        McF1Config {
            trials: 200,
            samples: 1000,
            lags: vec![1, 5, 10],
            sigma: 1.0,
            noise_scale: 1.0,
        }
    }
}

/// Per trial: perturb A into B, draw `samples` i.i.d. pairs under each,
/// classify non-overlapping lag-length windows against A, and score F1
/// (fault = generated-under-B = positive). Emits one row per (trial, lag).
pub fn mc_f1(config: &McF1Config, seed: u64) -> Result<ExperimentResult> {
    if config.trials == 0 {
        return Err(Error::InvalidInput("mc-f1 needs trials >= 1".into()));
    }
    if config.lags.is_empty() || config.lags.contains(&0) {
        return Err(Error::InvalidInput("lags must be a non-empty list of integers >= 1".into()));
    }
    let max_lag = *config.lags.iter().max().expect("non-empty");
    if config.samples < max_lag {
        return Err(Error::InvalidInput(format!(
            "samples ({}) must be >= the largest lag ({max_lag})",
            config.samples
        )));
    }
    let a = TransitionMatrix::raw(DMatrix::from_partial_diagonal(2, 2, &[0.9, -0.4]))?;

    let per_trial: Vec<Vec<Vec<String>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<Vec<String>>> {
            let trial_seed = derive_seed(seed, trial as u64);
            let b = perturb_matrix(&a, config.sigma, derive_seed(trial_seed, 0))?;
            let frob = (a.entries() - b.entries()).norm();
            let normal_data =
                raw_iid_dataset(&a, config.samples, config.noise_scale, derive_seed(trial_seed, 1))?;
            let fault_data =
                raw_iid_dataset(&b, config.samples, config.noise_scale, derive_seed(trial_seed, 2))?;
            let mut rows = Vec::with_capacity(config.lags.len());
            for &lag in &config.lags {
                let windows = config.samples / lag;
                let mut confusion = Confusion::default();
                for w in 0..windows {
                    let normal_window = normal_data.window(w * lag, lag)?;
                    confusion.record(
                        Label::Normal,
                        classify_sequence(&normal_window, &a)?.decision,
                    );
                    let fault_window = fault_data.window(w * lag, lag)?;
                    confusion.record(
                        Label::Fault,
                        classify_sequence(&fault_window, &a)?.decision,
                    );
                }
                rows.push(vec![
                    trial.to_string(),
                    trial_seed.to_string(),
                    frob.to_string(),
                    lag.to_string(),
                    confusion.f1().to_string(),
                ]);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut result = ExperimentResult::new(&["trial", "seed", "frob", "lag", "f1"]);
    for rows in per_trial {
        for row in rows {
            result.push(row);
        }
    }
    Ok(result)
}

/// `samples` i.i.d. standard-normal input vectors (raw, un-kernelized)
/// simulated under `a`.
fn raw_iid_dataset(
    a: &TransitionMatrix,
    samples: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let p = a.feature_dim();
    let inputs: Vec<DVector<f64>> = (0..samples)
        .map(|_| {
            DVector::from_fn(p, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            })
        })
        .collect();
    simulate(a, &inputs, noise_scale, derive_seed(seed, 1))
}

// ---------------------------------------------------------------------
// Transfer sample-efficiency curve
// ---------------------------------------------------------------------

/// Which model family the transfer curve compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferModel {
    Linear,
    Mlp,
}

impl std::fmt::Display for TransferModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransferModel::Linear => write!(f, "linear"),
            TransferModel::Mlp => write!(f, "mlp"),
        }
    }
}

impl std::str::FromStr for TransferModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(TransferModel::Linear),
            "mlp" => Ok(TransferModel::Mlp),
            other => Err(Error::InvalidInput(format!(
                "model must be 'linear' or 'mlp', got '{other}'"
            ))),
        }
    }
}

/// SGD hyper-parameters of the MLP arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpHyper {
    pub learn_rate: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            learn_rate: 0.05,
            epochs: 60,
            batch: 32,
        }
    }
}

/// Parameters of the transfer sample-efficiency study.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCurveConfig {
    pub spec: ScenarioSpec,
    /// Target-training window lengths, ascending.
    pub sample_counts: Vec<usize>,
    pub resamples: usize,
    pub model: TransferModel,
    pub weights: WlsWeights,
    pub ridge_alpha: f64,
    pub mlp: MlpHyper,
}

/// For each (count, resample): draw a contiguous window of the target
/// training pool, fit a scratch model on the window alone and a transfer
/// model that also sees the source building (WLS for linear, warm-started
/// SGD for the MLP), and score both on the fixed target validation half.
/// An all-pool baseline row comes first.
pub fn transfer_curve(config: &TransferCurveConfig, seed: u64) -> Result<ExperimentResult> {
    if config.sample_counts.is_empty() {
        return Err(Error::InvalidInput("sample_counts must be non-empty".into()));
    }
    if config.sample_counts.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(format!(
            "sample_counts must be ascending, got {:?}",
            config.sample_counts
        )));
    }
    if config.resamples == 0 {
        return Err(Error::InvalidInput("resamples must be >= 1".into()));
    }
    let fit_config = FitConfig::new(config.ridge_alpha)?.with_kernel(config.spec.kernel);
    let scenario = generate_scenario(&config.spec, derive_seed(seed, 0))?;
    let t2 = scenario.building2.len();
    // Fixed 50/50 chronological split of the target data: first half is
    // the training pool, second half the validation set every fit scores on.
    let pool_len = (t2 as f64 * 0.5).ceil() as usize;
    if pool_len == 0 || pool_len >= t2 {
        return Err(Error::InvalidInput(format!(
            "target dataset of {t2} samples cannot be split into pool and validation"
        )));
    }
    let pool = scenario.building2.window(0, pool_len)?;
    let valid = scenario.building2.window(pool_len, t2 - pool_len)?;
    for &count in &config.sample_counts {
        if count == 0 || count > pool_len {
            return Err(Error::InvalidInput(format!(
                "sample count {count} outside the training pool (1..={pool_len})"
            )));
        }
    }
    let model_name = config.model.to_string();
    let mut result =
        ExperimentResult::new(&["resample", "seed", "count", "model", "arm", "mse"]);

    // Baseline: the full pool, plus (for the MLP) the source model that
    // warm starts every transfer arm.
    let source_model: Option<MlpModel> = match config.model {
        TransferModel::Linear => None,
        TransferModel::Mlp => {
            let init = MlpModel::new_random(
                scenario.building1.feature_dim(),
                scenario.building1.output_dim(),
                derive_seed(seed, 1),
            )?;
            Some(mlp_fit(
                &scenario.building1,
                &init,
                config.mlp.learn_rate,
                config.mlp.epochs,
                config.mlp.batch,
                derive_seed(seed, 2),
            )?)
        }
    };
    let baseline_mse = match config.model {
        TransferModel::Linear => mse(&fit_ls(&pool, &fit_config)?, &valid)?,
        TransferModel::Mlp => {
            let init = MlpModel::new_random(
                pool.feature_dim(),
                pool.output_dim(),
                derive_seed(seed, 3),
            )?;
            let trained = mlp_fit(
                &pool,
                &init,
                config.mlp.learn_rate,
                config.mlp.epochs,
                config.mlp.batch,
                derive_seed(seed, 4),
            )?;
            mlp_mse(&trained, &valid)?
        }
    };
    result.push(vec![
        String::new(),
        seed.to_string(),
        pool_len.to_string(),
        model_name.clone(),
        "baseline".into(),
        baseline_mse.to_string(),
    ]);

    struct Task {
        count_index: usize,
        count: usize,
        resample: usize,
    }
    let tasks: Vec<Task> = config
        .sample_counts
        .iter()
        .enumerate()
        .flat_map(|(count_index, &count)| {
            (0..config.resamples).map(move |resample| Task {
                count_index,
                count,
                resample,
            })
        })
        .collect();

    let rows: Vec<[Vec<String>; 2]> = tasks
        .par_iter()
        .map(|task| -> Result<[Vec<String>; 2]> {
            let task_seed = derive_seed(
                seed,
                10 + (task.count_index * config.resamples + task.resample) as u64,
            );
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(task_seed, 0));
            let start = rng.random_range(0..=pool_len - task.count);
            let train = pool.window(start, task.count)?;
            let (scratch_arm, scratch_mse, transfer_arm, transfer_mse) = match config.model {
                TransferModel::Linear => {
                    let scratch = fit_ls(&train, &fit_config)?;
                    let transfer =
                        fit_wls(&scenario.building1, &train, &config.weights, &fit_config)?;
                    (
                        "scratch",
                        mse(&scratch, &valid)?,
                        "transfer",
                        mse(&transfer, &valid)?,
                    )
                }
                TransferModel::Mlp => {
                    let cold_init = MlpModel::new_random(
                        train.feature_dim(),
                        train.output_dim(),
                        derive_seed(task_seed, 1),
                    )?;
                    let cold = mlp_fit(
                        &train,
                        &cold_init,
                        config.mlp.learn_rate,
                        config.mlp.epochs,
                        config.mlp.batch,
                        derive_seed(task_seed, 2),
                    )?;
                    let warm = mlp_fit(
                        &train,
                        source_model.as_ref().expect("mlp arm has a source model"),
                        config.mlp.learn_rate,
                        config.mlp.epochs,
                        config.mlp.batch,
                        derive_seed(task_seed, 3),
                    )?;
                    (
                        "cold",
                        mlp_mse(&cold, &valid)?,
                        "warm",
                        mlp_mse(&warm, &valid)?,
                    )
                }
            };
            let row = |arm: &str, value: f64| {
                vec![
                    task.resample.to_string(),
                    task_seed.to_string(),
                    task.count.to_string(),
                    model_name.clone(),
                    arm.to_string(),
                    value.to_string(),
                ]
            };
            Ok([row(scratch_arm, scratch_mse), row(transfer_arm, transfer_mse)])
        })
        .collect::<Result<_>>()?;
    for [scratch, transfer] in rows {
        result.push(scratch);
        result.push(transfer);
    }
    Ok(result)
}

// ---------------------------------------------------------------------
// Fault classification study
// ---------------------------------------------------------------------

/// Parameters of the two-stage fault study.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultStudyConfig {
    pub spec: ScenarioSpec,
    /// Pairs per classification window.
    pub window: usize,
    /// WLS weights of the source→target transfer stage.
    pub weights: WlsWeights,
    pub ridge_alpha: f64,
    /// Leading target-building samples reserved for the WLS refit.
    pub target_train_samples: usize,
    pub logistic_learn_rate: f64,
    pub logistic_epochs: usize,
}

/// Stage 1 ("source"): fit Â₁ on the first half of building-1 normal
/// data, window-sum classifier features over normal and faulted building-1
/// data, train the logistic classifier on the first half of windows, and
/// score the second half. Stage 2 ("transferred"): refit by WLS against
/// `target_train_samples` of building-2 data and repeat on building 2.
/// Emits per-window ±1 decision rows plus precision/recall summary rows.
pub fn fault_study(config: &FaultStudyConfig, seed: u64) -> Result<ExperimentResult> {
    if config.window == 0 {
        return Err(Error::InvalidInput("window must be >= 1".into()));
    }
    if config.target_train_samples == 0 {
        return Err(Error::InvalidInput("target_train_samples must be >= 1".into()));
    }
    if config.target_train_samples >= config.spec.target_samples {
        return Err(Error::InvalidInput(format!(
            "target_train_samples ({}) must leave validation data out of target_samples ({})",
            config.target_train_samples, config.spec.target_samples
        )));
    }
    let fit_config = FitConfig::new(config.ridge_alpha)?.with_kernel(config.spec.kernel);
    let scenario: Scenario = generate_scenario(&config.spec, derive_seed(seed, 0))?;
    let kernel = &config.spec.kernel;
    let (a1, _, _) = &scenario.truth;

    let mut result =
        ExperimentResult::new(&["stage", "seed", "window", "truth", "metric", "value"]);

    // Source stage: building 1 against its own faulted twin.
    let t1 = scenario.building1.len();
    let half = t1 / 2;
    if half == 0 {
        return Err(Error::InvalidInput(format!(
            "building-1 dataset of {t1} samples is too small to fit on"
        )));
    }
    let a1_fault = perturb_matrix(a1, config.spec.fault_sigma, derive_seed(seed, 1))?;
    let building1_fault = synthesize_dataset(
        &a1_fault,
        kernel,
        t1,
        config.spec.noise_scale,
        derive_seed(seed, 2),
    )?;
    let a1_hat = fit_ls(&scenario.building1.window(0, half)?, &fit_config)?;
    run_stage(
        &mut result,
        "source",
        &a1_hat,
        &scenario.building1,
        &building1_fault,
        config,
        derive_seed(seed, 3),
    )?;

    // Transferred stage: WLS refit toward building 2, evaluated on fresh
    // building-2 normal and faulted data.
    let target_train = scenario.building2.window(0, config.target_train_samples)?;
    let target_rest = scenario.building2.window(
        config.target_train_samples,
        scenario.building2.len() - config.target_train_samples,
    )?;
    let a2_hat = fit_wls(&scenario.building1, &target_train, &config.weights, &fit_config)?;
    run_stage(
        &mut result,
        "transferred",
        &a2_hat,
        &target_rest,
        &scenario.building2_fault,
        config,
        derive_seed(seed, 4),
    )?;
    Ok(result)
}

/// Shared body of both fault-study stages: features → windows → split →
/// standardize → logistic → per-window trace + precision/recall rows.
fn run_stage(
    result: &mut ExperimentResult,
    stage: &str,
    a_hat: &TransitionMatrix,
    normal: &Dataset,
    fault: &Dataset,
    config: &FaultStudyConfig,
    stage_seed: u64,
) -> Result<()> {
    let normal_windows = window_features(
        &extract_features_dataset(normal, a_hat)?,
        config.window,
    );
    let fault_windows = window_features(
        &extract_features_dataset(fault, a_hat)?,
        config.window,
    );
    let train_n = normal_windows.len() / 2;
    let train_f = fault_windows.len() / 2;
    if train_n == 0
        || train_f == 0
        || normal_windows.len() - train_n == 0
        || fault_windows.len() - train_f == 0
    {
        return Err(Error::InvalidInput(format!(
            "stage '{stage}' has too few windows to split: {} normal, {} fault",
            normal_windows.len(),
            fault_windows.len()
        )));
    }

    let mut train_features: Vec<ClassifierFeatures> = Vec::with_capacity(train_n + train_f);
    train_features.extend_from_slice(&normal_windows[..train_n]);
    train_features.extend_from_slice(&fault_windows[..train_f]);
    let mut train_labels = vec![Label::Normal; train_n];
    train_labels.extend(std::iter::repeat_n(Label::Fault, train_f));

    let scaler = FeatureScaler::fit(&train_features);
    let scaled_train: Vec<ClassifierFeatures> =
        train_features.iter().map(|f| scaler.apply(f)).collect();
    let model = train_logistic(
        &scaled_train,
        &train_labels,
        config.logistic_learn_rate,
        config.logistic_epochs,
        stage_seed,
    )?;

    let mut confusion = Confusion::default();
    let mut window_index = 0usize;
    for (truth, windows) in [
        (Label::Normal, &normal_windows[train_n..]),
        (Label::Fault, &fault_windows[train_f..]),
    ] {
        for features in windows {
            let (_, predicted) = predict_logistic(&model, &scaler.apply(features));
            confusion.record(truth, predicted);
            result.push(vec![
                stage.to_string(),
                stage_seed.to_string(),
                window_index.to_string(),
                format_signum(truth),
                "decision".into(),
                format_signum(predicted),
            ]);
            window_index += 1;
        }
    }
    for (metric, value) in [
        ("precision", confusion.precision()),
        ("recall", confusion.recall()),
    ] {
        result.push(vec![
            stage.to_string(),
            stage_seed.to_string(),
            String::new(),
            String::new(),
            metric.into(),
            value.to_string(),
        ]);
    }
    Ok(())
}

fn format_signum(label: Label) -> String {
    if label == Label::Fault {
        "1".into()
    } else {
        "-1".into()
    }
}

/// Per-component z-score standardization fitted on training windows.
/// Zero-variance components pass through unscaled.
struct FeatureScaler {
    mean: [f64; 3],
    sd: [f64; 3],
}

impl FeatureScaler {
    fn fit(features: &[ClassifierFeatures]) -> FeatureScaler {
        let count = features.len().max(1) as f64;
        let mut mean = [0.0; 3];
        for f in features {
            for (m, v) in mean.iter_mut().zip(f.to_array()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut var = [0.0; 3];
        for f in features {
            for ((v, m), value) in var.iter_mut().zip(mean).zip(f.to_array()) {
                *v += (value - m).powi(2);
            }
        }
        let mut sd = [0.0; 3];
        for (s, v) in sd.iter_mut().zip(var) {
            *s = (v / count).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        FeatureScaler { mean, sd }
    }

    fn apply(&self, f: &ClassifierFeatures) -> ClassifierFeatures {
        ClassifierFeatures {
            residual_trace: (f.residual_trace - self.mean[0]) / self.sd[0],
            cross_trace: (f.cross_trace - self.mean[1]) / self.sd[1],
            logdet_term: (f.logdet_term - self.mean[2]) / self.sd[2],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelConfig;

    fn mean(values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    fn small_spec() -> ScenarioSpec {
        ScenarioSpec {
            kernel: KernelConfig::new(1, 7, 2).unwrap(),
            matrix_seed: 0,
            drift: 0.05,
            fault_sigma: 1.0,
            source_samples: 720,
            target_samples: 288,
            fault_samples: 1,
            noise_scale: 1.0,
        }
    }

    #[test]
    fn confusion_conventions() {
        let empty = Confusion::default();
        assert_eq!(empty.precision(), 0.0);
        assert_eq!(empty.recall(), 0.0);
        assert_eq!(empty.f1(), 0.0);
        let mut perfect = Confusion::default();
        perfect.record(Label::Fault, Label::Fault);
        perfect.record(Label::Normal, Label::Normal);
        assert_eq!(perfect.f1(), 1.0);
        let mut half = Confusion::default();
        half.record(Label::Fault, Label::Fault);
        half.record(Label::Fault, Label::Normal);
        half.record(Label::Normal, Label::Fault);
        assert_eq!(half.precision(), 0.5);
        assert_eq!(half.recall(), 0.5);
        assert_eq!(half.f1(), 0.5);
    }

    #[test]
    fn mc_f1_is_deterministic_with_expected_shape() {
        let config = McF1Config {
            trials: 4,
            samples: 50,
            lags: vec![1, 5],
            sigma: 1.0,
            noise_scale: 1.0,
        };
        let r1 = mc_f1(&config, 99).unwrap();
        let r2 = mc_f1(&config, 99).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.rows().len(), 4 * 2);
        assert_eq!(
            r1.columns(),
            &["trial", "seed", "frob", "lag", "f1"].map(String::from)
        );
        for f1 in r1.values("f1", &[]).unwrap() {
            assert!((0.0..=1.0).contains(&f1));
        }
        let r3 = mc_f1(&config, 100).unwrap();
        assert_ne!(r1, r3);
    }

    #[test]
    fn mc_f1_sigma_zero_gives_zero_divergence() {
        let config = McF1Config {
            trials: 3,
            samples: 40,
            lags: vec![1],
            sigma: 0.0,
            noise_scale: 1.0,
        };
        let result = mc_f1(&config, 7).unwrap();
        for frob in result.values("frob", &[]).unwrap() {
            assert_eq!(frob, 0.0);
        }
    }

    #[test]
    fn mc_f1_sigma_zero_is_indistinguishable_from_coin_flips() {
        let config = McF1Config {
            trials: 100,
            samples: 60,
            lags: vec![1],
            sigma: 0.0,
            noise_scale: 1.0,
        };
        let result = mc_f1(&config, 29).unwrap();
        let mean_f1 = mean(&result.values("f1", &[("lag", "1")]).unwrap());
        assert!(
            (0.3..=0.7).contains(&mean_f1),
            "identical generators should classify at chance level, got mean F1 {mean_f1}"
        );
    }

    #[test]
    fn mc_f1_mean_f1_rises_with_lag_under_strong_divergence() {
        let config = McF1Config {
            trials: 60,
            samples: 400,
            lags: vec![1, 5, 10],
            sigma: 1.0,
            noise_scale: 1.0,
        };
        let result = mc_f1(&config, 1234).unwrap();
        let mut means = Vec::new();
        for lag in ["1", "5", "10"] {
            means.push(mean(&result.values("f1", &[("lag", lag)]).unwrap()));
        }
        assert!(
            means[1] >= means[0] - 0.02 && means[2] >= means[1] - 0.02,
            "per-lag means must be non-decreasing (0.02 slack): {means:?}"
        );
    }

    #[test]
    fn mc_f1_rejects_bad_configs() {
        let base = McF1Config::default();
        assert!(mc_f1(&McF1Config { trials: 0, ..base.clone() }, 0).is_err());
        assert!(mc_f1(&McF1Config { lags: vec![], ..base.clone() }, 0).is_err());
        assert!(mc_f1(&McF1Config { lags: vec![0], ..base.clone() }, 0).is_err());
        assert!(
            mc_f1(&McF1Config { samples: 5, lags: vec![10], ..base }, 0).is_err(),
            "samples below the largest lag must be rejected"
        );
    }

    #[test]
    fn transfer_scratch_on_the_full_pool_matches_the_baseline() {
        let spec = ScenarioSpec {
            target_samples: 48,
            ..small_spec()
        };
        let config = TransferCurveConfig {
            spec,
            sample_counts: vec![24],
            resamples: 2,
            model: TransferModel::Linear,
            weights: WlsWeights::new(0.01, 10.0).unwrap(),
            ridge_alpha: 0.5,
            mlp: MlpHyper::default(),
        };
        let result = transfer_curve(&config, 5).unwrap();
        let baseline = result.values("mse", &[("arm", "baseline")]).unwrap();
        assert_eq!(baseline.len(), 1);
        let scratch = result
            .values("mse", &[("arm", "scratch"), ("count", "24")])
            .unwrap();
        assert_eq!(scratch.len(), 2);
        for m in scratch {
            assert!(
                (m - baseline[0]).abs() <= 1e-10,
                "full-pool scratch {m} vs baseline {}",
                baseline[0]
            );
        }
    }

    #[test]
    fn transfer_beats_scratch_at_small_counts() {
        let config = TransferCurveConfig {
            spec: small_spec(),
            sample_counts: vec![24],
            resamples: 20,
            model: TransferModel::Linear,
            weights: WlsWeights::new(0.01, 10.0).unwrap(),
            ridge_alpha: 0.5,
            mlp: MlpHyper::default(),
        };
        let result = transfer_curve(&config, 11).unwrap();
        let scratch = mean(&result.values("mse", &[("arm", "scratch")]).unwrap());
        let transfer = mean(&result.values("mse", &[("arm", "transfer")]).unwrap());
        assert!(
            transfer < scratch,
            "transfer mean {transfer} should beat scratch mean {scratch} at count 24"
        );
    }

    #[test]
    fn warm_start_beats_cold_at_small_counts() {
        let config = TransferCurveConfig {
            spec: small_spec(),
            sample_counts: vec![48],
            resamples: 8,
            model: TransferModel::Mlp,
            weights: WlsWeights::new(0.01, 10.0).unwrap(),
            ridge_alpha: 0.5,
            mlp: MlpHyper::default(),
        };
        let result = transfer_curve(&config, 21).unwrap();
        let cold = mean(&result.values("mse", &[("arm", "cold")]).unwrap());
        let warm = mean(&result.values("mse", &[("arm", "warm")]).unwrap());
        assert!(
            warm <= cold,
            "warm-start mean {warm} should not lose to cold mean {cold}"
        );
        // Model column is stamped on every row.
        assert_eq!(
            result.values("mse", &[("model", "mlp")]).unwrap().len(),
            result.rows().len()
        );
    }

    #[test]
    fn transfer_curve_is_deterministic_and_validates_inputs() {
        let config = TransferCurveConfig {
            spec: ScenarioSpec {
                target_samples: 96,
                source_samples: 96,
                ..small_spec()
            },
            sample_counts: vec![12, 24],
            resamples: 3,
            model: TransferModel::Linear,
            weights: WlsWeights::new(0.01, 10.0).unwrap(),
            ridge_alpha: 0.5,
            mlp: MlpHyper::default(),
        };
        let r1 = transfer_curve(&config, 42).unwrap();
        let r2 = transfer_curve(&config, 42).unwrap();
        assert_eq!(r1.to_csv_string(), r2.to_csv_string());
        // 1 baseline + 2 counts × 3 resamples × 2 arms.
        assert_eq!(r1.rows().len(), 1 + 12);

        let unsorted = TransferCurveConfig {
            sample_counts: vec![24, 12],
            ..config.clone()
        };
        assert!(transfer_curve(&unsorted, 0).is_err());
        let too_big = TransferCurveConfig {
            sample_counts: vec![1000],
            ..config.clone()
        };
        assert!(transfer_curve(&too_big, 0).is_err());
        let no_resamples = TransferCurveConfig {
            resamples: 0,
            ..config
        };
        assert!(transfer_curve(&no_resamples, 0).is_err());
    }

    fn fault_config(fault_sigma: f64, source_samples: usize) -> FaultStudyConfig {
        FaultStudyConfig {
            spec: ScenarioSpec {
                kernel: KernelConfig::new(1, 7, 2).unwrap(),
                matrix_seed: 0,
                drift: 0.05,
                fault_sigma,
                source_samples,
                target_samples: 336 + 2000,
                fault_samples: 2000,
                noise_scale: 1.0,
            },
            window: 10,
            weights: WlsWeights::new(0.01, 10.0).unwrap(),
            ridge_alpha: 0.5,
            target_train_samples: 336,
            logistic_learn_rate: 0.5,
            logistic_epochs: 500,
        }
    }

    #[test]
    fn fault_study_separates_a_strong_fault() {
        let result = fault_study(&fault_config(1.0, 4000), 3).unwrap();
        for stage in ["source", "transferred"] {
            let precision =
                result.values("value", &[("stage", stage), ("metric", "precision")]).unwrap();
            let recall =
                result.values("value", &[("stage", stage), ("metric", "recall")]).unwrap();
            assert_eq!(precision.len(), 1);
            assert_eq!(recall.len(), 1);
            assert!(
                precision[0] >= 0.9 && recall[0] >= 0.9,
                "{stage}: precision {} recall {}",
                precision[0],
                recall[0]
            );
        }
    }

    #[test]
    fn fault_study_transfer_preserves_classifier_quality() {
        // Under matched drift (0.05), the transferred stage's rates stay
        // within 0.1 of the source-trained stage's.
        let result = fault_study(&fault_config(1.0, 20_000), 0).unwrap();
        for metric in ["precision", "recall"] {
            let source =
                result.values("value", &[("stage", "source"), ("metric", metric)]).unwrap()[0];
            let transferred = result
                .values("value", &[("stage", "transferred"), ("metric", metric)])
                .unwrap()[0];
            assert!(
                (source - transferred).abs() <= 0.1,
                "{metric}: source {source} vs transferred {transferred}"
            );
        }
    }

    #[test]
    fn fault_study_null_sits_near_coin_flip() {
        let result = fault_study(&fault_config(0.0, 8000), 13).unwrap();
        let precision =
            result.values("value", &[("stage", "source"), ("metric", "precision")]).unwrap()[0];
        let recall =
            result.values("value", &[("stage", "source"), ("metric", "recall")]).unwrap()[0];
        assert!(
            (precision - 0.5).abs() <= 0.15 && (recall - 0.5).abs() <= 0.15,
            "null precision {precision} recall {recall}"
        );
    }

    #[test]
    fn fault_study_rows_are_deterministic_and_well_formed() {
        let config = fault_config(1.0, 600);
        let r1 = fault_study(&config, 8).unwrap();
        let r2 = fault_study(&config, 8).unwrap();
        assert_eq!(r1.to_csv_string(), r2.to_csv_string());
        // Decision rows carry ±1 in both truth and value.
        let decisions = r1.values("value", &[("metric", "decision")]).unwrap();
        assert!(!decisions.is_empty());
        for d in decisions {
            assert!(d == 1.0 || d == -1.0);
        }
        for truth in r1.values("truth", &[("metric", "decision")]).unwrap() {
            assert!(truth == 1.0 || truth == -1.0);
        }
        // Summary rows exist for both stages and lie in [0, 1].
        for stage in ["source", "transferred"] {
            for metric in ["precision", "recall"] {
                let v = r1.values("value", &[("stage", stage), ("metric", metric)]).unwrap();
                assert_eq!(v.len(), 1, "{stage}/{metric}");
                assert!((0.0..=1.0).contains(&v[0]));
            }
        }
    }

    #[test]
    fn fault_study_rejects_degenerate_configs() {
        let good = fault_config(1.0, 600);
        let no_window = FaultStudyConfig { window: 0, ..good.clone() };
        assert!(fault_study(&no_window, 0).is_err());
        let no_valid = FaultStudyConfig {
            target_train_samples: good.spec.target_samples,
            ..good.clone()
        };
        assert!(fault_study(&no_valid, 0).is_err());
        let too_coarse = FaultStudyConfig { window: 100_000, ..good };
        assert!(fault_study(&too_coarse, 0).is_err());
    }

    #[test]
    fn experiment_result_round_trips_through_disk() {
        let mut result = ExperimentResult::new(&["a", "b"]);
        result.push(vec!["1".into(), "2.5".into()]);
        result.push(vec!["3".into(), "-0.25".into()]);
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("result.csv");
        result.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1,2.5\n3,-0.25\n");
        assert_eq!(text, result.to_csv_string());
        assert_eq!(result.values("b", &[("a", "3")]).unwrap(), vec![-0.25]);
        assert!(result.values("c", &[]).is_err());
    }
}
