//! Command-line surface: thin wrappers (`simulate`, `fit`, `classify`)
//! plus the three experiment harnesses (`mc-f1`, `transfer-curve`,
//! `fault-study`).
//!
//! Every command takes `--seed`, `--out`, and an optional `--config`
//! pointing at a flat key=value file; unknown keys are rejected so typos
//! fail loudly. Commands are pure functions of (flags, input files, seed):
//! reruns produce byte-identical outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::bayes::classify_sequence;
use crate::data::{
    build_dataset, load_csv, normalize, write_csv, NormalizationParams, RawTable, ScenarioSpec,
};
use crate::error::{Error, Result};
use crate::estimation::{fit_ls, FitConfig, WlsWeights};
use crate::experiments::{
    fault_study, mc_f1, transfer_curve, FaultStudyConfig, McF1Config, MlpHyper,
    TransferCurveConfig, TransferModel,
};
use crate::kernel::{derive_seed, featurize, KernelConfig, TransitionMatrix};

#[derive(Debug, Parser)]
#[command(
    name = "faultline",
    version,
    about = "Bayesian fault classification and model transfer for kernelized linear state-transition models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Master seed; every random draw derives deterministically from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file path.
    #[arg(long)]
    pub out: PathBuf,
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out a synthetic telemetry table under a (given or generated)
    /// transition matrix.
    Simulate(CommonArgs),
    /// Fit a transition matrix to a telemetry CSV by kernel ridge least
    /// squares.
    Fit(CommonArgs),
    /// Classify windows of a telemetry CSV against a fitted matrix.
    Classify(CommonArgs),
    /// Monte Carlo F1-vs-divergence study of the 2x2 system (Fig. 1 data).
    #[command(name = "mc-f1")]
    McF1(CommonArgs),
    /// Transfer sample-efficiency curve on a synthetic building pair
    /// (Figs. 2-3 data).
    #[command(name = "transfer-curve")]
    TransferCurve(CommonArgs),
    /// Two-stage fault-classification study (Fig. 4 data).
    #[command(name = "fault-study")]
    FaultStudy(CommonArgs),
}

/// Entry point behind `main`: dispatch a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Classify(args) => cmd_classify(&args),
        Command::McF1(args) => cmd_mc_f1(&args),
        Command::TransferCurve(args) => cmd_transfer_curve(&args),
        Command::FaultStudy(args) => cmd_fault_study(&args),
    }
}

// ---------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------

/// A flat key=value config file. Blank lines and `#` comments are
/// ignored; keys may not repeat; every key must belong to the command's
/// allowed set.
struct Config {
    origin: String,
    entries: BTreeMap<String, String>,
}

impl Config {
    fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config {
                origin: "<defaults>".into(),
                entries: BTreeMap::new(),
            });
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    row: i + 1,
                    column: 1,
                    message: format!("expected key=value, got '{line}'"),
                });
            };
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    row: i + 1,
                    column: 1,
                    message: format!("duplicate config key '{key}'"),
                });
            }
        }
        Ok(Config {
            origin: path.display().to_string(),
            entries,
        })
    }

    fn ensure_known(&self, command: &str, allowed: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "{}: unknown config key '{key}' for '{command}'; allowed keys: {}",
                    self.origin,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn str_opt(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}: config key '{key}' cannot parse '{raw}' as {}",
                    self.origin,
                    std::any::type_name::<T>()
                ))
            }),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.entries.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(Error::InvalidInput(format!(
                "{}: config key '{key}' must be true or false, got '{other}'",
                self.origin
            ))),
        }
    }

    fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.entries.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|part| {
                    part.trim().parse().map_err(|_| {
                        Error::InvalidInput(format!(
                            "{}: config key '{key}' holds non-integer '{part}'",
                            self.origin
                        ))
                    })
                })
                .collect(),
        }
    }

    fn string_list(&self, key: &str) -> Option<Vec<String>> {
        self.entries.get(key).map(|raw| {
            raw.split(',')
                .map(|part| part.trim().to_string())
                .filter(|part| !part.is_empty())
                .collect()
        })
    }
}

// ---------------------------------------------------------------------
// Matrix files
// ---------------------------------------------------------------------

/// A fitted matrix's featurization provenance: the base kernel and the
/// stacking window the features were built with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixMeta {
    pub kernel: KernelConfig,
    pub window: usize,
}

/// Write a matrix as headered CSV with a one-line dimension preamble:
/// `# rows=R cols=C kernel=n,k,d window=w` (or `kernel=none`), then a
/// `c0..c{C-1}` header and one row per matrix row.
pub fn write_matrix_file(
    path: &Path,
    matrix: &TransitionMatrix,
    meta: Option<MatrixMeta>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);
    let kernel_token = match meta {
        Some(meta) => format!(
            "kernel={},{},{} window={}",
            meta.kernel.n(),
            meta.kernel.k(),
            meta.kernel.d(),
            meta.window
        ),
        None => "kernel=none".into(),
    };
    let entries = matrix.entries();
    writeln!(
        out,
        "# rows={} cols={} {kernel_token}",
        entries.nrows(),
        entries.ncols()
    )
    .map_err(io_err)?;
    let header: Vec<String> = (0..entries.ncols()).map(|j| format!("c{j}")).collect();
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for i in 0..entries.nrows() {
        let row: Vec<String> = (0..entries.ncols())
            .map(|j| entries[(i, j)].to_string())
            .collect();
        writeln!(out, "{}", row.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Read a matrix file written by [`write_matrix_file`]. When the preamble
/// names a kernel, the returned meta describes how to rebuild features;
/// the matrix itself carries the kernel config only in the window-1 case
/// (stacked fits are n × p_stacked and fit no single config).
pub fn read_matrix_file(path: &Path) -> Result<(TransitionMatrix, Option<MatrixMeta>)> {
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        row,
        column: 1,
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let preamble = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty matrix file".into()))?;
    let Some(preamble) = preamble.strip_prefix('#') else {
        return Err(parse_err(
            0,
            "matrix file must start with a '# rows=.. cols=..' preamble".into(),
        ));
    };
    let mut rows: Option<usize> = None;
    let mut cols: Option<usize> = None;
    let mut kernel: Option<KernelConfig> = None;
    let mut window: usize = 1;
    for token in preamble.split_whitespace() {
        let Some((key, value)) = token.split_once('=') else {
            return Err(parse_err(0, format!("bad preamble token '{token}'")));
        };
        match key {
            "rows" => rows = Some(parse_preamble_int(value, token, path)?),
            "cols" => cols = Some(parse_preamble_int(value, token, path)?),
            "window" => window = parse_preamble_int(value, token, path)?,
            "kernel" => {
                if value != "none" {
                    let parts: Vec<usize> = value
                        .split(',')
                        .map(|v| parse_preamble_int(v, token, path))
                        .collect::<Result<_>>()?;
                    if parts.len() != 3 {
                        return Err(parse_err(
                            0,
                            format!("kernel must be 'none' or 'n,k,d', got '{value}'"),
                        ));
                    }
                    kernel = Some(KernelConfig::new(parts[0], parts[1], parts[2])?);
                }
            }
            other => return Err(parse_err(0, format!("unknown preamble key '{other}'"))),
        }
    }
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) => (r, c),
        _ => return Err(parse_err(0, "preamble must declare rows= and cols=".into())),
    };
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing column header".into()))?;
    let header_len = header.split(',').count();
    if header_len != cols {
        return Err(parse_err(
            1,
            format!("header has {header_len} columns, preamble declared {cols}"),
        ));
    }
    let mut entries = Vec::with_capacity(rows * cols);
    let mut data_rows = 0usize;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(parse_err(
                i + 2,
                format!("expected {cols} fields, got {}", fields.len()),
            ));
        }
        for field in fields {
            let value: f64 = field.trim().parse().map_err(|_| {
                parse_err(i + 2, format!("expected a real number, got '{field}'"))
            })?;
            entries.push(value);
        }
        data_rows += 1;
    }
    if data_rows != rows {
        return Err(parse_err(
            data_rows + 1,
            format!("expected {rows} data rows, got {data_rows}"),
        ));
    }
    let entries = DMatrix::from_row_slice(rows, cols, &entries);
    match kernel {
        Some(base) => {
            let stacked = base.stacked(window)?;
            if rows != base.n() || cols != stacked.p() {
                return Err(Error::DimensionMismatch {
                    what: "matrix file",
                    expected: format!(
                        "{}x{} for kernel ({},{},{}) at window {window}",
                        base.n(),
                        stacked.p(),
                        base.n(),
                        base.k(),
                        base.d()
                    ),
                    actual: format!("{rows}x{cols}"),
                });
            }
            let matrix = if window == 1 {
                TransitionMatrix::new(entries, base)?
            } else {
                TransitionMatrix::raw(entries)?
            };
            Ok((
                matrix,
                Some(MatrixMeta {
                    kernel: base,
                    window,
                }),
            ))
        }
        None => Ok((TransitionMatrix::raw(entries)?, None)),
    }
}

fn parse_preamble_int(value: &str, token: &str, path: &Path) -> Result<usize> {
    value.parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        row: 0,
        column: 1,
        message: format!("non-integer preamble value in '{token}'"),
    })
}

// ---------------------------------------------------------------------
// simulate / fit / classify
// ---------------------------------------------------------------------

fn cmd_simulate(args: &CommonArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.ensure_known(
        "simulate",
        &["n", "k", "degree", "samples", "noise", "matrix", "truth_out"],
    )?;
    let n: usize = config.parse_or("n", 1)?;
    let k: usize = config.parse_or("k", 7)?;
    let degree: usize = config.parse_or("degree", 1)?;
    let samples: usize = config.parse_or("samples", 720)?;
    let noise: f64 = config.parse_or("noise", 0.05)?;
    if samples < 2 {
        return Err(Error::InvalidInput(format!(
            "samples must be >= 2, got {samples}"
        )));
    }
    let kernel = KernelConfig::new(n, k, degree)?;
    let matrix = match config.str_opt("matrix") {
        Some(path) => {
            let (matrix, _) = read_matrix_file(Path::new(path))?;
            if matrix.output_dim() != n || matrix.feature_dim() != kernel.p() {
                return Err(Error::DimensionMismatch {
                    what: "simulation matrix",
                    expected: format!("{n}x{}", kernel.p()),
                    actual: format!("{}x{}", matrix.output_dim(), matrix.feature_dim()),
                });
            }
            matrix
        }
        None => {
            // Entries uniform in ±0.9/p keep the degree-1 rollout stable;
            // higher degrees should supply a matrix known to be stable.
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 0));
            let scale = 0.9 / kernel.p() as f64;
            let unit = Uniform::new_inclusive(-1.0, 1.0)
                .map_err(|e| Error::Numerical(format!("uniform init: {e}")))?;
            let entries = DMatrix::from_fn(n, kernel.p(), |_, _| unit.sample(&mut rng) * scale);
            TransitionMatrix::new(entries, kernel)?
        }
    };

    let mut input_rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 1));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 2));
    let mut values = DMatrix::zeros(samples, n + k);
    let mut x = DVector::zeros(n);
    for t in 0..samples {
        let u = DVector::from_fn(k, |_, _| {
            let z: f64 = StandardNormal.sample(&mut input_rng);
            z
        });
        for i in 0..n {
            values[(t, i)] = x[i];
        }
        for j in 0..k {
            values[(t, n + j)] = u[j];
        }
        let features = featurize(&x, &u, &kernel)?;
        let mut next = matrix.entries() * features;
        if noise > 0.0 {
            for v in next.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                *v += noise * z;
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "simulation diverged at step {t}: non-finite state"
            )));
        }
        x = next;
    }
    let mut columns = Vec::with_capacity(n + k);
    for i in 0..n {
        columns.push(format!("x{}", i + 1));
    }
    for j in 0..k {
        columns.push(format!("u{}", j + 1));
    }
    let table = RawTable::new(columns, (0..samples as i64).collect(), values)?;
    write_csv(&args.out, &table)?;
    if let Some(path) = config.str_opt("truth_out") {
        write_matrix_file(
            Path::new(path),
            &matrix,
            Some(MatrixMeta { kernel, window: 1 }),
        )?;
    }
    Ok(())
}

fn required_columns(config: &Config, key: &str, command: &str) -> Result<Vec<String>> {
    config
        .string_list(key)
        .filter(|list| !list.is_empty())
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "'{command}' needs the config key '{key}' (comma-separated column names)"
            ))
        })
}

fn cmd_fit(args: &CommonArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.ensure_known(
        "fit",
        &[
            "data",
            "dependent",
            "independent",
            "degree",
            "window",
            "alpha",
            "normalize",
            "params_out",
            "embed_time",
        ],
    )?;
    let data_path = config
        .str_opt("data")
        .ok_or_else(|| Error::InvalidInput("'fit' needs the config key 'data'".into()))?;
    let dependent = required_columns(&config, "dependent", "fit")?;
    let mut independent = config.string_list("independent").unwrap_or_default();
    let degree: usize = config.parse_or("degree", 1)?;
    let window: usize = config.parse_or("window", 1)?;
    let alpha: f64 = config.parse_or("alpha", 0.0)?;

    let mut table = load_csv(Path::new(data_path))?;
    if config.bool_or("embed_time", false)? {
        table = table.with_time_embedding()?;
        for name in ["time_hour_cos", "time_hour_sin", "time_dow_cos", "time_dow_sin"] {
            independent.push(name.to_string());
        }
    }
    if config.bool_or("normalize", false)? {
        let (normalized, params) = normalize(&table, None)?;
        table = normalized;
        if let Some(path) = config.str_opt("params_out") {
            params.save(Path::new(path))?;
        }
    } else if config.str_opt("params_out").is_some() {
        return Err(Error::InvalidInput(
            "params_out only makes sense with normalize=true".into(),
        ));
    }
    let kernel = KernelConfig::new(dependent.len(), independent.len(), degree)?;
    let dataset = build_dataset(&table, &dependent, &independent, &kernel, window)?;
    // Stacked fits are n × p_stacked and fit no single kernel config;
    // the matrix file preamble records (kernel, window) instead.
    let fit_config = if window == 1 {
        FitConfig::new(alpha)?.with_kernel(kernel)
    } else {
        FitConfig::new(alpha)?
    };
    let fitted = fit_ls(&dataset, &fit_config)?;
    write_matrix_file(&args.out, &fitted, Some(MatrixMeta { kernel, window }))
}

fn cmd_classify(args: &CommonArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.ensure_known(
        "classify",
        &["matrix", "data", "dependent", "independent", "params", "window"],
    )?;
    let matrix_path = config
        .str_opt("matrix")
        .ok_or_else(|| Error::InvalidInput("'classify' needs the config key 'matrix'".into()))?;
    let data_path = config
        .str_opt("data")
        .ok_or_else(|| Error::InvalidInput("'classify' needs the config key 'data'".into()))?;
    let dependent = required_columns(&config, "dependent", "classify")?;
    let independent = config.string_list("independent").unwrap_or_default();
    let window: usize = config.parse_or("window", 1)?;
    if window == 0 {
        return Err(Error::InvalidInput("window must be >= 1".into()));
    }

    let (matrix, meta) = read_matrix_file(Path::new(matrix_path))?;
    let meta = meta.ok_or_else(|| {
        Error::InvalidInput(format!(
            "{matrix_path}: matrix has no kernel preamble; classify needs a featurized fit"
        ))
    })?;
    let mut table = load_csv(Path::new(data_path))?;
    if let Some(params_path) = config.str_opt("params") {
        let params = NormalizationParams::load(Path::new(params_path))?;
        let (normalized, _) = normalize(&table, Some(&params))?;
        table = normalized;
    }
    let dataset = build_dataset(&table, &dependent, &independent, &meta.kernel, meta.window)?;

    let file = File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(&args.out, e);
    writeln!(out, "window,value,decision").map_err(io_err)?;
    let count = dataset.len() / window;
    if count == 0 {
        return Err(Error::InvalidInput(format!(
            "dataset yields {} pairs, fewer than one window of {window}",
            dataset.len()
        )));
    }
    for w in 0..count {
        let ratio = classify_sequence(&dataset.window(w * window, window)?, &matrix)?;
        writeln!(out, "{w},{},{}", ratio.value, ratio.decision).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

// ---------------------------------------------------------------------
// Experiment harnesses
// ---------------------------------------------------------------------

fn cmd_mc_f1(args: &CommonArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.ensure_known("mc-f1", &["trials", "samples", "lags", "sigma", "noise"])?;
    let defaults = McF1Config::default();
    let harness = McF1Config {
        trials: config.parse_or("trials", defaults.trials)?,
        samples: config.parse_or("samples", defaults.samples)?,
        lags: config.usize_list_or("lags", &defaults.lags)?,
        sigma: config.parse_or("sigma", defaults.sigma)?,
        noise_scale: config.parse_or("noise", defaults.noise_scale)?,
    };
    mc_f1(&harness, args.seed)?.write_csv(&args.out)
}

fn cmd_transfer_curve(args: &CommonArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.ensure_known(
        "transfer-curve",
        &[
            "model",
            "counts",
            "resamples",
            "source_weight",
            "target_weight",
            "alpha",
            "n",
            "k",
            "degree",
            "matrix_seed",
            "drift",
            "source_samples",
            "target_samples",
            "noise",
            "mlp_learn_rate",
            "mlp_epochs",
            "mlp_batch",
        ],
    )?;
    let model: TransferModel = match config.str_opt("model") {
        None => TransferModel::Linear,
        Some(raw) => raw.parse()?,
    };
    let kernel = KernelConfig::new(
        config.parse_or("n", 1)?,
        config.parse_or("k", 7)?,
        config.parse_or("degree", 2)?,
    )?;
    let spec = ScenarioSpec {
        kernel,
        matrix_seed: config.parse_or("matrix_seed", 0)?,
        drift: config.parse_or("drift", 0.05)?,
        fault_sigma: 0.0,
        source_samples: config.parse_or("source_samples", 1440)?,
        target_samples: config.parse_or("target_samples", 1440)?,
        fault_samples: 1,
        noise_scale: config.parse_or("noise", 1.0)?,
    };
    let mlp_defaults = MlpHyper::default();
    let harness = TransferCurveConfig {
        spec,
        sample_counts: config.usize_list_or("counts", &[24, 48, 72, 168])?,
        resamples: config.parse_or("resamples", 100)?,
        model,
        weights: WlsWeights::new(
            config.parse_or("source_weight", 0.01)?,
            config.parse_or("target_weight", 10.0)?,
        )?,
        ridge_alpha: config.parse_or("alpha", 0.5)?,
        mlp: MlpHyper {
            learn_rate: config.parse_or("mlp_learn_rate", mlp_defaults.learn_rate)?,
            epochs: config.parse_or("mlp_epochs", mlp_defaults.epochs)?,
            batch: config.parse_or("mlp_batch", mlp_defaults.batch)?,
        },
    };
    transfer_curve(&harness, args.seed)?.write_csv(&args.out)
}

fn cmd_fault_study(args: &CommonArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.ensure_known(
        "fault-study",
        &[
            "window",
            "fault_sigma",
            "drift",
            "n",
            "k",
            "degree",
            "matrix_seed",
            "source_samples",
            "target_train_samples",
            "target_valid_samples",
            "fault_samples",
            "noise",
            "source_weight",
            "target_weight",
            "alpha",
            "logistic_learn_rate",
            "logistic_epochs",
        ],
    )?;
    let kernel = KernelConfig::new(
        config.parse_or("n", 1)?,
        config.parse_or("k", 7)?,
        config.parse_or("degree", 2)?,
    )?;
    let target_train_samples: usize = config.parse_or("target_train_samples", 336)?;
    let target_valid_samples: usize = config.parse_or("target_valid_samples", 4000)?;
    let spec = ScenarioSpec {
        kernel,
        matrix_seed: config.parse_or("matrix_seed", 0)?,
        drift: config.parse_or("drift", 0.05)?,
        fault_sigma: config.parse_or("fault_sigma", 1.0)?,
        source_samples: config.parse_or("source_samples", 20000)?,
        target_samples: target_train_samples + target_valid_samples,
        fault_samples: config.parse_or("fault_samples", 4000)?,
        noise_scale: config.parse_or("noise", 1.0)?,
    };
    let harness = FaultStudyConfig {
        spec,
        window: config.parse_or("window", 10)?,
        weights: WlsWeights::new(
            config.parse_or("source_weight", 0.01)?,
            config.parse_or("target_weight", 10.0)?,
        )?,
        ridge_alpha: config.parse_or("alpha", 0.5)?,
        target_train_samples,
        logistic_learn_rate: config.parse_or("logistic_learn_rate", 0.5)?,
        logistic_epochs: config.parse_or("logistic_epochs", 500)?,
    };
    fault_study(&harness, args.seed)?.write_csv(&args.out)
}
