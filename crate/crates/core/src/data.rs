//! Telemetry ingestion and the synthetic scenario generator.
//!
//! Tables arrive as hourly CSV files (integer `timestamp` column plus real
//! value columns), pass through min-max normalization and optional
//! unit-circle time embedding, and leave as featurized [`Dataset`]s. The
//! scenario generator stands in for a building simulator: it plants a pair
//! of drift-related transition matrices plus a faulted variant and
//! synthesizes data from all three.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{
    derive_seed, featurize, perturb_matrix, simulate, Dataset, KernelConfig, TransitionMatrix,
};

/// An hourly telemetry table: one integer hour index per row plus named
/// real-valued channels. Rows are strictly increasing in time with no
/// gaps (hourly cadence; missing hours are rejected at load, not imputed).
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<String>,
    timestamps: Vec<i64>,
    /// T×C, row t = the channel values at timestamps[t].
    values: DMatrix<f64>,
}

impl RawTable {
    pub fn new(columns: Vec<String>, timestamps: Vec<i64>, values: DMatrix<f64>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidInput("table needs at least one value column".into()));
        }
        for (i, a) in columns.iter().enumerate() {
            if a == "timestamp" {
                return Err(Error::InvalidInput(
                    "'timestamp' is reserved for the index column".into(),
                ));
            }
            if columns[i + 1..].contains(a) {
                return Err(Error::InvalidInput(format!("duplicate column name '{a}'")));
            }
        }
        if values.nrows() != timestamps.len() || values.ncols() != columns.len() {
            return Err(Error::DimensionMismatch {
                what: "table values",
                expected: format!("{}x{}", timestamps.len(), columns.len()),
                actual: format!("{}x{}", values.nrows(), values.ncols()),
            });
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "table timestamps must be strictly increasing".into(),
            ));
        }
        crate::kernel::ensure_finite_matrix(&values, "table values")?;
        Ok(RawTable {
            columns,
            timestamps,
            values,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of rows T.
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "column '{name}' not found; available: {}",
                    self.columns.join(", ")
                ))
            })
    }

    /// The named channel as a column vector.
    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let idx = self.column_index(name)?;
        Ok(self.values.column(idx).into_owned())
    }

    /// A copy with four unit-circle time channels appended, derived from
    /// the hour index: `time_hour_cos/sin` (period 24) and
    /// `time_dow_cos/sin` (period 7 days).
    pub fn with_time_embedding(&self) -> Result<RawTable> {
        let t = self.len();
        let mut values = DMatrix::zeros(t, self.columns.len() + 4);
        values.columns_mut(0, self.columns.len()).copy_from(&self.values);
        for (row, &ts) in self.timestamps.iter().enumerate() {
            let hour = ts.rem_euclid(24) as u32;
            let dow = ts.div_euclid(24).rem_euclid(7) as u32;
            let embedded = embed_time(hour, dow)?;
            for (j, v) in embedded.iter().enumerate() {
                values[(row, self.columns.len() + j)] = *v;
            }
        }
        let mut columns = self.columns.clone();
        for name in ["time_hour_cos", "time_hour_sin", "time_dow_cos", "time_dow_sin"] {
            columns.push(name.to_string());
        }
        RawTable::new(columns, self.timestamps.clone(), values)
    }

    fn row_slice(&self, rows: std::ops::Range<usize>) -> RawTable {
        RawTable {
            columns: self.columns.clone(),
            timestamps: self.timestamps[rows.clone()].to_vec(),
            values: self.values.rows(rows.start, rows.len()).into_owned(),
        }
    }
}

/// Load an hourly telemetry CSV: UTF-8, one header row whose first column
/// is `timestamp`, integer hour indices, real value cells, no quoting, no
/// gaps. Every violation is reported with its 1-based data row and column.
pub fn load_csv(path: &Path) -> Result<RawTable> {
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        row,
        column,
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(0, 1, format!("unreadable header: {e}")))?
        .clone();
    if headers.is_empty() || headers.get(0) != Some("timestamp") {
        return Err(Error::InvalidInput(format!(
            "{}: first header column must be 'timestamp', got '{}'",
            path.display(),
            headers.get(0).unwrap_or("")
        )));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut timestamps: Vec<i64> = Vec::new();
    let mut cells: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => parse_err(
                row,
                1,
                format!("ragged row: expected {expected_len} fields, got {len}"),
            ),
            _ => parse_err(row, 1, format!("{e}")),
        })?;
        let ts_field = record.get(0).unwrap_or("");
        let ts: i64 = ts_field.parse().map_err(|_| {
            parse_err(row, 1, format!("expected integer timestamp, got '{ts_field}'"))
        })?;
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(parse_err(
                    row,
                    1,
                    format!("timestamps must increase: {ts} after {prev}"),
                ));
            }
            if ts != prev + 1 {
                return Err(parse_err(
                    row,
                    1,
                    format!("hourly cadence violated: gap from {prev} to {ts}"),
                ));
            }
        }
        timestamps.push(ts);
        for (j, field) in record.iter().skip(1).enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                parse_err(row, j + 2, format!("expected a real number, got '{field}'"))
            })?;
            if !value.is_finite() {
                return Err(parse_err(row, j + 2, format!("non-finite value '{field}'")));
            }
            cells.push(value);
        }
    }
    let t = timestamps.len();
    if t == 0 {
        return Err(Error::InvalidInput(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let values = DMatrix::from_row_slice(t, columns.len(), &cells);
    RawTable::new(columns, timestamps, values)
}

/// Write a table in the same dialect `load_csv` reads. Floats use Rust's
/// shortest round-trip formatting, so load(write(t)) == t exactly.
pub fn write_csv(path: &Path, table: &RawTable) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);
    write!(out, "timestamp").map_err(io_err)?;
    for name in table.columns() {
        write!(out, ",{name}").map_err(io_err)?;
    }
    writeln!(out).map_err(io_err)?;
    for (row, &ts) in table.timestamps().iter().enumerate() {
        write!(out, "{ts}").map_err(io_err)?;
        for j in 0..table.columns().len() {
            write!(out, ",{}", table.values()[(row, j)]).map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Per-column min-max statistics computed from a training table.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    columns: Vec<String>,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl NormalizationParams {
    pub fn from_table(table: &RawTable) -> Self {
        let c = table.columns().len();
        let mut min = vec![f64::INFINITY; c];
        let mut max = vec![f64::NEG_INFINITY; c];
        for row in 0..table.len() {
            for j in 0..c {
                let v = table.values()[(row, j)];
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        NormalizationParams {
            columns: table.columns().to_vec(),
            min,
            max,
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    /// True when the training data had zero range in this column; such
    /// channels normalize to 0 and cannot be inverted.
    pub fn is_constant(&self, column: usize) -> bool {
        self.max[column] == self.min[column]
    }

    /// Persist as a two-row CSV: header = value column names, then the
    /// min row and the max row.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io_err = |e: std::io::Error| Error::io(path, e);
        writeln!(out, "{}", self.columns.join(",")).map_err(io_err)?;
        let fmt = |row: &[f64]| {
            row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(out, "{}", fmt(&self.min)).map_err(io_err)?;
        writeln!(out, "{}", fmt(&self.max)).map_err(io_err)?;
        out.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let parse_err = |row: usize, column: usize, message: String| Error::Parse {
            path: path.display().to_string(),
            row,
            column,
            message,
        };
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(file);
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| parse_err(0, 1, format!("unreadable header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| parse_err(i + 1, 1, format!("{e}")))?;
            let mut parsed = Vec::with_capacity(columns.len());
            for (j, field) in record.iter().enumerate() {
                parsed.push(field.parse::<f64>().map_err(|_| {
                    parse_err(i + 1, j + 1, format!("expected a real number, got '{field}'"))
                })?);
            }
            rows.push(parsed);
        }
        if rows.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "{}: normalization file must hold exactly a min row and a max row, got {} rows",
                path.display(),
                rows.len()
            )));
        }
        let (min, max) = (rows.remove(0), rows.remove(0));
        for (j, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if hi < lo {
                return Err(Error::InvalidInput(format!(
                    "{}: column '{}' has max {hi} < min {lo}",
                    path.display(),
                    columns[j]
                )));
            }
        }
        Ok(NormalizationParams { columns, min, max })
    }
}

/// Min-max normalize: x' = (x − min)/(max − min). With `params = None` the
/// statistics come from `table` itself (training); validation tables must
/// pass their training params and may land outside [0, 1] — values are
/// never clipped. Constant training columns map to 0.
pub fn normalize(
    table: &RawTable,
    params: Option<&NormalizationParams>,
) -> Result<(RawTable, NormalizationParams)> {
    let params = match params {
        Some(p) => {
            if p.columns != table.columns() {
                return Err(Error::InvalidInput(format!(
                    "normalization params cover [{}] but the table has [{}]",
                    p.columns.join(", "),
                    table.columns().join(", ")
                )));
            }
            p.clone()
        }
        None => NormalizationParams::from_table(table),
    };
    let mut values = table.values().clone();
    for j in 0..params.columns.len() {
        let range = params.max[j] - params.min[j];
        for row in 0..values.nrows() {
            values[(row, j)] = if range == 0.0 {
                0.0
            } else {
                (values[(row, j)] - params.min[j]) / range
            };
        }
    }
    let normalized = RawTable::new(table.columns().to_vec(), table.timestamps().to_vec(), values)?;
    Ok((normalized, params))
}

/// Invert [`normalize`]: x = x'·(max − min) + min. Constant columns carry
/// no information to invert and are restored to their training value.
pub fn denormalize(table: &RawTable, params: &NormalizationParams) -> Result<RawTable> {
    if params.columns != table.columns() {
        return Err(Error::InvalidInput(format!(
            "normalization params cover [{}] but the table has [{}]",
            params.columns.join(", "),
            table.columns().join(", ")
        )));
    }
    let mut values = table.values().clone();
    for j in 0..params.columns.len() {
        let range = params.max[j] - params.min[j];
        for row in 0..values.nrows() {
            values[(row, j)] = values[(row, j)] * range + params.min[j];
        }
    }
    RawTable::new(table.columns().to_vec(), table.timestamps().to_vec(), values)
}

/// Unit-circle embedding of clock time:
/// (cos 2πh/24, sin 2πh/24, cos 2πd/7, sin 2πd/7).
pub fn embed_time(hour_of_day: u32, day_of_week: u32) -> Result<[f64; 4]> {
    if hour_of_day > 23 {
        return Err(Error::InvalidInput(format!(
            "hour_of_day must be in 0..=23, got {hour_of_day}"
        )));
    }
    if day_of_week > 6 {
        return Err(Error::InvalidInput(format!(
            "day_of_week must be in 0..=6, got {day_of_week}"
        )));
    }
    let h = 2.0 * std::f64::consts::PI * f64::from(hour_of_day) / 24.0;
    let d = 2.0 * std::f64::consts::PI * f64::from(day_of_week) / 7.0;
    Ok([h.cos(), h.sin(), d.cos(), d.sin()])
}

/// Order-preserving chronological split: the first ⌈fraction·T⌉ rows train,
/// the rest validate. Both halves must end up non-empty.
pub fn split_chronological(table: &RawTable, fraction: f64) -> Result<(RawTable, RawTable)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let t = table.len();
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "cannot split a table with {t} row(s)"
        )));
    }
    let train_len = (fraction * t as f64).ceil() as usize;
    if train_len == 0 || train_len >= t {
        return Err(Error::InvalidInput(format!(
            "degenerate split: {train_len} train rows of {t}"
        )));
    }
    Ok((table.row_slice(0..train_len), table.row_slice(train_len..t)))
}

/// Featurize a table into (s_t, x_{t+1}) pairs. The state vector stacks
/// `window` consecutive raw snapshots, newest first, before the degree-d
/// kernel is applied (the fitted matrix then lives under
/// `config.stacked(window)`); the output is the dependent channels one
/// step after the newest snapshot. `config.n`/`config.k` must match the
/// dependent/independent column counts.
pub fn build_dataset(
    table: &RawTable,
    dependent: &[String],
    independent: &[String],
    config: &KernelConfig,
    window: usize,
) -> Result<Dataset> {
    if window == 0 {
        return Err(Error::InvalidInput("window must be >= 1".into()));
    }
    if dependent.is_empty() {
        return Err(Error::InvalidInput(
            "at least one dependent column is required".into(),
        ));
    }
    if config.n() != dependent.len() || config.k() != independent.len() {
        return Err(Error::DimensionMismatch {
            what: "kernel config",
            expected: format!("n = {}, k = {}", config.n(), config.k()),
            actual: format!(
                "{} dependent, {} independent columns",
                dependent.len(),
                independent.len()
            ),
        });
    }
    let dep_idx: Vec<usize> = dependent
        .iter()
        .map(|c| table.column_index(c))
        .collect::<Result<_>>()?;
    let indep_idx: Vec<usize> = independent
        .iter()
        .map(|c| table.column_index(c))
        .collect::<Result<_>>()?;
    let t = table.len();
    if t < window + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least window + 1 = {} rows to form one pair, got {t}",
            window + 1
        )));
    }
    let stacked = config.stacked(window)?;
    let n = dep_idx.len();
    let pair_count = t - window;
    let mut s = DMatrix::zeros(stacked.p(), pair_count);
    let mut x = DMatrix::zeros(n, pair_count);
    let mut timestamps = Vec::with_capacity(pair_count);
    let gather = |idx: &[usize], row: usize| -> Vec<f64> {
        idx.iter().map(|&j| table.values()[(row, j)]).collect()
    };
    for (pair, t_now) in (window - 1..t - 1).enumerate() {
        let mut dep_stack = Vec::with_capacity(n * window);
        let mut indep_stack = Vec::with_capacity(indep_idx.len() * window);
        for lag in 0..window {
            dep_stack.extend(gather(&dep_idx, t_now - lag));
            indep_stack.extend(gather(&indep_idx, t_now - lag));
        }
        let features = featurize(
            &DVector::from_vec(dep_stack),
            &DVector::from_vec(indep_stack),
            &stacked,
        )?;
        s.column_mut(pair).copy_from(&features);
        for (i, &j) in dep_idx.iter().enumerate() {
            x[(i, pair)] = table.values()[(t_now + 1, j)];
        }
        timestamps.push(table.timestamps()[t_now + 1]);
    }
    Dataset::new(s, x, Some(timestamps))
}

/// Parameters of the synthetic building-pair scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub kernel: KernelConfig,
    /// Seed of the base matrix A₁ — kept separate from the operation seed
    /// so resamples can share a building while redrawing its data.
    pub matrix_seed: u64,
    /// Magnitude of the building-2 drift: A₂ = A₁ + drift·Δ.
    pub drift: f64,
    /// Entry-wise sigma of the fault perturbation applied on top of A₂.
    pub fault_sigma: f64,
    pub source_samples: usize,
    pub target_samples: usize,
    pub fault_samples: usize,
    pub noise_scale: f64,
}

impl ScenarioSpec {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("drift", self.drift),
            ("fault_sigma", self.fault_sigma),
            ("noise_scale", self.noise_scale),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        for (name, c) in [
            ("source_samples", self.source_samples),
            ("target_samples", self.target_samples),
            ("fault_samples", self.fault_samples),
        ] {
            if c == 0 {
                return Err(Error::InvalidInput(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// A generated building pair: normal data from both buildings, faulted
/// data from building 2, and the three planted matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub building1: Dataset,
    pub building2: Dataset,
    pub building2_fault: Dataset,
    pub truth: (TransitionMatrix, TransitionMatrix, TransitionMatrix),
}

/// Plant A₁ (from `spec.matrix_seed`), drift it into A₂, perturb A₂
/// into the faulted matrix, and simulate i.i.d.-input datasets from all
/// three. Pure in (spec, seed): equal arguments give bit-identical output.
pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<Scenario> {
    spec.validate()?;
    let n = spec.kernel.n();
    let p = spec.kernel.p();
    let mut matrix_rng = ChaCha8Rng::seed_from_u64(spec.matrix_seed);
    let a1_entries = DMatrix::from_fn(n, p, |_, _| {
        let z: f64 = StandardNormal.sample(&mut matrix_rng);
        z
    });
    let a1 = TransitionMatrix::new(a1_entries, spec.kernel)?;

    let mut drift_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let delta = DMatrix::from_fn(n, p, |_, _| {
        let z: f64 = StandardNormal.sample(&mut drift_rng);
        z
    });
    let a2 = TransitionMatrix::new(a1.entries() + spec.drift * delta, spec.kernel)?;
    let a2_fault = perturb_matrix(&a2, spec.fault_sigma, derive_seed(seed, 1))?;

    let building1 = synthesize_dataset(
        &a1,
        &spec.kernel,
        spec.source_samples,
        spec.noise_scale,
        derive_seed(seed, 2),
    )?;
    let building2 = synthesize_dataset(
        &a2,
        &spec.kernel,
        spec.target_samples,
        spec.noise_scale,
        derive_seed(seed, 3),
    )?;
    let building2_fault = synthesize_dataset(
        &a2_fault,
        &spec.kernel,
        spec.fault_samples,
        spec.noise_scale,
        derive_seed(seed, 4),
    )?;
    Ok(Scenario {
        building1,
        building2,
        building2_fault,
        truth: (a1, a2, a2_fault),
    })
}

/// The scenario sampling primitive: i.i.d. standard-normal raw channels
/// pushed through the kernel, then simulated under `a` with the given
/// noise. Harnesses use it to draw extra labeled data from a scenario's
/// truth matrices.
pub fn synthesize_dataset(
    a: &TransitionMatrix,
    kernel: &KernelConfig,
    samples: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<Dataset> {
    if a.output_dim() != kernel.n() || a.feature_dim() != kernel.p() {
        return Err(Error::DimensionMismatch {
            what: "synthesis matrix",
            expected: format!("{}x{}", kernel.n(), kernel.p()),
            actual: format!("{}x{}", a.output_dim(), a.feature_dim()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut inputs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let raw_x = DVector::from_fn(kernel.n(), |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let raw_u = DVector::from_fn(kernel.k(), |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        inputs.push(featurize(&raw_x, &raw_u, kernel)?);
    }
    simulate(a, &inputs, noise_scale, derive_seed(seed, 1))
}
