//! Domain types and forward simulation for the kernelized linear
//! state-transition model x_{t+1} = A·φ_d(x_t, u_t) + ε_t.
//!
//! The polynomial kernel φ_d raises each raw variable element-wise to the
//! powers d, d−1, …, 1 and appends a single shared constant term, so the
//! feature dimension is p = d·(n + k) + 1. All randomness flows through
//! explicit 64-bit seeds; operations are pure given (inputs, seed).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dimensions of the polynomial featurization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelConfig {
    n: usize,
    k: usize,
    d: usize,
}

impl KernelConfig {
    /// `n` dependent variables, `k` independent variables, polynomial
    /// degree `d`. Requires n ≥ 1 and d ≥ 1.
    pub fn new(n: usize, k: usize, d: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "kernel config requires at least one dependent variable".into(),
            ));
        }
        if d == 0 {
            return Err(Error::InvalidInput(
                "kernel config requires polynomial degree d >= 1".into(),
            ));
        }
        Ok(KernelConfig { n, k, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Feature dimension: d powers per raw variable plus one shared
    /// constant term.
    pub fn p(&self) -> usize {
        self.d * (self.n + self.k) + 1
    }

    /// Config describing `window` stacked consecutive snapshots fed to the
    /// same degree-d kernel: n and k scale with the window length.
    pub fn stacked(&self, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidInput("window must be >= 1".into()));
        }
        KernelConfig::new(self.n * window, self.k * window, self.d)
    }
}

/// The n×p state-transition matrix A (or an estimate of it).
///
/// Matrices produced by featurized pipelines carry the [`KernelConfig`]
/// they were fitted under; raw matrices (for example the un-kernelized
/// 2×2 systems of the Monte Carlo study) carry none.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
    config: Option<KernelConfig>,
}

impl TransitionMatrix {
    /// A matrix tied to a featurization: shape must be exactly
    /// config.n × config.p.
    pub fn new(entries: DMatrix<f64>, config: KernelConfig) -> Result<Self> {
        if entries.nrows() != config.n() || entries.ncols() != config.p() {
            return Err(Error::DimensionMismatch {
                what: "transition matrix",
                expected: format!("{}x{}", config.n(), config.p()),
                actual: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        ensure_finite_matrix(&entries, "transition matrix")?;
        Ok(TransitionMatrix {
            entries,
            config: Some(config),
        })
    }

    /// A matrix with no attached featurization (any non-empty finite shape).
    pub fn raw(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidInput(
                "transition matrix must be non-empty".into(),
            ));
        }
        ensure_finite_matrix(&entries, "transition matrix")?;
        Ok(TransitionMatrix {
            entries,
            config: None,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn config(&self) -> Option<KernelConfig> {
        self.config
    }

    /// Output dimension n.
    pub fn output_dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Input (feature) dimension p.
    pub fn feature_dim(&self) -> usize {
        self.entries.ncols()
    }
}

/// One featurized observation (s_t, x_{t+1}).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    s: DVector<f64>,
    x: DVector<f64>,
}

impl SamplePair {
    /// The feature vector must end in the constant term 1.
    pub fn new(s: DVector<f64>, x: DVector<f64>) -> Result<Self> {
        if s.is_empty() || x.is_empty() {
            return Err(Error::InvalidInput("sample pair must be non-empty".into()));
        }
        ensure_finite_slice(s.as_slice(), "sample features")?;
        ensure_finite_slice(x.as_slice(), "sample output")?;
        if s[s.len() - 1] != 1.0 {
            return Err(Error::InvalidInput(format!(
                "feature vector must end in the constant 1, got {}",
                s[s.len() - 1]
            )));
        }
        Ok(SamplePair { s, x })
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }
}

/// Column-stacked observations: features S (p×T) and outputs X (n×T).
///
/// Columns produced by the featurization pipeline end in the constant 1;
/// raw (un-kernelized) harness data is exempt from that invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    s: DMatrix<f64>,
    x: DMatrix<f64>,
    timestamps: Option<Vec<i64>>,
}

impl Dataset {
    pub fn new(s: DMatrix<f64>, x: DMatrix<f64>, timestamps: Option<Vec<i64>>) -> Result<Self> {
        if s.ncols() != x.ncols() {
            return Err(Error::DimensionMismatch {
                what: "dataset columns",
                expected: format!("{} feature columns", s.ncols()),
                actual: format!("{} output columns", x.ncols()),
            });
        }
        ensure_finite_matrix(&s, "dataset features")?;
        ensure_finite_matrix(&x, "dataset outputs")?;
        if let Some(ts) = &timestamps {
            if ts.len() != s.ncols() {
                return Err(Error::DimensionMismatch {
                    what: "dataset timestamps",
                    expected: format!("{}", s.ncols()),
                    actual: format!("{}", ts.len()),
                });
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput(
                    "dataset timestamps must be strictly increasing".into(),
                ));
            }
        }
        Ok(Dataset { s, x, timestamps })
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    /// Number of sample pairs T.
    pub fn len(&self) -> usize {
        self.s.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Feature dimension p.
    pub fn feature_dim(&self) -> usize {
        self.s.nrows()
    }

    /// Output dimension n.
    pub fn output_dim(&self) -> usize {
        self.x.nrows()
    }

    /// The contiguous sub-dataset covering columns [start, start+len).
    pub fn window(&self, start: usize, len: usize) -> Result<Dataset> {
        if start + len > self.len() {
            return Err(Error::InvalidInput(format!(
                "window [{start}, {}) exceeds dataset length {}",
                start + len,
                self.len()
            )));
        }
        Ok(Dataset {
            s: self.s.columns(start, len).into_owned(),
            x: self.x.columns(start, len).into_owned(),
            timestamps: self
                .timestamps
                .as_ref()
                .map(|ts| ts[start..start + len].to_vec()),
        })
    }

    /// Column-wise concatenation; timestamps survive only when both halves
    /// carry them and the result stays strictly increasing.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.feature_dim() != other.feature_dim() || self.output_dim() != other.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "dataset concatenation",
                expected: format!("{}x{}", self.feature_dim(), self.output_dim()),
                actual: format!("{}x{}", other.feature_dim(), other.output_dim()),
            });
        }
        let t = self.len() + other.len();
        let mut s = DMatrix::zeros(self.feature_dim(), t);
        let mut x = DMatrix::zeros(self.output_dim(), t);
        s.columns_mut(0, self.len()).copy_from(&self.s);
        s.columns_mut(self.len(), other.len()).copy_from(&other.s);
        x.columns_mut(0, self.len()).copy_from(&self.x);
        x.columns_mut(self.len(), other.len()).copy_from(&other.x);
        let timestamps = match (&self.timestamps, &other.timestamps) {
            (Some(a), Some(b)) => {
                let joined: Vec<i64> = a.iter().chain(b.iter()).copied().collect();
                if joined.windows(2).all(|w| w[1] > w[0]) {
                    Some(joined)
                } else {
                    None
                }
            }
            _ => None,
        };
        Dataset::new(s, x, timestamps)
    }

    /// The t-th sample pair as owned vectors.
    pub fn pair(&self, t: usize) -> (DVector<f64>, DVector<f64>) {
        (self.s.column(t).into_owned(), self.x.column(t).into_owned())
    }
}

/// An unfeaturized observation sequence: n dependent and k independent
/// channels over T consecutive steps. This is the input cross-validation
/// re-featurizes at each candidate degree.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSequence {
    dependent: DMatrix<f64>,
    independent: DMatrix<f64>,
}

impl RawSequence {
    /// `dependent` is n×T (n ≥ 1); `independent` is k×T (k may be 0).
    pub fn new(dependent: DMatrix<f64>, independent: DMatrix<f64>) -> Result<Self> {
        if dependent.nrows() == 0 {
            return Err(Error::InvalidInput(
                "raw sequence needs at least one dependent channel".into(),
            ));
        }
        if independent.nrows() > 0 && independent.ncols() != dependent.ncols() {
            return Err(Error::DimensionMismatch {
                what: "raw sequence length",
                expected: format!("{}", dependent.ncols()),
                actual: format!("{}", independent.ncols()),
            });
        }
        ensure_finite_matrix(&dependent, "dependent channels")?;
        ensure_finite_matrix(&independent, "independent channels")?;
        Ok(RawSequence {
            dependent,
            independent,
        })
    }

    pub fn len(&self) -> usize {
        self.dependent.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n(&self) -> usize {
        self.dependent.nrows()
    }

    pub fn k(&self) -> usize {
        self.independent.nrows()
    }

    pub fn dependent(&self) -> &DMatrix<f64> {
        &self.dependent
    }

    pub fn independent(&self) -> &DMatrix<f64> {
        &self.independent
    }

    /// Featurize at degree `d` into (s_t, x_{t+1}) pairs for t = 0..T−2.
    pub fn featurize(&self, d: usize) -> Result<(KernelConfig, Dataset)> {
        let config = KernelConfig::new(self.n(), self.k(), d)?;
        let t = self.len();
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "featurizing pairs needs at least 2 steps, got {t}"
            )));
        }
        let mut s = DMatrix::zeros(config.p(), t - 1);
        let mut x = DMatrix::zeros(self.n(), t - 1);
        for i in 0..t - 1 {
            let xi = self.dependent.column(i).into_owned();
            let ui = self.independent.column(i).into_owned();
            let feat = featurize(&xi, &ui, &config)?;
            s.column_mut(i).copy_from(&feat);
            x.column_mut(i).copy_from(&self.dependent.column(i + 1));
        }
        Ok((config, Dataset::new(s, x, None)?))
    }
}

/// Polynomial featurization: [x^d, x^{d−1}, …, x^1, u^d, …, u^1, 1] with
/// element-wise powers and a single shared constant term.
///
/// Powers are built by repeated multiplication so signs stay exact for
/// negative inputs.
pub fn featurize(x: &DVector<f64>, u: &DVector<f64>, config: &KernelConfig) -> Result<DVector<f64>> {
    if x.len() != config.n() {
        return Err(Error::DimensionMismatch {
            what: "dependent vector",
            expected: format!("{}", config.n()),
            actual: format!("{}", x.len()),
        });
    }
    if u.len() != config.k() {
        return Err(Error::DimensionMismatch {
            what: "independent vector",
            expected: format!("{}", config.k()),
            actual: format!("{}", u.len()),
        });
    }
    ensure_finite_slice(x.as_slice(), "dependent vector")?;
    ensure_finite_slice(u.as_slice(), "independent vector")?;

    let p = config.p();
    let d = config.d();
    let mut out = DVector::zeros(p);
    let mut offset = 0;
    for block in [x, u] {
        if block.is_empty() {
            continue;
        }
        // powers[e-1] = block^e element-wise
        let mut powers: Vec<DVector<f64>> = Vec::with_capacity(d);
        powers.push(block.clone());
        for e in 2..=d {
            let next = powers[e - 2].component_mul(block);
            powers.push(next);
        }
        for e in (1..=d).rev() {
            out.rows_mut(offset, block.len()).copy_from(&powers[e - 1]);
            offset += block.len();
        }
    }
    out[p - 1] = 1.0;
    Ok(out)
}

/// Generate pairs x_t = A·s_t + ε_t with ε_t i.i.d. N(0, noise_scale²·I).
/// Identical seeds reproduce identical output bit-for-bit.
pub fn simulate(
    a: &TransitionMatrix,
    inputs: &[DVector<f64>],
    noise_scale: f64,
    seed: u64,
) -> Result<Dataset> {
    if !noise_scale.is_finite() || noise_scale < 0.0 {
        return Err(Error::InvalidInput(format!(
            "noise_scale must be finite and >= 0, got {noise_scale}"
        )));
    }
    let p = a.feature_dim();
    let n = a.output_dim();
    for (i, s) in inputs.iter().enumerate() {
        if s.len() != p {
            return Err(Error::DimensionMismatch {
                what: "simulation input",
                expected: format!("{p}"),
                actual: format!("{} (input {i})", s.len()),
            });
        }
        ensure_finite_slice(s.as_slice(), "simulation input")?;
    }
    let t = inputs.len();
    let mut s = DMatrix::zeros(p, t);
    let mut x = DMatrix::zeros(n, t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, input) in inputs.iter().enumerate() {
        s.column_mut(i).copy_from(input);
        let mut xi = a.entries() * input;
        if noise_scale > 0.0 {
            for v in xi.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += noise_scale * z;
            }
        }
        x.column_mut(i).copy_from(&xi);
    }
    Dataset::new(s, x, None)
}

/// Entry-wise Gaussian perturbation: b_ij = a_ij + η_ij, η_ij ~ N(0, σ²).
/// σ = 0 returns an exact copy.
pub fn perturb_matrix(a: &TransitionMatrix, sigma: f64, seed: u64) -> Result<TransitionMatrix> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidInput(format!(
            "perturbation sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(a.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = a.entries().clone();
    // Column-major draw order, matching the storage layout.
    for j in 0..entries.ncols() {
        for i in 0..entries.nrows() {
            let z: f64 = StandardNormal.sample(&mut rng);
            entries[(i, j)] += sigma * z;
        }
    }
    Ok(TransitionMatrix {
        entries,
        config: a.config(),
    })
}

/// Splitmix64-style seed derivation for disjoint parallel streams.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn ensure_finite_matrix(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contains non-finite entries"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite_slice(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contains non-finite entries"
        )));
    }
    Ok(())
}
