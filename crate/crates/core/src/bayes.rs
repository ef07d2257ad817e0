//! Closed-form normal and fault log-likelihoods, the log-likelihood-ratio
//! classifier, its additive sequence form, feature extraction for the
//! logistic variant, and a self-contained logistic regression trainer.
//!
//! Under no fault, x = A·s + ε with ε ~ N(0, I), so
//!   loglik_normal = −(n/2)·log 2π − ½‖x − As‖².
//! Under a fault, x = B·s + ε with B ~ matrix-normal(A, I, I); integrating
//! B out leaves exactly the Gaussian marginal N(x; As, (1 + sᵀs)·I):
//!   loglik_fault = −(n/2)·log(2π(1+sᵀs)) − ‖x − As‖² / (2(1+sᵀs)).
//! The shipped code path evaluates the trace/logdet form with C = ssᵀ + I
//! and D = xsᵀ + A handled through rank-one identities (Sherman–Morrison,
//! determinant lemma); it must agree with the analytic marginal to 1e-10.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{Dataset, TransitionMatrix};

const LOG_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Binary decision of the ratio classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Normal,
    Fault,
}

impl Label {
    /// The ±1 encoding used by net-classification traces.
    pub fn signum(self) -> f64 {
        match self {
            Label::Normal => -1.0,
            Label::Fault => 1.0,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Normal => write!(f, "normal"),
            Label::Fault => write!(f, "fault"),
        }
    }
}

/// log P(x|A, s) − log P(x|fault, s) and the induced decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikRatio {
    pub value: f64,
    pub decision: Label,
}

impl LogLikRatio {
    /// Ties (value exactly 0) are labeled normal: the rule is strict
    /// "less than 0 means fault".
    pub fn from_value(value: f64) -> Self {
        let decision = if value >= 0.0 {
            Label::Normal
        } else {
            Label::Fault
        };
        LogLikRatio { value, decision }
    }
}

/// The separated terms of the single-point classifier evaluation:
/// residual_trace = ‖x − As‖², cross_trace = Tr[xxᵀ + AAᵀ − (DC⁻¹)ᵀD],
/// logdet_term = log|C⁻¹| = −log(1 + sᵀs).
///
/// They recombine to the two log-likelihoods (see [`loglik_from_features`])
/// and are the inputs of the logistic classifier. Summing features over a
/// window mirrors the additivity of the sequence log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierFeatures {
    pub residual_trace: f64,
    pub cross_trace: f64,
    pub logdet_term: f64,
}

impl ClassifierFeatures {
    pub fn to_array(self) -> [f64; 3] {
        [self.residual_trace, self.cross_trace, self.logdet_term]
    }
}

impl std::ops::Add for ClassifierFeatures {
    type Output = ClassifierFeatures;

    fn add(self, rhs: ClassifierFeatures) -> ClassifierFeatures {
        ClassifierFeatures {
            residual_trace: self.residual_trace + rhs.residual_trace,
            cross_trace: self.cross_trace + rhs.cross_trace,
            logdet_term: self.logdet_term + rhs.logdet_term,
        }
    }
}

fn check_dims(x: &DVector<f64>, s: &DVector<f64>, a: &TransitionMatrix) -> Result<()> {
    if x.len() != a.output_dim() {
        return Err(Error::DimensionMismatch {
            what: "output vector",
            expected: format!("{}", a.output_dim()),
            actual: format!("{}", x.len()),
        });
    }
    if s.len() != a.feature_dim() {
        return Err(Error::DimensionMismatch {
            what: "feature vector",
            expected: format!("{}", a.feature_dim()),
            actual: format!("{}", s.len()),
        });
    }
    Ok(())
}

/// Log-density of x under the no-fault model: N(x; As, I).
pub fn loglik_normal(x: &DVector<f64>, s: &DVector<f64>, a: &TransitionMatrix) -> Result<f64> {
    check_dims(x, s, a)?;
    let n = a.output_dim() as f64;
    let residual = x - a.entries() * s;
    Ok(-0.5 * n * LOG_2PI - 0.5 * residual.norm_squared())
}

/// Log of the marginal density of x under B ~ matrix-normal(A, I, I) and
/// x = Bs + ε. Evaluated through the trace/logdet form with rank-one
/// identities; equals [`loglik_fault_marginal`] to 1e-10.
pub fn loglik_fault(x: &DVector<f64>, s: &DVector<f64>, a: &TransitionMatrix) -> Result<f64> {
    let features = extract_features(s, x, a)?;
    let n = a.output_dim() as f64;
    Ok(-0.5 * n * LOG_2PI + 0.5 * n * features.logdet_term - 0.5 * features.cross_trace)
}

/// The analytic form of the fault marginal: log N(x; As, (1 + sᵀs)·I).
/// Ground truth for the trace-form path.
pub fn loglik_fault_marginal(
    x: &DVector<f64>,
    s: &DVector<f64>,
    a: &TransitionMatrix,
) -> Result<f64> {
    check_dims(x, s, a)?;
    let n = a.output_dim() as f64;
    let q = s.norm_squared();
    let residual = x - a.entries() * s;
    Ok(-0.5 * n * (LOG_2PI + (1.0 + q).ln()) - residual.norm_squared() / (2.0 * (1.0 + q)))
}

/// Sherman–Morrison inverse of C = ssᵀ + I: C⁻¹ = I − ssᵀ/(1 + sᵀs).
pub fn gram_inverse(s: &DVector<f64>) -> DMatrix<f64> {
    let p = s.len();
    let q = s.norm_squared();
    let mut inv = DMatrix::identity(p, p);
    let scale = 1.0 / (1.0 + q);
    for j in 0..p {
        for i in 0..p {
            inv[(i, j)] -= s[i] * s[j] * scale;
        }
    }
    inv
}

/// Matrix determinant lemma for C = ssᵀ + I: log|C| = log(1 + sᵀs).
pub fn gram_logdet(s: &DVector<f64>) -> f64 {
    s.norm_squared().ln_1p()
}

/// The separated trace and logdet terms of the single-point evaluation,
/// computed in O(n·p) via the rank-one identities. With D = xsᵀ + A and
/// C = ssᵀ + I:
///   Tr[(DC⁻¹)ᵀD] = Tr[C⁻¹DᵀD] = ‖D‖_F² − ‖Ds‖²/(1 + sᵀs),
/// which keeps every intermediate vector-sized.
pub fn extract_features(
    s: &DVector<f64>,
    x: &DVector<f64>,
    a: &TransitionMatrix,
) -> Result<ClassifierFeatures> {
    check_dims(x, s, a)?;
    let q = s.norm_squared();
    let a_s = a.entries() * s;
    let residual_trace = (x - &a_s).norm_squared();

    // ‖D‖_F² = q‖x‖² + 2 xᵀ(As) + ‖A‖_F²; Ds = q·x + As.
    let x_sq = x.norm_squared();
    let a_sq = a.entries().norm_squared();
    let d_fro = q * x_sq + 2.0 * x.dot(&a_s) + a_sq;
    let ds = x * q + &a_s;
    let tr_cinv_dtd = d_fro - ds.norm_squared() / (1.0 + q);
    let cross_trace = x_sq + a_sq - tr_cinv_dtd;

    Ok(ClassifierFeatures {
        residual_trace,
        cross_trace,
        logdet_term: -(1.0 + q).ln(),
    })
}

/// Recombine extracted features into (loglik_normal, loglik_fault).
/// Algebraic identity used by tests and by the logistic pipeline's
/// documentation of what the features mean.
pub fn loglik_from_features(features: &ClassifierFeatures, n: usize) -> (f64, f64) {
    let n = n as f64;
    let normal = -0.5 * n * LOG_2PI - 0.5 * features.residual_trace;
    let fault = -0.5 * n * LOG_2PI + 0.5 * n * features.logdet_term - 0.5 * features.cross_trace;
    (normal, fault)
}

/// Monte Carlo evaluation of the fault marginal: log of the sample mean of
/// N(x; Bs, I) over `draws` samples B ~ matrix-normal(A, I, I), with a
/// delta-method standard error on the log scale.
pub fn mc_posterior_oracle(
    x: &DVector<f64>,
    s: &DVector<f64>,
    a: &TransitionMatrix,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_dims(x, s, a)?;
    if draws < 1000 {
        return Err(Error::InvalidInput(format!(
            "Monte Carlo oracle needs at least 1000 draws, got {draws}"
        )));
    }
    let n = a.output_dim();
    let p = a.feature_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logs = Vec::with_capacity(draws);
    for _ in 0..draws {
        // B = A + G drawn entry-wise; only Gs is needed per draw.
        let mut gs = DVector::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..p {
                let g: f64 = StandardNormal.sample(&mut rng);
                acc += g * s[j];
            }
            gs[i] = acc;
        }
        let residual = x - a.entries() * s - gs;
        logs.push(-0.5 * n as f64 * LOG_2PI - 0.5 * residual.norm_squared());
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical(
            "Monte Carlo oracle produced non-finite log-densities".into(),
        ));
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let mean: f64 = weights.iter().sum::<f64>() / draws as f64;
    let var: f64 = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    let estimate = max + mean.ln();
    let std_error = var.sqrt() / (mean * (draws as f64).sqrt());
    if !estimate.is_finite() || !std_error.is_finite() {
        return Err(Error::Numerical(
            "Monte Carlo oracle estimate is non-finite".into(),
        ));
    }
    Ok((estimate, std_error))
}

/// Single-point ratio classification: value = loglik_normal − loglik_fault.
pub fn classify_single(
    s: &DVector<f64>,
    x: &DVector<f64>,
    a: &TransitionMatrix,
) -> Result<LogLikRatio> {
    let features = extract_features(s, x, a)?;
    let n = a.output_dim() as f64;
    // normal − fault: the ln 2π terms cancel.
    let value =
        -0.5 * features.residual_trace - 0.5 * n * features.logdet_term
            + 0.5 * features.cross_trace;
    Ok(LogLikRatio::from_value(value))
}

/// Sequence classification: the log-likelihood is additive, so the ratio of
/// a window is the sum of per-pair ratios (left-to-right accumulation).
pub fn classify_sequence(dataset: &Dataset, a: &TransitionMatrix) -> Result<LogLikRatio> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput(
            "classify_sequence needs a non-empty dataset".into(),
        ));
    }
    let mut value = 0.0;
    for t in 0..dataset.len() {
        let s = dataset.s().column(t).into_owned();
        let x = dataset.x().column(t).into_owned();
        value += classify_single(&s, &x, a)?.value;
    }
    Ok(LogLikRatio::from_value(value))
}

/// Sum features over non-overlapping windows of `window` consecutive pairs;
/// a trailing partial window is dropped.
pub fn window_features(features: &[ClassifierFeatures], window: usize) -> Vec<ClassifierFeatures> {
    assert!(window >= 1, "window must be >= 1");
    features
        .chunks_exact(window)
        .map(|chunk| {
            chunk.iter().fold(
                ClassifierFeatures {
                    residual_trace: 0.0,
                    cross_trace: 0.0,
                    logdet_term: 0.0,
                },
                |acc, f| acc + *f,
            )
        })
        .collect()
}

/// Per-column classifier features of a whole dataset.
pub fn extract_features_dataset(
    dataset: &Dataset,
    a: &TransitionMatrix,
) -> Result<Vec<ClassifierFeatures>> {
    (0..dataset.len())
        .map(|t| {
            let s = dataset.s().column(t).into_owned();
            let x = dataset.x().column(t).into_owned();
            extract_features(&s, &x, a)
        })
        .collect()
}

/// Logistic regression over [`ClassifierFeatures`], fault = positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: [f64; 3],
    pub bias: f64,
    pub epochs_run: usize,
    pub final_loss: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean cross-entropy of the model on (features, labels), computed in the
/// overflow-safe form max(z,0) − y·z + ln(1 + e^{−|z|}).
pub fn logistic_loss(
    weights: &[f64; 3],
    bias: f64,
    features: &[ClassifierFeatures],
    labels: &[Label],
) -> f64 {
    let mut total = 0.0;
    for (f, label) in features.iter().zip(labels) {
        let fa = f.to_array();
        let z = weights[0] * fa[0] + weights[1] * fa[1] + weights[2] * fa[2] + bias;
        let y = if *label == Label::Fault { 1.0 } else { 0.0 };
        total += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
    }
    total / features.len() as f64
}

/// Gradient of [`logistic_loss`] in (weights, bias).
pub fn logistic_gradient(
    weights: &[f64; 3],
    bias: f64,
    features: &[ClassifierFeatures],
    labels: &[Label],
) -> ([f64; 3], f64) {
    let mut gw = [0.0; 3];
    let mut gb = 0.0;
    for (f, label) in features.iter().zip(labels) {
        let fa = f.to_array();
        let z = weights[0] * fa[0] + weights[1] * fa[1] + weights[2] * fa[2] + bias;
        let y = if *label == Label::Fault { 1.0 } else { 0.0 };
        let err = sigmoid(z) - y;
        for (g, v) in gw.iter_mut().zip(fa) {
            *g += err * v;
        }
        gb += err;
    }
    let m = features.len() as f64;
    for g in gw.iter_mut() {
        *g /= m;
    }
    (gw, gb / m)
}

/// Full-batch gradient descent on mean cross-entropy, zero-initialized.
/// Training is fully deterministic (fixed iteration order); the seed
/// parameter is accepted for interface uniformity with the other trainers
/// and is unused.
pub fn train_logistic(
    features: &[ClassifierFeatures],
    labels: &[Label],
    learn_rate: f64,
    epochs: usize,
    _seed: u64,
) -> Result<LogisticModel> {
    if features.is_empty() {
        return Err(Error::InvalidInput(
            "logistic training needs at least one example".into(),
        ));
    }
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "logistic labels",
            expected: format!("{}", features.len()),
            actual: format!("{}", labels.len()),
        });
    }
    if !learn_rate.is_finite() || learn_rate <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "learn_rate must be finite and > 0, got {learn_rate}"
        )));
    }
    let mut weights = [0.0; 3];
    let mut bias = 0.0;
    for epoch in 0..epochs {
        let (gw, gb) = logistic_gradient(&weights, bias, features, labels);
        for (w, g) in weights.iter_mut().zip(gw) {
            *w -= learn_rate * g;
        }
        bias -= learn_rate * gb;
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical(format!(
                "logistic training diverged at epoch {epoch}"
            )));
        }
    }
    let final_loss = logistic_loss(&weights, bias, features, labels);
    if !final_loss.is_finite() {
        return Err(Error::Numerical(
            "logistic training loss is non-finite".into(),
        ));
    }
    Ok(LogisticModel {
        weights,
        bias,
        epochs_run: epochs,
        final_loss,
    })
}

/// Sigmoid probability of fault and the thresholded label; ties at exactly
/// 0.5 are labeled normal.
pub fn predict_logistic(model: &LogisticModel, features: &ClassifierFeatures) -> (f64, Label) {
    let fa = features.to_array();
    let z = model.weights[0] * fa[0] + model.weights[1] * fa[1] + model.weights[2] * fa[2]
        + model.bias;
    let probability = sigmoid(z);
    let label = if probability > 0.5 {
        Label::Fault
    } else {
        Label::Normal
    };
    (probability, label)
}
