//! Least-squares and weighted-least-squares fitting of transition matrices,
//! the weight-grid transfer procedure, and cross-validation over degree and
//! ridge strength.
//!
//! All fits solve the normal equations Â = X Sᵀ (S Sᵀ + αI)⁻¹ through a
//! symmetric positive-definite factorization. Rank-deficient systems at
//! α = 0 fail loudly with the deficient dimension instead of silently
//! pseudo-inverting.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{Dataset, KernelConfig, RawSequence, TransitionMatrix};

/// Shared fitting parameters: ridge weight on ‖W‖_F² and, when the data
/// went through the polynomial kernel, the featurization to stamp onto the
/// fitted matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub ridge_alpha: f64,
    pub kernel: Option<KernelConfig>,
}

impl FitConfig {
    pub fn new(ridge_alpha: f64) -> Result<Self> {
        if !ridge_alpha.is_finite() || ridge_alpha < 0.0 {
            return Err(Error::InvalidInput(format!(
                "ridge_alpha must be finite and >= 0, got {ridge_alpha}"
            )));
        }
        Ok(FitConfig {
            ridge_alpha,
            kernel: None,
        })
    }

    pub fn with_kernel(mut self, kernel: KernelConfig) -> Self {
        self.kernel = Some(kernel);
        self
    }
}

/// Source/target weights of the WLS transfer objective. Both strictly
/// positive; the zero-source limit is exercised only by tests through the
/// struct literal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsWeights {
    pub source_weight: f64,
    pub target_weight: f64,
}

impl WlsWeights {
    pub fn new(source_weight: f64, target_weight: f64) -> Result<Self> {
        for (name, w) in [("source_weight", source_weight), ("target_weight", target_weight)] {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and > 0, got {w}"
                )));
            }
        }
        Ok(WlsWeights {
            source_weight,
            target_weight,
        })
    }
}

impl std::fmt::Display for WlsWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.source_weight, self.target_weight)
    }
}

/// One scored cell of a cross-validation grid. Singular fits are kept in
/// the report (mse = ∞, singular = true) rather than dropped, so the grid
/// shape always matches the request.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCell<P> {
    pub params: P,
    pub mse: f64,
    pub singular: bool,
}

/// Grid-search report: every scored cell plus the argmin.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport<P> {
    pub grid: Vec<CvCell<P>>,
    pub best: P,
    pub best_mse: f64,
}

/// Degree/ridge combination scored by model cross-validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelChoice {
    pub degree: usize,
    pub ridge_alpha: f64,
}

/// Closed-form ridge least squares: argmin_W ‖WS − X‖² + α‖W‖_F², i.e.
/// Â = X Sᵀ (S Sᵀ + αI)⁻¹. With α = 0 and full-row-rank S this is the
/// exact least-squares solution.
pub fn fit_ls(dataset: &Dataset, config: &FitConfig) -> Result<TransitionMatrix> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("fit_ls needs at least one sample".into()));
    }
    solve_normal_equations(dataset.s(), dataset.x(), config)
}

/// Weighted least squares over a source and a target dataset:
/// argmin_W w₁‖WS⁽¹⁾ − X⁽¹⁾‖² + w₂‖WS⁽²⁾ − X⁽²⁾‖² + α‖W‖_F²,
/// solved by scaling each dataset's columns by √w and pooling.
pub fn fit_wls(
    source: &Dataset,
    target: &Dataset,
    weights: &WlsWeights,
    config: &FitConfig,
) -> Result<TransitionMatrix> {
    if source.feature_dim() != target.feature_dim()
        || source.output_dim() != target.output_dim()
    {
        return Err(Error::DimensionMismatch {
            what: "WLS datasets",
            expected: format!("{}x{}", source.output_dim(), source.feature_dim()),
            actual: format!("{}x{}", target.output_dim(), target.feature_dim()),
        });
    }
    for (name, w) in [
        ("source_weight", weights.source_weight),
        ("target_weight", weights.target_weight),
    ] {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidInput(format!(
                "{name} must be finite and >= 0, got {w}"
            )));
        }
    }
    let t_total = source.len() + target.len();
    if t_total == 0 {
        return Err(Error::InvalidInput("fit_wls needs at least one sample".into()));
    }
    let p = source.feature_dim();
    let n = source.output_dim();
    let mut s = DMatrix::zeros(p, t_total);
    let mut x = DMatrix::zeros(n, t_total);
    let sw = weights.source_weight.sqrt();
    let tw = weights.target_weight.sqrt();
    for (offset, (data, scale)) in [(source, sw), (target, tw)].iter().enumerate() {
        let start = if offset == 0 { 0 } else { source.len() };
        let mut s_block = s.columns_mut(start, data.len());
        s_block.copy_from(data.s());
        s_block *= *scale;
        let mut x_block = x.columns_mut(start, data.len());
        x_block.copy_from(data.x());
        x_block *= *scale;
    }
    solve_normal_equations(&s, &x, config)
}

fn solve_normal_equations(
    s: &DMatrix<f64>,
    x: &DMatrix<f64>,
    config: &FitConfig,
) -> Result<TransitionMatrix> {
    let alpha = config.ridge_alpha;
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidInput(format!(
            "ridge_alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let p = s.nrows();
    let mut gram = s * s.transpose();
    for i in 0..p {
        gram[(i, i)] += alpha;
    }
    let rhs = s * x.transpose(); // p×n
    let solution = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => {
            // SPD factorization failed. At α = 0 that means rank deficiency;
            // report the deficient dimension. With α > 0 the system is
            // positive definite in exact arithmetic, so a failure here is a
            // conditioning breakdown.
            if alpha == 0.0 {
                let eps = gram.norm() * p as f64 * f64::EPSILON;
                let rank = gram.rank(eps.max(f64::MIN_POSITIVE));
                return Err(Error::Singular { size: p, rank });
            }
            return Err(Error::Numerical(format!(
                "Cholesky factorization of S·Sᵀ + {alpha}·I failed despite positive ridge"
            )));
        }
    };
    let estimate = solution.transpose(); // n×p
    if estimate.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "least-squares solution contains non-finite entries".into(),
        ));
    }
    match config.kernel {
        Some(kernel) => {
            if kernel.n() != estimate.nrows() || kernel.p() != estimate.ncols() {
                return Err(Error::DimensionMismatch {
                    what: "fit kernel config",
                    expected: format!("{}x{}", kernel.n(), kernel.p()),
                    actual: format!("{}x{}", estimate.nrows(), estimate.ncols()),
                });
            }
            TransitionMatrix::new(estimate, kernel)
        }
        None => TransitionMatrix::raw(estimate),
    }
}

/// Mean squared prediction error: mean over all T·n entries of (X − AS)².
pub fn mse(a: &TransitionMatrix, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("mse of an empty dataset".into()));
    }
    if dataset.feature_dim() != a.feature_dim() || dataset.output_dim() != a.output_dim() {
        return Err(Error::DimensionMismatch {
            what: "mse dataset",
            expected: format!("{}x{}", a.output_dim(), a.feature_dim()),
            actual: format!("{}x{}", dataset.output_dim(), dataset.feature_dim()),
        });
    }
    let residual = dataset.x() - a.entries() * dataset.s();
    Ok(residual.norm_squared() / (residual.nrows() * residual.ncols()) as f64)
}

/// Fit one WLS model per weight pair on (source, target_train), score each
/// on target_valid, and return the best matrix with the full report.
/// Ties break toward the larger target weight.
pub fn transfer(
    source_data: &Dataset,
    target_train: &Dataset,
    target_valid: &Dataset,
    weight_grid: &[WlsWeights],
    config: &FitConfig,
) -> Result<(TransitionMatrix, CvReport<WlsWeights>)> {
    if weight_grid.is_empty() {
        return Err(Error::InvalidInput("transfer needs a non-empty weight grid".into()));
    }
    if target_valid.is_empty() {
        return Err(Error::InvalidInput("transfer needs a non-empty validation set".into()));
    }
    let mut grid = Vec::with_capacity(weight_grid.len());
    let mut best: Option<(WlsWeights, f64, TransitionMatrix)> = None;
    for weights in weight_grid {
        match fit_wls(source_data, target_train, weights, config) {
            Ok(matrix) => {
                let score = mse(&matrix, target_valid)?;
                grid.push(CvCell {
                    params: *weights,
                    mse: score,
                    singular: false,
                });
                let better = match &best {
                    None => true,
                    Some((bw, bm, _)) => {
                        score < *bm
                            || (score == *bm && weights.target_weight > bw.target_weight)
                    }
                };
                if better {
                    best = Some((*weights, score, matrix));
                }
            }
            Err(Error::Singular { .. }) => {
                grid.push(CvCell {
                    params: *weights,
                    mse: f64::INFINITY,
                    singular: true,
                });
            }
            Err(other) => return Err(other),
        }
    }
    let (best_weights, best_mse, best_matrix) = best.ok_or_else(|| {
        Error::Numerical("every weight pair in the transfer grid was singular".into())
    })?;
    Ok((
        best_matrix,
        CvReport {
            grid,
            best: best_weights,
            best_mse,
        },
    ))
}

/// Featurize raw train/valid sequences at each candidate degree, fit at
/// each ridge value, and score validation MSE. Singular (d, α) cells are
/// recorded in the report and skipped by the argmin; ties keep the first
/// cell in grid order (degrees ascending, then alphas).
pub fn cross_validate_model(
    train: &RawSequence,
    valid: &RawSequence,
    degree_grid: &[usize],
    alpha_grid: &[f64],
) -> Result<CvReport<ModelChoice>> {
    if degree_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::InvalidInput(
            "cross-validation grids must be non-empty".into(),
        ));
    }
    let mut grid = Vec::with_capacity(degree_grid.len() * alpha_grid.len());
    let mut best: Option<(ModelChoice, f64)> = None;
    for &degree in degree_grid {
        let (_, train_data) = train.featurize(degree)?;
        let (_, valid_data) = valid.featurize(degree)?;
        for &ridge_alpha in alpha_grid {
            let params = ModelChoice {
                degree,
                ridge_alpha,
            };
            let config = FitConfig::new(ridge_alpha)?;
            match fit_ls(&train_data, &config) {
                Ok(matrix) => {
                    let score = mse(&matrix, &valid_data)?;
                    grid.push(CvCell {
                        params,
                        mse: score,
                        singular: false,
                    });
                    if best.is_none_or(|(_, bm)| score < bm) {
                        best = Some((params, score));
                    }
                }
                Err(Error::Singular { .. }) => {
                    grid.push(CvCell {
                        params,
                        mse: f64::INFINITY,
                        singular: true,
                    });
                }
                Err(other) => return Err(other),
            }
        }
    }
    let (best_params, best_mse) = best.ok_or_else(|| {
        Error::Numerical("every cross-validation cell was singular".into())
    })?;
    Ok(CvReport {
        grid,
        best: best_params,
        best_mse,
    })
}
