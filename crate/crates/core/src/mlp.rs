//! Feed-forward baseline: one sigmoid hidden layer of width 2p and a
//! linear output head, trained by plain mini-batch SGD on MSE loss.
//!
//! The network exists to benchmark warm-started transfer against the
//! weighted-least-squares path; it deliberately has no regularization,
//! momentum, or schedule knobs beyond the learn rate.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::kernel::{Dataset, SamplePair};

/// One-hidden-layer perceptron. Hidden width is pinned to 2p by
/// construction; all parameters stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DMatrix<f64>,
    b2: DVector<f64>,
    /// Epochs accumulated over all fit calls that produced this model.
    pub epochs_run: usize,
    /// Training MSE at the end of the last fit; `None` before any training.
    pub final_loss: Option<f64>,
}

impl MlpModel {
    /// Assemble a model from explicit parameters, enforcing the 2p hidden
    /// width and finiteness.
    pub fn new(
        w1: DMatrix<f64>,
        b1: DVector<f64>,
        w2: DMatrix<f64>,
        b2: DVector<f64>,
    ) -> Result<Self> {
        let p = w1.ncols();
        let hidden = w1.nrows();
        let n = w2.nrows();
        if p == 0 || n == 0 || hidden != 2 * p || w2.ncols() != hidden {
            return Err(Error::DimensionMismatch {
                what: "MLP parameters",
                expected: format!("W1: {}x{p}, W2: {n}x{}", 2 * p, 2 * p),
                actual: format!("W1: {hidden}x{p}, W2: {n}x{}", w2.ncols()),
            });
        }
        if b1.len() != hidden || b2.len() != n {
            return Err(Error::DimensionMismatch {
                what: "MLP biases",
                expected: format!("b1: {hidden}, b2: {n}"),
                actual: format!("b1: {}, b2: {}", b1.len(), b2.len()),
            });
        }
        for (name, ok) in [
            ("W1", w1.iter().all(|v| v.is_finite())),
            ("b1", b1.iter().all(|v| v.is_finite())),
            ("W2", w2.iter().all(|v| v.is_finite())),
            ("b2", b2.iter().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "MLP parameter {name} contains non-finite entries"
                )));
            }
        }
        Ok(MlpModel {
            w1,
            b1,
            w2,
            b2,
            epochs_run: 0,
            final_loss: None,
        })
    }

    /// Fresh random initialization: every parameter uniform in
    /// ±1/√fan_in (fan_in = p for the hidden layer, 2p for the output).
    pub fn new_random(p: usize, n: usize, seed: u64) -> Result<Self> {
        if p == 0 || n == 0 {
            return Err(Error::InvalidInput(format!(
                "MLP dimensions must be >= 1, got p = {p}, n = {n}"
            )));
        }
        let hidden = 2 * p;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Uniform::new_inclusive(-1.0, 1.0)
            .map_err(|e| Error::Numerical(format!("uniform init: {e}")))?;
        let scale_in = 1.0 / (p as f64).sqrt();
        let scale_out = 1.0 / (hidden as f64).sqrt();
        let draw = |scale: f64, rng: &mut ChaCha8Rng| -> f64 { unit.sample(rng) * scale };
        let w1 = DMatrix::from_fn(hidden, p, |_, _| draw(scale_in, &mut rng));
        let b1 = DVector::from_fn(hidden, |_, _| draw(scale_in, &mut rng));
        let w2 = DMatrix::from_fn(n, hidden, |_, _| draw(scale_out, &mut rng));
        let b2 = DVector::from_fn(n, |_, _| draw(scale_out, &mut rng));
        MlpModel::new(w1, b1, w2, b2)
    }

    /// Input dimension p.
    pub fn feature_dim(&self) -> usize {
        self.w1.ncols()
    }

    /// Output dimension n.
    pub fn output_dim(&self) -> usize {
        self.w2.nrows()
    }

    pub fn w1(&self) -> &DMatrix<f64> {
        &self.w1
    }

    pub fn b1(&self) -> &DVector<f64> {
        &self.b1
    }

    pub fn w2(&self) -> &DMatrix<f64> {
        &self.w2
    }

    pub fn b2(&self) -> &DVector<f64> {
        &self.b2
    }

    /// Batched forward pass over the columns of `s`, returning the outputs
    /// and the hidden activations (needed for backprop).
    fn forward(&self, s: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut pre = &self.w1 * s;
        for mut col in pre.column_iter_mut() {
            col += &self.b1;
        }
        let h = pre.map(sigmoid);
        let mut y = &self.w2 * &h;
        for mut col in y.column_iter_mut() {
            col += &self.b2;
        }
        (y, h)
    }

    fn all_finite(&self) -> bool {
        self.w1.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Forward pass for a single input: W2·σ(W1·s + b1) + b2.
pub fn mlp_predict(model: &MlpModel, s: &DVector<f64>) -> Result<DVector<f64>> {
    if s.len() != model.feature_dim() {
        return Err(Error::DimensionMismatch {
            what: "MLP input",
            expected: format!("{}", model.feature_dim()),
            actual: format!("{}", s.len()),
        });
    }
    let h = (&model.w1 * s + &model.b1).map(sigmoid);
    Ok(&model.w2 * h + &model.b2)
}

/// Mean squared prediction error of the network over a dataset, averaged
/// over all n·T output entries — same units as `estimation::mse`, so the
/// two baselines are directly comparable.
pub fn mlp_mse(model: &MlpModel, dataset: &Dataset) -> Result<f64> {
    check_dataset(model, dataset)?;
    let (y, _) = model.forward(dataset.s());
    let residual = y - dataset.x();
    Ok(residual.norm_squared() / (residual.nrows() * residual.ncols()) as f64)
}

fn check_dataset(model: &MlpModel, dataset: &Dataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("MLP needs a non-empty dataset".into()));
    }
    if dataset.feature_dim() != model.feature_dim()
        || dataset.output_dim() != model.output_dim()
    {
        return Err(Error::DimensionMismatch {
            what: "MLP dataset",
            expected: format!("{}x{}", model.output_dim(), model.feature_dim()),
            actual: format!("{}x{}", dataset.output_dim(), dataset.feature_dim()),
        });
    }
    Ok(())
}

/// Gradients of L = (1/(2m))·Σ_t ‖y_t − x_t‖² over a batch.
struct Gradients {
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DMatrix<f64>,
    b2: DVector<f64>,
}

fn backprop(model: &MlpModel, s: &DMatrix<f64>, x: &DMatrix<f64>) -> Gradients {
    let (y, h) = model.forward(s);
    let m = s.ncols() as f64;
    let e = (y - x) / m;
    let g_w2 = &e * h.transpose();
    let g_b2 = DVector::from_fn(e.nrows(), |i, _| e.row(i).sum());
    let one_minus_h = h.map(|v| 1.0 - v);
    let dh = (model.w2.transpose() * &e)
        .component_mul(&h)
        .component_mul(&one_minus_h);
    let g_w1 = &dh * s.transpose();
    let g_b1 = DVector::from_fn(dh.nrows(), |i, _| dh.row(i).sum());
    Gradients {
        w1: g_w1,
        b1: g_b1,
        w2: g_w2,
        b2: g_b2,
    }
}

/// Mini-batch SGD on MSE loss. `epochs = 0` returns `init` unchanged.
/// Each epoch visits every sample once in a freshly shuffled order drawn
/// from the seeded generator, so equal seeds give bit-identical models.
pub fn mlp_fit(
    dataset: &Dataset,
    init: &MlpModel,
    learn_rate: f64,
    epochs: usize,
    batch: usize,
    seed: u64,
) -> Result<MlpModel> {
    check_dataset(init, dataset)?;
    if !learn_rate.is_finite() || learn_rate <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "learn_rate must be finite and > 0, got {learn_rate}"
        )));
    }
    if batch == 0 {
        return Err(Error::InvalidInput("batch size must be >= 1".into()));
    }
    if epochs == 0 {
        return Ok(init.clone());
    }
    let mut model = init.clone();
    let t = dataset.len();
    let mut order: Vec<usize> = (0..t).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let sb = dataset.s().select_columns(chunk.iter());
            let xb = dataset.x().select_columns(chunk.iter());
            let g = backprop(&model, &sb, &xb);
            model.w1 -= learn_rate * g.w1;
            model.b1 -= learn_rate * g.b1;
            model.w2 -= learn_rate * g.w2;
            model.b2 -= learn_rate * g.b2;
        }
        if !model.all_finite() {
            return Err(Error::Numerical(format!(
                "MLP training diverged at epoch {epoch}: non-finite parameters"
            )));
        }
    }
    model.epochs_run = init.epochs_run + epochs;
    model.final_loss = Some(mlp_mse(&model, dataset)?);
    Ok(model)
}

type WeightAccess = fn(&mut MlpModel) -> &mut DMatrix<f64>;
type BiasAccess = fn(&mut MlpModel) -> &mut DVector<f64>;

/// Central-finite-difference audit of the backprop gradients on the
/// single-sample loss L = ½‖y − x‖². Returns the worst relative error
/// across all parameters; entries where both gradients are below 1e-8 in
/// magnitude pass by the absolute criterion and are skipped.
pub fn mlp_gradient_check(model: &MlpModel, sample: &SamplePair, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1e-2], got {epsilon}"
        )));
    }
    if sample.s().len() != model.feature_dim() || sample.x().len() != model.output_dim() {
        return Err(Error::DimensionMismatch {
            what: "gradient-check sample",
            expected: format!("s: {}, x: {}", model.feature_dim(), model.output_dim()),
            actual: format!("s: {}, x: {}", sample.s().len(), sample.x().len()),
        });
    }
    let s = DMatrix::from_column_slice(sample.s().len(), 1, sample.s().as_slice());
    let x = DMatrix::from_column_slice(sample.x().len(), 1, sample.x().as_slice());
    // m = 1, so backprop's (1/m)-scaled loss is exactly ½‖y − x‖².
    let analytic = backprop(model, &s, &x);
    let loss = |m: &MlpModel| -> f64 {
        let (y, _) = m.forward(&s);
        0.5 * (y - &x).norm_squared()
    };

    let mut worst: f64 = 0.0;
    let mut scratch = model.clone();
    let blocks: [(&DMatrix<f64>, WeightAccess); 2] = [
        (&analytic.w1, |m| &mut m.w1),
        (&analytic.w2, |m| &mut m.w2),
    ];
    for (grad, access) in blocks {
        for idx in 0..grad.len() {
            let original = access(&mut scratch)[idx];
            access(&mut scratch)[idx] = original + epsilon;
            let plus = loss(&scratch);
            access(&mut scratch)[idx] = original - epsilon;
            let minus = loss(&scratch);
            access(&mut scratch)[idx] = original;
            update_worst(&mut worst, (plus - minus) / (2.0 * epsilon), grad[idx]);
        }
    }
    let bias_blocks: [(&DVector<f64>, BiasAccess); 2] = [
        (&analytic.b1, |m| &mut m.b1),
        (&analytic.b2, |m| &mut m.b2),
    ];
    for (grad, access) in bias_blocks {
        for idx in 0..grad.len() {
            let original = access(&mut scratch)[idx];
            access(&mut scratch)[idx] = original + epsilon;
            let plus = loss(&scratch);
            access(&mut scratch)[idx] = original - epsilon;
            let minus = loss(&scratch);
            access(&mut scratch)[idx] = original;
            update_worst(&mut worst, (plus - minus) / (2.0 * epsilon), grad[idx]);
        }
    }
    Ok(worst)
}

fn update_worst(worst: &mut f64, numeric: f64, analytic: f64) {
    let scale = numeric.abs().max(analytic.abs());
    if scale < 1e-8 {
        return; // both below the absolute floor: passes trivially
    }
    *worst = worst.max((numeric - analytic).abs() / scale);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{fit_ls, mse, FitConfig};
    use crate::kernel::{derive_seed, simulate, TransitionMatrix};
    use rand_distr::StandardNormal;

    fn random_model(p: usize, n: usize, seed: u64) -> MlpModel {
        MlpModel::new_random(p, n, seed).unwrap()
    }

    fn kernelish_inputs(p: usize, t: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..t)
            .map(|_| {
                let mut v = DVector::from_fn(p, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                });
                v[p - 1] = 1.0;
                v
            })
            .collect()
    }

    fn linear_dataset(a: &DMatrix<f64>, t: usize, noise: f64, seed: u64) -> Dataset {
        let matrix = TransitionMatrix::raw(a.clone()).unwrap();
        let inputs = kernelish_inputs(a.ncols(), t, seed);
        simulate(&matrix, &inputs, noise, derive_seed(seed, 1)).unwrap()
    }

    #[test]
    fn zero_parameters_predict_the_output_bias() {
        let p = 3;
        let n = 2;
        let zero = MlpModel::new(
            DMatrix::zeros(2 * p, p),
            DVector::zeros(2 * p),
            DMatrix::zeros(n, 2 * p),
            DVector::zeros(n),
        )
        .unwrap();
        let s = DVector::from_column_slice(&[1.0, -2.0, 1.0]);
        assert_eq!(mlp_predict(&zero, &s).unwrap(), DVector::zeros(n));

        let constant = MlpModel::new(
            DMatrix::zeros(2 * p, p),
            DVector::zeros(2 * p),
            DMatrix::zeros(n, 2 * p),
            DVector::from_column_slice(&[7.0, -3.0]),
        )
        .unwrap();
        for trial in 0..5 {
            let input = kernelish_inputs(p, 1, trial)[0].clone();
            let out = mlp_predict(&constant, &input).unwrap();
            assert_eq!(out, DVector::from_column_slice(&[7.0, -3.0]));
        }
    }

    #[test]
    fn forward_matches_two_loop_oracle() {
        let p = 4;
        let n = 3;
        let model = random_model(p, n, 1001);
        let s = kernelish_inputs(p, 1, 1002)[0].clone();
        let fast = mlp_predict(&model, &s).unwrap();
        // Independent scalar-loop forward pass.
        let hidden = 2 * p;
        let mut h = vec![0.0; hidden];
        for (i, hi) in h.iter_mut().enumerate() {
            let mut z = model.b1()[i];
            for j in 0..p {
                z += model.w1()[(i, j)] * s[j];
            }
            *hi = 1.0 / (1.0 + (-z).exp());
        }
        for i in 0..n {
            let mut y = model.b2()[i];
            for (j, hj) in h.iter().enumerate() {
                y += model.w2()[(i, j)] * hj;
            }
            assert!((fast[i] - y).abs() < 1e-12, "output {i}: {} vs {y}", fast[i]);
        }
    }

    #[test]
    fn constructor_rejects_wrong_hidden_width_and_non_finite() {
        let bad_width = MlpModel::new(
            DMatrix::zeros(5, 3), // hidden must be 6 for p = 3
            DVector::zeros(5),
            DMatrix::zeros(1, 5),
            DVector::zeros(1),
        );
        assert!(matches!(bad_width, Err(Error::DimensionMismatch { .. })));
        let mut w1 = DMatrix::zeros(6, 3);
        w1[(0, 0)] = f64::NAN;
        let bad_value = MlpModel::new(
            w1,
            DVector::zeros(6),
            DMatrix::zeros(1, 6),
            DVector::zeros(1),
        );
        assert!(matches!(bad_value, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn new_random_is_deterministic_and_scale_bounded() {
        let p = 5;
        let a = random_model(p, 2, 42);
        let b = random_model(p, 2, 42);
        assert_eq!(a, b);
        let c = random_model(p, 2, 43);
        assert_ne!(a, c);
        let lim_in = 1.0 / (p as f64).sqrt() + 1e-12;
        let lim_out = 1.0 / (2.0 * p as f64).sqrt() + 1e-12;
        assert!(a.w1().iter().chain(a.b1().iter()).all(|v| v.abs() <= lim_in));
        assert!(a.w2().iter().chain(a.b2().iter()).all(|v| v.abs() <= lim_out));
    }

    #[test]
    fn zero_epochs_returns_init_bit_identically() {
        let a = DMatrix::from_row_slice(1, 3, &[0.4, -0.2, 0.7]);
        let data = linear_dataset(&a, 20, 0.1, 7);
        let init = random_model(3, 1, 8);
        let out = mlp_fit(&data, &init, 0.1, 0, 4, 9).unwrap();
        assert_eq!(out, init);
    }

    #[test]
    fn equal_seeds_train_bit_identical_models() {
        let a = DMatrix::from_row_slice(1, 3, &[0.4, -0.2, 0.7]);
        let data = linear_dataset(&a, 64, 0.3, 17);
        let init = random_model(3, 1, 18);
        let m1 = mlp_fit(&data, &init, 0.05, 10, 8, 19).unwrap();
        let m2 = mlp_fit(&data, &init, 0.05, 10, 8, 19).unwrap();
        assert_eq!(m1, m2);
        let m3 = mlp_fit(&data, &init, 0.05, 10, 8, 20).unwrap();
        assert_ne!(m1, m3, "different shuffle seeds should move the weights");
    }

    #[test]
    fn converges_near_least_squares_on_affine_data() {
        let a = DMatrix::from_row_slice(1, 3, &[0.5, -0.3, 0.8]);
        let data = linear_dataset(&a, 128, 0.5, 27);
        let ls = fit_ls(&data, &FitConfig::new(0.0).unwrap()).unwrap();
        let ls_mse = mse(&ls, &data).unwrap();
        let init = random_model(3, 1, 28);
        let initial_mse = mlp_mse(&init, &data).unwrap();
        let trained = mlp_fit(&data, &init, 0.3, 4000, 32, 29).unwrap();
        let trained_mse = mlp_mse(&trained, &data).unwrap();
        assert!(trained_mse <= initial_mse, "{trained_mse} vs init {initial_mse}");
        assert!(
            trained_mse <= 1.05 * ls_mse,
            "MLP {trained_mse} vs LS {ls_mse}"
        );
        assert_eq!(trained.epochs_run, 4000);
        assert!((trained.final_loss.unwrap() - trained_mse).abs() < 1e-15);
    }

    #[test]
    fn divergence_reports_the_epoch() {
        let a = DMatrix::from_row_slice(1, 3, &[0.5, -0.3, 0.8]);
        let data = linear_dataset(&a, 32, 0.5, 37);
        let init = random_model(3, 1, 38);
        match mlp_fit(&data, &init, 1e12, 5, 8, 39) {
            Err(Error::Numerical(msg)) => {
                assert!(msg.contains("epoch"), "message should name the epoch: {msg}");
            }
            other => panic!("expected numerical divergence, got {other:?}"),
        }
    }

    #[test]
    fn fit_rejects_bad_arguments() {
        let a = DMatrix::from_row_slice(1, 3, &[0.5, -0.3, 0.8]);
        let data = linear_dataset(&a, 8, 0.1, 47);
        let init = random_model(3, 1, 48);
        assert!(mlp_fit(&data, &init, 0.0, 1, 4, 0).is_err());
        assert!(mlp_fit(&data, &init, -0.5, 1, 4, 0).is_err());
        assert!(mlp_fit(&data, &init, 0.1, 1, 0, 0).is_err());
        let wrong = random_model(4, 1, 49);
        assert!(matches!(
            mlp_fit(&data, &wrong, 0.1, 1, 4, 0),
            Err(Error::DimensionMismatch { .. })
        ));
        let s = DVector::from_column_slice(&[1.0, 2.0]);
        assert!(matches!(
            mlp_predict(&init, &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_check_passes_on_random_small_models() {
        for trial in 0u64..20 {
            let p = 2 + (trial % 3) as usize; // p ≤ 4
            let n = 1 + (trial % 2) as usize;
            let model = random_model(p, n, 500 + trial);
            let mut rng = ChaCha8Rng::seed_from_u64(600 + trial);
            let mut s = DVector::from_fn(p, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            s[p - 1] = 1.0;
            let x = DVector::from_fn(n, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let sample = SamplePair::new(s, x).unwrap();
            let err = mlp_gradient_check(&model, &sample, 1e-5).unwrap();
            assert!(err <= 1e-4, "trial {trial}: max relative error {err}");
        }
    }

    #[test]
    fn gradient_check_at_a_perfect_fit_passes_by_absolute_floor() {
        // Zero weights → constant output b2; choose x = b2 so the residual
        // and hence every gradient vanishes exactly.
        let p = 3;
        let n = 2;
        let model = MlpModel::new(
            DMatrix::zeros(2 * p, p),
            DVector::zeros(2 * p),
            DMatrix::zeros(n, 2 * p),
            DVector::from_column_slice(&[0.4, -0.1]),
        )
        .unwrap();
        let sample = SamplePair::new(
            DVector::from_column_slice(&[0.5, -0.5, 1.0]),
            DVector::from_column_slice(&[0.4, -0.1]),
        )
        .unwrap();
        let err = mlp_gradient_check(&model, &sample, 1e-5).unwrap();
        assert_eq!(err, 0.0, "all entries below the absolute floor must be skipped");
    }

    #[test]
    fn gradient_check_error_grows_with_epsilon() {
        let model = random_model(3, 1, 700);
        let sample = SamplePair::new(
            DVector::from_column_slice(&[0.8, -1.2, 1.0]),
            DVector::from_column_slice(&[0.3]),
        )
        .unwrap();
        let coarse = mlp_gradient_check(&model, &sample, 1e-2).unwrap();
        let fine = mlp_gradient_check(&model, &sample, 1e-5).unwrap();
        assert!(
            coarse > fine,
            "truncation error should dominate at 1e-2: coarse {coarse}, fine {fine}"
        );
        assert!(mlp_gradient_check(&model, &sample, 0.0).is_err());
        assert!(mlp_gradient_check(&model, &sample, 0.02).is_err());
    }

    #[test]
    fn mlp_mse_matches_manual_average() {
        let model = random_model(2, 2, 800);
        let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, -0.2, 0.5]);
        let data = linear_dataset(&a, 10, 0.2, 801);
        let fast = mlp_mse(&model, &data).unwrap();
        let mut total = 0.0;
        for t in 0..data.len() {
            let (s, x) = data.pair(t);
            let y = mlp_predict(&model, &s).unwrap();
            total += (y - x).norm_squared();
        }
        assert!((fast - total / 20.0).abs() < 1e-12);
    }
}
