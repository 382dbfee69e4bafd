//! Feed-forward encoder–decoder with hand-written backpropagation.
//!
//! The network maps a turn-level vector through a bottleneck and back out to
//! the dimensionality of the following turn's vector:
//!
//! ```text
//! x -> Dense -> BN -> ReLU -> Dense -> z          (encoder)
//! z -> BN -> ReLU -> Dense -> BN -> ReLU -> Dense -> x_hat   (decoder)
//! ```
//!
//! The bottleneck `z` is the raw output of the encoder's last dense layer;
//! the first decoder batch-norm sees it but does not change what callers
//! read back as the embedding. Training minimizes the smooth-L1 distance
//! between `x_hat` and the observed next-turn vector.

mod adam;
mod checkpoint;
mod matrix;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint};
pub use matrix::Matrix;
pub use train::{train, SessionPairs, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use rand::Rng;

/// Elementwise smooth-L1: quadratic inside the unit interval, linear outside.
#[inline]
pub fn smooth_l1_term(d: f64) -> f64 {
    if d.abs() <= 1.0 {
        0.5 * d * d
    } else {
        d.abs() - 0.5
    }
}

/// Derivative of [`smooth_l1_term`]; the quadratic branch is used at the
/// kink, which agrees with the linear branch's limit.
#[inline]
pub fn smooth_l1_grad(d: f64) -> f64 {
    if d.abs() <= 1.0 {
        d
    } else {
        d.signum()
    }
}

/// Smooth-L1 distance between two equal-length vectors: the sum of the
/// per-component terms.
pub fn smooth_l1(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "smooth_l1 length mismatch");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| smooth_l1_term(x - y))
        .sum()
}

/// Fully connected layer storing `weights` as `(out x in)` and a bias per
/// output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    /// He-uniform initialization: `U(-limit, limit)` with
    /// `limit = sqrt(6 / fan_in)`; biases start at zero.
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let mut weights = Matrix::zeros(out_dim, in_dim);
        for w in weights.data_mut() {
            *w = rng.gen_range(-limit..limit);
        }
        Self {
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    fn forward(&self, input: &Matrix) -> Matrix {
        let mut out = input.matmul_transpose_b(&self.weights);
        out.add_row_bias(&self.bias);
        out
    }
}

/// Batch normalization with learned scale/shift and running statistics for
/// inference.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;

impl BatchNormLayer {
    pub fn init(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        }
    }

    fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Train-mode forward: normalize by batch statistics (biased variance)
    /// and update the running statistics (unbiased variance, standard
    /// momentum rule).
    fn forward_train(&mut self, input: &Matrix) -> BnCache {
        let m = input.rows() as f64;
        let mean = input.col_mean();
        let mut var = vec![0.0; self.dim()];
        for row in input.iter_rows() {
            for ((v, &x), &mu) in var.iter_mut().zip(row).zip(&mean) {
                let d = x - mu;
                *v += d * d;
            }
        }
        for v in &mut var {
            *v /= m;
        }
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + self.epsilon).sqrt()).collect();

        let mut normalized = Matrix::zeros(input.rows(), input.cols());
        let mut output = Matrix::zeros(input.rows(), input.cols());
        for r in 0..input.rows() {
            let in_row = input.row(r);
            for c in 0..input.cols() {
                let xn = (in_row[c] - mean[c]) * inv_std[c];
                normalized.set(r, c, xn);
                output.set(r, c, self.gamma[c] * xn + self.beta[c]);
            }
        }

        let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
        for c in 0..self.dim() {
            self.running_mean[c] =
                (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean[c];
            self.running_var[c] =
                (1.0 - self.momentum) * self.running_var[c] + self.momentum * var[c] * unbias;
        }

        BnCache {
            normalized,
            inv_std,
            output,
        }
    }

    /// Inference-mode forward using the running statistics.
    fn forward_infer(&self, input: &Matrix) -> Matrix {
        let inv_std: Vec<f64> = self
            .running_var
            .iter()
            .map(|&v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let mut output = Matrix::zeros(input.rows(), input.cols());
        for r in 0..input.rows() {
            let in_row = input.row(r);
            let out_row = output.row_mut(r);
            for c in 0..in_row.len() {
                out_row[c] =
                    self.gamma[c] * (in_row[c] - self.running_mean[c]) * inv_std[c] + self.beta[c];
            }
        }
        output
    }

    /// Backward through train-mode normalization, including the terms from
    /// the batch mean and variance depending on every sample.
    fn backward(&self, cache: &BnCache, d_out: &Matrix) -> (Vec<f64>, Vec<f64>, Matrix) {
        let m = d_out.rows() as f64;
        let dim = self.dim();
        let mut d_gamma = vec![0.0; dim];
        let mut d_beta = vec![0.0; dim];
        for (dy_row, xn_row) in d_out.iter_rows().zip(cache.normalized.iter_rows()) {
            for c in 0..dim {
                d_gamma[c] += dy_row[c] * xn_row[c];
                d_beta[c] += dy_row[c];
            }
        }
        let mut d_input = Matrix::zeros(d_out.rows(), dim);
        for r in 0..d_out.rows() {
            let dy_row = d_out.row(r);
            let xn_row = cache.normalized.row(r);
            let di_row = d_input.row_mut(r);
            for c in 0..dim {
                di_row[c] = self.gamma[c] * cache.inv_std[c]
                    * (dy_row[c] - d_beta[c] / m - xn_row[c] * d_gamma[c] / m);
            }
        }
        (d_gamma, d_beta, d_input)
    }
}

struct BnCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
    output: Matrix,
}

/// All learnable parameters plus batch-norm running statistics.
///
/// `widths` is the five-stage layer plan `[input, hidden, bottleneck,
/// hidden, output]`; the bottleneck must be strictly narrower than the
/// input so the embedding stays undercomplete.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub widths: Vec<usize>,
    pub dense: Vec<DenseLayer>,
    pub bn: Vec<BatchNormLayer>,
}

impl NetworkParams {
    /// Default topology for 228-dimensional turn vectors with a
    /// 30-dimensional embedding.
    pub fn default_widths() -> Vec<usize> {
        vec![228, 128, 30, 128, 228]
    }

    pub fn init(widths: &[usize], rng: &mut impl Rng) -> Result<Self> {
        Self::validate_widths(widths)?;
        let dense = vec![
            DenseLayer::init(widths[1], widths[0], rng),
            DenseLayer::init(widths[2], widths[1], rng),
            DenseLayer::init(widths[3], widths[2], rng),
            DenseLayer::init(widths[4], widths[3], rng),
        ];
        let bn = vec![
            BatchNormLayer::init(widths[1]),
            BatchNormLayer::init(widths[2]),
            BatchNormLayer::init(widths[3]),
        ];
        Ok(Self {
            widths: widths.to_vec(),
            dense,
            bn,
        })
    }

    pub fn validate_widths(widths: &[usize]) -> Result<()> {
        if widths.len() != 5 {
            return Err(Error::Config(format!(
                "topology needs 5 widths, got {}",
                widths.len()
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("zero-width layer".to_string()));
        }
        if widths[2] >= widths[0] {
            return Err(Error::Config(format!(
                "embedding dim {} must be smaller than input dim {}",
                widths[2], widths[0]
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn embedding_dim(&self) -> usize {
        self.widths[2]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[4]
    }

    pub fn is_finite(&self) -> bool {
        self.dense
            .iter()
            .all(|d| d.weights.is_finite() && d.bias.iter().all(|v| v.is_finite()))
            && self.bn.iter().all(|b| {
                b.gamma.iter().all(|v| v.is_finite())
                    && b.beta.iter().all(|v| v.is_finite())
                    && b.running_mean.iter().all(|v| v.is_finite())
                    && b.running_var.iter().all(|v| v.is_finite() && *v >= 0.0)
            })
    }
}

/// Whether batch normalization uses batch statistics (training) or the
/// stored running statistics (inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Outputs of one forward pass: the embedding batch, the prediction batch,
/// and (in train mode) the intermediates backpropagation needs.
pub struct ForwardPass {
    pub z: Matrix,
    pub x_hat: Matrix,
    cache: Option<Cache>,
}

struct Cache {
    input: Matrix,
    bn0: BnCache,
    relu0: Matrix,
    bn1: BnCache,
    relu1: Matrix,
    bn2: BnCache,
    relu2: Matrix,
}

fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

fn relu_backward(d_out: &Matrix, activated: &Matrix) -> Matrix {
    let mut d_in = d_out.clone();
    for (d, &a) in d_in.data_mut().iter_mut().zip(activated.data()) {
        if a <= 0.0 {
            *d = 0.0;
        }
    }
    d_in
}

/// Run a batch through encoder and decoder.
///
/// Train mode needs at least two rows (batch statistics), updates the
/// batch-norm running statistics, and retains the cache for [`backward`].
pub fn forward(params: &mut NetworkParams, x: &Matrix, mode: Mode) -> Result<ForwardPass> {
    if x.rows() == 0 {
        return Err(Error::Degenerate("empty batch".to_string()));
    }
    if x.cols() != params.input_dim() {
        return Err(Error::Dimension {
            expected: params.input_dim(),
            got: x.cols(),
            context: "forward input width".into(),
        });
    }
    match mode {
        Mode::Train => {
            if x.rows() < 2 {
                return Err(Error::Degenerate(
                    "train-mode forward needs a batch of at least 2".to_string(),
                ));
            }
            let a0 = params.dense[0].forward(x);
            let bn0 = params.bn[0].forward_train(&a0);
            let relu0 = relu(&bn0.output);
            let z = params.dense[1].forward(&relu0);
            let bn1 = params.bn[1].forward_train(&z);
            let relu1 = relu(&bn1.output);
            let a2 = params.dense[2].forward(&relu1);
            let bn2 = params.bn[2].forward_train(&a2);
            let relu2 = relu(&bn2.output);
            let x_hat = params.dense[3].forward(&relu2);
            Ok(ForwardPass {
                z: z.clone(),
                x_hat,
                cache: Some(Cache {
                    input: x.clone(),
                    bn0,
                    relu0,
                    bn1,
                    relu1,
                    bn2,
                    relu2,
                }),
            })
        }
        Mode::Infer => {
            let a0 = params.dense[0].forward(x);
            let y0 = params.bn[0].forward_infer(&a0);
            let relu0 = relu(&y0);
            let z = params.dense[1].forward(&relu0);
            let y1 = params.bn[1].forward_infer(&z);
            let relu1 = relu(&y1);
            let a2 = params.dense[2].forward(&relu1);
            let y2 = params.bn[2].forward_infer(&a2);
            let relu2 = relu(&y2);
            let x_hat = params.dense[3].forward(&relu2);
            Ok(ForwardPass {
                z,
                x_hat,
                cache: None,
            })
        }
    }
}

/// Encoder-only inference: the embedding of each input row.
pub fn encode_batch(params: &NetworkParams, x: &Matrix) -> Result<Matrix> {
    if x.cols() != params.input_dim() {
        return Err(Error::Dimension {
            expected: params.input_dim(),
            got: x.cols(),
            context: "encode input width".into(),
        });
    }
    let a0 = params.dense[0].forward(x);
    let y0 = params.bn[0].forward_infer(&a0);
    let relu0 = relu(&y0);
    Ok(params.dense[1].forward(&relu0))
}

/// Gradients for every learnable tensor, in network order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub dense_w: Vec<Matrix>,
    pub dense_b: Vec<Vec<f64>>,
    pub bn_gamma: Vec<Vec<f64>>,
    pub bn_beta: Vec<Vec<f64>>,
}

/// Mean-per-pair smooth-L1 loss of a prediction batch against its targets.
pub fn batch_loss(x_hat: &Matrix, targets: &Matrix) -> f64 {
    assert_eq!(x_hat.rows(), targets.rows(), "batch sizes");
    let total: f64 = x_hat
        .iter_rows()
        .zip(targets.iter_rows())
        .map(|(p, t)| {
            p.iter()
                .zip(t)
                .map(|(&a, &b)| smooth_l1_term(a - b))
                .sum::<f64>()
        })
        .sum();
    total / x_hat.rows() as f64
}

/// Backpropagate the mean-per-pair smooth-L1 loss through a train-mode
/// forward pass. Returns the loss and exact analytic gradients for all
/// weights, biases, gammas and betas.
pub fn backward(
    params: &NetworkParams,
    pass: &ForwardPass,
    targets: &Matrix,
) -> Result<(f64, Gradients)> {
    let cache = pass
        .cache
        .as_ref()
        .ok_or_else(|| Error::Degenerate("backward needs a train-mode forward".to_string()))?;
    if targets.rows() != pass.x_hat.rows() || targets.cols() != pass.x_hat.cols() {
        return Err(Error::Dimension {
            expected: pass.x_hat.cols(),
            got: targets.cols(),
            context: "backward target shape".into(),
        });
    }
    let batch = pass.x_hat.rows() as f64;
    let loss = batch_loss(&pass.x_hat, targets);

    // dL/d x_hat for L = (1/B) sum_pairs sum_k smooth(d_k)
    let mut d_out = Matrix::zeros(pass.x_hat.rows(), pass.x_hat.cols());
    for r in 0..pass.x_hat.rows() {
        let p = pass.x_hat.row(r);
        let t = targets.row(r);
        let d = d_out.row_mut(r);
        for c in 0..p.len() {
            d[c] = smooth_l1_grad(p[c] - t[c]) / batch;
        }
    }

    // Decoder output dense
    let d_w3 = d_out.transpose_matmul(&cache.relu2);
    let d_b3 = d_out.col_sum();
    let d_relu2 = d_out.matmul(&params.dense[3].weights);

    let d_y2 = relu_backward(&d_relu2, &cache.relu2);
    let (d_gamma2, d_beta2, d_a2) = params.bn[2].backward(&cache.bn2, &d_y2);

    let d_w2 = d_a2.transpose_matmul(&cache.relu1);
    let d_b2 = d_a2.col_sum();
    let d_relu1 = d_a2.matmul(&params.dense[2].weights);

    let d_y1 = relu_backward(&d_relu1, &cache.relu1);
    let (d_gamma1, d_beta1, d_z) = params.bn[1].backward(&cache.bn1, &d_y1);

    // Encoder bottleneck dense
    let d_w1 = d_z.transpose_matmul(&cache.relu0);
    let d_b1 = d_z.col_sum();
    let d_relu0 = d_z.matmul(&params.dense[1].weights);

    let d_y0 = relu_backward(&d_relu0, &cache.relu0);
    let (d_gamma0, d_beta0, d_a0) = params.bn[0].backward(&cache.bn0, &d_y0);

    let d_w0 = d_a0.transpose_matmul(&cache.input);
    let d_b0 = d_a0.col_sum();

    Ok((
        loss,
        Gradients {
            dense_w: vec![d_w0, d_w1, d_w2, d_w3],
            dense_b: vec![d_b0, d_b1, d_b2, d_b3],
            bn_gamma: vec![d_gamma0, d_gamma1, d_gamma2],
            bn_beta: vec![d_beta0, d_beta1, d_beta2],
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn smooth_l1_reference_points() {
        assert_eq!(smooth_l1_term(0.0), 0.0);
        assert_eq!(smooth_l1_term(0.5), 0.125);
        assert_eq!(smooth_l1_term(1.0), 0.5);
        assert_eq!(smooth_l1_term(2.0), 1.5);
        assert_eq!(smooth_l1_term(-2.0), 1.5);
    }

    #[test]
    fn smooth_l1_continuous_at_kink() {
        let eps = 1e-13;
        assert!((smooth_l1_term(1.0 + eps) - smooth_l1_term(1.0 - eps)).abs() < 1e-12);
        assert!((smooth_l1_grad(1.0 + eps) - smooth_l1_grad(1.0 - eps)).abs() < 1e-12);
        // Subgradient at the kink comes from the quadratic branch and equals
        // the linear branch's constant.
        assert_eq!(smooth_l1_grad(1.0), 1.0);
        assert_eq!(smooth_l1_grad(-1.0), -1.0);
    }

    #[test]
    fn smooth_l1_zero_iff_equal() {
        let a = vec![0.3, -1.7, 2.2];
        assert_eq!(smooth_l1(&a, &a), 0.0);
        let b = vec![0.3, -1.7, 2.3];
        assert!(smooth_l1(&a, &b) > 0.0);
    }

    #[test]
    fn forward_shapes_and_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = NetworkParams::init(&[228, 128, 30, 128, 228], &mut rng).unwrap();
        let mut x = Matrix::zeros(4, 228);
        for v in x.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let pass = forward(&mut params, &x, Mode::Train).unwrap();
        assert_eq!(pass.z.rows(), 4);
        assert_eq!(pass.z.cols(), 30);
        assert_eq!(pass.x_hat.cols(), 228);

        // Inference is deterministic
        let p1 = forward(&mut params, &x, Mode::Infer).unwrap();
        let p2 = forward(&mut params, &x, Mode::Infer).unwrap();
        assert_eq!(p1.z, p2.z);
        assert_eq!(p1.x_hat, p2.x_hat);
    }

    #[test]
    fn train_mode_rejects_singleton_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = NetworkParams::init(&[5, 4, 2, 4, 5], &mut rng).unwrap();
        let x = Matrix::zeros(1, 5);
        assert!(forward(&mut params, &x, Mode::Train).is_err());
        assert!(forward(&mut params, &x, Mode::Infer).is_ok());
    }

    #[test]
    fn batchnorm_train_output_is_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut bn = BatchNormLayer::init(6);
        let mut x = Matrix::zeros(64, 6);
        for v in x.data_mut() {
            *v = rng.gen_range(-4.0..7.0);
        }
        let cache = bn.forward_train(&x);
        let mean = cache.output.col_mean();
        for &m in &mean {
            assert!(m.abs() < 1e-6, "bn mean {m}");
        }
        for c in 0..6 {
            let mut var = 0.0;
            for r in 0..64 {
                let d = cache.output.get(r, c) - mean[c];
                var += d * d;
            }
            var /= 64.0;
            assert!((var - 1.0).abs() < 1e-4, "bn var {var}");
        }
    }

    #[test]
    fn zero_loss_gives_zero_output_bias_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = NetworkParams::init(&[5, 4, 2, 4, 5], &mut rng).unwrap();
        let mut x = Matrix::zeros(6, 5);
        for v in x.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let pass = forward(&mut params, &x, Mode::Train).unwrap();
        let targets = pass.x_hat.clone();
        let (loss, grads) = backward(&params, &pass, &targets).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.dense_b[3].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn embedding_must_be_undercomplete() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(NetworkParams::init(&[5, 4, 5, 4, 5], &mut rng).is_err());
        assert!(NetworkParams::init(&[5, 4, 6, 4, 5], &mut rng).is_err());
    }
}
