use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::matrix::Matrix;
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

/// One dense layer with its Adam moments. `weights` is (out_dim × in_dim).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub m_weights: Matrix,
    pub v_weights: Matrix,
    pub m_bias: Vec<f64>,
    pub v_bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            m_weights: Matrix::zeros(out_dim, in_dim),
            v_weights: Matrix::zeros(out_dim, in_dim),
            m_bias: vec![0.0; out_dim],
            v_bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// All parameters and optimizer state of a network. The last layer is the
/// output layer; every other layer is a ReLU hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub spec: NetworkSpec,
    pub layers: Vec<DenseLayer>,
    pub t_adam: u64,
}

impl NetworkState {
    /// A state with every parameter and moment zero.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        Ok(NetworkState {
            spec: spec.clone(),
            layers: spec
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| DenseLayer::zeros(i, o))
                .collect(),
            t_adam: 0,
        })
    }

    pub fn n_hidden(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.n_hidden()].iter().map(DenseLayer::out_dim).collect()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.all_finite()
                && l.m_weights.all_finite()
                && l.v_weights.all_finite()
                && l.bias.iter().chain(&l.m_bias).chain(&l.v_bias).all(|v| v.is_finite())
        })
    }
}

/// Weights uniform in ±sqrt(6 / fan_in) drawn layer by layer in row-major
/// order from a ChaCha8 stream seeded with `spec.seed`; biases and moments zero.
pub fn init_network(spec: &NetworkSpec) -> Result<NetworkState> {
    let mut state = NetworkState::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for layer in &mut state.layers {
        let limit = (6.0 / layer.in_dim() as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit)
            .map_err(|e| Error::InvalidSpec(format!("init range: {e}")))?;
        for w in layer.weights.as_mut_slice() {
            *w = dist.sample(&mut rng);
        }
    }
    Ok(state)
}

/// Post-activation values of every hidden layer plus the output logits and
/// softmax probabilities for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub hidden: Vec<Matrix>,
    pub logits: Matrix,
    pub probabilities: Matrix,
}

impl ForwardTrace {
    pub fn from_logits(hidden: Vec<Matrix>, logits: Matrix) -> Self {
        let probabilities = softmax_rows(&logits);
        ForwardTrace {
            hidden,
            logits,
            probabilities,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.logits.rows()
    }

    /// Argmax of each probability row; ties go to the lowest index.
    pub fn predictions(&self) -> Vec<usize> {
        self.probabilities.iter_rows().map(argmax).collect()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise softmax with the row maximum subtracted before exponentiation.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

pub fn forward(state: &NetworkState, batch: &Matrix) -> Result<ForwardTrace> {
    if batch.cols() != state.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "batch has {} columns, network expects {}",
            batch.cols(),
            state.input_dim()
        )));
    }
    if !batch.all_finite() {
        return Err(Error::NonFinite("forward input".into()));
    }
    let n_hidden = state.n_hidden();
    let mut hidden = Vec::with_capacity(n_hidden);
    for (l, layer) in state.layers[..n_hidden].iter().enumerate() {
        let input = if l == 0 { batch } else { &hidden[l - 1] };
        let mut h = input.affine(&layer.weights, &layer.bias);
        for v in h.as_mut_slice() {
            // NaN-propagating ReLU
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        hidden.push(h);
    }
    let last = hidden.last().unwrap_or(batch);
    let out = &state.layers[n_hidden];
    let logits = last.affine(&out.weights, &out.bias);
    Ok(ForwardTrace::from_logits(hidden, logits))
}

fn check_labels(trace: &ForwardTrace, labels: &[usize]) -> Result<()> {
    if labels.len() != trace.batch_size() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a batch of {}",
            labels.len(),
            trace.batch_size()
        )));
    }
    let n_classes = trace.logits.cols();
    if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }
    Ok(())
}

/// Cross-entropy `-ln p[label]` of every row, computed as a log-sum-exp over
/// the logits so that saturated rows stay finite.
pub fn per_sample_loss(trace: &ForwardTrace, labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(trace, labels)?;
    Ok(trace
        .logits
        .iter_rows()
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
            max + sum.ln() - row[y]
        })
        .collect())
}

/// Mean cross-entropy and accuracy of a batch.
pub fn loss_and_accuracy(trace: &ForwardTrace, labels: &[usize]) -> Result<(f64, f64)> {
    let losses = per_sample_loss(trace, labels)?;
    let n = losses.len() as f64;
    let loss = losses.iter().sum::<f64>() / n;
    let correct = trace
        .predictions()
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok((loss, correct as f64 / n))
}

/// Gradient of one dense layer, same shapes as its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.all_finite() && g.bias.iter().all(|v| v.is_finite()))
    }
}

/// Backpropagates the mean cross-entropy of `trace` (produced by
/// [`forward`] on `input`) to every weight and bias.
pub fn backward(
    state: &NetworkState,
    input: &Matrix,
    trace: &ForwardTrace,
    labels: &[usize],
) -> Result<Gradients> {
    check_labels(trace, labels)?;
    let n_hidden = state.n_hidden();
    if trace.hidden.len() != n_hidden
        || input.rows() != trace.batch_size()
        || input.cols() != state.input_dim()
        || trace.logits.cols() != state.output_dim()
    {
        return Err(Error::DimensionMismatch("trace does not match network".into()));
    }
    let batch = trace.batch_size() as f64;

    let mut delta = trace.probabilities.clone();
    for (r, &y) in labels.iter().enumerate() {
        let row = delta.row_mut(r);
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= batch;
        }
    }

    let mut grads = Vec::with_capacity(state.layers.len());
    for l in (0..state.layers.len()).rev() {
        let below = if l == 0 { input } else { &trace.hidden[l - 1] };
        let weights = delta.transpose_mul(below);
        let mut bias = vec![0.0; delta.cols()];
        for row in delta.iter_rows() {
            for (b, d) in bias.iter_mut().zip(row) {
                *b += d;
            }
        }
        grads.push(LayerGrad { weights, bias });
        if l > 0 {
            let mut prev = delta.mul(&state.layers[l].weights);
            for (g, &h) in prev.as_mut_slice().iter_mut().zip(below.as_slice()) {
                if h <= 0.0 {
                    *g = 0.0;
                }
            }
            delta = prev;
        }
    }
    grads.reverse();
    Ok(Gradients { layers: grads })
}
