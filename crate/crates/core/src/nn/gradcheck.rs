//! Central finite-difference verification of [`backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::network::{backward, forward, init_network, per_sample_loss, NetworkState};
use super::spec::NetworkSpec;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;
const CHECK_BATCH: usize = 4;
/// Stream offset so the probe batch differs from the weight draws.
const BATCH_STREAM: u64 = 0x6772_6164_6368_6b00;

/// Location of one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRef {
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub param: ParamRef,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

fn mean_loss(state: &NetworkState, input: &Matrix, labels: &[usize]) -> Result<f64> {
    let trace = forward(state, input)?;
    let losses = per_sample_loss(&trace, labels)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn param_mut(state: &mut NetworkState, p: ParamRef) -> &mut f64 {
    match p {
        ParamRef::Weight { layer, row, col } => {
            let w = &mut state.layers[layer].weights;
            let cols = w.cols();
            &mut w.as_mut_slice()[row * cols + col]
        }
        ParamRef::Bias { layer, index } => &mut state.layers[layer].bias[index],
    }
}

/// Draws `n` parameters uniformly (with replacement) over the flat parameter
/// vector.
pub fn sample_params(state: &NetworkState, n: usize, rng: &mut impl Rng) -> Vec<ParamRef> {
    let sizes: Vec<(usize, usize)> = state
        .layers
        .iter()
        .map(|l| (l.weights.as_slice().len(), l.bias.len()))
        .collect();
    let total: usize = sizes.iter().map(|(w, b)| w + b).sum();
    (0..n)
        .map(|_| {
            let mut idx = rng.random_range(0..total);
            for (layer, &(nw, nb)) in sizes.iter().enumerate() {
                if idx < nw {
                    let cols = state.layers[layer].in_dim();
                    return ParamRef::Weight {
                        layer,
                        row: idx / cols,
                        col: idx % cols,
                    };
                }
                idx -= nw;
                if idx < nb {
                    return ParamRef::Bias { layer, index: idx };
                }
                idx -= nb;
            }
            unreachable!("index within total parameter count")
        })
        .collect()
}

/// Compares analytic and central-difference gradients at the given parameters.
pub fn check_params(
    state: &NetworkState,
    input: &Matrix,
    labels: &[usize],
    params: &[ParamRef],
) -> Result<Vec<ParamCheck>> {
    let trace = forward(state, input)?;
    let grads = backward(state, input, &trace, labels)?;
    let mut probe = state.clone();
    let mut out = Vec::with_capacity(params.len());
    for &param in params {
        let analytic = match param {
            ParamRef::Weight { layer, row, col } => grads.layers[layer].weights.get(row, col),
            ParamRef::Bias { layer, index } => grads.layers[layer].bias[index],
        };
        let original = *param_mut(&mut probe, param);
        *param_mut(&mut probe, param) = original + FD_STEP;
        let plus = mean_loss(&probe, input, labels)?;
        *param_mut(&mut probe, param) = original - FD_STEP;
        let minus = mean_loss(&probe, input, labels)?;
        *param_mut(&mut probe, param) = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        out.push(ParamCheck {
            param,
            analytic,
            numeric,
            relative_error: relative_error(analytic, numeric),
        });
    }
    Ok(out)
}

/// Max relative error over `n_params_sampled` parameters of a freshly
/// initialized network, on a seeded batch of uniform inputs.
pub fn gradient_check(spec: &NetworkSpec, n_params_sampled: usize) -> Result<f64> {
    let state = init_network(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ BATCH_STREAM);
    let data: Vec<f64> = (0..CHECK_BATCH * spec.input_dim).map(|_| rng.random::<f64>()).collect();
    let input = Matrix::from_vec(CHECK_BATCH, spec.input_dim, data);
    let labels: Vec<usize> = (0..CHECK_BATCH)
        .map(|_| rng.random_range(0..spec.output_dim))
        .collect();
    gradient_check_on(&state, &input, &labels, n_params_sampled, &mut rng)
}

pub fn gradient_check_on(
    state: &NetworkState,
    input: &Matrix,
    labels: &[usize],
    n_params_sampled: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let params = sample_params(state, n_params_sampled, rng);
    let checks = check_params(state, input, labels, &params)?;
    Ok(checks.iter().map(|c| c.relative_error).fold(0.0, f64::max))
}
