//! Tracking of a single dominant neuron per layer.
//!
//! A neuron's magnitude `a_i` is its post-ReLU activation averaged over the
//! whole training set. The ratio compares the tracked neuron against the RMS
//! of every other neuron in the layer:
//!
//! `r = a_tracked / sqrt( sum_{i != tracked} a_i^2 / (m - 1) )`
//!
//! and a neuron counts as large when `r > 10`.

use super::snapshot::{ProbeGroup, ProbeSnapshot};
use crate::data::GroupMode;
use crate::error::{Error, Result};

pub const LARGE_RATIO_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioStats {
    pub ratio: f64,
    pub a_max: f64,
    pub rms_rest: f64,
    pub m: usize,
    pub is_large: bool,
}

pub fn large_activation_ratio(magnitudes: &[f64], tracked: usize) -> Result<RatioStats> {
    let m = magnitudes.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("ratio needs at least 2 neurons, got {m}")));
    }
    if tracked >= m {
        return Err(Error::InvalidArgument(format!("tracked neuron {tracked} of {m}")));
    }
    let sum_sq: f64 = magnitudes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != tracked)
        .map(|(_, a)| a * a)
        .sum();
    let rms_rest = (sum_sq / (m - 1) as f64).sqrt();
    if rms_rest == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let a_max = magnitudes[tracked];
    let ratio = a_max / rms_rest;
    Ok(RatioStats {
        ratio,
        a_max,
        rms_rest,
        m,
        is_large: ratio > LARGE_RATIO_THRESHOLD,
    })
}

/// Index of the largest final-epoch magnitude; ties go to the lowest index.
pub fn track_final_epoch_neuron<S: AsRef<[f64]>>(series: &[S]) -> Result<usize> {
    let last = series
        .last()
        .ok_or_else(|| Error::InvalidArgument("no epochs to track".into()))?
        .as_ref();
    if last.is_empty() {
        return Err(Error::InvalidArgument("empty layer".into()));
    }
    Ok(crate::nn::argmax(last))
}

/// Mean activation of every neuron of `layer` over the full training set.
pub fn neuron_magnitudes(snapshot: &ProbeSnapshot, layer: usize) -> Result<Vec<f64>> {
    let pooled = snapshot.pooled(
        layer,
        &[ProbeGroup::CleanTrain, ProbeGroup::NoisyTrain],
        GroupMode::InputBased,
    )?;
    if pooled.n == 0 {
        return Err(Error::InvalidArgument(format!(
            "epoch {} has no training activations for layer {layer}",
            snapshot.epoch
        )));
    }
    Ok(pooled.mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeActivationRecord {
    pub epoch: u64,
    pub layer: usize,
    pub tracked_neuron: usize,
    pub stats: RatioStats,
}

/// Ratio time series of one layer. The tracked neuron is chosen at the last
/// snapshot and then held fixed for every earlier epoch.
pub fn large_activation_series(snapshots: &[ProbeSnapshot], layer: usize) -> Result<Vec<LargeActivationRecord>> {
    let series = snapshots
        .iter()
        .map(|s| neuron_magnitudes(s, layer))
        .collect::<Result<Vec<_>>>()?;
    let tracked = track_final_epoch_neuron(&series)?;
    snapshots
        .iter()
        .zip(&series)
        .map(|(snap, mags)| {
            Ok(LargeActivationRecord {
                epoch: snap.epoch,
                layer,
                tracked_neuron: tracked,
                stats: large_activation_ratio(mags, tracked)?,
            })
        })
        .collect()
}

/// Activation statistics of the tracked neuron for one class of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMagnitude {
    pub group: ProbeGroup,
    pub class: usize,
    pub n: u64,
    pub mean: f64,
    /// Population standard deviation across the class's samples.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronClassProfile {
    pub epoch: u64,
    pub layer: usize,
    pub neuron: usize,
    pub mode: GroupMode,
    /// Ordered by group, then class. Empty classes are absent.
    pub entries: Vec<ClassMagnitude>,
    /// Mean over all noisy training samples, if there are any.
    pub noisy_reference: Option<f64>,
}

pub fn per_class_large_activation(
    snapshot: &ProbeSnapshot,
    layer: usize,
    neuron: usize,
    mode: GroupMode,
    groups: &[ProbeGroup],
) -> Result<NeuronClassProfile> {
    snapshot.check_layer(layer)?;
    if neuron >= snapshot.layer_dims[layer] {
        return Err(Error::InvalidArgument(format!(
            "neuron {neuron} outside layer of width {}",
            snapshot.layer_dims[layer]
        )));
    }
    let mut entries = Vec::new();
    for &group in groups {
        for class in 0..snapshot.n_classes {
            if let Some(acc) = snapshot.cell(layer, group, mode, class) {
                entries.push(ClassMagnitude {
                    group,
                    class,
                    n: acc.n,
                    mean: acc.mean[neuron],
                    std: acc.std(neuron),
                });
            }
        }
    }
    let noisy = snapshot.pooled(layer, &[ProbeGroup::NoisyTrain], GroupMode::InputBased)?;
    Ok(NeuronClassProfile {
        epoch: snapshot.epoch,
        layer,
        neuron,
        mode,
        entries,
        noisy_reference: (noisy.n > 0).then(|| noisy.mean[neuron]),
    })
}
