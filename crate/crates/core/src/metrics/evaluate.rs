use super::record::{MetricRecord, Split};
use crate::data::{batch_matrix, DatasetBundle, Sample};
use crate::error::Result;
use crate::nn::{forward, per_sample_loss, NetworkState};
use crate::probes::{ProbeGroup, ProbeSnapshot, EVAL_CHUNK};

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    loss_sum: f64,
    correct: usize,
    n: usize,
}

impl Tally {
    fn add(&mut self, loss: f64, correct: bool) {
        self.loss_sum += loss;
        self.correct += correct as usize;
        self.n += 1;
    }

    fn record(self, epoch: u64, split: Split) -> MetricRecord {
        let n = self.n;
        MetricRecord {
            epoch,
            split,
            loss: (n > 0).then(|| self.loss_sum / n as f64),
            accuracy: (n > 0).then(|| self.correct as f64 / n as f64),
            n,
        }
    }
}

/// Metrics of one epoch, in [`Split::ALL`] order, and the probe snapshot
/// gathered in the same passes.
#[derive(Debug, Clone)]
pub struct EpochEvaluation {
    pub records: Vec<MetricRecord>,
    pub snapshot: Option<ProbeSnapshot>,
}

/// Full forward passes over the training and test sets in sample order.
/// Nothing in `state` is modified.
///
/// With `probe_layers` (0-based hidden layers), post-ReLU activations are
/// accumulated per class into clean-train / noisy-train / test groups, and
/// test samples are further split by whether the prediction is correct.
pub fn evaluate_epoch(
    state: &NetworkState,
    bundle: &DatasetBundle,
    epoch: u64,
    probe_layers: Option<&[usize]>,
) -> Result<EpochEvaluation> {
    let mut snapshot = probe_layers
        .map(|layers| ProbeSnapshot::new(epoch, bundle.n_classes, state.hidden_dims(), layers.to_vec()))
        .transpose()?;
    let mut clean = Tally::default();
    let mut noisy_noisy = Tally::default();
    let mut noisy_clean = Tally::default();
    let mut test = Tally::default();

    for chunk in bundle.train.chunks(EVAL_CHUNK) {
        let trace = forward(state, &batch_matrix(chunk))?;
        let assigned: Vec<usize> = chunk.iter().map(|s| s.assigned_label).collect();
        let original: Vec<usize> = chunk.iter().map(|s| s.original_label).collect();
        let loss_assigned = per_sample_loss(&trace, &assigned)?;
        let loss_original = per_sample_loss(&trace, &original)?;
        let preds = trace.predictions();
        for (i, s) in chunk.iter().enumerate() {
            if s.is_noisy {
                noisy_noisy.add(loss_assigned[i], preds[i] == s.assigned_label);
                noisy_clean.add(loss_original[i], preds[i] == s.original_label);
            } else {
                clean.add(loss_assigned[i], preds[i] == s.assigned_label);
            }
            if let Some(snap) = snapshot.as_mut() {
                let group = if s.is_noisy { ProbeGroup::NoisyTrain } else { ProbeGroup::CleanTrain };
                snap.observe(&trace.hidden, i, s, &[group]);
            }
        }
    }

    for chunk in bundle.test.chunks(EVAL_CHUNK) {
        let trace = forward(state, &batch_matrix(chunk))?;
        let labels: Vec<usize> = chunk.iter().map(|s: &Sample| s.original_label).collect();
        let losses = per_sample_loss(&trace, &labels)?;
        let preds = trace.predictions();
        for (i, s) in chunk.iter().enumerate() {
            let correct = preds[i] == s.original_label;
            test.add(losses[i], correct);
            if let Some(snap) = snapshot.as_mut() {
                let split = if correct { ProbeGroup::TestCorrect } else { ProbeGroup::TestIncorrect };
                snap.observe(&trace.hidden, i, s, &[ProbeGroup::Test, split]);
            }
        }
    }

    Ok(EpochEvaluation {
        records: vec![
            clean.record(epoch, Split::CleanTrain),
            noisy_noisy.record(epoch, Split::NoisyTrainNoisy),
            noisy_clean.record(epoch, Split::NoisyTrainClean),
            test.record(epoch, Split::Test),
        ],
        snapshot,
    })
}

/// The four split records without probing.
pub fn evaluate_all_splits(state: &NetworkState, bundle: &DatasetBundle, epoch: u64) -> Result<Vec<MetricRecord>> {
    Ok(evaluate_epoch(state, bundle, epoch, None)?.records)
}
