//! Activation analytics over per-class accumulators.

pub mod large_activation;
pub mod similarity;
pub mod snapshot;

pub use large_activation::{
    large_activation_ratio, large_activation_series, neuron_magnitudes, per_class_large_activation,
    track_final_epoch_neuron, ClassMagnitude, LargeActivationRecord, NeuronClassProfile, RatioStats,
    LARGE_RATIO_THRESHOLD,
};
pub use similarity::{
    cosine_similarity, layer_similarity, layer_similarity_sweep, mean_class_activation, mean_of_rows,
    ClassMeanActivation, SimilarityPair, SimilarityRecord, CLEAN_NOISY, STANDARD_PAIRS,
};
pub use snapshot::{
    list_snapshots, read_snapshot, snapshot_stem, write_snapshot, Accumulator, CellKey, ProbeGroup, ProbeSnapshot,
};

use crate::data::{batch_matrix, Sample};
use crate::error::Result;
use crate::nn::{forward, NetworkState};

/// Rows per forward pass during full-set evaluation.
pub const EVAL_CHUNK: usize = 512;

/// Partitions `test` by whether the network's argmax matches the original
/// label. Order is preserved within each part.
pub fn split_test_by_prediction<'a>(
    state: &NetworkState,
    test: &'a [Sample],
) -> Result<(Vec<&'a Sample>, Vec<&'a Sample>)> {
    let mut correct = Vec::new();
    let mut incorrect = Vec::new();
    for chunk in test.chunks(EVAL_CHUNK) {
        let trace = forward(state, &batch_matrix(chunk))?;
        for (s, p) in chunk.iter().zip(trace.predictions()) {
            if p == s.original_label {
                correct.push(s);
            } else {
                incorrect.push(s);
            }
        }
    }
    Ok((correct, incorrect))
}
