//! Mini-batch Adam training over shuffled epochs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{batch_matrix, Sample};
use crate::error::{Error, Result};
use crate::nn::{adam_step, backward, forward, per_sample_loss, NetworkState, OptimConfig};

/// Position of the shuffle generator, enough to continue it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleState {
    pub seed: u64,
    /// ChaCha8 word position, as a decimal string since JSON numbers cap at 2^53.
    #[serde(with = "u128_string")]
    pub word_pos: u128,
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: u64,
    /// Mean over mini-batches of the mini-batch mean loss.
    pub mean_batch_loss: f64,
    pub steps: usize,
}

/// Owns the network during training. `epoch` counts completed epochs.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub state: NetworkState,
    pub optim: OptimConfig,
    pub epoch: u64,
    shuffle_seed: u64,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(state: NetworkState, optim: OptimConfig, shuffle_seed: u64) -> Result<Self> {
        optim.validate()?;
        Ok(Trainer {
            state,
            optim,
            epoch: 0,
            shuffle_seed,
            rng: ChaCha8Rng::seed_from_u64(shuffle_seed),
        })
    }

    /// Continues a run from a checkpointed state and shuffle position.
    pub fn resume(
        state: NetworkState,
        optim: OptimConfig,
        shuffle: ShuffleState,
        epoch: u64,
    ) -> Result<Self> {
        let mut t = Trainer::new(state, optim, shuffle.seed)?;
        t.rng.set_word_pos(shuffle.word_pos);
        t.epoch = epoch;
        Ok(t)
    }

    pub fn shuffle_state(&self) -> ShuffleState {
        ShuffleState {
            seed: self.shuffle_seed,
            word_pos: self.rng.get_word_pos(),
        }
    }

    /// One pass over `train` in a freshly shuffled order, using assigned
    /// labels. The trailing partial batch is kept.
    pub fn train_epoch(&mut self, train: &[Sample]) -> Result<EpochStats> {
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut loss_sum = 0.0;
        let mut steps = 0;
        for (b, chunk) in order.chunks(self.optim.batch_size).enumerate() {
            let input = batch_matrix(chunk.iter().map(|&i| &train[i]));
            let labels: Vec<usize> = chunk.iter().map(|&i| train[i].assigned_label).collect();
            let trace = forward(&self.state, &input)?;
            let losses = per_sample_loss(&trace, &labels)?;
            let loss = losses.iter().sum::<f64>() / losses.len() as f64;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss {loss} at epoch {epoch}, batch {b}"
                )));
            }
            let grads = backward(&self.state, &input, &trace, &labels)?;
            adam_step(&mut self.state, &grads, &self.optim).map_err(|e| match e {
                Error::NonFinite(what) => {
                    Error::NonFinite(format!("{what} at epoch {epoch}, batch {b}"))
                }
                other => other,
            })?;
            loss_sum += loss;
            steps += 1;
        }
        self.epoch = epoch;
        Ok(EpochStats {
            epoch,
            mean_batch_loss: if steps > 0 { loss_sum / steps as f64 } else { 0.0 },
            steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticConfig};
    use crate::nn::{init_network, NetworkSpec};

    fn setup() -> (Vec<Sample>, NetworkState) {
        let data = make_synthetic(&SyntheticConfig {
            n_train: 50,
            n_test: 10,
            n_classes: 3,
            dim: 6,
            sigma: 0.3,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let state = init_network(&NetworkSpec::new(6, vec![8], 3, 2).unwrap()).unwrap();
        (data.train, state)
    }

    fn optim() -> OptimConfig {
        OptimConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            ..Default::default()
        }
    }

    #[test]
    fn partial_batches_are_kept() {
        let (train, state) = setup();
        let mut t = Trainer::new(state, optim(), 0).unwrap();
        let stats = t.train_epoch(&train).unwrap();
        assert_eq!(stats.steps, 4);
        assert_eq!(t.state.t_adam, 4);
        assert_eq!(t.epoch, 1);
    }

    #[test]
    fn resume_continues_bit_exactly() {
        let (train, state) = setup();
        let mut straight = Trainer::new(state.clone(), optim(), 9).unwrap();
        for _ in 0..6 {
            straight.train_epoch(&train).unwrap();
        }
        let mut first = Trainer::new(state, optim(), 9).unwrap();
        for _ in 0..3 {
            first.train_epoch(&train).unwrap();
        }
        let json = serde_json::to_string(&first.shuffle_state()).unwrap();
        let mut second = Trainer::resume(
            first.state.clone(),
            optim(),
            serde_json::from_str(&json).unwrap(),
            first.epoch,
        )
        .unwrap();
        for _ in 0..3 {
            second.train_epoch(&train).unwrap();
        }
        assert_eq!(second.state, straight.state);
        assert_eq!(second.epoch, 6);
    }

    #[test]
    fn training_reduces_loss() {
        let (train, state) = setup();
        let mut t = Trainer::new(state, optim(), 0).unwrap();
        let first = t.train_epoch(&train).unwrap().mean_batch_loss;
        let mut last = first;
        for _ in 0..40 {
            last = t.train_epoch(&train).unwrap().mean_batch_loss;
        }
        assert!(last < first * 0.5, "{first} -> {last}");
    }
}
