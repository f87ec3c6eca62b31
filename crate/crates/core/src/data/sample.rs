use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::nn::Matrix;

/// One image with its original and assigned label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub pixels: Vec<f64>,
    pub original_label: usize,
    pub assigned_label: usize,
    pub is_noisy: bool,
}

impl Sample {
    pub fn clean(pixels: Vec<f64>, label: usize) -> Self {
        Sample {
            pixels,
            original_label: label,
            assigned_label: label,
            is_noisy: false,
        }
    }

    /// Relabels the sample and keeps `is_noisy` consistent with it.
    pub fn assign(&mut self, label: usize) {
        self.assigned_label = label;
        self.is_noisy = label != self.original_label;
    }

    /// Label this sample belongs to under a grouping mode.
    #[inline]
    pub fn label_for(&self, mode: GroupMode) -> usize {
        match mode {
            GroupMode::InputBased => self.original_label,
            GroupMode::LabelBased => self.assigned_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub n_classes: usize,
    pub noise_probability: f64,
    pub noise_seed: u64,
}

impl DatasetBundle {
    pub fn input_dim(&self) -> usize {
        self.train
            .first()
            .or(self.test.first())
            .map_or(0, |s| s.pixels.len())
    }

    /// Keeps the first `n_train` training and `n_test` test records.
    pub fn truncate(mut self, n_train: usize, n_test: usize) -> Self {
        self.train.truncate(n_train);
        self.test.truncate(n_test);
        self
    }

    pub fn n_noisy(&self) -> usize {
        self.train.iter().filter(|s| s.is_noisy).count()
    }

    /// Per-class counts of the training and test sets.
    pub fn class_counts(&self) -> Vec<ClassCounts> {
        let mut counts: Vec<ClassCounts> = (0..self.n_classes)
            .map(|class| ClassCounts {
                class,
                ..Default::default()
            })
            .collect();
        for s in &self.train {
            counts[s.original_label].raw_train += 1;
            if s.is_noisy {
                counts[s.original_label].noisy += 1;
                counts[s.assigned_label].noised_into += 1;
            } else {
                counts[s.original_label].clean += 1;
            }
        }
        for s in &self.test {
            counts[s.original_label].test += 1;
        }
        counts
    }

    pub fn metadata(&self) -> BundleMetadata {
        BundleMetadata {
            n_train: self.train.len(),
            n_test: self.test.len(),
            n_classes: self.n_classes,
            input_dim: self.input_dim(),
            noise_probability: self.noise_probability,
            noise_seed: self.noise_seed,
            noise_rng: crate::RNG_ALGORITHM.to_string(),
            n_noisy: self.n_noisy(),
            per_class: self.class_counts(),
        }
    }
}

/// Counts for one class. `clean` (original = assigned = class) plus `noisy`
/// (original = class, relabeled away) equals `raw_train`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub class: usize,
    pub raw_train: usize,
    pub clean: usize,
    pub noisy: usize,
    pub noised_into: usize,
    pub test: usize,
}

/// JSON summary of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub input_dim: usize,
    pub noise_probability: f64,
    pub noise_seed: u64,
    pub noise_rng: String,
    pub n_noisy: usize,
    pub per_class: Vec<ClassCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    /// By original label: what the input actually depicts.
    InputBased,
    /// By assigned label: what the network is told.
    LabelBased,
}

impl GroupMode {
    pub const ALL: [GroupMode; 2] = [GroupMode::InputBased, GroupMode::LabelBased];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupMode::InputBased => "input_based",
            GroupMode::LabelBased => "label_based",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "input_based" => Some(GroupMode::InputBased),
            "label_based" => Some(GroupMode::LabelBased),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub mode: GroupMode,
    pub class_id: usize,
}

/// Samples of one class under a grouping mode, in input order.
pub fn group_samples<'a>(samples: &'a [Sample], key: GroupKey) -> Vec<&'a Sample> {
    samples
        .iter()
        .filter(|s| s.label_for(key.mode) == key.class_id)
        .collect()
}

/// Every class group at once, keyed by class.
pub fn group_all(samples: &[Sample], mode: GroupMode) -> BTreeMap<usize, Vec<&Sample>> {
    let mut groups: BTreeMap<usize, Vec<&Sample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.label_for(mode)).or_default().push(s);
    }
    groups
}

/// Partitions the training set by `is_noisy`, preserving order.
pub fn split_clean_noisy(bundle: &DatasetBundle) -> (Vec<&Sample>, Vec<&Sample>) {
    bundle.train.iter().partition(|s| !s.is_noisy)
}

/// Stacks sample pixels into a batch matrix.
pub fn batch_matrix<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Matrix {
    let rows: Vec<&[f64]> = samples.into_iter().map(|s| s.pixels.as_slice()).collect();
    if rows.is_empty() {
        return Matrix::zeros(0, 0);
    }
    Matrix::from_rows(&rows)
}
