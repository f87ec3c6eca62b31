//! Datasets, label noise and class grouping.

pub mod cifar;
pub mod noise;
mod sample;
pub mod synthetic;

pub use cifar::load_cifar10;
pub use noise::{apply_noise_mask, inject_label_noise, noise_mask, read_noise_mask, write_noise_mask, MaskEntry};
pub use sample::{
    batch_matrix, group_all, group_samples, split_clean_noisy, BundleMetadata, ClassCounts,
    DatasetBundle, GroupKey, GroupMode, Sample,
};
pub use synthetic::{make_synthetic, SyntheticConfig};
