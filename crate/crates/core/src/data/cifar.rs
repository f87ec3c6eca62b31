//! CIFAR-10 binary batches: each record is one label byte followed by 3072
//! pixel bytes (R, G, B planes, each 32 × 32 row-major).

use std::path::Path;

use super::sample::{DatasetBundle, Sample};
use crate::error::{Error, Result};

pub const PIXELS: usize = 3 * 32 * 32;
pub const RECORD_BYTES: usize = PIXELS + 1;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

/// Parses raw record bytes; `path` is only used in error messages.
pub fn parse_records(bytes: &[u8], path: &Path) -> Result<Vec<Sample>> {
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::format(
            path,
            format!("length {} is not a multiple of {RECORD_BYTES}", bytes.len()),
        ));
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            let label = rec[0] as usize;
            if label > 9 {
                return Err(Error::format(path, format!("record {i}: label byte {label} > 9")));
            }
            let pixels = rec[1..].iter().map(|&b| b as f64 / 255.0).collect();
            Ok(Sample::clean(pixels, label))
        })
        .collect()
}

pub fn read_batch_file(path: &Path) -> Result<Vec<Sample>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_records(&bytes, path)
}

/// Inverse of [`parse_records`] for pixels that are multiples of 1/255.
pub fn encode_records(samples: &[Sample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * RECORD_BYTES);
    for s in samples {
        out.push(s.original_label as u8);
        out.extend(s.pixels.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    out
}

/// Loads the five training batches and the test batch, in file and record
/// order. No label noise is applied.
pub fn load_cifar10(dir: &Path) -> Result<DatasetBundle> {
    let mut train = Vec::with_capacity(50_000);
    for name in TRAIN_FILES {
        train.extend(read_batch_file(&dir.join(name))?);
    }
    let test = read_batch_file(&dir.join(TEST_FILE))?;
    Ok(DatasetBundle {
        train,
        test,
        n_classes: 10,
        noise_probability: 0.0,
        noise_seed: 0,
    })
}
