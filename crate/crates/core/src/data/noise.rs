use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sample::DatasetBundle;
use crate::error::{Error, Result};

/// Relabels each training sample independently with probability `p` to a
/// class drawn uniformly from the other `n_classes - 1`. Any previous noise is
/// discarded first; the test set is never touched.
///
/// One uniform draw decides each sample; noisy samples take a second draw for
/// the new class, all from a single ChaCha8 stream seeded with `seed`.
pub fn inject_label_noise(mut bundle: DatasetBundle, p: f64, seed: u64) -> Result<DatasetBundle> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("noise probability {p} outside [0, 1)")));
    }
    if p > 0.0 && bundle.n_classes < 2 {
        return Err(Error::InvalidArgument("label noise needs at least two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &mut bundle.train {
        s.assign(s.original_label);
        if rng.random::<f64>() < p {
            let k = rng.random_range(0..bundle.n_classes - 1);
            s.assign(if k >= s.original_label { k + 1 } else { k });
        }
    }
    bundle.noise_probability = p;
    bundle.noise_seed = seed;
    Ok(bundle)
}

/// One relabeled training sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskEntry {
    pub index: usize,
    pub assigned_label: usize,
}

pub fn noise_mask(bundle: &DatasetBundle) -> Vec<MaskEntry> {
    bundle
        .train
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_noisy)
        .map(|(index, s)| MaskEntry {
            index,
            assigned_label: s.assigned_label,
        })
        .collect()
}

/// CSV with header `index,assigned_label`, one row per noisy sample.
pub fn write_noise_mask<W: Write>(mask: &[MaskEntry], mut w: W) -> std::io::Result<()> {
    writeln!(w, "index,assigned_label")?;
    for e in mask {
        writeln!(w, "{},{}", e.index, e.assigned_label)?;
    }
    w.flush()
}

pub fn read_noise_mask<R: BufRead>(r: R) -> Result<Vec<MaskEntry>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if i == 0 {
            if line.trim() != "index,assigned_label" {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parse = |field: Option<&str>| {
            field
                .and_then(|f| f.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("expected index,assigned_label, got {line:?}"),
                })
        };
        let mut fields = line.split(',');
        let index = parse(fields.next())?;
        let assigned_label = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: "too many fields".into(),
            });
        }
        out.push(MaskEntry {
            index,
            assigned_label,
        });
    }
    Ok(out)
}

/// Resets all training labels and applies `mask`, so partitions can be
/// reproduced without the generator that produced them.
pub fn apply_noise_mask(mut bundle: DatasetBundle, mask: &[MaskEntry]) -> Result<DatasetBundle> {
    for s in &mut bundle.train {
        s.assign(s.original_label);
    }
    for e in mask {
        let n_train = bundle.train.len();
        let s = bundle.train.get_mut(e.index).ok_or_else(|| {
            Error::InvalidArgument(format!("mask index {} beyond {n_train} samples", e.index))
        })?;
        if e.assigned_label >= bundle.n_classes || e.assigned_label == s.original_label {
            return Err(Error::InvalidArgument(format!(
                "mask entry {} assigns label {} to a sample of class {}",
                e.index, e.assigned_label, s.original_label
            )));
        }
        s.assign(e.assigned_label);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample::Sample;

    fn bundle(n: usize) -> DatasetBundle {
        DatasetBundle {
            train: (0..n).map(|i| Sample::clean(vec![], i % 10)).collect(),
            test: (0..20).map(|i| Sample::clean(vec![], i % 10)).collect(),
            n_classes: 10,
            noise_probability: 0.0,
            noise_seed: 0,
        }
    }

    #[test]
    fn zero_probability_adds_no_noise() {
        let b = inject_label_noise(bundle(1000), 0.0, 5).unwrap();
        assert_eq!(b.n_noisy(), 0);
    }

    #[test]
    fn noisy_labels_never_equal_original_and_test_is_untouched() {
        let b = inject_label_noise(bundle(5000), 0.5, 9).unwrap();
        assert!(b.n_noisy() > 0);
        for s in &b.train {
            assert_eq!(s.is_noisy, s.assigned_label != s.original_label);
            assert!(s.assigned_label < 10);
        }
        assert!(b.test.iter().all(|s| !s.is_noisy && s.assigned_label == s.original_label));
    }

    #[test]
    fn every_other_class_is_reachable() {
        let b = inject_label_noise(bundle(20_000), 0.9, 1).unwrap();
        let mut seen = [[false; 10]; 10];
        for s in &b.train {
            seen[s.original_label][s.assigned_label] = true;
        }
        for (o, row) in seen.iter().enumerate() {
            for (a, &hit) in row.iter().enumerate() {
                assert_eq!(hit, true, "{o}->{a}");
            }
        }
    }

    #[test]
    fn reinjection_replaces_previous_noise() {
        let once = inject_label_noise(bundle(500), 0.3, 2).unwrap();
        let twice = inject_label_noise(once, 0.3, 2).unwrap();
        assert_eq!(twice, inject_label_noise(bundle(500), 0.3, 2).unwrap());
    }

    #[test]
    fn rejects_out_of_range_probability() {
        assert!(inject_label_noise(bundle(10), 1.0, 0).is_err());
        assert!(inject_label_noise(bundle(10), -0.1, 0).is_err());
    }

    #[test]
    fn mask_round_trip_reproduces_partition() {
        let noisy = inject_label_noise(bundle(300), 0.3, 4).unwrap();
        let mut buf = Vec::new();
        write_noise_mask(&noise_mask(&noisy), &mut buf).unwrap();
        let mask = read_noise_mask(&buf[..]).unwrap();
        let rebuilt = apply_noise_mask(bundle(300), &mask).unwrap();
        assert_eq!(rebuilt.train, noisy.train);
    }

    #[test]
    fn mask_errors_carry_line_numbers() {
        let err = read_noise_mask("index,assigned_label\n1,2\nx,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let bad = [MaskEntry { index: 0, assigned_label: 0 }];
        assert!(apply_noise_mask(bundle(3), &bad).is_err());
    }
}
