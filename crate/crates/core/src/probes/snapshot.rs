//! Per-class activation accumulators collected at one probed epoch.
//!
//! Nothing per-sample is retained: each (layer, group, mode, class) cell keeps
//! a running count, mean and sum of squared deviations per neuron.
//!
//! On disk an epoch is two files. `epoch_XXXXXXXX.bin` holds little-endian f64
//! vectors; `epoch_XXXXXXXX.jsonl` starts with a header line and then has one
//! line per cell pointing into the sidecar:
//!
//! ```text
//! {"epoch":10,"n_classes":10,"layer_dims":[256,128],"layers":[1,2]}
//! {"epoch":10,"layer":1,"group":"clean_train","mode":"input_based","class":0,"n":140,"dim":256,"mean_offset":0,"m2_offset":256}
//! ```
//!
//! Layers are numbered from 1 (first hidden layer) on disk; offsets count f64
//! values. The `.jsonl` is renamed into place last, so its presence marks a
//! complete epoch.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{GroupMode, Sample};
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Running per-neuron mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub n: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Accumulator {
    pub fn new(dim: usize) -> Self {
        Accumulator {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d * inv;
            *s += d * (v - *m);
        }
    }

    /// Combines two disjoint sample sets (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.dim() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] = (na * self.mean[i] + nb * other.mean[i]) / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    /// Population standard deviation of neuron `i`.
    pub fn std(&self, i: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.m2[i].max(0.0) / self.n as f64).sqrt()
    }
}

/// Which slice of the data a cell summarizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeGroup {
    CleanTrain,
    NoisyTrain,
    Test,
    TestCorrect,
    TestIncorrect,
}

impl ProbeGroup {
    pub const ALL: [ProbeGroup; 5] = [
        ProbeGroup::CleanTrain,
        ProbeGroup::NoisyTrain,
        ProbeGroup::Test,
        ProbeGroup::TestCorrect,
        ProbeGroup::TestIncorrect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeGroup::CleanTrain => "clean_train",
            ProbeGroup::NoisyTrain => "noisy_train",
            ProbeGroup::Test => "test",
            ProbeGroup::TestCorrect => "test_correct",
            ProbeGroup::TestIncorrect => "test_incorrect",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ProbeGroup::ALL.into_iter().find(|g| g.as_str() == s)
    }
}

/// Cell address; `layer` is a 0-based hidden-layer index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub layer: usize,
    pub group: ProbeGroup,
    pub mode: GroupMode,
    pub class: usize,
}

/// All accumulators of one probed epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSnapshot {
    pub epoch: u64,
    pub n_classes: usize,
    /// Widths of every hidden layer of the network.
    pub layer_dims: Vec<usize>,
    /// 0-based hidden layers that were recorded, ascending.
    pub layers: Vec<usize>,
    pub cells: BTreeMap<CellKey, Accumulator>,
}

impl ProbeSnapshot {
    pub fn new(epoch: u64, n_classes: usize, layer_dims: Vec<usize>, layers: Vec<usize>) -> Result<Self> {
        let mut layers = layers;
        layers.sort_unstable();
        layers.dedup();
        if let Some(&bad) = layers.iter().find(|&&l| l >= layer_dims.len()) {
            return Err(Error::LayerOutOfRange {
                layer: bad,
                n_hidden: layer_dims.len(),
            });
        }
        Ok(ProbeSnapshot {
            epoch,
            n_classes,
            layer_dims,
            layers,
            cells: BTreeMap::new(),
        })
    }

    pub fn check_layer(&self, layer: usize) -> Result<()> {
        if self.layers.binary_search(&layer).is_err() {
            return Err(Error::LayerOutOfRange {
                layer,
                n_hidden: self.layer_dims.len(),
            });
        }
        Ok(())
    }

    pub fn cell(&self, layer: usize, group: ProbeGroup, mode: GroupMode, class: usize) -> Option<&Accumulator> {
        self.cells
            .get(&CellKey {
                layer,
                group,
                mode,
                class,
            })
            .filter(|a| a.n > 0)
    }

    /// Records one sample's activations (row `row` of each hidden-layer
    /// matrix in `hidden`) under every group in `groups`, both grouping modes.
    pub fn observe(&mut self, hidden: &[Matrix], row: usize, sample: &Sample, groups: &[ProbeGroup]) {
        for &layer in &self.layers {
            let x = hidden[layer].row(row);
            for &group in groups {
                for mode in GroupMode::ALL {
                    let key = CellKey {
                        layer,
                        group,
                        mode,
                        class: sample.label_for(mode),
                    };
                    self.cells
                        .entry(key)
                        .or_insert_with(|| Accumulator::new(x.len()))
                        .push(x);
                }
            }
        }
    }

    /// Merges the cells of `groups` under `mode` for every class.
    pub fn pooled(&self, layer: usize, groups: &[ProbeGroup], mode: GroupMode) -> Result<Accumulator> {
        self.check_layer(layer)?;
        let mut acc = Accumulator::new(self.layer_dims[layer]);
        for (key, cell) in &self.cells {
            if key.layer == layer && key.mode == mode && groups.contains(&key.group) {
                acc.merge(cell);
            }
        }
        Ok(acc)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    epoch: u64,
    n_classes: usize,
    layer_dims: Vec<usize>,
    layers: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CellRecord {
    epoch: u64,
    layer: usize,
    group: ProbeGroup,
    mode: GroupMode,
    class: usize,
    n: u64,
    dim: usize,
    mean_offset: usize,
    m2_offset: usize,
}

pub fn snapshot_stem(epoch: u64) -> String {
    format!("epoch_{epoch:08}")
}

fn paths(dir: &Path, epoch: u64) -> (PathBuf, PathBuf) {
    let stem = snapshot_stem(epoch);
    (dir.join(format!("{stem}.jsonl")), dir.join(format!("{stem}.bin")))
}

/// Writes the sidecar, then atomically publishes the index.
pub fn write_snapshot(snapshot: &ProbeSnapshot, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (index_path, bin_path) = paths(dir, snapshot.epoch);
    let mut bin = Vec::new();
    let mut index = Vec::new();
    let header = Header {
        epoch: snapshot.epoch,
        n_classes: snapshot.n_classes,
        layer_dims: snapshot.layer_dims.clone(),
        layers: snapshot.layers.iter().map(|l| l + 1).collect(),
    };
    serde_json::to_writer(&mut index, &header).expect("serializing header");
    index.push(b'\n');
    let mut offset = 0;
    for (key, acc) in &snapshot.cells {
        let rec = CellRecord {
            epoch: snapshot.epoch,
            layer: key.layer + 1,
            group: key.group,
            mode: key.mode,
            class: key.class,
            n: acc.n,
            dim: acc.dim(),
            mean_offset: offset,
            m2_offset: offset + acc.dim(),
        };
        offset += 2 * acc.dim();
        for v in acc.mean.iter().chain(&acc.m2) {
            bin.extend_from_slice(&v.to_le_bytes());
        }
        serde_json::to_writer(&mut index, &rec).expect("serializing cell");
        index.push(b'\n');
    }
    std::fs::write(&bin_path, &bin).map_err(|e| Error::io(&bin_path, e))?;
    let tmp = index_path.with_extension("jsonl.tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&index).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &index_path).map_err(|e| Error::io(&index_path, e))
}

pub fn read_snapshot(dir: &Path, epoch: u64) -> Result<ProbeSnapshot> {
    let (index_path, bin_path) = paths(dir, epoch);
    let bin = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let values: Vec<f64> = bin
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let file = std::fs::File::open(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: String| Error::format(&index_path, format!("line {line}: {message}"));
    let header: Header = match lines.next() {
        Some(line) => {
            let line = line.map_err(|e| Error::io(&index_path, e))?;
            serde_json::from_str(&line).map_err(|e| parse_err(1, e.to_string()))?
        }
        None => return Err(parse_err(1, "empty index".into())),
    };
    if header.layers.contains(&0) {
        return Err(parse_err(1, "layers are numbered from 1".into()));
    }
    let mut snap = ProbeSnapshot::new(
        header.epoch,
        header.n_classes,
        header.layer_dims,
        header.layers.iter().map(|l| l - 1).collect(),
    )?;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::io(&index_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CellRecord = serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
        if rec.layer == 0 || snap.check_layer(rec.layer - 1).is_err() || rec.class >= snap.n_classes {
            return Err(parse_err(line_no, "cell outside the recorded layers or classes".into()));
        }
        if rec.dim != snap.layer_dims[rec.layer - 1] {
            return Err(parse_err(line_no, format!("dim {} does not match layer width", rec.dim)));
        }
        let slice = |off: usize| {
            values
                .get(off..off + rec.dim)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| parse_err(line_no, "offset beyond sidecar".into()))
        };
        let acc = Accumulator {
            n: rec.n,
            mean: slice(rec.mean_offset)?,
            m2: slice(rec.m2_offset)?,
        };
        snap.cells.insert(
            CellKey {
                layer: rec.layer - 1,
                group: rec.group,
                mode: rec.mode,
                class: rec.class,
            },
            acc,
        );
    }
    Ok(snap)
}

/// Epochs with a complete snapshot in `dir`, ascending.
pub fn list_snapshots(dir: &Path) -> Result<Vec<u64>> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut epochs = Vec::new();
    for entry in entries {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(num) = name.strip_prefix("epoch_").and_then(|r| r.strip_suffix(".jsonl")) {
            if let Ok(epoch) = num.parse() {
                epochs.push(epoch);
            }
        }
    }
    epochs.sort_unstable();
    Ok(epochs)
}
