use serde::{Deserialize, Serialize};

use super::record::{MetricRecord, Split};
use crate::error::{Error, Result};

/// Minimum number of probed epochs the heuristic needs.
pub const MIN_HISTORY: usize = 10;
/// Test loss must fall this far below its peak for the peak to count.
pub const DESCENT_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    Config,
    Heuristic,
}

/// Phase boundaries (epochs) and one label per phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAnnotation {
    pub boundaries: Vec<u64>,
    pub labels: Vec<String>,
    pub mode: PhaseMode,
}

fn default_labels(n_boundaries: usize) -> Vec<String> {
    let names: &[&str] = match n_boundaries {
        0 => &["initial"],
        1 => &["initial", "final"],
        2 => &["initial", "middle", "final"],
        n => return (1..=n + 1).map(|i| format!("phase_{i}")).collect(),
    };
    names.iter().map(|s| s.to_string()).collect()
}

impl PhaseAnnotation {
    /// Boundaries chosen by the user. `labels`, when given, needs one entry
    /// per phase (`boundaries.len() + 1`).
    pub fn from_config(boundaries: Vec<u64>, labels: Option<Vec<String>>, max_epoch: u64) -> Result<Self> {
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("phase boundaries must be strictly increasing".into()));
        }
        if boundaries.iter().any(|&b| b < 1 || b > max_epoch) {
            return Err(Error::InvalidArgument(format!(
                "phase boundaries must lie in [1, {max_epoch}]"
            )));
        }
        let labels = labels.unwrap_or_else(|| default_labels(boundaries.len()));
        if labels.len() != boundaries.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} phase labels for {} boundaries",
                labels.len(),
                boundaries.len()
            )));
        }
        Ok(PhaseAnnotation {
            boundaries,
            labels,
            mode: PhaseMode::Config,
        })
    }
}

fn series(history: &[MetricRecord], split: Split, value: impl Fn(&MetricRecord) -> Option<f64>) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = history
        .iter()
        .filter(|r| r.split == split)
        .filter_map(|r| value(r).map(|v| (r.epoch, v)))
        .collect();
    out.sort_by_key(|&(e, _)| e);
    out
}

/// Heuristic boundaries.
///
/// The first is the first epoch where accuracy on noisy samples against
/// their assigned labels exceeds twice chance. The second is the epoch of
/// peak test loss after the first boundary, emitted only when the loss rose
/// above its value at the first boundary and later drops at least 5% below
/// that peak.
pub fn annotate_phases(history: &[MetricRecord], n_classes: usize) -> Result<PhaseAnnotation> {
    let mut epochs: Vec<u64> = history.iter().map(|r| r.epoch).collect();
    epochs.sort_unstable();
    epochs.dedup();
    if epochs.len() < MIN_HISTORY {
        return Err(Error::InsufficientHistory(format!(
            "{} probed epochs, need {MIN_HISTORY}",
            epochs.len()
        )));
    }
    let chance = 1.0 / n_classes.max(1) as f64;
    let mut boundaries = Vec::new();
    let noisy = series(history, Split::NoisyTrainNoisy, |r| r.accuracy);
    if let Some(&(b1, _)) = noisy.iter().find(|&&(_, acc)| acc > 2.0 * chance) {
        boundaries.push(b1);
        let test: Vec<(u64, f64)> = series(history, Split::Test, |r| r.loss)
            .into_iter()
            .filter(|&(e, _)| e >= b1)
            .collect();
        let peak = test
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |best, (i, &(_, l))| match best {
                Some((_, bl)) if bl >= l => best,
                _ => Some((i, l)),
            });
        // A peak at b1 itself means the loss never rose: no descent to detect.
        if let Some((i, peak_loss)) = peak.filter(|&(i, _)| i > 0) {
            let descends = test[i + 1..]
                .iter()
                .any(|&(_, l)| l <= (1.0 - DESCENT_FRACTION) * peak_loss);
            if descends {
                boundaries.push(test[i].0);
            }
        }
    }
    Ok(PhaseAnnotation {
        labels: default_labels(boundaries.len()),
        boundaries,
        mode: PhaseMode::Heuristic,
    })
}
