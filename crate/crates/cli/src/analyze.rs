//! `ddlab analyze`: similarity sweeps, large-activation series and per-class
//! magnitudes from the probe snapshots of a run.

use anyhow::Context;
use ddlab_core::data::GroupMode;
use ddlab_core::metrics::{annotate_phases, PhaseAnnotation, PhaseMode};
use ddlab_core::probes::{
    large_activation_ratio, layer_similarity, list_snapshots, neuron_magnitudes, per_class_large_activation,
    read_snapshot, track_final_epoch_neuron, ProbeGroup, ProbeSnapshot, RatioStats, STANDARD_PAIRS,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::fsutil::write_atomic;
use crate::run::{load_metrics, RunPaths};
use crate::UserError;

pub const SIMILARITY_CSV: &str = "similarity.csv";
pub const LARGE_ACTIVATION_CSV: &str = "large_activation.csv";
pub const PER_CLASS_CSV: &str = "per_class_magnitude.csv";
pub const PHASES_JSON: &str = "phases.json";

/// Groups shown in the per-class magnitude table.
pub const PER_CLASS_GROUPS: [ProbeGroup; 3] = [ProbeGroup::CleanTrain, ProbeGroup::NoisyTrain, ProbeGroup::Test];

fn num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn similarity_rows(snap: &ProbeSnapshot, rows: &mut Vec<Vec<String>>) -> anyhow::Result<()> {
    for &layer in &snap.layers {
        for pair in STANDARD_PAIRS {
            let rec = layer_similarity(snap, layer, pair)
                .with_context(|| format!("epoch {} layer {} {}", snap.epoch, layer + 1, pair.name()))?;
            let excluded: Vec<String> = rec.excluded_classes().iter().map(usize::to_string).collect();
            let mut row = vec![
                rec.epoch.to_string(),
                (layer + 1).to_string(),
                pair.name(),
                num(rec.mean),
                num(rec.std_across_classes),
                rec.n_included().to_string(),
                excluded.join(";"),
            ];
            row.extend(rec.per_class.iter().map(|&cs| num(cs)));
            rows.push(row);
        }
    }
    Ok(())
}

fn ratio_row(epoch: u64, layer: usize, neuron: usize, mags: &[f64]) -> anyhow::Result<Vec<String>> {
    let stats = match large_activation_ratio(mags, neuron) {
        Ok(s) => Some(s),
        Err(ddlab_core::Error::UndefinedRatio) => None,
        Err(e) => return Err(e.into()),
    };
    let field = |f: fn(&RatioStats) -> String| stats.as_ref().map(f).unwrap_or_default();
    Ok(vec![
        epoch.to_string(),
        (layer + 1).to_string(),
        neuron.to_string(),
        mags.len().to_string(),
        mags[neuron].to_string(),
        field(|s| s.rms_rest.to_string()),
        field(|s| s.ratio.to_string()),
        field(|s| s.is_large.to_string()),
    ])
}

fn phases(cfg: &RunConfig, paths: &RunPaths, n_classes: usize) -> anyhow::Result<PhaseAnnotation> {
    if let Some(boundaries) = &cfg.phases.boundaries {
        return PhaseAnnotation::from_config(boundaries.clone(), cfg.phases.labels.clone(), cfg.max_epoch)
            .map_err(|e| UserError(e.to_string()).into());
    }
    let history = load_metrics(&paths.metrics())?;
    match annotate_phases(&history, n_classes) {
        Err(ddlab_core::Error::InsufficientHistory(_)) => Ok(PhaseAnnotation {
            boundaries: Vec::new(),
            labels: vec!["initial".into()],
            mode: PhaseMode::Heuristic,
        }),
        other => Ok(other?),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSummary {
    pub epochs: Vec<u64>,
    /// Tracked neuron per probed layer (1-based layer, 0-based neuron).
    pub tracked: Vec<(usize, usize)>,
}

/// Writes `analysis/` inside the run directory. Reads only completed
/// snapshot files, so it may run alongside training.
pub fn cmd_analyze(paths: &RunPaths) -> anyhow::Result<AnalysisSummary> {
    let cfg_text = std::fs::read_to_string(paths.config())
        .map_err(|e| UserError(format!("{}: {e}", paths.config().display())))?;
    let cfg = RunConfig::parse(&cfg_text)?;
    let epochs = list_snapshots(&paths.probes())?;
    if epochs.len() < 2 {
        return Err(UserError(format!(
            "{} has probe snapshots for {} epoch(s); analysis needs at least 2",
            paths.root.display(),
            epochs.len()
        ))
        .into());
    }

    let mut sim_rows = Vec::new();
    let mut magnitudes: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut last: Option<ProbeSnapshot> = None;
    for &epoch in &epochs {
        let snap = read_snapshot(&paths.probes(), epoch)?;
        if let Some(prev) = &last {
            if prev.layers != snap.layers || prev.n_classes != snap.n_classes {
                anyhow::bail!("snapshot of epoch {epoch} records different layers than epoch {}", prev.epoch);
            }
        }
        similarity_rows(&snap, &mut sim_rows)?;
        magnitudes.push(
            snap.layers
                .iter()
                .map(|&l| neuron_magnitudes(&snap, l))
                .collect::<Result<_, _>>()?,
        );
        last = Some(snap);
    }
    let last = last.expect("at least two snapshots");
    let n_classes = last.n_classes;

    let mut ratio_rows = Vec::new();
    let mut class_rows = Vec::new();
    let mut tracked = Vec::new();
    for (li, &layer) in last.layers.iter().enumerate() {
        let series: Vec<&[f64]> = magnitudes.iter().map(|m| m[li].as_slice()).collect();
        let neuron = track_final_epoch_neuron(&series)?;
        tracked.push((layer + 1, neuron));
        for (&epoch, mags) in epochs.iter().zip(&series) {
            ratio_rows.push(ratio_row(epoch, layer, neuron, mags)?);
        }
        for mode in GroupMode::ALL {
            let profile = per_class_large_activation(&last, layer, neuron, mode, &PER_CLASS_GROUPS)?;
            for e in &profile.entries {
                class_rows.push(vec![
                    profile.epoch.to_string(),
                    (layer + 1).to_string(),
                    neuron.to_string(),
                    mode.as_str().to_string(),
                    e.group.as_str().to_string(),
                    e.class.to_string(),
                    e.n.to_string(),
                    e.mean.to_string(),
                    e.std.to_string(),
                    num(profile.noisy_reference),
                ]);
            }
        }
    }
    // Ratio rows grouped by epoch, then layer.
    ratio_rows.sort_by_key(|r| (r[0].parse::<u64>().unwrap_or(0), r[1].parse::<usize>().unwrap_or(0)));

    let mut sim_header: Vec<String> = ["epoch", "layer", "pair", "mean", "std", "n_included", "excluded_classes"]
        .map(String::from)
        .to_vec();
    sim_header.extend((0..n_classes).map(|c| format!("cs_{c}")));
    let ratio_header = ["epoch", "layer", "neuron", "m", "a_max", "rms_rest", "ratio", "is_large"];
    let class_header = ["epoch", "layer", "neuron", "mode", "group", "class", "n", "mean", "std", "noisy_reference"];

    let phases = phases(&cfg, paths, n_classes)?;
    let mut phases_json = serde_json::to_vec_pretty(&phases)?;
    phases_json.push(b'\n');
    let outputs = [
        (SIMILARITY_CSV, csv_bytes(sim_header, sim_rows)?),
        (LARGE_ACTIVATION_CSV, csv_bytes(ratio_header.map(String::from).to_vec(), ratio_rows)?),
        (PER_CLASS_CSV, csv_bytes(class_header.map(String::from).to_vec(), class_rows)?),
        (PHASES_JSON, phases_json),
    ];
    let dir = paths.analysis();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, bytes) in outputs {
        write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(AnalysisSummary { epochs, tracked })
}
