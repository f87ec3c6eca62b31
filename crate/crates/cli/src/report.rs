//! `ddlab report`: SVG figures from a run's metrics and analysis files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use ddlab_core::metrics::{MetricRecord, PhaseAnnotation, Split};
use ddlab_core::probes::LARGE_RATIO_THRESHOLD;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::analyze::{LARGE_ACTIVATION_CSV, PER_CLASS_CSV, PHASES_JSON, SIMILARITY_CSV};
use crate::fsutil::write_atomic;
use crate::run::{load_metrics, RunPaths};
use crate::svg::{Band, BarChart, HLine, LineChart, Series};
use crate::UserError;

#[derive(Debug, Deserialize)]
struct SimilarityRow {
    epoch: u64,
    layer: usize,
    pair: String,
    mean: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RatioRow {
    epoch: u64,
    layer: usize,
    neuron: usize,
    ratio: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ClassRow {
    epoch: u64,
    layer: usize,
    neuron: usize,
    mode: String,
    group: String,
    class: usize,
    mean: f64,
    std: f64,
    noisy_reference: Option<f64>,
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| UserError(format!("{}: {e}", path.display())))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

/// Shaded phase intervals covering `[first, last]`.
fn phase_bands(phases: &PhaseAnnotation, first: f64, last: f64) -> Vec<Band> {
    let mut edges = vec![first];
    edges.extend(phases.boundaries.iter().map(|&b| b as f64));
    edges.push(last);
    edges
        .windows(2)
        .zip(&phases.labels)
        .map(|(w, label)| Band { x0: w[0], x1: w[1], label: label.clone() })
        .collect()
}

fn learning_curves(metrics: &[MetricRecord], phases: &PhaseAnnotation) -> [(String, String); 2] {
    let first = metrics.iter().map(|r| r.epoch).min().unwrap_or(1) as f64;
    let last = metrics.iter().map(|r| r.epoch).max().unwrap_or(1) as f64;
    let chart = |y_label: &str, value: fn(&MetricRecord) -> Option<f64>| LineChart {
        title: format!("{y_label} by split"),
        x_label: "epoch".into(),
        y_label: y_label.into(),
        log_x: true,
        series: Split::ALL
            .iter()
            .map(|&split| Series {
                name: split.as_str().into(),
                points: metrics
                    .iter()
                    .filter(|r| r.split == split)
                    .filter_map(|r| Some((r.epoch as f64, value(r)?)))
                    .collect(),
                dashed: false,
            })
            .collect(),
        bands: phase_bands(phases, first, last),
        hlines: Vec::new(),
    };
    [
        ("learning_curves_loss.svg".into(), chart("loss", |r| r.loss).render()),
        ("learning_curves_accuracy.svg".into(), chart("accuracy", |r| r.accuracy).render()),
    ]
}

fn similarity_figures(rows: &[SimilarityRow]) -> Vec<(String, String)> {
    let mut by_pair: BTreeMap<&str, BTreeMap<usize, Vec<(f64, f64)>>> = BTreeMap::new();
    for r in rows {
        if let Some(mean) = r.mean {
            by_pair.entry(&r.pair).or_default().entry(r.layer).or_default().push((r.epoch as f64, mean));
        }
    }
    by_pair
        .into_iter()
        .map(|(pair, layers)| {
            let chart = LineChart {
                title: format!("class-mean cosine similarity, {}", pair.replace('~', " vs ")),
                x_label: "epoch".into(),
                y_label: "mean CS".into(),
                log_x: true,
                series: layers
                    .into_iter()
                    .map(|(layer, points)| Series { name: format!("layer {layer}"), points, dashed: false })
                    .collect(),
                ..Default::default()
            };
            (format!("similarity_{}.svg", pair.replace('~', "_vs_")), chart.render())
        })
        .collect()
}

/// Ratio curves per layer; a layer whose ratio never exceeds the threshold
/// is drawn dashed.
fn ratio_figure(rows: &[RatioRow]) -> (String, String) {
    let mut layers: BTreeMap<usize, (usize, Vec<(f64, f64)>)> = BTreeMap::new();
    for r in rows {
        let entry = layers.entry(r.layer).or_insert((r.neuron, Vec::new()));
        if let Some(ratio) = r.ratio {
            entry.1.push((r.epoch as f64, ratio));
        }
    }
    let chart = LineChart {
        title: "activation ratio of the tracked neuron".into(),
        x_label: "epoch".into(),
        y_label: "ratio".into(),
        log_x: true,
        series: layers
            .into_iter()
            .map(|(layer, (neuron, points))| {
                let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                Series {
                    name: format!("layer {layer} (#{neuron})"),
                    points,
                    dashed: max <= LARGE_RATIO_THRESHOLD,
                }
            })
            .collect(),
        bands: Vec::new(),
        hlines: vec![HLine { y: LARGE_RATIO_THRESHOLD, label: "ratio = 10".into() }],
    };
    ("large_activation.svg".into(), chart.render())
}

fn per_class_figures(rows: &[ClassRow]) -> Vec<(String, String)> {
    let mut panels: BTreeMap<(usize, &str), Vec<&ClassRow>> = BTreeMap::new();
    for r in rows {
        panels.entry((r.layer, &r.mode)).or_default().push(r);
    }
    panels
        .into_iter()
        .map(|((layer, mode), rows)| {
            let n_classes = rows.iter().map(|r| r.class + 1).max().unwrap_or(0);
            let mut groups: Vec<(String, Vec<Option<(f64, f64)>>)> = Vec::new();
            for r in &rows {
                let idx = match groups.iter().position(|(g, _)| *g == r.group) {
                    Some(i) => i,
                    None => {
                        groups.push((r.group.clone(), vec![None; n_classes]));
                        groups.len() - 1
                    }
                };
                groups[idx].1[r.class] = Some((r.mean, r.std));
            }
            let chart = BarChart {
                title: format!(
                    "neuron #{} of layer {layer} at epoch {}, {}",
                    rows[0].neuron,
                    rows[0].epoch,
                    mode.replace('_', "-")
                ),
                x_label: "class".into(),
                y_label: "mean activation".into(),
                categories: (0..n_classes).map(|c| c.to_string()).collect(),
                groups,
                reference: rows[0].noisy_reference.map(|y| HLine { y, label: "all noisy".into() }),
            };
            (format!("per_class_layer{layer}_{mode}.svg"), chart.render())
        })
        .collect()
}

/// Renders every figure in memory first; nothing is written unless all
/// inputs are present and valid.
pub fn cmd_report(paths: &RunPaths) -> anyhow::Result<Vec<String>> {
    let metrics = load_metrics(&paths.metrics())?;
    if metrics.is_empty() {
        return Err(UserError(format!("{} has no records", paths.metrics().display())).into());
    }
    let analysis = paths.analysis();
    let phases_path = analysis.join(PHASES_JSON);
    let phases: PhaseAnnotation = serde_json::from_str(
        &std::fs::read_to_string(&phases_path).map_err(|e| UserError(format!("{}: {e}", phases_path.display())))?,
    )
    .with_context(|| format!("parsing {}", phases_path.display()))?;
    let similarity: Vec<SimilarityRow> = read_rows(&analysis.join(SIMILARITY_CSV))?;
    let ratios: Vec<RatioRow> = read_rows(&analysis.join(LARGE_ACTIVATION_CSV))?;
    let classes: Vec<ClassRow> = read_rows(&analysis.join(PER_CLASS_CSV))?;

    let mut figures: Vec<(String, String)> = learning_curves(&metrics, &phases).into();
    figures.extend(similarity_figures(&similarity));
    figures.push(ratio_figure(&ratios));
    figures.extend(per_class_figures(&classes));

    let dir = paths.report();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, svg) in &figures {
        write_atomic(&dir.join(name), svg.as_bytes())?;
    }
    Ok(figures.into_iter().map(|(name, _)| name).collect())
}
