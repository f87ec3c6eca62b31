//! `ddlab train`: the training loop, probe dumps and checkpoint lifecycle.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ddlab_core::data::{inject_label_noise, noise_mask, read_noise_mask, write_noise_mask, DatasetBundle};
use ddlab_core::metrics::{build_schedule, evaluate_epoch, metrics_to_string, read_metrics, MetricRecord, Split};
use ddlab_core::nn::{checkpoint, init_network, NetworkState};
use ddlab_core::probes::{list_snapshots, snapshot_stem, write_snapshot};
use ddlab_core::train::{ShuffleState, Trainer};
use ddlab_core::RNG_ALGORITHM;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::fsutil::write_atomic;
use crate::UserError;

/// Layout of a run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunPaths { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn run_meta(&self) -> PathBuf {
        self.root.join("run.json")
    }
    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.json")
    }
    pub fn noise_mask(&self) -> PathBuf {
        self.root.join("noise_mask.csv")
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn probes(&self) -> PathBuf {
        self.root.join("probes")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn latest(&self) -> PathBuf {
        self.checkpoints().join("latest.json")
    }
    pub fn analysis(&self) -> PathBuf {
        self.root.join("analysis")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// Everything needed to reproduce the run besides the config itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub rng: String,
    pub noise_seed: u64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub dataset: String,
    pub noise_probability: f64,
    pub preset: Option<String>,
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub n_params: usize,
    pub max_epoch: u64,
    /// 1-based.
    pub probe_layers: Vec<usize>,
    pub schedule_len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Latest {
    epoch: u64,
    checkpoint: String,
    shuffle: ShuffleState,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Continue an existing run from its latest checkpoint.
    pub resume: bool,
    /// Stop after this epoch even if `max_epoch` is later.
    pub until: Option<u64>,
    pub quiet: bool,
}

pub fn read_run_meta(paths: &RunPaths) -> anyhow::Result<RunMeta> {
    let text = std::fs::read_to_string(paths.run_meta())
        .map_err(|e| UserError(format!("{}: {e}", paths.run_meta().display())))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", paths.run_meta().display()))
}

pub fn load_metrics(path: &Path) -> anyhow::Result<Vec<MetricRecord>> {
    let file = std::fs::File::open(path).map_err(|e| UserError(format!("{}: {e}", path.display())))?;
    read_metrics(file).with_context(|| format!("reading {}", path.display()))
}

fn checkpoint_name(epoch: u64) -> String {
    format!("{}.ddl", snapshot_stem(epoch))
}

fn json(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

fn start_fresh(cfg: &RunConfig, paths: &RunPaths, bundle: &DatasetBundle, meta: &RunMeta) -> anyhow::Result<()> {
    if paths.root.exists() && std::fs::read_dir(&paths.root)?.next().is_some() {
        bail!(UserError(format!(
            "{} exists and is not empty; pass --resume to continue a run",
            paths.root.display()
        )));
    }
    for dir in [paths.root.clone(), paths.probes(), paths.checkpoints()] {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_atomic(&paths.config(), cfg.to_toml().as_bytes())?;
    write_atomic(&paths.run_meta(), &json(meta))?;
    write_atomic(&paths.dataset(), &json(&bundle.metadata()))?;
    let mut mask = Vec::new();
    write_noise_mask(&noise_mask(bundle), &mut mask)?;
    write_atomic(&paths.noise_mask(), &mask)?;
    write_atomic(&paths.metrics(), metrics_to_string(&[]).as_bytes())
}

/// The config minus its filesystem locations, which legitimately change
/// when a run is resumed from another working directory.
fn without_paths(cfg: &RunConfig) -> RunConfig {
    let mut cfg = cfg.clone();
    cfg.output_dir = PathBuf::new();
    if let crate::config::DatasetConfig::Cifar10 { path, .. } = &mut cfg.dataset {
        *path = PathBuf::new();
    }
    cfg
}

/// Restores the trainer from the latest checkpoint and drops any metrics or
/// probe files written after it.
fn resume(
    cfg: &RunConfig,
    paths: &RunPaths,
    bundle: &DatasetBundle,
    meta: &RunMeta,
) -> anyhow::Result<(Trainer, Vec<MetricRecord>)> {
    let stored = std::fs::read_to_string(paths.config())
        .with_context(|| format!("reading {}", paths.config().display()))?;
    if without_paths(&RunConfig::parse(&stored)?) != without_paths(cfg) || read_run_meta(paths)? != *meta {
        bail!(UserError(format!("config differs from the one {} was started with", paths.root.display())));
    }
    let mask = read_noise_mask(std::io::BufReader::new(std::fs::File::open(paths.noise_mask())?))?;
    if mask != noise_mask(bundle) {
        bail!(UserError("dataset or noise partition differs from the recorded noise_mask.csv".into()));
    }
    let (trainer, epoch) = match std::fs::read_to_string(paths.latest()) {
        Ok(text) => {
            let latest: Latest = serde_json::from_str(&text).context("parsing latest.json")?;
            let state = checkpoint::load(&paths.checkpoints().join(&latest.checkpoint))?;
            if state.spec != cfg.network_spec(bundle.input_dim(), bundle.n_classes)? {
                bail!("checkpoint {} does not match the configured network", latest.checkpoint);
            }
            (Trainer::resume(state, cfg.optim, latest.shuffle, latest.epoch)?, latest.epoch)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => (new_trainer(cfg, bundle)?, 0),
        Err(e) => return Err(e).context("reading latest.json"),
    };
    let mut records = load_metrics(&paths.metrics())?;
    records.retain(|r| r.epoch <= epoch);
    write_atomic(&paths.metrics(), metrics_to_string(&records).as_bytes())?;
    for stale in list_snapshots(&paths.probes())?.into_iter().filter(|&e| e > epoch) {
        let stem = paths.probes().join(snapshot_stem(stale));
        std::fs::remove_file(stem.with_extension("jsonl"))?;
        let _ = std::fs::remove_file(stem.with_extension("bin"));
    }
    Ok((trainer, records))
}

fn new_trainer(cfg: &RunConfig, bundle: &DatasetBundle) -> anyhow::Result<Trainer> {
    let spec = cfg.network_spec(bundle.input_dim(), bundle.n_classes)?;
    Ok(Trainer::new(init_network(&spec)?, cfg.optim, cfg.shuffle_seed)?)
}

fn save_checkpoint(paths: &RunPaths, trainer: &Trainer) -> anyhow::Result<()> {
    let name = checkpoint_name(trainer.epoch);
    write_atomic(&paths.checkpoints().join(&name), &checkpoint::to_bytes(&trainer.state))?;
    let latest = Latest {
        epoch: trainer.epoch,
        checkpoint: name.clone(),
        shuffle: trainer.shuffle_state(),
    };
    write_atomic(&paths.latest(), &json(&latest))?;
    for entry in std::fs::read_dir(paths.checkpoints())? {
        let path = entry?.path();
        let file = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if file.ends_with(".ddl") && file != name {
            std::fs::remove_file(&path)?;
        }
    }
    Ok(())
}

fn run_meta(cfg: &RunConfig, bundle: &DatasetBundle, state: &NetworkState) -> anyhow::Result<RunMeta> {
    Ok(RunMeta {
        rng: RNG_ALGORITHM.to_string(),
        noise_seed: cfg.noise_seed,
        init_seed: cfg.init_seed,
        shuffle_seed: cfg.shuffle_seed,
        dataset: cfg.dataset.kind().to_string(),
        noise_probability: cfg.noise_probability,
        preset: cfg.network.preset_name().map(str::to_string),
        input_dim: bundle.input_dim(),
        hidden_dims: state.hidden_dims(),
        output_dim: state.output_dim(),
        n_params: state.spec.n_params(),
        max_epoch: cfg.max_epoch,
        probe_layers: cfg.probe_layers()?.iter().map(|l| l + 1).collect(),
        schedule_len: build_schedule(cfg.max_epoch)?.len(),
    })
}

fn progress_line(records: &[MetricRecord]) -> String {
    let fmt = |split: Split| {
        records
            .iter()
            .find(|r| r.split == split)
            .and_then(|r| Some(format!("{}={:.4}/{:.3}", split.as_str(), r.loss?, r.accuracy?)))
            .unwrap_or_else(|| format!("{}=-", split.as_str()))
    };
    Split::ALL.iter().map(|&s| fmt(s)).collect::<Vec<_>>().join(" ")
}

/// Trains the configured run to `max_epoch` (or `--until`), evaluating,
/// probing and checkpointing at every schedule epoch.
pub fn cmd_train(cfg: &RunConfig, opts: &TrainOptions) -> anyhow::Result<RunPaths> {
    cfg.validate()?;
    let paths = RunPaths::new(&cfg.output_dir);
    let bundle = inject_label_noise(cfg.dataset.load()?, cfg.noise_probability, cfg.noise_seed)
        .map_err(|e| UserError(e.to_string()))?;
    let fresh = new_trainer(cfg, &bundle)?;
    let meta = run_meta(cfg, &bundle, &fresh.state)?;
    let exists = paths.run_meta().exists();
    let (mut trainer, mut records) = match (exists, opts.resume) {
        (true, true) => resume(cfg, &paths, &bundle, &meta)?,
        (true, false) => bail!(UserError(format!(
            "{} already holds a run; pass --resume to continue it",
            paths.root.display()
        ))),
        (false, true) => bail!(UserError(format!("no run to resume in {}", paths.root.display()))),
        (false, false) => {
            start_fresh(cfg, &paths, &bundle, &meta)?;
            (fresh, Vec::new())
        }
    };

    let schedule = build_schedule(cfg.max_epoch)?;
    let probe_layers = cfg.probe_layers()?;
    let stop = opts.until.map_or(cfg.max_epoch, |u| u.min(cfg.max_epoch));
    while trainer.epoch < stop {
        trainer
            .train_epoch(&bundle.train)
            .with_context(|| format!("training {}", paths.root.display()))?;
        if !schedule.contains(trainer.epoch) {
            continue;
        }
        let eval = evaluate_epoch(&trainer.state, &bundle, trainer.epoch, Some(&probe_layers))?;
        if let Some(snapshot) = &eval.snapshot {
            write_snapshot(snapshot, &paths.probes())?;
        }
        if !opts.quiet {
            eprintln!("epoch {:>7}  {}", trainer.epoch, progress_line(&eval.records));
        }
        records.extend(eval.records);
        write_atomic(&paths.metrics(), metrics_to_string(&records).as_bytes())?;
        save_checkpoint(&paths, &trainer)?;
    }
    Ok(paths)
}
