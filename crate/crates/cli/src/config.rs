//! Run configuration, read from a TOML file. Every default mirrors the
//! reference setup, so a file naming only the dataset reproduces it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ddlab_core::data::{load_cifar10, make_synthetic, SyntheticConfig, DatasetBundle};
use ddlab_core::nn::{NetworkSpec, OptimConfig, Preset};
use serde::{Deserialize, Serialize};

use crate::UserError;

pub const DEFAULT_NOISE_PROBABILITY: f64 = 0.3;
pub const DEFAULT_MAX_EPOCH: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Directory of the binary CIFAR-10 batches. `n_train`/`n_test` keep
    /// only the first samples in file order.
    Cifar10 {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_train: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_test: Option<usize>,
    },
    Synthetic(SyntheticConfig),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Cifar10 {
            path: PathBuf::from("cifar-10-batches-bin"),
            n_train: None,
            n_test: None,
        }
    }
}

impl DatasetConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            DatasetConfig::Cifar10 { .. } => "cifar10",
            DatasetConfig::Synthetic(_) => "synthetic",
        }
    }

    /// The clean dataset, before label noise.
    pub fn load(&self) -> anyhow::Result<DatasetBundle> {
        match self {
            DatasetConfig::Cifar10 { path, n_train, n_test } => {
                let bundle = load_cifar10(path).map_err(|e| UserError(format!("loading CIFAR-10: {e}")))?;
                let (tr, te) = (bundle.train.len(), bundle.test.len());
                Ok(bundle.truncate(n_train.unwrap_or(tr), n_test.unwrap_or(te)))
            }
            DatasetConfig::Synthetic(cfg) => Ok(make_synthetic(cfg).map_err(|e| UserError(e.to_string()))?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dims: Option<Vec<usize>>,
}

impl NetworkConfig {
    pub fn resolve(&self) -> anyhow::Result<Vec<usize>> {
        match (self.preset, &self.hidden_dims) {
            (Some(_), Some(_)) => bail!(UserError("set either network.preset or network.hidden_dims, not both".into())),
            (_, Some(dims)) => Ok(dims.clone()),
            (preset, None) => Ok(preset.unwrap_or(Preset::Mlp7).hidden_dims().to_vec()),
        }
    }

    pub fn preset_name(&self) -> Option<&'static str> {
        match (self.preset, &self.hidden_dims) {
            (_, Some(_)) => None,
            (p, None) => Some(p.unwrap_or(Preset::Mlp7).name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    /// Epochs where a new phase starts. When absent, analysis falls back to
    /// the heuristic detector.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub noise_probability: f64,
    pub noise_seed: u64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub max_epoch: u64,
    /// 1-based hidden layers to probe; all of them when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_layers: Option<Vec<usize>>,
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub optim: OptimConfig,
    pub phases: PhaseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("run"),
            noise_probability: DEFAULT_NOISE_PROBABILITY,
            noise_seed: 0,
            init_seed: 0,
            shuffle_seed: 0,
            max_epoch: DEFAULT_MAX_EPOCH,
            probe_layers: None,
            dataset: DatasetConfig::default(),
            network: NetworkConfig::default(),
            optim: OptimConfig::default(),
            phases: PhaseConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| UserError(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UserError(format!("reading {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.output_dir = base.join(&cfg.output_dir);
        if let DatasetConfig::Cifar10 { path, .. } = &mut cfg.dataset {
            *path = base.join(&*path);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(0.0..1.0).contains(&self.noise_probability) {
            bail!(UserError(format!("noise_probability {} outside [0, 1)", self.noise_probability)));
        }
        if self.max_epoch == 0 {
            bail!(UserError("max_epoch must be at least 1".into()));
        }
        self.optim.validate().map_err(|e| UserError(e.to_string()))?;
        let n_hidden = self.network.resolve()?.len();
        if let Some(layers) = &self.probe_layers {
            if let Some(bad) = layers.iter().find(|&&l| l == 0 || l > n_hidden) {
                bail!(UserError(format!("probe layer {bad} outside 1..={n_hidden}")));
            }
        }
        Ok(())
    }

    pub fn network_spec(&self, input_dim: usize, n_classes: usize) -> anyhow::Result<NetworkSpec> {
        NetworkSpec::new(input_dim, self.network.resolve()?, n_classes, self.init_seed)
            .map_err(|e| UserError(e.to_string()).into())
    }

    /// 0-based probed layers.
    pub fn probe_layers(&self) -> anyhow::Result<Vec<usize>> {
        let n_hidden = self.network.resolve()?.len();
        Ok(match &self.probe_layers {
            Some(layers) => layers.iter().map(|l| l - 1).collect(),
            None => (0..n_hidden).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_reference_setup() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.noise_probability, 0.3);
        assert_eq!(cfg.max_epoch, 100_000);
        assert_eq!(cfg.network.resolve().unwrap(), vec![2048, 2048, 1024, 1024, 512, 512]);
        assert_eq!(cfg.optim, OptimConfig::default());
        assert_eq!(cfg.probe_layers().unwrap(), (0..6).collect::<Vec<_>>());
        assert!(matches!(cfg.dataset, DatasetConfig::Cifar10 { .. }));
    }

    #[test]
    fn synthetic_and_explicit_dims() {
        let cfg = RunConfig::parse(
            r#"
            max_epoch = 10
            probe_layers = [2]
            [dataset]
            kind = "synthetic"
            n_train = 100
            n_test = 20
            n_classes = 10
            dim = 8
            [network]
            hidden_dims = [16, 8]
            [optim]
            learning_rate = 1e-3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.network.resolve().unwrap(), vec![16, 8]);
        assert_eq!(cfg.network.preset_name(), None);
        assert_eq!(cfg.probe_layers().unwrap(), vec![1]);
        assert_eq!(cfg.optim.batch_size, 512);
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn presets_expand() {
        let cfg = RunConfig::parse("[network]\npreset = \"mlp3\"").unwrap();
        assert_eq!(cfg.network.resolve().unwrap(), vec![1024, 512]);
        assert_eq!(cfg.network.preset_name(), Some("mlp3"));
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "noise_probability = 1.0",
            "max_epoch = 0",
            "probe_layers = [0]",
            "probe_layers = [7]",
            "[network]\npreset = \"mlp3\"\nhidden_dims = [4]",
            "[optim]\nlearning_rate = -1.0",
            "unknown_key = 1",
        ] {
            let err = RunConfig::parse(bad).unwrap_err();
            assert!(err.downcast_ref::<UserError>().is_some(), "{bad}: {err:#}");
        }
    }
}
