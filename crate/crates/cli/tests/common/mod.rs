#![allow(dead_code)]

use std::path::Path;

use ddlab::RunConfig;

/// A small synthetic run written into `dir/run`.
pub fn synthetic_config(dir: &Path, n_train: usize, max_epoch: u64, hidden: &[usize]) -> RunConfig {
    let text = format!(
        r#"
        output_dir = "run"
        noise_probability = 0.3
        noise_seed = 11
        init_seed = 12
        shuffle_seed = 13
        max_epoch = {max_epoch}

        [dataset]
        kind = "synthetic"
        n_train = {n_train}
        n_test = 40
        n_classes = 10
        dim = 12
        seed = 14

        [network]
        hidden_dims = {hidden:?}

        [optim]
        learning_rate = 1e-3
        batch_size = 32
        "#
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    RunConfig::load(&path).unwrap()
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}
