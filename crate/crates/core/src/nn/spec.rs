use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CIFAR-10 images flattened to 3 × 32 × 32 features.
pub const CIFAR10_INPUT_DIM: usize = 3072;
pub const CIFAR10_CLASSES: usize = 10;

/// Architecture of a fully connected ReLU network with a softmax output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub seed: u64,
}

/// The three reference architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Mlp7,
    Mlp5,
    Mlp3,
}

impl Preset {
    pub fn hidden_dims(self) -> &'static [usize] {
        match self {
            Preset::Mlp7 => &[2048, 2048, 1024, 1024, 512, 512],
            Preset::Mlp5 => &[2048, 1024, 512, 512],
            Preset::Mlp3 => &[1024, 512],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Mlp7 => "mlp7",
            Preset::Mlp5 => "mlp5",
            Preset::Mlp3 => "mlp3",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp7" => Ok(Preset::Mlp7),
            "mlp5" => Ok(Preset::Mlp5),
            "mlp3" => Ok(Preset::Mlp3),
            other => Err(Error::InvalidSpec(format!("unknown preset {other:?}"))),
        }
    }
}

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize, seed: u64) -> Result<Self> {
        let spec = NetworkSpec {
            input_dim,
            hidden_dims,
            output_dim,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A preset on CIFAR-10 shaped input.
    pub fn preset(preset: Preset, seed: u64) -> Self {
        NetworkSpec {
            input_dim: CIFAR10_INPUT_DIM,
            hidden_dims: preset.hidden_dims().to_vec(),
            output_dim: CIFAR10_CLASSES,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() {
            return Err(Error::InvalidSpec("at least one hidden layer is required".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidSpec("all layer dimensions must be >= 1".into()));
        }
        Ok(())
    }

    /// `(in_dim, out_dim)` of every dense layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_expand_to_reference_widths() {
        let mlp7 = NetworkSpec::preset(Preset::Mlp7, 0);
        assert_eq!(mlp7.hidden_dims, vec![2048, 2048, 1024, 1024, 512, 512]);
        assert_eq!(NetworkSpec::preset(Preset::Mlp5, 0).hidden_dims, vec![2048, 1024, 512, 512]);
        assert_eq!(NetworkSpec::preset(Preset::Mlp3, 0).hidden_dims, vec![1024, 512]);
        for p in [Preset::Mlp7, Preset::Mlp5, Preset::Mlp3] {
            let s = NetworkSpec::preset(p, 1);
            assert_eq!(s.input_dim, 3072);
            assert_eq!(s.output_dim, 10);
            s.validate().unwrap();
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(NetworkSpec::new(3, vec![], 2, 0).is_err());
        assert!(NetworkSpec::new(3, vec![4, 0], 2, 0).is_err());
        assert!(NetworkSpec::new(0, vec![4], 2, 0).is_err());
        assert!(NetworkSpec::new(3, vec![4], 0, 0).is_err());
    }

    #[test]
    fn counts_parameters() {
        let s = NetworkSpec::new(3, vec![4], 2, 0).unwrap();
        assert_eq!(s.layer_shapes(), vec![(3, 4), (4, 2)]);
        assert_eq!(s.n_params(), 3 * 4 + 4 + 4 * 2 + 2);
    }
}
