use serde::{Deserialize, Serialize};

use super::snapshot::{Accumulator, ProbeGroup, ProbeSnapshot};
use crate::data::GroupMode;
use crate::error::{Error, Result};
use crate::nn::dot;

/// `u·v / (‖u‖‖v‖)`. Zero-norm inputs are an error rather than 0.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "cosine of vectors with {} and {} entries",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Mean post-activation vector of one class within one group.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeanActivation {
    pub layer: usize,
    pub class_id: usize,
    pub group: ProbeGroup,
    pub mode: GroupMode,
    pub mean_vector: Vec<f64>,
    pub n: u64,
}

/// `None` when the group has no samples of `class`.
pub fn mean_class_activation(
    snapshot: &ProbeSnapshot,
    layer: usize,
    group: ProbeGroup,
    mode: GroupMode,
    class: usize,
) -> Result<Option<ClassMeanActivation>> {
    snapshot.check_layer(layer)?;
    Ok(snapshot.cell(layer, group, mode, class).map(|acc| ClassMeanActivation {
        layer,
        class_id: class,
        group,
        mode,
        mean_vector: acc.mean.clone(),
        n: acc.n,
    }))
}

/// Streaming mean of activation rows; `None` for an empty input.
pub fn mean_of_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Option<(Vec<f64>, u64)> {
    let mut rows = rows.into_iter().peekable();
    let mut acc = Accumulator::new(rows.peek()?.len());
    rows.for_each(|r| acc.push(r));
    Some((acc.mean, acc.n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub a: ProbeGroup,
    pub b: ProbeGroup,
}

impl SimilarityPair {
    pub const fn new(a: ProbeGroup, b: ProbeGroup) -> Self {
        SimilarityPair { a, b }
    }

    pub fn name(&self) -> String {
        format!("{}~{}", self.a.as_str(), self.b.as_str())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (a, b) = s.split_once('~')?;
        Some(SimilarityPair::new(ProbeGroup::parse(a)?, ProbeGroup::parse(b)?))
    }
}

pub const CLEAN_NOISY: SimilarityPair = SimilarityPair::new(ProbeGroup::CleanTrain, ProbeGroup::NoisyTrain);

/// The five comparisons produced by analysis, clean↔noisy first.
pub const STANDARD_PAIRS: [SimilarityPair; 5] = [
    CLEAN_NOISY,
    SimilarityPair::new(ProbeGroup::TestCorrect, ProbeGroup::CleanTrain),
    SimilarityPair::new(ProbeGroup::TestCorrect, ProbeGroup::NoisyTrain),
    SimilarityPair::new(ProbeGroup::TestIncorrect, ProbeGroup::CleanTrain),
    SimilarityPair::new(ProbeGroup::TestIncorrect, ProbeGroup::NoisyTrain),
];

/// Per-class cosine similarities of one layer for one pair of groups.
/// `per_class[c]` is `None` when class `c` is empty on either side; such
/// classes are left out of `mean` and `std`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRecord {
    pub epoch: u64,
    pub layer: usize,
    pub pair: SimilarityPair,
    pub per_class: Vec<Option<f64>>,
    pub mean: Option<f64>,
    /// Population standard deviation across the included classes.
    pub std_across_classes: Option<f64>,
}

impl SimilarityRecord {
    pub fn excluded_classes(&self) -> Vec<usize> {
        self.per_class
            .iter()
            .enumerate()
            .filter(|(_, cs)| cs.is_none())
            .map(|(c, _)| c)
            .collect()
    }

    pub fn n_included(&self) -> usize {
        self.per_class.iter().flatten().count()
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Class-matched similarity of one layer. Both sides group by original
/// label, so class `c` of noisy data means inputs that depict `c`.
pub fn layer_similarity(snapshot: &ProbeSnapshot, layer: usize, pair: SimilarityPair) -> Result<SimilarityRecord> {
    snapshot.check_layer(layer)?;
    let mode = GroupMode::InputBased;
    let per_class = (0..snapshot.n_classes)
        .map(|c| {
            match (
                snapshot.cell(layer, pair.a, mode, c),
                snapshot.cell(layer, pair.b, mode, c),
            ) {
                (Some(a), Some(b)) => cosine_similarity(&a.mean, &b.mean).map(Some),
                _ => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let included: Vec<f64> = per_class.iter().flatten().copied().collect();
    let (mean, std_across_classes) = mean_std(&included);
    Ok(SimilarityRecord {
        epoch: snapshot.epoch,
        layer,
        pair,
        per_class,
        mean,
        std_across_classes,
    })
}

/// [`layer_similarity`] for every recorded hidden layer, ascending.
pub fn layer_similarity_sweep(snapshot: &ProbeSnapshot, pair: SimilarityPair) -> Result<Vec<SimilarityRecord>> {
    snapshot
        .layers
        .iter()
        .map(|&l| layer_similarity(snapshot, l, pair))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::nn::Matrix;

    #[test]
    fn cosine_basics() {
        assert!((cosine_similarity(&[0.3, 0.4], &[0.3, 0.4]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::ZeroNorm)));
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mean_of_two_orthogonal_rows() {
        let rows = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let (mean, n) = mean_of_rows(rows.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(mean, vec![0.5, 0.5]);
        assert_eq!(n, 2);
        assert!(mean_of_rows(std::iter::empty()).is_none());
    }

    fn snapshot_with(classes: &[(usize, usize)], act: &Matrix) -> ProbeSnapshot {
        let mut snap = ProbeSnapshot::new(5, 3, vec![act.cols()], vec![0]).unwrap();
        for (row, &(orig, assigned)) in classes.iter().enumerate() {
            let mut s = Sample::clean(vec![], orig);
            s.assign(assigned);
            let group = if s.is_noisy { ProbeGroup::NoisyTrain } else { ProbeGroup::CleanTrain };
            snap.observe(std::slice::from_ref(act), row, &s, &[group]);
        }
        snap
    }

    #[test]
    fn identical_groups_have_unit_similarity() {
        let act = Matrix::from_rows(&[[1.0, 2.0], [0.5, 0.0]]);
        let snap = snapshot_with(&[(0, 0), (1, 1)], &act);
        let pair = SimilarityPair::new(ProbeGroup::CleanTrain, ProbeGroup::CleanTrain);
        let rec = layer_similarity(&snap, 0, pair).unwrap();
        assert!((rec.per_class[0].unwrap() - 1.0).abs() < 1e-12);
        assert!((rec.per_class[1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rec.per_class[2], None);
        assert_eq!(rec.excluded_classes(), vec![2]);
        assert_eq!(rec.n_included(), 2);
        assert!((rec.std_across_classes.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn noisy_side_groups_by_original_label() {
        // clean class-0 sample, and a class-0 image relabeled as 1
        let act = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]);
        let snap = snapshot_with(&[(0, 0), (0, 1)], &act);
        let rec = layer_similarity(&snap, 0, CLEAN_NOISY).unwrap();
        assert!((rec.per_class[0].unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(rec.per_class[1], None);
        assert_eq!(rec.mean, rec.per_class[0]);
    }

    #[test]
    fn dead_layer_is_an_error() {
        let act = Matrix::zeros(2, 3);
        let snap = snapshot_with(&[(0, 0), (0, 1)], &act);
        assert!(matches!(layer_similarity_sweep(&snap, CLEAN_NOISY), Err(Error::ZeroNorm)));
    }

    #[test]
    fn pair_names_round_trip() {
        for p in STANDARD_PAIRS {
            assert_eq!(SimilarityPair::parse(&p.name()), Some(p));
        }
        assert_eq!(CLEAN_NOISY.name(), "clean_train~noisy_train");
    }
}
