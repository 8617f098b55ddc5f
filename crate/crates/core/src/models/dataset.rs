use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::seed::Stream;

/// Twin-pair feature vectors with zygosity labels (1 = MZ, 0 = DZ).
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    dim: usize,
}

impl PairedDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self, ModelError> {
        if features.is_empty() {
            return Err(ModelError::InvalidData("dataset is empty".into()));
        }
        if features.len() != labels.len() {
            return Err(ModelError::InvalidData(format!("{} feature rows but {} labels", features.len(), labels.len())));
        }
        let dim = features[0].len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != dim {
                return Err(ModelError::InvalidData(format!("row {i} has {} features, expected {dim}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
                return Err(ModelError::InvalidData(format!("row {i}: feature {v} outside [-1, 1]")));
            }
        }
        if let Some(i) = labels.iter().position(|&t| t > 1) {
            return Err(ModelError::InvalidData(format!("row {i}: label {} is not binary", labels[i])));
        }
        Ok(Self { features, labels, dim })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of features per pair.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> (&[f64], u8) {
        (&self.features[i], self.labels[i])
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
        }
    }

    /// Keep only the feature columns in `columns`, in that order.
    pub fn select_features(&self, columns: &[usize]) -> Self {
        Self {
            features: self.features.iter().map(|row| columns.iter().map(|&c| row[c]).collect()).collect(),
            labels: self.labels.clone(),
            dim: columns.len(),
        }
    }
}

/// Holdout proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let r = [self.train, self.validation, self.test];
        if r.iter().any(|&x| !(x > 0.0 && x.is_finite())) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidConfig(format!("split ratios must be positive and sum to 1, got {:?}", r)));
        }
        Ok(())
    }

    /// Subset sizes for `n` items.
    ///
    /// Largest-remainder rounding (ties to the earlier subset); if a subset ends
    /// up empty it borrows one item from the largest subset.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3], ModelError> {
        self.validate()?;
        let ratios = [self.train, self.validation, self.test];
        let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
        let mut sizes = [0usize; 3];
        for i in 0..3 {
            sizes[i] = exact[i].floor() as usize;
        }
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        let assigned: usize = sizes.iter().sum();
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        for i in 0..3 {
            if sizes[i] == 0 {
                let donor = (0..3).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap();
                if sizes[donor] > 1 {
                    sizes[donor] -= 1;
                    sizes[i] += 1;
                }
            }
        }
        if sizes.contains(&0) {
            return Err(ModelError::InvalidData(format!("cannot split {n} pairs into three non-empty subsets")));
        }
        Ok(sizes)
    }
}

/// Index sets of a holdout split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniformly random, unstratified holdout split.
pub fn split_indices(n: usize, spec: &SplitSpec, rng: &mut Stream) -> Result<SplitIndices, ModelError> {
    let [a, b, _] = spec.sizes(n)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    Ok(SplitIndices { train: idx[..a].to_vec(), validation: idx[a..a + b].to_vec(), test: idx[a + b..].to_vec() })
}

pub fn split(
    data: &PairedDataset,
    spec: &SplitSpec,
    rng: &mut Stream,
) -> Result<(PairedDataset, PairedDataset, PairedDataset), ModelError> {
    let s = split_indices(data.len(), spec, rng)?;
    Ok((data.subset(&s.train), data.subset(&s.validation), data.subset(&s.test)))
}
