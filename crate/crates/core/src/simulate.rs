//! Coefficient-level mixed-effects twin simulator.
//!
//! For region `κ` of pair `i`:
//!
//! ```text
//! twin A = c_κ + α_A + β_A
//! twin B = c_κ + α_B + β_B
//! ```
//!
//! with individual noise `β ~ N(0, σ²)` drawn per twin and twin-level noise
//! `α ~ N(0, σ_twin²)`, where `σ_twin = σ` for MZ pairs and `h_κ σ` for DZ
//! pairs. In [`SharingMode::Shared`] one `α` is drawn per pair and added to
//! both twins; in [`SharingMode::Independent`] each twin gets its own `α`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::PairedDataset;
use crate::pairing::{self, CoefficientVector, PairingError, Parcellation};
use crate::seed::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("unknown study {0}; expected 1, 2 or 3")]
    UnknownStudy(u8),
    #[error(transparent)]
    Pairing(#[from] PairingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zygosity {
    #[serde(rename = "MZ")]
    Monozygotic,
    #[serde(rename = "DZ")]
    Dizygotic,
}

impl Zygosity {
    /// Class label: 1 for MZ, 0 for DZ.
    pub fn label(self) -> u8 {
        match self {
            Zygosity::Monozygotic => 1,
            Zygosity::Dizygotic => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharingMode {
    Shared,
    #[default]
    Independent,
}

impl std::str::FromStr for SharingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(Self::Shared),
            "independent" => Ok(Self::Independent),
            other => Err(format!("unknown sharing mode '{other}' (expected shared|independent)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Ground-truth coefficient vector per region.
    pub ground_truth: Vec<Vec<f64>>,
    pub sigma_ind: f64,
    /// DZ twin-level std multiplier per region.
    pub dz_multipliers: Vec<f64>,
    pub pairs_mz: usize,
    pub pairs_dz: usize,
    #[serde(default)]
    pub sharing: SharingMode,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationConfig {
    pub fn regions(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn pairs(&self) -> usize {
        self.pairs_mz + self.pairs_dz
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |msg: String| Err(SimulationError::InvalidConfig(msg));
        if self.ground_truth.is_empty() {
            return bad("at least one region is required".into());
        }
        if !(self.sigma_ind > 0.0 && self.sigma_ind.is_finite()) {
            return bad(format!("sigma_ind must be positive, got {}", self.sigma_ind));
        }
        if self.dz_multipliers.len() != self.regions() {
            return bad(format!("{} DZ multipliers for {} regions", self.dz_multipliers.len(), self.regions()));
        }
        if let Some(h) = self.dz_multipliers.iter().find(|h| !(**h >= 1.0 && h.is_finite())) {
            return bad(format!("DZ multipliers must be >= 1, got {h}"));
        }
        if self.pairs_mz == 0 || self.pairs_dz == 0 {
            return bad("pair counts must be at least 1".into());
        }
        for (k, c) in self.ground_truth.iter().enumerate() {
            if c.is_empty() || c.iter().all(|v| *v == 0.0) || c.iter().any(|v| !v.is_finite()) {
                return bad(format!("region {} ground truth must be a finite nonzero vector", k + 1));
            }
        }
        Ok(())
    }

    fn twin_sigma(&self, region: usize, zygosity: Zygosity) -> f64 {
        match zygosity {
            Zygosity::Monozygotic => self.sigma_ind,
            Zygosity::Dizygotic => self.dz_multipliers[region] * self.sigma_ind,
        }
    }

    /// Zygosity of pair `index`: MZ pairs come first.
    pub fn zygosity_of(&self, index: usize) -> Zygosity {
        if index < self.pairs_mz {
            Zygosity::Monozygotic
        } else {
            Zygosity::Dizygotic
        }
    }
}

/// Preset studies on five regions: no twin difference (1), uniform twin
/// difference (2), and gradually decreasing heritability (3).
pub fn study_preset(which: u8) -> Result<SimulationConfig, SimulationError> {
    let h = match which {
        1 => vec![1.0; 5],
        2 => vec![2.0; 5],
        3 => vec![3.0, 2.5, 2.0, 1.5, 1.0],
        other => return Err(SimulationError::UnknownStudy(other)),
    };
    let c = vec![1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0, 1.0 / 5.0];
    Ok(SimulationConfig {
        ground_truth: vec![c; 5],
        sigma_ind: 0.25,
        dz_multipliers: h,
        pairs_mz: 50,
        pairs_dz: 50,
        sharing: SharingMode::Independent,
        seed: 0,
    })
}

/// Source of standard-normal draws.
pub trait GaussianSource {
    fn standard_normal(&mut self) -> f64;
}

impl GaussianSource for Stream {
    fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPair {
    pub zygosity: Zygosity,
    /// Per-region coefficient vectors of the first twin.
    pub twin_a: Vec<Vec<f64>>,
    pub twin_b: Vec<Vec<f64>>,
}

/// Draw one pair with explicit noise sources for the twin-level and the
/// individual-level terms.
pub fn generate_pair_from<A, B>(cfg: &SimulationConfig, zygosity: Zygosity, alpha: &mut A, beta: &mut B) -> SyntheticPair
where
    A: GaussianSource + ?Sized,
    B: GaussianSource + ?Sized,
{
    let sigma = cfg.sigma_ind;
    let mut twin_a = Vec::with_capacity(cfg.regions());
    let mut twin_b = Vec::with_capacity(cfg.regions());
    for (k, c) in cfg.ground_truth.iter().enumerate() {
        let st = cfg.twin_sigma(k, zygosity);
        let alpha_a: Vec<f64> = c.iter().map(|_| st * alpha.standard_normal()).collect();
        let alpha_b = match cfg.sharing {
            SharingMode::Shared => alpha_a.clone(),
            SharingMode::Independent => c.iter().map(|_| st * alpha.standard_normal()).collect(),
        };
        let a = c.iter().zip(&alpha_a).map(|(c, al)| c + al + sigma * beta.standard_normal()).collect();
        let b = c.iter().zip(&alpha_b).map(|(c, al)| c + al + sigma * beta.standard_normal()).collect();
        twin_a.push(a);
        twin_b.push(b);
    }
    SyntheticPair { zygosity, twin_a, twin_b }
}

/// Draw pair `index` from its own substreams of `cfg.seed`.
pub fn generate_pair(cfg: &SimulationConfig, zygosity: Zygosity, index: u64) -> SyntheticPair {
    let mut alpha = seed::stream(cfg.seed, "simulate/alpha", index);
    let mut beta = seed::stream(cfg.seed, "simulate/beta", index);
    generate_pair_from(cfg, zygosity, &mut alpha, &mut beta)
}

/// Region-wise twin correlations of one pair.
pub fn pair_features(pair: &SyntheticPair) -> Result<Vec<f64>, SimulationError> {
    let voxels = pair
        .twin_a
        .iter()
        .zip(&pair.twin_b)
        .map(|(a, b)| pairing::csr_correlation(&CoefficientVector::new(a.clone()), &CoefficientVector::new(b.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let parc = Parcellation::singletons(voxels.len());
    Ok(pairing::region_average(&voxels, &parc)?.0)
}

/// Simulate every pair of `cfg` and turn it into a labelled feature vector.
pub fn generate_dataset(cfg: &SimulationConfig) -> Result<PairedDataset, SimulationError> {
    cfg.validate()?;
    let rows = crate::par::map_indexed(cfg.pairs(), |i| {
        let pair = generate_pair(cfg, cfg.zygosity_of(i), i as u64);
        pair_features(&pair).map(|f| (f, pair.zygosity.label()))
    });
    let (features, labels): (Vec<_>, Vec<_>) = rows.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().unzip();
    PairedDataset::new(features, labels).map_err(|e| SimulationError::InvalidConfig(e.to_string()))
}
