//! Twin correlations in coefficient space and Fisher-z region averaging.

use thiserror::Error;

use crate::basis::CsrCoefficients;

/// Correlations are clamped to `±(1 − FISHER_EPS)` before the z-transform.
pub const FISHER_EPS: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairingError {
    #[error("coefficient vector has zero norm (signal is constant)")]
    ZeroNorm,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation is NaN")]
    NotANumber,
    #[error("invalid parcellation: {0}")]
    Parcellation(String),
    #[error("voxel {voxel}: {source}")]
    Voxel {
        voxel: usize,
        #[source]
        source: Box<PairingError>,
    },
}

/// Oscillating coefficients `(c_1, …, c_k)` of one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    values: Vec<f64>,
    unit_norm: bool,
}

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, unit_norm: false }
    }

    /// Column `signal` of a coefficient matrix, constant term excluded.
    pub fn from_csr(c: &CsrCoefficients, signal: usize) -> Self {
        Self::new(c.oscillating(signal))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self, PairingError> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(PairingError::ZeroNorm);
        }
        Ok(Self { values: self.values.iter().map(|v| v / norm).collect(), unit_norm: true })
    }
}

/// Correlation of two signals computed from their cosine coefficients.
pub fn csr_correlation(a: &CoefficientVector, b: &CoefficientVector) -> Result<f64, PairingError> {
    if a.len() != b.len() {
        return Err(PairingError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let a = a.normalized()?;
    let b = b.normalized()?;
    let rho: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(rho.clamp(-1.0, 1.0))
}

pub fn fisher_z(rho: f64) -> Result<f64, PairingError> {
    if rho.is_nan() {
        return Err(PairingError::NotANumber);
    }
    let max = 1.0 - FISHER_EPS;
    let r = rho.abs().min(max);
    // atanh(r) = ½ ln((1+r)/(1−r)), evaluated on |ρ| so the result is exactly odd.
    Ok((0.5 * (2.0 * r / (1.0 - r)).ln_1p()).copysign(rho))
}

pub fn fisher_inv(z: f64) -> f64 {
    z.tanh()
}

/// Assignment of `n` voxels to regions `1..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parcellation {
    labels: Vec<usize>,
    regions: usize,
    sizes: Vec<usize>,
}

impl Parcellation {
    /// Build from 1-based labels; every region `1..=max label` must be non-empty.
    pub fn new(labels: Vec<usize>) -> Result<Self, PairingError> {
        if labels.is_empty() {
            return Err(PairingError::Parcellation("no voxels".into()));
        }
        if let Some(pos) = labels.iter().position(|&l| l == 0) {
            return Err(PairingError::Parcellation(format!("voxel {pos} has label 0; labels are 1-based")));
        }
        let regions = *labels.iter().max().unwrap();
        let mut sizes = vec![0; regions];
        for &l in &labels {
            sizes[l - 1] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(PairingError::Parcellation(format!("region {} has no voxels", empty + 1)));
        }
        Ok(Self { labels, regions, sizes })
    }

    /// Each voxel is its own region.
    pub fn singletons(n: usize) -> Self {
        Self { labels: (1..=n).collect(), regions: n, sizes: vec![1; n] }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn voxels(&self) -> usize {
        self.labels.len()
    }
}

/// Region-level twin correlations, one value per region in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinCorrelationVector(pub Vec<f64>);

impl TwinCorrelationVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Average voxel correlations within each region in Fisher-z space.
pub fn region_average(voxel_correlations: &[f64], parc: &Parcellation) -> Result<TwinCorrelationVector, PairingError> {
    if voxel_correlations.len() != parc.voxels() {
        return Err(PairingError::LengthMismatch { left: voxel_correlations.len(), right: parc.voxels() });
    }
    let mut sums = vec![0.0; parc.regions];
    for (voxel, (&rho, &label)) in voxel_correlations.iter().zip(&parc.labels).enumerate() {
        sums[label - 1] += fisher_z(rho).map_err(|e| PairingError::Voxel { voxel, source: Box::new(e) })?;
    }
    Ok(TwinCorrelationVector(sums.iter().zip(&parc.sizes).map(|(s, &n)| fisher_inv(s / n as f64)).collect()))
}

/// Per-voxel coefficient correlations of two subjects, then region averaging.
pub fn pair_to_features(
    subject_a: &CsrCoefficients,
    subject_b: &CsrCoefficients,
    parc: &Parcellation,
) -> Result<TwinCorrelationVector, PairingError> {
    if subject_a.degree() != subject_b.degree() {
        return Err(PairingError::LengthMismatch { left: subject_a.degree(), right: subject_b.degree() });
    }
    if subject_a.signals() != subject_b.signals() {
        return Err(PairingError::LengthMismatch { left: subject_a.signals(), right: subject_b.signals() });
    }
    let voxels = crate::par::map_indexed(subject_a.signals(), |v| {
        csr_correlation(&CoefficientVector::from_csr(subject_a, v), &CoefficientVector::from_csr(subject_b, v))
            .map_err(|e| PairingError::Voxel { voxel: v, source: Box::new(e) })
    });
    let voxels = voxels.into_iter().collect::<Result<Vec<_>, _>>()?;
    region_average(&voxels, parc)
}
