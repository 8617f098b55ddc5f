//! Cosine series representation of time series.
//!
//! A signal sampled on `p` points of the unit interval is projected onto
//! `ψ_0(t) = 1` and `ψ_l(t) = √2 cos(lπt)` for `l = 1..=k` by least squares.
//! The `(k+1)`-row coefficient matrix is the compact representation used by
//! [`crate::pairing`].
//!
//! Samples are placed on the uniform endpoint grid `t_j = j / (p-1)`. On this
//! grid the sampled basis is only approximately orthogonal (off-diagonal Gram
//! entries are `O(1/p)`), so the fit is a genuine least-squares solve done with
//! a Householder QR factorization of the design rather than a projection.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::par;

/// Default expansion degree (120 coefficients out of 1200 samples).
pub const DEFAULT_DEGREE: usize = 119;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("need at least 2 time samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("degree {degree} needs {} samples but only {samples} are available", degree + 1)]
    Underdetermined { degree: usize, samples: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("time grid of the signal ({signal} samples) does not match the design ({design} samples)")]
    GridMismatch { signal: usize, design: usize },
    #[error("coefficient degree {coefficients} does not match design degree {design}")]
    DegreeMismatch { coefficients: usize, design: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Evaluate the `l`-th cosine basis function at `t`.
#[inline]
pub fn cosine_basis(l: usize, t: f64) -> f64 {
    if l == 0 {
        1.0
    } else {
        SQRT_2 * (l as f64 * PI * t).cos()
    }
}

/// Sample locations on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    /// `p` equally spaced points, first at 0 and last at 1.
    pub fn uniform(p: usize) -> Result<Self, BasisError> {
        if p < 2 {
            return Err(BasisError::TooFewSamples(p));
        }
        let last = (p - 1) as f64;
        let mut points: Vec<f64> = (0..p).map(|j| j as f64 / last).collect();
        points[p - 1] = 1.0;
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// `p × n` matrix holding one signal per column.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    grid: TimeGrid,
    values: DMatrix<f64>,
    mean_removed: bool,
}

impl TimeSeriesMatrix {
    /// Wrap samples without touching them.
    pub fn new(values: DMatrix<f64>) -> Result<Self, BasisError> {
        check_finite(&values)?;
        let grid = TimeGrid::uniform(values.nrows())?;
        Ok(Self { grid, values, mean_removed: false })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn mean_removed(&self) -> bool {
        self.mean_removed
    }

    pub fn samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn signals(&self) -> usize {
        self.values.ncols()
    }
}

fn check_finite(values: &DMatrix<f64>) -> Result<(), BasisError> {
    for col in 0..values.ncols() {
        for row in 0..values.nrows() {
            if !values[(row, col)].is_finite() {
                return Err(BasisError::NonFinite { row, col });
            }
        }
    }
    Ok(())
}

/// Map samples onto the unit interval and subtract each signal's temporal mean.
pub fn normalize_time_series(raw: DMatrix<f64>) -> Result<TimeSeriesMatrix, BasisError> {
    if raw.nrows() < 2 {
        return Err(BasisError::TooFewSamples(raw.nrows()));
    }
    check_finite(&raw)?;
    let grid = TimeGrid::uniform(raw.nrows())?;
    let mut values = raw;
    let p = values.nrows() as f64;
    for mut col in values.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / p;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(TimeSeriesMatrix { grid, values, mean_removed: true })
}

/// Sampled cosine basis together with its QR factorization.
#[derive(Debug, Clone)]
pub struct BasisDesign {
    grid: TimeGrid,
    degree: usize,
    matrix: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

/// Build the `p × (k+1)` design matrix `Ψ` for degree `k`.
pub fn build_design(grid: &TimeGrid, degree: usize) -> Result<BasisDesign, BasisError> {
    let p = grid.len();
    if degree + 1 > p {
        return Err(BasisError::Underdetermined { degree, samples: p });
    }
    let matrix = DMatrix::from_fn(p, degree + 1, |j, l| cosine_basis(l, grid.points[j]));
    let qr = matrix.clone().qr();
    Ok(BasisDesign { grid: grid.clone(), degree, q: qr.q(), r: qr.r(), matrix })
}

impl BasisDesign {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// The sampled basis `Ψ`, column `l` holding `ψ_l` on the grid.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn check_rank(&self) -> Result<(), BasisError> {
        let diag: Vec<f64> = (0..=self.degree).map(|i| self.r[(i, i)].abs()).collect();
        let largest = diag.iter().cloned().fold(0.0, f64::max);
        if largest == 0.0 || diag.iter().any(|&d| d <= largest * 1e-12) {
            return Err(BasisError::RankDeficient);
        }
        Ok(())
    }

    // Solve `min ‖Ψc − z‖` for one column: `c = R⁻¹ Qᵀ z`.
    fn solve_column(&self, z: &[f64]) -> Vec<f64> {
        let m = self.degree + 1;
        let mut y: Vec<f64> = (0..m).map(|l| self.q.column(l).iter().zip(z).map(|(q, z)| q * z).sum()).collect();
        for i in (0..m).rev() {
            let mut acc = y[i];
            for j in i + 1..m {
                acc -= self.r[(i, j)] * y[j];
            }
            y[i] = acc / self.r[(i, i)];
        }
        y
    }

    /// Least-squares coefficients of the columns of a raw `p × n` block.
    ///
    /// This is the streaming entry point used for file encoding; it performs no
    /// mean removal.
    pub fn fit_block(&self, block: &DMatrix<f64>) -> Result<DMatrix<f64>, BasisError> {
        if block.nrows() != self.grid.len() {
            return Err(BasisError::GridMismatch { signal: block.nrows(), design: self.grid.len() });
        }
        self.check_rank()?;
        let columns = par::map_indexed(block.ncols(), |i| self.solve_column(block.column(i).as_slice()));
        let mut out = DMatrix::zeros(self.degree + 1, block.ncols());
        for (i, col) in columns.into_iter().enumerate() {
            out.column_mut(i).copy_from_slice(&col);
        }
        Ok(out)
    }
}

/// `(k+1) × n` least-squares coefficients; row `l` multiplies `ψ_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrCoefficients {
    degree: usize,
    matrix: DMatrix<f64>,
}

impl CsrCoefficients {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, BasisError> {
        if matrix.nrows() == 0 {
            return Err(BasisError::ShapeMismatch("coefficient matrix has no rows".into()));
        }
        check_finite(&matrix)?;
        Ok(Self { degree: matrix.nrows() - 1, matrix })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn signals(&self) -> usize {
        self.matrix.ncols()
    }

    /// Coefficients `c_1..c_k` of one signal (the constant term is dropped).
    pub fn oscillating(&self, signal: usize) -> Vec<f64> {
        self.matrix.column(signal).iter().skip(1).copied().collect()
    }

    /// Evaluate the represented curve of `signal` at an arbitrary `t`.
    pub fn evaluate(&self, signal: usize, t: f64) -> f64 {
        self.matrix.column(signal).iter().enumerate().map(|(l, c)| c * cosine_basis(l, t)).sum()
    }
}

/// Least-squares fit of every signal in `z` onto the design.
pub fn fit_csr(z: &TimeSeriesMatrix, design: &BasisDesign) -> Result<CsrCoefficients, BasisError> {
    if z.grid != design.grid {
        return Err(BasisError::GridMismatch { signal: z.samples(), design: design.grid.len() });
    }
    let matrix = design.fit_block(&z.values)?;
    Ok(CsrCoefficients { degree: design.degree, matrix })
}

/// Evaluate `ΨC` on the design grid.
pub fn reconstruct(c: &CsrCoefficients, design: &BasisDesign) -> Result<TimeSeriesMatrix, BasisError> {
    if c.degree != design.degree {
        return Err(BasisError::DegreeMismatch { coefficients: c.degree, design: design.degree });
    }
    Ok(TimeSeriesMatrix { grid: design.grid.clone(), values: &design.matrix * &c.matrix, mean_removed: false })
}

/// Per-signal signal-to-noise ratio of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrReport {
    /// `std(fitted) / std(residual)` per column; `+∞` when the residual vanishes.
    pub ratios: Vec<f64>,
    /// Arithmetic mean over the finite ratios (`+∞` if none is finite).
    pub mean: f64,
    /// Columns whose residual has zero variance.
    pub infinite: Vec<usize>,
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Ratio of the variability of the fitted curve to that of the residual.
pub fn snr(z: &TimeSeriesMatrix, fitted: &TimeSeriesMatrix) -> Result<SnrReport, BasisError> {
    if z.values.shape() != fitted.values.shape() {
        return Err(BasisError::ShapeMismatch(format!("signal {:?} vs fit {:?}", z.values.shape(), fitted.values.shape())));
    }
    let mut ratios = Vec::with_capacity(z.signals());
    let mut infinite = Vec::new();
    for i in 0..z.signals() {
        let zc = z.values.column(i);
        let fc = fitted.values.column(i);
        let scale = zc.iter().chain(fc.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        let resid_sd = population_std(zc.iter().zip(fc.iter()).map(|(a, b)| a - b));
        let fit_sd = population_std(fc.iter().copied());
        if resid_sd <= f64::EPSILON * scale || resid_sd == 0.0 {
            infinite.push(i);
            ratios.push(f64::INFINITY);
        } else {
            ratios.push(fit_sd / resid_sd);
        }
    }
    let finite: Vec<f64> = ratios.iter().copied().filter(|r| r.is_finite()).collect();
    let mean = if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    Ok(SnrReport { ratios, mean, infinite })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn column(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn normalize_examples() {
        let z = normalize_time_series(column(&[3.0, 3.0, 3.0, 3.0])).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(z.mean_removed());

        let z = normalize_time_series(column(&[1.0, -1.0])).unwrap();
        assert_eq!(z.values().as_slice(), &[1.0, -1.0]);

        let z = normalize_time_series(column(&[0.0, 1.0, 2.0])).unwrap();
        assert_eq!(z.values().as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(z.grid().points(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert_eq!(normalize_time_series(column(&[1.0])), Err(BasisError::TooFewSamples(1)));
        assert_eq!(normalize_time_series(column(&[1.0, f64::NAN, 2.0])), Err(BasisError::NonFinite { row: 1, col: 0 }));
    }

    #[test]
    fn basis_values() {
        let grid = TimeGrid::uniform(11).unwrap();
        let design = build_design(&grid, 4).unwrap();
        assert!(design.matrix().column(0).iter().all(|&v| v == 1.0));
        assert_abs_diff_eq!(design.matrix()[(0, 1)], SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(design.matrix()[(10, 1)], -SQRT_2, epsilon = 1e-12);
        for j in 0..11 {
            let t = grid.points()[j];
            for l in 1..=4 {
                let expected = SQRT_2 * (l as f64 * PI * t).cos();
                assert!((design.matrix()[(j, l)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn underdetermined_design_is_rejected() {
        let grid = TimeGrid::uniform(5).unwrap();
        assert!(build_design(&grid, 4).is_ok());
        assert_eq!(build_design(&grid, 5).unwrap_err(), BasisError::Underdetermined { degree: 5, samples: 5 });
    }

    #[test]
    fn grid_and_degree_mismatch() {
        let d10 = build_design(&TimeGrid::uniform(10).unwrap(), 3).unwrap();
        let z = normalize_time_series(DMatrix::from_element(12, 2, 1.0)).unwrap();
        assert!(matches!(fit_csr(&z, &d10), Err(BasisError::GridMismatch { .. })));
        let c = CsrCoefficients::new(DMatrix::zeros(3, 1)).unwrap();
        assert!(matches!(reconstruct(&c, &d10), Err(BasisError::DegreeMismatch { .. })));
    }

    #[test]
    fn zero_coefficients_reconstruct_to_zero() {
        let design = build_design(&TimeGrid::uniform(20).unwrap(), 5).unwrap();
        let c = CsrCoefficients::new(DMatrix::zeros(6, 3)).unwrap();
        assert!(reconstruct(&c, &design).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn snr_degenerate_cases() {
        let z = normalize_time_series(column(&[1.0, -2.0, 0.5, 0.5])).unwrap();
        let report = snr(&z, &z).unwrap();
        assert_eq!(report.infinite, vec![0]);
        assert!(report.ratios[0].is_infinite());

        let zero = TimeSeriesMatrix::new(DMatrix::zeros(4, 1)).unwrap();
        let report = snr(&z, &zero).unwrap();
        assert_eq!(report.ratios, vec![0.0]);
        assert!(report.infinite.is_empty());
    }

    #[test]
    fn evaluate_matches_reconstruction() {
        let grid = TimeGrid::uniform(30).unwrap();
        let design = build_design(&grid, 6).unwrap();
        let c = CsrCoefficients::new(DMatrix::from_fn(7, 2, |l, i| (l + 2 * i) as f64 * 0.1 - 0.3)).unwrap();
        let rec = reconstruct(&c, &design).unwrap();
        for (j, &t) in grid.points().iter().enumerate() {
            assert!((rec.values()[(j, 1)] - c.evaluate(1, t)).abs() < 1e-12);
        }
    }
}
