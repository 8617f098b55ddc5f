//! Logistic-regression baseline fitted by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ann::sigmoid;
use super::dataset::PairedDataset;
use super::metrics::Metrics;
use super::ModelError;

pub const MAX_ITERATIONS: usize = 100;
pub const STEP_TOLERANCE: f64 = 1e-8;
pub const RIDGE: f64 = 1e-8;
pub const SEPARATION_LIMIT: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Coefficients exceeded the separation limit, or the fit reproduces
    /// every label with saturated probabilities.
    pub separated: bool,
    /// All labels belong to one class.
    pub one_class: bool,
    /// A ridge of `1e-8·I` was needed at some iteration.
    pub regularized: bool,
}

impl LogRegModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.intercept + self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
    }

    pub fn flagged(&self) -> bool {
        // Non-convergence, separation and one-class data all mean the maximum
        // likelihood estimate does not exist or was not reached.
        !self.converged || self.separated || self.one_class
    }

    pub fn evaluate(&self, data: &PairedDataset) -> Metrics {
        let predictions: Vec<u8> = data.features().iter().map(|x| u8::from(self.predict(x) >= 0.5)).collect();
        Metrics::from_predictions(&predictions, data.labels())
    }
}

/// IRLS from `w = 0`:
/// `w ← (XᵀSX)⁻¹ Xᵀ(SXw + T − Y)`, evaluated in the equivalent increment
/// form `w ← w + (XᵀSX)⁻¹ Xᵀ(T − Y)`.
pub fn train_logreg(data: &PairedDataset) -> Result<LogRegModel, ModelError> {
    let n = data.len();
    let m = data.dim();
    if data.features().iter().flatten().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidData("non-finite feature".into()));
    }
    // Intercept is the last column.
    let x = DMatrix::from_fn(n, m + 1, |i, j| if j == m { 1.0 } else { data.features()[i][j] });
    let t = DVector::from_iterator(n, data.labels().iter().map(|&v| f64::from(v)));
    let positives = data.labels().iter().filter(|&&v| v == 1).count();

    let mut w = DVector::zeros(m + 1);
    let mut model = LogRegModel {
        weights: vec![],
        intercept: 0.0,
        iterations: 0,
        converged: false,
        separated: false,
        one_class: positives == 0 || positives == n,
        regularized: false,
    };

    for k in 1..=MAX_ITERATIONS {
        model.iterations = k;
        let eta = &x * &w;
        let y = eta.map(sigmoid);
        let s = y.map(|v| v * (1.0 - v));
        let mut xsx = DMatrix::zeros(m + 1, m + 1);
        for i in 0..n {
            let row = x.row(i);
            xsx += s[i] * row.transpose() * row;
        }
        let rhs = x.transpose() * (&t - &y);
        let step = match xsx.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                model.regularized = true;
                let ridged = xsx + DMatrix::identity(m + 1, m + 1) * RIDGE;
                match ridged.clone().cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => ridged.lu().solve(&rhs).ok_or_else(|| ModelError::InvalidData("weighted normal matrix is singular".into()))?,
                }
            }
        };
        w += &step;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Diverged { iteration: k });
        }
        if w.amax() > SEPARATION_LIMIT {
            model.separated = true;
            break;
        }
        if step.amax() < STEP_TOLERANCE {
            model.converged = true;
            break;
        }
    }
    // Saturated sigmoids stall Newton long before the coefficients reach the
    // separation limit.
    if !model.one_class && !model.separated {
        let y = (&x * &w).map(sigmoid);
        model.separated = (&t - &y).amax() < 1e-6;
    }
    model.weights = w.iter().take(m).copied().collect();
    model.intercept = w[m];
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_class_is_flagged() {
        let d = PairedDataset::new(vec![vec![0.1], vec![0.4], vec![-0.3]], vec![1, 1, 1]).unwrap();
        let m = train_logreg(&d).unwrap();
        assert!(m.one_class);
        assert!(m.flagged());
        assert!(m.intercept > 5.0);
    }

    #[test]
    fn separable_data_is_flagged() {
        let d = PairedDataset::new(vec![vec![-0.5], vec![-0.2], vec![0.3], vec![0.6]], vec![0, 0, 1, 1]).unwrap();
        let m = train_logreg(&d).unwrap();
        assert!(m.separated, "{m:?}");
        assert!(m.flagged());
    }

    #[test]
    fn score_equation_at_fixed_point() {
        let xs = [-0.9, -0.5, -0.4, -0.1, 0.0, 0.2, 0.3, 0.5, 0.7, 0.8];
        let ts = [0u8, 0, 1, 0, 1, 0, 1, 1, 0, 1];
        let d = PairedDataset::new(xs.iter().map(|&v| vec![v]).collect(), ts.to_vec()).unwrap();
        let m = train_logreg(&d).unwrap();
        assert!(m.converged && !m.separated);
        let (mut s0, mut s1) = (0.0, 0.0);
        for (x, t) in xs.iter().zip(ts) {
            let r = f64::from(t) - m.predict(&[*x]);
            s0 += r * x;
            s1 += r;
        }
        assert!(s0.abs() < 1e-6 && s1.abs() < 1e-6);
    }
}
