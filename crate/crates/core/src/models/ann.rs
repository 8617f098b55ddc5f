//! Two-layer sigmoid network with an L1 penalty on the input weights.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::PairedDataset;
use super::scg::{self, Control, Objective, ScgOptions};
use super::ModelError;
use crate::seed::Stream;

/// Floor applied to the arguments of the logarithms in the cross-entropy.
pub const LOG_FLOOR: f64 = 1e-12;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

// ln(1 + e^u) without overflow.
#[inline]
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Network parameters. Flat layout: `W1` (row-major `hidden × inputs`),
/// `b1`, `w2`, `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    inputs: usize,
    hidden: usize,
    params: Vec<f64>,
    /// Discrimination threshold on the output.
    pub threshold: f64,
}

impl AnnModel {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self { inputs, hidden, params: vec![0.0; param_count(inputs, hidden)], threshold: 0.5 }
    }

    pub fn from_params(inputs: usize, hidden: usize, params: Vec<f64>) -> Result<Self, ModelError> {
        if params.len() != param_count(inputs, hidden) {
            return Err(ModelError::Dimension { expected: param_count(inputs, hidden), got: params.len() });
        }
        Ok(Self { inputs, hidden, params, threshold: 0.5 })
    }

    /// Gaussian initialization with standard deviation `1/√fan-in` per layer,
    /// or `scale` for every parameter when given.
    pub fn random(inputs: usize, hidden: usize, scale: Option<f64>, rng: &mut Stream) -> Self {
        let mut m = Self::zeros(inputs, hidden);
        let s1 = scale.unwrap_or(1.0 / (inputs as f64).sqrt());
        let s2 = scale.unwrap_or(1.0 / (hidden as f64).sqrt());
        let first = hidden * inputs + hidden;
        for (i, p) in m.params.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            *p = z * if i < first { s1 } else { s2 };
        }
        m
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// First-layer weights, row-major `hidden × inputs`.
    pub fn input_weights(&self) -> &[f64] {
        &self.params[..self.hidden * self.inputs]
    }

    pub fn input_weights_mut(&mut self) -> &mut [f64] {
        let n = self.hidden * self.inputs;
        &mut self.params[..n]
    }

    /// `Σ |W1|`.
    pub fn l1_norm(&self) -> f64 {
        self.input_weights().iter().map(|w| w.abs()).sum()
    }

    /// Network output in `(0, 1)`.
    pub fn forward(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.inputs {
            return Err(ModelError::Dimension { expected: self.inputs, got: x.len() });
        }
        Ok(sigmoid(output_activation(&self.params, self.inputs, self.hidden, x, None)))
    }

    /// `1` (MZ) when the output reaches the threshold, else `0`.
    pub fn classify(&self, x: &[f64]) -> Result<u8, ModelError> {
        Ok(threshold_rule(self.forward(x)?, self.threshold))
    }

    pub fn outputs(&self, data: &PairedDataset) -> Result<Vec<f64>, ModelError> {
        data.features().iter().map(|x| self.forward(x)).collect()
    }
}

/// Thresholding rule: `1` if `o ≥ θ`, else `0`.
#[inline]
pub fn threshold_rule(output: f64, threshold: f64) -> u8 {
    u8::from(output >= threshold)
}

pub fn param_count(inputs: usize, hidden: usize) -> usize {
    hidden * inputs + 2 * hidden + 1
}

// Pre-sigmoid output; fills `hidden_out` with hidden activations when given.
fn output_activation(params: &[f64], inputs: usize, hidden: usize, x: &[f64], mut hidden_out: Option<&mut [f64]>) -> f64 {
    let (w1, rest) = params.split_at(hidden * inputs);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let mut a = b2[0];
    for j in 0..hidden {
        let row = &w1[j * inputs..(j + 1) * inputs];
        let u = b1[j] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        let h = sigmoid(u);
        if let Some(out) = hidden_out.as_deref_mut() {
            out[j] = h;
        }
        a += w2[j] * h;
    }
    a
}

/// Penalized cross-entropy on a fixed batch as an SCG objective.
pub struct AnnObjective<'a> {
    pub data: &'a PairedDataset,
    pub inputs: usize,
    pub hidden: usize,
    pub lambda: f64,
}

impl AnnObjective<'_> {
    /// Mean cross-entropy without the penalty; gradient accumulated into `grad`
    /// when given.
    fn data_term(&self, params: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (m, h) = (self.inputs, self.hidden);
        let n = self.data.len() as f64;
        let floor = LOG_FLOOR.ln();
        let mut hidden = vec![0.0; h];
        let mut loss = 0.0;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for (x, &t) in self.data.features().iter().zip(self.data.labels()) {
            let a = output_activation(params, m, h, x, Some(&mut hidden));
            let ln_o = -softplus(-a);
            let ln_1mo = -softplus(a);
            let t = f64::from(t);
            loss -= t * ln_o.max(floor) + (1.0 - t) * ln_1mo.max(floor);

            let Some(g) = grad.as_deref_mut() else { continue };
            let o = sigmoid(a);
            // d(loss)/da with the floors treated exactly.
            let mut delta = 0.0;
            if t > 0.0 && ln_o > floor {
                delta -= t * (1.0 - o);
            }
            if t < 1.0 && ln_1mo > floor {
                delta += (1.0 - t) * o;
            }
            if delta == 0.0 {
                continue;
            }
            let delta = delta / n;
            let w2 = &params[h * m + h..h * m + 2 * h];
            let (gw1, rest) = g.split_at_mut(h * m);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(h);
            gb2[0] += delta;
            for j in 0..h {
                gw2[j] += delta * hidden[j];
                let dh = delta * w2[j] * hidden[j] * (1.0 - hidden[j]);
                gb1[j] += dh;
                for (gw, xi) in gw1[j * m..(j + 1) * m].iter_mut().zip(x) {
                    *gw += dh * xi;
                }
            }
        }
        loss / n
    }

    fn penalty(&self, params: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let w1 = &params[..self.hidden * self.inputs];
        if let Some(g) = grad {
            for (g, w) in g.iter_mut().zip(w1) {
                // sign(0) = 0
                *g += self.lambda
                    * if *w > 0.0 {
                        1.0
                    } else if *w < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
            }
        }
        self.lambda * w1.iter().map(|w| w.abs()).sum::<f64>()
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        self.data_term(params, None) + self.penalty(params, None)
    }
}

impl Objective for AnnObjective<'_> {
    fn dim(&self) -> usize {
        param_count(self.inputs, self.hidden)
    }

    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        self.data_term(w, Some(grad)) + self.penalty(w, Some(grad))
    }
}

fn check_batch(model: &AnnModel, data: &PairedDataset, lambda: f64) -> Result<(), ModelError> {
    if data.is_empty() {
        return Err(ModelError::InvalidData("empty batch".into()));
    }
    if data.dim() != model.inputs {
        return Err(ModelError::Dimension { expected: model.inputs, got: data.dim() });
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(ModelError::InvalidConfig(format!("lambda must be non-negative, got {lambda}")));
    }
    Ok(())
}

/// Mean cross-entropy plus `λ Σ|W1|`.
pub fn ann_loss(model: &AnnModel, data: &PairedDataset, lambda: f64) -> Result<f64, ModelError> {
    check_batch(model, data, lambda)?;
    let obj = AnnObjective { data, inputs: model.inputs, hidden: model.hidden, lambda };
    Ok(obj.loss(&model.params))
}

/// Mean cross-entropy alone.
pub fn cross_entropy(model: &AnnModel, data: &PairedDataset) -> Result<f64, ModelError> {
    ann_loss(model, data, 0.0)
}

/// Gradient of [`ann_loss`] in the flat parameter layout (L1 subgradient with `sign(0) = 0`).
pub fn ann_gradient(model: &AnnModel, data: &PairedDataset, lambda: f64) -> Result<Vec<f64>, ModelError> {
    check_batch(model, data, lambda)?;
    let obj = AnnObjective { data, inputs: model.inputs, hidden: model.hidden, lambda };
    let mut g = vec![0.0; model.params.len()];
    obj.value_and_gradient(&model.params, &mut g);
    Ok(g)
}

/// Training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub hidden: usize,
    pub lambda: f64,
    pub max_iterations: usize,
    /// Consecutive non-improving validation checks before stopping.
    pub patience: usize,
    pub gradient_tolerance: f64,
    /// Fixed initialization std; `None` means `1/√fan-in`.
    pub init_scale: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { hidden: 200, lambda: 0.01, max_iterations: 1000, patience: 6, gradient_tolerance: 1e-6, init_scale: None }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 || self.max_iterations == 0 || self.patience == 0 {
            return Err(ModelError::InvalidConfig("hidden, max_iterations and patience must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidConfig(format!("lambda must be a non-negative number, got {}", self.lambda)));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ModelError::InvalidConfig(format!("init_scale must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAnn {
    pub model: AnnModel,
    pub iterations: usize,
    pub best_iteration: usize,
    pub validation_loss: f64,
}

/// Full-batch SCG on the penalized loss with validation early stopping.
/// Patience counts accepted steps only.
/// Returns the parameters with the lowest validation cross-entropy seen.
pub fn train_ann(
    train: &PairedDataset,
    validation: &PairedDataset,
    cfg: &TrainingConfig,
    rng: &mut Stream,
) -> Result<TrainedAnn, ModelError> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(ModelError::InvalidData("training and validation sets must be non-empty".into()));
    }
    if train.dim() != validation.dim() {
        return Err(ModelError::Dimension { expected: train.dim(), got: validation.dim() });
    }
    let inputs = train.dim();
    let mut model = AnnModel::random(inputs, cfg.hidden, cfg.init_scale, rng);
    let objective = AnnObjective { data: train, inputs, hidden: cfg.hidden, lambda: cfg.lambda };
    let val_objective = AnnObjective { data: validation, inputs, hidden: cfg.hidden, lambda: 0.0 };

    let mut best_params = model.params.clone();
    let mut best_loss = val_objective.loss(&best_params);
    let mut best_iteration = 0;
    let mut fails = 0;
    let opts = ScgOptions { max_iterations: cfg.max_iterations, gradient_tolerance: cfg.gradient_tolerance, ..ScgOptions::default() };
    let mut last = model.params.clone();
    let outcome = scg::minimize(&objective, &mut model.params, &opts, |k, w, _| {
        // A rejected SCG step leaves the weights untouched; it is not a validation check.
        if w == last.as_slice() {
            return Control::Continue;
        }
        last.copy_from_slice(w);
        let v = val_objective.loss(w);
        if v < best_loss {
            best_loss = v;
            best_params.copy_from_slice(w);
            best_iteration = k;
            fails = 0;
        } else {
            fails += 1;
        }
        if fails >= cfg.patience {
            Control::Stop
        } else {
            Control::Continue
        }
    })
    .map_err(|d| ModelError::Diverged { iteration: d.iteration })?;

    model.params = best_params;
    Ok(TrainedAnn { model, iterations: outcome.iterations, best_iteration, validation_loss: best_loss })
}
