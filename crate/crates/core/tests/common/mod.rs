//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twinzyg::models::{ann_gradient, ann_loss, AnnModel, Metrics, PairedDataset};
use twinzyg::selection::SubsetEvaluator;

/// Worst relative error between the analytic gradient and central
/// differences (step 1e-6) over `points` random parameter vectors whose input
/// weights stay at least 1e-3 away from zero.
pub fn worst_gradient_error(points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (inputs, hidden) = (rng.random_range(1..5), rng.random_range(1..6));
        let n = rng.random_range(3..12);
        let features = (0..n).map(|_| (0..inputs).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let data = PairedDataset::new(features, labels).unwrap();
        let params: Vec<f64> = (0..twinzyg::models::ann::param_count(inputs, hidden))
            .map(|i| {
                let v: f64 = rng.random_range(-1.5..1.5);
                if i < inputs * hidden && v.abs() < 1e-3 {
                    1e-3_f64.copysign(v) * 2.0
                } else {
                    v
                }
            })
            .collect();
        let lambda = rng.random_range(0.0..0.1);
        let model = AnnModel::from_params(inputs, hidden, params.clone()).unwrap();
        let g = ann_gradient(&model, &data, lambda).unwrap();
        let h = 1e-6;
        let fd: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut p = params.clone();
                p[i] += h;
                let up = ann_loss(&AnnModel::from_params(inputs, hidden, p.clone()).unwrap(), &data, lambda).unwrap();
                p[i] -= 2.0 * h;
                let down = ann_loss(&AnnModel::from_params(inputs, hidden, p).unwrap(), &data, lambda).unwrap();
                (up - down) / (2.0 * h)
            })
            .collect();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|b| b * b).sum::<f64>().sqrt()).max(1e-8);
        worst = worst.max(diff / scale);
    }
    worst
}

fn log_loss(xs: &[f64], ts: &[u8], w: f64, b: f64) -> f64 {
    xs.iter()
        .zip(ts)
        .map(|(&x, &t)| {
            let u = w * x + b;
            // ln(1 + e^u) − t·u
            let sp = if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
            sp - f64::from(t) * u
        })
        .sum()
}

/// Minimizer of the unpenalized log-loss over (slope, intercept) by repeated
/// grid refinement around the best point.
pub fn grid_logreg(xs: &[f64], ts: &[u8]) -> (f64, f64) {
    let (mut cw, mut cb, mut half) = (0.0, 0.0, 20.0);
    for _ in 0..40 {
        let steps = 40;
        let mut best = (f64::INFINITY, cw, cb);
        for i in 0..=steps {
            for j in 0..=steps {
                let w = cw - half + 2.0 * half * i as f64 / steps as f64;
                let b = cb - half + 2.0 * half * j as f64 / steps as f64;
                let l = log_loss(xs, ts, w, b);
                if l < best.0 {
                    best = (l, w, b);
                }
            }
        }
        cw = best.1;
        cb = best.2;
        half *= 0.25;
    }
    (cw, cb)
}

/// Non-separable 1-feature data: (−1, 0) and (1, 1) replicated with noise and
/// a few flipped labels.
pub fn noisy_logreg_data(seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ts = Vec::new();
    for i in 0..40 {
        let t = (i % 2) as u8;
        let centre = if t == 1 { 0.5 } else { -0.5 };
        xs.push((centre + rng.random_range(-0.45..0.45_f64)).clamp(-1.0, 1.0));
        ts.push(if i % 7 == 0 { 1 - t } else { t });
    }
    (xs, ts)
}

// Pearson correlation of two curves on a midpoint grid of `n` points.
pub fn quadrature_pearson(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, n: usize) -> f64 {
    let ts = (0..n).map(|i| (i as f64 + 0.5) / n as f64);
    let (fs, gs): (Vec<f64>, Vec<f64>) = ts.map(|t| (f(t), g(t))).unzip();
    let mf = fs.iter().sum::<f64>() / n as f64;
    let mg = gs.iter().sum::<f64>() / n as f64;
    let (mut sfg, mut sff, mut sgg) = (0.0, 0.0, 0.0);
    for (a, b) in fs.iter().zip(&gs) {
        sfg += (a - mf) * (b - mg);
        sff += (a - mf).powi(2);
        sgg += (b - mg).powi(2);
    }
    sfg / (sff * sgg).sqrt()
}

/// Metric table keyed by the sorted subset, filled from a hash.
pub struct TableStub {
    pub salt: u64,
}

impl TableStub {
    pub fn metrics(&self, subset: &[usize]) -> Metrics {
        let mut key: Vec<usize> = subset.to_vec();
        key.sort_unstable();
        let mut h = self.salt ^ 0x9e37_79b9_7f4a_7c15;
        for v in key {
            h = (h ^ v as u64).wrapping_mul(0x100_0000_01b3);
            h ^= h >> 29;
        }
        // Coarse counts so that accuracy ties happen and FPR/FNR break them.
        let tp = (h % 6) as usize;
        let fp = ((h >> 8) % 6) as usize;
        let tn = 5 - fp.min(5);
        let fn_ = 5 - tp.min(5);
        Metrics::from_counts(tp.min(5), fp.min(5), tn, fn_)
    }
}

impl SubsetEvaluator for TableStub {
    fn evaluate(&self, subset: &[usize], _unit: u64) -> Result<Metrics, String> {
        Ok(self.metrics(subset))
    }
}

// Plain greedy search written against the stub table.
pub fn brute_force_greedy(stub: &TableStub, m: usize) -> Vec<usize> {
    let better = |a: &Metrics, b: &Metrics| {
        let key = |x: &Metrics| (x.accuracy, -x.fpr.unwrap_or(1.0), -x.fnr.unwrap_or(1.0));
        key(a) > key(b)
    };
    let mut chosen = Vec::new();
    while chosen.len() < m {
        let mut best: Option<(usize, Metrics)> = None;
        for v in 0..m {
            if chosen.contains(&v) {
                continue;
            }
            let mut s = chosen.clone();
            s.push(v);
            let score = stub.metrics(&s);
            if best.as_ref().is_none_or(|(_, b)| better(&score, b)) {
                best = Some((v, score));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen
}
