//! Scaled conjugate gradient (Møller, 1993): a conjugate-gradient minimizer
//! that replaces the line search with a Levenberg–Marquardt style scaling of a
//! finite-difference Hessian-vector product.

/// A differentiable objective.
pub trait Objective {
    fn dim(&self) -> usize;
    /// Return the loss at `w` and write its gradient into `grad`.
    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgOptions {
    pub max_iterations: usize,
    /// Step used for the Hessian-vector product, divided by `‖p‖`.
    pub sigma: f64,
    /// Initial scale parameter.
    pub lambda: f64,
    /// Stop when the gradient norm falls below this.
    pub gradient_tolerance: f64,
}

impl Default for ScgOptions {
    fn default() -> Self {
        Self { max_iterations: 1000, sigma: 5e-5, lambda: 5e-7, gradient_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    SmallGradient,
    Callback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgOutcome {
    pub iterations: usize,
    pub loss: f64,
    pub reason: StopReason,
}

/// Loss or gradient became non-finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diverged {
    pub iteration: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Minimize `objective` starting from `w`, updating it in place.
///
/// `on_iteration(k, w, loss)` runs after every iteration `k = 1, 2, …`
/// (successful or not) and may stop the run.
pub fn minimize<O, F>(objective: &O, w: &mut [f64], opts: &ScgOptions, mut on_iteration: F) -> Result<ScgOutcome, Diverged>
where
    O: Objective + ?Sized,
    F: FnMut(usize, &[f64], f64) -> Control,
{
    let n = objective.dim();
    assert_eq!(w.len(), n, "parameter vector has wrong length");

    let mut grad = vec![0.0; n];
    let mut loss = objective.value_and_gradient(w, &mut grad);
    if !loss.is_finite() || !finite(&grad) {
        return Err(Diverged { iteration: 0 });
    }
    let mut r: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut p = r.clone();
    let mut lambda = opts.lambda;
    let mut lambda_bar = 0.0;
    let mut success = true;
    let mut delta = 0.0;
    let mut since_restart = 0usize;

    let mut probe = vec![0.0; n];
    let mut probe_grad = vec![0.0; n];
    let mut s = vec![0.0; n];

    if dot(&r, &r).sqrt() < opts.gradient_tolerance {
        return Ok(ScgOutcome { iterations: 0, loss, reason: StopReason::SmallGradient });
    }

    for k in 1..=opts.max_iterations {
        let p_sq = dot(&p, &p);
        if success {
            let sigma_k = opts.sigma / p_sq.sqrt();
            for i in 0..n {
                probe[i] = w[i] + sigma_k * p[i];
            }
            objective.value_and_gradient(&probe, &mut probe_grad);
            for i in 0..n {
                s[i] = (probe_grad[i] - grad[i]) / sigma_k;
            }
            delta = dot(&p, &s);
        }

        // Scale so the curvature estimate is positive.
        delta += (lambda - lambda_bar) * p_sq;
        if delta <= 0.0 {
            lambda_bar = 2.0 * (lambda - delta / p_sq);
            delta = -delta + lambda * p_sq;
            lambda = lambda_bar;
        }

        let mu = dot(&p, &r);
        let alpha = mu / delta;
        for i in 0..n {
            probe[i] = w[i] + alpha * p[i];
        }
        let new_loss = objective.value_and_gradient(&probe, &mut probe_grad);
        let comparison = 2.0 * delta * (loss - new_loss) / (mu * mu);

        if comparison >= 0.0 && new_loss.is_finite() {
            if !finite(&probe_grad) {
                return Err(Diverged { iteration: k });
            }
            w.copy_from_slice(&probe);
            grad.copy_from_slice(&probe_grad);
            loss = new_loss;
            let r_new: Vec<f64> = grad.iter().map(|g| -g).collect();
            lambda_bar = 0.0;
            success = true;
            since_restart += 1;
            if since_restart >= n {
                p.copy_from_slice(&r_new);
                since_restart = 0;
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &r)) / mu;
                for i in 0..n {
                    p[i] = r_new[i] + beta * p[i];
                }
            }
            r = r_new;
            if comparison >= 0.75 {
                lambda = (lambda / 4.0).max(1e-300);
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }

        if comparison < 0.25 {
            lambda = (lambda + delta * (1.0 - comparison) / p_sq).min(1e300);
        }

        if !loss.is_finite() || !lambda.is_finite() {
            return Err(Diverged { iteration: k });
        }

        if on_iteration(k, w, loss) == Control::Stop {
            return Ok(ScgOutcome { iterations: k, loss, reason: StopReason::Callback });
        }
        if dot(&r, &r).sqrt() < opts.gradient_tolerance {
            return Ok(ScgOutcome { iterations: k, loss, reason: StopReason::SmallGradient });
        }
    }
    Ok(ScgOutcome { iterations: opts.max_iterations, loss, reason: StopReason::MaxIterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        scales: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.scales.len()
        }
        fn value_and_gradient(&self, w: &[f64], g: &mut [f64]) -> f64 {
            let mut v = 0.0;
            for i in 0..w.len() {
                let d = w[i] - 1.0;
                v += 0.5 * self.scales[i] * d * d;
                g[i] = self.scales[i] * d;
            }
            v
        }
    }

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn value_and_gradient(&self, w: &[f64], g: &mut [f64]) -> f64 {
            let (x, y) = (w[0], w[1]);
            g[0] = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
            g[1] = 200.0 * (y - x * x);
            (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
        }
    }

    #[test]
    fn minimizes_ill_conditioned_quadratic() {
        let q = Quadratic { scales: vec![1.0, 10.0, 100.0, 1000.0] };
        let mut w = vec![0.0; 4];
        let out = minimize(&q, &mut w, &ScgOptions::default(), |_, _, _| Control::Continue).unwrap();
        assert!(out.loss < 1e-10, "{out:?}");
        assert!(w.iter().all(|x| (x - 1.0).abs() < 1e-5));
    }

    #[test]
    fn minimizes_rosenbrock() {
        let mut w = vec![-1.2, 1.0];
        let opts = ScgOptions { max_iterations: 5000, gradient_tolerance: 1e-8, ..Default::default() };
        minimize(&Rosenbrock, &mut w, &opts, |_, _, _| Control::Continue).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-4 && (w[1] - 1.0).abs() < 1e-4, "{w:?}");
    }

    #[test]
    fn loss_never_increases() {
        let mut w = vec![-1.2, 1.0];
        let mut last = f64::INFINITY;
        let opts = ScgOptions { max_iterations: 200, ..Default::default() };
        minimize(&Rosenbrock, &mut w, &opts, |_, _, loss| {
            assert!(loss <= last);
            last = loss;
            Control::Continue
        })
        .unwrap();
    }

    #[test]
    fn callback_can_stop() {
        let q = Quadratic { scales: vec![1.0, 50.0] };
        let mut w = vec![0.0; 2];
        let out = minimize(&q, &mut w, &ScgOptions::default(), |k, _, _| if k == 1 { Control::Stop } else { Control::Continue }).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.reason, StopReason::Callback);
    }
}
