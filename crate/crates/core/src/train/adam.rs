//! Full-batch Adam with a stepped exponential learning-rate decay, plus an
//! optional backtracking line-search polish. Both track the best parameters
//! seen and return those, not the last iterate.

use crate::diff::{grad_of, loss_value, DiffLoss, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamSchedule {
    pub lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub iters: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamSchedule {
    fn default() -> Self {
        AdamSchedule {
            lr: 1e-2,
            decay_factor: 0.5,
            decay_every: 2000,
            iters: 20_000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub best_values: Vec<f64>,
    pub best_loss: f64,
    /// Loss at the start of every iteration, Adam then polish.
    pub history: Vec<f64>,
}

/// Minimizes `loss` from `init` with Adam. Fails with the iteration index if
/// the loss turns non-finite; the best-so-far parameters are what callers get
/// back in the success path.
pub fn adam_minimize<L: DiffLoss + ?Sized>(
    loss: &L,
    init: ParamVector,
    schedule: &AdamSchedule,
) -> Result<MinimizeOutcome> {
    let n = init.len();
    let mut params = init;
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut history = Vec::with_capacity(schedule.iters);
    let mut best_values = params.values.clone();
    let mut best_loss = f64::INFINITY;

    for iter in 0..schedule.iters {
        let g = grad_of(loss, &params).map_err(|e| match e {
            Error::Numerical { .. } => Error::TrainingDiverged { iteration: iter },
            other => other,
        })?;
        if !g.loss.is_finite() {
            return Err(Error::TrainingDiverged { iteration: iter });
        }
        history.push(g.loss);
        if g.loss < best_loss {
            best_loss = g.loss;
            best_values.copy_from_slice(&params.values);
        }

        let lr = schedule.lr * schedule.decay_factor.powi((iter / schedule.decay_every) as i32);
        let t = (iter + 1) as i32;
        let bc1 = 1.0 - schedule.beta1.powi(t);
        let bc2 = 1.0 - schedule.beta2.powi(t);
        for i in 0..n {
            m[i] = schedule.beta1 * m[i] + (1.0 - schedule.beta1) * g.grad[i];
            v[i] = schedule.beta2 * v[i] + (1.0 - schedule.beta2) * g.grad[i] * g.grad[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params.values[i] -= lr * m_hat / (v_hat.sqrt() + schedule.epsilon);
        }
    }

    // The final iterate is a candidate too.
    let final_loss = loss_value(loss, &params.values);
    if final_loss.is_finite() && final_loss < best_loss {
        best_loss = final_loss;
        best_values.copy_from_slice(&params.values);
    }

    Ok(MinimizeOutcome {
        best_values,
        best_loss,
        history,
    })
}

/// L-BFGS polish with Armijo backtracking, started from the best Adam
/// iterate. Only improving steps are accepted, so the polish is monotone;
/// it stops early when even the steepest direction makes no progress.
pub fn line_search_polish<L: DiffLoss + ?Sized>(
    loss: &L,
    start: ParamVector,
    start_loss: f64,
    iters: usize,
) -> Result<MinimizeOutcome> {
    const MEMORY: usize = 10;
    let n = start.len();
    let mut params = start;
    let mut current = start_loss;
    let mut history = Vec::with_capacity(iters);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new(); // (s, y, 1/(y·s))

    let mut grad = grad_of(loss, &params)?.grad;
    for iter in 0..iters {
        let grad_norm_sq: f64 = grad.iter().map(|x| x * x).sum();
        if grad_norm_sq == 0.0 {
            break;
        }

        // Two-loop recursion for the quasi-Newton direction.
        let mut direction = grad.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let alpha = rho * dot(s, &direction);
            for i in 0..n {
                direction[i] -= alpha * y[i];
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = pairs.last() {
            let scale = dot(s, y) / dot(y, y);
            for d in &mut direction {
                *d *= scale;
            }
        }
        for ((s, y, rho), alpha) in pairs.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * dot(y, &direction);
            for i in 0..n {
                direction[i] += (alpha - beta) * s[i];
            }
        }
        // `direction` now approximates H·∇; the step moves against it.
        let mut slope = dot(&grad, &direction);
        if !(slope > 0.0) {
            // Not a descent direction: fall back on the gradient.
            direction.copy_from_slice(&grad);
            slope = grad_norm_sq;
            pairs.clear();
        }

        let mut eta = 1.0;
        let mut accepted = None;
        let mut trial = vec![0.0; n];
        for _ in 0..40 {
            for i in 0..n {
                trial[i] = params.values[i] - eta * direction[i];
            }
            let candidate = loss_value(loss, &trial);
            if candidate.is_finite() && candidate <= current - 1e-4 * eta * slope {
                accepted = Some(candidate);
                break;
            }
            eta *= 0.5;
        }
        let Some(candidate) = accepted else {
            break;
        };

        let new_grad = grad_of(
            loss,
            &ParamVector::new(trial.clone(), params.layout.clone())?,
        )
        .map_err(|e| match e {
            Error::Numerical { .. } => Error::TrainingDiverged { iteration: iter },
            other => other,
        })?
        .grad;

        let s: Vec<f64> = (0..n).map(|i| trial[i] - params.values[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| new_grad[i] - grad[i]).collect();
        let sy = dot(&s, &y);
        let guard = 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if sy > guard {
            if pairs.len() == MEMORY {
                pairs.remove(0);
            }
            pairs.push((s, y, 1.0 / sy));
        }

        params.values.copy_from_slice(&trial);
        grad = new_grad;
        current = candidate;
        history.push(current);
    }

    Ok(MinimizeOutcome {
        best_values: params.values,
        best_loss: current,
        history,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
