//! Control-error statistics against the oracle. MAPE guards against
//! near-zero reference values (the linear-quadratic benchmark's x₀ = 0 slice
//! has u* ≡ 0) and reports how many points the guard excluded.

use crate::error::{Error, Result};

/// Reference values with |u*| at or below this are excluded from MAPE.
pub const MAPE_GUARD: f64 = 1e-9;

/// Optimal costs with |J*| at or below this are excluded from the J error.
pub const J_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct ControlErrorStats {
    pub rmse: f64,
    pub mae: f64,
    /// Percent; NaN when the guard excluded every point.
    pub mape: f64,
    pub mape_excluded: usize,
}

/// RMSE / MAE / MAPE of `u_hat` against `u_star` over a flat grid.
pub fn control_error_stats(u_hat: &[f64], u_star: &[f64]) -> Result<ControlErrorStats> {
    if u_hat.len() != u_star.len() || u_hat.is_empty() {
        return Err(Error::Input(format!(
            "control arrays of lengths {} and {}",
            u_hat.len(),
            u_star.len()
        )));
    }
    let n = u_hat.len() as f64;
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    let mut sum_pct = 0.0;
    let mut included = 0usize;
    for (&a, &b) in u_hat.iter().zip(u_star) {
        let err = a - b;
        sum_sq += err * err;
        sum_abs += err.abs();
        if b.abs() > MAPE_GUARD {
            sum_pct += (err / b).abs();
            included += 1;
        }
    }
    let mape = if included > 0 {
        100.0 * sum_pct / included as f64
    } else {
        f64::NAN
    };
    Ok(ControlErrorStats {
        rmse: (sum_sq / n).sqrt(),
        mae: sum_abs / n,
        mape,
        mape_excluded: u_hat.len() - included,
    })
}
