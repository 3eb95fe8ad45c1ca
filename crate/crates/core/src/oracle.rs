//! Reference optimal solutions for error measurement: a closed form for the
//! linear-quadratic benchmark and a shooting solver for the coupled
//! state–costate system of the other two.
//!
//! The shooting solver eliminates the control through the stationarity
//! condition ∂H/∂u = 0 (each benchmark has a unique closed-form root),
//! integrates ẋ = ∂H/∂λ, λ̇ = −∂H/∂x with RK4 on a fine grid, and iterates a
//! secant method on λ(0) until the transversality value λ(T) = λ_T is met.
//! The optimal cost rides along as an augmented quadrature state, so it
//! inherits the integrator's fourth-order accuracy.

use crate::error::{Error, Result};
use crate::problems::{quadrature_cost, ProblemDef, ProblemId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionSource {
    ClosedForm,
    Shooting,
}

/// Reference trajectories aligned with `times`, plus the optimal cost.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x0: f64,
    pub times: Vec<f64>,
    pub x_star: Vec<f64>,
    pub u_star: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub j_star: f64,
    pub source: SolutionSource,
}

/// Shooting solver knobs. `min_substeps` bounds the fine integration grid
/// from below (the solver also guarantees at least ten substeps per requested
/// interval); `max_iter` bounds the secant iteration.
#[derive(Debug, Clone, Copy)]
pub struct ShootConfig {
    pub min_substeps: usize,
    pub secant_tol: f64,
    pub max_iter: usize,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            min_substeps: 1000,
            secant_tol: 1e-10,
            max_iter: 100,
        }
    }
}

/// The control minimizing H at (x, λ, t), from the closed-form root of
/// ∂H/∂u = 0 for each benchmark.
pub fn stationary_control(p: &ProblemDef, x: f64, lambda: f64, t: f64) -> f64 {
    match p.id() {
        // 2u + λ = 0
        ProblemId::Ocp1 => -lambda / 2.0,
        // (5/2)λ(x − 2u) = 0 on the λ ≠ 0 branch
        ProblemId::Ocp2 => x / 2.0,
        // e^{ρt} c (u − ū) + λ = 0
        ProblemId::Ocp3 => {
            p.control_target() - lambda * (-p.discount_rate() * t).exp() / p.control_cost_weight()
        }
    }
}

fn validate_times(p: &ProblemDef, times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::Input("need at least two time nodes".into()));
    }
    if times[0] != 0.0 || *times.last().unwrap() != p.horizon() {
        return Err(Error::Input(format!(
            "times must span [0, {}]",
            p.horizon()
        )));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Input("times must be strictly increasing".into()));
        }
    }
    Ok(())
}

/// Uniform time grid of `n + 1` nodes on [0, T].
pub fn uniform_times(p: &ProblemDef, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| (i as f64 / n as f64) * p.horizon())
        .collect()
}

/// Closed-form solution of the linear-quadratic benchmark:
/// x* = x₀ cosh(T−t)/cosh T, u* = −x₀ sinh(T−t)/cosh T, λ* = −2u*,
/// J* = x₀² tanh T.
pub fn lqr_closed_form(p: &ProblemDef, x0: f64, times: &[f64]) -> Result<ReferenceSolution> {
    if p.id() != ProblemId::Ocp1 {
        return Err(Error::Config(format!(
            "closed form applies to ocp1, not {}",
            p.id()
        )));
    }
    validate_times(p, times)?;
    let horizon = p.horizon();
    let cosh_t = horizon.cosh();
    let mut x_star = Vec::with_capacity(times.len());
    let mut u_star = Vec::with_capacity(times.len());
    let mut lambda_star = Vec::with_capacity(times.len());
    for &t in times {
        let x = x0 * ((horizon - t).cosh() / cosh_t);
        let u = -x0 * ((horizon - t).sinh() / cosh_t);
        x_star.push(x);
        u_star.push(u);
        lambda_star.push(-2.0 * u);
    }
    Ok(ReferenceSolution {
        x0,
        times: times.to_vec(),
        x_star,
        u_star,
        lambda_star,
        j_star: x0 * x0 * horizon.tanh(),
        source: SolutionSource::ClosedForm,
    })
}

/// RHS of the augmented PMP system y = [x, λ, J] with u eliminated.
fn pmp_rhs(p: &ProblemDef, t: f64, y: [f64; 3]) -> [f64; 3] {
    let [x, lambda, _] = y;
    let u = stationary_control(p, x, lambda, t);
    let h = p.hamiltonian(x, u, lambda, t);
    [h.dh_dlambda, -h.dh_dx, p.running_cost(x, u, t)]
}

fn rk4_step(p: &ProblemDef, t: f64, h: f64, y: [f64; 3]) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = pmp_rhs(p, t, y);
    let k2 = pmp_rhs(p, t + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = pmp_rhs(p, t + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = pmp_rhs(p, t + h, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

/// Integrates the PMP system from (x₀, λ₀), sampling at `times`. Returns the
/// sampled states/costates and the final augmented state.
fn integrate(
    p: &ProblemDef,
    x0: f64,
    lambda0: f64,
    times: &[f64],
    cfg: &ShootConfig,
    store: bool,
) -> (Vec<[f64; 2]>, [f64; 3]) {
    let h_target = p.horizon() / cfg.min_substeps.max(10 * (times.len() - 1)) as f64;
    let mut y = [x0, lambda0, 0.0];
    let mut samples = Vec::with_capacity(if store { times.len() } else { 0 });
    if store {
        samples.push([y[0], y[1]]);
    }
    for seg in times.windows(2) {
        let span = seg[1] - seg[0];
        let steps = (span / h_target).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let mut t = seg[0];
        for _ in 0..steps {
            y = rk4_step(p, t, h, y);
            t += h;
        }
        if store {
            samples.push([y[0], y[1]]);
        }
    }
    (samples, y)
}

/// Shooting solution of the two-point boundary value problem with secant
/// iteration on the unknown initial costate. `tol` bounds |λ(T) − λ_T|.
pub fn shoot_tpbvp(p: &ProblemDef, x0: f64, times: &[f64], tol: f64) -> Result<ReferenceSolution> {
    shoot_tpbvp_with(
        p,
        x0,
        times,
        ShootConfig {
            secant_tol: tol,
            ..ShootConfig::default()
        },
    )
}

pub fn shoot_tpbvp_with(
    p: &ProblemDef,
    x0: f64,
    times: &[f64],
    cfg: ShootConfig,
) -> Result<ReferenceSolution> {
    validate_times(p, times)?;
    let lambda_t = p.lambda_terminal();
    let residual = |lambda0: f64| integrate(p, x0, lambda0, times, &cfg, false).1[1] - lambda_t;

    // Initial guesses ±10 scaled by the problem magnitude.
    let scale = x0.abs().max(lambda_t.abs()).max(1.0);
    let mut a = -10.0 * scale;
    let mut b = 10.0 * scale;
    let mut ra = residual(a);
    let mut rb = residual(b);
    let mut root = None;
    for _ in 0..cfg.max_iter {
        if rb.abs() <= cfg.secant_tol {
            root = Some(b);
            break;
        }
        if rb == ra {
            return Err(Error::Oracle {
                detail: "secant stalled (flat residual)".into(),
                residual: rb,
            });
        }
        let next = b - rb * (b - a) / (rb - ra);
        if !next.is_finite() {
            return Err(Error::Oracle {
                detail: "secant produced a non-finite iterate".into(),
                residual: rb,
            });
        }
        a = b;
        ra = rb;
        b = next;
        rb = residual(b);
    }
    let lambda0 = root.ok_or(Error::Oracle {
        detail: format!("secant did not converge in {} iterations", cfg.max_iter),
        residual: rb,
    })?;

    let (samples, y_final) = integrate(p, x0, lambda0, times, &cfg, true);
    let x_star: Vec<f64> = samples.iter().map(|s| s[0]).collect();
    let lambda_star: Vec<f64> = samples.iter().map(|s| s[1]).collect();
    let u_star: Vec<f64> = samples
        .iter()
        .zip(times)
        .map(|(s, &t)| stationary_control(p, s[0], s[1], t))
        .collect();
    let j_star = y_final[2] + p.terminal_cost(*x_star.last().unwrap());
    Ok(ReferenceSolution {
        x0,
        times: times.to_vec(),
        x_star,
        u_star,
        lambda_star,
        j_star,
        source: SolutionSource::Shooting,
    })
}

/// Reference solution for any benchmark: closed form where available,
/// shooting otherwise.
pub fn reference(p: &ProblemDef, x0: f64, times: &[f64]) -> Result<ReferenceSolution> {
    match p.id() {
        ProblemId::Ocp1 => lqr_closed_form(p, x0, times),
        _ => shoot_tpbvp_with(p, x0, times, ShootConfig::default()),
    }
}

/// Bolza cost of discrete trajectories: trapezoidal quadrature of the running
/// cost plus the terminal cost.
pub fn cost_of(p: &ProblemDef, x_traj: &[f64], u_traj: &[f64], times: &[f64]) -> Result<f64> {
    if x_traj.len() != times.len() || u_traj.len() != times.len() {
        return Err(Error::Input(format!(
            "trajectory lengths ({}, {}) do not match {} time nodes",
            x_traj.len(),
            u_traj.len(),
            times.len()
        )));
    }
    validate_times(p, times)?;
    Ok(quadrature_cost(p, x_traj, u_traj, times))
}

/// Sup-norm of the PMP residuals along a stored solution, with trajectory
/// derivatives estimated by fourth-order central differences on the interior
/// of a uniform grid. Independent of the integrator's own right-hand sides.
pub fn pmp_residual_sup(p: &ProblemDef, sol: &ReferenceSolution) -> Result<f64> {
    let times = &sol.times;
    if times.len() < 5 {
        return Err(Error::Input("need at least five nodes for the check".into()));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs() {
            return Err(Error::Input("residual check needs a uniform grid".into()));
        }
    }
    let d4 = |f: &[f64], i: usize| {
        (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * dt)
    };
    let mut sup: f64 = 0.0;
    for i in 2..times.len() - 2 {
        let (x, u, lam, t) = (sol.x_star[i], sol.u_star[i], sol.lambda_star[i], times[i]);
        let h = p.hamiltonian(x, u, lam, t);
        let r1 = h.dh_dx + d4(&sol.lambda_star, i);
        let r2 = h.dh_dlambda - d4(&sol.x_star, i);
        let r3 = h.dh_du;
        sup = sup.max(r1.abs()).max(r2.abs()).max(r3.abs());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_problem;

    #[test]
    fn closed_form_at_zero_initial_condition() {
        let p = make_problem(ProblemId::Ocp1);
        let times = uniform_times(&p, 50);
        let sol = lqr_closed_form(&p, 0.0, &times).unwrap();
        assert!(sol.x_star.iter().all(|&x| x == 0.0));
        assert!(sol.u_star.iter().all(|&u| u == 0.0));
        assert_eq!(sol.j_star, 0.0);
    }

    #[test]
    fn closed_form_known_values_at_unit_initial_condition() {
        let p = make_problem(ProblemId::Ocp1);
        let times = uniform_times(&p, 10);
        let sol = lqr_closed_form(&p, 1.0, &times).unwrap();
        assert!((sol.u_star[0] + 1.0f64.tanh()).abs() <= 1e-15);
        assert!((sol.j_star - 1.0f64.tanh()).abs() <= 1e-15);
        let last = times.len() - 1;
        assert_eq!(sol.u_star[last], 0.0); // sinh(0) = 0
        assert!((sol.x_star[last] - 1.0 / 1.0f64.cosh()).abs() <= 1e-15);
    }

    #[test]
    fn closed_form_rejects_other_problems() {
        let p = make_problem(ProblemId::Ocp2);
        let times = uniform_times(&p, 10);
        assert!(matches!(
            lqr_closed_form(&p, 1.0, &times),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn shooting_matches_closed_form_on_lqr() {
        let p = make_problem(ProblemId::Ocp1);
        let times = uniform_times(&p, 100);
        for x0 in [0.0, 0.5, 1.0] {
            let shot = shoot_tpbvp(&p, x0, &times, 1e-12).unwrap();
            let exact = lqr_closed_form(&p, x0, &times).unwrap();
            let mut sup: f64 = 0.0;
            for i in 0..times.len() {
                sup = sup
                    .max((shot.x_star[i] - exact.x_star[i]).abs())
                    .max((shot.u_star[i] - exact.u_star[i]).abs())
                    .max((shot.lambda_star[i] - exact.lambda_star[i]).abs());
            }
            assert!(sup <= 1e-8, "x0 {x0}: sup {sup}");
            assert!((shot.j_star - exact.j_star).abs() <= 1e-8);
        }
    }

    #[test]
    fn ocp2_control_is_half_the_state_by_stationarity() {
        let p = make_problem(ProblemId::Ocp2);
        let times = uniform_times(&p, 100);
        let sol = shoot_tpbvp(&p, 1.0, &times, 1e-10).unwrap();
        assert_eq!(sol.u_star[0], 0.5);
        for i in 0..times.len() {
            assert_eq!(sol.u_star[i], sol.x_star[i] / 2.0);
        }
        // The degenerate λ ≡ 0 branch is excluded by the terminal condition.
        assert!((sol.lambda_star.last().unwrap() - p.lambda_terminal()).abs() <= 1e-10);
        assert!(sol.lambda_star[0] != 0.0);
    }

    #[test]
    fn shooting_solutions_satisfy_pmp_pointwise() {
        for id in [ProblemId::Ocp2, ProblemId::Ocp3] {
            let p = make_problem(id);
            let times = uniform_times(&p, 2000);
            let x0 = if id == ProblemId::Ocp3 { 15.0 } else { 1.0 };
            let sol = shoot_tpbvp(&p, x0, &times, 1e-10).unwrap();
            let sup = pmp_residual_sup(&p, &sol).unwrap();
            assert!(sup <= 1e-6, "{id:?}: residual sup {sup}");
        }
    }

    #[test]
    fn cost_of_examples() {
        let p3 = make_problem(ProblemId::Ocp3);
        let times = uniform_times(&p3, 100);
        let xs = vec![15.0; times.len()];
        let us = vec![30.0; times.len()];
        assert_eq!(cost_of(&p3, &xs, &us, &times).unwrap(), 0.0);

        let p1 = make_problem(ProblemId::Ocp1);
        let times = uniform_times(&p1, 100);
        let xs = vec![1.0; times.len()];
        let us = vec![0.0; times.len()];
        assert_eq!(cost_of(&p1, &xs, &us, &times).unwrap(), 1.0);

        let dense = uniform_times(&p1, 1000);
        let sol = lqr_closed_form(&p1, 1.0, &dense).unwrap();
        let j = cost_of(&p1, &sol.x_star, &sol.u_star, &dense).unwrap();
        assert!((j - 1.0f64.tanh()).abs() <= 1e-6, "j = {j}");
    }

    #[test]
    fn cost_of_rejects_misaligned_lengths() {
        let p = make_problem(ProblemId::Ocp1);
        let times = uniform_times(&p, 10);
        let xs = vec![0.0; times.len()];
        let us = vec![0.0; times.len() - 1];
        assert!(matches!(
            cost_of(&p, &xs, &us, &times),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn lqr_cost_scales_quadratically_in_x0() {
        let p = make_problem(ProblemId::Ocp1);
        let times = uniform_times(&p, 20);
        let base = lqr_closed_form(&p, 0.3, &times).unwrap().j_star;
        for alpha in [2.0, 3.5, -1.0] {
            let scaled = lqr_closed_form(&p, alpha * 0.3, &times).unwrap().j_star;
            assert!((scaled - alpha * alpha * base).abs() <= 1e-12 * scaled.abs().max(1.0));
        }
    }

    #[test]
    fn trapezoid_error_shrinks_fourth_fold_with_halved_steps() {
        let p = make_problem(ProblemId::Ocp1);
        let exact = 1.0f64.tanh();
        let err_at = |n: usize| {
            let times = uniform_times(&p, n);
            let sol = lqr_closed_form(&p, 1.0, &times).unwrap();
            (cost_of(&p, &sol.x_star, &sol.u_star, &times).unwrap() - exact).abs()
        };
        let ratio = err_at(100) / err_at(200);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn secant_iteration_budget_is_enforced() {
        let p = make_problem(ProblemId::Ocp2);
        let times = uniform_times(&p, 50);
        let err = shoot_tpbvp_with(
            &p,
            0.5,
            &times,
            ShootConfig {
                max_iter: 0,
                ..ShootConfig::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Oracle { .. }));
    }

    #[test]
    fn reference_dispatches_by_problem() {
        let p1 = make_problem(ProblemId::Ocp1);
        let times = uniform_times(&p1, 20);
        assert_eq!(
            reference(&p1, 1.0, &times).unwrap().source,
            SolutionSource::ClosedForm
        );
        let p2 = make_problem(ProblemId::Ocp2);
        let times = uniform_times(&p2, 20);
        assert_eq!(
            reference(&p2, 1.0, &times).unwrap().source,
            SolutionSource::Shooting
        );
    }
}
