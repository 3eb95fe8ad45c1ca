//! The Bolza optimal control problem abstraction and the three scalar
//! benchmark problems.
//!
//! A problem minimizes ∫₀ᵀ f(x, u, t) dt + Ψ(x(T)) subject to ẋ = g(x, u, t),
//! x(0) = x₀, over a finite family of initial conditions. The Hamiltonian is
//! H = f + λ·g. All first partial derivatives are hand-coded closed forms; a
//! finite-difference self-check in the tests guards against transcription
//! errors.

use crate::error::{Error, Result};
use crate::scalar::{zero_like, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    /// min ∫₀¹ x² + u² dt, ẋ = u.
    Ocp1,
    /// min −x(2), ẋ = (5/2)(−x + ux − u²).
    Ocp2,
    /// Inventory control: min ∫₀⁸ e^{ρt}[(h/2)(x−x̄)² + (c/2)(u−ū)²] dt,
    /// ẋ = u − S(t).
    Ocp3,
}

impl ProblemId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Ocp1 => "ocp1",
            ProblemId::Ocp2 => "ocp2",
            ProblemId::Ocp3 => "ocp3",
        }
    }

    pub fn index(self) -> u32 {
        match self {
            ProblemId::Ocp1 => 1,
            ProblemId::Ocp2 => 2,
            ProblemId::Ocp3 => 3,
        }
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ocp1" | "1" => Ok(ProblemId::Ocp1),
            "ocp2" | "2" => Ok(ProblemId::Ocp2),
            "ocp3" | "3" => Ok(ProblemId::Ocp3),
            other => Err(Error::Config(format!("unknown problem id `{other}`"))),
        }
    }
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hamiltonian value and first partials at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianEval {
    pub value: f64,
    pub dh_dx: f64,
    pub dh_du: f64,
    /// Equals the dynamics g(x, u, t) exactly, by construction.
    pub dh_dlambda: f64,
}

/// One benchmark problem: cost, dynamics, terminal cost, horizon, partials,
/// transversality value and the training set of initial conditions.
/// Immutable after construction; free to share across threads.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    id: ProblemId,
    horizon: f64,
    lambda_terminal: f64,
    x0_train: Vec<f64>,
    // Inventory-control parameters; unused by the first two problems.
    rho: f64,
    holding: f64,
    production: f64,
    x_target: f64,
    u_target: f64,
}

/// Builds one of the three benchmark problems with its published domain.
pub fn make_problem(id: ProblemId) -> ProblemDef {
    match id {
        ProblemId::Ocp1 => ProblemDef {
            id,
            horizon: 1.0,
            lambda_terminal: 0.0,
            x0_train: (0..=20).map(|i| i as f64 / 20.0).collect(),
            rho: 0.0,
            holding: 0.0,
            production: 0.0,
            x_target: 0.0,
            u_target: 0.0,
        },
        ProblemId::Ocp2 => ProblemDef {
            id,
            horizon: 2.0,
            // Transversality for the Mayer term: λ(T) = ∂(−x)/∂x = −1.
            lambda_terminal: -1.0,
            x0_train: (0..=20).map(|i| i as f64 / 20.0).collect(),
            rho: 0.0,
            holding: 0.0,
            production: 0.0,
            x_target: 0.0,
            u_target: 0.0,
        },
        ProblemId::Ocp3 => ocp3_with_discount(0.0),
    }
}

/// The inventory-control problem with an explicit discount rate ρ (the
/// benchmark uses ρ = 0).
pub fn ocp3_with_discount(rho: f64) -> ProblemDef {
    ProblemDef {
        id: ProblemId::Ocp3,
        horizon: 8.0,
        lambda_terminal: 0.0,
        x0_train: (0..=40).map(|i| i as f64).collect(),
        rho,
        holding: 1.0,
        production: 1.0,
        x_target: 15.0,
        u_target: 30.0,
    }
}

/// Demand rate S(t) = t³ − 12t² + 32t + 30 for the inventory problem.
fn demand(t: f64) -> f64 {
    ((t - 12.0) * t + 32.0) * t + 30.0
}

impl ProblemDef {
    pub fn id(&self) -> ProblemId {
        self.id
    }

    /// Final time T of the control interval [0, T].
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Terminal costate value λ(T) = ∂Ψ/∂x, constant because Ψ is affine.
    pub fn lambda_terminal(&self) -> f64 {
        self.lambda_terminal
    }

    /// Training initial conditions X₀, strictly increasing.
    pub fn x0_train(&self) -> &[f64] {
        &self.x0_train
    }

    /// Convex hull [min X₀, max X₀] of the initial conditions.
    pub fn x0_hull(&self) -> (f64, f64) {
        (self.x0_train[0], *self.x0_train.last().unwrap())
    }

    /// Whether g depends on t explicitly (true only for the inventory problem).
    pub fn dynamics_time_dependent(&self) -> bool {
        self.id == ProblemId::Ocp3
    }

    pub fn discount_rate(&self) -> f64 {
        self.rho
    }

    pub fn control_target(&self) -> f64 {
        self.u_target
    }

    pub fn control_cost_weight(&self) -> f64 {
        self.production
    }

    /// Input normalization (t-scale, x₀-scale) applied before network inputs.
    /// The inventory problem's raw domains (t up to 8, x₀ up to 40) saturate
    /// unscaled sigmoids; the first two problems are fed raw.
    pub fn input_scale(&self) -> (f64, f64) {
        match self.id {
            ProblemId::Ocp1 | ProblemId::Ocp2 => (1.0, 1.0),
            ProblemId::Ocp3 => (1.0 / self.horizon, 1.0 / 40.0),
        }
    }

    /// Running cost f(x, u, t).
    pub fn running_cost<S: Scalar>(&self, x: S, u: S, t: f64) -> S {
        match self.id {
            ProblemId::Ocp1 => x.sq() + u.sq(),
            ProblemId::Ocp2 => zero_like(x),
            ProblemId::Ocp3 => {
                let discount = (self.rho * t).exp();
                ((x - self.x_target).sq() * (0.5 * self.holding)
                    + (u - self.u_target).sq() * (0.5 * self.production))
                    * discount
            }
        }
    }

    /// Dynamics g(x, u, t).
    pub fn dynamics<S: Scalar>(&self, x: S, u: S, t: f64) -> S {
        match self.id {
            ProblemId::Ocp1 => u,
            ProblemId::Ocp2 => (u * x - x - u.sq()) * 2.5,
            ProblemId::Ocp3 => u - demand(t),
        }
    }

    /// Terminal cost Ψ(x_T); identically zero for the Lagrange problems.
    pub fn terminal_cost<S: Scalar>(&self, x_t: S) -> S {
        match self.id {
            ProblemId::Ocp1 | ProblemId::Ocp3 => zero_like(x_t),
            ProblemId::Ocp2 => -x_t,
        }
    }

    pub fn df_dx<S: Scalar>(&self, x: S, u: S, t: f64) -> S {
        match self.id {
            ProblemId::Ocp1 => x * 2.0,
            ProblemId::Ocp2 => zero_like(x),
            ProblemId::Ocp3 => {
                let _ = u;
                (x - self.x_target) * (self.holding * (self.rho * t).exp())
            }
        }
    }

    pub fn df_du<S: Scalar>(&self, x: S, u: S, t: f64) -> S {
        match self.id {
            ProblemId::Ocp1 => u * 2.0,
            ProblemId::Ocp2 => zero_like(x),
            ProblemId::Ocp3 => (u - self.u_target) * (self.production * (self.rho * t).exp()),
        }
    }

    pub fn dg_dx<S: Scalar>(&self, x: S, u: S, _t: f64) -> S {
        match self.id {
            ProblemId::Ocp1 => zero_like(x),
            ProblemId::Ocp2 => (u - 1.0) * 2.5,
            ProblemId::Ocp3 => zero_like(x),
        }
    }

    pub fn dg_du<S: Scalar>(&self, x: S, u: S, _t: f64) -> S {
        match self.id {
            ProblemId::Ocp1 => zero_like(u) + 1.0,
            ProblemId::Ocp2 => (x - u * 2.0) * 2.5,
            ProblemId::Ocp3 => zero_like(u) + 1.0,
        }
    }

    pub fn dpsi_dx<S: Scalar>(&self, x_t: S) -> S {
        match self.id {
            ProblemId::Ocp1 | ProblemId::Ocp3 => zero_like(x_t),
            ProblemId::Ocp2 => zero_like(x_t) - 1.0,
        }
    }

    /// Evaluates H = f + λ·g and its first partials at one point.
    pub fn hamiltonian(&self, x: f64, u: f64, lambda: f64, t: f64) -> HamiltonianEval {
        let g = self.dynamics(x, u, t);
        HamiltonianEval {
            value: self.running_cost(x, u, t) + lambda * g,
            dh_dx: self.df_dx(x, u, t) + lambda * self.dg_dx(x, u, t),
            dh_du: self.df_du(x, u, t) + lambda * self.dg_du(x, u, t),
            dh_dlambda: g,
        }
    }
}

/// Bolza cost of a discrete trajectory: trapezoidal quadrature of the running
/// cost plus the terminal cost. Generic so the direct method can differentiate
/// through it.
pub fn quadrature_cost<S: Scalar>(p: &ProblemDef, xs: &[S], us: &[S], times: &[f64]) -> S {
    debug_assert_eq!(xs.len(), us.len());
    debug_assert_eq!(xs.len(), times.len());
    let mut f_prev = p.running_cost(xs[0], us[0], times[0]);
    let mut acc = zero_like(xs[0]);
    for i in 1..times.len() {
        let f_here = p.running_cost(xs[i], us[i], times[i]);
        acc = acc + (f_prev + f_here) * (0.5 * (times[i] - times[i - 1]));
        f_prev = f_here;
    }
    acc + p.terminal_cost(xs[xs.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central<F: Fn(f64) -> f64>(f: F, at: f64) -> f64 {
        let h = 1e-6 * at.abs().max(1.0);
        (f(at + h) - f(at - h)) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    fn sample_points(p: &ProblemDef) -> Vec<(f64, f64, f64, f64)> {
        // A deterministic spread of (x, u, λ, t) covering each problem's scale.
        let scale = if p.id() == ProblemId::Ocp3 { 30.0 } else { 1.0 };
        let mut pts = Vec::new();
        for i in 0..5 {
            let x = scale * (0.13 + 0.21 * i as f64) - 0.4;
            let u = scale * (0.71 - 0.17 * i as f64);
            let lam = scale * (0.04 * i as f64 - 0.09);
            let t = p.horizon() * (i as f64 / 4.0);
            pts.push((x, u, lam, t));
        }
        pts
    }

    #[test]
    fn published_domains() {
        let p1 = make_problem(ProblemId::Ocp1);
        assert_eq!(p1.horizon(), 1.0);
        assert_eq!(p1.x0_train().len(), 21);
        assert_eq!(p1.x0_hull(), (0.0, 1.0));

        let p2 = make_problem(ProblemId::Ocp2);
        assert_eq!(p2.horizon(), 2.0);
        assert_eq!(p2.x0_train().len(), 21);
        assert_eq!(p2.lambda_terminal(), -1.0);

        let p3 = make_problem(ProblemId::Ocp3);
        assert_eq!(p3.horizon(), 8.0);
        assert_eq!(p3.x0_train().len(), 41);
        assert_eq!(p3.x0_hull(), (0.0, 40.0));
        assert_eq!(p3.dynamics(0.0, 0.0, 0.0), -30.0);
    }

    #[test]
    fn x0_train_is_strictly_increasing_and_inside_hull() {
        for id in [ProblemId::Ocp1, ProblemId::Ocp2, ProblemId::Ocp3] {
            let p = make_problem(id);
            let (lo, hi) = p.x0_hull();
            for w in p.x0_train().windows(2) {
                assert!(w[0] < w[1]);
            }
            for &x0 in p.x0_train() {
                assert!(x0 >= lo && x0 <= hi);
            }
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let p1 = make_problem(ProblemId::Ocp1);
        let h = p1.hamiltonian(1.0, 0.0, 0.0, 0.0);
        assert_eq!(h.value, 1.0);
        assert_eq!(h.dh_dx, 2.0);
        assert_eq!(h.dh_du, 0.0);

        let p2 = make_problem(ProblemId::Ocp2);
        let h = p2.hamiltonian(1.0, 0.5, -1.0, 0.0);
        assert_eq!(h.dh_du, 0.0);

        let p3 = make_problem(ProblemId::Ocp3);
        let h = p3.hamiltonian(15.0, 30.0, 0.0, 0.0);
        assert_eq!(h.value, 0.0);
        assert_eq!(h.dh_dx, 0.0);
        assert_eq!(h.dh_du, 0.0);
    }

    #[test]
    fn ocp2_stationarity_matches_finite_difference() {
        let p = make_problem(ProblemId::Ocp2);
        let (x, lam, t) = (1.0, -1.0, 0.0);
        let fd = central(|u| p.hamiltonian(x, u, lam, t).value, 0.5);
        assert!(fd.abs() <= 1e-6, "fd = {fd}");
    }

    #[test]
    fn analytic_partials_agree_with_central_differences() {
        for id in [ProblemId::Ocp1, ProblemId::Ocp2, ProblemId::Ocp3] {
            let p = make_problem(id);
            for &(x, u, lam, t) in &sample_points(&p) {
                let cases: Vec<(f64, f64)> = vec![
                    (p.df_dx(x, u, t), central(|v| p.running_cost(v, u, t), x)),
                    (p.df_du(x, u, t), central(|v| p.running_cost(x, v, t), u)),
                    (p.dg_dx(x, u, t), central(|v| p.dynamics(v, u, t), x)),
                    (p.dg_du(x, u, t), central(|v| p.dynamics(x, v, t), u)),
                    (p.dpsi_dx(x), central(|v| p.terminal_cost(v), x)),
                    (
                        p.hamiltonian(x, u, lam, t).dh_dx,
                        central(|v| p.hamiltonian(v, u, lam, t).value, x),
                    ),
                    (
                        p.hamiltonian(x, u, lam, t).dh_du,
                        central(|v| p.hamiltonian(x, v, lam, t).value, u),
                    ),
                ];
                for (analytic, fd) in cases {
                    assert!(
                        rel_err(analytic, fd) <= 1e-6,
                        "{id:?} at ({x},{u},{lam},{t}): {analytic} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn dh_dlambda_is_dynamics_bitwise() {
        for id in [ProblemId::Ocp1, ProblemId::Ocp2, ProblemId::Ocp3] {
            let p = make_problem(id);
            for &(x, u, lam, t) in &sample_points(&p) {
                let h = p.hamiltonian(x, u, lam, t);
                assert_eq!(h.dh_dlambda.to_bits(), p.dynamics(x, u, t).to_bits());
            }
        }
    }

    #[test]
    fn lagrange_and_mayer_structure() {
        let p1 = make_problem(ProblemId::Ocp1);
        let p2 = make_problem(ProblemId::Ocp2);
        let p3 = make_problem(ProblemId::Ocp3);
        for i in 0..20 {
            let x = -3.0 + 0.4 * i as f64;
            assert_eq!(p1.terminal_cost(x), 0.0);
            assert_eq!(p3.terminal_cost(x), 0.0);
            assert_eq!(p2.running_cost(x, 0.5 * x, 0.3), 0.0);
            // λ_T equals ∂Ψ/∂x everywhere for affine Ψ.
            assert_eq!(p1.dpsi_dx(x), p1.lambda_terminal());
            assert_eq!(p2.dpsi_dx(x), p2.lambda_terminal());
            assert_eq!(p3.dpsi_dx(x), p3.lambda_terminal());
        }
    }

    #[test]
    fn discounted_variant_keeps_rho() {
        let p = ocp3_with_discount(0.1);
        assert_eq!(p.discount_rate(), 0.1);
        // f carries the e^{ρt} factor.
        let f0 = p.running_cost(16.0, 30.0, 0.0);
        let f1 = p.running_cost(16.0, 30.0, 1.0);
        assert!((f1 / f0 - 0.1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn unknown_problem_string_is_config_error() {
        let err = "ocp9".parse::<ProblemId>().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn quadrature_cost_of_constant_integrand() {
        let p = make_problem(ProblemId::Ocp1);
        let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let xs = vec![1.0; times.len()];
        let us = vec![0.0; times.len()];
        // f = x² + u² = 1 on [0, 1]: the trapezoid rule is exact.
        assert_eq!(quadrature_cost(&p, &xs, &us, &times), 1.0);
    }
}
