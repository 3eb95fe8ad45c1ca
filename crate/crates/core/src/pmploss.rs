//! Pontryagin residuals of trial solutions, the summed squared residual loss
//! over a grid, and the direct (penalty) baseline loss.
//!
//! The residuals of the trial Hamiltonian Ĥ = f(x̂, û, t) + λ̂ g(x̂, û, t) are
//!
//!   E₁ = ∂Ĥ/∂x̂ + λ̂̇,  E₂ = ∂Ĥ/∂λ̂ − ẋ̂,  E₃ = ∂Ĥ/∂û,
//!
//! and the training objective is the plain (unweighted, unaveraged) sum of
//! E₁² + E₂² + E₃² over the Cartesian grid of times and initial conditions.
//! The direct baseline instead integrates the Bolza cost of the trial
//! trajectory and prices the dynamics in through a quadratic penalty,
//! ignoring the costate entirely.

use crate::diff::{DiffLoss, Layout, ParamVector, Tape, Var};
use crate::error::{Error, Result};
use crate::problems::{quadrature_cost, ProblemDef, ProblemId};
use crate::scalar::Scalar;

/// Trial state/costate/control and analytic time derivatives at one (t, x₀).
#[derive(Debug, Clone, Copy)]
pub struct TrialBundle<S: Scalar> {
    pub x_hat: S,
    pub lambda_hat: S,
    pub u_hat: S,
    pub x_hat_dot: S,
    pub lambda_hat_dot: S,
}

/// The three PMP residuals at one grid point.
#[derive(Debug, Clone, Copy)]
pub struct ResidualTriple<S: Scalar> {
    pub e1: S,
    pub e2: S,
    pub e3: S,
}

/// A parameterized family of trial solutions that satisfies the boundary
/// conditions x̂(0, x₀) = x₀ and λ̂(T, x₀) = λ_T for every parameter value.
///
/// Evaluation is generic over [`Scalar`]: the same code runs on plain floats
/// and on tape variables during training. Models are immutable during
/// evaluation; parameter updates produce a new model via
/// [`TrialModel::with_values`].
pub trait TrialModel: Sync + Sized {
    fn problem_id(&self) -> ProblemId;

    /// Named blocks describing the flat parameter order.
    fn layout(&self) -> Layout;

    /// Current parameters, flattened in layout order.
    fn values(&self) -> Vec<f64>;

    /// Same structure with replaced parameter values.
    fn with_values(&self, values: &[f64]) -> Result<Self>;

    /// Evaluates the trial bundle at every time in `times` for one initial
    /// condition, reading parameters from `phi` (layout order). Per-x₀ work
    /// (input scaling, Fourier coefficients) is hoisted out of the time loop.
    fn eval_slice<S: Scalar>(
        &self,
        phi: &[S],
        p: &ProblemDef,
        times: &[f64],
        x0: f64,
    ) -> Result<Vec<TrialBundle<S>>>;

    /// Trial bundle at a single point using the model's own parameters.
    fn trial_eval(&self, p: &ProblemDef, t: f64, x0: f64) -> Result<TrialBundle<f64>> {
        let phi = self.values();
        let mut bundles = self.eval_slice(&phi, p, std::slice::from_ref(&t), x0)?;
        Ok(bundles.pop().expect("one bundle per time"))
    }

    fn param_vector(&self) -> ParamVector {
        ParamVector::new(self.values(), self.layout()).expect("model layout matches its values")
    }
}

/// Checks that every requested time lies in [0, T].
pub fn check_times(p: &ProblemDef, times: &[f64]) -> Result<()> {
    for &t in times {
        if !(0.0..=p.horizon()).contains(&t) {
            return Err(Error::Domain(format!(
                "t = {t} outside [0, {}]",
                p.horizon()
            )));
        }
    }
    Ok(())
}

/// PMP residuals of a trial bundle at time `t`.
///
/// E₂ is assembled directly from the dynamics because ∂H/∂λ = g identically;
/// the two routes are the same expression, bit for bit.
pub fn residuals<S: Scalar>(p: &ProblemDef, tb: &TrialBundle<S>, t: f64) -> ResidualTriple<S> {
    let x = tb.x_hat;
    let u = tb.u_hat;
    let lam = tb.lambda_hat;
    let e1 = p.df_dx(x, u, t) + lam * p.dg_dx(x, u, t) + tb.lambda_hat_dot;
    let e2 = p.dynamics(x, u, t) - tb.x_hat_dot;
    let e3 = p.df_du(x, u, t) + lam * p.dg_du(x, u, t);
    ResidualTriple { e1, e2, e3 }
}

/// Squared-residual sum over one x₀ slice of the grid.
pub fn pmp_loss_slice<S: Scalar, M: TrialModel>(
    model: &M,
    phi: &[S],
    p: &ProblemDef,
    times: &[f64],
    x0: f64,
) -> Result<S> {
    let bundles = model.eval_slice(phi, p, times, x0)?;
    let mut acc: Option<S> = None;
    for (tb, &t) in bundles.iter().zip(times) {
        let r = residuals(p, tb, t);
        let e = r.e1.sq() + r.e2.sq() + r.e3.sq();
        acc = Some(match acc {
            Some(a) => a + e,
            None => e,
        });
    }
    acc.ok_or_else(|| Error::Input("empty time grid".into()))
}

/// Summed squared PMP residuals over an explicit list of (t, x₀) points.
/// No averaging: the objective is a plain sum.
pub fn pmp_loss<M: TrialModel>(model: &M, p: &ProblemDef, points: &[(f64, f64)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Input("empty grid".into()));
    }
    if model.problem_id() != p.id() {
        return Err(Error::Config(format!(
            "model built for {} evaluated on {}",
            model.problem_id(),
            p.id()
        )));
    }
    let phi = model.values();
    let mut total = 0.0;
    for &(t, x0) in points {
        let term = pmp_loss_slice::<f64, M>(model, &phi, p, std::slice::from_ref(&t), x0)?;
        if !term.is_finite() {
            return Err(Error::Numerical {
                context: format!("grid point (t = {t}, x0 = {x0})"),
            });
        }
        total += term;
    }
    Ok(total)
}

/// Direct-method loss for one x₀: trapezoidal quadrature of the running cost
/// plus terminal cost, plus μ · Σₜ (ẋ̂ − g)² Δt over the same time grid.
pub fn direct_loss_slice<S: Scalar, M: TrialModel>(
    model: &M,
    phi: &[S],
    p: &ProblemDef,
    times: &[f64],
    x0: f64,
    penalty_mu: f64,
) -> Result<(S, S)> {
    if times.len() < 2 {
        return Err(Error::Input("direct loss needs at least two time nodes".into()));
    }
    let bundles = model.eval_slice(phi, p, times, x0)?;
    let xs: Vec<S> = bundles.iter().map(|b| b.x_hat).collect();
    let us: Vec<S> = bundles.iter().map(|b| b.u_hat).collect();
    let cost = quadrature_cost(p, &xs, &us, times);

    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let mut defect: Option<S> = None;
    for (tb, &t) in bundles.iter().zip(times) {
        let r = (p.dynamics(tb.x_hat, tb.u_hat, t) - tb.x_hat_dot).sq();
        defect = Some(match defect {
            Some(a) => a + r,
            None => r,
        });
    }
    let penalty = defect.expect("nonempty grid") * (penalty_mu * dt);
    Ok((cost, penalty))
}

/// Direct-method loss summed over all initial conditions.
pub fn direct_loss<M: TrialModel>(
    model: &M,
    p: &ProblemDef,
    times: &[f64],
    x0s: &[f64],
    penalty_mu: f64,
) -> Result<f64> {
    let (cost, penalty) = direct_loss_breakdown(model, p, times, x0s, penalty_mu)?;
    Ok(cost + penalty)
}

/// Direct-method loss split into its (cost, penalty) terms.
pub fn direct_loss_breakdown<M: TrialModel>(
    model: &M,
    p: &ProblemDef,
    times: &[f64],
    x0s: &[f64],
    penalty_mu: f64,
) -> Result<(f64, f64)> {
    if penalty_mu <= 0.0 {
        return Err(Error::Config(format!(
            "penalty weight must be positive (got {penalty_mu})"
        )));
    }
    if x0s.is_empty() {
        return Err(Error::Input("empty grid".into()));
    }
    let phi = model.values();
    let mut cost = 0.0;
    let mut penalty = 0.0;
    for &x0 in x0s {
        let (c, q) = direct_loss_slice::<f64, M>(model, &phi, p, times, x0, penalty_mu)?;
        if !(c + q).is_finite() {
            return Err(Error::Numerical {
                context: format!("initial condition x0 = {x0}"),
            });
        }
        cost += c;
        penalty += q;
    }
    Ok((cost, penalty))
}

/// The PMP training objective over a Cartesian grid, one part per x₀.
pub struct PmpObjective<'a, M: TrialModel> {
    model: &'a M,
    problem: &'a ProblemDef,
    times: &'a [f64],
    x0s: &'a [f64],
}

impl<'a, M: TrialModel> PmpObjective<'a, M> {
    pub fn new(
        model: &'a M,
        problem: &'a ProblemDef,
        times: &'a [f64],
        x0s: &'a [f64],
    ) -> Result<Self> {
        check_times(problem, times)?;
        if times.is_empty() || x0s.is_empty() {
            return Err(Error::Input("empty grid".into()));
        }
        if model.problem_id() != problem.id() {
            return Err(Error::Config(format!(
                "model built for {} trained on {}",
                model.problem_id(),
                problem.id()
            )));
        }
        Ok(PmpObjective {
            model,
            problem,
            times,
            x0s,
        })
    }
}

impl<M: TrialModel> DiffLoss for PmpObjective<'_, M> {
    fn parts(&self) -> usize {
        self.x0s.len()
    }

    fn eval_part<'t>(&self, part: usize, _tape: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
        pmp_loss_slice(self.model, phi, self.problem, self.times, self.x0s[part])
            .expect("grid validated at construction")
    }

    fn eval_part_f64(&self, part: usize, values: &[f64]) -> f64 {
        pmp_loss_slice::<f64, M>(self.model, values, self.problem, self.times, self.x0s[part])
            .expect("grid validated at construction")
    }
}

/// The direct training objective over a Cartesian grid, one part per x₀.
pub struct DirectObjective<'a, M: TrialModel> {
    model: &'a M,
    problem: &'a ProblemDef,
    times: &'a [f64],
    x0s: &'a [f64],
    penalty_mu: f64,
}

impl<'a, M: TrialModel> DirectObjective<'a, M> {
    pub fn new(
        model: &'a M,
        problem: &'a ProblemDef,
        times: &'a [f64],
        x0s: &'a [f64],
        penalty_mu: f64,
    ) -> Result<Self> {
        check_times(problem, times)?;
        if times.len() < 2 || x0s.is_empty() {
            return Err(Error::Input("direct objective needs a dense grid".into()));
        }
        if penalty_mu <= 0.0 {
            return Err(Error::Config(format!(
                "penalty weight must be positive (got {penalty_mu})"
            )));
        }
        Ok(DirectObjective {
            model,
            problem,
            times,
            x0s,
            penalty_mu,
        })
    }
}

impl<M: TrialModel> DiffLoss for DirectObjective<'_, M> {
    fn parts(&self) -> usize {
        self.x0s.len()
    }

    fn eval_part<'t>(&self, part: usize, _tape: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
        let (cost, penalty) = direct_loss_slice(
            self.model,
            phi,
            self.problem,
            self.times,
            self.x0s[part],
            self.penalty_mu,
        )
        .expect("grid validated at construction");
        cost + penalty
    }

    fn eval_part_f64(&self, part: usize, values: &[f64]) -> f64 {
        let (cost, penalty) = direct_loss_slice::<f64, M>(
            self.model,
            values,
            self.problem,
            self.times,
            self.x0s[part],
            self.penalty_mu,
        )
        .expect("grid validated at construction");
        cost + penalty
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{BlockSpec, Layout};
    use crate::method2::DirectModel;
    use crate::oracle;
    use crate::problems::make_problem;

    /// Emits one fixed bundle at every grid point, lifted through a single
    /// unit parameter; used to hand-place residual values.
    struct ConstBundle {
        bundle: TrialBundle<f64>,
    }

    impl TrialModel for ConstBundle {
        fn problem_id(&self) -> ProblemId {
            ProblemId::Ocp1
        }
        fn layout(&self) -> Layout {
            Layout::new(vec![BlockSpec::new("one", &[1])])
        }
        fn values(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn with_values(&self, _: &[f64]) -> Result<Self> {
            Ok(ConstBundle {
                bundle: self.bundle,
            })
        }
        fn eval_slice<S: Scalar>(
            &self,
            phi: &[S],
            _p: &ProblemDef,
            times: &[f64],
            _x0: f64,
        ) -> Result<Vec<TrialBundle<S>>> {
            let one = phi[0];
            Ok(times
                .iter()
                .map(|_| TrialBundle {
                    x_hat: one * self.bundle.x_hat,
                    lambda_hat: one * self.bundle.lambda_hat,
                    u_hat: one * self.bundle.u_hat,
                    x_hat_dot: one * self.bundle.x_hat_dot,
                    lambda_hat_dot: one * self.bundle.lambda_hat_dot,
                })
                .collect())
        }
    }

    fn bundle(x: f64, lam: f64, u: f64, xd: f64, ld: f64) -> TrialBundle<f64> {
        TrialBundle {
            x_hat: x,
            lambda_hat: lam,
            u_hat: u,
            x_hat_dot: xd,
            lambda_hat_dot: ld,
        }
    }

    #[test]
    fn exact_lqr_solution_annihilates_the_residuals() {
        let p = make_problem(ProblemId::Ocp1);
        let cosh1 = 1.0f64.cosh();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let x = (1.0 - t).cosh() / cosh1;
            let u = -(1.0 - t).sinh() / cosh1;
            let lam = -2.0 * u;
            // ẋ = u, λ̇ = −2x along the optimum.
            let tb = bundle(x, lam, u, u, -2.0 * x);
            let r = residuals(&p, &tb, t);
            assert!(r.e1.abs() <= 1e-12, "e1 {}", r.e1);
            assert!(r.e2.abs() <= 1e-12, "e2 {}", r.e2);
            assert!(r.e3.abs() <= 1e-12, "e3 {}", r.e3);
            let per_point = r.e1 * r.e1 + r.e2 * r.e2 + r.e3 * r.e3;
            assert!(per_point <= 1e-20, "loss per point {per_point}");
        }
    }

    #[test]
    fn unit_state_bundle_residuals() {
        let p = make_problem(ProblemId::Ocp1);
        let r = residuals(&p, &bundle(1.0, 0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(r.e1, 2.0);
        assert_eq!(r.e2, 0.0);
        assert_eq!(r.e3, 0.0);
    }

    #[test]
    fn inventory_steady_state_satisfies_pmp_at_every_time() {
        let p = make_problem(ProblemId::Ocp3);
        for k in 0..=16 {
            let t = 8.0 * k as f64 / 16.0;
            let xd = p.dynamics(15.0, 30.0, t);
            let r = residuals(&p, &bundle(15.0, 0.0, 30.0, xd, 0.0), t);
            assert_eq!(r.e1, 0.0);
            assert_eq!(r.e2, 0.0);
            assert_eq!(r.e3, 0.0);
        }
    }

    #[test]
    fn hand_placed_residuals_sum_to_fourteen() {
        let p = make_problem(ProblemId::Ocp1);
        // e1 = 2x̂ + λ̂̇ = 1, e2 = û − ẋ̂ = 2, e3 = 2û + λ̂ = 3.
        let model = ConstBundle {
            bundle: bundle(0.5, -1.0, 2.0, 0.0, 0.0),
        };
        let loss = pmp_loss(&model, &p, &[(0.0, 0.5)]).unwrap();
        assert_eq!(loss, 14.0);
    }

    #[test]
    fn loss_is_invariant_under_grid_permutation() {
        let p = make_problem(ProblemId::Ocp1);
        let model = crate::method1::Method1Model::init(ProblemId::Ocp1, 3, 5).unwrap();
        let mut points = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                points.push((i as f64 / 4.0, j as f64 / 3.0));
            }
        }
        let forward = pmp_loss(&model, &p, &points).unwrap();
        points.reverse();
        points.swap(3, 11);
        let shuffled = pmp_loss(&model, &p, &points).unwrap();
        assert!((forward - shuffled).abs() <= 1e-12 * forward.abs().max(1.0));
    }

    #[test]
    fn loss_is_nonnegative_and_zero_only_without_residuals() {
        let p = make_problem(ProblemId::Ocp1);
        let model = crate::method1::Method1Model::init(ProblemId::Ocp1, 3, 9).unwrap();
        let points: Vec<(f64, f64)> = (0..12).map(|i| (i as f64 / 11.0, 0.5)).collect();
        let loss = pmp_loss(&model, &p, &points).unwrap();
        assert!(loss > 0.0);

        // The steady inventory bundle has zero residuals, hence zero loss.
        let p3 = make_problem(ProblemId::Ocp3);
        let steady = |t: f64| {
            let xd = p3.dynamics(15.0, 30.0, t);
            residuals(&p3, &bundle(15.0, 0.0, 30.0, xd, 0.0), t)
        };
        let total: f64 = (0..=10)
            .map(|k| {
                let r = steady(8.0 * k as f64 / 10.0);
                r.e1 * r.e1 + r.e2 * r.e2 + r.e3 * r.e3
            })
            .sum();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn e2_matches_the_dynamics_route_bitwise() {
        for id in [ProblemId::Ocp1, ProblemId::Ocp2, ProblemId::Ocp3] {
            let p = make_problem(id);
            let tb = bundle(0.7, -0.3, 0.9, 0.2, -0.1);
            for k in 0..5 {
                let t = p.horizon() * k as f64 / 4.0;
                let r = residuals(&p, &tb, t);
                let direct = p.dynamics(tb.x_hat, tb.u_hat, t) - tb.x_hat_dot;
                assert_eq!(r.e2.to_bits(), direct.to_bits());
                let via_h = p.hamiltonian(tb.x_hat, tb.u_hat, tb.lambda_hat, t).dh_dlambda
                    - tb.x_hat_dot;
                assert_eq!(r.e2.to_bits(), via_h.to_bits());
            }
        }
    }

    #[test]
    fn empty_grid_and_mismatched_problem_are_rejected() {
        let p = make_problem(ProblemId::Ocp1);
        let model = crate::method1::Method1Model::init(ProblemId::Ocp1, 2, 1).unwrap();
        assert!(matches!(
            pmp_loss(&model, &p, &[]),
            Err(Error::Input(_))
        ));
        let p2 = make_problem(ProblemId::Ocp2);
        assert!(matches!(
            pmp_loss(&model, &p2, &[(0.0, 0.5)]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn direct_running_cost_vanishes_at_the_targets() {
        let p = make_problem(ProblemId::Ocp3);
        let times: Vec<f64> = (0..=50).map(|i| 8.0 * i as f64 / 50.0).collect();
        let mut model = DirectModel::init(ProblemId::Ocp3, 4, 4, 0).unwrap();
        model.control_coeffs[0] = 30.0; // û ≡ 30; x̂ ≡ x₀ = 15
        let (cost, penalty) =
            direct_loss_breakdown(&model, &p, &times, &[15.0], 100.0).unwrap();
        assert_eq!(cost, 0.0);
        assert!(penalty > 0.0); // ẋ̂ = 0 while g = 30 − S(t) ≠ 0
    }

    #[test]
    fn direct_penalty_vanishes_when_dynamics_hold_exactly() {
        // For ẋ = u: pick x̂ = x₀ + sin(πt/T) and û = (π/T)cos(πt/T), its
        // exact derivative. Unit coefficients keep the two evaluation routes
        // bitwise identical (multiplication commutes exactly).
        let p = make_problem(ProblemId::Ocp1);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let mut model = DirectModel::init(ProblemId::Ocp1, 1, 1, 0).unwrap();
        let factor = std::f64::consts::PI / p.horizon();
        model.state_coeffs = vec![1.0, 0.0];
        model.control_coeffs = vec![0.0, 0.0, factor];
        let (_, penalty) = direct_loss_breakdown(&model, &p, &times, &[0.3], 7.0).unwrap();
        assert_eq!(penalty, 0.0);
    }

    #[test]
    fn direct_loss_requires_positive_penalty_weight() {
        let p = make_problem(ProblemId::Ocp3);
        let times: Vec<f64> = (0..=10).map(|i| 8.0 * i as f64 / 10.0).collect();
        let model = DirectModel::init(ProblemId::Ocp3, 2, 2, 0).unwrap();
        assert!(matches!(
            direct_loss(&model, &p, &times, &[1.0], 0.0),
            Err(Error::Config(_))
        ));
    }
}
