//! Initial-condition dependent network with a Fourier output layer, and the
//! plain Fourier coefficient model used by the direct baseline.
//!
//! A small sigmoid layer maps x₀ to a coefficient vector Θ(x₀) per target
//! function; trial solutions are finite trigonometric series on the basis
//! {sin(kπt/T), cos(kπt/T)} with constant terms corrected so the boundary
//! conditions hold for any coefficients. The state series is accumulated as
//! x₀ + Σ aₙ sin θₙ + bₙ (cos θₙ − 1), which is algebraically the published
//! constant-corrected series and keeps x̂(0) = x₀ exact in floating point;
//! the costate uses cos θₙ − (−1)ⁿ. Time derivatives are termwise.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::diff::{BlockSpec, Layout};
use crate::error::{Error, Result};
use crate::pmploss::{check_times, TrialBundle, TrialModel};
use crate::problems::{ProblemDef, ProblemId};
use crate::scalar::{zero_like, Scalar};

/// Which target function a coefficient vector parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourierTarget {
    State,
    Costate,
    Control,
}

/// One x₀ → coefficients sub-network: hidden weights `w` and biases `b1`
/// (length I), output weights `v` (K×I, row-major) and output biases `b2`
/// (length K). K = 2M+1 for the control target, 2N for state and costate
/// (their constants are forced by the boundary corrections).
#[derive(Debug, Clone, PartialEq)]
pub struct FourierLayerParams {
    pub w: Vec<f64>,
    pub b1: Vec<f64>,
    pub v: Vec<f64>,
    pub b2: Vec<f64>,
}

impl FourierLayerParams {
    pub fn hidden(&self) -> usize {
        self.w.len()
    }

    pub fn coeff_count(&self) -> usize {
        self.b2.len()
    }

    /// Θ(x₀) unpacked for `target`. `x0_input` is the value fed to the layer
    /// (already normalized where the problem calls for it).
    pub fn coeffs_of(&self, x0_input: f64, target: FourierTarget) -> FourierCoeffs<f64> {
        let theta = fourier_layer_coeffs(&self.w, &self.b1, &self.v, &self.b2, x0_input);
        unpack_coeffs(theta, target)
    }
}

/// Θ = v᷀σ(w·x₀ + b1) + b2, the flat coefficient vector of one target.
pub fn fourier_layer_coeffs<S: Scalar>(
    w: &[S],
    b1: &[S],
    v: &[S],
    b2: &[S],
    x0_input: f64,
) -> Vec<S> {
    let hidden = w.len();
    let k_count = b2.len();
    debug_assert_eq!(b1.len(), hidden);
    debug_assert_eq!(v.len(), k_count * hidden);
    let activations: Vec<S> = (0..hidden)
        .map(|i| (w[i] * x0_input + b1[i]).sigmoid())
        .collect();
    (0..k_count)
        .map(|k| {
            let row = &v[k * hidden..(k + 1) * hidden];
            let mut acc = row[0] * activations[0];
            for i in 1..hidden {
                acc = acc + row[i] * activations[i];
            }
            acc + b2[k]
        })
        .collect()
}

/// Finite Fourier coefficients for one target function.
#[derive(Debug, Clone)]
pub struct FourierCoeffs<S: Scalar> {
    pub target: FourierTarget,
    /// Constant term; present for the control target only.
    pub a0: Option<S>,
    pub a: Vec<S>,
    pub b: Vec<S>,
}

/// Splits a flat Θ vector into the coefficient shape of `target`:
/// control is [a₀, a₁..a_M, b₁..b_M], state/costate are [a₁..a_N, b₁..b_N].
pub fn unpack_coeffs<S: Scalar>(theta: Vec<S>, target: FourierTarget) -> FourierCoeffs<S> {
    match target {
        FourierTarget::Control => {
            let m = (theta.len() - 1) / 2;
            debug_assert_eq!(theta.len(), 2 * m + 1);
            FourierCoeffs {
                target,
                a0: Some(theta[0]),
                a: theta[1..=m].to_vec(),
                b: theta[m + 1..].to_vec(),
            }
        }
        FourierTarget::State | FourierTarget::Costate => {
            let n = theta.len() / 2;
            debug_assert_eq!(theta.len(), 2 * n);
            FourierCoeffs {
                target,
                a0: None,
                a: theta[..n].to_vec(),
                b: theta[n..].to_vec(),
            }
        }
    }
}

fn angle(order: usize, t: f64, horizon: f64) -> f64 {
    order as f64 * std::f64::consts::PI * t / horizon
}

/// Control series û(t) = a₀ + Σₘ aₘ sin θₘ + bₘ cos θₘ.
pub fn control_series<S: Scalar>(a0: S, a: &[S], b: &[S], t: f64, horizon: f64) -> S {
    let mut acc = a0;
    for m in 1..=a.len() {
        let th = angle(m, t, horizon);
        acc = acc + a[m - 1] * th.sin() + b[m - 1] * th.cos();
    }
    acc
}

/// State series and its time derivative. The constant-corrected form
/// x₀ + Σ aₙ sin θₙ + bₙ(cos θₙ − 1) makes x̂(0) = x₀ exact.
pub fn state_series<S: Scalar>(x0: f64, a: &[S], b: &[S], t: f64, horizon: f64) -> (S, S) {
    debug_assert_eq!(a.len(), b.len());
    let mut value: Option<S> = None;
    let mut dvalue: Option<S> = None;
    for n in 1..=a.len() {
        let th = angle(n, t, horizon);
        let (sin, cos) = (th.sin(), th.cos());
        let term = a[n - 1] * sin + b[n - 1] * (cos - 1.0);
        let dterm = (a[n - 1] * cos - b[n - 1] * sin) * (n as f64 * std::f64::consts::PI / horizon);
        value = Some(match value {
            Some(acc) => acc + term,
            None => term,
        });
        dvalue = Some(match dvalue {
            Some(acc) => acc + dterm,
            None => dterm,
        });
    }
    let value = value.expect("at least one Fourier term");
    (value + x0, dvalue.expect("at least one Fourier term"))
}

/// Costate series and its time derivative, anchored at λ̂(T) = λ_T via the
/// correction cos θₙ − (−1)ⁿ.
pub fn costate_series<S: Scalar>(
    lambda_terminal: f64,
    a: &[S],
    b: &[S],
    t: f64,
    horizon: f64,
) -> (S, S) {
    debug_assert_eq!(a.len(), b.len());
    let mut value: Option<S> = None;
    let mut dvalue: Option<S> = None;
    for n in 1..=a.len() {
        let th = angle(n, t, horizon);
        let (sin, cos) = (th.sin(), th.cos());
        let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = a[n - 1] * sin + b[n - 1] * (cos - parity);
        let dterm = (a[n - 1] * cos - b[n - 1] * sin) * (n as f64 * std::f64::consts::PI / horizon);
        value = Some(match value {
            Some(acc) => acc + term,
            None => term,
        });
        dvalue = Some(match dvalue {
            Some(acc) => acc + dterm,
            None => dterm,
        });
    }
    let value = value.expect("at least one Fourier term");
    (value + lambda_terminal, dvalue.expect("at least one Fourier term"))
}

/// Assembles the trial bundle from one coefficient set per target.
pub fn fourier_trial_eval(
    state: &FourierCoeffs<f64>,
    costate: &FourierCoeffs<f64>,
    control: &FourierCoeffs<f64>,
    p: &ProblemDef,
    t: f64,
    x0: f64,
) -> Result<TrialBundle<f64>> {
    check_times(p, std::slice::from_ref(&t))?;
    let horizon = p.horizon();
    for c in [state, costate, control] {
        if c.a.len() != c.b.len() || c.a.is_empty() {
            return Err(Error::Input(
                "coefficient vectors must be nonempty and of equal length".into(),
            ));
        }
    }
    let a0 = control
        .a0
        .ok_or_else(|| Error::Input("control coefficients need a constant term".into()))?;
    let (x_hat, x_hat_dot) = state_series(x0, &state.a, &state.b, t, horizon);
    let (lambda_hat, lambda_hat_dot) =
        costate_series(p.lambda_terminal(), &costate.a, &costate.b, t, horizon);
    let u_hat = control_series(a0, &control.a, &control.b, t, horizon);
    Ok(TrialBundle {
        x_hat,
        lambda_hat,
        u_hat,
        x_hat_dot,
        lambda_hat_dot,
    })
}

/// Initial-condition network with a Fourier output layer per target.
/// The costate series shares the state's term count N; the control uses M.
#[derive(Debug, Clone, PartialEq)]
pub struct Method2Model {
    pub problem_id: ProblemId,
    pub hidden: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub net_state: FourierLayerParams,
    pub net_costate: FourierLayerParams,
    pub net_control: FourierLayerParams,
}

impl Method2Model {
    /// Fresh model: w, b1, v uniform on [−1, 1]; b2 zero so the initial trial
    /// functions start near the boundary-satisfying constant profile.
    pub fn init(problem_id: ProblemId, m: usize, n: usize, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 || m == 0 || n == 0 {
            return Err(Error::Config(
                "hidden width and Fourier orders must be at least 1".into(),
            ));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let layer = |rng: &mut StdRng, k_count: usize| FourierLayerParams {
            w: (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            b1: (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            v: (0..k_count * hidden)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
            b2: vec![0.0; k_count],
        };
        Ok(Method2Model {
            problem_id,
            hidden,
            m,
            n,
            seed,
            net_state: layer(&mut rng, 2 * n),
            net_costate: layer(&mut rng, 2 * n),
            net_control: layer(&mut rng, 2 * m + 1),
        })
    }

    fn layer_len(&self, k_count: usize) -> usize {
        2 * self.hidden + k_count * self.hidden + k_count
    }
}

fn layer_blocks(prefix: &str, hidden: usize, k_count: usize) -> Vec<BlockSpec> {
    vec![
        BlockSpec::new(format!("{prefix}.w"), &[hidden]),
        BlockSpec::new(format!("{prefix}.b1"), &[hidden]),
        BlockSpec::new(format!("{prefix}.v"), &[k_count, hidden]),
        BlockSpec::new(format!("{prefix}.b2"), &[k_count]),
    ]
}

fn split_layer<S>(chunk: &[S], hidden: usize, k_count: usize) -> (&[S], &[S], &[S], &[S]) {
    let (w, rest) = chunk.split_at(hidden);
    let (b1, rest) = rest.split_at(hidden);
    let (v, b2) = rest.split_at(k_count * hidden);
    debug_assert_eq!(b2.len(), k_count);
    (w, b1, v, b2)
}

impl TrialModel for Method2Model {
    fn problem_id(&self) -> ProblemId {
        self.problem_id
    }

    fn layout(&self) -> Layout {
        let mut blocks = Vec::with_capacity(12);
        blocks.extend(layer_blocks("state", self.hidden, 2 * self.n));
        blocks.extend(layer_blocks("costate", self.hidden, 2 * self.n));
        blocks.extend(layer_blocks("control", self.hidden, 2 * self.m + 1));
        Layout::new(blocks)
    }

    fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for net in [&self.net_state, &self.net_costate, &self.net_control] {
            out.extend_from_slice(&net.w);
            out.extend_from_slice(&net.b1);
            out.extend_from_slice(&net.v);
            out.extend_from_slice(&net.b2);
        }
        out
    }

    fn with_values(&self, values: &[f64]) -> Result<Self> {
        let state_len = self.layer_len(2 * self.n);
        let control_len = self.layer_len(2 * self.m + 1);
        if values.len() != 2 * state_len + control_len {
            return Err(Error::Input(format!(
                "expected {} parameters, got {}",
                2 * state_len + control_len,
                values.len()
            )));
        }
        let hidden = self.hidden;
        let rebuild = |chunk: &[f64], k_count: usize| {
            let (w, b1, v, b2) = split_layer(chunk, hidden, k_count);
            FourierLayerParams {
                w: w.to_vec(),
                b1: b1.to_vec(),
                v: v.to_vec(),
                b2: b2.to_vec(),
            }
        };
        Ok(Method2Model {
            problem_id: self.problem_id,
            hidden,
            m: self.m,
            n: self.n,
            seed: self.seed,
            net_state: rebuild(&values[..state_len], 2 * self.n),
            net_costate: rebuild(&values[state_len..2 * state_len], 2 * self.n),
            net_control: rebuild(&values[2 * state_len..], 2 * self.m + 1),
        })
    }

    fn eval_slice<S: Scalar>(
        &self,
        phi: &[S],
        p: &ProblemDef,
        times: &[f64],
        x0: f64,
    ) -> Result<Vec<TrialBundle<S>>> {
        check_times(p, times)?;
        let state_len = self.layer_len(2 * self.n);
        let control_len = self.layer_len(2 * self.m + 1);
        debug_assert_eq!(phi.len(), 2 * state_len + control_len);
        let (_, scale_x0) = p.input_scale();
        let x0_in = x0 * scale_x0;
        let horizon = p.horizon();
        let lambda_t = p.lambda_terminal();

        // Coefficients depend on x₀ only: computed once per slice.
        let (w, b1, v, b2) = split_layer(&phi[..state_len], self.hidden, 2 * self.n);
        let state = unpack_coeffs(
            fourier_layer_coeffs(w, b1, v, b2, x0_in),
            FourierTarget::State,
        );
        let (w, b1, v, b2) = split_layer(&phi[state_len..2 * state_len], self.hidden, 2 * self.n);
        let costate = unpack_coeffs(
            fourier_layer_coeffs(w, b1, v, b2, x0_in),
            FourierTarget::Costate,
        );
        let (w, b1, v, b2) = split_layer(&phi[2 * state_len..], self.hidden, 2 * self.m + 1);
        let control = unpack_coeffs(
            fourier_layer_coeffs(w, b1, v, b2, x0_in),
            FourierTarget::Control,
        );
        let a0 = control.a0.expect("control coefficients carry a0");

        let mut bundles = Vec::with_capacity(times.len());
        for &t in times {
            let (x_hat, x_hat_dot) = state_series(x0, &state.a, &state.b, t, horizon);
            let (lambda_hat, lambda_hat_dot) =
                costate_series(lambda_t, &costate.a, &costate.b, t, horizon);
            let u_hat = control_series(a0, &control.a, &control.b, t, horizon);
            bundles.push(TrialBundle {
                x_hat,
                lambda_hat,
                u_hat,
                x_hat_dot,
                lambda_hat_dot,
            });
        }
        Ok(bundles)
    }
}

/// Direct-method model: the Fourier coefficients themselves are the decision
/// variables, shared across initial conditions (the state series still picks
/// up each x₀ through its corrected constant term). No network, no costate —
/// the costate entries of its bundles are identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectModel {
    pub problem_id: ProblemId,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// [a₁..a_N, b₁..b_N]
    pub state_coeffs: Vec<f64>,
    /// [a₀, a₁..a_M, b₁..b_M]
    pub control_coeffs: Vec<f64>,
}

impl DirectModel {
    /// All coefficients start at zero: the initial trial state is the
    /// constant x₀ profile and the initial control is zero.
    pub fn init(problem_id: ProblemId, m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Config("Fourier orders must be at least 1".into()));
        }
        Ok(DirectModel {
            problem_id,
            m,
            n,
            seed,
            state_coeffs: vec![0.0; 2 * n],
            control_coeffs: vec![0.0; 2 * m + 1],
        })
    }
}

impl TrialModel for DirectModel {
    fn problem_id(&self) -> ProblemId {
        self.problem_id
    }

    fn layout(&self) -> Layout {
        Layout::new(vec![
            BlockSpec::new("state.coeffs", &[2 * self.n]),
            BlockSpec::new("control.coeffs", &[2 * self.m + 1]),
        ])
    }

    fn values(&self) -> Vec<f64> {
        let mut out = self.state_coeffs.clone();
        out.extend_from_slice(&self.control_coeffs);
        out
    }

    fn with_values(&self, values: &[f64]) -> Result<Self> {
        let expect = 2 * self.n + 2 * self.m + 1;
        if values.len() != expect {
            return Err(Error::Input(format!(
                "expected {expect} parameters, got {}",
                values.len()
            )));
        }
        Ok(DirectModel {
            problem_id: self.problem_id,
            m: self.m,
            n: self.n,
            seed: self.seed,
            state_coeffs: values[..2 * self.n].to_vec(),
            control_coeffs: values[2 * self.n..].to_vec(),
        })
    }

    fn eval_slice<S: Scalar>(
        &self,
        phi: &[S],
        p: &ProblemDef,
        times: &[f64],
        x0: f64,
    ) -> Result<Vec<TrialBundle<S>>> {
        check_times(p, times)?;
        debug_assert_eq!(phi.len(), 2 * self.n + 2 * self.m + 1);
        let horizon = p.horizon();
        let state = unpack_coeffs(phi[..2 * self.n].to_vec(), FourierTarget::State);
        let control = unpack_coeffs(phi[2 * self.n..].to_vec(), FourierTarget::Control);
        let a0 = control.a0.expect("control coefficients carry a0");
        let zero = zero_like(phi[0]);

        let mut bundles = Vec::with_capacity(times.len());
        for &t in times {
            let (x_hat, x_hat_dot) = state_series(x0, &state.a, &state.b, t, horizon);
            let u_hat = control_series(a0, &control.a, &control.b, t, horizon);
            bundles.push(TrialBundle {
                x_hat,
                lambda_hat: zero,
                u_hat,
                x_hat_dot,
                lambda_hat_dot: zero,
            });
        }
        Ok(bundles)
    }
}
