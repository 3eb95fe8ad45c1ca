//! Time and initial-condition dependent network: three parallel
//! single-hidden-layer sigmoid sub-networks (state, costate, control) and
//! trial solutions that satisfy the boundary conditions by construction:
//!
//!   x̂(t, x₀) = x₀ + t·n_x,   λ̂(t, x₀) = λ_T + (t − T)·n_λ,   û = n_u.
//!
//! The λ_T offset generalizes the plain (t − T)·n_λ costate so that problems
//! with a Mayer term (nonzero transversality value) remain solvable; it
//! vanishes when the terminal cost is zero. Time derivatives of the trial
//! functions are closed forms of the sigmoid network, not numerical
//! approximations.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::diff::{BlockSpec, Layout};
use crate::error::{Error, Result};
use crate::pmploss::{check_times, TrialBundle, TrialModel};
use crate::problems::{ProblemDef, ProblemId};
use crate::scalar::Scalar;

/// Parameters of one single-hidden-layer sub-network with inputs (t, x₀):
/// hidden weights `w` (I×2, row-major, t column first), hidden biases `b`,
/// output weights `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubNetParams {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
}

impl SubNetParams {
    pub fn hidden(&self) -> usize {
        self.b.len()
    }

    /// Network output n(t, x₀) and its partial derivative ∂n/∂t.
    pub fn eval(&self, t: f64, x0: f64) -> (f64, f64) {
        subnet_eval(&self.w, &self.b, &self.v, t, x0)
    }
}

/// Evaluates v᷀σ(w·[t, x₀] + b) and (optionally) its t-derivative at every
/// time in `ts`, for a single x₀. The x₀ contribution to each pre-activation
/// is hoisted out of the time loop. Pushes one `(value, dvalue_dt)` pair per
/// time onto `out`; when `with_derivative` is false the derivative slot is a
/// zero of the scalar type.
pub fn subnet_eval_slice<S: Scalar>(
    w: &[S],
    b: &[S],
    v: &[S],
    ts: &[f64],
    x0: f64,
    with_derivative: bool,
    out: &mut Vec<(S, S)>,
) {
    let hidden = b.len();
    debug_assert_eq!(w.len(), 2 * hidden);
    debug_assert_eq!(v.len(), hidden);
    debug_assert!(hidden >= 1);

    // Per-unit constant part of the pre-activation: w_x0 · x₀ + b.
    let fixed: Vec<S> = (0..hidden).map(|i| w[2 * i + 1] * x0 + b[i]).collect();

    for &t in ts {
        let mut value: Option<S> = None;
        let mut dvalue: Option<S> = None;
        for i in 0..hidden {
            let z = w[2 * i] * t + fixed[i];
            let s = z.sigmoid();
            let term = v[i] * s;
            value = Some(match value {
                Some(a) => a + term,
                None => term,
            });
            if with_derivative {
                let dterm = (v[i] * s.sigmoid_prime()) * w[2 * i];
                dvalue = Some(match dvalue {
                    Some(a) => a + dterm,
                    None => dterm,
                });
            }
        }
        let value = value.expect("hidden width >= 1");
        let dvalue = dvalue.unwrap_or_else(|| crate::scalar::zero_like(value));
        out.push((value, dvalue));
    }
}

/// Single-point convenience over [`subnet_eval_slice`].
pub fn subnet_eval<S: Scalar>(w: &[S], b: &[S], v: &[S], t: f64, x0: f64) -> (S, S) {
    let mut out = Vec::with_capacity(1);
    subnet_eval_slice(w, b, v, std::slice::from_ref(&t), x0, true, &mut out);
    out[0]
}

/// The three parallel sub-networks sharing one hidden width.
#[derive(Debug, Clone, PartialEq)]
pub struct Method1Model {
    pub problem_id: ProblemId,
    pub hidden: usize,
    pub seed: u64,
    pub net_x: SubNetParams,
    pub net_lambda: SubNetParams,
    pub net_u: SubNetParams,
}

impl Method1Model {
    /// Fresh model with all weights and biases uniform on [−1, 1].
    pub fn init(problem_id: ProblemId, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let subnet = |rng: &mut StdRng| SubNetParams {
            w: (0..2 * hidden).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            b: (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            v: (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        Ok(Method1Model {
            problem_id,
            hidden,
            seed,
            net_x: subnet(&mut rng),
            net_lambda: subnet(&mut rng),
            net_u: subnet(&mut rng),
        })
    }

    fn subnet_len(&self) -> usize {
        4 * self.hidden
    }
}

fn subnet_blocks(prefix: &str, hidden: usize) -> Vec<BlockSpec> {
    vec![
        BlockSpec::new(format!("{prefix}.w"), &[hidden, 2]),
        BlockSpec::new(format!("{prefix}.b"), &[hidden]),
        BlockSpec::new(format!("{prefix}.v"), &[hidden]),
    ]
}

impl TrialModel for Method1Model {
    fn problem_id(&self) -> ProblemId {
        self.problem_id
    }

    fn layout(&self) -> Layout {
        let mut blocks = Vec::with_capacity(9);
        for prefix in ["x", "lambda", "u"] {
            blocks.extend(subnet_blocks(prefix, self.hidden));
        }
        Layout::new(blocks)
    }

    fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.subnet_len());
        for net in [&self.net_x, &self.net_lambda, &self.net_u] {
            out.extend_from_slice(&net.w);
            out.extend_from_slice(&net.b);
            out.extend_from_slice(&net.v);
        }
        out
    }

    fn with_values(&self, values: &[f64]) -> Result<Self> {
        let per = self.subnet_len();
        if values.len() != 3 * per {
            return Err(Error::Input(format!(
                "expected {} parameters, got {}",
                3 * per,
                values.len()
            )));
        }
        let hidden = self.hidden;
        let slice_net = |chunk: &[f64]| SubNetParams {
            w: chunk[..2 * hidden].to_vec(),
            b: chunk[2 * hidden..3 * hidden].to_vec(),
            v: chunk[3 * hidden..].to_vec(),
        };
        Ok(Method1Model {
            problem_id: self.problem_id,
            hidden,
            seed: self.seed,
            net_x: slice_net(&values[..per]),
            net_lambda: slice_net(&values[per..2 * per]),
            net_u: slice_net(&values[2 * per..]),
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
        let per = self.subnet_len();
        debug_assert_eq!(phi.len(), 3 * per);
        let horizon = p.horizon();
        let lambda_t = p.lambda_terminal();
        let (scale_t, scale_x0) = p.input_scale();
        let x0_in = x0 * scale_x0;
        let scaled_times: Vec<f64> = times.iter().map(|&t| t * scale_t).collect();

        let hidden = self.hidden;
        fn split<S>(chunk: &[S], hidden: usize) -> (&[S], &[S], &[S]) {
            (
                &chunk[..2 * hidden],
                &chunk[2 * hidden..3 * hidden],
                &chunk[3 * hidden..],
            )
        }
        let (wx, bx, vx) = split(&phi[..per], hidden);
        let (wl, bl, vl) = split(&phi[per..2 * per], hidden);
        let (wu, bu, vu) = split(&phi[2 * per..], hidden);

        let mut n_x = Vec::with_capacity(times.len());
        let mut n_l = Vec::with_capacity(times.len());
        let mut n_u = Vec::with_capacity(times.len());
        subnet_eval_slice(wx, bx, vx, &scaled_times, x0_in, true, &mut n_x);
        subnet_eval_slice(wl, bl, vl, &scaled_times, x0_in, true, &mut n_l);
        subnet_eval_slice(wu, bu, vu, &scaled_times, x0_in, false, &mut n_u);

        let mut bundles = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            let (nx, dnx_din) = n_x[i];
            let (nl, dnl_din) = n_l[i];
            let (nu, _) = n_u[i];
            // Chain rule through the input scaling: d/dt = scale_t · d/d(input).
            let dnx = dnx_din * scale_t;
            let dnl = dnl_din * scale_t;
            bundles.push(TrialBundle {
                x_hat: nx * t + x0,
                lambda_hat: nl * (t - horizon) + lambda_t,
                u_hat: nu,
                x_hat_dot: dnx * t + nx,
                lambda_hat_dot: dnl * (t - horizon) + nl,
            });
        }
        Ok(bundles)
    }
}
