//! Training/testing grids, loss minimization, the error-metric suite, and
//! the experiment registry.

pub mod adam;
pub mod metrics;
pub mod registry;

use std::time::Instant;

use crate::diff::{Layout, ParamVector};
use crate::error::{Error, Result};
use crate::method1::Method1Model;
use crate::method2::{DirectModel, Method2Model};
use crate::oracle;
use crate::pmploss::{DirectObjective, PmpObjective, TrialBundle, TrialModel};
use crate::problems::{make_problem, ProblemDef, ProblemId};
use crate::scalar::Scalar;

pub use adam::{AdamSchedule, MinimizeOutcome};
pub use metrics::{control_error_stats, ControlErrorStats, J_GUARD, MAPE_GUARD};
pub use registry::{all_experiments, experiment, paper_metrics, PaperMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Training,
    Testing,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::Training => "training",
            GridKind::Testing => "testing",
        }
    }
}

/// A Cartesian evaluation grid: times × initial conditions.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub times: Vec<f64>,
    pub x0s: Vec<f64>,
    pub kind: GridKind,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.times.len() * self.x0s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All (t, x₀) points, x₀-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &x0 in &self.x0s {
            for &t in &self.times {
                out.push((t, x0));
            }
        }
        out
    }
}

/// Builds the training grid (uniform times × published X₀) and the testing
/// grid (same times × midpoints of consecutive X₀ values, disjoint from X₀).
pub fn make_grids(p: &ProblemDef, n_time: usize) -> (GridSpec, GridSpec) {
    assert!(n_time >= 2, "need at least two time intervals");
    let times = oracle::uniform_times(p, n_time);
    let train_x0 = p.x0_train().to_vec();
    let test_x0: Vec<f64> = train_x0
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    (
        GridSpec {
            times: times.clone(),
            x0s: train_x0,
            kind: GridKind::Training,
        },
        GridSpec {
            times,
            x0s: test_x0,
            kind: GridKind::Testing,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Method1,
    Method2,
    Direct,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Method1 => "method1",
            Method::Method2 => "method2",
            Method::Direct => "direct",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "method1" => Ok(Method::Method1),
            "method2" | "fourier-layer" => Ok(Method::Method2),
            "direct" => Ok(Method::Direct),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optimizer and grid settings for one training run.
#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    pub lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub iters: usize,
    pub polish_iters: usize,
    pub penalty_mu: f64,
    /// Number of uniform time intervals; the grid has `n_time + 1` nodes.
    pub n_time: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            lr: 1e-2,
            decay_factor: 0.5,
            decay_every: 2000,
            iters: 20_000,
            polish_iters: 200,
            penalty_mu: 100.0,
            n_time: 100,
        }
    }
}

impl OptimizerSettings {
    fn schedule(&self) -> AdamSchedule {
        AdamSchedule {
            lr: self.lr,
            decay_factor: self.decay_factor,
            decay_every: self.decay_every,
            iters: self.iters,
            ..AdamSchedule::default()
        }
    }
}

/// One experiment: method, problem, architecture and training settings.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub exp_id: u32,
    pub method: Method,
    pub problem_id: ProblemId,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub hidden: Option<usize>,
    pub seed: u64,
    pub opt: OptimizerSettings,
}

impl ExperimentSpec {
    /// Field presence must match the method: Fourier orders only where a
    /// Fourier series exists, a hidden width only where a network exists.
    pub fn validate(&self) -> Result<()> {
        let want = |cond: bool, msg: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::Config(format!("experiment {}: {msg}", self.exp_id)))
            }
        };
        match self.method {
            Method::Method1 => {
                want(self.m.is_none() && self.n.is_none(), "method1 takes no M/N")?;
                want(self.hidden.is_some(), "method1 needs a hidden width I")
            }
            Method::Method2 => {
                want(self.m.is_some() && self.n.is_some(), "method2 needs M and N")?;
                want(self.hidden.is_some(), "method2 needs a hidden width I")
            }
            Method::Direct => {
                want(self.m.is_some() && self.n.is_some(), "direct needs M and N")?;
                want(self.hidden.is_none(), "direct takes no hidden width")
            }
        }
    }
}

/// Error metrics of one model on one grid.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub rmse_u: f64,
    pub mae_u: f64,
    pub mape_u: f64,
    /// Mean over x₀ of 100·|J(x̂, û) − J*| / |J*|, guarded as documented.
    pub j_pct_error: f64,
    pub final_loss: f64,
    pub grid_kind: GridKind,
    pub mape_excluded: usize,
    pub j_excluded: usize,
}

/// Any of the three trainable model families, unified for storage and
/// evaluation.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Method1(Method1Model),
    Method2(Method2Model),
    Direct(DirectModel),
}

impl AnyModel {
    pub fn method(&self) -> Method {
        match self {
            AnyModel::Method1(_) => Method::Method1,
            AnyModel::Method2(_) => Method::Method2,
            AnyModel::Direct(_) => Method::Direct,
        }
    }
}

impl TrialModel for AnyModel {
    fn problem_id(&self) -> ProblemId {
        match self {
            AnyModel::Method1(m) => m.problem_id,
            AnyModel::Method2(m) => m.problem_id,
            AnyModel::Direct(m) => m.problem_id,
        }
    }

    fn layout(&self) -> Layout {
        match self {
            AnyModel::Method1(m) => m.layout(),
            AnyModel::Method2(m) => m.layout(),
            AnyModel::Direct(m) => m.layout(),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            AnyModel::Method1(m) => m.values(),
            AnyModel::Method2(m) => m.values(),
            AnyModel::Direct(m) => m.values(),
        }
    }

    fn with_values(&self, values: &[f64]) -> Result<Self> {
        Ok(match self {
            AnyModel::Method1(m) => AnyModel::Method1(m.with_values(values)?),
            AnyModel::Method2(m) => AnyModel::Method2(m.with_values(values)?),
            AnyModel::Direct(m) => AnyModel::Direct(m.with_values(values)?),
        })
    }

    fn eval_slice<S: Scalar>(
        &self,
        phi: &[S],
        p: &ProblemDef,
        times: &[f64],
        x0: f64,
    ) -> Result<Vec<TrialBundle<S>>> {
        match self {
            AnyModel::Method1(m) => m.eval_slice(phi, p, times, x0),
            AnyModel::Method2(m) => m.eval_slice(phi, p, times, x0),
            AnyModel::Direct(m) => m.eval_slice(phi, p, times, x0),
        }
    }
}

/// A trained model with its loss history.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: AnyModel,
    pub best_loss: f64,
    pub history: Vec<f64>,
}

/// Builds the initial model for a spec.
pub fn init_model(spec: &ExperimentSpec) -> Result<AnyModel> {
    spec.validate()?;
    Ok(match spec.method {
        Method::Method1 => AnyModel::Method1(Method1Model::init(
            spec.problem_id,
            spec.hidden.unwrap(),
            spec.seed,
        )?),
        Method::Method2 => AnyModel::Method2(Method2Model::init(
            spec.problem_id,
            spec.m.unwrap(),
            spec.n.unwrap(),
            spec.hidden.unwrap(),
            spec.seed,
        )?),
        Method::Direct => AnyModel::Direct(DirectModel::init(
            spec.problem_id,
            spec.m.unwrap(),
            spec.n.unwrap(),
            spec.seed,
        )?),
    })
}

/// Minimizes the spec's training objective over the training grid. Returns
/// the parameters achieving the lowest recorded loss plus the loss history
/// (Adam iterates, then line-search polish iterates).
pub fn fit(spec: &ExperimentSpec) -> Result<FitResult> {
    let p = make_problem(spec.problem_id);
    let (train_grid, _) = make_grids(&p, spec.opt.n_time);
    let model = init_model(spec)?;
    fit_on_grid(spec, &p, &train_grid, model)
}

fn fit_on_grid(
    spec: &ExperimentSpec,
    p: &ProblemDef,
    grid: &GridSpec,
    model: AnyModel,
) -> Result<FitResult> {
    let init = model.param_vector();
    let schedule = spec.opt.schedule();

    let outcome = match spec.method {
        Method::Method1 | Method::Method2 => {
            let objective = PmpObjective::new(&model, p, &grid.times, &grid.x0s)?;
            let mut out = adam::adam_minimize(&objective, init, &schedule)?;
            if spec.opt.polish_iters > 0 {
                let start = ParamVector::new(out.best_values.clone(), model.layout())?;
                let polish = adam::line_search_polish(
                    &objective,
                    start,
                    out.best_loss,
                    spec.opt.polish_iters,
                )?;
                out.history.extend_from_slice(&polish.history);
                if polish.best_loss < out.best_loss {
                    out.best_loss = polish.best_loss;
                    out.best_values = polish.best_values;
                }
            }
            out
        }
        Method::Direct => {
            let objective =
                DirectObjective::new(&model, p, &grid.times, &grid.x0s, spec.opt.penalty_mu)?;
            let mut out = adam::adam_minimize(&objective, init, &schedule)?;
            if spec.opt.polish_iters > 0 {
                let start = ParamVector::new(out.best_values.clone(), model.layout())?;
                let polish = adam::line_search_polish(
                    &objective,
                    start,
                    out.best_loss,
                    spec.opt.polish_iters,
                )?;
                out.history.extend_from_slice(&polish.history);
                if polish.best_loss < out.best_loss {
                    out.best_loss = polish.best_loss;
                    out.best_values = polish.best_values;
                }
            }
            out
        }
    };

    Ok(FitResult {
        model: model.with_values(&outcome.best_values)?,
        best_loss: outcome.best_loss,
        history: outcome.history,
    })
}

/// Evaluates a model against the oracle over a grid. `final_loss` is carried
/// into the report (training loss at termination, or a recomputed loss when
/// evaluating a stored model).
pub fn evaluate<M: TrialModel>(
    model: &M,
    p: &ProblemDef,
    grid: &GridSpec,
    final_loss: f64,
) -> Result<MetricsReport> {
    let phi = model.values();
    let mut u_hat_all = Vec::with_capacity(grid.len());
    let mut u_star_all = Vec::with_capacity(grid.len());
    let mut j_pct_sum = 0.0;
    let mut j_included = 0usize;
    let mut j_excluded = 0usize;

    for &x0 in &grid.x0s {
        let sol = oracle::reference(p, x0, &grid.times)?;
        let bundles = model.eval_slice(&phi, p, &grid.times, x0)?;
        let xs: Vec<f64> = bundles.iter().map(|b| b.x_hat).collect();
        let us: Vec<f64> = bundles.iter().map(|b| b.u_hat).collect();
        u_hat_all.extend_from_slice(&us);
        u_star_all.extend_from_slice(&sol.u_star);

        if sol.j_star.abs() > J_GUARD {
            let j_hat = oracle::cost_of(p, &xs, &us, &grid.times)?;
            j_pct_sum += 100.0 * (j_hat - sol.j_star).abs() / sol.j_star.abs();
            j_included += 1;
        } else {
            j_excluded += 1;
        }
    }

    let stats = control_error_stats(&u_hat_all, &u_star_all)?;
    let j_pct_error = if j_included > 0 {
        j_pct_sum / j_included as f64
    } else {
        f64::NAN
    };
    Ok(MetricsReport {
        rmse_u: stats.rmse,
        mae_u: stats.mae,
        mape_u: stats.mape,
        j_pct_error,
        final_loss,
        grid_kind: grid.kind,
        mape_excluded: stats.mape_excluded,
        j_excluded,
    })
}

/// A finished experiment: spec echo, both metric reports, and timing.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub exp_id: u32,
    pub method: Method,
    pub problem_id: ProblemId,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub hidden: Option<usize>,
    pub seed: u64,
    pub train: MetricsReport,
    pub test: MetricsReport,
    pub final_loss: f64,
    pub wall_time_s: f64,
    pub model: AnyModel,
}

/// Runs a registry experiment end to end.
pub fn run_experiment(exp_id: u32) -> Result<ExperimentResult> {
    run_experiment_with(&registry::experiment(exp_id)?)
}

/// Runs an arbitrary experiment spec end to end: fit on the training grid,
/// evaluate on both grids.
pub fn run_experiment_with(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let started = Instant::now();
    let p = make_problem(spec.problem_id);
    let (train_grid, test_grid) = make_grids(&p, spec.opt.n_time);
    let fitres = fit(spec)?;
    let train = evaluate(&fitres.model, &p, &train_grid, fitres.best_loss)?;
    let test = evaluate(&fitres.model, &p, &test_grid, fitres.best_loss)?;
    Ok(ExperimentResult {
        exp_id: spec.exp_id,
        method: spec.method,
        problem_id: spec.problem_id,
        m: spec.m,
        n: spec.n,
        hidden: spec.hidden,
        seed: spec.seed,
        train,
        test,
        final_loss: fitres.best_loss,
        wall_time_s: started.elapsed().as_secs_f64(),
        model: fitres.model,
    })
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

/// Header of the results CSV; one metric block per grid.
pub fn results_csv_header() -> String {
    "exp,method,ocp,M,N,I,train_rmse_u,train_mae_u,train_mape_u,train_j_pct_error,\
     test_rmse_u,test_mae_u,test_mape_u,test_j_pct_error,final_loss,seed,wall_time_s"
        .into()
}

/// One results row in the header's column order, full-precision floats.
pub fn results_csv_row(r: &ExperimentResult) -> String {
    let exp = if r.exp_id == 0 {
        "-".to_string()
    } else {
        r.exp_id.to_string()
    };
    format!(
        "{exp},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.method,
        r.problem_id.index(),
        opt_usize(r.m),
        opt_usize(r.n),
        opt_usize(r.hidden),
        r.train.rmse_u,
        r.train.mae_u,
        r.train.mape_u,
        r.train.j_pct_error,
        r.test.rmse_u,
        r.test.mae_u,
        r.test.mape_u,
        r.test.j_pct_error,
        r.final_loss,
        r.seed,
        r.wall_time_s,
    )
}
