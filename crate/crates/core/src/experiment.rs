//! Deterministic Monte-Carlo experiment runner.
//!
//! An [`ExperimentSpec`] describes a geometry, a noise sweep, a solver
//! configuration and the methods to compare; [`run_experiment`] executes
//! every (sweep point, trial, method) cell and aggregates accuracy metrics
//! against the CRLB benchmark. Trials are independent work items: every
//! random quantity derives from `(master_seed, point, trial)`, so results
//! are bit-reproducible no matter how many workers execute them.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::dist;
use crate::measurement::{simulate_with_antenna_errors, MeasurementSet};
use crate::metrics::{self, MetricsReport, RmMethod};
use crate::noise::{NoiseModel, DEFAULT_K2};
use crate::rng::{derive_seed, stream_rng, STREAM_TARGET};
use crate::scenario::Scenario;
use crate::solver::{
    oracle_ml_estimate, solve_lpnn, solve_rnfnn, solve_rnfnn_antenna, SearchBox, SolverConfig,
};

/// Estimation methods the runner can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Relaxed-energy-function network (extended variant in antenna mode).
    Rnfnn,
    /// Weighted augmented-Lagrangian network.
    Mlpnn,
    /// Unweighted variant: the same network on uniform weights.
    Lpnn,
    /// Grid-refinement brute-force reference.
    Oracle,
}

impl Method {
    fn seed_word(self) -> u64 {
        match self {
            Method::Rnfnn => 1,
            Method::Mlpnn => 2,
            Method::Lpnn => 3,
            Method::Oracle => 4,
        }
    }

    fn rm_method(self) -> Option<RmMethod> {
        match self {
            Method::Rnfnn => Some(RmMethod::Rnfnn),
            Method::Mlpnn => Some(RmMethod::Mlpnn),
            Method::Lpnn => Some(RmMethod::Lpnn),
            Method::Oracle => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Rnfnn => "rnfnn",
            Method::Mlpnn => "mlpnn",
            Method::Lpnn => "lpnn",
            Method::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnfnn" => Ok(Method::Rnfnn),
            "mlpnn" => Ok(Method::Mlpnn),
            "lpnn" => Ok(Method::Lpnn),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::NotFound(format!("unknown method `{other}`"))),
        }
    }
}

/// How the true target is chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// The scenario's target, same in every trial.
    #[default]
    Fixed,
    /// A fresh uniform draw from `target_box` in every trial.
    UniformBox,
}

/// Geometry section of a spec file: exactly one of `builtin`, inline
/// positions, or `random_circle`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub builtin: Option<String>,
    pub dim: Option<usize>,
    pub transmitters: Option<Vec<Vec<f64>>>,
    pub receivers: Option<Vec<Vec<f64>>>,
    pub target: Option<Vec<f64>>,
    pub random_circle: Option<RandomCircleSpec>,
    pub target_mode: TargetMode,
    /// Per-axis [lo, hi] bounds for uniform-box target draws.
    pub target_box: Option<Vec<[f64; 2]>>,
}

/// Parameters of a random circular constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCircleSpec {
    pub m: usize,
    pub n: usize,
    pub radius: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Spec for a built-in geometry.
    pub fn builtin(name: &str) -> Self {
        ScenarioSpec {
            builtin: Some(name.to_string()),
            ..ScenarioSpec::default()
        }
    }

    /// Resolve to a concrete scenario (base geometry and default target).
    pub fn resolve(&self) -> Result<Scenario> {
        let picked = [
            self.builtin.is_some(),
            self.transmitters.is_some(),
            self.random_circle.is_some(),
        ]
        .iter()
        .filter(|x| **x)
        .count();
        if picked != 1 {
            return Err(Error::Config(
                "scenario needs exactly one of: builtin, inline positions, random_circle".into(),
            ));
        }
        let mut scenario = if let Some(name) = &self.builtin {
            Scenario::builtin(name)?
        } else if let Some(rc) = &self.random_circle {
            Scenario::random_circle(rc.m, rc.n, rc.radius, rc.seed)?
        } else {
            let dim = self
                .dim
                .ok_or_else(|| Error::Config("inline scenario needs dim".into()))?;
            Scenario::new(
                dim,
                self.transmitters.clone().unwrap_or_default(),
                self.receivers
                    .clone()
                    .ok_or_else(|| Error::Config("inline scenario needs receivers".into()))?,
                self.target
                    .clone()
                    .ok_or_else(|| Error::Config("inline scenario needs target".into()))?,
            )?
        };
        if self.builtin.is_some() || self.random_circle.is_some() {
            if let Some(target) = &self.target {
                scenario = scenario.with_target(target.clone())?;
            }
        }
        Ok(scenario)
    }
}

/// Noise section: SNR scale factor and optional fixed antenna variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// SNR scale factor k2.
    pub k2: f64,
    /// Fixed antenna position-error variance σ²_p in m².
    pub antenna_variance: Option<f64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            k2: DEFAULT_K2,
            antenna_variance: None,
        }
    }
}

/// Sweep section: the SNR grid (or antenna-variance grid), methods, trial
/// count and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// SNR grid in dB. With an antenna-variance sweep this must hold the
    /// single fixed SNR instead.
    pub snr_db: Vec<f64>,
    /// Optional antenna-variance sweep σ²_p in m².
    pub antenna_variance: Option<Vec<f64>>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            snr_db: Vec::new(),
            antenna_variance: None,
            methods: vec![Method::Rnfnn, Method::Mlpnn],
            trials: 500,
            master_seed: 1,
        }
    }
}

/// Output section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Directory for sweep tables and the manifest; nothing is written when
    /// absent.
    pub dir: Option<PathBuf>,
    /// Also write per-trial tables.
    pub per_trial: bool,
}

/// A full experiment description (spec-file root).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSpec,
    pub noise: NoiseSpec,
    pub solver: SolverConfig,
    pub sweep: SweepSpec,
    pub output: OutputSpec,
}

impl ExperimentSpec {
    /// Parse a TOML spec document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Load a TOML spec file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Check the cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.sweep.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        for (i, m) in self.sweep.methods.iter().enumerate() {
            if self.sweep.methods[..i].contains(m) {
                return Err(Error::Config(format!("duplicate method `{m}`")));
            }
        }
        match &self.sweep.antenna_variance {
            Some(vars) => {
                if vars.is_empty() {
                    return Err(Error::Config("antenna-variance sweep is empty".into()));
                }
                if self.sweep.snr_db.len() != 1 {
                    return Err(Error::Config(
                        "an antenna-variance sweep needs exactly one fixed snr_db".into(),
                    ));
                }
            }
            None => {
                if self.sweep.snr_db.is_empty() {
                    return Err(Error::Config("snr_db sweep is empty".into()));
                }
            }
        }
        let antenna_mode =
            self.noise.antenna_variance.is_some() || self.sweep.antenna_variance.is_some();
        if antenna_mode && self.sweep.methods.iter().any(|m| *m != Method::Rnfnn) {
            return Err(Error::Config(
                "antenna-error mode supports the rnfnn method only".into(),
            ));
        }
        if self.scenario.target_mode == TargetMode::UniformBox && self.scenario.target_box.is_none()
        {
            return Err(Error::Config(
                "uniform-box target mode needs target_box".into(),
            ));
        }
        self.scenario.resolve()?;
        Ok(())
    }

    /// The sweep points this spec expands to.
    pub fn points(&self) -> Vec<SweepPoint> {
        match &self.sweep.antenna_variance {
            Some(vars) => vars
                .iter()
                .enumerate()
                .map(|(i, v)| SweepPoint {
                    index: i,
                    snr_db: self.sweep.snr_db[0],
                    sigma2_p: Some(*v),
                })
                .collect(),
            None => self
                .sweep
                .snr_db
                .iter()
                .enumerate()
                .map(|(i, snr)| SweepPoint {
                    index: i,
                    snr_db: *snr,
                    sigma2_p: self.noise.antenna_variance,
                })
                .collect(),
        }
    }
}

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub snr_db: f64,
    /// Antenna position-error variance at this point, when modeled.
    pub sigma2_p: Option<f64>,
}

/// Per-trial outcome of one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub point: usize,
    pub trial: usize,
    /// Derived seed that reproduces this trial in isolation.
    pub seed: u64,
    pub estimate: Vec<f64>,
    /// Position error ‖û − u‖₂ in meters.
    pub error: f64,
    pub iterations: u64,
    pub converged: bool,
}

/// All trials of one method at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub report: MetricsReport,
    pub trials: Vec<TrialRecord>,
}

/// Results of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub point: SweepPoint,
    /// Root CRLB averaged over trials (constant unless the target is drawn
    /// per trial).
    pub root_crlb: f64,
    pub per_method: Vec<MethodResult>,
}

/// Full experiment output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResults {
    pub spec: ExperimentSpec,
    pub points: Vec<PointResult>,
}

impl ExperimentResults {
    /// Result of `method` at sweep point `point`.
    pub fn method_at(&self, method: Method, point: usize) -> Option<&MethodResult> {
        self.points
            .get(point)?
            .per_method
            .iter()
            .find(|m| m.method == method)
    }
}

struct TrialOutcome {
    seed: u64,
    root_crlb: f64,
    per_method: Vec<(Vec<f64>, f64, u64, bool)>,
}

/// Execute the full sweep. Deterministic for a fixed spec, regardless of
/// worker count: every trial derives its streams from
/// `(master_seed, point, trial)` and aggregation is keyed by trial index.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    spec.validate()?;
    let base = spec.scenario.resolve()?;
    let methods = &spec.sweep.methods;
    let mut points_out = Vec::new();

    for point in spec.points() {
        let outcomes: Vec<Result<TrialOutcome>> = (0..spec.sweep.trials)
            .into_par_iter()
            .map(|trial| run_trial(spec, &base, &point, trial))
            .collect();
        let outcomes: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

        let root_crlb = outcomes.iter().map(|o| o.root_crlb).sum::<f64>() / outcomes.len() as f64;

        let mut per_method = Vec::new();
        for (mi, method) in methods.iter().enumerate() {
            let estimates: Vec<Vec<f64>> = outcomes
                .iter()
                .map(|o| o.per_method[mi].0.clone())
                .collect();
            let errors: Vec<f64> = outcomes.iter().map(|o| o.per_method[mi].1).collect();
            let iters: Vec<u64> = outcomes.iter().map(|o| o.per_method[mi].2).collect();
            let conv: Vec<bool> = outcomes.iter().map(|o| o.per_method[mi].3).collect();
            let trials = spec.sweep.trials;

            let mean_iterations = iters.iter().sum::<u64>() as f64 / trials as f64;
            let converged_count = conv.iter().filter(|c| **c).count();
            let mean_iterations_converged = if converged_count > 0 {
                iters
                    .iter()
                    .zip(&conv)
                    .filter(|(_, c)| **c)
                    .map(|(i, _)| *i)
                    .sum::<u64>() as f64
                    / converged_count as f64
            } else {
                f64::NAN
            };

            let report = MetricsReport {
                rmse: rmse_of_errors(&errors),
                bias: bias_of(&estimates, &outcomes, &base, spec)?,
                ecdf: metrics::ecdf(&errors)?,
                root_crlb,
                mean_iterations,
                mean_iterations_converged,
                convergence_rate: converged_count as f64 / trials as f64,
                rm_count: method.rm_method().map(|rm| {
                    metrics::rm_count(
                        rm,
                        base.num_tx() as u64,
                        base.num_rx() as u64,
                        base.dim as u64,
                        mean_iterations.round() as u64,
                    )
                }),
                trials,
            };
            let trial_rows = outcomes
                .iter()
                .enumerate()
                .map(|(t, o)| TrialRecord {
                    point: point.index,
                    trial: t,
                    seed: o.seed,
                    estimate: o.per_method[mi].0.clone(),
                    error: o.per_method[mi].1,
                    iterations: o.per_method[mi].2,
                    converged: o.per_method[mi].3,
                })
                .collect();
            per_method.push(MethodResult {
                method: *method,
                report,
                trials: trial_rows,
            });
        }
        points_out.push(PointResult {
            point,
            root_crlb,
            per_method,
        });
    }

    let results = ExperimentResults {
        spec: spec.clone(),
        points: points_out,
    };
    if let Some(dir) = &spec.output.dir {
        write_outputs(&results, dir)?;
    }
    Ok(results)
}

fn rmse_of_errors(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Bias needs the per-trial truth; with a fixed target this is the plain
/// batch bias, with uniform-box targets it averages û − u over trials.
fn bias_of(
    estimates: &[Vec<f64>],
    outcomes: &[TrialOutcome],
    base: &Scenario,
    spec: &ExperimentSpec,
) -> Result<f64> {
    match spec.scenario.target_mode {
        TargetMode::Fixed => metrics::bias(estimates, &base.target),
        TargetMode::UniformBox => {
            let dim = base.dim;
            let mut mean_err = vec![0.0; dim];
            for (est, outcome) in estimates.iter().zip(outcomes) {
                let truth = draw_target(spec, base, outcome.seed)?;
                for i in 0..dim {
                    mean_err[i] += est[i] - truth[i];
                }
            }
            for v in &mut mean_err {
                *v /= estimates.len() as f64;
            }
            Ok(crate::geom::norm_l1(&mean_err))
        }
    }
}

fn draw_target(spec: &ExperimentSpec, base: &Scenario, trial_seed: u64) -> Result<Vec<f64>> {
    match spec.scenario.target_mode {
        TargetMode::Fixed => Ok(base.target.clone()),
        TargetMode::UniformBox => {
            let bounds =
                spec.scenario.target_box.as_ref().ok_or_else(|| {
                    Error::Config("uniform-box target mode needs target_box".into())
                })?;
            if bounds.len() != base.dim {
                return Err(Error::Config("target_box dimension mismatch".into()));
            }
            let mut rng = stream_rng(trial_seed, &[STREAM_TARGET]);
            Ok(bounds
                .iter()
                .map(|[lo, hi]| rng.random_range(*lo..*hi))
                .collect())
        }
    }
}

fn oracle_bounds(spec: &ExperimentSpec, base: &Scenario) -> SearchBox {
    match (&spec.scenario.target_mode, &spec.scenario.target_box) {
        (TargetMode::UniformBox, Some(bounds)) => SearchBox {
            lo: bounds.iter().map(|[lo, _]| *lo).collect(),
            hi: bounds.iter().map(|[_, hi]| *hi).collect(),
        },
        _ => {
            let reach = base
                .target
                .iter()
                .fold(spec.solver.init_box, |acc, x| acc.max(1.25 * x.abs()));
            SearchBox::centered(base.dim, reach)
        }
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    base: &Scenario,
    point: &SweepPoint,
    trial: usize,
) -> Result<TrialOutcome> {
    let trial_seed = derive_seed(spec.sweep.master_seed, &[point.index as u64, trial as u64]);
    let scenario = base.with_target(draw_target(spec, base, trial_seed)?)?;

    let mut noise = NoiseModel::from_snr(&scenario, point.snr_db, spec.noise.k2)?;
    if let Some(sigma2_p) = point.sigma2_p {
        noise = noise.with_antenna_variance(scenario.num_tx(), scenario.num_rx(), sigma2_p)?;
    }
    let antenna_mode = point.sigma2_p.is_some();
    let meas = if antenna_mode {
        simulate_with_antenna_errors(&scenario, &noise, trial_seed)?
    } else {
        MeasurementSet::simulate(&scenario, &noise, trial_seed)?
    };

    let root_crlb = if antenna_mode {
        metrics::crlb_with_antenna_errors(&scenario, &noise)?.1
    } else {
        metrics::crlb(&scenario, &noise)?.1
    };

    let mut per_method = Vec::with_capacity(spec.sweep.methods.len());
    for method in &spec.sweep.methods {
        let method_seed = derive_seed(trial_seed, &[method.seed_word()]);
        let (estimate, iterations, converged) = match method {
            Method::Rnfnn if antenna_mode => {
                let r = solve_rnfnn_antenna(&meas, &spec.solver, method_seed)?;
                (r.estimate, r.iterations, r.converged)
            }
            Method::Rnfnn => {
                let r = solve_rnfnn(&meas, &scenario, &spec.solver, method_seed)?;
                (r.estimate, r.iterations, r.converged)
            }
            Method::Mlpnn => {
                let r = solve_lpnn(&meas, &scenario, &spec.solver, method_seed)?;
                (r.estimate, r.iterations, r.converged)
            }
            Method::Lpnn => {
                let uniform = meas.with_uniform_weights();
                let r = solve_lpnn(&uniform, &scenario, &spec.solver, method_seed)?;
                (r.estimate, r.iterations, r.converged)
            }
            Method::Oracle => {
                let bounds = oracle_bounds(spec, base);
                let span = bounds
                    .hi
                    .iter()
                    .zip(&bounds.lo)
                    .map(|(h, l)| h - l)
                    .fold(0.0_f64, f64::max);
                let estimate = oracle_ml_estimate(&meas, &scenario, &bounds, span / 80.0)?;
                (estimate, 0, true)
            }
        };
        let error = dist(&estimate, &scenario.target);
        per_method.push((estimate, error, iterations, converged));
    }

    Ok(TrialOutcome {
        seed: trial_seed,
        root_crlb,
        per_method,
    })
}

/// Write sweep tables, optional per-trial tables and the run manifest.
pub fn write_outputs(results: &ExperimentResults, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (mi, method) in results.spec.sweep.methods.iter().enumerate() {
        let mut table = String::from(MetricsReport::csv_header());
        table.push('\n');
        for point in &results.points {
            table.push_str(&point.per_method[mi].report.csv_row(point.point.snr_db));
            table.push('\n');
        }
        fs::write(dir.join(format!("sweep_{method}.csv")), table)?;

        if results.spec.output.per_trial {
            let mut rows = String::from("point,trial,seed,err,iters,converged\n");
            for point in &results.points {
                for t in &point.per_method[mi].trials {
                    rows.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        t.point, t.trial, t.seed, t.error, t.iterations, t.converged
                    ));
                }
            }
            fs::write(dir.join(format!("trials_{method}.csv")), rows)?;
        }
    }

    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "spec": results.spec,
        "points": results.points.iter().map(|p| p.point).collect::<Vec<_>>(),
        "root_crlb": results.points.iter().map(|p| p.root_crlb).collect::<Vec<_>>(),
    });
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    Ok(())
}

/// Root CRLB per sweep point at the base scenario's target, without
/// running any trials.
pub fn crlb_sweep(spec: &ExperimentSpec) -> Result<Vec<(SweepPoint, f64)>> {
    spec.validate()?;
    let base = spec.scenario.resolve()?;
    let mut out = Vec::new();
    for point in spec.points() {
        let mut noise = NoiseModel::from_snr(&base, point.snr_db, spec.noise.k2)?;
        let root = match point.sigma2_p {
            Some(sigma2_p) => {
                noise = noise.with_antenna_variance(base.num_tx(), base.num_rx(), sigma2_p)?;
                metrics::crlb_with_antenna_errors(&base, &noise)?.1
            }
            None => metrics::crlb(&base, &noise)?.1,
        };
        out.push((point, root));
    }
    Ok(out)
}
