//! Discrete-time Euler emulation of the analog networks, plus a grid-search
//! oracle estimator for validation.
//!
//! Solves run on internally normalized coordinates: all positions and ranges
//! are divided by the scenario scale factor (largest antenna coordinate
//! magnitude) before integration, so one default step size works for both
//! the kilometer-scale 2-D geometry and the larger 3-D one. The convergence
//! measure `e` rescales the squared derivative norm back by the squared
//! scale factor, which keeps the default threshold `eps1 = 1e-10` a
//! sub-millimeter stationarity test in physical units.
//!
//! The configured `rho` and `c` follow the meter-scale convention of the
//! state equations. Squared-distance penalties change strength under
//! coordinate scaling, so the integrator maps both onto its unit-scale
//! coordinates: `rho` is multiplied by [`RHO_UNIT_SCALE`] (the strongest
//! setting that keeps the default Euler step stable on every built-in
//! geometry, antenna-state extension included — tighter tracking of the
//! constrained optimum than the raw value, which would leave the auxiliary
//! ranges nearly unconstrained after normalization) and `c` by
//! [`C_UNIT_SCALE`] (which leaves constraint enforcement to the multiplier
//! ascent and makes that ascent the Lagrangian network's slowest mode).

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{ExtendedRnfFlow, GradientFlow, LpnnFlow, RnfFlow};
use crate::error::{Error, Result};
use crate::geom::dist;
use crate::measurement::MeasurementSet;
use crate::rng::{stream_rng, STREAM_INIT};
use crate::scenario::Scenario;

/// Integration and termination parameters shared by all solve entry points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Penalty strength ρ of the relaxed energy.
    pub rho: f64,
    /// Amplitude C of the augmented Lagrangian term.
    pub c: f64,
    /// Euler step Δt in normalized time.
    pub dt: f64,
    /// Termination threshold ε₁ on the squared derivative norm.
    pub eps1: f64,
    /// Iteration cap T per attempt.
    pub max_iters: u64,
    /// Half-width of the uniform per-axis initialization box, meters.
    pub init_box: f64,
    /// Record every tenth state (plus the final one).
    pub record_trajectory: bool,
    /// Re-draw the initial position and retry after divergence.
    pub restart_on_divergence: bool,
    /// Maximum number of restarts.
    pub max_restarts: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 0.1,
            c: 1.0,
            dt: 0.01,
            eps1: 1e-10,
            max_iters: 1_000_000,
            init_box: 400.0,
            record_trajectory: false,
            restart_on_divergence: true,
            max_restarts: 5,
        }
    }
}

impl SolverConfig {
    /// Check the invariants every solve relies on.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("c", self.c),
            ("dt", self.dt),
            ("eps1", self.eps1),
            ("init_box", self.init_box),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Which network a state vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    Rnfnn,
    Lpnn,
    RnfnnAntenna,
}

/// One decimated trajectory record.
///
/// Length-like state entries are in meters; Lagrange multipliers are kept in
/// the integrator's normalized units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    /// Iteration number of the recorded state.
    pub step: u64,
    /// Squared derivative norm at that iteration.
    pub e: f64,
    /// Full state vector.
    pub state: Vec<f64>,
}

/// Outcome of one solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    /// Estimated target position û in meters.
    pub estimate: Vec<f64>,
    /// Total Euler iterations across all attempts.
    pub iterations: u64,
    /// True when the stationarity test `e < eps1` was reached.
    pub converged: bool,
    /// Squared derivative norm at the final state.
    pub final_e: f64,
    /// Number of divergence restarts that were consumed.
    pub restarts: u32,
    /// Recorded states, present when `record_trajectory` is set.
    pub trajectory: Option<Vec<TrajectorySample>>,
    /// Wall-clock seconds spent in the solve (excluded from equality).
    pub wall_time: f64,
}

impl PartialEq for SolveResult {
    fn eq(&self, other: &Self) -> bool {
        self.estimate == other.estimate
            && self.iterations == other.iterations
            && self.converged == other.converged
            && self.final_e == other.final_e
            && self.restarts == other.restarts
            && self.trajectory == other.trajectory
    }
}

/// Squared-e value beyond which a run is declared divergent.
const DIVERGENCE_E: f64 = 1e16;
/// Trajectory decimation: every tenth step is kept.
const TRAJECTORY_STRIDE: u64 = 10;
/// Penalty multiplier between the configured `rho` and the normalized
/// integrator (see the module docs).
pub const RHO_UNIT_SCALE: f64 = 50.0;
/// Augmented-amplitude multiplier between the configured `c` and the
/// normalized integrator (see the module docs).
pub const C_UNIT_SCALE: f64 = 0.05;

/// Initial state for a solve, in physical units.
///
/// The position starts uniform per axis on the init box, auxiliary ranges
/// start at the exact distances from that position to the given antennas,
/// multipliers start uniform on [0, 1), and antenna states start at the
/// given (observed) positions.
pub fn init_state(
    tx: &[Vec<f64>],
    rx: &[Vec<f64>],
    dim: usize,
    config: &SolverConfig,
    seed: u64,
    mode: SolveMode,
) -> Vec<f64> {
    let mut rng = stream_rng(seed, &[STREAM_INIT, 0]);
    let b = config.init_box;
    let u0: Vec<f64> = (0..dim).map(|_| rng.random_range(-b..b)).collect();
    let h_t: Vec<f64> = tx.iter().map(|t| dist(&u0, t)).collect();
    let h_s: Vec<f64> = rx.iter().map(|s| dist(&u0, s)).collect();

    let mut x = Vec::new();
    x.extend_from_slice(&u0);
    match mode {
        SolveMode::Rnfnn => {
            x.extend_from_slice(&h_t);
            x.extend_from_slice(&h_s);
        }
        SolveMode::RnfnnAntenna => {
            for p in tx.iter().chain(rx.iter()) {
                x.extend_from_slice(p);
            }
            x.extend_from_slice(&h_t);
            x.extend_from_slice(&h_s);
        }
        SolveMode::Lpnn => {
            x.extend_from_slice(&h_t);
            x.extend_from_slice(&h_s);
            for _ in 0..tx.len() + rx.len() {
                x.push(rng.random_range(0.0..1.0));
            }
        }
    }
    x
}

/// Normalized problem data shared by the solve entry points.
struct Normalized {
    factor: f64,
    dim: usize,
    tx: Vec<Vec<f64>>,
    rx: Vec<Vec<f64>>,
    br: Vec<f64>,
}

fn normalize_geometry(tx: &[Vec<f64>], rx: &[Vec<f64>], br: &[f64], dim: usize) -> Normalized {
    let factor = tx
        .iter()
        .chain(rx.iter())
        .flat_map(|p| p.iter())
        .fold(1.0_f64, |acc, &x| acc.max(x.abs()));
    let scale = |points: &[Vec<f64>]| -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|p| p.iter().map(|x| x / factor).collect())
            .collect()
    };
    Normalized {
        factor,
        dim,
        tx: scale(tx),
        rx: scale(rx),
        br: br.iter().map(|r| r / factor).collect(),
    }
}

/// Redraws the initial position for restart attempts, keeping every other
/// initial component fixed.
struct Restarter<'a> {
    norm: &'a Normalized,
    seed: u64,
    config: &'a SolverConfig,
    mode: SolveMode,
}

impl Restarter<'_> {
    /// Normalized initial state for the given attempt. Attempt 0 is the base
    /// state; later attempts redraw only the position (and the auxiliary
    /// ranges it determines).
    fn state(&self, attempt: u32, base: &[f64]) -> Vec<f64> {
        let mut x = base.to_vec();
        if attempt == 0 {
            return x;
        }
        let dim = self.norm.dim;
        let (m, n) = (self.norm.tx.len(), self.norm.rx.len());
        let mut rng = stream_rng(self.seed, &[STREAM_INIT, attempt as u64]);
        let b = self.config.init_box / self.norm.factor;
        for slot in x.iter_mut().take(dim) {
            *slot = rng.random_range(-b..b);
        }
        let u = x[..dim].to_vec();
        let h_offset = match self.mode {
            SolveMode::Rnfnn | SolveMode::Lpnn => dim,
            SolveMode::RnfnnAntenna => dim * (1 + m + n),
        };
        for (k, t) in self.norm.tx.iter().enumerate() {
            x[h_offset + k] = dist(&u, t);
        }
        for (k, s) in self.norm.rx.iter().enumerate() {
            x[h_offset + m + k] = dist(&u, s);
        }
        if self.mode == SolveMode::RnfnnAntenna {
            let mut at = dim;
            for p in self.norm.tx.iter().chain(self.norm.rx.iter()) {
                x[at..at + dim].copy_from_slice(p);
                at += dim;
            }
        }
        x
    }
}

struct Integration {
    x: Vec<f64>,
    iterations: u64,
    converged: bool,
    final_e: f64,
    restarts: u32,
    trajectory: Option<Vec<TrajectorySample>>,
}

/// Euler loop with divergence restarts. `e_scale` converts the normalized
/// squared derivative norm to physical units.
fn integrate<F: GradientFlow>(
    flow: &F,
    restarter: &Restarter<'_>,
    base_state: &[f64],
    config: &SolverConfig,
    e_scale: f64,
    rescale: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Integration {
    let len = flow.state_len();
    let mut deriv = vec![0.0; len];
    let mut trajectory = config.record_trajectory.then(Vec::new);
    let mut total_iterations = 0u64;
    let mut restarts = 0u32;
    let max_attempts = if config.restart_on_divergence {
        config.max_restarts + 1
    } else {
        1
    };

    let mut x = restarter.state(0, base_state);
    let mut final_e = f64::INFINITY;
    let mut converged = false;

    'attempts: for attempt in 0..max_attempts {
        if attempt > 0 {
            restarts += 1;
            x = restarter.state(attempt, base_state);
            if let Some(t) = trajectory.as_mut() {
                t.clear();
            }
        }
        let mut k = 0u64;
        loop {
            flow.derivative_into(&x, &mut deriv);
            let e = e_scale * deriv.iter().map(|a| a * a).sum::<f64>();
            if !e.is_finite() || e > DIVERGENCE_E {
                final_e = e;
                converged = false;
                if attempt + 1 < max_attempts {
                    continue 'attempts;
                }
                break 'attempts;
            }
            for (xi, ai) in x.iter_mut().zip(&deriv) {
                *xi += config.dt * ai;
            }
            k += 1;
            total_iterations += 1;
            if let Some(t) = trajectory.as_mut() {
                if k % TRAJECTORY_STRIDE == 0 {
                    t.push(TrajectorySample {
                        step: total_iterations,
                        e,
                        state: rescale(&x),
                    });
                }
            }
            if e < config.eps1 {
                final_e = e;
                converged = true;
                break 'attempts;
            }
            if k >= config.max_iters {
                final_e = e;
                converged = false;
                break 'attempts;
            }
        }
    }

    if let Some(t) = trajectory.as_mut() {
        if t.last().map(|s| s.step) != Some(total_iterations) {
            t.push(TrajectorySample {
                step: total_iterations,
                e: final_e,
                state: rescale(&x),
            });
        }
    }

    Integration {
        x,
        iterations: total_iterations,
        converged,
        final_e,
        restarts,
        trajectory,
    }
}

fn check_plain_mode(meas: &MeasurementSet, scenario: &Scenario) -> Result<()> {
    if meas.has_antenna_observations() {
        return Err(Error::invalid(
            "measurement set carries observed antennas; use solve_rnfnn_antenna",
        ));
    }
    if meas.num_tx != scenario.num_tx() || meas.num_rx != scenario.num_rx() {
        return Err(Error::invalid("measurement set does not match scenario"));
    }
    Ok(())
}

/// Localize with the relaxed-energy-function network.
pub fn solve_rnfnn(
    meas: &MeasurementSet,
    scenario: &Scenario,
    config: &SolverConfig,
    seed: u64,
) -> Result<SolveResult> {
    config.validate()?;
    check_plain_mode(meas, scenario)?;
    let start = Instant::now();
    let norm = normalize_geometry(
        &scenario.transmitters,
        &scenario.receivers,
        &meas.br,
        scenario.dim,
    );
    let flow = RnfFlow::with_geometry(
        norm.dim,
        &norm.tx,
        &norm.rx,
        &norm.br,
        &meas.weights,
        config.rho * RHO_UNIT_SCALE,
    );
    let physical = init_state(
        &scenario.transmitters,
        &scenario.receivers,
        norm.dim,
        config,
        seed,
        SolveMode::Rnfnn,
    );
    let base: Vec<f64> = physical.iter().map(|v| v / norm.factor).collect();
    let restarter = Restarter {
        norm: &norm,
        seed,
        config,
        mode: SolveMode::Rnfnn,
    };
    let f = norm.factor;
    let rescale = move |x: &[f64]| x.iter().map(|v| v * f).collect::<Vec<f64>>();
    let out = integrate(&flow, &restarter, &base, config, f * f, &rescale);
    Ok(finish(out, norm.dim, f, start))
}

/// Localize with the (modified) Lagrangian programming network. Passing
/// uniform weights in the measurement set reproduces the unweighted
/// original network.
pub fn solve_lpnn(
    meas: &MeasurementSet,
    scenario: &Scenario,
    config: &SolverConfig,
    seed: u64,
) -> Result<SolveResult> {
    config.validate()?;
    check_plain_mode(meas, scenario)?;
    let start = Instant::now();
    let norm = normalize_geometry(
        &scenario.transmitters,
        &scenario.receivers,
        &meas.br,
        scenario.dim,
    );
    let flow = LpnnFlow::with_geometry(
        norm.dim,
        &norm.tx,
        &norm.rx,
        &norm.br,
        &meas.weights,
        config.c * C_UNIT_SCALE,
    );
    let physical = init_state(
        &scenario.transmitters,
        &scenario.receivers,
        norm.dim,
        config,
        seed,
        SolveMode::Lpnn,
    );
    // Multipliers stay in normalized units; only length-like entries scale.
    let variable_len = norm.dim + meas.num_tx + meas.num_rx;
    let base: Vec<f64> = physical
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i < variable_len {
                v / norm.factor
            } else {
                *v
            }
        })
        .collect();
    let restarter = Restarter {
        norm: &norm,
        seed,
        config,
        mode: SolveMode::Lpnn,
    };
    let f = norm.factor;
    let rescale = move |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(i, v)| if i < variable_len { v * f } else { *v })
            .collect::<Vec<f64>>()
    };
    let out = integrate(&flow, &restarter, &base, config, f * f, &rescale);
    Ok(finish(out, norm.dim, f, start))
}

/// Localize with the extended relaxed network when only observed (noisy)
/// antenna positions are available. The true geometry is not an input;
/// everything derives from the measurement set.
pub fn solve_rnfnn_antenna(
    meas: &MeasurementSet,
    config: &SolverConfig,
    seed: u64,
) -> Result<SolveResult> {
    config.validate()?;
    let (obs_t, obs_s) = match (&meas.observed_transmitters, &meas.observed_receivers) {
        (Some(t), Some(s)) => (t.clone(), s.clone()),
        _ => {
            return Err(Error::invalid(
                "measurement set carries no observed antennas; use solve_rnfnn",
            ))
        }
    };
    let dim = obs_t[0].len();
    let start = Instant::now();
    let norm = normalize_geometry(&obs_t, &obs_s, &meas.br, dim);
    let flow = ExtendedRnfFlow::with_geometry(
        dim,
        &norm.tx,
        &norm.rx,
        &norm.br,
        &meas.weights,
        &meas.antenna_weights_t,
        &meas.antenna_weights_s,
        config.rho * RHO_UNIT_SCALE,
    );
    let physical = init_state(&obs_t, &obs_s, dim, config, seed, SolveMode::RnfnnAntenna);
    let base: Vec<f64> = physical.iter().map(|v| v / norm.factor).collect();
    let restarter = Restarter {
        norm: &norm,
        seed,
        config,
        mode: SolveMode::RnfnnAntenna,
    };
    let f = norm.factor;
    let rescale = move |x: &[f64]| x.iter().map(|v| v * f).collect::<Vec<f64>>();
    let out = integrate(&flow, &restarter, &base, config, f * f, &rescale);
    Ok(finish(out, dim, f, start))
}

fn finish(out: Integration, dim: usize, factor: f64, start: Instant) -> SolveResult {
    SolveResult {
        estimate: out.x[..dim].iter().map(|v| v * factor).collect(),
        iterations: out.iterations,
        converged: out.converged,
        final_e: out.final_e,
        restarts: out.restarts,
        trajectory: out.trajectory,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Axis-aligned search region for the grid oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    /// Cube of half-width `half` centered at the origin.
    pub fn centered(dim: usize, half: f64) -> Self {
        SearchBox {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return Err(Error::invalid("search box dimension mismatch"));
        }
        let ordered = |l: &f64, h: &f64| matches!(l.partial_cmp(h), Some(std::cmp::Ordering::Less));
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !ordered(l, h)) {
            return Err(Error::invalid("search box is empty"));
        }
        Ok(())
    }
}

/// Number of ×10 refinement passes after the coarse scan.
const ORACLE_REFINEMENTS: usize = 3;

/// Final grid resolution of [`oracle_ml_estimate`] for a coarse step.
pub fn oracle_resolution(coarse_step: f64) -> f64 {
    coarse_step / 10f64.powi(ORACLE_REFINEMENTS as i32)
}

/// Brute-force minimizer of the localization objective: a coarse grid scan
/// over the box followed by three ×10 refinements around the incumbent.
///
/// Independent of the network solvers; used as a validation oracle.
pub fn oracle_ml_estimate(
    meas: &MeasurementSet,
    scenario: &Scenario,
    bounds: &SearchBox,
    coarse_step: f64,
) -> Result<Vec<f64>> {
    bounds.validate(scenario.dim)?;
    if !(coarse_step.is_finite() && coarse_step > 0.0) {
        return Err(Error::invalid("coarse_step must be positive"));
    }
    let mut best = grid_scan(meas, scenario, &bounds.lo, &bounds.hi, coarse_step);
    let mut step = coarse_step;
    for _ in 0..ORACLE_REFINEMENTS {
        let lo: Vec<f64> = best.iter().map(|c| c - step).collect();
        let hi: Vec<f64> = best.iter().map(|c| c + step).collect();
        step /= 10.0;
        best = grid_scan(meas, scenario, &lo, &hi, step);
    }
    Ok(best)
}

fn grid_scan(
    meas: &MeasurementSet,
    scenario: &Scenario,
    lo: &[f64],
    hi: &[f64],
    step: f64,
) -> Vec<f64> {
    let dim = lo.len();
    let counts: Vec<usize> = (0..dim)
        .map(|i| ((hi[i] - lo[i]) / step).floor() as usize + 1)
        .collect();
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    let mut best_point = lo.to_vec();
    let mut best_value = f64::INFINITY;
    loop {
        for i in 0..dim {
            point[i] = lo[i] + step * idx[i] as f64;
        }
        let value = crate::energy::ml_objective(&point, meas, scenario);
        if value < best_value {
            best_value = value;
            best_point.copy_from_slice(&point);
        }
        // Mixed-radix increment over the grid indices.
        let mut axis = 0;
        loop {
            if axis == dim {
                return best_point;
            }
            idx[axis] += 1;
            if idx[axis] < counts[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Render a recorded trajectory as a delimiter-separated table with header
/// `k,e,u_1..u_D,x_{D+1}..`.
pub fn trajectory_csv(result: &SolveResult, dim: usize) -> Option<String> {
    let samples = result.trajectory.as_ref()?;
    let state_len = samples.first().map_or(dim, |s| s.state.len());
    let mut out = String::from("k,e");
    for i in 1..=dim {
        out.push_str(&format!(",u_{i}"));
    }
    for i in dim + 1..=state_len {
        out.push_str(&format!(",x_{i}"));
    }
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{}", s.step, s.e));
        for v in &s.state {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    Some(out)
}
