//! Self-check suites behind the `validate` CLI subcommand: quick versions
//! of the gradient-consistency, equilibrium and statistical invariants.

use rand::Rng;

use crate::energy::{multiplier_term_hessians, ExtendedRnfFlow, GradientFlow, LpnnFlow, RnfFlow};
use crate::measurement::{simulate_with_antenna_errors, MeasurementSet};
use crate::metrics::crlb;
use crate::noise::{NoiseModel, DEFAULT_K2};
use crate::rng::stream_rng;
use crate::scenario::Scenario;

/// Outcome of one self-check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Run every self-check suite. Deterministic; takes a few seconds.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_rnf_gradient(),
        check_lpnn_gradient(),
        check_extended_gradient(),
        check_equilibrium(),
        check_hessian_indefiniteness(),
        check_weight_normalization(),
        check_snr_round_trip(),
        check_crlb_scaling(),
    ]
}

fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let step = 1e-5 * (1.0 + x[i].abs());
        probe[i] = x[i] + step;
        let plus = f(&probe);
        probe[i] = x[i] - step;
        let minus = f(&probe);
        probe[i] = x[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / crate::geom::norm(a).max(crate::geom::norm(b)).max(1e-30)
}

const STATES_PER_CHECK: u64 = 25;
const GRADIENT_TOL: f64 = 1e-6;

fn check_rnf_gradient() -> CheckResult {
    let s = Scenario::builtin("scenario1-2d").unwrap();
    let noise = NoiseModel::from_snr(&s, 10.0, DEFAULT_K2).unwrap();
    let meas = MeasurementSet::simulate(&s, &noise, 11).unwrap();
    let flow = RnfFlow::new(&s, &meas, 0.1);
    let mut worst = 0.0f64;
    for seed in 0..STATES_PER_CHECK {
        let mut rng = stream_rng(seed, &[61]);
        let mut x: Vec<f64> = (0..2).map(|_| rng.random_range(-400.0..400.0)).collect();
        x.extend((0..6).map(|_| rng.random_range(100.0..5000.0)));
        let mut analytic = vec![0.0; x.len()];
        flow.derivative_into(&x, &mut analytic);
        let fd: Vec<f64> = finite_difference(|p| flow.energy(p), &x)
            .iter()
            .map(|g| -g)
            .collect();
        worst = worst.max(rel_error(&analytic, &fd));
    }
    CheckResult {
        name: "rnf gradient consistency",
        passed: worst < GRADIENT_TOL,
        detail: format!("worst relative error {worst:.2e} over {STATES_PER_CHECK} states"),
    }
}

fn check_lpnn_gradient() -> CheckResult {
    let s = Scenario::builtin("scenario1-2d").unwrap();
    let noise = NoiseModel::from_snr(&s, 10.0, DEFAULT_K2).unwrap();
    let meas = MeasurementSet::simulate(&s, &noise, 12).unwrap();
    let flow = LpnnFlow::new(&s, &meas, 1.0);
    let split = 2 + 3 + 3;
    let mut worst = 0.0f64;
    for seed in 0..STATES_PER_CHECK {
        let mut rng = stream_rng(seed, &[62]);
        let mut y: Vec<f64> = (0..2).map(|_| rng.random_range(-400.0..400.0)).collect();
        y.extend((0..6).map(|_| rng.random_range(100.0..5000.0)));
        y.extend((0..6).map(|_| rng.random_range(0.0..1.0)));
        let mut analytic = vec![0.0; y.len()];
        flow.derivative_into(&y, &mut analytic);
        let grad = finite_difference(|p| flow.augmented_lagrangian(p), &y);
        let expected: Vec<f64> = grad
            .iter()
            .enumerate()
            .map(|(i, g)| if i < split { -g } else { *g })
            .collect();
        worst = worst.max(rel_error(&analytic, &expected));
    }
    CheckResult {
        name: "lpnn gradient consistency",
        passed: worst < GRADIENT_TOL,
        detail: format!("worst relative error {worst:.2e} over {STATES_PER_CHECK} states"),
    }
}

fn check_extended_gradient() -> CheckResult {
    let s = Scenario::builtin("scenario2-3d").unwrap();
    let noise = NoiseModel::from_snr(&s, 10.0, DEFAULT_K2)
        .unwrap()
        .with_antenna_variance(5, 6, 10.0)
        .unwrap();
    let meas = simulate_with_antenna_errors(&s, &noise, 13).unwrap();
    let flow = ExtendedRnfFlow::new(&meas, 3, 0.1).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..STATES_PER_CHECK {
        let mut rng = stream_rng(seed, &[63]);
        let mut x: Vec<f64> = (0..3).map(|_| rng.random_range(-400.0..400.0)).collect();
        for p in s.transmitters.iter().chain(s.receivers.iter()) {
            for c in p {
                x.push(c + rng.random_range(-20.0..20.0));
            }
        }
        x.extend((0..11).map(|_| rng.random_range(100.0..9000.0)));
        let mut analytic = vec![0.0; x.len()];
        flow.derivative_into(&x, &mut analytic);
        // Antenna rows follow the half-prior potential exactly.
        let fd: Vec<f64> = finite_difference(|p| flow.energy_with_prior_coeff(p, 0.5), &x)
            .iter()
            .map(|g| -g)
            .collect();
        worst = worst.max(rel_error(&analytic, &fd));
    }
    CheckResult {
        name: "extended rnf gradient consistency",
        passed: worst < GRADIENT_TOL,
        detail: format!("worst relative error {worst:.2e} over {STATES_PER_CHECK} states"),
    }
}

fn check_equilibrium() -> CheckResult {
    let s = Scenario::builtin("scenario1-2d").unwrap();
    let noise = NoiseModel::uniform(3, 3, 1.0).unwrap();
    let meas = MeasurementSet::noise_free(&s, &noise).unwrap();
    let dists: Vec<f64> = s
        .transmitters
        .iter()
        .chain(s.receivers.iter())
        .map(|p| crate::geom::dist(&s.target, p))
        .collect();

    let rnf = RnfFlow::new(&s, &meas, 0.1);
    let mut x = s.target.clone();
    x.extend_from_slice(&dists);
    let mut d = vec![0.0; x.len()];
    rnf.derivative_into(&x, &mut d);
    let rnf_norm = crate::geom::norm(&d);

    let lpnn = LpnnFlow::new(&s, &meas, 1.0);
    let mut y = x.clone();
    y.extend(std::iter::repeat(0.0).take(6));
    let mut dl = vec![0.0; y.len()];
    lpnn.derivative_into(&y, &mut dl);
    let lpnn_norm = crate::geom::norm(&dl);

    let passed = rnf_norm < 1e-4 && lpnn_norm < 1e-4;
    CheckResult {
        name: "equilibrium at truth (noise-free)",
        passed,
        detail: format!("derivative norms rnf {rnf_norm:.2e}, lpnn {lpnn_norm:.2e}"),
    }
}

fn check_hessian_indefiniteness() -> CheckResult {
    let mut rng = stream_rng(64, &[64]);
    let mut worst_min = f64::NEG_INFINITY;
    let mut worst_max = f64::INFINITY;
    for _ in 0..25 {
        let m = rng.random_range(1..=10);
        let n = rng.random_range(1..=10);
        let dim = if rng.random::<bool>() { 2 } else { 3 };
        let lt: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..5.0)).collect();
        let ls: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..5.0)).collect();
        let (ht, hs) = multiplier_term_hessians(&lt, &ls, dim);
        for h in [ht, hs] {
            let eigs = h.symmetric_eigenvalues();
            let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            worst_min = worst_min.max(min);
            worst_max = worst_max.min(max);
        }
    }
    CheckResult {
        name: "multiplier-term hessians indefinite",
        passed: worst_min < 0.0 && worst_max > 0.0,
        detail: format!(
            "largest min-eigenvalue {worst_min:.2e}, smallest max-eigenvalue {worst_max:.2e}"
        ),
    }
}

fn check_weight_normalization() -> CheckResult {
    let s = Scenario::builtin("scenario2-3d").unwrap();
    let noise = NoiseModel::from_snr(&s, 5.0, DEFAULT_K2)
        .unwrap()
        .with_antenna_variance(5, 6, 10.0)
        .unwrap();
    let meas = simulate_with_antenna_errors(&s, &noise, 15).unwrap();
    let sums = [
        meas.weights.iter().sum::<f64>(),
        meas.antenna_weights_t.iter().sum::<f64>(),
        meas.antenna_weights_s.iter().sum::<f64>(),
    ];
    let worst = sums.iter().map(|sum| (sum - 1.0).abs()).fold(0.0, f64::max);
    CheckResult {
        name: "weight normalization",
        passed: worst < 1e-12,
        detail: format!("worst |Σw − 1| = {worst:.2e}"),
    }
}

fn check_snr_round_trip() -> CheckResult {
    let s = Scenario::builtin("scenario1-2d").unwrap();
    let mut worst = 0.0f64;
    let mut snr = -30.0;
    while snr <= 30.0 {
        let model = NoiseModel::from_snr(&s, snr, DEFAULT_K2).unwrap();
        worst = worst.max((model.snr_db() - snr).abs());
        snr += 5.0;
    }
    CheckResult {
        name: "snr round trip",
        passed: worst < 1e-9,
        detail: format!("worst |snr error| = {worst:.2e} dB over [-30, 30]"),
    }
}

fn check_crlb_scaling() -> CheckResult {
    let s = Scenario::builtin("scenario1-2d").unwrap();
    let a = NoiseModel::uniform(3, 3, 1.0).unwrap();
    let b = NoiseModel::uniform(3, 3, 4.0).unwrap();
    let ra = crlb(&s, &a).unwrap().1;
    let rb = crlb(&s, &b).unwrap().1;
    let err = (rb / ra - 2.0).abs();
    CheckResult {
        name: "crlb variance scaling",
        passed: err < 1e-9,
        detail: format!("|root ratio − 2| = {err:.2e}"),
    }
}
