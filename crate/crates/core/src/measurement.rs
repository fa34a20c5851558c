//! Simulation of noisy bistatic ranges and perturbed antenna positions.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{inverse_variance_weights, NoiseModel};
use crate::rng::{stream_rng, STREAM_ANTENNA, STREAM_MEASUREMENT};
use crate::scenario::{bistatic_ranges, Scenario};

/// One set of measured bistatic ranges with the weights the estimators use.
///
/// Range entries are row-major over `(m, n)`. Observed antenna positions are
/// present only in antenna-error mode. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    /// Measured bistatic ranges r̃_mn in meters.
    pub br: Vec<f64>,
    /// Noise-free bistatic ranges r_mn of the true geometry.
    pub br_true: Vec<f64>,
    /// Normalized inverse-variance weights w_mn, Σ w_mn = 1.
    pub weights: Vec<f64>,
    /// The noise model that generated the set.
    pub noise: NoiseModel,
    /// Observed transmitter positions t̃_m (antenna-error mode only).
    pub observed_transmitters: Option<Vec<Vec<f64>>>,
    /// Observed receiver positions s̃_n (antenna-error mode only).
    pub observed_receivers: Option<Vec<Vec<f64>>>,
    /// Normalized transmitter weights w_t,m (antenna-error mode only).
    pub antenna_weights_t: Vec<f64>,
    /// Normalized receiver weights w_s,n (antenna-error mode only).
    pub antenna_weights_s: Vec<f64>,
    /// Number of transmitters.
    pub num_tx: usize,
    /// Number of receivers.
    pub num_rx: usize,
}

impl MeasurementSet {
    /// Draw r̃_mn = r_mn + Δr_mn with independent zero-mean Gaussian noise
    /// of variance σ²_mn. Deterministic for a given seed.
    pub fn simulate(scenario: &Scenario, noise: &NoiseModel, seed: u64) -> Result<Self> {
        noise.validate_for(scenario)?;
        let mut rng = stream_rng(seed, &[STREAM_MEASUREMENT]);
        let br_true = bistatic_ranges(scenario);
        let br = br_true
            .iter()
            .zip(&noise.per_pair_variance)
            .map(|(r, v)| r + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::assemble(scenario, noise, br_true, br)
    }

    /// Measurement set with exact (noise-free) ranges but the weights of the
    /// given noise model.
    pub fn noise_free(scenario: &Scenario, noise: &NoiseModel) -> Result<Self> {
        noise.validate_for(scenario)?;
        let br_true = bistatic_ranges(scenario);
        let br = br_true.clone();
        Self::assemble(scenario, noise, br_true, br)
    }

    /// Measurement set around caller-supplied range values (file-loaded or
    /// synthetic data).
    pub fn with_ranges(scenario: &Scenario, noise: &NoiseModel, br: Vec<f64>) -> Result<Self> {
        noise.validate_for(scenario)?;
        if br.len() != scenario.num_tx() * scenario.num_rx() {
            return Err(Error::invalid("range count does not match geometry"));
        }
        let br_true = bistatic_ranges(scenario);
        Self::assemble(scenario, noise, br_true, br)
    }

    fn assemble(
        scenario: &Scenario,
        noise: &NoiseModel,
        br_true: Vec<f64>,
        br: Vec<f64>,
    ) -> Result<Self> {
        Ok(MeasurementSet {
            br,
            br_true,
            weights: inverse_variance_weights(&noise.per_pair_variance),
            noise: noise.clone(),
            observed_transmitters: None,
            observed_receivers: None,
            antenna_weights_t: Vec::new(),
            antenna_weights_s: Vec::new(),
            num_tx: scenario.num_tx(),
            num_rx: scenario.num_rx(),
        })
    }

    /// Attach observed antenna positions, turning this set into
    /// antenna-error mode. Antenna weights are the normalized inverse
    /// variances of the noise model.
    pub fn with_antenna_observations(
        mut self,
        observed_transmitters: Vec<Vec<f64>>,
        observed_receivers: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if observed_transmitters.len() != self.num_tx || observed_receivers.len() != self.num_rx {
            return Err(Error::invalid(
                "observed antenna counts do not match geometry",
            ));
        }
        if self.noise.antenna_variance_t.len() != self.num_tx
            || self.noise.antenna_variance_s.len() != self.num_rx
        {
            return Err(Error::invalid(
                "noise model has no antenna variances; set them before attaching observations",
            ));
        }
        self.antenna_weights_t = inverse_variance_weights(&self.noise.antenna_variance_t);
        self.antenna_weights_s = inverse_variance_weights(&self.noise.antenna_variance_s);
        self.observed_transmitters = Some(observed_transmitters);
        self.observed_receivers = Some(observed_receivers);
        Ok(self)
    }

    /// Whether this set carries observed antenna positions.
    pub fn has_antenna_observations(&self) -> bool {
        self.observed_transmitters.is_some()
    }

    /// Same ranges with every weight replaced by 1/(M·N), the no-variance-
    /// information convention. Used to run the unweighted network variant.
    pub fn with_uniform_weights(&self) -> Self {
        let mut out = self.clone();
        out.weights = vec![1.0 / self.br.len() as f64; self.br.len()];
        out
    }

    /// Number of measurement pairs M·N.
    pub fn len(&self) -> usize {
        self.br.len()
    }

    /// True when there are no measurement pairs.
    pub fn is_empty(&self) -> bool {
        self.br.is_empty()
    }

    /// Flat index of pair `(m, n)` (0-based).
    #[inline]
    pub fn pair_index(&self, m: usize, n: usize) -> usize {
        m * self.num_rx + n
    }

    /// Delimiter-separated table of the set, one row per pair:
    /// `m,n,r_true,r_meas,sigma2,w` with 1-based antenna indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,r_true,r_meas,sigma2,w\n");
        for m in 0..self.num_tx {
            for n in 0..self.num_rx {
                let k = self.pair_index(m, n);
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    m + 1,
                    n + 1,
                    self.br_true[k],
                    self.br[k],
                    self.noise.per_pair_variance[k],
                    self.weights[k],
                ));
            }
        }
        out
    }
}

/// Observed transmitter and receiver position lists.
pub type ObservedAntennas = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Draw observed antenna positions t̃_m = t_m + Δt_m and s̃_n = s_n + Δs_n
/// with isotropic Gaussian perturbations of the model's antenna variances.
pub fn simulate_antenna_positions(
    scenario: &Scenario,
    noise: &NoiseModel,
    seed: u64,
) -> Result<ObservedAntennas> {
    if noise.antenna_variance_t.len() != scenario.num_tx()
        || noise.antenna_variance_s.len() != scenario.num_rx()
    {
        return Err(Error::invalid("noise model has no antenna variances"));
    }
    noise.validate_for(scenario)?;
    let mut rng = stream_rng(seed, &[STREAM_ANTENNA]);
    let mut perturb = |positions: &[Vec<f64>], variances: &[f64]| -> Vec<Vec<f64>> {
        positions
            .iter()
            .zip(variances)
            .map(|(p, v)| {
                let sd = v.sqrt();
                p.iter()
                    .map(|x| x + sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    };
    let observed_t = perturb(&scenario.transmitters, &noise.antenna_variance_t);
    let observed_s = perturb(&scenario.receivers, &noise.antenna_variance_s);
    Ok((observed_t, observed_s))
}

/// Full antenna-error-mode simulation: noisy ranges of the true geometry
/// plus observed antenna positions, drawn from independent streams of the
/// same seed.
pub fn simulate_with_antenna_errors(
    scenario: &Scenario,
    noise: &NoiseModel,
    seed: u64,
) -> Result<MeasurementSet> {
    let meas = MeasurementSet::simulate(scenario, noise, seed)?;
    let (obs_t, obs_s) = simulate_antenna_positions(scenario, noise, seed)?;
    meas.with_antenna_observations(obs_t, obs_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scenario1() -> Scenario {
        Scenario::builtin("scenario1-2d").unwrap()
    }

    #[test]
    fn degenerate_noise_reproduces_ranges() {
        let s = scenario1();
        let noise = NoiseModel::uniform(3, 3, 1e-30).unwrap();
        let meas = MeasurementSet::simulate(&s, &noise, 7).unwrap();
        for (got, want) in meas.br.iter().zip(&meas.br_true) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn equal_variances_give_uniform_weights() {
        let s = scenario1();
        let noise = NoiseModel::uniform(3, 3, 4.0).unwrap();
        let meas = MeasurementSet::simulate(&s, &noise, 7).unwrap();
        for w in &meas.weights {
            assert_abs_diff_eq!(*w, 1.0 / 9.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sample_mean_matches_model() {
        // Law of large numbers on r̃_11 with σ² = 4 m².
        let s = scenario1();
        let noise = NoiseModel::uniform(3, 3, 4.0).unwrap();
        let trials = 100_000;
        let mut sum = 0.0;
        for seed in 0..trials {
            sum += MeasurementSet::simulate(&s, &noise, seed).unwrap().br[0];
        }
        let mean = sum / trials as f64;
        let r11 = bistatic_ranges(&s)[0];
        let bound = 3.0 * (2.0 / (trials as f64).sqrt());
        assert!(
            (mean - r11).abs() < bound,
            "mean {mean} vs true {r11}, bound {bound}"
        );
    }

    #[test]
    fn sample_variance_matches_model() {
        let s = scenario1();
        let noise = NoiseModel::uniform(3, 3, 4.0).unwrap();
        let trials = 100_000;
        let r11 = bistatic_ranges(&s)[0];
        let mut sum_sq = 0.0;
        for seed in 0..trials {
            let d = MeasurementSet::simulate(&s, &noise, seed).unwrap().br[0] - r11;
            sum_sq += d * d;
        }
        let var = sum_sq / trials as f64;
        assert!((var - 4.0).abs() / 4.0 < 0.05, "variance {var}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = scenario1();
        let noise = NoiseModel::from_snr(&s, 10.0, 1000.0).unwrap();
        let a = MeasurementSet::simulate(&s, &noise, 99).unwrap();
        let b = MeasurementSet::simulate(&s, &noise, 99).unwrap();
        assert_eq!(a, b);
        let c = MeasurementSet::simulate(&s, &noise, 100).unwrap();
        assert_ne!(a.br, c.br);
    }

    #[test]
    fn antenna_positions_zero_variance_limit() {
        let s = scenario1();
        let noise = NoiseModel::uniform(3, 3, 1.0)
            .unwrap()
            .with_antenna_variance(3, 3, 1e-30)
            .unwrap();
        let (obs_t, obs_s) = simulate_antenna_positions(&s, &noise, 5).unwrap();
        for (o, t) in obs_t.iter().zip(&s.transmitters) {
            for (a, b) in o.iter().zip(t) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
        for (o, r) in obs_s.iter().zip(&s.receivers) {
            for (a, b) in o.iter().zip(r) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn equal_antenna_variances_give_uniform_antenna_weights() {
        let s = Scenario::builtin("scenario2-3d").unwrap();
        let noise = NoiseModel::uniform(5, 6, 1.0)
            .unwrap()
            .with_antenna_variance(5, 6, 10.0)
            .unwrap();
        let meas = simulate_with_antenna_errors(&s, &noise, 3).unwrap();
        for w in &meas.antenna_weights_t {
            assert_abs_diff_eq!(*w, 1.0 / 5.0, epsilon = 1e-12);
        }
        for w in &meas.antenna_weights_s {
            assert_abs_diff_eq!(*w, 1.0 / 6.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            meas.antenna_weights_t.iter().sum::<f64>(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            meas.antenna_weights_s.iter().sum::<f64>(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn antenna_perturbation_variance_matches_model() {
        // Per-axis sample variance of Δt_1 over 1e5 draws, σ² = 10 m².
        let s = scenario1();
        let noise = NoiseModel::uniform(3, 3, 1.0)
            .unwrap()
            .with_antenna_variance(3, 3, 10.0)
            .unwrap();
        let trials = 100_000;
        let mut sum_sq = [0.0f64; 2];
        for seed in 0..trials {
            let (obs_t, _) = simulate_antenna_positions(&s, &noise, seed).unwrap();
            for axis in 0..2 {
                let d = obs_t[0][axis] - s.transmitters[0][axis];
                sum_sq[axis] += d * d;
            }
        }
        for (axis, total) in sum_sq.iter().enumerate() {
            let var = total / trials as f64;
            assert!((var - 10.0).abs() < 0.3, "axis {axis}: variance {var}");
        }
    }

    #[test]
    fn csv_export_shape() {
        let s = scenario1();
        let noise = NoiseModel::uniform(3, 3, 2.0).unwrap();
        let meas = MeasurementSet::simulate(&s, &noise, 1).unwrap();
        let csv = meas.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "m,n,r_true,r_meas,sigma2,w");
        assert_eq!(csv.lines().count(), 10);
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,1,"));
    }

    #[test]
    fn antenna_mode_requires_variances() {
        let s = scenario1();
        let noise = NoiseModel::uniform(3, 3, 1.0).unwrap();
        let meas = MeasurementSet::simulate(&s, &noise, 1).unwrap();
        let err = meas
            .with_antenna_observations(s.transmitters.clone(), s.receivers.clone())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(simulate_antenna_positions(&s, &noise, 1).is_err());
    }

    proptest! {
        #[test]
        fn weights_always_normalized(vars in proptest::collection::vec(1e-6f64..1e6, 1..40)) {
            let w = inverse_variance_weights(&vars);
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|x| *x > 0.0));
        }
    }

    use crate::noise::inverse_variance_weights;
}
