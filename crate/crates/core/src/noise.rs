//! Measurement and antenna-position noise models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::dist;
use crate::scenario::{check_target_separated, Scenario};

/// Gaussian noise description for one measurement campaign.
///
/// Per-pair bistatic-range variances are stored row-major over `(m, n)`,
/// matching the measurement layout. Antenna variances are empty unless the
/// antenna-error mode is in use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Range-noise scale in the SNR model `σ²_mn = k1 g²_t,m g²_s,n`.
    pub k1: f64,
    /// SNR scale factor (1000 in all experiments here).
    pub k2: f64,
    /// Per-pair variances σ²_mn in m², row-major over `(m, n)`.
    pub per_pair_variance: Vec<f64>,
    /// Transmitter position-error variances σ²_t,m in m² (empty when
    /// antenna errors are not modeled).
    #[serde(default)]
    pub antenna_variance_t: Vec<f64>,
    /// Receiver position-error variances σ²_s,n in m².
    #[serde(default)]
    pub antenna_variance_s: Vec<f64>,
}

/// Default SNR scale factor.
pub const DEFAULT_K2: f64 = 1000.0;

impl NoiseModel {
    /// Equal variance `sigma2` for every pair.
    pub fn uniform(m: usize, n: usize, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid("variance must be positive and finite"));
        }
        Ok(NoiseModel {
            k1: sigma2,
            k2: DEFAULT_K2,
            per_pair_variance: vec![sigma2; m * n],
            antenna_variance_t: Vec::new(),
            antenna_variance_s: Vec::new(),
        })
    }

    /// Noise model whose average SNR over all pairs equals `snr_db`.
    ///
    /// Variances follow `σ²_mn = k1 g²_t,m g²_s,n` with the true
    /// target-antenna distances `g`, and `k1` is solved in closed form so
    /// that `10·log10((1/MN) Σ k2/σ²_mn)` reproduces `snr_db` exactly.
    pub fn from_snr(scenario: &Scenario, snr_db: f64, k2: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::invalid("snr_db must be finite"));
        }
        if !(k2.is_finite() && k2 > 0.0) {
            return Err(Error::invalid("k2 must be positive and finite"));
        }
        check_target_separated(scenario)?;

        let g_t: Vec<f64> = scenario
            .transmitters
            .iter()
            .map(|t| dist(&scenario.target, t))
            .collect();
        let g_s: Vec<f64> = scenario
            .receivers
            .iter()
            .map(|s| dist(&scenario.target, s))
            .collect();

        let mn = (g_t.len() * g_s.len()) as f64;
        let mean_inv_g4: f64 = g_t
            .iter()
            .flat_map(|gt| g_s.iter().map(move |gs| 1.0 / (gt * gt * gs * gs)))
            .sum::<f64>()
            / mn;
        let k1 = k2 * mean_inv_g4 / 10f64.powf(snr_db / 10.0);

        let per_pair_variance = g_t
            .iter()
            .flat_map(|gt| g_s.iter().map(move |gs| k1 * gt * gt * gs * gs))
            .collect();

        Ok(NoiseModel {
            k1,
            k2,
            per_pair_variance,
            antenna_variance_t: Vec::new(),
            antenna_variance_s: Vec::new(),
        })
    }

    /// Average SNR of this model over a scenario, per the same definition
    /// used by [`NoiseModel::from_snr`].
    pub fn snr_db(&self) -> f64 {
        let mn = self.per_pair_variance.len() as f64;
        let mean: f64 = self
            .per_pair_variance
            .iter()
            .map(|v| self.k2 / v)
            .sum::<f64>()
            / mn;
        10.0 * mean.log10()
    }

    /// Set a common antenna position-error variance σ²_p for all antennas.
    pub fn with_antenna_variance(mut self, m: usize, n: usize, sigma2_p: f64) -> Result<Self> {
        if !(sigma2_p.is_finite() && sigma2_p > 0.0) {
            return Err(Error::invalid(
                "antenna variance must be positive and finite",
            ));
        }
        self.antenna_variance_t = vec![sigma2_p; m];
        self.antenna_variance_s = vec![sigma2_p; n];
        Ok(self)
    }

    /// Set per-antenna position-error variances.
    pub fn with_antenna_variances(
        mut self,
        variance_t: Vec<f64>,
        variance_s: Vec<f64>,
    ) -> Result<Self> {
        for v in variance_t.iter().chain(variance_s.iter()) {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::invalid(
                    "antenna variance must be positive and finite",
                ));
            }
        }
        self.antenna_variance_t = variance_t;
        self.antenna_variance_s = variance_s;
        Ok(self)
    }

    /// Whether antenna position errors are modeled.
    pub fn has_antenna_errors(&self) -> bool {
        !self.antenna_variance_t.is_empty() || !self.antenna_variance_s.is_empty()
    }

    pub(crate) fn validate_for(&self, scenario: &Scenario) -> Result<()> {
        let mn = scenario.num_tx() * scenario.num_rx();
        if self.per_pair_variance.len() != mn {
            return Err(Error::invalid(format!(
                "expected {mn} per-pair variances, got {}",
                self.per_pair_variance.len()
            )));
        }
        if !self
            .per_pair_variance
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
        {
            return Err(Error::invalid("per-pair variances must be positive"));
        }
        if self.has_antenna_errors() {
            if self.antenna_variance_t.len() != scenario.num_tx()
                || self.antenna_variance_s.len() != scenario.num_rx()
            {
                return Err(Error::invalid(
                    "antenna variance counts do not match geometry",
                ));
            }
            if !self
                .antenna_variance_t
                .iter()
                .chain(self.antenna_variance_s.iter())
                .all(|v| v.is_finite() && *v > 0.0)
            {
                return Err(Error::invalid("antenna variances must be positive"));
            }
        }
        Ok(())
    }
}

/// Inverse-variance weights normalized to sum to one.
pub(crate) fn inverse_variance_weights(variances: &[f64]) -> Vec<f64> {
    let inv: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scenario1() -> Scenario {
        Scenario::builtin("scenario1-2d").unwrap()
    }

    #[test]
    fn snr_round_trip() {
        let s = scenario1();
        for snr in [-30.0, -20.0, -10.0, 0.0, 7.5, 10.0, 20.0, 30.0] {
            let model = NoiseModel::from_snr(&s, snr, DEFAULT_K2).unwrap();
            assert_abs_diff_eq!(model.snr_db(), snr, epsilon = 1e-9);
        }
    }

    #[test]
    fn snr_plus_10db_divides_variances_by_10() {
        let s = scenario1();
        let a = NoiseModel::from_snr(&s, 5.0, DEFAULT_K2).unwrap();
        let b = NoiseModel::from_snr(&s, 15.0, DEFAULT_K2).unwrap();
        for (va, vb) in a.per_pair_variance.iter().zip(&b.per_pair_variance) {
            assert_abs_diff_eq!(va / vb, 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn k1_matches_closed_form() {
        // Independent evaluation of k1 = k2 * (1/MN) Σ 1/(g²_t g²_s) at 0 dB.
        let s = scenario1();
        let mut sum = 0.0;
        for t in &s.transmitters {
            for r in &s.receivers {
                let gt = dist(&s.target, t);
                let gs = dist(&s.target, r);
                sum += 1.0 / (gt * gt * gs * gs);
            }
        }
        let expected_k1 = DEFAULT_K2 * sum / 9.0;
        let model = NoiseModel::from_snr(&s, 0.0, DEFAULT_K2).unwrap();
        assert_abs_diff_eq!(model.k1, expected_k1, epsilon = expected_k1 * 1e-12);
    }

    #[test]
    fn coincident_target_is_singular() {
        let s = scenario1();
        let s = s.with_target(vec![-1000.0, -1300.0]).unwrap();
        assert!(matches!(
            NoiseModel::from_snr(&s, 0.0, DEFAULT_K2),
            Err(Error::SingularGeometry(_))
        ));
    }

    #[test]
    fn antenna_variance_setters() {
        let model = NoiseModel::uniform(3, 3, 1.0)
            .unwrap()
            .with_antenna_variance(3, 3, 10.0)
            .unwrap();
        assert!(model.has_antenna_errors());
        assert_eq!(model.antenna_variance_t, vec![10.0; 3]);
        assert!(NoiseModel::uniform(3, 3, 1.0)
            .unwrap()
            .with_antenna_variance(3, 3, -1.0)
            .is_err());
    }

    #[test]
    fn weights_normalize() {
        let w = inverse_variance_weights(&[1.0, 2.0, 4.0]);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[0], 4.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_model_from_toml() {
        let text = r#"
            k1 = 2.5
            k2 = 1000.0
            per_pair_variance = [1.0, 2.0, 3.0, 4.0]
            antenna_variance_t = [10.0, 10.0]
            antenna_variance_s = [10.0, 10.0]
        "#;
        let model: NoiseModel = toml::from_str(text).unwrap();
        assert_eq!(model.per_pair_variance.len(), 4);
        assert!(model.has_antenna_errors());

        // Antenna variances are optional.
        let plain: NoiseModel =
            toml::from_str("k1 = 1.0\nk2 = 1000.0\nper_pair_variance = [1.0]").unwrap();
        assert!(!plain.has_antenna_errors());
    }

    #[test]
    fn simulation_rejects_bad_variances() {
        let s = scenario1();
        let mut model = NoiseModel::uniform(3, 3, 1.0).unwrap();
        model.per_pair_variance[4] = 0.0;
        assert!(matches!(
            crate::measurement::MeasurementSet::simulate(&s, &model, 1),
            Err(Error::InvalidInput(_))
        ));
        model.per_pair_variance[4] = -3.0;
        assert!(crate::measurement::MeasurementSet::simulate(&s, &model, 1).is_err());
    }
}
