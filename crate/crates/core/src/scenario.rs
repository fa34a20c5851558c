//! Localization geometry: antenna constellation and true target position.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_GEOMETRY};

/// A distributed MIMO radar geometry together with the true target position.
///
/// All coordinates are in meters. Immutable after construction; generation
/// and solver code share scenarios freely across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRaw")]
pub struct Scenario {
    /// Spatial dimension, 2 or 3.
    pub dim: usize,
    /// Transmitter positions, each of length `dim`.
    pub transmitters: Vec<Vec<f64>>,
    /// Receiver positions, each of length `dim`.
    pub receivers: Vec<Vec<f64>>,
    /// True target position, length `dim`.
    pub target: Vec<f64>,
}

/// Serde-facing mirror so that deserialized scenarios pass through the same
/// validation as constructed ones.
#[derive(Deserialize)]
struct ScenarioRaw {
    dim: usize,
    transmitters: Vec<Vec<f64>>,
    receivers: Vec<Vec<f64>>,
    target: Vec<f64>,
}

impl TryFrom<ScenarioRaw> for Scenario {
    type Error = Error;
    fn try_from(raw: ScenarioRaw) -> Result<Self> {
        Scenario::new(raw.dim, raw.transmitters, raw.receivers, raw.target)
    }
}

impl Scenario {
    /// Validate and build a scenario.
    pub fn new(
        dim: usize,
        transmitters: Vec<Vec<f64>>,
        receivers: Vec<Vec<f64>>,
        target: Vec<f64>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid(format!("dim must be 2 or 3, got {dim}")));
        }
        if transmitters.is_empty() || receivers.is_empty() {
            return Err(Error::invalid(
                "need at least one transmitter and one receiver",
            ));
        }
        for p in transmitters
            .iter()
            .chain(receivers.iter())
            .chain(std::iter::once(&target))
        {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if !p.iter().all(|x| x.is_finite()) {
                return Err(Error::invalid("non-finite coordinate"));
            }
        }
        Ok(Scenario {
            dim,
            transmitters,
            receivers,
            target,
        })
    }

    /// Number of transmitters.
    pub fn num_tx(&self) -> usize {
        self.transmitters.len()
    }

    /// Number of receivers.
    pub fn num_rx(&self) -> usize {
        self.receivers.len()
    }

    /// Same geometry with a different true target.
    pub fn with_target(&self, target: Vec<f64>) -> Result<Self> {
        Scenario::new(
            self.dim,
            self.transmitters.clone(),
            self.receivers.clone(),
            target,
        )
    }

    /// Largest antenna coordinate magnitude.
    ///
    /// The solver divides all positions and ranges by this factor before
    /// integrating, so one default step size works across geometries of
    /// different physical extent.
    pub fn scale_factor(&self) -> f64 {
        self.transmitters
            .iter()
            .chain(self.receivers.iter())
            .flat_map(|p| p.iter())
            .fold(1.0_f64, |acc, &x| acc.max(x.abs()))
    }

    /// A named built-in geometry.
    ///
    /// `scenario1-2d`: 3 Tx / 3 Rx in the plane, default target `[50, 50]`.
    /// `scenario2-3d`: 5 Tx / 6 Rx in space, default target `[-500, 600, 550]`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "scenario1-2d" => Scenario::new(
                2,
                vec![
                    vec![-1000.0, -1300.0],
                    vec![500.0, 2000.0],
                    vec![2500.0, 0.0],
                ],
                vec![
                    vec![1500.0, -1800.0],
                    vec![2100.0, 1500.0],
                    vec![-1200.0, 1000.0],
                ],
                vec![50.0, 50.0],
            ),
            "scenario2-3d" => Scenario::new(
                3,
                vec![
                    vec![2000.0, 3000.0, 800.0],
                    vec![2000.0, -3000.0, 1200.0],
                    vec![-2000.0, 3000.0, 1000.0],
                    vec![-2000.0, -3000.0, 1600.0],
                    vec![0.0, 0.0, 1500.0],
                ],
                vec![
                    vec![4000.0, 4000.0, 1000.0],
                    vec![-4500.0, 5000.0, 1500.0],
                    vec![-4500.0, -4500.0, 1000.0],
                    vec![0.0, 6000.0, 1200.0],
                    vec![0.0, -6000.0, 1000.0],
                    vec![-6000.0, 0.0, 1000.0],
                ],
                vec![-500.0, 600.0, 550.0],
            ),
            other => Err(Error::NotFound(format!("unknown scenario `{other}`"))),
        }
    }

    /// Names accepted by [`Scenario::builtin`].
    pub fn builtin_names() -> &'static [&'static str] {
        &["scenario1-2d", "scenario2-3d"]
    }

    /// Random 2-D geometry with antennas on a circle of the given radius and
    /// the target uniform in the concentric disk of half that radius.
    ///
    /// The first two transmitters sit at angles 0 and π and the first two
    /// receivers at π/2 and −π/2; remaining antennas get uniform angles.
    pub fn random_circle(m: usize, n: usize, radius: f64, seed: u64) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::invalid("random_circle needs m >= 2 and n >= 2"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius must be positive and finite"));
        }
        let mut rng = stream_rng(seed, &[STREAM_GEOMETRY, m as u64, n as u64]);
        let on_circle = |theta: f64| vec![radius * theta.cos(), radius * theta.sin()];

        let mut transmitters = vec![on_circle(0.0), on_circle(PI)];
        for _ in 2..m {
            transmitters.push(on_circle(rng.random_range(0.0..2.0 * PI)));
        }
        let mut receivers = vec![on_circle(PI / 2.0), on_circle(-PI / 2.0)];
        for _ in 2..n {
            receivers.push(on_circle(rng.random_range(0.0..2.0 * PI)));
        }

        // Uniform on the disk of radius R/2: radius via sqrt of a uniform.
        let r = 0.5 * radius * rng.random::<f64>().sqrt();
        let theta = rng.random_range(0.0..2.0 * PI);
        let target = vec![r * theta.cos(), r * theta.sin()];

        Scenario::new(2, transmitters, receivers, target)
    }
}

/// Noise-free bistatic range: transmitter-to-target plus target-to-receiver
/// distance in meters.
pub fn bistatic_range(u: &[f64], t: &[f64], s: &[f64]) -> Result<f64> {
    if u.len() != t.len() || u.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: if t.len() != u.len() { t.len() } else { s.len() },
        });
    }
    let mut dt = 0.0;
    let mut ds = 0.0;
    for i in 0..u.len() {
        dt += (u[i] - t[i]) * (u[i] - t[i]);
        ds += (u[i] - s[i]) * (u[i] - s[i]);
    }
    Ok(dt.sqrt() + ds.sqrt())
}

/// Noise-free bistatic ranges for every (m, n) pair, row-major over
/// `(m, n)`: `(1,1), (1,2), ..., (M,N)`.
pub fn bistatic_ranges(scenario: &Scenario) -> Vec<f64> {
    bistatic_ranges_at(
        &scenario.target,
        &scenario.transmitters,
        &scenario.receivers,
    )
}

/// Row-major noise-free bistatic ranges for an explicit geometry.
pub fn bistatic_ranges_at(u: &[f64], tx: &[Vec<f64>], rx: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(tx.len() * rx.len());
    for t in tx {
        let dt = crate::geom::dist(u, t);
        for s in rx {
            out.push(dt + crate::geom::dist(u, s));
        }
    }
    out
}

/// Shared target check used by the SNR model and the CRLB: the target must
/// not coincide with any antenna.
pub(crate) fn check_target_separated(scenario: &Scenario) -> Result<()> {
    for (kind, list) in [
        ("transmitter", &scenario.transmitters),
        ("receiver", &scenario.receivers),
    ] {
        for (i, p) in list.iter().enumerate() {
            if crate::geom::dist(&scenario.target, p) == 0.0 {
                return Err(Error::SingularGeometry(format!(
                    "target coincides with {kind} {}",
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::norm;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bistatic_range_table2_row1() {
        // Independent evaluation of the two norms for the first 2-D pair.
        let expected = ((1050.0f64 * 1050.0 + 1350.0 * 1350.0).sqrt())
            + ((1450.0f64 * 1450.0 + 1850.0 * 1850.0).sqrt());
        let got = bistatic_range(&[50.0, 50.0], &[-1000.0, -1300.0], &[1500.0, -1800.0]).unwrap();
        assert_eq!(got, expected);
        assert_abs_diff_eq!(got, 4060.7949, epsilon = 1e-3);
    }

    #[test]
    fn bistatic_range_degenerate_cases() {
        // Target at the transmitter: only the receiver leg remains.
        let t = [12.0, -7.0, 3.0];
        let s = [100.0, 40.0, -9.0];
        let got = bistatic_range(&t, &t, &s).unwrap();
        assert_eq!(got, crate::geom::dist(&t, &s));

        // Two 3-4-5 triangles.
        assert_eq!(
            bistatic_range(&[0.0, 0.0], &[3.0, 4.0], &[-3.0, -4.0]).unwrap(),
            10.0
        );
    }

    #[test]
    fn bistatic_range_triangle_bound() {
        // BR is never smaller than the transmitter-receiver baseline.
        let u = [320.0, -75.0];
        let t = [-1000.0, -1300.0];
        let s = [2100.0, 1500.0];
        assert!(bistatic_range(&u, &t, &s).unwrap() >= crate::geom::dist(&t, &s));
    }

    #[test]
    fn bistatic_range_dim_mismatch() {
        let err = bistatic_range(&[0.0, 0.0], &[1.0, 2.0, 3.0], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn builtin_scenario1() {
        let s = Scenario::builtin("scenario1-2d").unwrap();
        assert_eq!(s.dim, 2);
        assert_eq!(s.transmitters[0], vec![-1000.0, -1300.0]);
        assert_eq!(s.transmitters[1], vec![500.0, 2000.0]);
        assert_eq!(s.transmitters[2], vec![2500.0, 0.0]);
        assert_eq!(s.receivers[0], vec![1500.0, -1800.0]);
        assert_eq!(s.receivers[1], vec![2100.0, 1500.0]);
        assert_eq!(s.receivers[2], vec![-1200.0, 1000.0]);
        assert_eq!(s.target, vec![50.0, 50.0]);
    }

    #[test]
    fn builtin_scenario2() {
        let s = Scenario::builtin("scenario2-3d").unwrap();
        assert_eq!(s.num_tx(), 5);
        assert_eq!(s.num_rx(), 6);
        assert_eq!(s.receivers[5], vec![-6000.0, 0.0, 1000.0]);
        assert_eq!(s.target, vec![-500.0, 600.0, 550.0]);
    }

    #[test]
    fn builtin_unknown_name() {
        assert!(matches!(
            Scenario::builtin("scenario9"),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn random_circle_pins_first_antennas() {
        for seed in [0, 1, 99] {
            let s = Scenario::random_circle(4, 5, 2000.0, seed).unwrap();
            assert_abs_diff_eq!(s.transmitters[0][0], 2000.0, epsilon = 1e-9);
            assert_abs_diff_eq!(s.transmitters[0][1], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(s.transmitters[1][0], -2000.0, epsilon = 1e-9);
            assert_abs_diff_eq!(s.receivers[0][1], 2000.0, epsilon = 1e-9);
            assert_abs_diff_eq!(s.receivers[1][1], -2000.0, epsilon = 1e-9);
            for p in s.transmitters.iter().chain(s.receivers.iter()) {
                assert_abs_diff_eq!(norm(p), 2000.0, epsilon = 1e-9);
            }
            assert!(norm(&s.target) <= 1000.0);
        }
    }

    #[test]
    fn random_circle_rejects_small_counts() {
        assert!(matches!(
            Scenario::random_circle(1, 3, 2000.0, 0),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            Scenario::random_circle(3, 1, 2000.0, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::new(4, vec![vec![0.0; 4]], vec![vec![0.0; 4]], vec![0.0; 4]).is_err());
        assert!(Scenario::new(2, vec![], vec![vec![0.0; 2]], vec![0.0; 2]).is_err());
        assert!(matches!(
            Scenario::new(2, vec![vec![0.0; 3]], vec![vec![0.0; 2]], vec![0.0; 2]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Scenario::new(
            2,
            vec![vec![f64::NAN, 0.0]],
            vec![vec![0.0; 2]],
            vec![0.0; 2]
        )
        .is_err());
    }

    #[test]
    fn scale_factor_is_max_coordinate() {
        let s1 = Scenario::builtin("scenario1-2d").unwrap();
        assert_eq!(s1.scale_factor(), 2500.0);
        let s2 = Scenario::builtin("scenario2-3d").unwrap();
        assert_eq!(s2.scale_factor(), 6000.0);
    }

    proptest::proptest! {
        #[test]
        fn triangle_bound_holds(
            u in proptest::collection::vec(-5000.0f64..5000.0, 2),
            t in proptest::collection::vec(-5000.0f64..5000.0, 2),
            s in proptest::collection::vec(-5000.0f64..5000.0, 2),
        ) {
            let br = bistatic_range(&u, &t, &s).unwrap();
            // Allow one ulp-scale slack for the two square roots.
            proptest::prop_assert!(br >= crate::geom::dist(&t, &s) - 1e-9);
        }
    }

    #[test]
    fn scenario_from_toml() {
        let text = r#"
            dim = 2
            transmitters = [[-1000.0, -1300.0], [500.0, 2000.0]]
            receivers = [[1500.0, -1800.0]]
            target = [50.0, 50.0]
        "#;
        let s: Scenario = toml::from_str(text).unwrap();
        assert_eq!(s.num_tx(), 2);
        assert_eq!(s.transmitters[0][1], -1300.0);

        let bad = r#"
            dim = 2
            transmitters = [[-1000.0, -1300.0, 5.0]]
            receivers = [[1500.0, -1800.0]]
            target = [50.0, 50.0]
        "#;
        assert!(toml::from_str::<Scenario>(bad).is_err());
    }
}
