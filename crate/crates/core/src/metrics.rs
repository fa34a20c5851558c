//! Accuracy metrics, the CRLB benchmark and analytic complexity counts.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{dist, norm_l1};
use crate::noise::NoiseModel;
use crate::scenario::{check_target_separated, Scenario};

/// Aggregated accuracy and cost figures for one Monte-Carlo batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Root mean squared position error, meters.
    pub rmse: f64,
    /// ℓ1 norm of the mean position error, meters.
    pub bias: f64,
    /// Empirical CDF of the position error: sorted (error, probability).
    pub ecdf: Vec<(f64, f64)>,
    /// Root CRLB benchmark, meters.
    pub root_crlb: f64,
    /// Mean iterations over all trials (diverged runs included).
    pub mean_iterations: f64,
    /// Mean iterations over converged trials only.
    pub mean_iterations_converged: f64,
    /// Fraction of trials that converged.
    pub convergence_rate: f64,
    /// Analytic real-multiplication count at the mean iteration count, when
    /// the method has a complexity row.
    pub rm_count: Option<u64>,
    /// Number of trials aggregated.
    pub trials: usize,
}

impl MetricsReport {
    /// Flat sweep-table row `snr_db,rmse,bias,root_crlb,mean_iters,conv_rate,trials`.
    pub fn csv_row(&self, snr_db: f64) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            snr_db,
            self.rmse,
            self.bias,
            self.root_crlb,
            self.mean_iterations,
            self.convergence_rate,
            self.trials
        )
    }

    /// Header matching [`MetricsReport::csv_row`].
    pub fn csv_header() -> &'static str {
        "snr_db,rmse,bias,root_crlb,mean_iters,conv_rate,trials"
    }

    /// Structured-text rendering of the report.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metrics report serializes")
    }
}

/// Root mean squared error of a batch of estimates, meters.
pub fn rmse(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("rmse of an empty batch"));
    }
    let sum_sq: f64 = estimates
        .iter()
        .map(|e| {
            let d = dist(e, truth);
            d * d
        })
        .sum();
    Ok((sum_sq / estimates.len() as f64).sqrt())
}

/// ℓ1 norm of the mean estimation error, meters.
pub fn bias(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("bias of an empty batch"));
    }
    let dim = truth.len();
    let mut mean_err = vec![0.0; dim];
    for e in estimates {
        for i in 0..dim {
            mean_err[i] += e[i] - truth[i];
        }
    }
    for v in &mut mean_err {
        *v /= estimates.len() as f64;
    }
    Ok(norm_l1(&mean_err))
}

/// Empirical CDF of a batch of scalar errors: sorted (value, k/L) pairs.
pub fn ecdf(errors: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return Err(Error::invalid("ecdf of an empty batch"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let l = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(k, v)| (v, (k + 1) as f64 / l))
        .collect())
}

/// Evaluate an ECDF at a point (right-continuous step function).
pub fn ecdf_at(cdf: &[(f64, f64)], x: f64) -> f64 {
    cdf.iter()
        .rev()
        .find(|(v, _)| *v <= x)
        .map_or(0.0, |(_, p)| *p)
}

/// Smallest error at which an ECDF reaches probability `q`.
pub fn ecdf_quantile(cdf: &[(f64, f64)], q: f64) -> f64 {
    cdf.iter()
        .find(|(_, p)| *p >= q)
        .map_or(f64::INFINITY, |(v, _)| *v)
}

/// Range Jacobian row: ∂r_mn/∂u = (u−t)ᵀ/‖u−t‖ + (u−s)ᵀ/‖u−s‖.
fn range_gradient(u: &[f64], t: &[f64], s: &[f64]) -> Vec<f64> {
    let dt = dist(u, t);
    let ds = dist(u, s);
    (0..u.len())
        .map(|i| (u[i] - t[i]) / dt + (u[i] - s[i]) / ds)
        .collect()
}

/// CRLB of the target position for Gaussian range noise with known antenna
/// positions: inverse of `Jᵀ Q_r⁻¹ J` over the range Jacobian `J`.
///
/// Returns the D×D bound matrix and its trace root in meters.
pub fn crlb(scenario: &Scenario, noise: &NoiseModel) -> Result<(DMatrix<f64>, f64)> {
    noise.validate_for(scenario)?;
    check_target_separated(scenario)?;
    let d = scenario.dim;
    let mut fim = DMatrix::<f64>::zeros(d, d);
    let mut k = 0;
    for t in &scenario.transmitters {
        for s in &scenario.receivers {
            let j = range_gradient(&scenario.target, t, s);
            let inv_var = 1.0 / noise.per_pair_variance[k];
            for a in 0..d {
                for b in 0..d {
                    fim[(a, b)] += inv_var * j[a] * j[b];
                }
            }
            k += 1;
        }
    }
    invert_fim(fim)
}

/// CRLB of the target position when antenna positions are uncertain: the
/// unknowns are `[u; p]` with Gaussian priors on the antenna block, and the
/// reported bound is the position block of the joint inverse, evaluated via
/// the Schur complement.
pub fn crlb_with_antenna_errors(
    scenario: &Scenario,
    noise: &NoiseModel,
) -> Result<(DMatrix<f64>, f64)> {
    noise.validate_for(scenario)?;
    check_target_separated(scenario)?;
    if !noise.has_antenna_errors() {
        return Err(Error::invalid("noise model has no antenna variances"));
    }
    let d = scenario.dim;
    let m = scenario.num_tx();
    let n = scenario.num_rx();
    let p_len = d * (m + n);

    let mut fim_uu = DMatrix::<f64>::zeros(d, d);
    let mut fim_up = DMatrix::<f64>::zeros(d, p_len);
    let mut fim_pp = DMatrix::<f64>::zeros(p_len, p_len);

    let u = &scenario.target;
    let mut k = 0;
    for (mi, t) in scenario.transmitters.iter().enumerate() {
        for (ni, s) in scenario.receivers.iter().enumerate() {
            let inv_var = 1.0 / noise.per_pair_variance[k];
            let ju = range_gradient(u, t, s);
            // ∂r/∂t_m = −(u−t)/‖u−t‖, ∂r/∂s_n = −(u−s)/‖u−s‖.
            let dt = dist(u, t);
            let ds = dist(u, s);
            let jt: Vec<f64> = (0..d).map(|i| -(u[i] - t[i]) / dt).collect();
            let js: Vec<f64> = (0..d).map(|i| -(u[i] - s[i]) / ds).collect();
            let t_off = mi * d;
            let s_off = (m + ni) * d;

            for a in 0..d {
                for b in 0..d {
                    fim_uu[(a, b)] += inv_var * ju[a] * ju[b];
                    fim_up[(a, t_off + b)] += inv_var * ju[a] * jt[b];
                    fim_up[(a, s_off + b)] += inv_var * ju[a] * js[b];
                    fim_pp[(t_off + a, t_off + b)] += inv_var * jt[a] * jt[b];
                    fim_pp[(s_off + a, s_off + b)] += inv_var * js[a] * js[b];
                    fim_pp[(t_off + a, s_off + b)] += inv_var * jt[a] * js[b];
                    fim_pp[(s_off + a, t_off + b)] += inv_var * js[a] * jt[b];
                }
            }
            k += 1;
        }
    }

    // Gaussian priors from the observed antenna positions.
    for (mi, var) in noise.antenna_variance_t.iter().enumerate() {
        for a in 0..d {
            fim_pp[(mi * d + a, mi * d + a)] += 1.0 / var;
        }
    }
    for (ni, var) in noise.antenna_variance_s.iter().enumerate() {
        let off = (m + ni) * d;
        for a in 0..d {
            fim_pp[(off + a, off + a)] += 1.0 / var;
        }
    }

    // Position block of the joint inverse:
    // (FIM_uu − FIM_up FIM_pp⁻¹ FIM_pu)⁻¹.
    let pp_inv = fim_pp
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("antenna FIM block is singular".into()))?;
    let schur = &fim_uu - &fim_up * pp_inv * fim_up.transpose();
    invert_fim(schur)
}

fn invert_fim(fim: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let bound = fim
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("Fisher information is singular".into()))?;
    let root = bound.trace().sqrt();
    if !root.is_finite() || root <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "Fisher information is not positive definite".into(),
        ));
    }
    Ok((bound, root))
}

/// Estimator families with a complexity row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RmMethod {
    Tswls,
    TswlsMns,
    Icwls,
    Lpnn,
    Mlpnn,
    Rnfnn,
}

impl FromStr for RmMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tswls" => Ok(RmMethod::Tswls),
            "tswls-mns" => Ok(RmMethod::TswlsMns),
            "icwls" => Ok(RmMethod::Icwls),
            "lpnn" => Ok(RmMethod::Lpnn),
            "mlpnn" => Ok(RmMethod::Mlpnn),
            "rnfnn" => Ok(RmMethod::Rnfnn),
            other => Err(Error::NotFound(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for RmMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RmMethod::Tswls => "tswls",
            RmMethod::TswlsMns => "tswls-mns",
            RmMethod::Icwls => "icwls",
            RmMethod::Lpnn => "lpnn",
            RmMethod::Mlpnn => "mlpnn",
            RmMethod::Rnfnn => "rnfnn",
        };
        f.write_str(name)
    }
}

/// Analytic real-multiplication count for a method. Iterative methods scale
/// with `iters`; the closed-form ones ignore it.
pub fn rm_count(method: RmMethod, m: u64, n: u64, d: u64, iters: u64) -> u64 {
    let mn = m * n;
    match method {
        RmMethod::Tswls => {
            3 * mn.pow(3)
                + mn.pow(2) * (m + d)
                + 2 * mn * (m + d).pow(2)
                + mn * (m + d)
                + 4 * (m + d).pow(3)
                + d * (m + d).pow(2)
                + 21 * (m + 3)
                + 27
        }
        RmMethod::TswlsMns => 6 * mn.pow(3) + 2 * d * mn.pow(2) + 14 * d * mn + 6 * n + 63,
        RmMethod::Icwls => {
            iters * (mn.pow(3) + (m + d).pow(3) + 3 * m.pow(3)) + mn.pow(3) + (m + d).pow(3)
        }
        RmMethod::Lpnn => iters * ((3 * d + 6) * (m + n)),
        RmMethod::Mlpnn => iters * (mn + (3 * d + 6) * (m + n)),
        RmMethod::Rnfnn => iters * (mn + (2 * d + 4) * (m + n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::DEFAULT_K2;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scenario1() -> Scenario {
        Scenario::builtin("scenario1-2d").unwrap()
    }

    #[test]
    fn rmse_basics() {
        let truth = vec![1.0, 2.0];
        assert_eq!(rmse(&[truth.clone(), truth.clone()], &truth).unwrap(), 0.0);
        let ests = vec![vec![4.0, 6.0], vec![-2.0, -2.0]];
        assert_abs_diff_eq!(rmse(&ests, &truth).unwrap(), 5.0, epsilon = 1e-12);
        assert!(rmse(&[], &truth).is_err());
    }

    #[test]
    fn rmse_matches_independent_recomputation() {
        let truth = vec![10.0, -5.0, 2.0];
        let ests: Vec<Vec<f64>> = (0..17)
            .map(|i| {
                let t = i as f64;
                vec![10.0 + t.sin(), -5.0 + t.cos(), 2.0 + 0.1 * t]
            })
            .collect();
        let mut acc = 0.0;
        for e in &ests {
            for j in 0..3 {
                acc += (e[j] - truth[j]).powi(2);
            }
        }
        let expected = (acc / 17.0).sqrt();
        assert_abs_diff_eq!(rmse(&ests, &truth).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn bias_basics() {
        let truth = vec![0.0, 0.0];
        // Symmetric estimates cancel.
        let sym = vec![vec![3.0, -1.0], vec![-3.0, 1.0]];
        assert_abs_diff_eq!(bias(&sym, &truth).unwrap(), 0.0, epsilon = 1e-12);
        // Single estimate: ℓ1 norm of the offset.
        let one = vec![vec![1.0, -2.0]];
        assert_abs_diff_eq!(bias(&one, &truth).unwrap(), 3.0, epsilon = 1e-12);
        assert!(bias(&[], &truth).is_err());
    }

    #[test]
    fn ecdf_basics() {
        let cdf = ecdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(cdf, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        assert_abs_diff_eq!(ecdf_at(&cdf, 2.0), 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(ecdf_at(&cdf, 0.5), 0.0);
        assert_eq!(ecdf_at(&cdf, 3.0), 1.0);
        assert_eq!(ecdf_quantile(&cdf, 0.5), 2.0);

        let flat = ecdf(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(flat.last().unwrap(), &(2.0, 1.0));
        assert!(ecdf(&[]).is_err());
    }

    proptest! {
        #[test]
        fn ecdf_is_monotone_and_terminal(errors in proptest::collection::vec(0.0f64..1e6, 1..200)) {
            let cdf = ecdf(&errors).unwrap();
            prop_assert_eq!(cdf.len(), errors.len());
            for w in cdf.windows(2) {
                prop_assert!(w[0].0 <= w[1].0);
                prop_assert!(w[0].1 <= w[1].1);
            }
            prop_assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
            prop_assert!((cdf[0].1 - 1.0 / errors.len() as f64).abs() < 1e-12);
        }

        #[test]
        fn rmse_dominates_bias(
            offsets in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50)
        ) {
            let truth = vec![7.0, -3.0];
            let ests: Vec<Vec<f64>> = offsets
                .iter()
                .map(|(a, b)| vec![truth[0] + a, truth[1] + b])
                .collect();
            let r = rmse(&ests, &truth).unwrap();
            let b = bias(&ests, &truth).unwrap();
            // RMSE ≥ ‖mean error‖₂ ≥ ‖mean error‖₁/√D.
            prop_assert!(r >= b / (2.0f64).sqrt() - 1e-9);
        }
    }

    #[test]
    fn crlb_scales_with_variance() {
        let s = scenario1();
        let a = NoiseModel::uniform(3, 3, 1.0).unwrap();
        let b = NoiseModel::uniform(3, 3, 4.0).unwrap();
        let (ba, ra) = crlb(&s, &a).unwrap();
        let (bb, rb) = crlb(&s, &b).unwrap();
        assert_abs_diff_eq!(rb / ra, 2.0, epsilon = 1e-12);
        for (x, y) in ba.iter().zip(bb.iter()) {
            assert_abs_diff_eq!(4.0 * x, *y, epsilon = x.abs() * 1e-9);
        }
    }

    #[test]
    fn crlb_snr_ratio() {
        let s = scenario1();
        let hi = NoiseModel::from_snr(&s, 30.0, DEFAULT_K2).unwrap();
        let lo = NoiseModel::from_snr(&s, 10.0, DEFAULT_K2).unwrap();
        let (_, r_hi) = crlb(&s, &hi).unwrap();
        let (_, r_lo) = crlb(&s, &lo).unwrap();
        assert_abs_diff_eq!(r_lo / r_hi, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn crlb_matches_finite_difference_jacobian() {
        let s = scenario1();
        let noise = NoiseModel::from_snr(&s, 0.0, DEFAULT_K2).unwrap();
        let (bound, root) = crlb(&s, &noise).unwrap();

        // Numerically differentiated range Jacobian.
        let mut fim = DMatrix::<f64>::zeros(2, 2);
        let step = 1e-4;
        let mut k = 0;
        for t in &s.transmitters {
            for r in &s.receivers {
                let mut j = [0.0; 2];
                for i in 0..2 {
                    let mut up = s.target.clone();
                    up[i] += step;
                    let mut dn = s.target.clone();
                    dn[i] -= step;
                    let plus = crate::scenario::bistatic_range(&up, t, r).unwrap();
                    let minus = crate::scenario::bistatic_range(&dn, t, r).unwrap();
                    j[i] = (plus - minus) / (2.0 * step);
                }
                let inv_var = 1.0 / noise.per_pair_variance[k];
                for a in 0..2 {
                    for b in 0..2 {
                        fim[(a, b)] += inv_var * j[a] * j[b];
                    }
                }
                k += 1;
            }
        }
        let fd_bound = fim.try_inverse().unwrap();
        for (x, y) in bound.iter().zip(fd_bound.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = x.abs() * 1e-6);
        }
        assert_abs_diff_eq!(root, fd_bound.trace().sqrt(), epsilon = root * 1e-6);
    }

    #[test]
    fn crlb_singular_geometry() {
        // One transmitter and one receiver in 2-D leave the FIM rank one.
        let s = Scenario::new(
            2,
            vec![vec![-1000.0, 0.0]],
            vec![vec![1000.0, 0.0]],
            vec![0.0, 500.0],
        )
        .unwrap();
        let noise = NoiseModel::uniform(1, 1, 1.0).unwrap();
        assert!(matches!(
            crlb(&s, &noise),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn antenna_crlb_zero_variance_limit() {
        let s = Scenario::builtin("scenario2-3d").unwrap();
        let plain = NoiseModel::from_snr(&s, 10.0, DEFAULT_K2).unwrap();
        let pinned = plain.clone().with_antenna_variance(5, 6, 1e-12).unwrap();
        let (_, r_plain) = crlb(&s, &plain).unwrap();
        let (_, r_pinned) = crlb_with_antenna_errors(&s, &pinned).unwrap();
        assert_abs_diff_eq!(r_pinned, r_plain, epsilon = r_plain * 1e-9);
    }

    #[test]
    fn antenna_crlb_dominates_plain() {
        let s = Scenario::builtin("scenario2-3d").unwrap();
        let plain = NoiseModel::from_snr(&s, 10.0, DEFAULT_K2).unwrap();
        let uncertain = plain.clone().with_antenna_variance(5, 6, 10.0).unwrap();
        let (b_plain, r_plain) = crlb(&s, &plain).unwrap();
        let (b_ant, r_ant) = crlb_with_antenna_errors(&s, &uncertain).unwrap();
        assert!(r_ant > r_plain);
        // Loewner order: the difference is positive semi-definite.
        let diff = &b_ant - &b_plain;
        let eigs = diff.symmetric_eigenvalues();
        for e in eigs.iter() {
            assert!(*e > -1e-9 * r_plain * r_plain, "eigenvalue {e}");
        }
    }

    #[test]
    fn antenna_crlb_matches_finite_difference_joint_jacobian() {
        let s = Scenario::builtin("scenario2-3d").unwrap();
        let noise = NoiseModel::from_snr(&s, 10.0, DEFAULT_K2)
            .unwrap()
            .with_antenna_variance(5, 6, 10.0)
            .unwrap();
        let (bound, _) = crlb_with_antenna_errors(&s, &noise).unwrap();

        // Joint FIM via a finite-difference Jacobian over θ = [u; p].
        let d = 3;
        let (m, n) = (5, 6);
        let theta_len = d * (1 + m + n);
        let pack = |u: &[f64], tx: &[Vec<f64>], rx: &[Vec<f64>]| -> Vec<f64> {
            let mut v = u.to_vec();
            for p in tx.iter().chain(rx.iter()) {
                v.extend_from_slice(p);
            }
            v
        };
        let ranges = |theta: &[f64]| -> Vec<f64> {
            let u = &theta[..d];
            let tx: Vec<Vec<f64>> = (0..m)
                .map(|i| theta[d + i * d..d + (i + 1) * d].to_vec())
                .collect();
            let rx: Vec<Vec<f64>> = (0..n)
                .map(|i| theta[d * (1 + m) + i * d..d * (1 + m) + (i + 1) * d].to_vec())
                .collect();
            crate::scenario::bistatic_ranges_at(u, &tx, &rx)
        };
        let theta0 = pack(&s.target, &s.transmitters, &s.receivers);
        let step = 1e-4;
        let mut jac = DMatrix::<f64>::zeros(m * n, theta_len);
        for col in 0..theta_len {
            let mut up = theta0.clone();
            up[col] += step;
            let mut dn = theta0.clone();
            dn[col] -= step;
            let plus = ranges(&up);
            let minus = ranges(&dn);
            for row in 0..m * n {
                jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * step);
            }
        }
        let mut fim = DMatrix::<f64>::zeros(theta_len, theta_len);
        for row in 0..m * n {
            let inv_var = 1.0 / noise.per_pair_variance[row];
            for a in 0..theta_len {
                for b in 0..theta_len {
                    fim[(a, b)] += inv_var * jac[(row, a)] * jac[(row, b)];
                }
            }
        }
        for i in 0..d * (m + n) {
            let var = if i < d * m {
                noise.antenna_variance_t[i / d]
            } else {
                noise.antenna_variance_s[(i - d * m) / d]
            };
            fim[(d + i, d + i)] += 1.0 / var;
        }
        let joint_inv = fim.try_inverse().unwrap();
        for a in 0..d {
            for b in 0..d {
                assert_abs_diff_eq!(
                    bound[(a, b)],
                    joint_inv[(a, b)],
                    epsilon = bound[(a, b)].abs().max(1e-12) * 1e-6
                );
            }
        }
    }

    #[test]
    fn rm_count_table_rows() {
        for iters in [1u64, 10, 1000] {
            assert_eq!(rm_count(RmMethod::Rnfnn, 3, 3, 2, iters), 57 * iters);
            assert_eq!(rm_count(RmMethod::Mlpnn, 3, 3, 2, iters), 81 * iters);
        }
        // The weighting costs MN extra multiplications per iteration.
        for (m, n, d) in [(3, 3, 2), (5, 6, 3), (2, 8, 2), (10, 10, 3)] {
            let diff = rm_count(RmMethod::Mlpnn, m, n, d, 1) - rm_count(RmMethod::Lpnn, m, n, d, 1);
            assert_eq!(diff, m * n);
        }
    }

    #[test]
    fn rm_count_closed_forms() {
        // Independent arithmetic for M = 3, N = 3, D = 2.
        let (m, n, d): (u64, u64, u64) = (3, 3, 2);
        let mn = m * n;
        let tswls = 3 * mn * mn * mn
            + mn * mn * (m + d)
            + 2 * mn * (m + d) * (m + d)
            + mn * (m + d)
            + 4 * (m + d) * (m + d) * (m + d)
            + d * (m + d) * (m + d)
            + 21 * (m + 3)
            + 27;
        assert_eq!(rm_count(RmMethod::Tswls, m, n, d, 1), tswls);
        assert_eq!(tswls, 3790);

        let mns = 6 * mn * mn * mn + 2 * d * mn * mn + 14 * d * mn + 6 * n + 63;
        assert_eq!(rm_count(RmMethod::TswlsMns, m, n, d, 1), mns);
        assert_eq!(mns, 5031);

        let iters = 2;
        let icwls = iters * (mn * mn * mn + (m + d) * (m + d) * (m + d) + 3 * m * m * m)
            + mn * mn * mn
            + (m + d) * (m + d) * (m + d);
        assert_eq!(rm_count(RmMethod::Icwls, m, n, d, iters), icwls);
        assert_eq!(icwls, 2724);
    }

    #[test]
    fn rm_count_ordering() {
        for m in 1..=6u64 {
            for n in 1..=6u64 {
                for d in [2u64, 3] {
                    assert!(
                        rm_count(RmMethod::Rnfnn, m, n, d, 500)
                            < rm_count(RmMethod::Mlpnn, m, n, d, 500)
                    );
                }
            }
        }
    }

    #[test]
    fn rm_method_parsing() {
        assert_eq!("rnfnn".parse::<RmMethod>().unwrap(), RmMethod::Rnfnn);
        assert_eq!("tswls-mns".parse::<RmMethod>().unwrap(), RmMethod::TswlsMns);
        assert!(matches!(
            "qr-magic".parse::<RmMethod>(),
            Err(Error::NotFound(_))
        ));
        assert_eq!(RmMethod::Icwls.to_string(), "icwls");
    }

    #[test]
    fn report_csv_row_shape() {
        let report = MetricsReport {
            rmse: 1.5,
            bias: 0.1,
            ecdf: vec![(1.0, 1.0)],
            root_crlb: 1.4,
            mean_iterations: 100.0,
            mean_iterations_converged: 100.0,
            convergence_rate: 1.0,
            rm_count: Some(5700),
            trials: 10,
        };
        assert_eq!(report.csv_row(20.0), "20,1.5,0.1,1.4,100,1,10");
        assert_eq!(
            MetricsReport::csv_header(),
            "snr_db,rmse,bias,root_crlb,mean_iters,conv_rate,trials"
        );
        let toml_text = report.to_toml();
        assert!(toml_text.contains("rmse = 1.5"));
    }
}
