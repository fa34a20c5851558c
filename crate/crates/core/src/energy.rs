//! Energy functions and the exact gradient-flow fields of both networks.
//!
//! Everything here is a pure function of its inputs; the solver integrates
//! the [`GradientFlow`] implementations with explicit Euler steps, and the
//! typed free functions expose the same math on structured states.
//!
//! Hot-loop code walks several parallel arrays by antenna index, so plain
//! indexed loops are used throughout.
//!
//! Layout conventions for flat state vectors:
//! - relaxed network: `[u | h_t | h_s]`, length `D + M + N`;
//! - extended relaxed network: `[u | t_1..t_M | s_1..s_N | h_t | h_s]`,
//!   length `D + (D+1)(M+N)`;
//! - Lagrangian network: `[u | g_t | g_s | λ_t | λ_s]`, length `D + 2M + 2N`.

#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geom::{dist, dist_sq};
use crate::measurement::MeasurementSet;
use crate::scenario::Scenario;

/// Neuron state of the relaxed network: position estimate plus auxiliary
/// transmitter/receiver ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct RnfState {
    pub u: Vec<f64>,
    pub h_t: Vec<f64>,
    pub h_s: Vec<f64>,
}

impl RnfState {
    /// Flatten as `[u | h_t | h_s]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.u.len() + self.h_t.len() + self.h_s.len());
        v.extend_from_slice(&self.u);
        v.extend_from_slice(&self.h_t);
        v.extend_from_slice(&self.h_s);
        v
    }

    /// Rebuild from the flat layout.
    pub fn from_slice(x: &[f64], dim: usize, m: usize, n: usize) -> Self {
        debug_assert_eq!(x.len(), dim + m + n);
        RnfState {
            u: x[..dim].to_vec(),
            h_t: x[dim..dim + m].to_vec(),
            h_s: x[dim + m..].to_vec(),
        }
    }
}

/// Neuron state of the extended relaxed network: antenna positions join the
/// optimization variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedRnfState {
    pub u: Vec<f64>,
    pub t_hat: Vec<Vec<f64>>,
    pub s_hat: Vec<Vec<f64>>,
    pub h_t: Vec<f64>,
    pub h_s: Vec<f64>,
}

impl ExtendedRnfState {
    /// Flatten as `[u | t_hat | s_hat | h_t | h_s]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let dim = self.u.len();
        let mut v = Vec::with_capacity(dim + (dim + 1) * (self.t_hat.len() + self.s_hat.len()));
        v.extend_from_slice(&self.u);
        for p in &self.t_hat {
            v.extend_from_slice(p);
        }
        for p in &self.s_hat {
            v.extend_from_slice(p);
        }
        v.extend_from_slice(&self.h_t);
        v.extend_from_slice(&self.h_s);
        v
    }

    /// Rebuild from the flat layout.
    pub fn from_slice(x: &[f64], dim: usize, m: usize, n: usize) -> Self {
        debug_assert_eq!(x.len(), dim + (dim + 1) * (m + n));
        let mut at = dim;
        let mut take_points = |count: usize| -> Vec<Vec<f64>> {
            (0..count)
                .map(|_| {
                    let p = x[at..at + dim].to_vec();
                    at += dim;
                    p
                })
                .collect()
        };
        let t_hat = take_points(m);
        let s_hat = take_points(n);
        ExtendedRnfState {
            u: x[..dim].to_vec(),
            t_hat,
            s_hat,
            h_t: x[at..at + m].to_vec(),
            h_s: x[at + m..].to_vec(),
        }
    }
}

/// Joint state of the Lagrangian network: variable neurons plus multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LpnnState {
    pub u: Vec<f64>,
    pub g_t: Vec<f64>,
    pub g_s: Vec<f64>,
    pub lambda_t: Vec<f64>,
    pub lambda_s: Vec<f64>,
}

impl LpnnState {
    /// Flatten as `[u | g_t | g_s | λ_t | λ_s]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.u.len() + 2 * self.g_t.len() + 2 * self.g_s.len());
        v.extend_from_slice(&self.u);
        v.extend_from_slice(&self.g_t);
        v.extend_from_slice(&self.g_s);
        v.extend_from_slice(&self.lambda_t);
        v.extend_from_slice(&self.lambda_s);
        v
    }

    /// Rebuild from the flat layout.
    pub fn from_slice(x: &[f64], dim: usize, m: usize, n: usize) -> Self {
        debug_assert_eq!(x.len(), dim + 2 * m + 2 * n);
        LpnnState {
            u: x[..dim].to_vec(),
            g_t: x[dim..dim + m].to_vec(),
            g_s: x[dim + m..dim + m + n].to_vec(),
            lambda_t: x[dim + m + n..dim + 2 * m + n].to_vec(),
            lambda_s: x[dim + 2 * m + n..].to_vec(),
        }
    }
}

/// Borrowed views of one flat state: the five blocks of the extended and
/// Lagrangian layouts.
type StateParts<'a> = (&'a [f64], &'a [f64], &'a [f64], &'a [f64], &'a [f64]);

/// A state-derivative field the solver can integrate.
pub trait GradientFlow {
    /// Length of the flat state vector.
    fn state_len(&self) -> usize;
    /// Write dx/dt into `out`.
    fn derivative_into(&self, x: &[f64], out: &mut [f64]);
}

/// Shared geometry/measurement data in flat form.
struct FlowData {
    dim: usize,
    m: usize,
    n: usize,
    /// Transmitter coordinates, M·D flat.
    tx: Vec<f64>,
    /// Receiver coordinates, N·D flat.
    rx: Vec<f64>,
    /// Measured ranges, M·N row-major.
    br: Vec<f64>,
    /// Normalized weights, M·N row-major.
    w: Vec<f64>,
}

impl FlowData {
    fn new(dim: usize, tx: &[Vec<f64>], rx: &[Vec<f64>], br: &[f64], w: &[f64]) -> Self {
        FlowData {
            dim,
            m: tx.len(),
            n: rx.len(),
            tx: tx.iter().flatten().copied().collect(),
            rx: rx.iter().flatten().copied().collect(),
            br: br.to_vec(),
            w: w.to_vec(),
        }
    }

    #[inline]
    fn tx_at(&self, m: usize) -> &[f64] {
        &self.tx[m * self.dim..(m + 1) * self.dim]
    }

    #[inline]
    fn rx_at(&self, n: usize) -> &[f64] {
        &self.rx[n * self.dim..(n + 1) * self.dim]
    }

    /// Constraint gaps v = h² − ‖u−p‖² for both antenna groups.
    fn gaps(&self, u: &[f64], h_t: &[f64], h_s: &[f64], v_t: &mut [f64], v_s: &mut [f64]) {
        for m in 0..self.m {
            v_t[m] = h_t[m] * h_t[m] - dist_sq(u, self.tx_at(m));
        }
        for n in 0..self.n {
            v_s[n] = h_s[n] * h_s[n] - dist_sq(u, self.rx_at(n));
        }
    }

    /// Weighted residual row sums (per transmitter) and column sums (per
    /// receiver) of r̃ − h_t − h_s.
    fn residual_sums(&self, h_t: &[f64], h_s: &[f64], row: &mut [f64], col: &mut [f64]) {
        row.fill(0.0);
        col.fill(0.0);
        let mut k = 0;
        for m in 0..self.m {
            for n in 0..self.n {
                let e = self.w[k] * (self.br[k] - h_t[m] - h_s[n]);
                row[m] += e;
                col[n] += e;
                k += 1;
            }
        }
    }

    /// ½ Σ w (r̃ − h_t − h_s)².
    fn half_weighted_residual(&self, h_t: &[f64], h_s: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut k = 0;
        for m in 0..self.m {
            for n in 0..self.n {
                let e = self.br[k] - h_t[m] - h_s[n];
                acc += self.w[k] * e * e;
                k += 1;
            }
        }
        0.5 * acc
    }
}

/// Gradient flow of the relaxed energy function (known antenna positions).
pub struct RnfFlow {
    data: FlowData,
    rho: f64,
}

impl RnfFlow {
    /// Flow over the scenario's true antenna positions.
    pub fn new(scenario: &Scenario, meas: &MeasurementSet, rho: f64) -> Self {
        Self::with_geometry(
            scenario.dim,
            &scenario.transmitters,
            &scenario.receivers,
            &meas.br,
            &meas.weights,
            rho,
        )
    }

    /// Flow over explicit antenna positions (used for normalized solves).
    pub fn with_geometry(
        dim: usize,
        tx: &[Vec<f64>],
        rx: &[Vec<f64>],
        br: &[f64],
        w: &[f64],
        rho: f64,
    ) -> Self {
        RnfFlow {
            data: FlowData::new(dim, tx, rx, br, w),
            rho,
        }
    }

    /// Relaxed energy at a flat state.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let d = &self.data;
        let (u, rest) = x.split_at(d.dim);
        let (h_t, h_s) = rest.split_at(d.m);
        let mut v_t = vec![0.0; d.m];
        let mut v_s = vec![0.0; d.n];
        d.gaps(u, h_t, h_s, &mut v_t, &mut v_s);
        let penalty: f64 =
            v_t.iter().map(|v| v * v).sum::<f64>() + v_s.iter().map(|v| v * v).sum::<f64>();
        d.half_weighted_residual(h_t, h_s) + 0.25 * self.rho * penalty
    }
}

impl GradientFlow for RnfFlow {
    fn state_len(&self) -> usize {
        self.data.dim + self.data.m + self.data.n
    }

    fn derivative_into(&self, x: &[f64], out: &mut [f64]) {
        let d = &self.data;
        let (u, rest) = x.split_at(d.dim);
        let (h_t, h_s) = rest.split_at(d.m);
        let mut v_t = vec![0.0; d.m];
        let mut v_s = vec![0.0; d.n];
        let mut row = vec![0.0; d.m];
        let mut col = vec![0.0; d.n];
        d.gaps(u, h_t, h_s, &mut v_t, &mut v_s);
        d.residual_sums(h_t, h_s, &mut row, &mut col);

        let (du, drest) = out.split_at_mut(d.dim);
        let (dh_t, dh_s) = drest.split_at_mut(d.m);
        du.fill(0.0);
        for m in 0..d.m {
            let t = d.tx_at(m);
            for i in 0..d.dim {
                du[i] += self.rho * v_t[m] * (u[i] - t[i]);
            }
            dh_t[m] = row[m] - self.rho * h_t[m] * v_t[m];
        }
        for n in 0..d.n {
            let s = d.rx_at(n);
            for i in 0..d.dim {
                du[i] += self.rho * v_s[n] * (u[i] - s[i]);
            }
            dh_s[n] = col[n] - self.rho * h_s[n] * v_s[n];
        }
    }
}

/// Gradient flow of the extended relaxed energy (antenna positions are
/// state). The antenna rows follow the network's printed dynamics, whose
/// data-attachment coefficient is `w` rather than the `2w` a literal
/// gradient of the extended energy would give; equivalently, this is the
/// exact negative gradient of the energy with the antenna prior halved.
pub struct ExtendedRnfFlow {
    dim: usize,
    m: usize,
    n: usize,
    /// Observed transmitter coordinates, M·D flat.
    observed_tx: Vec<f64>,
    /// Observed receiver coordinates, N·D flat.
    observed_rx: Vec<f64>,
    br: Vec<f64>,
    w: Vec<f64>,
    w_t: Vec<f64>,
    w_s: Vec<f64>,
    rho: f64,
}

impl ExtendedRnfFlow {
    /// Flow for an antenna-error-mode measurement set.
    pub fn new(meas: &MeasurementSet, dim: usize, rho: f64) -> Result<Self> {
        let (obs_t, obs_s) = observed_antennas(meas)?;
        Ok(Self::with_geometry(
            dim,
            obs_t,
            obs_s,
            &meas.br,
            &meas.weights,
            &meas.antenna_weights_t,
            &meas.antenna_weights_s,
            rho,
        ))
    }

    /// Flow over explicit observed positions (used for normalized solves).
    #[allow(clippy::too_many_arguments)]
    pub fn with_geometry(
        dim: usize,
        observed_tx: &[Vec<f64>],
        observed_rx: &[Vec<f64>],
        br: &[f64],
        w: &[f64],
        w_t: &[f64],
        w_s: &[f64],
        rho: f64,
    ) -> Self {
        ExtendedRnfFlow {
            dim,
            m: observed_tx.len(),
            n: observed_rx.len(),
            observed_tx: observed_tx.iter().flatten().copied().collect(),
            observed_rx: observed_rx.iter().flatten().copied().collect(),
            br: br.to_vec(),
            w: w.to_vec(),
            w_t: w_t.to_vec(),
            w_s: w_s.to_vec(),
            rho,
        }
    }

    fn split<'b>(&self, x: &'b [f64]) -> StateParts<'b> {
        let (u, rest) = x.split_at(self.dim);
        let (t_hat, rest) = rest.split_at(self.m * self.dim);
        let (s_hat, rest) = rest.split_at(self.n * self.dim);
        let (h_t, h_s) = rest.split_at(self.m);
        (u, t_hat, s_hat, h_t, h_s)
    }

    /// Extended relaxed energy at a flat state.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.energy_with_prior_coeff(x, 1.0)
    }

    /// Antenna prior Σ w_t‖t̃−t‖² + Σ w_s‖s̃−s‖² at a flat state.
    pub fn antenna_prior(&self, x: &[f64]) -> f64 {
        let (_, t_hat, s_hat, _, _) = self.split(x);
        let mut acc = 0.0;
        for m in 0..self.m {
            acc += self.w_t[m]
                * dist_sq(
                    &t_hat[m * self.dim..(m + 1) * self.dim],
                    &self.observed_tx[m * self.dim..(m + 1) * self.dim],
                );
        }
        for n in 0..self.n {
            acc += self.w_s[n]
                * dist_sq(
                    &s_hat[n * self.dim..(n + 1) * self.dim],
                    &self.observed_rx[n * self.dim..(n + 1) * self.dim],
                );
        }
        acc
    }

    /// Energy with the antenna prior scaled by `coeff`. `coeff = 0.5` is the
    /// potential whose exact negative gradient the antenna rows follow.
    pub fn energy_with_prior_coeff(&self, x: &[f64], coeff: f64) -> f64 {
        let (u, t_hat, s_hat, h_t, h_s) = self.split(x);
        let mut acc = 0.0;
        let mut k = 0;
        for m in 0..self.m {
            for n in 0..self.n {
                let e = self.br[k] - h_t[m] - h_s[n];
                acc += self.w[k] * e * e;
                k += 1;
            }
        }
        let mut energy = 0.5 * acc + coeff * self.antenna_prior(x);
        let mut penalty = 0.0;
        for m in 0..self.m {
            let v = h_t[m] * h_t[m] - dist_sq(u, &t_hat[m * self.dim..(m + 1) * self.dim]);
            penalty += v * v;
        }
        for n in 0..self.n {
            let v = h_s[n] * h_s[n] - dist_sq(u, &s_hat[n * self.dim..(n + 1) * self.dim]);
            penalty += v * v;
        }
        energy += 0.25 * self.rho * penalty;
        energy
    }
}

impl GradientFlow for ExtendedRnfFlow {
    fn state_len(&self) -> usize {
        self.dim + (self.dim + 1) * (self.m + self.n)
    }

    fn derivative_into(&self, x: &[f64], out: &mut [f64]) {
        let dim = self.dim;
        let (u, t_hat, s_hat, h_t, h_s) = self.split(x);

        let mut v_t = vec![0.0; self.m];
        let mut v_s = vec![0.0; self.n];
        for m in 0..self.m {
            v_t[m] = h_t[m] * h_t[m] - dist_sq(u, &t_hat[m * dim..(m + 1) * dim]);
        }
        for n in 0..self.n {
            v_s[n] = h_s[n] * h_s[n] - dist_sq(u, &s_hat[n * dim..(n + 1) * dim]);
        }
        let mut row = vec![0.0; self.m];
        let mut col = vec![0.0; self.n];
        let mut k = 0;
        for m in 0..self.m {
            for n in 0..self.n {
                let e = self.w[k] * (self.br[k] - h_t[m] - h_s[n]);
                row[m] += e;
                col[n] += e;
                k += 1;
            }
        }

        out.fill(0.0);
        let (du, rest) = out.split_at_mut(dim);
        let (dt, rest) = rest.split_at_mut(self.m * dim);
        let (ds, rest) = rest.split_at_mut(self.n * dim);
        let (dh_t, dh_s) = rest.split_at_mut(self.m);

        for m in 0..self.m {
            let t = &t_hat[m * dim..(m + 1) * dim];
            let obs = &self.observed_tx[m * dim..(m + 1) * dim];
            for i in 0..dim {
                let pull = u[i] - t[i];
                du[i] += self.rho * v_t[m] * pull;
                dt[m * dim + i] = self.w_t[m] * (obs[i] - t[i]) - self.rho * v_t[m] * pull;
            }
            dh_t[m] = row[m] - self.rho * h_t[m] * v_t[m];
        }
        for n in 0..self.n {
            let s = &s_hat[n * dim..(n + 1) * dim];
            let obs = &self.observed_rx[n * dim..(n + 1) * dim];
            for i in 0..dim {
                let pull = u[i] - s[i];
                du[i] += self.rho * v_s[n] * pull;
                ds[n * dim + i] = self.w_s[n] * (obs[i] - s[i]) - self.rho * v_s[n] * pull;
            }
            dh_s[n] = col[n] - self.rho * h_s[n] * v_s[n];
        }
    }
}

/// Joint descent/ascent flow of the weighted augmented Lagrangian.
pub struct LpnnFlow {
    data: FlowData,
    c: f64,
}

impl LpnnFlow {
    /// Flow over the scenario's true antenna positions.
    pub fn new(scenario: &Scenario, meas: &MeasurementSet, c: f64) -> Self {
        Self::with_geometry(
            scenario.dim,
            &scenario.transmitters,
            &scenario.receivers,
            &meas.br,
            &meas.weights,
            c,
        )
    }

    /// Flow over explicit antenna positions (used for normalized solves).
    pub fn with_geometry(
        dim: usize,
        tx: &[Vec<f64>],
        rx: &[Vec<f64>],
        br: &[f64],
        w: &[f64],
        c: f64,
    ) -> Self {
        LpnnFlow {
            data: FlowData::new(dim, tx, rx, br, w),
            c,
        }
    }

    fn split<'b>(&self, x: &'b [f64]) -> StateParts<'b> {
        let d = &self.data;
        let (u, rest) = x.split_at(d.dim);
        let (g_t, rest) = rest.split_at(d.m);
        let (g_s, rest) = rest.split_at(d.n);
        let (l_t, l_s) = rest.split_at(d.m);
        (u, g_t, g_s, l_t, l_s)
    }

    /// Weighted Lagrangian L_w at a flat state.
    pub fn lagrangian(&self, x: &[f64]) -> f64 {
        let d = &self.data;
        let (u, g_t, g_s, l_t, l_s) = self.split(x);
        let mut v_t = vec![0.0; d.m];
        let mut v_s = vec![0.0; d.n];
        d.gaps(u, g_t, g_s, &mut v_t, &mut v_s);
        d.half_weighted_residual(g_t, g_s)
            + l_t.iter().zip(&v_t).map(|(l, v)| l * v).sum::<f64>()
            + l_s.iter().zip(&v_s).map(|(l, v)| l * v).sum::<f64>()
    }

    /// Augmented Lagrangian L_Aw = L_w + (C/4)·Σ gap².
    pub fn augmented_lagrangian(&self, x: &[f64]) -> f64 {
        let d = &self.data;
        let (u, g_t, g_s, _, _) = self.split(x);
        let mut v_t = vec![0.0; d.m];
        let mut v_s = vec![0.0; d.n];
        d.gaps(u, g_t, g_s, &mut v_t, &mut v_s);
        let aug: f64 =
            v_t.iter().map(|v| v * v).sum::<f64>() + v_s.iter().map(|v| v * v).sum::<f64>();
        self.lagrangian(x) + 0.25 * self.c * aug
    }
}

impl GradientFlow for LpnnFlow {
    fn state_len(&self) -> usize {
        self.data.dim + 2 * (self.data.m + self.data.n)
    }

    fn derivative_into(&self, x: &[f64], out: &mut [f64]) {
        let d = &self.data;
        let (u, g_t, g_s, l_t, l_s) = self.split(x);
        let mut v_t = vec![0.0; d.m];
        let mut v_s = vec![0.0; d.n];
        let mut row = vec![0.0; d.m];
        let mut col = vec![0.0; d.n];
        d.gaps(u, g_t, g_s, &mut v_t, &mut v_s);
        d.residual_sums(g_t, g_s, &mut row, &mut col);

        let (du, rest) = out.split_at_mut(d.dim);
        let (dg_t, rest) = rest.split_at_mut(d.m);
        let (dg_s, rest) = rest.split_at_mut(d.n);
        let (dl_t, dl_s) = rest.split_at_mut(d.m);

        du.fill(0.0);
        for m in 0..d.m {
            let t = d.tx_at(m);
            let coeff = 2.0 * l_t[m] + self.c * v_t[m];
            for i in 0..d.dim {
                du[i] += coeff * (u[i] - t[i]);
            }
            dg_t[m] = row[m] - 2.0 * g_t[m] * l_t[m] - self.c * g_t[m] * v_t[m];
            dl_t[m] = v_t[m];
        }
        for n in 0..d.n {
            let s = d.rx_at(n);
            let coeff = 2.0 * l_s[n] + self.c * v_s[n];
            for i in 0..d.dim {
                du[i] += coeff * (u[i] - s[i]);
            }
            dg_s[n] = col[n] - 2.0 * g_s[n] * l_s[n] - self.c * g_s[n] * v_s[n];
            dl_s[n] = v_s[n];
        }
    }
}

type ObservedAntennasRef<'a> = (&'a Vec<Vec<f64>>, &'a Vec<Vec<f64>>);

fn observed_antennas(meas: &MeasurementSet) -> Result<ObservedAntennasRef<'_>> {
    match (&meas.observed_transmitters, &meas.observed_receivers) {
        (Some(t), Some(s)) => Ok((t, s)),
        _ => Err(Error::invalid(
            "measurement set carries no observed antenna positions",
        )),
    }
}

/// Weighted least-squares localization objective
/// Σ w_mn (r̃_mn − ‖u−t_m‖ − ‖u−s_n‖)².
pub fn ml_objective(u: &[f64], meas: &MeasurementSet, scenario: &Scenario) -> f64 {
    let mut acc = 0.0;
    let mut k = 0;
    for t in &scenario.transmitters {
        let dt = dist(u, t);
        for s in &scenario.receivers {
            let e = meas.br[k] - dt - dist(u, s);
            acc += meas.weights[k] * e * e;
            k += 1;
        }
    }
    acc
}

/// Localization objective with antenna states as unknowns: the weighted
/// range residual at the antenna states plus the weighted pull toward the
/// observed positions.
pub fn extended_ml_objective(
    u: &[f64],
    t_states: &[Vec<f64>],
    s_states: &[Vec<f64>],
    meas: &MeasurementSet,
) -> Result<f64> {
    let (obs_t, obs_s) = observed_antennas(meas)?;
    if t_states.len() != meas.num_tx || s_states.len() != meas.num_rx {
        return Err(Error::invalid("antenna state counts do not match geometry"));
    }
    let mut acc = 0.0;
    let mut k = 0;
    for t in t_states {
        let dt = dist(u, t);
        for s in s_states {
            let e = meas.br[k] - dt - dist(u, s);
            acc += meas.weights[k] * e * e;
            k += 1;
        }
    }
    for (m, t) in t_states.iter().enumerate() {
        acc += meas.antenna_weights_t[m] * dist_sq(&obs_t[m], t);
    }
    for (n, s) in s_states.iter().enumerate() {
        acc += meas.antenna_weights_s[n] * dist_sq(&obs_s[n], s);
    }
    Ok(acc)
}

/// Relaxed energy at a structured state.
pub fn rnf_energy(x: &RnfState, meas: &MeasurementSet, scenario: &Scenario, rho: f64) -> f64 {
    RnfFlow::new(scenario, meas, rho).energy(&x.to_vec())
}

/// State derivative of the relaxed network (negative energy gradient).
pub fn rnfnn_derivative(
    x: &RnfState,
    meas: &MeasurementSet,
    scenario: &Scenario,
    rho: f64,
) -> RnfState {
    let flow = RnfFlow::new(scenario, meas, rho);
    let flat = x.to_vec();
    let mut out = vec![0.0; flat.len()];
    flow.derivative_into(&flat, &mut out);
    RnfState::from_slice(&out, scenario.dim, meas.num_tx, meas.num_rx)
}

/// Weighted Lagrangian at a structured state.
pub fn lagrangian(y: &LpnnState, meas: &MeasurementSet, scenario: &Scenario) -> f64 {
    LpnnFlow::new(scenario, meas, 1.0).lagrangian(&y.to_vec())
}

/// Weighted augmented Lagrangian at a structured state.
pub fn augmented_lagrangian(
    y: &LpnnState,
    meas: &MeasurementSet,
    scenario: &Scenario,
    c: f64,
) -> f64 {
    LpnnFlow::new(scenario, meas, c).augmented_lagrangian(&y.to_vec())
}

/// State derivative of the Lagrangian network: descent on the variables,
/// ascent on the multipliers.
pub fn lpnn_derivative(
    y: &LpnnState,
    meas: &MeasurementSet,
    scenario: &Scenario,
    c: f64,
) -> LpnnState {
    let flow = LpnnFlow::new(scenario, meas, c);
    let flat = y.to_vec();
    let mut out = vec![0.0; flat.len()];
    flow.derivative_into(&flat, &mut out);
    LpnnState::from_slice(&out, scenario.dim, meas.num_tx, meas.num_rx)
}

/// Extended relaxed energy at a structured state.
pub fn extended_rnf_energy(x: &ExtendedRnfState, meas: &MeasurementSet, rho: f64) -> Result<f64> {
    let flow = ExtendedRnfFlow::new(meas, x.u.len(), rho)?;
    Ok(flow.energy(&x.to_vec()))
}

/// Antenna prior Σ w_t‖t̃−t‖² + Σ w_s‖s̃−s‖² of the extended energy.
pub fn antenna_prior_term(x: &ExtendedRnfState, meas: &MeasurementSet) -> Result<f64> {
    let flow = ExtendedRnfFlow::new(meas, x.u.len(), 1.0)?;
    Ok(flow.antenna_prior(&x.to_vec()))
}

/// State derivative of the extended relaxed network.
pub fn extended_rnfnn_derivative(
    x: &ExtendedRnfState,
    meas: &MeasurementSet,
    rho: f64,
) -> Result<ExtendedRnfState> {
    let dim = x.u.len();
    let flow = ExtendedRnfFlow::new(meas, dim, rho)?;
    let flat = x.to_vec();
    let mut out = vec![0.0; flat.len()];
    flow.derivative_into(&flat, &mut out);
    Ok(ExtendedRnfState::from_slice(
        &out,
        dim,
        meas.num_tx,
        meas.num_rx,
    ))
}

/// Hessians of the two Lagrange-multiplier terms with respect to
/// `[u | g_t]` and `[u | g_s]`: block-diagonal with `−2Σλ·I_D` on top and
/// `2·diag(λ)` below. Indefinite whenever some multiplier is positive.
pub fn multiplier_term_hessians(
    lambda_t: &[f64],
    lambda_s: &[f64],
    dim: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let build = |lambda: &[f64]| {
        let k = lambda.len();
        let sum: f64 = lambda.iter().sum();
        let mut h = DMatrix::<f64>::zeros(dim + k, dim + k);
        for i in 0..dim {
            h[(i, i)] = -2.0 * sum;
        }
        for (j, l) in lambda.iter().enumerate() {
            h[(dim + j, dim + j)] = 2.0 * l;
        }
        h
    };
    (build(lambda_t), build(lambda_s))
}
