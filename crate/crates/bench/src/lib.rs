//! Shared fixtures for the criterion benchmarks.

use elloc_core::measurement::MeasurementSet;
use elloc_core::noise::{NoiseModel, DEFAULT_K2};
use elloc_core::scenario::Scenario;

/// Built-in geometry with a simulated measurement set at the given SNR.
pub fn fixture(name: &str, snr_db: f64, seed: u64) -> (Scenario, MeasurementSet) {
    let scenario = Scenario::builtin(name).expect("builtin scenario");
    let noise = NoiseModel::from_snr(&scenario, snr_db, DEFAULT_K2).expect("noise model");
    let meas = MeasurementSet::simulate(&scenario, &noise, seed).expect("measurements");
    (scenario, meas)
}
