//! Minimal end-to-end usage: simulate one measurement set on the built-in
//! 2-D geometry and localize the target with both networks.

use elloc_core::geom::dist;
use elloc_core::measurement::MeasurementSet;
use elloc_core::metrics::crlb;
use elloc_core::noise::{NoiseModel, DEFAULT_K2};
use elloc_core::scenario::Scenario;
use elloc_core::solver::{solve_lpnn, solve_rnfnn, SolverConfig};

fn main() -> elloc_core::Result<()> {
    let scenario = Scenario::builtin("scenario1-2d")?;
    let noise = NoiseModel::from_snr(&scenario, 20.0, DEFAULT_K2)?;
    let meas = MeasurementSet::simulate(&scenario, &noise, 42)?;
    let config = SolverConfig::default();

    let rnfnn = solve_rnfnn(&meas, &scenario, &config, 1)?;
    let mlpnn = solve_lpnn(&meas, &scenario, &config, 1)?;
    let (_, root_crlb) = crlb(&scenario, &noise)?;

    println!("true target: {:?}", scenario.target);
    println!(
        "rnfnn: {:?} (err {:.3} m, {} iterations)",
        rnfnn.estimate,
        dist(&rnfnn.estimate, &scenario.target),
        rnfnn.iterations
    );
    println!(
        "mlpnn: {:?} (err {:.3} m, {} iterations)",
        mlpnn.estimate,
        dist(&mlpnn.estimate, &scenario.target),
        mlpnn.iterations
    );
    println!("root CRLB at 20 dB: {root_crlb:.3} m");
    Ok(())
}
