// Two ancillas entangled with distant sites: their mutual information decays
// under continued monitoring.

use mipt::circuit::{two_ancilla_mutual_info_protocol, CircuitConfig};
use mipt::observables::mutual_info_correlator;
use mipt::weakmeas::{MeasurementModel, Spmm};

pub fn run_example() -> mipt::Result<()> {
    let c = CircuitConfig {
        t_max: 12,
        encoding_time: Some(24),
        ..CircuitConfig::new(6, 0.3, MeasurementModel::Spmm(Spmm { softening: 0.45 }))
    };
    let recs = (0..40).map(|i| two_ancilla_mutual_info_protocol(&c, i)).collect::<mipt::Result<Vec<_>>>()?;
    for pt in mutual_info_correlator(&recs)?.iter().step_by(3) {
        println!("t − t0 = {:>2}: C = {:.4} ± {:.4} nats", pt.t, pt.mean, pt.stderr);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
