// The four measurement models acting on |+⟩: outcome, Born log-probability and
// the post-measurement polarization.

use mipt::qstate::QuantumState;
use mipt::weakmeas::{measure, total_outcome_probability, Cgpm, DiscreteModel, Dgpm, MeasurementModel, Spmm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> mipt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let plus = QuantumState::from_amplitudes(vec![mipt::qstate::C64::new(0.5f64.sqrt(), 0.0); 2])?;
    let models = [
        MeasurementModel::Projective,
        MeasurementModel::Spmm(Spmm { softening: 0.45 }),
        MeasurementModel::Cgpm(Cgpm { lambda: 1.0, delta: 1.0 }),
        MeasurementModel::Dgpm(Dgpm::with_strength(1.0)),
    ];
    for m in models {
        let mut s = plus.clone();
        let ev = measure(&mut s, 0, &m, &mut rng)?;
        println!("{m}: {:?}, ln p = {:.3}, <σz> after = {:+.3}", ev.outcome, ev.log_born, s.expectation_sigma_z(0)?);
    }
    let d = DiscreteModel::Dgpm(Dgpm { lambda: 1.0, delta: 1.0, epsilon: 1e-3 });
    println!("DGPM outcome probabilities sum to {:.12}", total_outcome_probability(0.3, &d));
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
