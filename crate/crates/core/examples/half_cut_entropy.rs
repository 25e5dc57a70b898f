// Half-chain entanglement across measurement rates: the entropy falls and its
// trajectory-to-trajectory fluctuations peak near the transition.

use mipt::circuit::{run_trajectory, CircuitConfig};
use mipt::observables::var_s_ensemble;
use mipt::weakmeas::{Dgpm, MeasurementModel};

pub fn run_example() -> mipt::Result<()> {
    let size = 6;
    for p in [0.05, 0.2, 0.5] {
        let c = CircuitConfig { t_max: 30, ..CircuitConfig::new(size, p, MeasurementModel::Dgpm(Dgpm::with_strength(1.0))) };
        let recs = (0..40).map(|i| run_trajectory(&c, i, true)).collect::<mipt::Result<Vec<_>>>()?;
        let v = var_s_ensemble(&recs, size, (size / 2, 30))?;
        println!("p = {p:.2}: mean S = {:.3} nats, var S = {:.4} ± {:.4}", v.mean, v.variance, v.stderr);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
