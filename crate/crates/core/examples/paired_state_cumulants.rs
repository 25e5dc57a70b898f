// Paired-state evolution: generalized free energy, cumulant rates of the
// log-probability gap, the typical scaling dimension and the H(s) curves.

use mipt::circuit::{paired_state_trajectory, CircuitConfig};
use mipt::cli::{correlator_times, generalized_summary};
use mipt::weakmeas::{MeasurementModel, Spmm};

pub fn run_example() -> mipt::Result<()> {
    let model = MeasurementModel::Spmm(Spmm { softening: 0.45 });
    let mut recs = Vec::new();
    for size in [4, 6] {
        let c = CircuitConfig { t_max: 32 * size, master_seed: 21, ..CircuitConfig::new(size, 0.28, model) };
        for i in 0..150 {
            recs.push(paired_state_trajectory(&c, i)?);
        }
        println!("L = {size}: Y sampled at t = {:?}", correlator_times(size).iter().step_by(9).collect::<Vec<_>>());
    }
    let g = generalized_summary(&recs, 1.0)?;
    for r in &g.rows {
        println!(
            "L = {}: f = {:.4}, f1 = {:.4}, k1/(Lt) = {:.4} ± {:.4}, k2/(Lt) = {:.4}, s_o = {:.3}",
            r.size, r.f, r.f1, r.k1_rate, r.k1_rate_stderr, r.k2_rate, r.s_o
        );
    }
    for (name, e) in &g.values {
        println!("{name} = {:.4} ± {:.4}", e.value, e.stderr);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
