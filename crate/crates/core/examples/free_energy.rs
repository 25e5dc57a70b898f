// Free-energy density from measurement records, and how it shifts with the
// DGPM bin width.

use mipt::circuit::{run_trajectory, CircuitConfig};
use mipt::lyapunov::{default_window, epsilon_shift, free_energy_density, FreeEnergySeries};
use mipt::weakmeas::{Dgpm, MeasurementModel};

pub fn run_example() -> mipt::Result<()> {
    let (size, p) = (4, 0.19);
    let mut f = Vec::new();
    for eps in [1e-5, 1e-4] {
        let model = MeasurementModel::Dgpm(Dgpm { lambda: 1.0, delta: 1.0, epsilon: eps });
        let c = CircuitConfig { t_max: 32 * size, master_seed: 9, ..CircuitConfig::new(size, p, model) };
        let recs = (0..200).map(|i| run_trajectory(&c, i, false)).collect::<mipt::Result<Vec<_>>>()?;
        let est = free_energy_density(&FreeEnergySeries::from_records(&recs)?, default_window(size), 1.0)?;
        println!("ε = {eps:e}: f = {:.4} ± {:.4}", est.value, est.stderr);
        f.push(est.value);
    }
    println!("measured shift {:.4}, predicted {:.4}", f[0] - f[1], epsilon_shift(1e-5, 1e-4, p));
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
