// Ancilla entropy after 2L monitored steps for two sizes: curves of different
// sizes cross near the critical rate.

use mipt::circuit::{ancilla_order_parameter_protocol, CircuitConfig};
use mipt::observables::order_parameter_curves;
use mipt::scaling::{crossing_estimate, ScalingSample};
use mipt::weakmeas::{MeasurementModel, Spmm};

pub fn run_example() -> mipt::Result<()> {
    let model = MeasurementModel::Spmm(Spmm { softening: 0.45 });
    let mut records = Vec::new();
    for size in [4, 6] {
        for p in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let c = CircuitConfig { master_seed: 5, ..CircuitConfig::new(size, p, model) };
            for i in 0..60 {
                records.push(ancilla_order_parameter_protocol(&c, i, false)?);
            }
        }
    }
    let curves = order_parameter_curves(&records)?;
    for pt in &curves {
        println!("L = {} p = {:.1}: S_anc = {:.3} ± {:.3}", pt.size, pt.p, pt.mean, pt.stderr);
    }
    match crossing_estimate(&ScalingSample::from_rate_points(&curves)) {
        Ok((c, _)) => println!("crossing at p = {:.3} ± {:.3}", c.value, c.stderr),
        Err(e) => println!("no crossing in this small sample: {e}"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
