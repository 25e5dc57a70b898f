// Haar dual-unitary gates versus generic Haar U(4) gates.

use mipt::gates::{dual_unitarity_error, sample_hdu_gate, sample_u4_haar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> mipt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hdu: f64 = (0..100).map(|_| dual_unitarity_error(&sample_hdu_gate(&mut rng))).fold(0.0, f64::max);
    let haar: f64 = (0..100).map(|_| dual_unitarity_error(&sample_u4_haar(&mut rng))).fold(f64::MAX, f64::min);
    println!("largest reshuffle error over 100 HDU gates:   {hdu:.2e}");
    println!("smallest reshuffle error over 100 Haar gates: {haar:.2e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
