// Product states, a Bell pair and entanglement entropies on a small register.

use mipt::gates::{cnot, hadamard};
use mipt::qstate::{LocalStates, LogBase, QuantumState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> mipt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut s = QuantumState::new_product_state(4, &LocalStates::HaarRandomProduct, &mut rng)?;
    println!("random product state: S(0,1) = {:.2e} bits", s.entropy_of_subset(&[0, 1], LogBase::Two)?);

    let mut bell = QuantumState::zero(2)?;
    bell.apply_one_qubit(&hadamard(), 0)?;
    bell.apply_two_qubit_gate(&cnot(), 0, 1)?;
    println!("Bell pair: S(0) = {:.6} bits, <σz> = {:.3}", bell.entropy_of_subset(&[0], LogBase::Two)?, bell.expectation_sigma_z(0)?);

    s = QuantumState::haar_random(6, &mut rng)?;
    let a = s.entropy_of_subset(&[0, 1, 2], LogBase::E)?;
    let b = s.entropy_of_subset(&[3, 4, 5], LogBase::E)?;
    println!("Haar state on 6 qubits: S_A = {a:.6}, S_B = {b:.6} nats (Page value ≈ {:.3})", 3.0 * 2f64.ln() - 0.5);
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
