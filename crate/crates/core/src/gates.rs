//! Haar-random SU(2)/U(4) sampling and Haar dual-unitary (HDU) two-qubit gates.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::qstate::{unitarity_error4, Mat2, TwoQubitUnitary, C64, ONE, ZERO};

/// Tolerance used by [`check_dual_unitary`].
pub const DUAL_UNITARY_TOL: f64 = 1e-10;

/// Uniform unit quaternion mapped to SU(2): `[[a+ib, c+id], [−c+id, a−ib]]`.
pub fn sample_su2<R: Rng + ?Sized>(rng: &mut R) -> Mat2 {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (a, b, c, d) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Mat2([
        [C64::new(a, b), C64::new(c, d)],
        [C64::new(-c, d), C64::new(a, -b)],
    ])
}

/// Haar-random U(4): Gram-Schmidt QR of a complex Ginibre matrix.
///
/// Modified Gram-Schmidt produces `R` with a positive real diagonal, which is
/// exactly the phase fix that makes `Q` Haar distributed.
pub fn sample_u4_haar<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitUnitary {
    // cols[c][r]
    let mut cols = [[ZERO; 4]; 4];
    for col in cols.iter_mut() {
        for v in col.iter_mut() {
            *v = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    for c in 0..4 {
        for prev in 0..c {
            let proj: C64 = (0..4).map(|r| cols[prev][r].conj() * cols[c][r]).sum();
            for r in 0..4 {
                let p = cols[prev][r];
                cols[c][r] -= proj * p;
            }
        }
        let norm = cols[c].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        cols[c].iter_mut().for_each(|v| *v /= norm);
    }
    let mut m = [[ZERO; 4]; 4];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = cols[c][r];
        }
    }
    TwoQubitUnitary(m)
}

/// Free parameters of one HDU gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HduParameters {
    pub phi: f64,
    pub theta: f64,
    pub u_plus: Mat2,
    pub u_minus: Mat2,
    pub v_plus: Mat2,
    pub v_minus: Mat2,
}

impl HduParameters {
    /// Draw order: φ, θ, U₊, U₋, V₊, V₋.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let phi = rng.random::<f64>() * PI;
        let theta = rng.random::<f64>() * PI;
        HduParameters {
            phi,
            theta,
            u_plus: sample_su2(rng),
            u_minus: sample_su2(rng),
            v_plus: sample_su2(rng),
            v_minus: sample_su2(rng),
        }
    }

    /// All SU(2) factors the identity.
    pub fn trivial(phi: f64, theta: f64) -> Self {
        let id = Mat2::identity();
        HduParameters {
            phi,
            theta,
            u_plus: id,
            u_minus: id,
            v_plus: id,
            v_minus: id,
        }
    }
}

/// `V[θ] = exp[−i(π/4 XX + π/4 YY + π/4 θ ZZ)]` in closed form.
///
/// `XX + YY` vanishes on span{|00⟩, |11⟩} and is `2·σ_x` on span{|01⟩, |10⟩}.
pub fn v_core(theta: f64) -> TwoQubitUnitary {
    let even = C64::from_polar(1.0, -FRAC_PI_4 * theta);
    let odd = C64::new(0.0, -1.0) * C64::from_polar(1.0, FRAC_PI_4 * theta);
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = even;
    m[3][3] = even;
    m[1][2] = odd;
    m[2][1] = odd;
    TwoQubitUnitary(m)
}

/// `e^{iφ} (U₊ ⊗ U₋) · V[θ] · (V₋ ⊗ V₊)`.
pub fn build_hdu_gate(params: &HduParameters) -> TwoQubitUnitary {
    let left = params.u_plus.kron(&params.u_minus);
    let right = params.v_minus.kron(&params.v_plus);
    left.mul(&v_core(params.theta))
        .mul(&right)
        .scale(C64::from_polar(1.0, params.phi))
}

pub fn sample_hdu_gate<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitUnitary {
    build_hdu_gate(&HduParameters::sample(rng))
}

/// Space-time reshuffle `Ũ_{(a c),(b d)} = U_{(a b),(c d)}`.
pub fn reshuffle(gate: &TwoQubitUnitary) -> [[C64; 4]; 4] {
    let u = gate.matrix();
    let mut out = [[ZERO; 4]; 4];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    out[2 * a + c][2 * b + d] = u[2 * a + b][2 * c + d];
                }
            }
        }
    }
    out
}

pub fn dual_unitarity_error(gate: &TwoQubitUnitary) -> f64 {
    unitarity_error4(&reshuffle(gate))
}

/// True iff the reshuffled gate is unitary within [`DUAL_UNITARY_TOL`].
pub fn check_dual_unitary(gate: &TwoQubitUnitary) -> bool {
    dual_unitarity_error(gate) < DUAL_UNITARY_TOL
}

pub fn hadamard() -> Mat2 {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Mat2([[h, h], [h, -h]])
}

pub fn pauli_x() -> Mat2 {
    Mat2([[ZERO, ONE], [ONE, ZERO]])
}

/// CNOT with the first (high) qubit as control.
pub fn cnot() -> TwoQubitUnitary {
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = ONE;
    m[1][1] = ONE;
    m[2][3] = ONE;
    m[3][2] = ONE;
    TwoQubitUnitary(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M4 = [[C64; 4]; 4];

    fn pauli(k: usize) -> Mat2 {
        let i = C64::new(0.0, 1.0);
        match k {
            0 => pauli_x(),
            1 => Mat2([[ZERO, -i], [i, ZERO]]),
            _ => Mat2([[ONE, ZERO], [ZERO, -ONE]]),
        }
    }

    fn add(a: &M4, b: &M4, s: C64) -> M4 {
        let mut out = *a;
        for r in 0..4 {
            for c in 0..4 {
                out[r][c] += s * b[r][c];
            }
        }
        out
    }

    /// Truncated Taylor series of exp(A), used as an independent oracle.
    fn expm(a: &M4) -> M4 {
        let mut result = TwoQubitUnitary::identity().0;
        let mut term = TwoQubitUnitary::identity();
        for k in 1..60 {
            term = term.mul(&TwoQubitUnitary(*a)).scale(C64::new(1.0 / k as f64, 0.0));
            result = add(&result, &term.0, ONE);
        }
        result
    }

    fn v_oracle(theta: f64) -> M4 {
        let mut gen = [[ZERO; 4]; 4];
        for (k, coeff) in [(0, FRAC_PI_4), (1, FRAC_PI_4), (2, FRAC_PI_4 * theta)] {
            let p = pauli(k).kron(&pauli(k));
            gen = add(&gen, &p.0, C64::new(0.0, -coeff));
        }
        expm(&gen)
    }

    fn max_diff(a: &M4, b: &M4) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                d = d.max((a[r][c] - b[r][c]).norm());
            }
        }
        d
    }

    #[test]
    fn closed_form_core_matches_matrix_exponential() {
        for theta in [0.0, 0.3, 1.7, 3.0] {
            assert!(max_diff(&v_core(theta).0, &v_oracle(theta)) < 1e-12, "theta {theta}");
        }
    }

    #[test]
    fn trivial_hdu_action() {
        let g = build_hdu_gate(&HduParameters::trivial(0.0, 0.0));
        let m = g.matrix();
        let mi = C64::new(0.0, -1.0);
        assert!((m[0][0] - ONE).norm() < 1e-15);
        assert!((m[3][3] - ONE).norm() < 1e-15);
        // |01⟩ → −i|10⟩ and |10⟩ → −i|01⟩
        assert!((m[2][1] - mi).norm() < 1e-15);
        assert!((m[1][2] - mi).norm() < 1e-15);

        let g2 = build_hdu_gate(&HduParameters::trivial(std::f64::consts::FRAC_PI_2, 0.0));
        let i = C64::new(0.0, 1.0);
        assert!(max_diff(&g2.0, &g.scale(i).0) < 1e-15);
    }

    #[test]
    fn su2_membership_and_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let u = sample_su2(&mut rng);
            assert!(u.unitarity_error() < 1e-12);
            assert!((u.det() - ONE).norm() < 1e-12);
            acc += u.0[0][0].norm_sqr();
        }
        assert!((acc / n as f64 - 0.5).abs() < 0.01);
        let a = sample_su2(&mut ChaCha8Rng::seed_from_u64(1));
        let b = sample_su2(&mut ChaCha8Rng::seed_from_u64(2));
        assert!((a.0[0][0] - b.0[0][0]).norm() + (a.0[0][1] - b.0[0][1]).norm() > 1e-6);
    }

    #[test]
    fn u4_unitarity_moments_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let u = sample_u4_haar(&mut rng);
            assert!(u.unitarity_error() < 1e-12);
            acc += u.0[0][0].norm_sqr();
        }
        assert!((acc / n as f64 - 0.25).abs() < 0.01);
        let a = sample_u4_haar(&mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_u4_haar(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn u4_eigenphases_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut phases = Vec::with_capacity(400_000);
        for _ in 0..100_000 {
            let u = sample_u4_haar(&mut rng);
            let m = nalgebra::Matrix4::from_fn(|r, c| u.0[r][c]);
            let schur = m.schur();
            let (_, t) = schur.unpack();
            for k in 0..4 {
                phases.push(t[(k, k)].arg());
            }
        }
        phases.sort_by(f64::total_cmp);
        let n = phases.len() as f64;
        let ks = phases
            .iter()
            .enumerate()
            .map(|(k, ph)| {
                let cdf = (ph + PI) / (2.0 * PI);
                (cdf - k as f64 / n).abs().max((cdf - (k + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn dual_unitarity_examples() {
        assert!(check_dual_unitary(&TwoQubitUnitary::swap()));
        assert!(!check_dual_unitary(&TwoQubitUnitary::identity()));
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let g = sample_hdu_gate(&mut rng);
            assert!(g.unitarity_error() < 1e-10);
            assert!(check_dual_unitary(&g));
        }
    }

    #[test]
    fn generic_haar_gate_is_not_dual_unitary() {
        let g = sample_u4_haar(&mut ChaCha8Rng::seed_from_u64(4));
        assert!(!check_dual_unitary(&g));
    }

    #[test]
    fn cnot_and_hadamard_make_bell_pair() {
        let mut s = crate::qstate::QuantumState::zero(2).unwrap();
        s.apply_one_qubit(&hadamard(), 1).unwrap();
        s.apply_two_qubit_gate(&cnot(), 1, 0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - h).abs() < 1e-15);
        assert!((s.amplitudes()[3].re - h).abs() < 1e-15);
    }
}
