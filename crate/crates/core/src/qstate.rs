//! Dense statevector of `n` qubits.
//!
//! Qubit `k` is bit `k` of the basis-state index. Bit value 0 is the
//! σ_z = +1 ("up") state, so `Π₊` projects onto indices whose bit is clear.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Squared norms below this are treated as an annihilated branch.
pub const ZERO_BRANCH_THRESHOLD: f64 = 1e-300;

/// Reduced-density-matrix eigenvalues below this are dropped from entropies.
pub const EIGENVALUE_CUTOFF: f64 = 1e-12;

/// A 2x2 complex matrix acting on one qubit, rows/columns ordered (|0⟩, |1⟩).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    /// `a Π₊ + b Π₋`, the form every σ_z-diagonal Kraus element takes.
    pub fn diagonal(a: C64, b: C64) -> Self {
        Mat2([[a, ZERO], [ZERO, b]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Kronecker product `self ⊗ other`, with `self` on the high (first) index.
    pub fn kron(&self, other: &Mat2) -> TwoQubitUnitary {
        let mut out = [[ZERO; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.0[r >> 1][c >> 1] * other.0[r & 1][c & 1];
            }
        }
        TwoQubitUnitary(out)
    }

    /// Max-abs deviation of `M†M` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.dagger().mul(self);
        let mut err: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let target = if r == c { ONE } else { ZERO };
                err = err.max((p.0[r][c] - target).norm());
            }
        }
        err
    }
}

/// A 4x4 matrix on a qubit pair. Row/column index is `2 * b_first + b_second`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitUnitary(pub [[C64; 4]; 4]);

impl TwoQubitUnitary {
    pub fn identity() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = ONE;
        }
        TwoQubitUnitary(m)
    }

    pub fn swap() -> Self {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = ONE;
        m[1][2] = ONE;
        m[2][1] = ONE;
        m[3][3] = ONE;
        TwoQubitUnitary(m)
    }

    pub fn matrix(&self) -> &[[C64; 4]; 4] {
        &self.0
    }

    pub fn mul(&self, other: &TwoQubitUnitary) -> TwoQubitUnitary {
        let mut out = [[ZERO; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.0[r][k] * other.0[k][c]).sum();
            }
        }
        TwoQubitUnitary(out)
    }

    pub fn scale(&self, s: C64) -> TwoQubitUnitary {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|v| *v *= s);
        TwoQubitUnitary(out)
    }

    pub fn dagger(&self) -> TwoQubitUnitary {
        let mut out = [[ZERO; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.0[c][r].conj();
            }
        }
        TwoQubitUnitary(out)
    }

    /// Max-abs deviation of `U†U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        unitarity_error4(&self.0)
    }
}

pub(crate) fn unitarity_error4(m: &[[C64; 4]; 4]) -> f64 {
    let mut err: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            let v: C64 = (0..4).map(|k| m[k][r].conj() * m[k][c]).sum();
            let target = if r == c { ONE } else { ZERO };
            err = err.max((v - target).norm());
        }
    }
    err
}

/// What a qubit represents in a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitRole {
    /// Chain site `r ∈ [0, L)`.
    System(usize),
    /// Reference qubit with the given id; never directly measured.
    Ancilla(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogBase {
    E,
    Two,
}

impl LogBase {
    fn scale(self) -> f64 {
        match self {
            LogBase::E => 1.0,
            LogBase::Two => std::f64::consts::LN_2,
        }
    }
}

/// How to build the single-qubit factors of a product state.
#[derive(Clone, Debug)]
pub enum LocalStates {
    Explicit(Vec<[C64; 2]>),
    HaarRandomProduct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    amps: Vec<C64>,
    roles: Vec<QubitRole>,
}

fn default_roles(n: usize) -> Vec<QubitRole> {
    (0..n).map(QubitRole::System).collect()
}

/// Haar-random single-qubit state: first column of a uniform SU(2) element.
pub(crate) fn haar_qubit<R: Rng + ?Sized>(rng: &mut R) -> [C64; 2] {
    let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    [
        C64::new(g[0] / norm, g[1] / norm),
        C64::new(g[2] / norm, g[3] / norm),
    ]
}

impl QuantumState {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 || n > 30 {
            return Err(Error::invalid(format!("qubit count {n} out of range 1..=30")));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(QuantumState {
            amps,
            roles: default_roles(n),
        })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n = len.trailing_zeros() as usize;
        Ok(QuantumState {
            amps,
            roles: default_roles(n),
        })
    }

    /// Normalized product state `⊗_k |φ_k⟩`, qubit `k` taking `local[k]`.
    pub fn new_product_state<R: Rng + ?Sized>(
        n: usize,
        local: &LocalStates,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("product state needs at least one qubit"));
        }
        let factors: Vec<[C64; 2]> = match local {
            LocalStates::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::invalid(format!(
                        "{} local states given for {n} qubits",
                        v.len()
                    )));
                }
                v.clone()
            }
            LocalStates::HaarRandomProduct => (0..n).map(|_| haar_qubit(rng)).collect(),
        };
        let mut state = Self::zero(n)?;
        state.amps[0] = ONE;
        let mut len = 1usize;
        for (k, f) in factors.iter().enumerate() {
            let norm = (f[0].norm_sqr() + f[1].norm_sqr()).sqrt();
            if norm < 1e-150 {
                return Err(Error::invalid(format!("local state {k} is zero")));
            }
            let (a0, a1) = (f[0] / norm, f[1] / norm);
            for idx in 0..len {
                let v = state.amps[idx];
                state.amps[idx] = v * a0;
                state.amps[idx + len] = v * a1;
            }
            len <<= 1;
        }
        Ok(state)
    }

    /// Haar-random pure state (normalized complex Gaussian vector).
    pub fn haar_random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut state = Self::zero(n)?;
        for a in state.amps.iter_mut() {
            *a = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        state.normalize()?;
        Ok(state)
    }

    pub fn with_roles(mut self, roles: Vec<QubitRole>) -> Result<Self> {
        if roles.len() != self.n_qubits() {
            return Err(Error::invalid(format!(
                "{} roles for {} qubits",
                roles.len(),
                self.n_qubits()
            )));
        }
        self.roles = roles;
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn roles(&self) -> &[QubitRole] {
        &self.roles
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm and returns the norm² before rescaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm_sq();
        if n2 < ZERO_BRANCH_THRESHOLD {
            return Err(Error::ZeroProbabilityBranch { norm_sq: n2 });
        }
        let s = 1.0 / n2.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        Ok(n2)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuantumState) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `self ← self − c·other`.
    pub fn sub_scaled(&mut self, c: C64, other: &QuantumState) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a -= c * b;
        }
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits() {
            return Err(Error::invalid(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits()
            )));
        }
        Ok(())
    }

    /// Applies a 4x4 gate to qubits `(i, j)`; `i` is the high (first) factor.
    pub fn apply_two_qubit_gate(&mut self, gate: &TwoQubitUnitary, i: usize, j: usize) -> Result<()> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(Error::invalid(format!("gate applied to repeated qubit {i}")));
        }
        let (mi, mj) = (1usize << i, 1usize << j);
        let (lo, hi) = (i.min(j), i.max(j));
        let lo_mask = (1usize << lo) - 1;
        let hi_mask = (1usize << hi) - 1;
        let g = &gate.0;
        let quarter = self.amps.len() >> 2;
        let amps = &mut self.amps;
        for k in 0..quarter {
            // insert zero bits at `lo` then `hi`
            let t = (k & lo_mask) | ((k & !lo_mask) << 1);
            let base = (t & hi_mask) | ((t & !hi_mask) << 1);
            let idx = [base, base | mj, base | mi, base | mi | mj];
            let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
            for r in 0..4 {
                amps[idx[r]] = g[r][0] * v[0] + g[r][1] * v[1] + g[r][2] * v[2] + g[r][3] * v[3];
            }
        }
        Ok(())
    }

    /// Applies a general 2x2 matrix without renormalizing.
    pub fn apply_one_qubit(&mut self, k: &Mat2, site: usize) -> Result<()> {
        self.check_qubit(site)?;
        let m = 1usize << site;
        let k = &k.0;
        for idx in 0..self.amps.len() {
            if idx & m == 0 {
                let (a0, a1) = (self.amps[idx], self.amps[idx | m]);
                self.amps[idx] = k[0][0] * a0 + k[0][1] * a1;
                self.amps[idx | m] = k[1][0] * a0 + k[1][1] * a1;
            }
        }
        Ok(())
    }

    /// Applies `k`, returns the norm² of the unnormalized result and renormalizes.
    pub fn apply_one_qubit_kraus(&mut self, k: &Mat2, site: usize) -> Result<f64> {
        self.apply_one_qubit(k, site)?;
        self.normalize()
    }

    /// Multiplies the σ_z = +1 (bit clear) amplitudes of `site` by `up` and the
    /// σ_z = −1 amplitudes by `down`. Returns the resulting norm², no renormalization.
    pub fn scale_diagonal(&mut self, site: usize, up: f64, down: f64) -> Result<f64> {
        self.check_qubit(site)?;
        let m = 1usize << site;
        let mut n2 = 0.0;
        for (idx, a) in self.amps.iter_mut().enumerate() {
            *a *= if idx & m == 0 { up } else { down };
            n2 += a.norm_sqr();
        }
        Ok(n2)
    }

    /// `⟨Π₊⟩` at `site` (unnormalized states give the unnormalized weight).
    pub fn prob_up(&self, site: usize) -> Result<f64> {
        self.check_qubit(site)?;
        let m = 1usize << site;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx & m == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    pub fn expectation_sigma_z(&self, site: usize) -> Result<f64> {
        let up = self.prob_up(site)?;
        let total = self.norm_sq();
        Ok((2.0 * up - total) / total)
    }

    /// Reduced density matrix of `subset` (indices ordered as given, first = lowest bit).
    pub fn reduced_density_matrix(&self, subset: &[usize]) -> Result<DMatrix<C64>> {
        let n = self.n_qubits();
        let mut seen = vec![false; n];
        for &q in subset {
            self.check_qubit(q)?;
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::invalid(format!("qubit {q} repeated in subset")));
            }
        }
        let rest: Vec<usize> = (0..n).filter(|q| !seen[*q]).collect();
        let (da, db) = (1usize << subset.len(), 1usize << rest.len());
        let mut m = DMatrix::<C64>::zeros(da, db);
        for (idx, amp) in self.amps.iter().enumerate() {
            let a = gather_bits(idx, subset);
            let b = gather_bits(idx, &rest);
            m[(a, b)] = *amp;
        }
        Ok(&m * m.adjoint())
    }

    /// Von Neumann entropy of the reduced state on `subset`.
    pub fn entropy_of_subset(&self, subset: &[usize], base: LogBase) -> Result<f64> {
        let n = self.n_qubits();
        let mut in_a = vec![false; n];
        for &q in subset {
            self.check_qubit(q)?;
            in_a[q] = true;
        }
        let size_a = in_a.iter().filter(|x| **x).count();
        if size_a == 0 || size_a == n {
            return Err(Error::invalid(format!(
                "entropy subset must be a nonempty proper subset (got {size_a} of {n})"
            )));
        }
        let side: Vec<usize> = if size_a <= n - size_a {
            (0..n).filter(|q| in_a[*q]).collect()
        } else {
            (0..n).filter(|q| !in_a[*q]).collect()
        };
        let rho = self.reduced_density_matrix(&side)?;
        let trace: f64 = (0..rho.nrows()).map(|k| rho[(k, k)].re).sum();
        let eig = hermitian_eigenvalues(rho);
        let s: f64 = eig
            .into_iter()
            .map(|l| l / trace)
            .filter(|l| *l > EIGENVALUE_CUTOFF)
            .map(|l| -l * l.ln())
            .sum();
        Ok(s.max(0.0) / base.scale())
    }
}

fn gather_bits(idx: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (((idx >> q) & 1) << k))
}

fn hermitian_eigenvalues(rho: DMatrix<C64>) -> Vec<f64> {
    match rho.nrows() {
        1 => vec![rho[(0, 0)].re],
        2 => {
            let (a, d) = (rho[(0, 0)].re, rho[(1, 1)].re);
            let b = rho[(0, 1)].norm();
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            vec![mean + r, mean - r]
        }
        _ => rho.symmetric_eigenvalues().iter().copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn plus() -> [C64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        [c(h, 0.0), c(h, 0.0)]
    }

    fn bell() -> QuantumState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        QuantumState::from_amplitudes(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)]).unwrap()
    }

    #[test]
    fn product_of_basis_states() {
        let s = QuantumState::new_product_state(
            2,
            &LocalStates::Explicit(vec![[ONE, ZERO], [ONE, ZERO]]),
            &mut rng(),
        )
        .unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
    }

    #[test]
    fn single_plus_state() {
        let s = QuantumState::new_product_state(1, &LocalStates::Explicit(vec![plus()]), &mut rng())
            .unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - h).abs() < 1e-15);
        assert!((s.amplitudes()[1].re - h).abs() < 1e-15);
    }

    #[test]
    fn product_state_errors() {
        assert!(QuantumState::new_product_state(0, &LocalStates::HaarRandomProduct, &mut rng()).is_err());
        let r = QuantumState::new_product_state(3, &LocalStates::Explicit(vec![plus()]), &mut rng());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn haar_product_has_no_entanglement() {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let s = QuantumState::new_product_state(3, &LocalStates::HaarRandomProduct, &mut r).unwrap();
        assert!((s.norm_sq() - 1.0).abs() < 1e-12);
        for cut in [vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2]] {
            assert!(s.entropy_of_subset(&cut, LogBase::E).unwrap() < 1e-10);
        }
    }

    #[test]
    fn swap_gate_moves_excitation() {
        // qubit 0 excited, qubit 1 empty
        let mut s = QuantumState::zero(2).unwrap();
        s.amplitudes_mut()[0] = ZERO;
        s.amplitudes_mut()[1] = ONE;
        s.apply_two_qubit_gate(&TwoQubitUnitary::swap(), 0, 1).unwrap();
        assert_eq!(s.amplitudes()[2], ONE);
        assert_eq!(s.amplitudes()[1], ZERO);
    }

    #[test]
    fn identity_gate_is_bitwise_noop() {
        let s0 = QuantumState::haar_random(5, &mut rng()).unwrap();
        let mut s = s0.clone();
        s.apply_two_qubit_gate(&TwoQubitUnitary::identity(), 3, 1).unwrap();
        for (a, b) in s.amplitudes().iter().zip(s0.amplitudes()) {
            assert!((a - b).norm() <= 1e-15);
        }
    }

    #[test]
    fn gate_acts_on_requested_pair_in_order() {
        // X on the first qubit of the pair via X ⊗ I, applied to (i=2, j=0)
        let x = Mat2([[ZERO, ONE], [ONE, ZERO]]);
        let g = x.kron(&Mat2::identity());
        let mut s = QuantumState::zero(3).unwrap();
        s.apply_two_qubit_gate(&g, 2, 0).unwrap();
        assert_eq!(s.amplitudes()[4], ONE);
    }

    #[test]
    fn gate_index_errors() {
        let mut s = QuantumState::zero(3).unwrap();
        assert!(s.apply_two_qubit_gate(&TwoQubitUnitary::swap(), 0, 3).is_err());
        assert!(s.apply_two_qubit_gate(&TwoQubitUnitary::swap(), 1, 1).is_err());
    }

    #[test]
    fn projector_kraus_on_eigenstate_and_superposition() {
        let pi_plus = Mat2::diagonal(ONE, ZERO);
        let mut s = QuantumState::zero(1).unwrap();
        let n2 = s.apply_one_qubit_kraus(&pi_plus, 0).unwrap();
        assert!((n2 - 1.0).abs() < 1e-15);

        let mut s = QuantumState::new_product_state(1, &LocalStates::Explicit(vec![plus()]), &mut rng())
            .unwrap();
        let n2 = s.apply_one_qubit_kraus(&pi_plus, 0).unwrap();
        assert!((n2 - 0.5).abs() < 1e-15);
        assert!((s.amplitudes()[0] - ONE).norm() < 1e-15);
    }

    #[test]
    fn softened_kraus_weight() {
        let lam: f64 = 0.45;
        let norm = (2.0 * (1.0 + lam * lam)).sqrt();
        let k = Mat2::diagonal(c((1.0 + lam) / norm, 0.0), c((1.0 - lam) / norm, 0.0));
        let mut s = QuantumState::zero(1).unwrap();
        let n2 = s.apply_one_qubit_kraus(&k, 0).unwrap();
        assert!((n2 - 1.45f64.powi(2) / (2.0 * 1.2025)).abs() < 1e-12);
        assert!((n2 - 0.87422).abs() < 1e-5);
    }

    #[test]
    fn kraus_zero_branch_is_an_error() {
        let pi_minus = Mat2::diagonal(ZERO, ONE);
        let mut s = QuantumState::zero(2).unwrap();
        assert!(matches!(
            s.apply_one_qubit_kraus(&pi_minus, 0),
            Err(Error::ZeroProbabilityBranch { .. })
        ));
    }

    #[test]
    fn bell_and_ghz_entropies() {
        let b = bell();
        assert!((b.entropy_of_subset(&[0], LogBase::E).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![ZERO; 8];
        amps[0] = c(h, 0.0);
        amps[7] = c(h, 0.0);
        let ghz = QuantumState::from_amplitudes(amps).unwrap();
        for q in 0..3 {
            assert!((ghz.entropy_of_subset(&[q], LogBase::Two).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((ghz.entropy_of_subset(&[0, 2], LogBase::Two).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_subset_errors() {
        let b = bell();
        assert!(b.entropy_of_subset(&[], LogBase::E).is_err());
        assert!(b.entropy_of_subset(&[0, 1], LogBase::E).is_err());
        assert!(b.entropy_of_subset(&[2], LogBase::E).is_err());
    }

    #[test]
    fn sigma_z_expectations() {
        let s = QuantumState::zero(1).unwrap();
        assert_eq!(s.expectation_sigma_z(0).unwrap(), 1.0);
        let s = QuantumState::new_product_state(1, &LocalStates::Explicit(vec![plus()]), &mut rng())
            .unwrap();
        assert!(s.expectation_sigma_z(0).unwrap().abs() < 1e-15);
        let th: f64 = 0.3;
        let s = QuantumState::from_amplitudes(vec![c(th.cos(), 0.0), c(th.sin(), 0.0)]).unwrap();
        assert!((s.expectation_sigma_z(0).unwrap() - 0.6f64.cos()).abs() < 1e-14);
        assert!((0.6f64.cos() - 0.825336).abs() < 1e-6);
        assert!(s.expectation_sigma_z(1).is_err());
    }

    #[test]
    fn norm_preserved_over_many_gates() {
        let mut r = rng();
        let mut s = QuantumState::haar_random(6, &mut r).unwrap();
        for k in 0..10_000 {
            let g = crate::gates::sample_u4_haar(&mut r);
            let i = k % 6;
            s.apply_two_qubit_gate(&g, i, (i + 1) % 6).unwrap();
        }
        assert!((1.0 - s.norm_sq()).abs() < 1e-10);
    }
}
