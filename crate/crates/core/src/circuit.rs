//! Brickwork scheduling, trajectory execution, and the ancilla / paired-state protocols.
//!
//! # Clock and random-draw order
//!
//! Timestep `t = 1, 2, …` applies one gate layer (parity `(t − 1) mod 2`)
//! followed by one measurement layer; every series entry `[t]` is recorded
//! after the measurement layer of step `t`, and entry `[0]` holds the value
//! before the first monitored step.
//!
//! Each trajectory owns one ChaCha8 stream keyed by `(master_seed, index)`.
//! Draws happen in a fixed order: initial-state factors first, then per step
//! the gate parameters bond by bond, then for every site a coin flip followed
//! (if the site is measured) by the outcome draws of [`crate::weakmeas`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{cnot, hadamard, pauli_x, sample_hdu_gate, sample_u4_haar};
use crate::qstate::{LocalStates, LogBase, QuantumState, QubitRole, TwoQubitUnitary};
use crate::weakmeas::{self, MeasurementEvent, MeasurementModel};

pub type TrajectoryRng = ChaCha8Rng;

/// Counter-based stream for trajectory `index` under `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Squared norm below which the paired state counts as annihilated.
pub const DEGENERATE_PAIR_THRESHOLD: f64 = 1e-150;

/// Squared norm left after projecting a unit `psi2` against `psi1` below which
/// the remainder is rounding noise (amplitudes ~1e-10 of the input).
pub const GRAM_SCHMIDT_CANCELLATION: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateSet {
    /// Haar dual-unitary gates.
    Hdu,
    /// Haar-random U(4).
    Haar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    RandomProduct,
    Haar,
}

/// Supplies the two-qubit gate for each bond of each layer.
pub trait GateSource {
    fn next_gate(&mut self, layer: usize, bond: (usize, usize), rng: &mut TrajectoryRng)
        -> TwoQubitUnitary;
}

impl GateSource for GateSet {
    fn next_gate(&mut self, _: usize, _: (usize, usize), rng: &mut TrajectoryRng) -> TwoQubitUnitary {
        match self {
            GateSet::Hdu => sample_hdu_gate(rng),
            GateSet::Haar => sample_u4_haar(rng),
        }
    }
}

/// The same gate everywhere; draws nothing from the stream.
#[derive(Clone, Debug)]
pub struct ConstantGate(pub TwoQubitUnitary);

impl GateSource for ConstantGate {
    fn next_gate(&mut self, _: usize, _: (usize, usize), _: &mut TrajectoryRng) -> TwoQubitUnitary {
        self.0
    }
}

/// Replays a fixed circuit: `layers[layer][k]` is the gate on the `k`-th bond.
#[derive(Clone, Debug)]
pub struct FixedCircuit {
    pub layers: Vec<Vec<TwoQubitUnitary>>,
    cursor: usize,
}

impl FixedCircuit {
    pub fn new(layers: Vec<Vec<TwoQubitUnitary>>) -> Self {
        FixedCircuit { layers, cursor: 0 }
    }

    /// Samples a fixed circuit of `n_layers` layers on `size` sites.
    pub fn sample<R: Rng + ?Sized>(gates: GateSet, size: usize, n_layers: usize, rng: &mut R) -> Self {
        let layers = (0..n_layers)
            .map(|layer| {
                brick_bonds(size, layer)
                    .iter()
                    .map(|_| match gates {
                        GateSet::Hdu => sample_hdu_gate(rng),
                        GateSet::Haar => sample_u4_haar(rng),
                    })
                    .collect()
            })
            .collect();
        FixedCircuit::new(layers)
    }
}

impl GateSource for FixedCircuit {
    fn next_gate(&mut self, layer: usize, _: (usize, usize), _: &mut TrajectoryRng) -> TwoQubitUnitary {
        let gates = &self.layers[layer % self.layers.len()];
        let g = gates[self.cursor % gates.len()];
        self.cursor += 1;
        if self.cursor == gates.len() {
            self.cursor = 0;
        }
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    /// Chain length `L` (even).
    pub size: usize,
    /// Measurement rate per site per step.
    pub p: f64,
    pub model: MeasurementModel,
    pub gate_set: GateSet,
    /// Number of monitored timesteps.
    pub t_max: usize,
    /// Unitary-only scrambling layers (ancilla protocol) or monitored wait
    /// steps before the ancillas are attached (two-ancilla protocol).
    /// `None` selects the protocol default (2L or 20L).
    pub encoding_time: Option<usize>,
    pub master_seed: u64,
    /// Space-time anisotropy factor; 1 for dual-unitary gates.
    pub alpha: f64,
    pub initial: InitialState,
}

impl CircuitConfig {
    pub fn new(size: usize, p: f64, model: MeasurementModel) -> Self {
        CircuitConfig {
            size,
            p,
            model,
            gate_set: GateSet::Hdu,
            t_max: 2 * size,
            encoding_time: None,
            master_seed: 0,
            alpha: 1.0,
            initial: InitialState::RandomProduct,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 || self.size % 2 != 0 {
            return Err(Error::invalid(format!("chain length must be even and >= 2 (got {})", self.size)));
        }
        if self.size > 24 {
            return Err(Error::invalid(format!("chain length {} exceeds the dense-state limit", self.size)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("measurement rate {} outside [0, 1]", self.p)));
        }
        if self.t_max < 1 {
            return Err(Error::invalid("t_max must be at least 1"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive (got {})", self.alpha)));
        }
        self.model.validate()
    }
}

/// Bonds of layer `layer`: `(2i, 2i+1)` on even layers, `(2i+1, 2i+2 mod L)` on odd ones.
pub fn brick_bonds(size: usize, layer: usize) -> Vec<(usize, usize)> {
    let offset = layer % 2;
    (0..size / 2)
        .map(|i| (2 * i + offset, (2 * i + 1 + offset) % size))
        .collect()
}

/// One layer of freshly drawn gates on the system sites.
pub fn brickwork_layer<G: GateSource + ?Sized>(
    state: &mut QuantumState,
    layer: usize,
    size: usize,
    gates: &mut G,
    rng: &mut TrajectoryRng,
) -> Result<()> {
    if state.n_qubits() < size {
        return Err(Error::invalid(format!("{} qubits cannot hold a chain of {size}", state.n_qubits())));
    }
    for bond in brick_bonds(size, layer) {
        let g = gates.next_gate(layer, bond, rng);
        state.apply_two_qubit_gate(&g, bond.0, bond.1)?;
    }
    Ok(())
}

/// Measures every system site independently with probability `p`.
pub fn measurement_layer(
    state: &mut QuantumState,
    size: usize,
    p: f64,
    model: &MeasurementModel,
    rng: &mut TrajectoryRng,
) -> Result<Vec<MeasurementEvent>> {
    let mut events = Vec::new();
    for site in 0..size {
        if rng.random::<f64>() < p {
            events.push(weakmeas::measure(state, site, model, rng)?);
        }
    }
    Ok(events)
}

/// Per-trajectory log. Every series is indexed by timestep (entry 0 = before the
/// first monitored step).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub master_seed: u64,
    /// Trajectory index; together with `master_seed` it fixes the random stream.
    pub seed: u64,
    pub size: usize,
    pub p: f64,
    pub model: MeasurementModel,
    /// Cumulative `Σ ln p` over measurement events (ln of a density for CGPM).
    pub cum_log_born: Vec<f64>,
    /// Cumulative `ln p′` of the Gram-Schmidt paired state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cum_log_born_paired: Option<Vec<f64>>,
    /// Half-chain von Neumann entropy, nats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_cut_entropy: Option<Vec<f64>>,
    /// Ancilla entropy, bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancilla_entropy: Option<Vec<f64>>,
    /// Ancilla-ancilla mutual information vs `t − t₀`, nats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutual_info: Option<Vec<f64>>,
    pub n_measurements: u64,
    /// Set when the paired state was annihilated; the series stop at that step.
    #[serde(default)]
    pub discarded: bool,
}

impl TrajectoryRecord {
    fn empty(config: &CircuitConfig, index: u64) -> Self {
        TrajectoryRecord {
            master_seed: config.master_seed,
            seed: index,
            size: config.size,
            p: config.p,
            model: config.model,
            cum_log_born: vec![0.0],
            cum_log_born_paired: None,
            half_cut_entropy: None,
            ancilla_entropy: None,
            mutual_info: None,
            n_measurements: 0,
            discarded: false,
        }
    }
}

fn initial_system_state(config: &CircuitConfig, n_qubits: usize, rng: &mut TrajectoryRng) -> Result<QuantumState> {
    match config.initial {
        InitialState::RandomProduct => {
            let mut local: Vec<_> = (0..config.size)
                .map(|_| crate::qstate::haar_qubit(rng))
                .collect();
            local.resize(n_qubits, [crate::qstate::ONE, crate::qstate::ZERO]);
            QuantumState::new_product_state(n_qubits, &LocalStates::Explicit(local), rng)
        }
        InitialState::Haar => {
            if n_qubits != config.size {
                return Err(Error::invalid("Haar initial states are only supported without ancillas"));
            }
            QuantumState::haar_random(n_qubits, rng)
        }
    }
}

fn half_cut(state: &QuantumState, size: usize) -> Result<f64> {
    let half: Vec<usize> = (0..size / 2).collect();
    state.entropy_of_subset(&half, LogBase::E)
}

/// Plain monitored evolution from the configured initial state.
pub fn run_trajectory(config: &CircuitConfig, index: u64, record_half_cut: bool) -> Result<TrajectoryRecord> {
    let mut gates = config.gate_set;
    run_trajectory_with(config, index, record_half_cut, &mut gates)
}

pub fn run_trajectory_with<G: GateSource + ?Sized>(
    config: &CircuitConfig,
    index: u64,
    record_half_cut: bool,
    gates: &mut G,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let mut rng = trajectory_rng(config.master_seed, index);
    let mut state = initial_system_state(config, config.size, &mut rng)?;
    let mut rec = TrajectoryRecord::empty(config, index);
    let mut entropy = record_half_cut
        .then(|| half_cut(&state, config.size).map(|s| vec![s]))
        .transpose()?;
    let mut log_born = 0.0;
    for t in 1..=config.t_max {
        brickwork_layer(&mut state, t - 1, config.size, gates, &mut rng)?;
        let events = measurement_layer(&mut state, config.size, config.p, &config.model, &mut rng)?;
        rec.n_measurements += events.len() as u64;
        log_born += events.iter().map(|e| e.log_born).sum::<f64>();
        rec.cum_log_born.push(log_born);
        if let Some(s) = entropy.as_mut() {
            s.push(half_cut(&state, config.size)?);
        }
    }
    rec.half_cut_entropy = entropy;
    Ok(rec)
}

fn roles(size: usize, n_ancilla: usize) -> Vec<QubitRole> {
    (0..size)
        .map(QubitRole::System)
        .chain((0..n_ancilla).map(QubitRole::Ancilla))
        .collect()
}

/// Ancilla order parameter: Bell pair between site 0 and an ancilla, `2L`
/// unitary-only scrambling layers, then monitored dynamics recording the
/// ancilla entropy in bits. `record_half_cut` also logs the half-chain entropy.
pub fn ancilla_order_parameter_protocol(
    config: &CircuitConfig,
    index: u64,
    record_half_cut: bool,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let size = config.size;
    let anc = size;
    let mut rng = trajectory_rng(config.master_seed, index);
    let mut gates = config.gate_set;
    let mut state = initial_system_state(config, size + 1, &mut rng)?.with_roles(roles(size, 1))?;
    // site 0 → |0⟩, then (|00⟩ + |11⟩)/√2 with the ancilla
    reset_site_to_zero(&mut state, 0)?;
    state.apply_one_qubit(&hadamard(), 0)?;
    state.apply_two_qubit_gate(&cnot(), 0, anc)?;

    let encoding = config.encoding_time.unwrap_or(2 * size);
    for layer in 0..encoding {
        brickwork_layer(&mut state, layer, size, &mut gates, &mut rng)?;
    }

    let mut rec = TrajectoryRecord::empty(config, index);
    let mut s_anc = vec![state.entropy_of_subset(&[anc], LogBase::Two)?];
    let system: Vec<usize> = (0..size / 2).collect();
    let mut entropy = record_half_cut
        .then(|| state.entropy_of_subset(&system, LogBase::E).map(|s| vec![s]))
        .transpose()?;
    let mut log_born = 0.0;
    for t in 1..=config.t_max {
        brickwork_layer(&mut state, encoding + t - 1, size, &mut gates, &mut rng)?;
        let events = measurement_layer(&mut state, size, config.p, &config.model, &mut rng)?;
        rec.n_measurements += events.len() as u64;
        log_born += events.iter().map(|e| e.log_born).sum::<f64>();
        rec.cum_log_born.push(log_born);
        s_anc.push(state.entropy_of_subset(&[anc], LogBase::Two)?);
        if let Some(s) = entropy.as_mut() {
            s.push(state.entropy_of_subset(&system, LogBase::E)?);
        }
    }
    rec.ancilla_entropy = Some(s_anc);
    rec.half_cut_entropy = entropy;
    Ok(rec)
}

/// Rotates a product-state factor at `site` to |0⟩ when the site is unentangled.
/// Used only right after product-state initialization.
fn reset_site_to_zero(state: &mut QuantumState, site: usize) -> Result<()> {
    let rho = state.reduced_density_matrix(&[site])?;
    // pure single-qubit state |φ⟩ = (a, b) with ρ = |φ⟩⟨φ|
    let (r00, r10) = (rho[(0, 0)], rho[(1, 0)]);
    let a = r00.re.max(0.0).sqrt();
    let (a, b) = if a > 1e-12 {
        (crate::qstate::C64::new(a, 0.0), r10 / a)
    } else {
        (crate::qstate::ZERO, crate::qstate::ONE)
    };
    // unitary with first row ⟨φ|, second row orthogonal
    let u = crate::qstate::Mat2([[a.conj(), b.conj()], [-b, a]]);
    state.apply_one_qubit(&u, site)
}

/// Projectively measures `site`, flips it to |0⟩, and builds a Bell pair with `anc`
/// (which must be |0⟩). Consumes one uniform.
fn attach_ancilla(state: &mut QuantumState, site: usize, anc: usize, rng: &mut TrajectoryRng) -> Result<()> {
    let ev = weakmeas::measure(state, site, &MeasurementModel::Projective, rng)?;
    if ev.outcome == weakmeas::MeasurementOutcome::SpinDown {
        state.apply_one_qubit(&pauli_x(), site)?;
    }
    state.apply_one_qubit(&hadamard(), site)?;
    state.apply_two_qubit_gate(&cnot(), site, anc)
}

/// Mutual information `S_A + S_B − S_AB` (nats) between qubits `a` and `b`.
pub fn mutual_information(state: &QuantumState, a: usize, b: usize) -> Result<f64> {
    let sa = state.entropy_of_subset(&[a], LogBase::E)?;
    let sb = state.entropy_of_subset(&[b], LogBase::E)?;
    let sab = state.entropy_of_subset(&[a, b], LogBase::E)?;
    Ok(sa + sb - sab)
}

/// Two-ancilla correlator: monitored evolution for `t₀` (default `20L`) steps,
/// then ancillas attached to sites `0` and `L/2`, then `t_max` monitored steps
/// recording their mutual information.
pub fn two_ancilla_mutual_info_protocol(config: &CircuitConfig, index: u64) -> Result<TrajectoryRecord> {
    config.validate()?;
    let size = config.size;
    let (anc_a, anc_b) = (size, size + 1);
    let mut rng = trajectory_rng(config.master_seed, index);
    let mut gates = config.gate_set;
    let mut state = initial_system_state(config, size + 2, &mut rng)?.with_roles(roles(size, 2))?;
    let wait = config.encoding_time.unwrap_or(20 * size);
    let mut rec = TrajectoryRecord::empty(config, index);
    let mut log_born = 0.0;
    let mut step = |state: &mut QuantumState, layer: usize, rng: &mut TrajectoryRng, rec: &mut TrajectoryRecord| {
        brickwork_layer(state, layer, size, &mut gates, rng)?;
        let events = measurement_layer(state, size, config.p, &config.model, rng)?;
        rec.n_measurements += events.len() as u64;
        log_born += events.iter().map(|e| e.log_born).sum::<f64>();
        rec.cum_log_born.push(log_born);
        Ok::<(), Error>(())
    };
    for layer in 0..wait {
        step(&mut state, layer, &mut rng, &mut rec)?;
    }
    attach_ancilla(&mut state, 0, anc_a, &mut rng)?;
    attach_ancilla(&mut state, size / 2, anc_b, &mut rng)?;
    let mut mi = vec![mutual_information(&state, anc_a, anc_b)?];
    for t in 1..=config.t_max {
        step(&mut state, wait + t - 1, &mut rng, &mut rec)?;
        mi.push(mutual_information(&state, anc_a, anc_b)?);
    }
    rec.mutual_info = Some(mi);
    Ok(rec)
}

/// Two orthogonal states driven by identical Kraus operators, with outcomes
/// sampled from `psi1` and `psi2` Gram-Schmidt projected against `psi1` after
/// every step.
#[derive(Clone, Debug)]
pub struct PairedStates {
    pub psi1: QuantumState,
    pub psi2: QuantumState,
}

/// Log-probability increments of one paired step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedIncrement {
    /// `Δ ln p_m` of the sampled outcomes.
    pub log_born: f64,
    /// `Δ ln p′_m`, including the Gram-Schmidt projection.
    pub log_norm: f64,
    pub n_events: usize,
}

impl PairedStates {
    /// `psi2` is orthogonalized against `psi1` and both normalized.
    pub fn new(psi1: QuantumState, mut psi2: QuantumState) -> Result<Self> {
        if psi1.n_qubits() != psi2.n_qubits() {
            return Err(Error::invalid("paired states must have equal qubit counts"));
        }
        let mut psi1 = psi1;
        psi1.normalize()?;
        let psi2_in = psi2.norm_sq();
        let overlap = psi1.inner(&psi2);
        psi2.sub_scaled(overlap, &psi1);
        let n2 = psi2.norm_sq() / psi2_in;
        if !(n2 >= GRAM_SCHMIDT_CANCELLATION) {
            return Err(Error::DegeneratePair { norm_sq: n2 });
        }
        psi2.normalize()?;
        Ok(PairedStates { psi1, psi2 })
    }

    /// One timestep: gates on both, measurements sampled from `psi1` with the
    /// same unnormalized Kraus applied to `psi2`, then `psi2 ← psi2 − ⟨psi1|psi2⟩psi1`.
    pub fn step<G: GateSource + ?Sized>(
        &mut self,
        layer: usize,
        size: usize,
        p: f64,
        model: &MeasurementModel,
        gates: &mut G,
        rng: &mut TrajectoryRng,
    ) -> Result<PairedIncrement> {
        for bond in brick_bonds(size, layer) {
            let g = gates.next_gate(layer, bond, rng);
            self.psi1.apply_two_qubit_gate(&g, bond.0, bond.1)?;
            self.psi2.apply_two_qubit_gate(&g, bond.0, bond.1)?;
        }
        let mut inc = PairedIncrement {
            log_born: 0.0,
            log_norm: 0.0,
            n_events: 0,
        };
        for site in 0..size {
            if rng.random::<f64>() >= p {
                continue;
            }
            let prob_up = self.psi1.prob_up(site)?;
            let s = weakmeas::sample_with_prob(prob_up, model, rng)?;
            s.kraus.apply(&mut self.psi1, site)?;
            let n2 = s.kraus.apply_unnormalized(&mut self.psi2, site)?;
            self.renormalize_second(n2)?;
            inc.log_born += s.log_born;
            inc.log_norm += n2.ln();
            inc.n_events += 1;
        }
        let overlap = self.psi1.inner(&self.psi2);
        self.psi2.sub_scaled(overlap, &self.psi1);
        let n2 = self.psi2.norm_sq();
        if !(n2 >= GRAM_SCHMIDT_CANCELLATION) {
            return Err(Error::DegeneratePair { norm_sq: n2 });
        }
        self.renormalize_second(n2)?;
        inc.log_norm += n2.ln();
        Ok(inc)
    }

    fn renormalize_second(&mut self, n2: f64) -> Result<()> {
        if !(n2 >= DEGENERATE_PAIR_THRESHOLD) {
            return Err(Error::DegeneratePair { norm_sq: n2 });
        }
        let s = 1.0 / n2.sqrt();
        self.psi2.amplitudes_mut().iter_mut().for_each(|a| *a *= s);
        Ok(())
    }
}

/// Paired-state trajectory recording `ln p_m(t)` and `ln p′_m(t)`. A degenerate
/// pair is returned as a record with `discarded = true`.
pub fn paired_state_trajectory(config: &CircuitConfig, index: u64) -> Result<TrajectoryRecord> {
    let mut gates = config.gate_set;
    paired_state_trajectory_with(config, index, &mut gates)
}

pub fn paired_state_trajectory_with<G: GateSource + ?Sized>(
    config: &CircuitConfig,
    index: u64,
    gates: &mut G,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let mut rng = trajectory_rng(config.master_seed, index);
    let psi1 = initial_system_state(config, config.size, &mut rng)?;
    let psi2 = initial_system_state(config, config.size, &mut rng)?;
    let mut rec = TrajectoryRecord::empty(config, index);
    let mut paired = vec![0.0];
    let mut pair = match PairedStates::new(psi1, psi2) {
        Ok(pair) => pair,
        Err(Error::DegeneratePair { .. }) => {
            rec.discarded = true;
            rec.cum_log_born_paired = Some(paired);
            return Ok(rec);
        }
        Err(e) => return Err(e),
    };
    let (mut lp, mut lq) = (0.0, 0.0);
    for t in 1..=config.t_max {
        match pair.step(t - 1, config.size, config.p, &config.model, gates, &mut rng) {
            Ok(inc) => {
                lp += inc.log_born;
                lq += inc.log_norm;
                rec.n_measurements += inc.n_events as u64;
                rec.cum_log_born.push(lp);
                paired.push(lq);
            }
            Err(Error::DegeneratePair { .. }) => {
                rec.discarded = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    rec.cum_log_born_paired = Some(paired);
    Ok(rec)
}
