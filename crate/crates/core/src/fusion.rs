//! W-state fusion: spectator-factored states, the ideal gate, detection,
//! phase correction, success probabilities and recycling networks.
//!
//! The spectator atoms of both W states never enter the cavity. Their four
//! possible tail states are orthonormal, so a four-level flag register
//! stands in for them exactly:
//!
//! | flag | Alice's tail      | Bob's tail        | extracted pair |
//! |------|-------------------|-------------------|----------------|
//! | TT   | all g0            | all g0            | g1 g1          |
//! | TW   | all g0            | W(m-1)            | g1 g0          |
//! | WT   | W(n-1)            | all g0            | g0 g1          |
//! | WW   | W(n-1)            | W(m-1)            | g0 g0          |

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix4;
use num_rational::Ratio;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    collapse_operators, layout, model_hamiltonian, model_space, stark_compensation, Layout,
    ModelKind, ModelParams, Party,
};
use crate::hilbert::{DensityOperator, Level, OperatorMatrix, SpaceDescriptor, StateVector};
use crate::zeno::gate_time;
use crate::C64;

pub const FLAG_TT: usize = 0;
pub const FLAG_TW: usize = 1;
pub const FLAG_WT: usize = 2;
pub const FLAG_WW: usize = 3;
pub const FLAG_NAMES: [&str; 4] = ["TT", "TW", "WT", "WW"];

const G0: u8 = Level::G0 as u8;
const G1: u8 = Level::G1 as u8;

/// Extracted-pair register paired with each flag in the initial state.
pub const FLAG_REGISTER: [Outcome; 4] = [Outcome::G1G1, Outcome::G1G0, Outcome::G0G1, Outcome::G0G0];

/// Detection result for the two extracted atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Outcome {
    #[serde(rename = "g0g0")]
    G0G0,
    #[serde(rename = "g0g1")]
    G0G1,
    #[serde(rename = "g1g0")]
    G1G0,
    #[serde(rename = "g1g1")]
    G1G1,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::G0G0, Outcome::G0G1, Outcome::G1G0, Outcome::G1G1];

    /// Position in the register basis (g0g0, g0g1, g1g0, g1g1).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn levels(self) -> (u8, u8) {
        match self {
            Outcome::G0G0 => (G0, G0),
            Outcome::G0G1 => (G0, G1),
            Outcome::G1G0 => (G1, G0),
            Outcome::G1G1 => (G1, G1),
        }
    }

    pub fn from_levels(a: u8, b: u8) -> Option<Outcome> {
        Outcome::ALL.into_iter().find(|o| o.levels() == (a, b))
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::G0G0 => "g0g0",
            Outcome::G0G1 => "g0g1",
            Outcome::G1G0 => "g1g0",
            Outcome::G1G1 => "g1g1",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Failure,
    Recycle { alice: usize, bob: usize },
    Success { size: usize },
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::Failure => "failure",
            Classification::Recycle { .. } => "recycle",
            Classification::Success { .. } => "success",
        }
    }
}

/// Both extracted atoms excited means both tails are product states, while
/// both in g0 leaves each party with a shortened W state.
pub fn classify(outcome: Outcome, n: usize, m: usize) -> Classification {
    match outcome {
        Outcome::G1G1 => Classification::Failure,
        Outcome::G0G0 => Classification::Recycle {
            alice: n - 1,
            bob: m - 1,
        },
        Outcome::G0G1 | Outcome::G1G0 => Classification::Success { size: n + m - 2 },
    }
}

/// W_k split as one extracted qubit plus a tail of k-1 qubits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WState {
    pub k: usize,
    /// Extracted qubit in g1, tail all g0.
    pub excited_coeff: f64,
    /// Extracted qubit in g0, tail W(k-1).
    pub ground_coeff: f64,
}

pub fn w_state(k: usize) -> Result<WState> {
    if k < 1 {
        return Err(Error::InvalidFusion("W state needs at least one qubit".into()));
    }
    let kf = k as f64;
    Ok(WState {
        k,
        excited_coeff: 1.0 / kf.sqrt(),
        ground_coeff: ((kf - 1.0) / kf).sqrt(),
    })
}

impl WState {
    /// Squared coefficients as exact rationals.
    pub fn weights(&self) -> (Ratio<u64>, Ratio<u64>) {
        let k = self.k as u64;
        (Ratio::new(1, k), Ratio::new(k - 1, k))
    }

    /// Basis configurations (qubit levels) with their amplitudes.
    pub fn amplitudes(&self) -> Vec<(Vec<u8>, f64)> {
        let a = 1.0 / (self.k as f64).sqrt();
        (0..self.k)
            .map(|j| {
                let mut cfg = vec![G0; self.k];
                cfg[j] = G1;
                (cfg, a)
            })
            .collect()
    }
}

/// Joint state of both protocol inputs in flag-register form.
#[derive(Clone, Debug)]
pub struct BranchState {
    pub n: usize,
    pub m: usize,
    pub kind: ModelKind,
    pub state: StateVector,
}

/// Flag register, two atoms, model modes; capped at two excitations.
pub fn fusion_space(kind: ModelKind, n_max: usize) -> Result<Arc<SpaceDescriptor>> {
    model_space(kind, n_max, Some(4), Some(2))
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidFusion(format!(
            "fusion needs W states of size at least 2, got ({n}, {m})"
        )));
    }
    Ok(())
}

fn fusion_layout(space: &SpaceDescriptor, kind: ModelKind) -> Result<(Layout, usize)> {
    let lay = layout(space, kind)?;
    let flag = lay.flag.ok_or_else(|| Error::WrongStructure {
        model: kind.name(),
        reason: "fusion states need a flag register".into(),
    })?;
    Ok((lay, flag))
}

/// Flag amplitudes of the protocol input:
/// (1, sqrt(m-1), sqrt(n-1), sqrt((m-1)(n-1))) / sqrt(nm).
pub fn initial_flag_amplitudes(n: usize, m: usize) -> [f64; 4] {
    let (nf, mf) = (n as f64, m as f64);
    let d = (nf * mf).sqrt();
    [
        1.0 / d,
        (mf - 1.0).sqrt() / d,
        (nf - 1.0).sqrt() / d,
        ((mf - 1.0) * (nf - 1.0)).sqrt() / d,
    ]
}

fn register_label(space: &SpaceDescriptor, lay: &Layout, flag_pos: usize, flag: usize, reg: Outcome) -> Vec<u8> {
    let mut l = vec![0u8; space.factors().len()];
    l[flag_pos] = flag as u8;
    let (a, b) = reg.levels();
    l[lay.atoms[0]] = a;
    l[lay.atoms[1]] = b;
    l
}

fn state_from_registers(
    space: &Arc<SpaceDescriptor>,
    kind: ModelKind,
    terms: &[(usize, Outcome, C64)],
) -> Result<StateVector> {
    let (lay, fpos) = fusion_layout(space, kind)?;
    let mut psi = StateVector::zeros(space);
    for &(f, reg, a) in terms {
        let label = crate::hilbert::BasisLabel(register_label(space, &lay, fpos, f, reg));
        let i = space.check_label(&label)?;
        psi.amplitudes[i] += a;
    }
    Ok(psi)
}

pub fn initial_branch_state_on(
    space: &Arc<SpaceDescriptor>,
    n: usize,
    m: usize,
    kind: ModelKind,
) -> Result<BranchState> {
    check_sizes(n, m)?;
    let amps = initial_flag_amplitudes(n, m);
    let terms: Vec<_> = (0..4)
        .map(|f| (f, FLAG_REGISTER[f], C64::new(amps[f], 0.0)))
        .collect();
    Ok(BranchState {
        n,
        m,
        kind,
        state: state_from_registers(space, kind, &terms)?,
    })
}

pub fn initial_branch_state(n: usize, m: usize, kind: ModelKind) -> Result<BranchState> {
    initial_branch_state_on(&fusion_space(kind, 2)?, n, m, kind)
}

impl BranchState {
    /// Amplitude of (flag, register) with every mode empty.
    pub fn amplitude(&self, flag: usize, reg: Outcome) -> C64 {
        let Ok((lay, fpos)) = fusion_layout(&self.state.space, self.kind) else {
            return C64::new(0.0, 0.0);
        };
        let label = crate::hilbert::BasisLabel(register_label(&self.state.space, &lay, fpos, flag, reg));
        self.state.amplitude(&label)
    }

    /// Norm of each flag branch.
    pub fn flag_coeffs(&self) -> [f64; 4] {
        let (_, fpos) = fusion_layout(&self.state.space, self.kind).expect("fusion layout");
        let mut w = [0.0; 4];
        for (i, a) in self.state.amplitudes.iter().enumerate() {
            w[self.state.space.label_of(i).0[fpos] as usize] += a.norm_sqr();
        }
        w.map(f64::sqrt)
    }
}

/// Ideal two-atom gate on the register basis (g0g0, g0g1, g1g0, g1g1):
/// the singly-excited pair maps to `(|x> + s i |flip x>)/sqrt 2`.
#[derive(Clone, Debug)]
pub struct GateMap {
    pub sign: f64,
    pub matrix: Matrix4<C64>,
}

/// Relative phase sign of the flipped component for each model, as
/// produced by the full Hamiltonian with Stark compensation.
pub fn gate_sign(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::SingleCavity => -1.0,
        ModelKind::CavityFiber => 1.0,
    }
}

pub fn ideal_gate_map(kind: ModelKind) -> GateMap {
    let s = gate_sign(kind);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let one = C64::new(1.0, 0.0);
    let d = C64::new(r, 0.0);
    let x = C64::new(0.0, s * r);
    let z = C64::new(0.0, 0.0);
    #[rustfmt::skip]
    let matrix = Matrix4::new(
        one, z, z, z,
        z,   d, x, z,
        z,   x, d, z,
        z,   z, z, one,
    );
    GateMap { sign: s, matrix }
}

impl GateMap {
    /// `|<out|G|in>|^2` as exact rationals.
    pub fn transition_weights(&self) -> [[Ratio<u64>; 4]; 4] {
        let mut w = [[Ratio::from_integer(0); 4]; 4];
        for (o, row) in w.iter_mut().enumerate() {
            for (i, cell) in row.iter_mut().enumerate() {
                let p = self.matrix[(o, i)].norm_sqr();
                *cell = if p > 0.75 {
                    Ratio::from_integer(1)
                } else if p > 0.25 {
                    Ratio::new(1, 2)
                } else {
                    Ratio::from_integer(0)
                };
            }
        }
        w
    }

    pub fn unitarity_defect(&self) -> f64 {
        let p = self.matrix.adjoint() * self.matrix - Matrix4::identity();
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Applies the gate to the extracted pair in every flag branch.
pub fn apply_fusion(state: &BranchState, map: &GateMap) -> Result<BranchState> {
    let space = &state.state.space;
    let (lay, _) = fusion_layout(space, state.kind)?;
    let modes = lay.modes();
    let mut out = StateVector::zeros(space);
    let mut stray = 0.0;
    for (i, a) in state.state.amplitudes.iter().enumerate() {
        if a.norm() == 0.0 {
            continue;
        }
        let label = space.label_of(i);
        let reg = Outcome::from_levels(label.0[lay.atoms[0]], label.0[lay.atoms[1]]);
        let (Some(reg), true) = (reg, modes.iter().all(|&p| label.0[p] == 0)) else {
            stray += a.norm_sqr();
            continue;
        };
        for o in Outcome::ALL {
            let g = map.matrix[(o.index(), reg.index())];
            if g.norm() == 0.0 {
                continue;
            }
            let mut l = label.clone();
            let (x, y) = o.levels();
            l.0[lay.atoms[0]] = x;
            l.0[lay.atoms[1]] = y;
            let j = space.check_label(&l)?;
            out.amplitudes[j] += g * a;
        }
    }
    if stray > 1e-6 {
        return Err(Error::InvalidFusion(format!(
            "population {stray:.3e} outside the encoded ground manifold"
        )));
    }
    Ok(BranchState {
        state: out,
        ..state.clone()
    })
}

/// One detection outcome with its probability and conditional state.
#[derive(Clone, Debug, Serialize)]
pub struct FusionOutcome {
    pub label: Outcome,
    pub probability: f64,
    pub classification: Classification,
    /// Normalized spectator state in flag coordinates; `None` for
    /// zero-probability outcomes.
    #[serde(skip)]
    pub flags: Option<[C64; 4]>,
}

#[derive(Clone, Debug)]
pub struct Measurement {
    pub n: usize,
    pub m: usize,
    pub outcomes: Vec<FusionOutcome>,
    pub sampled: Option<Outcome>,
}

impl Measurement {
    pub fn outcome(&self, label: Outcome) -> &FusionOutcome {
        &self.outcomes[label.index()]
    }

    pub fn mass(&self, class: &str) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| o.classification.name() == class)
            .map(|o| o.probability)
            .sum()
    }
}

/// Projective measurement of both extracted atoms in {g0, g1}.
pub fn measure_atoms<R: Rng + ?Sized>(state: &BranchState, rng: Option<&mut R>) -> Result<Measurement> {
    let space = &state.state.space;
    let (lay, fpos) = fusion_layout(space, state.kind)?;
    let mut flags = [[C64::new(0.0, 0.0); 4]; 4];
    let mut probs = [0.0; 4];
    for (i, a) in state.state.amplitudes.iter().enumerate() {
        let l = space.label_of(i);
        if let Some(o) = Outcome::from_levels(l.0[lay.atoms[0]], l.0[lay.atoms[1]]) {
            probs[o.index()] += a.norm_sqr();
            if lay.modes().iter().all(|&p| l.0[p] == 0) {
                flags[o.index()][l.0[fpos] as usize] += a;
            }
        }
    }
    let outcomes = Outcome::ALL
        .iter()
        .map(|&o| {
            let p = probs[o.index()];
            let f = flags[o.index()];
            let norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            FusionOutcome {
                label: o,
                probability: p,
                classification: classify(o, state.n, state.m),
                flags: (norm > 1e-12).then(|| f.map(|z| z / norm)),
            }
        })
        .collect::<Vec<_>>();
    let sampled = match rng {
        Some(rng) => {
            let dist = WeightedIndex::new(probs.iter().map(|p| p.max(0.0)))
                .map_err(|e| Error::InvalidFusion(e.to_string()))?;
            Some(Outcome::ALL[dist.sample(rng)])
        }
        None => None,
    };
    Ok(Measurement {
        n: state.n,
        m: state.m,
        outcomes,
        sampled,
    })
}

/// Detection probabilities for a mixed state (e.g. after dissipative
/// evolution). Population outside the ground manifold is reported as
/// `leaked`.
pub fn outcome_distribution(rho: &DensityOperator, kind: ModelKind) -> Result<([f64; 4], f64)> {
    let space = &rho.space;
    let (lay, _) = fusion_layout(space, kind)?;
    let mut p = [0.0; 4];
    let mut leaked = 0.0;
    for i in 0..space.dim() {
        let l = space.label_of(i);
        let w = rho.matrix[(i, i)].re;
        match Outcome::from_levels(l.0[lay.atoms[0]], l.0[lay.atoms[1]]) {
            Some(o) => p[o.index()] += w,
            None => leaked += w,
        }
    }
    Ok((p, leaked))
}

/// Exact outcome probabilities for the ideal protocol.
pub fn exact_distribution(n: usize, m: usize, kind: ModelKind) -> Result<[Ratio<u64>; 4]> {
    check_sizes(n, m)?;
    let (nn, mm) = (n as u64, m as u64);
    let d = nn * mm;
    let flag_w = [
        Ratio::new(1, d),
        Ratio::new(mm - 1, d),
        Ratio::new(nn - 1, d),
        Ratio::new((nn - 1) * (mm - 1), d),
    ];
    let t = ideal_gate_map(kind).transition_weights();
    let mut out = [Ratio::from_integer(0); 4];
    for (f, w) in flag_w.iter().enumerate() {
        let input = FLAG_REGISTER[f].index();
        for (o, slot) in out.iter_mut().enumerate() {
            *slot += *w * t[o][input];
        }
    }
    Ok(out)
}

/// `(n + m - 2) / (n m)`.
pub fn success_probability(n: usize, m: usize) -> Result<Ratio<u64>> {
    check_sizes(n, m)?;
    Ok(Ratio::new((n + m - 2) as u64, (n * m) as u64))
}

/// Phase factors a party's single-qubit gate `g1 -> i g1` on its remaining
/// atoms puts on each flag: exactly one excitation in a W tail, none in an
/// all-g0 tail.
pub fn flag_phase_gate(party: Party) -> [C64; 4] {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match party {
        Party::Alice => [one, one, i, i],
        Party::Bob => [one, i, one, i],
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Correction {
    pub party: Party,
    pub size: usize,
    /// Corrected spectator flag amplitudes with the global phase removed.
    #[serde(skip)]
    pub flags: [C64; 4],
}

/// All nonzero entries share one complex argument.
pub fn uniform_phase(v: &[C64], tol: f64) -> bool {
    let Some(r) = v.iter().find(|z| z.norm() > tol) else {
        return true;
    };
    let r = r / r.norm();
    v.iter()
        .filter(|z| z.norm() > tol)
        .all(|z| (z / z.norm() - r).norm() < tol.max(1e-9))
}

/// Chooses the party whose phase gate makes the success branch a uniform
/// superposition of TW and WT, i.e. W(n+m-2).
pub fn correct_phase(outcome: &FusionOutcome) -> Result<Correction> {
    let Classification::Success { size } = outcome.classification else {
        return Err(Error::InvalidFusion(format!(
            "no phase correction for {} outcome {}",
            outcome.classification.name(),
            outcome.label
        )));
    };
    let flags = outcome
        .flags
        .ok_or_else(|| Error::InvalidFusion("outcome has zero probability".into()))?;
    for party in [Party::Alice, Party::Bob] {
        let g = flag_phase_gate(party);
        let mut c = [C64::new(0.0, 0.0); 4];
        for f in 0..4 {
            c[f] = g[f] * flags[f];
        }
        if uniform_phase(&c, 1e-9) {
            let r = c.iter().find(|z| z.norm() > 1e-9).copied().unwrap_or(C64::new(1.0, 0.0));
            let phase = r / r.norm();
            return Ok(Correction {
                party,
                size,
                flags: c.map(|z| z / phase),
            });
        }
    }
    Err(Error::InvalidFusion(format!(
        "no single-party phase gate equalizes outcome {}",
        outcome.label
    )))
}

/// Post-gate ideal state of the protocol; fidelity target for dynamics.
pub fn ideal_target_state_on(
    space: &Arc<SpaceDescriptor>,
    n: usize,
    m: usize,
    kind: ModelKind,
) -> Result<StateVector> {
    let init = initial_branch_state_on(space, n, m, kind)?;
    Ok(apply_fusion(&init, &ideal_gate_map(kind))?.state)
}

pub fn ideal_target_state(n: usize, m: usize, kind: ModelKind) -> Result<StateVector> {
    ideal_target_state_on(&fusion_space(kind, 2)?, n, m, kind)
}

/// Everything needed to simulate one fusion attempt with the full model.
#[derive(Clone, Debug)]
pub struct FusionScenario {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub n: usize,
    pub m: usize,
    pub space: Arc<SpaceDescriptor>,
    pub hamiltonian: OperatorMatrix,
    pub collapse: Vec<OperatorMatrix>,
    pub initial: StateVector,
    pub target: StateVector,
    pub gate_time: f64,
}

impl FusionScenario {
    pub fn new(kind: ModelKind, params: &ModelParams, n: usize, m: usize, compensate: bool) -> Result<Self> {
        params.validate()?;
        let space = fusion_space(kind, params.n_max)?;
        let hamiltonian = model_hamiltonian(params, &space, kind)?
            .add(&stark_compensation(params, &space, kind, compensate)?)?;
        Ok(FusionScenario {
            kind,
            params: params.clone(),
            n,
            m,
            collapse: collapse_operators(params, &space, kind)?,
            initial: initial_branch_state_on(&space, n, m, kind)?.state,
            target: ideal_target_state_on(&space, n, m, kind)?,
            gate_time: gate_time(params)?,
            hamiltonian,
            space,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkStats {
    pub trials: u64,
    pub successes: u64,
    pub target: usize,
    /// Largest W state left in the pool when a trial ends.
    pub terminal_size_histogram: BTreeMap<usize, u64>,
    pub mean_attempts: f64,
    pub seed: u64,
}

impl NetworkStats {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Per-trial generator: trial `i` uses seed `master ^ i`.
pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master ^ trial)
}

/// Result of one trial: (reached target, attempts, largest remaining state).
pub fn run_network_trial<R: Rng + ?Sized>(pool: &[usize], target: usize, rng: &mut R) -> (bool, u64, usize) {
    let mut pool: Vec<usize> = pool.iter().copied().filter(|&k| k >= 2).collect();
    let mut attempts = 0;
    let mut reached = false;
    while pool.len() >= 2 {
        pool.sort_unstable();
        let a = pool.pop().expect("two states");
        let b = pool.pop().expect("two states");
        attempts += 1;
        let (a64, b64) = (a as u64, b as u64);
        let weights = [1, (a64 - 1) * (b64 - 1), a64 + b64 - 2];
        let dist = WeightedIndex::new(weights).expect("positive weights");
        match dist.sample(rng) {
            0 => {}
            1 => pool.extend([a - 1, b - 1].into_iter().filter(|&k| k >= 2)),
            _ => {
                let size = a + b - 2;
                pool.push(size);
                if size >= target {
                    reached = true;
                    break;
                }
            }
        }
    }
    (reached, attempts, pool.iter().copied().max().unwrap_or(0))
}

/// Monte Carlo over repeated fusion of a pool of W states, always fusing
/// the two largest. Failure destroys both inputs, recycling returns the
/// shortened states (W1 is dropped), success adds the fused state.
pub fn simulate_network(initial_pool: &[usize], target: usize, trials: u64, seed: u64) -> Result<NetworkStats> {
    if target < 2 {
        return Err(Error::InvalidFusion(format!("target size {target} below 2")));
    }
    if trials == 0 {
        return Err(Error::InvalidFusion("at least one trial required".into()));
    }
    if initial_pool.is_empty() || initial_pool.contains(&0) {
        return Err(Error::InvalidFusion("pool must be non-empty with positive sizes".into()));
    }
    let mut hist = BTreeMap::new();
    let mut successes = 0;
    let mut attempts = 0;
    for i in 0..trials {
        let mut rng = trial_rng(seed, i);
        let (ok, a, size) = run_network_trial(initial_pool, target, &mut rng);
        successes += ok as u64;
        attempts += a;
        *hist.entry(size).or_insert(0) += 1;
    }
    Ok(NetworkStats {
        trials,
        successes,
        target,
        terminal_size_histogram: hist,
        mean_attempts: attempts as f64 / trials as f64,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [ModelKind; 2] = [ModelKind::SingleCavity, ModelKind::CavityFiber];

    #[test]
    fn w_state_coefficients() {
        let w1 = w_state(1).unwrap();
        assert_eq!(w1.excited_coeff, 1.0);
        assert_eq!(w1.ground_coeff, 0.0);
        let w2 = w_state(2).unwrap();
        assert!((w2.excited_coeff - w2.ground_coeff).abs() < 1e-15);
        assert!(w_state(0).is_err());
        let (a, b) = w_state(7).unwrap().weights();
        assert_eq!(a + b, Ratio::from_integer(1));
    }

    #[test]
    fn initial_amplitudes() {
        let s = initial_branch_state(5, 5, ModelKind::SingleCavity).unwrap();
        assert!((s.amplitude(FLAG_WW, Outcome::G0G0).re - 0.8).abs() < 1e-15);
        let s = initial_branch_state(2, 2, ModelKind::CavityFiber).unwrap();
        for (f, reg) in FLAG_REGISTER.iter().enumerate() {
            assert!((s.amplitude(f, *reg).re - 0.5).abs() < 1e-15);
        }
        assert!((s.state.norm() - 1.0).abs() < 1e-14);
        assert!(initial_branch_state(1, 3, ModelKind::SingleCavity).is_err());
    }

    #[test]
    fn gate_maps() {
        for kind in KINDS {
            let g = ideal_gate_map(kind);
            assert!(g.unitarity_defect() < 1e-15);
            assert_eq!(g.matrix[(0, 0)], C64::new(1.0, 0.0));
            assert_eq!(g.matrix[(3, 3)], C64::new(1.0, 0.0));
        }
        let s = ideal_gate_map(ModelKind::SingleCavity).matrix;
        assert!(s[(Outcome::G1G0.index(), Outcome::G0G1.index())].im < 0.0);
        let f = ideal_gate_map(ModelKind::CavityFiber).matrix;
        assert!(f[(Outcome::G1G0.index(), Outcome::G0G1.index())].im > 0.0);
    }

    #[test]
    fn target_state_five_five() {
        let t = ideal_target_state(5, 5, ModelKind::SingleCavity).unwrap();
        let s = initial_branch_state(5, 5, ModelKind::SingleCavity).unwrap();
        let b = BranchState { state: t, ..s };
        let r = std::f64::consts::FRAC_1_SQRT_2 * 0.4;
        let close = |a: C64, re: f64, im: f64| (a - C64::new(re, im)).norm() < 1e-15;
        assert!(close(b.amplitude(FLAG_TT, Outcome::G1G1), 0.2, 0.0));
        assert!(close(b.amplitude(FLAG_TW, Outcome::G1G0), r, 0.0));
        assert!(close(b.amplitude(FLAG_TW, Outcome::G0G1), 0.0, -r));
        assert!(close(b.amplitude(FLAG_WT, Outcome::G0G1), r, 0.0));
        assert!(close(b.amplitude(FLAG_WT, Outcome::G1G0), 0.0, -r));
        assert!(close(b.amplitude(FLAG_WW, Outcome::G0G0), 0.8, 0.0));
        assert!((b.state.norm() - 1.0).abs() < 1e-14);
        let f = ideal_target_state(5, 5, ModelKind::CavityFiber).unwrap();
        let fb = BranchState {
            state: f,
            ..initial_branch_state(5, 5, ModelKind::CavityFiber).unwrap()
        };
        assert!(close(fb.amplitude(FLAG_TW, Outcome::G0G1), 0.0, r));
    }

    #[test]
    fn measurement_five_five() {
        let kind = ModelKind::SingleCavity;
        let s = apply_fusion(&initial_branch_state(5, 5, kind).unwrap(), &ideal_gate_map(kind)).unwrap();
        let meas = measure_atoms::<ChaCha8Rng>(&s, None).unwrap();
        assert!((meas.outcome(Outcome::G1G1).probability - 1.0 / 25.0).abs() < 1e-15);
        assert!((meas.outcome(Outcome::G0G0).probability - 16.0 / 25.0).abs() < 1e-15);
        assert!((meas.mass("success") - 8.0 / 25.0).abs() < 1e-15);
        assert_eq!(meas.outcome(Outcome::G1G1).classification, Classification::Failure);
        let g10 = meas.outcome(Outcome::G1G0).flags.unwrap();
        // sqrt(m-1) TW - i sqrt(n-1) WT, normalized
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((g10[FLAG_TW] - C64::new(r, 0.0)).norm() < 1e-14);
        assert!((g10[FLAG_WT] - C64::new(0.0, -r)).norm() < 1e-14);
    }

    #[test]
    fn corrections() {
        let cases = [
            (ModelKind::SingleCavity, Outcome::G1G0, Party::Alice),
            (ModelKind::SingleCavity, Outcome::G0G1, Party::Bob),
            (ModelKind::CavityFiber, Outcome::G1G0, Party::Bob),
            (ModelKind::CavityFiber, Outcome::G0G1, Party::Alice),
        ];
        for (kind, label, party) in cases {
            let s = apply_fusion(&initial_branch_state(4, 3, kind).unwrap(), &ideal_gate_map(kind)).unwrap();
            let meas = measure_atoms::<ChaCha8Rng>(&s, None).unwrap();
            let c = correct_phase(meas.outcome(label)).unwrap();
            assert_eq!(c.party, party, "{kind:?} {label}");
            assert_eq!(c.size, 5);
            // sqrt(m-1) TW + sqrt(n-1) WT
            let norm = (2.0f64 + 3.0).sqrt();
            assert!((c.flags[FLAG_TW] - C64::new(2f64.sqrt() / norm, 0.0)).norm() < 1e-12);
            assert!((c.flags[FLAG_WT] - C64::new(3f64.sqrt() / norm, 0.0)).norm() < 1e-12);
            assert!(correct_phase(meas.outcome(Outcome::G0G0)).is_err());
            assert!(correct_phase(meas.outcome(Outcome::G1G1)).is_err());
        }
    }

    #[test]
    fn success_probabilities() {
        assert_eq!(success_probability(5, 5).unwrap(), Ratio::new(8, 25));
        assert_eq!(success_probability(2, 2).unwrap(), Ratio::new(1, 2));
        assert!(success_probability(1, 4).is_err());
        for n in 2..=12 {
            for m in 2..=12 {
                let d = exact_distribution(n, m, ModelKind::SingleCavity).unwrap();
                assert_eq!(d.iter().sum::<Ratio<u64>>(), Ratio::from_integer(1));
                assert_eq!(d[Outcome::G0G1.index()] + d[Outcome::G1G0.index()], success_probability(n, m).unwrap());
            }
        }
    }

    #[test]
    fn apply_fusion_rejects_photons() {
        let kind = ModelKind::SingleCavity;
        let s = initial_branch_state(3, 3, kind).unwrap();
        let sp = s.state.space.clone();
        let mut bad = s.clone();
        let i = sp.index_of(&sp.parse_label("0,g0,g0,1").unwrap()).unwrap();
        bad.state.amplitudes[i] = C64::new(0.1, 0.0);
        assert!(apply_fusion(&bad, &ideal_gate_map(kind)).is_err());
    }

    #[test]
    fn network_small_pools() {
        let a = simulate_network(&[2, 2], 2, 2000, 7).unwrap();
        let b = simulate_network(&[2, 2], 2, 2000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.terminal_size_histogram.values().sum::<u64>(), 2000);
        assert!((a.mean_attempts - 1.0).abs() < 1e-12);
        assert!(simulate_network(&[2, 2], 1, 10, 0).is_err());
        assert!(simulate_network(&[], 4, 10, 0).is_err());
        let lone = simulate_network(&[6], 4, 5, 0).unwrap();
        assert_eq!(lone.successes, 0);
        assert_eq!(lone.terminal_size_histogram[&6], 5);
    }
}
