//! Model Hamiltonians, collapse operators, Stark compensation and phase
//! gates for the two cavity-QED geometries.
//!
//! Both models live in the interaction picture already, so operators are
//! built directly without any further frame change. Rates are expressed in
//! units of the atom-cavity coupling unless the caller normalizes otherwise.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, creation, diagonal_operator, product_operator, transition, CsrMatrix, Factor,
    Level, OperatorMatrix, SpaceDescriptor,
};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Two atoms in one cavity.
    SingleCavity,
    /// Two cavities joined by a single fiber mode; atom i sits in cavity i.
    CavityFiber,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SingleCavity => "single_cavity",
            ModelKind::CavityFiber => "cavity_fiber",
        }
    }

    pub fn mode_count(self) -> usize {
        match self {
            ModelKind::SingleCavity => 1,
            ModelKind::CavityFiber => 3,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_cavity" | "single-cavity" => Ok(ModelKind::SingleCavity),
            "cavity_fiber" | "cavity-fiber" => Ok(ModelKind::CavityFiber),
            _ => Err(Error::InvalidParameter(format!("unknown model `{s}`"))),
        }
    }
}

/// Physical rates and detunings plus truncation controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Atom-cavity coupling.
    pub lambda: f64,
    /// Classical Rabi frequency.
    pub omega: f64,
    /// Detuning.
    pub delta: f64,
    /// Cavity-fiber coupling.
    pub v: f64,
    pub kappa: f64,
    /// Total excited-state decay rate per atom, split equally over g0 and g1.
    pub gamma: f64,
    pub kappa_f: f64,
    /// Photon cutoff per mode.
    pub n_max: usize,
    /// Largest Omega/lambda accepted by [`ModelParams::validate`].
    pub zeno_ratio_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda: 1.0,
            omega: 0.01,
            delta: 0.8,
            v: 1.0,
            kappa: 0.0,
            gamma: 0.0,
            kappa_f: 0.0,
            n_max: 2,
            zeno_ratio_max: 0.1,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.omega >= 0.0) {
            return bad("omega must be non-negative");
        }
        if self.kappa < 0.0 || self.gamma < 0.0 || self.kappa_f < 0.0 {
            return bad("decay rates must be non-negative");
        }
        if self.omega / self.lambda > self.zeno_ratio_max {
            return Err(Error::InvalidParameter(format!(
                "omega/lambda = {} exceeds the Zeno limit {}",
                self.omega / self.lambda,
                self.zeno_ratio_max
            )));
        }
        Ok(())
    }

    /// Stark shift of the singly-excited ground pair, `-Omega^2/(2 Delta)`.
    pub fn stark_shift(&self) -> f64 {
        -self.omega * self.omega / (2.0 * self.delta)
    }
}

/// Factor positions of a model space.
#[derive(Clone, Debug)]
pub struct Layout {
    pub atoms: [usize; 2],
    /// Cavity mode of atom A and of atom B (the same mode in the single-cavity model).
    pub cavities: [usize; 2],
    pub fiber: Option<usize>,
    pub flag: Option<usize>,
}

impl Layout {
    pub fn modes(&self) -> Vec<usize> {
        let mut m = vec![self.cavities[0]];
        if let Some(f) = self.fiber {
            m.push(f);
        }
        if self.cavities[1] != self.cavities[0] {
            m.push(self.cavities[1]);
        }
        m
    }
}

/// Checks that `space` has exactly two atoms, the model's modes and at most
/// one flag factor. Fiber modes are ordered (cavity A, fiber, cavity B).
pub fn layout(space: &SpaceDescriptor, kind: ModelKind) -> Result<Layout> {
    let wrong = |reason: String| Error::WrongStructure {
        model: kind.name(),
        reason,
    };
    let atoms = space.atom_positions();
    let modes = space.mode_positions();
    let flags = space.positions(|f| matches!(f, Factor::Flag { .. }));
    if atoms.len() != 2 {
        return Err(wrong(format!("expected 2 atoms, found {}", atoms.len())));
    }
    if modes.len() != kind.mode_count() {
        return Err(wrong(format!(
            "expected {} modes, found {}",
            kind.mode_count(),
            modes.len()
        )));
    }
    if flags.len() > 1 {
        return Err(wrong("at most one flag factor".into()));
    }
    let (cavities, fiber) = match kind {
        ModelKind::SingleCavity => ([modes[0], modes[0]], None),
        ModelKind::CavityFiber => ([modes[0], modes[2]], Some(modes[1])),
    };
    Ok(Layout {
        atoms: [atoms[0], atoms[1]],
        cavities,
        fiber,
        flag: flags.first().copied(),
    })
}

/// Standard model space: optional flag register, two atoms, then the modes.
pub fn model_space(
    kind: ModelKind,
    n_max: usize,
    flag_dim: Option<usize>,
    sector_cap: Option<usize>,
) -> Result<Arc<SpaceDescriptor>> {
    let mut factors = Vec::new();
    if let Some(d) = flag_dim {
        factors.push(Factor::Flag { dim: d });
    }
    factors.extend([Factor::Atom, Factor::Atom]);
    factors.extend(std::iter::repeat(Factor::Mode { cutoff: n_max }).take(kind.mode_count()));
    Ok(Arc::new(SpaceDescriptor::new(factors, sector_cap)?))
}

fn mode_cutoff(space: &SpaceDescriptor, pos: usize) -> usize {
    match space.factors()[pos] {
        Factor::Mode { cutoff } => cutoff,
        _ => unreachable!("layout guarantees a mode"),
    }
}

fn hc(m: CsrMatrix) -> CsrMatrix {
    m.add(&m.adjoint())
}

/// The three pieces of a model Hamiltonian.
#[derive(Clone, Debug)]
pub struct HamiltonianParts {
    /// Atom-cavity (and cavity-fiber) coupling; the strong "measurement" part.
    pub coupling: OperatorMatrix,
    /// Classical drive on e <-> g1.
    pub drive: OperatorMatrix,
    /// Detuning of the excited levels.
    pub detuning: OperatorMatrix,
}

impl HamiltonianParts {
    pub fn total(&self) -> OperatorMatrix {
        let e = self
            .coupling
            .entries
            .add(&self.drive.entries)
            .add(&self.detuning.entries);
        OperatorMatrix::new(&self.coupling.space, e, true)
    }

    /// Everything except the coupling.
    pub fn observed(&self) -> OperatorMatrix {
        let e = self.drive.entries.add(&self.detuning.entries);
        OperatorMatrix::new(&self.coupling.space, e, true)
    }
}

pub fn hamiltonian_parts(
    params: &ModelParams,
    space: &Arc<SpaceDescriptor>,
    kind: ModelKind,
) -> Result<HamiltonianParts> {
    let lay = layout(space, kind)?;
    let n = space.dim();
    let real = |x: f64| C64::new(x, 0.0);
    let (g0, g1, e) = (Level::G0 as u8, Level::G1 as u8, Level::E as u8);

    let mut coupling = CsrMatrix::zeros(n);
    for (atom, cav) in lay.atoms.iter().zip(lay.cavities) {
        let a = annihilation(mode_cutoff(space, cav));
        let term = product_operator(space, &[(*atom, transition(e, g0)), (cav, a)]);
        coupling = coupling.add(&hc(term.scale(real(params.lambda))));
    }
    if let Some(f) = lay.fiber {
        let bdag = creation(mode_cutoff(space, f));
        for cav in lay.cavities {
            let a = annihilation(mode_cutoff(space, cav));
            let term = product_operator(space, &[(f, bdag.clone()), (cav, a)]);
            coupling = coupling.add(&hc(term.scale(real(params.v))));
        }
    }

    let mut drive = CsrMatrix::zeros(n);
    let mut detuning = CsrMatrix::zeros(n);
    for atom in lay.atoms {
        let d = product_operator(space, &[(atom, transition(e, g1))]);
        drive = drive.add(&hc(d.scale(real(params.omega))));
        let x = product_operator(space, &[(atom, transition(e, e))]);
        detuning = detuning.add(&x.scale(real(params.delta)));
    }

    Ok(HamiltonianParts {
        coupling: OperatorMatrix::new(space, coupling, true),
        drive: OperatorMatrix::new(space, drive, true),
        detuning: OperatorMatrix::new(space, detuning, true),
    })
}

/// `H = H_ac + H_al + H_e` for two atoms sharing one cavity.
pub fn single_cavity_hamiltonian(
    params: &ModelParams,
    space: &Arc<SpaceDescriptor>,
) -> Result<OperatorMatrix> {
    Ok(hamiltonian_parts(params, space, ModelKind::SingleCavity)?.total())
}

/// Two cavities coupled through one fiber mode with strength `v`.
pub fn cavity_fiber_hamiltonian(
    params: &ModelParams,
    space: &Arc<SpaceDescriptor>,
) -> Result<OperatorMatrix> {
    Ok(hamiltonian_parts(params, space, ModelKind::CavityFiber)?.total())
}

pub fn model_hamiltonian(
    params: &ModelParams,
    space: &Arc<SpaceDescriptor>,
    kind: ModelKind,
) -> Result<OperatorMatrix> {
    Ok(hamiltonian_parts(params, space, kind)?.total())
}

/// Lindblad operators: `sqrt(kappa) a` per cavity, `sqrt(kappa_f) b` for the
/// fiber, then `sqrt(gamma/2) |g0><e|` and `sqrt(gamma/2) |g1><e|` per atom.
/// Zero-rate channels are returned as zero operators so the list length is
/// fixed per model (5 single-cavity, 7 fiber).
pub fn collapse_operators(
    params: &ModelParams,
    space: &Arc<SpaceDescriptor>,
    kind: ModelKind,
) -> Result<Vec<OperatorMatrix>> {
    if params.kappa < 0.0 || params.gamma < 0.0 || params.kappa_f < 0.0 {
        return Err(Error::InvalidParameter("negative decay rate".into()));
    }
    let lay = layout(space, kind)?;
    let op = |terms: &[(usize, crate::hilbert::LocalOp)], rate: f64| {
        let m = product_operator(space, terms).scale(C64::new(rate.sqrt(), 0.0));
        OperatorMatrix::new(space, m, false)
    };
    let mut out = Vec::new();
    let cav_a = lay.cavities[0];
    out.push(op(&[(cav_a, annihilation(mode_cutoff(space, cav_a)))], params.kappa));
    if let Some(f) = lay.fiber {
        out.push(op(&[(f, annihilation(mode_cutoff(space, f)))], params.kappa_f));
        let cav_b = lay.cavities[1];
        out.push(op(&[(cav_b, annihilation(mode_cutoff(space, cav_b)))], params.kappa));
    }
    let (g0, g1, e) = (Level::G0 as u8, Level::G1 as u8, Level::E as u8);
    for atom in lay.atoms {
        out.push(op(&[(atom, transition(g0, e))], params.gamma / 2.0));
        out.push(op(&[(atom, transition(g1, e))], params.gamma / 2.0));
    }
    Ok(out)
}

/// Diagonal counter-term cancelling the second-order Stark shift of the
/// singly-excited ground pair: `+Omega^2/(2 Delta)` on |g0 g1> and |g1 g0>
/// with every mode in vacuum. Zero when `enabled` is false.
pub fn stark_compensation(
    params: &ModelParams,
    space: &Arc<SpaceDescriptor>,
    kind: ModelKind,
    enabled: bool,
) -> Result<OperatorMatrix> {
    let lay = layout(space, kind)?;
    if !enabled || params.omega == 0.0 {
        return Ok(OperatorMatrix::zeros(space));
    }
    let shift = -params.stark_shift();
    let modes = lay.modes();
    let (g0, g1) = (Level::G0 as u8, Level::G1 as u8);
    let d = diagonal_operator(space, |l| {
        let pair = (l.0[lay.atoms[0]], l.0[lay.atoms[1]]);
        let vacuum = modes.iter().all(|&m| l.0[m] == 0);
        if vacuum && (pair == (g0, g1) || pair == (g1, g0)) {
            C64::new(shift, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(OperatorMatrix::new(space, d, true))
}

/// Who holds an atom: Alice owns atom A (the first), Bob atom B.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn atom_index(self) -> usize {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
        }
    }
}

/// Diagonal phase gate `g0 -> g0, g1 -> i g1` on the party's atom.
pub fn phase_gate(space: &Arc<SpaceDescriptor>, party: Party) -> Result<OperatorMatrix> {
    let atoms = space.atom_positions();
    let pos = *atoms
        .get(party.atom_index())
        .ok_or_else(|| Error::InvalidParameter(format!("space has no atom for {party:?}")))?;
    let d = diagonal_operator(space, |l| {
        if l.0[pos] == Level::G1 as u8 {
            C64::new(0.0, 1.0)
        } else {
            C64::new(1.0, 0.0)
        }
    });
    Ok(OperatorMatrix::new(space, d, false))
}
