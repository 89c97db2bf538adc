//! Quantum Zeno machinery: closed-subspace discovery, eigenprojections of
//! the strong coupling, the projected Zeno Hamiltonian, the limiting
//! propagator check and second-order adiabatic elimination.
//!
//! Nothing here is specific to the two cavity models; the model chain in
//! [`analyze_model`] just wires the generic pieces together.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{hamiltonian_parts, model_space, ModelKind, ModelParams};
use crate::hilbert::{
    max_modulus, BasisLabel, CsrMatrix, OperatorMatrix, SpaceDescriptor, StateVector,
};
use crate::C64;

/// Indices reachable from `seeds` by repeated application of any of `ops`.
/// Returned sorted ascending.
pub fn reachable_indices(ops: &[&CsrMatrix], seeds: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let Some(n) = ops.first().map(|o| o.dim()) else {
        let mut s: Vec<usize> = seeds.into_iter().collect();
        s.sort_unstable();
        s.dedup();
        return s;
    };
    // column i of op lists where |i> is sent; rows of the adjoint give that
    let cols: Vec<CsrMatrix> = ops.iter().map(|o| o.adjoint()).collect();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for s in seeds {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        for c in &cols {
            for (j, _) in c.row(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

/// Minimal H-invariant set of basis labels containing the seed's support.
pub fn closed_subspace(h: &OperatorMatrix, seed: &StateVector) -> Result<Vec<BasisLabel>> {
    if *h.space != *seed.space {
        return Err(Error::SpaceMismatch);
    }
    let support = seed
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(i, _)| i);
    let idx = reachable_indices(&[&h.entries], support);
    Ok(idx.into_iter().map(|i| h.space.label_of(i).clone()).collect())
}

fn label_indices(space: &SpaceDescriptor, labels: &[BasisLabel]) -> Result<Vec<usize>> {
    labels.iter().map(|l| space.check_label(l)).collect()
}

/// One eigenvalue cluster of the measurement Hamiltonian.
#[derive(Clone, Debug)]
pub struct ZenoBlock {
    pub eta: f64,
    /// Projector in subspace coordinates.
    pub projector: DMatrix<C64>,
    pub rank: usize,
}

/// Spectral decomposition `H_meas = sum_n eta_n P_n` over a subspace.
#[derive(Clone, Debug)]
pub struct ZenoDecomposition {
    pub space: Arc<SpaceDescriptor>,
    pub subspace: Vec<BasisLabel>,
    pub indices: Vec<usize>,
    /// Sorted by ascending eigenvalue.
    pub blocks: Vec<ZenoBlock>,
}

impl ZenoDecomposition {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.eta).collect()
    }

    /// Eigenvalues repeated by multiplicity.
    pub fn spectrum(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat(b.eta).take(b.rank))
            .collect()
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        let k = self.dim();
        self.blocks
            .iter()
            .fold(DMatrix::zeros(k, k), |acc, b| acc + b.projector.scale(b.eta))
    }

    /// Block containing most of the weight of `label`.
    pub fn block_of(&self, label: &BasisLabel) -> Option<usize> {
        let pos = self.subspace.iter().position(|l| l == label)?;
        self.blocks
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.projector[(pos, pos)].re.total_cmp(&b.1.projector[(pos, pos)].re))
            .map(|(i, _)| i)
    }

    /// Projector of block `n` embedded in the full space.
    pub fn projector_full(&self, n: usize) -> OperatorMatrix {
        OperatorMatrix::new(
            &self.space,
            embed(&self.blocks[n].projector, &self.indices, self.space.dim()),
            true,
        )
    }
}

fn embed(m: &DMatrix<C64>, idx: &[usize], n: usize) -> CsrMatrix {
    let t = (0..idx.len())
        .flat_map(|a| (0..idx.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| m[(a, b)].norm() > 1e-15)
        .map(|(a, b)| (idx[a], idx[b], m[(a, b)]));
    CsrMatrix::from_triplets(n, t.collect::<Vec<_>>())
}

/// Eigenprojections of a dense Hermitian matrix, clustered within `tol`
/// (default `1e-8 * ||H||`).
pub fn eigenprojections_dense(h: &DMatrix<C64>, tol: Option<f64>) -> Result<Vec<ZenoBlock>> {
    let scale = max_modulus(h).max(1.0);
    let defect = max_modulus(&(h - h.adjoint()));
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian(defect));
    }
    let k = h.nrows();
    if k == 0 {
        return Ok(Vec::new());
    }
    let eig = h.clone().symmetric_eigen();
    let norm = eig.eigenvalues.iter().fold(0.0, |m: f64, e| m.max(e.abs()));
    let tol = tol.unwrap_or(1e-8 * norm).max(1e-12);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut blocks: Vec<(Vec<usize>, f64)> = Vec::new();
    for &i in &order {
        let e = eig.eigenvalues[i];
        match blocks.last_mut() {
            Some((members, last)) if (e - *last).abs() <= tol => {
                members.push(i);
                *last = e;
            }
            _ => blocks.push((vec![i], e)),
        }
    }
    Ok(blocks
        .into_iter()
        .map(|(members, _)| {
            let eta = members.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / members.len() as f64;
            let mut p = DMatrix::zeros(k, k);
            for &i in &members {
                let v = eig.eigenvectors.column(i);
                p += &v * v.adjoint();
            }
            ZenoBlock {
                eta,
                projector: p,
                rank: members.len(),
            }
        })
        .collect())
}

/// Clusters the spectrum of `h_meas` restricted to `subspace` into joint
/// eigenprojections.
pub fn eigenprojections(
    h_meas: &OperatorMatrix,
    subspace: &[BasisLabel],
    degeneracy_tol: Option<f64>,
) -> Result<ZenoDecomposition> {
    let indices = label_indices(&h_meas.space, subspace)?;
    let h = h_meas.entries.restrict(&indices).to_dense();
    let blocks = eigenprojections_dense(&h, degeneracy_tol)?;
    Ok(ZenoDecomposition {
        space: h_meas.space.clone(),
        subspace: subspace.to_vec(),
        indices,
        blocks,
    })
}

/// `sum_n P_n H P_n` in dense subspace coordinates.
pub fn zeno_project(h_obs: &DMatrix<C64>, blocks: &[ZenoBlock]) -> DMatrix<C64> {
    let k = h_obs.nrows();
    blocks.iter().fold(DMatrix::zeros(k, k), |acc, b| {
        acc + &b.projector * h_obs * &b.projector
    })
}

/// Zeno Hamiltonian `H_Z = sum_n P_n H_obs P_n`, embedded in the full space
/// (zero outside the analysed subspace).
pub fn zeno_hamiltonian(h_obs: &OperatorMatrix, dec: &ZenoDecomposition) -> Result<OperatorMatrix> {
    if *h_obs.space != *dec.space {
        return Err(Error::SpaceMismatch);
    }
    let h = h_obs.entries.restrict(&dec.indices).to_dense();
    let hz = zeno_project(&h, &dec.blocks);
    Ok(OperatorMatrix::new(
        &dec.space,
        embed(&hz, &dec.indices, dec.space.dim()),
        true,
    ))
}

/// `exp(-i H t)` for Hermitian `H` via its eigendecomposition.
pub fn hermitian_propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|e| C64::from_polar(1.0, -e * t)),
    );
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

/// Max-norm distance between the exact propagator of `H_obs + K H_meas`
/// and its Zeno-limit factorization `exp(-i K H_meas t) exp(-i H_Z t)`.
pub fn limiting_propagator_error(
    h_obs: &DMatrix<C64>,
    h_meas: &DMatrix<C64>,
    k: f64,
    t: f64,
) -> Result<f64> {
    if h_obs.shape() != h_meas.shape() {
        return Err(Error::DimensionMismatch(h_obs.nrows(), h_meas.nrows()));
    }
    let blocks = eigenprojections_dense(h_meas, None)?;
    let hz = zeno_project(h_obs, &blocks);
    let exact = hermitian_propagator(&(h_obs + h_meas.scale(k)), t);
    let fast = blocks.iter().fold(DMatrix::zeros(h_obs.nrows(), h_obs.ncols()), |acc, b| {
        acc + b.projector.map(|z| z * C64::from_polar(1.0, -k * b.eta * t))
    });
    let limit = fast * hermitian_propagator(&hz, t);
    Ok(max_modulus(&(exact - limit)))
}

#[derive(Clone, Debug, Serialize)]
pub struct EliminatedState {
    pub energy: f64,
    /// Components over subspace labels (formatted).
    pub components: Vec<(String, [f64; 2])>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RegimeReport {
    /// Largest |retained-eliminated coupling| / smallest |eliminated energy|.
    pub coupling_over_energy: f64,
    pub coupling_over_delta: f64,
    pub omega_over_lambda: Option<f64>,
    pub omega_over_delta: Option<f64>,
}

/// Second-order effective generator on the retained manifold.
#[derive(Clone, Debug)]
pub struct EffectiveModel {
    pub h_zeno: OperatorMatrix,
    pub retained: Vec<BasisLabel>,
    /// Includes the diagonal Stark shifts.
    pub h_effective: OperatorMatrix,
    /// Same generator with its diagonal removed.
    pub h_compensated: OperatorMatrix,
    pub eliminated: Vec<EliminatedState>,
    pub regime: RegimeReport,
}

impl EffectiveModel {
    /// Dense effective matrix over `retained` (in that order).
    pub fn retained_matrix(&self, compensated: bool) -> DMatrix<C64> {
        let op = if compensated {
            &self.h_compensated
        } else {
            &self.h_effective
        };
        let k = self.retained.len();
        DMatrix::from_fn(k, k, |a, b| op.get(&self.retained[a], &self.retained[b]))
    }
}

/// Adiabatically eliminates everything in the Zeno block(s) of `retained`
/// that is not itself retained.
///
/// The block is found as the smallest `h_zeno`-invariant subspace containing
/// the retained basis states. Its orthogonal complement to the retained
/// states is diagonalized; each eigenvector `x` with energy `E_x` contributes
/// `-V[r,x] V[x,r'] / E_x` to the effective generator.
pub fn adiabatic_eliminate(
    h_zeno: &OperatorMatrix,
    retained: &[BasisLabel],
    delta: f64,
) -> Result<EffectiveModel> {
    let space = &h_zeno.space;
    let ret_idx = label_indices(space, retained)?;
    let idx = reachable_indices(&[&h_zeno.entries], ret_idx.iter().copied());
    let hz = h_zeno.entries.restrict(&idx).to_dense();
    let k = idx.len();
    let scale = max_modulus(&hz).max(f64::MIN_POSITIVE);
    let local = |i: usize| idx.iter().position(|&j| j == i).expect("retained in closure");

    // Krylov closure of span(retained)
    let mut basis: Vec<DVector<C64>> = ret_idx
        .iter()
        .map(|&i| {
            let mut v = DVector::zeros(k);
            v[local(i)] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    let mut next = 0;
    while next < basis.len() {
        let mut w = &hz * &basis[next];
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&w);
                w.axpy(-c, b, C64::new(1.0, 0.0));
            }
        }
        let n = w.norm();
        if n > 1e-10 * scale {
            basis.push(w.unscale(n));
        }
        next += 1;
    }
    let n_ret = ret_idx.len();
    let comp = &basis[n_ret..];

    let mut eliminated_vecs = Vec::new();
    let mut energies = Vec::new();
    if !comp.is_empty() {
        let c = DMatrix::from_columns(comp);
        let hcc = c.adjoint() * &hz * &c;
        let hcc = (&hcc + hcc.adjoint()).scale(0.5);
        let eig = hcc.symmetric_eigen();
        for (j, &e) in eig.eigenvalues.iter().enumerate() {
            eliminated_vecs.push(&c * eig.eigenvectors.column(j));
            energies.push(e);
        }
    }
    if let Some(e) = energies.iter().find(|e| e.abs() < 1e-8 * scale) {
        return Err(Error::SmallEnergy(*e));
    }

    let couplings: Vec<Vec<C64>> = ret_idx
        .iter()
        .map(|&r| eliminated_vecs.iter().map(|x| (&hz * x)[local(r)].conj().conj()).collect())
        .collect();
    // couplings[r][x] = <r|H|x>
    let mut heff = DMatrix::<C64>::zeros(n_ret, n_ret);
    for a in 0..n_ret {
        for b in 0..n_ret {
            let mut s = hz[(local(ret_idx[a]), local(ret_idx[b]))];
            for (x, e) in energies.iter().enumerate() {
                s -= couplings[a][x] * couplings[b][x].conj() / *e;
            }
            heff[(a, b)] = s;
        }
    }
    let mut hcomp = heff.clone();
    hcomp.fill_diagonal(C64::new(0.0, 0.0));

    let to_full = |m: &DMatrix<C64>| {
        let t = (0..n_ret)
            .flat_map(|a| (0..n_ret).map(move |b| (a, b)))
            .map(|(a, b)| (ret_idx[a], ret_idx[b], m[(a, b)]));
        OperatorMatrix::new(space, CsrMatrix::from_triplets(space.dim(), t.collect::<Vec<_>>()), true)
    };

    let max_v = couplings
        .iter()
        .flatten()
        .fold(0.0, |m: f64, v| m.max(v.norm()));
    let min_e = energies.iter().fold(f64::INFINITY, |m: f64, e| m.min(e.abs()));
    let eliminated = eliminated_vecs
        .iter()
        .zip(&energies)
        .map(|(x, e)| EliminatedState {
            energy: *e,
            components: x
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm() > 1e-12)
                .map(|(i, a)| (space.format_label(space.label_of(idx[i])), [a.re, a.im]))
                .collect(),
        })
        .collect();

    Ok(EffectiveModel {
        h_zeno: h_zeno.clone(),
        retained: retained.to_vec(),
        h_effective: to_full(&heff),
        h_compensated: to_full(&hcomp),
        eliminated,
        regime: RegimeReport {
            coupling_over_energy: if energies.is_empty() { 0.0 } else { max_v / min_e },
            coupling_over_delta: max_v / delta,
            omega_over_lambda: None,
            omega_over_delta: None,
        },
    })
}

/// Gate time `Delta * pi / (2 Omega^2)`.
pub fn gate_time(params: &ModelParams) -> Result<f64> {
    if !(params.omega > 0.0) {
        return Err(Error::InvalidParameter("gate time needs omega > 0".into()));
    }
    Ok(params.delta * std::f64::consts::PI / (2.0 * params.omega * params.omega))
}

/// Full reduction chain for one of the cavity models, seeded with |g0 g1>.
#[derive(Clone, Debug)]
pub struct ZenoAnalysis {
    pub kind: ModelKind,
    pub decomposition: ZenoDecomposition,
    pub h_zeno: OperatorMatrix,
    pub effective: EffectiveModel,
}

/// Basis labels of the encoded pair (|g0 g1>, |g1 g0>) with every mode empty.
pub fn encoded_pair(space: &SpaceDescriptor, kind: ModelKind) -> Result<[BasisLabel; 2]> {
    let vac = vec!["0"; kind.mode_count()].join(",");
    Ok([
        space.parse_label(&format!("g0,g1,{vac}"))?,
        space.parse_label(&format!("g1,g0,{vac}"))?,
    ])
}

pub fn analyze_model(kind: ModelKind, params: &ModelParams) -> Result<ZenoAnalysis> {
    let space = model_space(kind, params.n_max.max(1), None, None)?;
    let parts = hamiltonian_parts(params, &space, kind)?;
    let pair = encoded_pair(&space, kind)?;
    let seed = crate::hilbert::ket(&space, &pair[0])?;
    let sub = closed_subspace(&parts.total(), &seed)?;
    let dec = eigenprojections(&parts.coupling, &sub, None)?;
    let hz = zeno_hamiltonian(&parts.observed(), &dec)?;
    let mut eff = adiabatic_eliminate(&hz, &pair, params.delta)?;
    eff.regime.omega_over_lambda = Some(params.omega / params.lambda);
    eff.regime.omega_over_delta = Some(params.omega / params.delta);
    Ok(ZenoAnalysis {
        kind,
        decomposition: dec,
        h_zeno: hz,
        effective: eff,
    })
}

impl ZenoAnalysis {
    pub fn to_json(&self) -> serde_json::Value {
        let space = &self.decomposition.space;
        let elements = |compensated: bool| {
            let m = self.effective.retained_matrix(compensated);
            let mut out = Vec::new();
            for (a, ra) in self.effective.retained.iter().enumerate() {
                for (b, rb) in self.effective.retained.iter().enumerate() {
                    out.push(serde_json::json!({
                        "row": space.format_label(ra),
                        "col": space.format_label(rb),
                        "value": [m[(a, b)].re, m[(a, b)].im],
                    }));
                }
            }
            out
        };
        serde_json::json!({
            "model": self.kind.name(),
            "subspace": self
                .decomposition
                .subspace
                .iter()
                .map(|l| space.format_label(l))
                .collect::<Vec<_>>(),
            "eigenvalues": self.decomposition.eigenvalues(),
            "multiplicities": self.decomposition.blocks.iter().map(|b| b.rank).collect::<Vec<_>>(),
            "eliminated": self.effective.eliminated,
            "effective": elements(false),
            "effective_compensated": elements(true),
            "regime": self.effective.regime,
        })
    }
}
