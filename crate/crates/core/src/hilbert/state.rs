use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::space::{BasisLabel, Factor, SpaceDescriptor};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Pure state on a composite space.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub space: Arc<SpaceDescriptor>,
    pub amplitudes: DVector<C64>,
}

/// Mixed state on a composite space; stored dense.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub space: Arc<SpaceDescriptor>,
    pub matrix: DMatrix<C64>,
}

/// Sparse operator on a composite space.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub space: Arc<SpaceDescriptor>,
    pub entries: CsrMatrix,
    pub hermitian_hint: bool,
}

fn same_space(a: &SpaceDescriptor, b: &SpaceDescriptor) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    if a != b {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// Basis ket for `label`.
pub fn ket(space: &Arc<SpaceDescriptor>, label: &BasisLabel) -> Result<StateVector> {
    let i = space.check_label(label)?;
    let mut amps = DVector::zeros(space.dim());
    amps[i] = C64::new(1.0, 0.0);
    Ok(StateVector {
        space: space.clone(),
        amplitudes: amps,
    })
}

/// Basis ket from a textual label such as `g0,g1,0`.
pub fn ket_str(space: &Arc<SpaceDescriptor>, label: &str) -> Result<StateVector> {
    ket(space, &space.parse_label(label)?)
}

/// Normalized linear combination of states sharing one space.
pub fn superpose(terms: &[(C64, &StateVector)]) -> Result<StateVector> {
    let first = terms.first().ok_or(Error::ZeroNorm)?.1;
    let mut amps = DVector::zeros(first.space.dim());
    for (c, v) in terms {
        same_space(&first.space, &v.space)?;
        amps.axpy(*c, &v.amplitudes, C64::new(1.0, 0.0));
    }
    StateVector {
        space: first.space.clone(),
        amplitudes: amps,
    }
    .normalized()
}

impl StateVector {
    pub fn zeros(space: &Arc<SpaceDescriptor>) -> Self {
        StateVector {
            space: space.clone(),
            amplitudes: DVector::zeros(space.dim()),
        }
    }

    pub fn from_amplitudes(space: &Arc<SpaceDescriptor>, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch(amplitudes.len(), space.dim()));
        }
        Ok(StateVector {
            space: space.clone(),
            amplitudes,
        })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-14 {
            return Err(Error::ZeroNorm);
        }
        self.amplitudes.unscale_mut(n);
        Ok(self)
    }

    pub fn amplitude(&self, label: &BasisLabel) -> C64 {
        self.space
            .index_of(label)
            .map_or(C64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn amplitude_of(&self, label: &str) -> Result<C64> {
        Ok(self.amplitude(&self.space.parse_label(label)?))
    }

    pub fn population_of(&self, label: &str) -> Result<f64> {
        Ok(self.amplitude_of(label)?.norm_sqr())
    }

    /// <self|other>
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        same_space(&self.space, &other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            space: self.space.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    /// Maps this state into a space with the same factors but a different
    /// (or no) sector cap. Amplitudes on labels absent from `target` are
    /// dropped.
    pub fn transfer(&self, target: &Arc<SpaceDescriptor>) -> Result<StateVector> {
        if self.space.factors() != target.factors() {
            return Err(Error::SpaceMismatch);
        }
        let mut out = StateVector::zeros(target);
        for (i, a) in self.amplitudes.iter().enumerate() {
            if let Some(j) = target.index_of(self.space.label_of(i)) {
                out.amplitudes[j] = *a;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let dump = StateDump {
            space: self.space.factors().to_vec(),
            sector_cap: self.space.sector_cap(),
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        };
        serde_json::to_value(dump).expect("state dump serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let dump: StateDump = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let space = Arc::new(SpaceDescriptor::new(dump.space, dump.sector_cap)?);
        let amps = DVector::from_iterator(
            dump.amplitudes.len(),
            dump.amplitudes.iter().map(|[re, im]| C64::new(*re, *im)),
        );
        StateVector::from_amplitudes(&space, amps)
    }
}

/// Debug serialization: `{"space": [...], "amplitudes": [[re, im], ...]}`.
#[derive(Serialize, Deserialize)]
struct StateDump {
    space: Vec<Factor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sector_cap: Option<usize>,
    amplitudes: Vec<[f64; 2]>,
}

impl DensityOperator {
    pub fn maximally_mixed(space: &Arc<SpaceDescriptor>) -> Self {
        let d = space.dim();
        DensityOperator {
            space: space.clone(),
            matrix: DMatrix::identity(d, d).unscale(d as f64),
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_modulus(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// `{"space": [...], "matrix": [[[re, im], ...], ...]}` (row-major).
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = self
            .matrix
            .row_iter()
            .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        serde_json::json!({
            "space": self.space.factors(),
            "sector_cap": self.space.sector_cap(),
            "matrix": rows,
        })
    }

    pub fn population(&self, label: &BasisLabel) -> f64 {
        self.space
            .index_of(label)
            .map_or(0.0, |i| self.matrix[(i, i)].re)
    }
}

/// Largest entry modulus.
pub fn max_modulus(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let h = (m + m.adjoint()).scale(0.5);
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// <psi|rho|psi>
pub fn fidelity(rho: &DensityOperator, psi: &StateVector) -> Result<f64> {
    same_space(&rho.space, &psi.space)?;
    let f = psi.amplitudes.dotc(&(&rho.matrix * &psi.amplitudes));
    if f.im.abs() > 1e-10 {
        return Err(Error::ComplexFidelity(f.im));
    }
    Ok(f.re)
}

/// State argument for [`expectation`].
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(s: &'a StateVector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityOperator> for StateRef<'a> {
    fn from(s: &'a DensityOperator) -> Self {
        StateRef::Mixed(s)
    }
}

/// <psi|A|psi> or Tr(A rho). The imaginary part is zeroed for operators
/// flagged Hermitian.
pub fn expectation<'a>(op: &OperatorMatrix, state: impl Into<StateRef<'a>>) -> Result<C64> {
    let v = match state.into() {
        StateRef::Pure(psi) => {
            same_space(&op.space, &psi.space)?;
            psi.amplitudes.dotc(&op.entries.mul_vec(&psi.amplitudes))
        }
        StateRef::Mixed(rho) => {
            same_space(&op.space, &rho.space)?;
            op.entries
                .triplets()
                .map(|(i, j, a)| a * rho.matrix[(j, i)])
                .sum()
        }
    };
    Ok(if op.hermitian_hint {
        C64::new(v.re, 0.0)
    } else {
        v
    })
}

/// Sparse factor-local operator given as `(to, from, value)` entries.
pub type LocalOp = Vec<(u8, u8, C64)>;

/// Embeds a product of factor-local operators; identity on every other
/// factor. Terms act right to left in the order given (last applied first).
/// Transitions that leave the space (photon cutoff or sector cap) are dropped.
pub fn product_operator(space: &SpaceDescriptor, terms: &[(usize, LocalOp)]) -> CsrMatrix {
    let mut trip = Vec::new();
    for (i, label) in space.labels().iter().enumerate() {
        let mut branch = vec![(label.clone(), C64::new(1.0, 0.0))];
        for (pos, op) in terms.iter().rev() {
            let mut next = Vec::new();
            for (lbl, amp) in &branch {
                for &(to, from, v) in op {
                    if lbl.0[*pos] == from {
                        let mut l = lbl.clone();
                        l.0[*pos] = to;
                        next.push((l, amp * v));
                    }
                }
            }
            branch = next;
        }
        for (lbl, amp) in branch {
            if let Some(j) = space.index_of(&lbl) {
                trip.push((j, i, amp));
            }
        }
    }
    CsrMatrix::from_triplets(space.dim(), trip)
}

/// Diagonal operator with entries given per basis label.
pub fn diagonal_operator(space: &SpaceDescriptor, f: impl Fn(&BasisLabel) -> C64) -> CsrMatrix {
    CsrMatrix::from_triplets(
        space.dim(),
        space.labels().iter().enumerate().map(|(i, l)| (i, i, f(l))),
    )
}

/// Atom-local `|to><from|`.
pub fn transition(to: u8, from: u8) -> LocalOp {
    vec![(to, from, C64::new(1.0, 0.0))]
}

/// Truncated annihilation operator for a mode with `cutoff`.
pub fn annihilation(cutoff: usize) -> LocalOp {
    (1..=cutoff)
        .map(|n| ((n - 1) as u8, n as u8, C64::new((n as f64).sqrt(), 0.0)))
        .collect()
}

pub fn creation(cutoff: usize) -> LocalOp {
    annihilation(cutoff)
        .into_iter()
        .map(|(to, from, v)| (from, to, v))
        .collect()
}

impl OperatorMatrix {
    pub fn new(space: &Arc<SpaceDescriptor>, entries: CsrMatrix, hermitian_hint: bool) -> Self {
        assert_eq!(space.dim(), entries.dim());
        OperatorMatrix {
            space: space.clone(),
            entries,
            hermitian_hint,
        }
    }

    pub fn zeros(space: &Arc<SpaceDescriptor>) -> Self {
        Self::new(space, CsrMatrix::zeros(space.dim()), true)
    }

    pub fn identity(space: &Arc<SpaceDescriptor>) -> Self {
        Self::new(space, CsrMatrix::identity(space.dim()), true)
    }

    /// Total excitation number: atoms in g1 or e plus photons.
    pub fn excitation_number(space: &Arc<SpaceDescriptor>) -> Self {
        let e = diagonal_operator(space, |l| C64::new(space.weight(l) as f64, 0.0));
        Self::new(space, e, true)
    }

    /// Photon number of the mode at factor position `pos`.
    pub fn photon_number(space: &Arc<SpaceDescriptor>, pos: usize) -> Self {
        let e = diagonal_operator(space, |l| C64::new(l.0[pos] as f64, 0.0));
        Self::new(space, e, true)
    }

    /// `|label><label|`
    pub fn projector(space: &Arc<SpaceDescriptor>, label: &BasisLabel) -> Result<Self> {
        let i = space.check_label(label)?;
        let e = CsrMatrix::from_triplets(space.dim(), [(i, i, C64::new(1.0, 0.0))]);
        Ok(Self::new(space, e, true))
    }

    pub fn get(&self, row: &BasisLabel, col: &BasisLabel) -> C64 {
        match (self.space.index_of(row), self.space.index_of(col)) {
            (Some(i), Some(j)) => self.entries.get(i, j),
            _ => C64::new(0.0, 0.0),
        }
    }

    /// Matrix element between textual labels.
    pub fn element(&self, row: &str, col: &str) -> Result<C64> {
        Ok(self.get(&self.space.parse_label(row)?, &self.space.parse_label(col)?))
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        same_space(&self.space, &other.space)?;
        Ok(Self::new(
            &self.space,
            self.entries.add(&other.entries),
            self.hermitian_hint && other.hermitian_hint,
        ))
    }

    pub fn scale(&self, s: f64) -> OperatorMatrix {
        Self::new(&self.space, self.entries.scale(C64::new(s, 0.0)), self.hermitian_hint)
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        Self::new(&self.space, self.entries.adjoint(), self.hermitian_hint)
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> Result<CsrMatrix> {
        same_space(&self.space, &other.space)?;
        Ok(self.entries.commutator(&other.entries))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        same_space(&self.space, &psi.space)?;
        Ok(StateVector {
            space: self.space.clone(),
            amplitudes: self.entries.mul_vec(&psi.amplitudes),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "space": self.space.factors(),
            "entries": self
                .entries
                .triplets()
                .map(|(i, j, v)| serde_json::json!([i, j, v.re, v.im]))
                .collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::build_space;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn space27() -> Arc<SpaceDescriptor> {
        Arc::new(build_space(&["atom", "atom", "mode:2"], None).unwrap())
    }

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn ket_basics() {
        let s = space27();
        let k = ket_str(&s, "g0,g0,0").unwrap();
        assert_eq!(k.amplitudes[0], r(1.0));
        assert_eq!(k.norm(), 1.0);
        let capped = Arc::new(build_space(&["atom", "atom", "mode:2"], Some(2)).unwrap());
        assert!(matches!(
            ket_str(&capped, "e,e,2"),
            Err(Error::SectorViolation { .. })
        ));
    }

    #[test]
    fn superpose_eigenstate() {
        let s = space27();
        let a = ket_str(&s, "g0,e,0").unwrap();
        let b = ket_str(&s, "e,g0,0").unwrap();
        let psi1 = superpose(&[(r(-1.0), &a), (r(1.0), &b)]).unwrap();
        assert!((psi1.amplitude_of("g0,e,0").unwrap() - r(-FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((psi1.amplitude_of("e,g0,0").unwrap() - r(FRAC_1_SQRT_2)).norm() < 1e-15);
        let same = superpose(&[(r(1.0), &a)]).unwrap();
        assert_eq!(same.amplitudes, a.amplitudes);
        assert!(matches!(
            superpose(&[(r(1.0), &a), (r(-1.0), &a)]),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn fidelity_cases() {
        let s = space27();
        let psi = superpose(&[
            (r(1.0), &ket_str(&s, "g0,g1,0").unwrap()),
            (C64::new(0.0, -1.0), &ket_str(&s, "g1,g0,0").unwrap()),
        ])
        .unwrap();
        assert!((fidelity(&psi.to_density(), &psi).unwrap() - 1.0).abs() < 1e-14);
        let mixed = DensityOperator::maximally_mixed(&s);
        assert!((fidelity(&mixed, &psi).unwrap() - 1.0 / 27.0).abs() < 1e-14);
        let other = Arc::new(build_space(&["atom", "mode:2"], None).unwrap());
        assert!(fidelity(&DensityOperator::maximally_mixed(&other), &psi).is_err());
    }

    #[test]
    fn expectations() {
        let s = space27();
        let n = OperatorMatrix::excitation_number(&s);
        let k = ket_str(&s, "g1,g0,0").unwrap();
        assert_eq!(expectation(&n, &k).unwrap(), r(1.0));
        let id = OperatorMatrix::identity(&s);
        let rho = DensityOperator::maximally_mixed(&s);
        assert!((expectation(&id, &rho).unwrap() - r(1.0)).norm() < 1e-14);
        // |psi2> = (|g0 e 0> - sqrt2 |g0 g0 1> + |e g0 0>)/2
        let psi2 = superpose(&[
            (r(0.5), &ket_str(&s, "g0,e,0").unwrap()),
            (r(-0.5 * 2f64.sqrt()), &ket_str(&s, "g0,g0,1").unwrap()),
            (r(0.5), &ket_str(&s, "e,g0,0").unwrap()),
        ])
        .unwrap();
        let photons = OperatorMatrix::photon_number(&s, 2);
        assert!((expectation(&photons, &psi2).unwrap().re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn json_dump_roundtrip() {
        let s = space27();
        let k = ket_str(&s, "g1,e,1").unwrap();
        let back = StateVector::from_json(&k.to_json()).unwrap();
        assert_eq!(back.amplitudes, k.amplitudes);
        assert_eq!(*back.space, *s);
    }

    #[test]
    fn ladder_operators() {
        let s = space27();
        let a = product_operator(&s, &[(2, annihilation(2))]);
        let adag = product_operator(&s, &[(2, creation(2))]);
        let n = adag.matmul(&a);
        let k = s.index_of(&s.parse_label("g0,g0,2").unwrap()).unwrap();
        assert!((n.get(k, k) - r(2.0)).norm() < 1e-14);
    }
}
