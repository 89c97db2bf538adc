//! Time evolution: Schrödinger propagation of pure states and fixed-step RK4
//! integration of the Lindblad master equation.
//!
//! Both propagators first restrict the problem to the basis states reachable
//! from the initial state, so the cost is set by the dynamically relevant
//! subspace rather than the full product space.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{
    min_eigenvalue, CsrMatrix, DensityOperator, OperatorMatrix, SpaceDescriptor, StateVector,
};
use crate::zeno::{hermitian_propagator, reachable_indices};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const MINUS_I: C64 = C64::new(0.0, -1.0);

pub const DEFAULT_DT: f64 = 0.02;
pub const DEFAULT_SNAPSHOTS: usize = 200;
pub const TRACE_TOL: f64 = 1e-6;
pub const POSITIVITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4,
    /// Exact propagation through the eigendecomposition of the restricted
    /// Hamiltonian. Pure states only.
    DenseExp,
}

/// When to record snapshots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// This many snapshots spread evenly over `[0, t]`, endpoints included.
    Count(usize),
    /// Every `n` integration steps, plus the final step.
    Stride(usize),
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Count(DEFAULT_SNAPSHOTS)
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub dt: f64,
    pub method: Method,
    pub sampling: Sampling,
    pub target: Option<StateVector>,
    pub probes: Vec<(String, OperatorMatrix)>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            dt: DEFAULT_DT,
            method: Method::Rk4,
            sampling: Sampling::default(),
            target: None,
            probes: Vec::new(),
        }
    }
}

impl Options {
    pub fn with_dt(dt: f64) -> Self {
        Options {
            dt,
            ..Default::default()
        }
    }

    pub fn target(mut self, target: &StateVector) -> Self {
        self.target = Some(target.clone());
        self
    }

    pub fn probe(mut self, name: &str, op: &OperatorMatrix) -> Self {
        self.probes.push((name.to_string(), op.clone()));
        self
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub fidelity: Option<f64>,
    pub trace: f64,
    pub n_excitation: f64,
    pub min_eigenvalue: Option<f64>,
    pub probes: Vec<f64>,
}

/// State restricted to the propagation subspace.
#[derive(Clone, Debug)]
pub enum LocalState {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

#[derive(Clone, Debug)]
pub enum FinalState {
    Pure(StateVector),
    Mixed(DensityOperator),
}

impl FinalState {
    pub fn to_density(&self) -> DensityOperator {
        match self {
            FinalState::Pure(psi) => psi.to_density(),
            FinalState::Mixed(rho) => rho.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub space: Arc<SpaceDescriptor>,
    /// Basis indices spanned by the propagation.
    pub support: Vec<usize>,
    pub probe_names: Vec<String>,
    pub records: Vec<Snapshot>,
    pub states: Vec<LocalState>,
    pub final_state: FinalState,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.records.last().expect("trajectory has at least one snapshot")
    }

    pub fn final_fidelity(&self) -> Option<f64> {
        self.last().fidelity
    }

    /// CSV with header `t,fidelity,trace,n_excitation[,probe...]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "fidelity".into(), "trace".into(), "n_excitation".into()];
        header.extend(self.probe_names.iter().cloned());
        w.write_record(&header).map_err(io_err)?;
        for r in &self.records {
            let mut row = vec![
                r.t.to_string(),
                r.fidelity.map_or(String::new(), |f| f.to_string()),
                r.trace.to_string(),
                r.n_excitation.to_string(),
            ];
            row.extend(r.probes.iter().map(|p| p.to_string()));
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| io_err(e.into()))?;
        Ok(())
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv output: {e}"))
}

/// Fidelity of each stored snapshot against `target`.
pub fn fidelity_curve(traj: &Trajectory, target: &StateVector) -> Result<Vec<(f64, f64)>> {
    if *target.space != *traj.space {
        return Err(Error::SpaceMismatch);
    }
    let t = local_vector(&target.amplitudes, &traj.support);
    Ok(traj
        .records
        .iter()
        .zip(&traj.states)
        .map(|(r, s)| (r.t, local_fidelity(s, &t)))
        .collect())
}

fn local_vector(v: &DVector<C64>, idx: &[usize]) -> DVector<C64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

fn local_fidelity(state: &LocalState, target: &DVector<C64>) -> f64 {
    match state {
        LocalState::Pure(psi) => target.dotc(psi).norm_sqr(),
        LocalState::Mixed(rho) => target.dotc(&(rho * target)).re,
    }
}

fn step_plan(t: f64, dt: f64, sampling: Sampling) -> Result<(usize, f64, Vec<usize>)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("propagation time {t}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    let steps = (t / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mut marks: Vec<usize> = match sampling {
        Sampling::Count(n) => {
            let n = n.max(2);
            (0..n)
                .map(|k| ((k as f64) * steps as f64 / (n - 1) as f64).round() as usize)
                .collect()
        }
        Sampling::Stride(s) => (0..=steps).step_by(s.max(1)).chain([steps]).collect(),
    };
    marks.dedup();
    marks.sort_unstable();
    marks.dedup();
    Ok((steps, h, marks))
}

/// Row-sum bound on the spectral radius.
fn norm_bound(m: &CsrMatrix) -> f64 {
    (0..m.dim())
        .map(|i| m.row(i).map(|(_, v)| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_step(bound: f64, dt: f64) -> Result<()> {
    // RK4 is stable on the imaginary axis up to |z| = 2.83
    if bound * dt > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} too large for generator scale {bound:.3}"
        )));
    }
    Ok(())
}

struct Observables {
    target: Option<DVector<C64>>,
    excitation: Vec<f64>,
    probes: Vec<CsrMatrix>,
}

impl Observables {
    fn new(space: &Arc<SpaceDescriptor>, support: &[usize], opts: &Options) -> Result<Self> {
        let target = match &opts.target {
            Some(t) if *t.space != **space => return Err(Error::SpaceMismatch),
            Some(t) => Some(local_vector(&t.amplitudes, support)),
            None => None,
        };
        let mut probes = Vec::new();
        for (_, op) in &opts.probes {
            if *op.space != **space {
                return Err(Error::SpaceMismatch);
            }
            probes.push(op.entries.restrict(support));
        }
        Ok(Observables {
            target,
            excitation: support.iter().map(|&i| space.weight(space.label_of(i)) as f64).collect(),
            probes,
        })
    }

    fn pure(&self, t: f64, psi: &DVector<C64>) -> Snapshot {
        let norm = psi.norm_squared();
        Snapshot {
            t,
            fidelity: self.target.as_ref().map(|v| v.dotc(psi).norm_sqr()),
            trace: norm,
            n_excitation: psi.iter().zip(&self.excitation).map(|(a, n)| a.norm_sqr() * n).sum(),
            min_eigenvalue: None,
            probes: self.probes.iter().map(|p| psi.dotc(&p.mul_vec(psi)).re).collect(),
        }
    }

    fn mixed(&self, t: f64, rho: &DMatrix<C64>) -> Snapshot {
        let probe = |p: &CsrMatrix| -> f64 {
            p.triplets().map(|(i, j, v)| v * rho[(j, i)]).sum::<C64>().re
        };
        Snapshot {
            t,
            fidelity: self.target.as_ref().map(|v| v.dotc(&(rho * v)).re),
            trace: rho.trace().re,
            n_excitation: (0..rho.nrows()).map(|i| rho[(i, i)].re * self.excitation[i]).sum(),
            min_eigenvalue: Some(min_eigenvalue(rho)),
            probes: self.probes.iter().map(probe).collect(),
        }
    }
}

fn support_of(v: &DVector<C64>) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Integrates `i d/dt psi = H psi` over `[0, t]`.
pub fn propagate_schrodinger(
    h: &OperatorMatrix,
    psi0: &StateVector,
    t: f64,
    opts: &Options,
) -> Result<Trajectory> {
    if *h.space != *psi0.space {
        return Err(Error::SpaceMismatch);
    }
    let defect = h.entries.hermiticity_defect();
    if defect > 1e-10 * h.entries.max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let space = psi0.space.clone();
    let support = reachable_indices(&[&h.entries], support_of(&psi0.amplitudes));
    let hl = h.entries.restrict(&support);
    let obs = Observables::new(&space, &support, opts)?;
    let (steps, dt, marks) = step_plan(t, opts.dt, opts.sampling)?;
    let psi_start = local_vector(&psi0.amplitudes, &support);
    let norm0 = psi_start.norm_squared();

    let mut records = Vec::with_capacity(marks.len());
    let mut states = Vec::with_capacity(marks.len());
    let mut record = |time: f64, psi: &DVector<C64>| -> Result<()> {
        let snap = obs.pure(time, psi);
        if (snap.trace - norm0).abs() > TRACE_TOL {
            return Err(Error::NumericalAbort {
                time,
                reason: format!("norm drifted to {:.9}", snap.trace),
            });
        }
        records.push(snap);
        states.push(LocalState::Pure(psi.clone()));
        Ok(())
    };

    let psi = match opts.method {
        Method::DenseExp => {
            let hd = hl.to_dense();
            let eig = hd.symmetric_eigen();
            let v = &eig.eigenvectors;
            let c0 = v.adjoint() * &psi_start;
            let at = |time: f64| -> DVector<C64> {
                let c = DVector::from_iterator(
                    c0.len(),
                    c0.iter()
                        .zip(eig.eigenvalues.iter())
                        .map(|(c, e)| c * C64::from_polar(1.0, -e * time)),
                );
                v * c
            };
            let mut last = psi_start.clone();
            for &m in &marks {
                let time = m as f64 * dt;
                last = at(time);
                record(time, &last)?;
            }
            last
        }
        Method::Rk4 => {
            check_step(norm_bound(&hl), dt)?;
            let n = support.len();
            let mut psi = psi_start;
            let mut k = vec![DVector::<C64>::zeros(n); 4];
            let mut tmp = DVector::<C64>::zeros(n);
            let deriv = |x: &DVector<C64>, out: &mut DVector<C64>| {
                hl.mul_vec_into(x.as_slice(), out.as_mut_slice());
                *out *= MINUS_I;
            };
            let mut next_mark = 0;
            for step in 0..=steps {
                if next_mark < marks.len() && marks[next_mark] == step {
                    record(step as f64 * dt, &psi)?;
                    next_mark += 1;
                }
                if step == steps {
                    break;
                }
                let hdt = C64::new(dt, 0.0);
                deriv(&psi, &mut k[0]);
                tmp.copy_from(&psi);
                tmp.axpy(hdt * 0.5, &k[0], C64::new(1.0, 0.0));
                deriv(&tmp, &mut k[1]);
                tmp.copy_from(&psi);
                tmp.axpy(hdt * 0.5, &k[1], C64::new(1.0, 0.0));
                deriv(&tmp, &mut k[2]);
                tmp.copy_from(&psi);
                tmp.axpy(hdt, &k[2], C64::new(1.0, 0.0));
                deriv(&tmp, &mut k[3]);
                for i in 0..n {
                    psi[i] += hdt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                }
            }
            psi
        }
    };

    let mut full = StateVector::zeros(&space);
    for (a, &i) in support.iter().enumerate() {
        full.amplitudes[i] = psi[a];
    }
    Ok(Trajectory {
        space,
        support,
        probe_names: opts.probes.iter().map(|(n, _)| n.clone()).collect(),
        records,
        states,
        final_state: FinalState::Pure(full),
    })
}

/// Right-hand side of the master equation on column-major dense `rho`.
struct Liouvillian {
    k: usize,
    h_eff: CsrMatrix,
    /// Nonzero entries `(row, col, value)` of each jump operator.
    jumps: Vec<Vec<(usize, usize, C64)>>,
}

impl Liouvillian {
    /// `d rho = -i (H_eff rho - rho H_eff^dag) + sum_k L rho L^dag`.
    fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let k = self.k;
        self.h_eff.mul_dense_into(rho, out);
        // out <- Y + Y^dag with Y = -i H_eff rho
        for j in 0..k {
            for i in j..k {
                let a = MINUS_I * out[i + j * k];
                let b = MINUS_I * out[j + i * k];
                let s = a + b.conj();
                out[i + j * k] = s;
                out[j + i * k] = s.conj();
            }
        }
        for l in &self.jumps {
            for &(j, b, lb) in l {
                let lb = lb.conj();
                for &(i, a, la) in l {
                    out[i + j * k] += la * rho[a + b * k] * lb;
                }
            }
        }
    }
}

fn symmetrize(rho: &mut [C64], k: usize) {
    for j in 0..k {
        rho[j + j * k].im = 0.0;
        for i in j + 1..k {
            let s = (rho[i + j * k] + rho[j + i * k].conj()) * 0.5;
            rho[i + j * k] = s;
            rho[j + i * k] = s.conj();
        }
    }
}

/// Integrates the Lindblad master equation with fixed-step RK4.
pub fn propagate_lindblad(
    h: &OperatorMatrix,
    collapse: &[OperatorMatrix],
    rho0: &DensityOperator,
    t: f64,
    opts: &Options,
) -> Result<Trajectory> {
    if opts.method != Method::Rk4 {
        return Err(Error::InvalidParameter("mixed states propagate with RK4 only".into()));
    }
    if *h.space != *rho0.space || collapse.iter().any(|l| *l.space != *rho0.space) {
        return Err(Error::SpaceMismatch);
    }
    let defect = h.entries.hermiticity_defect();
    if defect > 1e-10 * h.entries.max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let space = rho0.space.clone();
    let n = space.dim();
    let jumps: Vec<&CsrMatrix> = collapse.iter().map(|l| &l.entries).filter(|l| !l.is_zero()).collect();
    let decay: Vec<CsrMatrix> = jumps.iter().map(|l| l.adjoint().matmul(l)).collect();

    let seeds = (0..n).filter(|&i| (0..n).any(|j| rho0.matrix[(i, j)].norm() > 0.0));
    let mut ops: Vec<&CsrMatrix> = vec![&h.entries];
    ops.extend(jumps.iter().copied());
    ops.extend(decay.iter());
    let support = reachable_indices(&ops, seeds);
    let k = support.len();

    let mut h_eff = h.entries.restrict(&support);
    for d in &decay {
        h_eff = h_eff.add(&d.restrict(&support).scale(C64::new(0.0, -0.5)));
    }
    let jumps_local: Vec<CsrMatrix> = jumps.iter().map(|l| l.restrict(&support)).collect();
    let bound = norm_bound(&h_eff) + jumps_local.iter().map(|l| norm_bound(l).powi(2)).sum::<f64>();
    check_step(bound, opts.dt)?;
    let liou = Liouvillian {
        k,
        h_eff,
        jumps: jumps_local.iter().map(|l| l.triplets().collect()).collect(),
    };

    let obs = Observables::new(&space, &support, opts)?;
    let (steps, dt, marks) = step_plan(t, opts.dt, opts.sampling)?;
    let start = DMatrix::from_fn(k, k, |a, b| rho0.matrix[(support[a], support[b])]);
    let trace0 = start.trace().re;
    let mut rho: Vec<C64> = start.as_slice().to_vec();

    let mut records = Vec::with_capacity(marks.len());
    let mut states = Vec::with_capacity(marks.len());
    let mut kk = vec![vec![ZERO; k * k]; 4];
    let mut tmp = vec![ZERO; k * k];
    let mut next_mark = 0;
    for step in 0..=steps {
        if next_mark < marks.len() && marks[next_mark] == step {
            let time = step as f64 * dt;
            let m = DMatrix::from_column_slice(k, k, &rho);
            let snap = obs.mixed(time, &m);
            if (snap.trace - trace0).abs() > TRACE_TOL {
                return Err(Error::NumericalAbort {
                    time,
                    reason: format!("trace drifted to {:.9}", snap.trace),
                });
            }
            if let Some(e) = snap.min_eigenvalue.filter(|e| *e < -POSITIVITY_TOL) {
                return Err(Error::NumericalAbort {
                    time,
                    reason: format!("density operator eigenvalue {e:.3e}"),
                });
            }
            records.push(snap);
            states.push(LocalState::Mixed(m));
            next_mark += 1;
        }
        if step == steps {
            break;
        }
        liou.apply(&rho, &mut kk[0]);
        for (stage, frac) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..k * k {
                tmp[i] = rho[i] + kk[stage - 1][i] * (dt * frac);
            }
            liou.apply(&tmp, &mut kk[stage]);
        }
        for i in 0..k * k {
            rho[i] += (kk[0][i] + 2.0 * kk[1][i] + 2.0 * kk[2][i] + kk[3][i]) * (dt / 6.0);
        }
        symmetrize(&mut rho, k);
    }

    let mut full = DMatrix::zeros(n, n);
    for b in 0..k {
        for a in 0..k {
            full[(support[a], support[b])] = rho[a + b * k];
        }
    }
    Ok(Trajectory {
        space: space.clone(),
        support,
        probe_names: opts.probes.iter().map(|(n, _)| n.clone()).collect(),
        records,
        states,
        final_state: FinalState::Mixed(DensityOperator { space, matrix: full }),
    })
}

/// Exact unitary for small restricted problems: `exp(-i H t)` on the
/// subspace reachable from `psi0`, applied to it.
pub fn evolve_exact(h: &OperatorMatrix, psi0: &StateVector, t: f64) -> Result<StateVector> {
    if *h.space != *psi0.space {
        return Err(Error::SpaceMismatch);
    }
    let support = reachable_indices(&[&h.entries], support_of(&psi0.amplitudes));
    let u = hermitian_propagator(&h.entries.restrict(&support).to_dense(), t);
    let out = u * local_vector(&psi0.amplitudes, &support);
    let mut full = StateVector::zeros(&psi0.space);
    for (a, &i) in support.iter().enumerate() {
        full.amplitudes[i] = out[a];
    }
    Ok(full)
}
