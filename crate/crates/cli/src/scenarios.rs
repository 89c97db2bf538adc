use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use zeno_fusion::dynamics::{
    propagate_lindblad, propagate_schrodinger, FinalState, Options, Sampling, Trajectory,
};
use zeno_fusion::fusion::{
    apply_fusion, correct_phase, exact_distribution, ideal_gate_map, initial_branch_state,
    measure_atoms, outcome_distribution, simulate_network, success_probability, Classification,
    FusionScenario, Outcome,
};
use zeno_fusion::hamiltonian::{
    model_hamiltonian, model_space, stark_compensation, ModelKind, ModelParams,
};
use zeno_fusion::hilbert::{ket, superpose, OperatorMatrix, StateVector};
use zeno_fusion::zeno::{analyze_model, gate_time};
use zeno_fusion::C64;

use crate::config::{Config, Scenario};
use crate::{figures, Artifacts, CliError};

pub fn dispatch(cfg: &Config, art: &Artifacts) -> Result<Value, CliError> {
    match cfg.scenario {
        Scenario::ZenoSpectrum => zeno_spectrum(cfg, art),
        Scenario::GateEvolve => gate_evolve(cfg, art),
        Scenario::Fuse => fuse(cfg, art),
        Scenario::Lindblad => lindblad(cfg, art),
        Scenario::Sweep => sweep(cfg, art),
        Scenario::Network => network(cfg, art),
        Scenario::EmitFigure => figures::emit(cfg, art),
    }
}

pub fn options(cfg: &Config) -> Options {
    let mut o = Options::with_dt(cfg.integrator.dt);
    o.sampling = match cfg.integrator.stride {
        Some(s) => Sampling::Stride(s),
        None => Sampling::Count(cfg.integrator.snapshots),
    };
    o
}

fn zeno_spectrum(cfg: &Config, art: &Artifacts) -> Result<Value, CliError> {
    let report = analyze_model(cfg.model, &cfg.params)?.to_json();
    art.write_json("zeno.json", &report)?;
    Ok(report)
}

fn vacuum(kind: ModelKind) -> String {
    vec!["0"; kind.mode_count()].join(",")
}

/// Ideal output of the gate for a ground-manifold input with empty modes.
fn gate_target(space: &std::sync::Arc<zeno_fusion::hilbert::SpaceDescriptor>, kind: ModelKind, psi0: &StateVector) -> Option<StateVector> {
    let vac = vacuum(kind);
    let kets: Vec<StateVector> = Outcome::ALL
        .iter()
        .map(|o| {
            let (a, b) = o.levels();
            ket(space, &space.parse_label(&format!("g{a},g{b},{vac}")).ok()?).ok()
        })
        .collect::<Option<_>>()?;
    let coeffs: Vec<C64> = kets.iter().map(|k| k.inner(psi0).unwrap()).collect();
    let kept: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if (kept - 1.0).abs() > 1e-12 {
        return None;
    }
    let g = ideal_gate_map(kind).matrix;
    let out: Vec<C64> = (0..4).map(|o| (0..4).map(|i| g[(o, i)] * coeffs[i]).sum()).collect();
    let terms: Vec<(C64, &StateVector)> = out.iter().copied().zip(kets.iter()).collect();
    superpose(&terms).ok()
}

fn gate_evolve(cfg: &Config, art: &Artifacts) -> Result<Value, CliError> {
    let kind = cfg.model;
    let p = &cfg.params;
    let space = model_space(kind, p.n_max, None, None)?;
    let h = model_hamiltonian(p, &space, kind)?.add(&stark_compensation(p, &space, kind, cfg.stark_compensation)?)?;
    let vac = vacuum(kind);
    let initial = cfg.gate.initial.clone().unwrap_or_else(|| format!("g0,g1,{vac}"));
    let label = space
        .parse_label(&initial)
        .map_err(|e| CliError::Config(format!("gate.initial: {e}")))?;
    let psi0 = ket(&space, &label)?;
    let t = cfg.integrator.t_final.map_or_else(|| gate_time(p), Ok)?;

    let mut opts = options(cfg);
    let mut names = Vec::new();
    for o in Outcome::ALL {
        let (a, b) = o.levels();
        let l = space.parse_label(&format!("g{a},g{b},{vac}"))?;
        opts = opts.probe(&format!("p_{}", o.label()), &OperatorMatrix::projector(&space, &l)?);
        names.push(o.label());
    }
    let photons = space
        .mode_positions()
        .iter()
        .map(|&m| OperatorMatrix::photon_number(&space, m))
        .try_fold(OperatorMatrix::zeros(&space), |acc, n| acc.add(&n))?;
    opts = opts.probe("photons", &photons);
    let target = gate_target(&space, kind, &psi0);
    if let Some(tg) = &target {
        opts = opts.target(tg);
    }
    let tr = propagate_schrodinger(&h, &psi0, t, &opts)?;
    art.write_with("gate.csv", |f| tr.write_csv(f))?;

    let last = tr.last();
    let pops: serde_json::Map<String, Value> = names
        .iter()
        .zip(&last.probes)
        .map(|(n, p)| (n.to_string(), json!(p)))
        .collect();
    let photon_max = tr.records.iter().map(|r| r.probes[4]).fold(0.0, f64::max);
    let ground: f64 = last.probes[..4].iter().sum();
    let summary = json!({
        "model": kind.name(),
        "initial": initial,
        "t_final": t,
        "gate_time": gate_time(p).ok(),
        "populations": pops,
        "leakage": 1.0 - ground,
        "photon_max": photon_max,
        "fidelity": last.fidelity,
        "support_dim": tr.support.len(),
    });
    art.write_json("gate.json", &summary)?;
    if cfg.dump_state {
        if let FinalState::Pure(psi) = &tr.final_state {
            art.write_json("state.json", &psi.to_json())?;
        }
    }
    Ok(summary)
}

fn ratio_str(r: num_rational::Ratio<u64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn fuse(cfg: &Config, art: &Artifacts) -> Result<Value, CliError> {
    let (n, m, kind) = (cfg.fusion.n, cfg.fusion.m, cfg.model);
    let state = apply_fusion(&initial_branch_state(n, m, kind)?, &ideal_gate_map(kind))?;
    let meas = measure_atoms::<ChaCha8Rng>(&state, None)?;
    let exact = exact_distribution(n, m, kind)?;
    let outcomes: Vec<Value> = meas
        .outcomes
        .iter()
        .map(|o| {
            let correction = match o.classification {
                Classification::Success { .. } => correct_phase(o).ok().map(|c| c.party),
                _ => None,
            };
            json!({
                "label": o.label,
                "probability": o.probability,
                "probability_exact": ratio_str(exact[o.label.index()]),
                "classification": o.classification,
                "correction": correction,
            })
        })
        .collect();
    let ps = success_probability(n, m)?;
    let report = json!({
        "model": kind.name(),
        "n": n,
        "m": m,
        "outcomes": outcomes,
        "success_probability": *ps.numer() as f64 / *ps.denom() as f64,
        "success_probability_exact": ratio_str(ps),
    });
    art.write_json("fuse.json", &report)?;
    Ok(report)
}

/// Runs one dissipative fusion attempt.
pub fn fusion_trajectory(cfg: &Config, kind: ModelKind, params: &ModelParams) -> Result<(FusionScenario, Trajectory), CliError> {
    let sc = FusionScenario::new(kind, params, cfg.fusion.n, cfg.fusion.m, cfg.stark_compensation)?;
    let t = cfg.integrator.t_final.unwrap_or(sc.gate_time);
    let opts = options(cfg).target(&sc.target);
    let tr = propagate_lindblad(&sc.hamiltonian, &sc.collapse, &sc.initial.to_density(), t, &opts)?;
    Ok((sc, tr))
}

fn lindblad_summary(sc: &FusionScenario, tr: &Trajectory) -> Result<Value, CliError> {
    let rho = tr.final_state.to_density();
    let (dist, leaked) = outcome_distribution(&rho, sc.kind)?;
    let last = tr.last();
    let probs: serde_json::Map<String, Value> =
        Outcome::ALL.iter().map(|o| (o.label().to_string(), json!(dist[o.index()]))).collect();
    Ok(json!({
        "model": sc.kind.name(),
        "n": sc.n,
        "m": sc.m,
        "gate_time": sc.gate_time,
        "t_final": last.t,
        "final_fidelity": last.fidelity,
        "trace": last.trace,
        "min_eigenvalue": last.min_eigenvalue,
        "outcome_probabilities": probs,
        "leaked": leaked,
        "support_dim": tr.support.len(),
    }))
}

fn lindblad(cfg: &Config, art: &Artifacts) -> Result<Value, CliError> {
    let (sc, tr) = fusion_trajectory(cfg, cfg.model, &cfg.params)?;
    art.write_with("lindblad.csv", |f| tr.write_csv(f))?;
    let summary = lindblad_summary(&sc, &tr)?;
    art.write_json("lindblad.json", &summary)?;
    if cfg.dump_state {
        art.write_json("state.json", &tr.final_state.to_density().to_json())?;
    }
    Ok(summary)
}

pub fn with_param(p: &ModelParams, name: &str, value: f64) -> ModelParams {
    let mut q = p.clone();
    let slot = match name {
        "lambda" => &mut q.lambda,
        "omega" => &mut q.omega,
        "delta" => &mut q.delta,
        "v" => &mut q.v,
        "kappa" => &mut q.kappa,
        "gamma" => &mut q.gamma,
        "kappa_f" => &mut q.kappa_f,
        _ => unreachable!("sweep parameter validated"),
    };
    *slot = value;
    q
}

fn sweep(cfg: &Config, art: &Artifacts) -> Result<Value, CliError> {
    let name = cfg.sweep.parameter.as_str();
    let grid = cfg.sweep.grid();
    for &x in &grid {
        with_param(&cfg.params, name, x)
            .validate()
            .map_err(|e| CliError::Config(format!("sweep: {name} = {x}: {e}")))?;
    }
    let results: Vec<Result<(f64, Value), CliError>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = with_param(&cfg.params, name, x);
            let (sc, tr) = fusion_trajectory(cfg, cfg.model, &p)?;
            art.write_with(&format!("sweep-{i:03}.csv"), |f| tr.write_csv(f))?;
            Ok((x, lindblad_summary(&sc, &tr)?))
        })
        .collect();
    let mut rows = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let header = [name, "fidelity", "trace", "min_eigenvalue", "leaked"];
    art.write_csv(
        "sweep.csv",
        &header,
        rows.iter().map(|(x, s)| {
            [
                x.to_string(),
                s["final_fidelity"].as_f64().unwrap_or(f64::NAN).to_string(),
                s["trace"].to_string(),
                s["min_eigenvalue"].to_string(),
                s["leaked"].to_string(),
            ]
        }),
    )?;
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(json!({
        "parameter": name,
        "points": rows.iter().map(|(x, s)| json!({"value": x, "fidelity": s["final_fidelity"]})).collect::<Vec<_>>(),
    }))
}

fn network(cfg: &Config, art: &Artifacts) -> Result<Value, CliError> {
    let n = &cfg.network;
    let stats = simulate_network(&n.pool, n.target, n.trials, cfg.seed)?;
    let mut v = serde_json::to_value(&stats).expect("stats serialize");
    v["pool"] = json!(n.pool);
    v["success_rate"] = json!(stats.success_rate());
    art.write_json("network.json", &v)?;
    art.write_csv(
        "network-hist.csv",
        &["size", "count"],
        stats.terminal_size_histogram.iter().map(|(k, c)| [k.to_string(), c.to_string()]),
    )?;
    Ok(v)
}
