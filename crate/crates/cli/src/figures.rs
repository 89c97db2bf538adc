//! Figure data: fig-PX (success probability grid), fig-4a..4c (single
//! cavity) and fig-5a..5d (cavity-fiber-cavity).

use rayon::prelude::*;
use serde_json::{json, Value};
use zeno_fusion::fusion::success_probability;
use zeno_fusion::hamiltonian::{ModelKind, ModelParams};

use crate::config::Config;
use crate::scenarios::{fusion_trajectory, with_param};
use crate::{Artifacts, CliError};

/// Decay rates of the fidelity-vs-time families, in units of lambda.
pub const FAMILY: [f64; 3] = [0.0, 0.05, 0.1];
/// Decay-rate grid of the fidelity-vs-rate panels, in units of lambda.
pub const RATIOS: [f64; 6] = [0.0, 0.02, 0.04, 0.06, 0.08, 0.1];
pub const PX_RANGE: std::ops::RangeInclusive<usize> = 2..=20;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Panel {
    /// Fidelity against time, one series per rate in [`FAMILY`].
    Time(&'static str),
    /// Final fidelity against each listed rate over [`RATIOS`].
    Rates(&'static [&'static str]),
}

fn panel(id: &str) -> Option<(ModelKind, Panel)> {
    use ModelKind::*;
    Some(match id {
        "fig-4a" => (SingleCavity, Panel::Time("gamma")),
        "fig-4b" => (SingleCavity, Panel::Time("kappa")),
        "fig-4c" => (SingleCavity, Panel::Rates(&["kappa", "gamma"])),
        "fig-5a" => (CavityFiber, Panel::Time("gamma")),
        "fig-5b" => (CavityFiber, Panel::Time("kappa")),
        "fig-5c" => (CavityFiber, Panel::Time("kappa_f")),
        "fig-5d" => (CavityFiber, Panel::Rates(&["kappa", "gamma", "kappa_f"])),
        _ => return None,
    })
}

/// Lossless copy of the configured parameters with one decay channel set.
fn lossy(base: &ModelParams, channel: &str, ratio: f64) -> ModelParams {
    let p = ModelParams {
        kappa: 0.0,
        gamma: 0.0,
        kappa_f: 0.0,
        ..base.clone()
    };
    with_param(&p, channel, ratio * base.lambda)
}

pub fn fig_px(art: &Artifacts) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for m in PX_RANGE {
        for n in PX_RANGE {
            let p = success_probability(n, m)?;
            rows.push([m.to_string(), n.to_string(), (*p.numer() as f64 / *p.denom() as f64).to_string()]);
        }
    }
    art.write_csv("fig-PX.csv", &["m", "n", "p"], rows)
}

struct Job {
    fig: usize,
    column: usize,
    row: usize,
    params: ModelParams,
}

pub fn emit(cfg: &Config, art: &Artifacts) -> Result<Value, CliError> {
    if cfg.figures.is_empty() {
        return Err(CliError::Config(
            "figures: nothing to emit (pass --figure or a figure preset)".into(),
        ));
    }
    let mut panels = Vec::new();
    for id in &cfg.figures {
        if id == "fig-PX" {
            continue;
        }
        let (kind, p) = panel(id).ok_or_else(|| CliError::Config(format!("figures: unknown figure `{id}`")))?;
        if kind != cfg.model {
            return Err(CliError::Config(format!(
                "figures: {id} needs the {} model, config has {}",
                kind.name(),
                cfg.model.name()
            )));
        }
        panels.push((id.as_str(), p));
    }
    if cfg.figures.iter().any(|f| f == "fig-PX") {
        fig_px(art)?;
    }

    let mut jobs = Vec::new();
    for (fig, (_, p)) in panels.iter().enumerate() {
        match p {
            Panel::Time(ch) => {
                for (column, &r) in FAMILY.iter().enumerate() {
                    jobs.push(Job { fig, column, row: 0, params: lossy(&cfg.params, ch, r) });
                }
            }
            Panel::Rates(chs) => {
                for (column, ch) in chs.iter().enumerate() {
                    for (row, &r) in RATIOS.iter().enumerate() {
                        jobs.push(Job { fig, column, row, params: lossy(&cfg.params, ch, r) });
                    }
                }
            }
        }
    }
    let results: Vec<Result<Vec<(f64, f64)>, CliError>> = jobs
        .par_iter()
        .map(|j| {
            let (_, tr) = fusion_trajectory(cfg, cfg.model, &j.params)?;
            Ok(tr.records.iter().map(|r| (r.t, r.fidelity.unwrap_or(f64::NAN))).collect())
        })
        .collect();

    let mut first_err = None;
    let mut summary = serde_json::Map::new();
    for (fig, (id, p)) in panels.iter().enumerate() {
        let mine: Vec<(&Job, &Result<Vec<(f64, f64)>, CliError>)> =
            jobs.iter().zip(&results).filter(|(j, _)| j.fig == fig).collect();
        if let Some((_, Err(e))) = mine.iter().find(|(_, r)| r.is_err()) {
            first_err.get_or_insert(match e {
                CliError::Numerical(m) => CliError::Numerical(format!("{id}: {m}")),
                CliError::Config(m) => CliError::Config(format!("{id}: {m}")),
                CliError::Io(m) => CliError::Io(m.clone()),
            });
            continue;
        }
        let curve = |k: usize| mine[k].1.as_ref().expect("checked above");
        match p {
            Panel::Time(ch) => {
                let mut header = vec!["t".to_string()];
                header.extend(FAMILY.iter().map(|r| format!("fidelity_{ch}_{r}")));
                let rows = (0..curve(0).len()).map(|i| {
                    let mut row = vec![curve(0)[i].0];
                    row.extend((0..FAMILY.len()).map(|k| curve(k)[i].1));
                    row
                });
                art.write_csv(&format!("{id}.csv"), &header, rows)?;
                let finals: Vec<f64> = (0..FAMILY.len()).map(|k| curve(k).last().unwrap().1).collect();
                summary.insert(id.to_string(), json!({"series": FAMILY, "final_fidelity": finals}));
            }
            Panel::Rates(chs) => {
                let mut header = vec!["ratio".to_string()];
                header.extend(chs.iter().map(|c| format!("fidelity_{c}")));
                let fin = |col: usize, row: usize| {
                    let k = mine.iter().position(|(j, _)| j.column == col && j.row == row).unwrap();
                    curve(k).last().unwrap().1
                };
                let rows: Vec<Vec<f64>> = RATIOS
                    .iter()
                    .enumerate()
                    .map(|(row, &r)| {
                        let mut v = vec![r];
                        v.extend((0..chs.len()).map(|c| fin(c, row)));
                        v
                    })
                    .collect();
                art.write_csv(&format!("{id}.csv"), &header, rows.clone())?;
                summary.insert(id.to_string(), json!({"columns": header, "rows": rows}));
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(json!({"figures": cfg.figures, "panels": summary}))
}
