use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use zeno_fusion::hamiltonian::ModelKind;
use zeno_fusion_cli::config::{assignment, merge, read_file, resolve, Scenario};
use zeno_fusion_cli::{run, CliError};

/// Zeno-dynamics W-state fusion scenarios.
#[derive(Parser, Debug)]
#[command(name = "zfuse", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config, or a JSON config/manifest.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// single_cavity or cavity_fiber.
    #[arg(long, global = true)]
    model: Option<String>,
    /// paper-fig4, paper-fig5, paper-figPX or fast.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output path prefix; a trailing `/` makes it a directory.
    #[arg(long, global = true, value_name = "PREFIX")]
    out: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Record every N integration steps instead of a fixed snapshot count.
    #[arg(long, global = true, value_name = "N")]
    stride: Option<usize>,
    /// Also write the final state as JSON.
    #[arg(long, global = true)]
    dump_state: bool,
    /// Override any config key, e.g. `--set params.kappa=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Default)]
struct SizeArgs {
    #[arg(short = 'n', long)]
    n: Option<usize>,
    #[arg(short = 'm', long)]
    m: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Zeno subspace, eigenvalues and effective model as JSON.
    ZenoSpectrum,
    /// Schrodinger evolution of the two-atom gate.
    GateEvolve {
        /// Initial basis label, e.g. `g0,g1,0`.
        #[arg(long)]
        initial: Option<String>,
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Ideal protocol outcome table.
    Fuse {
        #[command(flatten)]
        sizes: SizeArgs,
    },
    /// Dissipative fusion attempt.
    Lindblad {
        #[command(flatten)]
        sizes: SizeArgs,
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Final fidelity over a parameter grid.
    Sweep {
        #[command(flatten)]
        sizes: SizeArgs,
        #[arg(long)]
        parameter: Option<String>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Recycling-network Monte Carlo.
    Network {
        #[arg(long, value_delimiter = ',')]
        pool: Option<Vec<usize>>,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Figure data files.
    EmitFigure {
        /// fig-PX, fig-4a..fig-4c, fig-5a..fig-5d (comma separated).
        #[arg(long, value_delimiter = ',')]
        figure: Option<Vec<String>>,
        #[command(flatten)]
        sizes: SizeArgs,
    },
}

fn put(obj: &mut Map<String, Value>, path: &[&str], v: Value) {
    let mut top = v;
    for k in path[1..].iter().rev() {
        top = json!({ *k: top });
    }
    let mut single = Value::Object(Map::new());
    single[path[0]] = top;
    let mut base = Value::Object(std::mem::take(obj));
    merge(&mut base, &single);
    *obj = match base {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
}

fn sizes(o: &mut Map<String, Value>, s: &SizeArgs) {
    if let Some(n) = s.n {
        put(o, &["fusion", "n"], json!(n));
    }
    if let Some(m) = s.m {
        put(o, &["fusion", "m"], json!(m));
    }
}

fn flag_layer(cli: &Cli) -> Result<(Scenario, Value), CliError> {
    let c = &cli.common;
    let mut o = Map::new();
    if let Some(m) = &c.model {
        let kind: ModelKind = m.parse().map_err(|e| CliError::Config(format!("--model: {e}")))?;
        o.insert("model".into(), json!(kind.name()));
    }
    if let Some(p) = &c.preset {
        o.insert("preset".into(), json!(p));
    }
    if let Some(p) = &c.out {
        o.insert("out".into(), json!(p));
    }
    if let Some(s) = c.seed {
        o.insert("seed".into(), json!(s));
    }
    if let Some(dt) = c.dt {
        put(&mut o, &["integrator", "dt"], json!(dt));
    }
    if let Some(s) = c.stride {
        put(&mut o, &["integrator", "stride"], json!(s));
    }
    if c.dump_state {
        o.insert("dump_state".into(), json!(true));
    }
    let scenario = match &cli.cmd {
        Cmd::ZenoSpectrum => Scenario::ZenoSpectrum,
        Cmd::GateEvolve { initial, t_final } => {
            if let Some(i) = initial {
                put(&mut o, &["gate", "initial"], json!(i));
            }
            if let Some(t) = t_final {
                put(&mut o, &["integrator", "t_final"], json!(t));
            }
            Scenario::GateEvolve
        }
        Cmd::Fuse { sizes: s } => {
            sizes(&mut o, s);
            Scenario::Fuse
        }
        Cmd::Lindblad { sizes: s, t_final } => {
            sizes(&mut o, s);
            if let Some(t) = t_final {
                put(&mut o, &["integrator", "t_final"], json!(t));
            }
            Scenario::Lindblad
        }
        Cmd::Sweep { sizes: s, parameter, values, start, stop, points } => {
            sizes(&mut o, s);
            if let Some(p) = parameter {
                put(&mut o, &["sweep", "parameter"], json!(p));
            }
            if let Some(v) = values {
                put(&mut o, &["sweep", "values"], json!(v));
            }
            for (k, v) in [("start", start), ("stop", stop)] {
                if let Some(x) = v {
                    put(&mut o, &["sweep", k], json!(x));
                }
            }
            if let Some(p) = points {
                put(&mut o, &["sweep", "points"], json!(p));
                if values.is_none() {
                    put(&mut o, &["sweep", "values"], Value::Null);
                }
            }
            Scenario::Sweep
        }
        Cmd::Network { pool, target, trials } => {
            if let Some(p) = pool {
                put(&mut o, &["network", "pool"], json!(p));
            }
            if let Some(t) = target {
                put(&mut o, &["network", "target"], json!(t));
            }
            if let Some(t) = trials {
                put(&mut o, &["network", "trials"], json!(t));
            }
            Scenario::Network
        }
        Cmd::EmitFigure { figure, sizes: s } => {
            sizes(&mut o, s);
            if let Some(f) = figure {
                o.insert("figures".into(), json!(f));
            }
            Scenario::EmitFigure
        }
    };
    let mut layer = Value::Object(o);
    for s in &c.set {
        merge(&mut layer, &assignment(s)?);
    }
    Ok((scenario, layer))
}

fn main_inner(cli: &Cli) -> Result<Value, CliError> {
    let (scenario, flags) = flag_layer(cli)?;
    let file = cli.common.config.as_deref().map(read_file).transpose()?;
    let cfg = resolve(scenario, file, flags)?;
    run(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("json");
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("zfuse: {e}");
            if matches!(e, CliError::Numerical(_)) {
                eprintln!("zfuse: partial outputs kept; manifest marks the run as partial");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
