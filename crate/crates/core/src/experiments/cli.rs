//! Command-line front end of the `usaav` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, Model, Scenario};
use crate::experiments::{self, maximizer, run_cell};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "usaav", version, about = "Attention dynamics with frozen auxiliary labels on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate single systems and write their trajectories.
    Simulate(RunArgs),
    /// Collapse comparison of baseline, RoPE and prompt models.
    Exp1(RunArgs),
    /// Final-state shapes of the six models.
    Exp2(RunArgs),
    /// Nested-sample W1 trend against a reference size.
    Dobrushin(RunArgs),
    /// β sweep of the clustered distance-bias system.
    Metastab(RunArgs),
    /// Sample a closed-form maximizer and report its energy.
    Maximizer(MaximizerArgs),
    /// Parse and validate a config file.
    ValidateConfig {
        path: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON config; defaults of the subcommand otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Particle counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Inverse temperature; a list sets the metastab sweep.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    beta: Vec<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step size.
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long = "t-final", allow_negative_numbers = true)]
    t_final: Option<f64>,
    /// Models, comma separated.
    #[arg(long, alias = "scenario", value_delimiter = ',')]
    model: Vec<Model>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    o: Overrides,
    /// Number of seeds per (model, n).
    #[arg(long)]
    seeds: Option<usize>,
    /// Run only this cell.
    #[arg(long)]
    cell: Option<String>,
    /// Re-run `--cell` from a finished run's manifest into `--out`.
    #[arg(long, requires = "cell")]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MaximizerArgs {
    #[command(flatten)]
    o: Overrides,
}

fn load(scenario: Scenario, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(p) => {
            let c = ExperimentConfig::load(p)?;
            if c.scenario != scenario {
                return Err(Error::Config(format!(
                    "{} holds a {} config, expected {}",
                    p.display(),
                    c.scenario.name(),
                    scenario.name()
                )));
            }
            c
        }
        None => ExperimentConfig::defaults(scenario),
    };
    if !o.n.is_empty() {
        cfg.n = o.n.clone();
    }
    match (scenario, o.beta.as_slice()) {
        (_, []) => {}
        (Scenario::Metastab, b) => cfg.metastab.betas = b.to_vec(),
        (_, [b]) => cfg.beta = *b,
        _ => return Err(Error::Config("--beta takes one value here".into())),
    }
    if let Some(s) = o.seed {
        cfg.master_seed = s;
    }
    if let Some(p) = &o.out {
        cfg.output_dir = p.clone();
    }
    if let Some(dt) = o.dt {
        cfg.sim.dt = dt;
    }
    if let Some(t) = o.t_final {
        cfg.sim.t_final = t;
        if cfg.sim.snapshot_every > t && t > 0.0 {
            cfg.sim.snapshot_every = t;
        }
    }
    if !o.model.is_empty() {
        cfg.models = o.model.clone();
    }
    Ok(cfg)
}

fn run_scenario(scenario: Scenario, a: &RunArgs) -> Result<()> {
    let mut cfg = load(scenario, &a.o)?;
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    cfg.validate()?;
    match (&a.cell, &a.manifest) {
        (Some(cell), Some(m)) => {
            let out = a.o.out.clone().ok_or_else(|| Error::Config("--manifest needs --out".into()))?;
            let dir = experiments::rerun_from_manifest(m, cell, &out)?;
            println!("{}", dir.display());
        }
        (Some(cell), None) => {
            if !experiments::cell_names(&cfg)?.contains(cell) {
                return Err(Error::Config(format!("cell `{cell}` is not part of this run")));
            }
            std::fs::create_dir_all(&cfg.output_dir)?;
            let fresh = run_cell(&cfg, &cfg.output_dir, cell)?;
            println!("{} {}", experiments::cell_dir(&cfg.output_dir, cell).display(), if fresh { "written" } else { "up to date" });
        }
        _ => {
            let s = experiments::run(&cfg)?;
            println!(
                "{}: {} cells ({} simulated), manifest {}",
                s.output_dir.display(),
                s.cells.len(),
                s.simulated,
                s.output_dir.join(experiments::io::MANIFEST).display()
            );
        }
    }
    Ok(())
}

fn run_maximizer(a: &MaximizerArgs) -> Result<()> {
    let mut cfg = load(Scenario::Single, &a.o)?;
    if a.o.out.is_none() {
        cfg.output_dir = PathBuf::from("out").join("maximizer");
    }
    let model = match cfg.models.as_slice() {
        [m] => *m,
        _ => return Err(Error::Config("maximizer needs exactly one --model".into())),
    };
    let n = match cfg.n.as_slice() {
        [n] => *n,
        _ => return Err(Error::Config("maximizer needs exactly one --n".into())),
    };
    if !(cfg.beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {}", cfg.beta)));
    }
    let (r, csv, json) = maximizer::run(&cfg, model, n, &cfg.output_dir)?;
    println!(
        "{} energy {:.17e} gap {} residual {:.3e}: {} {}",
        r.construction,
        r.energy,
        r.ceiling_gap.map_or("-".to_string(), |g| format!("{g:.3e}")),
        r.projected_gradient_residual,
        csv.display(),
        json.display()
    );
    Ok(())
}

fn validate_config(path: &std::path::Path) -> Result<()> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    println!("{}: {} config ok, hash {}", path.display(), cfg.scenario.name(), cfg.hash());
    Ok(())
}

/// Exit status of a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite { .. } | Error::ZeroVector(_) | Error::DegenerateCluster(..) => EXIT_NUMERIC,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let res = match &cli.command {
        Command::Simulate(a) => run_scenario(Scenario::Single, a),
        Command::Exp1(a) => run_scenario(Scenario::Exp1, a),
        Command::Exp2(a) => run_scenario(Scenario::Exp2, a),
        Command::Dobrushin(a) => run_scenario(Scenario::Dobrushin, a),
        Command::Metastab(a) => run_scenario(Scenario::Metastab, a),
        Command::Maximizer(a) => run_maximizer(a),
        Command::ValidateConfig { path } => validate_config(path),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("usaav: {e}");
            exit_code(&e)
        }
    }
}
