use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use minsurf_cli::config::{default_spec, ScenarioSpec, SCENARIO_NAMES};
use minsurf_cli::scenarios::run_scenario;

#[derive(Parser)]
#[command(name = "minsurf", about = "coupled Brownian motion experiments on minimal surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML scenario config; built-in defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// trajectory count
    #[arg(long)]
    traj: Option<u64>,
    /// base step size
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads; affects wall time only, never output
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// E[ρ²] − ρ₀² − 2t statistic on a single surface
    StoComp(RunArgs),
    /// realized coordinate quadratic variation vs its compensator
    CoordinateQv(RunArgs),
    /// spherical-cap occupation of the Gauss track
    GaussOccupation(RunArgs),
    /// Gauss track QV vs twice the curvature integral
    GaussTimechange(RunArgs),
    /// inf-r quantiles of a coupled pair across a time grid
    Halfspace(RunArgs),
    /// coupling-time CDF against the planar reflection oracle
    MirrorCouplingPlane(RunArgs),
    /// coupling fraction on one surface from two starts
    LiouvilleEmbedded(RunArgs),
    /// coupled motion stopped at a chart boundary
    MaxPrincipleBoundary(RunArgs),
    /// print the default TOML config for a scenario
    PrintConfig { name: String },
}

fn scenario_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::StoComp(_) => "sto-comp",
        Command::CoordinateQv(_) => "coordinate-qv",
        Command::GaussOccupation(_) => "gauss-occupation",
        Command::GaussTimechange(_) => "gauss-timechange",
        Command::Halfspace(_) => "halfspace",
        Command::MirrorCouplingPlane(_) => "mirror-coupling-plane",
        Command::LiouvilleEmbedded(_) => "liouville-embedded",
        Command::MaxPrincipleBoundary(_) => "max-principle-boundary",
        Command::PrintConfig { .. } => unreachable!(),
    }
}

fn load_spec(name: &str, args: &RunArgs) -> Result<ScenarioSpec, String> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            ScenarioSpec::from_toml(&text).map_err(|e| e.to_string())?
        }
        None => default_spec(name).ok_or_else(|| format!("no default spec for {name}"))?,
    };
    if spec.name != name {
        return Err(format!("config is for scenario {:?}, not {name:?}", spec.name));
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(n) = args.traj {
        spec.n_traj = n;
    }
    if let Some(dt) = args.dt {
        spec.control.dt_base = dt;
    }
    if let Some(t) = args.tmax {
        spec.control.t_max = t;
    }
    if let Some(out) = &args.out {
        spec.outputs = out.display().to_string();
    }
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::PrintConfig { name } = &cli.command {
        return match default_spec(name) {
            Some(spec) => {
                print!("{}", spec.to_toml());
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("unknown scenario {name:?}; known: {SCENARIO_NAMES:?}");
                ExitCode::FAILURE
            }
        };
    }
    let args = match &cli.command {
        Command::StoComp(a)
        | Command::CoordinateQv(a)
        | Command::GaussOccupation(a)
        | Command::GaussTimechange(a)
        | Command::Halfspace(a)
        | Command::MirrorCouplingPlane(a)
        | Command::LiouvilleEmbedded(a)
        | Command::MaxPrincipleBoundary(a) => a.clone(),
        Command::PrintConfig { .. } => unreachable!(),
    };
    let name = scenario_name(&cli.command);
    let spec = match load_spec(name, &args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match run_scenario(&spec, args.workers) {
        Ok(report) => {
            for s in &report.statistics {
                println!(
                    "{} {}: estimate {:.6e} target {:.6e} tol {:.6e}",
                    if s.pass { "PASS" } else { "FAIL" },
                    s.name,
                    s.estimate,
                    s.target,
                    s.tolerance
                );
            }
            println!(
                "{} {} (steps {}, violations {})",
                if report.pass { "PASS" } else { "FAIL" },
                report.scenario,
                report.ledger.coupled_steps,
                report.ledger.violations
            );
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
