use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fockforge_cli::config::{
    CouplingSection, DimSection, EvolveSection, GridSection, OutputSection, SweepSection,
    TargetSection,
};
use fockforge_cli::{output, CliError, Command, FileConfig, Model, RunConfig};

#[derive(Parser)]
#[command(
    name = "fockforge",
    version,
    about = "Dissipative displaced-Fock-state toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Resonant couplings for a target.
    Couplings(Opts),
    /// Analytic steady state and its diagnostics.
    State(Opts),
    /// Cross-check the analytic state against operator kernels.
    Verify(Opts),
    /// Lindblad evolution toward the dark state.
    Evolve(Opts),
    /// Wigner function of the analytic state as CSV.
    Wigner(Opts),
    /// State diagnostics over a grid of targets as CSV.
    Sweep(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    g_minus: Option<f64>,
    #[arg(long)]
    g_plus: Option<f64>,
    #[arg(long)]
    g_zero: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Mechanical truncation (escalated automatically when absent).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    cav_dim: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Permit G+ >= G-.
    #[arg(long)]
    allow_unstable: bool,
    /// Start the mechanics in a thermal state with this mean occupation.
    #[arg(long)]
    thermal_start: Option<f64>,
    #[arg(long, value_parser = parse_model)]
    model: Option<Model>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    checkpoints: Option<usize>,
    /// Evolve until converged instead of to a fixed time.
    #[arg(long)]
    steady: bool,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    step_factor: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q_max: Option<f64>,
    #[arg(long)]
    q_step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p_max: Option<f64>,
    #[arg(long)]
    p_step: Option<f64>,
    /// Comma-separated squeezing values.
    #[arg(long, value_delimiter = ',')]
    zetas: Option<Vec<f64>>,
    /// Comma-separated Fock indices.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<u32>>,
}

fn parse_model(s: &str) -> Result<Model, String> {
    match s {
        "effective" => Ok(Model::Effective),
        "two-mode" | "two_mode" => Ok(Model::TwoMode),
        other => Err(format!("unknown model {other:?} (effective, two-mode)")),
    }
}

impl Opts {
    fn overrides(&self, command: Command) -> FileConfig {
        FileConfig {
            command: Some(command),
            target: TargetSection {
                n: self.n,
                zeta: self.zeta,
            },
            couplings: CouplingSection {
                g_minus: self.g_minus,
                g_plus: self.g_plus,
                g_zero: self.g_zero,
                kappa: self.kappa,
            },
            dims: DimSection {
                mech: self.dim,
                cav: self.cav_dim,
            },
            grid: GridSection {
                q_min: self.q_min,
                q_max: self.q_max,
                q_step: self.q_step,
                p_min: self.p_min,
                p_max: self.p_max,
                p_step: self.p_step,
            },
            evolve: EvolveSection {
                model: self.model,
                t_final: self.t_final,
                checkpoints: self.checkpoints,
                steady: self.steady.then_some(true),
                max_time: self.max_time,
                tolerance: self.tolerance,
                interval: None,
                step_factor: self.step_factor,
                thermal_start: self.thermal_start,
                allow_unstable: self.allow_unstable.then_some(true),
            },
            sweep: SweepSection {
                zetas: self.zetas.clone(),
                ns: self.ns.clone(),
            },
            output: OutputSection {
                path: self.out.clone(),
            },
        }
    }
}

fn execute(command: Command, opts: &Opts) -> Result<String, CliError> {
    let base = match &opts.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(base.merge(opts.overrides(command)))?;
    log::info!("running {}", command.name());
    let report = fockforge_cli::run(&cfg)?;
    output::to_json_string(&report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, opts) = match &cli.command {
        Cmd::Couplings(o) => (Command::Couplings, o),
        Cmd::State(o) => (Command::State, o),
        Cmd::Verify(o) => (Command::Verify, o),
        Cmd::Evolve(o) => (Command::Evolve, o),
        Cmd::Wigner(o) => (Command::Wigner, o),
        Cmd::Sweep(o) => (Command::Sweep, o),
    };
    match execute(command, opts) {
        Ok(json) => {
            print!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
