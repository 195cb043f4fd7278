//! `omps`: batch runs, parameter sweeps and checks of the micromirror
//! cavity model, plus the live steering server.

mod convergence;
mod oracle;
mod output;
mod run;
mod stability;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use omps_core::config::{RunConfig, PRESETS};

#[derive(Parser)]
#[command(name = "omps", version, about = "Optical cavity with a micromirror-array end mirror")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write snapshots, a CSV profile and a report.
    Run(run::RunArgs),
    /// Run a grid of parameter points and collect their pattern reports.
    Sweep(sweep::SweepArgs),
    /// Compare round-trip map fixed points with mean-field steady states.
    OracleCheck(oracle::OracleArgs),
    /// Homogeneous steady states, bistability curve and transverse stability.
    Stability(stability::StabilityArgs),
    /// Distance between lattice runs and the continuum reference.
    Convergence(convergence::ConvergenceArgs),
    /// Host live steering sessions over a websocket.
    Serve(ServeArgs),
}

/// Where the configuration comes from and the usual overrides.
#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: fig2-soliton, fig2-pattern or fig3-write-erase.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "F64")]
    pub dt: Option<f64>,
    #[arg(long, value_name = "F64")]
    pub tau_end: Option<f64>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => bail!("give --config PATH or --preset NAME (one of {})", PRESETS.join(", ")),
        };
        if let Some(seed) = self.seed {
            cfg.integrator.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(dt) = self.dt {
            cfg.integrator.dt = dt;
        }
        if let Some(t) = self.tau_end {
            cfg.integrator.tau_end = t;
        }
        cfg.validate().context("invalid configuration after command-line overrides")?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8765", value_name = "HOST:PORT")]
    bind: String,
    #[arg(long, default_value_t = 8, value_name = "K")]
    max_sessions: usize,
    /// Directory with the browser client; a placeholder page otherwise.
    #[arg(long = "static", value_name = "DIR")]
    static_dir: Option<PathBuf>,
    /// Simulated time per wall-clock second in each session.
    #[arg(long, default_value_t = 20.0)]
    tau_per_second: f64,
}

fn serve(args: ServeArgs) -> Result<()> {
    let mut cfg = omps_steer::ServerConfig {
        bind: args.bind,
        max_sessions: args.max_sessions,
        static_dir: args.static_dir,
        ..Default::default()
    };
    cfg.session.tau_per_second = args.tau_per_second;
    let server = omps_steer::Server::bind(cfg).context("cannot bind")?;
    println!("listening on {}", server.local_addr()?);
    server.run();
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run::main(a),
        Command::Sweep(a) => sweep::main(a),
        Command::OracleCheck(a) => oracle::main(a),
        Command::Stability(a) => stability::main(a),
        Command::Convergence(a) => convergence::main(a),
        Command::Serve(a) => serve(a).map(|()| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
