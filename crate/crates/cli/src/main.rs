use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use semiwave_cli::commands::{self, Outcome};
use semiwave_cli::config::{Critical, RunConfig, SpeedChoice};
use semiwave_cli::CliError;

/// Semi-wavefronts of delayed monostable reaction-diffusion equations.
#[derive(Parser)]
#[command(name = "semiwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical speed, real characteristic roots and dominance.
    Speed(Common),
    /// Argument-principle zero count in a rectangle.
    Zeros(Common),
    /// Solve for the wave profile and write CSV, JSON and SVG.
    Profile(Common),
    /// Hypothesis checks, profile diagnostics and uniqueness.
    Verify(Common),
    /// Time-step the equation and measure the front speed.
    Evolve(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// kpp, nicholson, may, custom or synthetic_ub.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Wave speed.
    #[arg(long, conflicts_with = "critical")]
    c: Option<f64>,
    /// Use the critical speed.
    #[arg(long)]
    critical: bool,
    /// TOML file; its keys override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $SEMIWAVE_OUT_DIR, then `.`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial guesses for the uniqueness harness.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    no_svg: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        cfg.model.name = self.model.clone();
        cfg.model.h = self.h;
        cfg.model.p = self.p;
        cfg.model.z = self.z;
        cfg.model.k = self.k;
        cfg.c = match (self.c, self.critical) {
            (Some(c), _) => Some(SpeedChoice::Value(c)),
            (None, true) => Some(SpeedChoice::Named(Critical::Critical)),
            _ => None,
        };
        cfg.output.dir = self.out_dir.clone();
        cfg.output.svg = !self.no_svg;
        if let Some(v) = self.tol {
            cfg.profile.tol = v;
        }
        if let Some(v) = self.dt {
            cfg.profile.dt = v;
        }
        if let Some(v) = self.samples {
            cfg.verify.samples = v;
        }
        if let Some(v) = self.seed {
            cfg.verify.seed = v;
        }
        if let Some(v) = self.seeds {
            cfg.verify.seeds = v;
        }
        if let Some(v) = self.t_end {
            cfg.evolve.t_end = v;
        }
        match &self.config {
            Some(path) => cfg.overlay_file(path),
            None => Ok(cfg),
        }
    }
}

fn run(name: &str, common: &Common, f: fn(&RunConfig) -> Result<Outcome, CliError>) -> i32 {
    let result = common.resolve().and_then(|cfg| {
        if cfg.model.name.is_none() {
            return Err(CliError::Config("missing model name (--model)".into()));
        }
        f(&cfg)
    });
    match result {
        Ok(out) => {
            match semiwave_cli::output::json(&out.report) {
                Ok(s) => print!("{s}"),
                Err(e) => eprintln!("error: {e}"),
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Config(_)) {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Speed(c) => run("speed", c, commands::speed),
        Command::Zeros(c) => run("zeros", c, commands::zeros),
        Command::Profile(c) => run("profile", c, commands::profile),
        Command::Verify(c) => run("verify", c, commands::verify),
        Command::Evolve(c) => run("evolve", c, commands::evolve_cmd),
    };
    ExitCode::from(code as u8)
}
