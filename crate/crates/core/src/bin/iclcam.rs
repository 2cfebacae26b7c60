use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iclcam::harness::{emit_run, emit_sweep, load_config, run, sweep_gamma, ScenarioConfig};
use iclcam::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "iclcam", version, about = "Closed-loop ICL distance observer and velocity planner simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one closed-loop run and write its table, summary and figures.
    Run(Common),
    /// Repeat the run over orthogonality gains and write the conditioning table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated gamma values.
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,25,50")]
        gammas: Vec<f64>,
    },
    /// Print the default scenario as a config file.
    DefaultConfig,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON); the default scenario is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the noise seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => ScenarioConfig::default_scenario(),
        };
        if let Some(seed) = self.seed {
            cfg.noise.seed = seed;
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_simulation_abort() {
        EXIT_ABORT
    } else if matches!(e, Error::Io { .. }) {
        EXIT_IO
    } else {
        EXIT_CONFIG
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e))
}

fn cmd_run(c: &Common) -> ExitCode {
    let cfg = match c.load() {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    let (log, abort) = match run(&cfg) {
        Ok(log) => (log, None),
        Err(f) => match f.partial {
            Some(log) => (log, Some(f.error)),
            None => return fail(&f.error),
        },
    };
    if let Err(e) = emit_run(&log, &c.out) {
        return fail(&e);
    }
    if let Some(e) = abort {
        eprintln!("aborted after {} steps; partial log written to {}", log.rows.len(), c.out.display());
        return fail(&e);
    }
    if !c.quiet {
        println!(
            "steps={} tau={} final_pos_err={:.3e} total_cost={:.6} avg_cond={:.3}",
            log.rows.len(),
            log.tau_all().map_or("none".into(), |t| format!("{t:.3}")),
            log.final_position_error(),
            log.total_cost(),
            log.average_condition()
        );
        println!("wrote {}", c.out.display());
    }
    ExitCode::SUCCESS
}

fn cmd_sweep(c: &Common, gammas: &[f64]) -> ExitCode {
    let cfg = match c.load() {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    let result = match sweep_gamma(&cfg, gammas) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if let Err(e) = emit_sweep(&result, &c.out) {
        return fail(&e);
    }
    if !c.quiet {
        println!("{:>8} {:>14} {:>14} {:>12}", "gamma", "avg_cond", "final_pos_err", "total_cost");
        for r in &result.rows {
            match &r.outcome {
                Ok(m) => println!("{:>8} {:>14.3} {:>14.3e} {:>12.4}", r.gamma, m.avg_cond, m.final_pos_err, m.total_cost),
                Err(e) => println!("{:>8} failed: {e}", r.gamma),
            }
        }
    }
    if result.failures().next().is_some() {
        eprintln!("some gamma values aborted; see {}", c.out.display());
        return ExitCode::from(EXIT_ABORT);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Sweep { common, gammas } => cmd_sweep(common, gammas),
        Command::DefaultConfig => {
            println!("{}", ScenarioConfig::default_scenario().to_json_string());
            ExitCode::SUCCESS
        }
    }
}
