use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sr_aif::model::ActionPrecision;
use sr_aif_harness::checks::{cmd_duality, DualityConfig};
use sr_aif_harness::{bench, dump, resolve, run, AgentKind, ConfigOverrides, HarnessError, RunConfig};

#[derive(Parser)]
#[command(
    name = "sr-aif",
    version,
    about = "Successor-representation active inference experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes of one agent and write a JSON report.
    Run(Common),
    /// Sweep grid sizes and agents and write a CSV table.
    Bench(Common),
    /// Write matrices and value fields of a grid model as JSON.
    Dump {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of default_b, successor, state_value,
        /// efe_value, utility_value, entropy (default: all).
        #[arg(long, default_value = "")]
        what: String,
    },
    /// Check the control/inference duality on random linear MDPs.
    Duality {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest state count.
        #[arg(long, default_value_t = 10)]
        states: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Largest horizon.
        #[arg(long, default_value_t = 6)]
        horizon: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Flat JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, value_parser = parse_agent)]
    agent: Option<AgentKind>,
    /// Agents for `bench`, comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_agent)]
    agents: Option<Vec<AgentKind>>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Discount for the successor matrix only; may exceed 1.
    #[arg(long)]
    sr_gamma: Option<f64>,
    /// Action precision, or `greedy`.
    #[arg(long, value_parser = parse_beta)]
    beta: Option<ActionPrecision>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    w_utility: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    w_epistemic: Option<f64>,
    /// Unknowable cells, comma-separated.
    #[arg(long, value_delimiter = ',')]
    unknowable: Option<Vec<usize>>,
    /// Grid sizes for `bench`, comma-separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    goal: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
}

fn parse_agent(s: &str) -> Result<AgentKind, String> {
    s.parse()
}

fn parse_beta(s: &str) -> Result<ActionPrecision, String> {
    s.parse().map_err(|e: sr_aif::Error| e.to_string())
}

impl Common {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            grid_size: self.grid_size,
            goal: self.goal,
            unknowable: self.unknowable.clone(),
            max_steps: self.max_steps,
            agent: self.agent,
            episodes: self.episodes,
            seed: self.seed,
            gamma: self.gamma,
            sr_gamma: self.sr_gamma,
            beta: self.beta,
            horizon: self.horizon,
            w_utility: self.w_utility,
            w_epistemic: self.w_epistemic,
            sizes: self.sizes.clone(),
            agents: self.agents.clone(),
            ..Default::default()
        }
    }

    fn resolve(&self) -> Result<RunConfig, HarnessError> {
        resolve(self.config.as_deref(), &self.overrides())
    }
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>, HarnessError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(out: Option<&Path>, value: &impl serde::Serialize) -> Result<(), HarnessError> {
    let mut w = writer(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(common) => {
            let report = run::cmd_run(&common.resolve()?)?;
            for w in &report.warnings {
                eprintln!("warning: {}", w.message);
            }
            write_json(common.out.as_deref(), &report)
        }
        Command::Bench(common) => {
            let mut cfg = common.resolve()?;
            if let (Some(agent), None) = (common.agent, &common.agents) {
                cfg.agents = vec![agent];
            }
            let records = bench::cmd_bench(&cfg)?;
            for r in records.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "error: grid {} agent {} episode {}: {}",
                    r.grid_size,
                    r.agent,
                    r.episode,
                    r.error.as_deref().unwrap_or_default()
                );
            }
            let mut w = writer(common.out.as_deref())?;
            bench::write_csv(&records, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Dump { common, what } => {
            let fields = dump::parse_fields(&what)?;
            let value = dump::cmd_dump(&common.resolve()?, &fields)?;
            write_json(common.out.as_deref(), &value)
        }
        Command::Duality {
            out,
            seed,
            states,
            trials,
            horizon,
        } => {
            let report = cmd_duality(&DualityConfig {
                states,
                trials,
                horizon,
                seed,
            })?;
            write_json(out.as_deref(), &report)?;
            report.failure().map_or(Ok(()), Err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
