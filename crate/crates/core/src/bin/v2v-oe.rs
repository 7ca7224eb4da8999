use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use v2v_oe::engine::export::{self, TraceKind, TraceWriter};
use v2v_oe::engine::{self, sweep};
use v2v_oe::scenario::ConfigDocument;
use v2v_oe::{Execution, Result};

#[derive(Parser)]
#[command(name = "v2v-oe", version, about = "V2V resource auction simulator")]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Trace {
    Mobility,
    Auction,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seed and write summary.json and series.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Number of slots (overrides horizon_slots).
        #[arg(long)]
        slots: Option<u64>,
        /// oe | channel_aware | queue_aware | random
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Extra `key=value` config overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum)]
        trace: Vec<Trace>,
    },
    /// Vary one key over a list of values and write per-value aggregates.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load(path: &PathBuf, overrides: &[String]) -> Result<ConfigDocument> {
    let mut doc = ConfigDocument::from_path(path)?;
    for o in overrides {
        doc.apply_override(o)?;
    }
    Ok(doc)
}

fn execute(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Run {
            config,
            seed,
            slots,
            policy,
            out,
            overrides,
            trace,
        } => {
            let mut doc = load(&config, &overrides)?;
            if let Some(slots) = slots {
                doc.set("horizon_slots", &slots.to_string())?;
            }
            if let Some(policy) = policy {
                doc.set("policy", &format!("\"{policy}\""))?;
            }
            let config = doc.build()?;
            let kinds: Vec<TraceKind> = trace
                .iter()
                .map(|t| match t {
                    Trace::Mobility => TraceKind::Mobility,
                    Trace::Auction => TraceKind::Auction,
                })
                .collect();
            let mut traces = if kinds.is_empty() {
                None
            } else {
                Some(TraceWriter::create(&out, &kinds)?)
            };
            let summary = engine::run_observed(&config, seed, exec, |m| match &mut traces {
                Some(t) => t.record(m),
                None => Ok(()),
            })?;
            if let Some(t) = traces {
                t.finish()?;
            }
            export::write_summary(&summary, &out)?;
            let a = summary.averages;
            println!(
                "seed {seed}: queue {:.4} power {:.4} drops {:.4} utility {:.4} payment {:.4}",
                a.queue, a.power, a.overflow, a.utility, a.payment
            );
            match summary.convergence_slot {
                Some(t) => println!("converged at slot {t}"),
                None => println!("convergence not reached"),
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep {
            config,
            param,
            values,
            seeds,
            out,
            overrides,
        } => {
            let doc = load(&config, &overrides)?;
            let rows = sweep(&doc, &param, &values, &seeds, exec)?;
            export::write_sweep(&rows, &out)?;
            print!("{}", export::sweep_csv(&rows));
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
