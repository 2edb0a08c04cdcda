use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pofl::chain::verify_dump;
use pofl::sim::{run_sweep, write_csv, RoundOutputs, ScenarioConfig, SimError, Simulator, Stage, SweepAxis};

#[derive(Parser)]
#[command(name = "pofl-sim", version, about = "Proof-of-federated-learning round simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured rounds and write the chain, reports and CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one parameter and print a CSV table.
    Sweep {
        /// One of r, Q, alpha_t, beta_t, zeta, S, I.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        /// Scenario file; the built-in example scenario when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a chain dump end to end.
    VerifyChain {
        #[arg(long)]
        file: PathBuf,
    },
    /// Print the cost summary of one round of a finished run.
    Report {
        #[arg(long)]
        round: u64,
        /// Run directory written by `run`.
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
    /// Print the built-in example scenario as TOML.
    ExampleConfig,
}

fn io_err(stage: Stage, path: &std::path::Path, e: std::io::Error) -> SimError {
    SimError::new(stage, format!("{}: {e}", path.display()))
}

fn load(config: Option<&PathBuf>) -> Result<ScenarioConfig, SimError> {
    match config {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::example()),
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let mut sim = Simulator::new(cfg)?;
            let reports = sim.run()?;
            RoundOutputs::new(&out).write_all(&reports, &sim.chain_dump())?;
            for r in &reports {
                println!(
                    "round {} task {} winner {} height {}",
                    r.round,
                    r.task_id,
                    r.winner.as_deref().unwrap_or("-"),
                    r.chain_height
                );
            }
            Ok(())
        }
        Command::Sweep { axis, values, config, out } => {
            let cfg = load(config.as_ref())?;
            let axis: SweepAxis = axis.parse()?;
            let table = run_sweep(&cfg, axis, &values)?;
            let header: Vec<&str> = table.header.iter().map(String::as_str).collect();
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).map_err(|e| io_err(Stage::Output, &path, e))?;
                    write_csv(f, &header, &table.csv_rows())
                }
                None => write_csv(std::io::stdout().lock(), &header, &table.csv_rows()),
            }
        }
        Command::VerifyChain { file } => {
            let bytes = std::fs::read(&file).map_err(|e| io_err(Stage::Output, &file, e))?;
            let chain = verify_dump(&bytes).map_err(|e| SimError::new(Stage::BuildBlock, e))?;
            let tip = chain.last().map_or_else(|| "-".to_string(), |b| hex::encode(b.hash()));
            println!("valid chain: {} blocks, tip {tip}", chain.len());
            Ok(())
        }
        Command::Report { round, dir } => {
            let rep = RoundOutputs::new(&dir).read_report(round)?;
            let c = &rep.costs;
            let mut out = std::io::stdout().lock();
            let lines = [
                format!("round {} task {} (I = {})", rep.round, rep.task_id, rep.test_records),
                format!("winner {}", rep.winner.as_deref().unwrap_or("-")),
                format!("he_bytes {}", c.he_bytes),
                format!("ot_bytes {}", c.ot_bytes),
                format!("gc_bytes {}", c.gc_bytes),
                format!("training_bytes {}", c.training_bytes),
                format!("verification_bytes {}", c.verification_bytes),
                format!("he_encryptions {}", c.he_encryptions),
                format!("he_decryptions {}", c.he_decryptions),
                format!("he_plain_muls {}", c.he_plain_muls),
                format!("gc_tables {}", c.gc_tables),
                format!("ot_transfers {}", c.ot_transfers),
            ];
            for l in lines {
                writeln!(out, "{l}").map_err(|e| SimError::new(Stage::Output, e))?;
            }
            for p in &rep.pools {
                let w = p.work.as_ref();
                writeln!(
                    out,
                    "pool {} traded {} claimed {} measured {}",
                    p.pool_id,
                    p.negotiation.executed(),
                    w.map_or("-".into(), |w| w.claimed_n.to_string()),
                    w.map_or("-".into(), |w| w.measured_n.to_string()),
                )
                .map_err(|e| SimError::new(Stage::Output, e))?;
            }
            Ok(())
        }
        Command::ExampleConfig => {
            print!("{}", ScenarioConfig::example().to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pofl-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
