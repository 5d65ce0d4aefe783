use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sesame::eval::{run_to_dir, Scenario};
use sesame::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sesame",
    version,
    about = "Self-constructive system energy modeling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or built-in scenario.
    Run {
        /// Path to a scenario TOML file, or a built-in name.
        scenario: String,
        /// Output directory (default: the scenario's, else `out/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run seed, replacing the scenario's.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated rates in Hz.
        #[arg(long, value_delimiter = ',')]
        rate_grid: Option<Vec<f64>>,
        /// Rebuild threshold as a fraction.
        #[arg(long)]
        threshold: Option<f64>,
        /// Number of principal components.
        #[arg(long)]
        l: Option<usize>,
        /// Stretch interval in seconds.
        #[arg(long)]
        tlow: Option<f64>,
    },
    /// List built-in scenarios.
    List,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::List => {
            for name in Scenario::builtin_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Run {
            scenario,
            out,
            seed,
            rate_grid,
            threshold,
            l,
            tlow,
        } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            if let Some(grid) = rate_grid {
                s.rate_grid = grid;
            }
            if let Some(t) = threshold {
                s.manager.threshold = t;
            }
            if let Some(l) = l {
                s.constructor.l = l;
            }
            if let Some(t) = tlow {
                s.constructor.t_low_s = t;
            }
            s.validate()?;
            let dir = out
                .or_else(|| s.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(&s.name));
            run_to_dir(&s, &dir)?;
            println!("{}", dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
