use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rionc::check::{run_checks, CheckConfig, Suite};
use rionc::harness::{cmd_plotdata, cmd_run, cmd_sweep, parse_config, thread_pool};

#[derive(Parser)]
#[command(name = "rionc", version, about = "Riemannian online-to-nonconvex optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured mode and write per-epoch CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep the iteration budget N and fit the proxy decay rate.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
    },
    /// Run the randomized property suites; prints a JSON report.
    Check {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reduced case counts.
        #[arg(long)]
        quick: bool,
    },
    /// Merge run CSVs into plot.csv and plot.svg.
    Plotdata {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> rionc::Result<ExitCode> {
    match command {
        Command::Run { config, seed } => {
            let cfg = parse_config(&config)?;
            for out in cmd_run(&cfg, seed)? {
                let last = out.result.proxies().last().copied().unwrap_or(f64::NAN);
                println!(
                    "{}: {} epochs, final proxy {last:.6e} -> {}",
                    out.mode.label(),
                    out.result.epochs.len(),
                    out.csv.display()
                );
            }
        }
        Command::Sweep { config, n, seeds } => {
            let cfg = parse_config(&config)?;
            let out = cmd_sweep(&cfg, &n, seeds)?;
            for s in &out.summaries {
                println!("{}: slope {:.4}", s.mode.label(), s.slope);
            }
            println!("-> {}", out.csv.display());
        }
        Command::Check { suite, seed, quick } => {
            let cfg = if quick { CheckConfig::quick(seed) } else { CheckConfig { seed, ..CheckConfig::default() } };
            let report = run_checks(suite, &cfg)?;
            println!("{}", report.to_json());
            for p in &report.properties {
                eprintln!("{p}");
            }
            return Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::Plotdata { csv, out } => {
            let o = cmd_plotdata(&csv, &out)?;
            println!("{} series -> {}, {}", o.series.len(), o.csv.display(), o.svg.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
