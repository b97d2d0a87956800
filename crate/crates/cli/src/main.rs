use anyhow::Context;
use chns_cli::{check, config, convergence, runner};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Energy-stable SAV-ZEC solver for the 2D Cahn-Hilliard-Navier-Stokes
/// system on a MAC grid.
#[derive(Parser)]
#[command(name = "mac-sav-zec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a configuration file.
    Run { config: PathBuf },
    /// Temporal refinement study: halve the time step per level and report
    /// observed orders.
    ConvergenceTime {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Spatial refinement study: double the grid per level and report
    /// observed orders.
    ConvergenceSpace {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Run the invariant battery (summation-by-parts identities, solver
    /// residuals, projection orthogonality, fixed points).
    Check {
        /// Grid sizes to test.
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_thread_pool() {
    // MAC_SAV_ZEC_THREADS caps study parallelism; 0 or unset = automatic.
    if let Ok(v) = std::env::var("MAC_SAV_ZEC_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn load_config(path: &PathBuf) -> anyhow::Result<config::RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    config::parse_config(&text).map_err(anyhow::Error::from)
}

fn print_study(study: &convergence::StudyOutput) {
    for report in [&study.phi, &study.u] {
        println!("variable {}:", report.variable.as_str());
        for (k, (res, err)) in report.levels.iter().enumerate() {
            if k == 0 {
                println!("  level {k}: resolution {res:>12.6e}  error {err:.6e}");
            } else {
                println!(
                    "  level {k}: resolution {res:>12.6e}  error {err:.6e}  order {:.3}",
                    report.observed_orders[k - 1]
                );
            }
        }
    }
    for note in &study.notes {
        println!("note: {note}");
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    init_thread_pool();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let outcome = runner::run(&cfg)?;
            println!(
                "ran {} step(s); {} violation record(s)",
                outcome.steps_run,
                outcome.violations.len()
            );
            Ok(if outcome.clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::ConvergenceTime { config, levels } => {
            let cfg = load_config(&config)?;
            let study = convergence::convergence_time(&cfg, levels)?;
            study.write_csvs(&cfg.output_dir)?;
            print_study(&study);
            Ok(ExitCode::SUCCESS)
        }
        Command::ConvergenceSpace { config, levels } => {
            let cfg = load_config(&config)?;
            let study = convergence::convergence_space(&cfg, levels)?;
            study.write_csvs(&cfg.output_dir)?;
            print_study(&study);
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { n, seed } => {
            for &size in &n {
                anyhow::ensure!(size >= 2, "grid size must be at least 2, got {size}");
            }
            let (items, ok) = check::run_check(&n, seed);
            print!("{}", check::format_table(&items));
            println!("overall: {}", if ok { "PASS" } else { "FAIL" });
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
