//! Scenario-driven command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure. `MGEQOE_THREADS` caps the worker count (results are bit
//! identical for any value).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mgeqoe_core::error::Error;
use mgeqoe_core::output;
use mgeqoe_core::pipeline::{
    run_monte_carlo, run_propagation, write_monte_carlo_products, write_propagation_products,
    MonteCarloOptions,
};
use mgeqoe_core::propagation::compare_trajectories;
use mgeqoe_core::scenario::Scenario;
use mgeqoe_core::units::CanonicalUnits;

#[derive(Parser)]
#[command(
    name = "mgeqoe",
    version,
    about = "Cislunar state and uncertainty propagation in Cartesian and \
             modified generalized equinoctial element coordinates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a scenario and write trajectory, frame-view, element
    /// history, and error-series CSVs
    Propagate {
        /// Scenario TOML file
        scenario: PathBuf,
        /// Output directory
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Position/velocity error series between two Cartesian trajectory CSVs
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Output CSV file
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Monte Carlo uncertainty propagation with the Henze-Zirkler
    /// normality series and pairs-plot exports
    Mc {
        /// Scenario TOML file (needs an [ensemble] block)
        scenario: PathBuf,
        /// Output directory
        #[arg(short, long)]
        output: PathBuf,
        /// Significance level for the rejection decision
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Pairs-plot epochs in days, comma separated (default: the
        /// grid radius minimum of the mean trajectory)
        #[arg(long, value_delimiter = ',')]
        epochs: Option<Vec<f64>>,
        /// Cap the O(N^2) HZ kernel at this many samples
        #[arg(long)]
        hz_subsample: Option<usize>,
    },
}

fn main() -> ExitCode {
    if let Ok(value) = std::env::var("MGEQOE_THREADS") {
        match value.parse::<usize>() {
            Ok(threads) if threads >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
            _ => {
                eprintln!("error: MGEQOE_THREADS must be a positive integer, got '{value}'");
                return ExitCode::from(2);
            }
        }
    }

    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            ExitCode::from(if err.is_config() { 2 } else { 3 })
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Propagate { scenario, output } => {
            let scenario = Scenario::load(&scenario)?;
            let products = run_propagation(&scenario)?;
            write_propagation_products(&scenario, &products, &output)?;
            println!(
                "propagated '{}' ({} grid points, offset {:.6e}) -> {}",
                scenario.name,
                scenario.output_grid().len(),
                products.u_offset,
                output.display()
            );
            Ok(())
        }
        Command::Compare { a, b, output } => {
            let (traj_a, meta_a) = output::read_trajectory(&a)?;
            let (traj_b, meta_b) = output::read_trajectory(&b)?;
            if meta_a.l_star_km != meta_b.l_star_km || meta_a.t_star_s != meta_b.t_star_s {
                return Err(Error::Config(format!(
                    "trajectory files use different unit systems: \
                     l* {} km / t* {} s vs l* {} km / t* {} s",
                    meta_a.l_star_km, meta_a.t_star_s, meta_b.l_star_km, meta_b.t_star_s
                )));
            }
            let units = CanonicalUnits::from_length_time(meta_a.l_star_km, meta_a.t_star_s)?;
            let series = compare_trajectories(&traj_a, &traj_b, &units)?;
            if let Some(parent) = output.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                        path: parent.display().to_string(),
                        message: e.to_string(),
                    })?;
                }
            }
            output::write_error_series(&output, &series)?;
            let worst = series.pos_err_km.iter().cloned().fold(0.0, f64::max);
            println!(
                "compared {} epochs, max position error {:.6e} km -> {}",
                series.epochs.len(),
                worst,
                output.display()
            );
            Ok(())
        }
        Command::Mc {
            scenario,
            output,
            alpha,
            epochs,
            hz_subsample,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Config(format!(
                    "--alpha must lie in (0, 1), got {alpha}"
                )));
            }
            let scenario = Scenario::load(&scenario)?;
            let options = MonteCarloOptions {
                alpha,
                snapshot_epochs_days: epochs,
                hz_subsample,
            };
            let products = run_monte_carlo(&scenario, &options)?;
            write_monte_carlo_products(&scenario, &products, &output)?;
            for results in [&products.cartesian, &products.mgeqoe].into_iter().flatten() {
                let rejected = results.hz.results.iter().filter(|r| r.reject).count();
                println!(
                    "{}: {} / {} epochs reject normality at alpha {}",
                    results.ensemble.kind.name(),
                    rejected,
                    results.hz.results.len(),
                    alpha
                );
            }
            println!("monte carlo products -> {}", output.display());
            Ok(())
        }
    }
}
