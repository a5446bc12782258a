//! `relay-cf`: consumption-factor analysis and power allocation for
//! multihop relay chains.
//!
//! Exit codes: 0 success, 1 usage/parse error, 2 numerical non-convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use relay_cf_cli::commands::{
    cmd_cf, cmd_dissimilar, cmd_sweep_hops, cmd_sweep_power, cmd_tradeoff, cmd_validate, CliError,
    CoeffForm,
};
use relay_cf_cli::scenario::Scenario;
use relay_cf_cli::table::Table;

#[derive(Parser)]
#[command(
    name = "relay-cf",
    version,
    about = "Energy efficiency of multihop relay chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file describing the chain, power model, and controls.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Write machine-readable output here instead of pretty-printing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the scenario sample count.
    #[arg(long, global = true)]
    samples: Option<u64>,

    /// Override the scenario strategy list (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    strategies: Option<Vec<String>>,

    /// Output format for --out.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Also write a gnuplot companion script for the sweep commands
    /// (requires --out).
    #[arg(long, global = true)]
    gnuplot: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Coeff {
    /// Production Γ(m) normalization.
    Gamma,
    /// Rejected m! normalization (negative control).
    MFactorial,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form CF, capacity, and power per strategy.
    Cf,
    /// Closed form vs Monte-Carlo across the validation grid.
    Validate {
        /// AF series coefficient convention.
        #[arg(long, value_enum, default_value_t = Coeff::Gamma)]
        coeff: Coeff,
    },
    /// CF vs number of hops.
    SweepHops {
        #[arg(long, default_value_t = 1)]
        min_hops: usize,
        #[arg(long, default_value_t = 10)]
        max_hops: usize,
    },
    /// CF vs total power budget.
    SweepPower {
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        from_db: f64,
        #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
        to_db: f64,
        #[arg(long, default_value_t = 1.0)]
        step_db: f64,
    },
    /// Capacity-CF tradeoff along a budget sweep.
    Tradeoff {
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        from_db: f64,
        #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
        to_db: f64,
        #[arg(long, default_value_t = 1.0)]
        step_db: f64,
    },
    /// CF under dissimilar link conditions (2-hop chains).
    Dissimilar {
        /// Largest γ̄₁ − γ̄₂ gap.
        #[arg(long, default_value_t = 9.0)]
        max_delta: f64,
        /// Number of sweep points.
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
}

fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Usage("--scenario <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut scenario = Scenario::parse(&text)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(samples) = cli.samples {
        scenario.samples = samples;
    }
    if let Some(list) = &cli.strategies {
        let mut out = Vec::new();
        for s in list {
            out.push(s.parse().map_err(CliError::Usage)?);
        }
        if out.is_empty() {
            return Err(CliError::Usage("empty --strategies list".into()));
        }
        scenario.strategies = out;
    }
    Ok(scenario)
}

fn emit(cli: &Cli, table: &Table, summary: Option<&str>) -> Result<(), CliError> {
    if let Some(path) = &cli.out {
        let sep = match cli.format {
            Format::Csv => ',',
            Format::Tsv => '\t',
        };
        std::fs::write(path, table.delimited(sep))
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    } else {
        print!("{}", table.pretty());
    }
    if let Some(gp) = &cli.gnuplot {
        match (&cli.out, gnuplot_axes(&cli.command)) {
            (Some(csv), Some((x, y))) => {
                let script = gnuplot_script(csv, table, x, y);
                std::fs::write(gp, script)
                    .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", gp.display())))?;
            }
            (None, _) => {
                return Err(CliError::Usage("--gnuplot requires --out".into()));
            }
            (_, None) => {
                eprintln!("note: --gnuplot is only produced for the sweep commands");
            }
        }
    }
    if let Some(s) = summary {
        println!("{s}");
    }
    Ok(())
}

/// (x column, y column) for plottable commands.
fn gnuplot_axes(command: &Command) -> Option<(&'static str, &'static str)> {
    match command {
        Command::SweepHops { .. } => Some(("n", "cf")),
        Command::SweepPower { .. } => Some(("p_tot_db", "cf")),
        Command::Tradeoff { .. } => Some(("capacity", "cf")),
        Command::Dissimilar { .. } => Some(("delta_gbar", "cf")),
        _ => None,
    }
}

fn gnuplot_script(csv: &std::path::Path, table: &Table, x: &str, y: &str) -> String {
    let col = |name: &str| table.header.iter().position(|&h| h == name).unwrap() + 1;
    let strategy_col = col("strategy");
    let mut strategies: Vec<String> = Vec::new();
    for row in &table.rows {
        if let Some(s) = row[strategy_col - 1].as_str() {
            if !strategies.iter().any(|t| t == s) {
                strategies.push(s.to_string());
            }
        }
    }
    let mut plots = Vec::new();
    for s in &strategies {
        plots.push(format!(
            "'{}' using (strcol({strategy_col}) eq '{s}' ? ${}: NaN):(${}) with linespoints title '{s}'",
            csv.display(),
            col(x),
            col(y),
        ));
    }
    format!
        ("set datafile separator ','\nset key autotitle columnhead\nset xlabel '{x}'\nset ylabel '{y}'\nplot {}\n",
        plots.join(", \\\n     "))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let scenario = load_scenario(cli)?;
    match &cli.command {
        Command::Cf => {
            let table = cmd_cf(&scenario)?;
            emit(cli, &table, None)
        }
        Command::Validate { coeff } => {
            let form = match coeff {
                Coeff::Gamma => CoeffForm::Gamma,
                Coeff::MFactorial => CoeffForm::MFactorial,
            };
            let (table, z_max) = cmd_validate(&scenario, form)?;
            emit(cli, &table, Some(&format!("max |z| = {z_max:.3}")))
        }
        Command::SweepHops { min_hops, max_hops } => {
            let (table, summary) = cmd_sweep_hops(&scenario, *min_hops, *max_hops)?;
            emit(cli, &table, Some(&summary))
        }
        Command::SweepPower {
            from_db,
            to_db,
            step_db,
        } => {
            let (table, summary) = cmd_sweep_power(&scenario, *from_db, *to_db, *step_db)?;
            emit(cli, &table, Some(&summary))
        }
        Command::Tradeoff {
            from_db,
            to_db,
            step_db,
        } => {
            let table = cmd_tradeoff(&scenario, *from_db, *to_db, *step_db)?;
            emit(cli, &table, None)
        }
        Command::Dissimilar { max_delta, points } => {
            let table = cmd_dissimilar(&scenario, *max_delta, *points)?;
            emit(cli, &table, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
