use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rcdlab::scenario::{list_models, run, sweep, ConfigError, LoadedScenario, RunOptions};

#[derive(Parser)]
#[command(name = "rcdlab", version, about = "Curvature-dimension inequality checks on weighted 1-D model spaces")]
struct Cli {
    /// Directory receiving report.json, margin tables and sweep.csv.
    #[arg(long, global = true, default_value = "rcdlab-out")]
    out_dir: PathBuf,
    /// Overrides the scenario seed for random fields.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplies every resolved tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every check of a scenario file.
    Run { file: PathBuf },
    /// Repeat the checks on successively halved grids and fit convergence orders.
    Sweep {
        file: PathBuf,
        /// Number of refinement levels (at least 3); falls back to the scenario's sweep block.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Print the model catalog.
    ListModels,
}

fn load(file: &Path) -> Result<LoadedScenario, String> {
    let text = fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    LoadedScenario::parse(&text).map_err(|e: ConfigError| format!("{}: {e}", file.display()))
}

fn write_out(dir: &Path, files: &[(String, String)]) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<u8, String> {
    let opts = RunOptions { seed: cli.seed, tolerance_scale: cli.tolerance_scale };
    match cli.command {
        Command::ListModels => {
            print!("{}", list_models());
            Ok(0)
        }
        Command::Run { file } => {
            let loaded = load(&file)?;
            let report = run(&loaded, opts).map_err(|e| format!("{}: {e}", file.display()))?;
            let mut files = vec![("report.json".to_string(), report.to_json())];
            files.extend(report.margin_files());
            write_out(&cli.out_dir, &files)?;
            for c in &report.checks {
                let worst = c.reports.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
                let verdict = serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
                println!("{:<20} {verdict:<15} min_margin={worst:.6e} tolerance={:.3e}", c.check, c.tolerance);
            }
            let s = &report.summary;
            println!("{} checks: {} pass, {} fail, {} error, {} vacuous, {} outside regime", s.checks, s.pass, s.fail, s.error, s.vacuous_pass, s.outside_regime);
            Ok(report.exit_code as u8)
        }
        Command::Sweep { file, levels } => {
            let loaded = load(&file)?;
            let levels = levels.or(loaded.scenario.sweep.as_ref().and_then(|s| s.levels)).unwrap_or(3);
            let table = sweep(&loaded, levels, opts).map_err(|e| format!("{}: {e}", file.display()))?;
            write_out(&cli.out_dir, &[("sweep.csv".to_string(), table.to_csv())])?;
            for (i, order) in table.orders.iter().enumerate() {
                let name = &loaded.scenario.checks[i];
                match order {
                    Some(p) => println!("checks[{i}] {:<20} fitted order {p:.3}", name.name()),
                    None => println!("checks[{i}] {:<20} fitted order n/a (zero defect)", name.name()),
                }
            }
            Ok(table.exit_code as u8)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
