use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trailer_sim::config::{IkConfig, ScenarioConfig};
use trailer_sim::{plot_log, run_ik, run_scenario, run_suite, summary_table, write_ik, SimError};

#[derive(Parser)]
#[command(name = "trailer-park", version, about = "Reverse-parking planner for a tractor with a single-axle trailer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the one in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Skip the SVG charts.
    #[arg(long, global = true)]
    no_plots: bool,
    /// Cap every closed-loop stage at this many control periods.
    #[arg(long, global = true)]
    max_steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one parking scenario.
    Park { config: PathBuf },
    /// Track a virtual steer profile through the inverse kinematics.
    ValidateIk { config: PathBuf },
    /// Run every scenario in a directory and write a summary table.
    Suite { dir: PathBuf },
    /// Redraw the charts of an existing trajectory.csv.
    Plot { log: PathBuf },
}

fn park(cli: &Cli, path: &Path) -> Result<(), SimError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(n) = cli.max_steps {
        cfg.set_max_steps(n);
    }
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).expect("output dir resolved on load");
    let run = run_scenario(&cfg);
    run.write(&dir, !cli.no_plots)?;
    if !cli.quiet {
        for m in &run.outcome.stages {
            println!(
                "stage {} {:?}: distance {:.4} m, orientation {:.4} deg, hitch {:.4} deg, {} steps",
                m.stage,
                m.kind,
                m.distance_error,
                m.orientation_error.to_degrees(),
                m.final_hitch.to_degrees(),
                m.steps
            );
        }
        println!("wrote {}", dir.display());
    }
    match (&run.outcome.error, run.outcome.success) {
        (None, true) => Ok(()),
        (Some(e), _) => Err(SimError::Scenario { name: cfg.name, reason: e.to_string() }),
        (None, false) => {
            Err(SimError::Scenario { name: cfg.name, reason: "final pose outside acceptance thresholds".into() })
        }
    }
}

fn validate_ik(cli: &Cli, path: &Path) -> Result<(), SimError> {
    let cfg = IkConfig::load(path)?;
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).expect("output dir resolved on load");
    let report = run_ik(&cfg)?;
    let summary = write_ik(&cfg, &report, &dir)?;
    if !cli.quiet {
        println!(
            "max tracking error {:e} rad over {} samples (tolerance {:e})",
            summary.max_error_rad, summary.samples, summary.tolerance_rad
        );
    }
    if summary.passed {
        Ok(())
    } else {
        Err(SimError::Scenario { name: cfg.name, reason: format!("tracking error {:e} rad", summary.max_error_rad) })
    }
}

fn suite(cli: &Cli, dir: &Path) -> Result<(), SimError> {
    let runs = run_suite(dir, cli.max_steps)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out/suite"));
    for run in &runs {
        run.write(&out.join(&run.config.name), !cli.no_plots)?;
    }
    let table = summary_table(&runs);
    let path = out.join("summary.md");
    std::fs::write(&path, &table).map_err(|e| SimError::io(&path, e))?;
    if !cli.quiet {
        print!("{table}");
    }
    let failed: Vec<&str> = runs.iter().filter(|r| !r.outcome.success).map(|r| r.config.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(SimError::Scenario {
            name: failed.join(","),
            reason: "did not park within the acceptance thresholds".into(),
        })
    }
}

fn plot(cli: &Cli, log: &Path) -> Result<(), SimError> {
    let out = cli.out.clone().unwrap_or_else(|| log.parent().map_or_else(PathBuf::new, Path::to_path_buf));
    plot_log(log, &out)?;
    if !cli.quiet {
        println!("wrote charts to {}", out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Park { config } => park(&cli, config),
        Command::ValidateIk { config } => validate_ik(&cli, config),
        Command::Suite { dir } => suite(&cli, dir),
        Command::Plot { log } => plot(&cli, log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
