use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use h2fatigue::config::{self, ExperimentConfig};
use h2fatigue::experiment::{self, CrackGrowthRecord, ExperimentResult};
use h2fatigue::output::{self, RunPaths};
use h2fatigue::{mesh, Error};

/// Environment variable capping the number of worker threads.
const THREADS_VAR: &str = "H2FCG_THREADS";

#[derive(Parser)]
#[command(
    name = "h2fatigue",
    version,
    about = "Virtual fatigue crack growth experiments on CT specimens"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        config: PathBuf,
        /// Output directory; overrides output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per combination of the axis values, e.g. `f=0.1,1,10`.
    Sweep {
        config: PathBuf,
        #[arg(required = true)]
        axes: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the Paris law and summarise plateaus of a record table.
    Postprocess {
        record: PathBuf,
        /// Fit only points with lo <= delta K <= hi [MPa·√m].
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        fit_window: Option<Vec<f64>>,
    },
    /// Write the specimen mesh as VTK.
    ExportMesh {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure mapped to an exit status.
enum Failure {
    Validation(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR}={value:?} must be a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => run(&config, out),
        Command::Sweep { config, axes, out } => sweep(&config, &axes, out),
        Command::Postprocess { record, fit_window } => postprocess(&record, fit_window.map(|w| (w[0], w[1]))),
        Command::ExportMesh { config, out } => export_mesh(&config, out),
    }
}

fn output_dir(config: &ExperimentConfig, out: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = out.unwrap_or_else(|| config.output.directory.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Validation(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn report(result: &ExperimentResult) {
    let rec = &result.record;
    let pts = rec.rate_points();
    println!(
        "{}: {} cycles, a = {:.4} mm, {} da/dN rows",
        rec.info.run_id,
        result.cycles,
        rec.final_length().unwrap_or(f64::NAN),
        pts.len()
    );
    match experiment::fit_paris(&pts, None) {
        Ok(fit) => println!(
            "  Paris fit: C = {:.6e}, m = {:.4} ({} points, r^2 = {:.4})",
            fit.c, fit.m, fit.points, fit.r_squared
        ),
        Err(e) => println!("  Paris fit unavailable: {e}"),
    }
    for w in &rec.warnings {
        println!("  warning: {w}");
    }
    if let Some(reason) = &rec.aborted {
        println!("  aborted: {reason}");
    }
}

fn run(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = config::parse_config(path)?;
    let dir = output_dir(&config, out)?;
    let paths = RunPaths::new(&dir, &config.output.run_id);
    config::write_echo(&config, &paths.config_echo)?;
    let result = experiment::run_experiment(&config, Some(&dir))?;
    output::save_records(&paths.record, std::slice::from_ref(&result.record))?;
    report(&result);
    println!("  record: {}", paths.record.display());
    match &result.record.aborted {
        Some(reason) => Err(Failure::Solver(format!(
            "run {} aborted: {reason}",
            config.output.run_id
        ))),
        None => Ok(()),
    }
}

fn sweep(path: &Path, axes: &[String], out: Option<PathBuf>) -> Result<(), Failure> {
    let base = config::parse_config(path)?;
    let axes = axes
        .iter()
        .map(|a| experiment::parse_axis(a))
        .collect::<h2fatigue::Result<Vec<_>>>()?;
    let configs = experiment::expand_sweep(&base, &axes)?;
    let dir = output_dir(&base, out)?;
    for c in &configs {
        config::write_echo(c, &RunPaths::new(&dir, &c.output.run_id).config_echo)?;
    }
    let results = experiment::run_sweep(&configs, Some(&dir));
    let mut records: Vec<CrackGrowthRecord> = Vec::new();
    let mut failed = Vec::new();
    for (c, r) in configs.iter().zip(results) {
        let result = r?;
        output::save_records(
            &RunPaths::new(&dir, &c.output.run_id).record,
            std::slice::from_ref(&result.record),
        )?;
        report(&result);
        if result.record.aborted.is_some() {
            failed.push(c.output.run_id.clone());
        }
        records.push(result.record);
    }
    let table = dir.join(format!("{}_sweep.csv", base.output.run_id));
    output::save_records(&table, &records)?;
    println!("aggregate table: {}", table.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Solver(format!("aborted runs: {}", failed.join(", "))))
    }
}

fn postprocess(path: &Path, window: Option<(f64, f64)>) -> Result<(), Failure> {
    if let Some((lo, hi)) = window {
        if !(lo > 0.0 && hi > lo) {
            return Err(Failure::Validation(format!(
                "fit window [{lo}, {hi}] must satisfy 0 < lo < hi"
            )));
        }
    }
    let records = output::load_records(path)?;
    if records.is_empty() {
        return Err(Failure::Validation(format!("{} holds no records", path.display())));
    }
    for rec in &records {
        let rec = if rec.rows.iter().any(|r| r.dadn.is_some()) {
            rec.clone()
        } else {
            experiment::extract_dadn(rec)
        };
        let pts = rec.rate_points();
        println!("{}: {} da/dN points", rec.info.run_id, pts.len());
        match experiment::fit_paris(&pts, window) {
            Ok(fit) => println!(
                "  Paris fit: C = {:.6e}, m = {:.4} ({} points, r^2 = {:.4})",
                fit.c, fit.m, fit.points, fit.r_squared
            ),
            Err(e) => println!("  Paris fit unavailable: {e}"),
        }
        if let Some(p) = experiment::plateau(&rec, f64::NEG_INFINITY) {
            println!(
                "  plateau: median da/dN = {:.6e} (min {:.6e}, max {:.6e}) at mean delta K = {:.4}",
                p.median_dadn, p.min_dadn, p.max_dadn, p.mean_delta_k
            );
        }
        if let Some(reason) = &rec.aborted {
            println!("  flagged as aborted: {reason}");
        }
    }
    Ok(())
}

fn export_mesh(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = config::parse_config(path)?;
    let parts = config.parts()?;
    let mesh = mesh::generate_ct_half_mesh(&parts.geometry, parts.material.ell)?;
    let target = match out {
        Some(p) => p,
        None => output_dir(&config, None)?.join(format!("{}_mesh.vtk", config.output.run_id)),
    };
    let file = std::fs::File::create(&target)
        .map_err(|e| Failure::Validation(format!("cannot create {}: {e}", target.display())))?;
    output::write_mesh_vtk(std::io::BufWriter::new(file), &mesh)?;
    println!(
        "{} elements, {} nodes written to {}",
        mesh.n_elements(),
        mesh.n_nodes(),
        target.display()
    );
    Ok(())
}
