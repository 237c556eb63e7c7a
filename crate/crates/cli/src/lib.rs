//! `cida` command line: closed-loop runs, paired comparisons, the scenario
//! sample bound, and guidance-field exports, all driven by an optional TOML
//! config whose defaults reproduce the built-in benchmark.

pub mod config;
pub mod output;
pub mod svg;

use anyhow::{ensure, Context, Result};
use cida_core::{
    compare_controllers, hoeffding_min_samples, run_closed_loop, safe_heading,
    vector_field_heading, ControllerKind, PolicyError,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::ConfigFile;
use output::FieldRow;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "cida", version, about = "Chance-constrained control search workbench")]
pub struct Cli {
    /// TOML configuration file; omitted sections fall back to the built-in
    /// benchmark values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the minimum scenarios per candidate for the given risk levels.
    Bound(BoundArgs),
    /// Run one closed-loop simulation and write its outputs.
    Simulate(SimulateArgs),
    /// Run both controllers on paired noise over several seeds.
    Compare(CompareArgs),
    /// Export the guidance and safety-filtered headings on a grid.
    Field(FieldArgs),
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Tolerated per-step violation probability.
    #[arg(long, default_value_t = 0.15)]
    pub epsilon: f64,
    /// Stricter empirical threshold enforced by the Monte Carlo check.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Confidence parameter of the certification.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ControllerArg {
    /// Safety-filtered heading tracking at the particle mean.
    Ce,
    /// Randomized control-sequence search with Monte Carlo certification.
    Cida,
}

impl ControllerArg {
    fn kind(self) -> ControllerKind {
        match self {
            ControllerArg::Ce => ControllerKind::CertaintyEquivalence,
            ControllerArg::Cida => ControllerKind::Cida,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ControllerArg::Cida)]
    pub controller: ControllerArg,
    /// Override the configured step count.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output directory for trajectory.csv and metrics.json.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write every per-step particle cloud to particles.csv.
    #[arg(long)]
    pub dump_particles: bool,
    /// Also render trajectory.svg.
    #[arg(long)]
    pub svg: bool,
    /// Worker threads; the trajectory never depends on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Seeds to run, each under both controllers with shared noise.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = ControllerArg::Ce)]
    pub baseline: ControllerArg,
    #[arg(long, value_enum, default_value_t = ControllerArg::Cida)]
    pub candidate: ControllerArg,
    /// Output directory for compare.json.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; results never depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Output directory for field.csv.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also render field.svg.
    #[arg(long)]
    pub svg: bool,
}

pub fn run() -> Result<()> {
    dispatch(Cli::parse())
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Bound(args) => cmd_bound(&args),
        Command::Simulate(args) => cmd_simulate(&file, &args),
        Command::Compare(args) => cmd_compare(&file, &args),
        Command::Field(args) => cmd_field(&file, &args),
    }
}

fn cmd_bound(args: &BoundArgs) -> Result<()> {
    let m = hoeffding_min_samples(args.epsilon, args.alpha, args.delta)?;
    println!("{m}");
    Ok(())
}

fn cmd_simulate(file: &ConfigFile, args: &SimulateArgs) -> Result<()> {
    let mut cfg = file.build(args.seed, args.controller.kind())?;
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    cfg.threads = args.threads;
    cfg.record_particles = args.dump_particles;
    cfg.validate().context("invalid configuration")?;

    let metrics = run_closed_loop(&cfg)?;

    let mut written = Vec::new();
    let traj_path = args.out.join("trajectory.csv");
    output::write_file(&traj_path, &output::trajectory_csv(&metrics)?)?;
    written.push(traj_path);
    let metrics_path = args.out.join("metrics.json");
    output::write_file(&metrics_path, &output::metrics_json(&metrics)?)?;
    written.push(metrics_path);
    if args.dump_particles {
        let path = args.out.join("particles.csv");
        output::write_file(&path, &output::particles_csv(&metrics.particle_clouds)?)?;
        written.push(path);
    }
    if args.svg {
        let path = args.out.join("trajectory.svg");
        output::write_file(&path, &svg::trajectory_svg(&metrics, &cfg.safe_set, cfg.field.radius))?;
        written.push(path);
    }

    println!("controller: {}", metrics.controller);
    println!("seed: {}  steps: {}  particles: {}", cfg.seed, metrics.steps, cfg.particles);
    println!(
        "violations: {}/{} ({:.2}%)",
        metrics.violation_count,
        metrics.steps,
        100.0 * metrics.violation_rate()
    );
    println!("total cost: {:.3}", metrics.total_cost);
    println!("mean step time: {:.2} ms", 1e3 * metrics.mean_step_seconds);
    if !metrics.degenerate_weight_steps.is_empty() {
        println!("degenerate weight steps: {}", metrics.degenerate_weight_steps.len());
    }
    for path in &written {
        println!("wrote: {}", path.display());
    }
    Ok(())
}

fn cmd_compare(file: &ConfigFile, args: &CompareArgs) -> Result<()> {
    let mut base = file.build(0, args.candidate.kind())?;
    base.threads = args.threads;
    base.validate().context("invalid configuration")?;
    let outcome =
        compare_controllers(&base, &args.seeds, args.baseline.kind(), args.candidate.kind())?;
    let report = &outcome.report;

    let path = args.out.join("compare.json");
    output::write_file(&path, &output::compare_json(report)?)?;

    println!(
        "baseline {} vs candidate {} over {} seeds",
        report.baseline_controller,
        report.candidate_controller,
        report.pairs.len()
    );
    for p in &report.pairs {
        println!(
            "seed {}: baseline {} ({:.2}%), candidate {} ({:.2}%), safety factor {:.2}{}",
            p.seed,
            p.baseline.violation_count,
            100.0 * p.baseline.violation_rate,
            p.candidate.violation_count,
            100.0 * p.candidate.violation_rate,
            p.safety_factor,
            if p.noise_streams_identical { "" } else { " [noise pairing broken]" }
        );
    }
    println!(
        "median violation rate: baseline {:.2}%, candidate {:.2}%",
        100.0 * report.median_baseline_rate,
        100.0 * report.median_candidate_rate
    );
    println!("median safety factor: {:.2}", report.median_safety_factor);
    println!("wrote: {}", path.display());
    Ok(())
}

/// Evaluates the guidance field and its safety-filtered counterpart on the
/// configured grid.
pub fn field_rows(file: &ConfigFile) -> Result<Vec<FieldRow>> {
    let grid = &file.field;
    ensure!(grid.grid >= 2, "field grid needs at least 2 points per axis");
    ensure!(
        grid.x_max > grid.x_min && grid.y_max > grid.y_min,
        "field grid bounds must have positive extent"
    );
    let safe_set = file.safe_set()?;
    let orbit = file.orbit()?;
    let speed = file.model()?.params().speed;

    let coord = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (grid.grid - 1) as f64;
    let mut rows = Vec::with_capacity(grid.grid * grid.grid);
    for iy in 0..grid.grid {
        let y = coord(grid.y_min, grid.y_max, iy);
        for ix in 0..grid.grid {
            let x = coord(grid.x_min, grid.x_max, ix);
            let mut row =
                FieldRow { x, y, theta_d: f64::NAN, theta_star: f64::NAN, note: String::new() };
            match vector_field_heading(&orbit, [x, y]) {
                Err(PolicyError::OriginUndefined) => row.note = "origin".into(),
                Err(e) => row.note = e.to_string().replace(',', ";"),
                Ok(theta_d) => {
                    row.theta_d = theta_d;
                    if !safe_set.position_is_safe([x, y]) {
                        row.note = "inside_obstacle".into();
                    } else {
                        match safe_heading([x, y], &safe_set, &orbit, speed) {
                            Ok(theta_star) => row.theta_star = theta_star,
                            Err(e) => row.note = e.to_string().replace(',', ";"),
                        }
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn cmd_field(file: &ConfigFile, args: &FieldArgs) -> Result<()> {
    let rows = field_rows(file)?;
    let path = args.out.join("field.csv");
    output::write_file(&path, &output::field_csv(&rows))?;

    let defined = rows.iter().filter(|r| r.theta_star.is_finite()).count();
    let inside = rows.iter().filter(|r| r.note == "inside_obstacle").count();
    println!(
        "field: {} points, {} filtered headings, {} inside obstacles",
        rows.len(),
        defined,
        inside
    );
    println!("wrote: {}", path.display());
    if args.svg {
        let grid = &file.field;
        let cell = (grid.x_max - grid.x_min) / (grid.grid - 1) as f64;
        let svg_path = args.out.join("field.svg");
        let image = svg::field_svg(&rows, &file.safe_set()?, file.orbit()?.radius, 0.4 * cell);
        output::write_file(&svg_path, &image)?;
        println!("wrote: {}", svg_path.display());
    }
    Ok(())
}

/// Convenience used by tests: path inside an output directory.
pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn arguments_parse_with_defaults() {
        let cli = Cli::try_parse_from(["cida", "bound"]).unwrap();
        match cli.command {
            Command::Bound(args) => {
                assert_eq!(args.epsilon, 0.15);
                assert_eq!(args.alpha, 0.05);
                assert_eq!(args.delta, 0.05);
            }
            _ => panic!("expected bound"),
        }

        let cli = Cli::try_parse_from([
            "cida", "simulate", "--seed", "9", "--controller", "ce", "--steps", "3",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(args) => {
                assert_eq!(args.seed, 9);
                assert!(matches!(args.controller, ControllerArg::Ce));
                assert_eq!(args.steps, Some(3));
                assert_eq!(args.out, PathBuf::from("out"));
            }
            _ => panic!("expected simulate"),
        }

        let cli = Cli::try_parse_from(["cida", "compare", "--seeds", "4,5"]).unwrap();
        match cli.command {
            Command::Compare(args) => assert_eq!(args.seeds, vec![4, 5]),
            _ => panic!("expected compare"),
        }
    }

    #[test]
    fn field_rows_mark_origin_and_obstacles() {
        let mut file = ConfigFile::default();
        file.field.grid = 11;
        file.field.x_min = -15.0;
        file.field.x_max = 15.0;
        file.field.y_min = -15.0;
        file.field.y_max = 15.0;
        let rows = field_rows(&file).unwrap();
        assert_eq!(rows.len(), 121);
        let origin = rows.iter().find(|r| r.x == 0.0 && r.y == 0.0).unwrap();
        assert_eq!(origin.note, "origin");
        assert!(origin.theta_d.is_nan() && origin.theta_star.is_nan());
        let inside = rows.iter().filter(|r| r.note == "inside_obstacle").count();
        assert!(inside > 0, "the default obstacles intersect this grid");
        for r in rows.iter().filter(|r| r.note.is_empty()) {
            assert!(r.theta_d.is_finite() && r.theta_star.is_finite());
            assert!(!r.note.contains(','));
        }
    }

    #[test]
    fn field_rows_reject_degenerate_grids() {
        let mut file = ConfigFile::default();
        file.field.grid = 1;
        assert!(field_rows(&file).is_err());
        let mut file = ConfigFile::default();
        file.field.x_max = file.field.x_min;
        assert!(field_rows(&file).is_err());
    }
}
