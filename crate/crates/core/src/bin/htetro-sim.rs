use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use htetro::audit::{self, AuditOptions, AuditSample, Failure};
use htetro::compare::{compare_pinv, ResidualHistogram};
use htetro::config::{self, ConfigError, RunConfig};
use htetro::controller::Mode;
use htetro::geometry::{build_morphology, Shape};
use htetro::plot;
use htetro::simulator::{run_waypoints, RunSummary, SimConfig, TrajectoryLog, Waypoint};

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(name = "htetro-sim", version, about = "Simulate and audit the four-module tetromino robot controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the waypoint course and write trajectories, summaries and plots.
    Simulate(SimulateArgs),
    /// Randomized invariant audit.
    Audit(AuditArgs),
    /// Compare the full controller with independent pseudo-inverse steering.
    ComparePinv(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Shape letter (I, L, Z, O, T, S, J) or `all`. Overrides the config.
    #[arg(long)]
    shape: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV waypoint file with columns x,y[,theta]. Overrides the config.
    #[arg(long)]
    waypoints: Option<PathBuf>,
    #[arg(long, env = "HTETRO_OUT_DIR", default_value = "htetro-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    /// Shape letter or `all`.
    #[arg(long, default_value = "all")]
    shape: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    iterations: u64,
    /// Steering offset (rad) added to module 1 before the concurrency check.
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    /// Re-run a failing sample written by a previous audit.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long, env = "HTETRO_OUT_DIR", default_value = "htetro-out")]
    out_dir: PathBuf,
}

struct Setup {
    shapes: Vec<Shape>,
    waypoints: Vec<Waypoint>,
    cfg: RunConfig,
    sim: SimConfig,
}

fn setup(args: &SimulateArgs) -> Result<Setup, ConfigError> {
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let shapes = match &args.shape {
        Some(s) => config::parse_shapes(s)?,
        None => cfg.shapes()?,
    };
    let waypoints = match &args.waypoints {
        Some(path) => config::load_waypoints_csv(path)?,
        None => cfg.waypoints(),
    };
    let sim = cfg.sim_config();
    Ok(Setup {
        shapes,
        waypoints,
        cfg,
        sim,
    })
}

fn io_error(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Writes every output of one run into `dir`, via a temporary sibling
/// directory renamed into place.
fn write_run(dir: &Path, log: &TrajectoryLog, summary: &RunSummary) -> Result<(), String> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = parent.join(format!(".{name}.tmp"));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(io_error)?;
    }
    std::fs::create_dir_all(&tmp).map_err(io_error)?;
    log.write_csv(&tmp.join("trajectory.csv")).map_err(io_error)?;
    log.write_steering_csv(&tmp.join("steering.csv")).map_err(io_error)?;
    log.write_saturation_csv(&tmp.join("saturation_events.csv")).map_err(io_error)?;
    let json = serde_json::to_string_pretty(summary).map_err(io_error)?;
    std::fs::write(tmp.join("summary.json"), json).map_err(io_error)?;
    for (file, chart) in [
        ("path.svg", plot::xy_path(log)),
        ("steering.svg", plot::steering_traces(log)),
        ("residual.svg", plot::residual_trace(log)),
    ] {
        std::fs::write(tmp.join(file), chart.to_svg()).map_err(io_error)?;
    }
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(io_error)?;
    }
    std::fs::rename(&tmp, dir).map_err(io_error)
}

fn simulate(args: SimulateArgs) -> ExitCode {
    let s = match setup(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let params = s.cfg.params();
    let logs: Vec<TrajectoryLog> = std::thread::scope(|scope| {
        let handles: Vec<_> = s
            .shapes
            .iter()
            .map(|&shape| {
                let (waypoints, sim) = (&s.waypoints, &s.sim);
                scope.spawn(move || run_waypoints(&build_morphology(shape, params), waypoints, sim))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread")).collect()
    });

    let phi_max = s.sim.controller.limits.phi_max;
    let (mut invariant_failed, mut timed_out) = (false, false);
    println!("shape  arrived  time_s  rmse_xt_m  max_residual  max_phi  saturated");
    for log in &logs {
        let summary = log.summary();
        let dir = args.out_dir.join(log.shape.to_string());
        if let Err(e) = write_run(&dir, log, &summary) {
            eprintln!("error: cannot write {}: {e}", dir.display());
            return ExitCode::from(EXIT_CONFIG);
        }
        println!(
            "{:<6} {:>3}/{:<3} {:>7.2} {:>10.4} {:>13.3e} {:>8.3} {:>10}",
            summary.shape,
            summary.arrivals.len(),
            summary.waypoints,
            summary.duration,
            summary.rmse_cross_track,
            summary.max_residual,
            summary.max_wheel_rate,
            summary.saturation_count
        );
        let concurrency_ok = s.sim.mode != Mode::Full || summary.max_residual < audit::TRANSIENT_TOL;
        if !concurrency_ok || summary.max_wheel_rate > phi_max + 1e-12 {
            invariant_failed = true;
        }
        timed_out |= !summary.completed;
    }
    println!("outputs in {}", args.out_dir.display());
    if invariant_failed {
        eprintln!("invariant violated");
        ExitCode::from(EXIT_INVARIANT)
    } else if timed_out {
        eprintln!("timeout before reaching every waypoint");
        ExitCode::from(EXIT_TIMEOUT)
    } else {
        ExitCode::SUCCESS
    }
}

fn print_failures(failures: &[Failure]) {
    for f in failures.iter().take(10) {
        println!(
            "  FAIL {:?} shape {} iteration {}: {:.3e} (tolerance {:.0e})",
            f.check, f.sample.shape, f.sample.iteration, f.value, f.tolerance
        );
    }
    if failures.len() > 10 {
        println!("  ... {} more", failures.len() - 10);
    }
}

fn run_audit(args: AuditArgs) -> ExitCode {
    let opts = AuditOptions {
        seed: args.seed,
        iterations: args.iterations,
        perturb: args.perturb,
        ..AuditOptions::default()
    };

    if let Some(path) = &args.replay {
        let sample: AuditSample = match std::fs::read_to_string(path)
            .map_err(io_error)
            .and_then(|t| serde_json::from_str(&t).map_err(io_error))
        {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: cannot read replay file {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        };
        let failures = audit::replay(&sample, &opts);
        if failures.is_empty() {
            println!("replay of {} iteration {}: pass", sample.shape, sample.iteration);
            return ExitCode::SUCCESS;
        }
        print_failures(&failures);
        return ExitCode::from(EXIT_INVARIANT);
    }

    let shapes = match config::parse_shapes(&args.shape) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let reports: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = shapes
            .iter()
            .map(|&shape| scope.spawn(move || audit::audit_shape(shape, &opts)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("audit thread")).collect()
    });

    println!("shape  round_trip  converged   placement   cot_rel     transient   failures");
    let mut failures = Vec::new();
    for r in &reports {
        let cot = r
            .max_cot_residual
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"));
        println!(
            "{:<6} {:<11.3e} {:<11.3e} {:<11.3e} {:<11} {:<11.3e} {}",
            r.shape.to_string(),
            r.max_round_trip,
            r.max_converged_residual,
            r.placement_residual,
            cot,
            r.max_transient_residual,
            r.failures.len()
        );
        failures.extend(r.failures.iter().cloned());
    }
    if failures.is_empty() {
        println!("audit passed ({} iterations per shape, seed {})", args.iterations, args.seed);
        return ExitCode::SUCCESS;
    }
    print_failures(&failures);
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        eprintln!("error: cannot create {}: {e}", args.out_dir.display());
        return ExitCode::from(EXIT_INVARIANT);
    }
    let path = args.out_dir.join("audit_failure.json");
    match serde_json::to_string_pretty(&failures[0].sample) {
        Ok(json) => match std::fs::write(&path, json) {
            Ok(()) => println!("first failing sample written to {} (replay with --replay)", path.display()),
            Err(e) => eprintln!("error: cannot write {}: {e}", path.display()),
        },
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(EXIT_INVARIANT)
}

fn histogram_line(h: &ResidualHistogram) -> String {
    h.decades
        .iter()
        .zip(&h.counts)
        .filter(|(_, c)| **c > 0)
        .map(|(d, c)| format!("<=1e{d}:{c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_compare(args: SimulateArgs) -> ExitCode {
    let s = match setup(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let params = s.cfg.params();
    let mut reports = Vec::new();
    for &shape in &s.shapes {
        let c = compare_pinv(&build_morphology(shape, params), &s.waypoints, &s.sim);
        println!("shape {shape}");
        for (name, summary, hist) in [
            ("full", &c.full, &c.full_histogram),
            ("pinv", &c.pinv, &c.pinv_histogram),
        ] {
            println!(
                "  {name}: arrived {}/{} max residual {:.3e} rmse {:.4} m",
                summary.arrivals.len(),
                summary.waypoints,
                hist.max,
                summary.rmse_cross_track
            );
            println!("    histogram {}", histogram_line(hist));
        }
        reports.push(c);
    }
    let write = std::fs::create_dir_all(&args.out_dir).map_err(io_error).and_then(|()| {
        let json = serde_json::to_string_pretty(&reports).map_err(io_error)?;
        std::fs::write(args.out_dir.join("comparison.json"), json).map_err(io_error)
    });
    if let Err(e) = write {
        eprintln!("error: cannot write comparison: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Audit(args) => run_audit(args),
        Command::ComparePinv(args) => run_compare(args),
    }
}
