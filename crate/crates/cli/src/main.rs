//! `elastica`: runs, projections, spectra, diagnostics and test curves.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 violated
//! precondition or dimension mismatch, 4 numerical failure.

mod manifest;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use elastica::curves;
use elastica::diagnostics::DiagnoseReport;
use elastica::flow::{run_flow, FlowTrace, RunConfig};
use elastica::reparam::{graph_distance, normal_graph_project};
use elastica::variation::{assemble_operator, spectrum};
use elastica::{DiscreteCurve, Error, Result};

use manifest::{absolute, RunManifest};

const SNAPSHOT_DIR: &str = "snapshots";
const SNAPSHOT_INDEX: &str = "index.csv";

#[derive(Parser, Debug)]
#[command(name = "elastica", version, about = "Clamped elastic flow of open curves")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for runs over several configs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the flow from CURVE once per CONFIG. With several configs
    /// each run writes into `<out>/<config stem>`.
    Run {
        curve: PathBuf,
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Write CURVE as a normal graph over BASE.
    Project { base: PathBuf, curve: PathBuf },
    /// Smallest eigenvalues of the second variation at BASE.
    Spectrum {
        base: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Łojasiewicz exponent and decay rate of a run trace.
    Diagnose {
        trace: PathBuf,
        /// Snapshot index of the run; defaults to the one next to the trace.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Generate a test curve CSV.
    Make {
        #[arg(value_enum)]
        name: CurveKind,
        /// Number of edges.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Arc angle in radians.
        #[arg(long, default_value_t = PI / 2.0)]
        angle: f64,
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.5)]
        pitch: f64,
        #[arg(long, default_value_t = 1.0)]
        turns: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CurveKind {
    Segment,
    CircleArc,
    PerturbedSegment,
    Helix,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Io(_) => 2,
        Error::Regularity(_)
        | Error::Stencil(_)
        | Error::DimensionMismatch(_)
        | Error::Normality(_)
        | Error::Boundary(_)
        | Error::Precondition(_)
        | Error::Floor(_)
        | Error::InsufficientData(_) => 3,
        Error::Convergence(_) | Error::MaxSteps(_) | Error::FrameDegeneracy(_) | Error::Projection(_) => 4,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn run_one(curve_path: &Path, config_path: &Path, out: &Path) -> Result<String> {
    let started = Instant::now();
    let cfg = RunConfig::read(config_path)?;
    let curve = DiscreteCurve::read_csv(curve_path)?;
    let bc = cfg.boundary_for(&curve)?;
    let trace = run_flow(&curve, &bc, &cfg.flow)?;

    create_dir(&out.join(SNAPSHOT_DIR))?;
    let mut outputs = vec!["trace.csv".to_string()];
    trace.write_csv(&out.join("trace.csv"))?;
    let mut index = String::from("sample,time,file\n");
    for (k, snap) in trace.snapshots.iter().enumerate() {
        let name = format!("{SNAPSHOT_DIR}/snapshot_{k:05}.csv");
        snap.curve.write_csv(&out.join(&name))?;
        index.push_str(&format!("{},{},{}\n", snap.sample, elastica::geometry::format_sig17(snap.time), name));
        outputs.push(name);
    }
    let index_name = format!("{SNAPSHOT_DIR}/{SNAPSHOT_INDEX}");
    write_text(&out.join(&index_name), &index)?;
    outputs.push(index_name);
    if let Some(last) = trace.final_curve() {
        last.write_csv(&out.join("final.csv"))?;
        outputs.push("final.csv".into());
    }

    let termination = trace.termination.map(|t| t.to_string()).unwrap_or_default();
    let f = &cfg.flow;
    let mut m = RunManifest::new(
        "run",
        out,
        json!({
            "lambda": f.lambda, "dt": f.dt, "t_end": f.t_end, "reparam_every": f.reparam_every,
            "graph_mode": f.graph_mode, "dt_shrink": f.dt_shrink, "tol_stationary": f.tol_stationary,
            "snapshot_every": f.snapshot_every, "max_steps": f.max_steps, "seed": cfg.seed,
            "samples": trace.len(),
        }),
    );
    m.config = Some(absolute(config_path));
    m.input(curve_path);
    m.outputs = outputs;
    m.termination = Some(termination.clone());
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write()?;
    Ok(termination)
}

/// Output directory of each config; sweeps get one subdirectory per config.
fn run_dirs(out: &Path, configs: &[PathBuf]) -> Vec<PathBuf> {
    if configs.len() == 1 {
        return vec![out.to_path_buf()];
    }
    let mut dirs: Vec<PathBuf> = Vec::new();
    for (k, c) in configs.iter().enumerate() {
        let stem = c.file_stem().map_or_else(|| format!("run{k}"), |s| s.to_string_lossy().into_owned());
        let mut dir = out.join(&stem);
        if dirs.contains(&dir) {
            dir = out.join(format!("{stem}_{k}"));
        }
        dirs.push(dir);
    }
    dirs
}

fn cmd_run(curve: &Path, configs: &[PathBuf], out: &Path, jobs: usize) -> std::result::Result<(), u8> {
    let dirs = run_dirs(out, configs);
    let results: Vec<Mutex<Option<Result<String>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, configs.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= configs.len() {
                    break;
                }
                let r = run_one(curve, &configs[k], &dirs[k]);
                *results[k].lock().unwrap() = Some(r);
            });
        }
    });
    let mut code = None;
    for ((config, dir), r) in configs.iter().zip(&dirs).zip(results) {
        match r.into_inner().unwrap().expect("every config was run") {
            Ok(t) => log::info!("{}: {t}, output in {}", config.display(), dir.display()),
            Err(e) => {
                eprintln!("elastica: {}: {e}", config.display());
                code.get_or_insert(exit_code(&e));
            }
        }
    }
    code.map_or(Ok(()), Err)
}

fn cmd_project(base_path: &Path, curve_path: &Path, out: &Path) -> Result<()> {
    let started = Instant::now();
    let base = DiscreteCurve::read_csv(base_path)?;
    let curve = DiscreteCurve::read_csv(curve_path)?;
    let proj = normal_graph_project(&base, &curve)?;
    create_dir(out)?;
    proj.write(&out.join("phi.csv"))?;
    let mut m = RunManifest::new("project", out, json!({ "residual": proj.residual, "iterations": proj.iterations }));
    m.input(base_path);
    m.input(curve_path);
    m.outputs = vec!["phi.csv".into(), "phi.json".into()];
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write()
}

fn cmd_spectrum(base_path: &Path, lambda: f64, count: usize, out: &Path) -> Result<()> {
    let started = Instant::now();
    let base = DiscreteCurve::read_csv(base_path)?;
    let op = assemble_operator(&base, lambda)?;
    let found = spectrum(&op, count)?;
    found.write(out)?;
    log::info!("smallest eigenvalues {:?}", found.eigenvalues);
    let mut m = RunManifest::new("spectrum", out, json!({ "lambda": lambda, "count": count }));
    m.input(base_path);
    m.outputs = std::iter::once("spectrum.json".to_string())
        .chain((0..found.eigenfields.len()).map(|k| format!("eigenfield_{k}.csv")))
        .collect();
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write()
}

/// `(sample, time, file)` rows of a snapshot index; files are resolved
/// against the index's run directory.
fn read_index(path: &Path) -> Result<Vec<(usize, f64, PathBuf)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let root = path.parent().and_then(Path::parent).unwrap_or(Path::new("."));
    let bad = |line: &str| Error::Parse(format!("{}: bad index row {line:?}", path.display()));
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let [sample, time, file] = cells[..] else { return Err(bad(line)) };
        rows.push((sample.parse().map_err(|_| bad(line))?, time.parse().map_err(|_| bad(line))?, root.join(file)));
    }
    Ok(rows)
}

/// Graph distance of every snapshot to the last one, skipping snapshots too
/// far away for the normal planes of the last one to reach.
fn distances_to_final(rows: &[(usize, f64, PathBuf)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some((_, _, last)) = rows.last() else { return Ok((Vec::new(), Vec::new())) };
    let last = DiscreteCurve::read_csv(last)?;
    let (mut times, mut dists) = (Vec::new(), Vec::new());
    for (_, t, file) in &rows[..rows.len() - 1] {
        match graph_distance(&last, &DiscreteCurve::read_csv(file)?) {
            Ok(d) => {
                times.push(*t);
                dists.push(d);
            }
            Err(Error::Projection(e)) => log::warn!("{} skipped: {e}", file.display()),
            Err(e) => return Err(e),
        }
    }
    Ok((times, dists))
}

fn cmd_diagnose(trace_path: &Path, snapshots: Option<&Path>, out: &Path) -> Result<()> {
    let started = Instant::now();
    let trace = FlowTrace::read_csv(trace_path)?;
    let default_index = trace_path.parent().unwrap_or(Path::new(".")).join(SNAPSHOT_DIR).join(SNAPSHOT_INDEX);
    let index = match snapshots {
        Some(p) => Some(p.to_path_buf()),
        None => default_index.exists().then_some(default_index),
    };
    let rows = index.as_deref().map(read_index).transpose()?.unwrap_or_default();
    let (times, dists) = distances_to_final(&rows)?;
    let have_rate = dists.len() >= elastica::diagnostics::MIN_SAMPLES;
    let report = DiagnoseReport::build(absolute(trace_path), &trace, have_rate.then_some((&times[..], &dists[..])))?;
    create_dir(out)?;
    let text = report.to_json() + "\n";
    write_text(&out.join("diagnostics.json"), &text)?;
    print!("{text}");
    let mut m = RunManifest::new("diagnose", out, json!({ "snapshots_used": dists.len() }));
    m.input(trace_path);
    if let Some(i) = &index {
        m.input(i);
    }
    m.outputs = vec!["diagnostics.json".into()];
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write()
}

#[allow(clippy::too_many_arguments)]
fn cmd_make(
    kind: CurveKind,
    n: usize,
    dim: usize,
    radius: f64,
    angle: f64,
    amplitude: f64,
    pitch: f64,
    turns: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let started = Instant::now();
    let curve = match kind {
        CurveKind::Segment => curves::segment(n, dim),
        CurveKind::CircleArc => curves::circle_arc(n, dim, radius, angle),
        CurveKind::PerturbedSegment => curves::perturbed_segment(n, dim, amplitude, seed),
        CurveKind::Helix => curves::helix(n, dim, radius, pitch, turns),
    }?;
    create_dir(out)?;
    curve.write_csv(&out.join("curve.csv"))?;
    let name = kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let params = match kind {
        CurveKind::Segment => json!({ "name": name, "n": n, "dim": dim }),
        CurveKind::CircleArc => json!({ "name": name, "n": n, "dim": dim, "radius": radius, "angle": angle }),
        CurveKind::PerturbedSegment => json!({ "name": name, "n": n, "dim": dim, "amplitude": amplitude, "seed": seed }),
        CurveKind::Helix => json!({ "name": name, "n": n, "dim": dim, "radius": radius, "pitch": pitch, "turns": turns }),
    };
    let mut m = RunManifest::new("make", out, params);
    m.outputs = vec!["curve.csv".into()];
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ELASTICA_LOG", "error")).init();
    let cli = Cli::parse();
    let out = cli.out.as_path();
    let result = match &cli.command {
        Command::Run { curve, configs } => return cmd_run(curve, configs, out, cli.jobs).map_or_else(ExitCode::from, |_| ExitCode::SUCCESS),
        Command::Project { base, curve } => cmd_project(base, curve, out),
        Command::Spectrum { base, lambda, count } => cmd_spectrum(base, *lambda, *count, out),
        Command::Diagnose { trace, snapshots } => cmd_diagnose(trace, snapshots.as_deref(), out),
        Command::Make { name, n, dim, radius, angle, amplitude, pitch, turns, seed } => {
            cmd_make(*name, *n, *dim, *radius, *angle, *amplitude, *pitch, *turns, *seed, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("elastica: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Parse("x".into())), 2);
        assert_eq!(exit_code(&Error::DimensionMismatch("x".into())), 3);
        assert_eq!(exit_code(&Error::Precondition("x".into())), 3);
        assert_eq!(exit_code(&Error::MaxSteps("x".into())), 4);
        assert_eq!(exit_code(&Error::Convergence("x".into())), 4);
    }

    #[test]
    fn sweep_directories_are_distinct() {
        let one = run_dirs(Path::new("o"), &[PathBuf::from("a.cfg")]);
        assert_eq!(one, vec![PathBuf::from("o")]);
        let cfgs = [PathBuf::from("x/a.cfg"), PathBuf::from("y/a.cfg"), PathBuf::from("b.cfg")];
        assert_eq!(run_dirs(Path::new("o"), &cfgs), vec![PathBuf::from("o/a"), PathBuf::from("o/a_1"), PathBuf::from("o/b")]);
    }

    #[test]
    fn snapshot_index_resolves_against_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let snaps = dir.path().join(SNAPSHOT_DIR);
        std::fs::create_dir_all(&snaps).unwrap();
        let index = snaps.join(SNAPSHOT_INDEX);
        std::fs::write(&index, "sample,time,file\n0,0,snapshots/a.csv\n20,0.5,snapshots/b.csv\n").unwrap();
        let rows = read_index(&index).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].0, 20);
        assert_eq!(rows[1].1, 0.5);
        assert_eq!(rows[1].2, dir.path().join("snapshots/b.csv"));
        std::fs::write(&index, "sample,time,file\n0,zero,a.csv\n").unwrap();
        assert!(matches!(read_index(&index), Err(Error::Parse(_))));
    }
}
