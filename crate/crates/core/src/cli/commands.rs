use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;

use super::config::{sweep_grid, RunConfig, Source};
use super::target::select_targets;
use super::{EXIT_ABORTED, EXIT_ERROR, EXIT_OK, EXIT_THRESHOLD};
use crate::dae::PencilProvider;
use crate::error::{Error, Result};
use crate::spectrum::{damping_ratio, full_spectrum, write_spectrum_csv, ReferenceTrajectory};
use crate::tracker::{
    init_from_eigenpair, residual, track, StepFlags, TrackerConfig, Trajectory, TrajectoryRecord,
};

pub const DEFAULT_MAX_REL_ERR: f64 = 1e-6;
pub const DEFAULT_MAX_DZETA: f64 = 1e-4;

fn report(result: Result<i32>) -> i32 {
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

/// Output path for target `index`: the configured path itself for a single
/// target, `<stem>_<index>.<ext>` otherwise.
pub fn target_path(out: &Path, index: usize, many: bool) -> PathBuf {
    if !many {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{index}"),
    };
    out.with_file_name(name)
}

fn output_paths(cfg: &RunConfig, targets: &[usize]) -> Result<Vec<Option<PathBuf>>> {
    let many = targets.len() > 1;
    match &cfg.out {
        Some(out) => Ok(targets.iter().map(|&k| Some(target_path(out, k, many))).collect()),
        None if many => Err(Error::InvalidConfig("several targets need --out for per-target files".into())),
        None => Ok(vec![None]),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn write_trajectory(traj: &Trajectory, path: Option<&Path>, vectors: bool) -> Result<()> {
    match path {
        Some(path) if is_json(path) => Ok(std::fs::write(path, traj.to_json(vectors)?)?),
        Some(path) => traj.write_csv(BufWriter::new(File::create(path)?)),
        None => traj.write_csv(io::stdout().lock()),
    }
}

fn describe(traj: &Trajectory) -> String {
    match traj.last() {
        Some(r) => format!(
            "{} steps, final p = {} s = {:.10} {:+.10}i, {} flagged",
            traj.accepted_steps(),
            r.p,
            r.s.re,
            r.s.im,
            traj.flagged().count()
        ),
        None => "no steps".into(),
    }
}

/// Runs one tracker per selected eigenvalue, concurrently, and writes one
/// trajectory per target.
pub fn cmd_track(cfg: &RunConfig) -> i32 {
    report(run_track(cfg))
}

fn run_track(cfg: &RunConfig) -> Result<i32> {
    let source = cfg.source()?;
    let tcfg = cfg.tracker_config(&source)?;
    let selector = cfg.target()?;
    let prov = source.provider();
    let pencil = prov.pencil(tcfg.p_init)?;
    let pairs = full_spectrum(prov.as_ref(), tcfg.p_init, false, true)?;
    let targets = select_targets(&selector, &pairs)?;
    let paths = output_paths(cfg, &targets)?;
    let mut inits = Vec::with_capacity(targets.len());
    for &k in &targets {
        let one = Complex64::new(1.0, 0.0);
        inits.push(init_from_eigenpair(&pencil.e, &pencil.a, tcfg.p_init, pairs[k].s, &pairs[k].right, one)?);
    }
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = inits
            .into_iter()
            .map(|init| {
                let provider = source.provider();
                let tcfg = &tcfg;
                scope.spawn(move || track(provider.as_ref(), init, tcfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("tracker thread panicked")).collect()
    });
    let vectors = cfg.vectors.unwrap_or(false);
    let mut code = EXIT_OK;
    for ((k, result), path) in targets.iter().zip(results).zip(&paths) {
        let traj = match result {
            Ok(traj) => {
                eprintln!("target {k}: {}", describe(&traj));
                traj
            }
            Err(aborted) if aborted.partial.is_empty() => return Err(aborted.cause),
            Err(aborted) => {
                eprintln!("target {k}: {aborted}; keeping {} accepted steps", aborted.partial.len());
                code = EXIT_ABORTED;
                aborted.partial
            }
        };
        write_trajectory(&traj, path.as_deref(), vectors)?;
    }
    Ok(code)
}

/// Dense reference trajectory over the sweep grid, in the trajectory CSV
/// schema. Weak eigenvector matches between grid points are reported.
pub fn cmd_reference(cfg: &RunConfig) -> i32 {
    report(run_reference(cfg))
}

fn run_reference(cfg: &RunConfig) -> Result<i32> {
    let source = cfg.source()?;
    let tcfg = cfg.tracker_config(&source)?;
    let selector = cfg.target()?;
    let grid = sweep_grid(&source, tcfg.p_init, tcfg.p_fin, tcfg.dp_init)?;
    let prov = source.provider();
    let pairs = full_spectrum(prov.as_ref(), grid[0], false, true)?;
    let targets = select_targets(&selector, &pairs)?;
    let paths = output_paths(cfg, &targets)?;
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = targets
            .iter()
            .map(|&k| {
                let provider = source.provider();
                let grid = &grid;
                scope.spawn(move || reference_run(provider.as_ref(), grid, k))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("reference thread panicked")).collect()
    });
    let vectors = cfg.vectors.unwrap_or(false);
    let mut code = EXIT_OK;
    for ((k, (traj, failure)), path) in targets.iter().zip(results).zip(&paths) {
        for r in traj.records.iter().filter(|r| r.flags.low_mac) {
            eprintln!("warning: target {k}: weak eigenvector match at p = {}", r.p);
        }
        match failure {
            None => eprintln!("target {k}: {}", describe(&traj)),
            Some(e) => {
                eprintln!("target {k}: reference aborted: {e}; keeping {} points", traj.len());
                code = EXIT_ABORTED;
            }
        }
        write_trajectory(&traj, path.as_deref(), vectors)?;
    }
    Ok(code)
}

/// Reference points up to the first failure, converted to trajectory records.
pub fn reference_run<P: PencilProvider + ?Sized>(
    provider: &P,
    grid: &[f64],
    seed: usize,
) -> (Trajectory, Option<Error>) {
    let mut reference = ReferenceTrajectory::default();
    let mut traj = Trajectory::new(provider.parameter_name());
    for &p in grid {
        let point = reference
            .push(provider, p, seed)
            .and_then(|_| provider.pencil(p))
            .map(|pen| (pen, reference.points.last().unwrap()));
        let (pen, pt) = match point {
            Ok(v) => v,
            Err(e) => return (traj, Some(e)),
        };
        let pair = pt.tracked_pair();
        let dp = traj.last().map_or(0.0, |r| p - r.p);
        traj.records.push(TrajectoryRecord {
            p,
            s: pair.s,
            phi: pair.right.clone(),
            residual: residual(&pen.e, &pen.a, pair.s, &pair.right),
            dp_used: dp,
            corrector_iters: 0,
            flags: StepFlags {
                low_mac: pt.low_mac,
                ..StepFlags::default()
            },
        });
    }
    (traj, None)
}

/// Per-point and summary differences between a tracked and a reference
/// trajectory at their common parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub p: Vec<f64>,
    pub rel_err: Vec<f64>,
    pub dzeta: Vec<f64>,
}

impl Comparison {
    pub fn max_rel_err(&self) -> f64 {
        self.rel_err.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_rel_err(&self) -> f64 {
        mean(&self.rel_err)
    }

    pub fn max_dzeta(&self) -> f64 {
        self.dzeta.iter().map(|d| d.abs()).fold(0.0, f64::max)
    }

    pub fn mean_dzeta(&self) -> f64 {
        mean(&self.dzeta.iter().map(|d| d.abs()).collect::<Vec<_>>())
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Relative error `|s_t - s_r| / |s_r|` and `zeta_t - zeta_r` at every
/// tracked point whose parameter value also appears in the reference.
pub fn compare_trajectories(tracked: &Trajectory, reference: &Trajectory) -> Result<Comparison> {
    let mut out = Comparison {
        p: Vec::new(),
        rel_err: Vec::new(),
        dzeta: Vec::new(),
    };
    for t in &tracked.records {
        let tol = 1e-9 * t.p.abs().max(1.0);
        let Some(r) = reference.records.iter().find(|r| (r.p - t.p).abs() <= tol) else {
            continue;
        };
        let diff = (t.s - r.s).norm();
        let scale = r.s.norm();
        out.p.push(t.p);
        out.rel_err.push(if scale > 0.0 { diff / scale } else { diff });
        out.dzeta.push(damping_ratio(t.s) - damping_ratio(r.s));
    }
    if out.p.is_empty() {
        return Err(Error::InvalidConfig("the two trajectories share no parameter values".into()));
    }
    Ok(out)
}

fn read_trajectory(path: &Path) -> Result<Trajectory> {
    if is_json(path) {
        Trajectory::from_json(&std::fs::read_to_string(path)?)
    } else {
        Trajectory::read_csv(File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
    }
}

pub fn cmd_compare(tracked: &Path, reference: &Path, cfg: &RunConfig) -> i32 {
    report(run_compare(tracked, reference, cfg))
}

fn run_compare(tracked: &Path, reference: &Path, cfg: &RunConfig) -> Result<i32> {
    let cmp = compare_trajectories(&read_trajectory(tracked)?, &read_trajectory(reference)?)?;
    if let Some(out) = &cfg.out {
        let mut w = csv::Writer::from_path(out).map_err(|e| Error::Io(e.to_string()))?;
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["p", "rel_err", "dzeta"]).map_err(io)?;
        for k in 0..cmp.p.len() {
            w.write_record([cmp.p[k], cmp.rel_err[k], cmp.dzeta[k]].map(|v| format!("{v:?}")))
                .map_err(io)?;
        }
        w.flush()?;
    }
    let max_rel = cfg.max_rel_err.unwrap_or(DEFAULT_MAX_REL_ERR);
    let max_dz = cfg.max_dzeta.unwrap_or(DEFAULT_MAX_DZETA);
    let pass = cmp.max_rel_err() <= max_rel && cmp.max_dzeta() <= max_dz;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "points {}", cmp.p.len())?;
    writeln!(stdout, "rel_err max {:e} mean {:e} bound {:e}", cmp.max_rel_err(), cmp.mean_rel_err(), max_rel)?;
    writeln!(stdout, "dzeta max {:e} mean {:e} bound {:e}", cmp.max_dzeta(), cmp.mean_dzeta(), max_dz)?;
    writeln!(stdout, "{}", if pass { "within bounds" } else { "bounds exceeded" })?;
    Ok(if pass { EXIT_OK } else { EXIT_THRESHOLD })
}

/// Wall-clock split of one method over a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub steps: usize,
    pub total: Duration,
    pub after_initial: Duration,
}

impl Timing {
    pub fn per_step(&self) -> Duration {
        if self.steps == 0 {
            Duration::ZERO
        } else {
            self.after_initial / self.steps as u32
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub fixed: Timing,
    pub adaptive: Timing,
    pub dense: Timing,
}

/// Times fixed-step and adaptive continuation of `target` against repeated
/// dense eigendecomposition on the fixed-step grid.
pub fn bench(source: &Source, tcfg: &TrackerConfig, target: &super::config::TargetSelector) -> Result<BenchReport> {
    let continuation = |adaptive: bool| -> Result<Timing> {
        let prov = source.provider();
        let mut c = tcfg.clone();
        c.step.adaptive = adaptive;
        let start = Instant::now();
        let pencil = prov.pencil(c.p_init)?;
        let pairs = full_spectrum(prov.as_ref(), c.p_init, false, true)?;
        let k = select_targets(target, &pairs)?[0];
        let init = init_from_eigenpair(&pencil.e, &pencil.a, c.p_init, pairs[k].s, &pairs[k].right, Complex64::new(1.0, 0.0))?;
        let initial = start.elapsed();
        let traj = track(prov.as_ref(), init, &c).map_err(|a| a.cause)?;
        let total = start.elapsed();
        Ok(Timing {
            steps: traj.accepted_steps(),
            total,
            after_initial: total - initial,
        })
    };
    let fixed = continuation(false)?;
    let adaptive = continuation(true)?;
    let grid = sweep_grid(source, tcfg.p_init, tcfg.p_fin, tcfg.dp_init)?;
    let prov = source.provider();
    let start = Instant::now();
    let mut initial = Duration::ZERO;
    for (i, &p) in grid.iter().enumerate() {
        full_spectrum(prov.as_ref(), p, false, false)?;
        if i == 0 {
            initial = start.elapsed();
        }
    }
    let total = start.elapsed();
    let dense = Timing {
        steps: grid.len() - 1,
        total,
        after_initial: total - initial,
    };
    Ok(BenchReport { fixed, adaptive, dense })
}

pub fn cmd_bench(cfg: &RunConfig) -> i32 {
    report(run_bench(cfg))
}

fn run_bench(cfg: &RunConfig) -> Result<i32> {
    let source = cfg.source()?;
    let tcfg = cfg.tracker_config(&source)?;
    let selector = cfg.target()?;
    let rep = match bench(&source, &tcfg, &selector) {
        Ok(r) => r,
        Err(e @ Error::InvalidConfig(_)) => return Err(e),
        Err(e) => {
            eprintln!("bench aborted: {e}");
            return Ok(EXIT_ABORTED);
        }
    };
    let mut text = String::from("method,steps,total_s,after_initial_s,per_step_s\n");
    for (name, t) in [("continuation_fixed", rep.fixed), ("continuation_adaptive", rep.adaptive), ("dense", rep.dense)] {
        text.push_str(&format!(
            "{name},{},{:.6e},{:.6e},{:.6e}\n",
            t.steps,
            t.total.as_secs_f64(),
            t.after_initial.as_secs_f64(),
            t.per_step().as_secs_f64()
        ));
    }
    match &cfg.out {
        Some(out) => std::fs::write(out, &text)?,
        None => print!("{text}"),
    }
    let per = |t: Timing| t.per_step().as_secs_f64();
    if per(rep.fixed) > 0.0 {
        eprintln!("per-step speedup over dense: {:.1}x", per(rep.dense) / per(rep.fixed));
    }
    eprintln!("adaptive steps: {} (fixed: {})", rep.adaptive.steps, rep.fixed.steps);
    Ok(EXIT_OK)
}

/// Finite spectrum at `from` (or the model's default start).
pub fn cmd_spectrum(cfg: &RunConfig) -> i32 {
    report(run_spectrum(cfg))
}

fn run_spectrum(cfg: &RunConfig) -> Result<i32> {
    let source = cfg.source()?;
    let p = cfg.from.unwrap_or(source.defaults().0);
    let pairs = full_spectrum(source.provider().as_ref(), p, false, false)?;
    match &cfg.out {
        Some(out) => write_spectrum_csv(BufWriter::new(File::create(out)?), &pairs)?,
        None => write_spectrum_csv(io::stdout().lock(), &pairs)?,
    }
    Ok(EXIT_OK)
}
