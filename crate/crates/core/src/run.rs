//! Task runner behind the `cpms` binary: executes one task from a
//! configuration and writes CSV/JSON artifacts into an output directory.
//!
//! Exit codes: 0 success or pass, 1 failed verdict, 2 configuration error,
//! 3 solver failure.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{section, LoadedConfig, RunConfig};
use crate::control::{certify, Verdict};
use crate::error::{Error, Result};
use crate::feynman::{phase_transform_gap, residual_slope, ActionSpec, LimitForm, WaveGrid};
use crate::mean_field::{wasserstein2, EmpiricalLaw};
use crate::solver::{cauchy_study, solve_mckean_vlasov, solve_single, Trajectory};
use crate::space::{Norm, SpectralSpace, SpectralState};

/// Version tag embedded in every summary.
pub const SCHEMA: &str = "cpms/1";

const LOCK: &str = ".cpms.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Certify,
    FeynmanCheck,
    ConvergenceStudy,
    WassersteinSelftest,
}

/// Exit status and a one-line message for the terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn verdict(pass: bool, what: &str) -> Self {
        Self {
            code: if pass { 0 } else { 1 },
            message: format!("{what}: {}", if pass { "pass" } else { "fail" }),
        }
    }
}

/// Exit code for an error: 2 for anything the configuration controls, 3 for
/// failures during the computation itself.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InnerSolve { .. }
        | Error::PicardExhausted { .. }
        | Error::Resolvent { .. }
        | Error::NoInverse
        | Error::SpaceMismatch
        | Error::GridMismatch
        | Error::EmptyEnsemble
        | Error::UnequalEnsembles { .. }
        | Error::Io(_)
        | Error::Json(_) => 3,
        _ => 2,
    }
}

struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is in use (remove {LOCK} if no run is active)",
                dir.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Runs `task` with the configuration at `config_path`, writing into `out`.
pub fn run(task: Task, config_path: &Path, out: &Path, seed: Option<u64>) -> Outcome {
    let attempt = || -> Result<Outcome> {
        let loaded = LoadedConfig::from_path(config_path)?;
        let _lock = DirLock::acquire(out)?;
        execute(task, &loaded, out, seed)
    };
    attempt().unwrap_or_else(|e| Outcome {
        code: exit_code(&e),
        message: e.to_string(),
    })
}

/// Same as [`run`] for an in-memory configuration.
pub fn run_source(task: Task, source: &str, out: &Path, seed: Option<u64>) -> Outcome {
    let attempt = || -> Result<Outcome> {
        let loaded = LoadedConfig::from_str(source)?;
        let _lock = DirLock::acquire(out)?;
        execute(task, &loaded, out, seed)
    };
    attempt().unwrap_or_else(|e| Outcome {
        code: exit_code(&e),
        message: e.to_string(),
    })
}

fn execute(task: Task, loaded: &LoadedConfig, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    let mut resolved = loaded.config.clone();
    if let (Some(s), Some(solver)) = (seed, resolved.solver.as_mut()) {
        solver.seed = s;
    }
    match task {
        Task::Simulate => simulate(loaded, &resolved, out, seed),
        Task::Certify => run_certify(loaded, &resolved, out, seed),
        Task::FeynmanCheck => feynman_check(loaded, &resolved, out),
        Task::ConvergenceStudy => convergence(loaded, &resolved, out, seed),
        Task::WassersteinSelftest => selftest(loaded, &resolved, out, seed),
    }
}

fn write_summary(out: &Path, task: Task, config: &RunConfig, body: Value) -> Result<()> {
    let mut summary = json!({
        "schema": SCHEMA,
        "task": task,
        "config": config,
    });
    if let (Value::Object(m), Value::Object(extra)) = (&mut summary, body) {
        m.extend(extra);
    }
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(out.join("summary.json"), text)?;
    Ok(())
}

fn trajectory_csv(tr: &Trajectory) -> String {
    let n = tr.x[0].space().modes();
    let mut s = String::from("t,l2,hminus1");
    for j in 1..=n {
        let _ = write!(s, ",re_{j},im_{j}");
    }
    s.push('\n');
    for (t, x) in tr.times.iter().zip(&tr.x) {
        let _ = write!(s, "{t},{},{}", x.norm(Norm::L2), x.norm(Norm::HMinusOne));
        for a in x.coeffs() {
            let _ = write!(s, ",{},{}", a.re, a.im);
        }
        s.push('\n');
    }
    s
}

fn norm_series(tr: &Trajectory) -> Value {
    json!({
        "t": tr.times,
        "l2": tr.diagnostics.iter().map(|d| d.x_l2).collect::<Vec<_>>(),
        "hminus1": tr.diagnostics.iter().map(|d| d.x_dual).collect::<Vec<_>>(),
    })
}

fn trajectory_summary(tr: &Trajectory) -> Value {
    let last = tr.diagnostics.last().expect("trajectory has nodes");
    json!({
        "steps": tr.steps(),
        "final_l2": last.x_l2,
        "final_hminus1": last.x_dual,
        "dissipation_integral": last.dissipation,
        "l2_integral": last.l2_integral,
        "beta_h1_integral": last.beta_h1,
        "fitted_C": tr.fitted_c,
        "continuity_modulus": tr.continuity_modulus,
        "inner_iterations": tr.inner_iterations,
        "newton_steps": tr.newton_steps,
        "flags": tr.flags,
    })
}

fn simulate(loaded: &LoadedConfig, resolved: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    let problem = loaded.problem()?;
    let x0 = loaded.initial(&problem.space)?;
    let cfg = loaded.solver(seed)?;
    if cfg.ensemble > 1 || problem.drift.depends_on_law() {
        let run = solve_mckean_vlasov(&vec![x0; cfg.ensemble], &problem, &cfg)?;
        let first = &run.trajectories[0];
        fs::write(out.join("trajectory.csv"), trajectory_csv(first))?;
        let means: Vec<SpectralState> = run.law.laws().iter().map(|l| l.mean()).collect();
        let mean_path = Trajectory {
            x: means.clone(),
            y: means,
            ..first.clone()
        };
        fs::write(out.join("mean.csv"), trajectory_csv(&mean_path))?;
        let fitted = run.trajectories.iter().map(|t| t.fitted_c).fold(0.0, f64::max);
        let mut particle = trajectory_summary(first);
        particle["fitted_C"] = json!(fitted);
        write_summary(
            out,
            Task::Simulate,
            resolved,
            json!({
                "ensemble": cfg.ensemble,
                "trajectory": particle,
                "norms": norm_series(first),
                "picard": run.report,
                "picard_distances": run.report.distances,
            }),
        )?;
        return Ok(Outcome {
            code: 0,
            message: format!(
                "simulate: {} particles, {} Picard iterations",
                cfg.ensemble, run.report.iterations
            ),
        });
    }
    let tr = solve_single(&x0, &problem, &cfg)?;
    fs::write(out.join("trajectory.csv"), trajectory_csv(&tr))?;
    write_summary(
        out,
        Task::Simulate,
        resolved,
        json!({
            "ensemble": 1,
            "trajectory": trajectory_summary(&tr),
            "norms": norm_series(&tr),
        }),
    )?;
    Ok(Outcome {
        code: 0,
        message: format!("simulate: {} steps", tr.steps()),
    })
}

fn run_certify(loaded: &LoadedConfig, resolved: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    let problem = loaded.problem()?;
    let y0 = loaded.initial(&problem.space)?;
    let cfg = loaded.solver(seed)?;
    let run = certify(&y0, &problem, &cfg)?;
    fs::write(out.join("trajectory.csv"), trajectory_csv(&run.trajectory))?;
    let pass = run.certificate.verdict == Verdict::Pass;
    write_summary(
        out,
        Task::Certify,
        resolved,
        json!({
            "verdict": run.certificate.verdict,
            "certificate": run.certificate,
            "relative_J": run.certificate.relative_cost(),
            "trajectory": trajectory_summary(&run.trajectory),
            "norms": norm_series(&run.trajectory),
        }),
    )?;
    Ok(Outcome::verdict(pass, "certify"))
}

fn feynman_check(loaded: &LoadedConfig, resolved: &RunConfig, out: &Path) -> Result<Outcome> {
    let fc = section(&loaded.config.feynman, "feynman")?;
    let w = fc.width;
    let psi = WaveGrid::from_fn(-fc.half_width, fc.half_width, fc.h, |x| {
        (-x * x / (2.0 * w * w)).exp().into()
    })?;
    let form = match fc.action {
        ActionSpec::LogLinear { .. } => LimitForm::Log,
        _ => LimitForm::Wave,
    };
    let opts = fc.options();
    let report = residual_slope(&psi, &fc.eps, fc.action, form, &opts)?;
    let gap = fc.kappa.map(|k| phase_transform_gap(&psi, k, &opts)).transpose()?;
    let mut csv = String::from("eps,residual,slope\n");
    for (e, r) in report.eps.iter().zip(&report.residuals) {
        let _ = writeln!(csv, "{e},{r},{}", report.slope);
    }
    fs::write(out.join("feynman.csv"), csv)?;
    let [lo, hi] = fc.slope_window;
    let slope_ok = report.slope >= lo && report.slope <= hi;
    let decay_ok = report.min_decay_factor() >= 2.0;
    let gap_ok = gap.is_none_or(|g| g <= 1e-10);
    let pass = slope_ok && decay_ok && gap_ok;
    write_summary(
        out,
        Task::FeynmanCheck,
        resolved,
        json!({
            "verdict": if pass { Verdict::Pass } else { Verdict::Fail },
            "feynman": {
                "eps": report.eps,
                "residuals": report.residuals,
                "slope": report.slope,
                "window": fc.slope_window,
                "min_decay_factor": report.min_decay_factor(),
                "phase_gap": gap,
            },
        }),
    )?;
    Ok(Outcome::verdict(pass, &format!("feynman-check slope {:.3}", report.slope)))
}

fn convergence(loaded: &LoadedConfig, resolved: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    let study = section(&loaded.config.study, "study")?;
    if study.levels.len() < 2 {
        return Err(Error::Config("[study] needs at least two levels".into()));
    }
    let cfg = loaded.solver(seed)?;
    let rows = cauchy_study(&study.levels, &cfg, |n| loaded.at_level(n))?;
    let mut csv = String::from("coarse,fine,sup_hminus1,l2_integral\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.coarse, r.fine, r.sup_dual, r.l2_integral);
    }
    fs::write(out.join("table.csv"), csv)?;
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].sup_dual < w[0].sup_dual && w[1].l2_integral < w[0].l2_integral);
    write_summary(
        out,
        Task::ConvergenceStudy,
        resolved,
        json!({
            "verdict": if decreasing { Verdict::Pass } else { Verdict::Fail },
            "study": rows,
        }),
    )?;
    Ok(Outcome::verdict(decreasing, "convergence-study"))
}

/// `W₂` by exhaustive search over permutations (small ensembles only).
pub fn exhaustive_w2(mu: &[SpectralState], nu: &[SpectralState]) -> f64 {
    fn rec(cost: &[Vec<f64>], i: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if i == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                rec(cost, i + 1, used, acc + cost[i][j], best);
                used[j] = false;
            }
        }
    }
    let cost: Vec<Vec<f64>> = mu
        .iter()
        .map(|x| nu.iter().map(|y| x.distance(y, Norm::HMinusOne).powi(2)).collect())
        .collect();
    let mut best = f64::INFINITY;
    rec(&cost, 0, &mut vec![false; mu.len()], 0.0, &mut best);
    (best / mu.len() as f64).sqrt()
}

fn selftest(loaded: &LoadedConfig, resolved: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    let st = section(&loaded.config.selftest, "selftest")?;
    if st.max_size == 0 || st.max_size > 8 {
        return Err(Error::Config("[selftest] max_size must be in 1..=8".into()));
    }
    let space = match &loaded.config.space {
        Some(_) => loaded.space()?,
        None => SpectralSpace::with_default_grid(1.0, 4)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(st.seed));
    let mut csv = String::from("size,pair,assignment,exhaustive,abs_diff\n");
    let mut worst: f64 = 0.0;
    for m in 1..=st.max_size {
        for pair in 0..st.pairs {
            let mut draw = || -> Vec<SpectralState> {
                (0..m)
                    .map(|_| {
                        space.state_from_fn(|_| {
                            num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        })
                    })
                    .collect()
            };
            let (a, b) = (draw(), draw());
            let fast = wasserstein2(&EmpiricalLaw::new(a.clone())?, &EmpiricalLaw::new(b.clone())?)?;
            let slow = exhaustive_w2(&a, &b);
            let diff = (fast - slow).abs();
            worst = worst.max(diff);
            let _ = writeln!(csv, "{m},{pair},{fast},{slow},{diff}");
        }
    }
    fs::write(out.join("table.csv"), csv)?;
    let pass = worst <= 1e-12;
    write_summary(
        out,
        Task::WassersteinSelftest,
        resolved,
        json!({
            "verdict": if pass { Verdict::Pass } else { Verdict::Fail },
            "selftest": { "max_abs_diff": worst, "max_size": st.max_size, "pairs": st.pairs },
        }),
    )?;
    Ok(Outcome::verdict(pass, "wasserstein-selftest"))
}

fn column(summary: &Value, path: &[&str]) -> Option<Vec<Value>> {
    let mut v = summary;
    for key in path {
        v = v.get(key)?;
    }
    v.as_array().cloned()
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Writes plot-ready tables derived from `summary.json` in `dir`.
pub fn report(dir: &Path) -> Outcome {
    let attempt = || -> Result<Outcome> {
        let path = dir.join("summary.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let summary: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{} is not a summary: {e}", path.display())))?;
        if summary.get("schema").and_then(Value::as_str) != Some(SCHEMA) {
            return Err(Error::Config(format!("{} has no {SCHEMA} schema tag", path.display())));
        }
        let _lock = DirLock::acquire(dir)?;
        let mut written = Vec::new();
        if let (Some(t), Some(l2), Some(h)) = (
            column(&summary, &["norms", "t"]),
            column(&summary, &["norms", "l2"]),
            column(&summary, &["norms", "hminus1"]),
        ) {
            let mut csv = String::from("t,l2,hminus1\n");
            for ((t, a), b) in t.iter().zip(&l2).zip(&h) {
                let _ = writeln!(csv, "{},{},{}", cell(t), cell(a), cell(b));
            }
            fs::write(dir.join("norms.csv"), csv)?;
            written.push("norms.csv");
        }
        if let Some(d) = column(&summary, &["picard_distances"]) {
            let mut csv = String::from("iteration,distance\n");
            for (i, v) in d.iter().enumerate() {
                let _ = writeln!(csv, "{},{}", i + 1, cell(v));
            }
            fs::write(dir.join("picard.csv"), csv)?;
            written.push("picard.csv");
        }
        if let (Some(e), Some(r)) = (
            column(&summary, &["feynman", "eps"]),
            column(&summary, &["feynman", "residuals"]),
        ) {
            let mut csv = String::from("eps,residual\n");
            for (e, r) in e.iter().zip(&r) {
                let _ = writeln!(csv, "{},{}", cell(e), cell(r));
            }
            fs::write(dir.join("residuals.csv"), csv)?;
            written.push("residuals.csv");
        }
        Ok(Outcome {
            code: 0,
            message: format!("report: wrote {}", written.join(", ")),
        })
    };
    attempt().unwrap_or_else(|e| Outcome {
        code: exit_code(&e),
        message: e.to_string(),
    })
}
