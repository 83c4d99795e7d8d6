//! Acceptance suite: one line per criterion, `[PASS]` or `[FAIL]`, then a
//! tally. Exits non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use cpms::config::LoadedConfig;
use cpms::control::{certify, evaluate_cost, Verdict};
use cpms::feynman::{
    one_step_residual, phase_transform_gap, residual_slope, ActionSpec, CheckOptions, LimitForm, WaveGrid,
};
use cpms::mean_field::{wasserstein2, EmpiricalLaw};
use cpms::monotone::{MonotoneMap, SaturatingProfile};
use cpms::noise::{NoisePath, NoiseSpec};
use cpms::run::{exhaustive_w2, report, run_source, Task};
use cpms::solver::{cauchy_study, solve_mckean_vlasov, solve_single, Problem, SolverConfig};
use cpms::space::{Norm, SpectralSpace};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_c(rng: &mut ChaCha8Rng, r: f64) -> C {
    C::new(rng.random_range(-r..r), rng.random_range(-r..r))
}

fn linear_exact() -> Outcome {
    let start = Instant::now();
    let s = SpectralSpace::with_default_grid(1.0, 8).unwrap();
    let c = C::new(0.1, 1.0);
    let p = Problem::new(s.clone(), MonotoneMap::linear(c).unwrap());
    let tr = solve_single(&s.mode(1), &p, &SolverConfig::new(0.1, 1e-4)).unwrap();
    let exact = (-c * s.eigenvalue(1) * 0.1).exp();
    let rel = (tr.final_state().coeff(1) - exact).norm() / exact.norm();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rel <= 1e-3 && secs < 10.0,
        format!("|a1(T)| = {:.6}, relative error {rel:.2e} (≤ 1e-3), {secs:.2} s (< 10 s)", tr.final_state().coeff(1).norm()),
    )
}

fn fitzpatrick_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for re in [0.1, 1.0] {
        let c = C::new(re, rng.random_range(-1.0..1.0));
        let beta = MonotoneMap::linear(c).unwrap();
        for _ in 0..100 {
            let (z1, z2) = (random_c(&mut rng, 1.0), random_c(&mut rng, 1.0));
            let closed = (z1 * z2.conj()).re + (z2 - c * z1).norm_sqr() / (4.0 * re);
            worst = worst.max((beta.fitzpatrick(z1, z2).value - closed).abs());
        }
    }
    let rotation = MonotoneMap::power_phase(1.0).unwrap();
    let mut degenerate_ok = true;
    for _ in 0..100 {
        let z1 = random_c(&mut rng, 1.0);
        let off = rotation.fitzpatrick(z1, random_c(&mut rng, 1.0)).value;
        let z2 = C::new(0.0, 1.0) * z1;
        let on = rotation.fitzpatrick(z1, z2).value;
        degenerate_ok &= off == f64::INFINITY && (on - (z1 * z2.conj()).re).abs() <= 1e-12;
    }
    outcome(
        worst <= 1e-8 && degenerate_ok,
        format!("max gap to closed form {worst:.2e} (≤ 1e-8); α = 0 map: +∞ off graph, Re⟨z1,z2⟩ on graph: {degenerate_ok}"),
    )
}

fn power_phase_monotonicity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [1.0, 2.0, 3.0] {
        let a = MonotoneMap::power_phase(p).unwrap().check_monotone(100_000, 17);
        pass &= a.abs() <= 1e-12;
        parts.push(format!("p={p}: α̂ = {a:.3e}"));
    }
    outcome(pass, format!("{} (need |α̂| ≤ 1e-12)", parts.join(", ")))
}

fn catalog() -> Vec<MonotoneMap> {
    vec![
        MonotoneMap::linear(C::new(0.1, 1.0)).unwrap(),
        MonotoneMap::linear(C::new(1.0, 0.0)).unwrap(),
        MonotoneMap::power_phase(1.0).unwrap(),
        MonotoneMap::power_phase(2.0).unwrap(),
        MonotoneMap::power_phase(3.0).unwrap(),
        MonotoneMap::strictified(MonotoneMap::power_phase(2.0).unwrap(), 0.5).unwrap(),
        MonotoneMap::modulus(Arc::new(SaturatingProfile {
            base: C::new(1.0, 0.5),
            gain: 0.5,
        }))
        .unwrap(),
    ]
}

fn resolvent_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pass = true;
    let mut failures = Vec::new();
    let mut worst_residual: f64 = 0.0;
    for beta in catalog() {
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..1000 {
            let a = 10f64.powf(rng.random_range(-2.0..1.0));
            let (w1, w2) = (random_c(&mut rng, 3.0), random_c(&mut rng, 3.0));
            let (Ok(r1), Ok(r2)) = (beta.resolvent(a, w1), beta.resolvent(a, w2)) else {
                pass = false;
                failures.push(format!("{}: resolvent failed", beta.name()));
                break;
            };
            let res = (r1 + beta.eval(r1) * a - w1).norm() / w1.norm().max(1.0);
            worst_residual = worst_residual.max(res);
            worst_ratio = worst_ratio.max((r1 - r2).norm() / (w1 - w2).norm());
        }
        if worst_ratio > 1.0 + 1e-12 {
            pass = false;
            failures.push(format!("{} expands by {worst_ratio:.4}", beta.name()));
        }
    }
    pass &= worst_residual <= 1e-12;
    outcome(
        pass,
        format!(
            "max residual {worst_residual:.2e} (≤ 1e-12); nonexpansive: {}",
            if failures.is_empty() { "all".to_string() } else { failures.join("; ") }
        ),
    )
}

fn wasserstein_oracle() -> Outcome {
    let s = SpectralSpace::with_default_grid(1.0, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for m in 1..=6 {
        for _ in 0..100 {
            let mut draw = || (0..m).map(|_| s.state_from_fn(|_| random_c(&mut rng, 1.0))).collect::<Vec<_>>();
            let (a, b) = (draw(), draw());
            let fast = wasserstein2(&EmpiricalLaw::new(a.clone()).unwrap(), &EmpiricalLaw::new(b.clone()).unwrap()).unwrap();
            worst = worst.max((fast - exhaustive_w2(&a, &b)).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |assignment − exhaustive| = {worst:.2e} over M ≤ 6 (≤ 1e-12)"))
}

const MEAN_FIELD: &str = include_str!("../../../configs/mean_field.toml");

fn picard_contraction() -> Outcome {
    let start = Instant::now();
    let cfg = LoadedConfig::from_str(MEAN_FIELD).unwrap();
    let p = cfg.problem().unwrap();
    let x0 = cfg.initial(&p.space).unwrap();
    let sc = cfg.solver(None).unwrap();
    let declared = p.drift.lipschitz();
    let run = solve_mckean_vlasov(&vec![x0; sc.ensemble], &p, &sc).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ratio = run.report.contraction_ratio.unwrap_or(f64::NAN);
    let pass = ratio <= 0.175 && run.report.iterations <= 6 && secs < 60.0 && (declared - 0.5).abs() < 1e-12;
    outcome(
        pass,
        format!(
            "[f]1 = {declared}, c = {}, M = {}, distances {:?}, ratio {ratio:.4} (≤ 0.175, bound {:.3}), {} iterations (≤ 6), {secs:.1} s (< 60 s)",
            run.report.weight,
            sc.ensemble,
            run.report.distances.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>(),
            run.report.theoretical_ratio.unwrap_or(f64::NAN),
            run.report.iterations
        ),
    )
}

fn certificate() -> Outcome {
    let s = SpectralSpace::with_default_grid(1.0, 8).unwrap();
    let p = Problem::new(s.clone(), MonotoneMap::linear(C::new(0.1, 1.0)).unwrap());
    let y0 = s.mode(1);
    let run = certify(&y0, &p, &SolverConfig::new(0.1, 1e-4)).unwrap();
    let c = &run.certificate;
    let bumped = run.control.perturbed(&s.mode(1), |t| 0.01 * t).unwrap();
    let other = evaluate_cost(&run.trajectory.x, &bumped, &p.beta, &p.drift).unwrap();
    let pass = c.verdict == Verdict::Pass
        && c.relative_cost() <= 1e-3
        && c.residual <= 1e-6 * (1.0 + y0.norm(Norm::HMinusOne))
        && other.verdict == Verdict::Fail
        && other.cost >= 10.0 * c.cost;
    outcome(
        pass,
        format!(
            "solution J/norm {:.2e}, residual {:.2e}; perturbed J {:.2e} ({:.0}× larger), verdict {:?}",
            c.relative_cost(),
            c.residual,
            other.cost,
            other.cost / c.cost,
            other.verdict
        ),
    )
}

fn feynman_consistency() -> Outcome {
    let gauss = WaveGrid::from_fn(-3.0, 3.0, 1e-3, |x| C::new((-x * x / 2.0).exp(), 0.0)).unwrap();
    let opts = CheckOptions::default();
    let slope = residual_slope(
        &gauss,
        &[1e-2, 1e-3, 1e-4],
        ActionSpec::LogLinear { k: C::new(0.0, 0.5) },
        LimitForm::Log,
        &opts,
    )
    .unwrap();
    let cubic = WaveGrid::from_fn(-1.5, 1.5, 1e-3, |x| C::new(1.0 + x - 0.5 * x * x + x.powi(3) / 3.0, 0.2 * x.powi(3))).unwrap();
    let cubic_opts = CheckOptions {
        stride: 0.05,
        ..opts
    };
    let cubic_res = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| one_step_residual(&cubic, e, ActionSpec::Free, LimitForm::Wave, &cubic_opts).unwrap())
        .fold(0.0, f64::max);
    let gap = phase_transform_gap(&gauss, 0.5, &opts).unwrap();
    let slope_ok = (1.2..=1.8).contains(&slope.slope);
    outcome(
        slope_ok && cubic_res <= 1e-13 && gap <= 1e-10,
        format!(
            "slope {:.3} (window [1.2, 1.8]: {slope_ok}), residuals {:?}; cubic residual {cubic_res:.2e} (≤ 1e-13); Φ gap {gap:.2e} (≤ 1e-10)",
            slope.slope,
            slope.residuals.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn noise_statistics() -> Outcome {
    let s = SpectralSpace::with_default_grid(1.0, 3).unwrap();
    let g = NoiseSpec::power_law(1.0, 3.0, 0.8, 3).unwrap();
    let times: Vec<f64> = (0..=4).map(|i| i as f64 * 0.25).collect();
    let n = 10_000;
    let paths: Vec<NoisePath> = (0..n).map(|i| g.sample_convolution(&s, &times, 99, i).unwrap()).collect();
    let se = (2.0 / (n as f64 - 1.0)).sqrt();
    let mut worst: f64 = 0.0;
    for k in 1..=3 {
        let e: Vec<f64> = paths.iter().map(|p| p.at(4).coeff(k).norm_sqr()).collect();
        let expect = (g.sigma_re()[k - 1].powi(2) + g.sigma_im()[k - 1].powi(2)) * 1.0;
        let ratio = e.iter().sum::<f64>() / n as f64 / expect;
        worst = worst.max((ratio - 1.0).abs() / se);
    }
    let rejects = NoiseSpec::power_law(1.0, 2.0, 1.0, 4).is_err();
    let accepts = NoiseSpec::power_law(1.0, 3.0, 1.0, 4).is_ok();
    outcome(
        worst <= 3.0 && rejects && accepts,
        format!("worst variance-ratio deviation {worst:.2} se (≤ 3); rejects (γ=1, r=2): {rejects}; accepts (γ=1, r=3): {accepts}"),
    )
}

fn energy_and_dissipation() -> Outcome {
    let mut fitted = Vec::new();
    // regression suite: linear exact, strictly monotone, noisy with drift, mean field
    let s = SpectralSpace::with_default_grid(1.0, 8).unwrap();
    let linear = Problem::new(s.clone(), MonotoneMap::linear(C::new(0.1, 1.0)).unwrap());
    fitted.push(solve_single(&s.mode(1), &linear, &SolverConfig::new(0.1, 1e-4)).unwrap().fitted_c);
    let strict = Problem::new(
        s.clone(),
        MonotoneMap::strictified(MonotoneMap::power_phase(2.0).unwrap(), 0.5).unwrap(),
    );
    let smooth = s.state_from_fn(|j| C::new(1.0, 0.5) * (j as f64).powi(-3));
    let tr = solve_single(&smooth.scale(C::new(3.0, 0.0)), &strict, &SolverConfig::new(0.05, 1e-3)).unwrap();
    fitted.push(tr.fitted_c);
    let monotone_decay = tr.diagnostics.windows(2).all(|w| w[1].y_dual <= w[0].y_dual * (1.0 + 1e-12));
    let noisy = Problem::new(s.clone(), MonotoneMap::linear(C::new(0.5, 1.0)).unwrap())
        .with_drift(cpms::mean_field::DriftSpec::linear_in_mean(&s, C::new(0.3, 0.0), C::new(0.0, 0.0)).unwrap())
        .with_noise(NoiseSpec::power_law(1.0, 3.0, 0.3, 8).unwrap());
    let mut cfg = SolverConfig::new(0.05, 1e-3);
    cfg.seed = 3;
    fitted.push(solve_single(&smooth, &noisy, &cfg).unwrap().fitted_c);
    let mf = LoadedConfig::from_str(MEAN_FIELD).unwrap();
    let (p, x0, sc) = (mf.problem().unwrap(), mf.initial(&mf.space().unwrap()).unwrap(), mf.solver(None).unwrap());
    let run = solve_mckean_vlasov(&vec![x0; sc.ensemble], &p, &sc).unwrap();
    fitted.extend(run.trajectories.iter().map(|t| t.fitted_c));
    let all_finite = fitted.iter().all(|c| c.is_finite());
    let max_c = fitted.iter().cloned().fold(0.0, f64::max);

    let rows = cauchy_study(&[8, 16, 32], &SolverConfig::new(0.05, 1e-3), |n| {
        let s = SpectralSpace::with_default_grid(1.0, n)?;
        let beta = MonotoneMap::strictified(MonotoneMap::power_phase(2.0)?, 0.5)?;
        let x0 = s.state_from_fn(|j| C::new(1.0, 0.5) * (j as f64).powi(-3));
        Ok((Problem::new(s, beta), x0))
    })
    .unwrap();
    let shrinking = rows[1].sup_dual < rows[0].sup_dual && rows[1].l2_integral < rows[0].l2_integral;
    outcome(
        all_finite && monotone_decay && shrinking,
        format!(
            "fitted Ĉ finite on {} runs (max {max_c:.3}); (H¹₀)* norm non-increasing: {monotone_decay}; Cauchy sup {:.2e} → {:.2e}, ∫L² {:.2e} → {:.2e}",
            fitted.len(),
            rows[0].sup_dual,
            rows[1].sup_dual,
            rows[0].l2_integral,
            rows[1].l2_integral
        ),
    )
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let small = MEAN_FIELD
        .replace("ensemble = 32", "ensemble = 8")
        .replace("horizon = 0.2", "horizon = 0.05");
    let cases: [(&str, Task, &str); 3] = [
        ("mean_field", Task::Simulate, &small),
        ("certify", Task::Certify, include_str!("../../../configs/linear_exact.toml")),
        ("feynman", Task::FeynmanCheck, include_str!("../../../configs/feynman.toml")),
    ];
    let mut same = true;
    let mut count = 0;
    for (name, task, src) in cases {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{name}_{rep}"));
            let o = run_source(task, src, &dir, Some(11));
            assert!(o.code <= 1, "{name}: {}", o.message);
            assert_eq!(report(&dir).code, 0);
            outputs.push(artifacts(&dir));
        }
        count += outputs[0].len();
        same &= outputs[0] == outputs[1];
    }
    outcome(same, format!("{count} artifacts across simulate/certify/feynman-check identical on repeat: {same}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("linear exact-solution regression", linear_exact),
        ("Fitzpatrick closed form", fitzpatrick_closed_form),
        ("monotonicity of i|z|^(p-1)z", power_phase_monotonicity),
        ("resolvent residual and nonexpansivity", resolvent_checks),
        ("Wasserstein assignment oracle", wasserstein_oracle),
        ("Picard contraction", picard_contraction),
        ("variational certificate", certificate),
        ("path-integral consistency", feynman_consistency),
        ("noise statistics", noise_statistics),
        ("energy and dissipation", energy_and_dissipation),
        ("determinism", determinism),
    ];
    let mut passed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        passed += o.pass as usize;
        println!("[{}] {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{passed}/{} criteria passed", criteria.len());
    if passed == criteria.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
