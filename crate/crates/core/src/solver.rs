//! Galerkin time stepping for `dY = (ΔΠβ(Y + W_g) + Πf(t, Y + W_g, μ)) dt`,
//! the Picard loop over law paths, and level-refinement studies.
//!
//! The semi-implicit step solves
//!
//! ```text
//! Y + dt Λ Πβ(Y + W_g(t_{s+1})) = Y_s + dt Π f(t_s, Y_s + W_g(t_s), μ_s)
//! ```
//!
//! with `Λ = diag(λ_j)` (so `−Δ = Λ` on coefficients). The inner solve is a
//! diagonally preconditioned fixed-point iteration with a complex shift `κ`,
//! exact in one sweep for linear `β`; when successive differences stop
//! contracting it switches to Newton's method on `ℝ^{2N}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_field::{path_distance, DriftSpec, EmpiricalLaw, LawPath, PreparedDrift};
use crate::monotone::MonotoneMap;
use crate::noise::{NoisePath, NoiseSpec};
use crate::space::{Norm, SpectralSpace, SpectralState};

type C = Complex64;

/// Flag attached to runs whose map is not strictly monotone.
pub const OUTSIDE_THEOREM: &str = "outside theorem hypotheses";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    #[default]
    SemiImplicit,
}

/// Discretisation and iteration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub tol_inner: f64,
    pub max_iter: usize,
    pub tol_law: f64,
    pub picard_max: usize,
    pub ensemble: usize,
    /// Weight `c` of the law-path distance; `None` means `1 + 4 max([f]₁, 2)`.
    pub contraction: Option<f64>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            scheme: Scheme::SemiImplicit,
            tol_inner: 1e-10,
            max_iter: 200,
            tol_law: 1e-8,
            picard_max: 20,
            ensemble: 1,
            contraction: None,
            seed: 0,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Number of steps `S` and the grid `t_s = s·dt`, `s = 0..S`.
    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Solver(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Solver(format!(
                "horizon T must be positive (got {})",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Solver(format!(
                "T/dt = {ratio} is not a whole number of steps"
            )));
        }
        Ok((0..=steps as usize).map(|s| s as f64 * self.dt).collect())
    }

    pub fn contraction_weight(&self, drift: &DriftSpec) -> f64 {
        self.contraction
            .unwrap_or_else(|| 1.0 + 4.0 * drift.lipschitz().max(2.0))
    }

    fn validate(&self, beta: &MonotoneMap, space: &SpectralSpace) -> Result<()> {
        if !(self.tol_inner > 0.0) || self.max_iter == 0 {
            return Err(Error::Solver("inner tolerance and max_iter must be positive".into()));
        }
        if self.scheme == Scheme::Explicit {
            let value = self.dt * beta.lipschitz() * space.eigenvalue(space.modes());
            if !(value <= 0.5) {
                return Err(Error::Cfl { value });
            }
        }
        Ok(())
    }
}

/// The data of one equation: space, nonlinearity, drift and noise.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: Arc<SpectralSpace>,
    pub beta: MonotoneMap,
    pub drift: DriftSpec,
    pub noise: Option<NoiseSpec>,
}

impl Problem {
    pub fn new(space: Arc<SpectralSpace>, beta: MonotoneMap) -> Self {
        let drift = DriftSpec::zero(&space);
        Self {
            space,
            beta,
            drift,
            noise: None,
        }
    }

    pub fn with_drift(mut self, drift: DriftSpec) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn is_deterministic(&self) -> bool {
        self.noise.as_ref().is_none_or(|n| n.is_zero())
    }

    /// Noise path of particle `index` (zero when there is no noise).
    pub fn noise_path(&self, times: &[f64], seed: u64, index: u32) -> Result<NoisePath> {
        match &self.noise {
            Some(g) if !g.is_zero() => g.sample_convolution(&self.space, times, seed, index),
            _ => NoisePath::zero(&self.space, times),
        }
    }
}

/// How an implicit step was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    Explicit,
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub y: SpectralState,
    pub iterations: usize,
    pub method: InnerMethod,
}

/// `Πβ(x)` computed on the collocation grid.
pub fn beta_projection(beta: &MonotoneMap, x: &SpectralState) -> SpectralState {
    let space = x.space();
    let values: Vec<C> = x.to_grid().into_iter().map(|z| beta.eval(z)).collect();
    space
        .state(space.analyze(&values))
        .expect("analysis returns N coefficients")
}

/// Grid quadrature of `Re⟨β(x), x⟩_{L²}`.
pub fn beta_pairing(beta: &MonotoneMap, x: &SpectralState) -> f64 {
    let space = x.space();
    let sum: f64 = x
        .to_grid()
        .into_iter()
        .map(|z| {
            let b = beta.eval(z);
            b.re * z.re + b.im * z.im
        })
        .sum();
    sum * space.quadrature_weight()
}

/// One time step from `y` (all states on one space).
///
/// `forcing` is `Π f(t_s, y + w_now, μ_s)`; `w_now`, `w_next` are the
/// stochastic convolution at `t_s` and `t_{s+1}`.
#[allow(clippy::too_many_arguments)]
pub fn step(
    y: &SpectralState,
    dt: f64,
    w_now: &SpectralState,
    w_next: &SpectralState,
    forcing: &SpectralState,
    beta: &MonotoneMap,
    scheme: Scheme,
    tol: f64,
    max_iter: usize,
) -> Result<StepOutcome> {
    let lam = y.space().eigenvalues();
    match scheme {
        Scheme::Explicit => {
            let b = beta_projection(beta, &(y + w_now));
            let mut out = y.clone();
            for (j, a) in out.coeffs_mut().iter_mut().enumerate() {
                *a += dt * (-lam[j] * b.coeffs()[j] + forcing.coeffs()[j]);
            }
            Ok(StepOutcome {
                y: out,
                iterations: 0,
                method: InnerMethod::Explicit,
            })
        }
        Scheme::SemiImplicit => {
            let mut rhs = y.clone();
            rhs.axpy(C::new(dt, 0.0), forcing);
            implicit_solve(&rhs, y, w_next, dt, beta, tol, max_iter)
        }
    }
}

/// Solves `Y + dt Λ Πβ(Y + w) = rhs` starting from `guess`.
fn implicit_solve(
    rhs: &SpectralState,
    guess: &SpectralState,
    w: &SpectralState,
    dt: f64,
    beta: &MonotoneMap,
    tol: f64,
    max_iter: usize,
) -> Result<StepOutcome> {
    let space = rhs.space();
    let lam = space.eigenvalues();
    let kappa = match beta.linear_coefficient() {
        Some(c) => c,
        None => mean_complex_derivative(beta, &(guess + w)),
    };
    let mut y = guess.clone();
    let mut prev_diff = f64::INFINITY;
    for it in 0..max_iter {
        let b = beta_projection(beta, &(&y + w));
        let next = space.state_from_fn(|j| {
            let j0 = j - 1;
            let num = rhs.coeffs()[j0] - dt * lam[j0] * (b.coeffs()[j0] - kappa * y.coeffs()[j0]);
            num / (1.0 + dt * lam[j0] * kappa)
        });
        let diff = next.distance(&y, Norm::HMinusOne);
        y = next;
        if !y.is_finite() {
            break;
        }
        if diff < tol {
            return Ok(StepOutcome {
                y,
                iterations: it + 1,
                method: InnerMethod::FixedPoint,
            });
        }
        if it >= 2 && diff > 0.5 * prev_diff {
            break;
        }
        prev_diff = diff;
    }
    newton_solve(rhs, guess, w, dt, beta, tol, max_iter)
}

/// Average over the grid of the complex-linear part `(∂_x β − i ∂_y β)/2`.
fn mean_complex_derivative(beta: &MonotoneMap, x: &SpectralState) -> C {
    let grid = x.to_grid();
    let n = grid.len() as f64;
    let mut k: C = grid
        .into_iter()
        .map(|z| {
            let (dx, dy) = beta.jacobian(z);
            (dx - C::new(0.0, 1.0) * dy) * 0.5
        })
        .sum::<C>()
        / n;
    if k.re < beta.alpha() {
        k.re = beta.alpha();
    }
    k
}

fn newton_solve(
    rhs: &SpectralState,
    guess: &SpectralState,
    w: &SpectralState,
    dt: f64,
    beta: &MonotoneMap,
    tol: f64,
    max_iter: usize,
) -> Result<StepOutcome> {
    let space = rhs.space();
    let lam = space.eigenvalues();
    let n = space.modes();
    let g = space.grid_size();
    let h = space.quadrature_weight();
    let weights: Vec<f64> = lam.iter().map(|l| 1.0 / (1.0 + dt * l)).collect();

    let residual = |y: &SpectralState| -> SpectralState {
        let b = beta_projection(beta, &(y + w));
        space.state_from_fn(|j| {
            let j0 = j - 1;
            y.coeffs()[j0] + dt * lam[j0] * b.coeffs()[j0] - rhs.coeffs()[j0]
        })
    };
    let merit = |r: &SpectralState| -> f64 {
        r.coeffs()
            .iter()
            .zip(&weights)
            .map(|(a, w)| a.norm_sqr() * w * w)
            .sum()
    };

    let mut y = guess.clone();
    let mut r = residual(&y);
    let mut m = merit(&r);
    for it in 0..max_iter {
        if m == 0.0 {
            return Ok(StepOutcome {
                y,
                iterations: it,
                method: InnerMethod::Newton,
            });
        }
        let xg = (&y + w).to_grid();
        let jac: Vec<[f64; 4]> = xg
            .iter()
            .map(|&z| {
                let (dx, dy) = beta.jacobian(z);
                [dx.re, dy.re, dx.im, dy.im]
            })
            .collect();
        let mut mat = DMatrix::<f64>::identity(2 * n, 2 * n);
        for j in 0..n {
            let scale = dt * lam[j] * h;
            for k in 0..n {
                let mut blk = [0.0; 4];
                for (mm, d) in jac.iter().enumerate().take(g) {
                    let e = space.basis_value(j + 1, mm) * space.basis_value(k + 1, mm);
                    for q in 0..4 {
                        blk[q] += e * d[q];
                    }
                }
                mat[(2 * j, 2 * k)] += scale * blk[0];
                mat[(2 * j, 2 * k + 1)] += scale * blk[1];
                mat[(2 * j + 1, 2 * k)] += scale * blk[2];
                mat[(2 * j + 1, 2 * k + 1)] += scale * blk[3];
            }
        }
        let b = DVector::from_iterator(2 * n, r.coeffs().iter().flat_map(|a| [-a.re, -a.im]));
        let Some(d) = mat.lu().solve(&b) else {
            break;
        };
        let dir = space.state_from_fn(|j| C::new(d[2 * (j - 1)], d[2 * (j - 1) + 1]));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = y.clone();
            cand.axpy(C::new(t, 0.0), &dir);
            let rc = residual(&cand);
            let mc = merit(&rc);
            if mc <= (1.0 - 1e-4 * t) * m {
                y = cand;
                r = rc;
                m = mc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let moved = dir.norm(Norm::HMinusOne) * t;
        if !accepted || moved < tol {
            if m.sqrt() <= tol.max(1e-14) || moved < tol {
                return Ok(StepOutcome {
                    y,
                    iterations: it + 1,
                    method: InnerMethod::Newton,
                });
            }
            break;
        }
    }
    Err(Error::InnerSolve {
        step: 0,
        residual: r.norm(Norm::HMinusOne),
    })
}

/// Per-node diagnostics of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDiagnostics {
    pub t: f64,
    /// `‖Y‖_{(H¹₀)*}`.
    pub y_dual: f64,
    pub y_l2: f64,
    pub y_h1: f64,
    /// `‖X‖_{(H¹₀)*}`.
    pub x_dual: f64,
    pub x_l2: f64,
    /// `Re⟨β(Y), Y⟩_{L²}`.
    pub beta_pairing: f64,
    /// `∫₀ᵗ Re⟨β(Y), Y⟩_{L²} ds` (energy record (ii)).
    pub dissipation: f64,
    /// `∫₀ᵗ ‖Y‖²_{L²} ds` (energy record (iii)).
    pub l2_integral: f64,
    /// `∫₀ᵗ (‖f(s, 0, μ(s))‖²_{L²} + ‖W_g(s)‖²_{L²}) ds`.
    pub forcing: f64,
    /// `∫₀ᵗ ‖Πβ(X)‖²_{H¹₀} ds`.
    pub beta_h1: f64,
}

/// A solved path with its diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<SpectralState>,
    pub y: Vec<SpectralState>,
    pub diagnostics: Vec<NodeDiagnostics>,
    /// Smallest `Ĉ` with `‖Y_{s+1}‖²_* ≤ (1+Ĉdt)‖Y_s‖²_* + Ĉdt(‖f(t_s,0,μ_s)‖²_{L²} + ‖W_g‖²_{L²})`
    /// at every step (`∞` if no finite constant works).
    pub fitted_c: f64,
    /// `max_s ‖X(t_{s+1}) − X(t_s)‖_{(H¹₀)*}`.
    pub continuity_modulus: f64,
    pub inner_iterations: usize,
    pub newton_steps: usize,
    pub deterministic: bool,
    pub flags: Vec<String>,
}

impl Trajectory {
    pub fn final_state(&self) -> &SpectralState {
        self.x.last().expect("trajectory has at least one node")
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

/// Solves the shifted equation for one sample path with a prescribed law path.
pub fn solve_fixed_law(
    x0: &SpectralState,
    problem: &Problem,
    noise: &NoisePath,
    law: &LawPath,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let times = config.times()?;
    if law.times() != times.as_slice() || noise.times() != times.as_slice() {
        return Err(Error::GridMismatch);
    }
    let prepared: Vec<PreparedDrift<'_>> = times
        .iter()
        .zip(law.laws())
        .map(|(&t, mu)| problem.drift.prepare(t, mu))
        .collect();
    solve_prepared(x0, problem, noise, &prepared, &times, config)
}

fn solve_prepared(
    x0: &SpectralState,
    problem: &Problem,
    noise: &NoisePath,
    drift: &[PreparedDrift<'_>],
    times: &[f64],
    config: &SolverConfig,
) -> Result<Trajectory> {
    let space = &problem.space;
    if !x0.space().same_as(space) {
        return Err(Error::SpaceMismatch);
    }
    config.validate(&problem.beta, space)?;
    let beta = &problem.beta;
    let zero = space.zero();
    let steps = times.len() - 1;

    let mut ys = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    ys.push(x0.clone());
    xs.push(x0 + noise.at(0));
    let mut inner = 0;
    let mut newton = 0;
    // ‖f(t_s, 0, μ_s)‖²_{L²}
    let mut f0_sq = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        f0_sq.push(if problem.drift.is_zero() {
            0.0
        } else {
            drift[s].apply(&zero).norm_sq(Norm::L2)
        });
    }
    for s in 0..steps {
        let dt = times[s + 1] - times[s];
        let forcing = drift[s].apply(&xs[s]);
        let out = step(
            &ys[s],
            dt,
            noise.at(s),
            noise.at(s + 1),
            &forcing,
            beta,
            config.scheme,
            config.tol_inner,
            config.max_iter,
        )
        .map_err(|e| match e {
            Error::InnerSolve { residual, .. } => Error::InnerSolve { step: s, residual },
            other => other,
        })?;
        inner += out.iterations;
        if out.method == InnerMethod::Newton {
            newton += 1;
        }
        if !out.y.is_finite() {
            return Err(Error::InnerSolve {
                step: s,
                residual: f64::NAN,
            });
        }
        xs.push(&out.y + noise.at(s + 1));
        ys.push(out.y);
    }

    let mut diagnostics: Vec<NodeDiagnostics> = Vec::with_capacity(steps + 1);
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    let (mut dissipation, mut l2_int, mut forcing_int, mut beta_h1) = (0.0, 0.0, 0.0, 0.0);
    for s in 0..=steps {
        let y = &ys[s];
        let pairing = beta_pairing(beta, y);
        let y_l2_sq = y.norm_sq(Norm::L2);
        let force = f0_sq[s] + noise.at(s).norm_sq(Norm::L2);
        let bh1 = beta_projection(beta, &xs[s]).norm_sq(Norm::HOne);
        if let Some((p, l, f, b)) = prev {
            let dt = times[s] - times[s - 1];
            dissipation += 0.5 * dt * (p + pairing);
            l2_int += 0.5 * dt * (l + y_l2_sq);
            forcing_int += 0.5 * dt * (f + force);
            beta_h1 += 0.5 * dt * (b + bh1);
        }
        prev = Some((pairing, y_l2_sq, force, bh1));
        diagnostics.push(NodeDiagnostics {
            t: times[s],
            y_dual: y.norm(Norm::HMinusOne),
            y_l2: y_l2_sq.sqrt(),
            y_h1: y.norm(Norm::HOne),
            x_dual: xs[s].norm(Norm::HMinusOne),
            x_l2: xs[s].norm(Norm::L2),
            beta_pairing: pairing,
            dissipation,
            l2_integral: l2_int,
            forcing: forcing_int,
            beta_h1,
        });
    }

    let mut fitted_c: f64 = 0.0;
    let mut modulus: f64 = 0.0;
    for s in 0..steps {
        let dt = times[s + 1] - times[s];
        let e0 = diagnostics[s].y_dual.powi(2);
        let e1 = diagnostics[s + 1].y_dual.powi(2);
        let w_sq = noise.at(s).norm_sq(Norm::L2).max(noise.at(s + 1).norm_sq(Norm::L2));
        let denom = dt * (e0 + f0_sq[s] + w_sq);
        let grow = e1 - e0;
        // rounding-level growth is not evidence of an energy source
        if grow > 1e-14 * e0.max(1e-300) {
            fitted_c = if denom > 0.0 {
                fitted_c.max(grow / denom)
            } else {
                f64::INFINITY
            };
        }
        modulus = modulus.max(xs[s + 1].distance(&xs[s], Norm::HMinusOne));
    }

    let mut flags = Vec::new();
    if !(beta.alpha() > 0.0) {
        flags.push(OUTSIDE_THEOREM.to_string());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        x: xs,
        y: ys,
        diagnostics,
        fitted_c,
        continuity_modulus: modulus,
        inner_iterations: inner,
        newton_steps: newton,
        deterministic: noise.is_zero(),
        flags,
    })
}

/// Deterministic or single-path solve with a law that never changes.
pub fn solve_single(x0: &SpectralState, problem: &Problem, config: &SolverConfig) -> Result<Trajectory> {
    let times = config.times()?;
    let noise = problem.noise_path(&times, config.seed, 0)?;
    let law = LawPath::frozen(EmpiricalLaw::dirac(x0.clone()), times)?;
    solve_fixed_law(x0, problem, &noise, &law, config)
}

/// History of the fixed-point iteration over law paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport {
    /// `d(μ^{(m)}, μ^{(m−1)})` for `m = 1, 2, …`.
    pub distances: Vec<f64>,
    /// Largest ratio of consecutive distances (ignoring rounding-level ones).
    pub contraction_ratio: Option<f64>,
    /// `2[f]₁ / (c − 2[f]₁)` for the weight in use.
    pub theoretical_ratio: Option<f64>,
    pub weight: f64,
    pub iterations: usize,
    pub flags: Vec<String>,
}

/// Output of a McKean–Vlasov solve.
#[derive(Debug, Clone)]
pub struct MeanFieldRun {
    pub trajectories: Vec<Trajectory>,
    pub law: LawPath,
    pub report: PicardReport,
}

fn law_of(trajectories: &[Trajectory], times: &[f64]) -> Result<LawPath> {
    let laws = (0..times.len())
        .map(|s| EmpiricalLaw::new(trajectories.iter().map(|tr| tr.x[s].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    LawPath::new(times.to_vec(), laws)
}

fn largest_ratio(distances: &[f64]) -> Option<f64> {
    distances
        .windows(2)
        .filter(|w| w[0] >= 1e-13 && w[1] >= 1e-13)
        .map(|w| w[1] / w[0])
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
}

/// Picard iteration over law paths with `M` particles.
///
/// Each particle keeps its own noise substream across iterations and all
/// particles of one iteration see the law of the previous iteration.
pub fn solve_mckean_vlasov(initial: &[SpectralState], problem: &Problem, config: &SolverConfig) -> Result<MeanFieldRun> {
    if initial.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let times = config.times()?;
    let noises = (0..initial.len())
        .map(|i| problem.noise_path(&times, config.seed, i as u32))
        .collect::<Result<Vec<_>>>()?;
    let weight = config.contraction_weight(&problem.drift);
    let lip = problem.drift.lipschitz();
    let theoretical = (weight > 2.0 * lip).then(|| 2.0 * lip / (weight - 2.0 * lip));
    let mut flags = Vec::new();
    if !(problem.beta.alpha() > 0.0) {
        flags.push(OUTSIDE_THEOREM.to_string());
    }

    let mut law = LawPath::frozen(EmpiricalLaw::new(initial.to_vec())?, times.clone())?;
    let mut distances = Vec::new();
    for _ in 0..config.picard_max.max(1) {
        let prepared: Vec<PreparedDrift<'_>> = times
            .iter()
            .zip(law.laws())
            .map(|(&t, mu)| problem.drift.prepare(t, mu))
            .collect();
        let trajectories = initial
            .par_iter()
            .zip(noises.par_iter())
            .map(|(x0, w)| solve_prepared(x0, problem, w, &prepared, &times, config))
            .collect::<Result<Vec<_>>>()?;
        let next = law_of(&trajectories, &times)?;
        let d = path_distance(&next, &law, weight)?;
        distances.push(d);
        law = next;
        if d < config.tol_law {
            let report = PicardReport {
                contraction_ratio: largest_ratio(&distances),
                theoretical_ratio: theoretical,
                weight,
                iterations: distances.len(),
                distances,
                flags,
            };
            return Ok(MeanFieldRun {
                trajectories,
                law,
                report,
            });
        }
    }
    Err(Error::PicardExhausted { distances })
}

/// One row of a level-refinement study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyRow {
    pub coarse: usize,
    pub fine: usize,
    /// `sup_t ‖Y_N − Y_{2N}‖_{(H¹₀)*}`.
    pub sup_dual: f64,
    /// `∫ ‖Y_N − Y_{2N}‖²_{L²} dt`.
    pub l2_integral: f64,
}

/// Solves the problem produced by `build` at each level and compares
/// consecutive levels on the finer space.
pub fn cauchy_study(
    levels: &[usize],
    config: &SolverConfig,
    build: impl Fn(usize) -> Result<(Problem, SpectralState)>,
) -> Result<Vec<CauchyRow>> {
    let runs = levels
        .iter()
        .map(|&n| {
            let (problem, x0) = build(n)?;
            solve_single(&x0, &problem, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, pair) in runs.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let fine_space = b.y[0].space();
        let diffs: Vec<SpectralState> = a
            .y
            .iter()
            .zip(&b.y)
            .map(|(ya, yb)| Ok(&ya.embed(fine_space)? - yb))
            .collect::<Result<_>>()?;
        let sup_dual = diffs.iter().map(|d| d.norm(Norm::HMinusOne)).fold(0.0, f64::max);
        let l2: Vec<f64> = diffs.iter().map(|d| d.norm_sq(Norm::L2)).collect();
        let l2_integral = a
            .times
            .windows(2)
            .zip(l2.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum();
        rows.push(CauchyRow {
            coarse: levels[i],
            fine: levels[i + 1],
            sup_dual,
            l2_integral,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean_field::DriftSpec;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn linear_problem(n: usize, coef: C) -> Problem {
        let s = SpectralSpace::with_default_grid(1.0, n).unwrap();
        Problem::new(s, MonotoneMap::linear(coef).unwrap())
    }

    #[test]
    fn zero_dt_is_identity() {
        let p = linear_problem(4, c(0.1, 1.0));
        let y = p.space.state_from_fn(|j| c(1.0 / j as f64, 0.5));
        let z = p.space.zero();
        for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
            let out = step(&y, 0.0, &z, &z, &z, &p.beta, scheme, 1e-12, 200).unwrap();
            assert!(out.y.max_abs_diff(&y) < 1e-15);
        }
    }

    #[test]
    fn linear_steps_are_diagonal() {
        let coef = c(0.1, 1.0);
        let p = linear_problem(5, coef);
        let y = p.space.state_from_fn(|j| c(1.0, -0.5 * j as f64));
        let z = p.space.zero();
        let dt = 1e-4;
        let ex = step(&y, dt, &z, &z, &z, &p.beta, Scheme::Explicit, 1e-12, 200).unwrap();
        let im = step(&y, dt, &z, &z, &z, &p.beta, Scheme::SemiImplicit, 1e-12, 200).unwrap();
        assert!(im.iterations <= 3);
        for j in 1..=5 {
            let l = p.space.eigenvalue(j);
            assert!((ex.y.coeff(j) - y.coeff(j) * (1.0 - dt * l * coef)).norm() < 1e-12);
            assert!((im.y.coeff(j) - y.coeff(j) / (1.0 + dt * l * coef)).norm() < 1e-12);
        }
    }

    #[test]
    fn explicit_stability_bound_enforced() {
        let p = linear_problem(8, c(1.0, 0.0));
        let x0 = p.space.mode(1);
        let cfg = SolverConfig::new(0.01, 1e-2).with_scheme(Scheme::Explicit);
        assert!(matches!(solve_single(&x0, &p, &cfg), Err(Error::Cfl { .. })));
        let pp = Problem::new(p.space.clone(), MonotoneMap::power_phase(2.0).unwrap());
        let cfg = SolverConfig::new(1e-6, 1e-6).with_scheme(Scheme::Explicit);
        assert!(matches!(solve_single(&x0, &pp, &cfg), Err(Error::Cfl { .. })));
    }

    #[test]
    fn bad_time_grids_rejected() {
        let p = linear_problem(2, c(1.0, 0.0));
        let x0 = p.space.mode(1);
        assert!(solve_single(&x0, &p, &SolverConfig::new(1.0, 0.0)).is_err());
        assert!(solve_single(&x0, &p, &SolverConfig::new(1.0, 0.3)).is_err());
    }

    #[test]
    fn exact_linear_decay() {
        let coef = c(0.1, 1.0);
        let p = linear_problem(8, coef);
        let x0 = p.space.mode(1);
        let tr = solve_single(&x0, &p, &SolverConfig::new(0.1, 1e-4)).unwrap();
        let l1 = p.space.eigenvalue(1);
        let exact = (-coef * l1 * 0.1).exp();
        let got = tr.final_state().coeff(1);
        assert!(((got - exact).norm() / exact.norm()) <= 1e-3);
        assert!((got.norm() - 0.90606).abs() / 0.90606 <= 1e-3);
        assert!(tr.fitted_c.is_finite());
        assert!(tr.flags.is_empty());
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = linear_problem(4, c(0.1, 1.0));
        let tr = solve_single(&p.space.zero(), &p, &SolverConfig::new(0.01, 1e-3)).unwrap();
        assert!(tr.x.iter().all(|x| x.norm(Norm::L2) == 0.0));
        assert_eq!(tr.fitted_c, 0.0);
    }

    fn smooth_initial(space: &Arc<SpectralSpace>) -> SpectralState {
        space.state_from_fn(|j| c((j as f64).powi(-3), 0.5 * (j as f64).powi(-3)))
    }

    #[test]
    fn strictly_monotone_dissipation() {
        let s = SpectralSpace::with_default_grid(1.0, 8).unwrap();
        let beta = MonotoneMap::strictified(MonotoneMap::power_phase(2.0).unwrap(), 0.5).unwrap();
        let p = Problem::new(s.clone(), beta);
        let x0 = smooth_initial(&s).scale(c(3.0, 0.0));
        let tr = solve_single(&x0, &p, &SolverConfig::new(0.02, 1e-3)).unwrap();
        for w in tr.diagnostics.windows(2) {
            assert!(w[1].y_dual <= w[0].y_dual * (1.0 + 1e-12));
        }
        assert_eq!(tr.fitted_c, 0.0);
        // against a tiny-step reference
        let fine = solve_single(&x0, &p, &SolverConfig::new(0.02, 1e-5)).unwrap();
        let rel = tr.final_state().distance(fine.final_state(), Norm::HMinusOne) / fine.final_state().norm(Norm::HMinusOne);
        assert!(rel < 5e-2, "{rel}");
        assert!(tr.diagnostics.last().unwrap().beta_h1.is_finite());
    }

    #[test]
    fn inner_tolerance_changes_little() {
        let s = SpectralSpace::with_default_grid(1.0, 8).unwrap();
        let beta = MonotoneMap::strictified(MonotoneMap::power_phase(2.0).unwrap(), 0.5).unwrap();
        let p = Problem::new(s.clone(), beta);
        let x0 = smooth_initial(&s);
        let mut cfg = SolverConfig::new(0.01, 1e-3);
        let a = solve_single(&x0, &p, &cfg).unwrap();
        cfg.tol_inner = 1e-12;
        let b = solve_single(&x0, &p, &cfg).unwrap();
        let worst = a.x.iter().zip(&b.x).map(|(u, v)| u.max_abs_diff(v)).fold(0.0, f64::max);
        assert!(worst <= 10.0 * 1e-10 * a.steps() as f64);
    }

    #[test]
    fn newton_fallback_handles_stiff_rotation() {
        // large dt·λ with a rotating nonlinearity defeats a real shift
        let s = SpectralSpace::with_default_grid(1.0, 12).unwrap();
        let beta = MonotoneMap::strictified(MonotoneMap::power_phase(3.0).unwrap(), 0.1).unwrap();
        let p = Problem::new(s.clone(), beta);
        let x0 = smooth_initial(&s).scale(c(4.0, 0.0));
        let tr = solve_single(&x0, &p, &SolverConfig::new(0.05, 1e-2)).unwrap();
        for w in tr.diagnostics.windows(2) {
            assert!(w[1].y_dual <= w[0].y_dual * (1.0 + 1e-10));
        }
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let s = SpectralSpace::with_default_grid(1.0, 6).unwrap();
        let p = Problem::new(s.clone(), MonotoneMap::linear(c(0.5, 1.0)).unwrap())
            .with_noise(NoiseSpec::power_law(1.0, 3.0, 0.3, 6).unwrap());
        let x0 = smooth_initial(&s);
        let mut cfg = SolverConfig::new(0.02, 1e-3);
        cfg.seed = 17;
        let a = solve_single(&x0, &p, &cfg).unwrap();
        let b = solve_single(&x0, &p, &cfg).unwrap();
        assert_eq!(a.x, b.x);
        assert!(!a.deterministic);
        assert!(a.fitted_c.is_finite());
    }

    #[test]
    fn law_free_drift_stops_after_second_iteration() {
        let s = SpectralSpace::with_default_grid(1.0, 4).unwrap();
        let drift = DriftSpec::linear_in_mean(&s, c(0.3, 0.0), c(0.0, 0.0)).unwrap();
        let p = Problem::new(s.clone(), MonotoneMap::linear(c(1.0, 0.5)).unwrap())
            .with_drift(drift)
            .with_noise(NoiseSpec::power_law(1.0, 3.0, 0.2, 4).unwrap());
        let init: Vec<_> = (0..4).map(|_| s.mode(1)).collect();
        let run = solve_mckean_vlasov(&init, &p, &SolverConfig::new(0.02, 1e-3)).unwrap();
        assert_eq!(run.report.distances.len(), 2);
        assert_eq!(run.report.distances[1], 0.0);
    }

    #[test]
    fn synchronized_mean_field_matches_scalar_ode() {
        let coef = c(0.2, 1.0);
        let b = c(0.4, 0.0);
        let s = SpectralSpace::with_default_grid(1.0, 4).unwrap();
        let drift = DriftSpec::linear_in_mean(&s, c(0.0, 0.0), b).unwrap();
        let p = Problem::new(s.clone(), MonotoneMap::linear(coef).unwrap()).with_drift(drift);
        let x0 = s.state_from_fn(|j| c(1.0 / j as f64, 0.0));
        let init = vec![x0.clone(); 3];
        let mut cfg = SolverConfig::new(0.05, 1e-5);
        cfg.tol_law = 1e-12;
        let run = solve_mckean_vlasov(&init, &p, &cfg).unwrap();
        for tr in &run.trajectories[1..] {
            assert_eq!(tr.x, run.trajectories[0].x);
        }
        // synchronized particles see their own value as the mean, so each
        // mode follows y ← (1 + dt b) y / (1 + dt λ c)
        let end = run.trajectories[0].final_state();
        let dt = 1e-5;
        for j in 1..=4 {
            let factor = (1.0 + dt * b) / (1.0 + dt * s.eigenvalue(j) * coef);
            let exact = x0.coeff(j) * factor.powi(5000);
            assert!((end.coeff(j) - exact).norm() <= 1e-9 * exact.norm(), "mode {j}");
        }
    }

    #[test]
    fn picard_exhaustion_reports_history() {
        let s = SpectralSpace::with_default_grid(1.0, 4).unwrap();
        let drift = DriftSpec::linear_in_mean(&s, c(0.0, 0.0), c(0.5, 0.0)).unwrap();
        let p = Problem::new(s.clone(), MonotoneMap::linear(c(1.0, 0.0)).unwrap()).with_drift(drift);
        let mut cfg = SolverConfig::new(0.05, 1e-3);
        cfg.picard_max = 2;
        cfg.tol_law = 1e-300;
        match solve_mckean_vlasov(&[s.mode(1)], &p, &cfg) {
            Err(Error::PicardExhausted { distances }) => assert_eq!(distances.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cauchy_levels_coincide_for_resolved_linear_data() {
        let cfg = SolverConfig::new(0.01, 1e-3);
        let rows = cauchy_study(&[4, 8, 16], &cfg, |n| {
            let s = SpectralSpace::with_default_grid(1.0, n)?;
            let x0 = s.state_from_fn(|j| if j <= 3 { c(1.0, j as f64) } else { c(0.0, 0.0) });
            Ok((Problem::new(s, MonotoneMap::linear(c(0.1, 1.0))?), x0))
        })
        .unwrap();
        for r in rows {
            assert!(r.sup_dual < 1e-12 && r.l2_integral < 1e-12);
        }
        let zero = cauchy_study(&[4, 8], &cfg, |n| {
            let s = SpectralSpace::with_default_grid(1.0, n)?;
            let z = s.zero();
            Ok((Problem::new(s, MonotoneMap::power_phase(1.0)?), z))
        })
        .unwrap();
        assert_eq!(zero[0].sup_dual, 0.0);
    }
}
