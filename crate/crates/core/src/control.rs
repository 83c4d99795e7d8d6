//! Variational certificate for deterministic runs.
//!
//! For `g = 0` and a law-free drift, a path `y` solves the equation iff the
//! control `v(t) = ∫₀ᵗ β(y)` makes
//!
//! ```text
//! J(y, v) = ∫₀ᵀ ∫_O F_β(y, ∂_t v) − Re⟨y, ∂_t v⟩ dξ dt
//! ```
//!
//! vanish while `Δv(t) = y(t) − y₀ − ∫₀ᵗ f(y)` holds. `F_β` is the Fitzpatrick
//! function of `β`, so the integrand is pointwise nonnegative.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mean_field::{DriftSpec, EmpiricalLaw};
use crate::monotone::MonotoneMap;
use crate::solver::{beta_projection, solve_single, Problem, Scheme, SolverConfig, Trajectory};
use crate::space::{Norm, SpectralState};

/// Time quadrature used for `v = ∫β(y)` and `∫f(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlRule {
    Trapezoid,
    /// The rule implied by the time stepper: right endpoints for `β` and left
    /// endpoints for `f` (semi-implicit), left endpoints for both (explicit).
    Matching(Scheme),
}

impl ControlRule {
    /// Weights `(w_left, w_right)` for `β` and for `f` on one interval.
    fn weights(self) -> ([f64; 2], [f64; 2]) {
        match self {
            Self::Trapezoid => ([0.5, 0.5], [0.5, 0.5]),
            Self::Matching(Scheme::SemiImplicit) => ([0.0, 1.0], [1.0, 0.0]),
            Self::Matching(Scheme::Explicit) => ([1.0, 0.0], [1.0, 0.0]),
        }
    }
}

fn cumulative(times: &[f64], values: &[SpectralState], w: [f64; 2]) -> Vec<SpectralState> {
    let mut acc = values[0].space().zero();
    let mut out = vec![acc.clone()];
    for s in 0..times.len() - 1 {
        let dt = times[s + 1] - times[s];
        acc.axpy((dt * w[0]).into(), &values[s]);
        acc.axpy((dt * w[1]).into(), &values[s + 1]);
        out.push(acc.clone());
    }
    out
}

/// Second-order difference quotients at the nodes (one-sided at the ends).
fn derivative(times: &[f64], v: &[SpectralState]) -> Vec<SpectralState> {
    let n = v.len();
    let space = v[0].space();
    let combo = |terms: &[(usize, f64)]| {
        space.state_from_fn(|j| terms.iter().map(|&(k, w)| v[k].coeffs()[j - 1] * w).sum())
    };
    (0..n)
        .map(|s| {
            if n == 2 {
                let h = times[1] - times[0];
                combo(&[(1, 1.0 / h), (0, -1.0 / h)])
            } else if s == 0 {
                let h = 2.0 * (times[1] - times[0]);
                combo(&[(0, -3.0 / h), (1, 4.0 / h), (2, -1.0 / h)])
            } else if s == n - 1 {
                let h = 2.0 * (times[n - 1] - times[n - 2]);
                combo(&[(n - 1, 3.0 / h), (n - 2, -4.0 / h), (n - 3, 1.0 / h)])
            } else {
                let h = times[s + 1] - times[s - 1];
                combo(&[(s + 1, 1.0 / h), (s - 1, -1.0 / h)])
            }
        })
        .collect()
}

/// The control `v` with `v(0) = 0` and its time derivative at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    times: Vec<f64>,
    v: Vec<SpectralState>,
    dv: Vec<SpectralState>,
    rule: ControlRule,
}

impl ControlPath {
    /// Builds a control from node values; `v[0]` must vanish.
    pub fn from_values(times: Vec<f64>, v: Vec<SpectralState>, rule: ControlRule) -> Result<Self> {
        if times.len() != v.len() || times.len() < 2 {
            return Err(Error::GridMismatch);
        }
        if v[0].norm(Norm::L2) != 0.0 {
            return Err(Error::Control("control must start at v(0) = 0".into()));
        }
        let dv = derivative(&times, &v);
        Ok(Self { times, v, dv, rule })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[SpectralState] {
        &self.v
    }

    pub fn rates(&self) -> &[SpectralState] {
        &self.dv
    }

    pub fn rule(&self) -> ControlRule {
        self.rule
    }

    /// `max_s Σ_j λ_j |v_j(t_s)|²`.
    pub fn max_h1_sq(&self) -> f64 {
        self.v.iter().map(|v| v.norm_sq(Norm::HOne)).fold(0.0, f64::max)
    }

    /// Adds `profile(t_s)·direction` to every node and recomputes `∂_t v`.
    pub fn perturbed(&self, direction: &SpectralState, profile: impl Fn(f64) -> f64) -> Result<Self> {
        let v = self
            .times
            .iter()
            .zip(&self.v)
            .map(|(&t, v)| v + &(direction * profile(t)))
            .collect();
        Self::from_values(self.times.clone(), v, self.rule)
    }
}

/// `v(t_s) = ∫₀^{t_s} Πβ(X)` for a deterministic trajectory.
pub fn assemble_control(trajectory: &Trajectory, beta: &MonotoneMap, rule: ControlRule) -> Result<ControlPath> {
    if !trajectory.deterministic {
        return Err(Error::Control("stochastic trajectory supplied".into()));
    }
    let b: Vec<SpectralState> = trajectory.x.iter().map(|x| beta_projection(beta, x)).collect();
    let (wb, _) = rule.weights();
    let v = cumulative(&trajectory.times, &b, wb);
    ControlPath::from_values(trajectory.times.clone(), v, rule)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of evaluating the cost on a `(y, v)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    /// The cost `J` (`+∞` when some pointwise Fitzpatrick value is `+∞`).
    #[serde(rename = "J")]
    pub cost: f64,
    /// `∫ ‖y‖²_{L²} + ‖∂_t v‖²_{L²} dt`.
    pub normalizer: f64,
    /// `sup_t ‖Δv − y + y₀ + ∫₀ᵗ f(y)‖_{(H¹₀)*}`.
    pub residual: f64,
    pub cost_threshold: f64,
    pub residual_threshold: f64,
    pub verdict: Verdict,
}

impl Certificate {
    pub fn relative_cost(&self) -> f64 {
        if self.cost == 0.0 {
            0.0
        } else {
            self.cost / self.normalizer
        }
    }
}

/// Default threshold on `J / normalizer`.
pub const COST_THRESHOLD: f64 = 1e-3;
/// Default residual threshold per unit of `1 + ‖y₀‖_{(H¹₀)*}`.
pub const RESIDUAL_THRESHOLD: f64 = 1e-6;

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    (0..n)
        .map(|s| {
            let left = if s > 0 { times[s] - times[s - 1] } else { 0.0 };
            let right = if s + 1 < n { times[s + 1] - times[s] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn check_paths(y: &[SpectralState], control: &ControlPath) -> Result<()> {
    if y.len() != control.times.len() {
        return Err(Error::GridMismatch);
    }
    if !y[0].space().same_as(control.v[0].space()) {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

fn law_free_forcing(drift: &DriftSpec, times: &[f64], y: &[SpectralState]) -> Result<Vec<SpectralState>> {
    if drift.depends_on_law() {
        return Err(Error::Control("drift depends on the law".into()));
    }
    let dummy = EmpiricalLaw::dirac(drift.space().zero());
    Ok(times
        .iter()
        .zip(y)
        .map(|(&t, y)| drift.evaluate(t, y, &dummy))
        .collect())
}

/// `∫∫ F_β(y, ∂_t v) − Re⟨y, ∂_t v⟩` by trapezoid in time and grid quadrature in space.
pub fn fitzpatrick_cost(y: &[SpectralState], control: &ControlPath, beta: &MonotoneMap) -> Result<f64> {
    check_paths(y, control)?;
    let h = y[0].space().quadrature_weight();
    let wt = trapezoid_weights(&control.times);
    let per_node: Vec<f64> = y
        .par_iter()
        .zip(control.dv.par_iter())
        .map(|(y, dv)| {
            y.to_grid()
                .into_iter()
                .zip(dv.to_grid())
                .map(|(z1, z2)| beta.fitzpatrick(z1, z2).value - (z1.re * z2.re + z1.im * z2.im))
                .sum::<f64>()
                * h
        })
        .collect();
    Ok(per_node.iter().zip(&wt).map(|(v, w)| v * w).sum())
}

/// Closed form of the same cost for `β(z) = cz` with `Re c > 0`:
/// the quadrature of `|∂_t v − c y|² / (4 Re c)`.
pub fn linear_quadratic_cost(y: &[SpectralState], control: &ControlPath, c: num_complex::Complex64) -> Result<f64> {
    check_paths(y, control)?;
    let h = y[0].space().quadrature_weight();
    let wt = trapezoid_weights(&control.times);
    Ok(y.iter()
        .zip(&control.dv)
        .zip(&wt)
        .map(|((y, dv), w)| {
            let s: f64 = y
                .to_grid()
                .into_iter()
                .zip(dv.to_grid())
                .map(|(z1, z2)| (z2 - c * z1).norm_sqr())
                .sum();
            w * s * h / (4.0 * c.re)
        })
        .sum())
}

/// `sup_t ‖Δv(t) − y(t) + y₀ + ∫₀ᵗ f(y)‖_{(H¹₀)*}`.
pub fn constraint_residual(y: &[SpectralState], control: &ControlPath, drift: &DriftSpec) -> Result<f64> {
    check_paths(y, control)?;
    let forcing = law_free_forcing(drift, &control.times, y)?;
    let (_, wf) = control.rule.weights();
    let integral = cumulative(&control.times, &forcing, wf);
    let lam = y[0].space().eigenvalues();
    let mut worst: f64 = 0.0;
    for s in 0..y.len() {
        let r = y[0].space().state_from_fn(|j| {
            let j0 = j - 1;
            -lam[j0] * control.v[s].coeffs()[j0] - y[s].coeffs()[j0]
                + y[0].coeffs()[j0]
                + integral[s].coeffs()[j0]
        });
        worst = worst.max(r.norm(Norm::HMinusOne));
    }
    Ok(worst)
}

/// The cost in its original form
/// `∫∫ F_β(y, ∂_t v) + Re⟨v, f(y)⟩ + ½‖v(T)‖²_{H¹₀} − Re⟨v(T), y₀ + ∫₀ᵀ f(y)⟩`,
/// equal to [`fitzpatrick_cost`] when the state constraint holds.
pub fn expanded_cost(y: &[SpectralState], control: &ControlPath, beta: &MonotoneMap, drift: &DriftSpec) -> Result<f64> {
    check_paths(y, control)?;
    let h = y[0].space().quadrature_weight();
    let wt = trapezoid_weights(&control.times);
    let forcing = law_free_forcing(drift, &control.times, y)?;
    let mut total = 0.0;
    for s in 0..y.len() {
        let f: f64 = y[s]
            .to_grid()
            .into_iter()
            .zip(control.dv[s].to_grid())
            .map(|(z1, z2)| beta.fitzpatrick(z1, z2).value)
            .sum::<f64>()
            * h;
        total += wt[s] * (f + control.v[s].inner(&forcing[s], Norm::L2).re);
    }
    let (_, wf) = control.rule.weights();
    let integral = cumulative(&control.times, &forcing, wf);
    let v_end = control.v.last().expect("nonempty control");
    let target = &y[0] + integral.last().expect("nonempty integral");
    Ok(total + 0.5 * v_end.norm_sq(Norm::HOne) - v_end.inner(&target, Norm::L2).re)
}

/// Cost, normalizer, residual and verdict for a `(y, v)` pair.
pub fn evaluate_cost(y: &[SpectralState], control: &ControlPath, beta: &MonotoneMap, drift: &DriftSpec) -> Result<Certificate> {
    let cost = fitzpatrick_cost(y, control, beta)?;
    let residual = constraint_residual(y, control, drift)?;
    let wt = trapezoid_weights(&control.times);
    let normalizer = y
        .iter()
        .zip(&control.dv)
        .zip(&wt)
        .map(|((y, dv), w)| w * (y.norm_sq(Norm::L2) + dv.norm_sq(Norm::L2)))
        .sum();
    let residual_threshold = RESIDUAL_THRESHOLD * (1.0 + y[0].norm(Norm::HMinusOne));
    let mut cert = Certificate {
        cost,
        normalizer,
        residual,
        cost_threshold: COST_THRESHOLD,
        residual_threshold,
        verdict: Verdict::Fail,
    };
    if cert.relative_cost() < COST_THRESHOLD && residual < residual_threshold {
        cert.verdict = Verdict::Pass;
    }
    Ok(cert)
}

/// Full certificate run: solve, assemble the control, evaluate the cost.
#[derive(Debug, Clone)]
pub struct CertifiedRun {
    pub trajectory: Trajectory,
    pub control: ControlPath,
    pub certificate: Certificate,
}

pub fn certify(y0: &SpectralState, problem: &Problem, config: &SolverConfig) -> Result<CertifiedRun> {
    if !problem.is_deterministic() {
        return Err(Error::Control("problem has nonzero noise".into()));
    }
    if problem.drift.depends_on_law() {
        return Err(Error::Control("drift depends on the law".into()));
    }
    let trajectory = solve_single(y0, problem, config)?;
    let control = assemble_control(&trajectory, &problem.beta, ControlRule::Matching(config.scheme))?;
    let certificate = evaluate_cost(&trajectory.x, &control, &problem.beta, &problem.drift)?;
    Ok(CertifiedRun {
        trajectory,
        control,
        certificate,
    })
}
