//! One step of the wave-dependent path-integral update
//!
//! ```text
//! ψ′(x) = (1/2√ε) ∫_{−√ε}^{√ε} exp(−(i/ħ) β′((ψ(x+ξ)+ψ(x))/2) (ψ(x+ξ)−ψ(x))) ψ(x+ξ) dξ
//! ```
//!
//! and consistency checks of `ψ′ ≈ ψ + ε ∂_t ψ` against the limiting PDE.
//! With `β(e^φ) = β⁰(φ)` and `β̃ = (−(i/ħ)β⁰ + Id)/6`, the limit reads
//! `∂_t φ = Δβ̃(φ) + 6 (∇β̃(φ))²` for `φ = log ψ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C = Complex64;

/// Coefficient `γ` of the squared-gradient term in the limiting equation.
pub const GAMMA: f64 = 6.0;

/// A complex wave sampled on a uniform grid `x_i = x0 + i h`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveGrid {
    x0: f64,
    h: f64,
    values: Vec<C>,
}

impl WaveGrid {
    pub fn new(x0: f64, h: f64, values: Vec<C>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() || !x0.is_finite() {
            return Err(Error::Feynman(format!("grid spacing must be positive (got {h})")));
        }
        if values.len() < 6 {
            return Err(Error::Feynman("grid needs at least 6 points".into()));
        }
        Ok(Self { x0, h, values })
    }

    /// Samples `f` on `a, a + h, …` up to `b` (inclusive within rounding).
    pub fn from_fn(a: f64, b: f64, h: f64, f: impl Fn(f64) -> C) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Feynman("empty interval".into()));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize + 1;
        Self::new(a, h, (0..n).map(|i| f(a + i as f64 * h)).collect())
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[C] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn start(&self) -> f64 {
        self.x0
    }

    pub fn end(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    /// Quintic Lagrange interpolation at `x` (needs three nodes on each side).
    fn interpolate(&self, x: f64) -> C {
        let u = (x - self.x0) / self.h;
        let k = u.floor() as isize;
        let base = (k - 2).clamp(0, self.values.len() as isize - 6) as usize;
        let mut out = C::new(0.0, 0.0);
        for a in 0..6 {
            let mut w = 1.0;
            for b in 0..6 {
                if a != b {
                    w *= (u - (base + b) as f64) / (a as f64 - b as f64);
                }
            }
            out += self.values[base + a] * w;
        }
        out
    }

    /// Index range `[lo, hi)` of nodes within `[a, b]`.
    fn range(&self, a: f64, b: f64) -> (usize, usize) {
        let lo = ((a - self.x0) / self.h - 1e-9).ceil().max(0.0) as usize;
        let hi = (((b - self.x0) / self.h + 1e-9).floor() as usize + 1).min(self.values.len());
        (lo, hi.max(lo))
    }
}

/// The derivative `β′` of the action's nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSpec {
    /// `β′ ≡ 0`: the free uniform kernel.
    Free,
    /// `β(z) = c z`, so `β′ ≡ c`.
    Linear { c: C },
    /// `β̃(z) = k z`, i.e. `β(ψ) = iħ(6k − 1) log ψ` and `β′(ψ) = iħ(6k − 1)/ψ`.
    LogLinear { k: C },
}

impl ActionSpec {
    pub fn derivative(&self, z: C, hbar: f64) -> C {
        match *self {
            Self::Free => C::new(0.0, 0.0),
            Self::Linear { c } => c,
            Self::LogLinear { k } => C::new(0.0, hbar) * (k * 6.0 - 1.0) / z,
        }
    }

    pub fn second_derivative(&self, z: C, hbar: f64) -> C {
        match *self {
            Self::Free | Self::Linear { .. } => C::new(0.0, 0.0),
            Self::LogLinear { k } => -C::new(0.0, hbar) * (k * 6.0 - 1.0) / (z * z),
        }
    }
}

/// Step size, Planck constant, action and quadrature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeynmanParams {
    pub hbar: f64,
    pub eps: f64,
    pub action: ActionSpec,
    pub order: usize,
}

impl FeynmanParams {
    pub fn new(eps: f64, action: ActionSpec) -> Self {
        Self {
            hbar: 1.0,
            eps,
            action,
            order: 16,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Feynman(format!("ε must be positive (got {})", self.eps)));
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::Feynman(format!("ħ must be positive (got {})", self.hbar)));
        }
        if self.order == 0 {
            return Err(Error::Feynman("quadrature order must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Applies one update step. The result covers the nodes whose whole
/// `ξ`-support (plus interpolation stencil) lies inside the input grid.
pub fn propagate_step(psi: &WaveGrid, params: &FeynmanParams) -> Result<WaveGrid> {
    params.validate()?;
    let root = params.eps.sqrt();
    let required = root / 8.0;
    if psi.h > required * (1.0 + 1e-12) {
        return Err(Error::CoarseGrid {
            spacing: psi.h,
            required,
        });
    }
    let margin = root + 3.0 * psi.h;
    let (lo, hi) = psi.range(psi.start() + margin, psi.end() - margin);
    if hi <= lo {
        return Err(Error::Feynman(format!(
            "grid [{}, {}] too short for support ±{root}",
            psi.start(),
            psi.end()
        )));
    }
    let (nodes, weights) = gauss_legendre(params.order);
    let i_over_hbar = C::new(0.0, 1.0 / params.hbar);
    let values: Vec<C> = (lo..hi)
        .into_par_iter()
        .map(|i| {
            let x = psi.x(i);
            let p = psi.values[i];
            nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| {
                    let q = psi.interpolate(x + root * t);
                    let slope = params.action.derivative((q + p) * 0.5, params.hbar);
                    (-i_over_hbar * slope * (q - p)).exp() * q * (0.5 * w)
                })
                .sum()
        })
        .collect();
    WaveGrid::new(psi.x(lo), psi.h, values)
}

/// Central finite differences of 8th order for first and second derivatives.
fn derivatives(psi: &WaveGrid, i: usize, stride: usize) -> Result<(C, C)> {
    const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    const D2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    if i < 4 * stride || i + 4 * stride >= psi.len() {
        return Err(Error::Feynman("derivative stencil leaves the grid".into()));
    }
    let d = stride as f64 * psi.h;
    let v = &psi.values;
    let mut first = C::new(0.0, 0.0);
    let mut second = v[i] * D2[0];
    for k in 1..=4 {
        let (a, b) = (v[i + k * stride], v[i - k * stride]);
        first += (a - b) * D1[k - 1];
        second += (a + b) * D2[k];
    }
    Ok((first / d, second / (d * d)))
}

/// Window, derivative stride and quadrature order for consistency checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub window: (f64, f64),
    /// Finite-difference stride, rounded to a whole number of grid steps.
    pub stride: f64,
    pub hbar: f64,
    pub order: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            window: (-1.0, 1.0),
            stride: 0.005,
            hbar: 1.0,
            order: 16,
        }
    }
}

impl CheckOptions {
    fn stride_steps(&self, h: f64) -> usize {
        ((self.stride / h).round() as usize).max(1)
    }
}

/// `ε ∂_t ψ` predicted by the ψ-form of the limit,
/// `(1/6)[ψ(−(i/ħ)Δβ(ψ) − (∇β(ψ))²/ħ²) + Δψ − 2(i/ħ)∇β(ψ)∇ψ]`.
fn rhs_psi(action: &ActionSpec, p: C, d1: C, d2: C, hbar: f64) -> C {
    let b1 = action.derivative(p, hbar);
    let b2 = action.second_derivative(p, hbar);
    let grad = b1 * d1;
    let lap = b2 * d1 * d1 + b1 * d2;
    let i = C::new(0.0, 1.0 / hbar);
    (p * (-i * lap - grad * grad / (hbar * hbar)) + d2 - i * grad * d1 * 2.0) / 6.0
}

/// The φ-form `Δβ̃(φ) + γ(∇β̃(φ))²` for `β̃ = k z`, multiplied by `ψ`.
fn rhs_log(k: C, p: C, d1: C, d2: C) -> C {
    let phi1 = d1 / p;
    let phi2 = d2 / p - phi1 * phi1;
    p * (k * phi2 + GAMMA * k * k * phi1 * phi1)
}

/// Which form of the limiting equation to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitForm {
    /// Equation for `ψ`.
    Wave,
    /// Equation for `φ = log ψ` (only for log-linear actions).
    Log,
}

/// `max_{x ∈ window} |ψ′ − ψ − ε R|` for one `ε`.
pub fn one_step_residual(psi: &WaveGrid, eps: f64, action: ActionSpec, form: LimitForm, opts: &CheckOptions) -> Result<f64> {
    let mut params = FeynmanParams::new(eps, action);
    params.hbar = opts.hbar;
    params.order = opts.order;
    let next = propagate_step(psi, &params)?;
    let (a, b) = opts.window;
    if a < next.start() - 1e-12 || b > next.end() + 1e-12 {
        return Err(Error::Feynman(format!(
            "window [{a}, {b}] exceeds the propagated interior [{}, {}]",
            next.start(),
            next.end()
        )));
    }
    let stride = opts.stride_steps(psi.h);
    let (lo, hi) = psi.range(a, b);
    let offset = ((next.start() - psi.start()) / psi.h).round() as usize;
    let scale = psi.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in lo..hi {
        let p = psi.values[i];
        // β′ = iħ(6k − 1)/ψ needs ψ ≠ 0
        if matches!(action, ActionSpec::LogLinear { .. }) && p.norm() <= 1e-8 * scale {
            return Err(Error::LogBranch);
        }
        let (d1, d2) = derivatives(psi, i, stride)?;
        let rhs = match (form, action) {
            (LimitForm::Wave, _) => rhs_psi(&action, p, d1, d2, opts.hbar),
            (LimitForm::Log, ActionSpec::LogLinear { k }) => rhs_log(k, p, d1, d2),
            (LimitForm::Log, _) => {
                return Err(Error::Feynman("log form needs a log-linear action".into()));
            }
        };
        worst = worst.max((next.values[i - offset] - p - rhs * eps).norm());
    }
    Ok(worst)
}

/// Residual per `ε` and the least-squares slope of `log residual` against `log ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub eps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
}

impl SlopeReport {
    /// Smallest ratio `residual(ε_i) / residual(ε_{i+1})`.
    pub fn min_decay_factor(&self) -> f64 {
        self.residuals
            .windows(2)
            .map(|w| w[0] / w[1])
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn residual_slope(psi: &WaveGrid, eps: &[f64], action: ActionSpec, form: LimitForm, opts: &CheckOptions) -> Result<SlopeReport> {
    if eps.len() < 3 || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Feynman("need at least 3 strictly decreasing ε values".into()));
    }
    let residuals = eps
        .iter()
        .map(|&e| one_step_residual(psi, e, action, form, opts))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(SlopeReport {
        eps: eps.to_vec(),
        residuals,
        slope: sxy / sxx,
    })
}

/// For `β̃ = iκ z`, compares `iκγ Φ (iκ φ″ − γκ² φ′²)` with `iκ ΔΦ` where
/// `Φ = e^{iκγφ}/(κγ)`, `φ = log ψ` (principal branch), both on the window.
/// Returns the largest pointwise gap.
pub fn phase_transform_gap(psi: &WaveGrid, kappa: f64, opts: &CheckOptions) -> Result<f64> {
    let kg = kappa * GAMMA;
    let scale = psi.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut phi = Vec::with_capacity(psi.len());
    for (i, p) in psi.values.iter().enumerate() {
        if p.norm() <= 1e-8 * scale {
            return Err(Error::LogBranch);
        }
        let l = p.ln();
        if i > 0 {
            let prev: C = phi[i - 1];
            if (l.im - prev.im).abs() > PI {
                return Err(Error::LogBranch);
            }
        }
        phi.push(l);
    }
    let phi_grid = WaveGrid::new(psi.x0, psi.h, phi)?;
    let big = WaveGrid::new(
        psi.x0,
        psi.h,
        phi_grid
            .values
            .iter()
            .map(|f| (C::new(0.0, kg) * f).exp() / kg)
            .collect(),
    )?;
    let stride = opts.stride_steps(psi.h);
    let (lo, hi) = psi.range(opts.window.0, opts.window.1);
    let ik = C::new(0.0, kappa);
    let mut worst: f64 = 0.0;
    for i in lo..hi {
        let (f1, f2) = derivatives(&phi_grid, i, stride)?;
        let (_, b2) = derivatives(&big, i, stride)?;
        let via_log = ik * GAMMA * big.values[i] * (ik * f2 - GAMMA * kappa * kappa * f1 * f1);
        let direct = ik * b2;
        worst = worst.max((via_log - direct).norm());
    }
    Ok(worst)
}
