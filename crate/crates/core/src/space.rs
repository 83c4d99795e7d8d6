//! Dirichlet eigenbasis on an interval and the states that live in it.
//!
//! Every state is stored by its coefficients `a_j` against the
//! L²-orthonormal sine basis `ẽ_j(ξ) = √(2/L) sin(jπξ/L)`. The three norms of
//! the Gelfand triple are then diagonal weight sums:
//!
//! ```text
//! ‖x‖²_{L²}      = Σ |a_j|²
//! ‖x‖²_{(H¹₀)*}  = Σ |a_j|² / λ_j
//! ‖x‖²_{H¹₀}     = Σ λ_j |a_j|²
//! ```
//!
//! with `λ_j = (jπ/L)²`. Pointwise nonlinearities are evaluated on a uniform
//! collocation grid of `G ≥ 2N` interior nodes; synthesis and analysis between
//! the two representations form an exact type-I discrete sine transform pair.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which norm of the Gelfand triple to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L2,
    HMinusOne,
    HOne,
}

/// Power of the Dirichlet Laplacian applied by [`SpectralState::apply_laplacian`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianPower {
    /// `Δ`: `a_j ↦ −λ_j a_j`.
    Direct,
    /// Inverse of `Δ`: `a_j ↦ −a_j / λ_j`.
    Inverse,
}

/// Truncated Dirichlet eigenbasis on `(0, L)` with its collocation grid.
#[derive(Clone)]
pub struct SpectralSpace {
    length: f64,
    modes: usize,
    grid: usize,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    // row-major modes x grid table of ẽ_j(ξ_m)
    basis: Vec<f64>,
    spacing: f64,
}

impl fmt::Debug for SpectralSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSpace")
            .field("length", &self.length)
            .field("modes", &self.modes)
            .field("grid", &self.grid)
            .finish()
    }
}

impl PartialEq for SpectralSpace {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.modes == other.modes && self.grid == other.grid
    }
}

impl SpectralSpace {
    /// Builds the space for `O = (0, length)` truncated at `modes` with a
    /// collocation grid of `grid` interior points.
    pub fn new(length: f64, modes: usize, grid: usize) -> Result<Arc<Self>> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidSpace {
                field: "length",
                reason: format!("must be positive and finite (got {length})"),
            });
        }
        if modes == 0 {
            return Err(Error::InvalidSpace {
                field: "truncation",
                reason: "must be ≥ 1".into(),
            });
        }
        if grid < 2 * modes {
            return Err(Error::InvalidSpace {
                field: "grid",
                reason: format!("must be ≥ 2N = {} (got {grid})", 2 * modes),
            });
        }
        let eigenvalues = (1..=modes)
            .map(|j| (j as f64 * PI / length).powi(2))
            .collect();
        let spacing = length / (grid + 1) as f64;
        let nodes: Vec<f64> = (1..=grid).map(|m| m as f64 * spacing).collect();
        let norm = (2.0 / length).sqrt();
        let mut basis = Vec::with_capacity(modes * grid);
        for j in 1..=modes {
            for m in 1..=grid {
                // integer argument keeps the table exactly antisymmetric
                let arg = PI * ((j * m) % (2 * (grid + 1))) as f64 / (grid + 1) as f64;
                basis.push(norm * arg.sin());
            }
        }
        Ok(Arc::new(Self {
            length,
            modes,
            grid,
            eigenvalues,
            nodes,
            basis,
            spacing,
        }))
    }

    /// Same as [`SpectralSpace::new`] with the default grid `G = 8N`.
    pub fn with_default_grid(length: f64, modes: usize) -> Result<Arc<Self>> {
        Self::new(length, modes, 8 * modes.max(1))
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `λ_j` for the 1-based mode index `j`.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoid weight of the uniform interior grid (the boundary values vanish).
    pub fn quadrature_weight(&self) -> f64 {
        self.spacing
    }

    /// `ẽ_j(ξ_m)` for 1-based `j` and 0-based node `m`.
    pub fn basis_value(&self, j: usize, m: usize) -> f64 {
        self.basis[(j - 1) * self.grid + m]
    }

    fn basis_row(&self, j0: usize) -> &[f64] {
        &self.basis[j0 * self.grid..(j0 + 1) * self.grid]
    }

    /// Evaluates `Σ a_j ẽ_j` at every grid node.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid];
        for (j0, a) in coeffs.iter().enumerate().take(self.modes) {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            for (u, &e) in out.iter_mut().zip(self.basis_row(j0)) {
                u.re += a.re * e;
                u.im += a.im * e;
            }
        }
        out
    }

    /// Grid quadrature of `u ẽ_j` for `j = 1..N`, i.e. the first `N` sine
    /// coefficients of the grid function.
    pub fn analyze(&self, values: &[Complex64]) -> Vec<Complex64> {
        let h = self.spacing;
        (0..self.modes)
            .map(|j0| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (u, &e) in values.iter().zip(self.basis_row(j0)) {
                    acc.re += u.re * e;
                    acc.im += u.im * e;
                }
                acc * h
            })
            .collect()
    }

    /// Trapezoid quadrature of a grid function over `(0, L)`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.spacing * values.iter().sum::<f64>()
    }

    pub fn zero(self: &Arc<Self>) -> SpectralState {
        SpectralState {
            space: Arc::clone(self),
            coeffs: vec![Complex64::new(0.0, 0.0); self.modes],
        }
    }

    /// The basis function `ẽ_j` as a state (1-based `j`).
    pub fn mode(self: &Arc<Self>, j: usize) -> SpectralState {
        let mut s = self.zero();
        if (1..=self.modes).contains(&j) {
            s.coeffs[j - 1] = Complex64::new(1.0, 0.0);
        }
        s
    }

    pub fn state(self: &Arc<Self>, coeffs: Vec<Complex64>) -> Result<SpectralState> {
        if coeffs.len() != self.modes {
            return Err(Error::SizeMismatch {
                expected: self.modes,
                got: coeffs.len(),
            });
        }
        Ok(SpectralState {
            space: Arc::clone(self),
            coeffs,
        })
    }

    /// State with coefficients `a_j = f(j)`.
    pub fn state_from_fn(self: &Arc<Self>, f: impl FnMut(usize) -> Complex64) -> SpectralState {
        SpectralState {
            space: Arc::clone(self),
            coeffs: (1..=self.modes).map(f).collect(),
        }
    }

    pub fn same_as(&self, other: &SpectralSpace) -> bool {
        std::ptr::eq(self, other) || self == other
    }
}

/// A complex wave on the interval, stored by its `ẽ_j` coefficients.
#[derive(Clone)]
pub struct SpectralState {
    space: Arc<SpectralSpace>,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for SpectralState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralState")
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for SpectralState {
    fn eq(&self, other: &Self) -> bool {
        self.space.same_as(&other.space) && self.coeffs == other.coeffs
    }
}

impl SpectralState {
    pub fn space(&self) -> &Arc<SpectralSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of the 1-based mode `j`.
    pub fn coeff(&self, j: usize) -> Complex64 {
        self.coeffs[j - 1]
    }

    fn weighted_sq(&self, weight: impl Fn(f64) -> f64) -> f64 {
        self.coeffs
            .iter()
            .zip(self.space.eigenvalues())
            .map(|(a, &l)| a.norm_sqr() * weight(l))
            .sum()
    }

    pub fn norm_sq(&self, which: Norm) -> f64 {
        match which {
            Norm::L2 => self.weighted_sq(|_| 1.0),
            Norm::HMinusOne => self.weighted_sq(|l| 1.0 / l),
            Norm::HOne => self.weighted_sq(|l| l),
        }
    }

    pub fn norm(&self, which: Norm) -> f64 {
        self.norm_sq(which).sqrt()
    }

    /// Norm of `V* = (L²)*`, the image of `L²` under `−Δ`: `Σ |a_j|²/λ_j²`.
    pub fn dual_norm(&self) -> f64 {
        self.weighted_sq(|l| 1.0 / (l * l)).sqrt()
    }

    /// Norm of the domain of `(−Δ)^γ`: `Σ λ_j^{2γ} |a_j|²`.
    pub fn fractional_norm_sq(&self, gamma: f64) -> f64 {
        self.weighted_sq(|l| l.powf(2.0 * gamma))
    }

    /// Sesquilinear inner product `⟨self, other⟩` (conjugate-linear in `self`).
    pub fn inner(&self, other: &SpectralState, which: Norm) -> Complex64 {
        debug_assert!(self.space.same_as(&other.space));
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(self.space.eigenvalues())
            .map(|((a, b), &l)| {
                let w = match which {
                    Norm::L2 => 1.0,
                    Norm::HMinusOne => 1.0 / l,
                    Norm::HOne => l,
                };
                a.conj() * b * w
            })
            .sum()
    }

    /// Duality pairing `⟨φ, ψ⟩_{V*,V}` realised as the (H¹₀)* inner product.
    pub fn duality(&self, other: &SpectralState) -> Complex64 {
        self.inner(other, Norm::HMinusOne)
    }

    pub fn distance(&self, other: &SpectralState, which: Norm) -> f64 {
        debug_assert!(self.space.same_as(&other.space));
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(self.space.eigenvalues())
            .map(|((a, b), &l)| {
                let d = (a - b).norm_sqr();
                match which {
                    Norm::L2 => d,
                    Norm::HMinusOne => d / l,
                    Norm::HOne => d * l,
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Galerkin projection `Π_k`: keeps modes `j ≤ min(k, N)`.
    pub fn project(&self, k: usize) -> Result<SpectralState> {
        if k == 0 {
            return Err(Error::ZeroProjection);
        }
        let mut out = self.clone();
        for a in out.coeffs.iter_mut().skip(k) {
            *a = Complex64::new(0.0, 0.0);
        }
        Ok(out)
    }

    pub fn apply_laplacian(&self, power: LaplacianPower) -> SpectralState {
        let mut out = self.clone();
        for (a, &l) in out.coeffs.iter_mut().zip(self.space.eigenvalues()) {
            *a = match power {
                LaplacianPower::Direct => -*a * l,
                LaplacianPower::Inverse => -*a / l,
            };
        }
        out
    }

    /// Values of the wave at the collocation nodes.
    pub fn to_grid(&self) -> Vec<Complex64> {
        self.space.synthesize(&self.coeffs)
    }

    /// Sine coefficients (up to `N`) of grid values.
    pub fn from_grid(space: &Arc<SpectralSpace>, values: &[Complex64]) -> Result<SpectralState> {
        if values.len() != space.grid_size() {
            return Err(Error::SizeMismatch {
                expected: space.grid_size(),
                got: values.len(),
            });
        }
        Ok(SpectralState {
            space: Arc::clone(space),
            coeffs: space.analyze(values),
        })
    }

    /// Re-expresses the state on a space with the same interval but a
    /// different truncation (zero padding or truncation).
    pub fn embed(&self, target: &Arc<SpectralSpace>) -> Result<SpectralState> {
        if target.length() != self.space.length() {
            return Err(Error::SpaceMismatch);
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); target.modes()];
        for (dst, src) in coeffs.iter_mut().zip(&self.coeffs) {
            *dst = *src;
        }
        Ok(SpectralState {
            space: Arc::clone(target),
            coeffs,
        })
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &SpectralState) {
        debug_assert!(self.space.same_as(&other.space));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn scale(&self, s: Complex64) -> SpectralState {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|a| *a *= s);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &SpectralState) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_record(&self) -> StateRecord {
        StateRecord {
            re: self.coeffs.iter().map(|a| a.re).collect(),
            im: self.coeffs.iter().map(|a| a.im).collect(),
        }
    }

    pub fn from_record(space: &Arc<SpectralSpace>, record: &StateRecord) -> Result<SpectralState> {
        if record.re.len() != record.im.len() {
            return Err(Error::SizeMismatch {
                expected: record.re.len(),
                got: record.im.len(),
            });
        }
        let coeffs = record
            .re
            .iter()
            .zip(&record.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        space.state(coeffs)
    }
}

/// JSON form of a state: `{"re": [...], "im": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Add for &SpectralState {
    type Output = SpectralState;
    fn add(self, rhs: &SpectralState) -> SpectralState {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), rhs);
        out
    }
}

impl Sub for &SpectralState {
    type Output = SpectralState;
    fn sub(self, rhs: &SpectralState) -> SpectralState {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), rhs);
        out
    }
}

impl Neg for &SpectralState {
    type Output = SpectralState;
    fn neg(self) -> SpectralState {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul<Complex64> for &SpectralState {
    type Output = SpectralState;
    fn mul(self, rhs: Complex64) -> SpectralState {
        self.scale(rhs)
    }
}

impl Mul<f64> for &SpectralState {
    type Output = SpectralState;
    fn mul(self, rhs: f64) -> SpectralState {
        self.scale(Complex64::new(rhs, 0.0))
    }
}
