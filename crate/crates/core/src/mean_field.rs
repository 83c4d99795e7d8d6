//! Empirical laws on `(H¹₀)*`, exact Wasserstein-2 distances, law paths and
//! the drift catalog `f(t, x, μ)`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_assignment;
use crate::error::{Error, Result};
use crate::space::{Norm, SpectralSpace, SpectralState};

type C = Complex64;

/// Uniform empirical measure `(1/M) Σ δ_{x_i}` on one spectral space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    particles: Vec<SpectralState>,
}

impl EmpiricalLaw {
    pub fn new(particles: Vec<SpectralState>) -> Result<Self> {
        let Some(first) = particles.first() else {
            return Err(Error::EmptyEnsemble);
        };
        if particles.iter().any(|p| !p.space().same_as(first.space())) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { particles })
    }

    pub fn dirac(x: SpectralState) -> Self {
        Self { particles: vec![x] }
    }

    pub fn particles(&self) -> &[SpectralState] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn space(&self) -> &Arc<SpectralSpace> {
        self.particles[0].space()
    }

    pub fn mean(&self) -> SpectralState {
        let mut m = self.space().zero();
        let w = C::new(1.0 / self.len() as f64, 0.0);
        for p in &self.particles {
            m.axpy(w, p);
        }
        m
    }

    /// `∫ ‖ξ‖²_{(H¹₀)*} μ(dξ)`.
    pub fn second_moment(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| p.norm_sq(Norm::HMinusOne))
            .sum::<f64>()
            / self.len() as f64
    }
}

/// Exact `W₂` in the `(H¹₀)*` metric between equal-size uniform ensembles.
pub fn wasserstein2(mu: &EmpiricalLaw, nu: &EmpiricalLaw) -> Result<f64> {
    let m = mu.len();
    if m != nu.len() {
        return Err(Error::UnequalEnsembles {
            left: m,
            right: nu.len(),
        });
    }
    if !mu.space().same_as(nu.space()) {
        return Err(Error::SpaceMismatch);
    }
    if m == 1 {
        return Ok(mu.particles[0].distance(&nu.particles[0], Norm::HMinusOne));
    }
    let cost: Vec<f64> = mu
        .particles
        .par_iter()
        .flat_map_iter(|x| {
            nu.particles.iter().map(move |y| {
                let d = x.distance(y, Norm::HMinusOne);
                d * d
            })
        })
        .collect();
    let perm = min_cost_assignment(&cost, m);
    // summing in sorted order makes the result exactly symmetric in (μ, ν)
    let mut chosen: Vec<f64> = perm.iter().enumerate().map(|(i, &j)| cost[i * m + j]).collect();
    chosen.sort_by(f64::total_cmp);
    let total: f64 = chosen.iter().sum();
    Ok((total / m as f64).max(0.0).sqrt())
}

/// A law indexed by the nodes of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LawPath {
    times: Vec<f64>,
    laws: Vec<EmpiricalLaw>,
}

impl LawPath {
    pub fn new(times: Vec<f64>, laws: Vec<EmpiricalLaw>) -> Result<Self> {
        check_time_grid(&times)?;
        if times.len() != laws.len() {
            return Err(Error::SizeMismatch {
                expected: times.len(),
                got: laws.len(),
            });
        }
        Ok(Self { times, laws })
    }

    /// The same law at every node.
    pub fn frozen(law: EmpiricalLaw, times: Vec<f64>) -> Result<Self> {
        let laws = vec![law; times.len()];
        Self::new(times, laws)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn laws(&self) -> &[EmpiricalLaw] {
        &self.laws
    }

    pub fn at(&self, s: usize) -> &EmpiricalLaw {
        &self.laws[s]
    }
}

pub(crate) fn check_time_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::BadTimeGrid);
    }
    Ok(())
}

/// Trapezoid approximation of `∫ e^{−ct} v(t) dt` on the given nodes.
pub fn weighted_integral(times: &[f64], values: &[f64], c: f64) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * ((-c * t[0]).exp() * v[0] + (-c * t[1]).exp() * v[1]))
        .sum()
}

/// `∫₀ᵀ e^{−ct} W₂(μ(t), ν(t)) dt` by the trapezoid rule.
pub fn path_distance(mu: &LawPath, nu: &LawPath, c: f64) -> Result<f64> {
    if mu.times != nu.times {
        return Err(Error::GridMismatch);
    }
    let w: Vec<f64> = mu
        .laws
        .iter()
        .zip(&nu.laws)
        .map(|(a, b)| wasserstein2(a, b))
        .collect::<Result<_>>()?;
    Ok(weighted_integral(&mu.times, &w, c))
}

/// Scalar factor `m(t)` multiplying the state-dependent part of a drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeModulation {
    #[default]
    Constant,
    /// `m(t) = cos(ω t)`.
    Cosine { omega: f64 },
}

impl TimeModulation {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Cosine { omega } => (omega * t).cos(),
        }
    }
}

/// Drift families satisfying the Lipschitz and linear-growth conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftKind {
    Zero,
    /// `f(x, μ) = Σ_k ⟨e_k, F_k(Π_k x, μ)⟩ e_k` with
    /// `F_k(x̄, μ) = Σ_{j≤k} θ_{k,j} ∫ ⟨e_j, f_k(x̄, Π_j y)⟩ μ(dy)` and the
    /// separable kernel `f_k(z, w) = gain_k · sat(z) · min(|w|, 1)` where
    /// `sat(z) = z · min(1, 1/|z|)`.
    Cylindrical {
        /// `theta[k-1][j-1] = θ_{k,j}` for `j ≤ k`.
        theta: Vec<Vec<C>>,
        gains: Vec<f64>,
    },
    /// `f(x, μ) = Σ θ¹_{j,k} ⟨e_j, x⟩ e_k + ∫ Σ θ²_{j,k} ⟨e_j, y⟩ e_k μ(dy)`
    /// with `theta[j-1][k-1] = θ_{j,k}`.
    SpectralLinear {
        theta1: Vec<Vec<C>>,
        theta2: Vec<Vec<C>>,
    },
    /// `f(x, μ) = a x + b · mean(μ)`.
    LinearInMean { a: C, b: C },
}

/// A drift together with its declared constants.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    space: Arc<SpectralSpace>,
    kind: DriftKind,
    modulation: TimeModulation,
    lipschitz: f64,
    lipschitz_dual: f64,
    lipschitz_l2: f64,
    bound_dual: f64,
    bound_l2: f64,
}

fn sat(z: C) -> C {
    let r = z.norm();
    if r > 1.0 {
        z / r
    } else {
        z
    }
}

fn check_table(name: &str, table: &[Vec<C>], n: usize) -> Result<()> {
    if table.len() > n {
        return Err(Error::InvalidDrift(format!(
            "{name} has {} rows, beyond the truncation N = {n}",
            table.len()
        )));
    }
    for row in table {
        if row.len() > n {
            return Err(Error::InvalidDrift(format!(
                "{name} row has {} entries, beyond the truncation N = {n}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidDrift(format!("{name} has non-finite entries")));
        }
    }
    Ok(())
}

fn entry(table: &[Vec<C>], r: usize, c: usize) -> C {
    table
        .get(r)
        .and_then(|row| row.get(c))
        .copied()
        .unwrap_or(C::new(0.0, 0.0))
}

/// `(sup_j Σ_k α_k w(j,k) |θ_{j,k}|²)^{1/2}` where `α_k` counts the nonzero
/// entries of column `k`.
fn weighted_sup(table: &[Vec<C>], n: usize, weight: impl Fn(usize, usize) -> f64) -> f64 {
    let alpha: Vec<f64> = (0..n)
        .map(|k| (0..n).filter(|&j| entry(table, j, k) != C::new(0.0, 0.0)).count() as f64)
        .collect();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|k| alpha[k] * weight(j, k) * entry(table, j, k).norm_sqr())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
        .sqrt()
}

impl DriftSpec {
    pub fn zero(space: &Arc<SpectralSpace>) -> Self {
        Self {
            space: Arc::clone(space),
            kind: DriftKind::Zero,
            modulation: TimeModulation::Constant,
            lipschitz: 0.0,
            lipschitz_dual: 0.0,
            lipschitz_l2: 0.0,
            bound_dual: 0.0,
            bound_l2: 0.0,
        }
    }

    /// Declared constant `√(2 Leb(O)/λ₁ · Σ_k (Σ_j |θ_{k,j}|)² [f_k]₁²)`.
    pub fn cylindrical(space: &Arc<SpectralSpace>, theta: Vec<Vec<C>>, gains: Vec<f64>) -> Result<Self> {
        let n = space.modes();
        check_table("theta", &theta, n)?;
        for (k, row) in theta.iter().enumerate() {
            if row.iter().skip(k + 1).any(|v| *v != C::new(0.0, 0.0)) {
                return Err(Error::InvalidDrift(format!(
                    "theta_(k,j) must vanish for j > k (row k = {})",
                    k + 1
                )));
            }
        }
        if gains.len() < theta.len() {
            return Err(Error::InvalidDrift(format!(
                "need one kernel gain per theta row ({} rows, {} gains)",
                theta.len(),
                gains.len()
            )));
        }
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidDrift("kernel gains must be finite and ≥ 0".into()));
        }
        let series: f64 = theta
            .iter()
            .zip(&gains)
            .map(|(row, g)| {
                let s: f64 = row.iter().map(|v| v.norm()).sum();
                s * s * g * g
            })
            .sum();
        if !series.is_finite() {
            return Err(Error::InvalidDrift(
                "Σ_k [f_k]₁² (Σ_j |θ_kj|)² diverges at this truncation".into(),
            ));
        }
        let leb = space.length();
        let l1 = space.eigenvalue(1);
        let dual = (2.0 * leb / l1 * series).sqrt();
        let l2 = (2.0 * leb * (1.0 / l1).max(1.0) * series).sqrt();
        Ok(Self {
            space: Arc::clone(space),
            kind: DriftKind::Cylindrical { theta, gains },
            modulation: TimeModulation::Constant,
            lipschitz: dual,
            lipschitz_dual: dual,
            lipschitz_l2: l2,
            bound_dual: 0.0,
            bound_l2: 0.0,
        })
    }

    /// Declared constant: the larger of the square roots of
    /// `sup_j Σ_k α_k |θ^l_{j,k}|²` for `l = 1, 2`.
    pub fn spectral_linear(space: &Arc<SpectralSpace>, theta1: Vec<Vec<C>>, theta2: Vec<Vec<C>>) -> Result<Self> {
        let n = space.modes();
        check_table("theta1", &theta1, n)?;
        check_table("theta2", &theta2, n)?;
        let lam = space.eigenvalues();
        let k1 = weighted_sup(&theta1, n, |_, _| 1.0);
        let k2 = weighted_sup(&theta2, n, |_, _| 1.0);
        let k1_l2 = weighted_sup(&theta1, n, |j, k| lam[k] / lam[j]);
        // the law enters through W₂ in (H¹₀)*, so no 1/λ_j relief here
        let k2_l2 = weighted_sup(&theta2, n, |_, k| lam[k]);
        Ok(Self {
            space: Arc::clone(space),
            kind: DriftKind::SpectralLinear { theta1, theta2 },
            modulation: TimeModulation::Constant,
            lipschitz: k1.max(k2),
            lipschitz_dual: k1.max(k2),
            lipschitz_l2: k1_l2.max(k2_l2),
            bound_dual: k2,
            bound_l2: k2_l2,
        })
    }

    /// Declared constant `max(|a|, |b|)·√2`.
    pub fn linear_in_mean(space: &Arc<SpectralSpace>, a: C, b: C) -> Result<Self> {
        if !(a.norm().is_finite() && b.norm().is_finite()) {
            return Err(Error::InvalidDrift("gains must be finite".into()));
        }
        let top = space.eigenvalue(space.modes()).sqrt();
        Ok(Self {
            space: Arc::clone(space),
            kind: DriftKind::LinearInMean { a, b },
            modulation: TimeModulation::Constant,
            lipschitz: a.norm().max(b.norm()) * 2f64.sqrt(),
            lipschitz_dual: a.norm().max(b.norm()),
            lipschitz_l2: a.norm().max(b.norm() * top),
            bound_dual: b.norm(),
            bound_l2: b.norm() * top,
        })
    }

    pub fn with_modulation(mut self, modulation: TimeModulation) -> Self {
        self.modulation = modulation;
        self
    }

    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    pub fn space(&self) -> &Arc<SpectralSpace> {
        &self.space
    }

    /// Declared Lipschitz constant `[f]₁`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Lipschitz constant valid in the given norm (with `W₂` always in
    /// `(H¹₀)*`). In `L²` the law-dependent parts pick up truncation factors.
    pub fn lipschitz_in(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2 => self.lipschitz_l2,
            _ => self.lipschitz_dual,
        }
    }

    /// `‖f‖₀` for the given norm; `f₀ ≡ 0` for every catalog member.
    pub fn bound_at_zero(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2 => self.bound_l2,
            _ => self.bound_dual,
        }
    }

    pub fn f0(&self, _t: f64) -> f64 {
        0.0
    }

    pub fn depends_on_law(&self) -> bool {
        let nonzero = |t: &Vec<Vec<C>>| t.iter().flatten().any(|v| *v != C::new(0.0, 0.0));
        match &self.kind {
            DriftKind::Zero => false,
            DriftKind::Cylindrical { theta, gains } => {
                nonzero(theta) && gains.iter().any(|g| *g != 0.0)
            }
            DriftKind::SpectralLinear { theta2, .. } => nonzero(theta2),
            DriftKind::LinearInMean { b, .. } => *b != C::new(0.0, 0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DriftKind::Zero)
    }

    /// Precomputes everything that depends only on `(t, μ)`.
    pub fn prepare(&self, t: f64, law: &EmpiricalLaw) -> PreparedDrift<'_> {
        let m = self.modulation.at(t);
        let lam = self.space.eigenvalues();
        let extra = match &self.kind {
            DriftKind::Zero => Prepared::None,
            DriftKind::LinearInMean { b, .. } => Prepared::Offset(law.mean().scale(*b)),
            DriftKind::SpectralLinear { theta2, .. } => {
                let mean = law.mean();
                let offset = self.space.state_from_fn(|k| {
                    let s: C = (0..lam.len())
                        .map(|j| entry(theta2, j, k - 1) * mean.coeffs()[j] / lam[j].sqrt())
                        .sum();
                    s * lam[k - 1].sqrt()
                });
                Prepared::Offset(offset)
            }
            DriftKind::Cylindrical { theta, .. } => {
                let b = self.cylinder_moments(law, theta.len());
                let d = theta
                    .iter()
                    .enumerate()
                    .map(|(k, row)| {
                        row.iter()
                            .take(k + 1)
                            .enumerate()
                            .map(|(j, th)| th * b[j] / lam[j].sqrt())
                            .sum::<C>()
                    })
                    .collect();
                Prepared::Cylinder(d)
            }
        };
        PreparedDrift {
            spec: self,
            modulation: m,
            extra,
        }
    }

    /// `B_j = (1/M) Σ_i ⟨ẽ_j, min(|Π_j y_i|, 1)⟩_{L²}` for `j ≤ depth`.
    fn cylinder_moments(&self, law: &EmpiricalLaw, depth: usize) -> Vec<C> {
        let sp = &self.space;
        let g = sp.grid_size();
        let h = sp.quadrature_weight();
        let mut acc = vec![0.0; depth];
        for y in law.particles() {
            let mut partial = vec![C::new(0.0, 0.0); g];
            for j in 1..=depth {
                let a = y.coeff(j);
                let mut s = 0.0;
                for (m, u) in partial.iter_mut().enumerate() {
                    let e = sp.basis_value(j, m);
                    *u += a * e;
                    s += e * u.norm().min(1.0);
                }
                acc[j - 1] += s * h;
            }
        }
        acc.into_iter()
            .map(|v| C::new(v / law.len() as f64, 0.0))
            .collect()
    }

    pub fn evaluate(&self, t: f64, x: &SpectralState, law: &EmpiricalLaw) -> SpectralState {
        self.prepare(t, law).apply(x)
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    None,
    Offset(SpectralState),
    Cylinder(Vec<C>),
}

/// A drift with its time and law arguments fixed.
#[derive(Debug, Clone)]
pub struct PreparedDrift<'a> {
    spec: &'a DriftSpec,
    modulation: f64,
    extra: Prepared,
}

impl PreparedDrift<'_> {
    pub fn apply(&self, x: &SpectralState) -> SpectralState {
        let sp = &self.spec.space;
        let lam = sp.eigenvalues();
        let m = self.modulation;
        let mut out = match &self.spec.kind {
            DriftKind::Zero => sp.zero(),
            DriftKind::LinearInMean { a, .. } => x.scale(a * m),
            DriftKind::SpectralLinear { theta1, .. } => sp.state_from_fn(|k| {
                let s: C = (0..lam.len())
                    .map(|j| entry(theta1, j, k - 1) * x.coeffs()[j] / lam[j].sqrt())
                    .sum();
                s * lam[k - 1].sqrt() * m
            }),
            DriftKind::Cylindrical { gains, .. } => {
                let Prepared::Cylinder(d) = &self.extra else {
                    unreachable!("cylindrical drift prepared without moments")
                };
                let g = sp.grid_size();
                let h = sp.quadrature_weight();
                let mut partial = vec![C::new(0.0, 0.0); g];
                let mut out = sp.zero();
                for (k0, dk) in d.iter().enumerate() {
                    let a = x.coeffs()[k0];
                    let mut s = C::new(0.0, 0.0);
                    for (mm, u) in partial.iter_mut().enumerate() {
                        let e = sp.basis_value(k0 + 1, mm);
                        *u += a * e;
                        s += sat(*u) * e;
                    }
                    out.coeffs_mut()[k0] = s * h * dk * gains[k0] * m;
                }
                out
            }
        };
        if let Prepared::Offset(o) = &self.extra {
            out.axpy(C::new(1.0, 0.0), o);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn random_state(space: &Arc<SpectralSpace>, rng: &mut ChaCha8Rng, scale: f64) -> SpectralState {
        space.state_from_fn(|_| c(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
    }

    fn random_law(space: &Arc<SpectralSpace>, rng: &mut ChaCha8Rng, m: usize) -> EmpiricalLaw {
        EmpiricalLaw::new((0..m).map(|_| random_state(space, rng, 1.0)).collect()).unwrap()
    }

    fn brute_w2(mu: &EmpiricalLaw, nu: &EmpiricalLaw) -> f64 {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for i in 0..n {
                    let mut q = p.clone();
                    q.insert(i, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let m = mu.len();
        perms(m)
            .into_iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &j)| mu.particles()[i].distance(&nu.particles()[j], Norm::HMinusOne).powi(2))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
            / m as f64
    }

    #[test]
    fn dirac_distance_is_state_distance() {
        let s = SpectralSpace::with_default_grid(1.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y) = (random_state(&s, &mut rng, 1.0), random_state(&s, &mut rng, 1.0));
        let w = wasserstein2(&EmpiricalLaw::dirac(x.clone()), &EmpiricalLaw::dirac(y.clone())).unwrap();
        assert!((w - x.distance(&y, Norm::HMinusOne)).abs() < 1e-15);
    }

    #[test]
    fn permuted_ensemble_has_zero_distance() {
        let s = SpectralSpace::with_default_grid(1.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = random_law(&s, &mut rng, 9);
        let mut p = mu.particles().to_vec();
        p.reverse();
        p.swap(0, 4);
        let nu = EmpiricalLaw::new(p).unwrap();
        assert_eq!(wasserstein2(&mu, &nu).unwrap(), 0.0);
    }

    #[test]
    fn assignment_matches_permutation_oracle() {
        let s = SpectralSpace::with_default_grid(1.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 1..=6 {
            for _ in 0..10 {
                let mu = random_law(&s, &mut rng, m);
                let nu = random_law(&s, &mut rng, m);
                let w = wasserstein2(&mu, &nu).unwrap();
                assert!((w * w - brute_w2(&mu, &nu)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unequal_sizes_rejected() {
        let s = SpectralSpace::with_default_grid(1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b) = (random_law(&s, &mut rng, 2), random_law(&s, &mut rng, 3));
        assert!(matches!(wasserstein2(&a, &b), Err(Error::UnequalEnsembles { left: 2, right: 3 })));
        assert!(matches!(EmpiricalLaw::new(vec![]), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn w2_triangle_and_symmetry() {
        let s = SpectralSpace::with_default_grid(1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (a, b, d) = (
                random_law(&s, &mut rng, 5),
                random_law(&s, &mut rng, 5),
                random_law(&s, &mut rng, 5),
            );
            let ab = wasserstein2(&a, &b).unwrap();
            assert_eq!(ab, wasserstein2(&b, &a).unwrap());
            let ad = wasserstein2(&a, &d).unwrap();
            let db = wasserstein2(&d, &b).unwrap();
            assert!(ab <= ad + db + 1e-10);
        }
    }

    #[test]
    fn weighted_path_integrals() {
        let times: Vec<f64> = (0..=10_000).map(|i| i as f64 * 1e-4).collect();
        let ones = vec![1.0; times.len()];
        assert!((weighted_integral(&times, &ones, 0.0) - 1.0).abs() < 1e-12);
        let exact = (1.0 - (-9f64).exp()) / 9.0;
        assert!((weighted_integral(&times, &ones, 9.0) - exact).abs() < 1e-7);
        assert!((exact - 0.11110).abs() < 1e-5);
    }

    #[test]
    fn path_distance_cases() {
        let s = SpectralSpace::with_default_grid(1.0, 3).unwrap();
        let times = vec![0.0, 0.5, 1.0];
        let x = s.mode(1).scale(c(s.eigenvalue(1).sqrt(), 0.0));
        let p0 = LawPath::frozen(EmpiricalLaw::dirac(s.zero()), times.clone()).unwrap();
        let p1 = LawPath::frozen(EmpiricalLaw::dirac(x), times.clone()).unwrap();
        assert_eq!(path_distance(&p0, &p0, 9.0).unwrap(), 0.0);
        // W₂ ≡ 1 since ‖e_1‖_* = 1
        assert!((path_distance(&p0, &p1, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(path_distance(&p0, &p1, 9.0).unwrap() < path_distance(&p0, &p1, 1.0).unwrap());
        let other = LawPath::frozen(EmpiricalLaw::dirac(s.zero()), vec![0.0, 1.0]).unwrap();
        assert!(matches!(path_distance(&p0, &other, 0.0), Err(Error::GridMismatch)));
        assert!(LawPath::frozen(EmpiricalLaw::dirac(s.zero()), vec![0.1, 1.0]).is_err());
    }

    fn catalog(space: &Arc<SpectralSpace>) -> Vec<DriftSpec> {
        let n = space.modes();
        let mut diag = vec![vec![c(0.0, 0.0); n]; n];
        let mut band = vec![vec![c(0.0, 0.0); n]; n];
        for j in 0..n {
            diag[j][j] = c(0.5, 0.0);
            band[j][j] = c(0.2, 0.1);
            if j + 1 < n {
                band[j][j + 1] = c(-0.1, 0.3);
            }
        }
        let mut theta = vec![vec![c(0.0, 0.0); n]; 3];
        theta[0][0] = c(1.0, 0.0);
        theta[1][0] = c(0.3, -0.2);
        theta[1][1] = c(0.5, 0.0);
        theta[2][1] = c(0.0, 0.4);
        vec![
            DriftSpec::zero(space),
            DriftSpec::linear_in_mean(space, c(0.3, -0.2), c(0.1, 0.4)).unwrap(),
            DriftSpec::spectral_linear(space, diag.clone(), vec![]).unwrap(),
            DriftSpec::spectral_linear(space, band.clone(), band).unwrap(),
            DriftSpec::cylindrical(space, theta, vec![1.0, 0.7, 2.0]).unwrap(),
            DriftSpec::linear_in_mean(space, c(0.5, 0.0), c(0.0, 0.0))
                .unwrap()
                .with_modulation(TimeModulation::Cosine { omega: 3.0 }),
        ]
    }

    #[test]
    fn zero_and_mean_examples() {
        let s = SpectralSpace::with_default_grid(1.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_state(&s, &mut rng, 1.0);
        let y = random_state(&s, &mut rng, 1.0);
        let law = EmpiricalLaw::dirac(y.clone());
        assert_eq!(DriftSpec::zero(&s).evaluate(0.0, &x, &law), s.zero());
        let f = DriftSpec::linear_in_mean(&s, c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(f.evaluate(0.3, &x, &law).max_abs_diff(&y) < 1e-15);
        assert!((f.lipschitz() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spectral_diagonal_halves_the_state() {
        let s = SpectralSpace::with_default_grid(1.0, 5).unwrap();
        let mut diag = vec![vec![c(0.0, 0.0); 5]; 5];
        for (j, row) in diag.iter_mut().enumerate() {
            row[j] = c(0.5, 0.0);
        }
        let f = DriftSpec::spectral_linear(&s, diag, vec![]).unwrap();
        assert!((f.lipschitz() - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let law = random_law(&s, &mut rng, 3);
        for _ in 0..100 {
            let x = random_state(&s, &mut rng, 1.0);
            let y = random_state(&s, &mut rng, 1.0);
            let fx = f.evaluate(0.0, &x, &law);
            assert!(fx.max_abs_diff(&x.scale(c(0.5, 0.0))) < 1e-14);
            let ratio = (&fx - &f.evaluate(0.0, &y, &law)).norm(Norm::HMinusOne) / x.distance(&y, Norm::HMinusOne);
            assert!(ratio <= f.lipschitz() + 1e-12);
        }
    }

    #[test]
    fn cylindrical_declared_bound() {
        let s = SpectralSpace::with_default_grid(1.0, 6).unwrap();
        let f = DriftSpec::cylindrical(&s, vec![vec![c(1.0, 0.0)]], vec![1.0]).unwrap();
        let formula = (2.0 / (std::f64::consts::PI.powi(2))).sqrt();
        assert!((f.lipschitz() - formula).abs() < 1e-15);
        assert!(f.depends_on_law());
        let bad = DriftSpec::cylindrical(&s, vec![vec![c(1.0, 0.0), c(1.0, 0.0)]], vec![1.0]);
        assert!(bad.is_err());
        let inf = DriftSpec::cylindrical(&s, vec![vec![c(f64::INFINITY, 0.0)]], vec![1.0]);
        assert!(inf.is_err());
    }

    #[test]
    fn cylindrical_matches_direct_quadrature() {
        // Evaluate the defining double integral without the separable shortcut.
        let s = SpectralSpace::new(1.3, 3, 24).unwrap();
        let theta = vec![vec![c(0.7, 0.1)], vec![c(0.2, 0.0), c(-0.4, 0.3)]];
        let gains = vec![1.5, 0.8];
        let f = DriftSpec::cylindrical(&s, theta.clone(), gains.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let law = random_law(&s, &mut rng, 4);
        let x = random_state(&s, &mut rng, 2.0);
        let got = f.evaluate(0.0, &x, &law);
        let h = s.quadrature_weight();
        let kernel = |k: usize, z: C, w: C| sat(z) * w.norm().min(1.0) * gains[k];
        for k in 1..=2 {
            let pk = x.project(k).unwrap().to_grid();
            let mut coef = c(0.0, 0.0);
            for (m, &xbar) in pk.iter().enumerate() {
                let mut fk = c(0.0, 0.0);
                for j in 1..=k {
                    let mut avg = c(0.0, 0.0);
                    for y in law.particles() {
                        let pj = y.project(j).unwrap().to_grid();
                        let inner: C = pj
                            .iter()
                            .enumerate()
                            .map(|(mm, &w)| kernel(k - 1, xbar, w) * s.basis_value(j, mm))
                            .sum::<C>()
                            * h;
                        avg += inner / s.eigenvalue(j).sqrt();
                    }
                    fk += theta[k - 1][j - 1] * avg / law.len() as f64;
                }
                coef += fk * s.basis_value(k, m) * h;
            }
            assert!((coef - got.coeff(k)).norm() < 1e-12, "k={k}");
        }
        assert_eq!(got.coeff(3), c(0.0, 0.0));
    }

    #[test]
    fn lipschitz_and_growth_audits() {
        let s = SpectralSpace::with_default_grid(1.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for f in catalog(&s) {
            for _ in 0..300 {
                let t = rng.random_range(0.0..1.0);
                let x = random_state(&s, &mut rng, 2.0);
                let y = random_state(&s, &mut rng, 2.0);
                let mu = random_law(&s, &mut rng, 3);
                let nu = random_law(&s, &mut rng, 3);
                let w = wasserstein2(&mu, &nu).unwrap();
                let diff = &f.evaluate(t, &x, &mu) - &f.evaluate(t, &y, &nu);
                for norm in [Norm::HMinusOne, Norm::L2] {
                    let lhs = diff.norm(norm);
                    let rhs = f.lipschitz_in(norm) * (x.distance(&y, norm) + w);
                    assert!(lhs <= rhs + 1e-10, "{:?} {norm:?}: {lhs} > {rhs}", f.kind());
                    let at0 = f.evaluate(t, &s.zero(), &mu).norm(norm);
                    let bound = f.bound_at_zero(norm) * (f.f0(t) + mu.second_moment().sqrt());
                    assert!(at0 <= bound + 1e-12, "{:?} {norm:?}", f.kind());
                }
            }
            assert!(f.lipschitz_in(Norm::HMinusOne) <= f.lipschitz() + 1e-15);
        }
    }

    #[test]
    fn law_dependence_flags() {
        let s = SpectralSpace::with_default_grid(1.0, 3).unwrap();
        assert!(!DriftSpec::zero(&s).depends_on_law());
        assert!(!DriftSpec::linear_in_mean(&s, c(1.0, 0.0), c(0.0, 0.0)).unwrap().depends_on_law());
        assert!(DriftSpec::linear_in_mean(&s, c(0.0, 0.0), c(0.1, 0.0)).unwrap().depends_on_law());
    }
}
