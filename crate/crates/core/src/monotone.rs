//! Pointwise complex maps `β: ℂ → ℂ` used as the nonlinearity of `Δβ`.
//!
//! Every map carries declared constants (strict-monotonicity `α`, Lipschitz
//! `[β]₁`, linear growth) and supports evaluation, the real 2×2 Jacobian on
//! `ℂ ≅ ℝ²`, the resolvent `(Id + aβ)⁻¹`, the inverse for strictly monotone
//! members, and the Fitzpatrick function
//!
//! ```text
//! F_β(z1, z2) = Re⟨z1, z2⟩ − inf_u Re⟨z1 − u, z2 − β(u)⟩
//! ```
//!
//! The inner product is `⟨a, b⟩ = conj(a)·b`, so `Re⟨a, b⟩` is the Euclidean
//! dot product of `a` and `b` viewed in `ℝ²`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type C = Complex64;

const I: C = C::new(0.0, 1.0);

#[inline]
fn dot(a: C, b: C) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Radial profile `β̃: ℝ₊ → ℂ` for maps of the form `β(z) = β̃(|z|) z`.
pub trait ModulusProfile: Send + Sync + fmt::Debug {
    fn value(&self, t: f64) -> C;
    fn derivative(&self, t: f64) -> C;
    /// Declared `inf_t Re β̃(t)`; this is the monotonicity constant of `β`.
    fn inf_real(&self) -> f64;
    /// Declared Lipschitz constant of `z ↦ β̃(|z|) z`.
    fn lipschitz(&self) -> f64;
}

/// `β̃(t) = base + gain·t/(1+t)` with real `gain ≥ 0`.
///
/// Because the imaginary part is constant and `t·Re β̃(t)` is nondecreasing,
/// `β̃(|z|) z` is monotone with `α = Re base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturatingProfile {
    pub base: C,
    pub gain: f64,
}

impl ModulusProfile for SaturatingProfile {
    fn value(&self, t: f64) -> C {
        self.base + self.gain * t / (1.0 + t)
    }

    fn derivative(&self, t: f64) -> C {
        C::new(self.gain / ((1.0 + t) * (1.0 + t)), 0.0)
    }

    fn inf_real(&self) -> f64 {
        self.base.re
    }

    fn lipschitz(&self) -> f64 {
        // symmetric part has eigenvalues in [a, a + t a'] ⊂ [Re base, Re base + gain]
        self.base.re + self.gain + self.base.im.abs()
    }
}

/// A pointwise complex map from the catalog.
#[derive(Debug, Clone)]
pub enum MonotoneMap {
    /// `β(z) = c z`.
    Linear { c: C },
    /// `β(z) = i |z|^{p−1} z`.
    PowerPhase { p: f64 },
    /// `β(z) = β̃(|z|) z`.
    Modulus { profile: Arc<dyn ModulusProfile> },
    /// `β(z) = β_base(z) + ε z`.
    Strictified { base: Box<MonotoneMap>, eps: f64 },
}

impl MonotoneMap {
    pub fn linear(c: C) -> Result<Self> {
        if !(c.re >= 0.0) || !c.im.is_finite() {
            return Err(Error::NotMonotone(format!(
                "linear map requires Re c ≥ 0 (got Re c = {})",
                c.re
            )));
        }
        Ok(Self::Linear { c })
    }

    /// Builds `c z` without the `Re c ≥ 0` check; for probing the
    /// monotonicity estimator on maps that are known to fail it.
    pub fn linear_unchecked(c: C) -> Self {
        Self::Linear { c }
    }

    pub fn power_phase(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::NotMonotone(format!(
                "power_phase requires p ≥ 1 (got {p})"
            )));
        }
        Ok(Self::PowerPhase { p })
    }

    pub fn modulus(profile: Arc<dyn ModulusProfile>) -> Result<Self> {
        if !(profile.inf_real() >= 0.0) {
            return Err(Error::NotMonotone(format!(
                "modulus profile requires Re β̃ ≥ 0 (declared inf {})",
                profile.inf_real()
            )));
        }
        Ok(Self::Modulus { profile })
    }

    pub fn strictified(base: MonotoneMap, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::NotMonotone(format!(
                "strictification requires ε > 0 (got {eps})"
            )));
        }
        Ok(Self::Strictified {
            base: Box::new(base),
            eps,
        })
    }

    pub fn name(&self) -> String {
        match self {
            Self::Linear { c } => format!("linear(c={}{:+}i)", c.re, c.im),
            Self::PowerPhase { p } => format!("power_phase(p={p})"),
            Self::Modulus { profile } => format!("modulus({profile:?})"),
            Self::Strictified { base, eps } => format!("strictified({}, eps={eps})", base.name()),
        }
    }

    /// Declared strict-monotonicity constant `α`.
    pub fn alpha(&self) -> f64 {
        match self {
            Self::Linear { c } => c.re,
            Self::PowerPhase { .. } => 0.0,
            Self::Modulus { profile } => profile.inf_real(),
            Self::Strictified { base, eps } => base.alpha() + eps,
        }
    }

    /// Declared Lipschitz constant `[β]₁` (infinite when not globally Lipschitz).
    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Linear { c } => c.norm(),
            Self::PowerPhase { p } => {
                if *p == 1.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Modulus { profile } => profile.lipschitz(),
            Self::Strictified { base, eps } => base.lipschitz() + eps,
        }
    }

    /// Declared `c` with `|β(z)| ≤ c (1 + |z|)`.
    pub fn growth(&self) -> f64 {
        self.lipschitz()
    }

    /// True when the map is `c z` for some complex `c` (after strictification).
    pub fn linear_coefficient(&self) -> Option<C> {
        match self {
            Self::Linear { c } => Some(*c),
            Self::PowerPhase { p } if *p == 1.0 => Some(I),
            Self::Strictified { base, eps } => base.linear_coefficient().map(|c| c + eps),
            _ => None,
        }
    }

    pub fn eval(&self, z: C) -> C {
        match self {
            Self::Linear { c } => c * z,
            Self::PowerPhase { p } => {
                if *p == 1.0 {
                    I * z
                } else {
                    I * z * z.norm().powf(p - 1.0)
                }
            }
            Self::Modulus { profile } => profile.value(z.norm()) * z,
            Self::Strictified { base, eps } => base.eval(z) + eps * z,
        }
    }

    /// Partial derivatives `(∂β/∂x, ∂β/∂y)` at `z = x + iy`.
    ///
    /// As a real 2×2 matrix the Jacobian is
    /// `[[dx.re, dy.re], [dx.im, dy.im]]`.
    pub fn jacobian(&self, z: C) -> (C, C) {
        match self {
            Self::Linear { c } => (*c, I * c),
            Self::PowerPhase { p } => {
                let r = z.norm();
                if *p == 1.0 {
                    return (I, -C::new(1.0, 0.0));
                }
                let s = r.powf(p - 1.0);
                let (sx, sy) = if r > 0.0 {
                    let k = (p - 1.0) * r.powf(p - 3.0);
                    (k * z.re, k * z.im)
                } else {
                    (0.0, 0.0)
                };
                (I * s + I * z * sx, -C::new(s, 0.0) + I * z * sy)
            }
            Self::Modulus { profile } => {
                let r = z.norm();
                let b = profile.value(r);
                let (bx, by) = if r > 0.0 {
                    let d = profile.derivative(r);
                    (d * (z.re / r), d * (z.im / r))
                } else {
                    (C::new(0.0, 0.0), C::new(0.0, 0.0))
                };
                (b + bx * z, I * b + by * z)
            }
            Self::Strictified { base, eps } => {
                let (dx, dy) = base.jacobian(z);
                (dx + eps, dy + I * eps)
            }
        }
    }

    /// Minimum over sampled pairs of `Re⟨β(z)−β(z′), z−z′⟩ / |z−z′|²`.
    ///
    /// Pairs are drawn at magnitudes spread over three decades so that both
    /// the small- and large-amplitude regimes are probed. A negative result
    /// means the map is not monotone.
    pub fn check_monotone(&self, pair_count: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..pair_count.max(1) {
            let z = sample_point(&mut rng);
            let w = sample_point(&mut rng);
            let dz = z - w;
            let n = dz.norm_sqr();
            if n == 0.0 {
                continue;
            }
            let q = dot(self.eval(z) - self.eval(w), dz) / n;
            worst = worst.min(q);
        }
        worst
    }

    /// Solves `z + a β(z) = w` by damped Newton on `ℝ²` started at `w`.
    pub fn resolvent(&self, a: f64, w: C) -> Result<C> {
        if let Some(c) = self.linear_coefficient() {
            return Ok(w / (1.0 + a * c));
        }
        let residual = |z: C| z + a * self.eval(z) - w;
        let scale = w.norm().max(1.0);
        let target = 1e-15 * scale;
        let mut z = w;
        let mut g = residual(z);
        for _ in 0..200 {
            if g.norm() <= target {
                break;
            }
            let (dx, dy) = self.jacobian(z);
            let m = [
                [1.0 + a * dx.re, a * dy.re],
                [a * dx.im, 1.0 + a * dy.im],
            ];
            let Some(step) = solve2(m, [-g.re, -g.im]) else {
                break;
            };
            let d = C::new(step[0], step[1]);
            let mut t = 1.0;
            let g0 = g.norm();
            let mut accepted = false;
            for _ in 0..60 {
                let cand = z + d * t;
                let gc = residual(cand);
                if gc.norm() <= (1.0 - 1e-4 * t) * g0 {
                    z = cand;
                    g = gc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let res = g.norm();
        if res > 1e-12 * scale || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Resolvent { residual: res });
        }
        Ok(z)
    }

    /// Solves `β(z) = x` for strictly monotone maps.
    pub fn inverse(&self, x: C) -> Result<C> {
        if !(self.alpha() > 0.0) {
            return Err(Error::NoInverse);
        }
        if let Some(c) = self.linear_coefficient() {
            return Ok(x / c);
        }
        let scale = x.norm().max(1.0);
        let mut z = x / self.lipschitz().max(self.alpha());
        let mut g = self.eval(z) - x;
        for _ in 0..200 {
            if g.norm() <= 1e-15 * scale {
                break;
            }
            let (dx, dy) = self.jacobian(z);
            let m = [[dx.re, dy.re], [dx.im, dy.im]];
            let Some(step) = solve2(m, [-g.re, -g.im]) else {
                break;
            };
            let d = C::new(step[0], step[1]);
            let g0 = g.norm();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = z + d * t;
                let gc = self.eval(cand) - x;
                if gc.norm() <= (1.0 - 1e-4 * t) * g0 {
                    z = cand;
                    g = gc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if g.norm() > 1e-12 * scale {
            return Err(Error::Resolvent { residual: g.norm() });
        }
        Ok(z)
    }

    /// Fitzpatrick function `F_β(z1, z2)`; `+∞` when the inner infimum is `−∞`.
    pub fn fitzpatrick(&self, z1: C, z2: C) -> FitzValue {
        let base = dot(z1, z2);
        match minimize_coupling(self, z1, z2) {
            Some((u, m)) => FitzValue {
                value: base - m,
                argmin: Some(u),
            },
            None => FitzValue {
                value: f64::INFINITY,
                argmin: None,
            },
        }
    }
}

/// Value of the Fitzpatrick function with the minimiser of the coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitzValue {
    pub value: f64,
    pub argmin: Option<C>,
}

impl FitzValue {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

fn sample_point(rng: &mut ChaCha8Rng) -> C {
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    C::new(
        rng.random_range(-1.0..1.0) * scale,
        rng.random_range(-1.0..1.0) * scale,
    )
}

fn solve2(m: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if det.abs() <= 1e-300 || det.abs() <= 1e-15 * scale * scale {
        return None;
    }
    Some([
        (b[0] * m[1][1] - b[1] * m[0][1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

/// Minimises `φ(u) = Re⟨z1 − u, z2 − β(u)⟩` over `u ∈ ℂ`.
///
/// Returns `None` when `φ` is detected to be unbounded below: the iterate
/// leaves the ball of radius `1e6 (1 + |z1| + |z2|)` while `φ` keeps
/// decreasing.
fn minimize_coupling(beta: &MonotoneMap, z1: C, z2: C) -> Option<(C, f64)> {
    let phi = |u: C| dot(z1 - u, z2 - beta.eval(u));
    // ∇φ(u) = −(z2 − β(u)) − Dβ(u)ᵀ (z1 − u)
    let grad = |u: C| {
        let (dx, dy) = beta.jacobian(u);
        let r = z1 - u;
        let b = z2 - beta.eval(u);
        C::new(-b.re - dot(dx, r), -b.im - dot(dy, r))
    };
    let size = 1.0 + z1.norm() + z2.norm();
    let radius = 1e6 * size;
    let mut u = z1;
    let mut f = phi(u);
    for _ in 0..500 {
        let g = grad(u);
        let gn = g.norm();
        let h = hessian(&grad, u);
        let (lmin, vmin) = min_eig(h);
        let hscale = h.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        let curvature_ok = lmin > 1e-9 * hscale.max(1.0);
        if gn <= 1e-13 * size && lmin >= -1e-9 * hscale.max(1.0) {
            return Some((u, f));
        }
        if curvature_ok {
            let d = solve2(h, [-g.re, -g.im]).map(|s| C::new(s[0], s[1]));
            if let Some(d) = d {
                if dot(g, d) < 0.0 {
                    let mut t = 1.0;
                    let mut moved = false;
                    for _ in 0..60 {
                        let cand = u + d * t;
                        let fc = phi(cand);
                        if fc <= f + 1e-4 * t * dot(g, d) {
                            u = cand;
                            f = fc;
                            moved = true;
                            break;
                        }
                        t *= 0.5;
                    }
                    if moved {
                        if (d * t).norm() <= 1e-15 * (1.0 + u.norm()) {
                            return Some((u, f));
                        }
                        continue;
                    }
                    // Newton direction stalled at rounding level
                    return Some((u, f));
                }
            }
        }
        // Flat or concave direction: follow it with an expanding step.
        let mut d = if lmin < 0.0 && lmin.abs() > 1e-9 * hscale.max(1.0) {
            let v = C::new(vmin[0], vmin[1]);
            if dot(g, v) > 0.0 {
                -v
            } else {
                v
            }
        } else {
            -g
        };
        if d.norm() == 0.0 {
            return Some((u, f));
        }
        d /= d.norm();
        let mut t = 1e-3 * size;
        let mut best = (u, f);
        let mut improved = false;
        for _ in 0..400 {
            let cand = u + d * t;
            let fc = phi(cand);
            if fc < best.1 {
                best = (cand, fc);
                improved = true;
                if cand.norm() > radius {
                    return None;
                }
                t *= 2.0;
            } else {
                break;
            }
        }
        if !improved {
            // no descent along the flat direction: stationary up to rounding
            return Some((u, f));
        }
        u = best.0;
        f = best.1;
    }
    Some((u, f))
}

fn hessian(grad: &impl Fn(C) -> C, u: C) -> [[f64; 2]; 2] {
    let h = 1e-5 * (1.0 + u.norm());
    let gx = (grad(u + h) - grad(u - h)) / (2.0 * h);
    let gy = (grad(u + I * h) - grad(u - I * h)) / (2.0 * h);
    let off = 0.5 * (gx.im + gy.re);
    [[gx.re, off], [off, gy.im]]
}

fn min_eig(h: [[f64; 2]; 2]) -> (f64, [f64; 2]) {
    let (a, b, d) = (h[0][0], h[0][1], h[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let l = mean - rad;
    let v = if b.abs() > 1e-300 {
        [b, l - a]
    } else if a <= d {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    (l, [v[0] / n, v[1] / n])
}
