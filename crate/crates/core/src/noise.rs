//! Diagonal additive noise `g dW` and its stochastic convolution.
//!
//! The cylindrical process `W = Σ_k W_k e_k` is expanded in the
//! `(H¹₀)*`-orthonormal basis `e_k = √λ_k ẽ_k`. Amplitudes here are stated
//! directly against `ẽ_k`, i.e. the factor `√λ_k` is folded into the tables:
//!
//! ```text
//! W_g(t_{s+1}) = W_g(t_s) + m(t_s) Σ_k (σ^re_k + i σ^im_k) ΔW_k(s) ẽ_k
//! ```
//!
//! Real and imaginary coefficients share one real Brownian increment per mode.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mean_field::{check_time_grid, TimeModulation};
use crate::space::{SpectralSpace, SpectralState};

/// Diagonal noise coefficient valued in `D((−Δ)^γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    gamma: f64,
    sigma_re: Vec<f64>,
    sigma_im: Vec<f64>,
    envelope: TimeModulation,
}

impl NoiseSpec {
    /// `σ^re_k = σ^im_k = amp · k^{−r}` for `k = 1..K`.
    ///
    /// Accepted iff `γ > 1/2` and, for nonzero `amp`, `4γ − 2r < −1`, the
    /// condition under which `Σ_k λ_k^{2γ} k^{−2r}` converges.
    pub fn power_law(gamma: f64, r: f64, amp: f64, modes: usize) -> Result<Self> {
        check_gamma(gamma)?;
        if !amp.is_finite() || !r.is_finite() {
            return Err(Error::InadmissibleNoise("amplitude and decay must be finite".into()));
        }
        if amp != 0.0 && 4.0 * gamma - 2.0 * r >= -1.0 {
            return Err(Error::InadmissibleNoise(format!(
                "Σ_k λ_k^(2γ) k^(-2r) diverges: 4γ − 2r = {} is not < −1",
                4.0 * gamma - 2.0 * r
            )));
        }
        let sigma: Vec<f64> = (1..=modes).map(|k| amp * (k as f64).powf(-r)).collect();
        Ok(Self {
            gamma,
            sigma_re: sigma.clone(),
            sigma_im: sigma,
            envelope: TimeModulation::Constant,
        })
    }

    /// Arbitrary finite tables with a declared bound on the omitted tail of
    /// the Hilbert–Schmidt series.
    pub fn tabulated(gamma: f64, sigma_re: Vec<f64>, sigma_im: Vec<f64>, tail_bound: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if sigma_re.len() != sigma_im.len() {
            return Err(Error::InadmissibleNoise(format!(
                "real and imaginary tables differ in length ({} vs {})",
                sigma_re.len(),
                sigma_im.len()
            )));
        }
        if !(tail_bound >= 0.0 && tail_bound.is_finite()) {
            return Err(Error::InadmissibleNoise(
                "declared tail of Σ_k λ_k^(2γ) σ_k² must be finite and ≥ 0".into(),
            ));
        }
        if sigma_re.iter().chain(&sigma_im).any(|v| !v.is_finite()) {
            return Err(Error::InadmissibleNoise("amplitudes must be finite".into()));
        }
        Ok(Self {
            gamma,
            sigma_re,
            sigma_im,
            envelope: TimeModulation::Constant,
        })
    }

    pub fn with_envelope(mut self, envelope: TimeModulation) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn modes(&self) -> usize {
        self.sigma_re.len()
    }

    pub fn sigma_re(&self) -> &[f64] {
        &self.sigma_re
    }

    pub fn sigma_im(&self) -> &[f64] {
        &self.sigma_im
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_re.iter().chain(&self.sigma_im).all(|v| *v == 0.0)
    }

    /// `Σ_k λ_k^{2γ} ((σ^re_k)² + (σ^im_k)²)` over the tabulated modes.
    pub fn hilbert_schmidt_sq(&self, space: &SpectralSpace) -> f64 {
        self.sigma_re
            .iter()
            .zip(&self.sigma_im)
            .enumerate()
            .take(space.modes())
            .map(|(k, (a, b))| space.eigenvalue(k + 1).powf(2.0 * self.gamma) * (a * a + b * b))
            .sum()
    }

    /// Samples `W_g` on `times` for the substream `substream` of `seed`.
    ///
    /// Each `(substream, mode)` pair owns its own ChaCha stream, so paths of
    /// different particles never share random numbers and do not depend on
    /// the order in which they are generated.
    pub fn sample_convolution(
        &self,
        space: &Arc<SpectralSpace>,
        times: &[f64],
        seed: u64,
        substream: u32,
    ) -> Result<NoisePath> {
        check_time_grid(times)?;
        if self.modes() > space.modes() {
            return Err(Error::InadmissibleNoise(format!(
                "noise acts on {} modes but the space keeps only N = {}",
                self.modes(),
                space.modes()
            )));
        }
        let steps = times.len() - 1;
        let mut values = vec![space.zero(); times.len()];
        for k in 0..self.modes() {
            let amp = Complex64::new(self.sigma_re[k], self.sigma_im[k]);
            if amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((substream as u64) << 32) | k as u64);
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..steps {
                let dt = times[s + 1] - times[s];
                let z: f64 = StandardNormal.sample(&mut rng);
                acc += amp * (self.envelope.at(times[s]) * z * dt.sqrt());
                values[s + 1].coeffs_mut()[k] = acc;
            }
        }
        Ok(NoisePath {
            times: times.to_vec(),
            values,
            seed,
        })
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.5) || !gamma.is_finite() {
        return Err(Error::InadmissibleNoise(format!(
            "regularity index must satisfy γ > n/2 = 1/2 (got {gamma})"
        )));
    }
    Ok(())
}

/// A sampled stochastic convolution on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    times: Vec<f64>,
    values: Vec<SpectralState>,
    seed: u64,
}

impl NoisePath {
    /// The identically zero path.
    pub fn zero(space: &Arc<SpectralSpace>, times: &[f64]) -> Result<Self> {
        check_time_grid(times)?;
        Ok(Self {
            times: times.to_vec(),
            values: vec![space.zero(); times.len()],
            seed: 0,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[SpectralState] {
        &self.values
    }

    pub fn at(&self, s: usize) -> &SpectralState {
        &self.values[s]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_zero(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.coeffs().iter().all(|a| *a == Complex64::new(0.0, 0.0)))
    }

    /// RFC-4180 CSV with header `t,mode,re,im`, one row per node and mode.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,mode,re,im")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            for (k, a) in v.coeffs().iter().enumerate() {
                writeln!(out, "{t},{},{},{}", k + 1, a.re, a.im)?;
            }
        }
        Ok(())
    }
}
