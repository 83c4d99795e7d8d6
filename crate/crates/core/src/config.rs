//! TOML run configuration and its translation into solver objects.
//!
//! ```toml
//! [space]
//! length = 1.0
//! modes = 8
//!
//! [beta]
//! kind = "linear"
//! c = [0.1, 1.0]
//!
//! [initial]
//! kind = "mode"
//! j = 1
//!
//! [solver]
//! horizon = 0.1
//! dt = 1e-4
//! ```

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feynman::{ActionSpec, CheckOptions};
use crate::mean_field::{DriftSpec, TimeModulation};
use crate::monotone::{MonotoneMap, SaturatingProfile};
use crate::noise::NoiseSpec;
use crate::solver::{Problem, Scheme, SolverConfig};
use crate::space::{SpectralSpace, SpectralState};

type C = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaConfig>,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feynman: Option<FeynmanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelftestConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default = "one")]
    pub length: f64,
    pub modes: usize,
    /// Collocation points; defaults to `8 · modes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKind {
    Linear,
    PowerPhase,
    Saturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaConfig {
    pub kind: BetaKind,
    /// Coefficient of `linear`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<C>,
    /// Exponent of `power_phase`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// `β̃(t) = base + gain·t/(1+t)` of `saturating`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<C>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    /// Adds `strict·z` to the map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftKindConfig {
    #[default]
    Zero,
    LinearInMean,
    SpectralLinear,
    Cylindrical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    #[serde(default)]
    pub kind: DriftKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<C>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<C>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<Vec<Vec<C>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<Vec<Vec<C>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<Vec<C>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    #[serde(default)]
    pub modulation: TimeModulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub gamma: f64,
    pub r: f64,
    pub amp: f64,
    /// Number of driven modes `K`.
    pub modes: usize,
    #[serde(default)]
    pub envelope: TimeModulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `X₀ = scale · ẽ_j`.
    Mode {
        j: usize,
        #[serde(default = "unit")]
        scale: C,
    },
    /// `X₀ = Σ_j scale · j^{−power} ẽ_j`.
    PowerDecay {
        #[serde(default = "three")]
        power: f64,
        #[serde(default = "unit")]
        scale: C,
    },
    /// Explicit coefficients, zero-padded to the truncation.
    Coefficients { values: Vec<C> },
    Zero,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self::Mode { j: 1, scale: unit() }
    }
}

fn unit() -> C {
    C::new(1.0, 0.0)
}

fn three() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "tol_inner")]
    pub tol_inner: f64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
    #[serde(default = "tol_law")]
    pub tol_law: f64,
    #[serde(default = "picard_max")]
    pub picard_max: usize,
    #[serde(default = "ensemble")]
    pub ensemble: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn tol_inner() -> f64 {
    1e-10
}
fn max_iter() -> usize {
    200
}
fn tol_law() -> f64 {
    1e-8
}
fn picard_max() -> usize {
    20
}
fn ensemble() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeynmanConfig {
    pub action: ActionSpec,
    pub eps: Vec<f64>,
    #[serde(default = "fh")]
    pub h: f64,
    #[serde(default = "half_width")]
    pub half_width: f64,
    /// Gaussian profile width `w` in `exp(−x²/(2w²))`.
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default = "window")]
    pub window: [f64; 2],
    #[serde(default = "stride")]
    pub stride: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "order")]
    pub order: usize,
    /// `κ` of the phase change of variables `Φ = e^{iκγφ}/(κγ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Accepted range of the fitted residual slope.
    #[serde(default = "slope_window")]
    pub slope_window: [f64; 2],
}

fn fh() -> f64 {
    1e-3
}
fn half_width() -> f64 {
    3.0
}
fn window() -> [f64; 2] {
    [-1.0, 1.0]
}
fn stride() -> f64 {
    0.005
}
fn order() -> usize {
    16
}
fn slope_window() -> [f64; 2] {
    [1.2, 1.8]
}

impl FeynmanConfig {
    pub fn options(&self) -> CheckOptions {
        CheckOptions {
            window: (self.window[0], self.window[1]),
            stride: self.stride,
            hbar: self.hbar,
            order: self.order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestConfig {
    #[serde(default = "max_size")]
    pub max_size: usize,
    #[serde(default = "pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn max_size() -> usize {
    6
}
fn pairs() -> usize {
    100
}

/// Prefixes an error with the line of the `[section]` header it concerns.
fn anchored(source: &str, section: &str, err: Error) -> Error {
    let header = format!("[{section}]");
    let line = source
        .lines()
        .position(|l| l.trim_start().starts_with(&header))
        .map(|i| i + 1);
    match line {
        Some(n) => Error::Config(format!("line {n} {header}: {err}")),
        None => Error::Config(format!("{header}: {err}")),
    }
}

/// A parsed configuration plus its source text (for error anchoring).
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    source: String,
}

impl LoadedConfig {
    pub fn from_str(source: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(source).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            config,
            source: source.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&source)
    }

    fn at(&self, section: &str, err: Error) -> Error {
        anchored(&self.source, section, err)
    }

    pub fn space(&self) -> Result<Arc<SpectralSpace>> {
        let s = section(&self.config.space, "space")?;
        let grid = s.grid.unwrap_or(8 * s.modes.max(1));
        SpectralSpace::new(s.length, s.modes, grid).map_err(|e| self.at("space", e))
    }

    pub fn beta(&self) -> Result<MonotoneMap> {
        let b = section(&self.config.beta, "beta")?;
        let missing = |field: &str| self.at("beta", Error::Config(format!("{:?} needs `{field}`", b.kind)));
        let base = match b.kind {
            BetaKind::Linear => MonotoneMap::linear(b.c.ok_or_else(|| missing("c"))?),
            BetaKind::PowerPhase => MonotoneMap::power_phase(b.p.ok_or_else(|| missing("p"))?),
            BetaKind::Saturating => MonotoneMap::modulus(Arc::new(SaturatingProfile {
                base: b.base.ok_or_else(|| missing("base"))?,
                gain: b.gain.ok_or_else(|| missing("gain"))?,
            })),
        }
        .map_err(|e| self.at("beta", e))?;
        match b.strict {
            Some(eps) => MonotoneMap::strictified(base, eps).map_err(|e| self.at("beta", e)),
            None => Ok(base),
        }
    }

    pub fn drift(&self, space: &Arc<SpectralSpace>) -> Result<DriftSpec> {
        let d = &self.config.drift;
        let need = |v: &Option<Vec<Vec<C>>>, name: &str| {
            v.clone()
                .ok_or_else(|| self.at("drift", Error::Config(format!("{:?} needs `{name}`", d.kind))))
        };
        let zero = C::new(0.0, 0.0);
        let spec = match d.kind {
            DriftKindConfig::Zero => Ok(DriftSpec::zero(space)),
            DriftKindConfig::LinearInMean => {
                DriftSpec::linear_in_mean(space, d.a.unwrap_or(zero), d.b.unwrap_or(zero))
            }
            DriftKindConfig::SpectralLinear => {
                DriftSpec::spectral_linear(space, need(&d.theta1, "theta1")?, need(&d.theta2, "theta2")?)
            }
            DriftKindConfig::Cylindrical => {
                let gains = d.gains.clone().ok_or_else(|| {
                    self.at("drift", Error::Config("Cylindrical needs `gains`".into()))
                })?;
                DriftSpec::cylindrical(space, need(&d.theta, "theta")?, gains)
            }
        }
        .map_err(|e| self.at("drift", e))?;
        Ok(spec.with_modulation(d.modulation))
    }

    pub fn noise(&self) -> Result<Option<NoiseSpec>> {
        self.config
            .noise
            .as_ref()
            .map(|n| {
                NoiseSpec::power_law(n.gamma, n.r, n.amp, n.modes)
                    .map(|g| g.with_envelope(n.envelope))
                    .map_err(|e| self.at("noise", e))
            })
            .transpose()
    }

    pub fn problem(&self) -> Result<Problem> {
        let space = self.space()?;
        let mut p = Problem::new(space.clone(), self.beta()?).with_drift(self.drift(&space)?);
        if let Some(g) = self.noise()? {
            if g.modes() > space.modes() {
                return Err(self.at(
                    "noise",
                    Error::InadmissibleNoise(format!(
                        "noise drives {} modes but the truncation is {}",
                        g.modes(),
                        space.modes()
                    )),
                ));
            }
            p = p.with_noise(g);
        }
        Ok(p)
    }

    pub fn initial(&self, space: &Arc<SpectralSpace>) -> Result<SpectralState> {
        Ok(match &self.config.initial {
            InitialConfig::Mode { j, scale } => {
                if *j == 0 || *j > space.modes() {
                    return Err(self.at(
                        "initial",
                        Error::Config(format!("mode {j} outside 1..={}", space.modes())),
                    ));
                }
                space.mode(*j).scale(*scale)
            }
            InitialConfig::PowerDecay { power, scale } => {
                space.state_from_fn(|j| scale * (j as f64).powf(-power))
            }
            InitialConfig::Coefficients { values } => {
                if values.len() > space.modes() {
                    return Err(self.at(
                        "initial",
                        Error::Config(format!(
                            "{} coefficients exceed the truncation {}",
                            values.len(),
                            space.modes()
                        )),
                    ));
                }
                space.state_from_fn(|j| values.get(j - 1).copied().unwrap_or_default())
            }
            InitialConfig::Zero => space.zero(),
        })
    }

    pub fn solver(&self, seed_override: Option<u64>) -> Result<SolverConfig> {
        let s = section(&self.config.solver, "solver")?;
        if s.ensemble == 0 {
            return Err(self.at("solver", Error::Config("ensemble must be ≥ 1".into())));
        }
        let mut cfg = SolverConfig::new(s.horizon, s.dt).with_scheme(s.scheme);
        cfg.tol_inner = s.tol_inner;
        cfg.max_iter = s.max_iter;
        cfg.tol_law = s.tol_law;
        cfg.picard_max = s.picard_max;
        cfg.ensemble = s.ensemble;
        cfg.contraction = s.contraction;
        cfg.seed = seed_override.unwrap_or(s.seed);
        cfg.times().map_err(|e| self.at("solver", e))?;
        Ok(cfg)
    }

    /// The problem at truncation `n` with this configuration's other blocks.
    pub fn at_level(&self, n: usize) -> Result<(Problem, SpectralState)> {
        let mut other = self.clone();
        let base = section(&self.config.space, "space")?;
        other.config.space = Some(SpaceConfig {
            length: base.length,
            modes: n,
            grid: base.grid.map(|g| g * n / base.modes.max(1)),
        });
        let p = other.problem()?;
        let x0 = other.initial(&p.space)?;
        Ok((p, x0))
    }

}

/// The named section, or a configuration error saying it is missing.
pub fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("task needs a [{name}] section")))
}
