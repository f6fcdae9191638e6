//! Scenario configuration: a versioned JSON document with no unknown keys.

use crate::emit::Format;
use crate::error::{CliError, CliResult};
use num_complex::Complex;
use pairdens::basis::{build_free_dirac_basis, build_free_kg_basis, build_nonrel_basis, WavePacket};
use pairdens::densities::{AntibosonSign, HoleForm, RelativisticOptions};
use pairdens::propagate::{HamiltonianSpec, TimeProfile};
use pairdens::{Basis, Hamiltonian, ModeIndex, Packet, StatisticsKind, TheoryKind};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
/// Hard limit on `dt · ‖G‖`.
pub const STEP_LIMIT: f64 = 0.1;
/// Above this `dt · ‖G‖` a warning is logged.
pub const STEP_WARNING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub theory: Theory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistics: Option<Statistics>,
    pub basis: BasisConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    /// `[re, im]` pairs over the positive branch, or over the whole basis
    /// with zeros on the negative branch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet: Option<Vec<[f64; 2]>>,
    pub time: TimeConfig,
    #[serde(default)]
    pub densities: DensityConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theory {
    NonRelativistic,
    Dirac,
    KleinGordon,
}

impl From<Theory> for TheoryKind {
    fn from(t: Theory) -> Self {
        match t {
            Theory::NonRelativistic => TheoryKind::NonRelativistic,
            Theory::Dirac => TheoryKind::Dirac,
            Theory::KleinGordon => TheoryKind::KleinGordon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistics {
    Fermion,
    Boson,
    Distinguishable,
}

impl From<Statistics> for StatisticsKind {
    fn from(s: Statistics) -> Self {
        match s {
            Statistics::Fermion => StatisticsKind::Fermion,
            Statistics::Boson => StatisticsKind::Boson,
            Statistics::Distinguishable => StatisticsKind::Distinguishable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_neg: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_pos: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_half: Option<usize>,
    pub length: f64,
    #[serde(default = "unit")]
    pub mass: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `height · exp(-(x - center)² / (2 width²))`.
    GaussianBarrier { height: f64, center: f64, width: f64 },
    /// Constant coupling `v = [re, im]` between one negative and one positive mode.
    TwoState {
        v: [f64; 2],
        #[serde(default = "first")]
        negative: usize,
        #[serde(default = "first")]
        positive: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Constant {
        #[serde(default = "unit")]
        amplitude: f64,
    },
    RectWindow { amplitude: f64, t_on: f64, t_off: f64 },
    Gaussian { amplitude: f64, center: f64, width: f64 },
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::Constant { amplitude: 1.0 }
    }
}

impl ProfileConfig {
    pub fn to_profile(&self) -> TimeProfile<f64> {
        match *self {
            ProfileConfig::Constant { amplitude } => TimeProfile::Constant { amplitude },
            ProfileConfig::RectWindow { amplitude, t_on, t_off } => TimeProfile::RectWindow { amplitude, t_on, t_off },
            ProfileConfig::Gaussian { amplitude, center, width } => TimeProfile::Gaussian { amplitude, center, width },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub dt: f64,
    /// Steps between output times.
    #[serde(default = "default_stride")]
    pub output_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleFormConfig {
    #[default]
    Symmetric,
    FilledSea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntibosonConfig {
    #[default]
    Particle,
    Charge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    #[serde(default)]
    pub hole_form: HoleFormConfig,
    #[serde(default)]
    pub antiboson: AntibosonConfig,
}

impl DensityConfig {
    pub fn options(&self) -> RelativisticOptions {
        RelativisticOptions {
            hole_form: match self.hole_form {
                HoleFormConfig::Symmetric => HoleForm::Symmetric,
                HoleFormConfig::FilledSea => HoleForm::FilledSea,
            },
            antiboson: match self.antiboson {
                AntibosonConfig::Particle => AntibosonSign::Particle,
                AntibosonConfig::Charge => AntibosonSign::Charge,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchName {
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRef {
    pub branch: BranchName,
    pub k: usize,
}

impl ModeRef {
    pub fn index(&self) -> ModeIndex {
        match self.branch {
            BranchName::Negative => ModeIndex::negative(self.k),
            BranchName::Positive => ModeIndex::positive(self.k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: Format,
    #[serde(default = "default_prefix")]
    pub prefix: String,
    /// Also emit the single-particle channels for one initial mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_particle: Option<ModeRef>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, format: Format::Csv, prefix: default_prefix(), single_particle: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u8>,
}

fn unit() -> f64 {
    1.0
}

fn first() -> usize {
    1
}

fn default_grid() -> usize {
    pairdens::basis::DEFAULT_GRID_POINTS
}

fn default_stride() -> usize {
    100
}

fn default_prefix() -> String {
    "run".into()
}

/// 1-based line of the first occurrence of `"key"` in the source text.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Formats a semantic error with the line of `key` when the source is known.
fn located(source: Option<&str>, key: &str, msg: impl std::fmt::Display) -> CliError {
    match source.and_then(|s| line_of(s, key)) {
        Some(line) => CliError::Config(format!("line {line}: `{key}`: {msg}")),
        None => CliError::Config(format!("`{key}`: {msg}")),
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> CliResult<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
        CliError::Config(format!("line {}, column {}: {msg}", e.line(), e.column()))
    })?;
    cfg.validate(Some(text))?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> CliResult<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

impl ScenarioConfig {
    pub fn theory_kind(&self) -> TheoryKind {
        self.theory.into()
    }

    pub fn statistics_kind(&self) -> StatisticsKind {
        match (self.statistics, self.theory) {
            (Some(s), _) => s.into(),
            (None, Theory::KleinGordon) => StatisticsKind::Boson,
            (None, _) => StatisticsKind::Fermion,
        }
    }

    /// Checks everything that does not need the basis to be built.
    pub fn validate(&self, source: Option<&str>) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(located(
                source,
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let b = &self.basis;
        match self.theory {
            Theory::NonRelativistic => {
                if b.k_neg.is_none() || b.k_pos.is_none() {
                    return Err(located(source, "basis", "non-relativistic basis needs k_neg and k_pos"));
                }
                if b.k_half.is_some() {
                    return Err(located(source, "k_half", "only used by relativistic theories"));
                }
            }
            Theory::Dirac | Theory::KleinGordon => {
                if b.k_half.is_none() {
                    return Err(located(source, "basis", "relativistic basis needs k_half"));
                }
                if b.k_neg.is_some() || b.k_pos.is_some() {
                    return Err(located(source, "basis", "k_neg/k_pos only apply to the non-relativistic theory"));
                }
            }
        }
        match (self.theory, self.statistics) {
            (Theory::Dirac, Some(s)) if s != Statistics::Fermion => {
                return Err(located(source, "statistics", "Dirac hole theory needs fermions"));
            }
            (Theory::KleinGordon, Some(s)) if s != Statistics::Boson => {
                return Err(located(source, "statistics", "Klein-Gordon particles are bosons"));
            }
            _ => {}
        }
        finite(source, "length", b.length)?;
        finite(source, "mass", b.mass)?;
        match &self.potential {
            PotentialConfig::GaussianBarrier { height, center, width } => {
                finite(source, "height", *height)?;
                finite(source, "center", *center)?;
                finite(source, "width", *width)?;
            }
            PotentialConfig::TwoState { v, .. } => {
                finite(source, "v", v[0])?;
                finite(source, "v", v[1])?;
            }
        }
        self.profile.to_profile().validate().map_err(|e| located(source, "profile", e))?;
        if let Some(p) = &self.packet {
            for c in p {
                finite(source, "packet", c[0])?;
                finite(source, "packet", c[1])?;
            }
        }
        let t = &self.time;
        finite(source, "t_max", t.t_max)?;
        finite(source, "dt", t.dt)?;
        if t.t_max < 0.0 {
            return Err(located(source, "t_max", "must be non-negative"));
        }
        if t.dt <= 0.0 {
            return Err(located(source, "dt", "must be positive"));
        }
        if t.output_stride == 0 {
            return Err(located(source, "output_stride", "must be at least 1"));
        }
        if self.oracle.enabled && self.theory == Theory::KleinGordon {
            return Err(located(source, "oracle", "no Fock-space oracle for Klein-Gordon"));
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return Err(located(source, "prefix", "must be a plain, non-empty file name stem"));
        }
        if self.theory == Theory::KleinGordon && self.densities.hole_form == HoleFormConfig::FilledSea {
            return Err(located(source, "hole_form", "the filled-sea form has no Klein-Gordon counterpart"));
        }
        Ok(())
    }

    /// Output times `k · stride · dt`, closed by `t_max`.
    pub fn output_times(&self) -> Vec<f64> {
        let step = self.time.output_stride as f64 * self.time.dt;
        let mut times = Vec::new();
        let mut k = 0usize;
        loop {
            let t = k as f64 * step;
            if t >= self.time.t_max * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            k += 1;
        }
        times.push(self.time.t_max);
        times
    }
}

fn finite(source: Option<&str>, key: &str, v: f64) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(located(source, key, "must be finite"))
    }
}

/// A config resolved into library objects.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub basis: Basis,
    pub spec: Hamiltonian,
    pub packet: Option<Packet>,
    pub statistics: StatisticsKind,
    /// `dt · ‖G‖` for the configured step.
    pub step_norm: f64,
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig, source: Option<&str>) -> CliResult<Self> {
        let b = &cfg.basis;
        let basis = match cfg.theory {
            Theory::NonRelativistic => build_nonrel_basis(
                b.k_neg.unwrap_or(0),
                b.k_pos.unwrap_or(0),
                b.length,
                b.mass,
                b.grid_points,
            ),
            Theory::Dirac => build_free_dirac_basis(b.k_half.unwrap_or(0), b.length, b.mass, b.grid_points),
            Theory::KleinGordon => build_free_kg_basis(b.k_half.unwrap_or(0), b.length, b.mass, b.grid_points),
        }
        .map_err(|e| located(source, "basis", e))?;

        let profile = cfg.profile.to_profile();
        let spec = match cfg.potential {
            PotentialConfig::GaussianBarrier { height, center, width } => {
                HamiltonianSpec::gaussian_barrier(&basis, height, center, width, profile)
            }
            PotentialConfig::TwoState { v, negative, positive } => HamiltonianSpec::mode_pair_coupling(
                &basis,
                &ModeIndex::negative(negative),
                &ModeIndex::positive(positive),
                Complex::new(v[0], v[1]),
                profile,
            ),
        }
        .map_err(|e| located(source, "potential", e))?;

        let packet = match &cfg.packet {
            None => None,
            Some(raw) => {
                let coeffs: Vec<_> = raw.iter().map(|c| Complex::new(c[0], c[1])).collect();
                let p = if coeffs.len() == basis.dim() {
                    WavePacket::from_full(&basis, &coeffs)
                } else if coeffs.len() == basis.n_pos() {
                    WavePacket::new(coeffs)
                } else {
                    return Err(located(
                        source,
                        "packet",
                        format!(
                            "expected {} (positive branch) or {} (full basis) coefficients, found {}",
                            basis.n_pos(),
                            basis.dim(),
                            coeffs.len()
                        ),
                    ));
                };
                Some(p.map_err(|e| located(source, "packet", e))?)
            }
        };

        let step_norm = cfg.time.dt * spec.generator_norm_bound();
        if step_norm > STEP_LIMIT {
            return Err(located(
                source,
                "dt",
                format!("dt·‖G‖ = {step_norm:.3e} exceeds {STEP_LIMIT}; reduce dt"),
            ));
        }
        if step_norm > STEP_WARNING {
            log::warn!("dt·‖G‖ = {step_norm:.3e} is above {STEP_WARNING}; accuracy may suffer");
        }
        Ok(Scenario { basis, spec, packet, statistics: cfg.statistics_kind(), step_norm })
    }
}
