//! Run configuration: a single TOML document.
//!
//! Precedence when the CLI is involved: command-line flags, then the config
//! file, then built-in defaults. The output directory additionally falls
//! back to `$CAVNL_OUTPUT_DIR` and finally `./cavnl-out`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{uniform_grid, Tolerances};
use crate::model::{ModelOptions, Parity, SystemParams};

pub const OUTPUT_DIR_ENV: &str = "CAVNL_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "cavnl-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TrajectoryEnsemble,
    EffectiveSteady,
    SubspaceDiagnostic,
    DecaySqueezing,
    Custom,
}

impl ExperimentKind {
    pub fn uses_trajectories(self) -> bool {
        matches!(self, Self::TrajectoryEnsemble | Self::DecaySqueezing | Self::Custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn values(&self) -> Vec<f64> {
        uniform_grid(self.start, self.end, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldState {
    Vacuum,
    Fock { n: usize },
    Coherent { re: f64, im: f64 },
}

/// Oscillator length of the initial particle state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthSpec {
    /// `ξ(n)` at this photon number.
    Photons(f64),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub m: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleState {
    pub xi: LengthSpec,
    /// Superposition of `|m, ξ⟩`; normalized on construction.
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub field: FieldState,
    pub particle: ParticleState,
}

impl InitialState {
    pub fn vacuum_ground(xi: LengthSpec) -> Self {
        Self {
            field: FieldState::Vacuum,
            particle: ParticleState { xi, components: vec![Component { m: 0, re: 1.0, im: 0.0 }] },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// `⟨n̂⟩`
    PhotonNumber,
    /// `Re⟨a⟩`, `Im⟨a⟩`
    FieldAmplitude,
    /// `⟨x̃²⟩` of the particle
    ParticleX2,
    CoherentProjector,
    /// One column per entry of `subspace.branches`
    CoherentBranches,
    /// One column per entry of `subspace.epsilons`
    EffectiveProjectors,
    /// From the ensemble-averaged density matrix
    Squeezing,
    /// From the ensemble-averaged density matrix
    Negativity,
}

impl ObservableKind {
    pub fn needs_density(self) -> bool {
        matches!(self, Self::Squeezing | Self::Negativity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceConfig {
    /// Largest branch index; the list follows the model parity.
    pub m_max: usize,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub branches: Vec<usize>,
    /// Field cutoff for the per-branch steady states; defaults to the model's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_fock: Option<usize>,
    #[serde(default)]
    pub export: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resonance {
    /// Photon number the light-shift expansion is taken about.
    #[serde(default)]
    pub n0: f64,
    /// Expand about the self-consistent `⟨n̂⟩` of each branch instead.
    #[serde(default)]
    pub self_consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    pub m_list: Vec<usize>,
    /// Tune `Δ_C` of each branch to its resonance; otherwise `params.delta_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance: Option<Resonance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub enabled: bool,
    /// Largest absolute change of any reported mean that still counts as
    /// converged.
    pub tolerance: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { enabled: true, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    #[serde(default)]
    pub n_traj: usize,
    /// Free-text remarks echoed into the manifest.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    /// Start of the quasi-steady window summarized in the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<f64>,
    pub params: SystemParams,
    pub model: ModelOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialState>,
    #[serde(default)]
    pub observables: Vec<ObservableKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<SubspaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadyConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn field(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.to_string(), message: msg.to_string() }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| field("<document>", e))?;
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field(&path, e.into_inner())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| field("<document>", e))
    }

    pub fn time_grid(&self) -> Result<Vec<f64>> {
        self.times.map(|t| t.values()).ok_or_else(|| field("times", "missing"))
    }

    /// Same run with both cutoffs raised by 25% (rounded up).
    pub fn enlarged(&self) -> Self {
        let mut out = self.clone();
        let up = |n: usize| n + n.div_ceil(4);
        out.model.trunc.n_fock = up(self.model.trunc.n_fock);
        out.model.trunc.m_levels = up(self.model.trunc.m_levels);
        if let Some(s) = out.subspace.as_mut() {
            s.n_fock = s.n_fock.map(up);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| field("params", e))?;
        let t = &self.model.trunc;
        if t.n_fock < 2 {
            return Err(field("model.trunc.n_fock", "must be at least 2"));
        }
        if t.m_levels < 1 {
            return Err(field("model.trunc.m_levels", "must be at least 1"));
        }
        if !(self.convergence.tolerance > 0.0) {
            return Err(field("convergence.tolerance", "must be positive"));
        }
        if let Some(g) = &self.times {
            if !(g.start.is_finite() && g.end > g.start) || g.points < 2 {
                return Err(field("times", "need finite start < end and at least 2 points"));
            }
        }
        if let Some(s) = &self.subspace {
            if let Some(e) = s.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
                return Err(field("subspace.epsilons", format!("{e} is outside (0, 1)")));
            }
            if self.model.parity == Parity::EvenOnly && s.branches.iter().any(|m| m % 2 == 1) {
                return Err(field("subspace.branches", "odd branch in the even-parity model"));
            }
            if s.branches.iter().any(|&m| m > s.m_max) {
                return Err(field("subspace.branches", "branch beyond m_max"));
            }
        }
        if let Some(init) = &self.initial_state {
            let p = &init.particle;
            if p.components.is_empty() {
                return Err(field("initial_state.particle.components", "empty"));
            }
            match p.xi {
                LengthSpec::Photons(n) if !(n >= 0.0 && n.is_finite()) => {
                    return Err(field("initial_state.particle.xi.photons", "must be a non-negative number"))
                }
                LengthSpec::Value(v) if !(v > 0.0 && v.is_finite()) => {
                    return Err(field("initial_state.particle.xi.value", "must be positive"))
                }
                _ => {}
            }
        }

        let kind = self.experiment;
        if kind.uses_trajectories() {
            if self.n_traj == 0 {
                return Err(field("n_traj", "must be positive for trajectory experiments"));
            }
            if self.times.is_none() {
                return Err(field("times", "required for trajectory experiments"));
            }
            if self.initial_state.is_none() {
                return Err(field("initial_state", "required for trajectory experiments"));
            }
            if self.observables.is_empty() {
                return Err(field("observables", "nothing to record"));
            }
            let needs_subspace = self.observables.iter().any(|o| {
                matches!(
                    o,
                    ObservableKind::CoherentProjector | ObservableKind::CoherentBranches | ObservableKind::EffectiveProjectors
                )
            });
            if needs_subspace && self.subspace.is_none() {
                return Err(field("subspace", "required by the projector observables"));
            }
        }
        match kind {
            ExperimentKind::TrajectoryEnsemble => {
                if !self.observables.iter().any(|o| {
                    matches!(o, ObservableKind::CoherentProjector | ObservableKind::EffectiveProjectors)
                }) {
                    return Err(field("observables", "trajectory_ensemble records at least one subspace projector"));
                }
            }
            ExperimentKind::DecaySqueezing => {
                if !self.observables.iter().any(|o| o.needs_density()) {
                    return Err(field("observables", "decay_squeezing records squeezing or negativity"));
                }
            }
            ExperimentKind::EffectiveSteady => {
                let s = self.steady.as_ref().ok_or_else(|| field("steady", "required for effective_steady"))?;
                if s.m_list.is_empty() {
                    return Err(field("steady.m_list", "empty"));
                }
                if let Some(w) = &s.wigner {
                    if !(w.x_max > w.x_min && w.p_max > w.p_min) || w.points < 2 {
                        return Err(field("steady.wigner", "need increasing ranges and at least 2 points"));
                    }
                }
            }
            ExperimentKind::SubspaceDiagnostic => {
                let s = self.subspace.as_ref().ok_or_else(|| field("subspace", "required for subspace_diagnostic"))?;
                if s.epsilons.is_empty() {
                    return Err(field("subspace.epsilons", "empty"));
                }
            }
            ExperimentKind::Custom => {}
        }
        Ok(())
    }
}

/// Directory for a run: the flag, else the config's `output_dir`, else
/// `$CAVNL_OUTPUT_DIR`, else `./cavnl-out`.
pub fn resolve_output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag.or(config) {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}
