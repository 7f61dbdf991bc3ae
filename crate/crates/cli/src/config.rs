//! Experiment configuration: a TOML file, overridden field by field from the command line.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use scarlab::dynamics::{PropagatorConfig, RampKind, VelocityScan};
use scarlab::mps_model::{PerturbationKind, PerturbationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Spectrum,
    Dynamics,
    VelocityScan,
    Agp,
    Susceptibility,
    Qsl,
    Kpm,
    Tower,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::Dynamics => "dynamics",
            Task::VelocityScan => "velocity-scan",
            Task::Agp => "agp",
            Task::Susceptibility => "susceptibility",
            Task::Qsl => "qsl",
            Task::Kpm => "kpm",
            Task::Tower => "tower",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Mps,
    Fqh,
    Tower,
}

/// Ground: the reference state is the ground state (H⁺, β > 0). Scar: it sits mid-spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Ground,
    Scar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// The analytic reference state at s_start.
    Reference,
    /// The eigenstate closest in energy to the scar.
    Thermal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub variant: VariantName,
    /// Chain lengths (MPS and tower models).
    pub n: Vec<usize>,
    pub lx: usize,
    pub ly: usize,
    /// Defaults to +5 for the ground variant and −5 for the scar variant.
    pub beta: Option<f64>,
    pub omega0: f64,
    pub perturbation: Option<PerturbationSpec>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Mps,
            variant: VariantName::Scar,
            n: vec![10],
            lx: 3,
            ly: 4,
            beta: None,
            omega0: 1.0,
            perturbation: None,
        }
    }
}

impl ModelConfig {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(match self.variant {
            VariantName::Ground => 5.0,
            VariantName::Scar => -5.0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { s: vec![0.5], v: vec![1e-2], epsilon: vec![0.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumOptions {
    pub exclude_scar: bool,
    pub bins: usize,
    pub entropies: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { exclude_scar: false, bins: 40, entropies: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsOptions {
    pub ramp: RampKind,
    pub s_start: f64,
    pub s_end: f64,
    pub initial: InitialState,
    /// Diagonalize at every checkpoint and write ρ_nn and S_diag.
    pub populations: bool,
    /// Save the state every this many steps for resuming; 0 disables.
    pub restart_every: usize,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            ramp: RampKind::Linear,
            s_start: 0.0,
            s_end: 1.0,
            initial: InitialState::Reference,
            populations: false,
            restart_every: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgpOptions {
    /// Regularization μ; N/D when absent.
    pub mu: Option<f64>,
    /// Factor above the ε = 0 power law that marks the exponential regime.
    pub excess: f64,
    /// Grid for crossing detection on [s_start, s_end].
    pub crossing_points: usize,
    pub min_slope: f64,
    pub threshold: f64,
    /// Stencil spacing for derivatives of the reference state.
    pub stencil: f64,
}

impl Default for AgpOptions {
    fn default() -> Self {
        Self { mu: None, excess: 3.0, crossing_points: 201, min_slope: 1e-6, threshold: 0.99, stencil: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QslOptions {
    /// Fit window (0, s_max] for C_N.
    pub s_max: f64,
    pub points: usize,
}

impl Default for QslOptions {
    fn default() -> Self {
        Self { s_max: 1.0, points: 21 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KpmOptions {
    pub preset: String,
    /// Overrides the preset's moment count.
    pub moments: Option<usize>,
    /// Eigenstates n of the ground-variant Hamiltonian used as probes.
    pub probes: Vec<usize>,
    pub omega_points: usize,
    pub omega_range: Option<(f64, f64)>,
}

impl Default for KpmOptions {
    fn default() -> Self {
        Self { preset: "desk-3x4".into(), moments: None, probes: vec![0], omega_points: 4096, omega_range: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TowerOptions {
    pub ell: Vec<usize>,
    /// Tower energies are checked by sparse matvec up to this sector dimension.
    pub max_energy_dim: usize,
}

impl Default for TowerOptions {
    fn default() -> Self {
        Self { ell: vec![0, 1, 2, 3, 4], max_energy_dim: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    pub out: PathBuf,
    pub workers: Option<usize>,
    /// Largest sector dimension for sparse work.
    pub max_dim: usize,
    /// Largest sector dimension for dense diagonalization.
    pub max_dense_dim: usize,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub spectrum: SpectrumOptions,
    pub dynamics: DynamicsOptions,
    pub propagator: PropagatorConfig,
    pub velocity: VelocityScan,
    pub agp: AgpOptions,
    pub qsl: QslOptions,
    pub kpm: KpmOptions,
    pub tower: TowerOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: None,
            out: PathBuf::from("scarlab-out"),
            workers: None,
            max_dim: 3_000_000,
            max_dense_dim: 12_000,
            model: Default::default(),
            grid: Default::default(),
            spectrum: Default::default(),
            dynamics: Default::default(),
            propagator: Default::default(),
            velocity: Default::default(),
            agp: Default::default(),
            qsl: Default::default(),
            kpm: Default::default(),
            tower: Default::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }

    /// Checks that do not need any physics.
    pub fn validate(&self) -> Result<(), String> {
        let m = &self.model;
        if matches!(m.kind, ModelKind::Mps | ModelKind::Tower) && m.n.is_empty() {
            return Err("model.n must list at least one chain length".into());
        }
        if let Some(&n) = m.n.iter().find(|&&n| n < 2 || n % 2 == 1) {
            return Err(format!("chain length {n} must be even and at least 2"));
        }
        if self.grid.s.iter().any(|s| !s.is_finite()) || self.grid.v.iter().any(|v| !(*v > 0.0)) {
            return Err("grid.s must be finite and grid.v positive".into());
        }
        if self.grid.epsilon.iter().any(|e| !(*e >= 0.0)) {
            return Err("grid.epsilon must be nonnegative".into());
        }
        if self.workers == Some(0) {
            return Err("workers must be positive".into());
        }
        Ok(())
    }
}

/// Command-line overrides. Every flag replaces the matching config field.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub variant: Option<VariantName>,
    /// Chain lengths, comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// FQH lattice as LXxLY, e.g. 3x4.
    #[arg(long = "L")]
    pub lattice: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub omega0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub v: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long)]
    pub perturbation: Option<PerturbationName>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ramp: Option<RampName>,
    #[arg(long, allow_hyphen_values = true)]
    pub s_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s_end: Option<f64>,
    #[arg(long)]
    pub initial: Option<InitialState>,
    /// Write ρ_nn and S_diag at every checkpoint.
    #[arg(long)]
    pub populations: bool,
    #[arg(long)]
    pub checkpoints: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub v_max: Option<f64>,
    #[arg(long)]
    pub v_min: Option<f64>,
    /// KPM probe indices, e.g. 0..6,100 (ranges inclusive).
    #[arg(long)]
    pub probes: Option<String>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub moments: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ell: Option<Vec<usize>>,
    #[arg(long)]
    pub exclude_scar: bool,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub max_dim: Option<usize>,
    #[arg(long)]
    pub max_dense_dim: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PerturbationName {
    CleanZz,
    DisorderedZz,
    DisorderedZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RampName {
    Linear,
    Sinusoidal,
}

/// Parses "0..6,100" into [0, 1, …, 6, 100].
pub fn parse_index_list(text: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| format!("bad range start in {part:?}"))?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in {part:?}"))?;
            if b < a {
                return Err(format!("empty range {part:?}"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad index {part:?}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty index list".into());
    }
    Ok(out)
}

fn parse_lattice(text: &str) -> Result<(usize, usize), String> {
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(|| format!("lattice {text:?} is not of the form LXxLY"))?;
    Ok((a.trim().parse().map_err(|_| format!("bad lattice {text:?}"))?, b.trim().parse().map_err(|_| format!("bad lattice {text:?}"))?))
}

impl Overrides {
    pub fn apply(&self, c: &mut ExperimentConfig) -> Result<(), String> {
        if let Some(x) = &self.out {
            c.out = x.clone();
        }
        if let Some(x) = self.model {
            c.model.kind = x;
        }
        if let Some(x) = self.variant {
            c.model.variant = x;
        }
        if let Some(x) = &self.n {
            c.model.n = x.clone();
        }
        if let Some(x) = &self.lattice {
            (c.model.lx, c.model.ly) = parse_lattice(x)?;
        }
        if self.beta.is_some() {
            c.model.beta = self.beta;
        }
        if let Some(x) = self.omega0 {
            c.model.omega0 = x;
        }
        if let Some(x) = &self.s {
            c.grid.s = x.clone();
        }
        if let Some(x) = &self.v {
            c.grid.v = x.clone();
        }
        if let Some(x) = &self.epsilon {
            c.grid.epsilon = x.clone();
        }
        if self.perturbation.is_some() || self.seed.is_some() {
            let p = c.model.perturbation.get_or_insert(PerturbationSpec::clean(0.0));
            if let Some(k) = self.perturbation {
                p.kind = match k {
                    PerturbationName::CleanZz => PerturbationKind::CleanZz,
                    PerturbationName::DisorderedZz => PerturbationKind::DisorderedZz,
                    PerturbationName::DisorderedZ => PerturbationKind::DisorderedZ,
                };
            }
            if let Some(s) = self.seed {
                p.seed = s;
            }
        }
        if let Some(x) = self.ramp {
            c.dynamics.ramp = match x {
                RampName::Linear => RampKind::Linear,
                RampName::Sinusoidal => RampKind::Sinusoidal,
            };
        }
        if let Some(x) = self.s_start {
            c.dynamics.s_start = x;
        }
        if let Some(x) = self.s_end {
            c.dynamics.s_end = x;
        }
        if let Some(x) = self.initial {
            c.dynamics.initial = x;
        }
        if self.populations {
            c.dynamics.populations = true;
        }
        if let Some(x) = self.checkpoints {
            c.propagator.checkpoints = x;
        }
        if let Some(x) = self.threshold {
            c.velocity.threshold = x;
            c.agp.threshold = x;
        }
        if let Some(x) = self.v_max {
            c.velocity.v_max = x;
        }
        if let Some(x) = self.v_min {
            c.velocity.v_min = x;
        }
        if let Some(x) = &self.probes {
            c.kpm.probes = parse_index_list(x)?;
        }
        if let Some(x) = &self.preset {
            c.kpm.preset = x.clone();
        }
        if self.moments.is_some() {
            c.kpm.moments = self.moments;
        }
        if let Some(x) = &self.ell {
            c.tower.ell = x.clone();
        }
        if self.exclude_scar {
            c.spectrum.exclude_scar = true;
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        if let Some(x) = self.max_dim {
            c.max_dim = x;
        }
        if let Some(x) = self.max_dense_dim {
            c.max_dense_dim = x;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let mut c = ExperimentConfig::default();
        c.task = Some(Task::VelocityScan);
        c.model.perturbation = Some(PerturbationSpec::clean(0.1));
        c.kpm.omega_range = Some((-1.0, 1.0));
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[model]\nsize = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("colour = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("[propagator]\ndt = 0.1\n").is_err());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = ExperimentConfig::from_toml("task = \"qsl\"\n[model]\nn = [10, 100]\n").unwrap();
        assert_eq!(c.task, Some(Task::Qsl));
        assert_eq!(c.model.n, vec![10, 100]);
        assert_eq!(c.grid, GridConfig::default());
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_index_list("0..6,100").unwrap(), vec![0, 1, 2, 3, 4, 5, 6, 100]);
        assert_eq!(parse_index_list("3..=4").unwrap(), vec![3, 4]);
        assert!(parse_index_list("4..3").is_err());
        assert!(parse_index_list("x").is_err());
    }

    #[test]
    fn lattice_flag() {
        assert_eq!(parse_lattice("3x4").unwrap(), (3, 4));
        assert!(parse_lattice("34").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        c.model.n = vec![9];
        assert!(c.validate().is_err());
        c.model.n = vec![10];
        c.grid.v = vec![0.0];
        assert!(c.validate().is_err());
    }
}
