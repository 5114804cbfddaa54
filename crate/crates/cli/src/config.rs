use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use selforg::analytics::weak_lattice;
use selforg::continuation::{DampingPolicy, SeedConfig, SweepOptions, DEFAULT_JUMP_THRESHOLD};
use selforg::dynamics::{IntegrationMode, RelaxOptions, Tolerances};
use selforg::model::check_ordering;
use selforg::optics::default_probe_grid;
use selforg::{ChainState, SystemParams};

/// Everything a run reads from the configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SystemParams,
    #[serde(default)]
    pub initial: Initial,
    /// Each initial position is shifted by a uniform random amount in `[−a, a]` (units `λ₀`).
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub relax: RelaxConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub figdata: FigdataConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    #[default]
    WeakLattice,
    /// A state CSV; relative paths are resolved against the configuration file.
    File { path: PathBuf },
    Positions { z: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    Full,
    #[default]
    Adiabatic,
    Frozen,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxConfig {
    pub tol_momentum: f64,
    pub tol_force: f64,
    pub mode: ModeConfig,
    pub dt: Option<f64>,
    pub max_time: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        let options = RelaxOptions::default();
        RelaxConfig {
            tol_momentum: options.tolerances.momentum,
            tol_force: options.tolerances.force,
            mode: ModeConfig::Adiabatic,
            dt: None,
            max_time: options.max_time,
        }
    }
}

impl RelaxConfig {
    pub fn options(&self) -> RelaxOptions {
        RelaxOptions {
            tolerances: Tolerances {
                momentum: self.tol_momentum,
                force: self.tol_force,
            },
            mode: match self.mode {
                ModeConfig::Full => IntegrationMode::Full,
                ModeConfig::Adiabatic => IntegrationMode::AdiabaticElimination,
                ModeConfig::Frozen => IntegrationMode::FrozenCoherences,
            },
            dt: self.dt,
            max_time: self.max_time,
        }
    }
}

fn default_damping_factor() -> Option<f64> {
    Some(0.1)
}

fn default_retries() -> u32 {
    3
}

fn default_threshold() -> f64 {
    DEFAULT_JUMP_THRESHOLD
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub end: f64,
    /// Equally spaced detunings including both ends; the default grid is used when absent.
    #[serde(default)]
    pub steps: Option<usize>,
    /// `γ_e` as a multiple of `√(ω_r s₀ N Γ₁D)` at each detuning; `null` keeps `params.ext_damping`.
    #[serde(default = "default_damping_factor")]
    pub damping_factor: Option<f64>,
    #[serde(default = "default_retries")]
    pub damping_retries: u32,
    #[serde(default = "default_threshold")]
    pub jump_threshold: f64,
}

impl SweepConfig {
    pub fn range(start: f64, end: f64) -> Self {
        SweepConfig {
            start,
            end,
            steps: None,
            damping_factor: default_damping_factor(),
            damping_retries: default_retries(),
            jump_threshold: default_threshold(),
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        match self.steps {
            Some(1) => vec![self.start],
            Some(n) => (0..n)
                .map(|k| self.start + (self.end - self.start) * k as f64 / (n - 1) as f64)
                .collect(),
            None => selforg::continuation::default_grid(self.start, self.end),
        }
    }

    pub fn options(&self, relax: RelaxOptions) -> SweepOptions {
        SweepOptions {
            relax,
            damping: match self.damping_factor {
                Some(f) => DampingPolicy::Scaled(f),
                None => DampingPolicy::Fixed,
            },
            damping_retries: self.damping_retries,
            jump_threshold: self.jump_threshold,
        }
    }

    fn validate(&self, name: &str) -> Result<(), String> {
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(format!("{name}: start and end must be finite"));
        }
        if self.steps == Some(0) {
            return Err(format!("{name}: steps must be at least 1"));
        }
        if self.steps.map_or(true, |n| n > 1) && self.start == self.end {
            return Err(format!("{name}: start and end coincide"));
        }
        if let Some(f) = self.damping_factor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(format!("{name}: damping_factor must be positive"));
            }
        }
        if !(self.jump_threshold > 0.0 && self.jump_threshold < 0.5) {
            return Err(format!("{name}: jump_threshold must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMethod {
    #[default]
    Transfer,
    SpinModel,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Explicit probe detunings; the default grid is used when absent.
    pub grid: Option<Vec<f64>>,
    pub method: ProbeMethod,
}

impl ProbeConfig {
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone().unwrap_or_else(default_probe_grid)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigdataConfig {
    /// Atom number of the weak-lattice fraction plot.
    pub weak_atoms: usize,
    pub negative: SweepConfig,
    pub positive: SweepConfig,
    /// Normal modes are computed for every `phonon_stride`-th sweep record.
    pub phonon_stride: usize,
}

impl Default for FigdataConfig {
    fn default() -> Self {
        FigdataConfig {
            weak_atoms: 10,
            negative: SweepConfig::range(-40.0, -0.2),
            positive: SweepConfig::range(40.0, 0.5),
            phonon_stride: 1,
        }
    }
}

/// A parsed configuration with its hash and the directory it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let config: RunConfig =
            serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        let loaded = LoadedConfig {
            config,
            sha256: hex::encode(Sha256::digest(&bytes)),
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<(), String> {
        let c = &self.config;
        c.params.validate().map_err(|e| e.to_string())?;
        if !(c.perturbation >= 0.0 && c.perturbation.is_finite()) {
            return Err("perturbation must be non-negative".into());
        }
        let r = &c.relax;
        if !(r.tol_momentum > 0.0 && r.tol_force > 0.0) {
            return Err("relax tolerances must be positive".into());
        }
        if !(r.max_time > 0.0) {
            return Err("relax.max_time must be positive".into());
        }
        if let Some(dt) = r.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err("relax.dt must be positive".into());
            }
        }
        if let Some(s) = &c.sweep {
            s.validate("sweep")?;
        }
        c.figdata.negative.validate("figdata.negative")?;
        c.figdata.positive.validate("figdata.positive")?;
        if c.figdata.weak_atoms < 2 {
            return Err("figdata.weak_atoms must be at least 2".into());
        }
        if c.figdata.phonon_stride == 0 {
            return Err("figdata.phonon_stride must be at least 1".into());
        }
        if let Some(grid) = &c.probe.grid {
            if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
                return Err("probe.grid must be a non-empty list of finite numbers".into());
            }
        }
        if let Initial::Positions { z } = &c.initial {
            if z.len() != c.params.n_atoms {
                return Err(format!("{} positions given for n_atoms = {}", z.len(), c.params.n_atoms));
            }
        }
        Ok(())
    }

    /// The initial state, perturbed with the given seed.
    pub fn initial_state(&self, seed: u64) -> Result<ChainState, String> {
        let c = &self.config;
        let mut state = match &c.initial {
            Initial::WeakLattice => {
                let ws = weak_lattice(c.params.n_atoms).map_err(|e| e.to_string())?;
                ChainState::at_rest(ws.positions).map_err(|e| e.to_string())?
            }
            Initial::Positions { z } => ChainState::at_rest(z.clone()).map_err(|e| e.to_string())?,
            Initial::File { path } => {
                let path = self.base_dir.join(path);
                let file = std::fs::File::open(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                let state = selforg::io::read_state(file).map_err(|e| format!("{}: {e}", path.display()))?;
                if state.len() != c.params.n_atoms {
                    return Err(format!(
                        "{} holds {} atoms, n_atoms = {}",
                        path.display(),
                        state.len(),
                        c.params.n_atoms
                    ));
                }
                state
            }
        };
        if c.perturbation > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for z in &mut state.z {
                *z += rng.gen_range(-c.perturbation..=c.perturbation);
            }
        }
        check_ordering(&state.z).map_err(|e| e.to_string())?;
        Ok(state)
    }

    /// Seed of a sweep: the weak lattice unless positions were given or perturbed.
    pub fn sweep_seed(&self, seed: u64) -> Result<SeedConfig, String> {
        if matches!(self.config.initial, Initial::WeakLattice) && self.config.perturbation == 0.0 {
            return Ok(SeedConfig::WeakLattice);
        }
        Ok(SeedConfig::Given(self.initial_state(seed)?.z))
    }
}
