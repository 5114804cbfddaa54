//! Adiabatic continuation in the pump detuning.
//!
//! Starting from the weak-scattering lattice far from resonance, the detuning
//! is stepped towards resonance and the chain is relaxed at every step,
//! seeded with the previous configuration. Each converged configuration is
//! summarized by its lattice constant, its normalized excited population and
//! a phase-slip descriptor.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::analytics::weak_lattice;
use crate::coherence::excited_population;
use crate::dynamics::{relax_to_steady_state, RelaxOptions, RelaxReport};
use crate::error::{Error, Result};
use crate::model::{fraction, fractional_positions, wrapped_difference, ChainState, FractionalConfig, SystemParams};

/// `(central-pair spacing, mean spacing)` in `λ₀`.
///
/// The central pair is `z_{N/2+1} − z_{N/2}` (one-based), the mean is
/// `(z_N − z_1)/(N − 1)`.
pub fn lattice_constant(z: &[f64]) -> Result<(f64, f64)> {
    let n = z.len();
    if n < 2 {
        return Err(Error::InvalidState("lattice constant needs two atoms".into()));
    }
    let central = z[n / 2] - z[n / 2 - 1];
    let mean = (z[n - 1] - z[0]) / (n - 1) as f64;
    Ok((central, mean))
}

/// Detuning `NΓ₁D/2π` around which the positive-detuning lattice reaches `λ₀`.
pub fn crossover_detuning(params: &SystemParams) -> f64 {
    params.n_atoms as f64 * params.gamma_1d / (2.0 * PI)
}

/// Regular lattice segments separated by jumps in `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSlip {
    /// Index `j` of the last atom of every segment but the final one.
    pub boundaries: Vec<usize>,
    /// Circular mean of `f` in each segment, in `(0, 1]`.
    pub segment_means: Vec<f64>,
    /// Largest deviation of `f` from its segment mean.
    pub segment_spread: Vec<f64>,
    /// `mean_{s+1} − mean_s` wrapped to `(−1/2, 1/2]`.
    pub delta_f: Vec<f64>,
}

impl PhaseSlip {
    pub fn n_segments(&self) -> usize {
        self.segment_means.len()
    }

    pub fn max_spread(&self) -> f64 {
        self.segment_spread.iter().cloned().fold(0.0, f64::max)
    }
}

pub const DEFAULT_JUMP_THRESHOLD: f64 = 0.1;

fn circular_mean(f: &[f64]) -> f64 {
    let sum: Complex64 = f.iter().map(|x| Complex64::from_polar(1.0, 2.0 * PI * x)).sum();
    fraction(sum.arg() / (2.0 * PI))
}

/// Splits the chain wherever neighbouring fractions jump by more than `threshold`.
pub fn detect_phase_slip(config: &FractionalConfig, threshold: f64) -> PhaseSlip {
    let f = config.as_slice();
    let mut boundaries = Vec::new();
    for j in 0..f.len().saturating_sub(1) {
        if wrapped_difference(f[j + 1], f[j]).abs() > threshold {
            boundaries.push(j);
        }
    }
    let mut segment_means = Vec::new();
    let mut segment_spread = Vec::new();
    let mut start = 0;
    for end in boundaries.iter().map(|b| b + 1).chain(std::iter::once(f.len())) {
        let seg = &f[start..end];
        if !seg.is_empty() {
            let mean = circular_mean(seg);
            let spread = seg
                .iter()
                .map(|x| wrapped_difference(*x, mean).abs())
                .fold(0.0, f64::max);
            segment_means.push(mean);
            segment_spread.push(spread);
        }
        start = end;
    }
    let delta_f = segment_means
        .windows(2)
        .map(|w| wrapped_difference(w[1], w[0]))
        .collect();
    PhaseSlip {
        boundaries,
        segment_means,
        segment_spread,
        delta_f,
    }
}

/// How the external damping is set at each detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingPolicy {
    /// Use `params.ext_damping` everywhere.
    Fixed,
    /// `γ_e = factor · √(ω_r s₀ N Γ₁D)`, with `s₀` evaluated at each detuning.
    Scaled(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub relax: RelaxOptions,
    pub damping: DampingPolicy,
    /// On a timeout, retry the step with `γ_e` multiplied by [`DAMPING_GROWTH`], at most this
    /// often per step. The raised damping is kept for the remaining steps.
    pub damping_retries: u32,
    pub jump_threshold: f64,
}

/// Factor applied to `γ_e` when a step is retried.
pub const DAMPING_GROWTH: f64 = 4.0;

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            relax: RelaxOptions::default(),
            damping: DampingPolicy::Scaled(0.1),
            damping_retries: 3,
            jump_threshold: DEFAULT_JUMP_THRESHOLD,
        }
    }
}

/// Converged configuration at one detuning.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub detuning: f64,
    pub fractions: FractionalConfig,
    pub state: ChainState,
    /// `⟨|σ|²⟩/s₀`.
    pub population: f64,
    pub d_central: f64,
    pub d_mean: f64,
    pub phase_slip: PhaseSlip,
    /// External damping used at this step.
    pub ext_damping: f64,
    pub relax_time: f64,
    pub relax_steps: u64,
    pub total_force: f64,
}

impl SweepRecord {
    fn new(detuning: f64, params: &SystemParams, report: RelaxReport, threshold: f64) -> Result<Self> {
        let fractions = fractional_positions(&report.state.z)?;
        let (d_central, d_mean) = lattice_constant(&report.state.z)?;
        Ok(SweepRecord {
            detuning,
            population: excited_population(&report.state.sigma, params),
            phase_slip: detect_phase_slip(&fractions, threshold),
            fractions,
            d_central,
            d_mean,
            ext_damping: params.ext_damping,
            relax_time: report.time,
            relax_steps: report.steps,
            total_force: report.total_force,
            state: report.state,
        })
    }

    /// Parameters in force at this record.
    pub fn params(&self, base: &SystemParams) -> SystemParams {
        base.with_detuning(self.detuning).with_damping(self.ext_damping)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Increasing,
    Decreasing,
}

/// Where step 0 was seeded from.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedConfig {
    WeakLattice,
    Given(Vec<f64>),
}

/// Ordered records plus provenance.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub params: SystemParams,
    pub grid: Vec<f64>,
    pub direction: SweepDirection,
    pub seed: SeedConfig,
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn record_near(&self, detuning: f64) -> Option<&SweepRecord> {
        self.records
            .iter()
            .min_by(|a, b| (a.detuning - detuning).abs().total_cmp(&(b.detuning - detuning).abs()))
    }
}

/// Detuning grid from `start` to `end`: steps of `0.5` where `|δ| > 2`, `0.05` inside.
pub fn default_grid(start: f64, end: f64) -> Vec<f64> {
    const COARSE: f64 = 0.5;
    const FINE: f64 = 0.05;
    let sign = if end >= start { 1.0 } else { -1.0 };
    let mut grid = vec![start];
    let mut x = start;
    loop {
        let step = if x.abs() > 2.0 + 1e-9 && (x + sign * COARSE).abs() >= 2.0 - 1e-9 {
            COARSE
        } else {
            FINE
        };
        let next = x + sign * step;
        if (next - end) * sign > 1e-9 {
            break;
        }
        // snap to the step lattice to avoid drift
        x = (next / FINE).round() * FINE;
        grid.push(x);
    }
    if (grid[grid.len() - 1] - end).abs() > 1e-9 {
        grid.push(end);
    }
    grid
}

/// `n_steps` equally spaced detunings from `start` to `end`, seeded from the weak lattice.
pub fn adiabatic_sweep(params: &SystemParams, start: f64, end: f64, n_steps: usize) -> Result<SweepResult> {
    if n_steps == 0 {
        return Err(Error::InvalidState("a sweep needs at least one step".into()));
    }
    let grid: Vec<f64> = if n_steps == 1 {
        vec![start]
    } else {
        (0..n_steps)
            .map(|k| start + (end - start) * k as f64 / (n_steps - 1) as f64)
            .collect()
    };
    sweep(params, &grid, SeedConfig::WeakLattice, &SweepOptions::default())
}

/// Relaxes the chain at every detuning of `grid`, seeding each step with the previous result.
pub fn sweep(
    params: &SystemParams,
    grid: &[f64],
    seed: SeedConfig,
    options: &SweepOptions,
) -> Result<SweepResult> {
    sweep_with(params, grid, seed, options, |_| {})
}

/// As [`sweep`], calling `progress` after every converged step.
pub fn sweep_with(
    params: &SystemParams,
    grid: &[f64],
    seed: SeedConfig,
    options: &SweepOptions,
    mut progress: impl FnMut(&SweepRecord),
) -> Result<SweepResult> {
    params.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidState("empty detuning grid".into()));
    }
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidState("detuning grid must be strictly monotone".into()));
    }
    let direction = if increasing {
        SweepDirection::Increasing
    } else {
        SweepDirection::Decreasing
    };
    let optical_depth = params.n_atoms as f64 * params.gamma_1d;
    if grid[0].abs() < optical_depth {
        log::warn!(
            "sweep starts at δ = {} with NΓ₁D = {}; the weak-scattering seed may be far from steady state",
            grid[0],
            optical_depth
        );
    }
    let z0 = match &seed {
        SeedConfig::WeakLattice => weak_lattice(params.n_atoms)?.positions,
        SeedConfig::Given(z) => z.clone(),
    };
    let mut state = ChainState::at_rest(z0)?;
    let mut records = Vec::with_capacity(grid.len());
    // once raised, the damping stays raised for the rest of the sweep
    let mut boost = 1.0;
    for &detuning in grid {
        let mut step_params = params.with_detuning(detuning);
        if let DampingPolicy::Scaled(factor) = options.damping {
            step_params.ext_damping = factor * step_params.phonon_scale();
        }
        step_params.ext_damping *= boost;
        // non-conservative forces can destabilize the fixed point for weak damping
        let mut attempt = 0;
        let report = loop {
            match relax_to_steady_state(&step_params, &state, &options.relax) {
                Ok(report) => break report,
                Err(e) if e.is_convergence() && attempt < options.damping_retries => {
                    attempt += 1;
                    boost *= DAMPING_GROWTH;
                    step_params.ext_damping *= DAMPING_GROWTH;
                    log::info!("δ = {detuning}: no steady state, retrying with γ_e = {:.3e}", step_params.ext_damping);
                }
                Err(e) => {
                    return Err(Error::Sweep {
                        detuning,
                        source: Box::new(e),
                    })
                }
            }
        };
        // momenta from the previous detuning are not carried over
        state = ChainState {
            p: vec![0.0; report.state.len()],
            ..report.state.clone()
        };
        let record = SweepRecord::new(detuning, &step_params, report, options.jump_threshold)?;
        progress(&record);
        records.push(record);
    }
    Ok(SweepResult {
        params: *params,
        grid: grid.to_vec(),
        direction,
        seed,
        records,
    })
}
