//! Closed-form results: the weak-scattering lattice and its phonons, the
//! effective-index estimate of the lattice constant, and the two-mirror
//! cavity estimate for phase-slip configurations.
//!
//! When `NΓ₁D ≪ √(δ² + 1/4)` all coherences equal the single-atom value
//! `σ⁽⁰⁾` and the motion is governed by the potential
//!
//! ```text
//! U = (Γ₁D s₀ / 2) Σ_{j,j'} sin k₀|z_j − z_j'|
//! ```
//!
//! whose minimum is the lattice `d = 1 − 1/2N` (in `λ₀`).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{fractional_positions, FractionalConfig, SystemParams, K0};

/// Minimum-energy configuration of the weak-scattering potential.
#[derive(Debug, Clone)]
pub struct WeakScatteringSolution {
    /// `d_ws = 1 − 1/2N`.
    pub lattice_constant: f64,
    /// `z_j = (j − 1) d_ws`, starting at zero.
    pub positions: Vec<f64>,
    /// `f_j = 1 − (j − 1)/2N`.
    pub fractions: FractionalConfig,
    /// Exact finite-`N` energy, in units of `ħΓ₁D s₀`.
    pub energy: f64,
    /// Large-`N` asymptote `−N²/π`, same units.
    pub energy_asymptote: f64,
}

/// The weak-scattering lattice for `n` atoms.
///
/// ```
/// let ws = selforg::analytics::weak_lattice(10).unwrap();
/// assert!((ws.lattice_constant - 0.95).abs() < 1e-15);
/// assert!((ws.fractions.0[9] - 0.55).abs() < 1e-12);
/// ```
pub fn weak_lattice(n: usize) -> Result<WeakScatteringSolution> {
    if n < 2 {
        return Err(Error::InvalidParams {
            field: "n_atoms",
            reason: "a lattice needs at least two atoms".into(),
        });
    }
    let d = 1.0 - 0.5 / n as f64;
    let positions: Vec<f64> = (0..n).map(|j| j as f64 * d).collect();
    let fractions = fractional_positions(&positions)?;
    let energy = potential_energy(&positions);
    let nn = n as f64;
    Ok(WeakScatteringSolution {
        lattice_constant: d,
        positions,
        fractions,
        energy,
        energy_asymptote: -nn * nn / PI,
    })
}

/// `½ Σ_{j≠j'} sin k₀|z_j − z_j'|`, the weak-scattering potential in units of `ħΓ₁D s₀`.
pub fn potential_energy(z: &[f64]) -> f64 {
    let mut total = 0.0;
    for (j, &a) in z.iter().enumerate() {
        for &b in &z[j + 1..] {
            total += (K0 * (b - a).abs()).sin();
        }
    }
    total
}

/// Effective-index estimate of the self-organized lattice constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveIndex {
    /// Transmission phase of a single atom, `θ_t`.
    pub theta_t: f64,
    /// `λ_eff = 1 − θ_t/2π` (units `λ₀`).
    pub lambda_eff: f64,
    /// `d_eff = λ_eff (1 − 1/2N)`.
    pub d_eff: f64,
}

/// `θ_t = −arctan(2Γ₁Dδ / (1 − Γ₁D + 4δ²))` and the derived wavelength and spacing.
pub fn effective_lattice_constant(params: &SystemParams, detuning: f64) -> EffectiveIndex {
    let g = params.gamma_1d;
    let theta_t = (-2.0 * g * detuning).atan2(1.0 - g + 4.0 * detuning * detuning);
    let lambda_eff = 1.0 - theta_t / (2.0 * PI);
    EffectiveIndex {
        theta_t,
        lambda_eff,
        d_eff: lambda_eff * (1.0 - 0.5 / params.n_atoms as f64),
    }
}

/// Phonon frequencies of the weak-scattering lattice (units `Γ`), indexed by
/// wave number `2πj/N`, `j = 0 … N−1`.
///
/// `ω_j² = 2ω_r s₀ Γ₁D [cot(π/2N) − sin(π/N)/(cos(2πj/N) − cos(π/N))]`.
pub fn weak_phonon_spectrum(params: &SystemParams) -> Vec<f64> {
    let n = params.n_atoms as f64;
    let prefactor = 2.0 * params.recoil * params.s0() * params.gamma_1d;
    let cot = 1.0 / (PI / (2.0 * n)).tan();
    (0..params.n_atoms)
        .map(|j| {
            if j == 0 {
                return 0.0;
            }
            let bracket = cot - (PI / n).sin() / ((2.0 * PI * j as f64 / n).cos() - (PI / n).cos());
            (prefactor * bracket.max(0.0)).sqrt()
        })
        .collect()
}

/// Order-of-magnitude estimate `N²Γ₁D² s₀ ω_r / δ²` of the largest anti-damping rate.
pub fn weak_max_antidamping(params: &SystemParams) -> f64 {
    let n = params.n_atoms as f64;
    let g = params.gamma_1d;
    n * n * g * g * params.s0() * params.recoil / (params.pump_detuning * params.pump_detuning)
}

/// Reflection peak of two atomic mirrors forming a cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityEstimate {
    /// `1 − 4Γ'/(NΓ₁D)`, clipped to `[0, 1]`.
    pub peak_reflectance: f64,
    /// `NΓ₁D/√2` (units `Γ`).
    pub fwhm: f64,
}

pub fn cavity_model(params: &SystemParams) -> CavityEstimate {
    let optical_depth = params.n_atoms as f64 * params.gamma_1d;
    CavityEstimate {
        peak_reflectance: (1.0 - 4.0 * params.gamma_prime() / optical_depth).clamp(0.0, 1.0),
        fwhm: optical_depth / 2f64.sqrt(),
    }
}
