//! Dimensionless parameterization and state containers.
//!
//! Units throughout the crate:
//!
//! * time in `1/Γ`, where `Γ = Γ₁D + Γ'` is the total single-atom decay rate,
//! * lengths in the resonant wavelength `λ₀` (so `k₀ = 2π`),
//! * momenta in `ħk₀`, forces in `ħk₀Γ`,
//! * all rates and detunings in `Γ`.
//!
//! With these choices `ż = p/m` becomes `ż = (ω_r/π) p`, see
//! [`velocity_factor`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resonant wavevector in units of `1/λ₀`.
pub const K0: f64 = 2.0 * PI;

/// Recoil frequencies above this value break the separation between internal
/// and motional timescales.
pub const RECOIL_WARN: f64 = 0.1;

/// Physical parameters, all in units of `Γ` (which is therefore 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Number of atoms `N`.
    pub n_atoms: usize,
    /// Emission rate into the guided modes, `0 < Γ₁D ≤ 1`.
    pub gamma_1d: f64,
    /// Pump Rabi frequency `Ω`.
    pub rabi: f64,
    /// Pump detuning `δ = ω_pump − ω₀`.
    pub pump_detuning: f64,
    /// Recoil frequency `ω_r = ħk₀²/2m`.
    pub recoil: f64,
    /// External momentum damping rate `γ_e`.
    pub ext_damping: f64,
}

impl Default for SystemParams {
    /// `N = 150`, `Γ₁D = Γ/4`, `ω_r = 10⁻³Γ`, `δ = −15Γ`.
    ///
    /// `Ω = 0.05Γ` keeps the single-atom population at or below 0.01 even on
    /// resonance. The external damping is [`SystemParams::default_damping`].
    fn default() -> Self {
        let mut params = SystemParams {
            n_atoms: 150,
            gamma_1d: 0.25,
            rabi: 0.05,
            pump_detuning: -15.0,
            recoil: 1e-3,
            ext_damping: 0.0,
        };
        params.ext_damping = params.default_damping();
        params
    }
}

impl SystemParams {
    /// Free-space emission rate `Γ' = Γ − Γ₁D`.
    pub fn gamma_prime(&self) -> f64 {
        (1.0 - self.gamma_1d).max(0.0)
    }

    /// Population of an independently driven atom, `s₀ = Ω²/(δ² + 1/4)`.
    pub fn s0(&self) -> f64 {
        self.rabi * self.rabi / (self.pump_detuning * self.pump_detuning + 0.25)
    }

    /// Coherence of an independently driven atom, `iΩ/(1/2 − iδ)`.
    pub fn sigma0(&self) -> Complex64 {
        Complex64::new(0.0, self.rabi) / Complex64::new(0.5, -self.pump_detuning)
    }

    /// Characteristic phonon frequency `√(ω_r s₀ N Γ₁D)`.
    pub fn phonon_scale(&self) -> f64 {
        (self.recoil * self.s0() * self.n_atoms as f64 * self.gamma_1d).sqrt()
    }

    /// Characteristic optical force `Γ₁D s₀` (in `ħk₀Γ`).
    pub fn force_scale(&self) -> f64 {
        self.gamma_1d * self.s0()
    }

    /// One tenth of [`phonon_scale`](Self::phonon_scale): an order below the
    /// typical phonon frequencies.
    pub fn default_damping(&self) -> f64 {
        0.1 * self.phonon_scale()
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.pump_detuning = detuning;
        self
    }

    pub fn with_atoms(mut self, n_atoms: usize) -> Self {
        self.n_atoms = n_atoms;
        self
    }

    pub fn with_damping(mut self, ext_damping: f64) -> Self {
        self.ext_damping = ext_damping;
        self
    }

    /// Checks every field; recoil frequencies above [`RECOIL_WARN`] only log a warning.
    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidParams {
                field,
                reason: reason.into(),
            }
        }
        if self.n_atoms == 0 {
            return Err(bad("n_atoms", "must be positive"));
        }
        let finite = [
            ("gamma_1d", self.gamma_1d),
            ("rabi", self.rabi),
            ("pump_detuning", self.pump_detuning),
            ("recoil", self.recoil),
            ("ext_damping", self.ext_damping),
        ];
        for (field, value) in finite {
            if !value.is_finite() {
                return Err(bad(field, format!("{value} is not finite")));
            }
        }
        if !(self.gamma_1d > 0.0 && self.gamma_1d <= 1.0) {
            return Err(bad("gamma_1d", format!("{} not in (0, 1]", self.gamma_1d)));
        }
        if self.rabi < 0.0 {
            return Err(bad("rabi", "must be non-negative"));
        }
        if self.recoil < 0.0 {
            return Err(bad("recoil", "must be non-negative"));
        }
        if self.ext_damping < 0.0 {
            return Err(bad("ext_damping", "must be non-negative"));
        }
        if self.recoil > RECOIL_WARN {
            log::warn!(
                "recoil frequency {} Γ is not small; coherences may no longer follow the motion",
                self.recoil
            );
        }
        Ok(())
    }

    /// Parses a flat JSON object with exactly the field names of this struct.
    pub fn from_json(text: &str) -> Result<Self> {
        let params: SystemParams = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }
}

/// Conversion from momentum to velocity, `ω_r/π`.
///
/// From `ż = p/m` with `z` in `λ₀`, `p` in `ħk₀` and `t` in `1/Γ`:
/// `dz̃/dt̃ = ħk₀/(mλ₀Γ) p̃ = 2ω_r/(k₀λ₀Γ) p̃ = (ω_r/π) p̃`.
pub fn velocity_factor(params: &SystemParams) -> f64 {
    params.recoil / PI
}

/// Positions, momenta and coherences of the chain at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub sigma: Vec<Complex64>,
}

impl ChainState {
    pub fn new(z: Vec<f64>, p: Vec<f64>, sigma: Vec<Complex64>) -> Result<Self> {
        let state = ChainState { z, p, sigma };
        state.validate()?;
        Ok(state)
    }

    /// Atoms at rest with zero coherence.
    pub fn at_rest(z: Vec<f64>) -> Result<Self> {
        let n = z.len();
        Self::new(z, vec![0.0; n], vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.z.len();
        if self.p.len() != n || self.sigma.len() != n {
            return Err(Error::InvalidState(format!(
                "length mismatch: {} positions, {} momenta, {} coherences",
                n,
                self.p.len(),
                self.sigma.len()
            )));
        }
        let finite = self.z.iter().chain(&self.p).all(|x| x.is_finite())
            && self.sigma.iter().all(|s| s.re.is_finite() && s.im.is_finite());
        if !finite {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        check_ordering(&self.z)
    }

    /// Shifts every position by `offset`.
    pub fn translated(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.z.iter_mut().for_each(|z| *z += offset);
        out
    }

    pub fn fractions(&self) -> Result<FractionalConfig> {
        fractional_positions(&self.z)
    }
}

/// Fails unless `z` is finite and strictly increasing.
pub fn check_ordering(z: &[f64]) -> Result<()> {
    if let Some(j) = z.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidState(format!("position {j} is not finite")));
    }
    for (j, w) in z.windows(2).enumerate() {
        if w[1] == w[0] {
            return Err(Error::Degenerate {
                first: j,
                second: j + 1,
            });
        }
        if w[1] < w[0] {
            return Err(Error::InvalidState(format!(
                "ordering violation: positions not increasing at index {j}: {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Fractional parts `f_j ∈ (0, 1]` of the positions, `z_j = n_j + f_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalConfig(pub Vec<f64>);

impl FractionalConfig {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Maps one position to its fraction in `(0, 1]`.
pub fn fraction(z: f64) -> f64 {
    let f = z - (z - 1.0).ceil();
    // z − ceil(z − 1) can round to 0 for tiny negative offsets
    if f <= 0.0 {
        f + 1.0
    } else {
        f
    }
}

/// `f_j = z_j − ⌈z_j − 1⌉`, so that integer positions map to 1.
pub fn fractional_positions(z: &[f64]) -> Result<FractionalConfig> {
    if let Some(j) = z.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidState(format!("position {j} is not finite")));
    }
    Ok(FractionalConfig(z.iter().map(|&x| fraction(x)).collect()))
}

/// Difference of two fractions wrapped to `(−1/2, 1/2]`.
pub fn wrapped_difference(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % 1.0;
    if d > 0.5 {
        d -= 1.0;
    } else if d <= -0.5 {
        d += 1.0;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fraction_boundaries() {
        let f = fractional_positions(&[0.0, 2.25, -0.5, 1.0, 0.999]).unwrap();
        assert_eq!(f.0[0], 1.0);
        assert_relative_eq!(f.0[1], 0.25);
        assert_relative_eq!(f.0[2], 0.5);
        assert_eq!(f.0[3], 1.0);
        assert_relative_eq!(f.0[4], 0.999);
    }

    #[test]
    fn fraction_rejects_nan() {
        assert!(matches!(
            fractional_positions(&[0.0, f64::NAN]),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn velocity_factor_values() {
        let p = SystemParams::default();
        assert_relative_eq!(velocity_factor(&p), 1e-3 / PI);
        assert_relative_eq!(velocity_factor(&p), 3.183e-4, max_relative = 1e-3);
        assert_eq!(velocity_factor(&SystemParams { recoil: 0.0, ..p }), 0.0);
        assert_relative_eq!(velocity_factor(&SystemParams { recoil: PI, ..p }), 1.0);
    }

    #[test]
    fn default_population_is_linear_regime() {
        let p = SystemParams::default().with_detuning(0.0);
        assert!(p.s0() <= 0.01 + 1e-15);
        assert_relative_eq!(p.gamma_prime(), 0.75);
    }

    #[test]
    fn sigma0_squared_is_s0() {
        for delta in [-50.0, -0.5, 0.0, 3.0] {
            let p = SystemParams::default().with_detuning(delta);
            assert_relative_eq!(p.sigma0().norm_sqr(), p.s0(), max_relative = 1e-14);
        }
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let text = r#"{"n_atoms": 2, "gamma_1d": 0.25, "rabi": 0.05, "pump_detuning": -1,
                       "recoil": 0.001, "ext_damping": 0.0, "temperature": 1}"#;
        assert!(SystemParams::from_json(text).is_err());
        let ok = r#"{"n_atoms": 2, "gamma_1d": 0.25, "rabi": 0.05, "pump_detuning": -1,
                     "recoil": 0.001, "ext_damping": 0.0}"#;
        assert_eq!(SystemParams::from_json(ok).unwrap().n_atoms, 2);
    }

    #[test]
    fn validation_errors() {
        let p = SystemParams::default();
        assert!(SystemParams { gamma_1d: 0.0, ..p }.validate().is_err());
        assert!(SystemParams { gamma_1d: 1.5, ..p }.validate().is_err());
        assert!(SystemParams { n_atoms: 0, ..p }.validate().is_err());
        assert!(SystemParams { rabi: f64::NAN, ..p }.validate().is_err());
        assert!(SystemParams { gamma_1d: 1.0, ..p }.validate().is_ok());
    }

    #[test]
    fn coincident_atoms_rejected() {
        assert!(matches!(
            ChainState::at_rest(vec![0.0, 0.5, 0.5]),
            Err(Error::Degenerate { first: 1, second: 2 })
        ));
    }

    #[test]
    fn wrapped_difference_range() {
        assert_relative_eq!(wrapped_difference(0.65, 0.9), -0.25);
        assert_relative_eq!(wrapped_difference(0.02, 0.98), 0.04, epsilon = 1e-12);
        assert_relative_eq!(wrapped_difference(0.5, 0.0), 0.5);
        assert_relative_eq!(wrapped_difference(0.0, 0.5), 0.5);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fraction_in_range_and_shift_invariant(z in -1e3f64..1e3, shift in -50i32..50) {
                let f = fraction(z);
                prop_assert!(f > 0.0 && f <= 1.0);
                let g = fraction(z + shift as f64);
                // integer shifts may only move f across the 0/1 boundary by rounding
                prop_assert!(wrapped_difference(f, g).abs() < 1e-9);
                prop_assert!((fraction(f) - f).abs() < 1e-12);
            }
        }
    }
}
