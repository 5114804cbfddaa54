//! Linear response of a frozen configuration to a weak guided probe.
//!
//! A single atom reflects `r = −Γ₁D/(Γ − 2iδ_p)` and transmits `t = 1 + r`.
//! Chains are composed from these scatterers and free propagation
//! `exp(ik₀Δz)` between neighbours. Amplitudes are referenced to `z = 0`:
//! an incident field `e^{ik₀z}` produces `r e^{−ik₀z}` on the left and
//! `t e^{ik₀z}` on the right.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coherence::CouplingMatrix;
use crate::error::{Error, Result};
use crate::model::{check_ordering, SystemParams, K0};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Reflection and transmission of one atom at the origin.
///
/// ```
/// use selforg::{optics::single_atom_rt, SystemParams};
///
/// let p = SystemParams { gamma_1d: 0.25, ..SystemParams::default() };
/// let (r, t) = single_atom_rt(&p, 0.0);
/// assert!((r.re + 0.25).abs() < 1e-15 && (t.re - 0.75).abs() < 1e-15);
/// ```
pub fn single_atom_rt(params: &SystemParams, probe_detuning: f64) -> (Complex64, Complex64) {
    let r = -params.gamma_1d / Complex64::new(1.0, -2.0 * probe_detuning);
    (r, ONE + r)
}

/// Probe spectrum on a detuning grid.
#[derive(Debug, Clone, Default)]
pub struct OpticalSpectrum {
    pub probe_detuning: Vec<f64>,
    pub r: Vec<Complex64>,
    pub t: Vec<Complex64>,
    /// Grid indices where the result is unreliable (ill-conditioned solve).
    pub flagged: Vec<usize>,
}

impl OpticalSpectrum {
    pub fn len(&self) -> usize {
        self.probe_detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probe_detuning.is_empty()
    }

    pub fn reflectance(&self) -> Vec<f64> {
        self.r.iter().map(|r| r.norm_sqr()).collect()
    }

    pub fn transmittance(&self) -> Vec<f64> {
        self.t.iter().map(|t| t.norm_sqr()).collect()
    }

    /// `(δ_p, R)` at the largest reflectance.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.reflectance()
            .into_iter()
            .zip(&self.probe_detuning)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(r, d)| (*d, r))
    }

    /// Full width at half maximum of the reflectance peak, from linear interpolation.
    ///
    /// `None` if the reflectance does not drop below half maximum on both sides.
    pub fn fwhm(&self) -> Option<f64> {
        let refl = self.reflectance();
        let (ipeak, &rmax) = refl.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        let half = 0.5 * rmax;
        let x = &self.probe_detuning;
        let crossing = |a: usize, b: usize| x[a] + (half - refl[a]) * (x[b] - x[a]) / (refl[b] - refl[a]);
        let right = (ipeak + 1..refl.len()).find(|&j| refl[j] < half).map(|j| crossing(j - 1, j))?;
        let left = (0..ipeak).rev().find(|&j| refl[j] < half).map(|j| crossing(j + 1, j))?;
        Some(right - left)
    }

    /// Reflectance at `δ_p` by linear interpolation on the grid.
    pub fn reflectance_at(&self, probe_detuning: f64) -> Option<f64> {
        let x = &self.probe_detuning;
        let refl = self.reflectance();
        let j = x.partition_point(|v| *v < probe_detuning);
        if j == 0 {
            return (x.first() == Some(&probe_detuning)).then(|| refl[0]);
        }
        if j == x.len() {
            return None;
        }
        let w = (probe_detuning - x[j - 1]) / (x[j] - x[j - 1]);
        Some(refl[j - 1] * (1.0 - w) + refl[j] * w)
    }

    /// `max |R(δ_p) − R(−δ_p)| / R_peak` over the grid points whose mirror image is inside the grid.
    pub fn asymmetry(&self) -> f64 {
        let Some((_, peak)) = self.peak() else {
            return 0.0;
        };
        let refl = self.reflectance();
        self.probe_detuning
            .iter()
            .zip(&refl)
            .filter_map(|(d, r)| self.reflectance_at(-d).map(|m| (r - m).abs()))
            .fold(0.0, f64::max)
            / peak
    }
}

/// Scattering data of a chain section between its outermost atoms.
#[derive(Debug, Clone, Copy)]
struct Section {
    /// Reflection for incidence from the left, at the left end.
    r_left: Complex64,
    /// Reflection for incidence from the right, at the right end.
    r_right: Complex64,
    t_forward: Complex64,
    t_backward: Complex64,
}

impl Section {
    fn atom(r: Complex64, t: Complex64) -> Self {
        Section {
            r_left: r,
            r_right: r,
            t_forward: t,
            t_backward: t,
        }
    }

    /// `self`, then free propagation by `phase = e^{ik₀Δz}`, then `next`.
    fn then(self, phase: Complex64, next: Section) -> Result<Section> {
        let phase2 = phase * phase;
        let denom = ONE - self.r_right * next.r_left * phase2;
        if denom.norm() < 1e-300 {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        Ok(Section {
            r_left: self.r_left + self.t_forward * self.t_backward * next.r_left * phase2 / denom,
            r_right: next.r_right + next.t_forward * next.t_backward * self.r_right * phase2 / denom,
            t_forward: self.t_forward * next.t_forward * phase / denom,
            t_backward: next.t_backward * self.t_backward * phase / denom,
        })
    }
}

/// Reflection from both sides and transmission in both directions at one probe detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainResponse {
    pub r_left: Complex64,
    pub r_right: Complex64,
    pub t_forward: Complex64,
    pub t_backward: Complex64,
}

/// Chain response by composing per-atom scattering matrices.
///
/// `r_right` is referenced to the origin for a probe `e^{−ik₀z}` incident from the right.
pub fn chain_response(params: &SystemParams, z: &[f64], probe_detuning: f64) -> Result<ChainResponse> {
    check_ordering(z)?;
    let (r, t) = single_atom_rt(params, probe_detuning);
    let atom = Section::atom(r, t);
    let mut total = atom;
    for w in z.windows(2) {
        total = total.then(Complex64::from_polar(1.0, K0 * (w[1] - w[0])), atom)?;
    }
    let (first, last) = (z[0], z[z.len() - 1]);
    let back = Complex64::from_polar(1.0, -K0 * (last - first));
    Ok(ChainResponse {
        r_left: total.r_left * Complex64::from_polar(1.0, 2.0 * K0 * first),
        r_right: total.r_right * Complex64::from_polar(1.0, -2.0 * K0 * last),
        t_forward: total.t_forward * back,
        t_backward: total.t_backward * back,
    })
}

/// Spectrum from scattering-matrix composition along the chain.
pub fn chain_spectrum_transfer(params: &SystemParams, z: &[f64], grid: &[f64]) -> Result<OpticalSpectrum> {
    check_ordering(z)?;
    let points: Vec<Result<ChainResponse>> = grid.par_iter().map(|&d| chain_response(params, z, d)).collect();
    let mut spectrum = OpticalSpectrum {
        probe_detuning: grid.to_vec(),
        ..Default::default()
    };
    for (j, point) in points.into_iter().enumerate() {
        match point {
            Ok(resp) => {
                spectrum.r.push(resp.r_left);
                spectrum.t.push(resp.t_forward);
            }
            Err(Error::IllConditioned { .. }) => {
                spectrum.flagged.push(j);
                spectrum.r.push(Complex64::new(f64::NAN, f64::NAN));
                spectrum.t.push(Complex64::new(f64::NAN, f64::NAN));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(spectrum)
}

/// Spectrum from the coupled-dipole equations driven by the probe.
///
/// Solves `M(δ_p)σ = −iΩ_p e^{ik₀z}` densely and reads off
/// `r = (iΓ₁D/2Ω_p) Σ σ_j e^{ik₀z_j}`, `t = 1 + (iΓ₁D/2Ω_p) Σ σ_j e^{−ik₀z_j}`.
/// Points where `M` is ill-conditioned are flagged and set to NaN.
pub fn chain_spectrum_spinmodel(params: &SystemParams, z: &[f64], grid: &[f64]) -> Result<OpticalSpectrum> {
    check_ordering(z)?;
    let drive: Vec<Complex64> = z.iter().map(|&x| Complex64::from_polar(1.0, K0 * x)).collect();
    let prefactor = I * (0.5 * params.gamma_1d);
    let points: Vec<Result<(Complex64, Complex64)>> = grid
        .par_iter()
        .map(|&d| {
            let (sigma, _) = CouplingMatrix::build(params, d, z)?.solve(&drive)?;
            let forward: Complex64 = sigma.iter().zip(&drive).map(|(s, e)| s * e).sum();
            let backward: Complex64 = sigma.iter().zip(&drive).map(|(s, e)| s * e.conj()).sum();
            Ok((prefactor * forward, ONE + prefactor * backward))
        })
        .collect();
    let mut spectrum = OpticalSpectrum {
        probe_detuning: grid.to_vec(),
        ..Default::default()
    };
    for (j, point) in points.into_iter().enumerate() {
        match point {
            Ok((r, t)) => {
                spectrum.r.push(r);
                spectrum.t.push(t);
            }
            Err(Error::IllConditioned { .. }) => {
                log::warn!("spin-model solve ill-conditioned at δ_p = {}", grid[j]);
                spectrum.flagged.push(j);
                spectrum.r.push(Complex64::new(f64::NAN, f64::NAN));
                spectrum.t.push(Complex64::new(f64::NAN, f64::NAN));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(spectrum)
}

/// 601 points over `[−60, 60]` merged with 201 points over `[−2, 2]`.
pub fn default_probe_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..601).map(|j| -60.0 + 0.2 * j as f64).collect();
    grid.extend((0..201).map(|j| -2.0 + 0.02 * j as f64));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    grid
}

/// Bloch wavevector of the infinite lattice at one probe detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochResult {
    /// Dimensionless `qd`, principal branch with `Im ≥ 0`.
    pub qd: Complex64,
    /// `q` in units of `1/λ₀`.
    pub q: Complex64,
    pub zeta: Complex64,
    /// `|cos k₀d − Re(ζ) sin k₀d| > 1`.
    pub in_gap: bool,
}

/// `ζ = (Γ₁D/Γ′)(i − 2δ_p/Γ′)/(1 + (2δ_p/Γ′)²)`.
pub fn bloch_zeta(params: &SystemParams, probe_detuning: f64) -> Result<Complex64> {
    let gp = params.gamma_prime();
    if gp <= 0.0 {
        return Err(Error::Domain("Bloch dispersion needs Γ′ > 0".into()));
    }
    let x = 2.0 * probe_detuning / gp;
    Ok(params.gamma_1d / gp * Complex64::new(-x, 1.0) / (1.0 + x * x))
}

/// Solves `cos qd = cos k₀d − ζ sin k₀d`.
pub fn bloch_dispersion(params: &SystemParams, d: f64, probe_detuning: f64) -> Result<BlochResult> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("lattice constant {d} must be positive")));
    }
    let zeta = bloch_zeta(params, probe_detuning)?;
    let (s, c) = (K0 * d).sin_cos();
    let rhs = c - zeta * s;
    let mut qd = rhs.acos();
    if qd.im < 0.0 {
        qd = -qd;
    }
    Ok(BlochResult {
        qd,
        q: qd / d,
        zeta,
        in_gap: (c - zeta.re * s).abs() > 1.0,
    })
}

/// Edges of the optical band gap of a lattice with spacing `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandGap {
    /// `−Γ₁D/ε ≲ δ_p ≲ −εΓ′²/(4Γ₁D)`.
    Gap { lo: f64, hi: f64, epsilon: f64 },
    /// `ε = 2π(1 − d) ≤ 0`.
    NoGap { epsilon: f64 },
}

impl BandGap {
    pub fn contains(&self, probe_detuning: f64, broadening: f64) -> bool {
        match *self {
            BandGap::Gap { lo, hi, .. } => {
                probe_detuning >= lo * (1.0 + broadening) && probe_detuning <= hi * (1.0 - broadening)
            }
            BandGap::NoGap { .. } => false,
        }
    }
}

pub fn band_gap_edges(params: &SystemParams, d: f64) -> BandGap {
    let epsilon = K0 * (1.0 - d);
    if epsilon <= 0.0 {
        return BandGap::NoGap { epsilon };
    }
    let g = params.gamma_1d;
    let gp = params.gamma_prime();
    if g / gp.max(f64::MIN_POSITIVE) < 10.0 * epsilon {
        log::warn!("band-gap edges assume Γ₁D/Γ′ ≫ ε; here Γ₁D/Γ′ = {} and ε = {epsilon}", g / gp);
    }
    BandGap::Gap {
        lo: -g / epsilon,
        hi: -epsilon * gp * gp / (4.0 * g),
        epsilon,
    }
}

/// One row of a reflectance map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub detuning: f64,
    pub probe_detuning: f64,
    pub reflectance: f64,
}

/// Reflectance of each `(pump detuning, configuration)` over a probe grid.
pub fn reflectance_map(params: &SystemParams, configurations: &[(f64, Vec<f64>)], grid: &[f64]) -> Result<Vec<MapPoint>> {
    let mut out = Vec::with_capacity(configurations.len() * grid.len());
    for (detuning, z) in configurations {
        let spectrum = chain_spectrum_transfer(params, z, grid)?;
        out.extend(
            spectrum
                .reflectance()
                .into_iter()
                .zip(grid)
                .map(|(reflectance, &probe_detuning)| MapPoint {
                    detuning: *detuning,
                    probe_detuning,
                    reflectance,
                }),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(gamma_1d: f64) -> SystemParams {
        SystemParams {
            gamma_1d,
            ..SystemParams::default()
        }
    }

    #[test]
    fn single_atom_limits() {
        let (r, t) = single_atom_rt(&params(1.0), 0.0);
        assert_relative_eq!(r.re, -1.0);
        assert_eq!(t.norm(), 0.0);
        let (r, t) = single_atom_rt(&params(0.25), 1e9);
        assert!(r.norm() < 1e-9 && (t - ONE).norm() < 1e-9);
        let (r, t) = single_atom_rt(&params(0.25), 0.0);
        assert_relative_eq!(r.norm_sqr() + t.norm_sqr(), 0.625, epsilon = 1e-15);
    }

    #[test]
    fn one_atom_chain_matches_single_atom() {
        let p = params(0.3);
        for z in [0.0, 0.37, -2.1] {
            for d in [-3.0, 0.0, 0.4] {
                let (r, t) = single_atom_rt(&p, d);
                let resp = chain_response(&p, &[z], d).unwrap();
                let phase = Complex64::from_polar(1.0, 2.0 * K0 * z);
                assert!((resp.r_left - r * phase).norm() < 1e-14);
                assert!((resp.t_forward - t).norm() < 1e-14);
                let spin = chain_spectrum_spinmodel(&p, &[z], &[d]).unwrap();
                assert!((spin.r[0] - r * phase).norm() < 1e-14);
                assert!((spin.t[0] - t).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn superradiant_pair_is_a_mirror() {
        let p = params(1.0);
        let resp = chain_response(&p, &[0.0, 1.0], 0.0).unwrap();
        assert_relative_eq!(resp.r_left.norm_sqr(), 1.0, epsilon = 1e-14);
        // off resonance the spin model is well conditioned and agrees
        let grid = [-0.7, 0.3];
        let a = chain_spectrum_transfer(&p, &[0.0, 1.0], &grid).unwrap();
        let b = chain_spectrum_spinmodel(&p, &[0.0, 1.0], &grid).unwrap();
        for j in 0..2 {
            assert!((a.r[j] - b.r[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn methods_agree_on_a_five_atom_chain() {
        let p = params(0.4);
        let z = [0.1, 0.83, 1.9, 2.35, 3.3];
        let grid: Vec<f64> = (0..41).map(|j| -4.0 + 0.2 * j as f64).collect();
        let a = chain_spectrum_transfer(&p, &z, &grid).unwrap();
        let b = chain_spectrum_spinmodel(&p, &z, &grid).unwrap();
        for j in 0..grid.len() {
            assert!((a.r[j] - b.r[j]).norm() < 1e-10);
            assert!((a.t[j] - b.t[j]).norm() < 1e-10);
        }
    }

    #[test]
    fn reciprocity_and_passivity() {
        let p = params(0.25);
        let z = [0.0, 0.7, 1.75, 2.5];
        for d in [-5.0, -0.3, 0.0, 2.0] {
            let resp = chain_response(&p, &z, d).unwrap();
            assert!((resp.t_forward - resp.t_backward).norm() < 1e-12);
            assert!(resp.r_left.norm_sqr() + resp.t_forward.norm_sqr() <= 1.0 + 1e-12);
            assert!(resp.r_right.norm_sqr() + resp.t_forward.norm_sqr() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_probe_grid();
        assert_eq!(g[0], -60.0);
        assert_relative_eq!(*g.last().unwrap(), 60.0, epsilon = 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.iter().filter(|x| x.abs() <= 2.0 + 1e-9).count(), 201);
    }

    #[test]
    fn bloch_examples() {
        let p = params(0.25);
        for d in [-20.0, -1.0, 0.0, 3.0] {
            let b = bloch_dispersion(&p, 1.0, d).unwrap();
            assert!(b.qd.norm() < 1e-6);
        }
        let d = 1.0 - 1.0 / 300.0;
        let inside = bloch_dispersion(&p, d, -1.0).unwrap();
        assert!(inside.in_gap && inside.qd.im > 0.0);
        let outside = bloch_dispersion(&p, d, 40.0).unwrap();
        assert!(!outside.in_gap && outside.qd.im < 1e-2);
        for delta in [-3.0, 0.5] {
            let b = bloch_dispersion(&p, 0.98, delta).unwrap();
            let rhs = (K0 * 0.98).cos() - b.zeta * (K0 * 0.98).sin();
            assert!((b.qd.cos() - rhs).norm() < 1e-12);
            assert!(b.qd.im >= 0.0);
        }
        assert!(bloch_dispersion(&params(1.0), 0.98, 0.0).is_err());
    }

    #[test]
    fn gap_edges() {
        let p = params(0.25);
        let BandGap::Gap { lo, hi, epsilon } = band_gap_edges(&p, 1.0 - 1.0 / 300.0) else {
            panic!("expected a gap")
        };
        assert_relative_eq!(epsilon, std::f64::consts::PI / 150.0, epsilon = 1e-12);
        assert_relative_eq!(lo, -11.94, epsilon = 5e-3);
        assert_relative_eq!(hi, -0.0118, epsilon = 5e-5);
        assert!(matches!(band_gap_edges(&p, 1.0), BandGap::NoGap { .. }));
        let BandGap::Gap { lo: lo_half, .. } = band_gap_edges(&p, 1.0 - 1.0 / 600.0) else {
            panic!("expected a gap")
        };
        assert_relative_eq!(lo_half, 2.0 * lo, max_relative = 1e-12);
    }

    #[test]
    fn spectrum_helpers() {
        let x: Vec<f64> = (0..201).map(|j| -10.0 + 0.1 * j as f64).collect();
        let r: Vec<Complex64> = x
            .iter()
            .map(|d| Complex64::new((-(d * d) / 2.0).exp().sqrt(), 0.0))
            .collect();
        let s = OpticalSpectrum {
            probe_detuning: x.clone(),
            t: r.clone(),
            r,
            flagged: vec![],
        };
        let (dpk, rpk) = s.peak().unwrap();
        assert_relative_eq!(dpk, 0.0, epsilon = 1e-9);
        assert_relative_eq!(rpk, 1.0, epsilon = 1e-12);
        let expected = 2.0 * (2.0 * 2f64.ln()).sqrt();
        assert!((s.fwhm().unwrap() - expected).abs() < 5e-3);
        assert!(s.asymmetry() < 1e-9);
    }
}
