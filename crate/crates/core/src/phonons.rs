//! Small oscillations about an equilibrium.
//!
//! Linearizing the adiabatic force around `z_eq` gives
//!
//! ```text
//! ż = (ω_r/π) p,    ṗ = −K (z − z_eq) − L p,
//! ```
//!
//! where `K` is the stiffness matrix and `L` collects the first-order
//! correction from the coherences lagging behind the motion. The normal modes
//! `exp(−i(ω + iγ)t)` follow from the `2N×2N` companion matrix; `γ > 0` means
//! the mode grows (anti-damping).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::coherence::{guided_fields, uniform_drive, CouplingMatrix};
use crate::dynamics::instantaneous_force;
use crate::error::{Error, Result};
use crate::model::{check_ordering, velocity_factor, SystemParams, K0};

/// Default central-difference step, in `λ₀`.
pub const FD_STEP: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Everything needed to differentiate the force at one configuration.
struct Linearization {
    minv: DMatrix<Complex64>,
    sigma: Vec<Complex64>,
    /// `e^{ik₀|z_j − z_k|}`, zero on the diagonal.
    e: DMatrix<Complex64>,
    /// `sign(z_j − z_k)`.
    s: DMatrix<f64>,
    /// `c_j = Σ_k σ*_k e*_{jk} s_{jk}`, so that `F_j = −Γ₁D Re(σ_j c_j)`.
    c: Vec<Complex64>,
}

impl Linearization {
    fn new(params: &SystemParams, z: &[f64]) -> Result<Self> {
        check_ordering(z)?;
        let n = z.len();
        let coupling = CouplingMatrix::build(params, params.pump_detuning, z)?;
        let (sigma, _) = coupling.solve(&uniform_drive(params, n))?;
        let minv = coupling.m.lu().try_inverse().ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
        let e = DMatrix::from_fn(n, n, |j, k| {
            if j == k {
                ZERO
            } else {
                Complex64::from_polar(1.0, K0 * (z[j] - z[k]).abs())
            }
        });
        let s = DMatrix::from_fn(n, n, |j, k| (z[j] - z[k]).signum() * f64::from(u8::from(j != k)));
        let c = signed_sum(z, &sigma);
        Ok(Linearization { minv, sigma, e, s, c })
    }

    fn n(&self) -> usize {
        self.sigma.len()
    }

    /// `∂σ/∂z_k = −M⁻¹ (∂_k M) σ`.
    fn sigma_derivative(&self, g: f64, k: usize) -> DVector<Complex64> {
        let n = self.n();
        let mut v = DVector::from_element(n, ZERO);
        for a in 0..n {
            if a == k {
                let mut acc = ZERO;
                for b in 0..n {
                    acc += self.s[(k, b)] * self.e[(k, b)] * self.sigma[b];
                }
                v[a] = -g * I * K0 * acc;
            } else {
                v[a] = g * I * K0 * self.s[(a, k)] * self.e[(a, k)] * self.sigma[k];
            }
        }
        -(&self.minv * v)
    }

    /// Change of the force when the coherences change by `dsigma` at fixed positions.
    fn force_variation(&self, z: &[f64], gamma_1d: f64, dsigma: &[Complex64]) -> Vec<f64> {
        let dc = signed_sum(z, dsigma);
        (0..self.n())
            .map(|j| -gamma_1d * (dsigma[j] * self.c[j] + self.sigma[j] * dc[j]).re)
            .collect()
    }
}

/// `Σ_k x*_k e*_{jk} sign(z_j − z_k)` for every `j`, in `O(N)`.
fn signed_sum(z: &[f64], x: &[Complex64]) -> Vec<Complex64> {
    let (right, left) = guided_fields(z, x);
    right.iter().zip(&left).map(|(r, l)| (r - l).conj()).collect()
}

/// `K_jk = −∂F_j/∂z_k` with the coherences at their instantaneous fixed point.
///
/// Computed from `∂(M⁻¹) = −M⁻¹(∂M)M⁻¹`; see [`finite_difference_stiffness`]
/// for a check.
pub fn stiffness_matrix(params: &SystemParams, z: &[f64]) -> Result<DMatrix<f64>> {
    let lin = Linearization::new(params, z)?;
    let n = lin.n();
    let g = 0.5 * params.gamma_1d;
    let mut k_mat = DMatrix::zeros(n, n);
    for k in 0..n {
        let dsigma: Vec<Complex64> = lin.sigma_derivative(g, k).iter().copied().collect();
        let implicit = lin.force_variation(z, params.gamma_1d, &dsigma);
        for j in 0..n {
            let explicit = if j == k {
                let mut acc = ZERO;
                for jp in 0..n {
                    acc += lin.sigma[jp].conj() * lin.e[(j, jp)].conj();
                }
                -I * K0 * acc
            } else {
                I * K0 * lin.sigma[k].conj() * lin.e[(j, k)].conj()
            };
            let df = implicit[j] - params.gamma_1d * (lin.sigma[j] * explicit).re;
            k_mat[(j, k)] = -df;
        }
    }
    Ok(k_mat)
}

/// Central-difference stiffness and a Richardson error estimate.
#[derive(Debug, Clone)]
pub struct FiniteDifferenceStiffness {
    pub k: DMatrix<f64>,
    /// `max|K(h) − K(2h)| / max|K(h)|`.
    pub richardson: f64,
}

pub fn finite_difference_stiffness(params: &SystemParams, z: &[f64], step: f64) -> Result<FiniteDifferenceStiffness> {
    let at = |h: f64| -> Result<DMatrix<f64>> {
        let n = z.len();
        let mut k_mat = DMatrix::zeros(n, n);
        let mut zz = z.to_vec();
        for k in 0..n {
            zz[k] = z[k] + h;
            let (fp, _) = instantaneous_force(params, &zz)?;
            zz[k] = z[k] - h;
            let (fm, _) = instantaneous_force(params, &zz)?;
            zz[k] = z[k];
            for j in 0..n {
                k_mat[(j, k)] = -(fp[j] - fm[j]) / (2.0 * h);
            }
        }
        Ok(k_mat)
    };
    let k = at(step)?;
    let coarse = at(2.0 * step)?;
    let scale = k.amax().max(f64::MIN_POSITIVE);
    let richardson = (&k - &coarse).amax() / scale;
    Ok(FiniteDifferenceStiffness { k, richardson })
}

/// Stiffness of the weak-scattering potential: `K_jk = k₀Γ₁D s₀ sin k₀|z_j − z_k|`
/// off the diagonal, rows summing to zero.
///
/// ```
/// use selforg::{phonons::weak_limit_stiffness, SystemParams};
///
/// let p = SystemParams::default().with_atoms(2);
/// let k = weak_limit_stiffness(&p, &[0.0, 0.75]);
/// let kappa = std::f64::consts::TAU * p.gamma_1d * p.s0();
/// assert!((k[(0, 0)] - kappa).abs() < 1e-15 && (k[(0, 1)] + kappa).abs() < 1e-15);
/// ```
pub fn weak_limit_stiffness(params: &SystemParams, z: &[f64]) -> DMatrix<f64> {
    let n = z.len();
    let kappa = K0 * params.gamma_1d * params.s0();
    let mut k_mat = DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            0.0
        } else {
            kappa * (K0 * (z[j] - z[k]).abs()).sin()
        }
    });
    for j in 0..n {
        let row: f64 = k_mat.row(j).sum();
        k_mat[(j, j)] = -row;
    }
    k_mat
}

/// Delay-induced damping: `L_jk` is minus the force on `j` per unit momentum of atom `k`.
///
/// The lag of the coherences behind the motion is `σ_d = M⁻¹ Σ_k ż_k ∂σ/∂z_k`.
pub fn damping_matrix(params: &SystemParams, z: &[f64]) -> Result<DMatrix<f64>> {
    let lin = Linearization::new(params, z)?;
    let n = lin.n();
    let g = 0.5 * params.gamma_1d;
    let c = velocity_factor(params);
    let mut l_mat = DMatrix::zeros(n, n);
    for k in 0..n {
        let lag = &lin.minv * lin.sigma_derivative(g, k) * Complex64::new(c, 0.0);
        let lag: Vec<Complex64> = lag.iter().copied().collect();
        let df = lin.force_variation(z, params.gamma_1d, &lag);
        for j in 0..n {
            l_mat[(j, k)] = -df[j];
        }
    }
    Ok(l_mat)
}

/// `max|K − Kᵀ| / max|K|`.
pub fn asymmetry(k: &DMatrix<f64>) -> f64 {
    let scale = k.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (k - k.transpose()).amax() / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    /// Vanishing frequency and rate (center of mass).
    Zero,
    /// `γ < 0`.
    Damped,
    /// `γ > 0`.
    AntiDamped,
    /// `γ = 0` within tolerance.
    Neutral,
}

/// Normal modes sorted by `|ω|`.
#[derive(Debug, Clone)]
pub struct PhononModes {
    /// `ω + iγ` in units of `Γ`, with `ω ≥ 0`.
    pub frequencies: Vec<Complex64>,
    pub kinds: Vec<ModeKind>,
    /// `√(ω_r s₀ N Γ₁D)`.
    pub scale: f64,
    /// Position components of each mode, unit norm, if requested.
    pub vectors: Option<Vec<DVector<Complex64>>>,
}

impl PhononModes {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn normalized(&self) -> Vec<Complex64> {
        self.frequencies.iter().map(|w| w / self.scale).collect()
    }

    /// Largest `γ` over all modes.
    pub fn max_growth(&self) -> f64 {
        self.frequencies.iter().map(|w| w.im).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn zero_modes(&self) -> usize {
        self.kinds.iter().filter(|k| **k == ModeKind::Zero).count()
    }
}

/// Relative size below which a frequency or rate counts as zero.
pub const MODE_TOLERANCE: f64 = 1e-7;

/// Normal modes of `ẍ = −cKx − cLẋ` with `c = ω_r/π`.
pub fn normal_modes(k: &DMatrix<f64>, l: &DMatrix<f64>, params: &SystemParams) -> Result<PhononModes> {
    normal_modes_with(k, l, params, false)
}

/// As [`normal_modes`], optionally computing the mode shapes.
pub fn normal_modes_with(
    k: &DMatrix<f64>,
    l: &DMatrix<f64>,
    params: &SystemParams,
    with_vectors: bool,
) -> Result<PhononModes> {
    let n = k.nrows();
    if k.ncols() != n || l.nrows() != n || l.ncols() != n {
        return Err(Error::InvalidState(format!(
            "K is {}×{}, L is {}×{}",
            k.nrows(),
            k.ncols(),
            l.nrows(),
            l.ncols()
        )));
    }
    let c = velocity_factor(params);
    // rescale p so that both off-diagonal blocks are of the same size
    let k_norm = k.amax();
    let alpha = if k_norm > 0.0 { (c / k_norm).sqrt() } else { 1.0 };
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        a[(j, n + j)] = c / alpha;
        for m in 0..n {
            a[(n + j, m)] = -alpha * k[(j, m)];
            a[(n + j, n + m)] = -l[(j, m)];
        }
    }
    let schur = a
        .clone()
        .try_schur(1e-14, 100_000)
        .ok_or_else(|| Error::Eigen(format!("Schur iteration did not converge for a {}×{} matrix", 2 * n, 2 * n)))?;
    let lambdas: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();

    let size = lambdas.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let tol = MODE_TOLERANCE * size.max(f64::MIN_POSITIVE);
    let mut selected: Vec<Complex64> = Vec::with_capacity(n);
    let mut reals: Vec<Complex64> = Vec::new();
    for &lam in &lambdas {
        if lam.im.abs() > tol {
            // e^{λt} = e^{−iwt}: w = iλ; keep the member with Re w > 0
            if lam.im < 0.0 {
                selected.push(lam);
            }
        } else {
            reals.push(Complex64::new(lam.re, 0.0));
        }
    }
    reals.sort_by(|x, y| y.re.abs().total_cmp(&x.re.abs()));
    let missing = n.checked_sub(selected.len()).ok_or_else(|| {
        Error::Eigen(format!("{} oscillating modes for {} atoms", selected.len(), n))
    })?;
    selected.extend(reals.into_iter().take(missing));
    if selected.len() != n {
        return Err(Error::Eigen(format!("recovered {} modes for {} atoms", selected.len(), n)));
    }

    let mut frequencies: Vec<Complex64> = selected.iter().map(|lam| I * lam).collect();
    frequencies.sort_by(|x, y| x.re.abs().total_cmp(&y.re.abs()).then(x.norm().total_cmp(&y.norm())));
    let kinds = frequencies
        .iter()
        .map(|w| {
            if w.norm() <= tol {
                ModeKind::Zero
            } else if w.im > tol {
                ModeKind::AntiDamped
            } else if w.im < -tol {
                ModeKind::Damped
            } else {
                ModeKind::Neutral
            }
        })
        .collect();
    let vectors = if with_vectors {
        Some(frequencies.iter().map(|w| mode_vector(k, l, c, -I * w)).collect())
    } else {
        None
    };
    Ok(PhononModes {
        frequencies,
        kinds,
        scale: params.phonon_scale(),
        vectors,
    })
}

/// Null vector of `λ²I + cλL + cK` by inverse iteration.
fn mode_vector(k: &DMatrix<f64>, l: &DMatrix<f64>, c: f64, lambda: Complex64) -> DVector<Complex64> {
    let n = k.nrows();
    let scale = (c * k.amax()).sqrt().max(c * l.amax()).max(lambda.norm()).max(f64::MIN_POSITIVE);
    let shift = lambda + Complex64::new(1e-10, 1e-10) * scale;
    let q = DMatrix::from_fn(n, n, |j, m| {
        let id = if j == m { shift * shift } else { ZERO };
        id + c * shift * l[(j, m)] + c * k[(j, m)]
    });
    let lu = q.lu();
    let mut x = DVector::from_fn(n, |j, _| Complex64::new(1.0 + 0.1 * j as f64, 0.0));
    for _ in 0..3 {
        match lu.solve(&x) {
            Some(y) if y.norm() > 0.0 && y.iter().all(|v| v.is_finite()) => x = &y / Complex64::new(y.norm(), 0.0),
            _ => break,
        }
    }
    // fix the global phase: largest component real and positive
    let (imax, _) = x
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (j, v)| if v.norm() > acc.1 { (j, v.norm()) } else { acc });
    let phase = x[imax] / x[imax].norm();
    x / phase
}

/// Stiffness, damping and normal modes at one equilibrium.
#[derive(Debug, Clone)]
pub struct PhononAnalysis {
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub modes: PhononModes,
    /// Largest residual force at `z`, relative to `Γ₁D s₀`.
    pub residual_force: f64,
}

/// Linearizes about `z` and solves for the modes.
pub fn analyze(params: &SystemParams, z: &[f64]) -> Result<PhononAnalysis> {
    let (f, _) = instantaneous_force(params, z)?;
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let residual_force = f.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) / params.force_scale();
    if residual_force > 1e-6 {
        log::warn!("linearizing about a configuration with residual force {residual_force:.2e} Γ₁D s₀");
    }
    let stiffness = stiffness_matrix(params, z)?;
    let damping = damping_matrix(params, z)?;
    let modes = normal_modes(&stiffness, &damping, params)?;
    Ok(PhononAnalysis {
        stiffness,
        damping,
        modes,
        residual_force,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{weak_lattice, weak_phonon_spectrum};
    use approx::assert_relative_eq;

    fn params(n: usize, delta: f64) -> SystemParams {
        SystemParams {
            n_atoms: n,
            gamma_1d: 0.25,
            rabi: 0.05,
            pump_detuning: delta,
            recoil: 1e-3,
            ext_damping: 0.0,
        }
    }

    fn jittered(n: usize) -> Vec<f64> {
        (0..n).map(|j| 0.87 * j as f64 + 0.05 * ((j * j) as f64).sin()).collect()
    }

    #[test]
    fn analytic_stiffness_matches_finite_differences() {
        for delta in [-3.0, -0.4, 0.7] {
            let p = params(7, delta);
            let z = jittered(7);
            let k = stiffness_matrix(&p, &z).unwrap();
            let fd = finite_difference_stiffness(&p, &z, FD_STEP).unwrap();
            assert!(fd.richardson < 1e-5, "richardson {}", fd.richardson);
            let err = (&k - &fd.k).amax() / k.amax();
            assert!(err < 1e-5, "δ={delta}: relative error {err}");
        }
    }

    #[test]
    fn rows_sum_to_zero() {
        let p = params(9, -1.3);
        let k = stiffness_matrix(&p, &jittered(9)).unwrap();
        for j in 0..9 {
            assert!(k.row(j).sum().abs() < 1e-8 * k.amax());
        }
    }

    #[test]
    fn weak_pair_stiffness() {
        let p = params(2, -2000.0);
        let k = stiffness_matrix(&p, &[0.0, 0.75]).unwrap();
        let kappa = K0 * p.gamma_1d * p.s0();
        let expected = DMatrix::from_row_slice(2, 2, &[kappa, -kappa, -kappa, kappa]);
        assert!((&k - &expected).amax() < 1e-3 * kappa);
    }

    #[test]
    fn weak_lattice_stiffness_is_circulant() {
        let n = 12;
        let p = params(n, -4000.0);
        let z = weak_lattice(n).unwrap().positions;
        let k = stiffness_matrix(&p, &z).unwrap();
        let weak = weak_limit_stiffness(&p, &z);
        assert!((&k - &weak).amax() < 0.01 * weak.amax());
        for j in 0..n {
            for m in 0..n {
                let shifted = weak[((j + 1) % n, (m + 1) % n)];
                assert!((weak[(j, m)] - shifted).abs() < 1e-12 * weak.amax());
            }
        }
        assert!(asymmetry(&weak) < 1e-12);
    }

    #[test]
    fn weak_limit_frequencies_match_closed_form() {
        for n in [2usize, 3, 10, 50] {
            let p = params(n, -15.0);
            let z = weak_lattice(n).unwrap().positions;
            let k = weak_limit_stiffness(&p, &z);
            let modes = normal_modes(&k, &DMatrix::zeros(n, n), &p).unwrap();
            let mut expected = weak_phonon_spectrum(&p);
            expected.sort_by(f64::total_cmp);
            let top = expected[n - 1];
            for (w, e) in modes.frequencies.iter().zip(&expected) {
                assert!((w.re - e).abs() <= 1e-6 * top, "n={n}: {} vs {e}", w.re);
            }
            assert_eq!(modes.kinds[0], ModeKind::Zero);
        }
    }

    #[test]
    fn pure_damping() {
        let p = params(4, -10.0);
        let gamma = 0.02;
        let modes = normal_modes(&DMatrix::zeros(4, 4), &(DMatrix::identity(4, 4) * gamma), &p).unwrap();
        for w in &modes.frequencies {
            assert_relative_eq!(w.re, 0.0, epsilon = 1e-12);
            assert_relative_eq!(w.im, -gamma, max_relative = 1e-10);
        }
        assert!(modes.kinds.iter().all(|k| *k == ModeKind::Damped));
    }

    #[test]
    fn damping_vanishes_with_recoil() {
        let z = jittered(6);
        let base = damping_matrix(&params(6, -2.0), &z).unwrap().amax();
        assert!(base > 0.0);
        for scale in [1e-1, 1e-2] {
            let p = SystemParams {
                recoil: 1e-3 * scale,
                ..params(6, -2.0)
            };
            assert_relative_eq!(damping_matrix(&p, &z).unwrap().amax(), base * scale, max_relative = 1e-9);
        }
    }

    #[test]
    fn mode_vectors_solve_the_quadratic_problem() {
        let p = params(5, -15.0);
        let z = weak_lattice(5).unwrap().positions;
        let k = weak_limit_stiffness(&p, &z);
        let modes = normal_modes_with(&k, &DMatrix::zeros(5, 5), &p, true).unwrap();
        let c = velocity_factor(&p);
        let vectors = modes.vectors.as_ref().unwrap();
        for (w, v) in modes.frequencies.iter().zip(vectors).skip(1) {
            let kc = k.map(|x| Complex64::new(c * x, 0.0));
            let residual = &kc * v - v * (w * w);
            assert!(residual.norm() < 1e-6 * (w * w).norm(), "ω={w}");
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let p = params(3, -1.0);
        assert!(normal_modes(&DMatrix::zeros(3, 3), &DMatrix::zeros(2, 2), &p).is_err());
    }
}
