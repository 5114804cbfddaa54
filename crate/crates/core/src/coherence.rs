//! Coherences of the driven chain.
//!
//! With saturation neglected the coherences obey the linear system
//! `σ̇ = Mσ + iΩ⃗`, with
//!
//! ```text
//! M_jj = iδ − 1/2,    M_jk = −(Γ₁D/2) exp(ik₀|z_j − z_k|)   (j ≠ k).
//! ```
//!
//! Because the motion is slow compared with `Γ`, the coherences follow the
//! positions and sit at the fixed point `σ_inst = −iM⁻¹Ω⃗`.
//!
//! Two solvers are provided. [`CoherenceSolver::Dense`] builds `M` and uses an
//! LU factorization with partial pivoting; it is the reference. The
//! waveguide Green's function `exp(ik₀|z_j − z_k|)` is semiseparable, so the
//! same system can also be solved in `O(N)` by treating every atom as a
//! scatterer with a source and composing the chain from both ends
//! ([`CoherenceSolver::Chain`]). The dynamics use the chain solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{check_ordering, SystemParams, K0};

/// Condition numbers above this are reported as ill-conditioned.
pub const CONDITION_LIMIT: f64 = 1e12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense `N×N` coupling matrix at a given detuning.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub m: DMatrix<Complex64>,
}

impl CouplingMatrix {
    pub fn build(params: &SystemParams, detuning: f64, z: &[f64]) -> Result<Self> {
        check_ordering(z)?;
        let n = z.len();
        let g = 0.5 * params.gamma_1d;
        let diag = Complex64::new(-0.5, detuning);
        let m = DMatrix::from_fn(n, n, |j, k| {
            if j == k {
                diag
            } else {
                -g * Complex64::from_polar(1.0, K0 * (z[j] - z[k]).abs())
            }
        });
        Ok(CouplingMatrix { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Solves `Mσ = −i·drive` and returns `σ` with the 1-norm condition number of `M`.
    pub fn solve(&self, drive: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
        let lu = self.m.clone().lu();
        let inverse = lu.try_inverse().ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
        let condition = one_norm(&self.m) * one_norm(&inverse);
        if !condition.is_finite() || condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned { condition });
        }
        let rhs = DVector::from_iterator(drive.len(), drive.iter().map(|d| -I * d));
        let sigma = &inverse * rhs;
        Ok((sigma.iter().copied().collect(), condition))
    }
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Coupling matrix at the pump detuning of `params`.
pub fn build_coupling_matrix(params: &SystemParams, z: &[f64]) -> Result<CouplingMatrix> {
    CouplingMatrix::build(params, params.pump_detuning, z)
}

/// Uniform pump drive `Ω⃗ = Ω·(1, …, 1)`.
pub fn uniform_drive(params: &SystemParams, n: usize) -> Vec<Complex64> {
    vec![Complex64::new(params.rabi, 0.0); n]
}

/// Which linear solver to use for the coherences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoherenceSolver {
    /// Dense LU with partial pivoting and a condition-number guard.
    #[default]
    Dense,
    /// `O(N)` scatterer composition along the chain.
    Chain,
}

impl CoherenceSolver {
    /// Solves `M(δ)σ = −i·drive` for positions `z`.
    pub fn solve(
        self,
        params: &SystemParams,
        detuning: f64,
        z: &[f64],
        drive: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        match self {
            CoherenceSolver::Dense => {
                CouplingMatrix::build(params, detuning, z)?.solve(drive).map(|(s, _)| s)
            }
            CoherenceSolver::Chain => {
                solve_chain(params, detuning, z, drive).map(|solution| solution.sigma)
            }
        }
    }
}

/// `σ_inst = −iM⁻¹Ω⃗` at the pump detuning, by dense LU.
///
/// ```
/// use selforg::{coherence::solve_instantaneous, SystemParams};
///
/// let params = SystemParams::default().with_atoms(1).with_detuning(-2.0);
/// let sigma = solve_instantaneous(&params, &[0.0]).unwrap();
/// assert!((sigma[0] - params.sigma0()).norm() < 1e-14);
/// ```
pub fn solve_instantaneous(params: &SystemParams, z: &[f64]) -> Result<Vec<Complex64>> {
    CoherenceSolver::Dense.solve(params, params.pump_detuning, z, &uniform_drive(params, z.len()))
}

/// Guided fields arriving at every atom from the left and from the right.
///
/// `right[j] = Σ_{k<j} σ_k exp(ik₀(z_j − z_k))` is the right-moving field
/// incident on atom `j`; `left[j] = Σ_{k>j} σ_k exp(ik₀(z_k − z_j))`.
pub fn guided_fields(z: &[f64], sigma: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = z.len();
    let mut right = vec![Complex64::new(0.0, 0.0); n];
    let mut left = vec![Complex64::new(0.0, 0.0); n];
    for j in 1..n {
        let phase = Complex64::from_polar(1.0, K0 * (z[j] - z[j - 1]));
        right[j] = phase * (right[j - 1] + sigma[j - 1]);
    }
    for j in (0..n.saturating_sub(1)).rev() {
        let phase = Complex64::from_polar(1.0, K0 * (z[j + 1] - z[j]));
        left[j] = phase * (left[j + 1] + sigma[j + 1]);
    }
    (right, left)
}

/// `Mσ` in `O(N)` using [`guided_fields`].
pub fn apply_coupling(params: &SystemParams, z: &[f64], sigma: &[Complex64]) -> Vec<Complex64> {
    let (right, left) = guided_fields(z, sigma);
    let diag = Complex64::new(-0.5, params.pump_detuning);
    let g = 0.5 * params.gamma_1d;
    sigma
        .iter()
        .zip(right.iter().zip(&left))
        .map(|(s, (r, l))| diag * s - g * (r + l))
        .collect()
}

/// Coherences together with the guided fields incident on each atom.
#[derive(Debug, Clone)]
pub struct ChainSolution {
    pub sigma: Vec<Complex64>,
    pub right: Vec<Complex64>,
    pub left: Vec<Complex64>,
}

/// Reflection of the atoms already composed on one side, seen from the next
/// atom, and the field they emit towards it.
#[derive(Clone, Copy)]
struct Side {
    reflection: Complex64,
    source: Complex64,
}

/// Solves `M(δ)σ = −i·drive` in `O(N)`.
///
/// Each atom acts on the guided field as a scatterer with reflection
/// `ρ = (Γ₁D/2)/(iδ − 1/2)`, transmission `1 + ρ` and an emitted amplitude
/// `−i·drive_j/(iδ − 1/2)` into both directions. Composing the atoms to the
/// left and to the right of each site gives a 3×3 local system for the
/// incident fields and the coherence.
pub fn solve_chain(
    params: &SystemParams,
    detuning: f64,
    z: &[f64],
    drive: &[Complex64],
) -> Result<ChainSolution> {
    check_ordering(z)?;
    let n = z.len();
    if drive.len() != n {
        return Err(Error::InvalidState(format!(
            "drive has {} entries for {} atoms",
            drive.len(),
            n
        )));
    }
    let a = Complex64::new(-0.5, detuning);
    let g = 0.5 * params.gamma_1d;
    let rho = g / a;
    let tau = 1.0 + rho;
    let source: Vec<Complex64> = drive.iter().map(|d| -I * d / a).collect();
    let compose = |side: Side, s: Complex64| -> Result<Side> {
        let denom = 1.0 - side.reflection * rho;
        if denom.norm() < 1e-14 {
            return Err(Error::IllConditioned {
                condition: 1.0 / denom.norm(),
            });
        }
        Ok(Side {
            reflection: rho + tau * tau * side.reflection / denom,
            source: s + tau * (side.reflection * s + side.source) / denom,
        })
    };
    let propagate = |side: Side, distance: f64| -> Side {
        let phase = Complex64::from_polar(1.0, K0 * distance);
        Side {
            reflection: phase * phase * side.reflection,
            source: phase * side.source,
        }
    };

    let empty = Side {
        reflection: Complex64::new(0.0, 0.0),
        source: Complex64::new(0.0, 0.0),
    };
    let mut from_left = vec![empty; n];
    for j in 1..n {
        from_left[j] = propagate(compose(from_left[j - 1], source[j - 1])?, z[j] - z[j - 1]);
    }
    let mut from_right = vec![empty; n];
    for j in (0..n.saturating_sub(1)).rev() {
        from_right[j] = propagate(compose(from_right[j + 1], source[j + 1])?, z[j + 1] - z[j]);
    }

    let mut sigma = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let scale = a.norm() + 4.0 * g;
    for j in 0..n {
        let (ra, rb) = (from_left[j].reflection, from_left[j].source);
        let (lc, le) = (from_right[j].reflection, from_right[j].source);
        let det = 1.0 - ra * lc;
        let denom = a * det - g * (ra + lc + 2.0 * ra * lc);
        if denom.norm() < 1e-13 * scale {
            return Err(Error::IllConditioned {
                condition: scale / denom.norm(),
            });
        }
        let s = (-I * drive[j] * det + g * (rb + le + ra * le + lc * rb)) / denom;
        let r = (ra * (1.0 + lc) * s + ra * le + rb) / det;
        let l = (lc * (1.0 + ra) * s + lc * rb + le) / det;
        sigma.push(s);
        right.push(r);
        left.push(l);
    }
    Ok(ChainSolution { sigma, right, left })
}

/// `σ_inst` at the pump detuning by the `O(N)` chain solver.
pub fn solve_instantaneous_chain(params: &SystemParams, z: &[f64]) -> Result<ChainSolution> {
    solve_chain(params, params.pump_detuning, z, &uniform_drive(params, z.len()))
}

/// Mean excited population normalized by the independent-atom value, `⟨|σ|²⟩/s₀`.
pub fn excited_population(sigma: &[Complex64], params: &SystemParams) -> f64 {
    if sigma.is_empty() {
        return 0.0;
    }
    let mean = sigma.iter().map(|s| s.norm_sqr()).sum::<f64>() / sigma.len() as f64;
    mean / params.s0()
}

/// Semiclassical emission rates into the right- and left-moving guided modes,
/// `Γ_± = (Γ₁D/2)|Σ_j σ_j exp(∓ik₀z_j)|²`.
pub fn collective_emission_rates(
    sigma: &[Complex64],
    z: &[f64],
    params: &SystemParams,
) -> (f64, f64) {
    let mut plus = Complex64::new(0.0, 0.0);
    let mut minus = Complex64::new(0.0, 0.0);
    for (s, &x) in sigma.iter().zip(z) {
        plus += s * Complex64::from_polar(1.0, -K0 * x);
        minus += s * Complex64::from_polar(1.0, K0 * x);
    }
    let g = 0.5 * params.gamma_1d;
    (g * plus.norm_sqr(), g * minus.norm_sqr())
}
