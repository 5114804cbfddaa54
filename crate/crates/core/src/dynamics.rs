//! Optical forces and the semiclassical equations of motion.
//!
//! In the crate units the coupled equations read
//!
//! ```text
//! ż_j = (ω_r/π) p_j
//! σ̇_j = (iδ − 1/2)σ_j + iΩ − (Γ₁D/2) Σ_{k≠j} σ_k exp(ik₀|z_j − z_k|)
//! ṗ_j = −Γ₁D Re[Σ_k σ_j σ_k* exp(−ik₀|z_j − z_k|) sign(z_j − z_k)] − γ_e p_j
//! ```
//!
//! The force sum splits into the guided fields incident from each side,
//! `F_j = −Γ₁D Re[σ_j (R_j* − L_j*)]`, which makes every evaluation `O(N)`.

use num_complex::Complex64;

use crate::coherence::{apply_coupling, guided_fields, solve_chain, uniform_drive};
use crate::error::{Error, Result};
use crate::model::{check_ordering, velocity_factor, ChainState, SystemParams};

/// Neighbouring atoms closer than this (in `λ₀`) are about to cross.
pub const MIN_GAP: f64 = 1e-6;

/// Maximum number of step halvings before an ordering violation is fatal.
pub const MAX_HALVINGS: u32 = 10;

/// How the coherences are advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrationMode {
    /// Integrate the coherences together with the motion.
    Full,
    /// Replace the coherences by their instantaneous fixed point at every stage.
    #[default]
    AdiabaticElimination,
    /// Keep the coherences of the initial state fixed.
    FrozenCoherences,
}

/// Force on every atom (units `ħk₀Γ`) for given positions and coherences.
///
/// The self-term is excluded (`sign(0) = 0`).
pub fn force(params: &SystemParams, z: &[f64], sigma: &[Complex64]) -> Result<Vec<f64>> {
    check_ordering(z)?;
    if sigma.len() != z.len() {
        return Err(Error::InvalidState(format!(
            "{} coherences for {} atoms",
            sigma.len(),
            z.len()
        )));
    }
    let (right, left) = guided_fields(z, sigma);
    Ok(force_from_fields(params.gamma_1d, sigma, &right, &left))
}

pub(crate) fn force_from_fields(
    gamma_1d: f64,
    sigma: &[Complex64],
    right: &[Complex64],
    left: &[Complex64],
) -> Vec<f64> {
    sigma
        .iter()
        .zip(right.iter().zip(left))
        .map(|(s, (r, l))| -gamma_1d * (s * (r.conj() - l.conj())).re)
        .collect()
}

/// Forces with the coherences at their instantaneous fixed point.
pub fn instantaneous_force(params: &SystemParams, z: &[f64]) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let solution = solve_chain(params, params.pump_detuning, z, &uniform_drive(params, z.len()))?;
    let f = force_from_fields(params.gamma_1d, &solution.sigma, &solution.right, &solution.left);
    Ok((f, solution.sigma))
}

/// Sampled solution of the equations of motion.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ChainState>,
    /// `max_j |p_j|` at each sample.
    pub max_momentum: Vec<f64>,
    /// `max_j |F_j|` at each sample.
    pub max_force: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&ChainState> {
        self.states.last()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Clone)]
struct Phase {
    z: Vec<f64>,
    p: Vec<f64>,
    sigma: Vec<Complex64>,
}

struct Derivative {
    z: Vec<f64>,
    p: Vec<f64>,
    sigma: Option<Vec<Complex64>>,
    force: Vec<f64>,
}

/// Right-hand side of the equations of motion in one mode.
struct Flow<'a> {
    params: &'a SystemParams,
    mode: IntegrationMode,
    velocity: f64,
    drive: Vec<Complex64>,
}

impl<'a> Flow<'a> {
    fn new(params: &'a SystemParams, mode: IntegrationMode, n: usize) -> Self {
        Flow {
            params,
            mode,
            velocity: velocity_factor(params),
            drive: uniform_drive(params, n),
        }
    }

    /// Derivative at `x`; in adiabatic mode also overwrites `x.sigma` with the fixed point.
    fn eval(&self, x: &mut Phase) -> Result<Derivative> {
        check_ordering(&x.z)?;
        let gamma = self.params.gamma_1d;
        let (force, dsigma) = match self.mode {
            IntegrationMode::AdiabaticElimination => {
                let sol = solve_chain(self.params, self.params.pump_detuning, &x.z, &self.drive)?;
                let f = force_from_fields(gamma, &sol.sigma, &sol.right, &sol.left);
                x.sigma = sol.sigma;
                (f, None)
            }
            IntegrationMode::Full => {
                let (right, left) = guided_fields(&x.z, &x.sigma);
                let f = force_from_fields(gamma, &x.sigma, &right, &left);
                let ds: Vec<Complex64> = apply_coupling(self.params, &x.z, &x.sigma)
                    .into_iter()
                    .zip(&self.drive)
                    .map(|(m, d)| m + Complex64::new(0.0, 1.0) * d)
                    .collect();
                (f, Some(ds))
            }
            IntegrationMode::FrozenCoherences => {
                let (right, left) = guided_fields(&x.z, &x.sigma);
                (force_from_fields(gamma, &x.sigma, &right, &left), None)
            }
        };
        let damping = self.params.ext_damping;
        Ok(Derivative {
            z: x.p.iter().map(|p| self.velocity * p).collect(),
            p: force.iter().zip(&x.p).map(|(f, p)| f - damping * p).collect(),
            sigma: dsigma,
            force,
        })
    }

    fn stage(&self, x: &Phase, k: &Derivative, h: f64) -> Phase {
        Phase {
            z: x.z.iter().zip(&k.z).map(|(a, b)| a + h * b).collect(),
            p: x.p.iter().zip(&k.p).map(|(a, b)| a + h * b).collect(),
            sigma: match &k.sigma {
                Some(ds) => x.sigma.iter().zip(ds).map(|(a, b)| a + h * b).collect(),
                None => x.sigma.clone(),
            },
        }
    }

    /// One classical Runge–Kutta step of size `h`.
    fn rk4(&self, x: &Phase, k1: &Derivative, h: f64) -> Result<Phase> {
        let mut x2 = self.stage(x, k1, 0.5 * h);
        let k2 = self.eval(&mut x2)?;
        let mut x3 = self.stage(x, &k2, 0.5 * h);
        let k3 = self.eval(&mut x3)?;
        let mut x4 = self.stage(x, &k3, h);
        let k4 = self.eval(&mut x4)?;
        let w = h / 6.0;
        let comb = |a: f64, b1: f64, b2: f64, b3: f64, b4: f64| a + w * (b1 + 2.0 * (b2 + b3) + b4);
        let n = x.z.len();
        let mut out = x.clone();
        for j in 0..n {
            out.z[j] = comb(x.z[j], k1.z[j], k2.z[j], k3.z[j], k4.z[j]);
            out.p[j] = comb(x.p[j], k1.p[j], k2.p[j], k3.p[j], k4.p[j]);
        }
        if let (Some(s1), Some(s2), Some(s3), Some(s4)) = (&k1.sigma, &k2.sigma, &k3.sigma, &k4.sigma) {
            for j in 0..n {
                out.sigma[j] = x.sigma[j] + w * (s1[j] + 2.0 * (s2[j] + s3[j]) + s4[j]);
            }
        }
        Ok(out)
    }
}

fn smallest_gap(z: &[f64]) -> Option<(usize, f64)> {
    z.windows(2)
        .enumerate()
        .map(|(j, w)| (j, w[1] - w[0]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn is_finite(x: &Phase) -> bool {
    x.z.iter().chain(&x.p).all(|v| v.is_finite())
        && x.sigma.iter().all(|s| s.re.is_finite() && s.im.is_finite())
}

/// Stepper shared by [`integrate`] and [`relax_to_steady_state`].
struct Stepper<'a> {
    flow: Flow<'a>,
    x: Phase,
    k: Derivative,
    t: f64,
    steps: u64,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a SystemParams, state: &ChainState, mode: IntegrationMode) -> Result<Self> {
        params.validate()?;
        state.validate()?;
        if state.len() != params.n_atoms {
            return Err(Error::InvalidState(format!(
                "state has {} atoms, parameters say {}",
                state.len(),
                params.n_atoms
            )));
        }
        let flow = Flow::new(params, mode, state.len());
        let mut x = Phase {
            z: state.z.clone(),
            p: state.p.clone(),
            sigma: state.sigma.clone(),
        };
        let k = flow.eval(&mut x)?;
        Ok(Stepper {
            flow,
            x,
            k,
            t: 0.0,
            steps: 0,
        })
    }

    fn state(&self) -> ChainState {
        ChainState {
            z: self.x.z.clone(),
            p: self.x.p.clone(),
            sigma: self.x.sigma.clone(),
        }
    }

    fn try_step(&self, h: f64) -> Result<Option<Phase>> {
        let next = match self.flow.rk4(&self.x, &self.k, h) {
            Ok(next) => next,
            // a stage that crosses atoms is treated like a rejected step
            Err(Error::Degenerate { .. }) | Err(Error::InvalidState(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !is_finite(&next) {
            return Err(Error::Divergence { time: self.t + h });
        }
        match smallest_gap(&next.z) {
            Some((_, gap)) if gap < MIN_GAP => Ok(None),
            _ => Ok(Some(next)),
        }
    }

    /// Advances by `dt`, halving the step up to [`MAX_HALVINGS`] times if atoms would cross.
    fn advance(&mut self, dt: f64) -> Result<()> {
        let mut remaining = dt;
        let mut h = dt;
        let mut halvings = 0;
        while remaining > 0.0 {
            h = h.min(remaining);
            match self.try_step(h)? {
                Some(mut next) => {
                    self.k = self.flow.eval(&mut next)?;
                    self.x = next;
                    self.t += h;
                    remaining -= h;
                    if remaining < 1e-12 * dt {
                        remaining = 0.0;
                    }
                }
                None => {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        let (j, gap) = smallest_gap(&self.x.z).unwrap_or((0, 0.0));
                        return Err(Error::OrderingViolation {
                            first: j,
                            second: j + 1,
                            gap,
                            time: self.t,
                        });
                    }
                    h *= 0.5;
                }
            }
        }
        self.steps += 1;
        Ok(())
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest deviation from the mean, i.e. the internal (center-of-mass free) part.
fn max_internal(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().fold(0.0, |m, x| m.max((x - mean).abs()))
}

/// Integrates with fixed step `dt` up to `t_max`, keeping about 1000 samples.
pub fn integrate(
    params: &SystemParams,
    state: &ChainState,
    dt: f64,
    t_max: f64,
    mode: IntegrationMode,
) -> Result<Trajectory> {
    let total = (t_max / dt).ceil().max(1.0) as u64;
    integrate_sampled(params, state, dt, t_max, mode, (total / 1000).max(1))
}

/// As [`integrate`], recording a snapshot every `stride` steps (plus the final state).
pub fn integrate_sampled(
    params: &SystemParams,
    state: &ChainState,
    dt: f64,
    t_max: f64,
    mode: IntegrationMode,
    stride: u64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidState(format!("bad time grid dt = {dt}, t_max = {t_max}")));
    }
    if mode == IntegrationMode::Full && dt > 0.1 {
        log::warn!("dt = {dt} does not resolve the coherence dynamics (dt ≤ 0.1/Γ)");
    }
    let mut stepper = Stepper::new(params, state, mode)?;
    let mut traj = Trajectory::default();
    let record = |traj: &mut Trajectory, s: &Stepper| {
        traj.times.push(s.t);
        traj.states.push(s.state());
        traj.max_momentum.push(max_abs(&s.x.p));
        traj.max_force.push(max_abs(&s.k.force));
    };
    record(&mut traj, &stepper);
    let total = (t_max / dt).round() as u64;
    for step in 1..=total {
        stepper.advance(dt)?;
        if step % stride.max(1) == 0 || step == total {
            record(&mut traj, &stepper);
        }
    }
    Ok(traj)
}

/// Convergence thresholds, relative to the characteristic scales of the chain.
///
/// A state is stationary when every internal (center-of-mass free) force is
/// below `force · Γ₁D s₀` and every internal momentum below
/// `momentum · Γ₁D s₀ / √(ω_r s₀ N Γ₁D)`. Relative thresholds make the
/// criterion independent of the free pump strength `Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub momentum: f64,
    pub force: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            momentum: 1e-6,
            force: 1e-8,
        }
    }
}

impl Tolerances {
    fn scales(params: &SystemParams) -> (f64, f64) {
        let force = params.force_scale();
        (force / params.phonon_scale(), force)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions {
    pub tolerances: Tolerances,
    pub mode: IntegrationMode,
    /// Fixed step; chosen from the stiffness when `None`.
    pub dt: Option<f64>,
    /// Give up after this time, in units of `1/√(ω_r s₀ N Γ₁D)`.
    pub max_time: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            tolerances: Tolerances::default(),
            mode: IntegrationMode::AdiabaticElimination,
            dt: None,
            max_time: 2e5,
        }
    }
}

/// Outcome of [`relax_to_steady_state`].
#[derive(Debug, Clone)]
pub struct RelaxReport {
    pub state: ChainState,
    /// Integration time used (units `1/Γ`).
    pub time: f64,
    pub steps: u64,
    pub dt: f64,
    /// Largest internal momentum at the end.
    pub max_momentum: f64,
    /// Largest internal force at the end.
    pub max_force: f64,
    /// Net force on the chain, `Σ_j F_j`.
    pub total_force: f64,
    /// The input already satisfied the tolerances.
    pub no_op: bool,
}

/// Upper bound on the largest mechanical frequency from a finite-difference
/// stiffness matrix and Gershgorin's theorem.
pub fn frequency_bound(params: &SystemParams, z: &[f64]) -> Result<f64> {
    let n = z.len();
    let h = 1e-6;
    let mut row_sums = vec![0.0; n];
    let mut zz = z.to_vec();
    for k in 0..n {
        zz[k] = z[k] + h;
        let (fp, _) = instantaneous_force(params, &zz)?;
        zz[k] = z[k] - h;
        let (fm, _) = instantaneous_force(params, &zz)?;
        zz[k] = z[k];
        for j in 0..n {
            row_sums[j] += ((fp[j] - fm[j]) / (2.0 * h)).abs();
        }
    }
    let gersh = row_sums.into_iter().fold(0.0, f64::max);
    Ok((velocity_factor(params) * gersh).sqrt())
}

/// Integrates the damped equations until the chain is stationary.
pub fn relax_to_steady_state(
    params: &SystemParams,
    state: &ChainState,
    options: &RelaxOptions,
) -> Result<RelaxReport> {
    if params.ext_damping <= 0.0 {
        return Err(Error::InvalidParams {
            field: "ext_damping",
            reason: "relaxation needs a positive external damping".into(),
        });
    }
    let mut stepper = Stepper::new(params, state, options.mode)?;
    let (p_scale, f_scale) = Tolerances::scales(params);
    let p_tol = options.tolerances.momentum * p_scale;
    let f_tol = options.tolerances.force * f_scale;
    let converged = |s: &Stepper| max_internal(&s.x.p) < p_tol && max_internal(&s.k.force) < f_tol;

    let report = |s: &Stepper, dt: f64, no_op: bool| RelaxReport {
        state: s.state(),
        time: s.t,
        steps: s.steps,
        dt,
        max_momentum: max_internal(&s.x.p),
        max_force: max_internal(&s.k.force),
        total_force: s.k.force.iter().sum(),
        no_op,
    };
    if converged(&stepper) {
        return Ok(report(&stepper, 0.0, true));
    }

    let choose_dt = |z: &[f64]| -> Result<f64> {
        if let Some(dt) = options.dt {
            return Ok(dt);
        }
        let omega = frequency_bound(params, z)?.max(params.ext_damping);
        let mut dt = 0.5 / omega.max(f64::MIN_POSITIVE);
        if options.mode == IntegrationMode::Full {
            dt = dt.min(0.05);
        }
        Ok(dt)
    };
    let mut dt = choose_dt(&stepper.x.z)?;
    let t_max = options.max_time / params.phonon_scale();
    let mut since_estimate = 0u64;
    while stepper.t < t_max {
        stepper.advance(dt)?;
        if converged(&stepper) {
            return Ok(report(&stepper, dt, false));
        }
        since_estimate += 1;
        if since_estimate == 5000 && options.dt.is_none() {
            dt = choose_dt(&stepper.x.z)?;
            since_estimate = 0;
        }
    }
    Err(Error::Timeout {
        time: stepper.t,
        max_momentum: max_internal(&stepper.x.p),
        max_force: max_internal(&stepper.k.force),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::solve_instantaneous;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(n: usize, delta: f64) -> SystemParams {
        let mut p = SystemParams {
            n_atoms: n,
            gamma_1d: 0.25,
            rabi: 0.05,
            pump_detuning: delta,
            recoil: 1e-3,
            ext_damping: 0.0,
        };
        p.ext_damping = p.default_damping();
        p
    }

    /// Direct double sum, independent of the guided-field recursion.
    fn pairwise_force(gamma_1d: f64, z: &[f64], sigma: &[Complex64]) -> Vec<f64> {
        (0..z.len())
            .map(|j| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..z.len() {
                    if k != j {
                        let d = z[j] - z[k];
                        acc += sigma[j] * sigma[k].conj() * Complex64::from_polar(1.0, -2.0 * PI * d.abs()) * d.signum();
                    }
                }
                -gamma_1d * acc.re
            })
            .collect()
    }

    #[test]
    fn force_matches_pairwise_sum() {
        let z = [0.0, 0.4, 1.35, 2.2, 2.9, 4.1];
        let sigma: Vec<Complex64> = (0..6)
            .map(|j| Complex64::new(0.01 * (j as f64).cos(), 0.02 * (1.0 + j as f64).sin()))
            .collect();
        let p = params(6, -1.0);
        let fast = force(&p, &z, &sigma).unwrap();
        let slow = pairwise_force(p.gamma_1d, &z, &sigma);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn single_atom_feels_no_force() {
        let p = params(1, -1.0);
        assert_eq!(force(&p, &[0.3], &[Complex64::new(0.1, 0.2)]).unwrap(), vec![0.0]);
    }

    #[test]
    fn pair_forces_are_opposite() {
        let p = params(2, -1.0);
        let s = Complex64::new(0.03, 0.0);
        for sep in [0.1, 0.33, 0.6, 1.7] {
            let f = force(&p, &[0.0, sep], &[s, s]).unwrap();
            assert!((f[0] + f[1]).abs() < 1e-16);
        }
        let f = force(&p, &[0.0, 0.75], &[s, s]).unwrap();
        assert!(f[0].abs() < 1e-15 && f[1].abs() < 1e-15);
    }

    #[test]
    fn equal_coherences_give_zero_total_force() {
        let p = params(5, -1.0);
        let s = p.sigma0();
        let f = force(&p, &[0.0, 0.33, 1.2, 2.01, 2.5], &[s; 5]).unwrap();
        assert!(f.iter().sum::<f64>().abs() < 1e-18);
    }

    #[test]
    fn pair_at_equilibrium_is_stationary() {
        let p = params(2, -2.0);
        let z = vec![0.0, 0.75];
        let sigma = solve_instantaneous(&p, &z).unwrap();
        let state = ChainState::new(z.clone(), vec![0.0; 2], sigma).unwrap();
        let traj = integrate(&p, &state, 0.05, 1e3, IntegrationMode::Full).unwrap();
        let end = traj.last().unwrap();
        assert!((end.z[1] - end.z[0] - 0.75).abs() < 1e-12);
        assert!(end.p.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn pair_relaxes_to_three_quarter_spacing() {
        let p = params(2, -2.0);
        let state = ChainState::at_rest(vec![0.0, 0.70]).unwrap();
        let report = relax_to_steady_state(&p, &state, &RelaxOptions::default()).unwrap();
        let sep = report.state.z[1] - report.state.z[0];
        assert!((sep - 0.75).abs() < 1e-3, "separation {sep}");
        assert!(!report.no_op);
    }

    #[test]
    fn converged_input_is_returned_unchanged() {
        let p = params(2, -2.0);
        let state = ChainState::at_rest(vec![0.0, 0.70]).unwrap();
        let first = relax_to_steady_state(&p, &state, &RelaxOptions::default()).unwrap();
        let again = relax_to_steady_state(&p, &first.state, &RelaxOptions::default()).unwrap();
        assert!(again.no_op);
        assert_eq!(again.state.z, first.state.z);
    }

    #[test]
    fn relax_requires_damping() {
        let p = params(2, -2.0).with_damping(0.0);
        let state = ChainState::at_rest(vec![0.0, 0.7]).unwrap();
        assert!(matches!(
            relax_to_steady_state(&p, &state, &RelaxOptions::default()),
            Err(Error::InvalidParams { .. })
        ));
    }

    #[test]
    fn crossing_atoms_are_rejected() {
        // attractive pair launched at each other with a huge step
        let mut p = params(2, -2.0);
        p.recoil = 0.05;
        let state = ChainState::new(vec![0.0, 0.01], vec![0.0, -1e4], vec![Complex64::new(0.0, 0.0); 2]).unwrap();
        let err = integrate(&p, &state, 1.0, 10.0, IntegrationMode::FrozenCoherences).unwrap_err();
        assert!(matches!(err, Error::OrderingViolation { .. }), "{err}");
    }

    #[test]
    fn frozen_equal_coherences_conserve_energy() {
        let mut p = params(4, -1.0).with_damping(0.0);
        p.recoil = 1e-3;
        let s = Complex64::new(0.05, 0.0);
        let z = vec![0.0, 0.9, 1.85, 2.7];
        let state = ChainState::new(z, vec![0.0; 4], vec![s; 4]).unwrap();
        let energy = |st: &ChainState| {
            let kinetic: f64 = st.p.iter().map(|x| p.recoil * x * x).sum();
            let mut potential = 0.0;
            for j in 0..4 {
                for k in j + 1..4 {
                    potential += (2.0 * PI * (st.z[k] - st.z[j])).sin();
                }
            }
            kinetic + p.gamma_1d * s.norm_sqr() * potential
        };
        let traj = integrate(&p, &state, 2.0, 2e4, IntegrationMode::FrozenCoherences).unwrap();
        let e0 = energy(&traj.states[0]);
        let scale = p.gamma_1d * s.norm_sqr();
        let drift = traj.states.iter().map(|st| (energy(st) - e0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8 * scale, "energy drift {drift}");
        // the motion is not trivial
        let moved = (traj.last().unwrap().z[1] - 0.9).abs();
        assert!(moved > 1e-3);
    }

    #[test]
    fn trajectory_is_translation_covariant() {
        let p = params(3, -1.5);
        let a = ChainState::at_rest(vec![0.0, 0.8, 1.7]).unwrap();
        let b = a.translated(2.5);
        let ta = integrate(&p, &a, 20.0, 4e3, IntegrationMode::AdiabaticElimination).unwrap();
        let tb = integrate(&p, &b, 20.0, 4e3, IntegrationMode::AdiabaticElimination).unwrap();
        for (sa, sb) in ta.states.iter().zip(&tb.states) {
            for (x, y) in sa.z.iter().zip(&sb.z) {
                assert!((y - x - 2.5).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn full_and_adiabatic_modes_agree() {
        // equilibria do not depend on Ω; a stronger pump and near-critical
        // damping keep the full integration short
        let mut p = params(3, -1.5);
        p.rabi = 0.3;
        p.ext_damping = p.phonon_scale();
        let start = ChainState::at_rest(vec![0.0, 0.85, 1.8]).unwrap();
        let opts = RelaxOptions::default();
        let adiabatic = relax_to_steady_state(&p, &start, &opts).unwrap();
        let full_start = ChainState {
            sigma: solve_instantaneous(&p, &start.z).unwrap(),
            ..start.clone()
        };
        let full = relax_to_steady_state(
            &p,
            &full_start,
            &RelaxOptions {
                mode: IntegrationMode::Full,
                ..opts
            },
        )
        .unwrap();
        let shift = full.state.z[0] - adiabatic.state.z[0];
        for (a, b) in adiabatic.state.z.iter().zip(&full.state.z) {
            assert!((b - a - shift).abs() < 1e-4, "{a} vs {b}");
        }
        assert_relative_eq!(adiabatic.state.z[2] - adiabatic.state.z[0], full.state.z[2] - full.state.z[0], epsilon = 1e-4);
    }
}
