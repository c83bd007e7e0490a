//! Controlled CHNS forward dynamics: states, controls, the IMEX stepper and
//! trajectory recording with diagnostics.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ops::{div_unchecked, grad_unchecked, leray_unchecked, vdot};
use crate::field::{check_grids, Grid, ScalarField, VectorField};
use crate::physics::{chemical_potential_unchecked, free_energy_unchecked, Kernel, Potential};
use crate::scalar::Real;
use crate::scheme::{convective, jacobian, Scheme};

/// Divergence allowed for states and control slices, relative to the field
/// size.
pub const DIV_TOL: f64 = 1e-10;

fn divergence_ok<T: Real>(v: &VectorField<T>) -> bool {
    let d = div_unchecked(v).max_abs().as_f64();
    d <= DIV_TOL * (1.0 + v.max_abs().as_f64())
}

#[derive(Clone, Debug)]
pub struct SolverConfig<T: Real> {
    pub nu: T,
    pub dt: T,
    pub t_final: T,
    pub stabilization: T,
    /// Body force `h`, one slice per step. `None` means zero.
    pub forcing: Option<Control<T>>,
    /// Snapshot stride for disk output.
    pub record_every: usize,
    /// Compute per-step diagnostics rows.
    pub diagnostics: bool,
}

impl<T: Real> SolverConfig<T> {
    /// Config with the default stabilization for `kernel` and `potential`.
    pub fn new(nu: T, dt: T, t_final: T, kernel: &Kernel<T>, potential: &Potential<T>) -> Result<Self> {
        let cfg = SolverConfig {
            nu,
            dt,
            t_final,
            stabilization: default_stabilization(kernel, potential),
            forcing: None,
            record_every: 1,
            diagnostics: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stabilization(mut self, s: T) -> Result<Self> {
        self.stabilization = s;
        self.validate()?;
        Ok(self)
    }

    pub fn with_forcing(mut self, h: Control<T>) -> Result<Self> {
        if h.len() != self.steps() {
            return Err(Error::LengthMismatch {
                what: "forcing",
                expected: self.steps(),
                got: h.len(),
            });
        }
        self.forcing = Some(h);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.nu > T::zero()) {
            return bad(format!("viscosity must be > 0, got {}", self.nu));
        }
        if !(self.dt > T::zero()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_final > T::zero()) {
            return bad(format!("t_final must be > 0, got {}", self.t_final));
        }
        if !(self.stabilization >= T::zero()) {
            return bad(format!("stabilization must be >= 0, got {}", self.stabilization));
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        let (dt, tf) = (self.dt.as_f64(), self.t_final.as_f64());
        let n = (tf / dt).round();
        if n < 1.0 || (n * dt - tf).abs() > 1e-12 * tf.max(1.0) {
            return bad(format!("dt = {dt} does not divide t_final = {tf}"));
        }
        Ok(())
    }

    /// Number of steps `N = t_final / dt`.
    pub fn steps(&self) -> usize {
        (self.t_final.as_f64() / self.dt.as_f64()).round() as usize
    }

    pub fn time(&self, n: usize) -> T {
        T::lit(n as f64) * self.dt
    }
}

/// `S = max(0, max |F''| on [-M, M] - a_mean)`.
pub fn default_stabilization<T: Real>(kernel: &Kernel<T>, potential: &Potential<T>) -> T {
    (potential.max_abs_d2() - kernel.a_mean()).max(T::zero())
}

#[derive(Clone, Debug)]
pub struct State<T: Real> {
    pub u: VectorField<T>,
    pub phi: ScalarField<T>,
    pub t: T,
}

impl<T: Real> State<T> {
    pub fn new(u: VectorField<T>, phi: ScalarField<T>, t: T) -> Result<Self> {
        check_grids(u.grid(), phi.grid())?;
        u.ensure_finite("velocity")?;
        phi.ensure_finite("order parameter")?;
        if !divergence_ok(&u) {
            return Err(Error::InvalidParameter(
                "initial velocity is not divergence-free".into(),
            ));
        }
        Ok(State { u, phi, t })
    }

    /// Projects `u` onto divergence-free fields first.
    pub fn projected(u: VectorField<T>, phi: ScalarField<T>, t: T) -> Result<Self> {
        check_grids(u.grid(), phi.grid())?;
        let u = leray_unchecked(&u);
        Self::new(u, phi, t)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.phi.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.phi.is_finite()
    }
}

/// Time-indexed divergence-free vector field, one slice per step.
#[derive(Clone, Debug)]
pub struct Control<T: Real> {
    slices: Vec<VectorField<T>>,
    dt: T,
}

impl<T: Real> Control<T> {
    pub fn new(slices: Vec<VectorField<T>>, dt: T) -> Result<Self> {
        if let Some(first) = slices.first() {
            for s in &slices {
                check_grids(first.grid(), s.grid())?;
                s.ensure_finite("control")?;
                if !divergence_ok(s) {
                    return Err(Error::InvalidParameter(
                        "control slice is not divergence-free".into(),
                    ));
                }
            }
        }
        Ok(Control { slices, dt })
    }

    /// Leray-projects every slice.
    pub fn projected(slices: Vec<VectorField<T>>, dt: T) -> Result<Self> {
        if let Some(first) = slices.first() {
            for s in &slices {
                check_grids(first.grid(), s.grid())?;
            }
        }
        Self::new(slices.iter().map(leray_unchecked).collect(), dt)
    }

    pub fn zeros(grid: &Arc<Grid<T>>, steps: usize, dt: T) -> Self {
        Control {
            slices: vec![VectorField::zeros(grid); steps],
            dt,
        }
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn slices(&self) -> &[VectorField<T>] {
        &self.slices
    }

    pub fn slice(&self, n: usize) -> &VectorField<T> {
        &self.slices[n]
    }

    pub fn into_slices(self) -> Vec<VectorField<T>> {
        self.slices
    }

    pub(crate) fn from_raw(slices: Vec<VectorField<T>>, dt: T) -> Self {
        Control { slices, dt }
    }

    /// `sum_n dt (U_n, V_n)`
    pub fn inner(&self, other: &Self) -> T {
        let s: T = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| vdot(a, b))
            .sum();
        s * self.dt
    }

    pub fn norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Control {
            slices: self.slices.iter().map(|v| v.scale(s)).collect(),
            dt: self.dt,
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) {
        for (u, v) in self.slices.iter_mut().zip(&other.slices) {
            u.axpy(a, v);
        }
    }

    /// `self + a * other`
    pub fn plus(&self, a: T, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(a, other);
        out
    }

    pub fn check_len(&self, expected: usize, what: &'static str) -> Result<()> {
        if self.len() != expected {
            return Err(Error::LengthMismatch {
                what,
                expected,
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// One row per snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    /// Spatial mean of the order parameter.
    pub mass: f64,
    /// `||grad u||^2`
    pub enstrophy: f64,
    /// `||grad mu||^2`
    pub grad_mu_sq: f64,
    pub max_speed: f64,
}

impl DiagnosticsRow {
    pub const HEADER: [&'static str; 6] = ["t", "energy", "mass", "enstrophy", "grad_mu_sq", "max_speed"];

    pub fn values(&self) -> [f64; 6] {
        [self.t, self.energy, self.mass, self.enstrophy, self.grad_mu_sq, self.max_speed]
    }
}

pub fn diagnostics<T: Real>(state: &State<T>, kernel: &Kernel<T>, potential: &Potential<T>) -> DiagnosticsRow {
    let u = &state.u;
    let kinetic = T::lit(0.5) * vdot(u, u);
    let energy = kinetic + free_energy_unchecked(&state.phi, kernel, potential);
    let (gx, gy) = jacobian(u);
    let enstrophy = vdot(&gx, &gx) + vdot(&gy, &gy);
    let mu = chemical_potential_unchecked(&state.phi, kernel, potential);
    let gmu = grad_unchecked(&mu);
    let grad_mu_sq = vdot(&gmu, &gmu);
    DiagnosticsRow {
        t: state.t.as_f64(),
        energy: energy.as_f64(),
        mass: state.phi.mean().as_f64(),
        enstrophy: enstrophy.as_f64(),
        grad_mu_sq: grad_mu_sq.as_f64(),
        max_speed: u.max_speed().as_f64(),
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub states: Vec<State<T>>,
    pub control: Control<T>,
    pub diagnostics: Vec<DiagnosticsRow>,
}

impl<T: Real> Trajectory<T> {
    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn final_state(&self) -> &State<T> {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// `r_n = (E_{n+1} - E_n)/dt + nu ||grad u_{n+1}||^2 + ||grad mu_n||^2`
    pub fn energy_residuals(&self, nu: f64, dt: f64) -> Vec<f64> {
        self.diagnostics
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy) / dt + nu * w[1].enstrophy + w[0].grad_mu_sq)
            .collect()
    }

    /// Largest `|mean(phi_n) - mean(phi_0)|`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.states[0].phi.mean().as_f64();
        self.states
            .iter()
            .map(|s| (s.phi.mean().as_f64() - m0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_divergence(&self) -> f64 {
        self.states
            .iter()
            .map(|s| div_unchecked(&s.u).max_abs().as_f64())
            .fold(0.0, f64::max)
    }
}

/// Failed solve with the snapshots computed before the blow-up.
#[derive(Debug)]
pub struct ForwardFailure<T: Real> {
    pub error: Error,
    pub partial: Option<Trajectory<T>>,
}

impl<T: Real> From<Error> for ForwardFailure<T> {
    fn from(error: Error) -> Self {
        ForwardFailure { error, partial: None }
    }
}

impl<T: Real> From<ForwardFailure<T>> for Error {
    fn from(f: ForwardFailure<T>) -> Self {
        f.error
    }
}

impl<'a, T: Real> Scheme<'a, T> {
    /// One IMEX step with total body force `force = h_n + U_n`.
    pub(crate) fn forward_step(&self, u: &VectorField<T>, phi: &ScalarField<T>, force: Option<&VectorField<T>>) -> (VectorField<T>, ScalarField<T>) {
        let kernel = self.kernel;
        let conv = kernel.apply(phi);
        let dphi = grad_unchecked(phi);

        // -S phi + (a - a_mean) phi - J*phi + F'(phi)
        let mut lap_arg = self.explicit_linear(phi);
        lap_arg -= &conv;
        lap_arg += &phi.map(|p| self.potential.d1(p));
        let adv = -&u.dot(&dphi);
        let phi_new = self.advance_scalar(phi, Some(&lap_arg), &adv);

        let jac = jacobian(u);
        let mut rhs = -&convective(u, &jac);
        rhs -= &dphi.times(&conv);
        if kernel.is_synthetic() {
            let half_sq = phi.map(|p| T::lit(0.5) * p * p);
            rhs -= &kernel.grad_a().times(&half_sq);
        }
        if let Some(f) = force {
            rhs += f;
        }
        let u_new = self.advance_vector(u, &rhs);
        (u_new, phi_new)
    }
}

fn total_force<T: Real>(cfg: &SolverConfig<T>, control: &Control<T>, n: usize) -> Option<VectorField<T>> {
    match &cfg.forcing {
        Some(h) => Some(h.slice(n) + control.slice(n)),
        None => Some(control.slice(n).clone()),
    }
}

/// Advances `state` by one step with control slice `u_n` (and the forcing
/// slice 0 of `cfg`, if any).
pub fn step<T: Real>(
    state: &State<T>,
    u_n: &VectorField<T>,
    cfg: &SolverConfig<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> Result<State<T>> {
    cfg.validate()?;
    check_grids(state.grid(), kernel.grid())?;
    check_grids(state.grid(), u_n.grid())?;
    let scheme = Scheme::new(kernel, potential, cfg);
    let mut force = u_n.clone();
    if let Some(h) = &cfg.forcing {
        force += h.slice(0);
    }
    let (u, phi) = scheme.forward_step(&state.u, &state.phi, Some(&force));
    let next = State { u, phi, t: state.t + cfg.dt };
    if !next.is_finite() {
        return Err(blow_up(&next, 1, cfg));
    }
    Ok(next)
}

fn blow_up<T: Real>(s: &State<T>, step: usize, cfg: &SolverConfig<T>) -> Error {
    Error::BlowUp {
        step,
        time: cfg.time(step).as_f64(),
        field: if s.u.is_finite() { "order parameter" } else { "velocity" },
    }
}

pub(crate) fn check_inputs<T: Real>(
    init: &State<T>,
    control: &Control<T>,
    cfg: &SolverConfig<T>,
    kernel: &Kernel<T>,
) -> Result<()> {
    cfg.validate()?;
    check_grids(init.grid(), kernel.grid())?;
    control.check_len(cfg.steps(), "control")?;
    if let Some(first) = control.slices().first() {
        check_grids(init.grid(), first.grid())?;
    }
    if let Some(h) = &cfg.forcing {
        h.check_len(cfg.steps(), "forcing")?;
    }
    Ok(())
}

pub(crate) fn check_snapshots<T: Real>(base: &Trajectory<T>, n_steps: usize) -> Result<()> {
    if base.states.len() != n_steps + 1 {
        return Err(Error::LengthMismatch {
            what: "trajectory snapshots",
            expected: n_steps + 1,
            got: base.states.len(),
        });
    }
    Ok(())
}

/// Integrates `N = t_final / dt` steps from `init`. On blow-up the partial
/// trajectory (up to the last finite snapshot) is returned with the error.
pub fn solve_forward<T: Real>(
    init: &State<T>,
    control: &Control<T>,
    cfg: &SolverConfig<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> Result<Trajectory<T>, ForwardFailure<T>> {
    check_inputs(init, control, cfg, kernel)?;
    init.u.ensure_finite("velocity")?;
    init.phi.ensure_finite("order parameter")?;
    let scheme = Scheme::new(kernel, potential, cfg);
    let n_steps = cfg.steps();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut diags = Vec::new();
    let mut first = init.clone();
    first.t = T::zero();
    states.push(first);
    if cfg.diagnostics {
        diags.push(diagnostics(&states[0], kernel, potential));
    }
    for n in 0..n_steps {
        let cur = &states[n];
        let force = total_force(cfg, control, n);
        let (u, phi) = scheme.forward_step(&cur.u, &cur.phi, force.as_ref());
        let next = State { u, phi, t: cfg.time(n + 1) };
        if !next.is_finite() {
            let error = blow_up(&next, n + 1, cfg);
            return Err(ForwardFailure {
                error,
                partial: Some(Trajectory {
                    states,
                    control: control.clone(),
                    diagnostics: diags,
                }),
            });
        }
        if cfg.diagnostics {
            diags.push(diagnostics(&next, kernel, potential));
        }
        states.push(next);
    }
    Ok(Trajectory {
        states,
        control: control.clone(),
        diagnostics: diags,
    })
}
