//! Tracking cost, reduced gradient, steepest descent and the first-order
//! optimality checks.

use rayon::prelude::*;

use crate::adjoint::{solve_adjoint, AdjointState, TargetSpec};
use crate::error::{Error, Result};
use crate::field::ops::{dot_samples, vdot};
use crate::field::{check_grids, VectorField};
use crate::forward::{check_inputs, check_snapshots, solve_forward, Control, SolverConfig, State, Trajectory};
use crate::physics::{Kernel, Potential};
use crate::scalar::Real;

/// `J` split into its parts. `series[n]` holds the three integrands at step
/// `n` (before the `dt / 2` factor).
#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub total: f64,
    pub tracking_u: f64,
    pub tracking_phi: f64,
    pub control: f64,
    pub series: Vec<[f64; 3]>,
}

/// `J = 1/2 sum_n dt [alpha |u_n - u_d|^2 + beta |phi_n - phi_d|^2 + gamma |U_n|^2]`
/// over `n = 0 .. N-1`.
pub fn cost<T: Real>(traj: &Trajectory<T>, control: &Control<T>, targets: &TargetSpec<T>) -> Result<CostReport> {
    let n_steps = control.len();
    check_snapshots(traj, n_steps)?;
    let g = traj.states[0].grid();
    targets.check(n_steps + 1, g)?;
    let dt = control.dt().as_f64();
    let (a, b, c) = (targets.alpha.as_f64(), targets.beta.as_f64(), targets.gamma.as_f64());
    let series: Vec<[f64; 3]> = (0..n_steps)
        .map(|n| {
            let s = &traj.states[n];
            let du = &s.u - &targets.u_d[n];
            let dp = &s.phi - &targets.phi_d[n];
            let un = control.slice(n);
            [
                vdot(&du, &du).as_f64(),
                dot_samples(&dp, &dp).as_f64(),
                vdot(un, un).as_f64(),
            ]
        })
        .collect();
    let sum = |i: usize, w: f64| 0.5 * dt * w * series.iter().map(|r| r[i]).sum::<f64>();
    let (tu, tp, tc) = (sum(0, a), sum(1, b), sum(2, c));
    Ok(CostReport {
        total: tu + tp + tc,
        tracking_u: tu,
        tracking_phi: tp,
        control: tc,
        series,
    })
}

/// `g_n = gamma U_n + p_n`
pub fn reduced_gradient<T: Real>(
    control: &Control<T>,
    base: &Trajectory<T>,
    adjoint: &[AdjointState<T>],
    targets: &TargetSpec<T>,
) -> Result<Control<T>> {
    let n_steps = control.len();
    check_snapshots(base, n_steps)?;
    check_adjoint_len(adjoint, n_steps)?;
    let slices = control
        .slices()
        .iter()
        .zip(adjoint)
        .map(|(u, a)| {
            let mut g = u.scale(targets.gamma);
            g += &a.p;
            g
        })
        .collect();
    Ok(Control::from_raw(slices, control.dt()))
}

fn check_adjoint_len<T: Real>(adjoint: &[AdjointState<T>], n_steps: usize) -> Result<()> {
    if adjoint.len() != n_steps + 1 {
        return Err(Error::LengthMismatch {
            what: "adjoint states",
            expected: n_steps + 1,
            got: adjoint.len(),
        });
    }
    Ok(())
}

/// `||gamma U + p|| / max(1, ||U||)` in `L2(0, T)`.
pub fn optimality_residual<T: Real>(control: &Control<T>, adjoint: &[AdjointState<T>], gamma: T) -> f64 {
    let dt = control.dt().as_f64();
    let mut r = 0.0;
    for (u, a) in control.slices().iter().zip(adjoint) {
        let mut g = u.scale(gamma);
        g += &a.p;
        r += dt * vdot(&g, &g).as_f64();
    }
    r.sqrt() / control.norm().as_f64().max(1.0)
}

/// `[|W|^2/2 + (p, W)] - [|U*|^2/2 + (p, U*)]`
pub fn hamiltonian_gap<T: Real>(u_star: &VectorField<T>, p: &VectorField<T>, w: &VectorField<T>) -> Result<T> {
    check_grids(u_star.grid(), p.grid())?;
    check_grids(u_star.grid(), w.grid())?;
    let half = T::lit(0.5);
    let hw = half * vdot(w, w) + vdot(p, w);
    let hu = half * vdot(u_star, u_star) + vdot(p, u_star);
    Ok(hw - hu)
}

/// Everything that defines the reduced cost `U -> J(U)`.
#[derive(Clone, Debug)]
pub struct ControlProblem<T: Real> {
    pub init: State<T>,
    pub cfg: SolverConfig<T>,
    pub kernel: Kernel<T>,
    pub potential: Potential<T>,
    pub targets: TargetSpec<T>,
}

/// Cost, gradient and the solves behind them at one control.
#[derive(Clone, Debug)]
pub struct Evaluation<T: Real> {
    pub cost: CostReport,
    pub gradient: Control<T>,
    pub trajectory: Trajectory<T>,
    pub adjoint: Vec<AdjointState<T>>,
}

impl<T: Real> ControlProblem<T> {
    pub fn new(
        init: State<T>,
        mut cfg: SolverConfig<T>,
        kernel: Kernel<T>,
        potential: Potential<T>,
        targets: TargetSpec<T>,
    ) -> Result<Self> {
        cfg.diagnostics = false;
        let probe = Control::zeros(init.grid(), cfg.steps(), cfg.dt);
        check_inputs(&init, &probe, &cfg, &kernel)?;
        targets.check(cfg.steps() + 1, init.grid())?;
        Ok(ControlProblem {
            init,
            cfg,
            kernel,
            potential,
            targets,
        })
    }

    pub fn steps(&self) -> usize {
        self.cfg.steps()
    }

    pub fn zero_control(&self) -> Control<T> {
        Control::zeros(self.init.grid(), self.steps(), self.cfg.dt)
    }

    pub fn solve(&self, control: &Control<T>) -> Result<Trajectory<T>> {
        Ok(solve_forward(&self.init, control, &self.cfg, &self.kernel, &self.potential)?)
    }

    pub fn cost(&self, control: &Control<T>) -> Result<CostReport> {
        cost(&self.solve(control)?, control, &self.targets)
    }

    pub fn adjoint(&self, traj: &Trajectory<T>) -> Result<Vec<AdjointState<T>>> {
        solve_adjoint(traj, &self.targets, &self.kernel, &self.potential, &self.cfg)
    }

    pub fn evaluate(&self, control: &Control<T>) -> Result<Evaluation<T>> {
        let trajectory = self.solve(control)?;
        let cost = cost(&trajectory, control, &self.targets)?;
        let adjoint = self.adjoint(&trajectory)?;
        let gradient = reduced_gradient(control, &trajectory, &adjoint, &self.targets)?;
        Ok(Evaluation {
            cost,
            gradient,
            trajectory,
            adjoint,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OptimOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iters: 50,
            grad_tol: 1e-6,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
        }
    }
}

/// One row per iterate. `step` and `backtracks` describe the line search
/// that produced the iterate (zero for the initial one).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub backtracks: usize,
}

impl IterRecord {
    pub const HEADER: [&'static str; 5] = ["iter", "J", "grad_norm", "step", "backtracks"];
}

#[derive(Clone, Debug)]
pub struct OptimReport<T: Real> {
    pub history: Vec<IterRecord>,
    pub control: Control<T>,
    /// `||gamma U + p|| / max(1, ||U||)` at the final control.
    pub residual: f64,
    pub converged: bool,
    /// Solves at the final control.
    pub last: Evaluation<T>,
    /// Set when the loop stopped on a failed line search.
    pub failure: Option<String>,
}

/// Steepest descent with Armijo backtracking. The trial step is the
/// Barzilai-Borwein length of the last two iterates (1 on the first
/// iteration).
pub fn optimize<T: Real>(u0: &Control<T>, problem: &ControlProblem<T>, opts: &OptimOptions) -> Result<OptimReport<T>> {
    u0.check_len(problem.steps(), "initial control")?;
    if !(opts.armijo_c1 > 0.0 && opts.armijo_c1 < 1.0) || !(opts.backtrack > 0.0 && opts.backtrack < 1.0) {
        return Err(Error::InvalidParameter("armijo c1 and backtrack must lie in (0, 1)".into()));
    }
    let mut u = u0.clone();
    let mut ev = problem.evaluate(&u)?;
    let g0 = ev.gradient.norm().as_f64();
    let scale = g0.max(1.0);
    let mut history = vec![IterRecord {
        iter: 0,
        cost: ev.cost.total,
        grad_norm: g0,
        step: 0.0,
        backtracks: 0,
    }];
    let mut converged = g0 / scale <= opts.grad_tol;
    let mut trial = 1.0f64;
    let mut failure = None;
    let mut iter = 0;
    while !converged && iter < opts.max_iters {
        iter += 1;
        let g = &ev.gradient;
        let gg = g.inner(g).as_f64();
        let mut sigma = trial;
        let mut accepted = None;
        for bt in 0..=opts.max_backtracks {
            let cand = u.plus(T::lit(-sigma), g);
            match problem.evaluate(&cand) {
                Ok(next) if next.cost.total <= ev.cost.total - opts.armijo_c1 * sigma * gg => {
                    accepted = Some((cand, next, bt));
                    break;
                }
                Ok(_) => {}
                Err(e) if e.is_numerical() => {}
                Err(e) => return Err(e),
            }
            sigma *= opts.backtrack;
        }
        let Some((cand, next, bt)) = accepted else {
            failure = Some(
                Error::LineSearch {
                    iteration: iter,
                    backtracks: opts.max_backtracks,
                }
                .to_string(),
            );
            break;
        };
        // Barzilai-Borwein: s = -sigma g, y = g_new - g
        let y = next.gradient.plus(-T::one(), g);
        let sy = -sigma * g.inner(&y).as_f64();
        let ss = sigma * sigma * gg;
        trial = if sy > 0.0 { (ss / sy).clamp(1e-6, 1e6) } else { 2.0 * sigma };
        u = cand;
        ev = next;
        let gn = ev.gradient.norm().as_f64();
        history.push(IterRecord {
            iter,
            cost: ev.cost.total,
            grad_norm: gn,
            step: sigma,
            backtracks: bt,
        });
        converged = gn / scale <= opts.grad_tol;
    }
    let residual = optimality_residual(&u, &ev.adjoint, problem.targets.gamma);
    Ok(OptimReport {
        history,
        control: u,
        residual,
        converged,
        last: ev,
        failure,
    })
}

/// Row of a gradient check: central difference of `J` along a direction
/// against the adjoint pairing `<g, V>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckRow {
    pub direction: usize,
    pub eps: f64,
    pub fd_value: f64,
    pub adjoint_value: f64,
    pub rel_err: f64,
}

impl GradCheckRow {
    pub const HEADER: [&'static str; 5] = ["direction", "eps", "fd_value", "adjoint_value", "rel_err"];
}

/// Central-difference check of the reduced gradient at `control` along each
/// of `dirs` for every step size in `eps`. Probe solves run in parallel.
pub fn gradient_check<T: Real>(
    problem: &ControlProblem<T>,
    control: &Control<T>,
    dirs: &[Control<T>],
    eps: &[f64],
) -> Result<Vec<GradCheckRow>> {
    let ev = problem.evaluate(control)?;
    let jobs: Vec<(usize, f64)> = (0..dirs.len()).flat_map(|d| eps.iter().map(move |&e| (d, e))).collect();
    jobs.par_iter()
        .map(|&(d, e)| {
            let v = &dirs[d];
            let jp = problem.cost(&control.plus(T::lit(e), v))?.total;
            let jm = problem.cost(&control.plus(T::lit(-e), v))?.total;
            let fd = (jp - jm) / (2.0 * e);
            let adj = ev.gradient.inner(v).as_f64();
            Ok(GradCheckRow {
                direction: d,
                eps: e,
                fd_value: fd,
                adjoint_value: adj,
                rel_err: (fd - adj).abs() / fd.abs().max(1e-14),
            })
        })
        .collect()
}
