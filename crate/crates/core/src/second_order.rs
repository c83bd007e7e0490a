//! Feasible differences, the second-order quadratic form and its
//! finite-difference oracles.

use rayon::prelude::*;

use crate::adjoint::AdjointState;
use crate::error::{Error, Result};
use crate::field::ops::{dot_samples, grad_unchecked, vdot};
use crate::field::{ScalarField, VectorField};
use crate::forward::{check_snapshots, solve_forward, Control, SolverConfig, Trajectory};
use crate::optimize::{ControlProblem, Evaluation};
use crate::physics::{Kernel, Potential};
use crate::scalar::Real;
use crate::scheme::{convective, jacobian};

/// Slice-wise difference of two solutions sharing their initial data.
#[derive(Clone, Debug)]
pub struct FeasibleDifference<T: Real> {
    pub du: Vec<VectorField<T>>,
    pub dphi: Vec<ScalarField<T>>,
    pub dcontrol: Control<T>,
}

impl<T: Real> FeasibleDifference<T> {
    pub fn between(base: &Trajectory<T>, other: &Trajectory<T>) -> Result<Self> {
        let n = base.steps();
        check_snapshots(other, n)?;
        other.control.check_len(base.control.len(), "control")?;
        Ok(FeasibleDifference {
            du: other.states.iter().zip(&base.states).map(|(a, b)| &a.u - &b.u).collect(),
            dphi: other.states.iter().zip(&base.states).map(|(a, b)| &a.phi - &b.phi).collect(),
            dcontrol: other.control.plus(-T::one(), &base.control),
        })
    }
}

/// Solves with control `w` from the initial state of `base` and subtracts.
pub fn feasible_difference<T: Real>(
    base: &Trajectory<T>,
    w: &Control<T>,
    cfg: &SolverConfig<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> Result<FeasibleDifference<T>> {
    let other = solve_forward(&base.states[0], w, cfg, kernel, potential)?;
    FeasibleDifference::between(base, &other)
}

/// The form `Q` on a feasible difference around a base solution with
/// adjoint `(p, eta)`:
///
/// ```text
/// Q = sum_n dt [ alpha |du|^2 + beta |dphi|^2 + gamma |dU|^2 + 2 (R, lap eta)
///       - 2 ((du . grad) du + (grad a / 2) dphi^2 + (J * dphi) grad dphi, p)
///       - 2 (du . grad dphi, eta) ]
/// R = F'(phi + dphi) - F'(phi) - F''(phi) dphi
/// ```
///
/// For the discrete problem `2 (J(W) - J(U)) = Q + 2 first_order_term`
/// holds exactly, so `Q = 2 (J(W) - J(U))` wherever `gamma U + p = 0`.
pub fn quadratic_form<T: Real>(
    diff: &FeasibleDifference<T>,
    adjoint: &[AdjointState<T>],
    base: &Trajectory<T>,
    weights: (T, T, T),
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> Result<f64> {
    let n_steps = diff.dcontrol.len();
    check_snapshots(base, n_steps)?;
    for (what, got) in [
        ("difference velocity", diff.du.len()),
        ("difference order parameter", diff.dphi.len()),
        ("adjoint states", adjoint.len()),
    ] {
        if got != n_steps + 1 {
            return Err(Error::LengthMismatch {
                what,
                expected: n_steps + 1,
                got,
            });
        }
    }
    let (alpha, beta, gamma) = weights;
    let two = T::lit(2.0);
    let terms: Vec<T> = (0..n_steps)
        .into_par_iter()
        .map(|n| {
            let du = &diff.du[n];
            let dphi = &diff.dphi[n];
            let dc = diff.dcontrol.slice(n);
            let phi = &base.states[n].phi;
            let (p, eta) = (&adjoint[n].p, &adjoint[n].eta);

            let mut q = alpha * vdot(du, du) + beta * dot_samples(dphi, dphi) + gamma * vdot(dc, dc);
            let r = phi.zip_map(dphi, |b, d| potential.d1_remainder(b, d));
            let lap_eta = eta.spectrum().laplacian().into_field();
            q += two * dot_samples(&r, &lap_eta);

            let ddphi = grad_unchecked(dphi);
            let mut force = convective(du, &jacobian(du));
            force += &ddphi.times(&kernel.apply(dphi));
            if kernel.is_synthetic() {
                force += &kernel.grad_a().times(&dphi.map(|d| T::lit(0.5) * d * d));
            }
            q -= two * vdot(&force, p);
            q -= two * dot_samples(&du.dot(&ddphi), eta);
            q
        })
        .collect();
    let dt = diff.dcontrol.dt();
    Ok((terms.into_iter().sum::<T>() * dt).as_f64())
}

/// `sum_n dt (gamma U_n + p_n, dU_n)`, the first-order part of the cost
/// change.
pub fn first_order_term<T: Real>(diff: &FeasibleDifference<T>, gradient: &Control<T>) -> f64 {
    gradient.inner(&diff.dcontrol).as_f64()
}

/// `[J(U + sV) - 2 J(U) + J(U - sV)] / s^2`
pub fn curvature_fd<T: Real>(problem: &ControlProblem<T>, u_star: &Control<T>, v: &Control<T>, s: f64) -> Result<f64> {
    let (jp, jm) = rayon::join(
        || problem.cost(&u_star.plus(T::lit(s), v)),
        || problem.cost(&u_star.plus(T::lit(-s), v)),
    );
    let j0 = problem.cost(u_star)?.total;
    Ok((jp?.total - 2.0 * j0 + jm?.total) / (s * s))
}

/// One direction of a curvature study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureRow {
    pub seed: u64,
    pub s: f64,
    pub q: f64,
    pub two_delta_j: f64,
    pub fd_curvature: f64,
    /// `2 sum_n dt (gamma U + p, dU)`
    pub first_order: f64,
}

impl CurvatureRow {
    pub const HEADER: [&'static str; 5] = ["seed", "s", "Q", "2dJ", "fd_curvature"];
}

/// For each `(seed, s)` evaluates `Q`, `2 (J(U + sV) - J(U))` and the
/// second difference of `J` along the unit direction drawn from `seed`.
pub fn curvature_study<T: Real>(
    problem: &ControlProblem<T>,
    at: &Evaluation<T>,
    seeds: &[u64],
    scales: &[f64],
    kmax: usize,
) -> Result<Vec<CurvatureRow>> {
    let u_star = &at.trajectory.control;
    let g = problem.init.grid();
    let weights = (problem.targets.alpha, problem.targets.beta, problem.targets.gamma);
    let jobs: Vec<(u64, f64)> = seeds.iter().flat_map(|&d| scales.iter().map(move |&s| (d, s))).collect();
    jobs.par_iter()
        .map(|&(seed, s)| {
            let v = crate::random::unit_direction(g, problem.steps(), problem.cfg.dt, kmax, seed);
            let w = u_star.plus(T::lit(s), &v);
            let other = problem.solve(&w)?;
            let diff = FeasibleDifference::between(&at.trajectory, &other)?;
            let q = quadratic_form(&diff, &at.adjoint, &at.trajectory, weights, &problem.kernel, &problem.potential)?;
            let jw = crate::optimize::cost(&other, &w, &problem.targets)?.total;
            let jm = problem.cost(&u_star.plus(T::lit(-s), &v))?.total;
            let j0 = at.cost.total;
            Ok(CurvatureRow {
                seed,
                s,
                q,
                two_delta_j: 2.0 * (jw - j0),
                fd_curvature: (jw - 2.0 * j0 + jm) / (s * s),
                first_order: 2.0 * first_order_term(&diff, &at.gradient),
            })
        })
        .collect()
}

/// Largest per-step residual of the difference system: each difference
/// slice is re-advanced from the previous one with the linear scheme plus
/// the exact nonlinear remainder, and compared with the stored slice.
pub fn difference_residual<T: Real>(
    diff: &FeasibleDifference<T>,
    base: &Trajectory<T>,
    cfg: &SolverConfig<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> Result<f64> {
    let n_steps = diff.dcontrol.len();
    check_snapshots(base, n_steps)?;
    let scheme = crate::scheme::Scheme::new(kernel, potential, cfg);
    let mut worst = 0.0f64;
    for n in 0..n_steps {
        let b = &base.states[n];
        let z = &b.u + &diff.du[n];
        let xi = &b.phi + &diff.dphi[n];
        let mut force = diff.dcontrol.slice(n) + base.control.slice(n);
        if let Some(h) = &cfg.forcing {
            force += h.slice(n);
        }
        let mut base_force = base.control.slice(n).clone();
        if let Some(h) = &cfg.forcing {
            base_force += h.slice(n);
        }
        let (u1, p1) = scheme.forward_step(&z, &xi, Some(&force));
        let (u0, p0) = scheme.forward_step(&b.u, &b.phi, Some(&base_force));
        let ru = &(&u1 - &u0) - &diff.du[n + 1];
        let rp = &(&p1 - &p0) - &diff.dphi[n + 1];
        worst = worst.max(ru.max_abs().as_f64()).max(rp.max_abs().as_f64());
    }
    Ok(worst)
}
