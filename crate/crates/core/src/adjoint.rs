//! Backward adjoint sweep along a stored trajectory.
//!
//! The sweep is the transpose of the tangent step, so it discretizes
//!
//! ```text
//! -p_t   - nu lap p + (p . grad^T) u - (u . grad) p + eta grad phi = alpha P (u - u_d)
//! -eta_t - J*(p . grad phi) + grad(J*phi) . p - (grad a . p) phi - u . grad eta
//!        - a lap eta + J * lap eta - F''(phi) lap eta = beta (phi - phi_d)
//! ```
//!
//! with zero terminal data, and the pairing `sum_n dt (dU_n, p_n)` equals
//! the tangent derivative of the discrete cost up to roundoff.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ops::grad_unchecked;
use crate::field::{check_grids, Grid, ScalarField, VectorField};
use crate::forward::{check_snapshots, SolverConfig, Trajectory};
use crate::physics::{Kernel, Potential};
use crate::scalar::Real;
use crate::scheme::{convective, convective_transpose, jacobian, Scheme};

#[derive(Clone, Debug)]
pub struct AdjointState<T: Real> {
    pub p: VectorField<T>,
    pub eta: ScalarField<T>,
    pub t: T,
}

/// Tracking targets, one slice per trajectory snapshot, and the cost
/// weights `(alpha, beta, gamma)`.
#[derive(Clone, Debug)]
pub struct TargetSpec<T: Real> {
    pub u_d: Vec<VectorField<T>>,
    pub phi_d: Vec<ScalarField<T>>,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Real> TargetSpec<T> {
    pub fn new(u_d: Vec<VectorField<T>>, phi_d: Vec<ScalarField<T>>) -> Result<Self> {
        if u_d.len() != phi_d.len() {
            return Err(Error::LengthMismatch {
                what: "target phi_d",
                expected: u_d.len(),
                got: phi_d.len(),
            });
        }
        for (u, p) in u_d.iter().zip(&phi_d) {
            check_grids(u.grid(), p.grid())?;
            u.ensure_finite("target velocity")?;
            p.ensure_finite("target order parameter")?;
        }
        Ok(TargetSpec {
            u_d,
            phi_d,
            alpha: T::one(),
            beta: T::one(),
            gamma: T::one(),
        })
    }

    /// Targets equal to the snapshots of `traj`.
    pub fn from_trajectory(traj: &Trajectory<T>) -> Self {
        TargetSpec {
            u_d: traj.states.iter().map(|s| s.u.clone()).collect(),
            phi_d: traj.states.iter().map(|s| s.phi.clone()).collect(),
            alpha: T::one(),
            beta: T::one(),
            gamma: T::one(),
        }
    }

    /// Constant-in-time targets over `steps + 1` snapshots.
    pub fn steady(u_d: VectorField<T>, phi_d: ScalarField<T>, steps: usize) -> Result<Self> {
        Self::new(vec![u_d; steps + 1], vec![phi_d; steps + 1])
    }

    pub fn zeros(grid: &Arc<Grid<T>>, steps: usize) -> Self {
        TargetSpec {
            u_d: vec![VectorField::zeros(grid); steps + 1],
            phi_d: vec![ScalarField::zeros(grid); steps + 1],
            alpha: T::one(),
            beta: T::one(),
            gamma: T::one(),
        }
    }

    pub fn with_weights(mut self, alpha: T, beta: T, gamma: T) -> Result<Self> {
        for (name, w) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(w >= T::zero()) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("weight {name} must be >= 0, got {w}")));
            }
        }
        self.alpha = alpha;
        self.beta = beta;
        self.gamma = gamma;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.u_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_d.is_empty()
    }

    pub(crate) fn check(&self, snapshots: usize, grid: &Grid<T>) -> Result<()> {
        if self.len() != snapshots {
            return Err(Error::LengthMismatch {
                what: "targets",
                expected: snapshots,
                got: self.len(),
            });
        }
        if let Some(u) = self.u_d.first() {
            check_grids(u.grid(), grid)?;
        }
        Ok(())
    }
}

impl<'a, T: Real> Scheme<'a, T> {
    /// Transposed step: maps the adjoint at `n + 1` to `n` using the base
    /// state and tracking source at `n + 1`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn adjoint_step(
        &self,
        ub: &VectorField<T>,
        phib: &ScalarField<T>,
        p: &VectorField<T>,
        eta: &ScalarField<T>,
        src_u: Option<&VectorField<T>>,
        src_phi: Option<&ScalarField<T>>,
    ) -> (VectorField<T>, ScalarField<T>) {
        let kernel = self.kernel;
        let dphib = grad_unchecked(phib);
        let deta = grad_unchecked(eta);

        let mut rhs_u = -&convective_transpose(p, &jacobian(ub));
        rhs_u += &convective(ub, &jacobian(p));
        rhs_u -= &dphib.times(eta);
        if let Some(s) = src_u {
            rhs_u += s;
        }
        let p_new = self.advance_vector(p, &rhs_u);

        let lap_eta = eta.spectrum().laplacian().into_field();
        let mut rhs_phi = self.explicit_linear(&lap_eta);
        rhs_phi -= &kernel.apply(&lap_eta);
        rhs_phi += &phib.zip_map(&lap_eta, |b, l| self.potential.d2(b) * l);
        rhs_phi -= &kernel.apply(&p.dot(&dphib));
        rhs_phi += &p.dot(&grad_unchecked(&kernel.apply(phib)));
        if kernel.is_synthetic() {
            rhs_phi -= &(&p.dot(kernel.grad_a()) * phib);
        }
        rhs_phi += &ub.dot(&deta);
        if let Some(s) = src_phi {
            rhs_phi += s;
        }
        let eta_new = self.advance_scalar(eta, None, &rhs_phi);
        (p_new, eta_new)
    }
}

/// Backward sweep from zero terminal data, returning `N + 1` states indexed
/// like the trajectory.
pub fn solve_adjoint<T: Real>(
    base: &Trajectory<T>,
    targets: &TargetSpec<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
    cfg: &SolverConfig<T>,
) -> Result<Vec<AdjointState<T>>> {
    cfg.validate()?;
    let n_steps = cfg.steps();
    check_snapshots(base, n_steps)?;
    let g = base.states[0].grid();
    check_grids(g, kernel.grid())?;
    targets.check(n_steps + 1, g)?;
    let scheme = Scheme::new(kernel, potential, cfg);

    let zero = AdjointState {
        p: VectorField::zeros(g),
        eta: ScalarField::zeros(g),
        t: cfg.t_final,
    };
    let mut rev = Vec::with_capacity(n_steps + 1);
    rev.push(zero);
    for n in (0..n_steps).rev() {
        let b = &base.states[n + 1];
        // the final snapshot carries no running cost
        let (su, sphi) = if n + 1 < n_steps {
            (
                Some((&b.u - &targets.u_d[n + 1]).scale(targets.alpha)),
                Some((&b.phi - &targets.phi_d[n + 1]).scale(targets.beta)),
            )
        } else {
            (None, None)
        };
        let cur = rev.last().expect("non-empty");
        let (p, eta) = scheme.adjoint_step(&b.u, &b.phi, &cur.p, &cur.eta, su.as_ref(), sphi.as_ref());
        if !(p.is_finite() && eta.is_finite()) {
            return Err(Error::BlowUp {
                step: n,
                time: cfg.time(n).as_f64(),
                field: "adjoint",
            });
        }
        rev.push(AdjointState { p, eta, t: cfg.time(n) });
    }
    rev.reverse();
    Ok(rev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ops::{div_unchecked, dot_samples, vdot};
    use crate::forward::{solve_forward, Control, State};
    use crate::physics::KernelSpec;
    use crate::random::{smooth_field, solenoidal_field, unit_direction};
    use crate::tangent::solve_tangent;

    fn setup(synthetic: bool) -> (Arc<Grid<f64>>, Kernel<f64>, Potential<f64>, SolverConfig<f64>, State<f64>) {
        let g = Grid::square(16).unwrap();
        let mut k = Kernel::build(&KernelSpec::Gaussian { sigma: 0.5, mass: Some(5.0) }, &g).unwrap();
        if synthetic {
            let a = ScalarField::from_fn(&g, |x: f64, y: f64| 5.0 + 0.5 * x.cos() + 0.3 * y.sin());
            k = k.with_synthetic_a(a).unwrap();
        }
        let p = Potential::double_well();
        let cfg = SolverConfig::new(0.1, 2e-3, 4e-2, &k, &p).unwrap();
        let s0 = State::new(solenoidal_field(&g, 3, 1.0, 1), smooth_field(&g, 3, 0.8, 2), 0.0).unwrap();
        (g, k, p, cfg, s0)
    }

    #[test]
    fn matching_targets_give_zero_adjoint() {
        let (g, k, p, cfg, s0) = setup(false);
        let base = solve_forward(&s0, &Control::zeros(&g, 20, 2e-3), &cfg, &k, &p).unwrap();
        let adj = solve_adjoint(&base, &TargetSpec::from_trajectory(&base), &k, &p, &cfg).unwrap();
        assert!(adj.iter().all(|a| a.p.max_abs() == 0.0 && a.eta.max_abs() == 0.0));
    }

    fn duality_gap(synthetic: bool) -> f64 {
        let (g, k, p, cfg, s0) = setup(synthetic);
        let base = solve_forward(&s0, &unit_direction(&g, 20, 2e-3, 3, 3), &cfg, &k, &p).unwrap();
        let targets = TargetSpec::steady(
            solenoidal_field(&g, 2, 0.5, 4),
            smooth_field(&g, 2, 0.5, 5),
            20,
        )
        .unwrap()
        .with_weights(1.0, 2.0, 1.0)
        .unwrap();
        let adj = solve_adjoint(&base, &targets, &k, &p, &cfg).unwrap();
        assert_eq!(adj[20].p.max_abs(), 0.0);
        assert_eq!(adj[20].eta.max_abs(), 0.0);
        assert!(adj.iter().all(|a| div_unchecked(&a.p).max_abs() < 1e-11));

        let v = unit_direction(&g, 20, 2e-3, 3, 6);
        let tan = solve_tangent(&base, &v, &k, &p, &cfg).unwrap();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for n in 0..20 {
            lhs += 2e-3 * vdot(v.slice(n), &adj[n].p);
            let du = &base.states[n].u - &targets.u_d[n];
            let dp = &base.states[n].phi - &targets.phi_d[n];
            rhs += 2e-3 * (targets.alpha * vdot(&tan[n].w, &du) + targets.beta * dot_samples(&tan[n].psi, &dp));
        }
        (lhs - rhs).abs() / rhs.abs().max(1e-14)
    }

    #[test]
    fn duality_with_tangent() {
        let gap = duality_gap(false);
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn duality_with_synthetic_a() {
        let gap = duality_gap(true);
        assert!(gap < 1e-10, "{gap}");
    }
}
