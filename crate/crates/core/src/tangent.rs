//! Linearized dynamics around a stored trajectory.

use crate::error::Result;
use crate::field::ops::grad_unchecked;
use crate::field::{check_grids, ScalarField, VectorField};
use crate::forward::{Control, SolverConfig, Trajectory};
use crate::physics::{Kernel, Potential};
use crate::scalar::Real;
use crate::scheme::{convective, jacobian, Scheme};

#[derive(Clone, Debug)]
pub struct TangentState<T: Real> {
    pub w: VectorField<T>,
    pub psi: ScalarField<T>,
    pub t: T,
}

impl<'a, T: Real> Scheme<'a, T> {
    /// Tangent step around the base state `(ub, phib)` with control
    /// perturbation `du`.
    pub(crate) fn tangent_step(
        &self,
        ub: &VectorField<T>,
        phib: &ScalarField<T>,
        w: &VectorField<T>,
        psi: &ScalarField<T>,
        du: &VectorField<T>,
    ) -> (VectorField<T>, ScalarField<T>) {
        let kernel = self.kernel;
        let dphib = grad_unchecked(phib);
        let dpsi = grad_unchecked(psi);
        let conv_psi = kernel.apply(psi);

        let mut lap_arg = self.explicit_linear(psi);
        lap_arg -= &conv_psi;
        lap_arg += &phib.zip_map(psi, |b, s| self.potential.d2(b) * s);
        let mut adv = w.dot(&dphib);
        adv += &ub.dot(&dpsi);
        let psi_new = self.advance_scalar(psi, Some(&lap_arg), &-&adv);

        let mut rhs = -&convective(w, &jacobian(ub));
        rhs -= &convective(ub, &jacobian(w));
        rhs -= &dphib.times(&conv_psi);
        rhs -= &dpsi.times(&kernel.apply(phib));
        if kernel.is_synthetic() {
            rhs -= &kernel.grad_a().times(&(phib * psi));
        }
        rhs += du;
        let w_new = self.advance_vector(w, &rhs);
        (w_new, psi_new)
    }
}

/// Integrates the tangent system with zero initial data along `base`,
/// returning `N + 1` states.
pub fn solve_tangent<T: Real>(
    base: &Trajectory<T>,
    du: &Control<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
    cfg: &SolverConfig<T>,
) -> Result<Vec<TangentState<T>>> {
    cfg.validate()?;
    let n_steps = cfg.steps();
    base.control.check_len(n_steps, "base control")?;
    crate::forward::check_snapshots(base, n_steps)?;
    du.check_len(n_steps, "tangent control")?;
    let g = base.states[0].grid();
    check_grids(g, kernel.grid())?;
    if let Some(first) = du.slices().first() {
        check_grids(g, first.grid())?;
    }
    let scheme = Scheme::new(kernel, potential, cfg);
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(TangentState {
        w: VectorField::zeros(g),
        psi: ScalarField::zeros(g),
        t: T::zero(),
    });
    for n in 0..n_steps {
        let b = &base.states[n];
        let cur = &out[n];
        let (w, psi) = scheme.tangent_step(&b.u, &b.phi, &cur.w, &cur.psi, du.slice(n));
        if !(w.is_finite() && psi.is_finite()) {
            return Err(crate::Error::BlowUp {
                step: n + 1,
                time: cfg.time(n + 1).as_f64(),
                field: "tangent",
            });
        }
        out.push(TangentState { w, psi, t: cfg.time(n + 1) });
    }
    Ok(out)
}
