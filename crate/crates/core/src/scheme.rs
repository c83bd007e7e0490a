//! First-order IMEX update shared by the forward, tangent and adjoint
//! solvers. Each sweep advances one field by
//!
//! ```text
//! x_new = D R^{-1} [x + dt * explicit]
//! ```
//!
//! where `D` is the 2/3-rule filter and `R` the diagonal implicit operator
//! (`1 - dt nu lap` for velocities, `1 - dt (a_mean + S) lap` for the order
//! parameter); velocities are additionally Leray-projected. Because all three
//! solvers share these sweeps the tangent is the exact derivative of the
//! forward map and the adjoint sweep is its exact transpose.

use crate::field::{project_spectra, ScalarField, VectorField};
use crate::forward::SolverConfig;
use crate::physics::{Kernel, Potential};
use crate::scalar::Real;

pub(crate) struct Scheme<'a, T: Real> {
    pub kernel: &'a Kernel<T>,
    pub potential: &'a Potential<T>,
    pub dt: T,
    pub stabilization: T,
    /// `D / (1 + dt nu k^2)`
    inv_u: Vec<T>,
    /// `D / (1 + dt (a_mean + S) k^2)`
    inv_phi: Vec<T>,
}

impl<'a, T: Real> Scheme<'a, T> {
    pub fn new(kernel: &'a Kernel<T>, potential: &'a Potential<T>, cfg: &SolverConfig<T>) -> Self {
        let g = kernel.grid();
        let nx = g.nx();
        let dt = cfg.dt;
        let diff_phi = kernel.a_mean() + cfg.stabilization;
        let mut inv_u = Vec::with_capacity(g.len());
        let mut inv_phi = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            let (ix, iy) = (i % nx, i / nx);
            if g.keeps(ix, iy) {
                let k2 = g.k2(ix, iy);
                inv_u.push(T::one() / (T::one() + dt * cfg.nu * k2));
                inv_phi.push(T::one() / (T::one() + dt * diff_phi * k2));
            } else {
                inv_u.push(T::zero());
                inv_phi.push(T::zero());
            }
        }
        Scheme {
            kernel,
            potential,
            dt,
            stabilization: cfg.stabilization,
            inv_u,
            inv_phi,
        }
    }

    /// `D R^{-1} [x + dt (lap(lap_arg) + explicit)]` for the order parameter
    /// (or its tangent / adjoint).
    pub fn advance_scalar(
        &self,
        x: &ScalarField<T>,
        lap_arg: Option<&ScalarField<T>>,
        explicit: &ScalarField<T>,
    ) -> ScalarField<T> {
        let dt = self.dt;
        let mut acc = x.spectrum();
        acc.axpy(dt, &explicit.spectrum());
        if let Some(l) = lap_arg {
            acc.axpy(dt, &l.spectrum().laplacian());
        }
        let nx = x.grid().nx();
        acc.apply(|ix, iy| self.inv_phi[iy * nx + ix]);
        acc.into_field()
    }

    /// `P D R^{-1} [v + dt explicit]` for velocities.
    pub fn advance_vector(&self, v: &VectorField<T>, explicit: &VectorField<T>) -> VectorField<T> {
        let dt = self.dt;
        let nx = v.grid().nx();
        let mut sx = v.x.spectrum();
        sx.axpy(dt, &explicit.x.spectrum());
        let mut sy = v.y.spectrum();
        sy.axpy(dt, &explicit.y.spectrum());
        sx.apply(|ix, iy| self.inv_u[iy * nx + ix]);
        sy.apply(|ix, iy| self.inv_u[iy * nx + ix]);
        project_spectra(&mut sx, &mut sy);
        VectorField {
            x: sx.into_field(),
            y: sy.into_field(),
        }
    }

    /// `(a - a_mean - S) f`, the explicit part of the linear diffusion
    /// coefficient.
    pub fn explicit_linear(&self, f: &ScalarField<T>) -> ScalarField<T> {
        let shift = self.kernel.a_mean() + self.stabilization;
        f.zip_map(self.kernel.a(), |v, a| (a - shift) * v)
    }
}

/// Gradient of each component: `(grad v_x, grad v_y)`.
pub(crate) fn jacobian<T: Real>(v: &VectorField<T>) -> (VectorField<T>, VectorField<T>) {
    (
        crate::field::ops::grad_unchecked(&v.x),
        crate::field::ops::grad_unchecked(&v.y),
    )
}

/// `(w . grad) v` using the precomputed Jacobian of `v`.
pub(crate) fn convective<T: Real>(w: &VectorField<T>, jac_v: &(VectorField<T>, VectorField<T>)) -> VectorField<T> {
    VectorField {
        x: w.dot(&jac_v.0),
        y: w.dot(&jac_v.1),
    }
}

/// `(p . grad^T) v`, whose j-th component is `sum_i p_i d_j v_i`.
pub(crate) fn convective_transpose<T: Real>(
    p: &VectorField<T>,
    jac_v: &(VectorField<T>, VectorField<T>),
) -> VectorField<T> {
    let (gx, gy) = jac_v;
    VectorField {
        x: &(&p.x * &gx.x) + &(&p.y * &gy.x),
        y: &(&p.x * &gx.y) + &(&p.y * &gy.y),
    }
}
