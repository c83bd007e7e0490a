use num_complex::Complex;

use super::fields::{check_grids, ScalarField, Spectrum, VectorField};
use crate::error::Result;
use crate::physics::Kernel;
use crate::scalar::Real;

/// Spectral gradient. Both components have zero mean.
pub fn grad<T: Real>(f: &ScalarField<T>) -> Result<VectorField<T>> {
    f.ensure_finite("grad input")?;
    Ok(grad_unchecked(f))
}

pub(crate) fn grad_unchecked<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    grad_of_spectrum(&f.spectrum())
}

pub(crate) fn grad_of_spectrum<T: Real>(s: &Spectrum<T>) -> VectorField<T> {
    VectorField {
        x: s.dx().into_field(),
        y: s.dy().into_field(),
    }
}

/// Spectral divergence.
pub fn div<T: Real>(v: &VectorField<T>) -> Result<ScalarField<T>> {
    check_grids(v.x.grid(), v.y.grid())?;
    v.ensure_finite("div input")?;
    Ok(div_unchecked(v))
}

pub(crate) fn div_unchecked<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let mut s = v.x.spectrum().dx();
    s.axpy(T::one(), &v.y.spectrum().dy());
    s.into_field()
}

/// Spectral Laplacian; annihilates constants.
pub fn laplacian<T: Real>(f: &ScalarField<T>) -> Result<ScalarField<T>> {
    f.ensure_finite("laplacian input")?;
    Ok(f.spectrum().laplacian().into_field())
}

/// Applies the Helmholtz-Hodge projection mode by mode to a pair of spectra.
///
/// The mean mode is left untouched; gradients are mapped to zero.
pub fn project_spectra<T: Real>(sx: &mut Spectrum<T>, sy: &mut Spectrum<T>) {
    let g = sx.grid().clone();
    let nx = g.nx();
    let cx = sx.coeffs_mut();
    let cy = sy.coeffs_mut();
    for i in 0..g.len() {
        let (ix, iy) = (i % nx, i / nx);
        let k2 = g.k2(ix, iy);
        if k2 == T::zero() {
            continue;
        }
        let (kx, ky) = (g.kx(ix), g.ky(iy));
        let kdotu: Complex<T> = cx[i] * kx + cy[i] * ky;
        cx[i] = cx[i] - kdotu * (kx / k2);
        cy[i] = cy[i] - kdotu * (ky / k2);
    }
}

/// Orthogonal projection onto divergence-free fields.
pub fn leray_project<T: Real>(v: &VectorField<T>) -> Result<VectorField<T>> {
    check_grids(v.x.grid(), v.y.grid())?;
    v.ensure_finite("leray_project input")?;
    Ok(leray_unchecked(v))
}

pub(crate) fn leray_unchecked<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    let mut sx = v.x.spectrum();
    let mut sy = v.y.spectrum();
    project_spectra(&mut sx, &mut sy);
    VectorField {
        x: sx.into_field(),
        y: sy.into_field(),
    }
}

/// Periodic convolution `(J * f)(x_i) = sum_j J(x_i - x_j) f(x_j) h^2`.
pub fn convolve<T: Real>(kernel: &Kernel<T>, f: &ScalarField<T>) -> Result<ScalarField<T>> {
    check_grids(kernel.grid(), f.grid())?;
    f.ensure_finite("convolve input")?;
    Ok(kernel.apply(f))
}

/// Discrete L2 structure `(f, g) = sum f g h^2`.
pub trait L2<T: Real> {
    fn inner(&self, other: &Self) -> Result<T>;

    fn norm_l2(&self) -> T {
        self.inner_unchecked_self().sqrt()
    }

    #[doc(hidden)]
    fn inner_unchecked_self(&self) -> T;
}

pub(crate) fn dot_samples<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> T {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| x * y)
        .sum::<T>()
        * a.grid().cell_area()
}

/// Weighted `(v, w)` for vector fields on the same grid.
pub(crate) fn vdot<T: Real>(a: &VectorField<T>, b: &VectorField<T>) -> T {
    dot_samples(&a.x, &b.x) + dot_samples(&a.y, &b.y)
}

impl<T: Real> L2<T> for ScalarField<T> {
    fn inner(&self, other: &Self) -> Result<T> {
        check_grids(self.grid(), other.grid())?;
        Ok(dot_samples(self, other))
    }

    fn inner_unchecked_self(&self) -> T {
        dot_samples(self, self)
    }
}

impl<T: Real> L2<T> for VectorField<T> {
    fn inner(&self, other: &Self) -> Result<T> {
        check_grids(self.grid(), other.grid())?;
        Ok(dot_samples(&self.x, &other.x) + dot_samples(&self.y, &other.y))
    }

    fn inner_unchecked_self(&self) -> T {
        dot_samples(&self.x, &self.x) + dot_samples(&self.y, &self.y)
    }
}

pub fn inner<T: Real, F: L2<T>>(f: &F, g: &F) -> Result<T> {
    f.inner(g)
}

pub fn norm_l2<T: Real, F: L2<T>>(f: &F) -> T {
    f.norm_l2()
}
