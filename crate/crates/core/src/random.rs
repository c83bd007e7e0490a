//! Seeded random fields: smooth scalars, solenoidal vectors, and unit
//! directions in the control space.

use std::sync::Arc;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::ops::leray_unchecked;
use crate::field::{Grid, ScalarField, Spectrum, VectorField};
use crate::forward::Control;
use crate::scalar::Real;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian Fourier coefficients on modes with `|m| <= kmax` per axis and
/// zero mean, rescaled so that `max |f| = amplitude`.
pub fn smooth_field_with<T: Real>(g: &Arc<Grid<T>>, kmax: usize, amplitude: T, rng: &mut Rng) -> ScalarField<T> {
    let mut s = Spectrum::zeros(g);
    let nx = g.nx();
    for (i, c) in s.coeffs_mut().iter_mut().enumerate() {
        let (mx, my) = g.mode(i % nx, i / nx);
        let keep = (mx != 0 || my != 0) && mx.unsigned_abs() as usize <= kmax && my.unsigned_abs() as usize <= kmax;
        // always draw so the stream does not depend on the filter
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        if keep {
            *c = Complex::new(T::lit(re), T::lit(im));
        }
    }
    let f = s.into_field();
    let m = f.max_abs();
    if m > T::zero() {
        f.scale(amplitude / m)
    } else {
        f
    }
}

pub fn smooth_field<T: Real>(g: &Arc<Grid<T>>, kmax: usize, amplitude: T, seed: u64) -> ScalarField<T> {
    smooth_field_with(g, kmax, amplitude, &mut rng(seed))
}

/// Divergence-free field with the same spectral filter, scaled so that
/// `max |v| = amplitude`.
pub fn solenoidal_field_with<T: Real>(g: &Arc<Grid<T>>, kmax: usize, amplitude: T, rng: &mut Rng) -> VectorField<T> {
    let raw = VectorField {
        x: smooth_field_with(g, kmax, T::one(), rng),
        y: smooth_field_with(g, kmax, T::one(), rng),
    };
    let v = leray_unchecked(&raw);
    let m = v.max_abs();
    if m > T::zero() {
        v.scale(amplitude / m)
    } else {
        v
    }
}

pub fn solenoidal_field<T: Real>(g: &Arc<Grid<T>>, kmax: usize, amplitude: T, seed: u64) -> VectorField<T> {
    solenoidal_field_with(g, kmax, amplitude, &mut rng(seed))
}

/// Control direction with independent solenoidal slices, normalized to unit
/// norm in `L2(0, T)` with step `dt`.
pub fn unit_direction<T: Real>(g: &Arc<Grid<T>>, steps: usize, dt: T, kmax: usize, seed: u64) -> Control<T> {
    let mut r = rng(seed);
    let slices = (0..steps)
        .map(|_| solenoidal_field_with(g, kmax, T::one(), &mut r))
        .collect();
    let c = Control::new(slices, dt).expect("slices share a grid");
    let n = c.norm();
    c.scale(T::one() / n)
}
