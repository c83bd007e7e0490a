use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform periodic grid on the torus `[0, lx) x [0, ly)`.
///
/// Values are stored row-major with `x` varying fastest: sample `(ix, iy)`
/// lives at index `iy * nx + ix`. The grid owns the FFT plans, which are
/// immutable and shared by every field on it.
pub struct Grid<T: Real> {
    nx: usize,
    ny: usize,
    lx: T,
    ly: T,
    /// Derivative wavenumbers along x; the Nyquist entry is zero.
    kx: Vec<T>,
    ky: Vec<T>,
    /// Largest retained |mode| under the 2/3 rule.
    cut_x: usize,
    cut_y: usize,
    fft_x: Arc<dyn Fft<T>>,
    ifft_x: Arc<dyn Fft<T>>,
    fft_y: Arc<dyn Fft<T>>,
    ifft_y: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .finish()
    }
}

fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn derivative_wavenumbers<T: Real>(n: usize, len: T) -> Vec<T> {
    let base = T::lit(2.0) * T::PI() / len;
    (0..n)
        .map(|i| {
            if i == n / 2 {
                T::zero()
            } else {
                base * T::lit(signed_mode(i, n) as f64)
            }
        })
        .collect()
}

impl<T: Real> Grid<T> {
    pub fn new(nx: usize, ny: usize, lx: T, ly: T) -> Result<Arc<Self>> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be a power of two >= 8"
                )));
            }
        }
        if !(lx > T::zero() && ly > T::zero()) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive, got lx = {lx}, ly = {ly}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            nx,
            ny,
            lx,
            ly,
            kx: derivative_wavenumbers(nx, lx),
            ky: derivative_wavenumbers(ny, ly),
            cut_x: (nx - 1) / 3,
            cut_y: (ny - 1) / 3,
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        }))
    }

    /// `n x n` grid on `[0, 2pi)^2`.
    pub fn square(n: usize) -> Result<Arc<Self>> {
        let two_pi = T::lit(2.0) * T::PI();
        Self::new(n, n, two_pi, two_pi)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> T {
        self.lx
    }

    pub fn ly(&self) -> T {
        self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> T {
        self.lx / T::lit(self.nx as f64)
    }

    pub fn hy(&self) -> T {
        self.ly / T::lit(self.ny as f64)
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_area(&self) -> T {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> T {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn x(&self, ix: usize) -> T {
        T::lit(ix as f64) * self.hx()
    }

    pub fn y(&self, iy: usize) -> T {
        T::lit(iy as f64) * self.hy()
    }

    /// Signed integer mode numbers of spectral index `(ix, iy)`.
    pub fn mode(&self, ix: usize, iy: usize) -> (i64, i64) {
        (signed_mode(ix, self.nx), signed_mode(iy, self.ny))
    }

    #[inline]
    pub fn kx(&self, ix: usize) -> T {
        self.kx[ix]
    }

    #[inline]
    pub fn ky(&self, iy: usize) -> T {
        self.ky[iy]
    }

    /// Symbol of `-laplacian`, built from the derivative wavenumbers so that
    /// `div(grad f) == laplacian(f)` holds exactly.
    #[inline]
    pub fn k2(&self, ix: usize, iy: usize) -> T {
        self.kx[ix] * self.kx[ix] + self.ky[iy] * self.ky[iy]
    }

    /// Whether the mode survives 2/3-rule dealiasing.
    #[inline]
    pub fn keeps(&self, ix: usize, iy: usize) -> bool {
        let (mx, my) = self.mode(ix, iy);
        mx.unsigned_abs() as usize <= self.cut_x && my.unsigned_abs() as usize <= self.cut_y
    }

    pub fn same_as(&self, other: &Grid<T>) -> bool {
        std::ptr::eq(self, other)
            || (self.nx == other.nx
                && self.ny == other.ny
                && self.lx == other.lx
                && self.ly == other.ly)
    }

    fn transpose(&self, src: &[Complex<T>], rows: usize, cols: usize) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); src.len()];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = src[r * cols + c];
            }
        }
        out
    }

    fn transform(&self, mut buf: Vec<Complex<T>>, along_x: &dyn Fft<T>, along_y: &dyn Fft<T>) -> Vec<Complex<T>> {
        along_x.process(&mut buf);
        let mut t = self.transpose(&buf, self.ny, self.nx);
        along_y.process(&mut t);
        self.transpose(&t, self.nx, self.ny)
    }

    /// Unnormalized forward DFT of real samples.
    pub fn forward(&self, values: &[T]) -> Vec<Complex<T>> {
        debug_assert_eq!(values.len(), self.len());
        let buf = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(buf, self.fft_x.as_ref(), self.fft_y.as_ref())
    }

    /// Inverse DFT (normalized), keeping the real part.
    pub fn inverse(&self, coeffs: Vec<Complex<T>>) -> Vec<T> {
        debug_assert_eq!(coeffs.len(), self.len());
        let scale = T::one() / T::lit(self.len() as f64);
        self.transform(coeffs, self.ifft_x.as_ref(), self.ifft_y.as_ref())
            .into_iter()
            .map(|c| c.re * scale)
            .collect()
    }
}
