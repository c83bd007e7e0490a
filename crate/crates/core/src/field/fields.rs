use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex;

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real samples of a scalar function on a periodic grid.
#[derive(Clone, Debug)]
pub struct ScalarField<T: Real> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

/// Pair of scalar fields sharing one grid.
#[derive(Clone, Debug)]
pub struct VectorField<T: Real> {
    pub x: ScalarField<T>,
    pub y: ScalarField<T>,
}

/// Unnormalized DFT coefficients of a scalar field.
#[derive(Clone, Debug)]
pub struct Spectrum<T: Real> {
    grid: Arc<Grid<T>>,
    coeffs: Vec<Complex<T>>,
}

pub(crate) fn check_grids<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                what: "scalar field samples",
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &Arc<Grid<T>>, c: T) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at the grid points.
    pub fn from_fn(grid: &Arc<Grid<T>>, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            let y = grid.y(iy);
            for ix in 0..grid.nx() {
                values.push(f(grid.x(ix), y));
            }
        }
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> T {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::lit(self.values.len() as f64)
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise `f(self, other)`; panics on grid mismatch.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert!(self.grid.same_as(&other.grid), "grid mismatch");
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: T, x: &Self) {
        assert!(self.grid.same_as(&x.grid), "grid mismatch");
        for (v, &w) in self.values.iter_mut().zip(&x.values) {
            *v += a * w;
        }
    }

    pub fn spectrum(&self) -> Spectrum<T> {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self.grid.forward(&self.values),
        }
    }

    /// Removes modes beyond the 2/3-rule cutoff.
    pub fn dealiased(&self) -> Self {
        let mut s = self.spectrum();
        s.dealias();
        s.to_field()
    }
}

impl<'a, T: Real> Add for &'a ScalarField<T> {
    type Output = ScalarField<T>;
    fn add(self, rhs: Self) -> ScalarField<T> {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<'a, T: Real> Sub for &'a ScalarField<T> {
    type Output = ScalarField<T>;
    fn sub(self, rhs: Self) -> ScalarField<T> {
        self.zip_map(rhs, |a, b| a - b)
    }
}

/// Pointwise product.
impl<'a, T: Real> Mul for &'a ScalarField<T> {
    type Output = ScalarField<T>;
    fn mul(self, rhs: Self) -> ScalarField<T> {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl<'a, T: Real> Neg for &'a ScalarField<T> {
    type Output = ScalarField<T>;
    fn neg(self) -> ScalarField<T> {
        self.map(|v| -v)
    }
}

impl<'a, T: Real> AddAssign<&'a ScalarField<T>> for ScalarField<T> {
    fn add_assign(&mut self, rhs: &'a ScalarField<T>) {
        self.axpy(T::one(), rhs);
    }
}

impl<'a, T: Real> SubAssign<&'a ScalarField<T>> for ScalarField<T> {
    fn sub_assign(&mut self, rhs: &'a ScalarField<T>) {
        self.axpy(-T::one(), rhs);
    }
}

impl<T: Real> VectorField<T> {
    pub fn new(x: ScalarField<T>, y: ScalarField<T>) -> Result<Self> {
        check_grids(x.grid(), y.grid())?;
        Ok(VectorField { x, y })
    }

    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        VectorField {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: &Arc<Grid<T>>, fx: impl Fn(T, T) -> T, fy: impl Fn(T, T) -> T) -> Self {
        VectorField {
            x: ScalarField::from_fn(grid, fx),
            y: ScalarField::from_fn(grid, fy),
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.x.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub(crate) fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> ScalarField<T> {
        &(&self.x * &other.x) + &(&self.y * &other.y)
    }

    /// Scales both components by a scalar field.
    pub fn times(&self, f: &ScalarField<T>) -> Self {
        VectorField {
            x: &self.x * f,
            y: &self.y * f,
        }
    }

    pub fn scale(&self, s: T) -> Self {
        VectorField {
            x: self.x.scale(s),
            y: self.y.scale(s),
        }
    }

    pub fn axpy(&mut self, a: T, other: &Self) {
        self.x.axpy(a, &other.x);
        self.y.axpy(a, &other.y);
    }

    pub fn max_abs(&self) -> T {
        self.x.max_abs().max(self.y.max_abs())
    }

    /// Largest pointwise Euclidean length.
    pub fn max_speed(&self) -> T {
        self.x
            .values()
            .iter()
            .zip(self.y.values())
            .fold(T::zero(), |m, (&a, &b)| m.max((a * a + b * b).sqrt()))
    }

    pub fn dealiased(&self) -> Self {
        VectorField {
            x: self.x.dealiased(),
            y: self.y.dealiased(),
        }
    }
}

impl<'a, T: Real> Add for &'a VectorField<T> {
    type Output = VectorField<T>;
    fn add(self, rhs: Self) -> VectorField<T> {
        VectorField {
            x: &self.x + &rhs.x,
            y: &self.y + &rhs.y,
        }
    }
}

impl<'a, T: Real> Sub for &'a VectorField<T> {
    type Output = VectorField<T>;
    fn sub(self, rhs: Self) -> VectorField<T> {
        VectorField {
            x: &self.x - &rhs.x,
            y: &self.y - &rhs.y,
        }
    }
}

impl<'a, T: Real> Neg for &'a VectorField<T> {
    type Output = VectorField<T>;
    fn neg(self) -> VectorField<T> {
        VectorField {
            x: -&self.x,
            y: -&self.y,
        }
    }
}

impl<'a, T: Real> AddAssign<&'a VectorField<T>> for VectorField<T> {
    fn add_assign(&mut self, rhs: &'a VectorField<T>) {
        self.axpy(T::one(), rhs);
    }
}

impl<'a, T: Real> SubAssign<&'a VectorField<T>> for VectorField<T> {
    fn sub_assign(&mut self, rhs: &'a VectorField<T>) {
        self.axpy(-T::one(), rhs);
    }
}

impl<T: Real> Spectrum<T> {
    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Spectrum {
            grid: grid.clone(),
            coeffs: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn to_field(&self) -> ScalarField<T> {
        ScalarField {
            grid: self.grid.clone(),
            values: self.grid.inverse(self.coeffs.clone()),
        }
    }

    pub fn into_field(self) -> ScalarField<T> {
        ScalarField {
            values: self.grid.inverse(self.coeffs),
            grid: self.grid,
        }
    }

    /// Multiplies each coefficient by a real symbol `s(ix, iy)`.
    pub fn apply(&mut self, s: impl Fn(usize, usize) -> T) {
        let nx = self.grid.nx();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c = *c * s(i % nx, i / nx);
        }
    }

    pub fn dealias(&mut self) {
        let g = self.grid.clone();
        self.apply(|ix, iy| if g.keeps(ix, iy) { T::one() } else { T::zero() });
    }

    pub fn dx(&self) -> Self {
        self.derivative(|ix, _| self.grid.kx(ix))
    }

    pub fn dy(&self) -> Self {
        self.derivative(|_, iy| self.grid.ky(iy))
    }

    fn derivative(&self, k: impl Fn(usize, usize) -> T) -> Self {
        let nx = self.grid.nx();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex::new(T::zero(), k(i % nx, i / nx)))
            .collect();
        Spectrum {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        let g = self.grid.clone();
        out.apply(|ix, iy| -g.k2(ix, iy));
        out
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c = *c + o * a;
        }
    }
}
