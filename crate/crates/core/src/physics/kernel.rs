use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ops::grad_unchecked;
use crate::field::{check_grids, Grid, ScalarField, VectorField};
use crate::scalar::Real;

/// How the kernel's real-space samples are produced.
#[derive(Clone, Debug)]
pub enum KernelSpec<T: Real> {
    /// `J(x) = A exp(-|x|^2 / (2 sigma^2))` at minimal-image offsets. With
    /// `mass`, `A` is chosen so that `sum J h^2 = mass`; otherwise the
    /// continuous kernel has unit mass.
    Gaussian { sigma: T, mass: Option<T> },
    /// Discrete delta: `J * f = f`.
    Delta,
    /// Raw samples; sample `(ix, iy)` is `J` at offset `(ix hx, iy hy)`.
    Custom(ScalarField<T>),
}

/// Where `a(x)` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AMode {
    /// `a = sum J h^2`, constant on the torus.
    TranslationInvariant,
    /// Arbitrary smooth periodic `a(x)` decoupled from `J`.
    Synthetic,
}

/// Even convolution kernel with its Fourier symbol and the field `a(x)`.
#[derive(Clone, Debug)]
pub struct Kernel<T: Real> {
    samples: ScalarField<T>,
    /// Real symbol: `h^2 * DFT(samples)`.
    symbol: Vec<T>,
    a: ScalarField<T>,
    a_mean: T,
    grad_a: VectorField<T>,
    mode: AMode,
}

fn minimal_image<T: Real>(i: usize, n: usize, h: T) -> T {
    let m = i.min(n - i);
    T::lit(m as f64) * h
}

impl<T: Real> Kernel<T> {
    pub fn build(spec: &KernelSpec<T>, grid: &Arc<Grid<T>>) -> Result<Self> {
        let samples = match spec {
            KernelSpec::Gaussian { sigma, mass } => {
                if !(*sigma > T::zero()) || !sigma.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian kernel needs sigma > 0, got {sigma}"
                    )));
                }
                let two_s2 = T::lit(2.0) * *sigma * *sigma;
                let amp = T::one() / (T::PI() * two_s2);
                let mut v = Vec::with_capacity(grid.len());
                for iy in 0..grid.ny() {
                    let dy = minimal_image(iy, grid.ny(), grid.hy());
                    for ix in 0..grid.nx() {
                        let dx = minimal_image(ix, grid.nx(), grid.hx());
                        v.push(amp * (-(dx * dx + dy * dy) / two_s2).exp());
                    }
                }
                let mut s = ScalarField::new(grid.clone(), v)?;
                if let Some(m) = mass {
                    let total = s.values().iter().copied().sum::<T>() * grid.cell_area();
                    s = s.scale(*m / total);
                }
                s
            }
            KernelSpec::Delta => {
                let mut s = ScalarField::zeros(grid);
                s.values_mut()[0] = T::one() / grid.cell_area();
                s
            }
            KernelSpec::Custom(samples) => {
                check_grids(samples.grid(), grid)?;
                samples.ensure_finite("kernel samples")?;
                samples.clone()
            }
        };
        check_even(&samples)?;

        let area = grid.cell_area();
        let symbol: Vec<T> = grid
            .forward(samples.values())
            .into_iter()
            .map(|c| c.re * area)
            .collect();
        let a_value = symbol[0];
        if a_value < T::zero() {
            return Err(Error::NegativeA {
                ix: 0,
                iy: 0,
                value: a_value.as_f64(),
            });
        }
        Ok(Kernel {
            samples,
            symbol,
            a: ScalarField::constant(grid, a_value),
            a_mean: a_value,
            grad_a: VectorField::zeros(grid),
            mode: AMode::TranslationInvariant,
        })
    }

    /// Replaces `a(x)` by a prescribed nonnegative field.
    pub fn with_synthetic_a(mut self, a: ScalarField<T>) -> Result<Self> {
        check_grids(a.grid(), self.grid())?;
        a.ensure_finite("synthetic a")?;
        let g = a.grid().clone();
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                let v = a.at(ix, iy);
                if v < T::zero() {
                    return Err(Error::NegativeA {
                        ix,
                        iy,
                        value: v.as_f64(),
                    });
                }
            }
        }
        self.grad_a = grad_unchecked(&a);
        self.a_mean = a.mean();
        self.a = a;
        self.mode = AMode::Synthetic;
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.samples.grid()
    }

    pub fn samples(&self) -> &ScalarField<T> {
        &self.samples
    }

    pub fn symbol(&self) -> &[T] {
        &self.symbol
    }

    pub fn a(&self) -> &ScalarField<T> {
        &self.a
    }

    /// Spatial mean of `a`; the implicit diffusion coefficient uses it.
    pub fn a_mean(&self) -> T {
        self.a_mean
    }

    pub fn grad_a(&self) -> &VectorField<T> {
        &self.grad_a
    }

    pub fn mode(&self) -> AMode {
        self.mode
    }

    pub fn is_synthetic(&self) -> bool {
        self.mode == AMode::Synthetic
    }

    /// `J * f` without input checks.
    pub(crate) fn apply(&self, f: &ScalarField<T>) -> ScalarField<T> {
        let mut s = f.spectrum();
        s.apply(|ix, iy| self.symbol[iy * f.grid().nx() + ix]);
        s.into_field()
    }

    /// Whether `J_hat(k) <= J_hat(0)` for every mode.
    pub fn symbol_peaks_at_zero(&self) -> bool {
        let top = self.symbol[0];
        self.symbol.iter().all(|&s| s <= top + T::lit(1e-12) * top.abs().max(T::one()))
    }
}

pub fn build_kernel<T: Real>(spec: &KernelSpec<T>, grid: &Arc<Grid<T>>) -> Result<Kernel<T>> {
    Kernel::build(spec, grid)
}

fn check_even<T: Real>(samples: &ScalarField<T>) -> Result<()> {
    let g = samples.grid();
    let scale = samples.max_abs().max(T::min_positive_value());
    let tol = T::lit(1e-12) * scale;
    for iy in 0..g.ny() {
        for ix in 0..g.nx() {
            let mirror = samples.at((g.nx() - ix) % g.nx(), (g.ny() - iy) % g.ny());
            if (samples.at(ix, iy) - mirror).abs() > tol {
                return Err(Error::AsymmetricKernel { ix, iy });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{convolve, L2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(g: &Arc<Grid<f64>>, seed: u64) -> ScalarField<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(g.clone(), (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// O(N^4) periodic convolution by direct summation.
    fn brute_convolve(j: &ScalarField<f64>, f: &ScalarField<f64>) -> ScalarField<f64> {
        let g = f.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let mut out = ScalarField::zeros(g);
        for iy in 0..ny {
            for ix in 0..nx {
                let mut acc = 0.0;
                for jy in 0..ny {
                    for jx in 0..nx {
                        acc += j.at((ix + nx - jx) % nx, (iy + ny - jy) % ny) * f.at(jx, jy);
                    }
                }
                out.values_mut()[g.index(ix, iy)] = acc * g.cell_area();
            }
        }
        out
    }

    #[test]
    fn delta_kernel_is_identity() {
        let g = Grid::square(16).unwrap();
        let k = Kernel::build(&KernelSpec::Delta, &g).unwrap();
        let f = noise(&g, 1);
        assert!((&convolve(&k, &f).unwrap() - &f).max_abs() < 1e-13);
        assert!((k.a_mean() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_mass_and_flat_a() {
        let g = Grid::square(64).unwrap();
        let k = Kernel::build(&KernelSpec::Gaussian { sigma: 0.5, mass: None }, &g).unwrap();
        let direct: f64 = k.samples().values().iter().sum::<f64>() * g.cell_area();
        assert!((k.a().mean() - direct).abs() < 1e-12);
        assert!((k.a().max_abs() - direct).abs() < 1e-12);
        assert!(k.grad_a().max_abs() == 0.0);
        assert!(k.symbol_peaks_at_zero());

        let k5 = Kernel::build(&KernelSpec::Gaussian { sigma: 0.5, mass: Some(5.0) }, &g).unwrap();
        assert!((k5.a_mean() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_convolves_to_mass() {
        let g = Grid::square(16).unwrap();
        let k = Kernel::build(&KernelSpec::Gaussian { sigma: 0.7, mass: None }, &g).unwrap();
        let mass: f64 = k.samples().values().iter().sum::<f64>() * g.cell_area();
        let out = convolve(&k, &ScalarField::constant(&g, 2.5)).unwrap();
        assert!((&out - &ScalarField::constant(&g, 2.5 * mass)).max_abs() < 1e-12);
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let g = Grid::square(8).unwrap();
        let k = Kernel::build(&KernelSpec::Gaussian { sigma: 0.6, mass: None }, &g).unwrap();
        let f = noise(&g, 4);
        let fast = convolve(&k, &f).unwrap();
        let slow = brute_convolve(k.samples(), &f);
        assert!((&fast - &slow).max_abs() <= 1e-12 * slow.max_abs());
    }

    #[test]
    fn convolution_is_self_adjoint() {
        let g = Grid::square(16).unwrap();
        let k = Kernel::build(&KernelSpec::Gaussian { sigma: 0.4, mass: Some(3.0) }, &g).unwrap();
        let (f, h) = (noise(&g, 1), noise(&g, 2));
        let gap = (convolve(&k, &f).unwrap().inner(&h).unwrap()
            - f.inner(&convolve(&k, &h).unwrap()).unwrap())
        .abs();
        assert!(gap <= 1e-12 * f.norm_l2() * h.norm_l2());
    }

    #[test]
    fn asymmetric_custom_kernel_rejected() {
        let g = Grid::square(8).unwrap();
        let mut s = ScalarField::zeros(&g);
        s.values_mut()[1] = 1.0;
        assert!(matches!(
            Kernel::build(&KernelSpec::Custom(s), &g),
            Err(Error::AsymmetricKernel { .. })
        ));
    }

    #[test]
    fn negative_mass_rejected() {
        let g = Grid::square(8).unwrap();
        let s = ScalarField::constant(&g, -1.0);
        assert!(matches!(
            Kernel::build(&KernelSpec::Custom(s), &g),
            Err(Error::NegativeA { .. })
        ));
    }

    #[test]
    fn synthetic_a_gradient() {
        let g = Grid::square(32).unwrap();
        let k = Kernel::build(&KernelSpec::Delta, &g)
            .unwrap()
            .with_synthetic_a(ScalarField::from_fn(&g, |x: f64, _| 2.0 + x.cos()))
            .unwrap();
        let expect = VectorField::from_fn(&g, |x, _| -x.sin(), |_, _| 0.0);
        assert!((k.grad_a() - &expect).max_abs() < 1e-12);
        assert!((k.a_mean() - 2.0).abs() < 1e-14);
        assert_eq!(k.mode(), AMode::Synthetic);

        let neg = Kernel::build(&KernelSpec::Delta, &g)
            .unwrap()
            .with_synthetic_a(ScalarField::from_fn(&g, |x, _| x.cos()));
        assert!(neg.is_err());
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        let g = Grid::square(8).unwrap();
        assert!(Kernel::build(&KernelSpec::Gaussian { sigma: 0.0, mass: None }, &g).is_err());
    }
}
