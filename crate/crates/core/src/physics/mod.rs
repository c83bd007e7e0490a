//! Nonlocal kernel, polynomial potential, and the constitutive quantities
//! built from them: chemical potential, capillary (Korteweg) force and the
//! free energy.

mod kernel;
mod potential;

pub use kernel::{build_kernel, AMode, Kernel, KernelSpec};
pub use potential::{Potential, MAX_DEGREE};

use crate::error::Result;
use crate::field::ops::{dot_samples, grad_unchecked, leray_unchecked};
use crate::field::{check_grids, ScalarField, VectorField, L2};
use crate::scalar::Real;

/// `mu = a phi - J * phi + F'(phi)`, dealiased.
pub fn chemical_potential<T: Real>(
    phi: &ScalarField<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> Result<ScalarField<T>> {
    check_grids(phi.grid(), kernel.grid())?;
    phi.ensure_finite("order parameter")?;
    Ok(chemical_potential_unchecked(phi, kernel, potential))
}

pub(crate) fn chemical_potential_unchecked<T: Real>(
    phi: &ScalarField<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> ScalarField<T> {
    let conv = kernel.apply(phi);
    let mut mu = phi.zip_map(kernel.a(), |p, a| a * p + potential.d1(p));
    mu -= &conv;
    mu.dealiased()
}

/// Capillary force in pressure-absorbed form:
/// `P[-(grad a) phi^2 / 2 - (J * phi) grad phi]`.
///
/// The gradient part of `mu grad phi` is removed by the projection, so this
/// equals `P[mu grad phi]`.
pub fn korteweg_force<T: Real>(
    phi: &ScalarField<T>,
    kernel: &Kernel<T>,
    _potential: &Potential<T>,
) -> Result<VectorField<T>> {
    check_grids(phi.grid(), kernel.grid())?;
    phi.ensure_finite("order parameter")?;
    Ok(korteweg_unchecked(phi, kernel))
}

pub(crate) fn korteweg_unchecked<T: Real>(phi: &ScalarField<T>, kernel: &Kernel<T>) -> VectorField<T> {
    let conv = kernel.apply(phi);
    let dphi = grad_unchecked(phi);
    let mut f = dphi.times(&conv.scale(-T::one()));
    if kernel.is_synthetic() {
        let half_sq = phi.map(|p| T::lit(0.5) * p * p);
        f.axpy(-T::one(), &kernel.grad_a().times(&half_sq));
    }
    leray_unchecked(&f.dealiased())
}

/// Free energy of the order parameter:
/// `(a phi, phi)/2 - (J * phi, phi)/2 + int F(phi)`.
///
/// With `a = int J` the first two terms equal
/// `1/4 int int J(x - y) (phi(x) - phi(y))^2`.
pub fn free_energy<T: Real>(phi: &ScalarField<T>, kernel: &Kernel<T>, potential: &Potential<T>) -> Result<T> {
    check_grids(phi.grid(), kernel.grid())?;
    phi.ensure_finite("order parameter")?;
    Ok(free_energy_unchecked(phi, kernel, potential))
}

pub(crate) fn free_energy_unchecked<T: Real>(
    phi: &ScalarField<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> T {
    let half = T::lit(0.5);
    let aphi = phi * kernel.a();
    let conv = kernel.apply(phi);
    let bulk = phi.values().iter().map(|&p| potential.f(p)).sum::<T>() * phi.grid().cell_area();
    half * dot_samples(&aphi, phi) - half * dot_samples(&conv, phi) + bulk
}

/// Total energy `|u|^2 / 2 + free_energy(phi)`.
pub fn energy<T: Real>(
    u: &VectorField<T>,
    phi: &ScalarField<T>,
    kernel: &Kernel<T>,
    potential: &Potential<T>,
) -> Result<T> {
    check_grids(u.grid(), phi.grid())?;
    u.ensure_finite("velocity")?;
    let kinetic = T::lit(0.5) * u.inner_unchecked_self();
    Ok(kinetic + free_energy(phi, kernel, potential)?)
}

/// Outcome of the numerical checks on the structural assumptions on `F`
/// and `a`.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    /// `min F''(s) + a(x)` over `s` in `[-M, M]` and all grid points.
    pub c0: f64,
    /// Where the minimum is attained.
    pub c0_at_s: f64,
    /// Coercivity `F''(s) + a >= c1 |s|^(2q) - c2`.
    pub coercivity_q: f64,
    pub c1: f64,
    pub c2: f64,
    /// Growth `|F'(s)|^r <= c3 |F(s)| + c4` on the scan.
    pub growth_r: f64,
    pub c3: f64,
    pub c4: f64,
    pub growth_ok: bool,
    pub a_min: f64,
    pub bound: f64,
}

impl ValidationReport {
    pub fn convexity_ok(&self) -> bool {
        self.c0 > 0.0
    }

    pub fn coercivity_ok(&self) -> bool {
        self.c1 > 0.0 && self.c2.is_finite()
    }

    pub fn passed(&self) -> bool {
        self.convexity_ok() && self.coercivity_ok() && self.growth_ok
    }
}

const SCAN: usize = 4000;

/// Scans `F'' + a`, the coercivity bound and the growth condition.
///
/// The growth exponent defaults to the conjugate of the degree of `F`
/// (`r = d / (d - 1)`), clamped into `(1, 2]`.
pub fn validate_assumptions<T: Real>(
    potential: &Potential<T>,
    kernel: &Kernel<T>,
    growth_r: Option<f64>,
) -> ValidationReport {
    let a_min = kernel
        .a()
        .values()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
    let bound = potential.bound().as_f64();
    let d2 = |s: f64| potential.d2(T::lit(s)).as_f64();

    let (mut c0, mut c0_at_s) = (f64::INFINITY, 0.0);
    for s in potential.scan_points(SCAN) {
        let v = potential.d2(s).as_f64() + a_min;
        if v < c0 {
            c0 = v;
            c0_at_s = s.as_f64();
        }
    }

    let degree = potential.degree();
    // F'' has degree d - 2 = 2q; its leading coefficient is the natural c1.
    let (coercivity_q, c1) = if degree >= 2 {
        let lead = potential.coefficients()[degree].as_f64() * (degree * (degree - 1)) as f64;
        ((degree - 2) as f64 / 2.0, lead)
    } else {
        (0.0, 0.0)
    };
    let wide = 10.0 * bound;
    let wide_scan = (0..=SCAN).map(|i| -wide + 2.0 * wide * i as f64 / SCAN as f64);
    let c2 = wide_scan
        .clone()
        .map(|s| c1 * s.abs().powf(2.0 * coercivity_q) - d2(s) - a_min)
        .fold(0.0f64, f64::max);

    let r = growth_r.unwrap_or_else(|| {
        if degree >= 2 {
            degree as f64 / (degree as f64 - 1.0)
        } else {
            2.0
        }
    });
    let fp = |s: f64| potential.d1(T::lit(s)).as_f64().abs().powf(r);
    let fv = |s: f64| potential.f(T::lit(s)).as_f64().abs();
    // c3 from the tail ratio, c4 absorbs the rest of the scan.
    let tail = |s: f64| fp(s) / fv(s).max(f64::MIN_POSITIVE);
    let c3 = 2.0 * tail(wide).max(tail(-wide)).max(1.0);
    let c4 = wide_scan.map(|s| fp(s) - c3 * fv(s)).fold(0.0f64, f64::max);
    // The bound must not degrade further out; otherwise F' outgrows F^(1/r).
    let far = 4.0 * wide;
    let growth_ok = r > 1.0
        && r <= 2.0
        && degree >= 2
        && [far, -far].iter().all(|&s| fp(s) <= c3 * fv(s) + c4);

    ValidationReport {
        c0,
        c0_at_s,
        coercivity_q,
        c1,
        c2,
        growth_r: r,
        c3,
        c4,
        growth_ok,
        a_min,
        bound,
    }
}
