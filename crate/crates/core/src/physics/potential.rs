use crate::error::{Error, Result};
use crate::scalar::Real;

/// Polynomial potential `F(s) = sum_k c_k s^k` of degree at most six.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential<T: Real> {
    /// Ascending coefficients of F, F', F'', F''', F''''.
    derivs: [Vec<T>; 5],
    bound: T,
}

pub const MAX_DEGREE: usize = 6;

fn differentiate<T: Real>(c: &[T]) -> Vec<T> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &v)| v * T::lit(k as f64))
        .collect()
}

fn horner<T: Real>(c: &[T], s: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &v| acc * s + v)
}

impl<T: Real> Potential<T> {
    /// `coeffs[k]` multiplies `s^k`; `bound` is the half-width M of the
    /// validation interval `[-M, M]`.
    pub fn new(coeffs: &[T], bound: T) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidParameter(format!(
                "potential needs 1..={} coefficients, got {}",
                MAX_DEGREE + 1,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("potential coefficients"));
        }
        if !(bound > T::zero()) || !bound.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "potential bound M must be > 0, got {bound}"
            )));
        }
        let c0 = coeffs.to_vec();
        let c1 = differentiate(&c0);
        let c2 = differentiate(&c1);
        let c3 = differentiate(&c2);
        let c4 = differentiate(&c3);
        let p = Potential {
            derivs: [c0, c1, c2, c3, c4],
            bound,
        };
        p.cross_check()?;
        Ok(p)
    }

    /// `F(s) = (s^2 - 1)^2`.
    pub fn double_well() -> Self {
        let c = [1.0, 0.0, -2.0, 0.0, 1.0].map(T::lit);
        Self::new(&c, T::lit(2.0)).expect("double well is valid")
    }

    pub fn coefficients(&self) -> &[T] {
        &self.derivs[0]
    }

    pub fn degree(&self) -> usize {
        self.derivs[0]
            .iter()
            .rposition(|c| *c != T::zero())
            .unwrap_or(0)
    }

    pub fn bound(&self) -> T {
        self.bound
    }

    #[inline]
    pub fn f(&self, s: T) -> T {
        horner(&self.derivs[0], s)
    }

    #[inline]
    pub fn d1(&self, s: T) -> T {
        horner(&self.derivs[1], s)
    }

    #[inline]
    pub fn d2(&self, s: T) -> T {
        horner(&self.derivs[2], s)
    }

    #[inline]
    pub fn d3(&self, s: T) -> T {
        horner(&self.derivs[3], s)
    }

    #[inline]
    pub fn d4(&self, s: T) -> T {
        horner(&self.derivs[4], s)
    }

    /// `F'(s + d) - F'(s) - F''(s) d`, evaluated exactly by Taylor expansion.
    pub fn d1_remainder(&self, s: T, d: T) -> T {
        // F' has degree <= 5; its Taylor series around s terminates, so the
        // remainder is sum_{k>=2} F^(k+1)(s) d^k / k!.
        let c1 = &self.derivs[1];
        let mut derivs_at_s = Vec::with_capacity(c1.len());
        let mut c = c1.clone();
        while !c.is_empty() {
            derivs_at_s.push(horner(&c, s));
            c = differentiate(&c);
        }
        let mut acc = T::zero();
        let mut fact = T::one();
        let mut pow = T::one();
        for (k, v) in derivs_at_s.iter().enumerate() {
            if k > 0 {
                fact *= T::lit(k as f64);
                pow *= d;
            }
            if k >= 2 {
                acc += *v * pow / fact;
            }
        }
        acc
    }

    /// Sample points spanning `[-M, M]`.
    pub fn scan_points(&self, n: usize) -> impl Iterator<Item = T> + '_ {
        let m = self.bound;
        (0..=n).map(move |i| -m + T::lit(2.0 * i as f64 / n as f64) * m)
    }

    /// Largest `|F''|` on `[-M, M]`.
    pub fn max_abs_d2(&self) -> T {
        self.scan_points(4000)
            .map(|s| self.d2(s).abs())
            .fold(T::zero(), T::max)
    }

    fn cross_check(&self) -> Result<()> {
        let eps = T::lit(1e-4) * self.bound.max(T::one());
        let evals: [&dyn Fn(T) -> T; 5] = [
            &|s| self.f(s),
            &|s| self.d1(s),
            &|s| self.d2(s),
            &|s| self.d3(s),
            &|s| self.d4(s),
        ];
        for s in self.scan_points(16) {
            for k in 0..4 {
                let fd = (evals[k](s + eps) - evals[k](s - eps)) / (T::lit(2.0) * eps);
                let exact = evals[k + 1](s);
                let scale = T::one() + exact.abs() + evals[k](s).abs();
                if (fd - exact).abs() > T::lit(1e-3) * scale {
                    return Err(Error::InvalidParameter(format!(
                        "potential derivative {} fails finite-difference check at s = {s}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn double_well_values() {
        let p = Potential::<f64>::double_well();
        assert_eq!(p.f(1.0), 0.0);
        assert_eq!(p.f(0.0), 1.0);
        assert_eq!(p.d1(1.0), 0.0);
        assert_eq!(p.d2(0.0), -4.0);
        assert_eq!(p.d3(1.0), 24.0);
        assert_eq!(p.d4(0.3), 24.0);
        assert_eq!(p.degree(), 4);
        assert_eq!(p.max_abs_d2(), 44.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Potential::<f64>::new(&[0.0; 8], 1.0).is_err());
        assert!(Potential::<f64>::new(&[], 1.0).is_err());
        assert!(Potential::new(&[1.0, f64::NAN], 1.0).is_err());
        assert!(Potential::new(&[1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn derivative_chain_is_second_order(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 1..=7),
            s in -1.5f64..1.5,
        ) {
            let p = Potential::new(&coeffs, 2.0).unwrap();
            let evals: [&dyn Fn(f64) -> f64; 5] =
                [&|x| p.f(x), &|x| p.d1(x), &|x| p.d2(x), &|x| p.d3(x), &|x| p.d4(x)];
            for k in 0..4 {
                let err = |e: f64| ((evals[k](s + e) - evals[k](s - e)) / (2.0 * e) - evals[k + 1](s)).abs();
                let (e1, e2) = (err(1e-2), err(5e-3));
                // central differences: error ~ eps^2 until roundoff dominates
                prop_assert!(e2 <= 0.3 * e1 + 1e-9, "k={} e1={} e2={}", k, e1, e2);
            }
        }

        #[test]
        fn taylor_remainder_is_exact(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 1..=7),
            s in -1.5f64..1.5,
            d in -0.5f64..0.5,
        ) {
            let p = Potential::new(&coeffs, 2.0).unwrap();
            let direct = p.d1(s + d) - p.d1(s) - p.d2(s) * d;
            prop_assert!((p.d1_remainder(s, d) - direct).abs() < 1e-11);
        }
    }
}
