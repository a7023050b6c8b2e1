//! Reference laws on the line, tail and quantile functions, and the
//! monotone observables `g` used to build stationary sequences.
//!
//! A [`ReferenceLaw`] exposes its distribution function `F`, the tail of the
//! absolute value `H(t) = P(|X| > t)`, and `Q`, the generalized inverse of
//! `H`:
//!
//! ```text
//! Q(u) = inf { t >= 0 : H(t) <= u },   u in (0, 1]
//! ```
//!
//! Laws that know a closed-form antiderivative of `F` expose it through
//! [`ReferenceLaw::integrated_cdf`] / [`ReferenceLaw::integrated_survival`];
//! transport code then integrates `|F_n - F|` exactly.

mod laws;
mod observable;
mod tabulated;

use std::fmt::Debug;

pub use laws::{Exponential, LawSpec, Pareto, PointMass, QuadratureOnly, Uniform};
pub use observable::{CustomFn, Observable, ObservableKind};
pub use tabulated::{empirical_cdf, EmpiricalLaw, PowerTail, TabulatedLaw};

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// A probability law on the real line.
pub trait ReferenceLaw: Send + Sync + Debug {
    /// Right-continuous distribution function `F(t) = P(X <= t)`.
    fn cdf(&self, t: f64) -> f64;

    /// `P(X < t)`. Equal to [`cdf`](Self::cdf) for laws without atoms.
    fn cdf_left(&self, t: f64) -> f64 {
        self.cdf(t)
    }

    /// Tail of the absolute value, `H(t) = P(|X| > t)` for `t >= 0`.
    fn tail(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        ((1.0 - self.cdf(t)) + self.cdf_left(-t)).clamp(0.0, 1.0)
    }

    /// `Q(u) = inf { t >= 0 : H(t) <= u }`.
    fn quantile(&self, u: f64) -> f64 {
        quantile_from_tail(|t| self.tail(t), u).unwrap_or(f64::NAN)
    }

    /// Generalized inverse of the distribution function, `inf { t : F(t) >= u }`.
    fn inv_cdf(&self, u: f64) -> f64;

    /// `F^{-1}(1 - v)`. Laws with unbounded support override this to stay
    /// accurate when `1 - v` rounds to one.
    fn inv_survival(&self, v: f64) -> f64 {
        self.inv_cdf(1.0 - v)
    }

    /// Smallest closed interval carrying all the mass (endpoints may be infinite).
    fn support(&self) -> (f64, f64);

    /// Whether `E|X|^r < ∞`.
    fn finite_moment(&self, r: f64) -> bool;

    /// `∫_{-∞}^t F(s) ds`, when known in closed form.
    fn integrated_cdf(&self, _t: f64) -> Option<f64> {
        None
    }

    /// `∫_t^{∞} (1 - F(s)) ds`, when known in closed form.
    fn integrated_survival(&self, _t: f64) -> Option<f64> {
        None
    }

    fn name(&self) -> String;
}

/// `∫_a^b F(t) dt` for `a <= b`, exact when the law provides an antiderivative.
pub fn cdf_integral(law: &dyn ReferenceLaw, a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a >= b {
        return 0.0;
    }
    if let (Some(lo), Some(hi)) = (law.integrated_cdf(a), law.integrated_cdf(b)) {
        return hi - lo;
    }
    let (s_lo, s_hi) = law.support();
    // F vanishes left of the support and equals one right of it.
    let lo = a.max(s_lo);
    let hi = b.min(s_hi);
    let right = if b > s_hi { b - s_hi.max(a) } else { 0.0 };
    let middle = if lo < hi {
        Quadrature::default().integrate(|t| law.cdf(t), lo, hi).value
    } else {
        0.0
    };
    middle + right
}

/// Generalized inverse of a nonincreasing tail function given as a callable.
///
/// Bisection to absolute tolerance `1e-12`; returns `+∞` when `H` never drops
/// to `u` on the representable half-line.
pub fn quantile_from_tail<H: Fn(f64) -> f64>(tail: H, u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1], got {u}")));
    }
    if tail(0.0) <= u {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while tail(hi) > u {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(f64::INFINITY);
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 || mid <= lo || mid >= hi {
            return Ok(hi);
        }
        if tail(mid) <= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Piecewise-linear tail function tabulated on knots `0 = t_0 < ... < t_k`,
/// constant beyond the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct TailTable {
    t: Vec<f64>,
    h: Vec<f64>,
}

impl TailTable {
    pub fn new(t: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != h.len() {
            return Err(Error::invalid("tail table needs matching, nonempty columns"));
        }
        if t[0] != 0.0 {
            return Err(Error::invalid("tail table must start at t = 0"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tail table knots must be strictly increasing"));
        }
        if h.windows(2).any(|w| w[1] > w[0]) || h.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::invalid("tail values must be nonincreasing in [0, 1]"));
        }
        Ok(Self { t, h })
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.h[0];
        }
        let j = self.t.partition_point(|&x| x <= t);
        if j >= self.t.len() {
            return *self.h.last().unwrap();
        }
        let (t0, t1, h0, h1) = (self.t[j - 1], self.t[j], self.h[j - 1], self.h[j]);
        h0 + (h1 - h0) * (t - t0) / (t1 - t0)
    }

    /// Exact generalized inverse of the interpolated tail.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::invalid(format!("quantile level must lie in (0, 1], got {u}")));
        }
        if self.h[0] <= u {
            return Ok(0.0);
        }
        match self.h.iter().position(|&v| v <= u) {
            None => Ok(f64::INFINITY),
            Some(j) => {
                let (t0, t1, h0, h1) = (self.t[j - 1], self.t[j], self.h[j - 1], self.h[j]);
                if h1 == h0 {
                    return Ok(t1);
                }
                Ok((t0 + (h0 - u) / (h0 - h1) * (t1 - t0)).min(t1))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_of_linear_tail() {
        let q = quantile_from_tail(|t: f64| (1.0 - t).max(0.0), 0.3).unwrap();
        assert!((q - 0.7).abs() < 1e-12);
    }

    #[test]
    fn quantile_of_zero_tail() {
        for u in [0.01, 0.5, 1.0] {
            assert_eq!(quantile_from_tail(|_| 0.0, u).unwrap(), 0.0);
        }
    }

    #[test]
    fn quantile_of_exponential_tail() {
        let q = quantile_from_tail(|t: f64| (-t).exp().min(1.0), 0.5).unwrap();
        assert!((q - std::f64::consts::LN_2).abs() < 1e-12, "{q}");
    }

    #[test]
    fn quantile_rejects_nonpositive_level() {
        assert!(quantile_from_tail(|_| 0.5, 0.0).is_err());
        assert!(quantile_from_tail(|_| 0.5, -1.0).is_err());
    }

    #[test]
    fn tail_never_small_enough_gives_infinity() {
        assert_eq!(quantile_from_tail(|_| 0.5, 0.25).unwrap(), f64::INFINITY);
    }

    #[test]
    fn tail_table_inverse_is_exact() {
        let table = TailTable::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(table.quantile(0.5).unwrap(), 1.0);
        assert_eq!(table.quantile(0.25).unwrap(), 1.5);
        assert_eq!(table.quantile(1.0).unwrap(), 0.0);
        assert_eq!(table.eval(1.5), 0.25);
    }
}
