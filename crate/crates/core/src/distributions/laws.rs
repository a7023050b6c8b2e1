use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ReferenceLaw;
use crate::error::{Error, Result};

/// Uniform law on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("uniform law needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl ReferenceLaw for Uniform {
    fn cdf(&self, t: f64) -> f64 {
        ((t - self.lo) / self.width()).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        if self.lo >= 0.0 && u > 0.0 && u < 1.0 {
            return self.hi - u * self.width();
        }
        super::quantile_from_tail(|t| self.tail(t), u).unwrap_or(f64::NAN)
    }

    fn inv_cdf(&self, u: f64) -> f64 {
        self.lo + u.clamp(0.0, 1.0) * self.width()
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn finite_moment(&self, _r: f64) -> bool {
        true
    }

    fn integrated_cdf(&self, t: f64) -> Option<f64> {
        Some(if t <= self.lo {
            0.0
        } else if t <= self.hi {
            (t - self.lo).powi(2) / (2.0 * self.width())
        } else {
            t - 0.5 * (self.lo + self.hi)
        })
    }

    fn integrated_survival(&self, t: f64) -> Option<f64> {
        Some(if t >= self.hi {
            0.0
        } else if t >= self.lo {
            (self.hi - t).powi(2) / (2.0 * self.width())
        } else {
            0.5 * (self.lo + self.hi) - t
        })
    }

    fn name(&self) -> String {
        format!("uniform[{},{}]", self.lo, self.hi)
    }
}

/// Dirac mass at `at`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub at: f64,
}

impl ReferenceLaw for PointMass {
    fn cdf(&self, t: f64) -> f64 {
        if t >= self.at {
            1.0
        } else {
            0.0
        }
    }

    fn cdf_left(&self, t: f64) -> f64 {
        if t > self.at {
            1.0
        } else {
            0.0
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        if u >= 1.0 {
            0.0
        } else {
            self.at.abs()
        }
    }

    fn inv_cdf(&self, _u: f64) -> f64 {
        self.at
    }

    fn support(&self) -> (f64, f64) {
        (self.at, self.at)
    }

    fn finite_moment(&self, _r: f64) -> bool {
        true
    }

    fn integrated_cdf(&self, t: f64) -> Option<f64> {
        Some((t - self.at).max(0.0))
    }

    fn integrated_survival(&self, t: f64) -> Option<f64> {
        Some((self.at - t).max(0.0))
    }

    fn name(&self) -> String {
        format!("point[{}]", self.at)
    }
}

/// Pareto-type law with tail `H(t) = min(1, t^{-p})`, supported on `[1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pareto {
    pub p: f64,
}

impl Pareto {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::invalid(format!("pareto index must be positive, got {p}")));
        }
        Ok(Self { p })
    }
}

impl ReferenceLaw for Pareto {
    fn cdf(&self, t: f64) -> f64 {
        if t < 1.0 {
            0.0
        } else {
            1.0 - t.powf(-self.p)
        }
    }

    fn tail(&self, t: f64) -> f64 {
        if t < 1.0 {
            1.0
        } else {
            t.powf(-self.p)
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        if u >= 1.0 {
            0.0
        } else {
            u.powf(-1.0 / self.p)
        }
    }

    fn inv_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            1.0
        } else {
            (1.0 - u).powf(-1.0 / self.p)
        }
    }

    fn inv_survival(&self, v: f64) -> f64 {
        if v >= 1.0 {
            1.0
        } else {
            v.powf(-1.0 / self.p)
        }
    }

    fn support(&self) -> (f64, f64) {
        (1.0, f64::INFINITY)
    }

    fn finite_moment(&self, r: f64) -> bool {
        r < self.p
    }

    fn integrated_cdf(&self, t: f64) -> Option<f64> {
        if t <= 1.0 {
            return Some(0.0);
        }
        let p = self.p;
        let tail_part = if (p - 1.0).abs() < 1e-14 {
            t.ln()
        } else {
            (t.powf(1.0 - p) - 1.0) / (1.0 - p)
        };
        Some((t - 1.0) - tail_part)
    }

    fn integrated_survival(&self, t: f64) -> Option<f64> {
        let p = self.p;
        if p <= 1.0 {
            return Some(f64::INFINITY);
        }
        if t >= 1.0 {
            Some(t.powf(1.0 - p) / (p - 1.0))
        } else {
            Some((1.0 - t) + 1.0 / (p - 1.0))
        }
    }

    fn name(&self) -> String {
        format!("pareto[{}]", self.p)
    }
}

/// Exponential law with the given rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponential {
    pub rate: f64,
}

impl Exponential {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Self { rate })
    }
}

impl ReferenceLaw for Exponential {
    fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            -(-self.rate * t).exp_m1()
        }
    }

    fn tail(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else {
            (-self.rate * t).exp()
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        if u >= 1.0 {
            0.0
        } else {
            -u.ln() / self.rate
        }
    }

    fn inv_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            -(-u).ln_1p() / self.rate
        }
    }

    fn inv_survival(&self, v: f64) -> f64 {
        if v >= 1.0 {
            0.0
        } else {
            -v.ln() / self.rate
        }
    }

    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn finite_moment(&self, _r: f64) -> bool {
        true
    }

    fn integrated_cdf(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            Some(0.0)
        } else {
            Some(t - self.cdf(t) / self.rate)
        }
    }

    fn integrated_survival(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            Some(1.0 / self.rate - t)
        } else {
            Some((-self.rate * t).exp() / self.rate)
        }
    }

    fn name(&self) -> String {
        format!("exponential[{}]", self.rate)
    }
}

/// Wraps a law and hides its antiderivatives, forcing numerical quadrature.
#[derive(Debug, Clone)]
pub struct QuadratureOnly<L>(pub L);

impl<L: ReferenceLaw> ReferenceLaw for QuadratureOnly<L> {
    fn cdf(&self, t: f64) -> f64 {
        self.0.cdf(t)
    }
    fn cdf_left(&self, t: f64) -> f64 {
        self.0.cdf_left(t)
    }
    fn tail(&self, t: f64) -> f64 {
        self.0.tail(t)
    }
    fn quantile(&self, u: f64) -> f64 {
        self.0.quantile(u)
    }
    fn inv_cdf(&self, u: f64) -> f64 {
        self.0.inv_cdf(u)
    }
    fn inv_survival(&self, v: f64) -> f64 {
        self.0.inv_survival(v)
    }
    fn support(&self) -> (f64, f64) {
        self.0.support()
    }
    fn finite_moment(&self, r: f64) -> bool {
        self.0.finite_moment(r)
    }
    fn name(&self) -> String {
        format!("quadrature({})", self.0.name())
    }
}

/// Serializable description of a built-in law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    Uniform { lo: f64, hi: f64 },
    PointMass { at: f64 },
    Pareto { p: f64 },
    Exponential { rate: f64 },
}

impl LawSpec {
    pub fn build(&self) -> Result<Arc<dyn ReferenceLaw>> {
        Ok(match *self {
            LawSpec::Uniform { lo, hi } => Arc::new(Uniform::new(lo, hi)?),
            LawSpec::PointMass { at } => {
                if !at.is_finite() {
                    return Err(Error::invalid("point mass location must be finite"));
                }
                Arc::new(PointMass { at })
            }
            LawSpec::Pareto { p } => Arc::new(Pareto::new(p)?),
            LawSpec::Exponential { rate } => Arc::new(Exponential::new(rate)?),
        })
    }

    /// Inverse of the [`FromStr`] form.
    pub fn label(&self) -> String {
        match *self {
            LawSpec::Uniform { lo, hi } if lo == 0.0 && hi == 1.0 => "uniform".into(),
            LawSpec::Uniform { lo, hi } => format!("uniform:{lo}:{hi}"),
            LawSpec::PointMass { at } => format!("point:{at}"),
            LawSpec::Pareto { p } => format!("pareto:{p}"),
            LawSpec::Exponential { rate } => format!("exponential:{rate}"),
        }
    }
}

impl FromStr for LawSpec {
    type Err = Error;

    /// Accepts `uniform`, `uniform:LO:HI`, `point:C`, `pareto:P`, `exponential:RATE`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::invalid(format!("law '{s}' is missing parameter {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("law '{s}': {e}")))
        };
        let spec = match (parts[0].to_ascii_lowercase().as_str(), parts.len()) {
            ("uniform", 1) => LawSpec::Uniform { lo: 0.0, hi: 1.0 },
            ("uniform", 3) => LawSpec::Uniform { lo: num(1)?, hi: num(2)? },
            ("point", 2) => LawSpec::PointMass { at: num(1)? },
            ("pareto", 2) => LawSpec::Pareto { p: num(1)? },
            ("exponential", 1) => LawSpec::Exponential { rate: 1.0 },
            ("exponential", 2) => LawSpec::Exponential { rate: num(1)? },
            _ => return Err(Error::invalid(format!("unrecognized law '{s}'"))),
        };
        spec.build()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_antiderivatives(law: &dyn ReferenceLaw, points: &[f64]) {
        let q = crate::quadrature::Quadrature::default();
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let exact = law.integrated_cdf(b).unwrap() - law.integrated_cdf(a).unwrap();
            let numeric = q.integrate(|t| law.cdf(t), a, b).value;
            assert!((exact - numeric).abs() < 1e-8, "{}: [{a},{b}] {exact} vs {numeric}", law.name());
            let exact = law.integrated_survival(a).unwrap() - law.integrated_survival(b).unwrap();
            let numeric = q.integrate(|t| 1.0 - law.cdf(t), a, b).value;
            assert!((exact - numeric).abs() < 1e-8, "{}: [{a},{b}] {exact} vs {numeric}", law.name());
        }
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        let pts = [-1.0, 0.0, 0.2, 0.5, 1.0, 1.5, 3.0, 10.0];
        check_antiderivatives(&Uniform::unit(), &pts);
        check_antiderivatives(&Uniform::new(-0.5, 2.0).unwrap(), &pts);
        check_antiderivatives(&Pareto::new(2.5).unwrap(), &pts);
        check_antiderivatives(&Exponential::new(1.7).unwrap(), &pts);
    }

    #[test]
    fn quantiles_are_generalized_inverses() {
        let p = Pareto::new(2.0).unwrap();
        assert!((p.quantile(0.25) - 2.0).abs() < 1e-15);
        let e = Exponential::new(1.0).unwrap();
        assert!((e.quantile(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        let u = Uniform::unit();
        assert!((u.quantile(0.3) - 0.7).abs() < 1e-15);
        assert_eq!(PointMass { at: -2.0 }.quantile(0.5), 2.0);
    }

    #[test]
    fn symmetric_uniform_tail_counts_both_sides() {
        let u = Uniform::new(-1.0, 1.0).unwrap();
        assert!((u.tail(0.5) - 0.5).abs() < 1e-15);
        assert!((u.quantile(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parse_specs() {
        assert_eq!("uniform".parse::<LawSpec>().unwrap(), LawSpec::Uniform { lo: 0.0, hi: 1.0 });
        assert_eq!("point:0.3".parse::<LawSpec>().unwrap(), LawSpec::PointMass { at: 0.3 });
        assert!("pareto:-1".parse::<LawSpec>().is_err());
        assert!("gauss".parse::<LawSpec>().is_err());
    }
}
