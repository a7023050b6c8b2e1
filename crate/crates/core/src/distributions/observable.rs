use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shared monotone function `(0, 1) -> R` for custom observables.
#[derive(Clone)]
pub struct CustomFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl CustomFn {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFn(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ObservableKind {
    Identity,
    /// `C x^{-b}`, nonincreasing.
    SingularAtZero,
    /// `C (1 - x)^{-b}`, nondecreasing.
    SingularAtOne,
    /// User-supplied monotone function with the given direction.
    Custom { name: String, increasing: bool },
}

/// Monotone function `g` on `(0, 1)` applied to the orbit of a map.
///
/// Singular kinds carry an optional logarithmic damping `(κ - ln s)^{-β}`
/// where `s` is the distance to the singular endpoint and `κ = max(1, β/b)`.
/// The shift `κ` keeps `g` monotone on the whole interval; near the singularity
/// the factor behaves like `|ln s|^{-β}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observable {
    #[serde(flatten)]
    pub kind: ObservableKind,
    #[serde(default)]
    pub exponent: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub log_exponent: Option<f64>,
    #[serde(skip)]
    pub custom: Option<CustomFn>,
}

fn one() -> f64 {
    1.0
}

impl PartialEq for Observable {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.exponent == other.exponent
            && self.scale == other.scale
            && self.log_exponent == other.log_exponent
    }
}

impl Default for Observable {
    fn default() -> Self {
        Self::identity()
    }
}

impl Observable {
    pub fn identity() -> Self {
        Self {
            kind: ObservableKind::Identity,
            exponent: 0.0,
            scale: 1.0,
            log_exponent: None,
            custom: None,
        }
    }

    pub fn singular_at_zero(b: f64, scale: f64) -> Result<Self> {
        Self::singular(ObservableKind::SingularAtZero, b, scale, None)
    }

    pub fn singular_at_one(b: f64, scale: f64) -> Result<Self> {
        Self::singular(ObservableKind::SingularAtOne, b, scale, None)
    }

    pub fn singular(kind: ObservableKind, b: f64, scale: f64, log_exponent: Option<f64>) -> Result<Self> {
        let obs = Self {
            kind,
            exponent: b,
            scale,
            log_exponent,
            custom: None,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn custom<F>(name: &str, increasing: bool, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: ObservableKind::Custom {
                name: name.to_string(),
                increasing,
            },
            exponent: 0.0,
            scale: 1.0,
            log_exponent: None,
            custom: Some(CustomFn::new(f)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            return Err(Error::invalid(format!("observable exponent must be >= 0, got {}", self.exponent)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("observable scale must be > 0, got {}", self.scale)));
        }
        if let Some(beta) = self.log_exponent {
            if !(beta >= 0.0 && beta.is_finite()) {
                return Err(Error::invalid(format!("log exponent must be >= 0, got {beta}")));
            }
            if beta > 0.0 && self.exponent == 0.0 {
                return Err(Error::invalid("log damping needs a positive power exponent"));
            }
        }
        match &self.kind {
            ObservableKind::Custom { name, .. } if self.custom.is_none() => Err(Error::invalid(format!(
                "custom observable `{name}` has no function attached"
            ))),
            _ => Ok(()),
        }
    }

    /// True for nondecreasing observables.
    pub fn is_increasing(&self) -> bool {
        match &self.kind {
            ObservableKind::Identity | ObservableKind::SingularAtOne => true,
            ObservableKind::SingularAtZero => self.exponent == 0.0,
            ObservableKind::Custom { increasing, .. } => *increasing,
        }
    }

    /// True when `g` is bounded on `(0, 1)`.
    pub fn is_bounded(&self) -> bool {
        match &self.kind {
            ObservableKind::Identity => true,
            ObservableKind::SingularAtZero | ObservableKind::SingularAtOne => self.exponent == 0.0,
            ObservableKind::Custom { .. } => false,
        }
    }

    fn singular_value(&self, s: f64) -> f64 {
        if s <= 0.0 && self.exponent > 0.0 {
            return f64::INFINITY;
        }
        let mut v = self.scale * s.powf(-self.exponent);
        if let Some(beta) = self.log_exponent.filter(|&b| b > 0.0) {
            let kappa = (beta / self.exponent).max(1.0);
            v *= (kappa - s.ln()).powf(-beta);
        }
        v
    }

    /// `g(x)` without domain checks; `x` must lie in `(0, 1)`.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match &self.kind {
            ObservableKind::Identity => x,
            ObservableKind::SingularAtZero => self.singular_value(x),
            ObservableKind::SingularAtOne => self.singular_value(1.0 - x),
            ObservableKind::Custom { .. } => (self.custom.as_ref().expect("validated").0)(x),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::invalid(format!("observable argument must lie in (0, 1), got {x}")));
        }
        Ok(self.apply(x))
    }

    /// Whether `side` is `zero` or `one`, for singular kinds.
    pub fn side(&self) -> Option<&'static str> {
        match self.kind {
            ObservableKind::SingularAtZero => Some("zero"),
            ObservableKind::SingularAtOne => Some("one"),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ObservableKind::Identity => "identity".into(),
            ObservableKind::Custom { name, .. } => format!("custom:{name}"),
            _ => {
                let mut s = format!("{}:{}:{}", self.side().unwrap(), self.exponent, self.scale);
                if let Some(beta) = self.log_exponent {
                    s.push_str(&format!(":{beta}"));
                }
                s
            }
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    /// `identity`, `zero:B[:C[:BETA]]` or `one:B[:C[:BETA]]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |k: usize, default: Option<f64>| -> Result<Option<f64>> {
            match parts.get(k) {
                Some(p) => p
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::invalid(format!("bad number `{p}` in observable `{s}`"))),
                None => Ok(default),
            }
        };
        let kind = match parts[0] {
            "identity" if parts.len() == 1 => return Ok(Self::identity()),
            "zero" => ObservableKind::SingularAtZero,
            "one" => ObservableKind::SingularAtOne,
            _ => return Err(Error::invalid(format!("unknown observable `{s}`"))),
        };
        if parts.len() < 2 || parts.len() > 4 {
            return Err(Error::invalid(format!("observable `{s}` expects SIDE:B[:C[:BETA]]")));
        }
        let b = num(1, None)?.unwrap();
        let c = num(2, Some(1.0))?.unwrap();
        let beta = num(3, None)?;
        Self::singular(kind, b, c, beta)
    }
}
