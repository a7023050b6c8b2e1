//! Moment and tail bounds for `W_1(μ_n, μ)` under α-dependence, rate
//! predictions for intermittent maps, and quantile-condition checks.
//!
//! Notation: `α(k)` is a nonincreasing dependence sequence,
//! `α^{-1}(u) = #{k >= 0 : α(k) >= u}`, `H(t) = P(|X_0| > t)` and `Q` is the
//! generalized inverse of `H`. `S_{α,n}(t) = Σ_{k=0}^n min{α(k), H(t)}`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::ReferenceLaw;
use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

pub const DEFAULT_ALPHA0: f64 = 0.25;

/// Decay law of the coefficients beyond `k = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaModel {
    /// `values[k]` for `k <= K`; beyond, `values[K] (K/k)^a` if a tail exponent
    /// is given, else zero.
    Table { values: Vec<f64>, tail_exponent: Option<f64> },
    /// `c k^{-a}`.
    Polynomial { c: f64, a: f64 },
    /// `c r^k` with `0 < r < 1`.
    Geometric { c: f64, ratio: f64 },
    /// `c / (k ln^a k)` for `k >= 2`.
    LogPolynomial { c: f64, a: f64 },
}

/// Nonincreasing sequence `α(0), α(1), ...` in `[0, 1]`.
///
/// For `k >= 1`, `α(k) = min{α(0), model(k)}`. When not supplied, `α(0)` is
/// the model value at 0 if finite and at most 1, else 1/4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSequence {
    pub model: AlphaModel,
    pub alpha0: f64,
}

/// Direct-summation length before switching to Euler–Maclaurin.
const DIRECT_TERMS: u64 = 32;
/// Counts beyond this are returned without integer correction.
const EXACT_COUNT_LIMIT: f64 = 4.0e15;

impl AlphaSequence {
    pub fn new(model: AlphaModel, alpha0: Option<f64>) -> Result<Self> {
        let default0 = match &model {
            AlphaModel::Table { values, .. } => values.first().copied().unwrap_or(DEFAULT_ALPHA0),
            AlphaModel::Geometric { c, .. } if *c <= 1.0 => *c,
            _ => DEFAULT_ALPHA0,
        };
        let seq = Self {
            model,
            alpha0: alpha0.unwrap_or(default0),
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        Self::new(AlphaModel::Table { values, tail_exponent: None }, None)
    }

    pub fn table_with_tail(values: Vec<f64>, exponent: f64) -> Result<Self> {
        Self::new(
            AlphaModel::Table {
                values,
                tail_exponent: Some(exponent),
            },
            None,
        )
    }

    pub fn polynomial(c: f64, a: f64) -> Result<Self> {
        Self::new(AlphaModel::Polynomial { c, a }, None)
    }

    pub fn geometric(c: f64, ratio: f64) -> Result<Self> {
        Self::new(AlphaModel::Geometric { c, ratio }, None)
    }

    pub fn log_polynomial(c: f64, a: f64) -> Result<Self> {
        Self::new(AlphaModel::LogPolynomial { c, a }, None)
    }

    /// `α(0) = 1/4`, `α(k) = 0` for `k >= 1`.
    pub fn independent() -> Self {
        Self::table(vec![DEFAULT_ALPHA0]).expect("valid")
    }

    pub fn with_alpha0(mut self, alpha0: f64) -> Result<Self> {
        self.alpha0 = alpha0;
        if let AlphaModel::Table { values, .. } = &mut self.model {
            if let Some(v) = values.first_mut() {
                *v = alpha0;
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha0) {
            return Err(Error::invalid(format!("α(0) must lie in [0, 1], got {}", self.alpha0)));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match &self.model {
            AlphaModel::Table { values, tail_exponent } => {
                if values.is_empty() {
                    return Err(Error::invalid("α table is empty"));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) || values.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::invalid("α table must be nonincreasing in [0, 1]"));
                }
                if let Some(a) = tail_exponent {
                    positive("tail exponent", *a)?;
                    if values.len() < 2 {
                        return Err(Error::invalid("a power tail needs at least α(0) and α(1)"));
                    }
                }
            }
            AlphaModel::Polynomial { c, a } | AlphaModel::LogPolynomial { c, a } => {
                positive("α scale", *c)?;
                positive("α exponent", *a)?;
            }
            AlphaModel::Geometric { c, ratio } => {
                positive("α scale", *c)?;
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::invalid(format!("geometric ratio must lie in (0, 1), got {ratio}")));
                }
            }
        }
        Ok(())
    }

    /// Raw model value at integer `k >= 1`.
    fn model(&self, k: u64) -> f64 {
        let kf = k as f64;
        match &self.model {
            AlphaModel::Table { values, tail_exponent } => {
                let last = values.len() - 1;
                if (k as usize) <= last {
                    values[k as usize]
                } else {
                    match tail_exponent {
                        Some(a) => values[last] * (last as f64 / kf).powf(*a),
                        None => 0.0,
                    }
                }
            }
            AlphaModel::Polynomial { c, a } => c * kf.powf(-a),
            AlphaModel::Geometric { c, ratio } => c * ratio.powf(kf),
            AlphaModel::LogPolynomial { c, a } => {
                if k < 2 {
                    f64::INFINITY
                } else {
                    c / (kf * kf.ln().powf(*a))
                }
            }
        }
    }

    /// `α(k)`.
    pub fn alpha(&self, k: u64) -> f64 {
        if k == 0 {
            self.alpha0
        } else {
            self.alpha0.min(self.model(k))
        }
    }

    pub fn is_summable(&self) -> bool {
        match &self.model {
            AlphaModel::Table { tail_exponent, .. } => tail_exponent.map_or(true, |a| a > 1.0),
            AlphaModel::Polynomial { a, .. } | AlphaModel::LogPolynomial { a, .. } => *a > 1.0,
            AlphaModel::Geometric { .. } => true,
        }
    }

    /// Continuous estimate of the largest `k >= 1` with `model(k) >= u`.
    fn model_crossing(&self, u: f64) -> f64 {
        match &self.model {
            AlphaModel::Table { values, tail_exponent } => {
                let last = values.len() - 1;
                let in_table = values[1..].partition_point(|&v| v >= u) as f64;
                match tail_exponent {
                    Some(a) if values[last] >= u && values[last] > 0.0 => {
                        last as f64 * ((values[last].ln() - u.ln()) / a).exp()
                    }
                    _ => in_table,
                }
            }
            AlphaModel::Polynomial { c, a } => ((c.ln() - u.ln()) / a).exp(),
            AlphaModel::Geometric { c, ratio } => (u / c).ln() / ratio.ln(),
            AlphaModel::LogPolynomial { c, a } => {
                // Solve k ln^a k = c/u on k >= 2 in log scale.
                let target = c.ln() - u.ln();
                let g = |lk: f64| lk + a * lk.ln() - target;
                let (mut lo, mut hi) = (2f64.ln(), 2f64.ln());
                if g(lo) > 0.0 {
                    return 1.0;
                }
                while g(hi) < 0.0 {
                    hi *= 2.0;
                    if hi > 1e6 {
                        return f64::INFINITY;
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo.exp()
            }
        }
    }

    /// `#{k >= 1 : model(k) >= u}` (`> u` when `strict`).
    fn model_count(&self, u: f64, strict: bool) -> f64 {
        if u <= 0.0 && !strict {
            return f64::INFINITY;
        }
        let hit = |k: u64| {
            let v = self.model(k);
            if strict {
                v > u
            } else {
                v >= u
            }
        };
        let est = self.model_crossing(u);
        if !est.is_finite() || est >= EXACT_COUNT_LIMIT {
            return est.max(0.0);
        }
        let mut k = est.max(0.0).floor() as u64;
        while hit(k + 1) {
            k += 1;
        }
        while k >= 1 && !hit(k) {
            k -= 1;
        }
        k as f64
    }

    /// `#{k >= 0 : α(k) >= u}` (`> u` when `strict`).
    fn count(&self, u: f64, strict: bool) -> f64 {
        let head = if strict { self.alpha0 > u } else { self.alpha0 >= u };
        if !head {
            return 0.0;
        }
        1.0 + self.model_count(u, strict)
    }

    /// `α^{-1}(u) = #{k >= 0 : α(k) >= u}`; `+∞` for `u <= 0`.
    pub fn inverse(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::INFINITY;
        }
        self.count(u, false)
    }

    /// `min{q >= 1 : α(q) <= u}`.
    pub fn first_at_most(&self, u: f64) -> f64 {
        if self.alpha0 <= u {
            return 1.0;
        }
        1.0 + self.model_count(u, true)
    }

    /// `Σ_{k=from}^{to} model(k)` for `from >= 1` (`to = None` for the full tail).
    fn model_sum(&self, from: u64, to: Option<u64>) -> f64 {
        if let Some(t) = to {
            if t < from {
                return 0.0;
            }
        }
        // The log model carries only the first correction term.
        let direct = match self.model {
            _ if from as f64 >= EXACT_COUNT_LIMIT => 0,
            AlphaModel::LogPolynomial { .. } => 8 * DIRECT_TERMS,
            _ => DIRECT_TERMS,
        };
        let direct_end = from.saturating_add(direct);
        let direct_end = to.map_or(direct_end, |t| t.min(direct_end));
        let mut s: f64 = (from..=direct_end).map(|k| self.model(k)).sum();
        if to == Some(direct_end) {
            return s;
        }
        let start = direct_end + 1;
        s += match &self.model {
            AlphaModel::Geometric { c, ratio } => {
                let head = c * ratio.powf(start as f64) / (1.0 - ratio);
                match to {
                    Some(t) => head * (1.0 - ratio.powf((t - start + 1) as f64)),
                    None => head,
                }
            }
            AlphaModel::Polynomial { c, a } => euler_maclaurin_power(*c, *a, start as f64, to.map(|t| t as f64)),
            AlphaModel::Table { values, tail_exponent } => {
                let last = values.len() - 1;
                match tail_exponent {
                    Some(a) if start as usize > last => {
                        euler_maclaurin_power(values[last] * (last as f64).powf(*a), *a, start as f64, to.map(|t| t as f64))
                    }
                    Some(_) => {
                        // Still inside the table: sum the table part directly.
                        let table_end = to.map_or(last as u64, |t| t.min(last as u64));
                        let mut v: f64 = (start..=table_end).map(|k| self.model(k)).sum();
                        if to.map_or(true, |t| t > last as u64) {
                            v += self.model_sum(last as u64 + 1, to);
                        }
                        v
                    }
                    None => {
                        let end = to.map_or(last as u64, |t| t.min(last as u64));
                        (start..=end).map(|k| self.model(k)).sum()
                    }
                }
            }
            AlphaModel::LogPolynomial { c, a } => euler_maclaurin_log(*c, *a, start as f64, to.map(|t| t as f64)),
        };
        s
    }

    /// `Σ_{k=from}^{to} model(k)` for indices beyond the exact integer range.
    fn far_sum(&self, from: f64, to: Option<f64>) -> f64 {
        if to.is_some_and(|t| t < from) {
            return 0.0;
        }
        match &self.model {
            AlphaModel::Geometric { c, ratio } => {
                let head = c * ratio.powf(from) / (1.0 - ratio);
                to.map_or(head, |t| head * (1.0 - ratio.powf(t - from + 1.0)))
            }
            AlphaModel::Polynomial { c, a } => euler_maclaurin_power(*c, *a, from, to),
            AlphaModel::LogPolynomial { c, a } => euler_maclaurin_log(*c, *a, from, to),
            AlphaModel::Table { values, tail_exponent } => match tail_exponent {
                Some(a) => {
                    let last = values.len() - 1;
                    euler_maclaurin_power(values[last] * (last as f64).powf(*a), *a, from, to)
                }
                None => 0.0,
            },
        }
    }

    /// `Σ_{k=from}^{to} α(k)`; `to = None` sums the whole tail (possibly `+∞`).
    pub fn partial_sum(&self, from: u64, to: Option<u64>) -> f64 {
        if let Some(t) = to {
            if t < from {
                return 0.0;
            }
        }
        let mut s = 0.0;
        let mut k = from;
        if k == 0 {
            s += self.alpha0;
            k = 1;
        }
        // Indices where the α(0) cap is active.
        let capped = self.model_count(self.alpha0, true);
        if capped >= k as f64 {
            let end = to.map_or(capped, |t| (t as f64).min(capped));
            if !end.is_finite() {
                return f64::INFINITY;
            }
            s += self.alpha0 * (end - k as f64 + 1.0);
            if end + 1.0 >= EXACT_COUNT_LIMIT {
                return s + self.far_sum(end + 1.0, to.map(|t| t as f64));
            }
            k = end as u64 + 1;
        }
        if to.map_or(false, |t| k > t) {
            return s;
        }
        s + self.model_sum(k, to)
    }

    /// `Σ_{k=0}^{n} min{α(k), h}` (`n = None` for the infinite sum). Equals
    /// `∫_0^h α^{-1}`.
    pub fn level_sum(&self, h: f64, n: Option<u64>) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let j = self.count(h, false);
        let terms = n.map_or(f64::INFINITY, |n| (n + 1) as f64);
        if j >= terms {
            return terms * h;
        }
        if j >= EXACT_COUNT_LIMIT {
            return j * h + self.far_sum(j, n.map(|n| n as f64));
        }
        j * h + self.partial_sum(j as u64, n)
    }

    /// Cesàro mean `u_n = (1/n) Σ_{k=1}^n α(k)`.
    pub fn cesaro(&self, n: u64) -> f64 {
        self.partial_sum(1, Some(n)) / n as f64
    }

    pub fn label(&self) -> String {
        match &self.model {
            AlphaModel::Table { values, tail_exponent } => match tail_exponent {
                Some(a) => format!("table[{}]+k^-{a}", values.len()),
                None => format!("table[{}]", values.len()),
            },
            AlphaModel::Polynomial { c, a } => format!("{c}k^-{a}"),
            AlphaModel::Geometric { c, ratio } => format!("{c}*{ratio}^k"),
            AlphaModel::LogPolynomial { c, a } => format!("{c}/(k ln^{a} k)"),
        }
    }
}

fn euler_maclaurin_power(c: f64, a: f64, s: f64, t: Option<f64>) -> f64 {
    let f = |k: f64| c * k.powf(-a);
    let d1 = |k: f64| -a * c * k.powf(-a - 1.0);
    let d3 = |k: f64| -a * (a + 1.0) * (a + 2.0) * c * k.powf(-a - 3.0);
    let anti = |k: f64| {
        if (a - 1.0).abs() < 1e-14 {
            c * k.ln()
        } else {
            c * k.powf(1.0 - a) / (1.0 - a)
        }
    };
    let sf = s;
    match t {
        Some(t) => {
            let tf = t;
            anti(tf) - anti(sf) + 0.5 * (f(sf) + f(tf)) + (d1(tf) - d1(sf)) / 12.0 - (d3(tf) - d3(sf)) / 720.0
        }
        None => {
            if a <= 1.0 {
                return f64::INFINITY;
            }
            -anti(sf) + 0.5 * f(sf) - d1(sf) / 12.0 + d3(sf) / 720.0
        }
    }
}

fn euler_maclaurin_log(c: f64, a: f64, s: f64, t: Option<f64>) -> f64 {
    let f = |k: f64| c / (k * k.ln().powf(a));
    let d1 = |k: f64| {
        let l = k.ln();
        -c * (l + a) / (k * k * l.powf(a + 1.0))
    };
    let anti = |k: f64| {
        let l = k.ln();
        if (a - 1.0).abs() < 1e-14 {
            c * l.ln()
        } else {
            c * l.powf(1.0 - a) / (1.0 - a)
        }
    };
    let sf = s;
    match t {
        Some(t) => {
            let tf = t;
            anti(tf) - anti(sf) + 0.5 * (f(sf) + f(tf)) + (d1(tf) - d1(sf)) / 12.0
        }
        None => {
            if a <= 1.0 {
                return f64::INFINITY;
            }
            -anti(sf) + 0.5 * f(sf) - d1(sf) / 12.0
        }
    }
}

/// `α^{-1}(u)`.
pub fn alpha_inverse(seq: &AlphaSequence, u: f64) -> f64 {
    seq.inverse(u)
}

/// Tail function `H` together with its quantile `Q`.
#[derive(Debug, Clone)]
pub enum TailModel {
    /// `X_0 = 0`.
    Zero,
    /// `H(t) = 1` on `[0, m)`, 0 after.
    Bounded { m: f64 },
    /// `H(t) = min{1, (t/scale)^{-p}}`, `Q(u) = scale u^{-1/p}`.
    Pareto { p: f64, scale: f64 },
    /// `H(t) = e^{-rate t}`.
    Exponential { rate: f64 },
    Law(Arc<dyn ReferenceLaw>),
}

impl TailModel {
    /// Tail model whose quantile is `Q(u) = scale u^{-c}`.
    pub fn power_quantile(c: f64, scale: f64) -> Result<Self> {
        if !(c >= 0.0 && scale > 0.0) {
            return Err(Error::invalid("power quantile needs c >= 0 and scale > 0"));
        }
        Ok(if c == 0.0 {
            TailModel::Bounded { m: scale }
        } else {
            TailModel::Pareto { p: 1.0 / c, scale }
        })
    }

    pub fn h(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match self {
            TailModel::Zero => 0.0,
            TailModel::Bounded { m } => {
                if t < *m {
                    1.0
                } else {
                    0.0
                }
            }
            TailModel::Pareto { p, scale } => {
                if t <= *scale {
                    1.0
                } else {
                    (t / scale).powf(-p)
                }
            }
            TailModel::Exponential { rate } => (-rate * t).exp(),
            TailModel::Law(law) => law.tail(t),
        }
    }

    pub fn q(&self, u: f64) -> f64 {
        match self {
            TailModel::Zero => 0.0,
            TailModel::Bounded { m } => {
                if u < 1.0 {
                    *m
                } else {
                    0.0
                }
            }
            TailModel::Pareto { p, scale } => {
                if u >= 1.0 {
                    0.0
                } else {
                    scale * u.powf(-1.0 / p)
                }
            }
            TailModel::Exponential { rate } => (-u.ln() / rate).max(0.0),
            TailModel::Law(law) => law.quantile(u),
        }
    }

    /// Point beyond which `H` vanishes (may be infinite).
    pub fn t_max(&self) -> f64 {
        match self {
            TailModel::Zero => 0.0,
            TailModel::Bounded { m } => *m,
            TailModel::Pareto { .. } | TailModel::Exponential { .. } => f64::INFINITY,
            TailModel::Law(law) => {
                let (lo, hi) = law.support();
                lo.abs().max(hi.abs())
            }
        }
    }

    /// Scale used to split integrals over `t` into a head and a tail.
    fn t_scale(&self) -> f64 {
        match self {
            TailModel::Pareto { scale, .. } => *scale,
            TailModel::Exponential { rate } => 1.0 / rate,
            _ => 1.0,
        }
    }

    /// Supremum of the orders `r` with `E|X_0|^r < ∞`.
    pub fn moment_sup(&self) -> f64 {
        match self {
            TailModel::Pareto { p, .. } => *p,
            TailModel::Law(law) => {
                if law.support().1.is_finite() && law.support().0.is_finite() {
                    return f64::INFINITY;
                }
                let mut r = 0.0;
                while r < 64.0 && law.finite_moment(r + 0.125) {
                    r += 0.125;
                }
                if r >= 64.0 {
                    f64::INFINITY
                } else {
                    r + 0.125
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// `∫_0^a Q^p` in closed form when available.
    fn q_power_integral(&self, p: f64, a: f64) -> Option<f64> {
        match self {
            TailModel::Zero => Some(0.0),
            TailModel::Bounded { m } => Some(m.powf(p) * a.min(1.0)),
            TailModel::Pareto { p: p0, scale } => {
                let e = 1.0 - p / p0;
                if e <= 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(scale.powf(p) * a.min(1.0).powf(e) / e)
                }
            }
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            TailModel::Zero => "zero".into(),
            TailModel::Bounded { m } => format!("bounded:{m}"),
            TailModel::Pareto { p, scale } => format!("pareto:{p}:{scale}"),
            TailModel::Exponential { rate } => format!("exponential:{rate}"),
            TailModel::Law(law) => law.name(),
        }
    }
}

fn quad() -> Quadrature {
    Quadrature {
        rel_tol: 1e-7,
        max_panels: 20_000,
        ..Quadrature::default()
    }
}

/// `∫_0^∞ f(t) dt` where `f` vanishes beyond `tail.t_max()`.
fn integrate_t<F: Fn(f64) -> f64>(f: F, tail: &TailModel) -> Result<f64> {
    let q = quad();
    let t_max = tail.t_max();
    if t_max <= 0.0 {
        return Ok(0.0);
    }
    if t_max.is_finite() {
        return Ok(q.integrate(&f, 0.0, t_max).value);
    }
    let s = tail.t_scale();
    Ok(q.integrate(&f, 0.0, s).value + q.improper_at_infinity(&f, s)?)
}

/// `∫_lo^hi f` on geometric panels, for integrands singular near 0.
fn integrate_log_panels<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let q = quad();
    let mut total = 0.0;
    let mut b = hi;
    while b > lo {
        let a = (0.5 * b).max(lo);
        total += q.integrate(&f, a, b).value;
        b = a;
    }
    total
}

/// `∫_0^hi f` for integrands possibly singular at 0, with divergence detection.
fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, hi: f64) -> Result<f64> {
    if hi <= 0.0 {
        return Ok(0.0);
    }
    quad().improper_at_zero(f, hi)
}

/// As [`integrate_from_zero`] for integrands built from the step function
/// `α^{-1}`; a small panel budget per shell keeps the jumps from absorbing it.
fn integrate_steps_from_zero<F: Fn(f64) -> f64>(f: F, hi: f64) -> Result<f64> {
    if hi <= 0.0 {
        return Ok(0.0);
    }
    Quadrature {
        rel_tol: 1e-6,
        max_panels: 48,
        ..Quadrature::default()
    }
    .improper_at_zero(f, hi)
}

/// `S_{α,n}(t)`.
pub fn s_alpha_n(seq: &AlphaSequence, tail: &TailModel, t: f64, n: u64) -> f64 {
    seq.level_sum(tail.h(t), Some(n))
}

/// `E W_1(μ_n, μ) <= 4 ∫_0^∞ sqrt(min{H(t)^2, S_{α,n}(t)/n}) dt`.
pub fn bound_mean_w1(seq: &AlphaSequence, tail: &TailModel, n: u64) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    let v = integrate_t(
        |t| {
            let h = tail.h(t);
            (h * h).min(seq.level_sum(h, Some(n)) / nf).sqrt()
        },
        tail,
    )?;
    Ok(4.0 * v)
}

/// `‖W_1(μ_n, μ)‖_2 <= (2√2/√n) ∫_0^∞ sqrt(S_{α,n}(t)) dt`.
pub fn bound_l2_w1(seq: &AlphaSequence, tail: &TailModel, n: u64) -> Result<f64> {
    check_n(n)?;
    Ok(2.0 * 2f64.sqrt() / (n as f64).sqrt() * s_integral(seq, tail, Some(n))?)
}

/// `s_{α,n} = ∫_0^∞ sqrt(S_{α,n}(t)) dt` (`n = None` for `S_∞`).
pub fn s_integral(seq: &AlphaSequence, tail: &TailModel, n: Option<u64>) -> Result<f64> {
    integrate_t(|t| seq.level_sum(tail.h(t), n).sqrt(), tail)
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("sample size must be positive"))
    } else {
        Ok(())
    }
}

/// `u_n = (1/n) Σ_{k=1}^n α(k)`.
pub fn u_n_cesaro(seq: &AlphaSequence, n: u64) -> Result<f64> {
    check_n(n)?;
    Ok(seq.cesaro(n))
}

/// Quantile-integral rate bounds for the mean and the L² norm, up to constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub mean: f64,
    pub l2: f64,
}

/// Polynomial decay `α(k) = O(k^{-a})`, `a > 1`:
/// mean `∫_0^{n^{-a/(a+1)}} Q + n^{-1/2} ∫_{n^{-a/(a+1)}}^1 Q u^{-(a+1)/(2a)}`,
/// L² `∫_0^{n^{-a}} Q u^{-1/2} + n^{-1/2} ∫_{n^{-a}}^1 Q u^{-(a+1)/(2a)}`.
pub fn rate_poly(a: f64, tail: &TailModel, n: u64) -> Result<RateBound> {
    check_n(n)?;
    if !(a > 1.0) {
        return Err(Error::invalid(format!("polynomial rate needs a > 1, got {a}")));
    }
    let nf = n as f64;
    let q = |u: f64| tail.q(u);
    let w = (a + 1.0) / (2.0 * a);
    let tail_part = |lo: f64| integrate_log_panels(|u| q(u) * u.powf(-w), lo, 1.0) / nf.sqrt();
    let cut_mean = nf.powf(-a / (a + 1.0));
    let cut_l2 = nf.powf(-a);
    let mean = integrate_from_zero(q, cut_mean)? + tail_part(cut_mean);
    let l2 = integrate_from_zero(|u| q(u) / u.sqrt(), cut_l2)? + tail_part(cut_l2);
    Ok(RateBound { mean, l2 })
}

/// Geometric decay: mean `∫_0^{ln n/n} Q + n^{-1/2} ∫_{ln n/n}^1 Q |ln u| u^{-1/2}`,
/// L² `∫_0^{e^{-n}} Q u^{-1/2} + n^{-1/2} ∫_{e^{-n}}^1 Q |ln u| u^{-1/2}`.
pub fn rate_geo(tail: &TailModel, n: u64) -> Result<RateBound> {
    if n < 2 {
        return Err(Error::invalid("geometric rate needs n >= 2"));
    }
    let nf = n as f64;
    let q = |u: f64| tail.q(u);
    let g = |u: f64| q(u) * u.ln().abs() / u.sqrt();
    let cut_mean = nf.ln() / nf;
    let mean = integrate_from_zero(q, cut_mean)? + integrate_log_panels(g, cut_mean, 1.0) / nf.sqrt();
    let cut_l2 = (-nf).exp();
    let l2 = if cut_l2 > 0.0 {
        integrate_from_zero(|u| q(u) / u.sqrt(), cut_l2)? + integrate_log_panels(g, cut_l2, 1.0) / nf.sqrt()
    } else {
        integrate_from_zero(g, 1.0)? / nf.sqrt()
    };
    Ok(RateBound { mean, l2 })
}

/// Non-summable coefficients: mean `∫_0^{sqrt(u_n)} Q`, L² `∫_0^{u_n} Q u^{-1/2}`.
pub fn rate_nonsummable(seq: &AlphaSequence, tail: &TailModel, n: u64) -> Result<RateBound> {
    let un = u_n_cesaro(seq, n)?.min(1.0);
    let q = |u: f64| tail.q(u);
    Ok(RateBound {
        mean: integrate_from_zero(q, un.sqrt())?,
        l2: integrate_from_zero(|u| q(u) / u.sqrt(), un)?,
    })
}

/// `R_n(u) = (min{q >= 1 : α(q) <= u} ∧ n) Q(u)`.
pub fn r_n(seq: &AlphaSequence, tail: &TailModel, u: f64, n: u64) -> f64 {
    let q = tail.q(u);
    if q == 0.0 {
        return 0.0;
    }
    seq.first_at_most(u).min(n as f64) * q
}

/// `R_n^{-1}(x) = inf{u ∈ [0, 1] : R_n(u) <= x}` by bisection on the
/// nonincreasing `R_n`.
pub fn r_n_inverse(seq: &AlphaSequence, tail: &TailModel, x: f64, n: u64) -> f64 {
    let r = |u: f64| r_n(seq, tail, u, n);
    if r(f64::MIN_POSITIVE) <= x {
        return 0.0;
    }
    if r(1.0) > x {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if r(mid) <= x {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `∫_0^a Q^p`.
fn q_power_integral(tail: &TailModel, p: f64, a: f64) -> Result<f64> {
    if a <= 0.0 {
        return Ok(0.0);
    }
    match tail.q_power_integral(p, a) {
        Some(v) if v.is_finite() => Ok(v),
        Some(_) => Err(Error::Divergent(format!("∫ Q^{p} diverges for {}", tail.label()))),
        None => integrate_from_zero(|u| tail.q(u).powf(p), a.min(1.0)),
    }
}

/// von Bahr–Esseen bound in its two equivalent forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VbeBound {
    /// `n^{1-p} ∫_0^1 (α^{-1}(u) ∧ n)^{p-1} Q^p(u) du`, by quadrature between the jumps of `α^{-1}`.
    pub integral_form: f64,
    /// `n^{1-p} Σ_{k=0}^{n-1} ((k+1)^{p-1} - k^{p-1}) ∫_0^{α(k)} Q^p`.
    pub sum_form: f64,
}

fn vbe_integral_form(seq: &AlphaSequence, tail: &TailModel, p: f64, n: u64) -> Result<f64> {
    // On (α(k), α(k-1)] the count α^{-1} equals k; below α(n-1) it is >= n.
    let qp = |u: f64| tail.q(u).powf(p);
    let q = quad();
    let mut total = 0.0;
    let mut upper = seq.alpha(0).min(1.0);
    for k in 1..n {
        let lower = seq.alpha(k);
        if lower < upper {
            total += (k as f64).powf(p - 1.0) * q.integrate(qp, lower, upper).value;
        }
        upper = lower;
        if upper <= 0.0 {
            break;
        }
    }
    if upper > 0.0 {
        total += (n as f64).powf(p - 1.0) * integrate_from_zero(qp, upper)?;
    }
    Ok(total)
}

fn vbe_sum_form(seq: &AlphaSequence, tail: &TailModel, p: f64, n: u64) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..n {
        let a = seq.alpha(k);
        if a <= 0.0 {
            break;
        }
        let w = ((k + 1) as f64).powf(p - 1.0) - (k as f64).powf(p - 1.0);
        total += w * q_power_integral(tail, p, a)?;
    }
    Ok(total)
}

/// `‖W_1‖_p^p ≪ n^{1-p} ∫_0^1 (α^{-1}(u) ∧ n)^{p-1} Q^p(u) du` for `p ∈ (1, 2)`.
pub fn bound_vbe(seq: &AlphaSequence, tail: &TailModel, p: f64, n: u64) -> Result<VbeBound> {
    check_n(n)?;
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::invalid(format!("von Bahr–Esseen order must lie in (1, 2), got {p}")));
    }
    let scale = (n as f64).powf(1.0 - p);
    Ok(VbeBound {
        integral_form: scale * vbe_integral_form(seq, tail, p, n)?,
        sum_form: scale * vbe_sum_form(seq, tail, p, n)?,
    })
}

/// Tail bound for `P(n W_1 >= 6x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub value: f64,
    /// `value` clipped to `[0, 1]`.
    pub probability: f64,
    /// `R_n^{-1}(x)`.
    pub split: f64,
}

pub const TAIL_C1: f64 = 36.0;

/// `c_1 (n/x) ∫_0^{v} Q + c_2 (n/x^η) ∫_v^1 R_n^{η-1} Q` with `v = R_n^{-1}(x)`,
/// `c_1 = 36`, `c_2 = 64/(2-η)`.
pub fn tail_bound_vbe(seq: &AlphaSequence, tail: &TailModel, n: u64, x: f64, eta: f64) -> Result<TailBound> {
    check_n(n)?;
    if !(x > 0.0) {
        return Err(Error::invalid(format!("tail bound needs x > 0, got {x}")));
    }
    if !(1.0..2.0).contains(&eta) {
        return Err(Error::invalid(format!("η must lie in [1, 2), got {eta}")));
    }
    let c2 = 64.0 / (2.0 - eta);
    let nf = n as f64;
    let v = r_n_inverse(seq, tail, x, n);
    let head = q_power_integral(tail, 1.0, v)?;
    // R_n jumps where α(q) crosses u; use those as knots.
    let mut knots = vec![v];
    for k in 1..n.min(100_000) {
        let a = seq.alpha(k);
        if a <= v {
            break;
        }
        if a < 1.0 {
            knots.push(a);
        }
    }
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let integrand = |u: f64| r_n(seq, tail, u, n).powf(eta - 1.0) * tail.q(u);
    let body = if v > 0.0 {
        quad().integrate_knots(integrand, &knots).value
    } else {
        // R_n^{-1}(x) = 0: the second integral starts at the singular end.
        integrate_from_zero(integrand, knots.get(1).copied().unwrap_or(1.0))? + {
            let rest: Vec<f64> = knots[1..].to_vec();
            if rest.len() >= 2 {
                quad().integrate_knots(integrand, &rest).value
            } else {
                0.0
            }
        }
    };
    let value = TAIL_C1 * nf / x * head + c2 * nf / x.powf(eta) * body;
    Ok(TailBound {
        value,
        probability: value.clamp(0.0, 1.0),
        split: v,
    })
}

/// The two terms of the Rosenthal-type bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosenthalBound {
    /// `s_{α,n}^p / n^{p/2}`.
    pub variance_term: f64,
    /// `n^{1-p} ∫_0^1 (α_2^{-1}(u) ∧ n)^{p-1} Q^p(u) du`.
    pub moment_term: f64,
}

impl RosenthalBound {
    pub fn total(&self) -> f64 {
        self.variance_term + self.moment_term
    }
}

/// `‖W_1‖_p^p ≪ s_{α,n}^p / n^{p/2} + n^{1-p} ∫ (α_2^{-1} ∧ n)^{p-1} Q^p` for `p > 2`.
/// `seq1` drives `S_{α,n}`, `seq2` the second-order coefficients.
pub fn bound_rosenthal(
    seq1: &AlphaSequence,
    seq2: &AlphaSequence,
    tail: &TailModel,
    p: f64,
    n: u64,
) -> Result<RosenthalBound> {
    check_n(n)?;
    if !(p > 2.0) {
        return Err(Error::invalid(format!("Rosenthal order must exceed 2, got {p}")));
    }
    let nf = n as f64;
    let s = s_integral(seq1, tail, Some(n))?;
    Ok(RosenthalBound {
        variance_term: s.powf(p) / nf.powf(p / 2.0),
        moment_term: nf.powf(1.0 - p) * vbe_integral_form(seq2, tail, p, n)?,
    })
}

/// Side of the interval where the observable is singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Zero,
    One,
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "0" => Ok(Side::Zero),
            "one" | "1" => Ok(Side::One),
            _ => Err(Error::invalid(format!("side must be `zero` or `one`, got `{s}`"))),
        }
    }
}

/// Which norm of `W_1(μ_n, μ)` a prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Statistic {
    MeanW1,
    L2W1,
    /// `‖W_1‖_p` for `p ∈ (1, 2)`.
    LpW1(f64),
    /// `‖W_1‖_p` for `p > 2`.
    Rosenthal(f64),
}

impl Statistic {
    /// Moment order `p` such that the statistic is `(E W_1^p)^{1/p}`.
    pub fn order(&self) -> f64 {
        match self {
            Statistic::MeanW1 => 1.0,
            Statistic::L2W1 => 2.0,
            Statistic::LpW1(p) | Statistic::Rosenthal(p) => *p,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::MeanW1 => f.write_str("mean_w1"),
            Statistic::L2W1 => f.write_str("l2_w1"),
            Statistic::LpW1(p) => write!(f, "lp_w1:{p}"),
            Statistic::Rosenthal(p) => write!(f, "rosenthal:{p}"),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = s.split_once(':').unwrap_or((s, ""));
        let p = || -> Result<f64> {
            arg.parse()
                .map_err(|_| Error::invalid(format!("statistic `{s}` needs an order, e.g. `{head}:1.5`")))
        };
        match head {
            "mean_w1" if arg.is_empty() => Ok(Statistic::MeanW1),
            "l2_w1" if arg.is_empty() => Ok(Statistic::L2W1),
            "lp_w1" => {
                let p = p()?;
                if !(p > 1.0 && p < 2.0) {
                    return Err(Error::invalid(format!("lp_w1 order must lie in (1, 2), got {p}")));
                }
                Ok(Statistic::LpW1(p))
            }
            "rosenthal" => {
                let p = p()?;
                if !(p > 2.0) {
                    return Err(Error::invalid(format!("rosenthal order must exceed 2, got {p}")));
                }
                Ok(Statistic::Rosenthal(p))
            }
            _ => Err(Error::invalid(format!("unknown statistic `{s}`"))),
        }
    }
}

impl TryFrom<String> for Statistic {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Statistic> for String {
    fn from(s: Statistic) -> String {
        s.to_string()
    }
}

/// Predicted decay `n^{exponent} (ln n)^{log_power}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub exponent: f64,
    pub log_power: f64,
    pub regime: String,
}

const BOUNDARY_TOL: f64 = 1e-12;

fn rate(exponent: f64, log_power: f64, regime: impl Into<String>) -> Result<RatePrediction> {
    Ok(RatePrediction {
        exponent,
        log_power,
        regime: regime.into(),
    })
}

fn no_prediction(msg: impl Into<String>) -> Result<RatePrediction> {
    Err(Error::NoPrediction(msg.into()))
}

/// Three-way comparison with a tolerance for the boundary case.
fn compare(b: f64, threshold: f64) -> std::cmp::Ordering {
    if (b - threshold).abs() <= BOUNDARY_TOL {
        std::cmp::Ordering::Equal
    } else if b < threshold {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Greater
    }
}

/// Rate of the statistic for the intermittent-map example with observable
/// `g ≍ C x^{-b}` (side zero, `g` nonincreasing) or `g ≍ C (1-x)^{-b}`
/// (side one, `g` nondecreasing).
pub fn predicted_rate(gamma: f64, b: f64, side: Side, statistic: Statistic) -> Result<RatePrediction> {
    use std::cmp::Ordering::*;
    if !(gamma > 0.0 && gamma < 1.0) {
        return no_prediction(format!("γ = {gamma} lies outside (0, 1)"));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return no_prediction(format!("b = {b} must be nonnegative"));
    }
    let g = gamma;
    match (side, statistic) {
        (Side::Zero, Statistic::MeanW1) => {
            if b >= 1.0 - g {
                return no_prediction(format!("mean rate needs b < 1 - γ = {}", 1.0 - g));
            }
            match compare(g, 0.5) {
                Less => match compare(b, (1.0 - 2.0 * g) / 2.0) {
                    Less => rate(-0.5, 0.0, "zero/γ<1/2/b<(1-2γ)/2"),
                    Equal => rate(-0.5, 1.0, "zero/γ<1/2/b=(1-2γ)/2"),
                    Greater => rate(b + g - 1.0, 0.0, "zero/γ<1/2/b>(1-2γ)/2"),
                },
                Equal => rate(-(1.0 - 2.0 * b) / 2.0, (1.0 - 2.0 * b) / 2.0, "zero/γ=1/2"),
                Greater => rate((b + g - 1.0) / (2.0 * g), 0.0, "zero/γ>1/2"),
            }
        }
        (Side::Zero, Statistic::L2W1) => match compare(g, 0.5) {
            Less => {
                if compare(b, (1.0 - g) / 2.0) != Less {
                    return no_prediction(format!("L² rate needs b < (1 - γ)/2 = {}", (1.0 - g) / 2.0));
                }
                match compare(b, (1.0 - 2.0 * g) / 2.0) {
                    Less => rate(-0.5, 0.0, "zero/γ<1/2/b<(1-2γ)/2"),
                    Equal => rate(-0.5, 1.0, "zero/γ<1/2/b=(1-2γ)/2"),
                    Greater => rate((2.0 * b + g - 1.0) / (2.0 * g), 0.0, "zero/γ<1/2/(1-2γ)/2<b<(1-γ)/2"),
                }
            }
            Equal => {
                if compare(b, 0.25) != Less {
                    return no_prediction("L² rate at γ = 1/2 needs b < 1/4");
                }
                rate(-(1.0 - 4.0 * b) / 2.0, (1.0 - 4.0 * b) / 2.0, "zero/γ=1/2")
            }
            Greater => {
                if compare(b, (1.0 - g) / 2.0) != Less {
                    return no_prediction(format!("L² rate needs b < (1 - γ)/2 = {}", (1.0 - g) / 2.0));
                }
                rate((2.0 * b + g - 1.0) / (2.0 * g), 0.0, "zero/γ>1/2")
            }
        },
        (Side::One, Statistic::MeanW1) => {
            if b >= 1.0 {
                return no_prediction("mean rate needs b < 1");
            }
            match compare(g, 0.5) {
                Less => match compare(b, (1.0 - 2.0 * g) / (2.0 * (1.0 - g))) {
                    Less => rate(-0.5, 0.0, "one/γ<1/2/b<(1-2γ)/2(1-γ)"),
                    Equal => rate(-0.5, 1.0, "one/γ<1/2/b=(1-2γ)/2(1-γ)"),
                    Greater => rate((g - 1.0) * (1.0 - b), 0.0, "one/γ<1/2/b>(1-2γ)/2(1-γ)"),
                },
                Equal => rate(-(1.0 - b) / 2.0, (1.0 - b) / 2.0, "one/γ=1/2"),
                Greater => rate((g - 1.0) * (1.0 - b) / (2.0 * g), 0.0, "one/γ>1/2"),
            }
        }
        (Side::One, Statistic::L2W1) => {
            if compare(b, 0.5) != Less {
                return no_prediction("L² rate needs b < 1/2");
            }
            match compare(g, 0.5) {
                Less => match compare(b, (1.0 - 2.0 * g) / (2.0 * (1.0 - g))) {
                    Less => rate(-0.5, 0.0, "one/γ<1/2/b<(1-2γ)/2(1-γ)"),
                    Equal => rate(-0.5, 1.0, "one/γ<1/2/b=(1-2γ)/2(1-γ)"),
                    Greater => rate((g - 1.0) * (1.0 - 2.0 * b) / (2.0 * g), 0.0, "one/γ<1/2/b>(1-2γ)/2(1-γ)"),
                },
                Equal => rate(-(1.0 - 2.0 * b) / 2.0, (1.0 - 2.0 * b) / 2.0, "one/γ=1/2"),
                Greater => rate((g - 1.0) * (1.0 - 2.0 * b) / (2.0 * g), 0.0, "one/γ>1/2"),
            }
        }
        (side, Statistic::LpW1(p)) => {
            if !(p > 1.0 && p < 2.0) {
                return no_prediction(format!("von Bahr–Esseen order must lie in (1, 2), got {p}"));
            }
            let (limit, threshold, slow) = match side {
                Side::Zero => ((1.0 - g) / p, (1.0 - p * g) / p, (p * b + g - 1.0) / (p * g)),
                Side::One => (1.0 / p, (1.0 - p * g) / (p * (1.0 - g)), (g - 1.0) * (1.0 - p * b) / (p * g)),
            };
            if compare(b, limit) != Less {
                return no_prediction(format!("Lp rate needs b < {limit}"));
            }
            let tag = if side == Side::Zero { "zero" } else { "one" };
            if compare(g, 1.0 / p) != Less {
                return rate(slow, 0.0, format!("{tag}/p={p}/γ>=1/p"));
            }
            match compare(b, threshold) {
                Less => rate((1.0 - p) / p, 0.0, format!("{tag}/p={p}/γ<1/p/below")),
                Equal => rate((1.0 - p) / p, 1.0 / p, format!("{tag}/p={p}/γ<1/p/boundary")),
                Greater => rate(slow, 0.0, format!("{tag}/p={p}/γ<1/p/above")),
            }
        }
        (side, Statistic::Rosenthal(p)) => {
            if !(p > 2.0) {
                return no_prediction(format!("Rosenthal order must exceed 2, got {p}"));
            }
            let (limit, threshold, slow) = match side {
                Side::Zero => (
                    (1.0 - g) / p,
                    (2.0 - g * (p + 2.0)) / (2.0 * p),
                    (p * b + g - 1.0) / (p * g),
                ),
                Side::One => (
                    1.0 / p,
                    (2.0 - g * (p + 2.0)) / (2.0 * p * (1.0 - g)),
                    (g - 1.0) * (1.0 - p * b) / (p * g),
                ),
            };
            if compare(b, limit) != Less {
                return no_prediction(format!("Rosenthal rate needs b < {limit}"));
            }
            let tag = if side == Side::Zero { "zero" } else { "one" };
            if compare(g, 0.5) != Less {
                return rate(slow, 0.0, format!("{tag}/p={p}/γ>=1/2"));
            }
            if compare(b, threshold) != Greater {
                rate(-0.5, 0.0, format!("{tag}/p={p}/γ<1/2/b<=threshold"))
            } else {
                rate(slow, 0.0, format!("{tag}/p={p}/γ<1/2/above"))
            }
        }
    }
}

/// Rates for independent sequences with bounded values.
pub fn predicted_rate_iid(statistic: Statistic) -> RatePrediction {
    let exponent = match statistic {
        Statistic::MeanW1 | Statistic::L2W1 | Statistic::Rosenthal(_) => -0.5,
        Statistic::LpW1(p) => (1.0 - p) / p,
    };
    RatePrediction {
        exponent,
        log_power: 0.0,
        regime: "iid".into(),
    }
}

/// Input to [`clt_condition_check`].
#[derive(Debug, Clone)]
pub enum CltInput {
    /// Observable `g ≍ C s^{-b} |ln s|^{-log_exponent}` near the singular end `s = 0`.
    Observable {
        b: f64,
        side: Side,
        log_exponent: Option<f64>,
    },
    Tail(TailModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltVerdict {
    pub holds: bool,
    /// `κ = (1-2γ)/(2(1-γ))`, the power of `H` in the condition.
    pub kappa: f64,
    pub method: String,
}

/// Checks `∫_0^∞ H(t)^{(1-2γ)/(2(1-γ))} dt < ∞` for `γ ∈ (0, 1/2)`.
pub fn clt_condition_check(gamma: f64, input: &CltInput) -> Result<CltVerdict> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::invalid(format!("CLT condition requires γ < 1/2 (and γ > 0), got {gamma}")));
    }
    let kappa = (1.0 - 2.0 * gamma) / (2.0 * (1.0 - gamma));
    match input {
        CltInput::Observable { b, side, log_exponent } => {
            let threshold = match side {
                Side::Zero => (1.0 - 2.0 * gamma) / 2.0,
                Side::One => kappa,
            };
            let holds = match compare(*b, threshold) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Equal => log_exponent.map_or(false, |bp| bp > 1.0),
                std::cmp::Ordering::Greater => false,
            };
            Ok(CltVerdict {
                holds,
                kappa,
                method: "closed_form".into(),
            })
        }
        CltInput::Tail(tail) => {
            let holds = match integrate_t(|t| tail.h(t).powf(kappa), tail) {
                Ok(v) => v.is_finite(),
                Err(Error::Divergent(_)) => false,
                Err(e) => return Err(e),
            };
            Ok(CltVerdict {
                holds,
                kappa,
                method: "numeric".into(),
            })
        }
    }
}

/// Values of the three quantile integrals and their finiteness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub dmr: bool,
    pub dm: bool,
    pub d: bool,
    pub dmr_value: f64,
    pub dm_value: f64,
    pub d_value: f64,
}

impl QuantileReport {
    /// `D ⇒ DM ⇒ DMR` on the verdicts.
    pub fn hierarchy_holds(&self) -> bool {
        (!self.d || self.dm) && (!self.dm || self.dmr)
    }
}

fn finite_or_divergent(r: Result<f64>) -> Result<(bool, f64)> {
    match r {
        Ok(v) if v.is_finite() => Ok((true, v)),
        Ok(_) | Err(Error::Divergent(_)) => Ok((false, f64::INFINITY)),
        Err(e) => Err(e),
    }
}

/// Evaluates
/// `DMR: ∫_0^1 α^{-1} Q^2`, `DM: ∫_0^1 α^{-1} Q / sqrt(∫_0^u α^{-1})`,
/// `D: ∫_0^1 sqrt(α^{-1}) Q / sqrt(u)`, each declared finite or divergent.
pub fn quantile_conditions(seq: &AlphaSequence, tail: &TailModel) -> Result<QuantileReport> {
    let top = seq.alpha(0).min(1.0);
    let q_vanishes = tail.q(1e-300) == 0.0;
    if q_vanishes || top <= 0.0 {
        return Ok(QuantileReport {
            dmr: true,
            dm: true,
            d: true,
            dmr_value: 0.0,
            dm_value: 0.0,
            d_value: 0.0,
        });
    }
    let inv = |u: f64| seq.inverse(u);
    let (dmr, dmr_value) = finite_or_divergent(integrate_steps_from_zero(|u| inv(u) * tail.q(u).powi(2), top))?;
    let (dm, dm_value) = if seq.is_summable() {
        finite_or_divergent(integrate_steps_from_zero(
            |u| {
                let g = seq.level_sum(u, None);
                if g > 0.0 {
                    inv(u) * tail.q(u) / g.sqrt()
                } else {
                    0.0
                }
            },
            top,
        ))?
    } else {
        (false, f64::INFINITY)
    };
    let (d, d_value) = finite_or_divergent(integrate_steps_from_zero(|u| inv(u).sqrt() * tail.q(u) / u.sqrt(), top))?;
    Ok(QuantileReport {
        dmr,
        dm,
        d,
        dmr_value,
        dm_value,
        d_value,
    })
}

/// Both sides of `∫_0^∞ sqrt(S_∞(t)) dt = ∫_0^{G(1)} Q(G^{-1}(v)) dv`,
/// `G(x) = sqrt(∫_0^x α^{-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
}

pub fn equiv_identity_check(seq: &AlphaSequence, tail: &TailModel) -> Result<IdentityCheck> {
    if !seq.is_summable() {
        return Err(Error::Divergent("α is not summable, so S_∞ is infinite".into()));
    }
    let lhs = s_integral(seq, tail, None)?;
    let g = |x: f64| seq.level_sum(x, None).sqrt();
    let g1 = g(1.0);
    let g_inv = |v: f64| -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let rhs = integrate_from_zero(|v| tail.q(g_inv(v)), g1)?;
    let discrepancy = if lhs > 0.0 {
        (lhs - rhs).abs() / lhs
    } else {
        rhs.abs()
    };
    Ok(IdentityCheck { lhs, rhs, discrepancy })
}

/// Verdicts of the five sufficient conditions for DM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientReport {
    pub items: [bool; 5],
    /// DM verdict of [`quantile_conditions`].
    pub dm: bool,
}

impl SufficientReport {
    /// Any item true must come with DM true.
    pub fn consistent(&self) -> bool {
        !self.items.iter().any(|&x| x) || self.dm
    }
}

/// Decay exponent used for "faster than any power" sequences.
pub const LARGE_DECAY_EXPONENT: f64 = 50.0;

/// Functionals `∫_0^∞ φ(H(t)) dt` appearing in the sufficient conditions.
#[derive(Debug, Clone, Copy)]
enum TailFunctional {
    /// `φ(h) = h^e`.
    Power(f64),
    /// `φ(h) = ln(1 + 1/h)^{-e}`.
    InverseLog(f64),
    /// `φ(h) = sqrt(h |ln h|)`.
    RootEntropy,
}

impl TailFunctional {
    fn apply(self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        match self {
            TailFunctional::Power(e) => h.powf(e),
            TailFunctional::InverseLog(e) => (1.0 + 1.0 / h).ln().powf(-e),
            TailFunctional::RootEntropy => (h * h.ln().abs()).sqrt(),
        }
    }
}

/// Finiteness of `∫_0^∞ φ(H)`: closed form for the parametric tails,
/// quadrature with the divergence probe otherwise.
fn tail_integral_finite(tail: &TailModel, phi: TailFunctional) -> Result<bool> {
    match tail {
        TailModel::Zero | TailModel::Bounded { .. } => Ok(true),
        // H = t^{-p}: t^{-pe}, (p ln t)^{-e}, sqrt(p ln t) t^{-p/2}.
        TailModel::Pareto { p, .. } => Ok(match phi {
            TailFunctional::Power(e) => p * e > 1.0,
            TailFunctional::InverseLog(_) => false,
            TailFunctional::RootEntropy => *p > 2.0,
        }),
        // H = e^{-rt}: e^{-ret}, (rt)^{-e}, sqrt(rt) e^{-rt/2}.
        TailModel::Exponential { .. } => Ok(match phi {
            TailFunctional::Power(e) => e > 0.0,
            TailFunctional::InverseLog(e) => e > 1.0,
            TailFunctional::RootEntropy => true,
        }),
        TailModel::Law(_) => Ok(finite_or_divergent(integrate_t(|t| phi.apply(tail.h(t)), tail))?.0),
    }
}

/// Evaluates the five parametric sufficient conditions.
pub fn sufficient_conditions(seq: &AlphaSequence, tail: &TailModel) -> Result<SufficientReport> {
    let moment = tail.moment_sup();
    let light = moment.is_infinite();
    // (kind of decay, polynomial exponent, log exponent)
    enum Decay {
        Finite,
        Geometric,
        Power(f64),
        LogPower(f64),
    }
    let decay = match &seq.model {
        AlphaModel::Table { tail_exponent: None, .. } => Decay::Finite,
        AlphaModel::Table { tail_exponent: Some(a), .. } | AlphaModel::Polynomial { a, .. } => Decay::Power(*a),
        AlphaModel::Geometric { .. } => Decay::Geometric,
        AlphaModel::LogPolynomial { a, .. } => Decay::LogPower(*a),
    };
    let fast = matches!(decay, Decay::Finite | Decay::Geometric);

    // Item 1: Σ (α(k)/k)^β with β = (p-2)/(2(p-1)), for some p > 2 with E|X|^p < ∞.
    let item1 = moment > 2.0 && {
        let beta = if light { 0.5 } else { (moment - 2.0) / (2.0 * (moment - 1.0)) };
        match decay {
            _ if fast => true,
            // Σ k^{-(a+1)β} with β approaching its supremum from below.
            Decay::Power(a) => (a + 1.0) * beta > 1.0,
            // Σ k^{-2β} ln^{-aβ} k: needs β = 1/2 (bounded moments) and a/2 > 1.
            Decay::LogPower(a) => light && a * 0.5 > 1.0,
            _ => unreachable!(),
        }
    };
    // Item 2: H(t) = O(t^{-p}) with p > 2 and Σ α(k)^{(p-2)/(2p)} k^{-1/2} < ∞.
    let item2 = moment > 2.0 && {
        let beta = if light { 0.5 } else { (moment - 2.0) / (2.0 * moment) };
        match decay {
            _ if fast => true,
            Decay::Power(a) => a * beta > 0.5,
            Decay::LogPower(_) => false,
            _ => unreachable!(),
        }
    };
    // Item 3: α = O(k^{-a}) with a > 1 and ∫ H^{(a-1)/(2a)} < ∞.
    let power_a = match decay {
        Decay::Power(a) if a > 1.0 => Some(a),
        _ if fast => Some(LARGE_DECAY_EXPONENT),
        _ => None,
    };
    let item3 = match power_a {
        Some(a) => tail_integral_finite(tail, TailFunctional::Power((a - 1.0) / (2.0 * a)))?,
        None => false,
    };
    // Item 4: α = O(1/(k ln^a k)) with a > 1 and ∫ ln(1 + 1/H)^{-(a-1)/2} < ∞.
    let log_a = match decay {
        Decay::LogPower(a) if a > 1.0 => Some(a),
        Decay::Power(a) if a > 1.0 => Some(LARGE_DECAY_EXPONENT),
        _ if fast => Some(LARGE_DECAY_EXPONENT),
        _ => None,
    };
    let item4 = match log_a {
        Some(a) => tail_integral_finite(tail, TailFunctional::InverseLog((a - 1.0) / 2.0))?,
        None => false,
    };
    // Item 5: geometric decay and ∫ sqrt(H |ln H|) < ∞.
    let item5 = fast && tail_integral_finite(tail, TailFunctional::RootEntropy)?;
    let dm = quantile_conditions(seq, tail)?.dm;
    Ok(SufficientReport {
        items: [item1, item2, item3, item4, item5],
        dm,
    })
}

/// JSON record of one bound evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub params: serde_json::Value,
    pub n: u64,
    pub value: f64,
    pub regime: Option<String>,
}

impl BoundReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn inverse_counts() {
        let geo = AlphaSequence::geometric(1.0, 0.5).unwrap();
        assert_eq!(geo.inverse(0.3), 2.0);
        assert_eq!(geo.inverse(1.5), 0.0);
        let iid = AlphaSequence::independent();
        assert_eq!(iid.inverse(0.1), 1.0);
        assert_eq!(iid.inverse(0.3), 0.0);
        assert_eq!(iid.inverse(0.0), f64::INFINITY);
        let poly = AlphaSequence::polynomial(1.0, 2.0).unwrap();
        // α(0) = 1/4, α(k) = min(1/4, k^-2): k = 0, 1, 2 qualify at u = 0.25.
        assert_eq!(poly.inverse(0.25), 3.0);
        assert_eq!(poly.inverse(0.01), 11.0);
    }

    #[test]
    fn level_sums() {
        let t = AlphaSequence::table(vec![1.0, 0.5, 0.25]).unwrap();
        assert!(close(t.level_sum(0.4, Some(2)), 1.05, 1e-15));
        assert_eq!(t.level_sum(0.0, Some(2)), 0.0);
        assert_eq!(t.level_sum(0.4, Some(0)), 0.4);
        let poly = AlphaSequence::polynomial(1.0, 1.5).unwrap();
        let direct: f64 = (0..200_001u64).map(|k| poly.alpha(k).min(0.01)).sum();
        assert!(close(poly.level_sum(0.01, Some(200_000)), direct, 1e-10));
        let geo = AlphaSequence::geometric(0.5, 0.7).unwrap();
        let direct: f64 = (0..5000u64).map(|k| geo.alpha(k).min(0.02)).sum();
        assert!(close(geo.level_sum(0.02, None), direct, 1e-12));
        let lp = AlphaSequence::log_polynomial(1.0, 2.0).unwrap();
        let direct: f64 = (0..100_001u64).map(|k| lp.alpha(k)).sum();
        assert!(close(lp.partial_sum(0, Some(100_000)), direct, 1e-10));
    }

    #[test]
    fn table_tail_sums() {
        let t = AlphaSequence::table_with_tail(vec![0.25, 0.2, 0.1], 2.0).unwrap();
        let direct: f64 = (0..300_000u64).map(|k| t.alpha(k)).sum();
        let tail_rest = 0.1 * 4.0 / 300_000.0;
        assert!(close(t.partial_sum(0, None), direct + tail_rest, 1e-8));
    }

    #[test]
    fn mean_bound_iid_indicator() {
        let iid = AlphaSequence::independent();
        let h = TailModel::Bounded { m: 1.0 };
        for n in [1u64, 4, 100, 10_000] {
            let v = bound_mean_w1(&iid, &h, n).unwrap();
            let expect = 4.0 * (1f64).min((0.25 / n as f64).sqrt());
            assert!(close(v, expect, 1e-8), "{n}: {v} vs {expect}");
        }
        assert_eq!(bound_mean_w1(&iid, &TailModel::Zero, 10).unwrap(), 0.0);
        assert_eq!(bound_l2_w1(&iid, &TailModel::Zero, 10).unwrap(), 0.0);
    }

    #[test]
    fn r_n_examples() {
        let geo = AlphaSequence::geometric(1.0, 0.5).unwrap();
        let one = TailModel::Bounded { m: 1.0 };
        assert_eq!(r_n(&geo, &one, 0.3, 10), 2.0);
        assert_eq!(r_n(&geo, &one, 0.6, 10), 1.0);
        let x = 1.5;
        let v = r_n_inverse(&geo, &one, x, 10);
        assert!(r_n(&geo, &one, v, 10) <= x);
    }

    #[test]
    fn vbe_forms_agree() {
        let seq = AlphaSequence::polynomial(1.0, 1.5).unwrap();
        let tail = TailModel::Pareto { p: 3.0, scale: 1.0 };
        for n in [16u64, 256, 4096] {
            let b = bound_vbe(&seq, &tail, 1.5, n).unwrap();
            assert!(close(b.integral_form, b.sum_form, 1e-6), "{b:?}");
        }
        let z = bound_vbe(&seq, &TailModel::Zero, 1.5, 64).unwrap();
        assert_eq!((z.integral_form, z.sum_form), (0.0, 0.0));
    }

    #[test]
    fn vbe_m_dependent_scaling() {
        // α(0) > 0 and α(k) = 0 beyond: the bound is n^{1-p} E|X|^p.
        let seq = AlphaSequence::table(vec![1.0]).unwrap();
        let tail = TailModel::Pareto { p: 3.0, scale: 1.0 };
        let moment = 3.0 / (3.0 - 1.5);
        for n in [10u64, 1000] {
            let b = bound_vbe(&seq, &tail, 1.5, n).unwrap();
            assert!(close(b.integral_form, (n as f64).powf(-0.5) * moment, 1e-6));
        }
    }

    #[test]
    fn predicted_rates_examples() {
        let p = predicted_rate(0.25, 0.1, Side::Zero, Statistic::MeanW1).unwrap();
        assert_eq!((p.exponent, p.log_power), (-0.5, 0.0));
        let p = predicted_rate(0.25, 0.3, Side::Zero, Statistic::MeanW1).unwrap();
        assert!(close(p.exponent, -0.45, 1e-15));
        let p = predicted_rate(0.75, 0.0, Side::One, Statistic::MeanW1).unwrap();
        assert!(close(p.exponent, -1.0 / 6.0, 1e-15));
        let p = predicted_rate(0.25, 0.25, Side::Zero, Statistic::MeanW1).unwrap();
        assert_eq!(p.log_power, 1.0);
        let p = predicted_rate(0.5, 1.0 / 6.0, Side::Zero, Statistic::LpW1(1.5)).unwrap();
        assert_eq!(p.log_power, 1.0 / 1.5);
        assert!(matches!(
            predicted_rate(1.5, 0.0, Side::Zero, Statistic::MeanW1),
            Err(Error::NoPrediction(_))
        ));
    }

    #[test]
    fn clt_checks() {
        let bounded = CltInput::Tail(TailModel::Bounded { m: 1.0 });
        assert!(clt_condition_check(0.25, &bounded).unwrap().holds);
        let boundary = CltInput::Observable {
            b: 0.25,
            side: Side::Zero,
            log_exponent: Some(2.0),
        };
        assert!(clt_condition_check(0.25, &boundary).unwrap().holds);
        // q κ = 1 at γ = 1/4: κ = 1/3, q = 3.
        let heavy = CltInput::Tail(TailModel::Pareto { p: 3.0, scale: 1.0 });
        assert!(!clt_condition_check(0.25, &heavy).unwrap().holds);
        let err = clt_condition_check(0.5, &bounded).unwrap_err();
        assert!(err.to_string().contains("CLT condition requires γ < 1/2"));
    }

    #[test]
    fn zero_quantile_everything_finite() {
        let r = quantile_conditions(&AlphaSequence::polynomial(1.0, 0.5).unwrap(), &TailModel::Zero).unwrap();
        assert!(r.dmr && r.dm && r.d);
    }

    #[test]
    fn identity_holds_geometric_exponential() {
        let seq = AlphaSequence::geometric(0.25, 0.5).unwrap();
        let c = equiv_identity_check(&seq, &TailModel::Exponential { rate: 1.0 }).unwrap();
        assert!(c.discrepancy < 1e-3, "{c:?}");
        let z = equiv_identity_check(&seq, &TailModel::Zero).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn statistic_parsing() {
        assert_eq!("lp_w1:1.5".parse::<Statistic>().unwrap(), Statistic::LpW1(1.5));
        assert!("lp_w1:2.5".parse::<Statistic>().is_err());
        assert_eq!(Statistic::Rosenthal(3.0).to_string(), "rosenthal:3");
    }
}
