use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ReferenceLaw;
use crate::error::{Error, Result};
use crate::transport::EmpiricalMeasure;

/// Power-law continuation of a tabulated CDF beyond its last knot:
/// `1 - F(t) = mass · (t_last / t)^exponent` for `t >= t_last > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTail {
    pub exponent: f64,
}

/// Distribution function interpolated linearly between knots.
///
/// Repeated knots encode jumps. The mass missing at the last knot, if any,
/// is carried by a [`PowerTail`].
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLaw {
    t: Vec<f64>,
    f: Vec<f64>,
    tail: Option<PowerTail>,
    /// `area[j] = ∫_{t_0}^{t_j} F`.
    area: Vec<f64>,
}

impl TabulatedLaw {
    pub fn new(t: Vec<f64>, f: Vec<f64>, tail: Option<PowerTail>) -> Result<Self> {
        if t.is_empty() || t.len() != f.len() {
            return Err(Error::invalid("tabulated law needs matching, nonempty columns"));
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("tabulated knots must be finite"));
        }
        if t.windows(2).any(|w| w[1] < w[0]) || f.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("tabulated knots and CDF values must be nondecreasing"));
        }
        if f[0] < 0.0 || *f.last().unwrap() > 1.0 + 1e-12 {
            return Err(Error::invalid("tabulated CDF values must lie in [0, 1]"));
        }
        let mut f = f;
        let last = f.len() - 1;
        match tail {
            None => {
                if (f[last] - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "incomplete CDF: last value {} without a tail",
                        f[last]
                    )));
                }
                f[last] = 1.0;
            }
            Some(pt) => {
                if !(pt.exponent > 0.0) || t[last] <= 0.0 {
                    return Err(Error::invalid("power tail needs a positive exponent and last knot"));
                }
                f[last] = f[last].min(1.0);
            }
        }
        let mut area = Vec::with_capacity(t.len());
        area.push(0.0);
        for j in 1..t.len() {
            let a = area[j - 1] + 0.5 * (f[j - 1] + f[j]) * (t[j] - t[j - 1]);
            area.push(a);
        }
        Ok(Self { t, f, tail, area })
    }

    pub fn knots(&self) -> &[f64] {
        &self.t
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.f
    }

    pub fn power_tail(&self) -> Option<PowerTail> {
        self.tail
    }

    fn missing_mass(&self) -> f64 {
        1.0 - self.f[self.f.len() - 1]
    }

    fn tail_cdf(&self, t: f64) -> f64 {
        let t_last = *self.t.last().unwrap();
        match self.tail {
            Some(pt) => 1.0 - self.missing_mass() * (t_last / t).powf(pt.exponent),
            None => 1.0,
        }
    }

    /// Interpolated value at `t` inside segment `j` (between knots `j-1` and `j`).
    fn interp(&self, j: usize, t: f64) -> f64 {
        let (t0, t1, f0, f1) = (self.t[j - 1], self.t[j], self.f[j - 1], self.f[j]);
        if t1 == t0 {
            return f1;
        }
        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    }

    /// Writes `t,F(t)` rows. A power tail is truncated at the `1 - 1e-12` quantile.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "F(t)"])?;
        for (t, f) in self.t.iter().zip(&self.f) {
            w.write_record([format!("{t:.17e}"), format!("{f:.17e}")])?;
        }
        if self.tail.is_some() && self.missing_mass() > 0.0 {
            let t_end = self.inv_cdf(1.0 - 1e-12);
            w.write_record([format!("{t_end:.17e}"), format!("{:.17e}", 1.0)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `t,F(t)` format produced by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut t = Vec::new();
        let mut f = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: "expected two columns".into(),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        line,
                        message: e.to_string(),
                    })
            };
            t.push(parse(0)?);
            f.push(parse(1)?);
        }
        Self::new(t, f, None)
    }
}

impl ReferenceLaw for TabulatedLaw {
    fn cdf(&self, t: f64) -> f64 {
        let j = self.t.partition_point(|&x| x <= t);
        if j == 0 {
            0.0
        } else if j == self.t.len() {
            self.tail_cdf(t)
        } else {
            self.interp(j, t)
        }
    }

    fn cdf_left(&self, t: f64) -> f64 {
        let j = self.t.partition_point(|&x| x < t);
        if j == 0 {
            0.0
        } else if j == self.t.len() {
            self.tail_cdf(t)
        } else {
            self.interp(j, t)
        }
    }

    fn inv_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let j = self.f.partition_point(|&v| v < u);
        match (j < self.f.len()).then_some(j) {
            Some(0) => self.t[0],
            Some(j) => {
                let (t0, t1, f0, f1) = (self.t[j - 1], self.t[j], self.f[j - 1], self.f[j]);
                if t1 == t0 || f1 == f0 {
                    t1
                } else {
                    (t0 + (u - f0) / (f1 - f0) * (t1 - t0)).min(t1)
                }
            }
            None => match self.tail {
                Some(pt) => {
                    let t_last = *self.t.last().unwrap();
                    t_last * (self.missing_mass() / (1.0 - u)).powf(1.0 / pt.exponent)
                }
                None => *self.t.last().unwrap(),
            },
        }
    }

    fn inv_survival(&self, v: f64) -> f64 {
        match self.tail {
            Some(pt) if v > 0.0 && v < self.missing_mass() => {
                *self.t.last().unwrap() * (self.missing_mass() / v).powf(1.0 / pt.exponent)
            }
            _ => self.inv_cdf(1.0 - v),
        }
    }

    fn support(&self) -> (f64, f64) {
        let hi = match self.tail {
            Some(_) if self.missing_mass() > 0.0 => f64::INFINITY,
            _ => *self.t.last().unwrap(),
        };
        (self.t[0], hi)
    }

    fn finite_moment(&self, r: f64) -> bool {
        match self.tail {
            Some(pt) if self.missing_mass() > 0.0 => r < pt.exponent,
            _ => true,
        }
    }

    fn integrated_cdf(&self, t: f64) -> Option<f64> {
        let j = self.t.partition_point(|&x| x <= t);
        if j == 0 {
            return Some(0.0);
        }
        let k = self.t.len();
        if j < k {
            let (t0, f0) = (self.t[j - 1], self.f[j - 1]);
            let ft = self.interp(j, t);
            return Some(self.area[j - 1] + 0.5 * (f0 + ft) * (t - t0));
        }
        let t_last = self.t[k - 1];
        let base = self.area[k - 1];
        let Some(pt) = self.tail else {
            return Some(base + (t - t_last));
        };
        let m = self.missing_mass();
        let q = pt.exponent;
        let excess = if (q - 1.0).abs() < 1e-14 {
            m * t_last * (t / t_last).ln()
        } else {
            m * t_last.powf(q) * (t.powf(1.0 - q) - t_last.powf(1.0 - q)) / (1.0 - q)
        };
        Some(base + (t - t_last) - excess)
    }

    fn integrated_survival(&self, t: f64) -> Option<f64> {
        let k = self.t.len();
        let t_last = self.t[k - 1];
        let m = self.missing_mass();
        let beyond = |s: f64| -> f64 {
            match self.tail {
                Some(pt) if m > 0.0 => {
                    let q = pt.exponent;
                    if q <= 1.0 {
                        f64::INFINITY
                    } else {
                        m * t_last.powf(q) * s.powf(1.0 - q) / (q - 1.0)
                    }
                }
                _ => 0.0,
            }
        };
        if t >= t_last {
            return Some(beyond(t));
        }
        // ∫_t^{t_last} (1 - F) = (t_last - t) - (∫_{-∞}^{t_last} F - ∫_{-∞}^t F)
        let inner = (t_last - t) - (self.area[k - 1] - self.integrated_cdf(t).unwrap());
        Some(inner + beyond(t_last))
    }

    fn name(&self) -> String {
        format!("tabulated[{} knots]", self.t.len())
    }
}

/// Uniform law on the points of an empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    points: Vec<f64>,
    abs_sorted: Vec<f64>,
    prefix: Vec<f64>,
}

/// Step distribution function of a sample, with jumps `1/n` at the order statistics.
pub fn empirical_cdf(sample: &EmpiricalMeasure) -> Result<EmpiricalLaw> {
    EmpiricalLaw::new(sample.points().to_vec())
}

impl EmpiricalLaw {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        points.sort_by(f64::total_cmp);
        let mut abs_sorted: Vec<f64> = points.iter().map(|x| x.abs()).collect();
        abs_sorted.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(points.len() + 1);
        prefix.push(0.0);
        for &x in &points {
            prefix.push(prefix.last().unwrap() + x);
        }
        Ok(Self {
            points,
            abs_sorted,
            prefix,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    fn n(&self) -> f64 {
        self.points.len() as f64
    }

    /// Largest integer `k` with `k <= u n`, robust to rounding in `u n`.
    fn floor_level(&self, u: f64) -> usize {
        let n = self.n();
        let mut k = (u * n).floor().max(0.0) as usize;
        if ((k + 1) as f64) / n <= u {
            k += 1;
        }
        while k > 0 && (k as f64) / n > u {
            k -= 1;
        }
        k
    }
}

impl ReferenceLaw for EmpiricalLaw {
    fn cdf(&self, t: f64) -> f64 {
        self.points.partition_point(|&x| x <= t) as f64 / self.n()
    }

    fn cdf_left(&self, t: f64) -> f64 {
        self.points.partition_point(|&x| x < t) as f64 / self.n()
    }

    fn tail(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        let above = self.abs_sorted.len() - self.abs_sorted.partition_point(|&a| a <= t);
        above as f64 / self.n()
    }

    fn quantile(&self, u: f64) -> f64 {
        if !(u > 0.0) {
            return f64::NAN;
        }
        let n = self.abs_sorted.len();
        let k = self.floor_level(u.min(1.0));
        if k >= n {
            0.0
        } else {
            self.abs_sorted[n - k - 1]
        }
    }

    fn inv_cdf(&self, u: f64) -> f64 {
        let n = self.points.len();
        // Smallest j with j/n >= u.
        let mut j = (u * self.n()).ceil().max(1.0) as usize;
        while j > 1 && ((j - 1) as f64) / self.n() >= u {
            j -= 1;
        }
        self.points[j.min(n) - 1]
    }

    fn support(&self) -> (f64, f64) {
        (self.points[0], *self.points.last().unwrap())
    }

    fn finite_moment(&self, _r: f64) -> bool {
        true
    }

    fn integrated_cdf(&self, t: f64) -> Option<f64> {
        let k = self.points.partition_point(|&x| x <= t);
        Some((k as f64 * t - self.prefix[k]) / self.n())
    }

    fn integrated_survival(&self, t: f64) -> Option<f64> {
        let k = self.points.partition_point(|&x| x <= t);
        let n = self.points.len();
        Some(((self.prefix[n] - self.prefix[k]) - (n - k) as f64 * t) / self.n())
    }

    fn name(&self) -> String {
        format!("empirical[n={}]", self.points.len())
    }
}
