//! Adaptive Gauss–Kronrod quadrature with dyadic-shell handling of improper
//! endpoints.
//!
//! Finite intervals use a globally adaptive G10/K21 scheme: the interval with
//! the largest error estimate is bisected until the requested tolerance is met
//! or the interval budget is exhausted.
//!
//! Improper integrals (integrable singularity at zero, or an infinite upper
//! limit) are split into dyadic shells `[b 2^{-k-1}, b 2^{-k}]` (resp.
//! `[a + 2^k, a + 2^{k+1}]`). Each shell is smooth enough for the finite
//! scheme, and the shell sequence doubles as a divergence probe: the integral
//! is declared divergent when the shell beyond `2^{-20}` (resp. `2^{20}`) adds
//! more than 5% to the accumulated value, when the shells beyond that level
//! keep growing, or when after the last level they still shrink no faster
//! than `k^{-1}`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Dyadic level at which the divergence probe is taken.
pub const DIVERGENCE_PROBE_LEVEL: i32 = 20;
/// Relative growth per shell above which an improper integral is divergent.
pub const DIVERGENCE_GROWTH: f64 = 0.05;
/// Shells still decaying slower than k^{-(1 + margin)} at the last level are divergent.
const SUBGEOMETRIC_MARGIN: f64 = 0.05;

/// Single G10/K21 panel: returns (kronrod estimate, error estimate).
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let kronrod = kronrod * half;
    let asc = asc * half.abs();
    let mut err = ((kronrod - gauss * half) * 1.0).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    (kronrod, err)
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Tolerances and interval budget for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-9,
            max_panels: 4000,
        }
    }
}

impl Quadrature {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    /// Globally adaptive integration over a finite interval.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Estimate {
        if a == b {
            return Estimate {
                value: 0.0,
                abs_err: 0.0,
                converged: true,
            };
        }
        let (value, err) = gk21(&f, a, b);
        let mut heap = BinaryHeap::new();
        heap.push(Panel { a, b, value, err });
        let mut total = value;
        let mut total_err = err;
        let mut panels = 1;
        loop {
            let tol = self.abs_tol.max(self.rel_tol * total.abs());
            if total_err <= tol {
                break;
            }
            if panels >= self.max_panels {
                return Estimate {
                    value: total,
                    abs_err: total_err,
                    converged: false,
                };
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Panel is at floating-point resolution; accept it as is.
                heap.push(Panel { err: 0.0, ..worst });
                total_err -= worst.err;
                continue;
            }
            let (v1, e1) = gk21(&f, worst.a, mid);
            let (v2, e2) = gk21(&f, mid, worst.b);
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.err;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                err: e1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                err: e2,
            });
            panels += 1;
        }
        // Re-sum to shed accumulated rounding from the running updates.
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let abs_err: f64 = heap.iter().map(|p| p.err).sum();
        Estimate {
            value,
            abs_err,
            converged: true,
        }
    }

    /// Integrates over consecutive segments of `knots`, which must be sorted.
    pub fn integrate_knots<F: Fn(f64) -> f64>(&self, f: F, knots: &[f64]) -> Estimate {
        let mut out = Estimate {
            value: 0.0,
            abs_err: 0.0,
            converged: true,
        };
        for w in knots.windows(2) {
            let e = self.integrate(&f, w[0], w[1]);
            out.value += e.value;
            out.abs_err += e.abs_err;
            out.converged &= e.converged;
        }
        out
    }

    /// `∫_0^b f` for an integrand that may be singular at zero.
    ///
    /// Returns [`Error::Divergent`] when the 5%-per-halving probe at
    /// `ε = b 2^{-20}` fires.
    pub fn improper_at_zero<F: Fn(f64) -> f64>(&self, f: F, b: f64) -> Result<f64> {
        if b <= 0.0 {
            return Ok(0.0);
        }
        let shells = (0..).map(|k: i32| (b * 2f64.powi(-k - 1), b * 2f64.powi(-k)));
        self.shell_sum(&f, shells, "integrand singular at zero")
    }

    /// `∫_a^∞ f`, probing divergence at `a + 2^{20}`.
    pub fn improper_at_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<f64> {
        let head = self.integrate(&f, a, a + 1.0).value;
        let shells = (0..).map(|k: i32| (a + 2f64.powi(k), a + 2f64.powi(k + 1)));
        Ok(head + self.shell_sum(&f, shells, "integrand with heavy tail at infinity")?)
    }

    fn shell_sum<F, I>(&self, f: &F, shells: I, what: &str) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        I: Iterator<Item = (f64, f64)>,
    {
        const MAX_SHELLS: i32 = 400;
        const GROWING_SHELLS: i32 = 16;
        let mut total = 0.0;
        let mut prev_inc = f64::NAN;
        let mut last_ratio = f64::NAN;
        let mut growing = 0;
        for (k, (lo, hi)) in (0..MAX_SHELLS).zip(shells) {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                break;
            }
            if k == MAX_SHELLS - 1 && last_ratio > 0.0 && last_ratio < 1.0 {
                // Shells decaying like k^{-s} have ratio 1 - s/k; s <= 1 never sums.
                let s = k as f64 * (1.0 - last_ratio);
                if s <= 1.0 + SUBGEOMETRIC_MARGIN {
                    return Err(Error::Divergent(format!(
                        "{what}: shells decay like k^-{s:.3} after {MAX_SHELLS} levels"
                    )));
                }
                let geometric = last_ratio / (1.0 - last_ratio);
                let power = k as f64 / (s - 1.0);
                total += prev_inc * geometric.min(power);
                break;
            }
            let inc = self.integrate(f, lo, hi).value;
            if !inc.is_finite() {
                // Past the probe level with decaying shells, an overflow is an
                // artifact of the argument reaching the end of the float range.
                if k > DIVERGENCE_PROBE_LEVEL && last_ratio > 0.0 && last_ratio < 0.9 {
                    total += prev_inc * last_ratio / (1.0 - last_ratio);
                    break;
                }
                return Err(Error::Divergent(what.to_string()));
            }
            if k == DIVERGENCE_PROBE_LEVEL && total != 0.0 {
                let growth = inc / total.abs();
                if growth > DIVERGENCE_GROWTH {
                    return Err(Error::Divergent(format!(
                        "{what}: shell growth {:.4} exceeds {DIVERGENCE_GROWTH}",
                        growth
                    )));
                }
            }
            total += inc;
            if k > DIVERGENCE_PROBE_LEVEL {
                let tol = self.abs_tol.max(self.rel_tol * total.abs());
                if inc.abs() <= tol {
                    break;
                }
                // Geometric tail extrapolation once the shells decay steadily.
                let ratio = inc / prev_inc;
                let settled = (ratio - last_ratio).abs() <= 1e-4 * ratio.abs();
                last_ratio = ratio;
                // Shells that keep growing past the probe level never sum.
                growing = if ratio >= 1.0 { growing + 1 } else { 0 };
                if growing >= GROWING_SHELLS {
                    return Err(Error::Divergent(format!(
                        "{what}: {GROWING_SHELLS} consecutive shells grew past level {DIVERGENCE_PROBE_LEVEL}"
                    )));
                }
                if ratio.is_finite() && ratio > 0.0 && ratio < 0.9 {
                    let tail = inc * ratio / (1.0 - ratio);
                    if tail.abs() <= tol || (settled && k > DIVERGENCE_PROBE_LEVEL + 8) {
                        total += tail;
                        break;
                    }
                }
            }
            prev_inc = inc;
        }
        Ok(total)
    }
}

/// Convenience wrapper with default tolerances.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    Quadrature::default().integrate(f, a, b).value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0);
        assert!((v - 0.0).abs() < 1e-13);
        let v = integrate(|x| x * x, 0.0, 3.0);
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn kink_is_resolved() {
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0);
        let exact = 0.3 * 0.3 / 2.0 + 0.7 * 0.7 / 2.0;
        assert!((v - exact).abs() < 1e-10, "{v}");
    }

    #[test]
    fn integrable_singularity_at_zero() {
        let q = Quadrature::default();
        let v = q.improper_at_zero(|u: f64| u.powf(-0.5), 1.0).unwrap();
        assert!((v - 2.0).abs() < 1e-7, "{v}");
        let v = q.improper_at_zero(|u: f64| u.powf(-0.9), 1.0).unwrap();
        assert!((v - 10.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn divergent_at_zero_is_flagged() {
        let q = Quadrature::default();
        assert!(q.improper_at_zero(|u: f64| u.powf(-1.2), 1.0).is_err());
        assert!(q.improper_at_zero(|u: f64| u.powf(-1.05), 1.0).is_err());
    }

    #[test]
    fn infinite_range() {
        let q = Quadrature::default();
        let v = q.improper_at_infinity(|t: f64| (-t).exp(), 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
        let v = q
            .improper_at_infinity(|t: f64| 1.0 / (1.0 + t * t), 0.0)
            .unwrap();
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-7, "{v}");
        assert!(q.improper_at_infinity(|t: f64| (1.0 + t).powf(-0.8), 0.0).is_err());
    }

    #[test]
    fn compact_support_stops_early() {
        let q = Quadrature::default();
        let v = q
            .improper_at_infinity(|t: f64| if t < 1.0 { 1.0 } else { 0.0 }, 0.0)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }
}
