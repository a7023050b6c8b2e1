//! Orbits of intermittent interval maps and baseline processes.
//!
//! Map processes start from a Lebesgue-uniform point, discard `burn_in`
//! iterates and then emit `g(θ^k x)`, `k = 1..n`. The absolutely continuous
//! invariant measure is only reached asymptotically, so the burn-in is an
//! approximation of a stationary start.

use std::io::Write;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{CustomFn, LawSpec, Observable};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

pub const DEFAULT_BURN_IN: u64 = 10_000;

/// Liverani–Saussol–Vaienti map with neutral fixed point at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsvMap {
    gamma: f64,
    #[serde(skip)]
    coef: f64,
}

impl LsvMap {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(format!("LSV map needs 0 < γ < 1, got {gamma}")));
        }
        Ok(Self {
            gamma,
            coef: 2f64.powf(gamma),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// One step without domain checks.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if x < 0.5 {
            x * (1.0 + self.coef * x.powf(self.gamma))
        } else {
            2.0 * x - 1.0
        }
    }

    pub fn step(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.apply(x))
    }
}

/// `θ(x) = x(1 + 2^γ x^γ)` on `[0, 1/2)`, `2x - 1` on `[1/2, 1]`.
pub fn lsv_step(x: f64, gamma: f64) -> Result<f64> {
    LsvMap::new(gamma)?.step(x)
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("map argument must lie in [0, 1], got {x}")))
    }
}

/// One monotone branch of a piecewise expanding map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Branch {
    /// `x (1 + c x^γ)` with `c` chosen so the branch is onto `[0, 1]`.
    Neutral { gamma: f64 },
    Affine { slope: f64, intercept: f64 },
    Custom {
        name: String,
        increasing: bool,
        #[serde(skip)]
        f: Option<CustomFn>,
    },
}

/// Generalized Pomeau–Manneville map: branches on `[y_k, y_{k+1})`, the last
/// one closed at 1. A point on a breakpoint belongs to the right-hand branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpmMap {
    breakpoints: Vec<f64>,
    branches: Vec<Branch>,
    #[serde(skip)]
    neutral_coef: f64,
}

impl PartialEq for GpmMap {
    fn eq(&self, other: &Self) -> bool {
        serde_json::to_string(self).ok() == serde_json::to_string(other).ok()
    }
}

impl GpmMap {
    pub fn new(breakpoints: Vec<f64>, branches: Vec<Branch>) -> Result<Self> {
        let d = branches.len();
        if d == 0 || breakpoints.len() != d + 1 {
            return Err(Error::invalid("GPM map needs d branches and d + 1 breakpoints"));
        }
        if breakpoints[0] != 0.0 || breakpoints[d] != 1.0 || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("breakpoints must increase strictly from 0 to 1"));
        }
        let mut neutral_coef = 0.0;
        for (k, br) in branches.iter().enumerate() {
            match br {
                Branch::Neutral { gamma } => {
                    if k != 0 {
                        return Err(Error::invalid("only the first branch may be neutral"));
                    }
                    if !(*gamma > 0.0 && *gamma < 1.0) {
                        return Err(Error::invalid(format!("neutral branch needs 0 < γ < 1, got {gamma}")));
                    }
                    let y1 = breakpoints[1];
                    neutral_coef = (1.0 / y1 - 1.0) / y1.powf(*gamma);
                }
                Branch::Affine { slope, .. } => {
                    if slope.abs() <= 1.0 {
                        return Err(Error::invalid(format!("affine branch {k} is not expanding (slope {slope})")));
                    }
                }
                Branch::Custom { name, f, .. } => {
                    if f.is_none() {
                        return Err(Error::invalid(format!("custom branch `{name}` has no function attached")));
                    }
                }
            }
        }
        let map = Self {
            breakpoints,
            branches,
            neutral_coef,
        };
        for k in 0..d {
            let (a, b) = map.branch_domain(k);
            for v in [map.eval_branch(k, a), map.eval_branch(k, b)] {
                if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::invalid(format!("branch {k} leaves [0, 1] (value {v})")));
                }
            }
        }
        Ok(map)
    }

    /// The LSV map as a two-branch GPM map.
    pub fn lsv(gamma: f64) -> Result<Self> {
        Self::new(
            vec![0.0, 0.5, 1.0],
            vec![
                Branch::Neutral { gamma },
                Branch::Affine {
                    slope: 2.0,
                    intercept: -1.0,
                },
            ],
        )
    }

    /// `x ↦ 2x mod 1`.
    pub fn doubling() -> Self {
        Self::new(
            vec![0.0, 0.5, 1.0],
            vec![
                Branch::Affine {
                    slope: 2.0,
                    intercept: 0.0,
                },
                Branch::Affine {
                    slope: 2.0,
                    intercept: -1.0,
                },
            ],
        )
        .expect("doubling map is valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Exponent of the neutral branch, if any.
    pub fn gamma(&self) -> Option<f64> {
        match self.branches.first() {
            Some(Branch::Neutral { gamma }) => Some(*gamma),
            _ => None,
        }
    }

    pub fn branch_domain(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    pub fn branch_increasing(&self, k: usize) -> bool {
        match &self.branches[k] {
            Branch::Neutral { .. } => true,
            Branch::Affine { slope, .. } => *slope > 0.0,
            Branch::Custom { increasing, .. } => *increasing,
        }
    }

    /// Index of the branch containing `x` (right branch at breakpoints).
    pub fn branch_index(&self, x: f64) -> usize {
        let d = self.branches.len();
        (self.breakpoints.partition_point(|&y| y <= x).max(1) - 1).min(d - 1)
    }

    /// Evaluates branch `k`'s formula at `x` (which may be the closed right end).
    #[inline]
    pub fn eval_branch(&self, k: usize, x: f64) -> f64 {
        match &self.branches[k] {
            Branch::Neutral { gamma } => x * (1.0 + self.neutral_coef * x.powf(*gamma)),
            Branch::Affine { slope, intercept } => slope * x + intercept,
            Branch::Custom { f, .. } => (f.as_ref().expect("validated").0)(x),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.eval_branch(self.branch_index(x), x)
    }

    pub fn step(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.apply(x))
    }

    /// Preimage of `y` under branch `k`, clamped to the branch domain.
    pub fn branch_inverse(&self, k: usize, y: f64) -> f64 {
        let (a, b) = self.branch_domain(k);
        match &self.branches[k] {
            Branch::Affine { slope, intercept } => return ((y - intercept) / slope).clamp(a, b),
            Branch::Neutral { gamma } => {
                // x + c x^{1+γ} is convex and increasing, so Newton from x = y
                // decreases monotonically to the root with full relative precision.
                let c = self.neutral_coef;
                let mut x = y.clamp(a, b);
                for _ in 0..100 {
                    let xg = x.powf(*gamma);
                    let f = x * (1.0 + c * xg) - y;
                    let step = f / (1.0 + c * (1.0 + gamma) * xg);
                    let next = (x - step).max(0.0);
                    if (x - next).abs() <= 1e-17 * x || next == x {
                        x = next;
                        break;
                    }
                    x = next;
                }
                return x.clamp(a, b);
            }
            Branch::Custom { .. } => {}
        }
        let inc = self.branch_increasing(k);
        let (mut lo, mut hi) = (a, b);
        for _ in 0..2100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let below = self.eval_branch(k, mid) < y;
            if below == inc {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Value of `gpm_step`: applies the branch containing `x`.
pub fn gpm_step(map: &GpmMap, x: f64) -> Result<f64> {
    map.step(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProcessKind {
    Lsv { gamma: f64 },
    Gpm { map: GpmMap },
    Iid { law: LawSpec },
    /// `X_k = g(mean(U_k, ..., U_{k+m}))` for iid uniforms `U`.
    MDependent { m: usize },
}

/// Full description of a stationary sequence; `(spec, n)` determines the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    #[serde(default)]
    pub observable: Observable,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    #[serde(default)]
    pub seed: u64,
    /// Deterministic start in place of the uniform draw (no restarts).
    #[serde(default)]
    pub start: Option<f64>,
}

fn default_burn_in() -> u64 {
    DEFAULT_BURN_IN
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind) -> Self {
        Self {
            kind,
            observable: Observable::identity(),
            burn_in: DEFAULT_BURN_IN,
            seed: 0,
            start: None,
        }
    }

    pub fn lsv(gamma: f64) -> Self {
        Self::new(ProcessKind::Lsv { gamma })
    }

    pub fn iid(law: LawSpec) -> Self {
        Self::new(ProcessKind::Iid { law })
    }

    pub fn with_observable(mut self, g: Observable) -> Self {
        self.observable = g;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_start(mut self, x0: f64) -> Self {
        self.start = Some(x0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.observable.validate()?;
        match &self.kind {
            ProcessKind::Lsv { gamma } => {
                LsvMap::new(*gamma)?;
            }
            ProcessKind::Gpm { map } => {
                GpmMap::new(map.breakpoints.clone(), map.branches.clone())?;
            }
            ProcessKind::Iid { law } => {
                law.build()?;
            }
            ProcessKind::MDependent { .. } => {}
        }
        if let Some(x0) = self.start {
            check_unit(x0)?;
        }
        Ok(())
    }

    /// Neutral-branch exponent of map processes.
    pub fn gamma(&self) -> Option<f64> {
        match &self.kind {
            ProcessKind::Lsv { gamma } => Some(*gamma),
            ProcessKind::Gpm { map } => map.gamma(),
            _ => None,
        }
    }

    pub fn is_map(&self) -> bool {
        matches!(self.kind, ProcessKind::Lsv { .. } | ProcessKind::Gpm { .. })
    }

    /// Map driving a map process, as a GPM map.
    pub fn gpm_map(&self) -> Option<GpmMap> {
        match &self.kind {
            ProcessKind::Lsv { gamma } => GpmMap::lsv(*gamma).ok(),
            ProcessKind::Gpm { map } => Some(map.clone()),
            _ => None,
        }
    }

    /// Short content hash of the process description, used in file headers and stream keys.
    pub fn hash(&self) -> String {
        rng::short_hash(&serde_json::to_vec(self).expect("spec serializes"))
    }

    pub fn hash_u64(&self) -> u64 {
        rng::hash_u64(&serde_json::to_vec(self).expect("spec serializes"))
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ProcessKind::Lsv { gamma } => format!("lsv:{gamma}"),
            ProcessKind::Gpm { .. } => "gpm".into(),
            ProcessKind::Iid { law } => format!("iid:{}", law.label()),
            ProcessKind::MDependent { m } => format!("mdep:{m}"),
        }
    }
}

impl FromStr for ProcessSpec {
    type Err = Error;

    /// `lsv:GAMMA`, `iid:LAW` (see [`LawSpec`]) or `mdep:M`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let kind = match head {
            "lsv" => ProcessKind::Lsv {
                gamma: rest
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad γ in process `{s}`")))?,
            },
            "doubling" if rest.is_empty() => ProcessKind::Gpm {
                map: GpmMap::doubling(),
            },
            "iid" => ProcessKind::Iid { law: rest.parse()? },
            "mdep" => ProcessKind::MDependent {
                m: rest
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad block length in process `{s}`")))?,
            },
            _ => return Err(Error::invalid(format!("unknown process `{s}`"))),
        };
        let spec = Self::new(kind);
        spec.validate()?;
        Ok(spec)
    }
}

/// Simulated values plus the number of restarts caused by orbits collapsing
/// onto a fixed point in floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub restarts: u32,
}

const MAX_RESTARTS: u32 = 1000;

/// Simulates `n` values using the generator derived from `spec.seed`.
pub fn simulate_series(spec: &ProcessSpec, n: usize) -> Result<Vec<f64>> {
    let mut rng = rng::stream(spec.seed, &[spec.hash_u64()]);
    Ok(simulate_with_rng(spec, n, &mut rng)?.values)
}

/// Simulates `n` values drawing all randomness from `rng`.
pub fn simulate_with_rng(spec: &ProcessSpec, n: usize, rng: &mut StreamRng) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::invalid("series length must be positive"));
    }
    spec.validate()?;
    let g = &spec.observable;
    match &spec.kind {
        ProcessKind::Lsv { gamma } => {
            let map = LsvMap::new(*gamma)?;
            orbit(|x| map.apply(x), spec, g, n, rng)
        }
        ProcessKind::Gpm { map } => orbit(|x| map.apply(x), spec, g, n, rng),
        ProcessKind::Iid { law } => {
            let law = law.build()?;
            let values = (0..n)
                .map(|_| law.inv_cdf(rng.sample::<f64, _>(Open01)))
                .collect();
            Ok(Trajectory { values, restarts: 0 })
        }
        ProcessKind::MDependent { m } => {
            let w = m + 1;
            let u: Vec<f64> = (0..n + m).map(|_| rng.sample::<f64, _>(Open01)).collect();
            let mut sum: f64 = u[..w].iter().sum();
            let mut values = Vec::with_capacity(n);
            for k in 0..n {
                if k > 0 {
                    sum += u[k + m] - u[k - 1];
                }
                let mean = (sum / w as f64).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                values.push(g.apply(mean));
            }
            Ok(Trajectory { values, restarts: 0 })
        }
    }
}

fn orbit<T: Fn(f64) -> f64>(
    step: T,
    spec: &ProcessSpec,
    g: &Observable,
    n: usize,
    rng: &mut StreamRng,
) -> Result<Trajectory> {
    if let Some(x0) = spec.start {
        let mut x = x0;
        for _ in 0..spec.burn_in {
            x = step(x);
        }
        let values = (0..n)
            .map(|_| {
                x = step(x);
                g.apply(x)
            })
            .collect();
        return Ok(Trajectory { values, restarts: 0 });
    }
    let mut restarts = 0;
    'attempt: loop {
        let mut x: f64 = rng.sample(Open01);
        let mut values = Vec::with_capacity(n);
        for k in 0..spec.burn_in + n as u64 {
            x = step(x);
            if x <= 0.0 || x >= 1.0 {
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    return Err(Error::NonConvergent {
                        iterations: restarts as usize,
                        residual: x,
                    });
                }
                continue 'attempt;
            }
            if k >= spec.burn_in {
                values.push(g.apply(x));
            }
        }
        return Ok(Trajectory { values, restarts });
    }
}

/// Writes a one-column CSV whose header records the process hash.
pub fn write_trajectory_csv<W: Write>(spec: &ProcessSpec, values: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([format!("spec:{}", spec.hash())])?;
    for v in values {
        w.write_record([format!("{v:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lsv_values() {
        assert_eq!(lsv_step(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(lsv_step(0.5, 0.5).unwrap(), 0.0);
        let v = lsv_step(0.25, 0.5).unwrap();
        assert!((v - 0.25 * (1.0 + 2f64.sqrt() * 0.5)).abs() < 1e-15);
        assert!((v - 0.426777).abs() < 1e-6);
        assert!(lsv_step(1.5, 0.5).is_err());
        assert!(lsv_step(0.3, 1.0).is_err());
    }

    #[test]
    fn gpm_tie_goes_right() {
        let map = GpmMap::doubling();
        assert_eq!(map.step(0.5).unwrap(), 0.0);
        assert!((map.step(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(map.step(1.0).unwrap(), 1.0);
        assert_eq!(map.branch_index(0.0), 0);
    }

    #[test]
    fn gpm_lsv_matches_direct_formula() {
        let gpm = GpmMap::lsv(0.3).unwrap();
        let lsv = LsvMap::new(0.3).unwrap();
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            assert!((gpm.apply(x) - lsv.apply(x)).abs() < 1e-14, "x={x}");
        }
    }

    #[test]
    fn branch_inverse_round_trip() {
        let gpm = GpmMap::lsv(0.7).unwrap();
        for y in [0.0, 1e-9, 0.2, 0.77, 1.0] {
            let x = gpm.branch_inverse(0, y);
            assert!((gpm.eval_branch(0, x) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(GpmMap::new(vec![0.0, 1.0], vec![Branch::Affine { slope: 0.5, intercept: 0.0 }]).is_err());
        assert!(GpmMap::new(vec![0.0, 0.6, 1.0], vec![Branch::Neutral { gamma: 0.5 }]).is_err());
        assert!(GpmMap::new(
            vec![0.0, 0.5, 1.0],
            vec![Branch::Affine { slope: 3.0, intercept: 0.0 }, Branch::Affine { slope: 2.0, intercept: -1.0 }]
        )
        .is_err());
    }

    #[test]
    fn forced_fixed_point_gives_zeros() {
        let spec = ProcessSpec::lsv(0.5).with_burn_in(0).with_start(0.0);
        assert_eq!(simulate_series(&spec, 50).unwrap(), vec![0.0; 50]);
    }

    #[test]
    fn iid_point_mass_is_constant() {
        let spec = ProcessSpec::iid(LawSpec::PointMass { at: 2.5 });
        assert_eq!(simulate_series(&spec, 10).unwrap(), vec![2.5; 10]);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ProcessSpec::lsv(0.4).with_seed(11).with_burn_in(100);
        let a = simulate_series(&spec, 500).unwrap();
        assert_eq!(a, simulate_series(&spec, 500).unwrap());
        assert_ne!(a, simulate_series(&spec.clone().with_seed(12), 500).unwrap());
        assert!(a.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn m_dependent_window_mean() {
        let spec = ProcessSpec::new(ProcessKind::MDependent { m: 3 }).with_seed(1);
        let v = simulate_series(&spec, 1000).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.03, "{mean}");
    }

    #[test]
    fn spec_parsing_and_csv_header() {
        let spec: ProcessSpec = "iid:uniform".parse().unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&spec, &[0.5, 0.25], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&format!("spec:{}\n", spec.hash())));
        assert_eq!(text.lines().count(), 3);
        assert!("lsv:1.2".parse::<ProcessSpec>().is_err());
        assert!("nonsense".parse::<ProcessSpec>().is_err());
    }
}
