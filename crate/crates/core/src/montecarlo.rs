//! Monte Carlo experiments: moments of `W_r(μ_n, μ)` over a grid of sample
//! sizes, rate regression, the Gaussian limit law and tail probes.
//!
//! Every replica draws from its own stream keyed by `(plan hash, n, replica)`,
//! so results do not depend on the number of worker threads.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{EmpiricalLaw, LawSpec, ReferenceLaw};
use crate::dynamics::{simulate_with_rng, ProcessKind, ProcessSpec};
use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::transfer_operator::{build_ulam, pushforward_law, MeshKind};
use crate::transport::{w1_empirical_pair, w1_vs_law, wr_vs_law, EmpiricalMeasure};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const MIN_REPLICAS_FOR_CI: usize = 30;
pub const DEFAULT_PUSHFORWARD_BINS: usize = 1 << 14;
pub const DEFAULT_REFERENCE_SAMPLE: usize = 10_000_000;
/// Largest admissible kernel clipping, as a fraction of the trace.
pub const MAX_CLIP_FRACTION: f64 = 0.05;
pub const MIN_TAIL_SAMPLES: usize = 1000;
pub const MIN_EXCEEDANCES: usize = 50;

const BOOTSTRAP_KEY: u64 = 0xB007;
const REFERENCE_KEY: u64 = 0x5EF;
const REGRESSION_KEY: u64 = 0x2E6;

/// Distance computed for each replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DistanceKind {
    W1,
    /// `W_r`, reported as a distance (the `1/r` power of the transport cost).
    Wr { r: f64 },
}

/// Target measure `μ` the empirical measures are compared with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Reference {
    Law { law: LawSpec },
    /// Law of `g` under the Ulam invariant measure of the map.
    Pushforward { bins: usize },
    /// Empirical measure of one long independent run.
    Sample { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub process: ProcessSpec,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    #[serde(default = "default_statistic")]
    pub statistic: DistanceKind,
    /// Defaults to the sampling law for iid processes and to the pushforward
    /// for map processes.
    #[serde(default)]
    pub reference: Option<Reference>,
    #[serde(default)]
    pub seed: u64,
    /// Orders `p` of the reported moments `(E W^p)^{1/p}`.
    #[serde(default = "default_orders")]
    pub orders: Vec<f64>,
}

fn default_statistic() -> DistanceKind {
    DistanceKind::W1
}

fn default_orders() -> Vec<f64> {
    vec![1.0, 2.0]
}

impl ExperimentPlan {
    pub fn new(process: ProcessSpec, n_grid: Vec<usize>, replicas: usize) -> Self {
        Self {
            process,
            n_grid,
            replicas,
            statistic: DistanceKind::W1,
            reference: None,
            seed: 0,
            orders: default_orders(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_statistic(mut self, statistic: DistanceKind) -> Self {
        self.statistic = statistic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::invalid("n_grid must be a nonempty list of positive sizes"));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("n_grid must be strictly increasing"));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be positive"));
        }
        if let DistanceKind::Wr { r } = self.statistic {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(Error::InvalidOrder(r));
            }
        }
        if self.orders.is_empty() || self.orders.iter().any(|p| !(*p >= 1.0 && p.is_finite())) {
            return Err(Error::invalid("moment orders must be finite and >= 1"));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        rng::short_hash(&serde_json::to_vec(self).expect("plan serializes"))
    }

    pub fn hash_u64(&self) -> u64 {
        rng::hash_u64(&serde_json::to_vec(self).expect("plan serializes"))
    }

    fn effective_reference(&self) -> Result<Reference> {
        if let Some(r) = &self.reference {
            return Ok(r.clone());
        }
        match &self.process.kind {
            ProcessKind::Iid { law } => Ok(Reference::Law { law: *law }),
            ProcessKind::Lsv { .. } | ProcessKind::Gpm { .. } => Ok(Reference::Pushforward {
                bins: DEFAULT_PUSHFORWARD_BINS,
            }),
            ProcessKind::MDependent { .. } => Ok(Reference::Sample {
                size: DEFAULT_REFERENCE_SAMPLE,
            }),
        }
    }
}

/// Point estimate and percentile bootstrap interval of `(E W^p)^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: f64,
    pub value: f64,
    /// `None` below [`MIN_REPLICAS_FOR_CI`] replicas.
    pub ci: Option<(f64, f64)>,
}

impl MomentEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci.map_or(f64::NAN, |(lo, hi)| hi - lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    /// Per-replica distances in replica order.
    pub values: Vec<f64>,
    pub moments: Vec<MomentEstimate>,
    pub restarts: u32,
}

impl GridPoint {
    pub fn moment(&self, order: f64) -> Option<&MomentEstimate> {
        self.moments.iter().find(|m| m.order == order)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub plan_hash: String,
    pub points: Vec<GridPoint>,
    /// `W_1` between the two halves of the reference sample, when one is used.
    pub reference_bias: Option<f64>,
    pub wall_time_s: f64,
}

impl ExperimentResult {
    pub fn ns(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    /// Moment estimates of the given order along the grid.
    pub fn moments(&self, order: f64) -> Result<Vec<f64>> {
        self.points
            .iter()
            .map(|p| {
                p.moment(order)
                    .map(|m| m.value)
                    .ok_or_else(|| Error::invalid(format!("order {order} was not estimated")))
            })
            .collect()
    }
}

/// `(mean of v^p)^{1/p}`.
pub fn moment(values: &[f64], p: f64) -> f64 {
    let m = values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / values.len() as f64;
    m.powf(1.0 / p)
}

fn bootstrap_ci(values: &[f64], p: f64, rng: &mut rng::StreamRng) -> (f64, f64) {
    let n = values.len();
    let mut stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let s: f64 = (0..n).map(|_| values[rng.random_range(0..n)].abs().powf(p)).sum();
            (s / n as f64).powf(1.0 / p)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let lo = stats[(0.025 * BOOTSTRAP_RESAMPLES as f64).floor() as usize];
    let hi = stats[((0.975 * BOOTSTRAP_RESAMPLES as f64).ceil() as usize - 1).min(BOOTSTRAP_RESAMPLES - 1)];
    let est = moment(values, p);
    (lo.min(est), hi.max(est))
}

/// Resolved reference measure plus its bias note.
pub struct ResolvedReference {
    pub law: Arc<dyn ReferenceLaw>,
    pub bias: Option<f64>,
}

/// Builds the reference measure of a plan.
pub fn resolve_reference(plan: &ExperimentPlan) -> Result<ResolvedReference> {
    match plan.effective_reference()? {
        Reference::Law { law } => Ok(ResolvedReference {
            law: law.build()?,
            bias: None,
        }),
        Reference::Pushforward { bins } => {
            let map = plan
                .process
                .gpm_map()
                .ok_or_else(|| Error::invalid("pushforward reference needs a map process"))?;
            let mesh = if map.gamma().is_some() {
                MeshKind::Graded
            } else {
                MeshKind::Uniform
            };
            let op = build_ulam(&map, bins, mesh)?;
            Ok(ResolvedReference {
                law: Arc::new(pushforward_law(&op, &plan.process.observable)?),
                bias: None,
            })
        }
        Reference::Sample { size } => {
            if size < 2 {
                return Err(Error::invalid("reference sample needs at least 2 points"));
            }
            let mut rng = stream(plan.seed, &[plan.process.hash_u64(), REFERENCE_KEY]);
            let values = simulate_with_rng(&plan.process, size, &mut rng)?.values;
            let half = size / 2;
            let bias = w1_empirical_pair(
                &EmpiricalMeasure::from_slice(&values[..half])?,
                &EmpiricalMeasure::from_slice(&values[half..2 * half])?,
            )?;
            Ok(ResolvedReference {
                law: Arc::new(EmpiricalLaw::new(values)?),
                bias: Some(bias),
            })
        }
    }
}

/// Runs every `(n, replica)` task and merges in grid order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let start = Instant::now();
    let reference = resolve_reference(plan)?;
    let law = reference.law.as_ref();
    let key = plan.hash_u64();
    let tasks: Vec<(usize, usize)> = plan
        .n_grid
        .iter()
        .flat_map(|&n| (0..plan.replicas).map(move |r| (n, r)))
        .collect();
    let outcomes: Vec<Result<(f64, u32)>> = tasks
        .par_iter()
        .map(|&(n, r)| {
            let mut rng = stream(plan.seed, &[key, n as u64, r as u64]);
            let traj = simulate_with_rng(&plan.process, n, &mut rng)?;
            let sample = EmpiricalMeasure::new(traj.values)?;
            let d = match plan.statistic {
                DistanceKind::W1 => w1_vs_law(&sample, law)?,
                DistanceKind::Wr { r } => wr_vs_law(&sample, law, r)?.powf(1.0 / r),
            };
            Ok((d, traj.restarts))
        })
        .collect();
    let mut outcomes = outcomes.into_iter();
    let mut points = Vec::with_capacity(plan.n_grid.len());
    for &n in &plan.n_grid {
        let mut values = Vec::with_capacity(plan.replicas);
        let mut restarts = 0;
        for _ in 0..plan.replicas {
            let (d, k) = outcomes.next().expect("one outcome per task")?;
            values.push(d);
            restarts += k;
        }
        let moments = plan
            .orders
            .iter()
            .map(|&p| {
                let ci = (plan.replicas >= MIN_REPLICAS_FOR_CI).then(|| {
                    let mut rng = stream(plan.seed, &[key, n as u64, BOOTSTRAP_KEY, p.to_bits()]);
                    bootstrap_ci(&values, p, &mut rng)
                });
                MomentEstimate {
                    order: p,
                    value: moment(&values, p),
                    ci,
                }
            })
            .collect();
        points.push(GridPoint {
            n,
            values,
            moments,
            restarts,
        });
    }
    Ok(ExperimentResult {
        plan_hash: plan.hash(),
        points,
        reference_bias: reference.bias,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Whether a `ln ln n` regressor is added to the log-log fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogCorrection {
    #[default]
    None,
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub r2: f64,
    /// Coefficient of `ln ln n` when fitted.
    pub log_power: Option<f64>,
}

struct Ols {
    coef: Vec<f64>,
    r2: f64,
    /// OLS standard error of the slope coefficient.
    slope_se: f64,
}

fn ols(ns: &[f64], ys: &[f64], correction: LogCorrection) -> Result<Ols> {
    let cols = if correction == LogCorrection::Fit { 3 } else { 2 };
    let rows = ns.len();
    let x = DMatrix::from_fn(rows, cols, |i, j| match j {
        0 => 1.0,
        1 => ns[i].ln(),
        _ => ns[i].ln().ln(),
    });
    let y = DVector::from_column_slice(ys);
    let svd = x.clone().svd(true, true);
    let beta = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::invalid(format!("least squares failed: {e}")))?;
    let resid = &y - &x * &beta;
    let ybar = y.mean();
    let ss_res = resid.norm_squared();
    let ss_tot: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let dof = rows as f64 - cols as f64;
    let slope_se = match (x.transpose() * &x).try_inverse() {
        Some(inv) if dof > 0.0 => (ss_res / dof * inv[(1, 1)]).max(0.0).sqrt(),
        _ => f64::NAN,
    };
    Ok(Ols {
        coef: beta.iter().copied().collect(),
        r2,
        slope_se,
    })
}

fn check_fit_input(ns: &[f64], moments: &[f64], correction: LogCorrection) -> Result<()> {
    if ns.len() != moments.len() {
        return Err(Error::UnequalSampleSizes {
            left: ns.len(),
            right: moments.len(),
        });
    }
    if ns.len() < 4 {
        return Err(Error::invalid(format!("rate regression needs at least 4 grid points, got {}", ns.len())));
    }
    if let Some(m) = moments.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::invalid(format!("rate regression needs positive moments, got {m}")));
    }
    if correction == LogCorrection::Fit && ns.iter().any(|&n| n <= std::f64::consts::E) {
        return Err(Error::invalid("log correction needs n > e"));
    }
    Ok(())
}

/// Least-squares fit of `ln m = c + s ln n (+ β ln ln n)`; the standard error
/// is the OLS one.
pub fn fit_rate(ns: &[f64], moments: &[f64], correction: LogCorrection) -> Result<RateFit> {
    check_fit_input(ns, moments, correction)?;
    let ys: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let fit = ols(ns, &ys, correction)?;
    Ok(RateFit {
        slope: fit.coef[1],
        stderr: fit.slope_se,
        r2: fit.r2,
        log_power: fit.coef.get(2).copied(),
    })
}

/// Fits the decay of the order-`p` moment along the grid; the standard error
/// comes from resampling replicas within each grid point.
pub fn regress_rate(result: &ExperimentResult, order: f64, correction: LogCorrection) -> Result<RateFit> {
    let ns: Vec<f64> = result.points.iter().map(|p| p.n as f64).collect();
    let moments: Vec<f64> = result.points.iter().map(|p| moment(&p.values, order)).collect();
    check_fit_input(&ns, &moments, correction)?;
    let ys: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let fit = ols(&ns, &ys, correction)?;
    let mut rng = stream(
        rng::hash_u64(result.plan_hash.as_bytes()),
        &[REGRESSION_KEY, order.to_bits()],
    );
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let ys: Vec<f64> = result
            .points
            .iter()
            .map(|p| {
                let k = p.values.len();
                let s: f64 = (0..k).map(|_| p.values[rng.random_range(0..k)].abs().powf(order)).sum();
                (s / k as f64).powf(1.0 / order).ln()
            })
            .collect();
        if ys.iter().all(|y| y.is_finite()) {
            slopes.push(ols(&ns, &ys, correction)?.coef[1]);
        }
    }
    let stderr = if slopes.len() >= 2 {
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64).sqrt()
    } else {
        fit.slope_se
    };
    Ok(RateFit {
        slope: fit.coef[1],
        stderr,
        r2: fit.r2,
        log_power: fit.coef.get(2).copied(),
    })
}

/// `Σ_{|k| <= L} Cov(1{X_0 <= t} - F(t), 1{X_k <= s} - F(s))` on `grid`,
/// from one series by lag-windowed sample covariances.
pub fn covariance_kernel_from_series(series: &[f64], grid: &[f64], lag_cutoff: usize) -> Result<DMatrix<f64>> {
    let n = series.len();
    if grid.is_empty() {
        return Err(Error::invalid("kernel grid is empty"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("kernel grid must be sorted"));
    }
    if lag_cutoff * 10 >= n {
        return Err(Error::invalid(format!(
            "lag cutoff {lag_cutoff} must be below a tenth of the series length {n}"
        )));
    }
    let g = grid.len();
    // cell[i] = first grid index j with x_i <= t_j (g when none).
    let cell: Vec<usize> = series.iter().map(|&x| grid.partition_point(|&t| t < x)).collect();
    let mut f = vec![0.0; g];
    {
        let mut counts = vec![0usize; g + 1];
        for &c in &cell {
            counts[c] += 1;
        }
        let mut acc = 0usize;
        for j in 0..g {
            acc += counts[j];
            f[j] = acc as f64 / n as f64;
        }
    }
    let mut kernel = DMatrix::<f64>::zeros(g, g);
    let w = g + 1;
    let mut hist = vec![0usize; w * w];
    for lag in 0..=lag_cutoff {
        hist.iter_mut().for_each(|h| *h = 0);
        for i in 0..n - lag {
            hist[cell[i] * w + cell[i + lag]] += 1;
        }
        // 2-D cumulative sum: joint[a][b] = #{i : cell_i <= a, cell_{i+lag} <= b}.
        let mut joint = vec![0.0f64; g * g];
        let mut col = vec![0usize; w];
        for a in 0..g {
            let mut run = 0usize;
            for b in 0..w {
                col[b] += hist[a * w + b];
                if b < g {
                    run += col[b];
                    joint[a * g + b] = run as f64;
                }
            }
        }
        let m = (n - lag) as f64;
        for a in 0..g {
            for b in 0..g {
                let c = joint[a * g + b] / m - f[a] * f[b];
                if lag == 0 {
                    kernel[(a, b)] += c;
                } else {
                    kernel[(a, b)] += c;
                    kernel[(b, a)] += c;
                }
            }
        }
    }
    let sym = (&kernel + kernel.transpose()) * 0.5;
    Ok(sym)
}

/// Estimates the covariance kernel from one trajectory of `length` values.
pub fn covariance_kernel(process: &ProcessSpec, grid: &[f64], lag_cutoff: usize, length: usize) -> Result<DMatrix<f64>> {
    if lag_cutoff * 10 >= length {
        return Err(Error::invalid(format!(
            "lag cutoff {lag_cutoff} must be below a tenth of the series length {length}"
        )));
    }
    let mut rng = stream(process.seed, &[process.hash_u64(), 0xC0F]);
    let values = simulate_with_rng(process, length, &mut rng)?.values;
    covariance_kernel_from_series(&values, grid, lag_cutoff)
}

/// `min(t, s) - ts` on `grid`.
pub fn brownian_bridge_kernel(grid: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), grid.len(), |i, j| grid[i].min(grid[j]) - grid[i] * grid[j])
}

/// Midpoints and widths of `cells` equal cells on `[lo, hi]`.
pub fn uniform_cells(lo: f64, hi: f64, cells: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / cells as f64;
    ((0..cells).map(|i| lo + (i as f64 + 0.5) * h).collect(), vec![h; cells])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSamples {
    pub samples: Vec<f64>,
    /// Total magnitude of the negative eigenvalues set to zero.
    pub clipped: f64,
    pub clip_fraction: f64,
}

/// Samples of `Σ_i |G(t_i)| Δ_i` for a centered Gaussian vector with covariance
/// `kernel`.
pub fn simulate_limit_law(kernel: &DMatrix<f64>, widths: &[f64], replicas: usize, seed: u64) -> Result<LimitSamples> {
    let g = kernel.nrows();
    if kernel.ncols() != g || widths.len() != g {
        return Err(Error::invalid("kernel must be square and match the cell widths"));
    }
    let trace: f64 = kernel.diagonal().iter().sum();
    if trace <= 0.0 {
        if kernel.iter().all(|&v| v == 0.0) {
            return Ok(LimitSamples {
                samples: vec![0.0; replicas],
                clipped: 0.0,
                clip_fraction: 0.0,
            });
        }
        return Err(Error::KernelTooNoisy { clip_fraction: 1.0 });
    }
    let eig = SymmetricEigen::new(kernel.clone());
    let clipped: f64 = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let clip_fraction = clipped / trace;
    if clip_fraction > MAX_CLIP_FRACTION {
        return Err(Error::KernelTooNoisy { clip_fraction });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    let widths = DVector::from_column_slice(widths);
    let samples: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, &[0x11A, r as u64]);
            let z = DVector::from_fn(g, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = &factor * z;
            v.iter().zip(widths.iter()).map(|(x, w)| x.abs() * w).sum()
        })
        .collect();
    Ok(LimitSamples {
        samples,
        clipped,
        clip_fraction,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub stderr: f64,
    /// Slopes over the lower and upper halves of the decade agree, as for a
    /// power law.
    pub stable: bool,
    pub points: Vec<(f64, f64)>,
}

/// Log-spaced grid over the decade below the point with [`MIN_EXCEEDANCES`]
/// samples above it.
pub fn default_tail_grid(samples: &[f64], points: usize) -> Result<Vec<f64>> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::invalid(format!(
            "tail fit needs at least {MIN_TAIL_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let top = s[s.len() - MIN_EXCEEDANCES];
    if !(top > 0.0) {
        return Err(Error::TooFewExceedances {
            found: 0,
            needed: MIN_EXCEEDANCES,
        });
    }
    let points = points.max(4);
    Ok((0..points)
        .map(|i| top * 10f64.powf(i as f64 / (points - 1) as f64 - 1.0))
        .collect())
}

/// Fits `ln P(W >= x)` against `ln x` over the upper decade of `x_grid`.
pub fn tail_exponent(samples: &[f64], x_grid: &[f64]) -> Result<TailFit> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::invalid(format!(
            "tail fit needs at least {MIN_TAIL_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let x_max = x_grid.iter().copied().filter(|x| *x > 0.0).fold(f64::NAN, f64::max);
    if !x_max.is_finite() {
        return Err(Error::invalid("tail grid needs positive points"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let exceed = |x: f64| sorted.len() - sorted.partition_point(|&v| v < x);
    let found = exceed(x_max);
    if found < MIN_EXCEEDANCES {
        return Err(Error::TooFewExceedances {
            found,
            needed: MIN_EXCEEDANCES,
        });
    }
    let mut xs: Vec<f64> = x_grid.iter().copied().filter(|&x| x >= x_max / 10.0 && x <= x_max).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 4 {
        return Err(Error::invalid("tail grid needs at least 4 points in its upper decade"));
    }
    let points: Vec<(f64, f64)> = xs.iter().map(|&x| (x, exceed(x) as f64 / total)).collect();
    let line = |pts: &[(f64, f64)]| -> (f64, f64) {
        let k = pts.len() as f64;
        let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let mx = lx.iter().sum::<f64>() / k;
        let my = ly.iter().sum::<f64>() / k;
        let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let ss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
        let se = if k > 2.0 { (ss / (k - 2.0) / sxx).sqrt() } else { f64::NAN };
        (slope, se)
    };
    let (slope, stderr) = line(&points);
    let half = points.len() / 2;
    let (lo, _) = line(&points[..half.max(2)]);
    let (hi, _) = line(&points[half.min(points.len() - 2)..]);
    let stable = (hi - lo).abs() <= 0.3 * slope.abs().max(1e-12);
    Ok(TailFit {
        slope,
        stderr,
        stable,
        points,
    })
}

/// Writes one row per replica with columns
/// `process, gamma, b, n, replica, w1, seed`.
pub fn write_results_csv<W: Write>(plan: &ExperimentPlan, result: &ExperimentResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["process", "gamma", "b", "n", "replica", "w1", "seed"])?;
    let gamma = plan.process.gamma().map_or(String::new(), fmt12);
    let b = fmt12(plan.process.observable.exponent);
    for p in &result.points {
        for (r, v) in p.values.iter().enumerate() {
            w.write_record([
                plan.process.label(),
                gamma.clone(),
                b.clone(),
                p.n.to_string(),
                r.to_string(),
                fmt12(*v),
                plan.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Decimal rendering with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = 11 - v.abs().log10().floor() as i32;
    if (0..=20).contains(&digits) {
        let s = format!("{:.*}", digits as usize, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.11e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub n: usize,
    pub moments: Vec<MomentEstimate>,
}

/// JSON summary of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub plan_hash: String,
    pub version: String,
    pub process: String,
    pub replicas: usize,
    pub points: Vec<SummaryPoint>,
    pub reference_bias: Option<f64>,
}

pub fn summarize(plan: &ExperimentPlan, result: &ExperimentResult) -> ExperimentSummary {
    ExperimentSummary {
        plan_hash: result.plan_hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        process: plan.process.label(),
        replicas: plan.replicas,
        points: result
            .points
            .iter()
            .map(|p| SummaryPoint {
                n: p.n,
                moments: p.moments.clone(),
            })
            .collect(),
        reference_bias: result.reference_bias,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ProcessSpec;

    #[test]
    fn point_mass_gives_zero() {
        let plan = ExperimentPlan::new(ProcessSpec::iid(LawSpec::PointMass { at: 0.3 }), vec![1, 5, 9], 4);
        let res = run_experiment(&plan).unwrap();
        assert!(res.points.iter().all(|p| p.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn single_uniform_draw() {
        // For a sample {u}, W1 = u^2/2 + (1-u)^2/2 with mean 1/3.
        let plan = ExperimentPlan::new(ProcessSpec::iid(LawSpec::Uniform { lo: 0.0, hi: 1.0 }), vec![1], 20_000);
        let res = run_experiment(&plan).unwrap();
        let m = res.points[0].mean();
        assert!((m - 1.0 / 3.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn exact_synthetic_fits() {
        let ns: Vec<f64> = (8..15).map(|k| 2f64.powi(k)).collect();
        let m: Vec<f64> = ns.iter().map(|n| 3.0 * n.powf(-0.5)).collect();
        let f = fit_rate(&ns, &m, LogCorrection::None).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        let m: Vec<f64> = ns.iter().map(|n| 3.0 * n.powf(-0.5) * n.ln()).collect();
        let f = fit_rate(&ns, &m, LogCorrection::Fit).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-9, "{f:?}");
        assert!(fit_rate(&ns[..3], &m[..3], LogCorrection::None).is_err());
        let mut bad = m.clone();
        bad[2] = 0.0;
        assert!(fit_rate(&ns, &bad, LogCorrection::None).is_err());
    }

    #[test]
    fn ks_cases() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.1], &[5.0, 6.0]).unwrap(), 1.0);
        // Step functions: F_a jumps 1/2 at 0 and 1; F_b by thirds at 0, 0.5, 1.
        let d = ks_distance(&[0.0, 1.0], &[0.0, 0.5, 1.0]).unwrap();
        assert!((d - 1.0 / 6.0).abs() < 1e-15);
        assert!(ks_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn zero_kernel_and_scaling() {
        let z = DMatrix::<f64>::zeros(4, 4);
        let s = simulate_limit_law(&z, &[0.25; 4], 10, 1).unwrap();
        assert!(s.samples.iter().all(|&v| v == 0.0));
        let (t, w) = uniform_cells(0.0, 1.0, 32);
        let k = brownian_bridge_kernel(&t);
        let a = simulate_limit_law(&k, &w, 50, 7).unwrap();
        let b = simulate_limit_law(&(&k * 9.0), &w, 50, 7).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((3.0 * x - y).abs() < 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn noisy_kernel_rejected() {
        let mut k = DMatrix::<f64>::identity(3, 3);
        k[(0, 1)] = 2.0;
        k[(1, 0)] = 2.0;
        assert!(matches!(
            simulate_limit_law(&k, &[1.0; 3], 5, 0),
            Err(Error::KernelTooNoisy { .. })
        ));
    }

    #[test]
    fn kernel_symmetric_and_lag_guard() {
        let spec = ProcessSpec::lsv(0.25).with_seed(3);
        let grid = [0.2, 0.4, 0.6, 0.8];
        let k = covariance_kernel(&spec, &grid, 5, 5000).unwrap();
        assert_eq!(k, k.transpose());
        assert!(covariance_kernel(&spec, &grid, 500, 5000).is_err());
        let pm = ProcessSpec::iid(LawSpec::PointMass { at: 0.5 });
        let k = covariance_kernel(&pm, &grid, 3, 1000).unwrap();
        assert!(k.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tail_exponent_cases() {
        let mut r = stream(5, &[1]);
        let pareto: Vec<f64> = (0..20_000)
            .map(|_| r.random::<f64>().max(1e-300).powf(-1.0 / 1.5))
            .collect();
        let grid = default_tail_grid(&pareto, 16).unwrap();
        let fit = tail_exponent(&pareto, &grid).unwrap();
        assert!((fit.slope + 1.5).abs() < 0.1, "{fit:?}");
        assert!(fit.stable);
        let bounded = vec![0.5; 2000];
        assert!(matches!(
            tail_exponent(&bounded, &[1.0, 2.0, 4.0, 8.0]),
            Err(Error::TooFewExceedances { .. })
        ));
        let expo: Vec<f64> = (0..20_000).map(|_| -r.random::<f64>().max(1e-300).ln()).collect();
        let fit = tail_exponent(&expo, &default_tail_grid(&expo, 16).unwrap()).unwrap();
        assert!(!fit.stable, "{fit:?}");
    }

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(0.25), "0.25");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(12345.678901234567), "12345.6789012");
        assert_eq!(fmt12(1e-30), "1.00000000000e-30");
    }
}
