//! Ulam discretization of the transfer operator of an interval map.
//!
//! On a partition `I_0, ..., I_{m-1}` of `[0, 1]`,
//! `L_ij = λ(I_i ∩ θ^{-1} I_j) / λ(I_i)` is row-stochastic. Its invariant
//! probability vector `π` gives the density `h_i = π_i / λ(I_i)`, and the
//! time reversal `K_ji = π_i L_ij / π_j` is the kernel of the stationary
//! chain whose reversed paths are distributed as map orbits.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Observable, ObservableKind, PowerTail, TabulatedLaw};
use crate::dynamics::GpmMap;
use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds an `n × n` matrix from triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[i + 1] += 1;
            indices.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let trip = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(n, trip)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(k, _)| k == j).map_or(0.0, |(_, v)| v)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `y = M x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn transpose(&self) -> Self {
        let trip = (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (j, i, v))).collect();
        Self::from_triplets(self.n, trip)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    fn scale_rows(&mut self, s: &[f64]) {
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                self.values[k] *= s[i];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    Uniform,
    /// Edges `(i/m)^{1/(1-γ)}`, refined near the neutral fixed point.
    Graded,
}

impl MeshKind {
    fn code(self) -> u8 {
        match self {
            MeshKind::Uniform => 0,
            MeshKind::Graded => 1,
        }
    }
}

/// Bin edges for `m` bins.
pub fn mesh_edges(m: usize, kind: MeshKind, gamma: Option<f64>) -> Result<Vec<f64>> {
    let power = match kind {
        MeshKind::Uniform => 1.0,
        MeshKind::Graded => {
            let g = gamma.ok_or_else(|| Error::invalid("graded mesh needs a neutral exponent γ"))?;
            1.0 / (1.0 - g)
        }
    };
    let mut e: Vec<f64> = (0..=m).map(|i| (i as f64 / m as f64).powf(power)).collect();
    e[m] = 1.0;
    Ok(e)
}

pub const MIN_BINS: usize = 16;
pub const MAX_SWEEPS: usize = 100_000;
pub const INVARIANT_TOL: f64 = 1e-10;

/// Discretized transfer operator with its invariant density and reversed kernel.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    edges: Vec<f64>,
    mesh: MeshKind,
    gamma: Option<f64>,
    l: SparseMatrix,
    pi: Vec<f64>,
    h: Vec<f64>,
    k: SparseMatrix,
    residual: f64,
}

/// Builds the Ulam matrix of `map` on `m` bins.
pub fn build_ulam(map: &GpmMap, m: usize, mesh: MeshKind) -> Result<UlamOperator> {
    if m < MIN_BINS {
        return Err(Error::invalid(format!("Ulam operator needs m >= {MIN_BINS} bins, got {m}")));
    }
    let edges = mesh_edges(m, mesh, map.gamma())?;
    let bin_of = |y: f64| (edges.partition_point(|&e| e <= y).max(1) - 1).min(m - 1);
    let mut trip = Vec::with_capacity(4 * m);
    for k in 0..map.branches().len() {
        let (a, b) = map.branch_domain(k);
        let (ya, yb) = (map.eval_branch(k, a).clamp(0.0, 1.0), map.eval_branch(k, b).clamp(0.0, 1.0));
        let (img_lo, img_hi) = (ya.min(yb), ya.max(yb));
        let mut prev: Option<(f64, f64)> = None;
        for j in bin_of(img_lo)..=bin_of(img_hi) {
            let y_lo = edges[j].max(img_lo);
            let y_hi = edges[j + 1].min(img_hi);
            if y_hi <= y_lo {
                continue;
            }
            let p_lo = match prev {
                Some((y, p)) if y == y_lo => p,
                _ => map.branch_inverse(k, y_lo),
            };
            let p_hi = map.branch_inverse(k, y_hi);
            prev = Some((y_hi, p_hi));
            let (p, q) = (p_lo.min(p_hi), p_lo.max(p_hi));
            if q <= p {
                continue;
            }
            for i in bin_of(p)..=bin_of(q) {
                let overlap = q.min(edges[i + 1]) - p.max(edges[i]);
                if overlap > 0.0 {
                    trip.push((i, j, overlap / (edges[i + 1] - edges[i])));
                }
            }
        }
    }
    let mut l = SparseMatrix::from_triplets(m, trip);
    let sums = l.row_sums();
    if let Some((i, s)) = sums.iter().enumerate().find(|(_, s)| (**s - 1.0).abs() > 1e-9) {
        return Err(Error::invalid(format!("Ulam row {i} sums to {s}; map does not cover [0, 1]")));
    }
    l.scale_rows(&sums.iter().map(|s| 1.0 / s).collect::<Vec<_>>());
    UlamOperator::assemble(edges, mesh, map.gamma(), l)
}

impl UlamOperator {
    /// Operator from a given row-stochastic matrix on a partition of `[0, 1]`.
    pub fn from_matrix(edges: Vec<f64>, l: SparseMatrix) -> Result<Self> {
        if edges.len() != l.dim() + 1 || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("edges must be increasing with one more entry than the matrix"));
        }
        let sums = l.row_sums();
        if let Some((i, s)) = sums.iter().enumerate().find(|(_, s)| (**s - 1.0).abs() > 1e-12) {
            return Err(Error::invalid(format!("matrix row {i} sums to {s}, not 1")));
        }
        Self::assemble(edges, MeshKind::Uniform, None, l)
    }

    fn assemble(edges: Vec<f64>, mesh: MeshKind, gamma: Option<f64>, l: SparseMatrix) -> Result<Self> {
        let (pi, residual) = invariant_vector(&l)?;
        let h: Vec<f64> = pi
            .iter()
            .zip(edges.windows(2))
            .map(|(p, w)| p / (w[1] - w[0]))
            .collect();
        let lt = l.transpose();
        // Row j of K: (i, π_i L_ij / π_j).
        let m = l.dim();
        let mut trip = Vec::with_capacity(l.nnz());
        for j in 0..m {
            if pi[j] > 0.0 {
                for (i, v) in lt.row(j) {
                    trip.push((j, i, pi[i] * v / pi[j]));
                }
            } else {
                trip.push((j, j, 1.0));
            }
        }
        let mut k = SparseMatrix::from_triplets(m, trip);
        let ksums = k.row_sums();
        k.scale_rows(&ksums.iter().map(|s| 1.0 / s).collect::<Vec<_>>());
        Ok(Self {
            edges,
            mesh,
            gamma,
            l,
            pi,
            h,
            k,
            residual,
        })
    }

    pub fn m(&self) -> usize {
        self.pi.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn mesh(&self) -> MeshKind {
        self.mesh
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn transfer(&self) -> &SparseMatrix {
        &self.l
    }

    pub fn kernel(&self) -> &SparseMatrix {
        &self.k
    }

    /// Invariant bin masses `ν_i = h_i λ(I_i)`.
    pub fn nu(&self) -> &[f64] {
        &self.pi
    }

    pub fn density(&self) -> &[f64] {
        &self.h
    }

    /// `‖πL - π‖_1` reached by the invariant-vector solver.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Largest deviation of `(νK)_i` from `ν_i`.
    pub fn invariance_defect(&self) -> f64 {
        let kt = self.k.transpose();
        let mut out = vec![0.0; self.m()];
        kt.mul_vec(&self.pi, &mut out);
        out.iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Writes `bin_lo,bin_hi,h` rows.
    pub fn write_density_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_lo", "bin_hi", "h"])?;
        for (e, h) in self.edges.windows(2).zip(&self.h) {
            w.write_record([format!("{:.17e}", e[0]), format!("{:.17e}", e[1]), format!("{h:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binary form: magic `ULAM`, `m` (u64), `γ` (f64, NaN if none), mesh code
    /// (u8), then `L` row-major dense and `h`, all little-endian. The dense
    /// layout takes `8 m²` bytes.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.m();
        w.write_all(b"ULAM")?;
        w.write_all(&(m as u64).to_le_bytes())?;
        w.write_all(&self.gamma.unwrap_or(f64::NAN).to_le_bytes())?;
        w.write_all(&[self.mesh.code()])?;
        let mut row = vec![0.0; m];
        for i in 0..m {
            row.iter_mut().for_each(|v| *v = 0.0);
            for (j, v) in self.l.row(i) {
                row[j] = v;
            }
            for v in &row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for v in &self.h {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"ULAM" {
            return Err(Error::invalid("not an Ulam operator file"));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let m = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let g = f64::from_le_bytes(b8);
        let gamma = (!g.is_nan()).then_some(g);
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let mesh = match code[0] {
            0 => MeshKind::Uniform,
            1 => MeshKind::Graded,
            c => return Err(Error::invalid(format!("unknown mesh code {c}"))),
        };
        let mut trip = Vec::new();
        for i in 0..m {
            for j in 0..m {
                r.read_exact(&mut b8)?;
                let v = f64::from_le_bytes(b8);
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        let mut h = Vec::with_capacity(m);
        for _ in 0..m {
            r.read_exact(&mut b8)?;
            h.push(f64::from_le_bytes(b8));
        }
        let edges = mesh_edges(m, mesh, gamma)?;
        let mut op = Self::assemble(edges, mesh, gamma, SparseMatrix::from_triplets(m, trip))?;
        let pi: Vec<f64> = h.iter().zip(op.widths()).map(|(h, w)| h * w).collect();
        if pi.iter().zip(&op.pi).any(|(a, b)| (a - b).abs() > 1e-8) {
            return Err(Error::invalid("stored density is not invariant for the stored matrix"));
        }
        op.h = h;
        Ok(op)
    }
}

/// Invariant probability row vector of a stochastic matrix by Gauss–Seidel
/// sweeps on `π_j (1 - L_jj) = Σ_{i≠j} π_i L_ij`.
fn invariant_vector(l: &SparseMatrix) -> Result<(Vec<f64>, f64)> {
    let m = l.dim();
    let lt = l.transpose();
    // 1 - L_jj as the off-diagonal row mass, which keeps precision for sticky bins.
    let leave: Vec<f64> = (0..m).map(|j| l.row(j).filter(|&(k, _)| k != j).map(|(_, v)| v).sum()).collect();
    if let Some(j) = leave.iter().position(|&v| v <= 0.0) {
        return Err(Error::invalid(format!("bin {j} is absorbing; no unique invariant density")));
    }
    let mut pi = vec![1.0 / m as f64; m];
    let mut image = vec![0.0; m];
    let mut residual = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        for j in 0..m {
            let s: f64 = lt.row(j).filter(|&(i, _)| i != j).map(|(i, v)| pi[i] * v).sum();
            pi[j] = s / leave[j];
        }
        let total: f64 = pi.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NonConvergent {
                iterations: sweep,
                residual: f64::NAN,
            });
        }
        pi.iter_mut().for_each(|p| *p /= total);
        if sweep % 4 == 0 || sweep < 4 {
            lt.mul_vec(&pi, &mut image);
            residual = image.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            if residual <= INVARIANT_TOL {
                return Ok((pi, residual));
            }
        }
    }
    Err(Error::NonConvergent {
        iterations: MAX_SWEEPS,
        residual,
    })
}

/// Dependence coefficient estimate at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub lag: usize,
    pub value: f64,
    /// Number of thresholds the supremum was taken over.
    pub grid_size: usize,
}

/// Cut positions `c` (threshold sets `{bins < c}`) where `g` changes value,
/// subsampled to about `grid` positions: half evenly spaced in `ν`-mass and
/// half log-spaced in bin index towards both ends.
fn threshold_cuts(op: &UlamOperator, g: &Observable, grid: usize) -> Result<Vec<usize>> {
    g.validate()?;
    let m = op.m();
    let values: Vec<f64> = op.midpoints().iter().map(|&x| g.apply(x)).collect();
    let admissible: Vec<usize> = (1..m).filter(|&c| values[c] != values[c - 1]).collect();
    if admissible.len() <= grid.max(1) {
        return Ok(admissible);
    }
    let mut cuts = Vec::with_capacity(grid + 4);
    let half = (grid / 2).max(1);
    let mut cum = 0.0;
    let mut next = 1;
    for (c, p) in op.nu().iter().enumerate().take(m - 1) {
        cum += p;
        while next <= half && cum >= next as f64 / (half + 1) as f64 {
            cuts.push(c + 1);
            next += 1;
        }
    }
    let quarter = (grid / 4).max(1);
    let lm = (m as f64 / 2.0).ln();
    for q in 0..quarter {
        let off = (lm * q as f64 / quarter as f64).exp().round() as usize;
        cuts.push(off.clamp(1, m - 1));
        cuts.push((m - off).clamp(1, m - 1));
    }
    cuts.sort_unstable();
    cuts.dedup();
    // Snap to admissible positions.
    let mut snapped: Vec<usize> = cuts
        .iter()
        .map(|&c| {
            let k = admissible.partition_point(|&a| a < c).min(admissible.len() - 1);
            admissible[k]
        })
        .collect();
    snapped.dedup();
    Ok(snapped)
}

fn indicator_below(m: usize, cut: usize) -> Vec<f64> {
    (0..m).map(|i| if i < cut { 1.0 } else { 0.0 }).collect()
}

fn centered_l1(nu: &[f64], v: &[f64]) -> f64 {
    let mean: f64 = nu.iter().zip(v).map(|(p, x)| p * x).sum();
    nu.iter().zip(v).map(|(p, x)| p * (x - mean).abs()).sum()
}

/// `‖K^n φ - ν(φ)‖_{L¹(ν)}` for every requested lag (sorted ascending).
fn decay_profile(op: &UlamOperator, phi: Vec<f64>, lags: &[usize]) -> Vec<f64> {
    let mut v = phi;
    let mut w = vec![0.0; v.len()];
    let mut out = Vec::with_capacity(lags.len());
    let mut step = 0;
    for &lag in lags {
        while step < lag {
            op.k.mul_vec(&v, &mut w);
            std::mem::swap(&mut v, &mut w);
            step += 1;
        }
        out.push(centered_l1(&op.pi, &v));
    }
    out
}

fn sorted_lags(lags: &[usize]) -> Result<Vec<usize>> {
    if lags.is_empty() || lags.contains(&0) {
        return Err(Error::invalid("lags must be positive"));
    }
    let mut l = lags.to_vec();
    l.sort_unstable();
    l.dedup();
    Ok(l)
}

/// `α̂_1(n) = max_x Σ_i ν_i |(K^n 1_{A_x})_i - ν(A_x)|` at each lag.
pub fn alpha1_profile(op: &UlamOperator, g: &Observable, lags: &[usize], x_grid: usize) -> Result<Vec<AlphaEstimate>> {
    let lags = sorted_lags(lags)?;
    let cuts = threshold_cuts(op, g, x_grid)?;
    let m = op.m();
    let per_cut: Vec<Vec<f64>> = cuts
        .par_iter()
        .map(|&c| decay_profile(op, indicator_below(m, c), &lags))
        .collect();
    Ok(lags
        .iter()
        .enumerate()
        .map(|(k, &lag)| AlphaEstimate {
            lag,
            value: per_cut.iter().map(|p| p[k]).fold(0.0, f64::max),
            grid_size: cuts.len(),
        })
        .collect())
}

pub fn alpha1(op: &UlamOperator, g: &Observable, lag: usize, x_grid: usize) -> Result<AlphaEstimate> {
    Ok(alpha1_profile(op, g, &[lag], x_grid)?[0])
}

/// Gap grid `{0, 1, 2, 4, ..., 256}`.
pub fn default_gap_grid() -> Vec<usize> {
    std::iter::once(0).chain((0..=8).map(|k| 1 << k)).collect()
}

/// `α̂_2(n)`: the larger of `α̂_1(n)` and the two-indicator term
/// `max ‖K^{i_1}(c_1 ⊙ K^{d} c_2) - ν(·)‖_1` over threshold pairs and gaps
/// `d = i_2 - i_1` in `gaps`. Since `K` contracts `L¹(ν)`, `i_1 = n` attains
/// the supremum over `i_1 >= n`.
pub fn alpha2_profile(
    op: &UlamOperator,
    g: &Observable,
    lags: &[usize],
    x_grid: usize,
    gaps: &[usize],
) -> Result<Vec<AlphaEstimate>> {
    let lags = sorted_lags(lags)?;
    let a1 = alpha1_profile(op, g, &lags, x_grid)?;
    let cuts = threshold_cuts(op, g, x_grid)?;
    let m = op.m();
    let nu = &op.pi;
    let centered = |c: usize| -> Vec<f64> {
        let mass: f64 = nu[..c].iter().sum();
        (0..m).map(|i| if i < c { 1.0 - mass } else { -mass }).collect()
    };
    let mut gaps = gaps.to_vec();
    gaps.sort_unstable();
    gaps.dedup();
    // K^d c_2 for every cut and gap.
    let shifted: Vec<Vec<Vec<f64>>> = cuts
        .par_iter()
        .map(|&c| {
            let mut v = centered(c);
            let mut w = vec![0.0; m];
            let mut out = Vec::with_capacity(gaps.len());
            let mut step = 0;
            for &d in &gaps {
                while step < d {
                    op.k.mul_vec(&v, &mut w);
                    std::mem::swap(&mut v, &mut w);
                    step += 1;
                }
                out.push(v.clone());
            }
            out
        })
        .collect();
    let (nc, ng) = (cuts.len(), gaps.len());
    let jobs: Vec<(usize, usize, usize)> = (0..nc)
        .flat_map(|a| (0..nc).flat_map(move |b| (0..ng).map(move |d| (a, b, d))))
        .collect();
    let pair_terms: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(a, b, d)| {
            let c1 = centered(cuts[a]);
            let phi: Vec<f64> = c1.iter().zip(&shifted[b][d]).map(|(x, y)| x * y).collect();
            decay_profile(op, phi, &lags)
        })
        .collect();
    Ok(a1
        .iter()
        .enumerate()
        .map(|(k, e)| AlphaEstimate {
            lag: e.lag,
            value: pair_terms.iter().map(|p| p[k]).fold(e.value, f64::max),
            grid_size: cuts.len(),
        })
        .collect())
}

pub fn alpha2(op: &UlamOperator, g: &Observable, lag: usize, x_grid: usize, gaps: &[usize]) -> Result<AlphaEstimate> {
    Ok(alpha2_profile(op, g, &[lag], x_grid, gaps)?[0])
}

/// Least-squares nonincreasing fit (pool adjacent violators, equal weights).
pub fn isotonic_nonincreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.iter().flat_map(|&(v, n)| std::iter::repeat(v).take(n)).collect()
}

/// Isotonic smoothing of a lag-ordered profile.
pub fn smooth_profile(profile: &[AlphaEstimate]) -> Vec<AlphaEstimate> {
    let vals: Vec<f64> = profile.iter().map(|e| e.value).collect();
    profile
        .iter()
        .zip(isotonic_nonincreasing(&vals))
        .map(|(e, v)| AlphaEstimate { value: v, ..*e })
        .collect()
}

/// Slope of `log α̂` against `log lag` (positive values only).
pub fn decay_slope(profile: &[AlphaEstimate]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|e| e.value > 0.0)
        .map(|e| ((e.lag as f64).ln(), e.value.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Law of `g(Y)` under the discrete invariant measure, spreading each bin's
/// mass uniformly between the images of its edges. An infinite image at a
/// singular end becomes a power tail `t^{-(1-γ')/b}`, with `γ' = γ` at the
/// neutral fixed point 0 and `γ' = 0` otherwise.
pub fn pushforward_law(op: &UlamOperator, g: &Observable) -> Result<TabulatedLaw> {
    g.validate()?;
    let m = op.m();
    let inc = g.is_increasing();
    let img: Vec<f64> = op.edges.iter().map(|&x| g.apply(x)).collect();
    // Order bins by increasing image.
    let order: Vec<usize> = if inc { (0..m).collect() } else { (0..m).rev().collect() };
    let lo_edge = |i: usize| if inc { img[i] } else { img[i + 1] };
    let hi_edge = |i: usize| if inc { img[i + 1] } else { img[i] };
    let mut t = Vec::with_capacity(m + 1);
    let mut f = Vec::with_capacity(m + 1);
    t.push(lo_edge(order[0]));
    f.push(0.0);
    let mut cum = 0.0;
    let mut prev = t[0];
    for &i in &order {
        let (a, b) = (lo_edge(i), hi_edge(i));
        if a.is_finite() && (a < prev - 1e-12 * prev.abs().max(1.0)) || (b < a) {
            return Err(Error::invalid(format!("observable `{}` is not monotone", g.label())));
        }
        cum += op.pi[i];
        prev = b;
        t.push(b);
        f.push(cum.min(1.0));
    }
    if !t[0].is_finite() {
        return Err(Error::invalid("observable is infinite at its lower end"));
    }
    let last = t.len() - 1;
    let tail = if t[last].is_finite() {
        f[last] = 1.0;
        None
    } else {
        let b = g.exponent;
        if !matches!(g.kind, ObservableKind::SingularAtZero | ObservableKind::SingularAtOne) || b <= 0.0 {
            return Err(Error::invalid("observable is infinite at an end but has no power singularity"));
        }
        let gamma_eff = match g.kind {
            ObservableKind::SingularAtZero => op.gamma.unwrap_or(0.0),
            _ => 0.0,
        };
        t.pop();
        f.pop();
        Some(PowerTail {
            exponent: (1.0 - gamma_eff) / b,
        })
    };
    TabulatedLaw::new(t, f, tail)
}
