//! Wasserstein distances on the line.
//!
//! For laws on `R`, `W_1(μ, ν) = ∫ |F_μ - F_ν|` and
//! `W_r^r(μ, ν) = ∫_0^1 |F_μ^{-1}(u) - F_ν^{-1}(u)|^r du`. Both are evaluated
//! piecewise between order statistics, where `F_n` is constant and the
//! integrands are smooth.

use serde::{Deserialize, Serialize};

use crate::distributions::{cdf_integral, EmpiricalLaw, ReferenceLaw};
use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// Uniform law on a finite sample, stored sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        points.sort_by(f64::total_cmp);
        Ok(Self { points })
    }

    pub fn from_slice(points: &[f64]) -> Result<Self> {
        Self::new(points.to_vec())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            points: self.points.iter().map(|x| x + c).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().sum::<f64>() / self.n() as f64
    }
}

/// A transport cost `W_r^r` together with its order `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportCost {
    pub value: f64,
    pub order: f64,
}

impl TransportCost {
    pub fn new(value: f64, order: f64) -> Result<Self> {
        check_order(order)?;
        if !(value >= 0.0) {
            return Err(Error::invalid(format!("transport cost must be nonnegative, got {value}")));
        }
        Ok(Self { value, order })
    }

    /// `W_r = (W_r^r)^{1/r}`.
    pub fn distance(&self) -> f64 {
        self.value.powf(1.0 / self.order)
    }
}

fn check_order(r: f64) -> Result<()> {
    if r >= 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidOrder(r))
    }
}

fn same_size(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::UnequalSampleSizes {
            left: a.n(),
            right: b.n(),
        });
    }
    Ok(())
}

/// `W_1` between two empirical measures of equal size (sorted pairing).
pub fn w1_empirical_pair(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    same_size(a, b)?;
    let s: f64 = a.points.iter().zip(&b.points).map(|(x, y)| (x - y).abs()).sum();
    Ok(s / a.n() as f64)
}

/// `W_r^r` between two empirical measures of equal size.
pub fn wr_empirical_pair(a: &EmpiricalMeasure, b: &EmpiricalMeasure, r: f64) -> Result<f64> {
    check_order(r)?;
    same_size(a, b)?;
    let s: f64 = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(x, y)| (x - y).abs().powf(r))
        .sum();
    Ok(s / a.n() as f64)
}

fn quad() -> Quadrature {
    Quadrature::with_rel_tol(1e-9)
}

/// `∫_a^b |c - F|` for a constant level `c`, exact when `F` has an antiderivative.
fn level_gap(law: &dyn ReferenceLaw, c: f64, a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    // No mass strictly inside: F is flat at F(a).
    let fa = law.cdf(a);
    if law.cdf_left(b) == fa {
        return (c - fa).abs() * (b - a);
    }
    // F < c on [a, t*) and F >= c on [t*, b].
    let t_star = if c <= 0.0 {
        a
    } else if c >= 1.0 && law.cdf(b) < 1.0 {
        b
    } else {
        law.inv_cdf(c).clamp(a, b)
    };
    let below = c * (t_star - a) - cdf_integral(law, a, t_star);
    let above = cdf_integral(law, t_star, b) - c * (b - t_star);
    below.max(0.0) + above.max(0.0)
}

/// `∫_{-∞}^{x} F`.
fn left_tail(law: &dyn ReferenceLaw, x: f64) -> Result<f64> {
    let (lo, _) = law.support();
    if x <= lo {
        return Ok(0.0);
    }
    if let Some(v) = law.integrated_cdf(x) {
        return Ok(v);
    }
    if lo.is_finite() {
        return Ok(cdf_integral(law, lo, x));
    }
    quad().improper_at_infinity(|s| law.cdf(x - s), 0.0)
}

/// `∫_x^{∞} (1 - F)`.
fn right_tail(law: &dyn ReferenceLaw, x: f64) -> Result<f64> {
    let (_, hi) = law.support();
    if x >= hi {
        return Ok(0.0);
    }
    if let Some(v) = law.integrated_survival(x) {
        return Ok(v);
    }
    if hi.is_finite() {
        return Ok((hi - x) - cdf_integral(law, x, hi));
    }
    quad().improper_at_infinity(|s| 1.0 - law.cdf(x + s), 0.0)
}

/// `W_1(μ_n, μ) = ∫ |F_n - F|`.
pub fn w1_vs_law(sample: &EmpiricalMeasure, law: &dyn ReferenceLaw) -> Result<f64> {
    if !law.finite_moment(1.0) {
        return Err(Error::MomentUndefined { order: 1.0 });
    }
    let x = sample.points();
    let n = x.len() as f64;
    let mut total = left_tail(law, x[0])? + right_tail(law, x[x.len() - 1])?;
    for (i, w) in x.windows(2).enumerate() {
        total += level_gap(law, (i + 1) as f64 / n, w[0], w[1]);
    }
    if !total.is_finite() {
        return Err(Error::MomentUndefined { order: 1.0 });
    }
    Ok(total.max(0.0))
}

/// `∫ g` over `[a, b] ⊂ [0, 1]`, treating an unbounded endpoint singularity at
/// 0 or 1. Near 1 the integrand is evaluated through `g_upper(v) = g(1 - v)`.
fn strip_integral<G: Fn(f64) -> f64, U: Fn(f64) -> f64>(
    g: G,
    g_upper: U,
    a: f64,
    b: f64,
    singular_lo: bool,
    singular_hi: bool,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let q = quad();
    if singular_hi && b >= 1.0 {
        return q.improper_at_zero(g_upper, 1.0 - a);
    }
    if singular_lo && a <= 0.0 {
        return q.improper_at_zero(|u| g(u), b);
    }
    Ok(q.integrate(g, a, b).value)
}

/// `W_r^r(μ_n, μ) = ∫_0^1 |F_n^{-1} - F^{-1}|^r`, evaluated strip by strip.
pub fn wr_vs_law(sample: &EmpiricalMeasure, law: &dyn ReferenceLaw, r: f64) -> Result<f64> {
    check_order(r)?;
    if !law.finite_moment(r) {
        return Err(Error::MomentUndefined { order: r });
    }
    let (lo, hi) = law.support();
    let x = sample.points();
    let n = x.len();
    let mut total = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let a = i as f64 / n as f64;
        let b = (i + 1) as f64 / n as f64;
        // F^{-1} <= x_i exactly up to u* = F(x_i).
        let u_star = law.cdf(xi).clamp(a, b);
        let g = |u: f64| (xi - law.inv_cdf(u)).abs().powf(r);
        let g_upper = |v: f64| (xi - law.inv_survival(v)).abs().powf(r);
        total += strip_integral(g, g_upper, a, u_star, !lo.is_finite(), !hi.is_finite())?;
        total += strip_integral(g, g_upper, u_star, b, !lo.is_finite(), !hi.is_finite())?;
    }
    if !total.is_finite() {
        return Err(Error::MomentUndefined { order: r });
    }
    Ok(total)
}

/// `κ_r ∫ |x|^{r-1} |F_n(x) - F(x)| dx` with `κ_r = 2^{r-1} r`, an upper bound for `W_r^r`.
pub fn ebralidze_majorant(sample: &EmpiricalMeasure, law: &dyn ReferenceLaw, r: f64) -> Result<f64> {
    check_order(r)?;
    if r == 1.0 {
        return w1_vs_law(sample, law);
    }
    if !law.finite_moment(r) {
        return Err(Error::Divergent(format!(
            "∫|x|^{}|F_n - F| diverges: reference law lacks a moment of order {r}",
            r - 1.0
        )));
    }
    let kappa = 2f64.powf(r - 1.0) * r;
    let weight = |t: f64| t.abs().powf(r - 1.0);
    let q = quad();
    let x = sample.points();
    let n = x.len() as f64;
    let (lo, hi) = law.support();

    let mut total = 0.0;
    // Interior strips, split at 0 and at the crossing of F with the level.
    for (i, w) in x.windows(2).enumerate() {
        let c = (i + 1) as f64 / n;
        let (a, b) = (w[0], w[1]);
        if a >= b {
            continue;
        }
        let t_star = law.inv_cdf(c).clamp(a, b);
        let mut knots = vec![a, t_star, b];
        if a < 0.0 && b > 0.0 {
            knots.push(0.0);
        }
        knots.sort_by(f64::total_cmp);
        total += q.integrate_knots(|t| weight(t) * (c - law.cdf(t)).abs(), &knots).value;
    }

    // Left tail: ∫_{-∞}^{x_1} |t|^{r-1} F(t).
    let x1 = x[0];
    if x1 > lo {
        let f = |t: f64| weight(t) * law.cdf(t);
        total += if lo.is_finite() {
            let mut knots = vec![lo, x1];
            if lo < 0.0 && x1 > 0.0 {
                knots.insert(1, 0.0);
            }
            q.integrate_knots(f, &knots).value
        } else {
            let split = x1.min(0.0);
            q.integrate(f, split, x1).value + q.improper_at_infinity(|s| f(split - s), 0.0)?
        };
    }
    // Right tail: ∫_{x_n}^{∞} |t|^{r-1} (1 - F(t)).
    let xn = x[x.len() - 1];
    if xn < hi {
        let f = |t: f64| weight(t) * (1.0 - law.cdf(t));
        total += if hi.is_finite() {
            let mut knots = vec![xn, hi];
            if xn < 0.0 && hi > 0.0 {
                knots.insert(1, 0.0);
            }
            q.integrate_knots(f, &knots).value
        } else {
            let split = xn.max(0.0);
            q.integrate(f, xn, split).value + q.improper_at_infinity(|s| f(split + s), 0.0)?
        };
    }
    Ok(kappa * total)
}

/// Dual lower bound for `W_1`: the supremum of `|μ_n(f) - μ(f)|` over
/// piecewise-linear `f` with slope `±1` on each grid cell and constant outside.
///
/// Equals `Σ_cells |∫_cell (F_n - F)|`.
pub fn dual_lower_bound(sample: &EmpiricalMeasure, law: &dyn ReferenceLaw, grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::invalid("dual bound grid needs at least two knots"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("dual bound grid must be finite and strictly increasing"));
    }
    let x = sample.points();
    if grid[0] > x[0] || grid[grid.len() - 1] < x[x.len() - 1] {
        return Err(Error::invalid("dual bound grid must span the sample range"));
    }
    let fn_law = EmpiricalLaw::new(x.to_vec())?;
    let fn_int = |t: f64| fn_law.integrated_cdf(t).expect("empirical antiderivative");
    let mut total = 0.0;
    for w in grid.windows(2) {
        let emp = fn_int(w[1]) - fn_int(w[0]);
        let refr = cdf_integral(law, w[0], w[1]);
        total += (emp - refr).abs();
    }
    Ok(total)
}

/// Largest instance accepted by [`lp_oracle`], counting points of both sides.
pub const LP_ORACLE_LIMIT: usize = 12;

/// Exact optimal transport cost `min Σ π_ij |x_i - y_j|` between two small
/// weighted point sets, by successive shortest paths on the transport network.
pub fn lp_oracle(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    let points = a.len() + b.len();
    if points > LP_ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            points,
            limit: LP_ORACLE_LIMIT,
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|&(x, w)| !x.is_finite() || !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("oracle points need finite locations and nonnegative weights"));
    }
    let mass_a: f64 = a.iter().map(|p| p.1).sum();
    let mass_b: f64 = b.iter().map(|p| p.1).sum();
    if (mass_a - mass_b).abs() > 1e-12 * mass_a.max(mass_b).max(1.0) {
        return Err(Error::invalid(format!("total masses differ: {mass_a} vs {mass_b}")));
    }
    let (na, nb) = (a.len(), b.len());
    // Nodes: 0 = source, 1..=na supplies, na+1..=na+nb demands, na+nb+1 = sink.
    let sink = na + nb + 1;
    let mut net = FlowNetwork::new(sink + 1);
    for (i, &(_, w)) in a.iter().enumerate() {
        net.add_edge(0, 1 + i, w, 0.0);
    }
    for (j, &(_, w)) in b.iter().enumerate() {
        net.add_edge(1 + na + j, sink, w, 0.0);
    }
    for (i, &(x, _)) in a.iter().enumerate() {
        for (j, &(y, _)) in b.iter().enumerate() {
            net.add_edge(1 + i, 1 + na + j, f64::INFINITY, (x - y).abs());
        }
    }
    let target = mass_a.min(mass_b);
    net.min_cost_flow(0, sink, target)
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0, cost: -cost });
    }

    fn min_cost_flow(&mut self, s: usize, t: usize, target: f64) -> Result<f64> {
        let nodes = self.adj.len();
        let eps = 1e-15 * target.max(1.0);
        let mut remaining = target;
        let mut cost = 0.0;
        let mut rounds = 0;
        while remaining > eps {
            rounds += 1;
            if rounds > 10 * self.edges.len() + 10 {
                return Err(Error::NonConvergent {
                    iterations: rounds,
                    residual: remaining,
                });
            }
            // Bellman-Ford: residual graph may carry negative reverse costs.
            let mut dist = vec![f64::INFINITY; nodes];
            let mut via = vec![usize::MAX; nodes];
            dist[s] = 0.0;
            for _ in 0..nodes {
                let mut changed = false;
                for u in 0..nodes {
                    if dist[u] == f64::INFINITY {
                        continue;
                    }
                    for &e in &self.adj[u] {
                        let edge = &self.edges[e];
                        if edge.cap > eps && dist[u] + edge.cost < dist[edge.to] - 1e-15 {
                            dist[edge.to] = dist[u] + edge.cost;
                            via[edge.to] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[t] == f64::INFINITY {
                return Err(Error::invalid("transport network disconnected"));
            }
            let mut push = remaining;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            cost += push * dist[t];
            remaining -= push;
        }
        Ok(cost.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Exponential, Pareto, PointMass, QuadratureOnly, Uniform};

    fn em(v: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_slice(v).unwrap()
    }

    #[test]
    fn empirical_pairs() {
        assert_eq!(w1_empirical_pair(&em(&[0.3, 0.7]), &em(&[0.7, 0.3])).unwrap(), 0.0);
        assert_eq!(w1_empirical_pair(&em(&[0.0]), &em(&[1.0])).unwrap(), 1.0);
        assert_eq!(w1_empirical_pair(&em(&[0.0, 1.0]), &em(&[0.5, 0.5])).unwrap(), 0.5);
        assert_eq!(wr_empirical_pair(&em(&[0.0]), &em(&[2.0]), 2.0).unwrap(), 4.0);
        assert_eq!(wr_empirical_pair(&em(&[0.0, 1.0]), &em(&[0.5, 0.5]), 2.0).unwrap(), 0.25);
        let err = w1_empirical_pair(&em(&[0.0]), &em(&[0.0, 1.0])).unwrap_err();
        assert!(err.to_string().contains("unequal sample sizes"));
        assert!(matches!(
            wr_empirical_pair(&em(&[0.0]), &em(&[1.0]), 0.5),
            Err(Error::InvalidOrder(_))
        ));
    }

    #[test]
    fn against_uniform() {
        let u = Uniform::unit();
        assert!((w1_vs_law(&em(&[0.5]), &u).unwrap() - 0.25).abs() < 1e-15);
        assert!((w1_vs_law(&em(&[0.25, 0.75]), &u).unwrap() - 0.125).abs() < 1e-15);
        assert!((wr_vs_law(&em(&[0.5]), &u, 1.0).unwrap() - 0.25).abs() < 1e-12);
        assert!((wr_vs_law(&em(&[0.5]), &u, 2.0).unwrap() - 1.0 / 12.0).abs() < 1e-12);
        assert!((ebralidze_majorant(&em(&[0.5]), &u, 2.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn against_point_mass() {
        let p = PointMass { at: 0.7 };
        let s = em(&[0.7; 5]);
        assert_eq!(w1_vs_law(&s, &p).unwrap(), 0.0);
        for r in [1.0, 2.0, 3.5] {
            assert_eq!(wr_vs_law(&s, &p, r).unwrap(), 0.0);
            assert_eq!(ebralidze_majorant(&s, &p, r).unwrap(), 0.0);
        }
    }

    #[test]
    fn quadrature_path_matches_antiderivatives() {
        let s = em(&[0.1, 0.4, 0.45, 1.3, 2.9]);
        let e = Exponential::new(1.5).unwrap();
        let exact = w1_vs_law(&s, &e).unwrap();
        let numeric = w1_vs_law(&s, &QuadratureOnly(e)).unwrap();
        assert!((exact - numeric).abs() < 1e-9 * exact, "{exact} vs {numeric}");
        let w = wr_vs_law(&s, &e, 1.0).unwrap();
        assert!((exact - w).abs() < 1e-8 * exact, "{exact} vs {w}");
    }

    #[test]
    fn heavy_tail_moment_checks() {
        let p = Pareto::new(1.5).unwrap();
        let s = em(&[1.5, 2.0]);
        assert!(w1_vs_law(&s, &p).is_ok());
        assert!(matches!(wr_vs_law(&s, &p, 2.0), Err(Error::MomentUndefined { .. })));
        assert!(matches!(ebralidze_majorant(&s, &p, 2.0), Err(Error::Divergent(_))));
        let heavy = Pareto::new(0.8).unwrap();
        let err = w1_vs_law(&s, &heavy).unwrap_err();
        assert!(err.to_string().contains("W1 undefined"), "{err}");
    }

    #[test]
    fn dual_bound_approaches_w1() {
        let u = Uniform::unit();
        let grid: Vec<f64> = (0..1024).map(|i| i as f64 / 1023.0).collect();
        let d = dual_lower_bound(&em(&[0.5]), &u, &grid).unwrap();
        assert!((d - 0.25).abs() < 1e-3 && d <= 0.25 + 1e-15, "{d}");
        assert!(dual_lower_bound(&em(&[0.5]), &u, &[0.0]).is_err());
    }

    #[test]
    fn lp_oracle_examples() {
        assert_eq!(lp_oracle(&[(0.0, 1.0)], &[(1.0, 1.0)]).unwrap(), 1.0);
        assert!((lp_oracle(&[(0.0, 0.5), (1.0, 0.5)], &[(0.5, 1.0)]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(lp_oracle(&[(0.2, 0.3), (0.4, 0.7)], &[(0.2, 0.3), (0.4, 0.7)]).unwrap(), 0.0);
        let big: Vec<(f64, f64)> = (0..7).map(|i| (i as f64, 1.0)).collect();
        let err = lp_oracle(&big, &big).unwrap_err();
        assert!(err.to_string().contains("desk-scale"));
    }
}
