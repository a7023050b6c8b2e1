//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use wasslab_core::bounds::{
    bound_l2_w1, bound_mean_w1, equiv_identity_check, quantile_conditions, AlphaSequence, TailModel,
};
use wasslab_core::distributions::{LawSpec, Observable, Uniform};
use wasslab_core::dynamics::{GpmMap, ProcessSpec};
use wasslab_core::montecarlo::{
    brownian_bridge_kernel, default_tail_grid, ks_distance, regress_rate, run_experiment, simulate_limit_law,
    tail_exponent, uniform_cells, ExperimentPlan, LogCorrection,
};
use wasslab_core::rng::stream;
use wasslab_core::transfer_operator::{alpha1_profile, build_ulam, decay_slope, pushforward_law, smooth_profile, MeshKind};
use wasslab_core::transport::{
    ebralidze_majorant, lp_oracle, w1_empirical_pair, wr_vs_law, EmpiricalMeasure,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

fn uniform_law() -> LawSpec {
    LawSpec::Uniform { lo: 0.0, hi: 1.0 }
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = stream(1, &[1]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w = 1.0 / n as f64;
        let lp = lp_oracle(
            &a.iter().map(|&x| (x, w)).collect::<Vec<_>>(),
            &b.iter().map(|&y| (y, w)).collect::<Vec<_>>(),
        )
        .unwrap();
        let sorted = w1_empirical_pair(
            &EmpiricalMeasure::new(a).unwrap(),
            &EmpiricalMeasure::new(b).unwrap(),
        )
        .unwrap();
        worst = worst.max((lp - sorted).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && secs < 5.0,
        format!("max |sorted - LP| = {worst:.2e} over 1000 instances, {secs:.2} s"),
    )
}

fn ebralidze_validity() -> Outcome {
    let t = Instant::now();
    let law = Uniform::unit();
    let mut rng = stream(2, &[2]);
    let mut violations = 0;
    let mut worst_r1: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let pts: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..1.5)).collect();
        let sample = EmpiricalMeasure::new(pts).unwrap();
        for r in [1.0, 2.0, 3.0] {
            let major = ebralidze_majorant(&sample, &law, r).unwrap();
            let cost = wr_vs_law(&sample, &law, r).unwrap();
            if major < cost * (1.0 - 1e-12) - 1e-14 {
                violations += 1;
            }
            if r == 1.0 {
                worst_r1 = worst_r1.max((major - cost).abs() / cost.max(1e-300));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        violations == 0 && worst_r1 <= 1e-9 && secs < 30.0,
        format!("{violations} violations, r = 1 relative gap {worst_r1:.2e}, {secs:.2} s"),
    )
}

fn iid_rate() -> Outcome {
    let plan = ExperimentPlan::new(ProcessSpec::iid(uniform_law()), powers_of_two(8, 14), 200).with_seed(3);
    let res = run_experiment(&plan).unwrap();
    let fit = regress_rate(&res, 1.0, LogCorrection::None).unwrap();
    outcome(
        (fit.slope + 0.5).abs() <= 0.05,
        format!("slope {:.4} ± {:.4} (target -0.50 ± 0.05)", fit.slope, fit.stderr),
    )
}

fn clt_limit() -> Outcome {
    let n = 4096usize;
    let plan = ExperimentPlan::new(ProcessSpec::iid(uniform_law()), vec![n], 2000).with_seed(4);
    let res = run_experiment(&plan).unwrap();
    let scaled: Vec<f64> = res.points[0].values.iter().map(|v| v * (n as f64).sqrt()).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let target = (2.0 * std::f64::consts::PI).sqrt() / 8.0;
    let (grid, widths) = uniform_cells(0.0, 1.0, 512);
    let limit = simulate_limit_law(&brownian_bridge_kernel(&grid), &widths, 20_000, 4).unwrap();
    let ks = ks_distance(&scaled, &limit.samples).unwrap();
    let rel = (mean - target).abs() / target;
    outcome(
        rel <= 0.03 && ks < 0.05,
        format!("mean sqrt(n) W1 = {mean:.4} (target {target:.4}, rel {rel:.3}), KS = {ks:.4}"),
    )
}

fn lsv_fast_regime() -> Outcome {
    let plan = ExperimentPlan::new(ProcessSpec::lsv(0.25).with_seed(5), powers_of_two(10, 16), 100).with_seed(5);
    let res = run_experiment(&plan).unwrap();
    let fit = regress_rate(&res, 1.0, LogCorrection::None).unwrap();
    outcome(
        (fit.slope + 0.5).abs() <= 0.07,
        format!("slope {:.4} ± {:.4} (target -0.50 ± 0.07)", fit.slope, fit.stderr),
    )
}

fn lsv_slow_regime() -> Outcome {
    let gamma = 0.75;
    let plan = ExperimentPlan::new(ProcessSpec::lsv(gamma).with_seed(6), powers_of_two(10, 16), 100).with_seed(6);
    let res = run_experiment(&plan).unwrap();
    let fit = regress_rate(&res, 1.0, LogCorrection::Fit).unwrap();
    let plain = regress_rate(&res, 1.0, LogCorrection::None).unwrap();
    let target = (gamma - 1.0) / (2.0 * gamma);
    outcome(
        (fit.slope - target).abs() <= 0.08,
        format!(
            "slope with ln ln n term {:.4} ± {:.4} (target {target:.4} ± 0.08); plain slope {:.4} ± {:.4}",
            fit.slope, fit.stderr, plain.slope, plain.stderr
        ),
    )
}

fn coefficient_decay() -> Outcome {
    let op = build_ulam(&GpmMap::lsv(0.5).unwrap(), 1 << 13, MeshKind::Graded).unwrap();
    let lags: Vec<usize> = (2..=8).map(|k| 1usize << k).collect();
    let profile = alpha1_profile(&op, &Observable::identity(), &lags, 64).unwrap();
    let slope = decay_slope(&smooth_profile(&profile)).unwrap_or(f64::NAN);
    outcome(
        (slope + 1.0).abs() <= 0.2,
        format!("log-log slope of α̂1 over lags 4..256: {slope:.4} (target -1.0 ± 0.2)"),
    )
}

fn density_shape() -> Outcome {
    let mut ratios = Vec::new();
    for gamma in [0.25, 0.5] {
        let op = build_ulam(&GpmMap::lsv(gamma).unwrap(), 1 << 13, MeshKind::Graded).unwrap();
        let v: Vec<f64> = op
            .density()
            .iter()
            .zip(op.midpoints())
            .map(|(h, x)| h * x.powf(gamma))
            .collect();
        let inner = &v[2..v.len() - 2];
        let hi = inner.iter().copied().fold(0.0, f64::max);
        let lo = inner.iter().copied().fold(f64::INFINITY, f64::min);
        ratios.push(hi / lo);
    }
    outcome(
        ratios.iter().all(|&r| r < 10.0),
        format!("max/min of h(x) x^γ: γ=0.25 {:.3}, γ=0.5 {:.3} (limit 10)", ratios[0], ratios[1]),
    )
}

fn bound_validity() -> Outcome {
    let ns = powers_of_two(8, 14);
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    let mut check = |label: &str, plan: ExperimentPlan, seq: &AlphaSequence, tail: &TailModel| {
        let res = run_experiment(&plan).unwrap();
        for p in &res.points {
            let n = p.n as u64;
            let m1 = p.moment(1.0).unwrap();
            let m2 = p.moment(2.0).unwrap();
            let b1 = bound_mean_w1(seq, tail, n).unwrap();
            let b2 = bound_l2_w1(seq, tail, n).unwrap();
            worst_ratio = worst_ratio.max(m1.value / b1).max(m2.value / b2);
            if m1.value > b1 + 2.0 * m1.ci_width() || m2.value > b2 + 2.0 * m2.ci_width() {
                failures.push(format!("{label} n={n}"));
            }
        }
    };
    check(
        "iid",
        ExperimentPlan::new(ProcessSpec::iid(uniform_law()), ns.clone(), 100).with_seed(9),
        &AlphaSequence::independent(),
        &TailModel::Law(Arc::new(Uniform::unit())),
    );
    let gamma = 0.25;
    let op = build_ulam(&GpmMap::lsv(gamma).unwrap(), 1 << 13, MeshKind::Graded).unwrap();
    let g = Observable::identity();
    let lags: Vec<usize> = (1..=256).collect();
    let profile = smooth_profile(&alpha1_profile(&op, &g, &lags, 64).unwrap());
    let mut table = vec![profile[0].value.max(0.25)];
    table.extend(profile.iter().map(|a| a.value));
    let seq = AlphaSequence::table_with_tail(table, (1.0 - gamma) / gamma).unwrap();
    let tail = TailModel::Law(Arc::new(pushforward_law(&op, &g).unwrap()));
    check(
        "lsv",
        ExperimentPlan::new(ProcessSpec::lsv(gamma).with_seed(9), ns, 100).with_seed(9),
        &seq,
        &tail,
    );
    outcome(
        failures.is_empty(),
        format!(
            "largest estimate/bound ratio {worst_ratio:.3} over 14 grid points; violations: {}",
            if failures.is_empty() { "none".to_string() } else { failures.join(", ") }
        ),
    )
}

fn quantile_hierarchy() -> Outcome {
    let t = Instant::now();
    let lin = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / 19.0;
    let mut violations = 0;
    let mut cells = 0;
    for i in 0..20 {
        for j in 0..20 {
            let (a, c) = (lin(1.05, 3.0, i), lin(0.01, 0.48, j));
            let seq = AlphaSequence::polynomial(1.0, a).unwrap();
            let tail = TailModel::power_quantile(c, 1.0).unwrap();
            let r = quantile_conditions(&seq, &tail).unwrap();
            cells += 1;
            if !r.hierarchy_holds() {
                violations += 1;
            }
        }
    }
    // Exact verdicts: every integrand behaves like u^{-(1/a + 2c)} near 0.
    let mut mismatches = 0;
    for (a, c) in [(1.5, 0.05), (3.0, 0.2), (2.0, 0.4), (1.1, 0.3), (2.5, 0.1)] {
        let exact = 1.0 / a + 2.0 * c < 1.0;
        let r = quantile_conditions(
            &AlphaSequence::polynomial(1.0, a).unwrap(),
            &TailModel::power_quantile(c, 1.0).unwrap(),
        )
        .unwrap();
        if r.dmr != exact || r.dm != exact || r.d != exact {
            mismatches += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        violations == 0 && mismatches == 0 && secs < 60.0,
        format!("{violations} hierarchy violations over {cells} cells, {mismatches}/5 exact mismatches, {secs:.1} s"),
    )
}

fn equivalence_identity() -> Outcome {
    let t = Instant::now();
    let families = [
        ("geometric/exponential", AlphaSequence::geometric(0.25, 0.5).unwrap(), TailModel::Exponential { rate: 1.0 }),
        ("k^-3/pareto(4)", AlphaSequence::polynomial(1.0, 3.0).unwrap(), TailModel::Pareto { p: 4.0, scale: 1.0 }),
        ("k^-2/exponential", AlphaSequence::polynomial(1.0, 2.0).unwrap(), TailModel::Exponential { rate: 2.0 }),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, seq, tail) in &families {
        let c = equiv_identity_check(seq, tail).unwrap();
        worst = worst.max(c.discrepancy);
        parts.push(format!("{name} {:.1e}", c.discrepancy));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst < 1e-3 && secs < 60.0,
        format!("relative discrepancies: {}; {secs:.1} s", parts.join(", ")),
    )
}

fn tail_regime() -> Outcome {
    let g = Observable::singular_at_zero(1.0 / 6.0, 1.0).unwrap();
    let plan = ExperimentPlan::new(ProcessSpec::lsv(0.5).with_observable(g).with_seed(12), vec![1 << 14], 5000)
        .with_seed(12);
    let res = run_experiment(&plan).unwrap();
    let values = &res.points[0].values;
    let fit = default_tail_grid(values, 16).and_then(|grid| tail_exponent(values, &grid));
    match fit {
        Ok(f) => outcome(
            (f.slope + 1.5).abs() <= 0.3,
            format!("tail slope {:.4} ± {:.4} (target -1.5 ± 0.3)", f.slope, f.stderr),
        ),
        Err(e) => outcome(false, format!("tail fit failed: {e}")),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("oracle equivalence", oracle_equivalence),
        ("Ebralidze validity", ebralidze_validity),
        ("iid rate", iid_rate),
        ("CLT limit", clt_limit),
        ("LSV fast regime", lsv_fast_regime),
        ("LSV slow regime", lsv_slow_regime),
        ("coefficient decay", coefficient_decay),
        ("invariant density shape", density_shape),
        ("bound validity", bound_validity),
        ("quantile-condition hierarchy", quantile_hierarchy),
        ("equivalence identity", equivalence_identity),
        ("tail regime probe", tail_regime),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {verdict}  {name}: {} [{:.1} s]",
            k + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(k + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
