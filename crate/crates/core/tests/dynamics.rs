use proptest::prelude::*;
use wasslab_core::dynamics::{lsv_step, simulate_series, GpmMap, LsvMap, ProcessSpec};
use wasslab_core::transport::w1_empirical_pair;
use wasslab_core::EmpiricalMeasure;

proptest! {
    #[test]
    fn lsv_maps_unit_interval_into_itself(x in 0.0..=1.0f64, gamma in 0.01..0.99f64) {
        let y = lsv_step(x, gamma).unwrap();
        prop_assert!((0.0..=1.0).contains(&y));
    }

    #[test]
    fn lsv_first_branch_is_increasing(x in 0.0..0.4999f64, dx in 1e-9..1e-3f64, gamma in 0.01..0.99f64) {
        let x2 = (x + dx).min(0.4999999);
        prop_assume!(x2 > x);
        prop_assert!(lsv_step(x2, gamma).unwrap() > lsv_step(x, gamma).unwrap());
    }

    #[test]
    fn gpm_form_agrees_with_direct_map(x in 0.0..1.0f64, gamma in 0.05..0.95f64) {
        let direct = LsvMap::new(gamma).unwrap().apply(x);
        let gpm = GpmMap::lsv(gamma).unwrap().apply(x);
        prop_assert!((direct - gpm).abs() <= 1e-12);
    }

    #[test]
    fn branch_inverse_is_right_inverse(y in 0.001..0.999f64, gamma in 0.05..0.95f64) {
        let map = GpmMap::lsv(gamma).unwrap();
        for k in 0..map.branches().len() {
            let x = map.branch_inverse(k, y);
            let (lo, hi) = map.branch_domain(k);
            prop_assert!(x >= lo && x <= hi);
            prop_assert!((map.eval_branch(k, x) - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn series_are_reproducible(seed in any::<u64>(), gamma in 0.05..0.95f64) {
        let spec = ProcessSpec::lsv(gamma).with_seed(seed).with_burn_in(100);
        let a = simulate_series(&spec, 200).unwrap();
        let b = simulate_series(&spec, 200).unwrap();
        prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert!(a.iter().all(|&x| x > 0.0 && x < 1.0));
    }
}

#[test]
fn rejects_invalid_exponent() {
    for gamma in [0.0, 1.0, -0.2, f64::NAN] {
        assert!(LsvMap::new(gamma).is_err());
    }
    assert!(lsv_step(1.5, 0.3).is_err());
}

fn right_half_frequency(seed: u64) -> f64 {
    let spec = ProcessSpec::lsv(0.3).with_seed(seed);
    let v = simulate_series(&spec, 1_000_000).unwrap();
    v.iter().filter(|&&x| x > 0.5).count() as f64 / v.len() as f64
}

#[test]
fn ergodic_averages_agree_across_seeds() {
    let a = right_half_frequency(1);
    let b = right_half_frequency(2);
    assert!((a - b).abs() < 0.02, "{a} vs {b}");
}

#[test]
fn burn_in_has_little_effect() {
    for gamma in [0.25, 0.5] {
        let run = |burn_in: u64| {
            let spec = ProcessSpec::lsv(gamma).with_seed(7).with_burn_in(burn_in);
            EmpiricalMeasure::new(simulate_series(&spec, 100_000).unwrap()).unwrap()
        };
        let w = w1_empirical_pair(&run(1_000), &run(100_000)).unwrap();
        assert!(w < 0.01, "γ = {gamma}: {w}");
    }
}

#[test]
fn m_dependent_series_lives_in_unit_interval() {
    let spec: ProcessSpec = "mdep:4".parse().unwrap();
    let v = simulate_series(&spec.with_seed(3), 10_000).unwrap();
    assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean - 0.5).abs() < 0.01);
}
