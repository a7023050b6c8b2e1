use proptest::prelude::*;
use wasslab_core::bounds::{
    alpha_inverse, bound_l2_w1, bound_mean_w1, bound_vbe, predicted_rate, predicted_rate_iid, quantile_conditions,
    r_n, r_n_inverse, s_alpha_n, AlphaSequence, Side, Statistic, TailModel,
};
use wasslab_core::Error;

fn sequence() -> impl Strategy<Value = AlphaSequence> {
    prop_oneof![
        (0.05..1.0f64, 1.1..4.0f64).prop_map(|(c, a)| AlphaSequence::polynomial(c, a).unwrap()),
        (0.05..1.0f64, 0.1..0.9f64).prop_map(|(c, r)| AlphaSequence::geometric(c, r).unwrap()),
        (0.05..0.25f64, 1.5..3.0f64).prop_map(|(c, a)| AlphaSequence::log_polynomial(c, a).unwrap()),
        prop::collection::vec(0.0..0.25f64, 1..12).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            AlphaSequence::table(v).unwrap()
        }),
    ]
}

fn tail() -> impl Strategy<Value = TailModel> {
    prop_oneof![
        (0.5..3.0f64).prop_map(|m| TailModel::Bounded { m }),
        (2.5..8.0f64, 0.5..2.0f64).prop_map(|(p, scale)| TailModel::Pareto { p, scale }),
        (0.5..3.0f64).prop_map(|rate| TailModel::Exponential { rate }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_inverse_is_nonincreasing(seq in sequence(), u1 in 1e-6..1.0f64, u2 in 1e-6..1.0f64) {
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        prop_assert!(alpha_inverse(&seq, hi) <= alpha_inverse(&seq, lo));
    }

    #[test]
    fn level_sum_is_monotone(seq in sequence(), tail in tail(), t1 in 0.0..5.0f64, t2 in 0.0..5.0f64, n in 1u64..5000) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(s_alpha_n(&seq, &tail, hi, n) <= s_alpha_n(&seq, &tail, lo, n) + 1e-12);
        prop_assert!(s_alpha_n(&seq, &tail, lo, n) <= s_alpha_n(&seq, &tail, lo, n + 1) + 1e-12);
    }

    #[test]
    fn r_n_is_nonincreasing_with_galois_inverse(seq in sequence(), tail in tail(), u in 1e-6..1.0f64, x in 0.01..50.0f64, n in 1u64..1000) {
        prop_assert!(r_n(&seq, &tail, u, n) <= r_n(&seq, &tail, u * 0.5, n));
        let ru = r_n(&seq, &tail, u, n);
        prop_assert!(r_n_inverse(&seq, &tail, ru, n) <= u);
        let v = r_n_inverse(&seq, &tail, x, n);
        if v > 0.0 {
            prop_assert!(r_n(&seq, &tail, v, n) <= x);
        }
    }

    #[test]
    fn bounds_are_nonnegative(seq in sequence(), tail in tail(), n in 1u64..10_000) {
        prop_assert!(bound_mean_w1(&seq, &tail, n).unwrap() >= 0.0);
        prop_assert!(bound_l2_w1(&seq, &tail, n).unwrap() >= 0.0);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn vbe_forms_agree(seq in sequence(), tail in tail(), p in 1.05..1.95f64, n in 1u64..300) {
        let b = bound_vbe(&seq, &tail, p, n).unwrap();
        let scale = b.sum_form.abs().max(1e-12);
        prop_assert!((b.integral_form - b.sum_form).abs() <= 1e-6 * scale, "{} vs {}", b.integral_form, b.sum_form);
    }

    #[test]
    fn quantile_hierarchy(seq in sequence(), tail in tail()) {
        let report = quantile_conditions(&seq, &tail).unwrap();
        prop_assert!(report.hierarchy_holds(), "{report:?}");
    }
}

#[test]
fn zero_tail_gives_zero_bounds() {
    let seq = AlphaSequence::polynomial(0.25, 1.5).unwrap();
    assert_eq!(bound_mean_w1(&seq, &TailModel::Zero, 100).unwrap(), 0.0);
    assert_eq!(bound_l2_w1(&seq, &TailModel::Zero, 100).unwrap(), 0.0);
    let v = bound_vbe(&seq, &TailModel::Zero, 1.5, 100).unwrap();
    assert_eq!((v.integral_form, v.sum_form), (0.0, 0.0));
}

#[test]
fn mean_bound_decays_like_root_n_for_iid() {
    let seq = AlphaSequence::independent();
    let tail = TailModel::Bounded { m: 1.0 };
    let a = bound_mean_w1(&seq, &tail, 100).unwrap();
    let b = bound_mean_w1(&seq, &tail, 10_000).unwrap();
    assert!((a / b - 10.0).abs() < 1e-6, "{a} / {b}");
}

#[test]
fn rate_predictions() {
    let p = predicted_rate(0.25, 0.3, Side::Zero, Statistic::MeanW1).unwrap();
    assert!((p.exponent + 0.45).abs() < 1e-12);
    let iid = predicted_rate_iid(Statistic::MeanW1);
    assert_eq!((iid.exponent, iid.log_power), (-0.5, 0.0));
    assert!(matches!(
        predicted_rate(1.5, 0.0, Side::Zero, Statistic::MeanW1),
        Err(Error::NoPrediction(_))
    ));
}

#[test]
fn invalid_inputs() {
    let seq = AlphaSequence::independent();
    let tail = TailModel::Bounded { m: 1.0 };
    assert!(bound_mean_w1(&seq, &tail, 0).is_err());
    assert!(bound_vbe(&seq, &tail, 2.0, 10).is_err());
    assert!(AlphaSequence::geometric(0.5, 1.0).is_err());
    assert!(TailModel::power_quantile(-1.0, 1.0).is_err());
}
