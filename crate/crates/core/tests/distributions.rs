use proptest::prelude::*;
use wasslab_core::distributions::{
    empirical_cdf, Exponential, LawSpec, Pareto, PointMass, PowerTail, QuadratureOnly, TabulatedLaw, Uniform,
};
use wasslab_core::transport::w1_vs_law;
use wasslab_core::{EmpiricalMeasure, ReferenceLaw};

fn tabulated() -> TabulatedLaw {
    TabulatedLaw::new(
        vec![0.0, 0.5, 1.0, 1.0, 3.0],
        vec![0.0, 0.2, 0.4, 0.6, 0.9],
        Some(PowerTail { exponent: 2.5 }),
    )
    .unwrap()
}

fn laws() -> Vec<Box<dyn ReferenceLaw>> {
    vec![
        Box::new(Uniform::unit()),
        Box::new(Uniform::new(-2.0, 1.0).unwrap()),
        Box::new(PointMass { at: 0.7 }),
        Box::new(Pareto::new(1.5).unwrap()),
        Box::new(Exponential::new(0.8).unwrap()),
        Box::new(tabulated()),
    ]
}

/// `Q(u) <= t` iff `H(t) <= u`, allowing for the bisection tolerance of
/// laws without a closed-form quantile.
fn galois_holds(law: &dyn ReferenceLaw, u: f64, t: f64) -> bool {
    let q = law.quantile(u);
    let h = law.tail(t);
    let tol = 1e-9 * (1.0 + t.abs());
    if (q - t).abs() <= tol {
        return true;
    }
    (q <= t) == (h <= u)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn quantile_is_galois_inverse_of_tail(u in 1e-6..1.0f64, t in 0.0..10.0f64) {
        for law in laws() {
            prop_assert!(galois_holds(law.as_ref(), u, t), "{} at u={u}, t={t}", law.name());
        }
    }

    #[test]
    fn tail_and_quantile_are_nonincreasing(u1 in 1e-6..1.0f64, u2 in 1e-6..1.0f64, t1 in 0.0..10.0f64, t2 in 0.0..10.0f64) {
        let (ulo, uhi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        let (tlo, thi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        for law in laws() {
            prop_assert!(law.quantile(uhi) <= law.quantile(ulo));
            prop_assert!(law.tail(thi) <= law.tail(tlo));
        }
    }

    #[test]
    fn empirical_round_trip(v in prop::collection::vec(-50.0..50.0f64, 1..200)) {
        let sample = EmpiricalMeasure::from_slice(&v).unwrap();
        let law = empirical_cdf(&sample).unwrap();
        prop_assert_eq!(w1_vs_law(&sample, &law).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_path_agrees_with_antiderivatives(v in prop::collection::vec(0.0..3.0f64, 1..30)) {
        let sample = EmpiricalMeasure::from_slice(&v).unwrap();
        let exact = w1_vs_law(&sample, &Exponential::new(1.3).unwrap()).unwrap();
        let numeric = w1_vs_law(&sample, &QuadratureOnly(Exponential::new(1.3).unwrap())).unwrap();
        prop_assert!((exact - numeric).abs() <= 1e-8 * (1.0 + exact), "{exact} vs {numeric}");
    }

    #[test]
    fn inv_cdf_is_left_inverse(u in 1e-6..(1.0 - 1e-6)) {
        for law in laws() {
            let x = law.inv_cdf(u);
            prop_assert!(law.cdf(x) >= u - 1e-12, "{}", law.name());
            prop_assert!(law.cdf_left(x) <= u + 1e-12, "{}", law.name());
        }
    }
}

#[test]
fn pareto_tail_and_quantile() {
    let law = Pareto::new(2.0).unwrap();
    assert_eq!(law.tail(0.5), 1.0);
    assert!((law.tail(4.0) - 1.0 / 16.0).abs() < 1e-15);
    assert!((law.quantile(1.0 / 16.0) - 4.0).abs() < 1e-12);
    assert!(law.finite_moment(1.9) && !law.finite_moment(2.0));
}

#[test]
fn point_mass_quantile_is_the_atom() {
    let law = PointMass { at: 0.7 };
    for u in [1e-3, 0.5, 0.999] {
        assert!((law.quantile(u) - 0.7).abs() < 1e-9);
    }
    assert_eq!(law.quantile(1.0), 0.0);
}

#[test]
fn law_spec_round_trip() {
    for s in ["uniform", "uniform:-1:2", "point:0.3", "pareto:2.5", "exponential:2"] {
        let spec: LawSpec = s.parse().unwrap();
        assert_eq!(spec.label().parse::<LawSpec>().unwrap(), spec);
    }
    for bad in ["", "uniform:1", "uniform:2:1", "pareto:0", "exponential:-1", "gauss"] {
        assert!(bad.parse::<LawSpec>().is_err(), "{bad}");
    }
}

#[test]
fn tabulated_law_csv_round_trip() {
    let law = tabulated();
    let mut buf = Vec::new();
    law.write_csv(&mut buf).unwrap();
    let back = TabulatedLaw::read_csv(buf.as_slice()).unwrap();
    for t in [-1.0, 0.25, 1.0, 2.0, 3.0] {
        assert_eq!(law.cdf(t), back.cdf(t));
    }
    // The power tail is written out as a final knot carrying the remaining mass.
    let end = law.inv_cdf(1.0 - 1e-12);
    assert_eq!(back.cdf(end), 1.0);
}
