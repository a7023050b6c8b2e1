use proptest::prelude::*;
use wasslab_core::dynamics::GpmMap;
use wasslab_core::transfer_operator::{
    alpha1_profile, alpha2_profile, build_ulam, default_gap_grid, isotonic_nonincreasing, smooth_profile, MeshKind,
    INVARIANT_TOL,
};
use wasslab_core::Observable;

proptest! {
    #[test]
    fn isotonic_fit_is_a_projection(v in prop::collection::vec(-10.0..10.0f64, 1..60)) {
        let fit = isotonic_nonincreasing(&v);
        prop_assert_eq!(fit.len(), v.len());
        prop_assert!(fit.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        // Pooling keeps the total.
        let (a, b): (f64, f64) = (v.iter().sum(), fit.iter().sum());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        let again = isotonic_nonincreasing(&fit);
        for (x, y) in fit.iter().zip(&again) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn ulam_matrices_are_stochastic_with_invariant_vector() {
    for (gamma, mesh) in [(0.25, MeshKind::Uniform), (0.5, MeshKind::Graded), (0.75, MeshKind::Graded)] {
        let op = build_ulam(&GpmMap::lsv(gamma).unwrap(), 1024, mesh).unwrap();
        for s in op.transfer().row_sums() {
            assert!((s - 1.0).abs() < 1e-12, "row sum {s}");
        }
        assert!(op.residual() <= INVARIANT_TOL);
        assert!(op.invariance_defect() <= 1e-8);
        let mass: f64 = op.nu().iter().sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }
}

fn lags() -> Vec<usize> {
    (0..=8).map(|k| 1 << k).collect()
}

#[test]
fn alpha1_decays_and_smoothing_is_mild() {
    let op = build_ulam(&GpmMap::lsv(0.5).unwrap(), 4096, MeshKind::Graded).unwrap();
    let raw = alpha1_profile(&op, &Observable::identity(), &lags(), 64).unwrap();
    let smooth = smooth_profile(&raw);
    for (r, s) in raw.iter().zip(&smooth) {
        assert!((r.value - s.value).abs() <= 0.05 * r.value, "lag {}: {} vs {}", r.lag, r.value, s.value);
    }
    assert!(raw.last().unwrap().value < raw[0].value);
}

#[test]
fn alpha1_is_stable_under_mesh_refinement() {
    let g = Observable::identity();
    let lags: Vec<usize> = lags().into_iter().filter(|&l| l <= 64).collect();
    let coarse = build_ulam(&GpmMap::lsv(0.5).unwrap(), 4096, MeshKind::Graded).unwrap();
    let fine = build_ulam(&GpmMap::lsv(0.5).unwrap(), 8192, MeshKind::Graded).unwrap();
    let a = alpha1_profile(&coarse, &g, &lags, 64).unwrap();
    let b = alpha1_profile(&fine, &g, &lags, 64).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let rel = (x.value - y.value).abs() / y.value;
        assert!(rel < 0.10, "lag {}: {} vs {}", x.lag, x.value, y.value);
    }
}

#[test]
fn alpha2_dominates_alpha1() {
    let op = build_ulam(&GpmMap::lsv(0.4).unwrap(), 512, MeshKind::Graded).unwrap();
    let g = Observable::identity();
    let lags = [1, 2, 4, 8, 16];
    let a1 = alpha1_profile(&op, &g, &lags, 12).unwrap();
    let a2 = alpha2_profile(&op, &g, &lags, 12, &default_gap_grid()).unwrap();
    for (x, y) in a1.iter().zip(&a2) {
        assert!(y.value >= x.value, "lag {}", x.lag);
    }
}
