//! Property-based checks of the structural invariants.

use mlstab::certificate::{certify, sup_i, LogGrid};
use mlstab::checks::{find_certificate_vector, validate_certificate_vector, SLACK_MARGIN};
use mlstab::model::{builtin_example, example1_f, example1_g, example2_f, example2_g, weighted_norm, BuiltinId};
use mlstab::special::ml1;
use proptest::prelude::*;

fn nonneg_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..10.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn builtin_fields_are_homogeneous(x in nonneg_point(), lambda in 1e-3..10.0f64) {
        for field in [example1_f(), example1_g(), example2_f(), example2_g()] {
            let fx = field.eval(&x);
            let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            let flx = field.eval(&scaled);
            let factor = lambda.powf(field.degree());
            for (a, b) in flx.iter().zip(&fx) {
                let want = factor * b;
                prop_assert!((a - want).abs() <= 1e-10 * want.abs().max(1e-300) + 1e-300,
                    "{}: {a} vs {want}", field.name());
            }
        }
    }

    #[test]
    fn weighted_norm_is_absolutely_homogeneous(
        w in prop::collection::vec(-10.0..10.0f64, 3),
        v in prop::collection::vec(0.01..5.0f64, 3),
        lambda in -10.0..10.0f64,
    ) {
        let n = weighted_norm(&w, &v).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| lambda * x).collect();
        let m = weighted_norm(&scaled, &v).unwrap();
        prop_assert!((m - lambda.abs() * n).abs() <= 1e-12 * (1.0 + m));
    }

    #[test]
    fn example2_feasibility_is_scale_free(lambda in 1e-3..1.0f64) {
        let ex = builtin_example(BuiltinId::Example2);
        let base = validate_certificate_vector(&ex.system, &[0.75, 1.0]).unwrap();
        let scaled: Vec<f64> = base.v.iter().map(|x| lambda * x).collect();
        let slack = ex.system.slack(&scaled);
        for (s, b) in slack.iter().zip(&base.slack) {
            prop_assert!(*s < 0.0);
            prop_assert!((s - lambda * lambda * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn envelope_decreases(t1 in 0.0..50.0f64, dt in 1e-3..50.0f64, c in 1e-3..0.999f64) {
        let a = ml1(0.61, -c * t1.powf(0.61)).unwrap();
        let b = ml1(0.61, -c * (t1 + dt).powf(0.61)).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn sup_is_nonnegative(alpha in 0.35..1.0f64, c in 1e-4..0.99f64) {
        let grid = LogGrid { lo: 1.0, hi: 1e8, points: 60 };
        let s = sup_i(0.35, alpha, c, 1.0, grid).unwrap();
        prop_assert!(s >= 0.0 && s.is_finite());
        let s = sup_i(0.35, alpha.max(0.7), c, 2.0, grid).unwrap();
        prop_assert!(s >= 0.0 && s.is_finite());
    }
}

/// Brute force over a 100×100 grid on (0, 1.5]²: feasible points exist and
/// (0.75, 1) is one of them.
#[test]
fn example2_feasible_region_by_grid() {
    let ex = builtin_example(BuiltinId::Example2);
    let mut feasible = 0;
    for i in 1..=100 {
        for j in 1..=100 {
            let v = [1.5 * i as f64 / 100.0, 1.5 * j as f64 / 100.0];
            if ex.system.slack(&v).iter().all(|&s| s <= SLACK_MARGIN) {
                feasible += 1;
            }
        }
    }
    assert!(feasible > 0);
    let s = ex.system.slack(&[0.75, 1.0]);
    assert_eq!(s, vec![-0.25, -0.3125]);
    let found = find_certificate_vector(&ex.system, 20_000, 1).unwrap();
    assert!(found.slack.iter().all(|&s| s <= SLACK_MARGIN));
}

/// Envelope at t = 0 dominates the history: ν vᵢ ≥ ‖φ‖_v vᵢ ≥ φᵢ.
#[test]
fn envelope_dominates_history_at_start() {
    let ex = builtin_example(BuiltinId::Example2);
    let v = validate_certificate_vector(&ex.system, &[0.75, 1.0]).unwrap();
    for phi in &ex.phis {
        let n = phi.weighted_norm(&v.v, 1.0, 1e-2).unwrap();
        let cert = certify(&ex.system, &v, n).unwrap();
        let env = cert.envelope(0.0).unwrap();
        assert!(cert.nu >= n);
        for (e, p) in env.iter().zip(phi.eval(0.0)) {
            assert!(*e >= p);
        }
    }
}
