use oodmix::oodcore::{
    aupr, auroc, auroc_trapezoid, calibrate_gamma, fpr_at_tpr, reg_loss, score, RegInput,
    RegLossSpec, ScoreKind,
};
use proptest::prelude::*;

// Integer-valued scores keep shifts and power-of-two scalings exact, so ties survive.
fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-20i32..20).prop_map(f64::from), 1..40)
}

proptest! {
    #[test]
    fn metrics_ignore_shift_and_scale(id in scores(), ood in scores(), c in -50i32..50, e in -4i32..5) {
        let f = 2f64.powi(e);
        let t = |v: &[f64]| v.iter().map(|s| s * f + f64::from(c)).collect::<Vec<_>>();
        let (id2, ood2) = (t(&id), t(&ood));
        prop_assert_eq!(fpr_at_tpr(&id, &ood, 0.95).unwrap(), fpr_at_tpr(&id2, &ood2, 0.95).unwrap());
        prop_assert_eq!(auroc(&id, &ood).unwrap(), auroc(&id2, &ood2).unwrap());
        prop_assert_eq!(aupr(&id, &ood).unwrap(), aupr(&id2, &ood2).unwrap());
    }

    #[test]
    fn fpr_grows_as_the_threshold_drops(id in scores(), ood in scores(), a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(calibrate_gamma(&id, lo).unwrap() >= calibrate_gamma(&id, hi).unwrap());
        prop_assert!(fpr_at_tpr(&id, &ood, lo).unwrap() <= fpr_at_tpr(&id, &ood, hi).unwrap());
    }

    #[test]
    fn full_recall_threshold_is_the_minimum(id in scores()) {
        let min = id.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(calibrate_gamma(&id, 1.0).unwrap(), min);
    }

    #[test]
    fn auroc_is_antisymmetric(id in scores(), ood in scores()) {
        let forward = auroc(&id, &ood).unwrap();
        let backward = auroc(&ood, &id).unwrap();
        prop_assert!((forward + backward - 1.0).abs() < 1e-12);
        prop_assert!((auroc_trapezoid(&id, &ood).unwrap() - forward).abs() < 1e-9);
    }

    #[test]
    fn energy_shifts_with_the_logits(z in prop::collection::vec(-30.0f64..30.0, 2..8), c in -40.0f64..40.0) {
        let k = z.len();
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let s0 = score(&z, ScoreKind::Energy, k).unwrap();
        let s1 = score(&shifted, ScoreKind::Energy, k).unwrap();
        prop_assert!((s1 - s0 - c).abs() < 1e-9 * (1.0 + s0.abs() + c.abs()));
    }

    #[test]
    fn energy_reg_vanishes_exactly_inside_margins(
        id in prop::collection::vec(-10.0f64..10.0, 0..20),
        ood in prop::collection::vec(-10.0f64..10.0, 0..20),
    ) {
        let spec = RegLossSpec::energy(1.0, -1.0, 0.1);
        let loss = reg_loss(RegInput::Scores { id: &id, ood: &ood }, &spec).unwrap();
        let inside = id.iter().all(|&s| s >= 1.0) && ood.iter().all(|&s| s <= -1.0);
        prop_assert_eq!(loss == 0.0, inside);
    }
}

#[test]
fn documented_threshold_examples() {
    let id: Vec<f64> = (1..=20).map(f64::from).collect();
    assert_eq!(calibrate_gamma(&id, 0.95).unwrap(), 2.0);
    assert!((fpr_at_tpr(&id, &[0.5, 2.5, 1.0], 0.95).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(fpr_at_tpr(&[0.9, 0.8, 0.7, 0.6], &[0.5, 0.4], 0.95).unwrap(), 0.0);
    assert_eq!(fpr_at_tpr(&[0.1, 0.2], &[5.0, 6.0], 0.95).unwrap(), 1.0);
}
