mod support;

use aggrolab_core::ensemble::{
    average_probabilities, class_metrics, confusion_matrix, predict_label, weighted_f1,
    EvaluationReport,
};
use proptest::prelude::*;
use support::{brute_confusion, brute_weighted_f1, cases, random_case};

#[test]
fn metrics_agree_with_brute_force_on_random_cases() {
    let mut rng = cases(1);
    for _ in 0..1000 {
        let (gold, predicted, k) = random_case(&mut rng);
        assert_eq!(
            confusion_matrix(&gold, &predicted, k).unwrap(),
            brute_confusion(&gold, &predicted, k)
        );
        let got = weighted_f1(&gold, &predicted, k).unwrap();
        let want = brute_weighted_f1(&gold, &predicted, k);
        assert!(
            (got - want).abs() < 1e-9,
            "{gold:?} {predicted:?}: {got} vs {want}"
        );
    }
}

#[test]
fn perfect_prediction_scores_one() {
    let mut rng = cases(2);
    for _ in 0..100 {
        let (gold, _, k) = random_case(&mut rng);
        assert_eq!(weighted_f1(&gold, &gold, k).unwrap(), 1.0);
    }
}

#[test]
fn report_matches_metrics() {
    let labels: Vec<String> = ["OAG", "CAG", "NAG"].map(String::from).to_vec();
    let gold = [0, 0, 1, 2, 2, 2];
    let predicted = [0, 2, 1, 2, 2, 0];
    let r = EvaluationReport::new(&gold, &predicted, &labels).unwrap();
    assert_eq!(r.documents, 6);
    assert_eq!(
        r.confusion,
        vec![vec![1, 0, 1], vec![0, 1, 0], vec![1, 0, 2]]
    );
    assert!((r.accuracy - 4.0 / 6.0).abs() < 1e-15);
    assert!((r.weighted_f1 - weighted_f1(&gold, &predicted, 3).unwrap()).abs() < 1e-15);
    assert_eq!(r.per_class, class_metrics(&r.confusion, &labels));
    assert_eq!(
        r.confusion_csv(),
        "gold\\predicted,OAG,CAG,NAG\nOAG,1,0,1\nCAG,0,1,0\nNAG,1,0,2\n"
    );
    assert!(EvaluationReport::new(&[], &[], &labels).is_err());
    assert!(EvaluationReport::new(&[0], &[3], &labels).is_err());
}

#[test]
fn absent_class_has_zero_scores() {
    let m = confusion_matrix(&[0, 0, 1], &[0, 0, 1], 3).unwrap();
    let c = &class_metrics(&m, &[])[2];
    assert_eq!((c.precision, c.recall, c.f1, c.support), (0.0, 0.0, 0.0, 0));
}

#[test]
fn mismatched_members_are_rejected() {
    assert!(average_probabilities::<Vec<f64>>(&[]).is_err());
    assert!(average_probabilities(&[vec![0.5, 0.5], vec![0.2, 0.3, 0.5]]).is_err());
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn members() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=4).prop_flat_map(|k| prop::collection::vec(simplex(k), 1..=5))
}

proptest! {
    #[test]
    fn average_stays_on_the_simplex(m in members()) {
        let avg = average_probabilities(&m).unwrap();
        prop_assert!(avg.iter().all(|&p| (0.0..=1.0).contains(&p)));
        prop_assert!((avg.iter().sum::<f64>() - 1.0).abs() <= 3e-6);
    }

    #[test]
    fn average_ignores_member_order(m in members(), rot in 0usize..5) {
        let mut r = m.clone();
        let len = r.len();
        r.rotate_left(rot % len);
        r.reverse();
        let a = average_probabilities(&m).unwrap();
        let b = average_probabilities(&r).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn average_of_copies_is_the_member(p in simplex(3), n in 1usize..6) {
        let avg = average_probabilities(&vec![p.clone(); n]).unwrap();
        for (x, y) in avg.iter().zip(&p) {
            prop_assert!((x - y).abs() <= 2.0 * f64::EPSILON * y.max(1e-300));
        }
        prop_assert_eq!(predict_label(&avg), predict_label(&p));
    }

    #[test]
    fn argmax_ignores_positive_scaling(p in simplex(4), s in 0.01f64..100.0) {
        let scaled: Vec<f64> = p.iter().map(|v| v * s).collect();
        prop_assert_eq!(predict_label(&scaled), predict_label(&p));
        let best = predict_label(&p);
        prop_assert!(p.iter().all(|&v| v <= p[best]));
    }
}

#[test]
fn ties_go_to_the_lowest_index() {
    assert_eq!(predict_label(&[0.4, 0.4, 0.2]), 0);
    assert_eq!(predict_label(&[0.2, 0.4, 0.4]), 1);
}
