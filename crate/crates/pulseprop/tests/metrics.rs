use proptest::prelude::*;

use pulseprop::metrics::{confusion, evaluate, roc_auc, scalar_metrics, ConfusionMatrix, EvaluationReport};

fn pair_count_auc(scores: &[f64], truth: &[i8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, _) in truth.iter().enumerate().filter(|(_, &t)| t == 1) {
        for (j, _) in truth.iter().enumerate().filter(|(_, &t)| t == 0) {
            pairs += 1.0;
            wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    wins / pairs
}

#[test]
fn report_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let r = evaluate("lp", &[1, 0, 1, 0, 1], &[1, 0, 0, 0, 1], &[0.9, 0.1, 0.4, 0.3, 0.8]).unwrap();
    assert_eq!(r.confusion, ConfusionMatrix { tp: 2, fp: 0, tn: 2, fn_: 1 });
    assert_eq!(r.auroc, 1.0);
    let path = dir.path().join("r.json");
    r.save(&path).unwrap();
    assert_eq!(EvaluationReport::load(&path).unwrap(), r);
    assert!(std::fs::read_to_string(&path).unwrap().contains("\"fn\": 1"));
}

#[test]
fn single_class_truth_flags_auroc() {
    let r = evaluate("x", &[0, 0, 0], &[0, 1, 0], &[0.1, 0.7, 0.2]).unwrap();
    assert_eq!(r.auroc, 0.0);
    assert!(r.degenerate.contains(&"auroc".to_string()));
}

#[test]
fn nan_score_rejected() {
    assert!(roc_auc(&[0.1, f64::NAN], &[0, 1]).is_err());
}

proptest! {
    #[test]
    fn auroc_equals_pair_count(
        data in prop::collection::vec((0u8..12, 0i8..2), 2..150),
    ) {
        let mut truth: Vec<i8> = data.iter().map(|d| d.1).collect();
        truth[0] = 0;
        truth[1] = 1;
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 11.0).collect();
        let (pts, auc) = roc_auc(&scores, &truth).unwrap();
        prop_assert!((auc - pair_count_auc(&scores, &truth)).abs() < 1e-12);
        prop_assert_eq!(pts[0], (0.0, 0.0));
        prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        prop_assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn auroc_complement_under_label_swap(
        data in prop::collection::vec((0u8..12, 0i8..2), 2..150),
    ) {
        let mut truth: Vec<i8> = data.iter().map(|d| d.1).collect();
        truth[0] = 0;
        truth[1] = 1;
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
        let swapped: Vec<i8> = truth.iter().map(|t| 1 - t).collect();
        let (_, a) = roc_auc(&scores, &truth).unwrap();
        let (_, b) = roc_auc(&scores, &swapped).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_bounded_and_symmetric(tp in 0u64..300, fp in 0u64..300, tn in 0u64..300, fn_ in 0u64..300) {
        let cm = ConfusionMatrix { tp, fp, tn, fn_ };
        let m = scalar_metrics(&cm);
        for v in [m.precision, m.recall, m.f1, m.csi] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((-1.0..=1.0).contains(&m.mcc));
        prop_assert!(m.kappa <= 1.0 + 1e-12);
        // MCC and κ do not depend on which class is called positive.
        let s = scalar_metrics(&cm.swapped());
        prop_assert!((m.mcc - s.mcc).abs() < 1e-12);
        prop_assert!((m.kappa - s.kappa).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts_sum(pairs in prop::collection::vec((0i8..2, 0i8..2), 0..100)) {
        let (t, p): (Vec<i8>, Vec<i8>) = pairs.into_iter().unzip();
        let cm = confusion(&t, &p).unwrap();
        prop_assert_eq!(cm.total() as usize, t.len());
        prop_assert_eq!((cm.tp + cm.fn_) as usize, t.iter().filter(|&&x| x == 1).count());
    }
}
