use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

use pulseprop::baselines::{fit, logistic_loss_grad, BaselineParams, ModelKind, TrainedModel};
use pulseprop::rng::seeded;
use pulseprop::{Error, PulseMatrix};

const CENTRES: [[f64; 2]; 2] = [[0.0, 0.0], [3.0, 3.0]];

/// Two unit-variance isotropic blobs.
fn blobs(n_per: usize, seed: u64) -> (PulseMatrix, Vec<i8>) {
    let mut rng = seeded(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (c, centre) in CENTRES.iter().enumerate() {
        for _ in 0..n_per {
            rows.push(centre.iter().map(|m| m + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect());
            y.push(c as i8);
        }
    }
    (PulseMatrix::from_rows(rows).unwrap(), y)
}

/// Bayes rule for equal priors and identity covariance: nearer centre wins.
fn bayes(x: &[f64]) -> i8 {
    let d = |c: &[f64; 2]| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
    i8::from(d(&CENTRES[1]) < d(&CENTRES[0]))
}

#[test]
fn blobs_accuracy_near_bayes() {
    let (train, ytr) = blobs(30, 1);
    let (test, yte) = blobs(500, 2);
    let bayes_acc = test.rows().zip(&yte).filter(|(r, &y)| bayes(r) == y).count() as f64 / yte.len() as f64;
    for kind in ModelKind::ALL {
        let m = fit(kind, &train, &ytr, &BaselineParams::default()).unwrap();
        let pred = m.predict(&test).unwrap();
        let acc = pred.iter().zip(&yte).filter(|(p, y)| p == y).count() as f64 / yte.len() as f64;
        assert!(acc >= 0.9, "{}: {acc}", kind.name());
        assert!(acc <= bayes_acc + 0.03, "{} beats Bayes: {acc} vs {bayes_acc}", kind.name());
    }
}

#[test]
fn knn_counts_neighbours() {
    let x = PulseMatrix::from_rows((0..7).map(|i| vec![i as f64]).collect()).unwrap();
    let y = [1, 1, 0, 1, 0, 1, 1];
    let m = fit(ModelKind::Knn, &x, &y, &BaselineParams::default()).unwrap();
    let p = m.predict_proba(&PulseMatrix::from_rows(vec![vec![3.0]]).unwrap()).unwrap();
    assert!((p[0] - 5.0 / 7.0).abs() < 1e-15);
}

#[test]
fn nb_two_points() {
    let x = PulseMatrix::from_rows(vec![vec![0.0, 0.0], vec![4.0, 4.0]]).unwrap();
    match fit(ModelKind::GaussianNb, &x, &[0, 1], &BaselineParams::default()).unwrap() {
        TrainedModel::GaussianNb { means, priors, variances } => {
            assert_eq!(means, [vec![0.0, 0.0], vec![4.0, 4.0]]);
            assert_eq!(priors, [0.5, 0.5]);
            assert!(variances.iter().flatten().all(|&v| v > 0.0));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn nb_finite_in_256_dimensions() {
    let (x, y) = {
        let mut rng = seeded(5);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..256).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng) * 3.0 + (i % 2) as f64).collect())
            .collect();
        (PulseMatrix::from_rows(rows).unwrap(), (0..40).map(|i| (i % 2) as i8).collect::<Vec<_>>())
    };
    let m = fit(ModelKind::GaussianNb, &x, &y, &BaselineParams::default()).unwrap();
    let far = PulseMatrix::from_rows(vec![vec![50.0; 256], vec![-50.0; 256]]).unwrap();
    for p in m.predict_proba(&far).unwrap().into_iter().chain(m.predict_proba(&x).unwrap()) {
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }
}

#[test]
fn single_class_and_dimension_errors() {
    let (x, _) = blobs(5, 0);
    assert!(matches!(fit(ModelKind::Logistic, &x, &[0; 10], &BaselineParams::default()), Err(Error::SingleClass(0))));
    let (x, y) = blobs(5, 0);
    let m = fit(ModelKind::Knn, &x, &y, &BaselineParams::default()).unwrap();
    let wrong = PulseMatrix::from_rows(vec![vec![0.0; 3]]).unwrap();
    assert!(matches!(m.predict_proba(&wrong), Err(Error::Dimension { expected: 2, got: 3 })));
}

#[test]
fn model_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = blobs(10, 3);
    for kind in ModelKind::ALL {
        let m = fit(kind, &x, &y, &BaselineParams::default()).unwrap();
        let path = dir.path().join(format!("{}.json", kind.name()));
        m.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(back.predict_proba(&x).unwrap(), m.predict_proba(&x).unwrap());
    }
    assert!(TrainedModel::from_json(r#"{"schema":"other/9","model":{"kind":"logistic","weights":[],"bias":0,"steps":0}}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logistic_gradient_matches_central_differences(
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 4..20),
        w in prop::collection::vec(-1.0f64..1.0, 3),
        b in -1.0f64..1.0,
    ) {
        let n = rows.len();
        let y: Vec<i8> = (0..n).map(|i| (i % 2) as i8).collect();
        let x = PulseMatrix::from_rows(rows).unwrap();
        let l2 = 1e-2;
        let (_, g) = logistic_loss_grad(&x, &y, &w, b, l2);
        let h = 1e-5;
        for k in 0..4 {
            let at = |delta: f64| {
                let mut ww = w.clone();
                let mut bb = b;
                if k < 3 { ww[k] += delta } else { bb += delta }
                logistic_loss_grad(&x, &y, &ww, bb, l2).0
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "k {k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn knn_invariant_to_joint_rescaling(c in 0.01f64..100.0, seed in 0u64..50) {
        let (x, y) = blobs(15, seed);
        let (q, _) = blobs(20, seed + 1000);
        let scale = |m: &PulseMatrix| PulseMatrix::from_rows(m.rows().map(|r| r.iter().map(|v| v * c).collect()).collect()).unwrap();
        let a = fit(ModelKind::Knn, &x, &y, &BaselineParams::default()).unwrap().predict(&q).unwrap();
        let b = fit(ModelKind::Knn, &scale(&x), &y, &BaselineParams::default()).unwrap().predict(&scale(&q)).unwrap();
        prop_assert_eq!(a, b);
    }
}
