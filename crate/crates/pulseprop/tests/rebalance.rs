use proptest::prelude::*;

use pulseprop::rebalance::{resample, resample_traced, ResampleMethod, ResampleSpec, RowOrigin, SYNTHETIC_PREFIX};
use pulseprop::{Error, PulseMatrix};

fn dataset(maj: usize, min: usize, salt: u64) -> (PulseMatrix, Vec<i8>) {
    let rows = (0..maj + min)
        .map(|i| {
            let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15 ^ salt);
            let shift = if i < maj { 0.0 } else { 3.0 };
            (0..3).map(|d| shift + ((h >> (d * 16)) & 0xffff) as f64 / 65536.0).collect()
        })
        .collect();
    let mut labels = vec![0i8; maj];
    labels.extend(vec![1i8; min]);
    (PulseMatrix::from_rows(rows).unwrap(), labels)
}

fn counts(labels: &[i8]) -> (usize, usize) {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    (labels.len() - ones, ones)
}

#[test]
fn smote_reaches_balance_with_tagged_ids() {
    let (x, y) = dataset(40, 10, 1);
    let spec = ResampleSpec::default();
    let (xr, yr) = resample(&x, &y, &spec).unwrap();
    assert_eq!(counts(&yr), (40, 40));
    assert_eq!(xr.pulse_ids.iter().filter(|id| id.starts_with(SYNTHETIC_PREFIX)).count(), 30);
}

#[test]
fn none_is_identity() {
    let (x, y) = dataset(20, 5, 2);
    let spec = ResampleSpec {
        method: ResampleMethod::None,
        ..Default::default()
    };
    let (xr, yr) = resample(&x, &y, &spec).unwrap();
    assert_eq!(yr, y);
    assert_eq!(xr, x);
}

#[test]
fn too_few_minority_for_k() {
    let (x, y) = dataset(20, 3, 3);
    let err = resample(&x, &y, &ResampleSpec::default()).unwrap_err();
    assert!(matches!(err, Error::TooFewMinority { minority: 3, k: 5 }));
}

#[test]
fn same_seed_same_output() {
    let (x, y) = dataset(50, 12, 4);
    for m in ResampleMethod::ALL {
        let spec = ResampleSpec {
            method: m,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(resample(&x, &y, &spec).unwrap(), resample(&x, &y, &spec).unwrap(), "{}", m.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ratio_and_convexity(
        maj in 20usize..120,
        min_frac in 0.08f64..0.33,
        method_ix in 0usize..6,
        ratio_ix in 0usize..3,
        seed in 0u64..1000,
    ) {
        let min = ((maj as f64 * min_frac) as usize).max(6);
        let (x, y) = dataset(maj, min, seed);
        let method = ResampleMethod::ALL[method_ix];
        let target = [0.5, 0.8, 1.0][ratio_ix];
        let spec = ResampleSpec { method, k_neighbors: 5, target_ratio: target, seed };
        let r = resample_traced(&x, &y, &spec).unwrap();
        let (m0, m1) = counts(&r.labels);
        if method != ResampleMethod::None && (min as f64) < target * maj as f64 {
            prop_assert!((m1 as f64 / m0 as f64 - target).abs() <= 1.0 / m0 as f64, "{m1}/{m0}");
        }
        for (k, o) in r.origin.iter().enumerate() {
            match *o {
                RowOrigin::Original(i) => prop_assert_eq!(r.features.row(k), x.row(i)),
                RowOrigin::Duplicate(i) => {
                    prop_assert_eq!(y[i], 1);
                    prop_assert_eq!(r.features.row(k), x.row(i));
                }
                RowOrigin::Synthetic { a, b, lambda } => {
                    prop_assert!(y[a] == 1 && y[b] == 1 && (0.0..=1.0).contains(&lambda));
                    for (d, v) in r.features.row(k).iter().enumerate() {
                        let want = x.row(a)[d] + lambda * (x.row(b)[d] - x.row(a)[d]);
                        prop_assert!((v - want).abs() < 1e-9);
                    }
                }
            }
        }
        // Rebalancing never invents majority rows.
        prop_assert!(m0 <= maj);
    }
}
