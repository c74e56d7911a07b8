//! Class rebalancing: random under/over-sampling, SMOTE, ADASYN and ROS+RUS.
//!
//! Original rows always come first in the output. Every added row, whether a
//! duplicate or an interpolated point, gets the id `syn:<n>`.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{sq_dist, PulseMatrix};
use crate::rng::{seeded, Rng};
use crate::Label;

pub const SYNTHETIC_PREFIX: &str = "syn:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    None,
    Rus,
    Ros,
    Smote,
    Adasyn,
    RosRus,
}

impl ResampleMethod {
    pub const ALL: [ResampleMethod; 6] = [
        ResampleMethod::None,
        ResampleMethod::Rus,
        ResampleMethod::Ros,
        ResampleMethod::Smote,
        ResampleMethod::Adasyn,
        ResampleMethod::RosRus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResampleMethod::None => "none",
            ResampleMethod::Rus => "rus",
            ResampleMethod::Ros => "ros",
            ResampleMethod::Smote => "smote",
            ResampleMethod::Adasyn => "adasyn",
            ResampleMethod::RosRus => "ros_rus",
        }
    }

    fn interpolates(self) -> bool {
        matches!(self, ResampleMethod::Smote | ResampleMethod::Adasyn)
    }
}

impl std::str::FromStr for ResampleMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ResampleMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown resample method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleSpec {
    pub method: ResampleMethod,
    pub k_neighbors: usize,
    /// Minority:majority count ratio after resampling.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        ResampleSpec {
            method: ResampleMethod::Smote,
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

/// Where an output row came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowOrigin {
    Original(usize),
    Duplicate(usize),
    /// `row(a) + lambda·(row(b) − row(a))`, indices into the input.
    Synthetic { a: usize, b: usize, lambda: f64 },
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub features: PulseMatrix,
    pub labels: Vec<Label>,
    pub origin: Vec<RowOrigin>,
}

pub fn resample(features: &PulseMatrix, labels: &[Label], spec: &ResampleSpec) -> Result<(PulseMatrix, Vec<Label>)> {
    let r = resample_traced(features, labels, spec)?;
    Ok((r.features, r.labels))
}

struct Classes {
    minority: Label,
    min_idx: Vec<usize>,
    maj_idx: Vec<usize>,
}

fn split_classes(labels: &[Label]) -> Result<Classes> {
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 => c0.push(i),
            1 => c1.push(i),
            other => return Err(Error::InvalidLabel(other as i64)),
        }
    }
    if c0.is_empty() || c1.is_empty() {
        return Err(Error::SingleClass(labels.first().copied().unwrap_or(0)));
    }
    // Class 1 is the minority on ties.
    Ok(if c1.len() <= c0.len() {
        Classes {
            minority: 1,
            min_idx: c1,
            maj_idx: c0,
        }
    } else {
        Classes {
            minority: 0,
            min_idx: c0,
            maj_idx: c1,
        }
    })
}

pub fn resample_traced(features: &PulseMatrix, labels: &[Label], spec: &ResampleSpec) -> Result<Resampled> {
    if features.nrows() != labels.len() {
        return Err(Error::Dimension {
            expected: features.nrows(),
            got: labels.len(),
        });
    }
    if spec.k_neighbors == 0 {
        return Err(Error::invalid("k_neighbors must be at least 1"));
    }
    if !(spec.target_ratio > 0.0 && spec.target_ratio <= 1.0) {
        return Err(Error::invalid(format!("target_ratio {} outside (0, 1]", spec.target_ratio)));
    }
    let classes = split_classes(labels)?;
    let (m, big) = (classes.min_idx.len(), classes.maj_idx.len());
    if spec.method.interpolates() && m <= spec.k_neighbors {
        return Err(Error::TooFewMinority {
            minority: m,
            k: spec.k_neighbors,
        });
    }
    let r = spec.target_ratio;
    let mut rng = seeded(spec.seed);
    let all: Vec<usize> = (0..labels.len()).collect();

    let (kept, added) = match spec.method {
        ResampleMethod::None => (all, Vec::new()),
        ResampleMethod::Rus => (undersample(&classes, labels.len(), r, &mut rng), Vec::new()),
        ResampleMethod::Ros => (all, duplicate(&classes, grow_to(m, big, r), &mut rng)),
        ResampleMethod::Smote => {
            let need = grow_to(m, big, r);
            (all, smote(features, &classes.min_idx, spec.k_neighbors, need, None, &mut rng))
        }
        ResampleMethod::Adasyn => {
            let need = grow_to(m, big, r);
            let weights = adasyn_weights(features, labels, &classes, spec.k_neighbors);
            (all, smote(features, &classes.min_idx, spec.k_neighbors, need, weights, &mut rng))
        }
        ResampleMethod::RosRus => {
            let mid = ((m as f64 * big as f64).sqrt().round() as usize).clamp(m, big);
            let mid = mid.min(((r * big as f64).round() as usize).max(m));
            let dups = duplicate(&classes, mid - m, &mut rng);
            let kept_maj = shrink_majority(&classes, mid, r, &mut rng);
            let kept: Vec<usize> = all
                .into_iter()
                .filter(|&i| labels[i] == classes.minority || kept_maj.binary_search(&i).is_ok())
                .collect();
            (kept, dups)
        }
    };

    let dim = features.dim();
    let mut out = PulseMatrix::empty(dim);
    let mut out_labels = Vec::with_capacity(kept.len() + added.len());
    let mut origin = Vec::with_capacity(kept.len() + added.len());
    for &i in &kept {
        out.push(features.pulse_ids[i].clone(), features.row(i))?;
        out_labels.push(labels[i]);
        origin.push(RowOrigin::Original(i));
    }
    let mut buf = vec![0.0; dim];
    for (n, o) in added.into_iter().enumerate() {
        match o {
            RowOrigin::Duplicate(i) => buf.copy_from_slice(features.row(i)),
            RowOrigin::Synthetic { a, b, lambda } => {
                for ((v, x), y) in buf.iter_mut().zip(features.row(a)).zip(features.row(b)) {
                    *v = x + lambda * (y - x);
                }
            }
            RowOrigin::Original(_) => unreachable!(),
        }
        out.push(format!("{SYNTHETIC_PREFIX}{n}"), &buf)?;
        out_labels.push(classes.minority);
        origin.push(o);
    }
    Ok(Resampled {
        features: out,
        labels: out_labels,
        origin,
    })
}

/// Rows to add so minority reaches round(r·majority).
fn grow_to(m: usize, big: usize, r: f64) -> usize {
    ((r * big as f64).round() as usize).saturating_sub(m)
}

fn shrink_majority(classes: &Classes, m: usize, r: f64, rng: &mut Rng) -> Vec<usize> {
    let keep = ((m as f64 / r).round() as usize).clamp(1, classes.maj_idx.len());
    let mut maj = classes.maj_idx.clone();
    maj.shuffle(rng);
    maj.truncate(keep);
    maj.sort_unstable();
    maj
}

fn undersample(classes: &Classes, n: usize, r: f64, rng: &mut Rng) -> Vec<usize> {
    let kept_maj = shrink_majority(classes, classes.min_idx.len(), r, rng);
    let mut keep = vec![false; n];
    for &i in classes.min_idx.iter().chain(&kept_maj) {
        keep[i] = true;
    }
    (0..n).filter(|&i| keep[i]).collect()
}

fn duplicate(classes: &Classes, count: usize, rng: &mut Rng) -> Vec<RowOrigin> {
    (0..count)
        .map(|_| RowOrigin::Duplicate(classes.min_idx[rng.random_range(0..classes.min_idx.len())]))
        .collect()
}

/// Indices (into `pool`) of the k nearest pool members to `pool[i]`, itself
/// excluded; distance ties go to the lower index.
fn nearest_in(features: &PulseMatrix, pool: &[usize], i: usize, k: usize) -> Vec<usize> {
    let xi = features.row(pool[i]);
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &p)| (sq_dist(xi, features.row(p)), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Generation counts apportioned to the minority rows: uniform random parents
/// when `weights` is None, otherwise proportional to the weights by largest
/// remainder.
fn smote(
    features: &PulseMatrix,
    min_idx: &[usize],
    k: usize,
    need: usize,
    weights: Option<Vec<f64>>,
    rng: &mut Rng,
) -> Vec<RowOrigin> {
    if need == 0 {
        return Vec::new();
    }
    let neighbors: Vec<Vec<usize>> = (0..min_idx.len()).map(|i| nearest_in(features, min_idx, i, k)).collect();
    let parents: Vec<usize> = match weights {
        None => (0..need).map(|_| rng.random_range(0..min_idx.len())).collect(),
        Some(w) => apportion(&w, need)
            .into_iter()
            .enumerate()
            .flat_map(|(i, g)| std::iter::repeat_n(i, g))
            .collect(),
    };
    parents
        .into_iter()
        .map(|i| {
            let nb = neighbors[i][rng.random_range(0..neighbors[i].len())];
            RowOrigin::Synthetic {
                a: min_idx[i],
                b: min_idx[nb],
                lambda: rng.random::<f64>(),
            }
        })
        .collect()
}

/// ADASYN density: fraction of majority rows among each minority row's k
/// nearest neighbours in the full set. None when every ratio is zero.
fn adasyn_weights(features: &PulseMatrix, labels: &[Label], classes: &Classes, k: usize) -> Option<Vec<f64>> {
    let all: Vec<usize> = (0..labels.len()).collect();
    let w: Vec<f64> = classes
        .min_idx
        .iter()
        .map(|&i| {
            let nb = nearest_in(features, &all, i, k);
            nb.iter().filter(|&&j| labels[j] != classes.minority).count() as f64 / k as f64
        })
        .collect();
    (w.iter().sum::<f64>() > 0.0).then_some(w)
}

fn apportion(w: &[f64], total: usize) -> Vec<usize> {
    let s: f64 = w.iter().sum();
    let exact: Vec<f64> = w.iter().map(|x| x / s * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut rem: Vec<(f64, usize)> = exact.iter().enumerate().map(|(i, x)| (x - x.floor(), i)).collect();
    rem.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = total - counts.iter().sum::<usize>();
    for &(_, i) in rem.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n0: usize, n1: usize) -> (PulseMatrix, Vec<Label>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n0 {
            rows.push(vec![i as f64 * 0.1, (i % 7) as f64]);
            y.push(0);
        }
        for i in 0..n1 {
            rows.push(vec![10.0 + i as f64 * 0.3, (i % 3) as f64]);
            y.push(1);
        }
        (PulseMatrix::from_rows(rows).unwrap(), y)
    }

    fn count(y: &[Label], c: Label) -> usize {
        y.iter().filter(|&&l| l == c).count()
    }

    #[test]
    fn rus_forced_counts() {
        let (x, y) = blobs(80, 20);
        let spec = ResampleSpec {
            method: ResampleMethod::Rus,
            ..Default::default()
        };
        let (_, out) = resample(&x, &y, &spec).unwrap();
        assert_eq!((count(&out, 0), count(&out, 1)), (20, 20));
    }

    #[test]
    fn smote_on_a_segment() {
        let x = PulseMatrix::from_rows(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 0.0], vec![6.0, 0.0], vec![7.0, 0.0]])
            .unwrap();
        let y = vec![1, 1, 0, 0, 0];
        let spec = ResampleSpec {
            k_neighbors: 1,
            ..Default::default()
        };
        let (out, labels) = resample(&x, &y, &spec).unwrap();
        assert_eq!(out.nrows(), 6);
        let s = out.row(5);
        assert!((s[0] - s[1]).abs() < 1e-15 && (0.0..=1.0).contains(&s[0]));
        assert_eq!(labels[5], 1);
        assert_eq!(out.pulse_ids[5], "syn:0");
    }

    #[test]
    fn adasyn_targets_the_contested_point() {
        // Minority point 0 sits among five majority points; the minority
        // points 1..=6 form their own cluster far away.
        let mut rows = vec![vec![0.0, 0.0]];
        let mut y = vec![1];
        for i in 0..6 {
            rows.push(vec![100.0 + i as f64, 0.0]);
            y.push(1);
        }
        for a in 0..5 {
            let t = a as f64 * 1.2566;
            rows.push(vec![0.5 * t.cos(), 0.5 * t.sin()]);
            y.push(0);
        }
        for i in 0..20 {
            rows.push(vec![-50.0 - i as f64, 0.0]);
            y.push(0);
        }
        let x = PulseMatrix::from_rows(rows).unwrap();
        let spec = ResampleSpec {
            method: ResampleMethod::Adasyn,
            ..Default::default()
        };
        let r = resample_traced(&x, &y, &spec).unwrap();
        let synth: Vec<_> = r.origin.iter().filter(|o| matches!(o, RowOrigin::Synthetic { .. })).collect();
        assert_eq!(synth.len(), 25 - 7);
        for o in synth {
            if let RowOrigin::Synthetic { a, .. } = o {
                assert_eq!(*a, 0);
            }
        }
    }

    #[test]
    fn errors() {
        let (x, _) = blobs(3, 3);
        assert!(matches!(resample(&x, &[0; 6], &ResampleSpec::default()), Err(Error::SingleClass(0))));
        let (x, y) = blobs(10, 3);
        assert!(matches!(
            resample(&x, &y, &ResampleSpec::default()),
            Err(Error::TooFewMinority { minority: 3, k: 5 })
        ));
    }

    #[test]
    fn ros_rus_midpoint() {
        let (x, y) = blobs(100, 4);
        let spec = ResampleSpec {
            method: ResampleMethod::RosRus,
            ..Default::default()
        };
        let (_, out) = resample(&x, &y, &spec).unwrap();
        assert_eq!(count(&out, 1), 20);
        assert_eq!(count(&out, 0), 20);
    }
}
