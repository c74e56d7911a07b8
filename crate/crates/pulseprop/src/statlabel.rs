//! Moment-based seed labeler.
//!
//! Within a window every pulse is summarised by its skewness, (non-excess)
//! kurtosis and standard deviation, all population moments. A pulse is an
//! artifact when any of the three falls outside mean ± 2·std of that statistic
//! over the window's pulses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Label, ARTIFACT, CLEAN, UNLABELED};

pub const DEFAULT_BAND_WIDTH: f64 = 2.0;
pub const MIN_PULSES_PER_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseStats {
    pub skewness: f64,
    pub kurtosis: f64,
    pub std: f64,
}

pub fn pulse_stats(x: &[f64]) -> Result<PulseStats> {
    if x.len() < 2 {
        return Err(Error::TooShort { len: x.len(), required: 2 });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    if !(std > 1e-12 * (1.0 + mean.abs())) {
        return Err(Error::Flatline);
    }
    Ok(PulseStats {
        skewness: m3 / (m2 * std),
        kurtosis: m4 / (m2 * m2),
        std,
    })
}

/// Closed interval; values on the boundary are inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBand {
    pub lower: f64,
    pub upper: f64,
}

impl ThresholdBand {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    fn around(values: impl Iterator<Item = f64> + Clone, width: f64) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        ThresholdBand {
            lower: mean - width * sd,
            upper: mean + width * sd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowBands {
    pub skewness: ThresholdBand,
    pub kurtosis: ThresholdBand,
    pub std: ThresholdBand,
}

impl WindowBands {
    pub fn contains(&self, s: &PulseStats) -> bool {
        self.skewness.contains(s.skewness) && self.kurtosis.contains(s.kurtosis) && self.std.contains(s.std)
    }
}

pub fn window_thresholds(stats: &[PulseStats]) -> Result<WindowBands> {
    window_thresholds_with(stats, DEFAULT_BAND_WIDTH)
}

/// Bands at mean ± `width`·std.
pub fn window_thresholds_with(stats: &[PulseStats], width: f64) -> Result<WindowBands> {
    if stats.len() < MIN_PULSES_PER_WINDOW {
        return Err(Error::Unlabelable(stats.len()));
    }
    Ok(WindowBands {
        skewness: ThresholdBand::around(stats.iter().map(|s| s.skewness), width),
        kurtosis: ThresholdBand::around(stats.iter().map(|s| s.kurtosis), width),
        std: ThresholdBand::around(stats.iter().map(|s| s.std), width),
    })
}

/// `None` marks a flatline pulse, which is always an artifact.
pub fn label_window(stats: &[Option<PulseStats>], bands: &WindowBands) -> Vec<Label> {
    stats
        .iter()
        .map(|s| match s {
            Some(s) if bands.contains(s) => CLEAN,
            _ => ARTIFACT,
        })
        .collect()
}

/// Label every pulse of one window. Bands come from the non-flat pulses; with
/// fewer than three of those the window is unlabelable and all its
/// non-flat pulses get -1.
pub fn label_pulses(pulses: &[&[f64]], width: f64) -> Vec<Label> {
    let stats: Vec<Option<PulseStats>> = pulses.iter().map(|p| pulse_stats(p).ok()).collect();
    let valid: Vec<PulseStats> = stats.iter().flatten().copied().collect();
    match window_thresholds_with(&valid, width) {
        Ok(bands) => label_window(&stats, &bands),
        Err(_) => stats
            .iter()
            .map(|s| if s.is_some() { UNLABELED } else { ARTIFACT })
            .collect(),
    }
}

/// Label rows grouped by an arbitrary window key, preserving row order.
pub fn label_by_window<K: Ord + Clone>(rows: &[&[f64]], window_of: &[K], width: f64) -> Vec<Label> {
    assert_eq!(rows.len(), window_of.len());
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in window_of.iter().enumerate() {
        groups.entry(k.clone()).or_default().push(i);
    }
    let mut out = vec![UNLABELED; rows.len()];
    for idx in groups.values() {
        let pulses: Vec<&[f64]> = idx.iter().map(|&i| rows[i]).collect();
        for (&i, l) in idx.iter().zip(label_pulses(&pulses, width)) {
            out[i] = l;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_moments() {
        let s = pulse_stats(&[-1.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(s.skewness, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.std, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.kurtosis, 1.5, epsilon = 1e-14);
        assert!(matches!(pulse_stats(&[5.0, 5.0, 5.0]), Err(Error::Flatline)));
    }

    #[test]
    fn skew_band_hand_values() {
        let stats: Vec<PulseStats> = [0.0, 0.0, 0.0, 0.0, 10.0]
            .iter()
            .map(|&s| PulseStats {
                skewness: s,
                kurtosis: 3.0,
                std: 1.0,
            })
            .collect();
        let b = window_thresholds(&stats).unwrap();
        assert_abs_diff_eq!(b.skewness.lower, -6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.skewness.upper, 10.0, epsilon = 1e-12);
        // 10 sits exactly on the upper edge, which counts as inside.
        let labels = label_window(&stats.iter().copied().map(Some).collect::<Vec<_>>(), &b);
        assert_eq!(labels, vec![0; 5]);
        assert!(matches!(window_thresholds(&stats[..2]), Err(Error::Unlabelable(2))));
    }

    #[test]
    fn identical_pulses_all_clean() {
        let p: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let rows: Vec<&[f64]> = vec![&p; 6];
        assert_eq!(label_pulses(&rows, 2.0), vec![0; 6]);
    }

    #[test]
    fn flatline_is_artifact() {
        let p: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let flat = vec![1.0; 50];
        let mut rows: Vec<&[f64]> = vec![&p; 5];
        rows.push(&flat);
        let labels = label_pulses(&rows, 2.0);
        assert_eq!(labels[5], 1);
        assert!(labels[..5].iter().all(|&l| l == 0));
    }
}
