use serde::{Deserialize, Serialize};

use crate::ingest::{pulse_id, SegmentWindow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub min_cycle_s: f64,
    /// Informational: longer pulses are kept, not split.
    pub max_cycle_s: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            min_cycle_s: 0.3,
            max_cycle_s: 1.0,
        }
    }
}

/// Span between two consecutive accepted minima, both endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub pulse_id: String,
    pub start_index: usize,
    pub end_index: usize,
    pub raw_samples: Vec<f64>,
}

/// Accepted local minima: strict on the left, so plateaus resolve to their
/// leftmost sample, minimal within ±⌊min_cycle·fs/2⌋, and at least
/// min_cycle·fs after the previously accepted one.
pub(crate) fn local_minima(x: &[f64], fs: f64, min_cycle_s: f64) -> Vec<usize> {
    let n = x.len();
    let half = (min_cycle_s * fs / 2.0).floor() as usize;
    let refractory = min_cycle_s * fs;
    let mut out: Vec<usize> = Vec::new();
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        if !(x[i] < x[i - 1] && x[i] <= x[i + 1]) {
            continue;
        }
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        if x[lo..=hi].iter().any(|v| *v < x[i]) {
            continue;
        }
        if let Some(&prev) = out.last() {
            if ((i - prev) as f64) < refractory {
                continue;
            }
        }
        out.push(i);
    }
    out
}

pub fn segment_pulses(window: &SegmentWindow, params: &SegmentParams) -> Vec<Pulse> {
    let x = &window.samples;
    let fs = window.sampling_rate_hz;
    let minima = local_minima(x, fs, params.min_cycle_s);
    if minima.len() < 2 {
        return Vec::new();
    }
    let min_len = params.min_cycle_s * fs;
    let mut bounds = vec![minima[0]];
    for (k, &m) in minima.iter().enumerate().skip(1) {
        let start = *bounds.last().unwrap();
        let is_last = k == minima.len() - 1;
        // A short span absorbs the next one by dropping its closing minimum.
        if ((m - start) as f64) < min_len && !is_last {
            continue;
        }
        if ((m - start) as f64) < min_len {
            break;
        }
        bounds.push(m);
    }
    bounds
        .windows(2)
        .enumerate()
        .map(|(k, w)| Pulse {
            pulse_id: pulse_id(&window.record_id, window.window_index, k),
            start_index: w[0],
            end_index: w[1],
            raw_samples: x[w[0]..=w[1]].to_vec(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn window(samples: Vec<f64>) -> SegmentWindow {
        SegmentWindow {
            record_id: "r".into(),
            window_index: 0,
            samples,
            sampling_rate_hz: 128.0,
        }
    }

    #[test]
    fn cosine_minima_interior() {
        // One extra sample on each side turns the cycle boundaries t = 0 and
        // t = 3 into interior minima.
        let x: Vec<f64> = (-1..=385).map(|i| -(2.0 * PI * i as f64 / 128.0).cos()).collect();
        let pulses = segment_pulses(&window(x), &SegmentParams::default());
        assert_eq!(pulses.len(), 3);
        for (k, p) in pulses.iter().enumerate() {
            assert_eq!(p.start_index, 1 + 128 * k);
            assert_eq!(p.raw_samples.len(), 129);
        }
        assert_eq!(pulses[2].pulse_id, "r:0:2");
    }

    #[test]
    fn ramp_has_no_pulses() {
        let x: Vec<f64> = (0..500).map(|i| i as f64).collect();
        assert!(segment_pulses(&window(x), &SegmentParams::default()).is_empty());
    }

    #[test]
    fn notch_minimum_is_suppressed() {
        // A shallow secondary dip 0.2 s after each true minimum lies inside
        // the refractory period.
        let x: Vec<f64> = (0..640)
            .map(|i| {
                let t = i as f64 / 128.0;
                -(2.0 * PI * t).cos() + 0.3 * (2.0 * PI * 5.0 * t).cos()
            })
            .collect();
        let pulses = segment_pulses(&window(x), &SegmentParams::default());
        for p in &pulses {
            assert!(p.raw_samples.len() as f64 >= 0.3 * 128.0);
        }
    }

    #[test]
    fn plateau_takes_leftmost() {
        let mut x = vec![3.0, 2.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        x.extend(vec![3.0; 60]);
        x.extend(vec![2.0, 1.0, 2.0, 3.0]);
        let m = local_minima(&x, 128.0, 0.3);
        assert_eq!(m[0], 2);
    }
}
