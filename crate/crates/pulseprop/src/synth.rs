//! Synthetic PPG with known artifact positions, and the three-bands toy set.
//!
//! A clean beat is a systolic Gaussian lobe plus a smaller diastolic one. A
//! corrupted beat has its shape replaced (or, for noise bursts, overlaid) and
//! is then rescaled to the clean beat's area, so an artifact changes the
//! beat's moments without shifting the baseline of its neighbours once the
//! band-pass removes DC.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::WaveformRecord;
use crate::rng::{seeded, Rng};
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    /// Systolic peak m× taller and m× narrower.
    AmplitudeSpike,
    /// Beat replaced by a short raised plateau.
    BaselineJump,
    /// Beat replaced by a broad flat-topped block: pulsatility lost.
    Dropout,
    /// Rectified band-limited noise on the upstroke.
    NoiseBurst,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 4] = [
        ArtifactKind::AmplitudeSpike,
        ArtifactKind::BaselineJump,
        ArtifactKind::Dropout,
        ArtifactKind::NoiseBurst,
    ];

    /// The kinds the moment rule separates reliably; see `with_all_kinds`.
    pub const DEFAULT: [ArtifactKind; 3] = [
        ArtifactKind::AmplitudeSpike,
        ArtifactKind::Dropout,
        ArtifactKind::NoiseBurst,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub duration_s: f64,
    /// When set, exactly this many beats are generated and `duration_s` is ignored.
    pub n_beats: Option<usize>,
    pub sampling_rate_hz: f64,
    pub heart_rate_bpm: f64,
    pub artifact_fraction: f64,
    pub artifact_kinds: Vec<ArtifactKind>,
    /// Range of the deviation multiplier m.
    pub artifact_multiplier: (f64, f64),
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            duration_s: 600.0,
            n_beats: None,
            sampling_rate_hz: 128.0,
            heart_rate_bpm: 75.0,
            artifact_fraction: 0.18,
            artifact_kinds: ArtifactKind::DEFAULT.to_vec(),
            artifact_multiplier: (3.0, 4.0),
            noise_std: 0.01,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn beats(n: usize, seed: u64) -> Self {
        SynthSpec {
            n_beats: Some(n),
            seed,
            ..Default::default()
        }
    }

    pub fn with_all_kinds(mut self) -> Self {
        self.artifact_kinds = ArtifactKind::ALL.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz > 0.0) {
            return Err(Error::invalid("sampling rate must be positive"));
        }
        if !(30.0..=300.0).contains(&self.heart_rate_bpm) {
            return Err(Error::invalid(format!("heart rate {} outside [30, 300] bpm", self.heart_rate_bpm)));
        }
        if !(0.0..=1.0).contains(&self.artifact_fraction) {
            return Err(Error::invalid("artifact_fraction outside [0, 1]"));
        }
        if self.artifact_fraction > 0.0 && self.artifact_kinds.is_empty() {
            return Err(Error::invalid("artifact_kinds is empty"));
        }
        let (lo, hi) = self.artifact_multiplier;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::invalid("artifact_multiplier must be an increasing positive range"));
        }
        if self.n_beats.is_none() && !(self.duration_s > 0.0) {
            return Err(Error::invalid("duration must be positive"));
        }
        if self.noise_std < 0.0 {
            return Err(Error::invalid("noise_std must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatTruth {
    pub onset_index: usize,
    pub flag: bool,
    pub kind: Option<ArtifactKind>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub record: WaveformRecord,
    pub beats: Vec<BeatTruth>,
}

fn lobe(t: f64, c: f64, s: f64) -> f64 {
    (-0.5 * ((t - c) / s).powi(2)).exp()
}

fn beat_shape(t: f64) -> f64 {
    lobe(t, 0.25, 0.08) + 0.4 * lobe(t, 0.5, 0.11)
}

/// Raised-cosine box over [a, b] with ramps of width r.
fn smooth_box(t: f64, a: f64, b: f64, r: f64) -> f64 {
    let e = ((t - a) / r).clamp(0.0, 1.0) * ((b - t) / r).clamp(0.0, 1.0);
    0.5 - 0.5 * (PI * e).cos()
}

/// White noise smoothed by a Gaussian kernel (σ = 2.5 samples) scaled to keep unit variance.
fn smooth_noise(n: usize, rng: &mut Rng) -> Vec<f64> {
    const HALF: i64 = 15;
    let kernel: Vec<f64> = (-HALF..=HALF).map(|i| lobe(i as f64, 0.0, 2.5)).collect();
    let norm = kernel.iter().map(|k| k * k).sum::<f64>().sqrt();
    let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (0..n as i64)
        .map(|i| {
            (-HALF..=HALF)
                .filter_map(|o| {
                    let j = i + o;
                    (0..n as i64).contains(&j).then(|| white[j as usize] * kernel[(o + HALF) as usize])
                })
                .sum::<f64>()
                / norm
        })
        .collect()
}

fn corrupt(kind: ArtifactKind, clean: &[f64], m: f64, rng: &mut Rng) -> Vec<f64> {
    let n = clean.len();
    let t = |i: usize| i as f64 / n as f64;
    let y: Vec<f64> = match kind {
        ArtifactKind::AmplitudeSpike => (0..n)
            .map(|i| m * lobe(t(i), 0.25, 0.08 / m) + 0.4 * lobe(t(i), 0.5, 0.11))
            .collect(),
        ArtifactKind::BaselineJump => (0..n).map(|i| smooth_box(t(i), 0.3, 0.6, 0.1)).collect(),
        ArtifactKind::Dropout => (0..n).map(|i| smooth_box(t(i), 0.1, 0.9, 0.15)).collect(),
        ArtifactKind::NoiseBurst => {
            let nz = smooth_noise(n, rng);
            (0..n)
                .map(|i| clean[i] + m * 1.2 * nz[i].abs() * smooth_box(t(i), 0.17, 0.33, 0.05))
                .collect()
        }
    };
    let scale = clean.iter().sum::<f64>() / y.iter().sum::<f64>();
    y.into_iter().map(|v| v * scale).collect()
}

/// Beat periods are drawn first; then exactly round(fraction·beats) beats,
/// chosen uniformly without replacement, are corrupted.
pub fn generate_ppg(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let fs = spec.sampling_rate_hz;
    let period = 60.0 / spec.heart_rate_bpm;
    let limit = match spec.n_beats {
        Some(_) => usize::MAX,
        None => (spec.duration_s * fs).round() as usize,
    };
    let mut lengths = Vec::new();
    let mut total = 0usize;
    while total < limit && spec.n_beats.is_none_or(|n| lengths.len() < n) {
        let jitter: f64 = rng.random_range(-0.05..=0.05);
        let n = ((period * (1.0 + jitter) * fs).round() as usize).max(4);
        lengths.push(n);
        total += n;
    }
    let n_flagged = (spec.artifact_fraction * lengths.len() as f64).round() as usize;
    let mut flagged = vec![false; lengths.len()];
    for i in rand::seq::index::sample(&mut rng, lengths.len(), n_flagged) {
        flagged[i] = true;
    }

    let mut samples = Vec::with_capacity(total);
    let mut beats = Vec::with_capacity(lengths.len());
    for (&n, &flag) in lengths.iter().zip(&flagged) {
        let clean: Vec<f64> = (0..n).map(|i| beat_shape(i as f64 / n as f64)).collect();
        let (kind, beat) = if flag {
            let kind = spec.artifact_kinds[rng.random_range(0..spec.artifact_kinds.len())];
            let (lo, hi) = spec.artifact_multiplier;
            let m = if hi > lo { rng.random_range(lo..hi) } else { lo };
            (Some(kind), corrupt(kind, &clean, m, &mut rng))
        } else {
            (None, clean)
        };
        beats.push(BeatTruth {
            onset_index: samples.len(),
            flag,
            kind,
        });
        samples.extend(beat);
    }
    samples.truncate(limit);
    for v in samples.iter_mut() {
        *v += spec.noise_std * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(SynthOutput {
        record: WaveformRecord::new("synth", fs, samples)?,
        beats,
    })
}

/// Ground-truth label of sample spans `[start, end]`: 1 when at least
/// `min_overlap` of the span lies inside flagged beats.
pub fn span_truth(beats: &[BeatTruth], total_len: usize, spans: &[(usize, usize)], min_overlap: f64) -> Vec<Label> {
    let ends: Vec<usize> = beats
        .iter()
        .skip(1)
        .map(|b| b.onset_index)
        .chain(std::iter::once(total_len))
        .collect();
    spans
        .iter()
        .map(|&(a, b)| {
            // Beats are sorted by onset; scan those that can overlap.
            let first = beats.partition_point(|bt| bt.onset_index <= a).saturating_sub(1);
            let mut covered = 0usize;
            for (k, bt) in beats.iter().enumerate().skip(first) {
                if bt.onset_index >= b {
                    break;
                }
                if bt.flag {
                    let lo = bt.onset_index.max(a);
                    let hi = ends[k].min(b);
                    covered += hi.saturating_sub(lo);
                }
            }
            let len = (b - a).max(1);
            Label::from(covered as f64 / len as f64 >= min_overlap)
        })
        .collect()
}

/// `beat_onset_index,flag` CSV.
pub fn save_truth_csv(beats: &[BeatTruth], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("beat_onset_index,flag\n");
    for b in beats {
        s.push_str(&format!("{},{}\n", b.onset_index, u8::from(b.flag)));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn load_truth_csv(path: impl AsRef<Path>) -> Result<Vec<BeatTruth>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("beat_onset_index")) {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, i + 1, "expected two columns"))?;
        let onset = a.trim().parse().map_err(|_| Error::parse(path, i + 1, "bad onset index"))?;
        let flag = match b.trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(path, i + 1, format!("bad flag {other:?}"))),
        };
        out.push(BeatTruth {
            onset_index: onset,
            flag,
            kind: None,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ThreeBands {
    pub points: Vec<[f64; 2]>,
    pub bands: Vec<u8>,
    /// One labelled point per band, at alternating extremities.
    pub labeled: [usize; 3],
}

/// Band spacing relative to the along-band point spacing of 1.
pub const BAND_GAP: f64 = 8.0;

/// Three horizontal bands of `n_per_band` points. Bands 0 and 2 are labelled
/// at their left ends and band 1 at its right end, so assigning every point
/// to the nearest labelled point is wrong for roughly half of each band.
pub fn generate_three_bands(n_per_band: usize, seed: u64) -> Result<ThreeBands> {
    if n_per_band < 2 {
        return Err(Error::invalid("n_per_band must be at least 2"));
    }
    let mut rng = seeded(seed);
    let mut points = Vec::with_capacity(3 * n_per_band);
    let mut bands = Vec::with_capacity(3 * n_per_band);
    for b in 0..3u8 {
        for i in 0..n_per_band {
            let x = i as f64 + rng.random_range(-0.1..0.1);
            let y = b as f64 * BAND_GAP + rng.random_range(-0.1..0.1);
            points.push([x, y]);
            bands.push(b);
        }
    }
    let labeled = [0, 2 * n_per_band - 1, 2 * n_per_band];
    Ok(ThreeBands { points, bands, labeled })
}
