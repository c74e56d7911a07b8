//! Band-pass filtering, pulse segmentation, resampling and normalization.

mod filter;
mod segment;

pub use filter::{design_bandpass, filtfilt, Bandpass, BandpassSpec, Biquad};
pub use segment::{segment_pulses, Pulse, SegmentParams};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::csv_err;

/// Feature dimension of a resampled pulse.
pub const PULSE_LEN: usize = 256;

/// Row-major N × dim feature matrix with one id per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseMatrix {
    pub pulse_ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl PulseMatrix {
    pub fn new(pulse_ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if data.len() != pulse_ids.len() * dim {
            return Err(Error::Dimension {
                expected: pulse_ids.len() * dim,
                got: data.len(),
            });
        }
        Ok(PulseMatrix { pulse_ids, dim, data })
    }

    /// Rows with generated ids `0..N`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::from_rows_with_ids(ids, rows)
    }

    pub fn from_rows_with_ids(pulse_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(pulse_ids, dim, data)
    }

    pub fn empty(dim: usize) -> Self {
        PulseMatrix {
            pulse_ids: Vec::new(),
            dim,
            data: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.pulse_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, id: impl Into<String>, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: row.len(),
            });
        }
        self.pulse_ids.push(id.into());
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, idx: &[usize]) -> PulseMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        PulseMatrix {
            pulse_ids: idx.iter().map(|&i| self.pulse_ids[i].clone()).collect(),
            dim: self.dim,
            data,
        }
    }

    /// CSV with header `pulse_id,f0,...,f{dim-1}`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header = vec!["pulse_id".to_string()];
        header.extend((0..self.dim).map(|j| format!("f{j}")));
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        let mut rec = Vec::with_capacity(self.dim + 1);
        for (i, id) in self.pulse_ids.iter().enumerate() {
            rec.clear();
            rec.push(id.clone());
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let dim = rdr.headers().map_err(|e| csv_err(path, e))?.len().saturating_sub(1);
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::parse(path, row, e.to_string()))?;
            ids.push(rec[0].to_string());
            for cell in rec.iter().skip(1) {
                data.push(
                    cell.parse::<f64>()
                        .map_err(|_| Error::parse(path, row, format!("not a number: {cell:?}")))?,
                );
            }
        }
        Self::new(ids, dim, data)
    }
}

/// Linear interpolation onto `target_len` uniform positions `k·(n−1)/(target_len−1)`.
pub fn resample_pulse(raw: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let n = raw.len();
    if n < 2 {
        return Err(Error::TooShort { len: n, required: 2 });
    }
    if target_len < 2 {
        return Err(Error::invalid("target length must be at least 2"));
    }
    let step = (n - 1) as f64 / (target_len - 1) as f64;
    let mut out = Vec::with_capacity(target_len);
    for k in 0..target_len {
        if k == target_len - 1 {
            out.push(raw[n - 1]);
            continue;
        }
        let pos = k as f64 * step;
        let i = (pos.floor() as usize).min(n - 2);
        let frac = pos - i as f64;
        out.push(if frac == 0.0 {
            raw[i]
        } else {
            raw[i] + frac * (raw[i + 1] - raw[i])
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    PerPulse,
    #[default]
    PerFeature,
}

/// Normalized matrix plus the rows (per_pulse) or columns (per_feature) whose
/// variance was zero. Those are centred but not scaled.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub matrix: PulseMatrix,
    pub degenerate: Vec<usize>,
}

pub fn normalize_features(matrix: &PulseMatrix, mode: NormalizeMode) -> Normalized {
    let mut out = matrix.clone();
    let mut degenerate = Vec::new();
    match mode {
        NormalizeMode::PerPulse => {
            for i in 0..out.nrows() {
                if !standardize(out.row_mut(i)) {
                    degenerate.push(i);
                }
            }
        }
        NormalizeMode::PerFeature => {
            let (n, d) = (out.nrows(), out.dim());
            let mut col = vec![0.0; n];
            for j in 0..d {
                for (i, v) in col.iter_mut().enumerate() {
                    *v = out.data[i * d + j];
                }
                if !standardize(&mut col) {
                    degenerate.push(j);
                }
                for (i, &v) in col.iter().enumerate() {
                    out.data[i * d + j] = v;
                }
            }
        }
    }
    Normalized {
        matrix: out,
        degenerate,
    }
}

/// In-place z-score with population std. Returns false when the spread is zero.
fn standardize(x: &mut [f64]) -> bool {
    if x.is_empty() {
        return false;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter_mut().for_each(|v| *v -= mean);
    // A second centring pass removes the rounding left by the first.
    let resid = x.iter().sum::<f64>() / n;
    x.iter_mut().for_each(|v| *v -= resid);
    let var = x.iter().map(|v| v * v).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 1e-12 * (1.0 + mean.abs())) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= sd);
    true
}

/// Squared Euclidean distance.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_ramp() {
        let out = resample_pulse(&[0.0, 1.0], 256).unwrap();
        for (k, v) in out.iter().enumerate() {
            assert_abs_diff_eq!(*v, k as f64 / 255.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn identity_at_target_length() {
        let raw: Vec<f64> = (0..256).map(|i| ((i * 37) % 11) as f64).collect();
        assert_eq!(resample_pulse(&raw, 256).unwrap(), raw);
    }

    #[test]
    fn apex_straddled() {
        let out = resample_pulse(&[0.0, 2.0, 0.0], 256).unwrap();
        // Positions 127 and 128 map to 254/255 and 256/255 on the original axis.
        assert_abs_diff_eq!(out[127], 2.0 * 254.0 / 255.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[128], 2.0 * (1.0 - 1.0 / 255.0), epsilon = 1e-12);
        assert!(out.iter().cloned().fold(f64::MIN, f64::max) <= 2.0);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[255], 0.0);
        assert!(resample_pulse(&[1.0], 256).is_err());
    }

    #[test]
    fn per_pulse_forced_arithmetic() {
        let m = PulseMatrix::from_rows(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let n = normalize_features(&m, NormalizeMode::PerPulse);
        let r = 1.5f64.sqrt();
        assert_abs_diff_eq!(n.matrix.row(0)[0], -r, epsilon = 1e-12);
        assert_abs_diff_eq!(n.matrix.row(0)[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.matrix.row(0)[2], r, epsilon = 1e-12);
    }

    #[test]
    fn per_feature_two_points() {
        let m = PulseMatrix::from_rows(vec![vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let n = normalize_features(&m, NormalizeMode::PerFeature);
        assert_eq!(n.matrix.row(0), &[-1.0, -1.0]);
        assert_eq!(n.matrix.row(1), &[1.0, 1.0]);
        assert!(n.degenerate.is_empty());
    }

    #[test]
    fn zero_variance_is_flagged() {
        let m = PulseMatrix::from_rows(vec![vec![5.0, 5.0, 5.0], vec![1.0, 2.0, 4.0]]).unwrap();
        let n = normalize_features(&m, NormalizeMode::PerPulse);
        assert_eq!(n.degenerate, vec![0]);
        assert!(n.matrix.row(0).iter().all(|v| *v == 0.0));
    }
}
