//! Waveform and annotation files, and fixed-length windowing.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Label;

pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 128.0;
pub const DEFAULT_WINDOW_SECONDS: f64 = 30.0;

/// A sampled signal with its rate and an opaque provenance id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    pub record_id: String,
    pub sampling_rate_hz: f64,
    pub samples: Vec<f64>,
}

impl WaveformRecord {
    pub fn new(record_id: impl Into<String>, sampling_rate_hz: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sampling_rate_hz > 0.0) || !sampling_rate_hz.is_finite() {
            return Err(Error::invalid(format!("sampling rate {sampling_rate_hz} must be positive")));
        }
        if samples.len() < 2 {
            return Err(Error::TooShort {
                len: samples.len(),
                required: 2,
            });
        }
        Ok(WaveformRecord {
            record_id: record_id.into(),
            sampling_rate_hz,
            samples,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWindow {
    pub record_id: String,
    pub window_index: usize,
    pub samples: Vec<f64>,
    pub sampling_rate_hz: f64,
}

/// Read one amplitude per line. An optional first line `value` is skipped.
/// The record id is the file stem.
pub fn load_waveform_csv(path: impl AsRef<Path>, sampling_rate_hz: f64) -> Result<WaveformRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let samples = parse_waveform(&text).map_err(|(row, msg)| Error::parse(path, row, msg))?;
    if samples.len() < 2 {
        return Err(Error::parse(path, samples.len(), "fewer than 2 samples"));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "record".to_string());
    WaveformRecord::new(id, sampling_rate_hz, samples)
}

fn parse_waveform(text: &str) -> std::result::Result<Vec<f64>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        if i == 0 && cell.eq_ignore_ascii_case("value") {
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| (row, format!("not a number: {cell:?}")))?;
        if !v.is_finite() {
            return Err((row, format!("non-finite amplitude {cell:?}")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn save_waveform_csv(record: &WaveformRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::with_capacity(record.samples.len() * 12 + 6);
    s.push_str("value\n");
    for v in &record.samples {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Split into consecutive non-overlapping windows; a partial tail is dropped.
pub fn window_record(record: &WaveformRecord, window_seconds: f64) -> Result<Vec<SegmentWindow>> {
    if !(window_seconds > 0.0) {
        return Err(Error::invalid(format!("window length {window_seconds} s must be positive")));
    }
    let len = (window_seconds * record.sampling_rate_hz).round() as usize;
    if len == 0 {
        return Err(Error::invalid("window shorter than one sample"));
    }
    Ok(record
        .samples
        .chunks_exact(len)
        .enumerate()
        .map(|(window_index, chunk)| SegmentWindow {
            record_id: record.record_id.clone(),
            window_index,
            samples: chunk.to_vec(),
            sampling_rate_hz: record.sampling_rate_hz,
        })
        .collect())
}

/// `<record_id>:<window_index>:<pulse_index>`
pub fn pulse_id(record_id: &str, window_index: usize, pulse_index: usize) -> String {
    format!("{record_id}:{window_index}:{pulse_index}")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub entries: Vec<(String, Label)>,
}

impl AnnotationFile {
    /// Checks label range and id uniqueness.
    pub fn new(entries: Vec<(String, Label)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for (id, label) in &entries {
            check_label(*label as i64)?;
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(AnnotationFile { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries.iter().map(|(_, l)| *l).collect()
    }
}

fn check_label(v: i64) -> Result<Label> {
    match v {
        -1..=1 => Ok(v as Label),
        _ => Err(Error::InvalidLabel(v)),
    }
}

/// Parse `pulse_id,label` rows. A header line `pulse_id,label` is optional.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationFile> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::parse(path, row, e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::parse(path, row, format!("expected 2 columns, found {}", rec.len())));
        }
        if i == 0 && &rec[0] == "pulse_id" && &rec[1] == "label" {
            continue;
        }
        let label: i64 = rec[1]
            .parse()
            .map_err(|_| Error::parse(path, row, format!("label {:?} is not an integer", &rec[1])))?;
        let label = check_label(label)?;
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        entries.push((id, label));
    }
    Ok(AnnotationFile { entries })
}

pub fn save_annotations(annotations: &AnnotationFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["pulse_id", "label"]).map_err(|e| csv_err(path, e))?;
    for (id, label) in &annotations.entries {
        w.write_record([id.as_str(), &label.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    }
}
