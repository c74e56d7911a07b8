//! End-to-end experiment: preprocess → statistical seed labels → splits →
//! rebalance → propagate / classify → evaluate.
//!
//! Every stage has an in-memory form and a file form. The file forms read and
//! write a working directory so each stage can be re-run on its own:
//!
//! ```text
//! config.json          pulses_raw.csv   pulses.csv   truth.csv
//! statlabels.csv       annotations.csv  splits.csv
//! predictions/<m>.csv  models/<m>.json  reports/<m>.json  manifest.json
//! ```
//!
//! LP is transductive: test pulses are unlabelled nodes of the propagation
//! graph. The baselines are fit on the same (resampled) seed rows. All methods
//! are scored on the same test rows.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit, BaselineParams, ModelKind, TrainedModel};
use crate::error::{Error, Result, StageExt};
use crate::ingest::{self, csv_err, AnnotationFile, WaveformRecord};
use crate::labelprop::{build_graph, harden_labels, propagate, PropagationConfig};
use crate::metrics::{evaluate, EvaluationReport};
use crate::preprocess::{
    design_bandpass, filtfilt, normalize_features, resample_pulse, segment_pulses, BandpassSpec, NormalizeMode,
    PulseMatrix, SegmentParams, PULSE_LEN,
};
use crate::rebalance::{resample_traced, ResampleMethod, ResampleSpec};
use crate::rng::substream;
use crate::statlabel::label_by_window;
use crate::synth::{self, generate_ppg, BeatTruth, SynthSpec};
use crate::{Label, UNLABELED};

pub const LP: &str = "lp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    Synth(SynthSpec),
    /// Waveform CSVs; optional per-file beat truth (`beat_onset_index,flag`).
    Files {
        waveforms: Vec<PathBuf>,
        #[serde(default = "default_rate")]
        sampling_rate_hz: f64,
        #[serde(default)]
        beat_truth: Vec<PathBuf>,
    },
}

fn default_rate() -> f64 {
    ingest::DEFAULT_SAMPLING_RATE_HZ
}

/// Resampling applied to the seed rows; its random stream comes from the
/// global seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleConfig {
    pub method: ResampleMethod,
    pub k_neighbors: usize,
    pub target_ratio: f64,
}

impl ResampleConfig {
    pub fn new(method: ResampleMethod) -> Self {
        ResampleConfig {
            method,
            ..Default::default()
        }
    }
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            method: ResampleMethod::Smote,
            k_neighbors: 5,
            target_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSpec,
    pub window_seconds: f64,
    pub bandpass: BandpassSpec,
    pub segment: SegmentParams,
    pub normalize: NormalizeMode,
    /// Band half-width of the statistical labeler, in standard deviations.
    pub statlabel_width: f64,
    /// Fraction of a pulse that must lie in flagged beats for a true artifact.
    pub truth_overlap: f64,
    pub seed_label_fraction: f64,
    pub train_fraction: f64,
    pub labeled_within_train: f64,
    pub lp_resample: ResampleConfig,
    pub baseline_resample: ResampleConfig,
    pub propagation: PropagationConfig,
    pub baselines: BaselineParams,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: InputSpec::Synth(SynthSpec::beats(1000, 0)),
            window_seconds: ingest::DEFAULT_WINDOW_SECONDS,
            bandpass: BandpassSpec::default(),
            segment: SegmentParams::default(),
            normalize: NormalizeMode::PerFeature,
            statlabel_width: crate::statlabel::DEFAULT_BAND_WIDTH,
            truth_overlap: 0.5,
            seed_label_fraction: 0.05,
            train_fraction: 0.7,
            labeled_within_train: 0.5,
            lp_resample: ResampleConfig::new(ResampleMethod::Smote),
            baseline_resample: ResampleConfig::new(ResampleMethod::Adasyn),
            propagation: PropagationConfig::default(),
            baselines: BaselineParams::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} must lie in (0, 1)")))
            }
        };
        open("train_fraction", self.train_fraction)?;
        open("labeled_within_train", self.labeled_within_train)?;
        if !(self.seed_label_fraction > 0.0 && self.seed_label_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "seed_label_fraction = {} must lie in (0, 1]",
                self.seed_label_fraction
            )));
        }
        if !(self.window_seconds > 0.0) {
            return Err(Error::invalid("window_seconds must be positive"));
        }
        if let InputSpec::Synth(s) = &self.input {
            s.validate()?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- preprocess

#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// Resampled, unnormalised pulses, consumed by the statistical labeler.
    pub raw: PulseMatrix,
    /// Normalised classifier features.
    pub features: PulseMatrix,
    /// Ground truth when the input carries it.
    pub truth: Option<Vec<Label>>,
}

/// `<record>:<window>` part of a pulse id.
pub fn window_key(pulse_id: &str) -> &str {
    pulse_id.rsplit_once(':').map_or(pulse_id, |(w, _)| w)
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Vec<(WaveformRecord, Option<Vec<BeatTruth>>)>> {
    match &cfg.input {
        InputSpec::Synth(spec) => {
            let out = generate_ppg(spec)?;
            Ok(vec![(out.record, Some(out.beats))])
        }
        InputSpec::Files {
            waveforms,
            sampling_rate_hz,
            beat_truth,
        } => {
            if !beat_truth.is_empty() && beat_truth.len() != waveforms.len() {
                return Err(Error::invalid("beat_truth must list one file per waveform"));
            }
            waveforms
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let rec = ingest::load_waveform_csv(p, *sampling_rate_hz)?;
                    let truth = beat_truth.get(i).map(synth::load_truth_csv).transpose()?;
                    Ok((rec, truth))
                })
                .collect()
        }
    }
}

/// Pulse id, resampled samples and global sample span.
type WindowPulse = (String, Vec<f64>, (usize, usize));

pub fn preprocess_stage(cfg: &PipelineConfig) -> Result<Preprocessed> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let mut raw = PulseMatrix::empty(PULSE_LEN);
    let mut truth: Option<Vec<Label>> = inputs.iter().all(|(_, t)| t.is_some()).then(Vec::new);
    for (rec, beats) in &inputs {
        let filter = design_bandpass(&cfg.bandpass, rec.sampling_rate_hz)?;
        let windows = ingest::window_record(rec, cfg.window_seconds)?;
        let per_window: Vec<Result<Vec<WindowPulse>>> = windows
            .par_iter()
            .map(|w| {
                let filtered = ingest::SegmentWindow {
                    samples: filtfilt(&filter, &w.samples)?,
                    ..w.clone()
                };
                let offset = w.window_index * w.samples.len();
                segment_pulses(&filtered, &cfg.segment)
                    .into_iter()
                    .map(|p| {
                        let span = (offset + p.start_index, offset + p.end_index);
                        Ok((p.pulse_id, resample_pulse(&p.raw_samples, PULSE_LEN)?, span))
                    })
                    .collect()
            })
            .collect();
        let mut spans = Vec::new();
        for w in per_window {
            for (id, row, span) in w? {
                raw.push(id, &row)?;
                spans.push(span);
            }
        }
        if let (Some(t), Some(beats)) = (truth.as_mut(), beats) {
            t.extend(synth::span_truth(beats, rec.samples.len(), &spans, cfg.truth_overlap));
        }
    }
    if raw.nrows() == 0 {
        return Err(Error::invalid("no pulses found in the input"));
    }
    let features = normalize_features(&raw, cfg.normalize).matrix;
    Ok(Preprocessed { raw, features, truth })
}

// --------------------------------------------------------------------- label

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Labelled training row carrying a seed label.
    Seed,
    /// Labelled-pool row without a seed label.
    Labeled,
    Unlabeled,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Seed => "seed",
            Split::Labeled => "labeled",
            Split::Unlabeled => "unlabeled",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Split> {
        [Split::Seed, Split::Labeled, Split::Unlabeled, Split::Test]
            .into_iter()
            .find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelPlan {
    /// Statistical label of every pulse; -1 where a window was too short.
    pub stat_labels: Vec<Label>,
    pub split: Vec<Split>,
    /// Seed labels on `Split::Seed` rows, -1 elsewhere.
    pub annotations: Vec<Label>,
}

impl LabelPlan {
    pub fn indices(&self, s: Split) -> Vec<usize> {
        (0..self.split.len()).filter(|&i| self.split[i] == s).collect()
    }
}

/// Per-stratum shuffle; the first round(frac·n_c) of each stratum go left.
fn stratified_split(idx: &[usize], strata: &[Label], frac: f64, rng: &mut crate::rng::Rng) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for &i in idx {
        groups.entry(strata[i]).or_default().push(i);
    }
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for g in groups.values_mut() {
        g.shuffle(rng);
        let cut = (frac * g.len() as f64).round() as usize;
        left.extend_from_slice(&g[..cut]);
        right.extend_from_slice(&g[cut..]);
    }
    left.sort_unstable();
    right.sort_unstable();
    (left, right)
}

/// Stratified draw of `total` rows with labels 0/1, keeping at least two of
/// each class whenever the pool allows.
fn draw_seeds(pool: &[usize], labels: &[Label], total: usize, rng: &mut crate::rng::Rng) -> Vec<usize> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for &i in pool {
        if let 0 | 1 = labels[i] {
            by_class[labels[i] as usize].push(i);
        }
    }
    let avail = [by_class[0].len(), by_class[1].len()];
    let total = total.min(avail[0] + avail[1]);
    let share = total as f64 * avail[1] as f64 / (avail[0] + avail[1]).max(1) as f64;
    let mut n1 = share.round() as usize;
    let floor = |a: usize| a.min(2);
    n1 = n1.max(floor(avail[1])).min(avail[1]);
    let mut n0 = total.saturating_sub(n1);
    if n0 < floor(avail[0]) {
        n0 = floor(avail[0]);
        n1 = total.saturating_sub(n0).max(floor(avail[1]));
    }
    n0 = n0.min(avail[0]);
    let mut out = Vec::with_capacity(n0 + n1);
    for (c, n) in [(0, n0), (1, n1)] {
        let g = &mut by_class[c];
        g.shuffle(rng);
        out.extend_from_slice(&g[..n]);
    }
    out.sort_unstable();
    out
}

pub fn label_stage(cfg: &PipelineConfig, pre: &Preprocessed) -> Result<LabelPlan> {
    let n = pre.raw.nrows();
    let rows: Vec<&[f64]> = pre.raw.rows().collect();
    let keys: Vec<&str> = pre.raw.pulse_ids.iter().map(|s| window_key(s)).collect();
    let stat_labels = label_by_window(&rows, &keys, cfg.statlabel_width);

    let all: Vec<usize> = (0..n).collect();
    let mut rng = substream(cfg.seed, "split");
    let (train, test) = stratified_split(&all, &stat_labels, cfg.train_fraction, &mut rng);
    let (pool, unlabeled) = stratified_split(&train, &stat_labels, cfg.labeled_within_train, &mut rng);
    let n_seeds = ((cfg.seed_label_fraction * n as f64).round() as usize).max(2);
    let mut rng = substream(cfg.seed, "seeds");
    let seeds = draw_seeds(&pool, &stat_labels, n_seeds, &mut rng);

    let mut split = vec![Split::Test; n];
    for &i in &pool {
        split[i] = Split::Labeled;
    }
    for &i in &unlabeled {
        split[i] = Split::Unlabeled;
    }
    let mut annotations = vec![UNLABELED; n];
    for &i in &seeds {
        split[i] = Split::Seed;
        annotations[i] = stat_labels[i];
    }
    debug_assert!(test.iter().all(|&i| split[i] == Split::Test));
    Ok(LabelPlan {
        stat_labels,
        split,
        annotations,
    })
}

// ------------------------------------------------------------ train / predict

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub method: String,
    pub pulse_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

/// Seed rows after resampling, with the neighbour count clamped below the
/// minority size so very small seed sets still resample.
fn resampled_seeds(
    cfg: &PipelineConfig,
    rs: &ResampleConfig,
    features: &PulseMatrix,
    plan: &LabelPlan,
    stream: &str,
) -> Result<(PulseMatrix, Vec<Label>, usize)> {
    let seeds = plan.indices(Split::Seed);
    let x = features.select(&seeds);
    let y: Vec<Label> = seeds.iter().map(|&i| plan.annotations[i]).collect();
    let ones = y.iter().filter(|&&l| l == 1).count();
    let minority = ones.min(y.len() - ones);
    if minority == 0 {
        return Err(Error::SingleClass(y.first().copied().unwrap_or(0)));
    }
    let mut method = rs.method;
    let mut k = rs.k_neighbors;
    if matches!(method, ResampleMethod::Smote | ResampleMethod::Adasyn) && minority <= k {
        k = minority - 1;
        if k == 0 {
            method = ResampleMethod::Ros;
            k = 1;
        }
    }
    let spec = ResampleSpec {
        method,
        k_neighbors: k,
        target_ratio: rs.target_ratio,
        seed: substream(cfg.seed, stream).next_u64(),
    };
    let r = resample_traced(&x, &y, &spec)?;
    let kept_originals = r
        .origin
        .iter()
        .filter(|o| matches!(o, crate::rebalance::RowOrigin::Original(_)))
        .count();
    Ok((r.features, r.labels, kept_originals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationInfo {
    pub solver: crate::labelprop::Solver,
    pub nodes: usize,
    pub seed_rows: usize,
    pub synthetic_rows: usize,
    pub stranded: usize,
    pub iterations: usize,
    pub converged: bool,
}

pub fn propagate_stage(
    cfg: &PipelineConfig,
    features: &PulseMatrix,
    plan: &LabelPlan,
) -> Result<(Predictions, PropagationInfo)> {
    let (xs, ys, kept) = resampled_seeds(cfg, &cfg.lp_resample, features, plan, "rebalance.lp")?;
    let n = features.nrows();
    // Seed rows removed by under-sampling stay in the graph, unlabelled.
    let mut graph_x = features.clone();
    let mut labels = vec![UNLABELED; n];
    for (r, id) in xs.pulse_ids.iter().enumerate().take(kept) {
        let i = features.pulse_ids.iter().position(|p| p == id).expect("seed row id");
        labels[i] = ys[r];
    }
    for (r, &y) in ys.iter().enumerate().skip(kept) {
        graph_x.push(xs.pulse_ids[r].clone(), xs.row(r))?;
        labels.push(y);
    }
    let graph = build_graph(&graph_x, &labels, &cfg.propagation)?;
    let out = propagate(&graph, &cfg.propagation);
    let hard = harden_labels(&out.distribution);
    let test = plan.indices(Split::Test);
    let info = PropagationInfo {
        solver: out.solver,
        nodes: graph.len(),
        seed_rows: kept,
        synthetic_rows: xs.nrows() - kept,
        stranded: out.stranded.len(),
        iterations: out.iterations,
        converged: out.converged,
    };
    Ok((
        Predictions {
            method: LP.to_string(),
            pulse_ids: test.iter().map(|&i| features.pulse_ids[i].clone()).collect(),
            scores: test.iter().map(|&i| hard.scores[i]).collect(),
            labels: test.iter().map(|&i| hard.labels[i]).collect(),
        },
        info,
    ))
}

pub fn classify_stage(
    cfg: &PipelineConfig,
    features: &PulseMatrix,
    plan: &LabelPlan,
) -> Result<Vec<(TrainedModel, Predictions)>> {
    let (xs, ys, _) = resampled_seeds(cfg, &cfg.baseline_resample, features, plan, "rebalance.baselines")?;
    let test = plan.indices(Split::Test);
    let xt = features.select(&test);
    let mut params = cfg.baselines;
    params.knn_k = params.knn_k.min(xs.nrows());
    ModelKind::ALL
        .iter()
        .map(|&kind| {
            let model = fit(kind, &xs, &ys, &params)?;
            let scores = model.predict_proba(&xt)?;
            let labels = scores.iter().map(|&p| Label::from(p >= 0.5)).collect();
            Ok((
                model,
                Predictions {
                    method: kind.name().to_string(),
                    pulse_ids: xt.pulse_ids.clone(),
                    scores,
                    labels,
                },
            ))
        })
        .collect()
}

/// Evaluation truth: ground truth when present, else the statistical labels.
pub fn evaluation_truth<'a>(pre_truth: Option<&'a [Label]>, plan: &'a LabelPlan) -> &'a [Label] {
    pre_truth.unwrap_or(&plan.stat_labels)
}

/// Score predictions against truth looked up by pulse id. Rows whose truth
/// is unknown (-1) are skipped; synthetic ids are rejected.
pub fn evaluate_predictions(pred: &Predictions, ids: &[String], truth: &[Label]) -> Result<EvaluationReport> {
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let (mut t, mut p, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (k, id) in pred.pulse_ids.iter().enumerate() {
        if id.starts_with(crate::rebalance::SYNTHETIC_PREFIX) {
            return Err(Error::invalid(format!("synthetic row {id} in evaluation set")));
        }
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| Error::invalid(format!("unknown pulse id {id}")))?;
        if truth[i] < 0 {
            continue;
        }
        t.push(truth[i]);
        p.push(pred.labels[k]);
        s.push(pred.scores[k]);
    }
    evaluate(&pred.method, &t, &p, &s)
}

// ---------------------------------------------------------------- run / sweep

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<EvaluationReport>,
    pub propagation: PropagationInfo,
}

/// All stages in memory on an already preprocessed corpus.
pub fn run_on(cfg: &PipelineConfig, pre: &Preprocessed) -> Result<RunOutput> {
    let plan = label_stage(cfg, pre).stage("label")?;
    let truth = evaluation_truth(pre.truth.as_deref(), &plan);
    let ids = &pre.features.pulse_ids;
    let (lp, info) = propagate_stage(cfg, &pre.features, &plan).stage("propagate")?;
    let mut reports = vec![evaluate_predictions(&lp, ids, truth).stage("evaluate")?];
    for (_, p) in classify_stage(cfg, &pre.features, &plan).stage("classify")? {
        reports.push(evaluate_predictions(&p, ids, truth).stage("evaluate")?);
    }
    Ok(RunOutput {
        reports,
        propagation: info,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub modules: BTreeMap<String, String>,
    pub truth_source: String,
    pub evaluation: String,
    pub n_pulses: usize,
    pub n_test: usize,
    pub propagation: Option<PropagationInfo>,
    pub files: Vec<String>,
    pub config: PipelineConfig,
}

fn manifest(cfg: &PipelineConfig, pre: &Preprocessed, plan: &LabelPlan, info: Option<PropagationInfo>, files: Vec<String>) -> Manifest {
    let version = env!("CARGO_PKG_VERSION").to_string();
    let modules = [
        "ingest",
        "preprocess",
        "statlabel",
        "rebalance",
        "labelprop",
        "baselines",
        "metrics",
        "synth",
        "pipeline",
    ]
    .iter()
    .map(|m| (m.to_string(), version.clone()))
    .collect();
    Manifest {
        tool: "pulseprop".into(),
        version,
        seed: cfg.seed,
        modules,
        truth_source: if pre.truth.is_some() {
            "ground_truth".into()
        } else {
            "statlabel".into()
        },
        evaluation: "transductive: test pulses are unlabelled graph nodes".into(),
        n_pulses: pre.features.nrows(),
        n_test: plan.indices(Split::Test).len(),
        propagation: info,
        files,
        config: cfg.clone(),
    }
}

/// Full run writing every artifact under `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutput> {
    let ws = Workspace::new(&cfg.output_dir)?;
    cfg.save(ws.config())?;
    let pre = preprocess_stage(cfg).stage("preprocess")?;
    ws.write_preprocessed(&pre).stage("preprocess")?;
    let plan = label_stage(cfg, &pre).stage("label")?;
    ws.write_plan(&pre, &plan).stage("label")?;

    let (lp, info) = propagate_stage(cfg, &pre.features, &plan).stage("propagate")?;
    ws.write_predictions(&lp).stage("propagate")?;
    write_json(&ws.path("propagation.json"), &info).stage("propagate")?;
    let mut preds = vec![lp];
    for (model, p) in classify_stage(cfg, &pre.features, &plan).stage("classify")? {
        model.save(ws.model(&p.method)).stage("classify")?;
        ws.write_predictions(&p).stage("classify")?;
        preds.push(p);
    }

    let truth = evaluation_truth(pre.truth.as_deref(), &plan);
    let mut reports = Vec::new();
    for p in &preds {
        let r = evaluate_predictions(p, &pre.features.pulse_ids, truth).stage("evaluate")?;
        r.save(ws.report(&r.method)).stage("evaluate")?;
        reports.push(r);
    }
    let files = ws.listing()?;
    write_json(&ws.path("manifest.json"), &manifest(cfg, &pre, &plan, Some(info.clone()), files))?;
    Ok(RunOutput {
        reports,
        propagation: info,
    })
}

pub const SWEEP_FRACTIONS: [f64; 4] = [0.025, 0.05, 0.075, 0.10];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub name: String,
    pub seed_label_fraction: f64,
    pub resample: ResampleMethod,
    pub report: EvaluationReport,
}

/// LP reports over the seed-fraction grid (with the configured LP resampler)
/// and over every resampling method (at the configured seed fraction).
pub fn sweep(cfg: &PipelineConfig, pre: &Preprocessed) -> Result<Vec<SweepCell>> {
    let mut grid: Vec<(String, f64, ResampleMethod)> = SWEEP_FRACTIONS
        .iter()
        .map(|&f| (format!("fraction_{f}"), f, cfg.lp_resample.method))
        .collect();
    grid.extend(
        ResampleMethod::ALL
            .iter()
            .map(|&m| (format!("resample_{}", m.name()), cfg.seed_label_fraction, m)),
    );
    grid.par_iter()
        .map(|(name, f, m)| {
            let mut c = cfg.clone();
            c.seed_label_fraction = *f;
            c.lp_resample.method = *m;
            let plan = label_stage(&c, pre).stage("label")?;
            let (lp, _) = propagate_stage(&c, &pre.features, &plan).stage("propagate")?;
            let truth = evaluation_truth(pre.truth.as_deref(), &plan);
            let mut report = evaluate_predictions(&lp, &pre.features.pulse_ids, truth).stage("evaluate")?;
            report.method = format!("{LP}:{name}");
            Ok(SweepCell {
                name: name.clone(),
                seed_label_fraction: *f,
                resample: *m,
                report,
            })
        })
        .collect()
}

pub fn run_sweep(cfg: &PipelineConfig) -> Result<Vec<SweepCell>> {
    let ws = Workspace::new(&cfg.output_dir)?;
    cfg.save(ws.config())?;
    let pre = preprocess_stage(cfg).stage("preprocess")?;
    let cells = sweep(cfg, &pre)?;
    for c in &cells {
        c.report.save(ws.path(&format!("reports/sweep/{}/lp.json", c.name)))?;
    }
    let summary: Vec<_> = cells
        .iter()
        .map(|c| {
            serde_json::json!({
                "cell": c.name,
                "seed_label_fraction": c.seed_label_fraction,
                "resample": c.resample,
                "f1": c.report.f1,
                "auroc": c.report.auroc,
                "mcc": c.report.mcc,
            })
        })
        .collect();
    write_json(&ws.path("reports/sweep/summary.json"), &summary)?;
    Ok(cells)
}

// ------------------------------------------------------------ file workspace

/// Paths and (de)serialisation of the stage files in one directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["", "predictions", "models", "reports"] {
            let d = root.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(Workspace { root })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        let p = self.root.join(rel);
        if let Some(d) = p.parent() {
            let _ = fs::create_dir_all(d);
        }
        p
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn predictions(&self, method: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{method}.csv"))
    }

    pub fn model(&self, method: &str) -> PathBuf {
        self.root.join("models").join(format!("{method}.json"))
    }

    pub fn report(&self, method: &str) -> PathBuf {
        self.root.join("reports").join(format!("{method}.json"))
    }

    /// Relative paths of every file under the root, sorted; the manifest
    /// itself is excluded.
    fn listing(&self) -> Result<Vec<String>> {
        fn walk(dir: &Path, root: &Path, out: &mut Vec<String>) -> Result<()> {
            for e in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let p = e.map_err(|e| Error::io(dir, e))?.path();
                if p.is_dir() {
                    walk(&p, root, out)?;
                } else if let Ok(rel) = p.strip_prefix(root) {
                    out.push(rel.to_string_lossy().replace('\\', "/"));
                }
            }
            Ok(())
        }
        let mut out = Vec::new();
        walk(&self.root, &self.root, &mut out)?;
        out.retain(|f| f != "manifest.json");
        out.sort();
        Ok(out)
    }

    pub fn write_preprocessed(&self, pre: &Preprocessed) -> Result<()> {
        pre.raw.save_csv(self.root.join("pulses_raw.csv"))?;
        pre.features.save_csv(self.root.join("pulses.csv"))?;
        if let Some(t) = &pre.truth {
            let entries = pre.features.pulse_ids.iter().cloned().zip(t.iter().copied()).collect();
            ingest::save_annotations(&AnnotationFile::new(entries)?, self.root.join("truth.csv"))?;
        }
        Ok(())
    }

    pub fn read_preprocessed(&self) -> Result<Preprocessed> {
        let raw = PulseMatrix::load_csv(self.root.join("pulses_raw.csv"))?;
        let features = PulseMatrix::load_csv(self.root.join("pulses.csv"))?;
        let tp = self.root.join("truth.csv");
        let truth = if tp.exists() {
            Some(aligned(&ingest::load_annotations(&tp)?, &features.pulse_ids, &tp)?)
        } else {
            None
        };
        Ok(Preprocessed { raw, features, truth })
    }

    pub fn write_plan(&self, pre: &Preprocessed, plan: &LabelPlan) -> Result<()> {
        let ids = &pre.features.pulse_ids;
        let stat = ids.iter().cloned().zip(plan.stat_labels.iter().copied()).collect();
        ingest::save_annotations(&AnnotationFile::new(stat)?, self.root.join("statlabels.csv"))?;
        let ann = ids.iter().cloned().zip(plan.annotations.iter().copied()).collect();
        ingest::save_annotations(&AnnotationFile::new(ann)?, self.root.join("annotations.csv"))?;
        let path = self.root.join("splits.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(["pulse_id", "split"]).map_err(|e| csv_err(&path, e))?;
        for (id, s) in ids.iter().zip(&plan.split) {
            w.write_record([id.as_str(), s.name()]).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn read_plan(&self, ids: &[String]) -> Result<LabelPlan> {
        let sp = self.root.join("statlabels.csv");
        let ap = self.root.join("annotations.csv");
        let stat_labels = aligned(&ingest::load_annotations(&sp)?, ids, &sp)?;
        let annotations = aligned(&ingest::load_annotations(&ap)?, ids, &ap)?;
        let path = self.root.join("splits.csv");
        if !path.exists() {
            return Err(Error::MissingInput(path));
        }
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let mut by_id = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(&path, i + 2, e.to_string()))?;
            let s = Split::parse(&rec[1]).ok_or_else(|| Error::parse(&path, i + 2, format!("bad split {:?}", &rec[1])))?;
            by_id.insert(rec[0].to_string(), s);
        }
        let split = ids
            .iter()
            .map(|id| by_id.get(id).copied().ok_or_else(|| Error::invalid(format!("{}: no split for {id}", path.display()))))
            .collect::<Result<_>>()?;
        Ok(LabelPlan {
            stat_labels,
            split,
            annotations,
        })
    }

    pub fn write_predictions(&self, p: &Predictions) -> Result<()> {
        let path = self.predictions(&p.method);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(["pulse_id", "score", "label"]).map_err(|e| csv_err(&path, e))?;
        for k in 0..p.pulse_ids.len() {
            w.write_record([p.pulse_ids[k].as_str(), &p.scores[k].to_string(), &p.labels[k].to_string()])
                .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn read_predictions(&self, method: &str) -> Result<Predictions> {
        read_predictions_file(&self.predictions(method), method)
    }

    /// Methods with a predictions file, sorted with LP first.
    pub fn prediction_methods(&self) -> Result<Vec<String>> {
        let dir = self.root.join("predictions");
        let mut out: Vec<String> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let p = e.path();
                (p.extension()? == "csv").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
            })
            .collect();
        out.sort_by_key(|m| (m != LP, m.clone()));
        Ok(out)
    }
}

pub fn read_predictions_file(path: &Path, method: &str) -> Result<Predictions> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut p = Predictions {
        method: method.to_string(),
        pulse_ids: Vec::new(),
        scores: Vec::new(),
        labels: Vec::new(),
    };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, row, e.to_string()))?;
        p.pulse_ids.push(rec[0].to_string());
        p.scores.push(rec[1].parse().map_err(|_| Error::parse(path, row, "bad score"))?);
        p.labels.push(rec[2].parse().map_err(|_| Error::parse(path, row, "bad label"))?);
    }
    Ok(p)
}

/// Labels of an annotation file reordered to `ids`; unknown ids are -1.
pub fn aligned(ann: &AnnotationFile, ids: &[String], path: &Path) -> Result<Vec<Label>> {
    let map: BTreeMap<&str, Label> = ann.entries.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    if map.len() != ann.len() {
        return Err(Error::invalid(format!("{}: duplicate ids", path.display())));
    }
    Ok(ids.iter().map(|id| map.get(id.as_str()).copied().unwrap_or(UNLABELED)).collect())
}

// ---------------------------------------------------- single-stage file forms

pub fn file_preprocess(cfg: &PipelineConfig) -> Result<()> {
    let ws = Workspace::new(&cfg.output_dir)?;
    cfg.save(ws.config())?;
    let pre = preprocess_stage(cfg).stage("preprocess")?;
    ws.write_preprocessed(&pre).stage("preprocess")
}

pub fn file_label(cfg: &PipelineConfig) -> Result<()> {
    let ws = Workspace::new(&cfg.output_dir)?;
    let pre = ws.read_preprocessed().stage("label")?;
    let plan = label_stage(cfg, &pre).stage("label")?;
    ws.write_plan(&pre, &plan).stage("label")
}

pub fn file_propagate(cfg: &PipelineConfig) -> Result<PropagationInfo> {
    let ws = Workspace::new(&cfg.output_dir)?;
    let features = PulseMatrix::load_csv(ws.path("pulses.csv")).stage("propagate")?;
    let plan = ws.read_plan(&features.pulse_ids).stage("propagate")?;
    let (p, info) = propagate_stage(cfg, &features, &plan).stage("propagate")?;
    ws.write_predictions(&p).stage("propagate")?;
    write_json(&ws.path("propagation.json"), &info).stage("propagate")?;
    Ok(info)
}

pub fn file_classify(cfg: &PipelineConfig) -> Result<()> {
    let ws = Workspace::new(&cfg.output_dir)?;
    let features = PulseMatrix::load_csv(ws.path("pulses.csv")).stage("classify")?;
    let plan = ws.read_plan(&features.pulse_ids).stage("classify")?;
    for (model, p) in classify_stage(cfg, &features, &plan).stage("classify")? {
        model.save(ws.model(&p.method)).stage("classify")?;
        ws.write_predictions(&p).stage("classify")?;
    }
    Ok(())
}

/// Evaluate every predictions file in the workspace and write the manifest.
pub fn file_evaluate(cfg: &PipelineConfig) -> Result<Vec<EvaluationReport>> {
    let ws = Workspace::new(&cfg.output_dir)?;
    let pre = ws.read_preprocessed().stage("evaluate")?;
    let plan = ws.read_plan(&pre.features.pulse_ids).stage("evaluate")?;
    let truth = evaluation_truth(pre.truth.as_deref(), &plan);
    let mut reports = Vec::new();
    for m in ws.prediction_methods()? {
        let p = ws.read_predictions(&m).stage("evaluate")?;
        let r = evaluate_predictions(&p, &pre.features.pulse_ids, truth).stage("evaluate")?;
        r.save(ws.report(&m)).stage("evaluate")?;
        reports.push(r);
    }
    let info_path = ws.path("propagation.json");
    let info = fs::read_to_string(&info_path)
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());
    let files = ws.listing()?;
    write_json(&ws.path("manifest.json"), &manifest(cfg, &pre, &plan, info, files))?;
    Ok(reports)
}
