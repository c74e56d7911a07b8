//! Confusion matrix, scalar metrics and ROC analysis. Class 1 (artifact) is
//! the positive class.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with the class roles exchanged.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

pub fn confusion(truth: &[Label], pred: &[Label]) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fn_ += 1,
            (bad, 0 | 1) | (_, bad) => return Err(Error::InvalidLabel(bad as i64)),
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub kappa: f64,
    pub csi: f64,
    /// Metrics whose denominator was zero and were therefore set to 0.
    pub degenerate: Vec<String>,
}

struct Ratio<'a> {
    degenerate: &'a mut Vec<String>,
}

impl Ratio<'_> {
    fn of(&mut self, name: &str, num: f64, den: f64) -> f64 {
        if den == 0.0 {
            self.degenerate.push(name.to_string());
            0.0
        } else {
            num / den
        }
    }
}

pub fn scalar_metrics(cm: &ConfusionMatrix) -> ScalarMetrics {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let mut degenerate = Vec::new();
    let mut r = Ratio {
        degenerate: &mut degenerate,
    };
    let precision = r.of("precision", tp, tp + fp);
    let recall = r.of("recall", tp, tp + fn_);
    let f1 = r.of("f1", 2.0 * tp, 2.0 * tp + fp + fn_);
    let mcc = r.of(
        "mcc",
        tp * tn - fp * fn_,
        ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt(),
    );
    let kappa = r.of(
        "kappa",
        2.0 * (tp * tn - fp * fn_),
        (tp + fp) * (fp + tn) + (tp + fn_) * (fn_ + tn),
    );
    let csi = r.of("csi", tp, tp + fn_ + fp);
    ScalarMetrics {
        precision,
        recall,
        f1,
        mcc,
        kappa,
        csi,
        degenerate,
    }
}

/// ROC points from a threshold sweep over the distinct scores in descending
/// order, starting at (0, 0) and ending at (1, 1), and the trapezoidal area.
pub fn roc_auc(scores: &[f64], truth: &[Label]) -> Result<(Vec<(f64, f64)>, f64)> {
    if scores.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: scores.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::invalid(format!("score {s} is not a number")));
    }
    let pos = truth.iter().filter(|&&t| t == 1).count();
    let neg = truth.iter().filter(|&&t| t == 0).count();
    if pos + neg != truth.len() {
        let bad = truth.iter().find(|&&t| t != 0 && t != 1).copied().unwrap_or(-1);
        return Err(Error::InvalidLabel(bad as i64));
    }
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(truth[0]));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (p, n) = (pos as f64, neg as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Integer trapezoid; divided by P·N once at the end.
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push((fp as f64 / n, tp as f64 / p));
    }
    Ok((points, area / (p * n)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub n: u64,
    pub confusion: ConfusionMatrix,
    /// Artifact-class precision, recall and F1.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub clean: ClassScores,
    pub artifact: ClassScores,
    pub macro_avg: ClassScores,
    pub mcc: f64,
    pub kappa: f64,
    pub csi: f64,
    pub auroc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub degenerate: Vec<String>,
}

/// Full report. With a single-class truth, AUROC is 0 and flagged.
pub fn evaluate(method: &str, truth: &[Label], pred: &[Label], scores: &[f64]) -> Result<EvaluationReport> {
    let cm = confusion(truth, pred)?;
    let m = scalar_metrics(&cm);
    let c = scalar_metrics(&cm.swapped());
    let mut degenerate = m.degenerate.clone();
    let (roc_points, auroc) = match roc_auc(scores, truth) {
        Ok(r) => r,
        Err(Error::SingleClass(_)) => {
            degenerate.push("auroc".into());
            (vec![(0.0, 0.0), (1.0, 1.0)], 0.0)
        }
        Err(e) => return Err(e),
    };
    let artifact = ClassScores {
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
    };
    let clean = ClassScores {
        precision: c.precision,
        recall: c.recall,
        f1: c.f1,
    };
    Ok(EvaluationReport {
        method: method.to_string(),
        n: cm.total(),
        confusion: cm,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        clean,
        artifact,
        macro_avg: ClassScores {
            precision: 0.5 * (clean.precision + artifact.precision),
            recall: 0.5 * (clean.recall + artifact.recall),
            f1: 0.5 * (clean.f1 + artifact.f1),
        },
        mcc: m.mcc,
        kappa: m.kappa,
        csi: m.csi,
        auroc,
        roc_points,
        degenerate,
    })
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    /// Two-column `fpr,tpr` CSV of the ROC curve.
    pub fn save_roc_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut s = String::from("fpr,tpr\n");
        for (f, t) in &self.roc_points {
            s.push_str(&format!("{f},{t}\n"));
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}
