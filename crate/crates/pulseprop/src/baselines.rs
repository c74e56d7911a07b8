//! Supervised comparators: k-nearest neighbours, Gaussian naive Bayes and
//! L2-regularised logistic regression.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{sq_dist, PulseMatrix};
use crate::Label;

pub const MODEL_SCHEMA: &str = "pulseprop.model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    GaussianNb,
    Logistic,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Knn, ModelKind::GaussianNb, ModelKind::Logistic];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::GaussianNb => "gaussian_nb",
            ModelKind::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub knn_k: usize,
    /// Relative to the largest per-feature variance.
    pub nb_variance_floor: f64,
    pub logistic_l2: f64,
    pub logistic_max_steps: usize,
    pub logistic_grad_tol: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            knn_k: 7,
            nb_variance_floor: 1e-9,
            logistic_l2: 1e-4,
            logistic_max_steps: 10_000,
            logistic_grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Knn {
        k: usize,
        dim: usize,
        features: Vec<f64>,
        labels: Vec<Label>,
    },
    GaussianNb {
        /// Indexed by class 0, 1.
        means: [Vec<f64>; 2],
        variances: [Vec<f64>; 2],
        priors: [f64; 2],
    },
    Logistic {
        weights: Vec<f64>,
        bias: f64,
        steps: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct SavedModel {
    schema: String,
    model: TrainedModel,
}

fn check_binary(features: &PulseMatrix, labels: &[Label]) -> Result<()> {
    if features.nrows() != labels.len() {
        return Err(Error::Dimension {
            expected: features.nrows(),
            got: labels.len(),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l != 0 && l != 1) {
        return Err(Error::InvalidLabel(l as i64));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::SingleClass(labels.first().copied().unwrap_or(0)));
    }
    Ok(())
}

pub fn fit(kind: ModelKind, features: &PulseMatrix, labels: &[Label], params: &BaselineParams) -> Result<TrainedModel> {
    check_binary(features, labels)?;
    match kind {
        ModelKind::Knn => {
            let k = params.knn_k;
            if k == 0 || k > features.nrows() {
                return Err(Error::invalid(format!("knn k = {k} with {} training rows", features.nrows())));
            }
            Ok(TrainedModel::Knn {
                k,
                dim: features.dim(),
                features: features.as_slice().to_vec(),
                labels: labels.to_vec(),
            })
        }
        ModelKind::GaussianNb => Ok(fit_nb(features, labels, params.nb_variance_floor)),
        ModelKind::Logistic => Ok(fit_logistic(features, labels, params)),
    }
}

fn fit_nb(x: &PulseMatrix, y: &[Label], floor_rel: f64) -> TrainedModel {
    let d = x.dim();
    let mut means = [vec![0.0; d], vec![0.0; d]];
    let mut vars = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (row, &l) in x.rows().zip(y) {
        let c = l as usize;
        counts[c] += 1;
        for (m, v) in means[c].iter_mut().zip(row) {
            *m += v;
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
    }
    for (row, &l) in x.rows().zip(y) {
        let c = l as usize;
        for ((s, v), m) in vars[c].iter_mut().zip(row).zip(&means[c]) {
            *s += (v - m) * (v - m);
        }
    }
    for c in 0..2 {
        vars[c].iter_mut().for_each(|s| *s /= counts[c] as f64);
    }
    // The floor is relative to the largest variance of any feature over all rows.
    let n = x.nrows() as f64;
    let mut max_var: f64 = 0.0;
    for j in 0..d {
        let mean = x.rows().map(|r| r[j]).sum::<f64>() / n;
        let var = x.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        max_var = max_var.max(var);
    }
    let floor = (floor_rel * max_var).max(f64::MIN_POSITIVE);
    for v in vars.iter_mut().flat_map(|v| v.iter_mut()) {
        *v += floor;
    }
    let total = (counts[0] + counts[1]) as f64;
    TrainedModel::GaussianNb {
        means,
        variances: vars,
        priors: [counts[0] as f64 / total, counts[1] as f64 / total],
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus (λ/2)‖w‖²; the bias is not penalised. Returns the loss
/// and the gradient with the bias derivative last.
pub fn logistic_loss_grad(x: &PulseMatrix, y: &[Label], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>) {
    let n = x.nrows() as f64;
    let d = x.dim();
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (row, &l) in x.rows().zip(y) {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let t = l as f64;
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in grad.iter_mut().zip(row) {
            *g += r * v;
        }
        grad[d] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (g, v) in grad.iter_mut().zip(w) {
        *g += l2 * v;
    }
    (loss, grad)
}

fn fit_logistic(x: &PulseMatrix, y: &[Label], p: &BaselineParams) -> TrainedModel {
    let d = x.dim();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut step = 1.0;
    let (mut loss, mut grad) = logistic_loss_grad(x, y, &w, b, p.logistic_l2);
    let mut steps = 0;
    while steps < p.logistic_max_steps {
        let gg: f64 = grad.iter().map(|g| g * g).sum();
        if gg.sqrt() < p.logistic_grad_tol {
            break;
        }
        steps += 1;
        // Armijo backtracking from a step that grows after each success.
        step *= 2.0;
        loop {
            let w2: Vec<f64> = w.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
            let b2 = b - step * grad[d];
            let (l2, g2) = logistic_loss_grad(x, y, &w2, b2, p.logistic_l2);
            if l2 <= loss - 0.5 * step * gg || step < 1e-12 {
                w = w2;
                b = b2;
                loss = l2;
                grad = g2;
                break;
            }
            step *= 0.5;
        }
    }
    TrainedModel::Logistic { weights: w, bias: b, steps }
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Knn { .. } => ModelKind::Knn,
            TrainedModel::GaussianNb { .. } => ModelKind::GaussianNb,
            TrainedModel::Logistic { .. } => ModelKind::Logistic,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Knn { dim, .. } => *dim,
            TrainedModel::GaussianNb { means, .. } => means[0].len(),
            TrainedModel::Logistic { weights, .. } => weights.len(),
        }
    }

    /// Class-1 probability for each row.
    pub fn predict_proba(&self, features: &PulseMatrix) -> Result<Vec<f64>> {
        if features.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: features.dim(),
            });
        }
        let rows: Vec<&[f64]> = features.rows().collect();
        Ok(rows.par_iter().map(|q| self.proba_one(q)).collect())
    }

    /// Threshold 0.5, ties to class 1.
    pub fn predict(&self, features: &PulseMatrix) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(features)?
            .into_iter()
            .map(|p| Label::from(p >= 0.5))
            .collect())
    }

    fn proba_one(&self, q: &[f64]) -> f64 {
        match self {
            TrainedModel::Knn { k, dim, features, labels } => {
                let mut d: Vec<(f64, usize)> = features
                    .chunks_exact(*dim)
                    .enumerate()
                    .map(|(j, r)| (sq_dist(q, r), j))
                    .collect();
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if *k < d.len() {
                    d.select_nth_unstable_by(*k - 1, cmp);
                    d.truncate(*k);
                }
                let ones = d.iter().filter(|&&(_, j)| labels[j] == 1).count();
                ones as f64 / *k as f64
            }
            TrainedModel::GaussianNb {
                means,
                variances,
                priors,
            } => {
                let ll = |c: usize| {
                    priors[c].ln()
                        + q.iter()
                            .zip(&means[c])
                            .zip(&variances[c])
                            .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
                            .sum::<f64>()
                };
                sigmoid(ll(1) - ll(0))
            }
            TrainedModel::Logistic { weights, bias, .. } => {
                sigmoid(bias + q.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>())
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SavedModel {
            schema: MODEL_SCHEMA.to_string(),
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let saved: SavedModel = serde_json::from_str(s)?;
        if saved.schema != MODEL_SCHEMA {
            return Err(Error::invalid(format!("unsupported model schema {:?}", saved.schema)));
        }
        Ok(saved.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
