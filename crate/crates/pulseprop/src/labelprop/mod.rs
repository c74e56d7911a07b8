//! Graph label propagation with labelled nodes as absorbing states.
//!
//! A symmetric affinity `A` is built over the feature vectors and
//! row-normalised into the transition matrix `T = D⁻¹A`. The iterative solver
//! repeats `Y ← T·Y` and re-clamps the labelled rows; the closed form solves
//! `(I − T_uu)·Y_u = T_ul·Y_l` directly.

mod csr;

pub use csr::{pcg, Csr};

use std::collections::VecDeque;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{sq_dist, PulseMatrix};
use crate::{Label, UNLABELED};

/// Largest unlabeled block solved by dense factorisation.
const DENSE_LIMIT: usize = 600;
/// Node count above which `Solver::Auto` switches to iteration.
pub const CLOSED_FORM_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Knn,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Iterative,
    ClosedForm,
    /// Closed form up to [`CLOSED_FORM_LIMIT`] nodes, iterative above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub kernel: Kernel,
    pub n_neighbors: usize,
    pub rbf_gamma: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub solver: Solver,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            kernel: Kernel::Knn,
            n_neighbors: 7,
            rbf_gamma: 20.0,
            max_iterations: 1000,
            tolerance: 1e-3,
            solver: Solver::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationGraph {
    pub adjacency: Csr,
    pub degree: Vec<f64>,
    pub labels: Vec<Label>,
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub n_classes: usize,
}

impl PropagationGraph {
    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }

    /// `T = D⁻¹A`.
    pub fn transition(&self) -> Csr {
        let mut t = self.adjacency.clone();
        for i in 0..t.nrows {
            for k in t.indptr[i]..t.indptr[i + 1] {
                t.values[k] /= self.degree[i];
            }
        }
        t
    }

    /// One-hot on labelled rows, uniform elsewhere.
    pub fn initial_distribution(&self) -> LabelDistribution {
        LabelDistribution::initial(&self.labels, self.n_classes)
    }

    /// Edge list `i j weight` (each undirected edge once) and node list
    /// `index pulse_id label`.
    pub fn dump(&self, pulse_ids: &[String], edges: &Path, nodes: &Path) -> Result<()> {
        let mut e = Vec::new();
        for i in 0..self.len() {
            for (j, w) in self.adjacency.row(i).filter(|&(j, _)| j > i) {
                writeln!(e, "{i} {j} {w}").expect("write to Vec");
            }
        }
        fs::write(edges, e).map_err(|err| Error::io(edges, err))?;
        let mut n = Vec::new();
        for (i, l) in self.labels.iter().enumerate() {
            let id = pulse_ids.get(i).map_or("", String::as_str);
            writeln!(n, "{i} {id} {l}").expect("write to Vec");
        }
        fs::write(nodes, n).map_err(|err| Error::io(nodes, err))
    }
}

/// N × k row-stochastic class-membership matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub n_classes: usize,
    pub probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn initial(labels: &[Label], n_classes: usize) -> Self {
        let mut probs = vec![1.0 / n_classes as f64; labels.len() * n_classes];
        for (i, &l) in labels.iter().enumerate() {
            if l >= 0 {
                let row = &mut probs[i * n_classes..(i + 1) * n_classes];
                row.fill(0.0);
                row[l as usize] = 1.0;
            }
        }
        LabelDistribution { n_classes, probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn prob(&self, i: usize, class: usize) -> f64 {
        self.probs[i * self.n_classes + class]
    }

    pub fn max_abs_diff(&self, other: &LabelDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Indices of the `k` nearest rows to row `i` (excluding `i`), ties to the
/// lower index.
fn knn_row(x: &PulseMatrix, i: usize, k: usize) -> Vec<usize> {
    let xi = x.row(i);
    let mut d: Vec<(f64, usize)> = (0..x.nrows())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(xi, x.row(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.into_iter().map(|(_, j)| j).collect()
}

pub fn build_graph(features: &PulseMatrix, labels: &[Label], config: &PropagationConfig) -> Result<PropagationGraph> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::Graph(format!("need at least 2 nodes, got {n}")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l < UNLABELED) {
        return Err(Error::InvalidLabel(bad as i64));
    }
    let n_classes = (labels.iter().copied().max().unwrap_or(0).max(1) + 1) as usize;
    for c in 0..n_classes {
        if !labels.contains(&(c as Label)) {
            return Err(Error::Graph(format!("no labelled node for class {c}")));
        }
    }

    let adjacency = match config.kernel {
        Kernel::Knn => {
            let k = config.n_neighbors;
            if k == 0 || k >= n {
                return Err(Error::invalid(format!("n_neighbors {k} must be in 1..{n}")));
            }
            let nbrs: Vec<Vec<usize>> = (0..n).into_par_iter().map(|i| knn_row(features, i, k)).collect();
            let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(2 * k); n];
            for (i, js) in nbrs.iter().enumerate() {
                for &j in js {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
            let rows = adj
                .into_iter()
                .map(|mut r| {
                    r.sort_unstable();
                    r.dedup();
                    r.into_iter().map(|j| (j, 1.0)).collect()
                })
                .collect();
            Csr::from_rows(n, rows)
        }
        Kernel::Rbf => {
            let g = config.rbf_gamma;
            if !(g > 0.0) {
                return Err(Error::invalid("rbf_gamma must be positive"));
            }
            let rows = (0..n)
                .into_par_iter()
                .map(|i| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| (j, (-g * sq_dist(features.row(i), features.row(j))).exp()))
                        .filter(|&(_, w)| w > 0.0)
                        .collect()
                })
                .collect();
            Csr::from_rows(n, rows)
        }
    };

    let degree = adjacency.row_sums();
    if let Some(i) = degree.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Graph(format!("node {i} is isolated")));
    }
    let labeled = (0..n).filter(|&i| labels[i] >= 0).collect();
    let unlabeled = (0..n).filter(|&i| labels[i] < 0).collect();
    Ok(PropagationGraph {
        adjacency,
        degree,
        labels: labels.to_vec(),
        labeled,
        unlabeled,
        n_classes,
    })
}

#[derive(Debug, Clone)]
pub struct IterativeResult {
    pub distribution: LabelDistribution,
    pub iterations: usize,
    pub converged: bool,
}

pub fn propagate_iterative(
    graph: &PropagationGraph,
    initial: &LabelDistribution,
    config: &PropagationConfig,
) -> IterativeResult {
    let k = graph.n_classes;
    let mut y = initial.clone();
    for &i in &graph.labeled {
        let l = graph.labels[i] as usize;
        let row = y.row_mut(i);
        row.fill(0.0);
        row[l] = 1.0;
    }
    if graph.unlabeled.is_empty() {
        return IterativeResult {
            distribution: y,
            iterations: 0,
            converged: true,
        };
    }
    let mut next = y.clone();
    let mut buf = vec![0.0; k];
    for it in 1..=config.max_iterations {
        let mut delta: f64 = 0.0;
        for &i in &graph.unlabeled {
            let inv = 1.0 / graph.degree[i];
            buf.fill(0.0);
            for (j, w) in graph.adjacency.row(i) {
                for (c, b) in buf.iter_mut().enumerate() {
                    *b += w * y.probs[j * k + c];
                }
            }
            for (c, &b) in buf.iter().enumerate() {
                let v = b * inv;
                delta = delta.max((v - y.probs[i * k + c]).abs());
                next.probs[i * k + c] = v;
            }
        }
        std::mem::swap(&mut y, &mut next);
        if delta < config.tolerance {
            return IterativeResult {
                distribution: y,
                iterations: it,
                converged: true,
            };
        }
    }
    IterativeResult {
        distribution: y,
        iterations: config.max_iterations,
        converged: false,
    }
}

#[derive(Debug, Clone)]
pub struct ClosedFormResult {
    pub distribution: LabelDistribution,
    /// Unlabelled nodes with no path to a labelled node; they carry the
    /// labelled-class prior.
    pub stranded: Vec<usize>,
}

/// Unlabelled nodes reachable from a labelled node through unlabelled nodes.
fn reachable_unlabeled(graph: &PropagationGraph) -> Vec<bool> {
    let mut seen = vec![false; graph.len()];
    let mut queue: VecDeque<usize> = graph.labeled.iter().copied().collect();
    for &i in &graph.labeled {
        seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        for (j, _) in graph.adjacency.row(i) {
            if !seen[j] && graph.labels[j] < 0 {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

pub fn propagate_closed_form(graph: &PropagationGraph, initial: &LabelDistribution) -> ClosedFormResult {
    let k = graph.n_classes;
    let mut y = initial.clone();
    let reach = reachable_unlabeled(graph);
    let solvable: Vec<usize> = graph.unlabeled.iter().copied().filter(|&i| reach[i]).collect();
    let stranded: Vec<usize> = graph.unlabeled.iter().copied().filter(|&i| !reach[i]).collect();

    let mut local = vec![usize::MAX; graph.len()];
    for (r, &i) in solvable.iter().enumerate() {
        local[i] = r;
    }
    let m = solvable.len();

    // (D_uu − A_uu)·Y_u = A_ul·Y_l is the symmetric form of (I − T_uu)·Y_u = T_ul·Y_l.
    let mut rhs = vec![vec![0.0; m]; k];
    let mut rows = Vec::with_capacity(m);
    for (r, &i) in solvable.iter().enumerate() {
        let mut row = vec![(r, graph.degree[i])];
        for (j, w) in graph.adjacency.row(i) {
            let l = graph.labels[j];
            if l >= 0 {
                rhs[l as usize][r] += w;
            } else if local[j] != usize::MAX {
                row.push((local[j], -w));
            }
        }
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (c, v) in row {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        rows.push(merged);
    }
    let system = Csr::from_rows(m, rows);
    let solution: Vec<Vec<f64>> = if m == 0 {
        vec![Vec::new(); k]
    } else if m <= DENSE_LIMIT {
        solve_dense(&system, &rhs)
    } else {
        rhs.par_iter()
            .map(|b| pcg(&system, b, 1e-13, 20 * m + 100).0)
            .collect()
    };

    for (r, &i) in solvable.iter().enumerate() {
        let row = y.row_mut(i);
        for c in 0..k {
            row[c] = solution[c][r].clamp(0.0, 1.0);
        }
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.fill(1.0 / k as f64);
        }
    }

    if !stranded.is_empty() {
        let mut prior = vec![0.0; k];
        for &i in &graph.labeled {
            prior[graph.labels[i] as usize] += 1.0;
        }
        let total: f64 = prior.iter().sum();
        prior.iter_mut().for_each(|p| *p /= total);
        for &i in &stranded {
            y.row_mut(i).copy_from_slice(&prior);
        }
    }
    ClosedFormResult {
        distribution: y,
        stranded,
    }
}

fn solve_dense(system: &Csr, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = system.nrows;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for (j, v) in system.row(i) {
            a[(i, j)] = v;
        }
    }
    let b = DMatrix::from_fn(m, rhs.len(), |r, c| rhs[c][r]);
    let x = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a.lu().solve(&b).unwrap_or_else(|| DMatrix::zeros(m, rhs.len())),
    };
    (0..rhs.len())
        .map(|c| DVector::from(x.column(c)).iter().copied().collect())
        .collect()
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub distribution: LabelDistribution,
    pub solver: Solver,
    pub stranded: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Run the configured solver from the graph's own labels.
pub fn propagate(graph: &PropagationGraph, config: &PropagationConfig) -> Propagation {
    let solver = match config.solver {
        Solver::Auto if graph.len() <= CLOSED_FORM_LIMIT => Solver::ClosedForm,
        Solver::Auto => Solver::Iterative,
        s => s,
    };
    let initial = graph.initial_distribution();
    match solver {
        Solver::ClosedForm => {
            let r = propagate_closed_form(graph, &initial);
            Propagation {
                distribution: r.distribution,
                solver,
                stranded: r.stranded,
                iterations: 0,
                converged: true,
            }
        }
        _ => {
            let r = propagate_iterative(graph, &initial, config);
            Propagation {
                distribution: r.distribution,
                solver,
                stranded: Vec::new(),
                iterations: r.iterations,
                converged: r.converged,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hardened {
    pub labels: Vec<Label>,
    /// Class-1 probability per node, the ranking score for ROC analysis.
    pub scores: Vec<f64>,
}

/// Argmax per row; exact ties go to the higher class index.
pub fn harden_labels(dist: &LabelDistribution) -> Hardened {
    let k = dist.n_classes;
    let mut labels = Vec::with_capacity(dist.len());
    let mut scores = Vec::with_capacity(dist.len());
    for i in 0..dist.len() {
        let row = dist.row(i);
        let mut best = 0;
        for c in 1..k {
            if row[c] >= row[best] {
                best = c;
            }
        }
        labels.push(best as Label);
        scores.push(if k > 1 { row[1] } else { 0.0 });
    }
    Hardened { labels, scores }
}
