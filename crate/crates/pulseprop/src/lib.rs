//! Artifact detection for photoplethysmogram (PPG) pulses.
//!
//! The pipeline filters and segments a PPG stream into pulses, resamples every
//! pulse to a fixed-length feature vector, seeds a small fraction of labels
//! with a moment-based statistical rule, rebalances the seeds, and spreads the
//! labels over a k-nearest-neighbour graph by label propagation. Supervised
//! baselines and a full metric suite are included for comparison, together
//! with a synthetic generator that provides ground truth.
//!
//! ```
//! use pulseprop::labelprop::{build_graph, propagate_closed_form, PropagationConfig};
//! use pulseprop::PulseMatrix;
//!
//! // Path a(0) - b(?) - c(?) - d(1) embedded on a line.
//! let x = PulseMatrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
//! let labels = [0, -1, -1, 1];
//! let cfg = PropagationConfig { n_neighbors: 1, ..Default::default() };
//! let graph = build_graph(&x, &labels, &cfg).unwrap();
//! let out = propagate_closed_form(&graph, &graph.initial_distribution());
//! assert!((out.distribution.prob(1, 0) - 2.0 / 3.0).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is deliberate throughout: NaN must fail these checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod ingest;
pub mod labelprop;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod rebalance;
pub mod rng;
pub mod statlabel;
pub mod synth;

pub use error::{Error, Result};
pub use preprocess::PulseMatrix;

/// Per-pulse label: 0 clean, 1 artifact, -1 unlabeled.
pub type Label = i8;

pub const UNLABELED: Label = -1;
pub const CLEAN: Label = 0;
pub const ARTIFACT: Label = 1;
