//! Brain graphs, synthetic cohorts, subject-level fold splits and cohort files.

mod features;
mod folds;
mod io;
mod synth;

pub use features::{
    build_node_features, correlation_adjacency, raw_node_features, zscore_columns, NUM_BETAS,
};
pub use folds::{split_folds, FoldSplit};
pub use io::{load_cohort, read_cohort, save_cohort, write_cohort, COHORT_SCHEMA_VERSION};
pub use synth::{default_separable_rois, generate_synthetic, Augmentation, GeneratorConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::Matrix;

/// Node attributes per ROI: degree, four GLM betas, mean, std, and x/y/z.
pub const NUM_FEATURES: usize = 10;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("time series need at least 2 timepoints, got {0}")]
    TooFewTimepoints(usize),
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    InputShape {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("graph {subject}: {reason}")]
    InvalidGraph { subject: String, reason: String },
    #[error("invalid label {0}; labels are 0 (control) or 1 (patient)")]
    InvalidLabel(u8),
    #[error("cohort: {0}")]
    InvalidCohort(String),
    #[error("generator: {0}")]
    InvalidConfig(String),
    #[error("cannot split into {k} folds: {reason}")]
    FoldSplit { k: usize, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed cohort file at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported cohort schema version {found} (supported: {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },
}

/// One subject's brain graph.
#[derive(Debug, Clone, PartialEq)]
pub struct BrainGraph {
    subject_id: String,
    label: u8,
    features: Matrix,
    adjacency: Matrix,
}

impl BrainGraph {
    /// Validates shapes, symmetry, the unit diagonal and finiteness.
    pub fn new(
        subject_id: impl Into<String>,
        label: u8,
        features: Matrix,
        adjacency: Matrix,
    ) -> Result<Self, GraphError> {
        let subject_id = subject_id.into();
        let invalid = |reason: String| GraphError::InvalidGraph {
            subject: subject_id.clone(),
            reason,
        };
        if label > 1 {
            return Err(GraphError::InvalidLabel(label));
        }
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(invalid(format!(
                "adjacency is {:?}, not square",
                adjacency.shape()
            )));
        }
        if features.shape() != (n, NUM_FEATURES) {
            return Err(invalid(format!(
                "features are {:?}, expected ({n}, {NUM_FEATURES})",
                features.shape()
            )));
        }
        if !features.is_finite() || !adjacency.is_finite() {
            return Err(invalid("non-finite entries".into()));
        }
        if !adjacency.is_symmetric(1e-12) {
            return Err(invalid("adjacency is not symmetric".into()));
        }
        for i in 0..n {
            if adjacency.get(i, i) != 1.0 {
                return Err(invalid(format!("adjacency diagonal at {i} is not 1")));
            }
        }
        if adjacency.as_slice().iter().any(|v| v.abs() > 1.0) {
            return Err(invalid("adjacency entries outside [-1, 1]".into()));
        }
        Ok(BrainGraph {
            subject_id,
            label,
            features,
            adjacency,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Copy with replaced features; used for jitter augmentation.
    pub(crate) fn with_features(&self, features: Matrix) -> Self {
        BrainGraph {
            features,
            ..self.clone()
        }
    }
}

/// ROIs whose feature distribution was made to differ between the classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub separable_rois: Vec<usize>,
    pub effect_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    graphs: Vec<BrainGraph>,
    roi_names: Vec<String>,
    generator: Option<GeneratorConfig>,
    planted_truth: Option<PlantedTruth>,
}

impl Cohort {
    pub fn new(
        graphs: Vec<BrainGraph>,
        roi_names: Vec<String>,
        generator: Option<GeneratorConfig>,
        planted_truth: Option<PlantedTruth>,
    ) -> Result<Self, GraphError> {
        let n = roi_names.len();
        if let Some(g) = graphs.iter().find(|g| g.num_nodes() != n) {
            return Err(GraphError::InvalidCohort(format!(
                "graph {} has {} nodes but the cohort has {n} ROIs",
                g.subject_id,
                g.num_nodes()
            )));
        }
        for label in [0, 1] {
            if !graphs.iter().any(|g| g.label == label) {
                return Err(GraphError::InvalidCohort(format!(
                    "no graphs with label {label}"
                )));
            }
        }
        // A subject carries a single label across all of its graphs.
        let mut seen = std::collections::HashMap::new();
        for g in &graphs {
            if let Some(&l) = seen.get(g.subject_id.as_str()) {
                if l != g.label {
                    return Err(GraphError::InvalidCohort(format!(
                        "subject {} appears with both labels",
                        g.subject_id
                    )));
                }
            } else {
                seen.insert(g.subject_id.as_str(), g.label);
            }
        }
        if let Some(t) = &planted_truth {
            if let Some(&r) = t.separable_rois.iter().find(|&&r| r >= n) {
                return Err(GraphError::InvalidCohort(format!(
                    "planted ROI {r} outside [0, {n})"
                )));
            }
        }
        Ok(Cohort {
            graphs,
            roi_names,
            generator,
            planted_truth,
        })
    }

    pub fn graphs(&self) -> &[BrainGraph] {
        &self.graphs
    }

    pub fn roi_names(&self) -> &[String] {
        &self.roi_names
    }

    pub fn num_rois(&self) -> usize {
        self.roi_names.len()
    }

    pub fn generator(&self) -> Option<&GeneratorConfig> {
        self.generator.as_ref()
    }

    pub fn planted_truth(&self) -> Option<&PlantedTruth> {
        self.planted_truth.as_ref()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    /// Distinct subject ids in first-appearance order, with their labels.
    pub fn subjects(&self) -> Vec<(&str, u8)> {
        let mut seen = std::collections::HashSet::new();
        self.graphs
            .iter()
            .filter(|g| seen.insert(g.subject_id.as_str()))
            .map(|g| (g.subject_id.as_str(), g.label))
            .collect()
    }
}
