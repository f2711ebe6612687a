//! Region separability: per-ROI subject clouds of last-layer embeddings,
//! projected with t-SNE and scored with the silhouette of the two classes.

mod report;
mod silhouette;
mod tsne;

pub use report::{emit_report, regions_table, scatter_svg, AnalysisSummary, ReportFiles};
pub use silhouette::silhouette;
pub use tsne::{joint_affinities, tsne, TsneConfig, TsneResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discriminator::{pair_scores, sample_negative_index, PairScores};
use crate::encoder::{encode_with_propagation, SelfLoops};
use crate::graph_data::{Cohort, NUM_FEATURES};
use crate::model::{ModelError, ModelParams, PreparedGraph};
use crate::numeric::Matrix;
use crate::seed::rng_for;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("t-SNE needs at least {needed} points, got {found}")]
    TooFewPoints { found: usize, needed: usize },
    #[error("perplexity {perplexity} infeasible for {points} points (must be in (0, {max:.3}))")]
    Perplexity {
        perplexity: f64,
        points: usize,
        max: f64,
    },
    #[error("class {class} has no points")]
    MissingClass { class: u8 },
    #[error("{points} points but {labels} labels")]
    LengthMismatch { points: usize, labels: usize },
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("invalid analysis config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Embeddings of one ROI across a set of subject graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionEmbeddingSet {
    pub roi_index: usize,
    /// S×F, one row per graph.
    pub points: Matrix,
    pub labels: Vec<u8>,
}

/// Encodes each graph at `indices` and regroups the node embeddings by ROI.
pub fn extract_embeddings(
    params: &ModelParams,
    cohort: &Cohort,
    indices: &[usize],
    self_loops: SelfLoops,
) -> Result<Vec<RegionEmbeddingSet>, AnalysisError> {
    params.validate(NUM_FEATURES)?;
    let width = params.width();
    let n = cohort.num_rois();
    if params.pool.weight.rows() != width || params.pool.num_clusters() > n {
        return Err(AnalysisError::Model(ModelError::Shape(format!(
            "model pools to {} clusters but the cohort has {n} ROIs",
            params.pool.num_clusters()
        ))));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= cohort.graphs().len()) {
        return Err(AnalysisError::Config(format!(
            "graph index {bad} out of range for {} graphs",
            cohort.graphs().len()
        )));
    }
    let s = indices.len();
    let mut sets: Vec<RegionEmbeddingSet> = (0..n)
        .map(|roi| RegionEmbeddingSet {
            roi_index: roi,
            points: Matrix::zeros(s, width),
            labels: Vec::with_capacity(s),
        })
        .collect();
    for (row, &gi) in indices.iter().enumerate() {
        let graph = &cohort.graphs()[gi];
        let prepared = PreparedGraph::new(graph, self_loops)?;
        let h =
            encode_with_propagation(&prepared.features, &prepared.propagation, &params.encoder)?;
        for (roi, set) in sets.iter_mut().enumerate() {
            set.points.row_mut(row).copy_from_slice(h.row(roi));
            set.labels.push(graph.label());
        }
    }
    Ok(sets)
}

/// Mean discriminator scores over the graphs at `indices`, each paired with an
/// opposite-class graph drawn from the same set with the rng stream
/// `(seed, "negatives", index)`.
pub fn held_out_pair_scores(
    params: &ModelParams,
    cohort: &Cohort,
    indices: &[usize],
    self_loops: SelfLoops,
    seed: u64,
) -> Result<PairScores, AnalysisError> {
    params.validate(NUM_FEATURES)?;
    let graphs = indices
        .iter()
        .map(|&i| {
            let g = cohort.graphs().get(i).ok_or_else(|| {
                AnalysisError::Config(format!(
                    "graph index {i} out of range for {} graphs",
                    cohort.graphs().len()
                ))
            })?;
            Ok(PreparedGraph::new(g, self_loops)?)
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let labels: Vec<u8> = graphs.iter().map(|g| g.label).collect();
    let (mut positive, mut negative) = (0.0, 0.0);
    for (k, graph) in graphs.iter().enumerate() {
        let mut rng = rng_for(seed, "negatives", indices[k] as u64);
        let j = sample_negative_index(&labels, graph.label, &mut rng)
            .map_err(|e| AnalysisError::MissingClass { class: e.wanted })?;
        let s = pair_scores(params, graph, &graphs[j])?;
        positive += s.positive;
        negative += s.negative;
    }
    let n = graphs.len().max(1) as f64;
    Ok(PairScores {
        positive: positive / n,
        negative: negative / n,
    })
}

/// Space the silhouette is computed in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSpace {
    /// The 2-D t-SNE coordinates.
    #[default]
    Tsne,
    /// The raw F-dimensional embeddings.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub tsne: TsneConfig,
    pub threshold: f64,
    pub seed: u64,
    pub score_space: ScoreSpace,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            tsne: TsneConfig::default(),
            threshold: 0.1,
            seed: 0,
            score_space: ScoreSpace::Tsne,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !self.threshold.is_finite() {
            return Err(AnalysisError::Config(format!(
                "threshold must be finite, got {}",
                self.threshold
            )));
        }
        if !(self.tsne.perplexity > 0.0 && self.tsne.perplexity.is_finite()) {
            return Err(AnalysisError::Config(format!(
                "perplexity must be positive, got {}",
                self.tsne.perplexity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub roi_index: usize,
    pub roi_name: String,
    pub silhouette: f64,
    pub marked: bool,
    /// S×2 t-SNE coordinates of the subjects.
    pub tsne_coords: Matrix,
    pub labels: Vec<u8>,
    /// KL divergence after the last t-SNE iteration.
    pub final_kl: f64,
}

/// Projects and scores every ROI; ROI `k` uses the rng stream `(seed, k)`.
pub fn analyze_regions(
    sets: &[RegionEmbeddingSet],
    roi_names: &[String],
    cfg: &AnalysisConfig,
) -> Result<Vec<RegionReport>, AnalysisError> {
    cfg.validate()?;
    sets.iter()
        .map(|set| {
            let name = roi_names.get(set.roi_index).cloned().ok_or_else(|| {
                AnalysisError::Config(format!("no name for ROI {}", set.roi_index))
            })?;
            let mut rng = rng_for(cfg.seed, "tsne", set.roi_index as u64);
            let projected = tsne(&set.points, &cfg.tsne, &mut rng)?;
            let score = match cfg.score_space {
                ScoreSpace::Tsne => silhouette(&projected.coords, &set.labels)?,
                ScoreSpace::Embedding => silhouette(&set.points, &set.labels)?,
            };
            Ok(RegionReport {
                roi_index: set.roi_index,
                roi_name: name,
                silhouette: score,
                marked: score > cfg.threshold,
                final_kl: projected.kl.last().copied().unwrap_or(f64::NAN),
                tsne_coords: projected.coords,
                labels: set.labels.clone(),
            })
        })
        .collect()
}

/// ROI indices whose score is strictly above `threshold`, best first; ties
/// keep ROI order.
pub fn mark_regions(reports: &[RegionReport], threshold: f64) -> Vec<usize> {
    let mut marked: Vec<&RegionReport> = reports
        .iter()
        .filter(|r| r.silhouette > threshold)
        .collect();
    marked.sort_by(|a, b| {
        b.silhouette
            .total_cmp(&a.silhouette)
            .then(a.roi_index.cmp(&b.roi_index))
    });
    marked.into_iter().map(|r| r.roi_index).collect()
}

/// Recall over `planted` and false-mark rate over the remaining ROIs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub recall: f64,
    pub false_mark_rate: f64,
}

pub fn planted_recovery(marked: &[usize], planted: &[usize], n_rois: usize) -> Recovery {
    let hits = marked.iter().filter(|r| planted.contains(r)).count();
    let false_marks = marked.len() - hits;
    let negatives = n_rois.saturating_sub(planted.len());
    Recovery {
        recall: if planted.is_empty() {
            0.0
        } else {
            hits as f64 / planted.len() as f64
        },
        false_mark_rate: if negatives == 0 {
            0.0
        } else {
            false_marks as f64 / negatives as f64
        },
    }
}
