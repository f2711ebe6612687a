//! Synthetic cohorts with planted group differences.
//!
//! Each cohort shares one "parcellation": ROI centroids grouped into spatial
//! communities, per-ROI baseline signal levels and per-ROI mean GLM betas.
//! Every subject then gets its own time series, driven by a global latent
//! AR(1) signal, one latent AR(1) signal per community and ROI noise, so
//! correlation adjacency is mostly positive with a block-community structure.
//! Class-1 subjects have the betas of the separable ROIs shifted by
//! `effect_size`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::features::{build_node_features, correlation_adjacency, NUM_BETAS};
use super::{BrainGraph, Cohort, GraphError, PlantedTruth};
use crate::numeric::Matrix;
use crate::seed::rng_for;

/// Loading of each ROI on the signal shared by the whole brain.
const GLOBAL_LOADING: f64 = 0.15;
/// Loading of each ROI on its community signal.
const COMMUNITY_LOADING: f64 = 0.6;
/// Standard deviation of the per-ROI mean GLM betas across ROIs.
const BETA_SPREAD: f64 = 0.5;
/// AR(1) coefficient of the latent signals.
const LATENT_AR: f64 = 0.5;
const ROIS_PER_COMMUNITY: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Augmentation {
    /// Graphs per subject, including the unjittered original.
    pub replicates: usize,
    /// Standard deviation of the Gaussian noise added to node features.
    pub jitter_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub subjects_per_class: usize,
    pub n_rois: usize,
    pub timesteps: usize,
    /// Planted ROIs; `None` picks [`default_separable_rois`].
    pub separable_rois: Option<Vec<usize>>,
    pub effect_size: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub augmentation: Option<Augmentation>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            subjects_per_class: 60,
            n_rois: 148,
            timesteps: 300,
            separable_rois: None,
            effect_size: 2.0,
            noise_sd: 1.0,
            seed: 0,
            augmentation: None,
        }
    }
}

impl GeneratorConfig {
    pub fn resolved_separable_rois(&self) -> Vec<usize> {
        self.separable_rois
            .clone()
            .unwrap_or_else(|| default_separable_rois(self.n_rois))
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: String| Err(GraphError::InvalidConfig(m));
        if self.n_rois < 8 {
            return bad(format!("n_rois must be at least 8, got {}", self.n_rois));
        }
        if self.subjects_per_class == 0 {
            return bad("subjects_per_class must be positive".into());
        }
        if self.timesteps < 2 {
            return bad(format!(
                "timesteps must be at least 2, got {}",
                self.timesteps
            ));
        }
        if !(self.effect_size >= 0.0 && self.effect_size.is_finite()) {
            return bad(format!(
                "effect_size must be finite and >= 0, got {}",
                self.effect_size
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!(
                "noise_sd must be finite and >= 0, got {}",
                self.noise_sd
            ));
        }
        let rois = self.resolved_separable_rois();
        if let Some(&r) = rois.iter().find(|&&r| r >= self.n_rois) {
            return bad(format!("separable ROI {r} outside [0, {})", self.n_rois));
        }
        let mut sorted = rois.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != rois.len() {
            return bad("separable ROIs contain duplicates".into());
        }
        if let Some(a) = &self.augmentation {
            if a.replicates == 0 {
                return bad("augmentation replicates must be at least 1".into());
            }
            if !(a.jitter_sd >= 0.0 && a.jitter_sd.is_finite()) {
                return bad(format!(
                    "jitter_sd must be finite and >= 0, got {}",
                    a.jitter_sd
                ));
            }
        }
        Ok(())
    }
}

/// The first six ROIs of the middle community (fewer if the community is
/// smaller), so the planted difference sits in one spatially coherent network.
pub fn default_separable_rois(n_rois: usize) -> Vec<usize> {
    let n_communities = communities(n_rois);
    let middle = n_communities / 2;
    (0..n_rois)
        .filter(|&i| i * n_communities / n_rois == middle)
        .take(6)
        .collect()
}

fn communities(n_rois: usize) -> usize {
    (n_rois / ROIS_PER_COMMUNITY).max(2)
}

struct Template {
    community: Vec<usize>,
    n_communities: usize,
    centroids: Matrix,
    baseline: Vec<f64>,
    scale: Vec<f64>,
    beta_means: Matrix,
}

fn template(cfg: &GeneratorConfig) -> Template {
    let n = cfg.n_rois;
    let mut rng = rng_for(cfg.seed, "parcellation", 0);
    let n_communities = communities(n);
    let community: Vec<usize> = (0..n).map(|i| i * n_communities / n).collect();

    // Rough MNI-like bounding box, in mm.
    let centers: Vec<[f64; 3]> = (0..n_communities)
        .map(|_| {
            [
                rng.random_range(-60.0..60.0),
                rng.random_range(-90.0..60.0),
                rng.random_range(-40.0..70.0),
            ]
        })
        .collect();
    let spread = Normal::new(0.0, 8.0).expect("valid sd");
    let centroids = Matrix::from_fn(n, 3, |i, j| {
        centers[community[i]][j] + spread.sample(&mut rng)
    });
    let baseline = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let scale = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let beta_means = Matrix::from_fn(n, NUM_BETAS, |_, _| {
        BETA_SPREAD * rng.sample::<f64, _>(StandardNormal)
    });
    Template {
        community,
        n_communities,
        centroids,
        baseline,
        scale,
        beta_means,
    }
}

/// Redraws allowed per subject before giving up on a usable adjacency.
const MAX_REDRAWS: usize = 100;

fn timeseries(cfg: &GeneratorConfig, tpl: &Template, rng: &mut impl Rng) -> Matrix {
    let (n, t) = (cfg.n_rois, cfg.timesteps);
    let mut gauss = || rng.sample::<f64, _>(StandardNormal);
    let innovation = (1.0 - LATENT_AR * LATENT_AR).sqrt();
    // Row 0 is the global signal, row c + 1 the signal of community c.
    let mut latent = Matrix::zeros(tpl.n_communities + 1, t);
    for c in 0..=tpl.n_communities {
        let mut z = gauss();
        for k in 0..t {
            if k > 0 {
                z = LATENT_AR * z + innovation * gauss();
            }
            latent.set(c, k, z);
        }
    }

    let unique =
        (1.0 - GLOBAL_LOADING * GLOBAL_LOADING - COMMUNITY_LOADING * COMMUNITY_LOADING).sqrt();
    let mut ts = Matrix::zeros(n, t);
    for i in 0..n {
        let offset = 0.5 * gauss();
        for k in 0..t {
            let signal = GLOBAL_LOADING * latent.get(0, k)
                + COMMUNITY_LOADING * latent.get(tpl.community[i] + 1, k)
                + unique * gauss();
            ts.set(i, k, tpl.baseline[i] + offset + tpl.scale[i] * signal);
        }
    }
    ts
}

fn subject_graph(
    cfg: &GeneratorConfig,
    tpl: &Template,
    planted: &[bool],
    index: usize,
    label: u8,
) -> Result<BrainGraph, GraphError> {
    let mut rng = rng_for(cfg.seed, "subject", index as u64);
    // Mean-pooling propagation needs positive row sums of A + I; requiring
    // non-negative off-diagonal mass keeps every node's self weight dominant
    // over cancellation between signed edges.
    let (ts, adjacency) = (0..MAX_REDRAWS)
        .map(|attempt| {
            if attempt > 0 {
                log::debug!("subject {index}: redrawing time series (attempt {attempt})");
            }
            let ts = timeseries(cfg, tpl, &mut rng);
            correlation_adjacency(&ts).map(|a| (ts, a))
        })
        .find(|r| {
            r.as_ref()
                .map_or(true, |(_, a)| a.row_sums().iter().all(|&d| d >= 1.0))
        })
        .ok_or_else(|| {
            GraphError::InvalidConfig(format!(
                "subject {index}: no positive-degree correlation graph in {MAX_REDRAWS} draws"
            ))
        })??;

    let betas = Matrix::from_fn(cfg.n_rois, NUM_BETAS, |i, b| {
        let shift = if label == 1 && planted[i] {
            cfg.effect_size
        } else {
            0.0
        };
        tpl.beta_means.get(i, b) + cfg.noise_sd * rng.sample::<f64, _>(StandardNormal) + shift
    });

    let features = build_node_features(&ts, &betas, &tpl.centroids, &adjacency)?;
    BrainGraph::new(format!("sub-{index:04}"), label, features, adjacency)
}

/// Generates a cohort of `2 * subjects_per_class` subjects (class 0 first) and
/// the ground truth of which ROIs differ between the classes.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<(Cohort, PlantedTruth), GraphError> {
    cfg.validate()?;
    let tpl = template(cfg);
    let separable = cfg.resolved_separable_rois();
    let mut planted = vec![false; cfg.n_rois];
    separable.iter().for_each(|&r| planted[r] = true);

    let mut graphs = Vec::new();
    for index in 0..2 * cfg.subjects_per_class {
        let label = u8::from(index >= cfg.subjects_per_class);
        let graph = subject_graph(cfg, &tpl, &planted, index, label)?;
        match &cfg.augmentation {
            Some(aug) if aug.replicates > 1 => {
                let mut rng = rng_for(cfg.seed, "jitter", index as u64);
                let noise = Normal::new(0.0, aug.jitter_sd).expect("validated sd");
                let replicas: Vec<_> = (1..aug.replicates)
                    .map(|_| {
                        graph.with_features(graph.features().map(|v| v + noise.sample(&mut rng)))
                    })
                    .collect();
                graphs.push(graph);
                graphs.extend(replicas);
            }
            _ => graphs.push(graph),
        }
    }

    let truth = PlantedTruth {
        separable_rois: separable,
        effect_size: cfg.effect_size,
    };
    let roi_names = (0..cfg.n_rois).map(|i| format!("roi_{i:03}")).collect();
    let cohort = Cohort::new(graphs, roi_names, Some(cfg.clone()), Some(truth.clone()))?;
    Ok((cohort, truth))
}
