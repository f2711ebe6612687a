//! Graph classification of brain connectivity graphs with an Infomax-regularized
//! graph neural network, plus per-region separability analysis.
//!
//! The pipeline: a mean-pooling graph convolution [`encoder`] embeds every ROI,
//! a soft-assignment pooling head in [`classifier`] reads out a graph vector and
//! predicts the class, and a bilinear [`discriminator`] scores node embeddings
//! against the graph summary to contrast them with embeddings of opposite-class
//! graphs. [`training`] optimizes all three jointly; [`analysis`] projects the
//! learned per-ROI embeddings with t-SNE and flags ROIs whose classes separate.

pub mod analysis;
pub mod classifier;
pub mod discriminator;
pub mod encoder;
pub mod graph_data;
pub mod model;
pub mod numeric;
pub mod seed;
pub mod training;

pub use graph_data::{BrainGraph, Cohort, FoldSplit, GeneratorConfig, PlantedTruth};
pub use model::{ModelError, ModelParams, PreparedGraph};
pub use numeric::{Matrix, Tape, Var};
pub use training::{TrainConfig, TrainError};
