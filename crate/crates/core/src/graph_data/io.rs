//! Cohort files: schema-versioned JSON with lossless float encoding.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BrainGraph, Cohort, GeneratorConfig, GraphError, PlantedTruth, NUM_FEATURES};
use crate::numeric::Matrix;

pub const COHORT_SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CohortFile {
    schema_version: u64,
    n_rois: usize,
    n_features: usize,
    roi_names: Vec<String>,
    #[serde(default)]
    generator: Option<GeneratorConfig>,
    #[serde(default)]
    planted_truth: Option<PlantedTruth>,
    graphs: Vec<GraphRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    subject_id: String,
    label: u8,
    features: Vec<Vec<f64>>,
    adjacency: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u64,
}

fn nested(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn parse_error(e: serde_json::Error) -> GraphError {
    GraphError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Serializes a cohort to a JSON string.
pub fn write_cohort(cohort: &Cohort) -> String {
    let file = CohortFile {
        schema_version: COHORT_SCHEMA_VERSION,
        n_rois: cohort.num_rois(),
        n_features: NUM_FEATURES,
        roi_names: cohort.roi_names().to_vec(),
        generator: cohort.generator().cloned(),
        planted_truth: cohort.planted_truth().cloned(),
        graphs: cohort
            .graphs()
            .iter()
            .map(|g| GraphRecord {
                subject_id: g.subject_id().to_string(),
                label: g.label(),
                features: nested(g.features()),
                adjacency: nested(g.adjacency()),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("cohort serialization cannot fail")
}

/// Parses a cohort from JSON text, validating every graph.
pub fn read_cohort(text: &str) -> Result<Cohort, GraphError> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(parse_error)?;
    if probe.schema_version != COHORT_SCHEMA_VERSION {
        return Err(GraphError::UnsupportedVersion {
            found: probe.schema_version,
            supported: COHORT_SCHEMA_VERSION,
        });
    }
    let file: CohortFile = serde_json::from_str(text).map_err(parse_error)?;
    if file.n_features != NUM_FEATURES {
        return Err(GraphError::InvalidCohort(format!(
            "n_features is {}, expected {NUM_FEATURES}",
            file.n_features
        )));
    }
    if file.roi_names.len() != file.n_rois {
        return Err(GraphError::InvalidCohort(format!(
            "{} ROI names for n_rois = {}",
            file.roi_names.len(),
            file.n_rois
        )));
    }
    let graphs = file
        .graphs
        .into_iter()
        .map(|r| {
            let to_matrix = |rows: &[Vec<f64>]| {
                Matrix::from_rows(rows).map_err(|e| GraphError::InvalidGraph {
                    subject: r.subject_id.clone(),
                    reason: e.to_string(),
                })
            };
            let features = to_matrix(&r.features)?;
            let adjacency = to_matrix(&r.adjacency)?;
            BrainGraph::new(r.subject_id, r.label, features, adjacency)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Cohort::new(graphs, file.roi_names, file.generator, file.planted_truth)
}

pub fn save_cohort(cohort: &Cohort, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = path.as_ref();
    let io_err = |source| GraphError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    w.write_all(write_cohort(cohort).as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(io_err)
}

pub fn load_cohort(path: impl AsRef<Path>) -> Result<Cohort, GraphError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_cohort(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_data::{generate_synthetic, GeneratorConfig};

    fn cohort() -> Cohort {
        generate_synthetic(&GeneratorConfig {
            subjects_per_class: 3,
            n_rois: 10,
            timesteps: 20,
            seed: 5,
            ..GeneratorConfig::default()
        })
        .unwrap()
        .0
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = cohort();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.json");
        save_cohort(&c, &path).unwrap();
        let back = load_cohort(&path).unwrap();
        assert_eq!(back, c);
        for (a, b) in back.graphs().iter().zip(c.graphs()) {
            let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a.features()), bits(b.features()));
        }
    }

    #[test]
    fn truncated_file_reports_position() {
        let text = write_cohort(&cohort());
        let err = read_cohort(&text[..text.len() / 2]).unwrap_err();
        match err {
            GraphError::Parse { line, column, .. } => assert!(line >= 1 && column > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let text =
            write_cohort(&cohort()).replacen("\"schema_version\":1", "\"schema_version\":7", 1);
        assert!(matches!(
            read_cohort(&text),
            Err(GraphError::UnsupportedVersion {
                found: 7,
                supported: 1
            })
        ));
    }

    #[test]
    fn asymmetric_adjacency_is_rejected_on_load() {
        let c = cohort();
        let mut value: serde_json::Value = serde_json::from_str(&write_cohort(&c)).unwrap();
        value["graphs"][0]["adjacency"][0][1] = serde_json::json!(0.123);
        let err = read_cohort(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("symmetric"), "{err}");
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_cohort("/nonexistent/cohort.json").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/cohort.json"));
    }
}
