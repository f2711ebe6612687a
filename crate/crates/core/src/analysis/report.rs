//! Report artifacts: a ranked table, a JSON summary and one scatter per ROI.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discriminator::PairScores;

use super::{
    mark_regions, planted_recovery, AnalysisConfig, AnalysisError, Recovery, RegionReport,
    ScoreSpace,
};

const CLASS_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];
const SIZE: f64 = 360.0;
const MARGIN: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub n_rois: usize,
    pub n_subjects: usize,
    pub threshold: f64,
    pub perplexity: f64,
    pub seed: u64,
    pub score_space: ScoreSpace,
    /// Marked ROI names, best first.
    pub marked: Vec<String>,
    pub mean_silhouette: f64,
    /// Present when the cohort records which ROIs were planted.
    pub planted_recovery: Option<Recovery>,
    /// Mean discriminator scores of own-graph and opposite-class node pairs.
    pub pair_scores: Option<PairScores>,
}

impl AnalysisSummary {
    pub fn new(reports: &[RegionReport], cfg: &AnalysisConfig, planted: Option<&[usize]>) -> Self {
        let marked = mark_regions(reports, cfg.threshold);
        let name_of = |roi: usize| {
            reports
                .iter()
                .find(|r| r.roi_index == roi)
                .map(|r| r.roi_name.clone())
                .unwrap_or_default()
        };
        let mean = if reports.is_empty() {
            0.0
        } else {
            reports.iter().map(|r| r.silhouette).sum::<f64>() / reports.len() as f64
        };
        AnalysisSummary {
            n_rois: reports.len(),
            n_subjects: reports.first().map_or(0, |r| r.labels.len()),
            threshold: cfg.threshold,
            perplexity: cfg.tsne.perplexity,
            seed: cfg.seed,
            score_space: cfg.score_space,
            marked: marked.iter().map(|&r| name_of(r)).collect(),
            mean_silhouette: mean,
            planted_recovery: planted.map(|p| planted_recovery(&marked, p, reports.len())),
            pair_scores: None,
        }
    }
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub summary: PathBuf,
    pub scatters: Vec<PathBuf>,
}

fn write(path: &Path, contents: &str) -> Result<(), AnalysisError> {
    fs::write(path, contents).map_err(|source| AnalysisError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Table rows sorted by silhouette, highest first; ties keep ROI order.
pub fn regions_table(reports: &[RegionReport]) -> String {
    let mut rows: Vec<&RegionReport> = reports.iter().collect();
    rows.sort_by(|a, b| {
        b.silhouette
            .total_cmp(&a.silhouette)
            .then(a.roi_index.cmp(&b.roi_index))
    });
    let mut out = String::from("roi_name\tsilhouette\tmarked\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}", r.roi_name, r.silhouette, r.marked);
    }
    out
}

/// One SVG scatter of the t-SNE coordinates, colored by class.
pub fn scatter_svg(report: &RegionReport) -> String {
    let c = &report.tsne_coords;
    let bounds = |axis: usize| {
        let vals = c.column(axis);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else {
            (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
        }
    };
    let (x0, x1) = bounds(0);
    let (y0, y1) = bounds(1);
    let span = SIZE - 2.0 * MARGIN;
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * span;
    let py = |v: f64| SIZE - MARGIN - (v - y0) / (y1 - y0) * span;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="13">{} silhouette {:.3}{}</text>"#,
        report.roi_name,
        report.silhouette,
        if report.marked { " (marked)" } else { "" }
    );
    for (i, &label) in report.labels.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}" fill-opacity="0.8"/>"#,
            px(c.get(i, 0)),
            py(c.get(i, 1)),
            CLASS_COLORS[usize::from(label.min(1))]
        );
    }
    for (k, color) in CLASS_COLORS.iter().enumerate() {
        let y = SIZE - 10.0;
        let x = MARGIN + 90.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<circle cx="{x}" cy="{}" r="4" fill="{color}"/>"#,
            y - 4.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11">class {k}</text>"#,
            x + 8.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `regions.tsv`, `summary.json` and `roi_<k>.svg` for every ROI into
/// `out_dir`, creating it if needed.
pub fn emit_report(
    reports: &[RegionReport],
    summary: &AnalysisSummary,
    out_dir: impl AsRef<Path>,
) -> Result<ReportFiles, AnalysisError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| AnalysisError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let table = dir.join("regions.tsv");
    write(&table, &regions_table(reports))?;
    let summary_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(summary).expect("summary serialization cannot fail");
    write(&summary_path, &(json + "\n"))?;
    let scatters = reports
        .iter()
        .map(|r| {
            let path = dir.join(format!("roi_{}.svg", r.roi_index));
            write(&path, &scatter_svg(r)).map(|_| path)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReportFiles {
        table,
        summary: summary_path,
        scatters,
    })
}
