use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use brain_infomax::analysis::{
    analyze_regions, emit_report, extract_embeddings, held_out_pair_scores, AnalysisSummary,
    ScoreSpace,
};
use brain_infomax::graph_data::{
    generate_synthetic, load_cohort, save_cohort, split_folds, Augmentation,
};
use brain_infomax::training::{
    evaluate, train_fold, Checkpoint, CvReport, InfomaxForm, LossKind, TrainError, TrainedFold,
};
use brain_infomax::Cohort;
use serde::Serialize;

use crate::config::{require_path, RunConfig};
use crate::{AnalyzeArgs, EvalArgs, Failure, FormArg, GenerateArgs, LossArg, SpaceArg, TrainArgs};

type CmdResult = Result<(), Failure>;

fn usage(e: anyhow::Error) -> Failure {
    Failure::Usage(e)
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    RunConfig::load_or_default(path).map_err(usage)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create directory {}", path.display()))
}

fn read_cohort(path: &Path) -> anyhow::Result<Cohort> {
    load_cohort(path).with_context(|| format!("cannot load cohort {}", path.display()))
}

pub fn generate(a: GenerateArgs) -> CmdResult {
    let mut cfg = load_config(a.config.as_deref())?;
    let g = &mut cfg.generator;
    if let Some(v) = a.subjects_per_class {
        g.subjects_per_class = v;
    }
    if let Some(v) = a.rois {
        g.n_rois = v;
    }
    if let Some(v) = a.timesteps {
        g.timesteps = v;
    }
    if let Some(v) = a.separable_rois {
        g.separable_rois = Some(v);
    }
    if let Some(v) = a.effect_size {
        g.effect_size = v;
    }
    if let Some(v) = a.noise_sd {
        g.noise_sd = v;
    }
    if let Some(v) = a.seed {
        g.seed = v;
    }
    if a.replicates.is_some() || a.jitter_sd.is_some() {
        let current = g.augmentation.clone().unwrap_or(Augmentation {
            replicates: 1,
            jitter_sd: 0.1,
        });
        g.augmentation = Some(Augmentation {
            replicates: a.replicates.unwrap_or(current.replicates),
            jitter_sd: a.jitter_sd.unwrap_or(current.jitter_sd),
        });
    }
    cfg.validate().map_err(usage)?;
    let out = require_path(a.out, &cfg.paths.cohort, "out", "cohort").map_err(usage)?;

    let (cohort, truth) = generate_synthetic(&cfg.generator).map_err(runtime)?;
    save_cohort(&cohort, &out)
        .with_context(|| format!("cannot save cohort to {}", out.display()))?;
    println!(
        "wrote {} graphs ({} subjects per class, {} ROIs) to {}",
        cohort.graphs().len(),
        cfg.generator.subjects_per_class,
        cohort.num_rois(),
        out.display()
    );
    let names: Vec<&str> = truth
        .separable_rois
        .iter()
        .map(|&r| cohort.roi_names()[r].as_str())
        .collect();
    println!(
        "planted ROIs (effect size {}): {}",
        truth.effect_size,
        names.join(", ")
    );
    Ok(())
}

fn fold_dir(out_dir: &Path, fold: usize) -> PathBuf {
    out_dir.join(format!("fold_{fold}"))
}

fn save_fold(
    out_dir: &Path,
    trained: &TrainedFold,
    cfg: &RunConfig,
    n_rois: usize,
) -> anyhow::Result<()> {
    let dir = fold_dir(out_dir, trained.fold);
    create_dir(&dir)?;
    write_file(&dir.join("metrics.jsonl"), &trained.history.to_jsonl())?;
    Checkpoint::new(
        cfg.training.clone(),
        trained.fold,
        n_rois,
        trained.params.clone(),
    )
    .save(dir.join("checkpoint.json"))?;
    Ok(())
}

pub fn train(a: TrainArgs) -> CmdResult {
    let mut cfg = load_config(a.config.as_deref())?;
    let t = &mut cfg.training;
    if let Some(v) = a.widths {
        t.conv_widths = v;
    }
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.folds {
        t.folds = v;
    }
    if let Some(v) = a.seed {
        t.seed = v;
    }
    if let Some(v) = a.lr {
        t.lr0 = v;
    }
    if let Some(v) = a.lambda_infomax {
        t.lambda_infomax = v;
    }
    if let Some(v) = a.lambda_reg {
        t.lambda_reg = v;
    }
    if let Some(f) = a.infomax_form {
        t.infomax_form = match f {
            FormArg::Standard => InfomaxForm::Standard,
            FormArg::Literal => InfomaxForm::Literal,
        };
    }
    if let Some(loss) = a.loss {
        cfg.training = cfg.training.clone().with_loss(match loss {
            LossArg::L1 => LossKind::L1,
            LossArg::Joint => LossKind::Joint,
        });
    }
    cfg.validate().map_err(usage)?;
    if let Some(k) = a.fold {
        if k >= cfg.training.folds {
            return Err(usage(anyhow!(
                "--fold {k} out of range for {} folds",
                cfg.training.folds
            )));
        }
    }
    let cohort_path =
        require_path(a.cohort, &cfg.paths.cohort, "cohort", "cohort").map_err(usage)?;
    let out_dir =
        require_path(a.out_dir, &cfg.paths.out_dir, "out-dir", "out_dir").map_err(usage)?;

    let cohort = read_cohort(&cohort_path)?;
    let split = split_folds(&cohort, cfg.training.folds, cfg.training.seed).map_err(runtime)?;
    create_dir(&out_dir)?;
    let folds: Vec<usize> = a
        .fold
        .map_or_else(|| (0..cfg.training.folds).collect(), |k| vec![k]);
    let mut scores = (Vec::new(), Vec::new());
    for k in folds {
        let trained = match train_fold(&cohort, &split, k, &cfg.training) {
            Ok(t) => t,
            Err(TrainError::Diverged {
                epoch,
                reason,
                history,
            }) => {
                let dir = fold_dir(&out_dir, k);
                create_dir(&dir)?;
                write_file(&dir.join("metrics.jsonl"), &history.to_jsonl())?;
                return Err(anyhow!(
                    "fold {k} diverged in epoch {epoch}: {reason}; metrics so far in {}",
                    dir.display()
                )
                .into());
            }
            Err(e) => {
                return Err(anyhow::Error::new(e)
                    .context(format!("training fold {k}"))
                    .into())
            }
        };
        save_fold(&out_dir, &trained, &cfg, cohort.num_rois())?;
        let last = trained.history.last().copied();
        let (train_f, test_f) = last.map_or((0.0, 0.0), |r| (r.train_f, r.test_f));
        println!("fold {k}: train F {train_f:.4}, test F {test_f:.4}");
        scores.0.push(test_f);
        scores.1.push(train_f);
    }
    if a.fold.is_none() {
        let report = CvReport::from_scores(scores.0, scores.1);
        let path = out_dir.join("cv_report.json");
        let json = serde_json::to_string_pretty(&report).context("serializing CV report")?;
        write_file(&path, &(json + "\n"))?;
        println!(
            "test F {:.4} ± {:.4} over {} folds (train {:.4}); report in {}",
            report.mean,
            report.std,
            report.test_f.len(),
            report.train_mean,
            path.display()
        );
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("cannot load checkpoint {}", path.display()))
}

/// Checkpoint, cohort and the test indices of the requested fold.
fn model_inputs(
    model: Option<PathBuf>,
    cohort: Option<PathBuf>,
    fold: Option<usize>,
    cfg: &RunConfig,
) -> Result<(Checkpoint, Cohort, usize, Vec<usize>), Failure> {
    let model_path = require_path(model, &cfg.paths.model, "model", "model").map_err(usage)?;
    let cohort_path = require_path(cohort, &cfg.paths.cohort, "cohort", "cohort").map_err(usage)?;
    let ckpt = load_checkpoint(&model_path)?;
    let cohort = read_cohort(&cohort_path)?;
    if ckpt.n_rois != cohort.num_rois() {
        return Err(anyhow!(
            "checkpoint {} was trained on {} ROIs but cohort {} has {}",
            model_path.display(),
            ckpt.n_rois,
            cohort_path.display(),
            cohort.num_rois()
        )
        .into());
    }
    let fold = fold.unwrap_or(ckpt.fold);
    if fold >= ckpt.config.folds {
        return Err(usage(anyhow!(
            "--fold {fold} out of range for the checkpoint's {} folds",
            ckpt.config.folds
        )));
    }
    let split = split_folds(&cohort, ckpt.config.folds, ckpt.config.seed).map_err(runtime)?;
    let indices = split.test_indices(&cohort, fold);
    Ok((ckpt, cohort, fold, indices))
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    fold: usize,
    f_score: f64,
    subjects: Vec<&'a str>,
    labels: Vec<u8>,
    probabilities: Vec<f64>,
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let cfg = load_config(a.config.as_deref())?;
    let (ckpt, cohort, fold, indices) = model_inputs(a.model, a.cohort, a.fold, &cfg)?;
    let result = evaluate(&ckpt.params, &cohort, &indices, &ckpt.config).map_err(runtime)?;
    if fold != ckpt.fold {
        eprintln!(
            "warning: fold {fold} was part of this checkpoint's training data (held-out fold is {})",
            ckpt.fold
        );
    }
    println!(
        "fold {fold}: F-score {:.4} on {} graphs",
        result.f_score,
        indices.len()
    );
    if let Some(out) = a.out {
        let record = EvalRecord {
            fold,
            f_score: result.f_score,
            subjects: indices
                .iter()
                .map(|&i| cohort.graphs()[i].subject_id())
                .collect(),
            labels: result.labels,
            probabilities: result.probabilities,
        };
        let json = serde_json::to_string_pretty(&record).context("serializing evaluation")?;
        write_file(&out, &(json + "\n"))?;
    }
    Ok(())
}

pub fn analyze(a: AnalyzeArgs) -> CmdResult {
    let mut cfg = load_config(a.config.as_deref())?;
    let an = &mut cfg.analysis;
    if let Some(v) = a.threshold {
        an.threshold = v;
    }
    if let Some(v) = a.perplexity {
        an.tsne.perplexity = v;
    }
    if let Some(v) = a.iterations {
        an.tsne.iterations = v;
    }
    if let Some(v) = a.seed {
        an.seed = v;
    }
    if let Some(s) = a.score_space {
        an.score_space = match s {
            SpaceArg::Tsne => ScoreSpace::Tsne,
            SpaceArg::Embedding => ScoreSpace::Embedding,
        };
    }
    cfg.validate().map_err(usage)?;
    let out_dir =
        require_path(a.out_dir, &cfg.paths.out_dir, "out-dir", "out_dir").map_err(usage)?;
    let (ckpt, cohort, fold, indices) = model_inputs(a.model, a.cohort, a.fold, &cfg)?;
    cfg.analysis.tsne.check(indices.len()).map_err(|e| {
        usage(anyhow!(e).context(format!("fold {fold} has {} test graphs", indices.len())))
    })?;

    let sets = extract_embeddings(&ckpt.params, &cohort, &indices, ckpt.config.self_loops)
        .map_err(runtime)?;
    let reports = analyze_regions(&sets, cohort.roi_names(), &cfg.analysis).map_err(runtime)?;
    let planted = cohort.planted_truth().map(|t| t.separable_rois.as_slice());
    let mut summary = AnalysisSummary::new(&reports, &cfg.analysis, planted);
    summary.pair_scores = Some(
        held_out_pair_scores(
            &ckpt.params,
            &cohort,
            &indices,
            ckpt.config.self_loops,
            cfg.analysis.seed,
        )
        .map_err(runtime)?,
    );
    let files = emit_report(&reports, &summary, &out_dir).map_err(runtime)?;

    println!(
        "marked {} of {} regions (silhouette > {}) on {} test graphs of fold {fold}",
        summary.marked.len(),
        summary.n_rois,
        summary.threshold,
        indices.len()
    );
    if !summary.marked.is_empty() {
        println!("  {}", summary.marked.join(", "));
    }
    if let Some(r) = summary.planted_recovery {
        println!(
            "planted recall {:.3}, false-mark rate {:.3}",
            r.recall, r.false_mark_rate
        );
    }
    if let Some(p) = summary.pair_scores {
        println!(
            "discriminator: positive pairs {:.4}, negative pairs {:.4}",
            p.positive, p.negative
        );
    }
    println!(
        "report in {}",
        files.table.parent().unwrap_or(&out_dir).display()
    );
    Ok(())
}
