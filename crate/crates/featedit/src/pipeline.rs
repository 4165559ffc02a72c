//! End-to-end experiment runs and the stage helpers shared with the CLI.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use featedit_core::regress::BoxDelta;
use featedit_core::{
    accuracy, box_targets, build_masks, edit_for_classifier, evaluate, iou, merge_datasets,
    random_edit, rank_channel_activations, seeded_rng, stats_matrix, train_regressor, train_svm,
    variance_profile, BoxRegressor, Dataset, DetectionRecord, EditMask, GroundTruth,
    LinearModel, SvmConfig,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Variant};
use crate::error::{Error, Result, StageExt};
use crate::roles::{read_roles, recovery, Recovery};
use crate::{feat, model, tables};

/// Number of exemplar samples listed per dropped channel.
pub const EXEMPLARS: usize = 9;

/// Stream tag mixed into the seed of the random-edit generator.
const RANDOM_EDIT_STREAM: u64 = 0x7261_6e64_6f6d;

/// Proposal features and box targets of every class-`class_id` sample whose
/// image has a same-class ground-truth box. The target box is the one with
/// the highest IoU against the proposal.
pub fn regression_pairs(
    d: &Dataset,
    gts: &[GroundTruth],
    class_id: u32,
) -> Result<(Vec<Vec<f64>>, Vec<BoxDelta>)> {
    let mut by_image: BTreeMap<u32, Vec<&GroundTruth>> = BTreeMap::new();
    for g in gts.iter().filter(|g| g.class_id == class_id) {
        by_image.entry(g.image_id).or_default().push(g);
    }
    let mut xs = Vec::new();
    let mut targets = Vec::new();
    for s in d.samples().iter().filter(|s| s.class_id == class_id) {
        let Some(cands) = by_image.get(&s.image_id) else {
            continue;
        };
        let mut best = cands[0];
        for g in &cands[1..] {
            if iou(&s.bbox, &g.bbox) > iou(&s.bbox, &best.bbox) {
                best = g;
            }
        }
        xs.push(s.feature.to_f64_vec());
        targets.push(box_targets(&s.bbox, &best.bbox)?);
    }
    Ok((xs, targets))
}

pub fn train_box_regressor(
    d: &Dataset,
    gts: &[GroundTruth],
    class_id: u32,
    ridge_lambda: f64,
) -> Result<BoxRegressor> {
    let (xs, targets) = regression_pairs(d, gts, class_id)?;
    Ok(train_regressor(&xs, &targets, ridge_lambda, class_id)?)
}

/// One-vs-rest SVMs and box regressors for every class on one training set.
pub fn train_heads(
    d: &Dataset,
    gts: &[GroundTruth],
    svm: &SvmConfig,
    ridge_lambda: f64,
) -> Result<(Vec<LinearModel>, Vec<BoxRegressor>)> {
    let mut models = Vec::with_capacity(d.num_classes());
    let mut regs = Vec::with_capacity(d.num_classes());
    for c in 0..d.num_classes() as u32 {
        models.push(train_svm(d, c, svm).stage("train")?);
        regs.push(train_box_regressor(d, gts, c, ridge_lambda).stage("regress")?);
    }
    Ok((models, regs))
}

/// Scores every test proposal with every class model and refines its box
/// with that class's regressor: one detection per (sample, class).
pub fn detect(
    test: &Dataset,
    models: &[LinearModel],
    regs: &[BoxRegressor],
) -> Result<Vec<DetectionRecord>> {
    if models.len() != regs.len() {
        return Err(Error::Config(format!(
            "{} classifiers but {} regressors",
            models.len(),
            regs.len()
        )));
    }
    let mut dets = Vec::with_capacity(test.len() * models.len());
    for s in test.samples() {
        let x = s.feature.to_f64_vec();
        for (m, r) in models.iter().zip(regs) {
            let score = featedit_core::score(m, &x)?;
            let bbox = r.refine(&s.bbox, &x)?;
            dets.push(DetectionRecord::new(s.image_id, m.class_id, score, bbox)?);
        }
    }
    Ok(dets)
}

pub const DROPS_HEADER: &str = "class_id,channel,reason,rank,sample_index";

/// For each dropped channel of each mask, the reason and the samples with
/// the strongest central activation (up to [`EXEMPLARS`], best first).
pub fn export_drops(masks: &[EditMask], d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(DROPS_HEADER);
    out.push('\n');
    for m in masks {
        for ch in m.dropped() {
            let ranked = rank_channel_activations(d, ch, EXEMPLARS)?;
            for (rank, j) in ranked.iter().enumerate() {
                out.push_str(&format!(
                    "{},{ch},{},{rank},{j}\n",
                    m.class_id,
                    m.reason(ch).as_str()
                ));
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStatus {
    pub stage: &'static str,
    pub status: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskSummary {
    pub class_id: u32,
    pub dropped_intra: Vec<usize>,
    pub dropped_inter: Vec<usize>,
    pub num_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassResult {
    pub class_id: u32,
    pub ap: f64,
    pub num_gt: usize,
    pub num_tp: usize,
    pub num_fp: usize,
    pub no_ground_truth: bool,
}

/// Everything a run reports; serialized to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub variant: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub stages: Vec<StageStatus>,
    pub num_train: usize,
    pub num_test: usize,
    /// Training-set size of each class's classifier.
    pub training_sizes: Vec<usize>,
    pub masks: Vec<MaskSummary>,
    /// Test accuracy of arg-max classification over the class SVMs.
    pub accuracy: f64,
    pub map: f64,
    pub per_class: Vec<ClassResult>,
    /// Planted-channel recovery, when a roles sidecar was given.
    pub recovery: Option<Recovery>,
}

impl RunReport {
    pub fn stage_status(&self, stage: &str) -> Option<&'static str> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| s.status)
    }
}

struct Stages(Vec<StageStatus>);

impl Stages {
    fn mark(&mut self, stage: &'static str, done: bool) {
        let status = if done { "done" } else { "skipped" };
        self.0.push(StageStatus { stage, status });
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<(Dataset, Dataset, Vec<GroundTruth>, Vec<GroundTruth>)> {
    let train = feat::read_dataset(&cfg.train)?;
    let test = feat::read_dataset(&cfg.test)?;
    let train_gt = tables::read_ground_truth(&cfg.train_gt)?;
    let test_gt = tables::read_ground_truth(&cfg.test_gt)?;
    if !train.same_geometry(&test) {
        return Err(Error::Format(format!(
            "{} and {} differ in classes, channels or spatial size",
            cfg.train.display(),
            cfg.test.display()
        )));
    }
    Ok((train, test, train_gt, test_gt))
}

/// Runs every stage of one experiment and writes its artifacts to
/// `cfg.out`: statistics, masks, edited sets, models, detections, the
/// evaluation tables, `report.json` and `manifest.json`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (train, test, train_gt, test_gt) = load_inputs(cfg).stage("load")?;
    let t = train.num_classes();
    let mut stages = Stages(Vec::new());

    let stats = stats_matrix(&train).stage("stats")?;
    tables::write_stats(&stats, out.join("train_stats.csv")).stage("stats")?;
    stages.mark("stats", true);

    let uses_masks = matches!(cfg.variant, Variant::EditedOnly | Variant::Merged);
    let masks = if uses_masks {
        let profile = variance_profile(&stats, &train.labels(), t).stage("profile")?;
        stages.mark("profile", true);
        let masks = build_masks(&profile, &cfg.edit).stage("masks")?;
        tables::write_masks(&masks, out.join("masks.csv")).stage("masks")?;
        stages.mark("masks", true);
        masks
    } else {
        stages.mark("profile", false);
        stages.mark("masks", false);
        Vec::new()
    };

    // One training set per classifier.
    let training: Vec<Dataset> = match cfg.variant {
        Variant::Original => {
            stages.mark("edit", false);
            stages.mark("merge", false);
            vec![train.clone(); t]
        }
        Variant::EditedOnly | Variant::Merged => {
            let mut sets = Vec::with_capacity(t);
            for c in 0..t as u32 {
                let edited = edit_for_classifier(&train, &masks, c, cfg.negative_edit).stage("edit")?;
                feat::write_dataset(&edited, out.join(format!("edited_class{c}.feat"))).stage("edit")?;
                sets.push(edited);
            }
            stages.mark("edit", true);
            if cfg.variant == Variant::Merged {
                sets = sets
                    .iter()
                    .map(|e| merge_datasets(&train, e))
                    .collect::<std::result::Result<_, _>>()
                    .stage("merge")?;
            }
            stages.mark("merge", cfg.variant == Variant::Merged);
            sets
        }
        Variant::RandomEdit => {
            let mut rng = seeded_rng(cfg.seed ^ RANDOM_EDIT_STREAM);
            let ratio = cfg.random_ratio;
            let edited = train
                .map_features(|_, s| random_edit(&s.feature, ratio, &mut rng))
                .stage("edit")?;
            feat::write_dataset(&edited, out.join("random_edit.feat")).stage("edit")?;
            stages.mark("edit", true);
            let merged = merge_datasets(&train, &edited).stage("merge")?;
            stages.mark("merge", true);
            vec![merged; t]
        }
    };

    let mut models = Vec::with_capacity(t);
    let mut regs = Vec::with_capacity(t);
    for (c, set) in training.iter().enumerate() {
        let c = c as u32;
        let m = train_svm(set, c, &cfg.svm).stage("train")?;
        model::write_svm(&m, out.join(format!("svm_class{c}.lmod"))).stage("train")?;
        models.push(m);
        let r = train_box_regressor(set, &train_gt, c, cfg.ridge_lambda).stage("train")?;
        model::write_regressor(&r, out.join(format!("reg_class{c}.lreg"))).stage("train")?;
        regs.push(r);
    }
    stages.mark("train", true);

    let acc = accuracy(&models, &test).stage("score")?;
    let raw = detect(&test, &models, &regs).stage("score")?;
    tables::write_detections(&raw, out.join("detections_raw.csv")).stage("score")?;
    stages.mark("score", true);
    stages.mark("regress", true);

    let kept = featedit_core::detect::nms_grouped(&raw, cfg.eval.nms_iou);
    tables::write_detections(&kept, out.join("detections.csv")).stage("nms")?;
    stages.mark("nms", true);

    let eval = evaluate(&kept, &test_gt, t, &cfg.eval).stage("eval")?;
    tables::write_eval(&eval.per_class, out).stage("eval")?;
    stages.mark("eval", true);

    let recovered = match (&cfg.roles, uses_masks) {
        (Some(path), true) => Some(recovery(&read_roles(path)?, &masks).stage("recovery")?),
        _ => None,
    };

    let report = RunReport {
        variant: cfg.variant.as_str(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        stages: stages.0,
        num_train: train.len(),
        num_test: test.len(),
        training_sizes: training.iter().map(Dataset::len).collect(),
        masks: masks
            .iter()
            .map(|m| MaskSummary {
                class_id: m.class_id,
                dropped_intra: m.dropped_intra.clone(),
                dropped_inter: m.dropped_inter.clone(),
                num_dropped: m.num_dropped(),
            })
            .collect(),
        accuracy: acc,
        map: eval.map,
        per_class: eval
            .per_class
            .iter()
            .map(|p| ClassResult {
                class_id: p.class_id,
                ap: p.ap,
                num_gt: p.num_gt,
                num_tp: p.num_tp,
                num_fp: p.num_fp,
                no_ground_truth: p.no_ground_truth,
            })
            .collect(),
        recovery: recovered,
    };
    write_json(&report, &out.join("report.json"))?;
    write_manifest(cfg, out)?;
    Ok(report)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Seeds {
    seed: u64,
    source: &'static str,
    svm: u64,
    random_edit: u64,
}

#[derive(Serialize)]
struct Manifest {
    config: Vec<String>,
    config_hash: String,
    seeds: Seeds,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Records the resolved config, every seed, and checksums of all inputs and
/// of every file in the output directory.
fn write_manifest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut inputs: Vec<&PathBuf> = vec![&cfg.train, &cfg.test, &cfg.train_gt, &cfg.test_gt];
    inputs.extend(cfg.roles.as_ref());
    let inputs = inputs
        .into_iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<String> = fs::read_dir(out)
        .map_err(|e| Error::io(out, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    names.sort();
    let outputs = names
        .into_iter()
        .map(|n| {
            Ok(FileDigest {
                sha256: sha256_file(&out.join(&n))?,
                path: n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        config: cfg.canonical().lines().map(str::to_string).collect(),
        config_hash: cfg.hash(),
        seeds: Seeds {
            seed: cfg.seed,
            source: cfg.seed_source.as_str(),
            svm: cfg.svm.seed,
            random_edit: cfg.seed ^ RANDOM_EDIT_STREAM,
        },
        inputs,
        outputs,
    };
    write_json(&manifest, &out.join("manifest.json"))
}
