use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use featedit::config::{ConfigSource, DEFAULT_RANDOM_RATIO, DEFAULT_RIDGE_LAMBDA, SEED_ENV};
use featedit::error::{Error, Result, StageExt};
use featedit::pipeline::{detect, export_drops, train_heads};
use featedit::roles::{write_roles, Roles};
use featedit::{feat, model, run_pipeline, tables};
use featedit_core::{
    build_masks, edit_dataset, edit_for_classifier, evaluate, generate, merge_datasets,
    pca_project, random_edit, rank_channel_activations, seeded_rng, stats_matrix,
    variance_profile, ApMode, EditConfig, EvalConfig, Matrix, NegativeEdit, SvmConfig,
    SynthSpec,
};

/// Channel-level feature editing: statistics, edit masks, linear heads and
/// detection evaluation over pooled feature maps.
#[derive(Parser)]
#[command(name = "featedit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test pair with planted channel roles.
    Synth(SynthArgs),
    /// Per-sample, per-channel kurtosis table.
    Stats(StatsArgs),
    /// Build class edit masks and apply them.
    Edit(EditArgs),
    /// Zero a random fraction of every sample's units.
    RandEdit(RandEditArgs),
    /// Concatenate two datasets of the same geometry.
    Merge(MergeArgs),
    /// Train one-vs-rest SVMs and box regressors.
    Train(TrainArgs),
    /// Score and refine test proposals with trained models.
    Predict(PredictArgs),
    /// Greedy non-maximum suppression per image and class.
    Nms(NmsArgs),
    /// Per-class average precision and mAP.
    Eval(EvalArgs),
    /// Run a full experiment from a config file.
    Run(RunArgs),
    /// Two-component PCA projection of the feature vectors.
    Pca(PcaArgs),
    /// Samples with the strongest central activation on one channel.
    Rank(RankArgs),
    /// Exemplar samples for every dropped channel of a mask file.
    ExportDrops(ExportDropsArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Seed for every random choice; falls back to FEAT_EDIT_SEED, then 0.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for train.feat, test.feat, the ground-truth CSVs
    /// and roles.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 6)]
    spatial: usize,
    /// Training samples per class.
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    /// Test samples per class (defaults to --per-class).
    #[arg(long)]
    test_per_class: Option<usize>,
    /// Noisy channels planted per class.
    #[arg(long, default_value_t = 4)]
    noisy: usize,
    /// Flat channels shared by all classes.
    #[arg(long, default_value_t = 10)]
    flat: usize,
    /// Test-time drift applied to noisy channels.
    #[arg(long, default_value_t = SynthSpec::DEFAULT_SHIFT)]
    shift: f64,
}

#[derive(Args)]
struct StatsArgs {
    /// Input .feat file.
    input: PathBuf,
    /// Output CSV (sample_index,channel,kurtosis).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EditArgs {
    /// Input .feat file.
    input: PathBuf,
    /// Output .feat file of edited samples.
    #[arg(long)]
    out: PathBuf,
    /// Use these masks instead of building them from the input.
    #[arg(long, conflicts_with = "masks_out")]
    masks: Option<PathBuf>,
    /// Write the built masks (class_id,channel,keep,reason).
    #[arg(long)]
    masks_out: Option<PathBuf>,
    /// Fraction of channels dropped by intra-class variance.
    #[arg(long, default_value_t = 0.2)]
    intra_frac: f64,
    /// Fraction of channels dropped by inter-class variance.
    #[arg(long, default_value_t = 0.3)]
    inter_frac: f64,
    /// Edit for this class's classifier; by default every sample gets its
    /// own class's mask.
    #[arg(long)]
    classifier: Option<u32>,
    /// With --classifier: classifier-class, own-class or none.
    #[arg(long, default_value = "classifier-class", value_parser = parse_negative_edit)]
    negative_edit: NegativeEdit,
}

#[derive(Args)]
struct RandEditArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ratio of zeroed to kept units, in [0, 1).
    #[arg(long, default_value_t = DEFAULT_RANDOM_RATIO)]
    ratio: f64,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct MergeArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SvmArgs {
    /// SVM regularization strength.
    #[arg(long, default_value_t = 1e-4)]
    reg_lambda: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Stop once the averaged objective changes by less than this.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Hinge-loss multiplier for positive samples.
    #[arg(long, default_value_t = 1.0)]
    positive_weight: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training .feat file.
    input: PathBuf,
    /// Ground-truth CSV for the training images (regression targets).
    #[arg(long)]
    gt: PathBuf,
    /// Directory for svm_class<k>.lmod and reg_class<k>.lreg.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    svm: SvmArgs,
    /// Box regressor ridge strength.
    #[arg(long, default_value_t = DEFAULT_RIDGE_LAMBDA)]
    ridge_lambda: f64,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct PredictArgs {
    /// Test .feat file.
    input: PathBuf,
    /// Directory written by `train`.
    #[arg(long)]
    models: PathBuf,
    /// Detections CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NmsArgs {
    /// Detections CSV.
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Suppress boxes whose IoU with a kept box exceeds this.
    #[arg(long, default_value_t = 0.3)]
    iou: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// Detections CSV.
    detections: PathBuf,
    /// Ground-truth CSV.
    #[arg(long)]
    gt: PathBuf,
    /// Number of classes.
    #[arg(long)]
    classes: usize,
    /// Directory for eval.csv and pr_class<k>.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Minimum IoU for a match.
    #[arg(long, default_value_t = 0.5)]
    match_iou: f64,
    /// eleven_point or continuous.
    #[arg(long, default_value = "eleven_point", value_parser = parse_ap_mode)]
    ap_mode: ApMode,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable), e.g. --set variant=original.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct PcaArgs {
    input: PathBuf,
    /// Output CSV (sample_index,pc1,pc2,class_id).
    #[arg(long)]
    out: PathBuf,
    /// Project per-channel kurtosis rows instead of raw feature vectors.
    #[arg(long)]
    kurtosis: bool,
}

#[derive(Args)]
struct RankArgs {
    input: PathBuf,
    #[arg(long)]
    channel: usize,
    /// Number of samples to list.
    #[arg(long, default_value_t = 9)]
    k: usize,
}

#[derive(Args)]
struct ExportDropsArgs {
    /// Dataset to draw exemplars from.
    input: PathBuf,
    /// Mask CSV written by `edit --masks-out`.
    #[arg(long)]
    masks: PathBuf,
    /// Output CSV (class_id,channel,reason,rank,sample_index).
    #[arg(long)]
    out: PathBuf,
}

fn parse_negative_edit(s: &str) -> std::result::Result<NegativeEdit, String> {
    NegativeEdit::parse(s).ok_or_else(|| "expected classifier-class, own-class or none".into())
}

fn parse_ap_mode(s: &str) -> std::result::Result<ApMode, String> {
    ApMode::parse(s).ok_or_else(|| "expected eleven_point or continuous".into())
}

fn config_err(e: featedit_core::Error) -> Error {
    Error::Config(e.to_string())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::with_layout(
        a.classes,
        a.channels,
        a.spatial,
        a.per_class,
        a.noisy,
        a.flat,
        a.seed.seed,
    )
    .map_err(config_err)?;
    spec.n_test_per_class = a.test_per_class.unwrap_or(a.per_class);
    spec.shift = a.shift;
    spec.validate().map_err(config_err)?;
    let data = generate(&spec).stage("synth")?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    feat::write_dataset(&data.train, a.out.join("train.feat"))?;
    feat::write_dataset(&data.test, a.out.join("test.feat"))?;
    tables::write_ground_truth(&data.train_gt, a.out.join("train_gt.csv"))?;
    tables::write_ground_truth(&data.test_gt, a.out.join("test_gt.csv"))?;
    write_roles(&Roles::from(&spec), a.out.join("roles.json"))
}

fn edit(a: EditArgs) -> Result<()> {
    let cfg = EditConfig {
        intra_frac: a.intra_frac,
        inter_frac: a.inter_frac,
        seed: 0,
    };
    cfg.validate().map_err(config_err)?;
    let d = feat::read_dataset(&a.input)?;
    let masks = match &a.masks {
        Some(p) => tables::read_masks(p)?,
        None => {
            let stats = stats_matrix(&d).stage("stats")?;
            let profile = variance_profile(&stats, &d.labels(), d.num_classes()).stage("profile")?;
            build_masks(&profile, &cfg).stage("masks")?
        }
    };
    if let Some(p) = &a.masks_out {
        tables::write_masks(&masks, p)?;
    }
    let edited = match a.classifier {
        Some(c) => edit_for_classifier(&d, &masks, c, a.negative_edit),
        None => edit_dataset(&d, &masks),
    }
    .stage("edit")?;
    feat::write_dataset(&edited, &a.out)
}

fn svm_config(a: &SvmArgs, seed: u64) -> Result<SvmConfig> {
    let cfg = SvmConfig {
        reg_lambda: a.reg_lambda,
        epochs: a.epochs,
        seed,
        tolerance: a.tolerance,
        positive_weight: a.positive_weight,
    };
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    let d = feat::read_dataset(&a.input)?;
    let gts = tables::read_ground_truth(&a.gt)?;
    let cfg = svm_config(&a.svm, a.seed.seed)?;
    if !(a.ridge_lambda.is_finite() && a.ridge_lambda > 0.0) {
        return Err(Error::Config("ridge_lambda must be finite and > 0".into()));
    }
    let (models, regs) = train_heads(&d, &gts, &cfg, a.ridge_lambda)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    for (m, r) in models.iter().zip(&regs) {
        model::write_svm(m, a.out_dir.join(format!("svm_class{}.lmod", m.class_id)))?;
        model::write_regressor(r, a.out_dir.join(format!("reg_class{}.lreg", r.class_id)))?;
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let d = feat::read_dataset(&a.input)?;
    let dir: &Path = &a.models;
    let mut models = Vec::new();
    let mut regs = Vec::new();
    for c in 0..d.num_classes() {
        models.push(model::read_svm(dir.join(format!("svm_class{c}.lmod")))?);
        regs.push(model::read_regressor(dir.join(format!("reg_class{c}.lreg")))?);
    }
    let dets = detect(&d, &models, &regs).stage("predict")?;
    tables::write_detections(&dets, &a.out)
}

fn eval(a: EvalArgs) -> Result<()> {
    let dets = tables::read_detections(&a.detections)?;
    let gts = tables::read_ground_truth(&a.gt)?;
    let cfg = EvalConfig {
        match_iou: a.match_iou,
        ap_mode: a.ap_mode,
        ..EvalConfig::default()
    };
    cfg.validate().map_err(config_err)?;
    let report = evaluate(&dets, &gts, a.classes, &cfg).stage("eval")?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    tables::write_eval(&report.per_class, &a.out_dir)?;
    for p in &report.per_class {
        println!("class {}: ap {:.6}", p.class_id, p.ap);
    }
    println!("map {:.6}", report.map);
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut src = match &a.config {
        Some(p) => ConfigSource::parse_file(p)?,
        None => ConfigSource::default(),
    };
    for o in &a.overrides {
        src.apply_override(o)?;
    }
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = src.resolve(env_seed.as_deref())?;
    let report = run_pipeline(&cfg)?;
    println!(
        "{}: accuracy {:.6} map {:.6} -> {}",
        report.variant,
        report.accuracy,
        report.map,
        cfg.out.display()
    );
    Ok(())
}

fn pca(a: PcaArgs) -> Result<()> {
    let d = feat::read_dataset(&a.input)?;
    let rows: Vec<Vec<f64>> = if a.kurtosis {
        let stats = stats_matrix(&d).stage("stats")?;
        (0..stats.rows()).map(|j| stats.row(j).to_vec()).collect()
    } else {
        d.samples().iter().map(|s| s.feature.to_f64_vec()).collect()
    };
    let m = Matrix::from_rows(&rows).stage("pca")?;
    let result = pca_project(&m, 2).stage("pca")?;
    tables::write_pca(&result, &d.labels(), &a.out)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Stats(a) => {
            let d = feat::read_dataset(&a.input)?;
            let stats = stats_matrix(&d).stage("stats")?;
            tables::write_stats(&stats, &a.out)
        }
        Command::Edit(a) => edit(a),
        Command::RandEdit(a) => {
            let d = feat::read_dataset(&a.input)?;
            if !(0.0..1.0).contains(&a.ratio) {
                return Err(Error::Config("ratio must lie in [0, 1)".into()));
            }
            let mut rng = seeded_rng(a.seed.seed);
            let edited = d
                .map_features(|_, s| random_edit(&s.feature, a.ratio, &mut rng))
                .stage("rand-edit")?;
            feat::write_dataset(&edited, &a.out)
        }
        Command::Merge(a) => {
            let first = feat::read_dataset(&a.first)?;
            let second = feat::read_dataset(&a.second)?;
            let merged = merge_datasets(&first, &second).stage("merge")?;
            feat::write_dataset(&merged, &a.out)
        }
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Nms(a) => {
            if !(0.0..=1.0).contains(&a.iou) {
                return Err(Error::Config("iou must lie in [0, 1]".into()));
            }
            let dets = tables::read_detections(&a.input)?;
            let kept = featedit_core::detect::nms_grouped(&dets, a.iou);
            tables::write_detections(&kept, &a.out)
        }
        Command::Eval(a) => eval(a),
        Command::Run(a) => run(a),
        Command::Pca(a) => pca(a),
        Command::Rank(a) => {
            let d = feat::read_dataset(&a.input)?;
            for j in rank_channel_activations(&d, a.channel, a.k).stage("rank")? {
                println!("{j}");
            }
            Ok(())
        }
        Command::ExportDrops(a) => {
            let d = feat::read_dataset(&a.input)?;
            let masks = tables::read_masks(&a.masks)?;
            export_drops(&masks, &d, &a.out).stage("export-drops")
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
