use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use featedit::{feat, tables};
use featedit_core::{BBox, Dataset, FeatureMap, LabeledSample};

fn featedit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featedit"))
        .current_dir(dir)
        .env_remove("FEAT_EDIT_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = featedit(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth_small(dir: &Path) {
    ok(
        dir,
        &[
            "synth", "--out", "data", "--seed", "5", "--classes", "2", "--channels", "8",
            "--spatial", "4", "--per-class", "30", "--test-per-class", "10", "--noisy", "1",
            "--flat", "2",
        ],
    );
}

const CONFIG: &str = "\
train = data/train.feat
test = data/test.feat
train_gt = data/train_gt.csv
test_gt = data/test_gt.csv
roles = data/roles.json
out = run
seed = 11
epochs = 5
";

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["--help"]);
    for sub in [
        "synth", "stats", "edit", "rand-edit", "merge", "train", "predict", "nms", "eval", "run",
        "pca", "rank", "export-drops",
    ] {
        assert!(help.contains(sub), "missing {sub} in --help");
    }
    assert!(ok(dir.path(), &["run", "--help"]).contains("--set"));
    assert!(ok(dir.path(), &["synth", "--help"]).contains("FEAT_EDIT_SEED"));
}

#[test]
fn stages_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_small(dir);
    let d = feat::read_dataset(dir.join("data/train.feat")).unwrap();
    assert_eq!((d.len(), d.num_classes(), d.channels(), d.spatial()), (60, 2, 8, 4));

    ok(dir, &["stats", "data/train.feat", "--out", "stats.csv"]);
    assert_eq!(header(&dir.join("stats.csv")), tables::STATS_HEADER);
    assert_eq!(fs::read_to_string(dir.join("stats.csv")).unwrap().lines().count(), 1 + 60 * 8);

    ok(dir, &["edit", "data/train.feat", "--out", "edited.feat", "--masks-out", "masks.csv"]);
    let masks = tables::read_masks(dir.join("masks.csv")).unwrap();
    assert_eq!(masks.len(), 2);
    let edited = feat::read_dataset(dir.join("edited.feat")).unwrap();
    for (s, e) in d.samples().iter().zip(edited.samples()) {
        let m = &masks[s.class_id as usize];
        for ch in 0..8 {
            if !m.keep[ch] {
                assert!(e.feature.channel(ch).iter().all(|&v| v == 0.0));
            } else {
                assert_eq!(e.feature.channel(ch), s.feature.channel(ch));
            }
        }
    }
    // Reusing the written masks reproduces the same edit.
    ok(dir, &["edit", "data/train.feat", "--out", "edited2.feat", "--masks", "masks.csv"]);
    assert_eq!(
        fs::read(dir.join("edited.feat")).unwrap(),
        fs::read(dir.join("edited2.feat")).unwrap()
    );
    ok(dir, &["edit", "data/train.feat", "--out", "edited_c0.feat", "--classifier", "0", "--negative-edit", "none"]);

    ok(dir, &["rand-edit", "data/train.feat", "--out", "rand.feat", "--ratio", "0.5", "--seed", "2"]);
    let rand = feat::read_dataset(dir.join("rand.feat")).unwrap();
    assert_eq!(rand.len(), 60);

    ok(dir, &["merge", "data/train.feat", "edited.feat", "--out", "merged.feat"]);
    assert_eq!(feat::read_dataset(dir.join("merged.feat")).unwrap().len(), 120);

    ok(dir, &["train", "merged.feat", "--gt", "data/train_gt.csv", "--out-dir", "models", "--epochs", "5"]);
    for name in ["svm_class0.lmod", "svm_class1.lmod", "reg_class0.lreg", "reg_class1.lreg"] {
        assert!(dir.join("models").join(name).is_file(), "{name}");
    }
    ok(dir, &["predict", "data/test.feat", "--models", "models", "--out", "raw.csv"]);
    let raw = tables::read_detections(dir.join("raw.csv")).unwrap();
    assert_eq!(raw.len(), 20 * 2);
    ok(dir, &["nms", "raw.csv", "--out", "kept.csv", "--iou", "0.3"]);
    let kept = tables::read_detections(dir.join("kept.csv")).unwrap();
    assert!(kept.len() <= raw.len());
    let printed = ok(dir, &["eval", "kept.csv", "--gt", "data/test_gt.csv", "--classes", "2", "--out-dir", "eval"]);
    assert!(printed.contains("map "));
    assert_eq!(header(&dir.join("eval/eval.csv")), tables::EVAL_HEADER);
    assert!(dir.join("eval/pr_class1.csv").is_file());

    ok(dir, &["pca", "data/train.feat", "--out", "pca.csv"]);
    assert_eq!(header(&dir.join("pca.csv")), tables::PCA_HEADER);
    ok(dir, &["pca", "data/train.feat", "--out", "pca_k.csv", "--kurtosis"]);

    let ranked = ok(dir, &["rank", "data/train.feat", "--channel", "3", "--k", "9"]);
    assert_eq!(ranked.lines().count(), 9);

    ok(dir, &["export-drops", "data/train.feat", "--masks", "masks.csv", "--out", "drops.csv"]);
    let drops = fs::read_to_string(dir.join("drops.csv")).unwrap();
    let dropped: usize = masks.iter().map(|m| m.num_dropped()).sum();
    assert_eq!(drops.lines().count(), 1 + 9 * dropped);
}

#[test]
fn run_is_reproducible_and_marks_skipped_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_small(dir);
    fs::write(dir.join("run.cfg"), CONFIG).unwrap();
    ok(dir, &["run", "--config", "run.cfg"]);
    let first = fs::read(dir.join("run/report.json")).unwrap();
    let manifest = fs::read(dir.join("run/manifest.json")).unwrap();
    ok(dir, &["run", "--config", "run.cfg"]);
    assert_eq!(first, fs::read(dir.join("run/report.json")).unwrap());
    assert_eq!(manifest, fs::read(dir.join("run/manifest.json")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["variant"], "merged");
    assert!(report["recovery"]["noisy_total"].as_u64().unwrap() > 0);
    let m: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!(m["seeds"]["seed"], 11);
    assert_eq!(m["config_hash"], report["config_hash"]);
    assert!(m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["path"] == "report.json"));

    ok(dir, &["run", "--config", "run.cfg", "--set", "variant=original", "--set", "out=orig"]);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("orig/report.json")).unwrap()).unwrap();
    let status = |name: &str| {
        report["stages"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["stage"] == name)
            .unwrap()["status"]
            .clone()
    };
    assert_eq!(status("edit"), "skipped");
    assert_eq!(status("masks"), "skipped");
    assert_eq!(status("eval"), "done");
    assert!(!dir.join("orig/masks.csv").exists());

    ok(dir, &["run", "--config", "run.cfg", "--set", "variant=random_edit", "--set", "out=rand"]);
    assert!(dir.join("rand/random_edit.feat").is_file());
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_small(dir);
    fs::write(dir.join("run.cfg"), CONFIG.replace("seed = 11\n", "")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_featedit"))
        .current_dir(dir)
        .env("FEAT_EDIT_SEED", "77")
        .args(["run", "--config", "run.cfg", "--set", "variant=edited_only"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seeds"]["seed"], 77);
    assert_eq!(m["seeds"]["source"], "environment");
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // config error
    assert_eq!(featedit(dir, &["run", "--set", "variant=bogus"]).status.code(), Some(2));
    assert_eq!(featedit(dir, &["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        featedit(dir, &["edit", "x.feat", "--out", "y.feat", "--intra-frac", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(featedit(dir, &["stats", "missing.feat", "--out", "s.csv"]).status.code(), Some(3));
    // data error
    fs::write(dir.join("bad.feat"), b"NOPE").unwrap();
    let out = featedit(dir, &["stats", "bad.feat", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.feat"));
    fs::write(dir.join("d.csv"), "image_id,class_id,score,x1,y1,x2,y2\n1,0,zz,0,0,1,1\n").unwrap();
    let out = featedit(dir, &["nms", "d.csv", "--out", "k.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("d.csv:2"));
    // numerical failure: constant features leave no variance to rank
    let mut d = Dataset::new(2, 3, 2).unwrap();
    for j in 0..4u32 {
        let bbox = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        d.push(LabeledSample::new(FeatureMap::zeros(3, 2), j % 2, bbox, j, false).unwrap())
            .unwrap();
    }
    feat::write_dataset(&d, dir.join("flat.feat")).unwrap();
    let out = featedit(dir, &["edit", "flat.feat", "--out", "e.feat"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
