//! Run configuration: a flat `key = value` file plus `key=value` overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! repeated keys within one file are errors. Paths are taken as written,
//! relative to the working directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use featedit_core::{ApMode, EditConfig, EvalConfig, NegativeEdit, SvmConfig};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable consulted when no seed is configured.
pub const SEED_ENV: &str = "FEAT_EDIT_SEED";

/// Training-set variants of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Unedited features only.
    Original,
    /// Class-masked features only.
    EditedOnly,
    /// Original plus class-masked features.
    Merged,
    /// Original plus randomly zeroed features.
    RandomEdit,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Original,
        Variant::EditedOnly,
        Variant::Merged,
        Variant::RandomEdit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::EditedOnly => "edited_only",
            Variant::Merged => "merged",
            Variant::RandomEdit => "random_edit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

/// Where the resolved seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    Config,
    Environment,
    Default,
}

impl SeedSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SeedSource::Config => "config",
            SeedSource::Environment => "environment",
            SeedSource::Default => "default",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: PathBuf,
    pub test: PathBuf,
    pub train_gt: PathBuf,
    pub test_gt: PathBuf,
    /// Planted-role sidecar from `synth`; enables recovery statistics.
    pub roles: Option<PathBuf>,
    pub out: PathBuf,
    pub variant: Variant,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub edit: EditConfig,
    pub svm: SvmConfig,
    pub eval: EvalConfig,
    pub negative_edit: NegativeEdit,
    pub ridge_lambda: f64,
    /// Zeros-to-ones ratio of the random edit.
    pub random_ratio: f64,
}

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;
pub const DEFAULT_RANDOM_RATIO: f64 = 0.5;

const KEYS: &[&str] = &[
    "train",
    "test",
    "train_gt",
    "test_gt",
    "roles",
    "out",
    "variant",
    "seed",
    "intra_frac",
    "inter_frac",
    "negative_edit",
    "random_ratio",
    "reg_lambda",
    "epochs",
    "tolerance",
    "positive_weight",
    "ridge_lambda",
    "nms_iou",
    "match_iou",
    "ap_mode",
];

/// Raw key/value pairs in the order they were set; later entries win.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource {
    entries: Vec<(String, String)>,
}

impl ConfigSource {
    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut src = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line)
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            if src.entries.iter().any(|(e, _)| e == k) {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
            src.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(src)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = split_pair(pair)
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not `key=value`")))?;
        self.set(k, v).map_err(Error::Config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        if !KEYS.contains(&key) {
            return Err(format!("unknown key `{key}`"));
        }
        self.entries.push((key.to_string(), value.to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Resolves every field, falling back to defaults and, for the seed, to
    /// `env_seed` (the value of [`SEED_ENV`], if set).
    pub fn resolve(&self, env_seed: Option<&str>) -> Result<RunConfig> {
        let path = |k: &str| -> Result<PathBuf> {
            self.get(k)
                .map(PathBuf::from)
                .ok_or_else(|| Error::Config(format!("missing required key `{k}`")))
        };
        let (seed, seed_source) = match (self.get("seed"), env_seed) {
            (Some(s), _) => (parse_value::<u64>("seed", s)?, SeedSource::Config),
            (None, Some(s)) => (parse_value::<u64>(SEED_ENV, s)?, SeedSource::Environment),
            (None, None) => (0, SeedSource::Default),
        };
        let num = |k: &str, default: f64| -> Result<f64> {
            self.get(k).map_or(Ok(default), |v| parse_value(k, v))
        };
        let variant = match self.get("variant") {
            None => Variant::Merged,
            Some(v) => Variant::parse(v).ok_or_else(|| {
                Error::Config(format!(
                    "variant `{v}`: expected original, edited_only, merged or random_edit"
                ))
            })?,
        };
        let negative_edit = match self.get("negative_edit") {
            None => NegativeEdit::default(),
            Some(v) => NegativeEdit::parse(v).ok_or_else(|| {
                Error::Config(format!(
                    "negative_edit `{v}`: expected classifier-class, own-class or none"
                ))
            })?,
        };
        let ap_mode = match self.get("ap_mode") {
            None => ApMode::default(),
            Some(v) => ApMode::parse(v).ok_or_else(|| {
                Error::Config(format!("ap_mode `{v}`: expected eleven_point or continuous"))
            })?,
        };
        let de = EditConfig::default();
        let ds = SvmConfig::default();
        let dv = EvalConfig::default();
        let epochs = match self.get("epochs") {
            None => ds.epochs,
            Some(v) => parse_value("epochs", v)?,
        };
        let cfg = RunConfig {
            train: path("train")?,
            test: path("test")?,
            train_gt: path("train_gt")?,
            test_gt: path("test_gt")?,
            roles: self.get("roles").map(PathBuf::from),
            out: path("out")?,
            variant,
            seed,
            seed_source,
            edit: EditConfig {
                intra_frac: num("intra_frac", de.intra_frac)?,
                inter_frac: num("inter_frac", de.inter_frac)?,
                seed,
            },
            svm: SvmConfig {
                reg_lambda: num("reg_lambda", ds.reg_lambda)?,
                epochs,
                seed,
                tolerance: num("tolerance", ds.tolerance)?,
                positive_weight: num("positive_weight", ds.positive_weight)?,
            },
            eval: EvalConfig {
                nms_iou: num("nms_iou", dv.nms_iou)?,
                match_iou: num("match_iou", dv.match_iou)?,
                ap_mode,
            },
            negative_edit,
            ridge_lambda: num("ridge_lambda", DEFAULT_RIDGE_LAMBDA)?,
            random_ratio: num("random_ratio", DEFAULT_RANDOM_RATIO)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then_some((k, v))
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: featedit_core::Error| Error::Config(e.to_string());
        self.edit.validate().map_err(wrap)?;
        self.svm.validate().map_err(wrap)?;
        self.eval.validate().map_err(wrap)?;
        if !(self.ridge_lambda.is_finite() && self.ridge_lambda > 0.0) {
            return Err(Error::Config("ridge_lambda must be finite and > 0".into()));
        }
        if !(0.0..1.0).contains(&self.random_ratio) {
            return Err(Error::Config("random_ratio must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` text of every resolved field, in a fixed
    /// order. Floats use the shortest round-tripping form.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("train", self.train.display().to_string());
        kv("test", self.test.display().to_string());
        kv("train_gt", self.train_gt.display().to_string());
        kv("test_gt", self.test_gt.display().to_string());
        if let Some(r) = &self.roles {
            kv("roles", r.display().to_string());
        }
        kv("out", self.out.display().to_string());
        kv("variant", self.variant.as_str().into());
        kv("seed", self.seed.to_string());
        kv("intra_frac", self.edit.intra_frac.to_string());
        kv("inter_frac", self.edit.inter_frac.to_string());
        kv("negative_edit", self.negative_edit.as_str().into());
        kv("random_ratio", self.random_ratio.to_string());
        kv("reg_lambda", self.svm.reg_lambda.to_string());
        kv("epochs", self.svm.epochs.to_string());
        kv("tolerance", self.svm.tolerance.to_string());
        kv("positive_weight", self.svm.positive_weight.to_string());
        kv("ridge_lambda", self.ridge_lambda.to_string());
        kv("nms_iou", self.eval.nms_iou.to_string());
        kv("match_iou", self.eval.match_iou.to_string());
        kv("ap_mode", self.eval.ap_mode.as_str().into());
        s
    }

    /// SHA-256 of [`RunConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
