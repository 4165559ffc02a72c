//! Planted channel roles written next to synthetic data, and how well a set
//! of edit masks recovers them.

use std::path::Path;

use featedit_core::{EditMask, SynthSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// JSON sidecar describing the generator run behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    pub num_classes: usize,
    pub channels: usize,
    pub spatial: usize,
    pub n_per_class: usize,
    pub n_test_per_class: usize,
    pub seed: u64,
    pub shift: f64,
    pub friendly: Vec<Vec<usize>>,
    pub noisy: Vec<Vec<usize>>,
    pub flat: Vec<usize>,
}

impl From<&SynthSpec> for Roles {
    fn from(s: &SynthSpec) -> Self {
        Roles {
            num_classes: s.num_classes,
            channels: s.channels,
            spatial: s.spatial,
            n_per_class: s.n_per_class,
            n_test_per_class: s.n_test_per_class,
            seed: s.seed,
            shift: s.shift,
            friendly: s.friendly.clone(),
            noisy: s.noisy.clone(),
            flat: s.flat.clone(),
        }
    }
}

impl Roles {
    pub fn to_spec(&self) -> SynthSpec {
        SynthSpec {
            num_classes: self.num_classes,
            channels: self.channels,
            spatial: self.spatial,
            n_per_class: self.n_per_class,
            n_test_per_class: self.n_test_per_class,
            friendly: self.friendly.clone(),
            noisy: self.noisy.clone(),
            flat: self.flat.clone(),
            seed: self.seed,
            shift: self.shift,
        }
    }
}

pub fn write_roles(roles: &Roles, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(roles).expect("roles serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_roles(path: impl AsRef<Path>) -> Result<Roles> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let roles: Roles = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    roles.to_spec().validate()?;
    Ok(roles)
}

/// Pooled recovery counts over all classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recovery {
    /// Planted noisy channels that landed in the intra drop set.
    pub noisy_hit: usize,
    pub noisy_total: usize,
    /// Flat channels that landed in the inter drop set, counted per class.
    pub flat_hit: usize,
    pub flat_total: usize,
    /// Friendly channels dropped for any reason.
    pub friendly_dropped: usize,
    pub friendly_total: usize,
    pub noisy_recall: f64,
    pub flat_recall: f64,
    pub friendly_drop_fraction: f64,
}

fn ratio(hit: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Scores `masks` (one per class, in class order) against the planted roles.
pub fn recovery(roles: &Roles, masks: &[EditMask]) -> Result<Recovery> {
    if masks.len() != roles.num_classes {
        return Err(Error::Config(format!(
            "roles describe {} classes but {} masks were built",
            roles.num_classes,
            masks.len()
        )));
    }
    let (mut nh, mut nt, mut fh, mut ft, mut dh, mut dt) = (0, 0, 0, 0, 0, 0);
    for (c, m) in masks.iter().enumerate() {
        if m.channels() != roles.channels {
            return Err(Error::Config("mask width differs from the roles' channel count".into()));
        }
        nh += roles.noisy[c]
            .iter()
            .filter(|i| m.dropped_intra.binary_search(i).is_ok())
            .count();
        nt += roles.noisy[c].len();
        fh += roles
            .flat
            .iter()
            .filter(|i| m.dropped_inter.binary_search(i).is_ok())
            .count();
        ft += roles.flat.len();
        dh += roles.friendly[c].iter().filter(|&&i| !m.keep[i]).count();
        dt += roles.friendly[c].len();
    }
    Ok(Recovery {
        noisy_hit: nh,
        noisy_total: nt,
        flat_hit: fh,
        flat_total: ft,
        friendly_dropped: dh,
        friendly_total: dt,
        noisy_recall: ratio(nh, nt),
        flat_recall: ratio(fh, ft),
        friendly_drop_fraction: ratio(dh, dt),
    })
}
