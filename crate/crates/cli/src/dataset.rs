//! Dataset layout: `<class><k>.off` (or `.vert`/`.tri`) files in one directory.
//!
//! Each class's lowest `k` is the reference pose; every other pose of the class
//! is paired with it. Ground truth for a target lives next to it as
//! `<class><k>.gt`; without one, identical vertex counts imply the identity map.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub name: String,
    pub reference: PathBuf,
    pub target: PathBuf,
    pub ground_truth: Option<PathBuf>,
}

fn split_pose(stem: &str) -> Option<(&str, u64)> {
    let digits = stem.len() - stem.bytes().rev().take_while(u8::is_ascii_digit).count();
    let (class, k) = stem.split_at(digits);
    if class.is_empty() || k.is_empty() {
        return None;
    }
    Some((class, k.parse().ok()?))
}

pub fn discover(dir: &Path) -> anyhow::Result<Vec<Pair>> {
    let mut classes: BTreeMap<String, BTreeMap<u64, PathBuf>> = BTreeMap::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading dataset {}", dir.display()))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("off" | "vert")) {
            continue;
        }
        let Some((class, k)) = path.file_stem().and_then(|s| s.to_str()).and_then(split_pose) else {
            continue;
        };
        classes.entry(class.to_string()).or_default().entry(k).or_insert(path);
    }
    let mut pairs = Vec::new();
    for (class, poses) in classes {
        let mut poses = poses.into_iter();
        let Some((k0, reference)) = poses.next() else { continue };
        for (k, target) in poses {
            let gt = target.with_extension("gt");
            pairs.push(Pair {
                name: format!("{class}{k0}-{class}{k}"),
                reference: reference.clone(),
                target,
                ground_truth: gt.exists().then_some(gt),
            });
        }
    }
    if pairs.is_empty() {
        anyhow::bail!(crate::DataError(format!("no mesh pairs found in {}", dir.display())));
    }
    Ok(pairs)
}
