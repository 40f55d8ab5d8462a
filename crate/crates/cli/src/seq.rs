//! Sequence directory discovery: detection files, declared lengths and
//! image geometry from either a simulator manifest or a `seqinfo.ini`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dcmot::tracker::Detection;

/// What a sequence directory declares about itself.
#[derive(Debug, Default, Clone, Copy)]
pub struct SeqInfo {
    pub length: Option<usize>,
    pub image_width: Option<f64>,
    pub image_height: Option<f64>,
}

pub fn det_file(seq: &Path) -> Result<PathBuf> {
    for candidate in [seq.join("det").join("det.txt"), seq.join("det.txt")] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    bail!(
        "no detection file in {}: expected det/det.txt or det.txt",
        seq.display()
    )
}

pub fn gt_file(seq: &Path) -> Result<PathBuf> {
    for candidate in [seq.join("gt").join("gt.txt"), seq.join("gt.txt")] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    bail!(
        "no ground-truth file in {}: expected gt/gt.txt or gt.txt",
        seq.display()
    )
}

/// Read sequence metadata from `manifest.json` (simulator output) or
/// `seqinfo.ini` (MOT layout), whichever exists.
pub fn seq_info(seq: &Path) -> Result<SeqInfo> {
    let manifest = seq.join("manifest.json");
    if manifest.is_file() {
        let text = std::fs::read_to_string(&manifest)
            .with_context(|| format!("reading {}", manifest.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", manifest.display()))?;
        return Ok(SeqInfo {
            length: v
                .get("n_frames")
                .and_then(|x| x.as_u64())
                .map(|x| x as usize),
            image_width: v.get("image_width").and_then(|x| x.as_f64()),
            image_height: v.get("image_height").and_then(|x| x.as_f64()),
        });
    }
    let ini = seq.join("seqinfo.ini");
    if ini.is_file() {
        let text =
            std::fs::read_to_string(&ini).with_context(|| format!("reading {}", ini.display()))?;
        let kv: HashMap<String, String> = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_lowercase(), v.trim().to_string()))
            .collect();
        let get = |key: &str| kv.get(key).and_then(|v| v.parse::<f64>().ok());
        return Ok(SeqInfo {
            length: get("seqlength").map(|v| v as usize),
            image_width: get("imwidth"),
            image_height: get("imheight"),
        });
    }
    Ok(SeqInfo::default())
}

/// Load detections as one list per frame, frames 1..=length. Frames
/// missing from the file become empty detection lists.
pub fn load_detections(seq: &Path, image_height: f64) -> Result<(Vec<Vec<Detection>>, PathBuf)> {
    let path = det_file(seq)?;
    let by_frame = dcmot::mot_io::parse_detections(&path, image_height)?;
    let declared = seq_info(seq)?.length;
    let max_frame = by_frame.keys().next_back().copied().unwrap_or(0) as usize;
    let length = declared.unwrap_or(max_frame).max(max_frame);
    let dets = (1..=length as u32)
        .map(|f| by_frame.get(&f).cloned().unwrap_or_default())
        .collect();
    Ok((dets, path))
}

/// Sorted list of sequence subdirectories of a set directory.
pub fn sequence_dirs(set: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(set)
        .with_context(|| format!("reading {}", set.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("{} contains no sequence directories", set.display());
    }
    Ok(dirs)
}
