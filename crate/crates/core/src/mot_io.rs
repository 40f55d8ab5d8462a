//! MOT Challenge file IO: detection, ground-truth, result and warp
//! files, plus the flat JSON run configuration.
//!
//! All coordinates stay `f64` end to end; rounding happens only when
//! formatting output rows (two decimals).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::geometry::BBox;
use crate::motion::Warp;
use crate::sim::SimulatorConfig;
use crate::tracker::{Detection, FrameResult, TrackerConfig};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{file}:{line}: field `{field}`: {problem}")]
    Malformed {
        file: String,
        line: usize,
        field: &'static str,
        problem: String,
    },
    #[error("unknown config key `{key}` in {file}")]
    UnknownConfigKey { file: String, key: String },
    #[error("config key `{key}` in {file}: {problem}")]
    BadConfigValue {
        file: String,
        key: String,
        problem: String,
    },
    #[error("{file}: {problem}")]
    BadConfig { file: String, problem: String },
    #[error("failed to read {file}: {source}")]
    Read {
        file: String,
        source: std::io::Error,
    },
    #[error("failed to write {file}: {source}")]
    Write {
        file: String,
        source: std::io::Error,
    },
}

/// One ground-truth row: identity, box, evaluation flag, object class
/// and visible fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtRow {
    pub id: u32,
    pub bbox: BBox,
    pub flag: u8,
    pub class: i32,
    pub visibility: f64,
}

/// One parsed tracker-result row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub id: u64,
    pub bbox: BBox,
    pub score: f64,
}

struct RowReader<'a> {
    file: &'a str,
    line: usize,
    fields: Vec<&'a str>,
    cursor: usize,
}

impl<'a> RowReader<'a> {
    fn new(file: &'a str, line: usize, raw: &'a str, sep_comma: bool) -> Self {
        let fields: Vec<&str> = if sep_comma {
            raw.split(',').map(str::trim).collect()
        } else {
            raw.split_whitespace().collect()
        };
        Self {
            file,
            line,
            fields,
            cursor: 0,
        }
    }

    fn err(&self, field: &'static str, problem: String) -> IoError {
        IoError::Malformed {
            file: self.file.to_string(),
            line: self.line,
            field,
            problem,
        }
    }

    fn take(&mut self, field: &'static str) -> Result<&'a str, IoError> {
        let v = self
            .fields
            .get(self.cursor)
            .copied()
            .ok_or_else(|| self.err(field, "missing".into()))?;
        self.cursor += 1;
        Ok(v)
    }

    fn f64(&mut self, field: &'static str) -> Result<f64, IoError> {
        let raw = self.take(field)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| self.err(field, format!("`{raw}` is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(field, format!("`{raw}` is not finite")));
        }
        Ok(v)
    }

    fn i64(&mut self, field: &'static str) -> Result<i64, IoError> {
        let raw = self.take(field)?;
        // tolerate float-formatted integers such as "1.0"
        if let Ok(v) = raw.parse::<i64>() {
            return Ok(v);
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| self.err(field, format!("`{raw}` is not an integer")))?;
        if v.fract() != 0.0 {
            return Err(self.err(field, format!("`{raw}` is not an integer")));
        }
        Ok(v as i64)
    }

    fn frame(&mut self) -> Result<u32, IoError> {
        let v = self.i64("frame")?;
        if v < 1 {
            return Err(self.err("frame", format!("frame index {v} must be >= 1")));
        }
        Ok(v as u32)
    }
}

fn read_lines(path: &Path) -> Result<(String, String), IoError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        file: file.clone(),
        source,
    })?;
    Ok((file, text))
}

/// Parse a MOT detection file (`frame,id,left,top,w,h,conf,x,y,z`).
/// Trailing placeholder fields may be omitted. Detections keep file
/// order within each frame.
pub fn parse_detections(
    path: &Path,
    image_height: f64,
) -> Result<BTreeMap<u32, Vec<Detection>>, IoError> {
    let (file, text) = read_lines(path)?;
    let mut out: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let mut r = RowReader::new(&file, idx + 1, raw, true);
        let frame = r.frame()?;
        let _id = r.i64("id")?;
        let left = r.f64("bb_left")?;
        let top = r.f64("bb_top")?;
        let w = r.f64("bb_width")?;
        let h = r.f64("bb_height")?;
        let conf = r.f64("conf")?;
        if w < 0.0 || h < 0.0 {
            return Err(r.err("bb_width", format!("negative box extent {w}x{h}")));
        }
        let bbox = BBox::from_tlwh(left, top, w, h);
        out.entry(frame)
            .or_default()
            .push(Detection::new(bbox, conf, image_height));
    }
    Ok(out)
}

/// Parse a MOT ground-truth file
/// (`frame,id,left,top,w,h,flag,class,visibility`).
pub fn parse_ground_truth(path: &Path) -> Result<BTreeMap<u32, Vec<GtRow>>, IoError> {
    let (file, text) = read_lines(path)?;
    let mut out: BTreeMap<u32, Vec<GtRow>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let mut r = RowReader::new(&file, idx + 1, raw, true);
        let frame = r.frame()?;
        let id = r.i64("id")?;
        if id < 1 {
            return Err(r.err("id", format!("ground-truth id {id} must be >= 1")));
        }
        let left = r.f64("bb_left")?;
        let top = r.f64("bb_top")?;
        let w = r.f64("bb_width")?;
        let h = r.f64("bb_height")?;
        let flag = r.i64("flag")?;
        if flag != 0 && flag != 1 {
            return Err(r.err(
                "flag",
                format!("evaluation flag must be 0 or 1, got {flag}"),
            ));
        }
        let class = r.i64("class")?;
        let visibility = r.f64("visibility")?;
        if !(0.0..=1.0).contains(&visibility) {
            return Err(r.err("visibility", format!("{visibility} outside [0,1]")));
        }
        out.entry(frame).or_default().push(GtRow {
            id: id as u32,
            bbox: BBox::from_tlwh(left, top, w, h),
            flag: flag as u8,
            class: class as i32,
            visibility,
        });
    }
    Ok(out)
}

/// Parse a result file written by [`write_results`].
pub fn parse_results(path: &Path) -> Result<BTreeMap<u32, Vec<ResultRow>>, IoError> {
    let (file, text) = read_lines(path)?;
    let mut out: BTreeMap<u32, Vec<ResultRow>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let mut r = RowReader::new(&file, idx + 1, raw, true);
        let frame = r.frame()?;
        let id = r.i64("id")?;
        if id < 1 {
            return Err(r.err("id", format!("track id {id} must be >= 1")));
        }
        let left = r.f64("bb_left")?;
        let top = r.f64("bb_top")?;
        let w = r.f64("bb_width")?;
        let h = r.f64("bb_height")?;
        let score = r.f64("score")?;
        out.entry(frame).or_default().push(ResultRow {
            id: id as u64,
            bbox: BBox::from_tlwh(left, top, w, h),
            score,
        });
    }
    Ok(out)
}

/// Render results in MOT format:
/// `frame,id,bb_left,bb_top,w,h,score,-1,-1,-1`, two decimals.
pub fn format_results(results: &[FrameResult]) -> String {
    let mut s = String::new();
    for fr in results {
        for o in &fr.outputs {
            let (x, y, w, h) = o.bbox.to_tlwh();
            writeln!(
                s,
                "{},{},{x:.2},{y:.2},{w:.2},{h:.2},{:.2},-1,-1,-1",
                fr.frame, o.id, o.score
            )
            .expect("string write");
        }
    }
    s
}

pub fn write_results(path: &Path, results: &[FrameResult]) -> Result<(), IoError> {
    write_text(path, &format_results(results))
}

/// Render ground truth rows in MOT format
/// (`frame,id,left,top,w,h,flag,class,visibility`).
pub fn format_ground_truth(gt: &BTreeMap<u32, Vec<GtRow>>) -> String {
    let mut s = String::new();
    for (frame, rows) in gt {
        for r in rows {
            let (x, y, w, h) = r.bbox.to_tlwh();
            writeln!(
                s,
                "{frame},{},{x:.2},{y:.2},{w:.2},{h:.2},{},{},{:.2}",
                r.id, r.flag, r.class, r.visibility
            )
            .expect("string write");
        }
    }
    s
}

pub fn write_ground_truth(path: &Path, gt: &BTreeMap<u32, Vec<GtRow>>) -> Result<(), IoError> {
    write_text(path, &format_ground_truth(gt))
}

/// Render detections in MOT format (`frame,-1,left,top,w,h,conf,-1,-1,-1`).
pub fn format_detections(dets: &BTreeMap<u32, Vec<Detection>>) -> String {
    let mut s = String::new();
    for (frame, rows) in dets {
        for d in rows {
            let (x, y, w, h) = d.bbox.to_tlwh();
            writeln!(
                s,
                "{frame},-1,{x:.2},{y:.2},{w:.2},{h:.2},{:.2},-1,-1,-1",
                d.score
            )
            .expect("string write");
        }
    }
    s
}

pub fn write_detections(path: &Path, dets: &BTreeMap<u32, Vec<Detection>>) -> Result<(), IoError> {
    write_text(path, &format_detections(dets))
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let file = path.display().to_string();
    let mut f = fs::File::create(path).map_err(|source| IoError::Write {
        file: file.clone(),
        source,
    })?;
    f.write_all(text.as_bytes())
        .map_err(|source| IoError::Write { file, source })
}

/// Parse a warp sidecar: whitespace-delimited
/// `frame a11 a12 a13 a21 a22 a23`, one row per frame. Frames absent
/// from the file default to the identity at lookup time.
pub fn parse_warps(path: &Path) -> Result<BTreeMap<u64, Warp>, IoError> {
    let (file, text) = read_lines(path)?;
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let mut r = RowReader::new(&file, idx + 1, raw, false);
        let frame = r.frame()? as u64;
        let mut coeffs = [0.0; 6];
        for (c, field) in coeffs
            .iter_mut()
            .zip(["a11", "a12", "a13", "a21", "a22", "a23"])
        {
            *c = r.f64(field)?;
        }
        if out.insert(frame, Warp::from_row_major(coeffs)).is_some() {
            return Err(IoError::Malformed {
                file: file.clone(),
                line: idx + 1,
                field: "frame",
                problem: format!("duplicate warp row for frame {frame}"),
            });
        }
    }
    Ok(out)
}

/// Tracker plus simulator settings loaded from one flat JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub simulator: SimulatorConfig,
}

/// Load a flat JSON config. Every key must name a tracker or simulator
/// field; unknown keys are errors so typos cannot silently fall back to
/// defaults. `image_height` feeds both components.
pub fn load_config(path: &Path) -> Result<RunConfig, IoError> {
    let (file, text) = read_lines(path)?;
    parse_config(&file, &text)
}

fn parse_config(file: &str, text: &str) -> Result<RunConfig, IoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IoError::BadConfig {
        file: file.to_string(),
        problem: format!("not valid JSON: {e}"),
    })?;
    let obj = value.as_object().ok_or_else(|| IoError::BadConfig {
        file: file.to_string(),
        problem: "top level must be a JSON object".to_string(),
    })?;

    let mut cfg = RunConfig::default();
    for (key, val) in obj {
        apply_key(file, &mut cfg, key, val)?;
    }
    cfg.tracker.validate().map_err(|e| IoError::BadConfig {
        file: file.to_string(),
        problem: e.to_string(),
    })?;
    cfg.simulator.validate().map_err(|e| IoError::BadConfig {
        file: file.to_string(),
        problem: e.to_string(),
    })?;
    Ok(cfg)
}

fn apply_key(file: &str, cfg: &mut RunConfig, key: &str, val: &Value) -> Result<(), IoError> {
    let bad = |problem: String| IoError::BadConfigValue {
        file: file.to_string(),
        key: key.to_string(),
        problem,
    };
    let as_f64 = |v: &Value| {
        v.as_f64()
            .ok_or_else(|| bad(format!("expected a number, got {v}")))
    };
    let as_usize = |v: &Value| {
        v.as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| bad(format!("expected a nonnegative integer, got {v}")))
    };
    let as_bool = |v: &Value| {
        v.as_bool()
            .ok_or_else(|| bad(format!("expected a boolean, got {v}")))
    };

    let t = &mut cfg.tracker;
    let s = &mut cfg.simulator;
    match key {
        "tau_high" => t.tau_high = as_f64(val)?,
        "tau_low" => t.tau_low = as_f64(val)?,
        "k_high" => t.k_high = as_usize(val)?,
        "k_low" => t.k_low = as_usize(val)?,
        "match_thresh_high" => t.match_thresh_high = as_f64(val)?,
        "match_thresh_low" => t.match_thresh_low = as_f64(val)?,
        "match_thresh_unconfirmed" => t.match_thresh_unconfirmed = as_f64(val)?,
        "new_track_thresh" => t.new_track_thresh = as_f64(val)?,
        "max_lost" => t.max_lost = as_usize(val)? as u32,
        "image_height" => {
            t.image_height = as_f64(val)?;
            s.image_height = t.image_height;
        }
        "use_warp" => t.use_warp = as_bool(val)?,
        "shared_depth_range" => t.shared_depth_range = as_bool(val)?,
        "n_agents" => s.n_agents = as_usize(val)?,
        "n_frames" => s.n_frames = as_usize(val)?,
        "image_width" => s.image_width = as_f64(val)?,
        "camera_height" => s.camera_height = as_f64(val)?,
        "camera_tilt_deg" => s.camera_tilt_deg = as_f64(val)?,
        "speed_min" => s.speed_min = as_f64(val)?,
        "speed_max" => s.speed_max = as_f64(val)?,
        "agent_height" => s.agent_height = as_f64(val)?,
        "base_score" => s.base_score = as_f64(val)?,
        "occlusion_score_slope" => s.occlusion_score_slope = as_f64(val)?,
        "miss_visibility_threshold" => s.miss_visibility_threshold = as_f64(val)?,
        "miss_probability" => s.miss_probability = as_f64(val)?,
        "bbox_jitter_std" => s.bbox_jitter_std = as_f64(val)?,
        "seed" => {
            s.seed = val
                .as_u64()
                .ok_or_else(|| bad(format!("expected a nonnegative integer, got {val}")))?
        }
        _ => {
            return Err(IoError::UnknownConfigKey {
                file: file.to_string(),
                key: key.to_string(),
            })
        }
    }
    Ok(())
}
