//! Deterministic synthetic crowd scenes: ground-plane agents under a
//! tilted pinhole camera, image-space occlusion, and occlusion-driven
//! detection scores and misses. Produces ground truth and detections in
//! the standard file formats so tracker runs can be scored end to end.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::mot_io::{self, GtRow, IoError};
use crate::tracker::Detection;

const VERTICAL_FOV_DEG: f64 = 55.0;
const FRAMES_PER_SECOND: f64 = 25.0;
/// Body width as a fraction of body height.
const BODY_WIDTH_RATIO: f64 = 0.24;
const SCORE_NOISE_STD: f64 = 0.05;
/// Agents redraw their heading roughly this often (frames).
const TURN_INTERVAL: (u32, u32) = (30, 50);
/// Box-regression bias under occlusion: a detection drifts laterally
/// toward its dominant occluder by this fraction of the horizontal
/// center offset per unit of covered area, the way full-body regressors
/// snap onto the visible evidence in front.
const OCCLUSION_PULL: f64 = 0.5;
/// Occlusion truncation: the hidden lower body is not regressed, so the
/// detected bottom edge rises toward the occluder's top edge by this
/// fraction of the hidden extent per unit of covered area. Heads stay
/// visible, so the top edge is unaffected.
const OCCLUSION_TRUNCATION: f64 = 0.35;
/// Crowds flow: most walkers move along the camera axis (toward or away
/// from the camera) with some angular spread, the rest wander freely.
/// This produces the long-lived files of mutually occluding walkers
/// that dense street scenes show.
const FLOW_FRACTION: f64 = 0.75;
const FLOW_SPREAD: f64 = 0.35;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("agent behind camera (forward depth {0:.3} m)")]
    BehindCamera(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorConfig {
    pub n_agents: usize,
    pub n_frames: usize,
    pub image_width: f64,
    pub image_height: f64,
    /// Camera height above the ground plane, meters.
    pub camera_height: f64,
    /// Downward camera tilt from the horizon, degrees.
    pub camera_tilt_deg: f64,
    /// Walking speed range, m/s.
    pub speed_min: f64,
    pub speed_max: f64,
    pub agent_height: f64,
    pub base_score: f64,
    /// Score penalty per unit of occluded fraction.
    pub occlusion_score_slope: f64,
    /// Below this visibility a detection may be dropped entirely.
    pub miss_visibility_threshold: f64,
    pub miss_probability: f64,
    pub bbox_jitter_std: f64,
    pub seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            n_agents: 12,
            n_frames: 100,
            image_width: 1920.0,
            image_height: 1080.0,
            camera_height: 6.0,
            camera_tilt_deg: 25.0,
            speed_min: 0.5,
            speed_max: 1.5,
            agent_height: 1.7,
            base_score: 0.95,
            occlusion_score_slope: 0.8,
            miss_visibility_threshold: 0.15,
            miss_probability: 0.5,
            bbox_jitter_std: 1.0,
            seed: 1,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_agents == 0 || self.n_frames == 0 {
            return err("n_agents and n_frames must be at least 1".into());
        }
        if self.image_width.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || self.image_height.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        {
            return err(format!(
                "image size {}x{} must be positive",
                self.image_width, self.image_height
            ));
        }
        for (name, v) in [
            ("base_score", self.base_score),
            ("miss_visibility_threshold", self.miss_visibility_threshold),
            ("miss_probability", self.miss_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        if self.occlusion_score_slope < 0.0 || self.bbox_jitter_std < 0.0 {
            return err("occlusion_score_slope and bbox_jitter_std must be nonnegative".into());
        }
        if self.speed_min.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || self.speed_min > self.speed_max
        {
            return err(format!(
                "speed range [{}, {}] must be positive and ordered",
                self.speed_min, self.speed_max
            ));
        }
        if self.agent_height.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return err(format!(
                "agent_height must be positive, got {}",
                self.agent_height
            ));
        }
        if self.camera_height <= self.agent_height {
            return err(format!(
                "camera_height {} must exceed agent_height {}",
                self.camera_height, self.agent_height
            ));
        }
        if !(0.5..85.0).contains(&self.camera_tilt_deg) {
            return err(format!(
                "camera_tilt_deg {} outside (0.5, 85)",
                self.camera_tilt_deg
            ));
        }
        // the geometry must admit a spawn band, and an agent at the
        // near edge of that band must fit inside the frame
        let camera = Camera::new(self);
        let band = camera.spawn_band(self)?;
        let near_box = project_agent(0.0, band.y_near, self.agent_height, &camera)?;
        if near_box.height() > self.image_height || near_box.width() > self.image_width {
            return err(format!(
                "agent at nearest spawn distance projects to {:.0}x{:.0}, larger than the {}x{} frame",
                near_box.width(),
                near_box.height(),
                self.image_width,
                self.image_height
            ));
        }
        Ok(())
    }
}

/// Pinhole camera above a flat ground plane, pitched down by the tilt
/// angle. Ground coordinates: x lateral, y forward from the camera base.
#[derive(Debug, Clone, Copy)]
pub struct Camera {
    focal: f64,
    cx: f64,
    cy: f64,
    height: f64,
    sin_t: f64,
    cos_t: f64,
}

/// The ground rectangle agents wander in, derived from what the camera
/// actually sees.
#[derive(Debug, Clone, Copy)]
struct SpawnBand {
    y_near: f64,
    y_far: f64,
    x_lim: f64,
}

impl Camera {
    pub fn new(cfg: &SimulatorConfig) -> Self {
        let fov = VERTICAL_FOV_DEG.to_radians();
        let tilt = cfg.camera_tilt_deg.to_radians();
        Self {
            focal: (cfg.image_height / 2.0) / (fov / 2.0).tan(),
            cx: cfg.image_width / 2.0,
            cy: cfg.image_height / 2.0,
            height: cfg.camera_height,
            sin_t: tilt.sin(),
            cos_t: tilt.cos(),
        }
    }

    /// Camera-frame coordinates (right, down, forward) of a world point.
    fn cam_coords(&self, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
        let dz = z - self.height;
        let right = x;
        let down = -y * self.sin_t - dz * self.cos_t;
        let forward = y * self.cos_t - dz * self.sin_t;
        (right, down, forward)
    }

    /// Image position of a world point; `None` when it sits at or
    /// behind the camera plane.
    fn project(&self, x: f64, y: f64, z: f64) -> Option<(f64, f64)> {
        let (right, down, forward) = self.cam_coords(x, y, z);
        if forward <= 1e-6 {
            return None;
        }
        Some((
            self.cx + self.focal * right / forward,
            self.cy + self.focal * down / forward,
        ))
    }

    /// Forward ground distance whose foot point lands on image row `v`;
    /// `None` for rows at or above the horizon.
    fn ground_from_row(&self, v: f64) -> Option<f64> {
        let dv = (v - self.cy) / self.focal;
        let denom = self.sin_t + self.cos_t * dv;
        if denom <= 1e-9 {
            return None;
        }
        let t = self.height / denom;
        Some(t * (self.cos_t - self.sin_t * dv))
    }

    fn spawn_band(&self, cfg: &SimulatorConfig) -> Result<SpawnBand, SimError> {
        let horizon = self.cy - self.focal * (self.sin_t / self.cos_t);
        let v_near = 0.95 * cfg.image_height;
        let v_far = horizon + 0.30 * (v_near - horizon);
        let (Some(y_near), Some(y_far)) =
            (self.ground_from_row(v_near), self.ground_from_row(v_far))
        else {
            return Err(SimError::InvalidConfig(
                "camera does not see the ground in the lower image region".into(),
            ));
        };
        if y_near.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || y_far <= y_near {
            return Err(SimError::InvalidConfig(format!(
                "degenerate spawn band [{y_near:.2}, {y_far:.2}] m"
            )));
        }
        let forward_near = y_near * self.cos_t + self.height * self.sin_t;
        let x_lim = 0.45 * cfg.image_width * forward_near / self.focal;
        Ok(SpawnBand {
            y_near,
            y_far,
            x_lim,
        })
    }
}

/// Project a standing agent (a vertical segment plus body width) at
/// ground position `(x, y)` into the image.
pub fn project_agent(x: f64, y: f64, agent_height: f64, camera: &Camera) -> Result<BBox, SimError> {
    let (_, _, forward) = camera.cam_coords(x, y, 0.0);
    if forward <= 1e-6 {
        return Err(SimError::BehindCamera(y));
    }
    let (foot_u, foot_v) = camera.project(x, y, 0.0).ok_or(SimError::BehindCamera(y))?;
    let (_, head_v) = camera
        .project(x, y, agent_height)
        .ok_or(SimError::BehindCamera(y))?;
    let half_w = camera.focal * (BODY_WIDTH_RATIO * agent_height / 2.0) / forward;
    Ok(BBox::new(foot_u - half_w, head_v, foot_u + half_w, foot_v))
}

/// Fraction of `target` covered by the union of `occluders`.
fn covered_fraction(target: &BBox, occluders: &[BBox]) -> f64 {
    let area = target.area();
    if area <= 0.0 || occluders.is_empty() {
        return 0.0;
    }
    let clipped: Vec<BBox> = occluders
        .iter()
        .filter_map(|o| {
            let x1 = o.x1.max(target.x1);
            let y1 = o.y1.max(target.y1);
            let x2 = o.x2.min(target.x2);
            let y2 = o.y2.min(target.y2);
            (x2 > x1 && y2 > y1).then(|| BBox::new(x1, y1, x2, y2))
        })
        .collect();
    if clipped.is_empty() {
        return 0.0;
    }
    // union area by x-sweep with merged y-intervals per strip
    let mut xs: Vec<f64> = clipped.iter().flat_map(|b| [b.x1, b.x2]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let mut union = 0.0;
    for strip in xs.windows(2) {
        let (x1, x2) = (strip[0], strip[1]);
        if x2 <= x1 {
            continue;
        }
        let mid = 0.5 * (x1 + x2);
        let mut intervals: Vec<(f64, f64)> = clipped
            .iter()
            .filter(|b| b.x1 <= mid && mid < b.x2)
            .map(|b| (b.y1, b.y2))
            .collect();
        intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut covered = 0.0;
        let mut open: Option<(f64, f64)> = None;
        for (y1, y2) in intervals {
            match open {
                Some((lo, hi)) if y1 <= hi => open = Some((lo, hi.max(y2))),
                Some((lo, hi)) => {
                    covered += hi - lo;
                    open = Some((y1, y2));
                    let _ = lo;
                }
                None => open = Some((y1, y2)),
            }
        }
        if let Some((lo, hi)) = open {
            covered += hi - lo;
        }
        union += (x2 - x1) * covered;
    }
    (union / area).clamp(0.0, 1.0)
}

/// Per-frame ground truth plus detections for one simulated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub ground_truth: BTreeMap<u32, Vec<GtRow>>,
    pub detections: BTreeMap<u32, Vec<Detection>>,
}

#[derive(Debug, Clone)]
struct Agent {
    id: u32,
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
    frames_to_turn: u32,
}

fn wrap(v: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    let mut out = (v - lo) % span;
    if out < 0.0 {
        out += span;
    }
    lo + out
}

fn sample_heading<R: Rng>(rng: &mut R) -> f64 {
    let toss: f64 = rng.random_range(0.0..1.0);
    if toss < FLOW_FRACTION {
        let away: f64 = rng.random_range(0.0..1.0);
        let base = if away < 0.5 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        base + rng.random_range(-FLOW_SPREAD..FLOW_SPREAD)
    } else {
        rng.random_range(0.0..std::f64::consts::TAU)
    }
}

/// Run the simulation. Fully determined by the config (seed included).
pub fn generate(cfg: &SimulatorConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let camera = Camera::new(cfg);
    let band = camera.spawn_band(cfg)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let score_noise = Normal::new(0.0, SCORE_NOISE_STD).expect("constant std");
    let jitter = Normal::new(0.0, cfg.bbox_jitter_std.max(1e-12)).expect("validated std");

    let mut agents: Vec<Agent> = (0..cfg.n_agents)
        .map(|i| Agent {
            id: i as u32 + 1,
            x: rng.random_range(-band.x_lim..band.x_lim),
            y: rng.random_range(band.y_near..band.y_far),
            heading: sample_heading(&mut rng),
            speed: rng.random_range(cfg.speed_min..=cfg.speed_max),
            frames_to_turn: rng.random_range(TURN_INTERVAL.0..=TURN_INTERVAL.1),
        })
        .collect();

    let mut ground_truth = BTreeMap::new();
    let mut detections = BTreeMap::new();

    for frame in 1..=cfg.n_frames as u32 {
        // move agents; identity survives wrap-around re-entry
        for a in agents.iter_mut() {
            if a.frames_to_turn == 0 {
                a.heading = sample_heading(&mut rng);
                a.speed = rng.random_range(cfg.speed_min..=cfg.speed_max);
                a.frames_to_turn = rng.random_range(TURN_INTERVAL.0..=TURN_INTERVAL.1);
            }
            a.frames_to_turn -= 1;
            let step = a.speed / FRAMES_PER_SECOND;
            a.x = wrap(a.x + step * a.heading.cos(), -band.x_lim, band.x_lim);
            a.y = wrap(a.y + step * a.heading.sin(), band.y_near, band.y_far);
        }

        let boxes: Vec<BBox> = agents
            .iter()
            .map(|a| project_agent(a.x, a.y, cfg.agent_height, &camera))
            .collect::<Result<_, _>>()?;

        let mut gt_rows = Vec::with_capacity(agents.len());
        let mut det_rows = Vec::new();
        for (i, a) in agents.iter().enumerate() {
            // nearer agents (strictly smaller forward distance) occlude this one
            let occluders: Vec<BBox> = agents
                .iter()
                .enumerate()
                .filter(|(j, other)| *j != i && other.y < a.y)
                .map(|(j, _)| boxes[j])
                .collect();
            let visibility = 1.0 - covered_fraction(&boxes[i], &occluders);
            gt_rows.push(GtRow {
                id: a.id,
                bbox: boxes[i],
                flag: 1,
                class: 1,
                visibility,
            });

            // fixed number of draws per agent per frame
            let miss_draw: f64 = rng.random_range(0.0..1.0);
            let noise = score_noise.sample(&mut rng);
            let dx1 = jitter.sample(&mut rng);
            let dy1 = jitter.sample(&mut rng);
            let dx2 = jitter.sample(&mut rng);
            let dy2 = jitter.sample(&mut rng);

            if visibility < cfg.miss_visibility_threshold && miss_draw < cfg.miss_probability {
                continue;
            }
            let score = (cfg.base_score - cfg.occlusion_score_slope * (1.0 - visibility) + noise)
                .clamp(0.0, 1.0);

            // regression bias: the box snaps onto the visible evidence.
            // Laterally it drifts toward the dominant occluder; at the
            // bottom it truncates toward that occluder's top edge, since
            // the hidden lower body is guesswork.
            let b = &boxes[i];
            let mut sx = 0.0;
            let mut cut = 0.0;
            if visibility < 1.0 {
                let dominant = occluders
                    .iter()
                    .max_by(|p, q| {
                        covered_fraction(b, std::slice::from_ref(p))
                            .partial_cmp(&covered_fraction(b, std::slice::from_ref(q)))
                            .unwrap()
                    })
                    .copied();
                if let Some(occ) = dominant {
                    let (bc_x, _, _, _) = b.to_cxcyah();
                    let (oc_x, _, _, _) = occ.to_cxcyah();
                    let covered = 1.0 - visibility;
                    sx = OCCLUSION_PULL * covered * (oc_x - bc_x);
                    let hidden = (b.y2 - occ.y1.max(b.y1)).max(0.0);
                    cut = OCCLUSION_TRUNCATION * covered * hidden;
                }
            }
            let (x1, y1) = (b.x1 + sx + dx1, b.y1 + dy1);
            let jittered = BBox::new(
                x1,
                y1,
                (b.x2 + sx + dx2).max(x1 + 0.5),
                (b.y2 - cut + dy2).max(y1 + 0.5),
            );
            det_rows.push(Detection::new(jittered, score, cfg.image_height));
        }
        ground_truth.insert(frame, gt_rows);
        detections.insert(frame, det_rows);
    }

    Ok(SimOutput {
        ground_truth,
        detections,
    })
}

/// Write one generated sequence as `gt.txt`, `det.txt` and a JSON
/// manifest carrying the exact config (seed included).
pub fn write_sequence(dir: &Path, cfg: &SimulatorConfig, out: &SimOutput) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Write {
        file: dir.display().to_string(),
        source,
    })?;
    mot_io::write_ground_truth(&dir.join("gt.txt"), &out.ground_truth)?;
    mot_io::write_detections(&dir.join("det.txt"), &out.detections)?;
    let manifest = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(dir.join("manifest.json"), manifest).map_err(|source| IoError::Write {
        file: dir.join("manifest.json").display().to_string(),
        source,
    })?;
    Ok(())
}
