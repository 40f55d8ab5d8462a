//! Per-frame two-stage association with track lifecycle management.
//!
//! High-score detections are matched against live tracks first, then
//! low-score detections recover tracks the first stage missed. Both
//! stages run the depth cascade; `byte_step` swaps the cascade for a
//! single full-matrix assignment and serves as the reduction oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::solve_lap;
use crate::dcm::dcm_with_options;
use crate::geometry::{iou_distance_matrix, pseudo_depth, BBox, PseudoDepth};
use crate::motion::{
    apply_warp, kf_initiate, kf_predict, kf_update, KalmanState, MotionError, Warp,
};

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("frame {got} is not after previous frame {prev}")]
    OutOfOrderFrame { got: u64, prev: u64 },
    #[error("invalid tracker config: {0}")]
    Config(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// One observed object in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub pseudo_depth: PseudoDepth,
}

impl Detection {
    pub fn new(bbox: BBox, score: f64, image_height: f64) -> Self {
        Self {
            bbox,
            score,
            pseudo_depth: pseudo_depth(&bbox, image_height),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackState {
    Tentative,
    Tracked,
    Lost,
    Removed,
}

/// One hypothesized object over time.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub kalman: KalmanState,
    pub score: f64,
    pub pseudo_depth: PseudoDepth,
    pub frames_since_update: u32,
    pub start_frame: u64,
    pub last_frame: u64,
}

impl Track {
    fn transition(&mut self, next: TrackState) {
        use TrackState::*;
        let legal = matches!(
            (self.state, next),
            (Tentative, Tracked)
                | (Tentative, Removed)
                | (Tracked, Tracked)
                | (Tracked, Lost)
                | (Lost, Tracked)
                | (Lost, Removed)
        );
        debug_assert!(
            legal,
            "illegal transition {:?} -> {next:?} for track {}",
            self.state, self.id
        );
        self.state = next;
    }
}

/// Tracker settings. Score thresholds 0.6/0.1 with one depth level for
/// the high stage and eight for the low stage are the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub tau_high: f64,
    pub tau_low: f64,
    pub k_high: usize,
    pub k_low: usize,
    pub match_thresh_high: f64,
    pub match_thresh_low: f64,
    pub match_thresh_unconfirmed: f64,
    pub new_track_thresh: f64,
    pub max_lost: u32,
    pub image_height: f64,
    pub use_warp: bool,
    pub shared_depth_range: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            tau_high: 0.6,
            tau_low: 0.1,
            k_high: 1,
            k_low: 8,
            match_thresh_high: 0.8,
            match_thresh_low: 0.5,
            match_thresh_unconfirmed: 0.7,
            new_track_thresh: 0.7,
            max_lost: 30,
            image_height: 1080.0,
            use_warp: false,
            shared_depth_range: false,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        let err = |m: String| Err(TrackError::Config(m));
        if !(0.0..=1.0).contains(&self.tau_low) || !(0.0..=1.0).contains(&self.tau_high) {
            return err(format!(
                "score thresholds must lie in [0,1], got {}/{}",
                self.tau_low, self.tau_high
            ));
        }
        if self.tau_low >= self.tau_high {
            return err(format!(
                "tau_low {} must be below tau_high {}",
                self.tau_low, self.tau_high
            ));
        }
        if self.k_high == 0 || self.k_low == 0 {
            return err("depth level counts must be at least 1".into());
        }
        for (name, v) in [
            ("match_thresh_high", self.match_thresh_high),
            ("match_thresh_low", self.match_thresh_low),
            ("match_thresh_unconfirmed", self.match_thresh_unconfirmed),
            ("new_track_thresh", self.new_track_thresh),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        if self.image_height.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return err(format!(
                "image_height must be positive, got {}",
                self.image_height
            ));
        }
        Ok(())
    }
}

/// Emitted box of one confirmed track in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BBox,
    pub score: f64,
}

/// Tracker output for one frame; only confirmed (`Tracked`) tracks appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame: u64,
    pub outputs: Vec<TrackOutput>,
}

/// Split detections at the score thresholds: `high` above `tau_high`
/// (strictly), `low` within `[tau_low, tau_high]`, the rest discarded.
pub fn split_by_score(dets: &[Detection], cfg: &TrackerConfig) -> (Vec<Detection>, Vec<Detection>) {
    let mut high = Vec::new();
    let mut low = Vec::new();
    for d in dets {
        if d.score > cfg.tau_high {
            high.push(*d);
        } else if d.score >= cfg.tau_low {
            low.push(*d);
        }
    }
    (high, low)
}

pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: u64,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live tracks (everything not yet removed), in creation order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advance one frame with the depth cascade on both stages.
    pub fn step(
        &mut self,
        frame: u64,
        dets: &[Detection],
        warp: Option<&Warp>,
    ) -> Result<FrameResult, TrackError> {
        self.step_impl(frame, dets, warp, true)
    }

    /// Advance one frame with both cascade calls replaced by a single
    /// full-matrix assignment (the two-stage baseline pipeline).
    pub fn byte_step(
        &mut self,
        frame: u64,
        dets: &[Detection],
        warp: Option<&Warp>,
    ) -> Result<FrameResult, TrackError> {
        self.step_impl(frame, dets, warp, false)
    }

    fn step_impl(
        &mut self,
        frame: u64,
        dets: &[Detection],
        warp: Option<&Warp>,
        cascade: bool,
    ) -> Result<FrameResult, TrackError> {
        if frame <= self.last_frame {
            return Err(TrackError::OutOfOrderFrame {
                got: frame,
                prev: self.last_frame,
            });
        }
        self.last_frame = frame;

        // (1) predict every live track, align to camera motion, refresh depth
        for t in self.tracks.iter_mut() {
            t.kalman = kf_predict(&t.kalman);
            if self.cfg.use_warp {
                if let Some(w) = warp {
                    if !w.is_identity() {
                        t.kalman = apply_warp(&t.kalman, w)?;
                    }
                }
            }
            t.pseudo_depth = pseudo_depth(&t.kalman.bbox(), self.cfg.image_height);
            t.frames_since_update += 1;
        }

        let (high, low) = split_by_score(dets, &self.cfg);

        // (2) high-score stage over confirmed and lost tracks
        let pool: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| matches!(self.tracks[i].state, TrackState::Tracked | TrackState::Lost))
            .collect();
        let (stage1, pool_leftover, high_leftover) = self.associate(
            &pool,
            &high,
            self.cfg.k_high,
            self.cfg.match_thresh_high,
            cascade,
        );

        // (3) low-score stage over first-stage leftovers that are not lost
        let rematch_pool: Vec<usize> = pool_leftover
            .iter()
            .copied()
            .filter(|&i| self.tracks[i].state != TrackState::Lost)
            .collect();
        let (stage2, _, _) = self.associate(
            &rematch_pool,
            &low,
            self.cfg.k_low,
            self.cfg.match_thresh_low,
            cascade,
        );

        // (4) leftover high detections against unconfirmed tracks, plain matching
        let unconfirmed: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].state == TrackState::Tentative)
            .collect();
        let leftover_high: Vec<Detection> = high_leftover.iter().map(|&j| high[j]).collect();
        let (stage3, unconfirmed_leftover, new_candidates) = self.associate(
            &unconfirmed,
            &leftover_high,
            1,
            self.cfg.match_thresh_unconfirmed,
            false,
        );

        // (8) matched tracks get corrected and confirmed
        let mut matched_track = vec![false; self.tracks.len()];
        for (pairs, det_set) in [(&stage1, &high), (&stage2, &low), (&stage3, &leftover_high)] {
            for &(ti, dj) in pairs.iter() {
                let det = det_set[dj];
                let t = &mut self.tracks[ti];
                let (cx, cy, a, h) = det.bbox.to_cxcyah();
                t.kalman = kf_update(&t.kalman, [cx, cy, a, h])?;
                t.score = det.score;
                t.frames_since_update = 0;
                t.last_frame = frame;
                t.transition(TrackState::Tracked);
                matched_track[ti] = true;
            }
        }

        // (5) unmatched tentative tracks die; unmatched confirmed tracks go lost
        for &i in &unconfirmed_leftover {
            self.tracks[i].transition(TrackState::Removed);
        }
        for &i in &pool_leftover {
            if !matched_track[i] && self.tracks[i].state == TrackState::Tracked {
                self.tracks[i].transition(TrackState::Lost);
            }
        }

        // (6) remaining high detections spawn tentative tracks
        for &j in &new_candidates {
            let det = leftover_high[j];
            if det.score > self.cfg.new_track_thresh {
                let (cx, cy, a, h) = det.bbox.to_cxcyah();
                self.tracks.push(Track {
                    id: self.next_id,
                    state: TrackState::Tentative,
                    kalman: kf_initiate([cx, cy, a, h])?,
                    score: det.score,
                    pseudo_depth: det.pseudo_depth,
                    frames_since_update: 0,
                    start_frame: frame,
                    last_frame: frame,
                });
                self.next_id += 1;
            }
        }

        // (7) lost tracks past the retention window die
        for t in self.tracks.iter_mut() {
            if t.state == TrackState::Lost && t.frames_since_update > self.cfg.max_lost {
                t.transition(TrackState::Removed);
            }
        }
        self.tracks.retain(|t| t.state != TrackState::Removed);

        let outputs = self
            .tracks
            .iter()
            .filter(|t| t.state == TrackState::Tracked)
            .map(|t| TrackOutput {
                id: t.id,
                bbox: t.kalman.bbox(),
                score: t.score,
            })
            .collect();
        Ok(FrameResult { frame, outputs })
    }

    /// Match a set of track indices against a detection list. Returns
    /// matched `(track_index, det_position)` pairs plus both leftovers.
    fn associate(
        &self,
        track_indices: &[usize],
        dets: &[Detection],
        k: usize,
        thresh: f64,
        cascade: bool,
    ) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
        if track_indices.is_empty() || dets.is_empty() {
            return (
                Vec::new(),
                track_indices.to_vec(),
                (0..dets.len()).collect(),
            );
        }
        if cascade {
            let track_items: Vec<(BBox, PseudoDepth)> = track_indices
                .iter()
                .map(|&i| (self.tracks[i].kalman.bbox(), self.tracks[i].pseudo_depth))
                .collect();
            let det_items: Vec<(BBox, PseudoDepth)> =
                dets.iter().map(|d| (d.bbox, d.pseudo_depth)).collect();
            let r = dcm_with_options(
                &track_items,
                &det_items,
                k,
                thresh,
                self.cfg.shared_depth_range,
            )
            .expect("k >= 1 by config validation");
            (
                r.matched
                    .iter()
                    .map(|&(t, d)| (track_indices[t], d))
                    .collect(),
                r.unmatched_tracks
                    .iter()
                    .map(|&t| track_indices[t])
                    .collect(),
                r.unmatched_detections,
            )
        } else {
            let track_boxes: Vec<BBox> = track_indices
                .iter()
                .map(|&i| self.tracks[i].kalman.bbox())
                .collect();
            let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
            let r = solve_lap(&iou_distance_matrix(&track_boxes, &det_boxes), thresh);
            (
                r.matches
                    .iter()
                    .map(|&(t, d)| (track_indices[t], d))
                    .collect(),
                r.unmatched_rows.iter().map(|&t| track_indices[t]).collect(),
                r.unmatched_cols,
            )
        }
    }
}

/// Fold [`Tracker::step`] over a detection stream whose frames run
/// contiguously from 1.
pub fn run_sequence(
    dets_per_frame: &[Vec<Detection>],
    warps: Option<&BTreeMap<u64, Warp>>,
    cfg: &TrackerConfig,
) -> Result<Vec<FrameResult>, TrackError> {
    run_pipeline(dets_per_frame, warps, cfg, true)
}

/// The baseline counterpart of [`run_sequence`], built on `byte_step`.
pub fn run_sequence_byte(
    dets_per_frame: &[Vec<Detection>],
    warps: Option<&BTreeMap<u64, Warp>>,
    cfg: &TrackerConfig,
) -> Result<Vec<FrameResult>, TrackError> {
    run_pipeline(dets_per_frame, warps, cfg, false)
}

fn run_pipeline(
    dets_per_frame: &[Vec<Detection>],
    warps: Option<&BTreeMap<u64, Warp>>,
    cfg: &TrackerConfig,
    cascade: bool,
) -> Result<Vec<FrameResult>, TrackError> {
    let mut tracker = Tracker::new(cfg.clone())?;
    let mut results = Vec::with_capacity(dets_per_frame.len());
    for (pos, dets) in dets_per_frame.iter().enumerate() {
        let frame = pos as u64 + 1;
        let warp = warps.and_then(|m| m.get(&frame));
        let r = if cascade {
            tracker.step(frame, dets, warp)?
        } else {
            tracker.byte_step(frame, dets, warp)?
        };
        results.push(r);
    }
    Ok(results)
}
