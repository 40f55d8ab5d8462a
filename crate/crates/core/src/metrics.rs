//! CLEAR metrics (MOTA, FP, FN, identity switches) and IDF1 scoring of
//! tracker output against ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::assignment::{solve_lap, CostMatrix, FORBIDDEN};
use crate::geometry::{iou, BBox};
use crate::mot_io::{GtRow, ResultRow};
use crate::tracker::FrameResult;

/// MOT Challenge convention: a box pair corresponds when IoU >= 0.5.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("ground truth contains no boxes")]
    EmptyGroundTruth,
}

/// Frame-indexed `(identity, box)` lists for either side of a scoring run.
pub type TrackSet = BTreeMap<u32, Vec<(u64, BBox)>>;

/// Ground-truth correspondences established in one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMatchList {
    pub frame: u32,
    /// `(gt id, predicted id)` pairs
    pub pairs: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearReport {
    pub mota: f64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub gt_count: u64,
    pub frame_matches: Vec<FrameMatchList>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdReport {
    pub idf1: f64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

/// Keep only rows that count for pedestrian evaluation: flag 1, class 1.
pub fn gt_track_set(gt: &BTreeMap<u32, Vec<GtRow>>) -> TrackSet {
    gt.iter()
        .map(|(&frame, rows)| {
            let kept = rows
                .iter()
                .filter(|r| r.flag == 1 && r.class == 1)
                .map(|r| (r.id as u64, r.bbox))
                .collect();
            (frame, kept)
        })
        .collect()
}

pub fn results_track_set(res: &BTreeMap<u32, Vec<ResultRow>>) -> TrackSet {
    res.iter()
        .map(|(&frame, rows)| (frame, rows.iter().map(|r| (r.id, r.bbox)).collect()))
        .collect()
}

pub fn frame_results_track_set(results: &[FrameResult]) -> TrackSet {
    results
        .iter()
        .map(|fr| {
            (
                fr.frame as u32,
                fr.outputs.iter().map(|o| (o.id, o.bbox)).collect(),
            )
        })
        .collect()
}

pub fn clear_metrics(gt: &TrackSet, pred: &TrackSet) -> Result<ClearReport, MetricsError> {
    clear_metrics_at(gt, pred, DEFAULT_IOU_THRESHOLD)
}

/// CLEAR scoring: per frame, correspondences from the previous frame
/// persist while still within threshold, the remainder is matched by
/// the assignment solver on IoU distance, and an identity switch is
/// counted whenever a ground-truth identity's matched prediction id
/// changes relative to its last matched frame.
pub fn clear_metrics_at(
    gt: &TrackSet,
    pred: &TrackSet,
    iou_threshold: f64,
) -> Result<ClearReport, MetricsError> {
    let gt_count: u64 = gt.values().map(|v| v.len() as u64).sum();
    if gt_count == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let distance_gate = 1.0 - iou_threshold;

    let mut false_positives = 0u64;
    let mut false_negatives = 0u64;
    let mut id_switches = 0u64;
    let mut frame_matches = Vec::new();
    let mut last_match: HashMap<u64, u64> = HashMap::new();

    let empty = Vec::new();
    let frames: BTreeSet<u32> = gt.keys().chain(pred.keys()).copied().collect();
    for frame in frames {
        let gts = gt.get(&frame).unwrap_or(&empty);
        let preds = pred.get(&frame).unwrap_or(&empty);

        let mut gt_used = vec![false; gts.len()];
        let mut pred_used = vec![false; preds.len()];
        let mut pairs: Vec<(u64, u64)> = Vec::new();

        // first occurrence per prediction id
        let mut pred_index: HashMap<u64, usize> = HashMap::new();
        for (pi, (pid, _)) in preds.iter().enumerate() {
            pred_index.entry(*pid).or_insert(pi);
        }

        // carry forward still-valid correspondences
        for (gi, (gid, gbox)) in gts.iter().enumerate() {
            if let Some(pid) = last_match.get(gid) {
                if let Some(&pi) = pred_index.get(pid) {
                    if !pred_used[pi] && iou(gbox, &preds[pi].1) >= iou_threshold {
                        gt_used[gi] = true;
                        pred_used[pi] = true;
                        pairs.push((*gid, *pid));
                    }
                }
            }
        }

        // optimal matching over the remainder
        let free_gts: Vec<usize> = (0..gts.len()).filter(|&i| !gt_used[i]).collect();
        let free_preds: Vec<usize> = (0..preds.len()).filter(|&i| !pred_used[i]).collect();
        if !free_gts.is_empty() && !free_preds.is_empty() {
            let cost = CostMatrix::from_fn(free_gts.len(), free_preds.len(), |r, c| {
                1.0 - iou(&gts[free_gts[r]].1, &preds[free_preds[c]].1)
            });
            let solved = solve_lap(&cost, distance_gate);
            for &(r, c) in &solved.matches {
                let (gid, _) = gts[free_gts[r]];
                let (pid, _) = preds[free_preds[c]];
                if last_match.get(&gid).is_some_and(|&prev| prev != pid) {
                    id_switches += 1;
                }
                gt_used[free_gts[r]] = true;
                pred_used[free_preds[c]] = true;
                pairs.push((gid, pid));
            }
        }

        for &(gid, pid) in &pairs {
            last_match.insert(gid, pid);
        }
        false_negatives += gt_used.iter().filter(|&&u| !u).count() as u64;
        false_positives += pred_used.iter().filter(|&&u| !u).count() as u64;
        frame_matches.push(FrameMatchList { frame, pairs });
    }

    let mota = 1.0 - (false_positives + false_negatives + id_switches) as f64 / gt_count as f64;
    Ok(ClearReport {
        mota,
        false_positives,
        false_negatives,
        id_switches,
        gt_count,
        frame_matches,
    })
}

pub fn idf1(gt: &TrackSet, pred: &TrackSet) -> Result<IdReport, MetricsError> {
    idf1_at(gt, pred, DEFAULT_IOU_THRESHOLD)
}

/// Identity scoring: one global bipartite correspondence between
/// ground-truth identities and predicted identities that maximizes the
/// number of identity-consistent box matches (IDTP).
pub fn idf1_at(
    gt: &TrackSet,
    pred: &TrackSet,
    iou_threshold: f64,
) -> Result<IdReport, MetricsError> {
    let per_id = |set: &TrackSet| -> BTreeMap<u64, BTreeMap<u32, BBox>> {
        let mut out: BTreeMap<u64, BTreeMap<u32, BBox>> = BTreeMap::new();
        for (&frame, rows) in set {
            for (id, bbox) in rows {
                out.entry(*id).or_default().entry(frame).or_insert(*bbox);
            }
        }
        out
    };
    let gt_tracks = per_id(gt);
    let pred_tracks = per_id(pred);

    let total_gt: u64 = gt_tracks.values().map(|t| t.len() as u64).sum();
    if total_gt == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let total_pred: u64 = pred_tracks.values().map(|t| t.len() as u64).sum();

    let gt_ids: Vec<u64> = gt_tracks.keys().copied().collect();
    let pred_ids: Vec<u64> = pred_tracks.keys().copied().collect();
    let n_g = gt_ids.len();
    let n_p = pred_ids.len();

    // frames where a gt identity and a predicted identity overlap enough
    let mut overlap = vec![vec![0u64; n_p]; n_g];
    for (i, gid) in gt_ids.iter().enumerate() {
        let gtrack = &gt_tracks[gid];
        for (j, pid) in pred_ids.iter().enumerate() {
            let ptrack = &pred_tracks[pid];
            let count = gtrack
                .iter()
                .filter(|(frame, gbox)| {
                    ptrack
                        .get(frame)
                        .is_some_and(|pbox| iou(gbox, pbox) >= iou_threshold)
                })
                .count();
            overlap[i][j] = count as u64;
        }
    }

    // Square assignment over identities plus per-identity "unmatched"
    // slots. Pairing costs count the identity-inconsistent boxes, so
    // minimizing cost maximizes IDTP. Integer counts are scaled by a
    // power of two, which keeps the arithmetic exact.
    let n = n_g + n_p;
    let len_g: Vec<u64> = gt_ids.iter().map(|id| gt_tracks[id].len() as u64).collect();
    let len_p: Vec<u64> = pred_ids
        .iter()
        .map(|id| pred_tracks[id].len() as u64)
        .collect();
    let max_entry = (total_gt + total_pred).max(1);
    let scale = (max_entry as f64).log2().ceil().exp2();

    let cost = CostMatrix::from_fn(n, n, |i, j| match (i < n_g, j < n_p) {
        (true, true) => (len_g[i] + len_p[j] - 2 * overlap[i][j]) as f64 / scale,
        (true, false) => {
            if j - n_p == i {
                len_g[i] as f64 / scale
            } else {
                FORBIDDEN
            }
        }
        (false, true) => {
            if i - n_g == j {
                len_p[j] as f64 / scale
            } else {
                FORBIDDEN
            }
        }
        (false, false) => 0.0,
    });
    let solved = solve_lap(&cost, 1.0);

    let idtp: u64 = solved
        .matches
        .iter()
        .filter(|&&(i, j)| i < n_g && j < n_p)
        .map(|&(i, j)| overlap[i][j])
        .sum();
    let idfn = total_gt - idtp;
    let idfp = total_pred - idtp;
    let idf1 = 2.0 * idtp as f64 / (2.0 * idtp as f64 + idfp as f64 + idfn as f64);
    Ok(IdReport {
        idf1,
        idtp,
        idfp,
        idfn,
    })
}
