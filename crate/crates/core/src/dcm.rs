//! Depth-cascaded matching: partition tracks and detections into depth
//! levels and associate level by level, nearest first, carrying
//! unmatched items forward into the next level.

use thiserror::Error;

use crate::assignment::solve_lap;
use crate::geometry::{iou_distance_matrix, BBox, PseudoDepth};

#[derive(Debug, Error, PartialEq)]
pub enum DcmError {
    #[error("number of depth levels must be at least 1")]
    ZeroLevels,
}

/// One depth level `[lo, hi)`; the last level of a partition is closed
/// at `hi`. Level 0 is nearest (smallest depth values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthInterval {
    pub lo: f64,
    pub hi: f64,
    pub index: usize,
}

impl DepthInterval {
    /// Membership under the half-open rule. The closing `hi` belongs to
    /// the last interval; a degenerate interval is the single point `lo`.
    fn accepts(&self, depth: f64, is_last: bool) -> bool {
        (self.lo <= depth && depth < self.hi)
            || (depth == self.hi && (is_last || self.lo == self.hi))
    }
}

/// Total, disjoint assignment of items to depth levels. `subsets[i]`
/// holds the indices of the items that fell into `intervals[i]`, in
/// input order.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPartition {
    pub intervals: Vec<DepthInterval>,
    pub subsets: Vec<Vec<usize>>,
}

/// Output of one cascade: matched `(track, detection)` index pairs plus
/// the survivors on both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcmResult {
    pub matched: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Exact min and max of a depth list; `None` signals the empty set so
/// the caller can skip partitioning.
pub fn depth_range(depths: &[PseudoDepth]) -> Option<(f64, f64)> {
    let mut it = depths.iter().map(|d| d.0);
    let first = it.next()?;
    let mut lo = first;
    let mut hi = first;
    for d in it {
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Some((lo, hi))
}

/// `k` contiguous equal-width intervals covering `[min, max]`. When
/// `min == max` every interval degenerates to that single point.
pub fn split_levels(min: f64, max: f64, k: usize) -> Result<Vec<DepthInterval>, DcmError> {
    if k == 0 {
        return Err(DcmError::ZeroLevels);
    }
    debug_assert!(min <= max);
    let span = max - min;
    // Shared boundary array keeps adjacent intervals gap-free.
    let bound = |i: usize| -> f64 {
        if i == 0 {
            min
        } else if i == k {
            max
        } else {
            min + span * (i as f64 / k as f64)
        }
    };
    Ok((0..k)
        .map(|i| DepthInterval {
            lo: bound(i),
            hi: bound(i + 1),
            index: i,
        })
        .collect())
}

/// Assign every depth to the first interval that accepts it. Panics if
/// an item escapes all intervals, which cannot happen for intervals
/// built by `split_levels` over these depths' own range.
pub fn partition(depths: &[PseudoDepth], intervals: &[DepthInterval]) -> DepthPartition {
    let k = intervals.len();
    let mut subsets = vec![Vec::new(); k];
    for (item, d) in depths.iter().enumerate() {
        let level = intervals
            .iter()
            .position(|iv| iv.accepts(d.0, iv.index == k - 1))
            .unwrap_or_else(|| panic!("depth {} outside every interval", d.0));
        subsets[level].push(item);
    }
    DepthPartition {
        intervals: intervals.to_vec(),
        subsets,
    }
}

/// Depth-cascaded matching with independently computed depth ranges for
/// the track and detection sets.
pub fn dcm(
    tracks: &[(BBox, PseudoDepth)],
    detections: &[(BBox, PseudoDepth)],
    k: usize,
    tau: f64,
) -> Result<DcmResult, DcmError> {
    dcm_with_options(tracks, detections, k, tau, false)
}

/// As [`dcm`], optionally pooling both sets into one shared depth range
/// so that equal level indices cover equal absolute depths.
pub fn dcm_with_options(
    tracks: &[(BBox, PseudoDepth)],
    detections: &[(BBox, PseudoDepth)],
    k: usize,
    tau: f64,
    shared_depth_range: bool,
) -> Result<DcmResult, DcmError> {
    if k == 0 {
        return Err(DcmError::ZeroLevels);
    }
    let order: Vec<usize> = (0..k).collect();
    run_cascade(tracks, detections, k, tau, shared_depth_range, &order)
}

fn run_cascade(
    tracks: &[(BBox, PseudoDepth)],
    detections: &[(BBox, PseudoDepth)],
    k: usize,
    tau: f64,
    shared_depth_range: bool,
    level_order: &[usize],
) -> Result<DcmResult, DcmError> {
    if tracks.is_empty() || detections.is_empty() {
        return Ok(DcmResult {
            matched: Vec::new(),
            unmatched_tracks: (0..tracks.len()).collect(),
            unmatched_detections: (0..detections.len()).collect(),
        });
    }

    let track_depths: Vec<PseudoDepth> = tracks.iter().map(|t| t.1).collect();
    let det_depths: Vec<PseudoDepth> = detections.iter().map(|d| d.1).collect();
    let (t_min, t_max) = depth_range(&track_depths).expect("nonempty");
    let (d_min, d_max) = depth_range(&det_depths).expect("nonempty");

    let (track_levels, det_levels) = if shared_depth_range {
        let lo = t_min.min(d_min);
        let hi = t_max.max(d_max);
        let shared = split_levels(lo, hi, k)?;
        (shared.clone(), shared)
    } else {
        (
            split_levels(t_min, t_max, k)?,
            split_levels(d_min, d_max, k)?,
        )
    };

    let track_part = partition(&track_depths, &track_levels);
    let det_part = partition(&det_depths, &det_levels);

    let mut matched: Vec<(usize, usize)> = Vec::new();
    let mut carry_tracks: Vec<usize> = Vec::new();
    let mut carry_dets: Vec<usize> = Vec::new();

    for &level in level_order {
        // carried-over items join after the level's native ones
        let mut row_items = track_part.subsets[level].clone();
        row_items.extend_from_slice(&carry_tracks);
        let mut col_items = det_part.subsets[level].clone();
        col_items.extend_from_slice(&carry_dets);

        if row_items.is_empty() || col_items.is_empty() {
            carry_tracks = row_items;
            carry_dets = col_items;
            continue;
        }

        let row_boxes: Vec<BBox> = row_items.iter().map(|&i| tracks[i].0).collect();
        let col_boxes: Vec<BBox> = col_items.iter().map(|&j| detections[j].0).collect();
        let cost = iou_distance_matrix(&row_boxes, &col_boxes);
        let result = solve_lap(&cost, tau);

        matched.extend(
            result
                .matches
                .iter()
                .map(|&(r, c)| (row_items[r], col_items[c])),
        );
        carry_tracks = result
            .unmatched_rows
            .iter()
            .map(|&r| row_items[r])
            .collect();
        carry_dets = result
            .unmatched_cols
            .iter()
            .map(|&c| col_items[c])
            .collect();
    }

    Ok(DcmResult {
        matched,
        unmatched_tracks: carry_tracks,
        unmatched_detections: carry_dets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{brute_force_lap, CostMatrix};
    use crate::geometry::iou;

    fn pd(v: f64) -> PseudoDepth {
        PseudoDepth(v)
    }

    fn item(x1: f64, y1: f64, x2: f64, y2: f64, image_h: f64) -> (BBox, PseudoDepth) {
        let b = BBox::new(x1, y1, x2, y2);
        (b, crate::geometry::pseudo_depth(&b, image_h))
    }

    #[test]
    fn depth_range_cases() {
        assert_eq!(depth_range(&[pd(100.0)]), Some((100.0, 100.0)));
        assert_eq!(
            depth_range(&[pd(10.0), pd(55.0), pd(119.0)]),
            Some((10.0, 119.0))
        );
        assert_eq!(
            depth_range(&[pd(-5.0), pd(0.0), pd(7.0)]),
            Some((-5.0, 7.0))
        );
        assert_eq!(depth_range(&[]), None);
    }

    #[test]
    fn split_equal_thirds() {
        let iv = split_levels(0.0, 120.0, 3).unwrap();
        assert_eq!(iv.len(), 3);
        assert_eq!((iv[0].lo, iv[0].hi), (0.0, 40.0));
        assert_eq!((iv[1].lo, iv[1].hi), (40.0, 80.0));
        assert_eq!((iv[2].lo, iv[2].hi), (80.0, 120.0));
    }

    #[test]
    fn split_degenerate_and_single() {
        let iv = split_levels(5.0, 5.0, 4).unwrap();
        assert_eq!(iv.len(), 4);
        assert!(iv.iter().all(|i| i.lo == 5.0 && i.hi == 5.0));
        let one = split_levels(0.0, 100.0, 1).unwrap();
        assert_eq!((one[0].lo, one[0].hi), (0.0, 100.0));
        assert_eq!(split_levels(0.0, 1.0, 0).unwrap_err(), DcmError::ZeroLevels);
    }

    #[test]
    fn partition_two_levels() {
        let depths = [pd(10.0), pd(55.0), pd(119.0)];
        let iv = split_levels(10.0, 119.0, 2).unwrap();
        let p = partition(&depths, &iv);
        assert_eq!(p.subsets, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn partition_single_level_keeps_order() {
        let depths = [pd(3.0), pd(1.0), pd(2.0)];
        let iv = split_levels(1.0, 3.0, 1).unwrap();
        let p = partition(&depths, &iv);
        assert_eq!(p.subsets, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn partition_boundary_goes_to_higher_interval() {
        let depths = [pd(0.0), pd(40.0), pd(80.0), pd(120.0)];
        let iv = split_levels(0.0, 120.0, 3).unwrap();
        let p = partition(&depths, &iv);
        assert_eq!(p.subsets, vec![vec![0], vec![1], vec![2, 3]]);
    }

    #[test]
    fn partition_degenerate_lands_in_first_interval() {
        let depths = [pd(5.0), pd(5.0)];
        let iv = split_levels(5.0, 5.0, 4).unwrap();
        let p = partition(&depths, &iv);
        assert_eq!(p.subsets, vec![vec![0, 1], vec![], vec![], vec![]]);
    }

    #[test]
    fn single_level_equals_plain_assignment() {
        let image_h = 1000.0;
        let tracks = vec![
            item(0.0, 300.0, 100.0, 900.0, image_h),
            item(80.0, 100.0, 180.0, 700.0, image_h),
        ];
        let dets = vec![
            item(60.0, 290.0, 160.0, 890.0, image_h),
            item(20.0, 110.0, 120.0, 710.0, image_h),
        ];
        let r = dcm(&tracks, &dets, 1, 0.8).unwrap();

        let row_boxes: Vec<BBox> = tracks.iter().map(|t| t.0).collect();
        let col_boxes: Vec<BBox> = dets.iter().map(|d| d.0).collect();
        let plain = solve_lap(&iou_distance_matrix(&row_boxes, &col_boxes), 0.8);
        assert_eq!(r.matched, plain.matches);
        assert_eq!(r.unmatched_tracks, plain.unmatched_rows);
        assert_eq!(r.unmatched_detections, plain.unmatched_cols);
    }

    #[test]
    fn no_detections_short_circuits() {
        let tracks = vec![item(0.0, 0.0, 10.0, 10.0, 100.0)];
        let r = dcm(&tracks, &[], 3, 0.5).unwrap();
        assert!(r.matched.is_empty());
        assert_eq!(r.unmatched_tracks, vec![0]);
        assert!(r.unmatched_detections.is_empty());
    }

    /// Two near and two far targets whose detections drift laterally in
    /// opposite directions. On the full matrix the cheapest pairing
    /// crosses depth levels; with k = 2 each pair resolves in its own
    /// level. Expected values were traced by hand and cross-checked with
    /// the exhaustive solver below.
    #[test]
    fn crossing_pair_resolved_by_levels() {
        let image_h = 1000.0;
        // depths: t0 = 100 (near), t1 = 300 (far); second pair far away laterally
        let tracks = vec![
            item(0.0, 300.0, 100.0, 900.0, image_h),   // T0 near
            item(80.0, 100.0, 180.0, 700.0, image_h),  // T1 far, overlaps T0 region
            item(400.0, 310.0, 500.0, 910.0, image_h), // T2 near
            item(600.0, 90.0, 700.0, 690.0, image_h),  // T3 far
        ];
        let dets = vec![
            item(60.0, 290.0, 160.0, 890.0, image_h), // D0: T0 drifted right
            item(20.0, 110.0, 120.0, 710.0, image_h), // D1: T1 drifted left
            item(401.0, 311.0, 501.0, 911.0, image_h), // D2 ~ T2
            item(601.0, 91.0, 701.0, 691.0, image_h), // D3 ~ T3
        ];

        // the cross pairing is strictly cheaper on the full matrix
        let straight =
            (1.0 - iou(&tracks[0].0, &dets[0].0)) + (1.0 - iou(&tracks[1].0, &dets[1].0));
        let crossed = (1.0 - iou(&tracks[0].0, &dets[1].0)) + (1.0 - iou(&tracks[1].0, &dets[0].0));
        assert!(crossed < straight);

        let full = dcm(&tracks, &dets, 1, 0.8).unwrap();
        assert!(full.matched.contains(&(0, 1)) && full.matched.contains(&(1, 0)));

        let cascaded = dcm(&tracks, &dets, 2, 0.8).unwrap();
        assert_eq!(cascaded.matched, vec![(0, 0), (2, 2), (1, 1), (3, 3)]);
        assert!(cascaded.unmatched_tracks.is_empty());
        assert!(cascaded.unmatched_detections.is_empty());

        // exhaustive check that the full-matrix result really is optimal
        let row_boxes: Vec<BBox> = tracks.iter().map(|t| t.0).collect();
        let col_boxes: Vec<BBox> = dets.iter().map(|d| d.0).collect();
        let cost = iou_distance_matrix(&row_boxes, &col_boxes);
        let oracle = brute_force_lap(&cost, 0.8).unwrap();
        assert_eq!(full.matched, oracle.matches);
    }

    /// Near-first order is load-bearing: reversing the level order on a
    /// carry-over contention case changes who wins the contested box.
    #[test]
    fn reversed_level_order_changes_result() {
        let image_h = 1000.0;
        let tracks = vec![
            item(0.0, 300.0, 100.0, 900.0, image_h), // T0 near, depth 100
            item(40.0, 120.0, 140.0, 720.0, image_h), // T1 far, depth 280
        ];
        let dets = vec![
            item(55.0, 310.0, 155.0, 910.0, image_h), // D0 near, depth 90
            item(130.0, 100.0, 230.0, 700.0, image_h), // D1 far, depth 300
        ];
        // sanity: T1 prefers D0 over what T0 offers, and T1-D1 fails the gate
        assert!(iou(&tracks[1].0, &dets[0].0) > iou(&tracks[0].0, &dets[0].0));
        assert!(1.0 - iou(&tracks[1].0, &dets[1].0) > 0.8);

        let near_first = dcm(&tracks, &dets, 2, 0.8).unwrap();
        assert_eq!(near_first.matched, vec![(0, 0)]);
        assert_eq!(near_first.unmatched_tracks, vec![1]);
        assert_eq!(near_first.unmatched_detections, vec![1]);

        let far_first = run_cascade(&tracks, &dets, 2, 0.8, false, &[1, 0]).unwrap();
        assert_eq!(far_first.matched, vec![(1, 0)]);
        assert_eq!(far_first.unmatched_tracks, vec![0]);
        assert_eq!(far_first.unmatched_detections, vec![1]);
    }

    #[test]
    fn more_levels_than_items_is_fine() {
        let image_h = 1000.0;
        let tracks = vec![item(0.0, 300.0, 100.0, 900.0, image_h)];
        let dets = vec![item(2.0, 302.0, 102.0, 902.0, image_h)];
        let r = dcm(&tracks, &dets, 16, 0.8).unwrap();
        assert_eq!(r.matched, vec![(0, 0)]);
    }

    #[test]
    fn shared_range_aligns_levels() {
        let image_h = 1000.0;
        // Track depths span [100, 300] but det depths only [240, 300].
        // Independent ranges label D0 "near" and hand it to T0 without
        // competition; the shared range keeps both dets in the far level
        // where T1 wins the contested box.
        let tracks = vec![
            item(0.0, 300.0, 100.0, 900.0, image_h), // T0 depth 100
            item(0.0, 100.0, 100.0, 700.0, image_h), // T1 depth 300
        ];
        let dets = vec![
            item(0.0, 160.0, 100.0, 760.0, image_h), // D0 depth 240, overlaps both
            item(300.0, 100.0, 400.0, 700.0, image_h), // D1 depth 300, overlaps neither
        ];
        let independent = dcm(&tracks, &dets, 2, 0.8).unwrap();
        assert_eq!(independent.matched, vec![(0, 0)]);
        assert_eq!(independent.unmatched_tracks, vec![1]);

        let shared = dcm_with_options(&tracks, &dets, 2, 0.8, true).unwrap();
        assert_eq!(shared.matched, vec![(1, 0)]);
        assert_eq!(shared.unmatched_tracks, vec![0]);

        for r in [&independent, &shared] {
            assert_eq!(r.matched.len() + r.unmatched_tracks.len(), tracks.len());
            assert_eq!(r.matched.len() + r.unmatched_detections.len(), dets.len());
        }
    }

    #[test]
    fn gate_soundness_in_cascade() {
        let image_h = 1000.0;
        let tracks = vec![
            item(0.0, 300.0, 100.0, 900.0, image_h),
            item(500.0, 100.0, 600.0, 700.0, image_h),
        ];
        let dets = vec![
            item(5.0, 305.0, 105.0, 905.0, image_h),
            item(800.0, 100.0, 900.0, 700.0, image_h), // disjoint from both tracks
        ];
        let r = dcm(&tracks, &dets, 2, 0.8).unwrap();
        for &(t, d) in &r.matched {
            assert!(1.0 - iou(&tracks[t].0, &dets[d].0) <= 0.8);
        }
        assert_eq!(r.matched, vec![(0, 0)]);
        assert_eq!(r.unmatched_tracks, vec![1]);
        assert_eq!(r.unmatched_detections, vec![1]);
    }

    #[test]
    fn k1_reduction_exact_equality_random() {
        // dcm with k = 1 must be bit-identical to plain solve_lap,
        // tie-breaks included, on arbitrary inputs.
        let image_h = 600.0;
        let mut boxes = Vec::new();
        for i in 0..6 {
            let x = (i * 17 % 50) as f64;
            let y = (i * 29 % 140) as f64;
            boxes.push(BBox::new(x, y, x + 40.0, y + 60.0 + i as f64));
        }
        let tracks: Vec<(BBox, PseudoDepth)> = boxes
            .iter()
            .take(3)
            .map(|b| (*b, crate::geometry::pseudo_depth(b, image_h)))
            .collect();
        let dets: Vec<(BBox, PseudoDepth)> = boxes
            .iter()
            .skip(2)
            .map(|b| (*b, crate::geometry::pseudo_depth(b, image_h)))
            .collect();
        let r = dcm(&tracks, &dets, 1, 0.9).unwrap();
        let cost = CostMatrix::from_fn(tracks.len(), dets.len(), |i, j| {
            1.0 - iou(&tracks[i].0, &dets[j].0)
        });
        let plain = solve_lap(&cost, 0.9);
        assert_eq!(r.matched, plain.matches);
        assert_eq!(r.unmatched_tracks, plain.unmatched_rows);
        assert_eq!(r.unmatched_detections, plain.unmatched_cols);
    }
}
