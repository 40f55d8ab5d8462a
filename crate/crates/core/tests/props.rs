//! Property tests for the geometry, assignment, cascade and IO invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use dcmot::assignment::{brute_force_lap, solve_lap, AssignmentResult, CostMatrix, FORBIDDEN};
use dcmot::dcm::{dcm, split_levels};
use dcmot::geometry::{iou, iou_distance_matrix, pseudo_depth, BBox, PseudoDepth};
use dcmot::mot_io;
use dcmot::tracker::{FrameResult, TrackOutput};

fn arb_bbox() -> impl Strategy<Value = BBox> {
    (
        -200.0..1800.0_f64,
        -200.0..1000.0_f64,
        prop_oneof![Just(0.0), 1.0..400.0_f64],
        prop_oneof![Just(0.0), 1.0..400.0_f64],
    )
        .prop_map(|(x, y, w, h)| BBox::from_tlwh(x, y, w, h))
}

/// Costs on a dyadic grid: sums of up to a few of them are exact in
/// f64, so totals of tied optimal assignments compare with `==`.
fn arb_dyadic_matrix() -> impl Strategy<Value = CostMatrix> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(rows, cols)| {
        proptest::collection::vec(
            prop_oneof![4 => (0u32..=1024).prop_map(|v| v as f64 / 1024.0), 1 => Just(FORBIDDEN)],
            rows * cols,
        )
        .prop_map(move |values| CostMatrix::new(rows, cols, values))
    })
}

fn check_partition(r: &AssignmentResult, rows: usize, cols: usize) {
    let mut row_seen = vec![0u32; rows];
    let mut col_seen = vec![0u32; cols];
    for &(i, j) in &r.matches {
        row_seen[i] += 1;
        col_seen[j] += 1;
    }
    for &i in &r.unmatched_rows {
        row_seen[i] += 1;
    }
    for &j in &r.unmatched_cols {
        col_seen[j] += 1;
    }
    assert!(
        row_seen.iter().all(|&c| c == 1),
        "rows not partitioned: {row_seen:?}"
    );
    assert!(
        col_seen.iter().all(|&c| c == 1),
        "cols not partitioned: {col_seen:?}"
    );
}

proptest! {
    #[test]
    fn iou_symmetric_and_bounded(a in arb_bbox(), b in arb_bbox()) {
        let ab = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, iou(&b, &a));
    }

    #[test]
    fn iou_translation_invariant(a in arb_bbox(), b in arb_bbox(),
                                 dx in -500.0..500.0_f64, dy in -500.0..500.0_f64) {
        // grid shifts keep the arithmetic exact
        let (dx, dy) = (dx.round(), dy.round());
        let before = iou(&a, &b);
        let after = iou(&a.translated(dx, dy), &b.translated(dx, dy));
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn cost_matrix_bounded_and_disjoint_is_ones(boxes in proptest::collection::vec(arb_bbox(), 1..6)) {
        let m = iou_distance_matrix(&boxes, &boxes);
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                prop_assert!((0.0..=1.0).contains(&m.get(i, j)));
            }
        }
        // spread the same boxes far apart: every pair disjoint, all entries 1
        let spread: Vec<BBox> = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| b.translated(i as f64 * 10_000.0, 0.0))
            .collect();
        let m = iou_distance_matrix(&spread[..1], &spread[1..]);
        for j in 0..m.cols() {
            prop_assert_eq!(m.get(0, j), 1.0);
        }
    }

    #[test]
    fn pseudo_depth_order_follows_bottom_edge(a in arb_bbox(), b in arb_bbox(), h in 200.0..2200.0_f64) {
        let (pa, pb) = (pseudo_depth(&a, h), pseudo_depth(&b, h));
        prop_assert_eq!(a.y2 > b.y2, pa < pb);
    }

    #[test]
    fn lap_partitions_and_respects_gate(c in arb_dyadic_matrix(), threshold in 0.0..=1.0_f64) {
        let r = solve_lap(&c, threshold);
        check_partition(&r, c.rows(), c.cols());
        for &(i, j) in &r.matches {
            prop_assert!(c.get(i, j) <= threshold);
        }
    }

    #[test]
    fn lap_matches_brute_force(c in arb_dyadic_matrix(), threshold in 0.0..=1.0_f64) {
        let fast = solve_lap(&c, threshold);
        let slow = brute_force_lap(&c, threshold).unwrap();
        prop_assert_eq!(fast.matches.len(), slow.matches.len());
        // dyadic grid: totals are exact, ties included
        prop_assert_eq!(fast.total_cost(&c), slow.total_cost(&c));
    }

    #[test]
    fn lap_invariant_under_row_permutation(c in arb_dyadic_matrix(), seed in 0u64..1000) {
        let rows = c.rows();
        let mut perm: Vec<usize> = (0..rows).collect();
        // cheap deterministic shuffle
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        for i in (1..rows).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let permuted = CostMatrix::from_fn(rows, c.cols(), |i, j| c.get(perm[i], j));
        let a = solve_lap(&c, 0.8);
        let b = solve_lap(&permuted, 0.8);
        prop_assert_eq!(a.matches.len(), b.matches.len());
        prop_assert_eq!(a.total_cost(&c), b.total_cost(&permuted));
    }

    #[test]
    fn dcm_conservation_disjointness_gate(
        tracks in proptest::collection::vec((arb_bbox(), -100.0..900.0_f64), 0..12),
        dets in proptest::collection::vec((arb_bbox(), -100.0..900.0_f64), 0..12),
        k in 1usize..6,
        tau in 0.1..=1.0_f64,
    ) {
        let tracks: Vec<(BBox, PseudoDepth)> = tracks.into_iter().map(|(b, d)| (b, PseudoDepth(d))).collect();
        let dets: Vec<(BBox, PseudoDepth)> = dets.into_iter().map(|(b, d)| (b, PseudoDepth(d))).collect();
        let r = dcm(&tracks, &dets, k, tau).unwrap();

        // conservation and disjointness on both sides
        let mut t_seen = vec![0u32; tracks.len()];
        let mut d_seen = vec![0u32; dets.len()];
        for &(t, d) in &r.matched {
            t_seen[t] += 1;
            d_seen[d] += 1;
        }
        for &t in &r.unmatched_tracks { t_seen[t] += 1; }
        for &d in &r.unmatched_detections { d_seen[d] += 1; }
        prop_assert!(t_seen.iter().all(|&c| c == 1));
        prop_assert!(d_seen.iter().all(|&c| c == 1));

        // gate soundness
        for &(t, d) in &r.matched {
            prop_assert!(1.0 - iou(&tracks[t].0, &dets[d].0) <= tau);
        }
    }

    #[test]
    fn split_levels_total_and_last_closed(
        depths in proptest::collection::vec(-500.0..1500.0_f64, 1..40),
        k in 1usize..10,
    ) {
        let ds: Vec<PseudoDepth> = depths.iter().map(|&d| PseudoDepth(d)).collect();
        let (lo, hi) = dcmot::dcm::depth_range(&ds).unwrap();
        let intervals = split_levels(lo, hi, k).unwrap();
        prop_assert_eq!(intervals.len(), k);
        prop_assert_eq!(intervals[0].lo, lo);
        prop_assert_eq!(intervals[k - 1].hi, hi);
        for w in intervals.windows(2) {
            prop_assert_eq!(w[0].hi, w[1].lo);
        }
        // totality: every depth lands in exactly one subset
        let p = dcmot::dcm::partition(&ds, &intervals);
        let assigned: usize = p.subsets.iter().map(|s| s.len()).sum();
        prop_assert_eq!(assigned, ds.len());
    }

    #[test]
    fn dcm_k1_reduces_to_plain_lap(
        tracks in proptest::collection::vec((arb_bbox(), -100.0..900.0_f64), 0..10),
        dets in proptest::collection::vec((arb_bbox(), -100.0..900.0_f64), 0..10),
        tau in 0.1..=1.0_f64,
    ) {
        let tracks: Vec<(BBox, PseudoDepth)> = tracks.into_iter().map(|(b, d)| (b, PseudoDepth(d))).collect();
        let dets: Vec<(BBox, PseudoDepth)> = dets.into_iter().map(|(b, d)| (b, PseudoDepth(d))).collect();
        let r = dcm(&tracks, &dets, 1, tau).unwrap();
        let cost = iou_distance_matrix(
            &tracks.iter().map(|t| t.0).collect::<Vec<_>>(),
            &dets.iter().map(|d| d.0).collect::<Vec<_>>(),
        );
        let plain = solve_lap(&cost, tau);
        prop_assert_eq!(r.matched, plain.matches);
        prop_assert_eq!(r.unmatched_tracks, plain.unmatched_rows);
        prop_assert_eq!(r.unmatched_detections, plain.unmatched_cols);
    }

    /// When every depth level admits a zero-cost perfect matching, the
    /// cascade must match every single item.
    #[test]
    fn dcm_cannot_strand_matchable_pairs(
        positions in proptest::collection::vec((0.0..2000.0_f64, 0.0..900.0_f64), 1..15),
        k in 1usize..6,
    ) {
        let items: Vec<(BBox, PseudoDepth)> = positions
            .iter()
            .map(|&(x, y)| {
                let b = BBox::new(x, y, x + 60.0, y + 140.0);
                (b, pseudo_depth(&b, 1080.0))
            })
            .collect();
        let r = dcm(&items, &items, k, 0.5).unwrap();
        prop_assert_eq!(r.matched.len(), items.len());
        prop_assert!(r.unmatched_tracks.is_empty());
        prop_assert!(r.unmatched_detections.is_empty());
    }

    #[test]
    fn results_file_round_trip(
        rows in proptest::collection::vec(
            (1u64..200, 0.0..2000.0_f64, 0.0..1000.0_f64, 1.0..300.0_f64, 1.0..400.0_f64, 0.0..=1.0_f64),
            0..40,
        )
    ) {
        let mut by_frame: BTreeMap<u64, Vec<TrackOutput>> = BTreeMap::new();
        for (i, &(frame, x, y, w, h, score)) in rows.iter().enumerate() {
            by_frame.entry(frame).or_default().push(TrackOutput {
                id: i as u64 + 1,
                bbox: BBox::from_tlwh(x, y, w, h),
                score,
            });
        }
        let results: Vec<FrameResult> = by_frame
            .into_iter()
            .map(|(frame, outputs)| FrameResult { frame, outputs })
            .collect();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("res.txt");
        mot_io::write_results(&path, &results).unwrap();
        let parsed = mot_io::parse_results(&path).unwrap();

        let total: usize = results.iter().map(|r| r.outputs.len()).sum();
        let parsed_total: usize = parsed.values().map(|v| v.len()).sum();
        prop_assert_eq!(total, parsed_total);
        for fr in &results {
            let rows = &parsed[&(fr.frame as u32)];
            for (row, out) in rows.iter().zip(&fr.outputs) {
                prop_assert_eq!(row.id, out.id);
                prop_assert!((row.bbox.x1 - out.bbox.x1).abs() <= 0.005 + 1e-9);
                prop_assert!((row.bbox.y1 - out.bbox.y1).abs() <= 0.005 + 1e-9);
                prop_assert!((row.bbox.width() - out.bbox.width()).abs() <= 0.005 + 1e-9);
                prop_assert!((row.bbox.height() - out.bbox.height()).abs() <= 0.005 + 1e-9);
                prop_assert!((row.score - out.score).abs() <= 0.005 + 1e-9);
            }
        }
    }

    #[test]
    fn gt_file_round_trip(
        rows in proptest::collection::vec(
            (1u32..50, 1u32..99, 0.0..2000.0_f64, 0.0..1000.0_f64, 1.0..300.0_f64,
             1.0..400.0_f64, 0u8..=1, 1i32..3, 0.0..=1.0_f64),
            1..30,
        )
    ) {
        let mut gt: BTreeMap<u32, Vec<mot_io::GtRow>> = BTreeMap::new();
        for &(frame, id, x, y, w, h, flag, class, vis) in &rows {
            gt.entry(frame).or_default().push(mot_io::GtRow {
                id,
                bbox: BBox::from_tlwh(x, y, w, h),
                flag,
                class,
                visibility: vis,
            });
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.txt");
        mot_io::write_ground_truth(&path, &gt).unwrap();
        let parsed = mot_io::parse_ground_truth(&path).unwrap();
        for (frame, rows) in &gt {
            for (a, b) in rows.iter().zip(&parsed[frame]) {
                prop_assert_eq!(a.id, b.id);
                prop_assert_eq!(a.flag, b.flag);
                prop_assert_eq!(a.class, b.class);
                prop_assert!((a.visibility - b.visibility).abs() <= 0.005 + 1e-9);
                prop_assert!((a.bbox.x1 - b.bbox.x1).abs() <= 0.005 + 1e-9);
                prop_assert!((a.bbox.y2 - b.bbox.y2).abs() <= 0.015 + 1e-9);
            }
        }
    }

    #[test]
    fn det_file_round_trip(
        rows in proptest::collection::vec(
            (1u32..50, 0.0..2000.0_f64, 0.0..1000.0_f64, 1.0..300.0_f64, 1.0..400.0_f64, 0.0..=1.0_f64),
            1..30,
        )
    ) {
        let mut dets: BTreeMap<u32, Vec<dcmot::Detection>> = BTreeMap::new();
        for &(frame, x, y, w, h, score) in &rows {
            dets.entry(frame)
                .or_default()
                .push(dcmot::Detection::new(BBox::from_tlwh(x, y, w, h), score, 1080.0));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.txt");
        mot_io::write_detections(&path, &dets).unwrap();
        let parsed = mot_io::parse_detections(&path, 1080.0).unwrap();
        for (frame, rows) in &dets {
            for (a, b) in rows.iter().zip(&parsed[frame]) {
                prop_assert!((a.score - b.score).abs() <= 0.005 + 1e-9);
                prop_assert!((a.bbox.x1 - b.bbox.x1).abs() <= 0.005 + 1e-9);
                // pseudo-depth recomputed at load time stays consistent
                prop_assert!((a.pseudo_depth.value() - b.pseudo_depth.value()).abs() <= 0.015 + 1e-9);
            }
        }
    }
}
