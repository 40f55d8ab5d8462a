//! Depth-cascaded multi-object tracking.
//!
//! A tracking-by-detection association engine that ranks targets by a
//! cheap image-space depth proxy (distance from a box's bottom edge to
//! the bottom of the image) and matches tracks to detections level by
//! level, nearest first. The crate also ships the supporting pieces
//! needed to run and score it end to end: a constant-velocity Kalman
//! filter, an exact linear-assignment solver, MOT Challenge file IO,
//! CLEAR/IDF1 evaluation, and a deterministic synthetic crowd
//! simulator for benchmarking occlusion handling.

pub mod assignment;
pub mod dcm;
pub mod geometry;
pub mod metrics;
pub mod mot_io;
pub mod motion;
pub mod sim;
pub mod tracker;

pub use geometry::{iou, iou_distance_matrix, pseudo_depth, BBox, PseudoDepth};
pub use tracker::{Detection, FrameResult, Tracker, TrackerConfig};
