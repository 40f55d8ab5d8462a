//! Bounding boxes, IoU, and the pseudo-depth proxy.

use serde::{Deserialize, Serialize};

use crate::assignment::CostMatrix;

/// Axis-aligned box in pixel coordinates, top-left corner `(x1, y1)` and
/// bottom-right corner `(x2, y2)`. The image origin is top-left and y
/// grows downward, so `y2` is the box bottom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    /// Expects `x2 >= x1` and `y2 >= y1`.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        debug_assert!(
            x2 >= x1 && y2 >= y1,
            "degenerate corners: ({x1},{y1},{x2},{y2})"
        );
        Self { x1, y1, x2, y2 }
    }

    /// From `(left, top, width, height)`.
    pub fn from_tlwh(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self::new(x, y, x + w, y + h)
    }

    /// To `(left, top, width, height)`.
    pub fn to_tlwh(&self) -> (f64, f64, f64, f64) {
        (self.x1, self.y1, self.width(), self.height())
    }

    /// From `(center-x, center-y, aspect = w/h, height)`.
    pub fn from_cxcyah(cx: f64, cy: f64, a: f64, h: f64) -> Self {
        let w = a * h;
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    /// To `(center-x, center-y, aspect = w/h, height)`.
    pub fn to_cxcyah(&self) -> (f64, f64, f64, f64) {
        let w = self.width();
        let h = self.height();
        (
            (self.x1 + self.x2) / 2.0,
            (self.y1 + self.y2) / 2.0,
            w / h,
            h,
        )
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Shift by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }
}

/// Image-space depth proxy: distance from a box's bottom edge to the
/// bottom edge of the image. Smaller values are nearer to the camera;
/// negative when the box extends past the image bottom. Only the
/// relative order between values carries meaning.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PseudoDepth(pub f64);

impl PseudoDepth {
    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Depth proxy of `b` in an image of height `image_height`. No clamping:
/// ordering must survive boxes that extend below the image.
pub fn pseudo_depth(b: &BBox, image_height: f64) -> PseudoDepth {
    PseudoDepth(image_height - b.y2)
}

/// Intersection over union in `[0, 1]`. Zero-area boxes score 0 against
/// everything, themselves included, so they can never win a match.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Cost matrix of pairwise IoU distances `1 - iou`, rows x cols.
pub fn iou_distance_matrix(rows: &[BBox], cols: &[BBox]) -> CostMatrix {
    CostMatrix::from_fn(rows.len(), cols.len(), |i, j| 1.0 - iou(&rows[i], &cols[j]))
}
