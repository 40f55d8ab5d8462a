//! Static SVG frames with boxes colored by depth level.

use std::fmt::Write as _;

use dcmot::dcm::{depth_range, partition, split_levels};
use dcmot::geometry::{pseudo_depth, PseudoDepth};
use dcmot::mot_io::ResultRow;

/// Level palette, nearest level first. Cycled when k exceeds its length.
const PALETTE: [&str; 8] = [
    "#e41a1c", "#ff7f00", "#ffd700", "#4daf4a", "#00ced1", "#377eb8", "#984ea3", "#f781bf",
];

/// Render one frame. Boxes are assigned to `k` depth levels over this
/// frame's own depth range; each level gets a palette color and every
/// box is labeled `id:level`.
pub fn render_frame(rows: &[ResultRow], image_width: f64, image_height: f64, k: usize) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{image_width}" height="{image_height}" viewBox="0 0 {image_width} {image_height}">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect width="100%" height="100%" fill="#202020"/>"##
    );

    let depths: Vec<PseudoDepth> = rows
        .iter()
        .map(|r| pseudo_depth(&r.bbox, image_height))
        .collect();
    let levels = match depth_range(&depths) {
        Some((lo, hi)) => {
            let intervals = split_levels(lo, hi, k).expect("k >= 1");
            let part = partition(&depths, &intervals);
            let mut level_of = vec![0usize; rows.len()];
            for (level, subset) in part.subsets.iter().enumerate() {
                for &item in subset {
                    level_of[item] = level;
                }
            }
            level_of
        }
        None => Vec::new(),
    };

    for (row, &level) in rows.iter().zip(&levels) {
        let color = PALETTE[level % PALETTE.len()];
        let b = &row.bbox;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{color}" stroke-width="3"/>"#,
            b.x1,
            b.y1,
            b.width(),
            b.height()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}" font-size="18" font-family="monospace">{}:{level}</text>"#,
            b.x1,
            (b.y1 - 4.0).max(14.0),
            row.id
        );
    }
    svg.push_str("</svg>\n");
    svg
}
