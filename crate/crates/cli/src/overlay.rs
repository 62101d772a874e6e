//! Debug overlays: the frame with every classified segment drawn on top.

use std::path::Path;

use anyhow::{Context, Result};
use pitchlines::{bresenham, ClassifiedSegmentF64, FeatureLabel, Pixel, RgbImage};

pub const LINE_COLOR: [u8; 3] = [0, 255, 0];
pub const BOUNDARY_COLOR: [u8; 3] = [0, 0, 255];
pub const REJECTED_COLOR: [u8; 3] = [255, 0, 0];

/// On and off run lengths of the dashed pattern, in pixels.
const DASH: (usize, usize) = (4, 3);

pub fn draw(img: &RgbImage, segments: &[ClassifiedSegmentF64]) -> RgbImage {
    let mut out = img.clone();
    // rejected first so accepted features stay on top
    let mut order: Vec<&ClassifiedSegmentF64> = segments.iter().collect();
    order.sort_by_key(|s| s.label.is_feature());
    for s in order {
        let a = Pixel::new(s.segment.x1.round() as i32, s.segment.y1.round() as i32);
        let b = Pixel::new(s.segment.x2.round() as i32, s.segment.y2.round() as i32);
        let (color, dashed) = match s.label {
            FeatureLabel::FieldLine => (LINE_COLOR, false),
            FeatureLabel::FieldBoundary => (BOUNDARY_COLOR, false),
            FeatureLabel::None => (REJECTED_COLOR, true),
        };
        for (i, p) in bresenham(a, b).into_iter().enumerate() {
            if dashed && i % (DASH.0 + DASH.1) >= DASH.0 {
                continue;
            }
            if p.x >= 0 && p.y >= 0 && (p.x as usize) < out.width() && (p.y as usize) < out.height() {
                out.set_pixel(p.x as usize, p.y as usize, color);
            }
        }
    }
    out
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .context("image buffer size mismatch")?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("writing {}", path.display()))
}
