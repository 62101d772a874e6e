#![allow(dead_code)]

use pitchlines::dataset::SegmentRecord;
use pitchlines::{FeatureLabel, GrayImage, Pixel, TransitionRef};

/// Record whose horizontal gradient sits `angle` degrees off the GW
/// reference with projection `proj`.
pub fn gw_record(angle: f64, proj: f64, length: f64, label: FeatureLabel) -> SegmentRecord {
    let u = TransitionRef::<f64>::green_white().unit();
    let w = {
        let c = [u[1], -u[0], 0.0];
        let n = (c[0] * c[0] + c[1] * c[1]).sqrt();
        c.map(|x| x / n)
    };
    let side = proj * angle.to_radians().tan();
    SegmentRecord {
        image: "constructed.png".into(),
        x1: 0.0,
        y1: 0.0,
        x2: length,
        y2: 0.0,
        length,
        grad_h: [0, 1, 2].map(|i| proj * u[i] + side * w[i]),
        grad_v: [0.0; 3],
        predicted: FeatureLabel::None,
        human_label: Some(label),
    }
}

/// Nested-loop 3x3 Sobel at an interior pixel.
pub fn naive_sobel(img: &GrayImage, x: usize, y: usize) -> (i32, i32) {
    const K: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
    let (mut sx, mut sy) = (0, 0);
    for j in 0..3 {
        for i in 0..3 {
            let v = i32::from(img.get(x + i - 1, y + j - 1));
            sx += K[j][i] * v;
            sy += K[i][j] * v;
        }
    }
    (sx, sy)
}

/// Closed-form rasterization: the minor coordinate after k major steps is
/// the ideal offset rounded to nearest, halves towards the start.
pub fn reference_line(a: Pixel, b: Pixel) -> Vec<Pixel> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let x_major = dx.abs() >= dy.abs();
    let (dm, dn) = if x_major { (dx, dy) } else { (dy, dx) };
    let (am, an) = (dm.abs() as i64, dn.abs() as i64);
    (0..=am)
        .map(|k| {
            let minor = if am == 0 { 0 } else { (2 * k * an + am - 1).div_euclid(2 * am) } as i32;
            let (major, minor) = (k as i32 * dm.signum(), minor * dn.signum());
            if x_major {
                Pixel::new(a.x + major, a.y + minor)
            } else {
                Pixel::new(a.x + minor, a.y + major)
            }
        })
        .collect()
}
