//! Synthetic soccer field frames with known line geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::FeatureLabel;
use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, segment_segment_distance};
use crate::imaging::RgbImage;

/// Global illumination: a brightness factor and per-channel tint gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lighting {
    pub brightness: f64,
    pub tint: [f64; 3],
}

impl Default for Lighting {
    fn default() -> Self {
        Self {
            brightness: 1.0,
            tint: [1.0; 3],
        }
    }
}

impl Lighting {
    pub fn new(brightness: f64, tint: [f64; 3]) -> Self {
        Self { brightness, tint }
    }

    /// Channel value after lighting, before noise.
    #[inline]
    fn apply(&self, c: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| c[i] * self.brightness * self.tint[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Number of painted strokes.
    pub lines: usize,
    pub field_color: [u8; 3],
    pub stroke_color: [u8; 3],
    pub stroke_width: f64,
    pub min_stroke_length: f64,
    /// Paint a dark band above a field boundary along the top of the frame.
    pub boundary: bool,
    pub boundary_color: [u8; 3],
    /// Colored rectangles (robots, balls, goals) that are not field features.
    pub distractors: usize,
    pub lighting: Lighting,
    pub noise_sigma: f64,
    /// Clear distance kept between strokes, distractors and the frame edge.
    pub margin: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            lines: 6,
            field_color: [30, 130, 40],
            stroke_color: [255, 255, 255],
            stroke_width: 4.0,
            min_stroke_length: 80.0,
            boundary: false,
            boundary_color: [15, 15, 15],
            distractors: 0,
            lighting: Lighting::default(),
            noise_sigma: 0.0,
            margin: 16.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width < 16 || self.height < 16 {
            return bad(format!("frame {}x{} smaller than 16x16", self.width, self.height));
        }
        if !(self.stroke_width > 0.0) {
            return bad("stroke_width must be positive".into());
        }
        let lum = |c: [u8; 3]| c.iter().map(|&v| u32::from(v)).sum::<u32>();
        if lum(self.stroke_color) <= lum(self.field_color) {
            return bad("stroke color must be brighter than the field".into());
        }
        let usable = (self.width.min(self.height) as f64) - 2.0 * self.margin;
        if self.lines > 0 && self.min_stroke_length > usable * std::f64::consts::SQRT_2 {
            return bad(format!(
                "min_stroke_length {} does not fit inside the frame margins",
                self.min_stroke_length
            ));
        }
        if !(self.lighting.brightness > 0.0) || self.lighting.tint.iter().any(|t| !(*t > 0.0)) {
            return bad("lighting gains must be positive".into());
        }
        if !(self.noise_sigma >= 0.0) || !(self.margin >= 0.0) {
            return bad("noise_sigma and margin must be non-negative".into());
        }
        Ok(())
    }
}

/// Ground-truth feature in a synthetic frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLine {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    /// Painted width; zero for a single color transition such as a boundary.
    pub width: f64,
    pub class: FeatureLabel,
}

impl TruthLine {
    pub fn length(&self) -> f64 {
        (self.x2 - self.x1).hypot(self.y2 - self.y1)
    }

    /// The color transitions the line produces: both sides of a stroke, or
    /// the line itself for a boundary. Each as (start, end).
    pub fn edges(&self) -> Vec<([f64; 2], [f64; 2])> {
        if self.width == 0.0 {
            return vec![([self.x1, self.y1], [self.x2, self.y2])];
        }
        let len = self.length();
        let (nx, ny) = (-(self.y2 - self.y1) / len, (self.x2 - self.x1) / len);
        let h = self.width / 2.0;
        [-h, h]
            .iter()
            .map(|&o| ([self.x1 + o * nx, self.y1 + o * ny], [self.x2 + o * nx, self.y2 + o * ny]))
            .collect()
    }

    /// Distance from a point to the painted outline: the rim of the
    /// round-capped stroke, or the boundary line itself.
    pub fn edge_distance(&self, p: [f64; 2]) -> f64 {
        let d = point_segment_distance(p, [self.x1, self.y1], [self.x2, self.y2]);
        (d - self.width / 2.0).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image: RgbImage,
    pub truth_lines: Vec<TruthLine>,
    pub lighting: Lighting,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    color: [u8; 3],
}

impl Rect {
    fn distance_to_segment(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let corners = [
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x1, self.y1],
            [self.x0, self.y1],
        ];
        let inside = |p: [f64; 2]| p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1;
        if inside(a) || inside(b) {
            return 0.0;
        }
        (0..4)
            .map(|i| segment_segment_distance(a, b, corners[i], corners[(i + 1) % 4]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Non-field colors for distractor objects.
const DISTRACTOR_COLORS: [[u8; 3]; 5] = [[20, 20, 20], [200, 40, 30], [40, 50, 190], [128, 128, 128], [230, 140, 20]];

const PLACEMENT_ATTEMPTS: usize = 2000;

/// Renders a frame. The same seed and spec always yield the same bytes.
pub fn generate_scene(seed: u64, spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.width as f64, spec.height as f64);
    let m = spec.margin;
    let mut truth = Vec::new();

    // boundary runs across the top; strokes stay below it
    let mut field_top = m;
    let boundary = if spec.boundary {
        let b0 = rng.random_range(0.10 * h..0.22 * h);
        let b1 = rng.random_range(0.10 * h..0.22 * h);
        field_top = b0.max(b1) + m;
        truth.push(TruthLine {
            x1: 0.0,
            y1: b0,
            x2: w - 1.0,
            y2: b1,
            width: 0.0,
            class: FeatureLabel::FieldBoundary,
        });
        Some((b0, b1))
    } else {
        None
    };

    let separation = 2.0 * spec.stroke_width + m;
    let mut strokes: Vec<TruthLine> = Vec::new();
    for _ in 0..spec.lines {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let p0 = [rng.random_range(m..w - m), rng.random_range(field_top..h - m)];
            let p1 = [rng.random_range(m..w - m), rng.random_range(field_top..h - m)];
            if (p1[0] - p0[0]).hypot(p1[1] - p0[1]) < spec.min_stroke_length {
                continue;
            }
            let clear = strokes.iter().all(|s| {
                segment_segment_distance(p0, p1, [s.x1, s.y1], [s.x2, s.y2]) >= separation
            });
            if clear {
                strokes.push(TruthLine {
                    x1: p0[0],
                    y1: p0[1],
                    x2: p1[0],
                    y2: p1[1],
                    width: spec.stroke_width,
                    class: FeatureLabel::FieldLine,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidSpec(format!(
                "could not place {} separated strokes of length >= {} in a {}x{} frame",
                spec.lines, spec.min_stroke_length, spec.width, spec.height
            )));
        }
    }

    let mut rects = Vec::new();
    for _ in 0..spec.distractors {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let (rw, rh) = (rng.random_range(12.0..40.0), rng.random_range(12.0..60.0));
            let x0 = rng.random_range(m..(w - m - rw).max(m + 1.0));
            let y0 = rng.random_range(field_top..(h - m - rh).max(field_top + 1.0));
            let r = Rect {
                x0,
                y0,
                x1: x0 + rw,
                y1: y0 + rh,
                color: DISTRACTOR_COLORS[rng.random_range(0..DISTRACTOR_COLORS.len())],
            };
            let clear_strokes = strokes
                .iter()
                .all(|s| r.distance_to_segment([s.x1, s.y1], [s.x2, s.y2]) >= separation);
            let clear_rects = rects.iter().all(|o: &Rect| {
                r.x1 + m < o.x0 || o.x1 + m < r.x0 || r.y1 + m < o.y0 || o.y1 + m < r.y0
            });
            if clear_strokes && clear_rects {
                rects.push(r);
                break;
            }
        }
    }

    let lit = |c: [u8; 3]| spec.lighting.apply(c.map(f64::from));
    let field = lit(spec.field_color);
    let mut canvas = vec![field; spec.width * spec.height];

    if let (Some((b0, b1)), true) = (boundary, spec.boundary) {
        let dark = lit(spec.boundary_color);
        for y in 0..spec.height {
            for x in 0..spec.width {
                let (cx, cy) = (x as f64, y as f64);
                let by = b0 + (b1 - b0) * cx / (w - 1.0);
                // signed distance below the boundary, anti-aliased over one pixel
                let cover = (by - cy + 0.5).clamp(0.0, 1.0);
                if cover > 0.0 {
                    let px = &mut canvas[y * spec.width + x];
                    *px = [0, 1, 2].map(|i| px[i] * (1.0 - cover) + dark[i] * cover);
                }
            }
        }
    }

    for r in &rects {
        let c = lit(r.color);
        for y in r.y0.round() as usize..(r.y1.round() as usize).min(spec.height) {
            for x in r.x0.round() as usize..(r.x1.round() as usize).min(spec.width) {
                canvas[y * spec.width + x] = c;
            }
        }
    }

    let white = lit(spec.stroke_color);
    for s in &strokes {
        let half = s.width / 2.0;
        let pad = half + 1.0;
        let xs = (s.x1.min(s.x2) - pad).floor().max(0.0) as usize;
        let xe = ((s.x1.max(s.x2) + pad).ceil() as usize).min(spec.width - 1);
        let ys = (s.y1.min(s.y2) - pad).floor().max(0.0) as usize;
        let ye = ((s.y1.max(s.y2) + pad).ceil() as usize).min(spec.height - 1);
        for y in ys..=ye {
            for x in xs..=xe {
                let d = point_segment_distance([x as f64, y as f64], [s.x1, s.y1], [s.x2, s.y2]);
                let cover = (half + 0.5 - d).clamp(0.0, 1.0);
                if cover > 0.0 {
                    let px = &mut canvas[y * spec.width + x];
                    *px = [0, 1, 2].map(|i| px[i] * (1.0 - cover) + white[i] * cover);
                }
            }
        }
    }

    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?)
    } else {
        None
    };
    let mut data = Vec::with_capacity(spec.width * spec.height * 3);
    for px in &canvas {
        for &v in px {
            let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            data.push((v + n).round().clamp(0.0, 255.0) as u8);
        }
    }

    truth.extend(strokes);
    Ok(SyntheticScene {
        image: RgbImage::new(spec.width, spec.height, data)?,
        truth_lines: truth,
        lighting: spec.lighting,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_clean_stroke() {
        let spec = SceneSpec {
            lines: 1,
            ..Default::default()
        };
        let s = generate_scene(3, &spec).unwrap();
        assert_eq!(s.truth_lines.len(), 1);
        let t = &s.truth_lines[0];
        assert!(t.length() >= spec.min_stroke_length);
        let colors: std::collections::BTreeSet<[u8; 3]> =
            s.image.data().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        assert!(colors.contains(&[30, 130, 40]) && colors.contains(&[255, 255, 255]));
        // every non-field pixel lies on the stroke
        for y in 0..spec.height {
            for x in 0..spec.width {
                if s.image.pixel(x, y) != [30, 130, 40] {
                    let d = point_segment_distance([x as f64, y as f64], [t.x1, t.y1], [t.x2, t.y2]);
                    assert!(d <= t.width / 2.0 + 0.5);
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SceneSpec {
            noise_sigma: 4.0,
            distractors: 3,
            boundary: true,
            ..Default::default()
        };
        let a = generate_scene(11, &spec).unwrap();
        let b = generate_scene(11, &spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.image, generate_scene(12, &spec).unwrap().image);
    }

    #[test]
    fn brightness_scales_field_pixels() {
        let base = SceneSpec {
            lines: 3,
            ..Default::default()
        };
        let dim = SceneSpec {
            lighting: Lighting::new(0.6, [1.0; 3]),
            ..base.clone()
        };
        let a = generate_scene(5, &base).unwrap();
        let b = generate_scene(5, &dim).unwrap();
        assert_eq!(a.truth_lines, b.truth_lines);
        let mut checked = 0;
        for (pa, pb) in a.image.data().iter().zip(b.image.data()) {
            if *pa > 0 && *pa < 255 {
                let expected = f64::from(*pa) * 0.6;
                // both values were rounded once
                assert!((f64::from(*pb) - expected).abs() <= 1.0, "{pa} -> {pb}");
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn invalid_specs() {
        let s = SceneSpec {
            stroke_color: [10, 10, 10],
            ..Default::default()
        };
        assert!(matches!(generate_scene(0, &s), Err(Error::InvalidSpec(_))));
        let s = SceneSpec {
            min_stroke_length: 5000.0,
            ..Default::default()
        };
        assert!(generate_scene(0, &s).is_err());
        let s = SceneSpec {
            lines: 400,
            ..Default::default()
        };
        assert!(generate_scene(0, &s).is_err());
    }

    #[test]
    fn stroke_edges_are_offset() {
        let t = TruthLine {
            x1: 10.0,
            y1: 10.0,
            x2: 50.0,
            y2: 10.0,
            width: 4.0,
            class: FeatureLabel::FieldLine,
        };
        let e = t.edges();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].0[1], 8.0);
        assert_eq!(e[1].0[1], 12.0);
        assert_eq!(t.edge_distance([30.0, 10.0]), 2.0);
        assert_eq!(t.edge_distance([54.0, 10.0]), 2.0);
        assert_eq!(t.edge_distance([30.0, 12.5]), 0.5);
    }
}
