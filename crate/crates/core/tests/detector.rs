use pitchlines::elsed::{aligned_fraction, detect_with_field, draw_segments, extract_anchors};
use pitchlines::imaging::{gaussian_smooth, sobel_gradients, to_gray, GradientField};
use pitchlines::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// White butt-capped stroke on black, anti-aliased, skipping the part of the
/// centre line whose arc position falls in `gap`.
fn render(w: usize, h: usize, a: [f64; 2], b: [f64; 2], width: f64, gap: Option<(f64, f64)>) -> RgbImage {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let (ux, uy) = ((b[0] - a[0]) / len, (b[1] - a[1]) / len);
    let mut img = RgbImage::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 - a[0], y as f64 - a[1]);
            let along = px * ux + py * uy;
            let across = (-px * uy + py * ux).abs();
            let mut cover = (width / 2.0 + 0.5 - across).clamp(0.0, 1.0) * (along + 0.5).clamp(0.0, 1.0) * (len - along + 0.5).clamp(0.0, 1.0);
            if let Some((g0, g1)) = gap {
                cover *= ((g0 - along + 0.5).clamp(0.0, 1.0) + (along - g1 + 0.5).clamp(0.0, 1.0)).min(1.0);
            }
            let v = (255.0 * cover).round() as u8;
            img.set_pixel(x, y, [v; 3]);
        }
    }
    img
}

/// Endpoints of the two long sides of the stroke.
fn edge_ends(a: [f64; 2], b: [f64; 2], width: f64) -> [[[f64; 2]; 2]; 2] {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let (nx, ny) = (-(b[1] - a[1]) / len * width / 2.0, (b[0] - a[0]) / len * width / 2.0);
    [-1.0, 1.0].map(|s| [[a[0] + s * nx, a[1] + s * ny], [b[0] + s * nx, b[1] + s * ny]])
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn ends_match(seg: &Segment, edge: &[[f64; 2]; 2], tol: f64) -> bool {
    let (s, e) = ([seg.x1, seg.y1], [seg.x2, seg.y2]);
    (dist(s, edge[0]) <= tol && dist(e, edge[1]) <= tol) || (dist(s, edge[1]) <= tol && dist(e, edge[0]) <= tol)
}

const STROKES: [([f64; 2], [f64; 2]); 4] = [
    ([12.0, 10.0], [50.0, 52.0]),
    ([8.0, 32.0], [56.0, 32.0]),
    ([30.0, 6.0], [34.0, 58.0]),
    ([10.0, 50.0], [54.0, 20.0]),
];

/// Gap ends and stroke caps are real but short edges; keep them out.
fn params64() -> DetectorParams {
    DetectorParams {
        min_line_length: Some(10),
        ..Default::default()
    }
}

#[test]
fn single_stroke_gives_one_segment_per_side() {
    for (a, b) in STROKES {
        let img = render(64, 64, a, b, 4.0, None);
        let segs = detect(&img, &params64()).unwrap();
        assert_eq!(segs.len(), 2, "{a:?}->{b:?}: {segs:?}");
        for edge in edge_ends(a, b, 4.0) {
            assert!(
                segs.iter().any(|s| ends_match(s, &edge, 2.0)),
                "{a:?}->{b:?}: no segment ends at {edge:?}, got {:?}",
                segs.iter().map(|s| [s.x1, s.y1, s.x2, s.y2]).collect::<Vec<_>>()
            );
        }
    }
}

#[test]
fn short_gap_is_bridged() {
    for (a, b) in STROKES {
        let len = dist(a, b);
        let mid = len / 2.0;
        let img = render(64, 64, a, b, 4.0, Some((mid - 1.5, mid + 1.5)));
        let segs = detect(&img, &params64()).unwrap();
        assert_eq!(segs.len(), 2, "{a:?}->{b:?}: {:?}", segs.iter().map(|s| [s.x1, s.y1, s.x2, s.y2]).collect::<Vec<_>>());
        for s in &segs {
            assert!(s.length > 0.8 * len, "{a:?}->{b:?}: segment of {:.1} px", s.length);
        }
    }
}

#[test]
fn detection_is_deterministic() {
    let spec = eval::SceneSpec {
        noise_sigma: 3.0,
        distractors: 3,
        boundary: true,
        ..Default::default()
    };
    let scene = eval::generate_scene(21, &spec).unwrap();
    let p = DetectorParams::default();
    assert_eq!(detect(&scene.image, &p).unwrap(), detect(&scene.image, &p).unwrap());
}

#[test]
fn six_painted_lines_give_six_to_twelve_segments() {
    let spec = eval::SceneSpec {
        lines: 6,
        ..Default::default()
    };
    for seed in 0..10 {
        let scene = eval::generate_scene(seed, &spec).unwrap();
        let n = detect(&scene.image, &DetectorParams::default()).unwrap().len();
        assert!((6..=12).contains(&n), "seed {seed}: {n} segments");
    }
}

#[test]
fn anchors_only_on_the_ridge_column() {
    let mut img = GrayImage::filled(16, 16, 20);
    for y in 0..16 {
        for x in 9..16 {
            img.set(x, y, 200);
        }
        img.set(8, y, 110);
    }
    let field = sobel_gradients(&img, 1).unwrap();
    let anchors = extract_anchors(&field, 1, 1);
    assert!(!anchors.is_empty());
    // exhaustive oracle: the columns whose magnitude is the row maximum
    for a in &anchors {
        let row_max = (1..15).map(|x| field.mag_at(x, a.y)).max().unwrap();
        assert_eq!(a.mag, row_max);
    }
    assert!(extract_anchors(&field, 1, u16::MAX).is_empty());
}

/// Field of i.i.d. random gradient directions with constant magnitude.
fn noise_field(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GradientField {
    let (mut gx, mut gy) = (vec![0i16; w * h], vec![0i16; w * h]);
    for i in 0..w * h {
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        gx[i] = (500.0 * t.cos()).round() as i16;
        gy[i] = (500.0 * t.sin()).round() as i16;
    }
    GradientField::from_components(w, h, gx, gy, 1).unwrap()
}

#[test]
fn noise_segments_fail_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = DetectorParams {
        validation_angle_tol: 15.0,
        ..Default::default()
    };
    let trials = 5000;
    let mut accepted = 0;
    for _ in 0..trials {
        let field = noise_field(&mut rng, 48, 48);
        let (a, b) = (Pixel::new(rng.random_range(1..47), 2), Pixel::new(rng.random_range(1..47), 45));
        let pixels = bresenham(a, b);
        assert!(pixels.len() >= 30);
        let seg = Segment {
            x1: f64::from(a.x),
            y1: f64::from(a.y),
            x2: f64::from(b.x),
            y2: f64::from(b.y),
            length: dist([f64::from(a.x), f64::from(a.y)], [f64::from(b.x), f64::from(b.y)]),
            pixels,
        };
        let f = aligned_fraction(&seg, &field, params.validation_angle_tol);
        accepted += usize::from(f >= params.aligned_fraction);
    }
    assert!(accepted as f64 / trials as f64 <= 0.001, "{accepted}/{trials} accepted");
}

#[test]
fn drawn_segments_are_line_like() {
    let spec = eval::SceneSpec {
        noise_sigma: 4.0,
        distractors: 4,
        boundary: true,
        ..Default::default()
    };
    let params = DetectorParams::default();
    for seed in 0..5 {
        let scene = eval::generate_scene(seed, &spec).unwrap();
        let smooth = gaussian_smooth(&to_gray(&scene.image), params.gaussian_kernel, params.gaussian_sigma).unwrap();
        let field = sobel_gradients(&smooth, params.gradient_threshold).unwrap();
        let anchors = extract_anchors(&field, params.scan_interval, params.anchor_threshold);
        assert!(anchors.iter().all(|a| field.mag_at(a.x, a.y) > 0));
        for s in draw_segments(&field, &anchors, &params) {
            assert!(s.pixels.iter().all(|p| s.line_distance(f64::from(p.x), f64::from(p.y)) <= 2.0));
        }
        let (segs, _) = detect_with_field(&scene.image, &params).unwrap();
        assert!(!segs.is_empty());
    }
}
