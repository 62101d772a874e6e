//! Edge-drawing line segment detector.
//!
//! Pipeline: luminance, Gaussian smoothing, Sobel, anchor extraction, then
//! edge drawing from the strongest anchors. While a chain is drawn a line
//! is fitted to it; each step inspects only the 2 (after a diagonal move) or
//! 3 (after a straight move) pixels that keep the chain consistent with a
//! rasterized line. When the chain loses gradient support or bends away
//! from the fitted line, the drawer jumps ahead along the fitted direction
//! and resumes from the first supported pixel after the gap. Every such
//! jump is kept as a checkpoint and rolled back if the pixels drawn after
//! it do not support the line. Surviving chains are validated by the share
//! of pixels whose gradient is aligned with the segment normal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bresenham, LineFit, Pixel};
use crate::imaging::{gaussian_smooth, sobel_gradients, to_gray, EdgeOrientation, GradientField, RgbImage};

/// Pixels a chain needs before its line fit is trusted for steering.
const MIN_FIT_PIXELS: usize = 8;
/// Pixels that must follow a gap before the jump is kept.
const MIN_RESUME_PIXELS: usize = 5;
/// Largest perpendicular distance of any chain pixel from the final line.
const MAX_ENDPOINT_DEVIATION: f64 = 2.0;
/// A pixel continues a fitted chain only if its gradient is within this
/// many degrees of the line normal, i.e. its edge runs the same way.
const CONTINUATION_TOL_DEG: f64 = 45.0;
/// End pixels weaker than this share of the chain's median magnitude are cut.
const END_MAGNITUDE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub gaussian_kernel: usize,
    pub gaussian_sigma: f64,
    /// L1 gradient magnitudes below this are discarded (0..=4080 scale).
    pub gradient_threshold: u16,
    /// Margin by which an anchor must exceed both perpendicular neighbours.
    pub anchor_threshold: u16,
    pub scan_interval: usize,
    /// Minimum chain length in pixels; `None` means 5% of the image diagonal.
    pub min_line_length: Option<usize>,
    /// Angular tolerance in degrees for a pixel to count as aligned.
    pub validation_angle_tol: f64,
    pub aligned_fraction: f64,
    /// Largest distance a new pixel may have from the running line fit.
    pub max_fit_error: f64,
    /// Longest run of unsupported pixels bridged along the fitted direction.
    pub skip_budget: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            gaussian_kernel: 5,
            gaussian_sigma: 1.0,
            gradient_threshold: 30,
            anchor_threshold: 8,
            scan_interval: 2,
            min_line_length: None,
            validation_angle_tol: 22.5,
            aligned_fraction: 0.5,
            max_fit_error: 1.5,
            skip_budget: 5,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParam(msg.to_string()));
        if self.gaussian_kernel < 3 || self.gaussian_kernel % 2 == 0 {
            return bad("gaussian_kernel must be odd and >= 3");
        }
        if !(self.gaussian_sigma > 0.0) {
            return bad("gaussian_sigma must be positive");
        }
        if self.gradient_threshold == 0 || self.anchor_threshold == 0 {
            return bad("gradient_threshold and anchor_threshold must be positive");
        }
        if self.scan_interval == 0 {
            return bad("scan_interval must be >= 1");
        }
        if self.min_line_length == Some(0) {
            return bad("min_line_length must be positive");
        }
        if !(self.validation_angle_tol > 0.0 && self.validation_angle_tol <= 90.0) {
            return bad("validation_angle_tol must lie in (0, 90]");
        }
        if !(self.aligned_fraction > 0.0 && self.aligned_fraction <= 1.0) {
            return bad("aligned_fraction must lie in (0, 1]");
        }
        if !(self.max_fit_error > 0.0) {
            return bad("max_fit_error must be positive");
        }
        Ok(())
    }

    /// Resolved minimum chain length for an image of the given size.
    pub fn min_line_length_for(&self, width: usize, height: usize) -> usize {
        self.min_line_length.unwrap_or_else(|| {
            let diag = ((width * width + height * height) as f64).sqrt();
            ((0.05 * diag).round() as usize).max(2)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Anchor {
    pub x: usize,
    pub y: usize,
    pub orient: EdgeOrientation,
    pub mag: u16,
}

/// A drawn line segment: fitted sub-pixel endpoints plus the pixel chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub length: f64,
    pub pixels: Vec<Pixel>,
}

impl Segment {
    /// Unit normal of the endpoint line; +y for degenerate segments.
    pub fn normal(&self) -> [f64; 2] {
        let (dx, dy) = (self.x2 - self.x1, self.y2 - self.y1);
        let len = dx.hypot(dy);
        if len == 0.0 {
            [0.0, 1.0]
        } else {
            [-dy / len, dx / len]
        }
    }

    /// Perpendicular distance from a point to the infinite endpoint line.
    pub fn line_distance(&self, x: f64, y: f64) -> f64 {
        let [nx, ny] = self.normal();
        ((x - self.x1) * nx + (y - self.y1) * ny).abs()
    }
}

/// Finds gradient ridges on every `scan_interval`-th row and every
/// `scan_interval`-th column.
pub fn extract_anchors(field: &GradientField, scan_interval: usize, anchor_threshold: u16) -> Vec<Anchor> {
    let (w, h) = (field.width(), field.height());
    let step = scan_interval.max(1);
    let mut anchors = Vec::new();
    if w < 3 || h < 3 {
        return anchors;
    }
    for y in 1..h - 1 {
        let row_scanned = (y - 1) % step == 0;
        for x in 1..w - 1 {
            if !row_scanned && (x - 1) % step != 0 {
                continue;
            }
            let i = field.index(x, y);
            let m = field.mag[i];
            if m == 0 {
                continue;
            }
            let orient = field.orient[i];
            let (a, b) = match orient {
                EdgeOrientation::Horizontal => (field.mag[i - w], field.mag[i + w]),
                EdgeOrientation::Vertical => (field.mag[i - 1], field.mag[i + 1]),
            };
            let t = u32::from(anchor_threshold);
            if u32::from(m) >= u32::from(a) + t && u32::from(m) >= u32::from(b) + t {
                anchors.push(Anchor { x, y, orient, mag: m });
            }
        }
    }
    anchors.sort_by(|p, q| q.mag.cmp(&p.mag).then(p.y.cmp(&q.y)).then(p.x.cmp(&q.x)));
    anchors
}

/// Angular error in degrees between a pixel gradient and a unit normal,
/// folded into [0, 90]. Pixels without gradient magnitude count as 90.
#[inline]
fn angular_error(field: &GradientField, i: usize, normal: [f64; 2]) -> f64 {
    if field.mag[i] == 0 {
        return 90.0;
    }
    let (gx, gy) = (f64::from(field.gx[i]), f64::from(field.gy[i]));
    let norm = gx.hypot(gy);
    let cos = ((gx * normal[0] + gy * normal[1]).abs() / norm).min(1.0);
    cos.acos().to_degrees()
}

/// Share of chain pixels whose gradient lies within `tol_deg` of the segment normal.
pub fn aligned_fraction(seg: &Segment, field: &GradientField, tol_deg: f64) -> f64 {
    if seg.pixels.is_empty() {
        return 0.0;
    }
    let normal = seg.normal();
    let aligned = seg
        .pixels
        .iter()
        .filter(|p| field.contains(p.x, p.y))
        .filter(|p| angular_error(field, field.index(p.x as usize, p.y as usize), normal) < tol_deg)
        .count();
    aligned as f64 / seg.pixels.len() as f64
}

pub fn validate_segment(seg: &Segment, field: &GradientField, params: &DetectorParams) -> bool {
    aligned_fraction(seg, field, params.validation_angle_tol) >= params.aligned_fraction
}

/// Full detector: gray, smooth, gradients, anchors, drawing, validation.
pub fn detect(img: &RgbImage, params: &DetectorParams) -> Result<Vec<Segment>> {
    Ok(detect_with_field(img, params)?.0)
}

/// As [`detect`], also returning the gradient field the segments were drawn on.
pub fn detect_with_field(img: &RgbImage, params: &DetectorParams) -> Result<(Vec<Segment>, GradientField)> {
    params.validate()?;
    if img.width() < 16 || img.height() < 16 {
        return Err(Error::InvalidParam(format!(
            "detection needs at least 16x16 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let gray = to_gray(img);
    let smooth = gaussian_smooth(&gray, params.gaussian_kernel, params.gaussian_sigma)?;
    let field = sobel_gradients(&smooth, params.gradient_threshold)?;
    let anchors = extract_anchors(&field, params.scan_interval, params.anchor_threshold);
    let segments = draw_segments(&field, &anchors, params)
        .into_iter()
        .filter(|s| validate_segment(s, &field, params))
        .collect();
    Ok((segments, field))
}

/// Draws chains from anchors, strongest first, and fits segments to them.
pub fn draw_segments(field: &GradientField, anchors: &[Anchor], params: &DetectorParams) -> Vec<Segment> {
    let mut drawer = Drawer {
        field,
        params,
        visited: vec![false; field.width() * field.height()],
        min_len: params.min_line_length_for(field.width(), field.height()),
    };
    let mut out = Vec::new();
    for a in anchors {
        let i = field.index(a.x, a.y);
        if drawer.visited[i] || field.mag[i] == 0 {
            continue;
        }
        drawer.trace(Pixel::new(a.x as i32, a.y as i32), a.orient, &mut out);
    }
    out
}

/// A chain under construction.
#[derive(Debug, Clone, Default)]
struct Chain {
    pixels: Vec<Pixel>,
    /// Parallel to `pixels`: true for pixels bridged across a gap.
    bridged: Vec<bool>,
    fit: LineFit<f64>,
}

impl Chain {
    fn start(p: Pixel) -> Self {
        let mut c = Chain::default();
        c.push(p, false);
        c
    }

    fn push(&mut self, p: Pixel, bridged: bool) {
        self.pixels.push(p);
        self.bridged.push(bridged);
        if !bridged {
            self.fit.push(f64::from(p.x), f64::from(p.y));
        }
    }

    fn last(&self) -> Pixel {
        *self.pixels.last().expect("chain never empty")
    }

    fn reverse(&mut self) {
        self.pixels.reverse();
        self.bridged.reverse();
    }
}

/// Rollback point recorded when a gap is bridged.
#[derive(Debug, Clone, Copy)]
struct Checkpoint {
    len: usize,
    fit: LineFit<f64>,
    /// Index of the first pixel drawn after the gap.
    resume_at: usize,
}

struct Drawer<'a> {
    field: &'a GradientField,
    params: &'a DetectorParams,
    visited: Vec<bool>,
    min_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Step(i32, i32);

impl Step {
    fn is_diagonal(self) -> bool {
        self.0 != 0 && self.1 != 0
    }
}

impl<'a> Drawer<'a> {
    #[inline]
    fn idx(&self, p: Pixel) -> usize {
        self.field.index(p.x as usize, p.y as usize)
    }

    /// In bounds, has gradient, not yet claimed.
    #[inline]
    fn is_free_edge(&self, p: Pixel) -> bool {
        if !self.field.contains(p.x, p.y) {
            return false;
        }
        let i = self.idx(p);
        self.field.mag[i] > 0 && !self.visited[i]
    }

    fn claim(&mut self, p: Pixel) {
        let i = self.idx(p);
        self.visited[i] = true;
    }

    fn trace(&mut self, anchor: Pixel, orient: EdgeOrientation, out: &mut Vec<Segment>) {
        self.claim(anchor);
        let axis = match orient {
            EdgeOrientation::Vertical => [0.0, 1.0],
            EdgeOrientation::Horizontal => [1.0, 0.0],
        };
        let mut chain = Chain::start(anchor);
        let mut finished = Vec::new();

        // Backward half first; pieces split off beyond the anchor's chain are final.
        self.walk(&mut chain, [-axis[0], -axis[1]], true, &mut finished);
        chain.reverse();
        let heading = if chain.pixels.len() > 1 {
            let first = chain.pixels[0];
            let v = [f64::from(anchor.x - first.x), f64::from(anchor.y - first.y)];
            let n = v[0].hypot(v[1]);
            [v[0] / n, v[1] / n]
        } else {
            axis
        };
        self.walk(&mut chain, heading, false, &mut finished);
        finished.push(chain);

        for c in finished {
            let drawn = c.pixels.clone();
            match self.finish(c) {
                Some(seg) => out.push(seg),
                // discarded chains must not block longer edges drawn later
                None => {
                    for p in drawn {
                        let i = self.idx(p);
                        self.visited[i] = false;
                    }
                }
            }
        }
    }

    /// Extends `chain` at its last pixel in the direction of `heading`.
    ///
    /// When the chain must be split, the remainder is drawn into new chains
    /// pushed to `finished`. With `keep_first`, `chain` itself stays the
    /// caller's (its remaining half is drawn later); otherwise `chain` ends
    /// up holding the last open piece.
    fn walk(&mut self, chain: &mut Chain, mut heading: [f64; 2], keep_first: bool, finished: &mut Vec<Chain>) {
        let mut detached: Option<Chain> = None;
        let mut prev: Option<Step> = None;
        let mut pending: Option<Checkpoint> = None;

        loop {
            let active: &mut Chain = match detached.as_mut() {
                Some(c) => c,
                None => &mut *chain,
            };
            if active.fit.len() >= MIN_FIT_PIXELS {
                let mut d = active.fit.direction();
                if d[0] * heading[0] + d[1] * heading[1] < 0.0 {
                    d = [-d[0], -d[1]];
                }
                heading = d;
            }
            let main = main_step(heading);
            let cur = active.last();
            if self.meets_other_chain(active, main, prev) {
                if let Some(cp) = pending.take() {
                    if !self.jump_supported(active, cp) {
                        self.rollback(active, cp);
                    }
                }
                break;
            }
            let best = self.best_candidate(cur, main, prev, None);
            // once the line is known, only pixels whose gradient agrees with it continue it
            let along = if active.fit.len() >= MIN_FIT_PIXELS {
                self.best_candidate(cur, main, prev, Some(active.fit.normal()))
            } else {
                best
            };
            let fit_ok = |c: &Chain, p: Pixel| {
                c.fit.len() < MIN_FIT_PIXELS
                    || c.fit.distance(f64::from(p.x), f64::from(p.y)) <= self.params.max_fit_error
            };

            if let Some((p, step)) = along {
                if fit_ok(active, p) {
                    active.push(p, false);
                    self.claim(p);
                    prev = Some(step);
                    continue;
                }
            }

            // Discontinuity: settle the previous jump before trying another.
            if let Some(cp) = pending.take() {
                if !self.jump_supported(active, cp) {
                    self.rollback(active, cp);
                    break;
                }
            }

            if active.fit.len() >= MIN_FIT_PIXELS {
                if let Some((gap, resume)) = self.find_resume(active, heading, main) {
                    let len = active.pixels.len();
                    let fit = active.fit;
                    for g in gap {
                        active.push(g, true);
                        self.claim(g);
                    }
                    pending = Some(Checkpoint {
                        len,
                        fit,
                        resume_at: active.pixels.len(),
                    });
                    active.push(resume, false);
                    self.claim(resume);
                    prev = None;
                    continue;
                }
            }

            match best {
                // Bent away from the fitted line with nothing to jump to: split.
                Some((p, _)) => {
                    self.claim(p);
                    let fresh = Chain::start(p);
                    match detached.replace(fresh) {
                        Some(done) => finished.push(done),
                        None if keep_first => {}
                        None => finished.push(std::mem::replace(chain, Chain::default())),
                    }
                    prev = None;
                }
                None => break,
            }
        }

        if let Some(c) = detached {
            if keep_first {
                finished.push(c);
            } else {
                // `chain` was already handed to `finished` at the first split
                *chain = c;
            }
        }
    }

    /// The 2 or 3 steps admissible after `prev`.
    fn steps(main: Step, prev: Option<Step>) -> ([Step; 3], std::ops::Range<usize>) {
        let perp = Step(-main.1, main.0);
        let straight = [
            Step(main.0 - perp.0, main.1 - perp.1),
            main,
            Step(main.0 + perp.0, main.1 + perp.1),
        ];
        let range = match prev {
            Some(p) if p.is_diagonal() && p == straight[0] => 0..2,
            Some(p) if p.is_diagonal() && p == straight[2] => 1..3,
            _ => 0..3,
        };
        (straight, range)
    }

    /// A walk that runs into a pixel claimed by another chain stops there.
    fn meets_other_chain(&self, chain: &Chain, main: Step, prev: Option<Step>) -> bool {
        let cur = chain.last();
        let recent = &chain.pixels[chain.pixels.len().saturating_sub(4)..];
        let (steps, range) = Self::steps(main, prev);
        steps[range].iter().any(|s| {
            let p = cur.offset(s.0, s.1);
            self.field.contains(p.x, p.y) && self.visited[self.idx(p)] && !recent.contains(&p)
        })
    }

    /// Best of the 2 or 3 admissible next pixels, with the step taken.
    /// With `normal`, pixels whose gradient strays from it are skipped.
    fn best_candidate(&self, cur: Pixel, main: Step, prev: Option<Step>, normal: Option<[f64; 2]>) -> Option<(Pixel, Step)> {
        let (steps, range) = Self::steps(main, prev);
        let candidates = &steps[range];
        let mut best: Option<(Pixel, Step, u16)> = None;
        for &s in candidates {
            let p = cur.offset(s.0, s.1);
            if !self.is_free_edge(p) {
                continue;
            }
            let i = self.idx(p);
            if normal.is_some_and(|n| angular_error(self.field, i, n) >= CONTINUATION_TOL_DEG) {
                continue;
            }
            let m = self.field.mag[i];
            let better = match best {
                None => true,
                Some((_, bs, bm)) => m > bm || (m == bm && Some(s) == prev && Some(bs) != prev),
            };
            if better {
                best = Some((p, s, m));
            }
        }
        best.map(|(p, s, _)| (p, s))
    }

    /// Looks ahead along the fitted line for the first supported pixel
    /// within the skip budget. Returns the bridging pixels and that pixel.
    fn find_resume(&self, chain: &Chain, heading: [f64; 2], main: Step) -> Option<(Vec<Pixel>, Pixel)> {
        let budget = self.params.skip_budget;
        if budget == 0 {
            return None;
        }
        let last = chain.last();
        let reach = budget as f64 + 1.0;
        let [px, py] = chain.fit.project(f64::from(last.x), f64::from(last.y));
        let target = Pixel::new(
            (px + reach * heading[0]).round() as i32,
            (py + reach * heading[1]).round() as i32,
        );
        let path = bresenham(last, target);
        let perp = Step(-main.1, main.0);
        let normal = chain.fit.normal();
        let mut prev = last;
        for (k, &q) in path.iter().enumerate().skip(1) {
            let gap_len = k - 1;
            if gap_len > budget {
                break;
            }
            let mut found: Option<(Pixel, u16)> = None;
            for c in [q, q.offset(perp.0, perp.1), q.offset(-perp.0, -perp.1)] {
                if !self.is_free_edge(c) || !prev.is_adjacent(c) && !q.is_adjacent(c) {
                    continue;
                }
                if chain.pixels.contains(&c) {
                    continue;
                }
                if chain.fit.distance(f64::from(c.x), f64::from(c.y)) > self.params.max_fit_error {
                    continue;
                }
                let i = self.idx(c);
                if angular_error(self.field, i, normal) >= self.params.validation_angle_tol {
                    continue;
                }
                let m = self.field.mag[i];
                if found.is_none_or(|(_, fm)| m > fm) {
                    found = Some((c, m));
                }
            }
            if let Some((c, _)) = found.filter(|&(c, _)| self.continues(chain, c, heading, main)) {
                let mut gap: Vec<Pixel> = path[1..k].to_vec();
                let tail = gap.last().copied().unwrap_or(last);
                if !tail.is_adjacent(c) {
                    if gap.len() + 1 > budget {
                        return None;
                    }
                    gap.push(q);
                }
                // bridged pixels must be unclaimed so chains stay disjoint
                if gap.iter().any(|g| {
                    !self.field.contains(g.x, g.y) || self.visited[self.idx(*g)] || chain.pixels.contains(g)
                }) {
                    return None;
                }
                return Some((gap, c));
            }
            if !self.field.contains(q.x, q.y) || self.visited[self.idx(q)] {
                return None;
            }
            prev = q;
        }
        None
    }

    /// Whether the line visibly carries on after `from`: each of the next
    /// few steps along `heading` finds a free pixel that fits the line and
    /// runs the same way.
    fn continues(&self, chain: &Chain, from: Pixel, heading: [f64; 2], main: Step) -> bool {
        let n = MIN_RESUME_PIXELS - 1;
        let target = Pixel::new(
            (f64::from(from.x) + n as f64 * heading[0]).round() as i32,
            (f64::from(from.y) + n as f64 * heading[1]).round() as i32,
        );
        let perp = Step(-main.1, main.0);
        let normal = chain.fit.normal();
        bresenham(from, target).iter().skip(1).all(|&q| {
            [q, q.offset(perp.0, perp.1), q.offset(-perp.0, -perp.1)].iter().any(|&c| {
                self.is_free_edge(c)
                    && chain.fit.distance(f64::from(c.x), f64::from(c.y)) <= self.params.max_fit_error
                    && angular_error(self.field, self.idx(c), normal) < CONTINUATION_TOL_DEG
            })
        })
    }

    /// Pixels drawn since the jump must be numerous and aligned with the line.
    fn jump_supported(&self, chain: &Chain, cp: Checkpoint) -> bool {
        let drawn = &chain.pixels[cp.resume_at..];
        if drawn.len() < MIN_RESUME_PIXELS {
            return false;
        }
        let normal = chain.fit.normal();
        let aligned = drawn
            .iter()
            .filter(|&&p| angular_error(self.field, self.idx(p), normal) < self.params.validation_angle_tol)
            .count();
        aligned as f64 >= self.params.aligned_fraction * drawn.len() as f64
    }

    fn rollback(&mut self, chain: &mut Chain, cp: Checkpoint) {
        for p in chain.pixels.drain(cp.len..) {
            let i = self.field.index(p.x as usize, p.y as usize);
            self.visited[i] = false;
        }
        chain.bridged.truncate(cp.len);
        chain.fit = cp.fit;
    }

    /// Trims outliers off the ends, then fits endpoints. Trimmed pixels
    /// stay claimed so no later chain picks them up.
    fn finish(&mut self, chain: Chain) -> Option<Segment> {
        let Chain {
            mut pixels,
            mut bridged,
            ..
        } = chain;
        // bridged pixels never terminate a chain
        while bridged.last() == Some(&true) {
            bridged.pop();
            pixels.pop();
        }
        while bridged.first() == Some(&true) {
            bridged.remove(0);
            pixels.remove(0);
        }
        // smoothing bleeds weak gradient past the real end of an edge
        let mut mags: Vec<u16> = pixels
            .iter()
            .zip(&bridged)
            .filter(|(_, &b)| !b)
            .map(|(p, _)| self.field.mag[self.idx(*p)])
            .collect();
        if mags.is_empty() {
            return None;
        }
        mags.sort_unstable();
        let cutoff = END_MAGNITUDE_FRACTION * f64::from(mags[mags.len() / 2]);
        let weak = |p: &Pixel, b: bool| b || f64::from(self.field.mag[self.idx(*p)]) < cutoff;
        while let (Some(p), Some(&b)) = (pixels.last(), bridged.last()) {
            if !weak(p, b) {
                break;
            }
            pixels.pop();
            bridged.pop();
        }
        while let (Some(p), Some(&b)) = (pixels.first(), bridged.first()) {
            if !weak(p, b) {
                break;
            }
            pixels.remove(0);
            bridged.remove(0);
        }
        if pixels.len() < self.min_len {
            return None;
        }
        let refit = |pixels: &[Pixel], bridged: &[bool]| {
            LineFit::<f64>::from_points(
                pixels
                    .iter()
                    .zip(bridged)
                    .filter(|(_, &b)| !b)
                    .map(|(p, _)| (f64::from(p.x), f64::from(p.y))),
            )
        };
        let mut fit = refit(&pixels, &bridged);
        loop {
            if pixels.len() < self.min_len.max(2) {
                return None;
            }
            let dist = |p: &Pixel| fit.distance(f64::from(p.x), f64::from(p.y));
            let worst = pixels.iter().map(dist).fold(0.0, f64::max);
            if worst <= MAX_ENDPOINT_DEVIATION {
                break;
            }
            let (head, tail) = (dist(&pixels[0]), dist(pixels.last().unwrap()));
            if head >= tail {
                pixels.remove(0);
                bridged.remove(0);
            } else {
                pixels.pop();
                bridged.pop();
            }
            while bridged.first() == Some(&true) {
                bridged.remove(0);
                pixels.remove(0);
            }
            while bridged.last() == Some(&true) {
                bridged.pop();
                pixels.pop();
            }
            fit = refit(&pixels, &bridged);
        }
        let first = pixels[0];
        let last = *pixels.last().unwrap();
        let [x1, y1] = fit.project(f64::from(first.x), f64::from(first.y));
        let [x2, y2] = fit.project(f64::from(last.x), f64::from(last.y));
        Some(Segment {
            x1,
            y1,
            x2,
            y2,
            length: (x2 - x1).hypot(y2 - y1),
            pixels,
        })
    }
}

fn main_step(heading: [f64; 2]) -> Step {
    if heading[0].abs() >= heading[1].abs() {
        Step(if heading[0] >= 0.0 { 1 } else { -1 }, 0)
    } else {
        Step(0, if heading[1] >= 0.0 { 1 } else { -1 })
    }
}
