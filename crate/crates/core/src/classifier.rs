//! Mean RGB gradient of a segment and its classification against reference
//! color transitions.
//!
//! The 3x3 neighbourhoods of all chain pixels are averaged first and the
//! Sobel kernels applied once to the averaged window, which equals the mean
//! of the per-pixel Sobel responses. Results are divided by four so every
//! channel lands in [-255, 255].

use serde::{Deserialize, Serialize};

use crate::elsed::Segment;
use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::imaging::RgbImage;
use crate::num::{dot3, norm3, Real};

/// Upper bound of any projection: the norm of (255, 255, 255).
pub const MAX_PROJECTION: f64 = 441.672_955_930_063_7;

/// Feature class assigned to a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLabel {
    FieldLine,
    FieldBoundary,
    #[default]
    None,
}

impl FeatureLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureLabel::FieldLine => "field_line",
            FeatureLabel::FieldBoundary => "field_boundary",
            FeatureLabel::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "field_line" => Ok(FeatureLabel::FieldLine),
            "field_boundary" => Ok(FeatureLabel::FieldBoundary),
            "none" => Ok(FeatureLabel::None),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }

    pub fn is_feature(self) -> bool {
        self != FeatureLabel::None
    }
}

impl std::fmt::Display for FeatureLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mean horizontal and vertical gradients per RGB channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RgbGradient<T: Real> {
    pub h: [T; 3],
    pub v: [T; 3],
}

impl<T: Real> RgbGradient<T> {
    pub fn new(h: [T; 3], v: [T; 3]) -> Self {
        Self { h, v }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            h: self.h.map(|x| x * c),
            v: self.v.map(|x| x * c),
        }
    }

    pub fn in_range(&self) -> bool {
        let lim = T::lit(255.0);
        self.h.iter().chain(&self.v).all(|x| x.is_finite() && x.abs() <= lim)
    }
}

/// A reference color transition, e.g. green to white for painted lines.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRef<T: Real> {
    name: String,
    delta: [T; 3],
    unit: [T; 3],
    label: FeatureLabel,
}

impl<T: Real> TransitionRef<T> {
    pub fn new(name: impl Into<String>, delta: [T; 3], label: FeatureLabel) -> Result<Self> {
        let n = norm3(delta);
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::Config("transition delta must be a non-zero finite vector".into()));
        }
        Ok(Self {
            name: name.into(),
            delta,
            unit: delta.map(|d| d / n),
            label,
        })
    }

    /// Transition from `from` color to `to` color.
    pub fn between(name: impl Into<String>, from: [u8; 3], to: [u8; 3], label: FeatureLabel) -> Result<Self> {
        let delta = [0, 1, 2].map(|i| T::lit(f64::from(to[i]) - f64::from(from[i])));
        Self::new(name, delta, label)
    }

    /// Field green (0,128,0) to white.
    pub fn green_white() -> Self {
        Self::new("GW", [T::lit(255.0), T::lit(127.0), T::lit(255.0)], FeatureLabel::FieldLine)
            .expect("non-zero")
    }

    /// Field green (0,128,0) to black.
    pub fn green_black() -> Self {
        Self::new("GB", [T::zero(), T::lit(-128.0), T::zero()], FeatureLabel::FieldBoundary)
            .expect("non-zero")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn delta(&self) -> [T; 3] {
        self.delta
    }

    pub fn unit(&self) -> [T; 3] {
        self.unit
    }

    pub fn label(&self) -> FeatureLabel {
        self.label
    }

    /// Same reference with the transition reversed.
    pub fn reversed(&self) -> Self {
        Self {
            name: self.name.clone(),
            delta: self.delta.map(|d| -d),
            unit: self.unit.map(|d| -d),
            label: self.label,
        }
    }
}

/// The three trainable acceptance thresholds of one reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds<T: Real> {
    /// Largest accepted angle in degrees between gradient and reference.
    pub angle_max: T,
    /// Smallest accepted projection onto the reference unit vector.
    pub proj_min: T,
    /// Smallest accepted segment length in pixels.
    pub len_min: T,
}

impl<T: Real> Thresholds<T> {
    pub fn new(angle_max: T, proj_min: T, len_min: T) -> Self {
        Self {
            angle_max,
            proj_min,
            len_min,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.angle_max.is_finite() && self.proj_min.is_finite() && self.len_min.is_finite();
        if !finite {
            return Err(Error::Config("thresholds must be finite".into()));
        }
        if !(self.angle_max > T::zero() && self.angle_max <= T::lit(90.0)) {
            return Err(Error::Config(format!("angle_max {:?} outside (0, 90]", self.angle_max)));
        }
        if self.proj_min < T::zero() || self.proj_min > T::lit(MAX_PROJECTION) {
            return Err(Error::Config(format!("proj_min {:?} outside [0, 441.7]", self.proj_min)));
        }
        if self.len_min < T::zero() {
            return Err(Error::Config("len_min must be non-negative".into()));
        }
        Ok(())
    }

    /// Whether a measured (angle, projection, length) passes all three.
    #[inline]
    pub fn accepts(&self, sim: Similarity<T>, length: T) -> bool {
        sim.angle_deg <= self.angle_max && sim.proj >= self.proj_min && length >= self.len_min
    }
}

/// One reference transition with its thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRule<T: Real> {
    pub reference: TransitionRef<T>,
    pub thresholds: Thresholds<T>,
}

/// Ordered rules; the first one a segment satisfies decides its label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig<T: Real> {
    pub rules: Vec<ReferenceRule<T>>,
    /// Require the gradient to point along the reference, not just parallel to it.
    pub signed_match: bool,
}

impl<T: Real> Default for ClassifierConfig<T> {
    fn default() -> Self {
        Self {
            rules: vec![
                ReferenceRule {
                    reference: TransitionRef::green_white(),
                    thresholds: Thresholds::new(T::lit(20.0), T::lit(60.0), T::lit(20.0)),
                },
                ReferenceRule {
                    reference: TransitionRef::green_black(),
                    thresholds: Thresholds::new(T::lit(20.0), T::lit(40.0), T::lit(20.0)),
                },
            ],
            signed_match: false,
        }
    }
}

/// On-disk form of a rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    name: String,
    delta: [f64; 3],
    angle_max_deg: f64,
    proj_min: f64,
    len_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<FeatureLabel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    references: Vec<RuleFile>,
    #[serde(default)]
    signed_match: bool,
}

/// Label implied by a reference name when the file does not give one.
fn label_for_name(name: &str) -> FeatureLabel {
    if name.eq_ignore_ascii_case("GB") {
        FeatureLabel::FieldBoundary
    } else {
        FeatureLabel::FieldLine
    }
}

impl<T: Real> ClassifierConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.rules.is_empty() {
            return Err(Error::Config("at least one reference transition is required".into()));
        }
        for r in &self.rules {
            r.thresholds.validate()?;
            if r.reference.label() == FeatureLabel::None {
                return Err(Error::Config(format!("reference {} maps to label none", r.reference.name())));
            }
        }
        Ok(())
    }

    pub fn rule(&self, name: &str) -> Option<&ReferenceRule<T>> {
        self.rules.iter().find(|r| r.reference.name() == name)
    }

    /// Replaces the rule with the same reference name, or appends it.
    pub fn upsert(&mut self, rule: ReferenceRule<T>) {
        match self.rules.iter_mut().find(|r| r.reference.name() == rule.reference.name()) {
            Some(slot) => *slot = rule,
            None => self.rules.push(rule),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("threshold file: {e}")))?;
        let rules = file
            .references
            .into_iter()
            .map(|r| {
                let label = r.label.unwrap_or_else(|| label_for_name(&r.name));
                Ok(ReferenceRule {
                    reference: TransitionRef::new(r.name, r.delta.map(T::lit), label)?,
                    thresholds: Thresholds::new(T::lit(r.angle_max_deg), T::lit(r.proj_min), T::lit(r.len_min)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            rules,
            signed_match: file.signed_match,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let file = ConfigFile {
            references: self
                .rules
                .iter()
                .map(|r| {
                    let name = r.reference.name().to_string();
                    let implied = label_for_name(&name);
                    RuleFile {
                        delta: r.reference.delta().map(Real::as_f64),
                        angle_max_deg: r.thresholds.angle_max.as_f64(),
                        proj_min: r.thresholds.proj_min.as_f64(),
                        len_min: r.thresholds.len_min.as_f64(),
                        label: (r.reference.label() != implied).then_some(r.reference.label()),
                        name,
                    }
                })
                .collect(),
            signed_match: self.signed_match,
        };
        serde_json::to_string_pretty(&file).expect("config serializes")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// 3x3 grid of mean colors, indexed `[row][col][channel]`.
pub type WindowGrid<T> = [[[T; 3]; 3]; 3];

/// Averages the 3x3 RGB neighbourhoods of all chain pixels.
///
/// Pixels on the outermost ring are skipped.
pub fn mean_window<T: Real>(img: &RgbImage, pixels: &[Pixel]) -> Result<WindowGrid<T>> {
    let (w, h) = (img.width() as i32, img.height() as i32);
    let mut sums = [[[0u64; 3]; 3]; 3];
    let mut count = 0u64;
    let data = img.data();
    for p in pixels {
        if p.x < 1 || p.y < 1 || p.x > w - 2 || p.y > h - 2 {
            continue;
        }
        count += 1;
        for (r, row) in sums.iter_mut().enumerate() {
            let y = (p.y + r as i32 - 1) as usize;
            let base = (y * w as usize + (p.x - 1) as usize) * 3;
            for (c, cell) in row.iter_mut().enumerate() {
                let o = base + c * 3;
                cell[0] += u64::from(data[o]);
                cell[1] += u64::from(data[o + 1]);
                cell[2] += u64::from(data[o + 2]);
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyChain);
    }
    let n = T::from_u64(count).unwrap();
    Ok(sums.map(|row| row.map(|cell| cell.map(|s| T::from_u64(s).unwrap() / n))))
}

const SOBEL_X: [[i8; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];

/// Sobel on the averaged window, per channel, scaled by 1/4.
pub fn segment_gradient<T: Real>(grid: &WindowGrid<T>) -> RgbGradient<T> {
    let mut h = [T::zero(); 3];
    let mut v = [T::zero(); 3];
    for r in 0..3 {
        for c in 0..3 {
            let kx = T::from_i8(SOBEL_X[r][c]).unwrap();
            let ky = T::from_i8(SOBEL_X[c][r]).unwrap();
            for ch in 0..3 {
                h[ch] += kx * grid[r][c][ch];
                v[ch] += ky * grid[r][c][ch];
            }
        }
    }
    let q = T::lit(0.25);
    RgbGradient::new(h.map(|x| x * q), v.map(|x| x * q))
}

/// Angle (degrees) and projection length of a gradient against a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity<T: Real> {
    pub angle_deg: T,
    pub proj: T,
}

fn similarity_one<T: Real>(g: [T; 3], unit: [T; 3], signed: bool) -> Similarity<T> {
    let n = norm3(g);
    if !(n > T::zero()) {
        return Similarity {
            angle_deg: T::lit(90.0),
            proj: T::zero(),
        };
    }
    let d = dot3(g, unit);
    let proj = if signed { d } else { d.abs() };
    let cos = (proj / n).max(-T::one()).min(T::one());
    Similarity {
        angle_deg: cos.acos().to_degrees(),
        proj,
    }
}

/// Scores both the horizontal and vertical gradient and keeps the one with
/// the larger projection.
pub fn similarity<T: Real>(grad: &RgbGradient<T>, reference: &TransitionRef<T>, signed: bool) -> Similarity<T> {
    let a = similarity_one(grad.h, reference.unit(), signed);
    let b = similarity_one(grad.v, reference.unit(), signed);
    if b.proj > a.proj {
        b
    } else {
        a
    }
}

/// Outcome of classifying one gradient/length pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification<T: Real> {
    pub label: FeatureLabel,
    pub angle_deg: T,
    pub proj_len: T,
}

/// First rule whose three thresholds all pass decides the label. Without a
/// match, the measurements of the highest-projection reference are kept.
pub fn classify<T: Real>(length: T, grad: &RgbGradient<T>, config: &ClassifierConfig<T>) -> Classification<T> {
    let mut best: Option<Similarity<T>> = None;
    for rule in &config.rules {
        let sim = similarity(grad, &rule.reference, config.signed_match);
        if rule.thresholds.accepts(sim, length) {
            return Classification {
                label: rule.reference.label(),
                angle_deg: sim.angle_deg,
                proj_len: sim.proj,
            };
        }
        if best.is_none_or(|b| sim.proj > b.proj) {
            best = Some(sim);
        }
    }
    let sim = best.unwrap_or(Similarity {
        angle_deg: T::lit(90.0),
        proj: T::zero(),
    });
    Classification {
        label: FeatureLabel::None,
        angle_deg: sim.angle_deg,
        proj_len: sim.proj,
    }
}

/// A detected segment together with its gradient and label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedSegment<T: Real> {
    pub segment: Segment,
    pub grad: RgbGradient<T>,
    pub label: FeatureLabel,
    pub angle_deg: T,
    pub proj_len: T,
}

/// Measures and classifies one segment against the unsmoothed image.
pub fn classify_segment<T: Real>(
    img: &RgbImage,
    segment: Segment,
    config: &ClassifierConfig<T>,
) -> Result<ClassifiedSegment<T>> {
    let grid = mean_window::<T>(img, &segment.pixels)?;
    let grad = segment_gradient(&grid);
    let c = classify(T::lit(segment.length), &grad, config);
    Ok(ClassifiedSegment {
        segment,
        grad,
        label: c.label,
        angle_deg: c.angle_deg,
        proj_len: c.proj_len,
    })
}
