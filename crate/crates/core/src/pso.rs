//! Particle swarm search over the three classification thresholds.
//!
//! Fitness is the number of true positives minus false positives when the
//! labeled records are replayed through the classifier from their stored
//! gradients and lengths. No image is touched during training.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{similarity, Similarity, Thresholds, TransitionRef, MAX_PROJECTION};
use crate::dataset::SegmentRecord;
use crate::error::{Error, Result};
use crate::num::Real;

/// Dimension order of a position: angle_max (deg), proj_min, len_min (px).
pub type Position<T> = [T; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitnessReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub score: i64,
}

impl FitnessReport {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig<T: Real> {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: T,
    pub cognitive: T,
    pub social: T,
    pub seed: u64,
    /// Inclusive (lo, hi) per dimension.
    pub bounds: [(T, T); 3],
}

impl<T: Real> Default for PsoConfig<T> {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            iterations: 200,
            inertia: T::lit(0.729),
            cognitive: T::lit(1.49445),
            social: T::lit(1.49445),
            seed: 0,
            bounds: [
                (T::lit(0.01), T::lit(90.0)),
                (T::zero(), T::lit(MAX_PROJECTION)),
                (T::zero(), T::lit(800.0)),
            ],
        }
    }
}

impl<T: Real> PsoConfig<T> {
    /// Length bound matched to an image size (its diagonal).
    pub fn with_image_size(mut self, width: usize, height: usize) -> Self {
        self.bounds[2].1 = T::lit((width as f64).hypot(height as f64));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::Config("swarm_size must be >= 2".into()));
        }
        if !(self.inertia > T::zero() && self.inertia < T::one()) {
            return Err(Error::Config("inertia must lie in (0, 1)".into()));
        }
        if !(self.cognitive > T::zero() && self.social > T::zero()) {
            return Err(Error::Config("cognitive and social weights must be positive".into()));
        }
        let [(alo, ahi), (plo, phi), (llo, lhi)] = self.bounds;
        let ok = alo > T::zero()
            && ahi <= T::lit(90.0)
            && alo <= ahi
            && plo >= T::zero()
            && phi <= T::lit(MAX_PROJECTION)
            && plo <= phi
            && llo >= T::zero()
            && llo <= lhi
            && lhi.is_finite();
        if !ok {
            return Err(Error::Config(format!("invalid PSO bounds {:?}", self.bounds)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T: Real> {
    pub position: Position<T>,
    pub velocity: Position<T>,
    pub best_position: Position<T>,
    pub best_score: i64,
}

/// Threshold-independent features of one labeled record.
#[derive(Debug, Clone, Copy)]
struct Sample<T: Real> {
    sim: Similarity<T>,
    length: T,
    positive: bool,
}

/// Labeled records reduced to what fitness needs for one reference.
#[derive(Debug, Clone)]
pub struct FeatureSet<T: Real> {
    samples: Vec<Sample<T>>,
}

impl<T: Real> FeatureSet<T> {
    /// A record is positive when its human label is the reference's label.
    pub fn build(records: &[SegmentRecord], reference: &TransitionRef<T>, signed: bool) -> Result<Self> {
        let samples = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let label = r.human_label.ok_or(Error::UnlabeledRecord(i))?;
                Ok(Sample {
                    sim: similarity(&r.gradient::<T>(), reference, signed),
                    length: T::lit(r.length),
                    positive: label == reference.label(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest projection and length among the samples.
    pub fn extent(&self) -> (T, T) {
        self.samples
            .iter()
            .fold((T::zero(), T::zero()), |(p, l), s| (p.max(s.sim.proj), l.max(s.length)))
    }

    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.positive).count()
    }

    pub fn evaluate(&self, t: &Thresholds<T>) -> FitnessReport {
        let mut r = FitnessReport::default();
        for s in &self.samples {
            match (t.accepts(s.sim, s.length), s.positive) {
                (true, true) => r.tp += 1,
                (true, false) => r.fp += 1,
                (false, false) => r.tn += 1,
                (false, true) => r.fn_ += 1,
            }
        }
        r.score = r.tp as i64 - r.fp as i64;
        r
    }
}

/// TP - FP of the thresholds on labeled records, one reference.
pub fn fitness<T: Real>(
    records: &[SegmentRecord],
    thresholds: &Thresholds<T>,
    reference: &TransitionRef<T>,
    signed: bool,
) -> Result<FitnessReport> {
    Ok(FeatureSet::build(records, reference, signed)?.evaluate(thresholds))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T: Real> {
    pub thresholds: Thresholds<T>,
    pub report: FitnessReport,
    /// Global best score after initialization (entry 0) and after each iteration.
    pub history: Vec<i64>,
}

fn to_thresholds<T: Real>(p: &Position<T>) -> Thresholds<T> {
    Thresholds::new(p[0], p[1], p[2])
}

/// Higher score wins; ties prefer the stricter projection, then length.
fn beats<T: Real>(score: i64, pos: &Position<T>, best_score: i64, best: &Position<T>) -> bool {
    match score.cmp(&best_score) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => pos[1] > best[1] || (pos[1] == best[1] && pos[2] > best[2]),
    }
}

/// Runs the swarm. Deterministic for a fixed seed.
pub fn train<T: Real>(
    records: &[SegmentRecord],
    config: &PsoConfig<T>,
    reference: &TransitionRef<T>,
    signed: bool,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let features = FeatureSet::build(records, reference, signed)?;
    if features.positives() == 0 {
        return Err(Error::NoPositives(reference.name().to_string()));
    }
    log::debug!(
        "training {} on {} records, {} positive",
        reference.name(),
        features.len(),
        features.positives()
    );
    let outcome = train_features(&features, config);
    log::debug!("best {:?} with {:?}", outcome.thresholds, outcome.report);
    Ok(outcome)
}

/// Swarm search on prebuilt features; `features` must contain a positive.
pub fn train_features<T: Real>(features: &FeatureSet<T>, config: &PsoConfig<T>) -> TrainOutcome<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lo = config.bounds.map(|b| b.0);
    let mut hi = config.bounds.map(|b| b.1);
    // thresholds above every observed projection or length reject everything
    let (max_proj, max_len) = features.extent();
    hi[1] = hi[1].min(max_proj).max(lo[1]);
    hi[2] = hi[2].min(max_len).max(lo[2]);
    let range: [T; 3] = [0, 1, 2].map(|d| hi[d] - lo[d]);
    let unit = |rng: &mut ChaCha8Rng| T::lit(rng.random::<f64>());

    let mut swarm: Vec<Particle<T>> = (0..config.swarm_size)
        .map(|_| {
            let position = [0, 1, 2].map(|d| lo[d] + unit(&mut rng) * range[d]);
            let velocity = [0, 1, 2].map(|d| (unit(&mut rng) * T::lit(2.0) - T::one()) * T::lit(0.1) * range[d]);
            Particle {
                position,
                velocity,
                best_position: position,
                best_score: i64::MIN,
            }
        })
        .collect();

    let score_all = |swarm: &[Particle<T>]| -> Vec<i64> {
        swarm
            .par_iter()
            .map(|p| features.evaluate(&to_thresholds(&p.position)).score)
            .collect()
    };

    let mut g_score = i64::MIN;
    let mut g_pos = swarm[0].position;
    let absorb = |swarm: &mut [Particle<T>], scores: &[i64], g_score: &mut i64, g_pos: &mut Position<T>| {
        for (p, &s) in swarm.iter_mut().zip(scores) {
            if beats(s, &p.position, p.best_score, &p.best_position) {
                p.best_score = s;
                p.best_position = p.position;
            }
            if beats(s, &p.position, *g_score, g_pos) {
                *g_score = s;
                *g_pos = p.position;
            }
        }
    };

    let scores = score_all(&swarm);
    absorb(&mut swarm, &scores, &mut g_score, &mut g_pos);
    let mut history = Vec::with_capacity(config.iterations + 1);
    history.push(g_score);

    for _ in 0..config.iterations {
        for p in swarm.iter_mut() {
            for d in 0..3 {
                let r1 = unit(&mut rng);
                let r2 = unit(&mut rng);
                let mut v = config.inertia * p.velocity[d]
                    + config.cognitive * r1 * (p.best_position[d] - p.position[d])
                    + config.social * r2 * (g_pos[d] - p.position[d]);
                v = v.max(-range[d]).min(range[d]);
                let mut x = p.position[d] + v;
                if x < lo[d] || x > hi[d] {
                    x = x.max(lo[d]).min(hi[d]);
                    v = T::zero();
                }
                p.position[d] = x;
                p.velocity[d] = v;
            }
        }
        let scores = score_all(&swarm);
        absorb(&mut swarm, &scores, &mut g_score, &mut g_pos);
        history.push(g_score);
    }

    let thresholds = to_thresholds(&g_pos);
    TrainOutcome {
        thresholds,
        report: features.evaluate(&thresholds),
        history,
    }
}

/// Writes `iteration,best_score` rows.
pub fn write_history_csv(history: &[i64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["iteration", "best_score"]).map_err(io)?;
    for (i, s) in history.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
