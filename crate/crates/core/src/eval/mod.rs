//! Precision/recall scoring, latency measurement and the robustness
//! experiments, run on synthetic frames with known geometry.

pub mod scene;

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify, ClassifiedSegment, ClassifierConfig, FeatureLabel, Thresholds, TransitionRef};
use crate::dataset::SegmentRecord;
use crate::elsed::Segment;
use crate::error::{Error, Result};
use crate::imaging::RgbImage;
use crate::num::Real;
use crate::pipeline::Pipeline;
use crate::pso::{train, FeatureSet, FitnessReport, PsoConfig};

pub use scene::{generate_scene, Lighting, SceneSpec, SyntheticScene, TruthLine};

/// Share of chain pixels that must sit near one truth line for a match.
pub const MATCH_FRACTION: f64 = 0.8;
/// Pixel distance to a truth edge that counts as "near".
pub const MATCH_DISTANCE: f64 = 2.0;
/// Endpoint tolerance of the fidelity check.
pub const ENDPOINT_TOLERANCE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrAndTiming {
    pub precision: f64,
    pub recall: f64,
    /// Records whose reference label is a field feature.
    pub n_lines: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl PrAndTiming {
    /// Precision and recall from raw counts, 0/0 read as 1.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        Self {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            n_lines: tp + fn_,
            ..Default::default()
        }
    }

    pub fn from_report(r: &FitnessReport) -> Self {
        Self::from_counts(r.tp, r.fp, r.fn_)
    }
}

/// Scores the stored predictions against the human labels.
///
/// A feature prediction is a true positive only when it names the same
/// feature as the human label; a wrong feature counts as both a false
/// positive and a false negative.
pub fn score(records: &[SegmentRecord]) -> Result<PrAndTiming> {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (i, r) in records.iter().enumerate() {
        let truth = r.human_label.ok_or(Error::UnlabeledRecord(i))?;
        let pred = r.predicted;
        if pred.is_feature() {
            if pred == truth {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        if truth.is_feature() && pred != truth {
            fn_ += 1;
        }
    }
    Ok(PrAndTiming::from_counts(tp, fp, fn_))
}

/// Re-predicts every record from its stored features.
pub fn replay<T: Real>(records: &mut [SegmentRecord], config: &ClassifierConfig<T>) {
    for r in records {
        r.predicted = classify(T::lit(r.length), &r.gradient::<T>(), config).label;
    }
}

/// Precision/recall of one reference's thresholds alone.
pub fn evaluate_thresholds<T: Real>(
    records: &[SegmentRecord],
    reference: &TransitionRef<T>,
    thresholds: &Thresholds<T>,
    signed: bool,
) -> Result<PrAndTiming> {
    let features = FeatureSet::build(records, reference, signed)?;
    Ok(PrAndTiming::from_report(&features.evaluate(thresholds)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// (mean_ms, std_ms) per input frame.
    pub per_image: Vec<(f64, f64)>,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub median_ms: f64,
    /// Timed runs after the warm-up pass was dropped.
    pub samples: usize,
    pub decode_excluded: bool,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Times detect + classify on already-decoded frames, sequentially on the
/// calling thread. The first pass over each frame is discarded.
pub fn benchmark<T: Real>(images: &[RgbImage], pipeline: &Pipeline<T>, repeat: usize) -> Result<BenchmarkReport> {
    if repeat < 3 {
        return Err(Error::InvalidParam(format!("repeat must be at least 3, got {repeat}")));
    }
    if images.is_empty() {
        return Err(Error::InvalidParam("no images to benchmark".into()));
    }
    let mut all = Vec::with_capacity(images.len() * (repeat - 1));
    let mut per_image = Vec::with_capacity(images.len());
    for img in images {
        let mut times = Vec::with_capacity(repeat - 1);
        for i in 0..repeat {
            let start = Instant::now();
            let out = pipeline.run(img)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            std::hint::black_box(out);
            if i > 0 {
                times.push(ms);
            }
        }
        per_image.push(mean_std(&times));
        all.extend(times);
    }
    let (mean_ms, std_ms) = mean_std(&all);
    let samples = all.len();
    Ok(BenchmarkReport {
        per_image,
        mean_ms,
        std_ms,
        median_ms: median(&mut all),
        samples,
        decode_excluded: true,
    })
}

/// Index of the truth line that holds at least 80% of the chain pixels
/// within 2 px of its edges. The best-covered line wins.
pub fn match_segment(segment: &Segment, truth: &[TruthLine]) -> Option<usize> {
    if segment.pixels.is_empty() {
        return None;
    }
    let need = (MATCH_FRACTION * segment.pixels.len() as f64).ceil() as usize;
    truth
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let near = segment
                .pixels
                .iter()
                .filter(|p| t.edge_distance([f64::from(p.x), f64::from(p.y)]) <= MATCH_DISTANCE)
                .count();
            (i, near)
        })
        .filter(|&(_, near)| near >= need)
        .max_by_key(|&(i, near)| (near, std::cmp::Reverse(i)))
        .map(|(i, _)| i)
}

/// Both endpoints of the segment lie within 3 px of an edge of `truth`.
pub fn endpoints_on_edge(segment: &Segment, truth: &TruthLine) -> bool {
    [[segment.x1, segment.y1], [segment.x2, segment.y2]]
        .iter()
        .all(|&p| truth.edge_distance(p) <= ENDPOINT_TOLERANCE)
}

/// Truth lines not covered by any segment with both endpoints on an edge.
pub fn unmatched_truth(segments: &[Segment], truth: &[TruthLine]) -> Vec<usize> {
    (0..truth.len())
        .filter(|&i| {
            !segments
                .iter()
                .any(|s| match_segment(s, truth) == Some(i) && endpoints_on_edge(s, &truth[i]))
        })
        .collect()
}

/// Records of one frame, labeled from the truth geometry.
pub fn label_segments<T: Real>(
    segments: &[ClassifiedSegment<T>],
    truth: &[TruthLine],
    image_name: &str,
) -> Vec<SegmentRecord> {
    segments
        .iter()
        .map(|c| {
            let mut r = SegmentRecord::from_classified(image_name, c);
            r.human_label = Some(match_segment(&c.segment, truth).map_or(FeatureLabel::None, |i| truth[i].class));
            r
        })
        .collect()
}

/// Generates one frame per seed, runs the pipeline and labels the output.
/// Frames are processed in parallel; records come back in seed order.
pub fn labeled_records<T: Real>(pipeline: &Pipeline<T>, spec: &SceneSpec, seeds: &[u64]) -> Result<Vec<SegmentRecord>> {
    let per_scene = seeds
        .par_iter()
        .map(|&seed| {
            let scene = generate_scene(seed, spec)?;
            let segments = pipeline.run(&scene.image)?;
            Ok(label_segments(&segments, &scene.truth_lines, &format!("scene_{seed:05}.png")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_scene.into_iter().flatten().collect())
}

/// One lighting condition: labeled records to train on and to evaluate on.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub train: Vec<SegmentRecord>,
    pub eval: Vec<SegmentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationMatrix {
    pub conditions: Vec<String>,
    /// precision[i][j]: trained on condition i, evaluated on condition j.
    pub precision: Vec<Vec<f64>>,
    pub recall: Vec<Vec<f64>>,
}

impl IlluminationMatrix {
    pub fn min_precision(&self) -> f64 {
        self.precision.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Trains one reference per condition and scores every train/eval pair.
pub fn cross_illumination<T: Real>(
    conditions: &[Condition],
    config: &PsoConfig<T>,
    reference: &TransitionRef<T>,
    signed: bool,
) -> Result<IlluminationMatrix> {
    if conditions.is_empty() {
        return Err(Error::InvalidParam("no lighting conditions".into()));
    }
    let trained = conditions
        .iter()
        .map(|c| train(&c.train, config, reference, signed).map(|o| o.thresholds))
        .collect::<Result<Vec<_>>>()?;
    let mut precision = Vec::with_capacity(conditions.len());
    let mut recall = Vec::with_capacity(conditions.len());
    for t in &trained {
        let row = conditions
            .iter()
            .map(|c| evaluate_thresholds(&c.eval, reference, t, signed))
            .collect::<Result<Vec<_>>>()?;
        precision.push(row.iter().map(|p| p.precision).collect());
        recall.push(row.iter().map(|p| p.recall).collect());
    }
    Ok(IlluminationMatrix {
        conditions: conditions.iter().map(|c| c.name.clone()).collect(),
        precision,
        recall,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub seed: u64,
    pub n_train: usize,
    pub precision: f64,
    pub recall: f64,
}

/// For every fraction and seed, trains on a seeded sample of `train_records`
/// and scores the result on `eval_records`.
pub fn set_size_sweep<T: Real>(
    train_records: &[SegmentRecord],
    eval_records: &[SegmentRecord],
    fractions: &[f64],
    seeds: &[u64],
    config: &PsoConfig<T>,
    reference: &TransitionRef<T>,
    signed: bool,
) -> Result<Vec<SweepRow>> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidParam(format!("fraction {f} outside (0, 1]")));
    }
    let mut rows = Vec::with_capacity(fractions.len() * seeds.len());
    for &fraction in fractions {
        for &seed in seeds {
            let mut idx: Vec<usize> = (0..train_records.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n = ((fraction * train_records.len() as f64).round() as usize).clamp(1, train_records.len().max(1));
            let sample: Vec<SegmentRecord> = idx[..n.min(idx.len())]
                .iter()
                .map(|&i| train_records[i].clone())
                .collect();
            let cfg = PsoConfig { seed, ..config.clone() };
            let outcome = train(&sample, &cfg, reference, signed)?;
            let pr = evaluate_thresholds(eval_records, reference, &outcome.thresholds, signed)?;
            rows.push(SweepRow {
                fraction,
                seed,
                n_train: sample.len(),
                precision: pr.precision,
                recall: pr.recall,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Precision matrix as CSV: a header of evaluation conditions, one row per
/// training condition.
pub fn write_matrix_csv(m: &IlluminationMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let fmt = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fmt)?;
    let mut header = vec!["train\\eval".to_string()];
    header.extend(m.conditions.iter().cloned());
    w.write_record(&header).map_err(fmt)?;
    for (name, row) in m.conditions.iter().zip(&m.precision) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|p| format!("{p:.4}")));
        w.write_record(&rec).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<S: Serialize>(value: &S, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pred: FeatureLabel, human: FeatureLabel) -> SegmentRecord {
        SegmentRecord {
            image: "a.png".into(),
            x1: 0.0,
            y1: 0.0,
            x2: 10.0,
            y2: 0.0,
            length: 10.0,
            grad_h: [0.0; 3],
            grad_v: [0.0; 3],
            predicted: pred,
            human_label: Some(human),
        }
    }

    use FeatureLabel::{FieldLine as L, None as N};

    #[test]
    fn score_counts() {
        let mut v = vec![rec(L, L), rec(L, L), rec(L, L), rec(L, N), rec(N, L), rec(N, N)];
        let s = score(&v).unwrap();
        assert_eq!((s.precision, s.recall), (0.75, 0.75));
        v.reverse();
        assert_eq!(score(&v).unwrap(), s);
    }

    #[test]
    fn score_conventions() {
        let s = score(&[rec(N, N), rec(N, N)]).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let s = score(&[]).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let mut wrong: Vec<_> = (0..5).map(|_| rec(L, N)).collect();
        wrong.extend((0..5).map(|_| rec(N, L)));
        let s = score(&wrong).unwrap();
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
    }

    #[test]
    fn wrong_feature_is_both_errors() {
        let s = score(&[rec(L, FeatureLabel::FieldBoundary)]).unwrap();
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
    }

    #[test]
    fn unlabeled_record_errors() {
        let mut r = rec(L, L);
        r.human_label = None;
        assert!(matches!(score(&[rec(L, L), r]), Err(Error::UnlabeledRecord(1))));
    }

    #[test]
    fn benchmark_needs_three_runs() {
        let img = RgbImage::filled(32, 32, [30, 130, 40]);
        let p = Pipeline::<f64>::default();
        assert!(benchmark(std::slice::from_ref(&img), &p, 2).is_err());
        let r = benchmark(&[img], &p, 5).unwrap();
        assert_eq!(r.samples, 4);
        assert!(r.decode_excluded);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
