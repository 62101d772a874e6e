//! Line segment detection and color-transition classification for soccer
//! field images, with threshold calibration from annotated segments.
//!
//! The floating-point parts (line fit, gradient classifier, swarm trainer)
//! are generic over [`Real`]; the `*F64`/`*F32` aliases below pin the scalar.

pub mod classifier;
pub mod dataset;
pub mod elsed;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod imaging;
pub mod num;
pub mod pipeline;
pub mod pso;

pub use classifier::{
    classify, ClassifiedSegment, ClassifierConfig, FeatureLabel, RgbGradient, Thresholds, TransitionRef,
};
pub use dataset::{read_records, write_records, AnnotationSession, SegmentRecord};
pub use elsed::{detect, DetectorParams, Segment};
pub use error::{Error, Result};
pub use geometry::{bresenham, LineFit, Pixel};
pub use imaging::{decode_image, GradientField, GrayImage, RgbImage};
pub use num::Real;
pub use pipeline::Pipeline;
pub use pso::{train, FitnessReport, PsoConfig, TrainOutcome};

pub type LineFitF64 = LineFit<f64>;
pub type LineFitF32 = LineFit<f32>;
pub type RgbGradientF64 = RgbGradient<f64>;
pub type RgbGradientF32 = RgbGradient<f32>;
pub type ThresholdsF64 = Thresholds<f64>;
pub type ThresholdsF32 = Thresholds<f32>;
pub type TransitionRefF64 = TransitionRef<f64>;
pub type TransitionRefF32 = TransitionRef<f32>;
pub type ClassifierConfigF64 = ClassifierConfig<f64>;
pub type ClassifierConfigF32 = ClassifierConfig<f32>;
pub type ClassifiedSegmentF64 = ClassifiedSegment<f64>;
pub type PsoConfigF64 = PsoConfig<f64>;
pub type PsoConfigF32 = PsoConfig<f32>;
pub type TrainOutcomeF64 = TrainOutcome<f64>;
pub type PipelineF64 = Pipeline<f64>;
pub type PipelineF32 = Pipeline<f32>;
