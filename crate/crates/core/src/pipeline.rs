//! Detection followed by classification, the per-frame unit of work.

use crate::classifier::{classify_segment, ClassifiedSegment, ClassifierConfig};
use crate::dataset::SegmentRecord;
use crate::elsed::{detect_with_field, DetectorParams};
use crate::error::{Error, Result};
use crate::imaging::RgbImage;
use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline<T: Real> {
    pub detector: DetectorParams,
    pub classifier: ClassifierConfig<T>,
}

impl<T: Real> Default for Pipeline<T> {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl<T: Real> Pipeline<T> {
    pub fn new(detector: DetectorParams, classifier: ClassifierConfig<T>) -> Result<Self> {
        detector.validate()?;
        classifier.validate()?;
        Ok(Self { detector, classifier })
    }

    /// Detects, validates and classifies every segment of one frame.
    ///
    /// Gradient windows are read from `img` as given, not from the smoothed
    /// luminance the detector worked on.
    pub fn run(&self, img: &RgbImage) -> Result<Vec<ClassifiedSegment<T>>> {
        let (segments, _) = detect_with_field(img, &self.detector)?;
        let mut out = Vec::with_capacity(segments.len());
        for seg in segments {
            match classify_segment(img, seg, &self.classifier) {
                Ok(c) => out.push(c),
                Err(Error::EmptyChain) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Runs the frame and converts the result into storable records.
    pub fn records(&self, img: &RgbImage, image_name: &str) -> Result<Vec<SegmentRecord>> {
        Ok(self
            .run(img)?
            .iter()
            .map(|c| SegmentRecord::from_classified(image_name, c))
            .collect())
    }
}
