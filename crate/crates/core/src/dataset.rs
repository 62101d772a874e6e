//! Segment records and annotation sessions stored as JSON Lines.
//!
//! A session file starts with a `{"schema_version":1}` header line followed
//! by one record per line. An empty session is an empty file. Image paths
//! inside records are relative to the directory holding the session file.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::classifier::{ClassifiedSegment, FeatureLabel, RgbGradient};
use crate::error::{Error, Result};
use crate::num::Real;

pub const SCHEMA_VERSION: u32 = 1;

/// Stored features of one detected segment, plus an optional human label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub image: String,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub length: f64,
    pub grad_h: [f64; 3],
    pub grad_v: [f64; 3],
    pub predicted: FeatureLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_label: Option<FeatureLabel>,
}

impl SegmentRecord {
    pub fn from_classified<T: Real>(image: impl Into<String>, seg: &ClassifiedSegment<T>) -> Self {
        let s = &seg.segment;
        Self {
            image: image.into(),
            x1: s.x1,
            y1: s.y1,
            x2: s.x2,
            y2: s.y2,
            length: s.length,
            grad_h: seg.grad.h.map(Real::as_f64),
            grad_v: seg.grad.v.map(Real::as_f64),
            predicted: seg.label,
            human_label: None,
        }
    }

    pub fn gradient<T: Real>(&self) -> RgbGradient<T> {
        RgbGradient::new(self.grad_h.map(T::lit), self.grad_v.map(T::lit))
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let coords = [self.x1, self.y1, self.x2, self.y2, self.length];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err("non-finite coordinate or length".into());
        }
        let expect = (self.x2 - self.x1).hypot(self.y2 - self.y1);
        if (expect - self.length).abs() > 1e-3 {
            return Err(format!("length {} disagrees with endpoints ({expect})", self.length));
        }
        for (name, g) in [("grad_h", self.grad_h), ("grad_v", self.grad_v)] {
            if g.iter().any(|c| !c.is_finite() || c.abs() > 255.0) {
                return Err(format!("{name} component outside [-255, 255]"));
            }
        }
        if self.image.is_empty() {
            return Err("empty image path".into());
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
}

/// An ordered set of records, grouped by image in detection order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSession {
    pub records: Vec<SegmentRecord>,
    pub images: BTreeSet<String>,
    pub schema_version: u32,
}

impl AnnotationSession {
    /// Builds a session, stable-sorting records by image.
    pub fn from_records(mut records: Vec<SegmentRecord>) -> Self {
        records.sort_by(|a, b| a.image.cmp(&b.image));
        let images = records.iter().map(|r| r.image.clone()).collect();
        Self {
            records,
            images,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Registers an image even if it produced no records.
    pub fn add_image(&mut self, image: impl Into<String>) {
        self.images.insert(image.into());
    }

    /// Records of one image with their session-wide indices.
    pub fn records_for<'a>(&'a self, image: &'a str) -> impl Iterator<Item = (usize, &'a SegmentRecord)> + 'a {
        self.records.iter().enumerate().filter(move |(_, r)| r.image == image)
    }

    pub fn labeled(&self) -> impl Iterator<Item = &SegmentRecord> {
        self.records.iter().filter(|r| r.human_label.is_some())
    }

    /// Sets one record's human label and writes the session through to
    /// `path` atomically. On any error the session is left unchanged.
    pub fn set_label(&mut self, path: &Path, index: usize, label: &str) -> Result<()> {
        let label = FeatureLabel::parse(label)?;
        if index >= self.records.len() {
            return Err(Error::Index {
                index,
                len: self.records.len(),
            });
        }
        let previous = self.records[index].human_label.replace(label);
        if let Err(e) = write_records(&self.records, path) {
            self.records[index].human_label = previous;
            return Err(e);
        }
        Ok(())
    }
}

/// Resolves a record's image path against the session file location.
pub fn resolve_image(session_path: &Path, image: &str) -> PathBuf {
    session_path.parent().unwrap_or_else(|| Path::new(".")).join(image)
}

fn encode(records: &[SegmentRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    if records.is_empty() {
        return Ok(buf);
    }
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|reason| Error::Schema { line: i + 2, reason })?;
    }
    let header = serde_json::to_string(&Header {
        schema_version: SCHEMA_VERSION,
    })
    .expect("header serializes");
    buf.extend_from_slice(header.as_bytes());
    buf.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    Ok(buf)
}

/// Writes records to a temporary file next to `path` without publishing it.
pub fn stage_records(records: &[SegmentRecord], path: &Path) -> Result<NamedTempFile> {
    let bytes = encode(records)?;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    Ok(tmp)
}

/// Publishes a staged file over `path` with a single rename.
pub fn commit_staged(tmp: NamedTempFile, path: &Path) -> Result<()> {
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Atomically replaces `path` with the given records.
pub fn write_records(records: &[SegmentRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = stage_records(records, path)?;
    commit_staged(tmp, path)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<AnnotationSession> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses JSON Lines content. Blank lines are ignored.
pub fn parse_records<R: BufRead>(reader: R) -> Result<AnnotationSession> {
    let mut records = Vec::new();
    let mut version = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<session>", e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if version.is_none() && records.is_empty() && text.contains("\"schema_version\"") {
            let h: Header = serde_json::from_str(text).map_err(|e| Error::Schema {
                line: line_no,
                reason: e.to_string(),
            })?;
            if h.schema_version != SCHEMA_VERSION {
                return Err(Error::Schema {
                    line: line_no,
                    reason: format!("unsupported schema_version {}", h.schema_version),
                });
            }
            version = Some(h.schema_version);
            continue;
        }
        let rec: SegmentRecord = serde_json::from_str(text).map_err(|e| Error::Schema {
            line: line_no,
            reason: e.to_string(),
        })?;
        rec.validate().map_err(|reason| Error::Schema { line: line_no, reason })?;
        records.push(rec);
    }
    let mut session = AnnotationSession::from_records(records);
    session.schema_version = version.unwrap_or(SCHEMA_VERSION);
    Ok(session)
}
