use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pitchlines::{ClassifierConfigF64, DetectorParams, PipelineF64};
use serde::Deserialize;

pub const DEFAULT_PORT: u16 = 8350;

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub detector: DetectorParams,
    pub port: Option<u16>,
}

/// Everything a subcommand needs to run the pipeline.
#[derive(Debug, Clone)]
pub struct AppConfig {
    pub detector: DetectorParams,
    pub classifier: ClassifierConfigF64,
    pub thresholds_path: Option<PathBuf>,
    pub port: u16,
}

impl AppConfig {
    pub fn load(config: Option<&Path>, thresholds: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str::<ConfigFile>(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        file.detector
            .validate()
            .with_context(|| format!("config {}", config.map_or("<default>".into(), |p| p.display().to_string())))?;
        let classifier = match thresholds {
            Some(path) => ClassifierConfigF64::load(path)?,
            None => ClassifierConfigF64::default(),
        };
        let app = Self {
            detector: file.detector,
            classifier,
            thresholds_path: thresholds.map(Path::to_path_buf),
            port: file.port.unwrap_or(DEFAULT_PORT),
        };
        app.check_port(app.port)?;
        Ok(app)
    }

    pub fn check_port(&self, port: u16) -> Result<()> {
        if port < 1024 {
            bail!("port {port} outside 1024..=65535");
        }
        Ok(())
    }

    pub fn pipeline(&self) -> Result<PipelineF64> {
        Ok(PipelineF64::new(self.detector.clone(), self.classifier.clone())?)
    }
}

/// Image files directly inside `input`, or `input` itself, sorted by name.
pub fn collect_images(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = std::fs::read_dir(input).with_context(|| format!("reading {}", input.display()))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("reading {}", input.display()))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "ppm")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// How a record refers to `image`: relative to the session directory when
/// the image lives below it, absolute otherwise. Always `/`-separated.
pub fn image_key(image: &Path, session: &Path) -> Result<String> {
    let abs = image.canonicalize().with_context(|| format!("resolving {}", image.display()))?;
    let dir = session.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base = dir.canonicalize().with_context(|| format!("resolving {}", dir.display()))?;
    Ok(match abs.strip_prefix(&base) {
        Ok(rel) => rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/"),
        Err(_) => abs.to_string_lossy().into_owned(),
    })
}
