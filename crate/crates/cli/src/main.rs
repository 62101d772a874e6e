//! `pitchlines` command-line front end.

mod config;
mod overlay;
mod server;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, RwLock};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pitchlines::classifier::ReferenceRule;
use pitchlines::pso::write_history_csv;
use pitchlines::{
    decode_image, eval, read_records, write_records, AnnotationSession, ClassifierConfigF64, PsoConfigF64,
    TransitionRefF64,
};
use serde::Serialize;

use config::{collect_images, image_key, AppConfig, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "pitchlines", version, about = "Soccer field line detection, annotation and threshold training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect and classify segments in one image or a directory of images.
    Detect {
        /// Image file or directory of .png/.ppm images.
        #[arg(long)]
        input: PathBuf,
        /// Detector config JSON ({"detector": {...}, "port": n}).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Classifier thresholds JSON, as written by `train`.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Records file to write (JSON lines).
        #[arg(long)]
        output: PathBuf,
        /// Directory for overlay PNGs: lines green, boundaries blue, rejected red dashed.
        #[arg(long)]
        draw: Option<PathBuf>,
    },
    /// Serve the annotation API and UI for a session file.
    Annotate {
        /// Directory of images; detection runs over it when the session file is missing.
        #[arg(long)]
        images: Option<PathBuf>,
        /// Session records file, updated on every label change.
        #[arg(long)]
        session: PathBuf,
        /// TCP port on 127.0.0.1.
        #[arg(long, default_value_t = DEFAULT_PORT, value_parser = clap::value_parser!(u16).range(1024..))]
        port: u16,
    },
    /// Fit one reference's thresholds to labeled records with a particle swarm.
    Train {
        /// One or more labeled records files.
        #[arg(long, num_args = 1.., required = true)]
        annotations: Vec<PathBuf>,
        /// Reference transition: GW (green-white, lines) or GB (green-black, boundary).
        #[arg(long, value_enum)]
        reference: Reference,
        /// Thresholds JSON; an existing file keeps its other references.
        #[arg(long)]
        out: PathBuf,
        /// Number of particles.
        #[arg(long, default_value_t = 30)]
        swarm: usize,
        /// Number of iterations.
        #[arg(long, default_value_t = 200)]
        iters: usize,
        /// Random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Precision and recall of thresholds on labeled records.
    Eval {
        /// Labeled records file.
        #[arg(long)]
        annotations: PathBuf,
        /// Classifier thresholds JSON.
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Time detection plus classification per frame, decode excluded.
    Bench {
        /// Image file or directory of images.
        #[arg(long)]
        input: PathBuf,
        /// Detector config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Classifier thresholds JSON.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Runs per image; the first is a discarded warm-up.
        #[arg(long, default_value_t = 10)]
        repeat: usize,
    },
    /// Write synthetic field images.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of images.
        #[arg(long, default_value_t = 3)]
        count: u64,
        /// Seed of the first image.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also draw a dark boundary band.
        #[arg(long)]
        boundary: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Reference {
    #[value(name = "GW")]
    Gw,
    #[value(name = "GB")]
    Gb,
}

impl Reference {
    fn transition(self) -> TransitionRefF64 {
        match self {
            Reference::Gw => TransitionRefF64::green_white(),
            Reference::Gb => TransitionRefF64::green_black(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PITCHLINES_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<pitchlines::Error>() {
                Some(pitchlines::Error::NoPositives(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Detect {
            input,
            config,
            thresholds,
            output,
            draw,
        } => cmd_detect(&input, config.as_deref(), thresholds.as_deref(), &output, draw.as_deref()),
        Command::Annotate { images, session, port } => cmd_annotate(images.as_deref(), &session, port),
        Command::Train {
            annotations,
            reference,
            out,
            swarm,
            iters,
            seed,
        } => cmd_train(&annotations, reference, &out, swarm, iters, seed),
        Command::Eval { annotations, thresholds } => cmd_eval(&annotations, thresholds.as_deref()),
        Command::Bench {
            input,
            config,
            thresholds,
            repeat,
        } => cmd_bench(&input, config.as_deref(), thresholds.as_deref(), repeat),
        Command::Synth {
            out,
            count,
            seed,
            boundary,
        } => cmd_synth(&out, count, seed, boundary),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Detects every image and returns records keyed relative to `records_path`.
fn detect_all(app: &AppConfig, images: &[PathBuf], records_path: &Path, draw: Option<&Path>) -> Result<AnnotationSession> {
    let pipeline = app.pipeline()?;
    let mut all = Vec::new();
    let mut keys = Vec::with_capacity(images.len());
    for path in images {
        let img = decode_image(path)?;
        let key = image_key(path, records_path)?;
        let segments = pipeline.run(&img).with_context(|| format!("processing {}", path.display()))?;
        log::info!("{}: {} segments", path.display(), segments.len());
        if let Some(dir) = draw {
            let stem = path.file_stem().map_or("image".into(), |s| s.to_string_lossy());
            overlay::save_png(&overlay::draw(&img, &segments), &dir.join(format!("{stem}_overlay.png")))?;
        }
        all.extend(segments.iter().map(|s| pitchlines::SegmentRecord::from_classified(key.as_str(), s)));
        keys.push(key);
    }
    let mut session = AnnotationSession::from_records(all);
    for key in keys {
        session.add_image(key);
    }
    Ok(session)
}

fn cmd_detect(input: &Path, config: Option<&Path>, thresholds: Option<&Path>, output: &Path, draw: Option<&Path>) -> Result<()> {
    let app = AppConfig::load(config, thresholds)?;
    if let Some(t) = &app.thresholds_path {
        log::info!("thresholds from {}", t.display());
    }
    let images = collect_images(input)?;
    if images.is_empty() {
        bail!("no .png or .ppm images in {}", input.display());
    }
    ensure_parent(output)?;
    if let Some(dir) = draw {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let session = detect_all(&app, &images, output, draw)?;
    write_records(&session.records, output)?;
    eprintln!("{} segments from {} images written to {}", session.len(), images.len(), output.display());
    Ok(())
}

fn cmd_annotate(images: Option<&Path>, session_path: &Path, port: u16) -> Result<()> {
    let app = AppConfig::load(None, None)?;
    app.check_port(port)?;
    let mut session = if session_path.exists() {
        read_records(session_path)?
    } else {
        let Some(dir) = images else {
            bail!("session {} does not exist and no --images given", session_path.display());
        };
        let files = collect_images(dir)?;
        ensure_parent(session_path)?;
        let session = detect_all(&app, &files, session_path, None)?;
        write_records(&session.records, session_path)?;
        log::info!("detected {} segments into {}", session.len(), session_path.display());
        session
    };
    if let Some(dir) = images {
        for file in collect_images(dir)? {
            session.add_image(image_key(&file, session_path)?);
        }
    }
    let state = Arc::new(server::AppState {
        session: RwLock::new(session),
        session_path: session_path.to_path_buf(),
    });
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async {
        let addr = std::net::SocketAddr::from(([127, 0, 0, 1], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, server::router(state.clone()))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .context("serving")
    })?;
    let session = state.session.read().expect("session lock poisoned");
    write_records(&session.records, session_path)?;
    eprintln!("session flushed to {}", session_path.display());
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {}
        () = term => {}
    }
}

/// `<stem>_history.csv` next to the thresholds file.
fn history_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or("thresholds".into(), |s| s.to_string_lossy());
    out.with_file_name(format!("{stem}_history.csv"))
}

fn cmd_train(annotations: &[PathBuf], reference: Reference, out: &Path, swarm: usize, iters: usize, seed: u64) -> Result<()> {
    let mut records = Vec::new();
    for path in annotations {
        records.extend(read_records(path)?.records);
    }
    let mut classifier = if out.exists() {
        ClassifierConfigF64::load(out)?
    } else {
        ClassifierConfigF64::default()
    };
    let config = PsoConfigF64 {
        swarm_size: swarm,
        iterations: iters,
        seed,
        ..Default::default()
    };
    let transition = reference.transition();
    let outcome = pitchlines::train(&records, &config, &transition, classifier.signed_match)?;
    classifier.upsert(ReferenceRule {
        reference: transition,
        thresholds: outcome.thresholds,
    });
    ensure_parent(out)?;
    std::fs::write(out, classifier.to_json()).with_context(|| format!("writing {}", out.display()))?;
    write_history_csv(&outcome.history, history_path(out))?;
    println!("{}", serde_json::to_string(&outcome.report)?);
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    precision: f64,
    recall: f64,
    labeled: usize,
    unlabeled_skipped: usize,
}

fn cmd_eval(annotations: &Path, thresholds: Option<&Path>) -> Result<()> {
    let app = AppConfig::load(None, thresholds)?;
    let session = read_records(annotations)?;
    let mut labeled: Vec<_> = session.labeled().cloned().collect();
    let skipped = session.len() - labeled.len();
    if labeled.is_empty() {
        bail!("no labeled records in {}", annotations.display());
    }
    if skipped > 0 {
        log::warn!("{skipped} unlabeled records skipped");
    }
    eval::replay(&mut labeled, &app.classifier);
    let pr = eval::score(&labeled)?;
    let summary = EvalSummary {
        precision: pr.precision,
        recall: pr.recall,
        labeled: labeled.len(),
        unlabeled_skipped: skipped,
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn cmd_bench(input: &Path, config: Option<&Path>, thresholds: Option<&Path>, repeat: usize) -> Result<()> {
    let app = AppConfig::load(config, thresholds)?;
    let pipeline = app.pipeline()?;
    let files = collect_images(input)?;
    if files.is_empty() {
        bail!("no .png or .ppm images in {}", input.display());
    }
    let images = files.iter().map(decode_image).collect::<pitchlines::Result<Vec<_>>>()?;
    let report = eval::benchmark(&images, &pipeline, repeat)?;
    println!("{:<40} {:>10} {:>10}", "image", "mean_ms", "std_ms");
    for (file, (mean, std)) in files.iter().zip(&report.per_image) {
        let name = file.file_name().map_or_else(|| file.display().to_string(), |n| n.to_string_lossy().into_owned());
        println!("{name:<40} {mean:>10.3} {std:>10.3}");
    }
    println!(
        "{:<40} {:>10.3} {:>10.3}",
        format!("all ({} runs, median {:.3})", report.samples, report.median_ms),
        report.mean_ms,
        report.std_ms
    );
    println!("decode excluded; first run per image discarded");
    Ok(())
}

fn cmd_synth(out: &Path, count: u64, seed: u64, boundary: bool) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let spec = eval::SceneSpec {
        boundary,
        ..Default::default()
    };
    for s in seed..seed + count {
        let scene = eval::generate_scene(s, &spec)?;
        overlay::save_png(&scene.image, &out.join(format!("scene_{s:04}.png")))?;
    }
    Ok(())
}
