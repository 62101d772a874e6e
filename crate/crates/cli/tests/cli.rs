use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pitchlines"));
    c.env("PITCHLINES_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn pitchlines")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, count: u64, boundary: bool) {
    let mut args = vec!["synth", "--out", s(dir), "--count"];
    let n = count.to_string();
    args.push(&n);
    if boundary {
        args.push("--boundary");
    }
    assert!(run(&args).status.success());
}

/// Non-empty record lines (the header line carries no image).
fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v.get("image").is_some())
        .collect()
}

fn write_records(path: &Path, header: &str, recs: &[Value]) {
    let mut f = std::fs::File::create(path).unwrap();
    writeln!(f, "{header}").unwrap();
    for r in recs {
        writeln!(f, "{r}").unwrap();
    }
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn help_documents_every_flag() {
    let cases: [(&str, &[&str]); 5] = [
        ("detect", &["--input", "--config", "--thresholds", "--output", "--draw"]),
        ("annotate", &["--images", "--session", "--port"]),
        ("train", &["--annotations", "--reference", "--out", "--swarm", "--iters", "--seed"]),
        ("eval", &["--annotations", "--thresholds"]),
        ("bench", &["--input", "--config", "--thresholds", "--repeat"]),
    ];
    for (cmd, flags) in cases {
        let out = run(&[cmd, "--help"]);
        assert!(out.status.success(), "{cmd} --help failed");
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    assert!(run(&["--help"]).status.success());
}

#[test]
fn detect_covers_every_image_and_draws_overlays() {
    let tmp = TempDir::new().unwrap();
    let images = tmp.path().join("img");
    synth(&images, 3, true);
    let out = tmp.path().join("rec.jsonl");
    let draw = tmp.path().join("draw");
    let res = run(&["detect", "--input", s(&images), "--output", s(&out), "--draw", s(&draw)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let recs = records(&out);
    let mut seen: Vec<&str> = recs.iter().map(|r| r["image"].as_str().unwrap()).collect();
    seen.dedup();
    assert_eq!(seen, ["img/scene_0000.png", "img/scene_0001.png", "img/scene_0002.png"]);
    for i in 0..3 {
        let overlay = draw.join(format!("scene_{i:04}_overlay.png"));
        assert!(overlay.metadata().unwrap().len() > 0);
    }

    // byte-identical on a second run
    let again = tmp.path().join("again.jsonl");
    assert!(run(&["detect", "--input", s(&images), "--output", s(&again)]).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn missing_config_exits_one_without_output() {
    let tmp = TempDir::new().unwrap();
    let images = tmp.path().join("img");
    synth(&images, 1, false);
    let out = tmp.path().join("sub").join("rec.jsonl");
    let missing = tmp.path().join("nope.json");
    let res = run(&["detect", "--input", s(&images), "--config", s(&missing), "--output", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("nope.json"));
    assert!(!out.exists());

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"detector": {"gaussian_kernel": 4}}"#).unwrap();
    let res = run(&["detect", "--input", s(&images), "--config", s(&bad), "--output", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn undecodable_image_names_the_file() {
    let tmp = TempDir::new().unwrap();
    let broken = tmp.path().join("broken.png");
    std::fs::write(&broken, b"not a png").unwrap();
    let res = run(&["detect", "--input", s(&broken), "--output", s(&tmp.path().join("r.jsonl"))]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("broken.png"));
}

#[test]
fn blank_green_image_gives_no_records() {
    let tmp = TempDir::new().unwrap();
    let img = tmp.path().join("green.ppm");
    let mut bytes = b"P6\n64 48\n255\n".to_vec();
    bytes.extend([30u8, 130, 40].repeat(64 * 48));
    std::fs::write(&img, bytes).unwrap();
    let out = tmp.path().join("rec.jsonl");
    assert!(run(&["detect", "--input", s(&img), "--output", s(&out)]).status.success());
    assert!(records(&out).is_empty());
}

fn labeled_session(tmp: &TempDir) -> PathBuf {
    let images = tmp.path().join("img");
    synth(&images, 3, true);
    let out = tmp.path().join("rec.jsonl");
    assert!(run(&["detect", "--input", s(&images), "--output", s(&out)]).status.success());
    let mut recs = records(&out);
    for r in &mut recs {
        r["human_label"] = r["predicted"].clone();
    }
    recs[0]["human_label"] = json!("none");
    let labeled = tmp.path().join("labeled.jsonl");
    write_records(&labeled, &first_line(&out), &recs);
    labeled
}

#[test]
fn train_writes_thresholds_and_history_then_eval_reads_them() {
    let tmp = TempDir::new().unwrap();
    let labeled = labeled_session(&tmp);
    let thr = tmp.path().join("thr.json");
    let train = |out: &Path| run(&["train", "--annotations", s(&labeled), "--reference", "GW", "--out", s(out), "--iters", "20", "--seed", "3"]);
    let res = train(&thr);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: Value = serde_json::from_slice(&res.stdout).unwrap();
    for key in ["tp", "fp", "tn", "fn", "score"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
    let history = std::fs::read_to_string(tmp.path().join("thr_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 21);

    let thr2 = tmp.path().join("thr2.json");
    assert!(train(&thr2).status.success());
    assert_eq!(std::fs::read(&thr).unwrap(), std::fs::read(&thr2).unwrap());

    let config: Value = serde_json::from_slice(&std::fs::read(&thr).unwrap()).unwrap();
    let names: Vec<&str> = config["references"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"GW") && names.contains(&"GB"));

    let res = run(&["eval", "--annotations", s(&labeled), "--thresholds", s(&thr)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let pr: Value = serde_json::from_slice(&res.stdout).unwrap();
    let (p, r) = (pr["precision"].as_f64().unwrap(), pr["recall"].as_f64().unwrap());
    assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r));
}

#[test]
fn train_without_positives_exits_two() {
    let tmp = TempDir::new().unwrap();
    let labeled = labeled_session(&tmp);
    let mut recs = records(&labeled);
    for r in &mut recs {
        r["human_label"] = json!("none");
    }
    let negatives = tmp.path().join("neg.jsonl");
    write_records(&negatives, &first_line(&labeled), &recs);
    let out = tmp.path().join("thr.json");
    let res = run(&["train", "--annotations", s(&negatives), "--reference", "GB", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no positive"));
    assert!(!out.exists());
}

#[test]
fn eval_without_labels_fails() {
    let tmp = TempDir::new().unwrap();
    let images = tmp.path().join("img");
    synth(&images, 1, false);
    let out = tmp.path().join("rec.jsonl");
    assert!(run(&["detect", "--input", s(&images), "--output", s(&out)]).status.success());
    assert_eq!(run(&["eval", "--annotations", s(&out)]).status.code(), Some(1));
}

#[test]
fn bench_prints_a_table() {
    let tmp = TempDir::new().unwrap();
    let images = tmp.path().join("img");
    synth(&images, 2, false);
    let res = run(&["bench", "--input", s(&images), "--repeat", "3"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("scene_0000.png") && text.contains("scene_0001.png"));
    assert!(text.contains("decode excluded"));
    assert_eq!(run(&["bench", "--input", s(&images), "--repeat", "2"]).status.code(), Some(1));
}

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

struct Server {
    child: Child,
    base: String,
}

impl Server {
    fn start(images: &Path, session: &Path) -> Self {
        let port = free_port();
        let child = bin()
            .args(["annotate", "--images", s(images), "--session", s(session), "--port", &port.to_string()])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        Self {
            child,
            base: format!("http://127.0.0.1:{port}"),
        }
    }

    async fn wait_ready(&mut self, client: &reqwest::Client) {
        let start = Instant::now();
        while start.elapsed() < Duration::from_secs(60) {
            if client.get(format!("{}/api/images", self.base)).send().await.is_ok() {
                return;
            }
            assert!(self.child.try_wait().unwrap().is_none(), "server exited early");
            tokio::time::sleep(Duration::from_millis(100)).await;
        }
        panic!("server did not come up");
    }

    fn terminate(mut self) -> std::process::ExitStatus {
        let pid = self.child.id().to_string();
        assert!(Command::new("kill").args(["-TERM", &pid]).status().unwrap().success());
        self.child.wait().unwrap()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
    }
}

async fn post_label(client: &reqwest::Client, base: &str, body: Value) -> reqwest::Response {
    client.post(format!("{base}/api/label")).json(&body).send().await.unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn annotate_serves_the_api() {
    let tmp = TempDir::new().unwrap();
    let images = tmp.path().join("img");
    synth(&images, 2, true);
    let session = tmp.path().join("session.jsonl");
    let client = reqwest::Client::new();
    let mut server = Server::start(&images, &session);
    server.wait_ready(&client).await;
    let base = server.base.clone();

    let list: Vec<String> = client.get(format!("{base}/api/images")).send().await.unwrap().json().await.unwrap();
    assert_eq!(list, ["img/scene_0000.png", "img/scene_0001.png"]);

    let url = format!("{base}/api/records?image=img/scene_0001.png");
    let recs: Vec<Value> = client.get(&url).send().await.unwrap().json().await.unwrap();
    assert!(!recs.is_empty());
    let index = recs[0]["index"].as_u64().unwrap();
    assert!(recs[0].get("human_label").is_none());

    let res = post_label(&client, &base, json!({"index": index, "label": "field_boundary"})).await;
    assert_eq!(res.status(), 200);
    let recs: Vec<Value> = client.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(recs[0]["human_label"], "field_boundary");
    // written through before the response
    let on_disk = records(&session);
    assert_eq!(on_disk[index as usize]["human_label"], "field_boundary");

    let total = records(&session).len();
    for bad in [
        json!({"index": total, "label": "field_line"}),
        json!({"index": index, "label": "goalpost"}),
        json!({"index": -1, "label": "none"}),
        json!({"index": index}),
        json!({"index": index, "label": "none", "grad_h": [0, 0, 0]}),
    ] {
        assert_eq!(post_label(&client, &base, bad.clone()).await.status(), 400, "{bad}");
    }
    let res = client
        .post(format!("{base}/api/label"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(res.status(), 400);

    let res = client.get(format!("{base}/api/image/img/scene_0000.png")).send().await.unwrap();
    assert_eq!(res.status(), 200);
    assert_eq!(res.headers()["content-type"], "image/png");
    let bytes = res.bytes().await.unwrap();
    assert_eq!(&bytes[..], &std::fs::read(images.join("scene_0000.png")).unwrap()[..]);
    for missing in ["img/other.png", "../session.jsonl", "session.jsonl"] {
        let res = client.get(format!("{base}/api/image/{missing}")).send().await.unwrap();
        assert_eq!(res.status(), 404, "{missing}");
    }
    let res = client.get(format!("{base}/api/records?image=nope.png")).send().await.unwrap();
    assert_eq!(res.status(), 404);

    let page = client.get(&base).send().await.unwrap().text().await.unwrap();
    assert!(page.contains("<html"));

    assert!(server.terminate().success());
    let on_disk = records(&session);
    assert_eq!(on_disk[index as usize]["human_label"], "field_boundary");

    // restart reads the persisted session instead of detecting again
    let mut server = Server::start(&images, &session);
    server.wait_ready(&client).await;
    let recs: Vec<Value> = client
        .get(format!("{}/api/records?image=img/scene_0001.png", server.base))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(recs[0]["human_label"], "field_boundary");
}

#[test]
fn annotate_port_in_use_exits_one() {
    let tmp = TempDir::new().unwrap();
    let images = tmp.path().join("img");
    synth(&images, 1, false);
    let session = tmp.path().join("session.jsonl");
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port().to_string();
    let res = run(&["annotate", "--images", s(&images), "--session", s(&session), "--port", &port]);
    assert_eq!(res.status.code(), Some(1));
    let res = run(&["annotate", "--session", s(&session), "--port", "80"]);
    assert_ne!(res.status.code(), Some(0));
}
