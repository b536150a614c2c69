//! End-to-end runs of the `csta` binary on small inputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csta::report::{read_ablation_csv, read_attention_csv, read_confusion_csv, read_history_csv, JointWeight};
use csta::skeleton::synthetic::{key_joint_dataset, SyntheticConfig};
use csta::skeleton::{parse_canonical_json, write_canonical_json, JOINTS};
use csta::trainer::EvalReport;
use tempfile::TempDir;

const SMALL_CONFIG: &str = "\
frames = 6
interp_joints = 6
conv1_channels = 2
conv2_channels = 3
conv3_channels = 3
fc1_width = 8
fc2_width = 6
augmentation = false
batch_size = 4
epochs = 2
";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ntu")
}

fn csta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csta")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let data = key_joint_dataset(
            &SyntheticConfig {
                per_class: 4,
                train_per_class: 3,
                frames: 10,
                noise: 0.01,
            },
            5,
        );
        fs::write(dir.path().join("data.json"), write_canonical_json(&data).unwrap()).unwrap();
        fs::write(dir.path().join("config.toml"), SMALL_CONFIG).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let (data, config, out) = (self.path("data.json"), self.path("config.toml"), self.path(out));
        let mut args = vec!["train", "--data", s(&data), "--config", s(&config), "--out", s(&out)];
        args.extend_from_slice(extra);
        csta(&args)
    }
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ingest_ntu_fixtures_then_canonical_is_idempotent() {
    let ws = Workspace::new();
    let first = ws.path("ntu.json");
    let out = csta(&["ingest", "--input", s(&fixtures()), "--format", "ntu", "--output", s(&first)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let data = parse_canonical_json(&fs::read_to_string(&first).unwrap()).unwrap();
    assert_eq!(data.class_names, ["A007", "A013"]);
    assert_eq!(data.samples.len(), 3);
    let m = manifest(&ws.path("ntu.json.manifest.json"));
    assert_eq!(m["command"], "ingest");
    assert!(m["tool_version"].is_string());

    let second = ws.path("again.json");
    let out = csta(&["ingest", "--input", s(&first), "--format", "canonical", "--output", s(&second)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn malformed_ntu_file_is_a_usage_error_naming_the_file() {
    let ws = Workspace::new();
    let dir = ws.path("bad");
    fs::create_dir(&dir).unwrap();
    let good = fs::read_to_string(fixtures().join("S001C002P003R001A007.skeleton")).unwrap();
    let truncated: String = good.lines().take(5).map(|l| format!("{l}\n")).collect();
    fs::write(dir.join("S001C001P001R001A001.skeleton"), truncated).unwrap();
    let out = csta(&["ingest", "--input", s(&dir), "--format", "ntu", "--output", s(&ws.path("x.json"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("S001C001P001R001A001.skeleton"), "{}", stderr(&out));
    assert!(!ws.path("x.json").exists());
}

#[test]
fn bad_invocations_exit_with_usage_code() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.train("t", &["--epochs", "0"])), 2);
    fs::write(ws.path("typo.toml"), "epochz = 3\n").unwrap();
    let out = csta(&[
        "train",
        "--data",
        s(&ws.path("data.json")),
        "--config",
        s(&ws.path("typo.toml")),
        "--out",
        s(&ws.path("t")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("epochz"));
    let out = csta(&["train", "--data", s(&ws.path("missing.json")), "--out", s(&ws.path("t"))]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&csta(&["no-such-command"])), 2);
}

#[test]
fn train_eval_visualize_round() {
    let ws = Workspace::new();
    let out = ws.train("run", &["--seed", "4", "--epochs", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let history = read_history_csv(&fs::read_to_string(ws.path("run/history.csv")).unwrap()).unwrap();
    assert_eq!(history.len(), 3);
    assert_eq!(history.iter().map(|h| h.epoch).collect::<Vec<_>>(), [1, 2, 3]);
    let m = manifest(&ws.path("run/manifest.json"));
    assert_eq!(m["seed"], 4);
    assert_eq!(m["config"]["epochs"], 3);

    let ckpt = ws.path("run/model.ckpt");
    let out = csta(&["eval", "--data", s(&ws.path("data.json")), "--checkpoint", s(&ckpt)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.sample_count, 3);
    assert!((0.0..=1.0).contains(&report.accuracy));
    let confusion = fs::read_to_string(ws.path("run/confusion_test.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 4);
    let (names, matrix) = read_confusion_csv(&confusion).unwrap();
    assert_eq!(names.len(), 3);
    assert_eq!(matrix, report.confusion);
    assert!(ws.path("run/eval_test.manifest.json").exists());

    let vis = ws.path("vis");
    let out = csta(&[
        "visualize-attention",
        "--data",
        s(&ws.path("data.json")),
        "--checkpoint",
        s(&ckpt),
        "--sample",
        "0",
        "--out",
        s(&vis),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cells = read_attention_csv(&fs::read_to_string(vis.join("attention.csv")).unwrap()).unwrap();
    assert_eq!(cells.len(), 6 * JOINTS);
    let ranked: Vec<JointWeight> = serde_json::from_str(&fs::read_to_string(vis.join("joint_weights.json")).unwrap()).unwrap();
    assert_eq!(ranked.len(), JOINTS);
    let top = cells.iter().max_by(|a, b| a.s_weight.total_cmp(&b.s_weight)).unwrap();
    assert_eq!(ranked[0].s_weight, top.s_weight);
    assert!(fs::read_to_string(vis.join("attention.svg")).unwrap().starts_with("<svg"));
    assert!(vis.join("manifest.json").exists());

    let out = csta(&[
        "visualize-attention",
        "--data",
        s(&ws.path("data.json")),
        "--checkpoint",
        s(&ckpt),
        "--sample",
        "12",
        "--out",
        s(&vis),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_rejects_a_dataset_with_other_classes() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.train("run", &["--epochs", "1"])), 0);
    let other = ws.path("ntu.json");
    assert_eq!(
        code(&csta(&["ingest", "--input", s(&fixtures()), "--format", "ntu", "--output", s(&other)])),
        0
    );
    let out = csta(&["eval", "--data", s(&other), "--checkpoint", s(&ws.path("run/model.ckpt"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("classes"));
}

#[test]
fn ablate_writes_four_rows_and_a_flat_bypass_heatmap() {
    let ws = Workspace::new();
    let out_dir = ws.path("abl");
    let out = csta(&[
        "ablate",
        "--data",
        s(&ws.path("data.json")),
        "--config",
        s(&ws.path("config.toml")),
        "--out",
        s(&out_dir),
        "--epochs",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_ablation_csv(&fs::read_to_string(out_dir.join("ablation.csv")).unwrap()).unwrap();
    let modes: Vec<&str> = rows.iter().map(|r| r.mode.as_str()).collect();
    assert_eq!(modes, ["full", "without_S", "without_T", "without_ST"]);
    assert!(rows.iter().all(|r| r.error.is_none() && r.accuracy.is_some()));
    assert!(out_dir.join("manifest.json").exists());

    let vis = ws.path("vis");
    let out = csta(&[
        "visualize-attention",
        "--data",
        s(&ws.path("data.json")),
        "--checkpoint",
        s(&out_dir.join("model_without_ST.ckpt")),
        "--sample",
        "1",
        "--out",
        s(&vis),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cells = read_attention_csv(&fs::read_to_string(vis.join("attention.csv")).unwrap()).unwrap();
    assert!(cells.iter().all(|c| c.coupled == 1.0 && c.s_weight == 1.0 && c.t_weight == 1.0));
    let svg = fs::read_to_string(vis.join("attention.svg")).unwrap();
    let fills: std::collections::BTreeSet<&str> = svg
        .split("<rect")
        .filter(|r| r.contains("data-frame="))
        .filter_map(|r| r.split("fill=\"").nth(1)?.split('"').next())
        .collect();
    assert_eq!(fills.len(), 1, "{fills:?}");
    assert_eq!(svg.matches("data-frame=").count(), 6 * JOINTS);
}
