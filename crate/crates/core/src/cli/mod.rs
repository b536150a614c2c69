//! Command-line front end. Exit codes: 0 success, 1 internal or diverged
//! training, 2 bad usage or input.

mod config;

pub use config::RunConfig;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{load_checkpoint, save_checkpoint, ModelError, ModelParams};
use crate::report::{
    ablation_csv, attention_csv, confusion_csv, heatmap_svg, history_csv, joint_weights_json, write_atomic,
    AblationRecord, ReportError,
};
use crate::skeleton::{
    parse_canonical_json, parse_ntu_file_name, parse_ntu_skeleton, write_canonical_json, Dataset,
    FixedSample, Protocol, Split, SplitName,
};
use crate::trainer::{ablation_suite_with, evaluate, train_with_progress, TrainError};

/// Performers in the training half of the NTU RGB+D cross-subject protocol.
pub const NTU_TRAIN_SUBJECTS: [u32; 20] = [1, 2, 4, 5, 8, 9, 13, 14, 15, 16, 17, 18, 19, 25, 27, 28, 31, 34, 35, 38];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

fn input(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

fn internal(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("{context}: {e}"))
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Data(_) => CliError::Input(e.to_string()),
            TrainError::Model(ModelError::Config(_) | ModelError::Param { .. }) => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "csta", version, about = "Skeleton action recognition with coupled spatial-temporal attention")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Directory of NTU RGB+D `.skeleton` files (or a single file).
    Ntu,
    /// Canonical JSON dataset.
    Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for SplitName {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitName::Train,
            SplitArg::Test => SplitName::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StreamArg {
    Position,
    Motion,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert raw recordings into a canonical JSON dataset.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: InputFormat,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train one model; writes model.ckpt, history.csv and manifest.json.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Flat key = value config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's epoch count.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: Option<u64>,
    },
    /// Evaluate a checkpoint; writes eval_<split>.json and confusion_<split>.csv.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Output directory; defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate all four attention modes; writes ablation.csv.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: Option<u64>,
    },
    /// Export one sample's attention as CSV, SVG heatmap and ranked joints.
    VisualizeAttention {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Index into the dataset's sample list.
        #[arg(long)]
        sample: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "position")]
        stream: StreamArg,
    },
}

/// Written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub duration_seconds: f64,
}

struct Run {
    command: &'static str,
    started: Instant,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Run {
            command,
            started: Instant::now(),
            config: serde_json::Value::Null,
            seed: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.to_string(), path.display().to_string());
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes).map_err(|e| internal(path.display(), e))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    fn finish(self, path: &Path) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| internal("manifest", e))? + "\n";
        write_atomic(path, text.as_bytes()).map_err(|e| internal(path.display(), e))
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(path.display(), e))
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    parse_canonical_json(&read_text(path)?).map_err(|e| input(path.display(), e))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => RunConfig::parse(&read_text(p)?).map_err(|e| input(p.display(), e)),
    }
}

fn load_params(path: &Path) -> Result<ModelParams, CliError> {
    load_checkpoint(path).map_err(|e| input(path.display(), e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| internal(dir.display(), e))
}

fn check_classes(dataset: &Dataset, params: &ModelParams) -> Result<(), CliError> {
    if dataset.num_classes() != params.config.num_classes {
        return Err(CliError::Input(format!(
            "checkpoint predicts {} classes but the dataset has {}",
            params.config.num_classes,
            dataset.num_classes()
        )));
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { input, format, output } => ingest(&input, format, &output),
        Command::Train {
            data,
            config,
            seed,
            out,
            epochs,
        } => cmd_train(&data, config.as_deref(), seed, &out, epochs),
        Command::Eval {
            data,
            checkpoint,
            split,
            out,
        } => cmd_eval(&data, &checkpoint, split.into(), out.as_deref()),
        Command::Ablate {
            data,
            config,
            seed,
            out,
            epochs,
        } => cmd_ablate(&data, config.as_deref(), seed, &out, epochs),
        Command::VisualizeAttention {
            data,
            checkpoint,
            sample,
            out,
            stream,
        } => cmd_visualize(&data, &checkpoint, sample, &out, stream),
    }
}

fn ntu_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).map_err(|e| input(path.display(), e))?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| input(path.display(), e))?.path();
        if p.extension().is_some_and(|x| x == "skeleton") {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no .skeleton files found", path.display())));
    }
    Ok(files)
}

/// One sample per file; the action code in the file name is the label.
pub fn ingest_ntu(path: &Path) -> Result<Dataset, CliError> {
    let mut parsed = Vec::new();
    for file in ntu_files(path)? {
        let name = file.file_name().unwrap_or_default().to_string_lossy().to_string();
        let meta = parse_ntu_file_name(&name)
            .ok_or_else(|| CliError::Input(format!("{}: not an NTU file name (SsssCcccPpppRrrrAaaa)", file.display())))?;
        let mut seq = parse_ntu_skeleton(&read_text(&file)?).map_err(|e| input(file.display(), e))?;
        seq.subject_id = meta.performer;
        seq.view_id = meta.camera;
        seq.source = name;
        parsed.push((meta.action, seq));
    }
    let mut actions: Vec<u32> = parsed.iter().map(|(a, _)| *a).collect();
    actions.sort_unstable();
    actions.dedup();
    let samples = parsed
        .into_iter()
        .map(|(a, mut seq)| {
            seq.label = actions.binary_search(&a).expect("action collected above");
            seq
        })
        .collect();
    let dataset = Dataset {
        class_names: actions.iter().map(|a| format!("A{a:03}")).collect(),
        samples,
        split: Some(Split {
            protocol: Protocol::CrossSubject,
            train_ids: NTU_TRAIN_SUBJECTS.to_vec(),
        }),
    };
    dataset.validate().map_err(|e| input(path.display(), e))?;
    Ok(dataset)
}

fn sibling_manifest(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn ingest(path: &Path, format: InputFormat, output: &Path) -> Result<(), CliError> {
    let mut run = Run::new("ingest");
    run.input("input", path);
    run.config = serde_json::json!({ "format": format!("{format:?}").to_lowercase() });
    let dataset = match format {
        InputFormat::Ntu => ingest_ntu(path)?,
        InputFormat::Canonical => load_dataset(path)?,
    };
    let text = write_canonical_json(&dataset).map_err(|e| internal("serialize", e))?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    run.write(output, text.as_bytes())?;
    println!("{} samples, {} classes", dataset.samples.len(), dataset.num_classes());
    run.finish(&sibling_manifest(output))
}

fn resolve(config: Option<&Path>, epochs: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(config)?;
    if let Some(e) = epochs {
        cfg.epochs = e as usize;
    }
    Ok(cfg)
}

fn cmd_train(data: &Path, config: Option<&Path>, seed: u64, out: &Path, epochs: Option<u64>) -> Result<(), CliError> {
    let mut run = Run::new("train");
    run.input("data", data);
    if let Some(c) = config {
        run.input("config", c);
    }
    let cfg = resolve(config, epochs)?;
    run.config = serde_json::to_value(&cfg).map_err(|e| internal("config", e))?;
    run.seed = Some(seed);
    let dataset = load_dataset(data)?;
    let model = cfg.model_config(dataset.num_classes());
    let outcome = train_with_progress(&dataset, &model, &cfg.train_config(seed), |s| {
        eprintln!("epoch {:>4}  loss {:.6}  accuracy {:.4}", s.epoch, s.loss, s.accuracy);
    })?;
    create_dir(out)?;
    let ckpt = out.join("model.ckpt");
    save_checkpoint(&outcome.params, &ckpt).map_err(|e| internal(ckpt.display(), e))?;
    run.outputs.push(ckpt.display().to_string());
    run.write(&out.join("history.csv"), history_csv(&outcome.history)?.as_bytes())?;
    run.finish(&out.join("manifest.json"))
}

fn cmd_eval(data: &Path, checkpoint: &Path, split: SplitName, out: Option<&Path>) -> Result<(), CliError> {
    let mut run = Run::new("eval");
    run.input("data", data);
    run.input("checkpoint", checkpoint);
    let split_name = match split {
        SplitName::Train => "train",
        SplitName::Test => "test",
    };
    run.config = serde_json::json!({ "split": split_name });
    let dataset = load_dataset(data)?;
    let params = load_params(checkpoint)?;
    check_classes(&dataset, &params)?;
    let report = evaluate(&dataset, split, &params)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => checkpoint.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    create_dir(&dir)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| internal("report", e))? + "\n";
    run.write(&dir.join(format!("eval_{split_name}.json")), json.as_bytes())?;
    run.write(
        &dir.join(format!("confusion_{split_name}.csv")),
        confusion_csv(&report, &dataset.class_names)?.as_bytes(),
    )?;
    print!("{json}");
    run.finish(&dir.join(format!("eval_{split_name}.manifest.json")))
}

fn cmd_ablate(data: &Path, config: Option<&Path>, seed: u64, out: &Path, epochs: Option<u64>) -> Result<(), CliError> {
    let mut run = Run::new("ablate");
    run.input("data", data);
    if let Some(c) = config {
        run.input("config", c);
    }
    let cfg = resolve(config, epochs)?;
    run.config = serde_json::to_value(&cfg).map_err(|e| internal("config", e))?;
    run.seed = Some(seed);
    let dataset = load_dataset(data)?;
    let model = cfg.model_config(dataset.num_classes());
    create_dir(out)?;
    let rows = ablation_suite_with(&dataset, &model, &cfg.train_config(seed), |_, row| match &row.result {
        Ok(o) => eprintln!("{:<11} test accuracy {:.4}", row.mode.as_str(), o.report.accuracy),
        Err(e) => eprintln!("{:<11} failed: {e}", row.mode.as_str()),
    });
    let mut failed = 0;
    for row in &rows {
        match &row.result {
            Ok(o) => {
                let ckpt = out.join(format!("model_{}.ckpt", row.mode.as_str()));
                save_checkpoint(&o.params, &ckpt).map_err(|e| internal(ckpt.display(), e))?;
                run.outputs.push(ckpt.display().to_string());
                run.write(
                    &out.join(format!("history_{}.csv", row.mode.as_str())),
                    history_csv(&o.history)?.as_bytes(),
                )?;
            }
            Err(_) => failed += 1,
        }
    }
    let records: Vec<AblationRecord> = rows.iter().map(AblationRecord::from).collect();
    let table = ablation_csv(&records)?;
    run.write(&out.join("ablation.csv"), table.as_bytes())?;
    print!("{table}");
    run.finish(&out.join("manifest.json"))?;
    if failed > 0 {
        return Err(CliError::Internal(format!("{failed} of {} ablation rows failed", rows.len())));
    }
    Ok(())
}

fn cmd_visualize(data: &Path, checkpoint: &Path, index: usize, out: &Path, stream: StreamArg) -> Result<(), CliError> {
    let mut run = Run::new("visualize-attention");
    run.input("data", data);
    run.input("checkpoint", checkpoint);
    let stream_name = match stream {
        StreamArg::Position => "position",
        StreamArg::Motion => "motion",
    };
    run.config = serde_json::json!({ "sample": index, "stream": stream_name });
    let dataset = load_dataset(data)?;
    let params = load_params(checkpoint)?;
    check_classes(&dataset, &params)?;
    let seq = dataset.samples.get(index).ok_or_else(|| {
        CliError::Input(format!(
            "sample index {index} out of range for {} samples",
            dataset.samples.len()
        ))
    })?;
    let sample = FixedSample::uniform(&params.config.prepare(seq), params.config.frames).map_err(|e| input(format!("sample {index}"), e))?;
    let (position, motion) = params
        .attention(&sample)
        .map_err(|e: ModelError| internal("forward pass", e))?;
    let att = match stream {
        StreamArg::Position => position,
        StreamArg::Motion => motion,
    };
    let (frames, joints) = (att.t_att.len(), att.s_att.len());
    create_dir(out)?;
    run.write(&out.join("attention.csv"), attention_csv(&att)?.as_bytes())?;
    run.write(
        &out.join("attention.svg"),
        heatmap_svg(att.map.data(), frames, joints)?.as_bytes(),
    )?;
    run.write(&out.join("joint_weights.json"), joint_weights_json(att.s_att.data())?.as_bytes())?;
    run.finish(&out.join("manifest.json"))
}

