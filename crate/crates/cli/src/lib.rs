//! Batch front end for the swarm avatar pipeline.
//!
//! Every command reads an optional scenario JSON, applies flag overrides,
//! validates all inputs, and only then creates a timestamped run directory
//! holding its outputs and the resolved configuration.

pub mod config;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use swarm_avatar::assignment::{greedy_assign, optimal_assign, Assignment};
use swarm_avatar::lstm::{
    classify_stream, confusion_matrix, evaluate, read_dataset, recall, train_with, write_dataset, LstmModel, FEATURES,
};
use swarm_avatar::pose::{load_landmark_stream, load_landmark_stream_lenient, LandmarkFrame};
use swarm_avatar::sim::{grid_start, run_scenario_with};
use swarm_avatar::synthetic::{generate_stream, generate_synthetic_dataset};
use swarm_avatar::{Emotion, Execution, Vec3};

use config::{require_file, ScenarioConfig};

/// Default root for run directories.
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug)]
pub enum ErrorKind {
    /// Bad flags or configuration: exit code 1.
    Config,
    /// Failure while validating data or running: exit code 2.
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Runtime,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 1,
            ErrorKind::Runtime => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn rt(e: impl fmt::Display) -> CliError {
    CliError::runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "swarm-avatar",
    version,
    about = "Drive a drone swarm formation from body landmarks"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root directory for run outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fly the swarm along a recorded landmark stream.
    Replay {
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Gesture model used to color the swarm.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Match drones to targets and print the result as JSON.
    Assign {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        drones: PathBuf,
        /// Also run the exhaustive search and report the cost ratio.
        #[arg(long)]
        optimal: bool,
    },
    /// Train a gesture model.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Label every window of a landmark stream.
    Classify {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        stream: Option<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Write a synthetic gesture dataset.
    GenData {
        #[arg(long)]
        n_per_class: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        /// Comma-separated emotions to also write as a continuous landmark stream.
        #[arg(long, value_delimiter = ',')]
        stream_labels: Option<Vec<String>>,
    },
}

/// What a successful command produced.
#[derive(Debug)]
pub enum Outcome {
    RunDir(PathBuf),
    Printed,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let mut cfg = match &cli.common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if cli.common.seed.is_some() {
        cfg.seed = cli.common.seed;
    }
    if let Some(out) = &cli.common.out {
        cfg.output_dir = Some(out.clone());
    }
    let exec = if cli.common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };

    match cli.command {
        Command::Replay {
            stream,
            model,
            duration,
        } => {
            override_path(&mut cfg.stream, stream);
            override_path(&mut cfg.model, model);
            if let Some(d) = duration {
                cfg.sim.max_duration = d;
            }
            replay(cfg, exec)
        }
        Command::Assign {
            targets,
            drones,
            optimal,
        } => assign(&targets, &drones, optimal),
        Command::Train { dataset, epochs } => {
            override_path(&mut cfg.dataset, dataset);
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            train(cfg, exec)
        }
        Command::Classify { model, stream, stride } => {
            override_path(&mut cfg.model, model);
            override_path(&mut cfg.stream, stream);
            if let Some(s) = stride {
                cfg.classify.stride = s;
            }
            classify(cfg, exec)
        }
        Command::GenData {
            n_per_class,
            noise,
            stream_labels,
        } => {
            if let Some(n) = n_per_class {
                cfg.gen_data.n_per_class = n;
            }
            if let Some(x) = noise {
                cfg.gen_data.noise = x;
            }
            if let Some(l) = stream_labels {
                cfg.gen_data.stream_labels = l;
            }
            gen_data(cfg)
        }
    }
}

fn override_path(slot: &mut Option<PathBuf>, flag: Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn out_root(cfg: &ScenarioConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn load_stream(cfg: &ScenarioConfig) -> Result<Vec<LandmarkFrame>, CliError> {
    let path = require_file(&cfg.stream, "landmark stream")?;
    let frames = if cfg.lenient_stream {
        load_landmark_stream_lenient(&path)
    } else {
        load_landmark_stream(&path)
    }
    .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    if frames.is_empty() {
        return Err(CliError::runtime(format!("{}: no frames", path.display())));
    }
    Ok(frames)
}

fn load_model(path: &Path) -> Result<LstmModel, CliError> {
    let m = LstmModel::load(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    if m.input_size() != FEATURES || m.num_classes() != Emotion::COUNT {
        return Err(CliError::runtime(format!(
            "{}: model expects {} inputs and {} classes",
            path.display(),
            m.input_size(),
            m.num_classes()
        )));
    }
    Ok(m)
}

fn replay(cfg: ScenarioConfig, exec: Execution) -> Result<Outcome, CliError> {
    cfg.sim.validate().map_err(|e| CliError::config(e.to_string()))?;
    cfg.apf.validate().map_err(CliError::config)?;
    let skeleton = cfg.skeleton()?;
    skeleton.tree().map_err(|e| CliError::config(e.to_string()))?;
    let model_path = match &cfg.model {
        Some(_) => Some(require_file(&cfg.model, "model")?),
        None => None,
    };
    let seed = match cfg.initial_positions {
        Some(_) => None,
        None => Some(cfg.require_seed("a replay without initial_positions")?),
    };
    let frames = load_stream(&cfg)?;

    let initial: Vec<Vec3> = match (&cfg.initial_positions, seed) {
        (Some(p), _) => p.iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect(),
        (None, seed) => {
            let first = frames
                .iter()
                .find_map(|f| skeleton.build(f).ok())
                .ok_or_else(|| CliError::runtime("no frame in the stream yields a valid formation"))?;
            grid_start(&first, &cfg.grid, seed.expect("seed checked"))
        }
    };

    let (classes, schedule) = match &model_path {
        Some(p) => {
            let model = load_model(p)?;
            let classes = classify_stream(&model, &frames, cfg.classify.stride).map_err(rt)?;
            let t0 = frames[0].t;
            let schedule: Vec<(f64, Emotion)> = classes.iter().map(|&(t, e, _)| (t - t0, e)).collect();
            (Some(classes), schedule)
        }
        None => (None, Vec::new()),
    };

    let (log, metrics) =
        run_scenario_with(&frames, &skeleton, &cfg.sim, &cfg.apf, &initial, &schedule, exec).map_err(rt)?;

    let dir = output::create_run_dir(&out_root(&cfg), "replay")?;
    output::write_json(&dir.join("config.json"), &cfg)?;
    output::write_trajectory(&dir.join("trajectory.csv"), &log)?;
    output::write_json(&dir.join("metrics.json"), &metrics)?;
    if let Some(c) = classes {
        output::write_classifications(&dir.join("classifications.csv"), &c)?;
    }
    log::info!(
        "min distance {:.3} m, collisions {}, converged at {:?}",
        metrics.min_pairwise_distance,
        metrics.collision_count,
        metrics.time_to_converge
    );
    Ok(Outcome::RunDir(dir))
}

fn read_points(path: &Path) -> Result<Vec<Vec3>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let pts: Vec<[f64; 3]> = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: expected a list of [x, y, z]: {e}", path.display())))?;
    Ok(pts.into_iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect())
}

#[derive(Serialize)]
struct AssignReport<'a> {
    greedy: &'a Assignment,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimal: Option<&'a Assignment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_ratio: Option<f64>,
}

fn assign(targets: &Path, drones: &Path, optimal: bool) -> Result<Outcome, CliError> {
    let t = read_points(targets)?;
    let d = read_points(drones)?;
    let greedy = greedy_assign(&t, &d).map_err(rt)?;
    let best = if optimal {
        Some(optimal_assign(&t, &d).map_err(rt)?)
    } else {
        None
    };
    let cost_ratio = best.as_ref().map(|o| {
        if o.total_cost == 0.0 {
            if greedy.total_cost == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            greedy.total_cost / o.total_cost
        }
    });
    let report = AssignReport {
        greedy: &greedy,
        optimal: best.as_ref(),
        cost_ratio,
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(rt)?);
    Ok(Outcome::Printed)
}

#[derive(Serialize)]
struct Evaluation {
    validation_size: usize,
    val_loss: f64,
    val_accuracy: f64,
    recall: Vec<(Emotion, Option<f64>)>,
    /// Rows are true classes, columns predictions, both in label order.
    confusion: Vec<Vec<usize>>,
    labels: Vec<Emotion>,
}

fn train(mut cfg: ScenarioConfig, exec: Execution) -> Result<Outcome, CliError> {
    let seed = cfg.require_seed("training")?;
    cfg.train.seed = seed;
    cfg.train.validate().map_err(|e| CliError::config(e.to_string()))?;
    let data = match &cfg.dataset {
        Some(_) => {
            let p = require_file(&cfg.dataset, "dataset")?;
            read_dataset(&p).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?
        }
        None => {
            log::info!(
                "no dataset given; generating {} synthetic sequences per class",
                cfg.gen_data.n_per_class
            );
            generate_synthetic_dataset(cfg.gen_data.n_per_class, cfg.gen_data.noise, seed)
        }
    };

    let model = LstmModel::new(FEATURES, &cfg.train.hidden_sizes, Emotion::COUNT, seed);
    let outcome = train_with(model, &data, &cfg.train, exec).map_err(rt)?;
    let (val_loss, val_accuracy) = evaluate(&outcome.model, &data, &outcome.validation, exec).map_err(rt)?;
    let confusion = confusion_matrix(&outcome.model, &data, &outcome.validation, exec).map_err(rt)?;
    let eval = Evaluation {
        validation_size: outcome.validation.len(),
        val_loss,
        val_accuracy,
        recall: Emotion::ALL.iter().copied().zip(recall(&confusion)).collect(),
        confusion,
        labels: Emotion::ALL.to_vec(),
    };

    let dir = output::create_run_dir(&out_root(&cfg), "train")?;
    output::write_json(&dir.join("config.json"), &cfg)?;
    outcome.model.save(dir.join("model.json")).map_err(rt)?;
    output::write_history(&dir.join("history.csv"), &outcome.history)?;
    output::write_json(&dir.join("evaluation.json"), &eval)?;
    log::info!(
        "validation accuracy {val_accuracy:.3} on {} sequences",
        eval.validation_size
    );
    Ok(Outcome::RunDir(dir))
}

fn classify(cfg: ScenarioConfig, _exec: Execution) -> Result<Outcome, CliError> {
    if cfg.classify.stride == 0 {
        return Err(CliError::config("stride must be >= 1"));
    }
    let model_path = require_file(&cfg.model, "model")?;
    let frames = load_stream(&cfg)?;
    let model = load_model(&model_path)?;
    let rows = classify_stream(&model, &frames, cfg.classify.stride).map_err(rt)?;
    if rows.is_empty() {
        log::warn!("stream is shorter than one window; no labels produced");
    }
    let dir = output::create_run_dir(&out_root(&cfg), "classify")?;
    output::write_json(&dir.join("config.json"), &cfg)?;
    output::write_classifications(&dir.join("classifications.csv"), &rows)?;
    Ok(Outcome::RunDir(dir))
}

fn gen_data(cfg: ScenarioConfig) -> Result<Outcome, CliError> {
    let seed = cfg.require_seed("gen-data")?;
    let g = &cfg.gen_data;
    if g.n_per_class == 0 {
        return Err(CliError::config("n_per_class must be >= 1"));
    }
    if !(g.noise >= 0.0 && g.noise.is_finite()) {
        return Err(CliError::config(format!("noise must be >= 0, got {}", g.noise)));
    }
    let labels = g
        .stream_labels
        .iter()
        .map(|s| s.trim().parse::<Emotion>().map_err(|e| CliError::config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    let data = generate_synthetic_dataset(g.n_per_class, g.noise, seed);
    let dir = output::create_run_dir(&out_root(&cfg), "gen-data")?;
    output::write_json(&dir.join("config.json"), &cfg)?;
    write_dataset(dir.join("dataset.jsonl"), &data).map_err(rt)?;
    if !labels.is_empty() {
        output::write_stream(&dir.join("stream.jsonl"), &generate_stream(&labels, g.noise, seed))?;
    }
    Ok(Outcome::RunDir(dir))
}
