//! Gesture classification with a stacked LSTM.
//!
//! A gesture is a 30-frame window of the nine upper-body landmarks in the
//! head-centred frame (27 features per frame). [`LstmModel`] runs the window
//! through stacked LSTM layers, maps the final hidden state to five logits and
//! applies softmax. Gradients come from backpropagation through time; training
//! uses minibatch Adam or plain gradient descent.

mod model;
mod train;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{LstmModel, MODEL_FORMAT_VERSION};
pub use train::{
    batch_gradients, batch_gradients_with, confusion_matrix, evaluate, recall, split_stratified, train, train_with,
    EpochStats, Optimizer, OptimizerState, TrainConfig, TrainOutcome,
};

use crate::emotion::Emotion;
use crate::pose::{to_head_frame, LandmarkFrame, LandmarkName};

/// Frames per gesture window.
pub const SEQUENCE_LEN: usize = 30;
/// Features per frame: nine landmarks × xyz.
pub const FEATURES: usize = LandmarkName::COUNT * 3;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("expected {expected} frames, got {got}")]
    FrameCount { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset needs at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("sample {0} has no label")]
    Unlabelled(usize),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A 30 × 27 feature window, stored row-major (one row per frame).
#[derive(Clone, Debug, PartialEq)]
pub struct GestureSequence {
    pub features: Vec<f64>,
    pub label: Option<Emotion>,
}

impl GestureSequence {
    pub fn new(features: Vec<f64>, label: Option<Emotion>) -> Result<Self, LstmError> {
        if features.len() != SEQUENCE_LEN * FEATURES {
            return Err(LstmError::Shape(format!(
                "expected {} values, got {}",
                SEQUENCE_LEN * FEATURES,
                features.len()
            )));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(LstmError::Shape("non-finite feature".into()));
        }
        Ok(Self { features, label })
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(FEATURES)
    }
}

/// Head-relative coordinates of 30 frames, landmarks in canonical order.
pub fn featurize(frames: &[LandmarkFrame]) -> Result<GestureSequence, LstmError> {
    if frames.len() != SEQUENCE_LEN {
        return Err(LstmError::FrameCount {
            expected: SEQUENCE_LEN,
            got: frames.len(),
        });
    }
    let mut features = Vec::with_capacity(SEQUENCE_LEN * FEATURES);
    for f in frames {
        for p in to_head_frame(f) {
            features.extend_from_slice(p.as_slice());
        }
    }
    GestureSequence::new(features, None)
}

/// Arg-max class and its probability; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> (usize, f64) {
    probs.iter().copied().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, p)| if p > best.1 { (i, p) } else { best },
    )
}

/// Most likely emotion for `seq` and its probability.
pub fn classify(model: &LstmModel, seq: &GestureSequence) -> Result<(Emotion, f64), LstmError> {
    let probs = model.forward(seq)?;
    let (i, p) = argmax(&probs);
    let emotion =
        Emotion::from_index(i).ok_or_else(|| LstmError::Shape(format!("class index {i} has no emotion label")))?;
    Ok((emotion, p))
}

/// Classifies every `stride`-th 30-frame window; each result is stamped with
/// the time of the window's last frame.
pub fn classify_stream(
    model: &LstmModel,
    frames: &[LandmarkFrame],
    stride: usize,
) -> Result<Vec<(f64, Emotion, f64)>, LstmError> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start + SEQUENCE_LEN <= frames.len() {
        let window = &frames[start..start + SEQUENCE_LEN];
        let (e, p) = classify(model, &featurize(window)?)?;
        out.push((window[SEQUENCE_LEN - 1].t, e, p));
        start += stride;
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    label: Emotion,
    frames: Vec<Vec<f64>>,
}

pub fn write_dataset(path: impl AsRef<Path>, data: &[GestureSequence]) -> Result<(), LstmError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, seq) in data.iter().enumerate() {
        let rec = DatasetRecord {
            label: seq.label.ok_or(LstmError::Unlabelled(i))?,
            frames: seq.rows().map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| LstmError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<GestureSequence>, LstmError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| LstmError::Parse { line: i + 1, message };
        let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        if rec.frames.len() != SEQUENCE_LEN || rec.frames.iter().any(|r| r.len() != FEATURES) {
            return Err(parse(format!("expected {SEQUENCE_LEN} frames of {FEATURES} values")));
        }
        let seq = GestureSequence::new(rec.frames.concat(), Some(rec.label)).map_err(|e| parse(e.to_string()))?;
        out.push(seq);
    }
    Ok(out)
}
