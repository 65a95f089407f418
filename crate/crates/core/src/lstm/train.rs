use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::LstmModel;
use super::{argmax, GestureSequence, LstmError};
use crate::exec::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_split: f64,
    pub hidden_sizes: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            validation_split: 0.2,
            hidden_sizes: vec![64, 32],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let err = |m: String| Err(LstmError::Config(m));
        if self.epochs < 1 {
            return err("epochs must be >= 1".into());
        }
        if self.batch_size < 1 {
            return err("batch_size must be >= 1".into());
        }
        if !(self.validation_split > 0.0 && self.validation_split < 1.0) {
            return err(format!(
                "validation_split must be in (0, 1), got {}",
                self.validation_split
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return err(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return err("invalid adaptive-moment hyperparameters".into());
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return err("hidden_sizes must be non-empty and positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: LstmModel,
    pub history: Vec<EpochStats>,
    /// Dataset indices held out for validation; never used for updates.
    pub validation: Vec<usize>,
}

fn label_of(data: &[GestureSequence], i: usize) -> Result<usize, LstmError> {
    data[i].label.map(|e| e.index()).ok_or(LstmError::Unlabelled(i))
}

/// Mean cross-entropy and its gradient over `batch`.
pub fn batch_gradients(model: &LstmModel, batch: &[GestureSequence]) -> Result<(f64, Vec<f64>), LstmError> {
    let idx: Vec<usize> = (0..batch.len()).collect();
    batch_gradients_with(model, batch, &idx, Execution::default())
}

/// Mean cross-entropy and gradient over `data[indices]`. Per-sample gradients
/// may be computed in parallel; they are always summed in `indices` order.
pub fn batch_gradients_with(
    model: &LstmModel,
    data: &[GestureSequence],
    indices: &[usize],
    exec: Execution,
) -> Result<(f64, Vec<f64>), LstmError> {
    if indices.is_empty() {
        return Err(LstmError::EmptyDataset);
    }
    let per_sample = exec.map(indices.len(), |k| {
        let i = indices[k];
        let label = label_of(data, i)?;
        let mut g = vec![0.0; model.num_params()];
        let loss = model.accumulate_gradient(&data[i].features, label, &mut g)?;
        Ok::<_, LstmError>((loss, g))
    });
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.num_params()];
    for r in per_sample {
        let (l, g) = r?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let n = indices.len() as f64;
    for g in &mut grad {
        *g /= n;
    }
    Ok((loss / n, grad))
}

/// Mean loss and accuracy over `data[indices]`; `(NaN, NaN)` when empty.
pub fn evaluate(
    model: &LstmModel,
    data: &[GestureSequence],
    indices: &[usize],
    exec: Execution,
) -> Result<(f64, f64), LstmError> {
    if indices.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let results = exec.map(indices.len(), |k| {
        let i = indices[k];
        let label = label_of(data, i)?;
        let p = model.forward(&data[i])?;
        Ok::<_, LstmError>((-p[label].ln(), argmax(&p).0 == label))
    });
    let mut loss = 0.0;
    let mut correct = 0usize;
    for r in results {
        let (l, ok) = r?;
        loss += l;
        correct += ok as usize;
    }
    let n = indices.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// `counts[true][predicted]` over `data[indices]`, sized by the model's class count.
pub fn confusion_matrix(
    model: &LstmModel,
    data: &[GestureSequence],
    indices: &[usize],
    exec: Execution,
) -> Result<Vec<Vec<usize>>, LstmError> {
    let c = model.num_classes();
    let preds = exec.map(indices.len(), |k| {
        let i = indices[k];
        Ok::<_, LstmError>((label_of(data, i)?, argmax(&model.forward(&data[i])?).0))
    });
    let mut counts = vec![vec![0usize; c]; c];
    for r in preds {
        let (truth, pred) = r?;
        if truth >= c {
            return Err(LstmError::Shape(format!("label {truth} exceeds model classes")));
        }
        counts[truth][pred] += 1;
    }
    Ok(counts)
}

/// Recall per class from a confusion matrix; `None` for classes with no samples.
pub fn recall(confusion: &[Vec<usize>]) -> Vec<Option<f64>> {
    confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: usize = row.iter().sum();
            (n > 0).then(|| row[i] as f64 / n as f64)
        })
        .collect()
}

/// Per-class shuffled split; `round(fraction * n_class)` samples of each class
/// go to the held-out side. Returns `(train, held_out)`, both sorted.
pub fn split_stratified(
    data: &[GestureSequence],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), LstmError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..data.len() {
        let c = label_of(data, i)?;
        if classes.len() <= c {
            classes.resize(c + 1, Vec::new());
        }
        classes[c].push(i);
    }
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for mut members in classes {
        members.shuffle(&mut rng);
        let k = (fraction * members.len() as f64).round() as usize;
        held.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    Ok((train, held))
}

/// First/second moment state for the parameter update.
pub struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam => {
                self.t += 1;
                let c1 = 1.0 - cfg.beta1.powi(self.t);
                let c2 = 1.0 - cfg.beta2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
                }
            }
        }
    }
}

/// Minibatch training; deterministic for a given `cfg.seed` in either execution mode.
pub fn train(model: LstmModel, data: &[GestureSequence], cfg: &TrainConfig) -> Result<TrainOutcome, LstmError> {
    train_with(model, data, cfg, Execution::default())
}

pub fn train_with(
    mut model: LstmModel,
    data: &[GestureSequence],
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome, LstmError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(LstmError::EmptyDataset);
    }
    let labels = (0..data.len())
        .map(|i| label_of(data, i))
        .collect::<Result<BTreeSet<_>, _>>()?;
    if labels.len() < 2 {
        return Err(LstmError::TooFewClasses(labels.len()));
    }
    if let Some(&max) = labels.iter().next_back() {
        if max >= model.num_classes() {
            return Err(LstmError::Shape(format!("label {max} exceeds model classes")));
        }
    }
    if !data[0].features.len().is_multiple_of(model.input_size()) {
        return Err(LstmError::Shape("feature width does not match model input".into()));
    }

    let (mut train_idx, val_idx) = split_stratified(data, cfg.validation_split, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut opt = OptimizerState::new(model.num_params());
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(cfg.batch_size) {
            let (_, grad) = batch_gradients_with(&model, data, batch, exec)?;
            opt.apply(model.params_mut(), &grad, cfg);
        }
        if !model.params().iter().all(|p| p.is_finite()) {
            return Err(LstmError::Config(format!("training diverged in epoch {epoch}")));
        }
        let (train_loss, train_acc) = evaluate(&model, data, &train_idx, exec)?;
        let (val_loss, val_acc) = evaluate(&model, data, &val_idx, exec)?;
        log::debug!(
            "epoch {epoch}: loss {train_loss:.4} acc {train_acc:.3} val_loss {val_loss:.4} val_acc {val_acc:.3}"
        );
        history.push(EpochStats {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
    }
    Ok(TrainOutcome {
        model,
        history,
        validation: val_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotion::Emotion;
    use crate::lstm::FEATURES;
    use crate::synthetic::generate_synthetic_dataset;

    #[test]
    fn duplicated_sample_gives_same_gradient() {
        let data = generate_synthetic_dataset(1, 0.01, 5);
        let m = LstmModel::new(FEATURES, &[6, 4], 5, 1);
        let (l1, g1) = batch_gradients_with(&m, &data, &[2], Execution::Sequential).unwrap();
        let (l2, g2) = batch_gradients_with(&m, &data, &[2, 2], Execution::Parallel).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let data = generate_synthetic_dataset(1, 0.01, 5);
        let m = LstmModel::new(FEATURES, &[4], 5, 1);
        let (_, g) = batch_gradients(&m, &data).unwrap();
        for optimizer in [Optimizer::Adam, Optimizer::Sgd] {
            let cfg = TrainConfig {
                learning_rate: 0.0,
                optimizer,
                ..TrainConfig::default()
            };
            let mut p = m.params().to_vec();
            OptimizerState::new(p.len()).apply(&mut p, &g, &cfg);
            assert_eq!(p, m.params());
        }
    }

    #[test]
    fn rejects_degenerate_datasets() {
        let m = LstmModel::new(FEATURES, &[4], 5, 1);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(train(m.clone(), &[], &cfg), Err(LstmError::EmptyDataset)));
        let one_class: Vec<_> = generate_synthetic_dataset(3, 0.01, 1)
            .into_iter()
            .filter(|s| s.label == Some(Emotion::Sad))
            .collect();
        assert!(matches!(
            train(m.clone(), &one_class, &cfg),
            Err(LstmError::TooFewClasses(1))
        ));
        let bad = TrainConfig {
            validation_split: 1.0,
            ..cfg
        };
        assert!(matches!(
            train(m, &generate_synthetic_dataset(2, 0.01, 1), &bad),
            Err(LstmError::Config(_))
        ));
    }

    #[test]
    fn stratified_split_sizes() {
        let data = generate_synthetic_dataset(10, 0.01, 1);
        let (tr, va) = split_stratified(&data, 0.2, 3).unwrap();
        assert_eq!(tr.len(), 40);
        assert_eq!(va.len(), 10);
        for e in Emotion::ALL {
            assert_eq!(va.iter().filter(|&&i| data[i].label == Some(e)).count(), 2);
        }
        assert!(tr.iter().all(|i| !va.contains(i)));
    }

    #[test]
    fn short_run_reduces_loss_and_is_reproducible() {
        let data = generate_synthetic_dataset(8, 0.01, 2);
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 8,
            learning_rate: 2e-3,
            hidden_sizes: vec![12],
            seed: 4,
            ..TrainConfig::default()
        };
        let a = train(LstmModel::new(FEATURES, &cfg.hidden_sizes, 5, 4), &data, &cfg).unwrap();
        let b = train_with(
            LstmModel::new(FEATURES, &cfg.hidden_sizes, 5, 4),
            &data,
            &cfg,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 15);
        let losses: Vec<f64> = a.history.iter().map(|s| s.train_loss).collect();
        assert!(losses[14] < losses[0], "{losses:?}");
    }

    #[test]
    fn confusion_and_recall() {
        let data = generate_synthetic_dataset(2, 0.01, 6);
        let m = LstmModel::zeros(FEATURES, &[3], 5);
        let all: Vec<usize> = (0..data.len()).collect();
        let c = confusion_matrix(&m, &data, &all, Execution::Sequential).unwrap();
        // a zero model predicts class 0 for everything
        assert!(c.iter().all(|row| row[0] == 2 && row.iter().sum::<usize>() == 2));
        let r = recall(&c);
        assert_eq!(r[0], Some(1.0));
        assert!(r[1..].iter().all(|&x| x == Some(0.0)));
        assert_eq!(recall(&[vec![0, 0], vec![1, 1]])[0], None);
    }
}
