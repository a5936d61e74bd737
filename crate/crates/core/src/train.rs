//! Training loop, evaluation, stratified cross-validation and the ablation harness.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::metrics::{Metrics, MetricsSummary};
use crate::model::{
    loss_and_grads, loss_value, predict_input, InputNorm, ModelConfig, ModelParams, SubjectInput,
    Variant,
};
use crate::optim::{Adam, AdamConfig};
use crate::sync::ObservationSequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lr_decay_per_epoch: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of the training subjects held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            lr_decay_per_epoch: 0.96,
            epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config(
                "train.learning_rate",
                "must be a finite non-negative number",
            ));
        }
        if !(self.lr_decay_per_epoch > 0.0 && self.lr_decay_per_epoch <= 1.0) {
            return Err(Error::config(
                "train.lr_decay_per_epoch",
                "must lie in (0, 1]",
            ));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(Error::config(
                "train.validation_fraction",
                "must lie in [0, 0.5)",
            ));
        }
        if self.patience == 0 {
            return Err(Error::config("train.patience", "must be positive"));
        }
        Ok(())
    }
}

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_VALIDATION: u64 = 3;
const STREAM_FOLDS: u64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (`None` when no epoch ran).
    pub best_epoch: Option<usize>,
}

fn class_counts(dataset: &[ObservationSequence]) -> (usize, usize) {
    let pos = dataset.iter().filter(|s| s.label).count();
    (pos, dataset.len() - pos)
}

/// Splits indices into (train, validation), stratified by label.
fn validation_split(
    dataset: &[ObservationSequence],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset[i].label == class)
            .collect();
        idx.shuffle(&mut rng);
        let n_val = (fraction * idx.len() as f64).round() as usize;
        let n_val = n_val.min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn mean_loss(params: &ModelParams, inputs: &[SubjectInput]) -> Result<f64> {
    let mut total = 0.0;
    for s in inputs {
        total += loss_value(params, s)?;
    }
    Ok(total / inputs.len() as f64)
}

/// Trains one model with per-subject Adam updates.
pub fn train(
    dataset: &[ObservationSequence],
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    model.validate()?;
    let (pos, neg) = class_counts(dataset);
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput(format!(
            "training needs both classes, got {pos} positive and {neg} negative subjects"
        )));
    }
    let (train_idx, val_idx) = if config.validation_fraction > 0.0 {
        validation_split(
            dataset,
            config.validation_fraction,
            derive_seed(config.seed, STREAM_VALIDATION),
        )
    } else {
        ((0..dataset.len()).collect(), Vec::new())
    };
    let train_set: Vec<ObservationSequence> =
        train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let norm = InputNorm::fit(&train_set);
    let inputs = train_set
        .iter()
        .map(|s| SubjectInput::new(s, &norm))
        .collect::<Result<Vec<_>>>()?;
    let val_inputs = val_idx
        .iter()
        .map(|&i| SubjectInput::new(&dataset[i], &norm))
        .collect::<Result<Vec<_>>>()?;

    let mut params = ModelParams::init(model, norm, derive_seed(config.seed, STREAM_INIT))?;
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        },
        params.tensors(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_SHUFFLE));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, grads) = loss_and_grads(&params, &inputs[i])?;
            adam.step(params.tensors_mut(), &grads)?;
            total += loss;
        }
        let train_loss = total / inputs.len() as f64;
        let validation_loss = if val_inputs.is_empty() {
            None
        } else {
            Some(mean_loss(&params, &val_inputs)?)
        };
        debug!(
            "epoch {epoch}: lr {:.5} train {train_loss:.4} val {validation_loss:?}",
            adam.lr()
        );
        history.push(EpochRecord {
            epoch,
            learning_rate: adam.lr(),
            train_loss,
            validation_loss,
        });
        adam.set_lr(adam.lr() * config.lr_decay_per_epoch);

        if let Some(v) = validation_loss {
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                best = Some((v, epoch, params.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    info!("early stop after epoch {epoch}");
                    break;
                }
            }
        }
    }

    let best_epoch = match best {
        Some((_, epoch, kept)) => {
            params = kept;
            Some(epoch)
        }
        None => history.last().map(|r| r.epoch),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}

/// Scores and metrics of one evaluation pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

pub fn evaluate(params: &ModelParams, dataset: &[ObservationSequence]) -> Result<Evaluation> {
    let (pos, neg) = class_counts(dataset);
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("evaluation needs both classes".into()));
    }
    let mut scores = Vec::with_capacity(dataset.len());
    for s in dataset {
        scores.push(predict_input(params, &SubjectInput::new(s, params.norm())?)?.prob);
    }
    let labels: Vec<bool> = dataset.iter().map(|s| s.label).collect();
    Ok(Evaluation {
        metrics: Metrics::compute(&scores, &labels)?,
        scores,
        labels,
    })
}

/// Seeded stratified assignment of subjects to `k` disjoint test folds.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config("cv.folds", "needs at least 2 folds"));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.len() < k || neg.len() < k {
        return Err(Error::InvalidInput(format!(
            "cannot stratify {} positive and {} negative subjects into {k} folds",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for mut class in [pos, neg] {
        class.shuffle(&mut rng);
        for i in class {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_subjects: Vec<String>,
    pub metrics: Metrics,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub final_train_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub summary: MetricsSummary,
}

/// Trains on `k - 1` folds and evaluates on the held-out fold, for every fold.
pub fn cross_validate(
    dataset: &[ObservationSequence],
    k: usize,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<CvReport> {
    let labels: Vec<bool> = dataset.iter().map(|s| s.label).collect();
    let folds = stratified_folds(&labels, k, derive_seed(config.seed, STREAM_FOLDS))?;
    let mut results = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let mut in_test = vec![false; dataset.len()];
        for &i in test_idx {
            in_test[i] = true;
        }
        let train_set: Vec<ObservationSequence> = (0..dataset.len())
            .filter(|&i| !in_test[i])
            .map(|i| dataset[i].clone())
            .collect();
        let test_set: Vec<ObservationSequence> =
            test_idx.iter().map(|&i| dataset[i].clone()).collect();
        let fold_cfg = TrainConfig {
            seed: derive_seed(config.seed, 100 + f as u64),
            ..config.clone()
        };
        let outcome = train(&train_set, model, &fold_cfg)?;
        let eval = evaluate(&outcome.params, &test_set)?;
        info!(
            "fold {f}: auc {:.3} aupr {:.3} f1 {:.3} ({} epochs)",
            eval.metrics.auc,
            eval.metrics.aupr,
            eval.metrics.f1,
            outcome.history.len()
        );
        results.push(FoldResult {
            fold: f,
            test_subjects: test_set.iter().map(|s| s.unified_id.to_string()).collect(),
            metrics: eval.metrics,
            epochs_run: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            final_train_loss: outcome.history.last().map(|r| r.train_loss),
        });
    }
    let summary =
        MetricsSummary::from_folds(&results.iter().map(|r| r.metrics).collect::<Vec<_>>())?;
    Ok(CvReport {
        folds: results,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub report: CvReport,
}

/// Cross-validates each variant with the same folds and per-fold seeds.
pub fn run_ablation(
    dataset: &[ObservationSequence],
    variants: &[Variant],
    k: usize,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    if variants.is_empty() {
        return Err(Error::InvalidInput(
            "ablation needs at least one variant".into(),
        ));
    }
    variants
        .iter()
        .map(|&variant| {
            info!("ablation variant {variant}");
            let cfg = model.clone().with_variant(variant);
            Ok(AblationRow {
                variant,
                report: cross_validate(dataset, k, &cfg, config)?,
            })
        })
        .collect()
}
