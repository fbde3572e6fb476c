//! Adam training loop with early stopping and best-weight restoration,
//! plus test-set evaluation.

pub mod adam;
pub mod compare;
pub mod metrics;

pub use adam::{adam_step, AdamState};
pub use metrics::{MetricsError, MetricsReport};

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::Feature;
use crate::nn::{BiLstmModel, Loss, NnError, Regularization};
use crate::preprocess::NormalizationStats;
use crate::windowing::SampleWindow;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
    #[error("parameter update produced a non-finite value")]
    NonFiniteUpdate,
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("window shape mismatch: {0}")]
    WindowShape(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub l1: f64,
    pub l2: f64,
    pub loss: Loss,
    pub seed: u64,
    /// Optional seeded shuffle of window order within each epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 100,
            patience: 10,
            batch_size: 64,
            l1: 1e-5,
            l2: 1e-5,
            loss: Loss::Mae,
            seed: 0,
            shuffle: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0 {
            return Err(TrainError::WindowShape("learning_rate must be > 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::WindowShape("epochs and batch_size must be >= 1".into()));
        }
        if self.patience > self.epochs {
            return Err(TrainError::WindowShape("patience must not exceed epochs".into()));
        }
        Ok(())
    }

    pub fn regularization(&self) -> Regularization {
        Regularization {
            l1: self.l1,
            l2: self.l2,
        }
    }
}

/// Per-epoch losses and the early-stopping bookkeeping. Losses are data
/// losses (no penalty term); epochs are 1-based.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl TrainHistory {
    /// Renders the `epoch,train_loss,val_loss` CSV log.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (i, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            out.push_str(&format!("{},{t},{v}\n", i + 1));
        }
        out
    }
}

/// Minimal decrease of the validation loss that counts as an improvement.
pub const IMPROVEMENT_EPS: f64 = 1e-7;

/// Packs windows into (time, batch, feature) tensors.
fn windows_to_arrays(windows: &[&SampleWindow]) -> Result<(Array3<f64>, Array3<f64>), TrainError> {
    let first = windows.first().ok_or(TrainError::EmptySplit("batch"))?;
    let (t_len, n_feat) = first.inputs.dim();
    let (l_len, n_tgt) = first.labels.dim();
    let batch = windows.len();
    let mut inputs = Array3::zeros((t_len, batch, n_feat));
    let mut labels = Array3::zeros((l_len, batch, n_tgt));
    for (b, w) in windows.iter().enumerate() {
        if w.inputs.dim() != (t_len, n_feat) || w.labels.dim() != (l_len, n_tgt) {
            return Err(TrainError::WindowShape(format!(
                "window {b} has inputs {:?} labels {:?}, expected {:?}/{:?}",
                w.inputs.dim(),
                w.labels.dim(),
                (t_len, n_feat),
                (l_len, n_tgt)
            )));
        }
        for t in 0..t_len {
            for f in 0..n_feat {
                inputs[[t, b, f]] = w.inputs[[t, f]];
            }
        }
        for t in 0..l_len {
            for k in 0..n_tgt {
                labels[[t, b, k]] = w.labels[[t, k]];
            }
        }
    }
    Ok((inputs, labels))
}

fn batch_tensors(
    windows: &[SampleWindow],
    order: &[usize],
    batch_size: usize,
) -> Result<Vec<(Array3<f64>, Array3<f64>)>, TrainError> {
    order
        .chunks(batch_size)
        .map(|idx| {
            let refs: Vec<&SampleWindow> = idx.iter().map(|&i| &windows[i]).collect();
            windows_to_arrays(&refs)
        })
        .collect()
}

/// Mean data loss over a list of prepared batches, weighted by element count.
fn dataset_loss(
    model: &BiLstmModel,
    batches: &[(Array3<f64>, Array3<f64>)],
    loss: Loss,
) -> Result<f64, TrainError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, y) in batches {
        let n = y.len();
        sum += model.batch_loss(x, y, loss)? * n as f64;
        count += n;
    }
    Ok(sum / count as f64)
}

/// Trains in place. Stops at the epoch cap or when the validation loss
/// fails to improve by more than [`IMPROVEMENT_EPS`] for `patience`
/// consecutive epochs; the weights of the best epoch are restored.
pub fn train(
    model: &mut BiLstmModel,
    train_windows: &[SampleWindow],
    val_windows: &[SampleWindow],
    cfg: &TrainConfig,
) -> Result<TrainHistory, TrainError> {
    train_with_progress(model, train_windows, val_windows, cfg, |_, _, _| {})
}

/// [`train`] with a per-epoch callback `(epoch, train_loss, val_loss)`.
pub fn train_with_progress(
    model: &mut BiLstmModel,
    train_windows: &[SampleWindow],
    val_windows: &[SampleWindow],
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64, f64),
) -> Result<TrainHistory, TrainError> {
    cfg.validate()?;
    if train_windows.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val_windows.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let reg = cfg.regularization();
    let base_order: Vec<usize> = (0..train_windows.len()).collect();
    let mut train_batches = batch_tensors(train_windows, &base_order, cfg.batch_size)?;
    let val_order: Vec<usize> = (0..val_windows.len()).collect();
    let val_batches = batch_tensors(val_windows, &val_order, cfg.batch_size)?;

    let mut flat = model.params.flatten();
    let mut state = AdamState::new(flat.len());
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
    };
    let mut best_val = f64::INFINITY;
    let mut best_params = model.params.clone();
    let mut since_best = 0usize;

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            let mut order = base_order.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
            order.shuffle(&mut rng);
            train_batches = batch_tensors(train_windows, &order, cfg.batch_size)?;
        }

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for (x, y) in &train_batches {
            let penalty = {
                let mut p = 0.0;
                model.params.for_each_value(|v| p += reg.l1 * v.abs() + reg.l2 * v * v);
                p
            };
            let (objective, grads) = match model.gradients(x, y, cfg.loss, reg) {
                Ok(v) => v,
                Err(NnError::NonFiniteGradient) => return Err(TrainError::Divergence { epoch }),
                Err(e) => return Err(e.into()),
            };
            let n = y.len();
            loss_sum += (objective - penalty) * n as f64;
            loss_count += n;
            let gflat = grads.flatten();
            adam_step(&mut flat, &gflat, &mut state, cfg.learning_rate)?;
            model.params.assign_flat(&flat);
        }
        let train_loss = loss_sum / loss_count as f64;
        if !train_loss.is_finite() {
            return Err(TrainError::Divergence { epoch });
        }
        let val_loss = dataset_loss(model, &val_batches, cfg.loss)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Divergence { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;
        progress(epoch, train_loss, val_loss);

        if val_loss < best_val - IMPROVEMENT_EPS {
            best_val = val_loss;
            history.best_epoch = epoch;
            best_params = model.params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    model.params = best_params;
    Ok(history)
}

/// Evaluates on the test windows.
///
/// MAE/MSE/R²/SMAPE are computed on the normalized scale over every
/// flattened (step, target) pair. MSLE is computed on the denormalized
/// physical scale over the non-negative targets only (temperature and the
/// wind components are excluded); values at or below −1 are rejected.
pub fn evaluate(
    model: &BiLstmModel,
    test_windows: &[SampleWindow],
    stats: &NormalizationStats,
) -> Result<MetricsReport, TrainError> {
    if test_windows.is_empty() {
        return Err(TrainError::EmptyTestSet);
    }
    let order: Vec<usize> = (0..test_windows.len()).collect();
    let batches = batch_tensors(test_windows, &order, 64)?;

    let n_targets = model.topology.target_count();
    let mut y_flat: Vec<f64> = Vec::new();
    let mut p_flat: Vec<f64> = Vec::new();
    // per-target streams for the physical-scale MSLE
    let mut y_by_target: Vec<Vec<f64>> = vec![Vec::new(); n_targets];
    let mut p_by_target: Vec<Vec<f64>> = vec![Vec::new(); n_targets];

    for (x, labels) in &batches {
        let preds = model.forward_batch(x)?;
        if preds.dim() != labels.dim() {
            return Err(TrainError::WindowShape(format!(
                "labels {:?} vs predictions {:?}",
                labels.dim(),
                preds.dim()
            )));
        }
        for ((idx, y), p) in labels.indexed_iter().zip(preds.iter()) {
            let k = idx.2;
            y_flat.push(*y);
            p_flat.push(*p);
            y_by_target[k].push(*y);
            p_by_target[k].push(*p);
        }
    }

    let mut msle_y: Vec<f64> = Vec::new();
    let mut msle_p: Vec<f64> = Vec::new();
    for (k, name) in model.topology.target_names.iter().enumerate() {
        let eligible = Feature::from_name(name).map_or(false, Feature::non_negative);
        if !eligible {
            continue;
        }
        let Some(j) = stats.index_of(name) else {
            continue;
        };
        for (y, p) in y_by_target[k].iter().zip(&p_by_target[k]) {
            msle_y.push(y * stats.std[j] + stats.mean[j]);
            msle_p.push(p * stats.std[j] + stats.mean[j]);
        }
    }
    let msle = if msle_y.is_empty() {
        None
    } else {
        Some(metrics::msle(&msle_y, &msle_p)?)
    };

    Ok(MetricsReport {
        mae: metrics::mae(&y_flat, &p_flat)?,
        mse: metrics::mse(&y_flat, &p_flat)?,
        msle,
        r2: metrics::r2(&y_flat, &p_flat)?,
        smape: metrics::smape(&y_flat, &p_flat)?,
    })
}
