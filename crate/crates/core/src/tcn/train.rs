//! Minibatch SGD over windows, jointly updating encoders and temporal block.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::batchnorm::Mode;
use crate::nn::loss::{mse_grad, mse_loss};
use crate::nn::optim::{Schedule, Sgd, DEFAULT_MOMENTUM};
use crate::nn::params::Params;
use crate::tcn::net::ForceNet;
use crate::tcn::store::FrameStore;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Consecutive windows kept together in a batch so they share encoded frames.
    pub group: usize,
    pub schedule: Schedule,
    pub momentum: f64,
    pub seed: u64,
    /// Write 0 instead of elapsed seconds, so histories compare byte for byte.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 32,
            group: 1,
            schedule: Schedule::default(),
            momentum: DEFAULT_MOMENTUM,
            seed: 0,
            record_wall_time: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: ForceNet,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub last: ForceNet,
    pub history: Vec<EpochRecord>,
}

/// Frames of `indices` whose full window lies inside the sequence, ascending.
pub fn usable_centers(net: &ForceNet, indices: &[usize], len: usize) -> Vec<usize> {
    let valid = net.valid_centers(len);
    let mut out: Vec<usize> = indices.iter().copied().filter(|i| valid.contains(i)).collect();
    out.sort_unstable();
    out
}

/// Batches for one epoch. Deterministic in `(seed, epoch)`; a trailing batch of
/// one window is merged into its predecessor because batch norm needs two.
pub fn epoch_batches(centers: &[usize], batch_size: usize, group: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut sorted = centers.to_vec();
    sorted.sort_unstable();
    let mut groups: Vec<&[usize]> = sorted.chunks(group.max(1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    groups.shuffle(&mut rng);
    let order: Vec<usize> = groups.concat();
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(2)).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let tail = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(tail);
    }
    batches
}

/// Mean squared error in newtons squared over the given centers.
pub fn evaluate_mse(net: &ForceNet, store: &FrameStore, centers: &[usize]) -> Result<f64> {
    let pred = net.predict_centers(store, centers)?;
    let target: Vec<f64> = centers.iter().map(|&c| store.labels[c]).collect();
    mse_loss(&pred, &target)
}

/// Trains from `start_epoch` up to `cfg.epochs`, keeping the model with the
/// lowest validation MSE. `on_epoch` sees every history row as it is produced.
pub fn train(
    mut net: ForceNet,
    store: &FrameStore,
    train_centers: &[usize],
    val_centers: &[usize],
    cfg: &TrainConfig,
    start_epoch: usize,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if train_centers.len() < 2 {
        return Err(Error::Validation(format!(
            "training needs at least 2 windows, got {}",
            train_centers.len()
        )));
    }
    if val_centers.is_empty() {
        return Err(Error::Validation("validation split has no usable windows".into()));
    }
    if cfg.epochs <= start_epoch {
        return Err(Error::Config(format!(
            "nothing to do: {} epochs requested, {start_epoch} already done",
            cfg.epochs
        )));
    }
    let mut sgd = Sgd::new(cfg.schedule.clone(), cfg.momentum)?;
    let scale = net.target[1] * net.target[1];
    let clock = Instant::now();
    let mut best = net.clone();
    let mut best_val = evaluate_mse(&net, store, val_centers)?;
    let mut best_epoch = start_epoch;
    let mut history = Vec::with_capacity(cfg.epochs - start_epoch);
    for epoch in start_epoch..cfg.epochs {
        sgd.epoch = epoch;
        let mut sum = 0.0;
        let mut seen = 0;
        for (b, batch) in epoch_batches(train_centers, cfg.batch_size, cfg.group, cfg.seed, epoch)
            .iter()
            .enumerate()
        {
            let target: Vec<f64> = batch.iter().map(|&c| store.labels[c]).collect();
            let (pred, stats) = net.forward_recorded(store, batch, Mode::Train)?;
            let loss = mse_loss(&pred, &target)?;
            let diverged = |loss: f64| Error::Diverged { epoch, batch: b, loss };
            if !loss.is_finite() {
                return Err(diverged(loss));
            }
            let dpred: Vec<f64> = mse_grad(&pred, &target)?.into_iter().map(|g| g / scale).collect();
            let mut grad = net.zeros_like();
            net.backward(&dpred, &mut grad)?;
            sgd.step(&mut net, &grad).map_err(|_| diverged(loss))?;
            net.update_running(&stats);
            sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        let val_mse = evaluate_mse(&net, store, val_centers)?;
        if !val_mse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: usize::MAX,
                loss: val_mse,
            });
        }
        if val_mse < best_val {
            best_val = val_mse;
            best_epoch = epoch + 1;
            best = net.clone();
        }
        let record = EpochRecord {
            epoch,
            lr: sgd.lr(),
            train_mse: sum / seen as f64,
            val_mse,
            wall_seconds: if cfg.record_wall_time { clock.elapsed().as_secs_f64() } else { 0.0 },
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_val_mse: best_val,
        last: net,
        history,
    })
}
