//! Trains and scores the four model variants on one shared split.

use crate::error::Result;
use crate::eval::metrics::MetricsReport;
use crate::io::split::{split_dataset, DatasetSplit};
use crate::tcn::net::{ForceNet, NetConfig, Variant};
use crate::tcn::store::FrameStore;
use crate::tcn::train::{train, usable_centers, EpochRecord, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub net: NetConfig,
    pub train: TrainConfig,
}

/// Window centers per split, restricted to frames every variant can use.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCenters {
    pub split: DatasetSplit,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_centers(store: &FrameStore, net: &ForceNet, seed: u64) -> Result<SplitCenters> {
    let split = split_dataset(store.len(), seed)?;
    Ok(SplitCenters {
        train: usable_centers(net, &split.train, store.len()),
        val: usable_centers(net, &split.val, store.len()),
        test: usable_centers(net, &split.test, store.len()),
        split,
    })
}

#[derive(Debug, Clone)]
pub struct TrainedVariant {
    pub outcome: TrainOutcome,
    pub centers: SplitCenters,
}

/// Trains one variant. Split, initialization and batch order all follow `seed`;
/// `centers_for` picks the window size used to decide which frames are usable.
pub fn train_variant(
    store: &FrameStore,
    exp: &Experiment,
    variant: Variant,
    centers_for: &NetConfig,
    seed: u64,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainedVariant> {
    let cfg = NetConfig {
        variant,
        ..exp.net.clone()
    };
    let mut net = ForceNet::new(&cfg, seed)?;
    let reference = ForceNet::new(centers_for, seed)?;
    let centers = split_centers(store, &reference, seed)?;
    let labels: Vec<f64> = centers.train.iter().map(|&c| store.labels[c]).collect();
    net.fit_target(&labels);
    let tc = TrainConfig {
        seed,
        ..exp.train.clone()
    };
    let outcome = train(net, store, &centers.train, &centers.val, &tc, 0, on_epoch)?;
    Ok(TrainedVariant { outcome, centers })
}

/// Test-split report; percentages are relative to the dataset-wide maximum |fz|.
pub fn score(net: &ForceNet, store: &FrameStore, centers: &[usize]) -> Result<MetricsReport> {
    let pred = net.predict_centers(store, centers)?;
    let reference: Vec<f64> = centers.iter().map(|&c| store.labels[c]).collect();
    MetricsReport::compute(&pred, &reference, store.max_abs_force())
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub variant: Variant,
    pub report: MetricsReport,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    /// Frames of the shared split, identical for every variant.
    pub split: DatasetSplit,
}

/// All four variants in fixed order, evaluated on the same test windows.
pub fn run_ablation(
    store: &FrameStore,
    exp: &Experiment,
    seed: u64,
    mut on_epoch: impl FnMut(Variant, &EpochRecord),
) -> Result<Vec<AblationResult>> {
    let widest = NetConfig {
        variant: Variant::RpcTcn,
        ..exp.net.clone()
    };
    let mut out = Vec::with_capacity(4);
    for variant in Variant::ALL {
        let trained = train_variant(store, exp, variant, &widest, seed, |r| on_epoch(variant, r))?;
        out.push(AblationResult {
            variant,
            report: score(&trained.outcome.best, store, &trained.centers.test)?,
            best_epoch: trained.outcome.best_epoch,
            history: trained.outcome.history,
            split: trained.centers.split,
        });
    }
    Ok(out)
}
