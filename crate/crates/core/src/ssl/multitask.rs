//! Shared-encoder strategies: asymmetric tri-training and multi-task
//! tri-training.
//!
//! Both first train the three-head network jointly on the labeled data to
//! convergence (no bootstrap resampling; the orthogonality penalty provides
//! head diversity), then alternate between gathering agreement-based
//! pseudo-labels with confidence threshold `tau` and continuing joint
//! training over per-head pools. Head 3 trains on pseudo-labeled target
//! data only.

use super::{
    agree_pseudo_labels, items_of, pool_items, sample_candidates, validate_run_inputs,
    EpochRecord, Predictor, PseudoLabelBatch, SslConfig, SslResult, SslTrace, Strategy,
    TraceEpoch, VoteRule,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{MultiHeadNet, Prediction, TrainItem};

/// Asymmetric tri-training: only the agreement of heads 1 and 2 produces
/// pseudo-labels; head 3 trains on those alone and is the sole final
/// predictor (the vote rule is forced to `Head3`). An epoch that gathers no
/// pseudo-labels is a hard error, since the target head would be left
/// untrainable.
pub fn asym_tri_train(
    net: MultiHeadNet,
    labeled: &Dataset,
    unlabeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
) -> Result<SslResult> {
    run_shared_encoder(net, labeled, unlabeled, dev, cfg, Variant::Asymmetric)
}

/// Multi-task tri-training: every head receives the agreement of the other
/// two (with threshold `tau`); heads 1 and 2 train on `L ∪ L_i`, head 3 on
/// `L_3` only. An epoch with an empty `L_3` skips head 3's update and is
/// recorded in the result. Final prediction follows `cfg.vote` (majority by
/// default).
pub fn mt_tri_train(
    net: MultiHeadNet,
    labeled: &Dataset,
    unlabeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
) -> Result<SslResult> {
    run_shared_encoder(net, labeled, unlabeled, dev, cfg, Variant::MultiTask)
}

#[derive(Clone, Copy, PartialEq)]
enum Variant {
    Asymmetric,
    MultiTask,
}

fn run_shared_encoder(
    mut net: MultiHeadNet,
    labeled: &Dataset,
    unlabeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
    variant: Variant,
) -> Result<SslResult> {
    validate_run_inputs(labeled, Some(unlabeled), dev, cfg)?;
    let l_items = items_of(labeled)?;
    let dev_items = items_of(dev)?;
    let vote = match variant {
        Variant::Asymmetric => VoteRule::Head3,
        Variant::MultiTask => cfg.vote,
    };

    // Joint convergence training on the labeled data, all heads on L.
    net.train([&l_items, &l_items, &l_items], &dev_items, &cfg.train)?;

    let mut epochs = Vec::new();
    let mut trace = cfg.capture_trace.then(SslTrace::default);
    let mut total = 0usize;
    let mut prev_keys: Option<Vec<Vec<(usize, usize)>>> = None;

    for epoch in 1..=cfg.outer_epochs {
        let candidates = sample_candidates(unlabeled, epoch, cfg.pool_scheme, cfg.seed);
        let mut preds: Vec<Vec<Prediction>> = vec![Vec::new(), Vec::new(), Vec::new()];
        for &idx in &candidates {
            let all = net.forward_all(&unlabeled.examples()[idx].features)?;
            for (h, p) in all.into_iter().enumerate() {
                preds[h].push(p);
            }
        }

        // Gather batches from the epoch-start parameters.
        let batches: Vec<PseudoLabelBatch> = match variant {
            Variant::Asymmetric => {
                let batch = agree_pseudo_labels(
                    &candidates,
                    &preds[0],
                    &preds[1],
                    &[],
                    Some(cfg.tau),
                    None,
                )?;
                vec![PseudoLabelBatch::default(), PseudoLabelBatch::default(), batch]
            }
            Variant::MultiTask => {
                let mut batches = Vec::with_capacity(3);
                for i in 0..3 {
                    let (j, k) = match i {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    batches.push(agree_pseudo_labels(
                        &candidates,
                        &preds[j],
                        &preds[k],
                        &[],
                        Some(cfg.tau),
                        None,
                    )?);
                }
                batches
            }
        };

        if let Some(trace) = trace.as_mut() {
            trace.epochs.push(TraceEpoch {
                epoch,
                candidates: candidates.clone(),
                predictions: preds.clone(),
                batches: batches.iter().map(|b| b.items().to_vec()).collect(),
            });
        }

        let head3_skipped = batches[2].is_empty();
        if head3_skipped && variant == Variant::Asymmetric {
            return Err(Error::NoPseudoLabels);
        }

        // Per-head pools: heads 1 and 2 on L ∪ L_i, head 3 on L_3 only.
        // Under the asymmetric variant heads 1 and 2 share head 3's batch.
        let as_pairs = |b: &PseudoLabelBatch| -> Vec<(usize, usize)> {
            b.items().iter().map(|p| (p.pool_index, p.label)).collect()
        };
        let (pool0, pool1): (Vec<TrainItem<'_>>, Vec<TrainItem<'_>>) = match variant {
            Variant::Asymmetric => {
                let shared = pool_items(&l_items, unlabeled, &as_pairs(&batches[2]));
                (shared.clone(), shared)
            }
            Variant::MultiTask => (
                pool_items(&l_items, unlabeled, &as_pairs(&batches[0])),
                pool_items(&l_items, unlabeled, &as_pairs(&batches[1])),
            ),
        };
        let pool2: Vec<TrainItem<'_>> = pool_items(&[], unlabeled, &as_pairs(&batches[2]));

        // Continue joint training; a head with an empty pool receives no
        // gradient and keeps its parameters.
        net.train([&pool0, &pool1, &pool2], &dev_items, &cfg.train)?;

        let counts = [batches[0].len(), batches[1].len(), batches[2].len()];
        total += counts.iter().sum::<usize>();
        let dev_accuracy = predictor_accuracy(&net, vote, dev)?;
        epochs.push(EpochRecord {
            epoch,
            pseudo_counts: counts,
            dev_accuracy,
            head3_skipped,
        });

        let keys: Vec<Vec<(usize, usize)>> = batches.iter().map(|b| b.keys()).collect();
        if prev_keys.as_ref() == Some(&keys) {
            break;
        }
        prev_keys = Some(keys);
    }

    let predictor = Predictor::MultiHead { net, vote };
    let final_dev_accuracy = predictor.accuracy_on(dev)?;
    Ok(SslResult {
        strategy: match variant {
            Variant::Asymmetric => Strategy::Asym,
            Variant::MultiTask => Strategy::MtTri,
        },
        predictor,
        epochs,
        total_pseudo_labels: total,
        final_dev_accuracy,
        trace,
    })
}

fn predictor_accuracy(net: &MultiHeadNet, vote: VoteRule, dev: &Dataset) -> Result<f64> {
    let probe = Predictor::MultiHead {
        net: net.clone(),
        vote,
    };
    probe.accuracy_on(dev)
}
