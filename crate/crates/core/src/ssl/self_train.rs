//! Source-only training and the two self-training variants.

use super::{
    items_of, pool_items, sample_candidate_positions, select_above_threshold,
    select_top_confident, validate_run_inputs, EpochRecord, Predictor, PseudoLabel, SslConfig,
    SslResult, SslTrace, Strategy, TraceEpoch,
};
use crate::data::Dataset;
use crate::error::Result;
use crate::model::{MlpNet, Prediction};

/// Baseline: train once on the labeled source data, no unlabeled signal.
pub fn source_only(
    mut net: MlpNet,
    labeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
) -> Result<SslResult> {
    validate_run_inputs(labeled, None, dev, cfg)?;
    let l_items = items_of(labeled)?;
    let dev_items = items_of(dev)?;
    let outcome = net.train(&l_items, &dev_items, &cfg.train)?;
    Ok(SslResult {
        strategy: Strategy::SrcOnly,
        predictor: Predictor::Single(net),
        epochs: vec![],
        total_pseudo_labels: 0,
        final_dev_accuracy: outcome.best_dev_accuracy,
        trace: cfg.capture_trace.then(SslTrace::default),
    })
}

enum Selection {
    /// Score every remaining pool example, accept confidence > tau.
    Threshold,
    /// Score a sampled candidate pool, accept the top `n` by confidence.
    Throttled,
}

/// Threshold self-training: train to convergence on `L`, then repeatedly move
/// every remaining unlabeled example whose top probability strictly exceeds
/// `cfg.tau` into the labeled pool under its predicted label, continuing
/// training after each batch. Stops when an iteration adds nothing or after
/// `cfg.outer_epochs` iterations. With `tau = 1.0` no example ever qualifies
/// and the run is observationally identical to [`source_only`].
pub fn self_train_threshold(
    net: MlpNet,
    labeled: &Dataset,
    unlabeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
) -> Result<SslResult> {
    self_train(net, labeled, unlabeled, dev, cfg, Selection::Threshold)
}

/// Throttled self-training: per iteration, rank the epoch's candidate pool by
/// confidence (ties by pool index ascending) and move exactly
/// `min(throttle_n, candidates)` top examples, with no threshold. Runs
/// `cfg.outer_epochs` iterations or until the pool is exhausted.
pub fn self_train_throttled(
    net: MlpNet,
    labeled: &Dataset,
    unlabeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
) -> Result<SslResult> {
    self_train(net, labeled, unlabeled, dev, cfg, Selection::Throttled)
}

fn self_train(
    mut net: MlpNet,
    labeled: &Dataset,
    unlabeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
    selection: Selection,
) -> Result<SslResult> {
    validate_run_inputs(labeled, Some(unlabeled), dev, cfg)?;
    let l_items = items_of(labeled)?;
    let dev_items = items_of(dev)?;

    // Convergence training on the labeled data before any pseudo-labeling.
    let mut dev_acc = net.train(&l_items, &dev_items, &cfg.train)?.best_dev_accuracy;

    let mut remaining: Vec<usize> = (0..unlabeled.len()).collect();
    let mut pseudo: Vec<(usize, usize)> = Vec::new();
    let mut epochs = Vec::new();
    let mut trace = cfg.capture_trace.then(SslTrace::default);

    for epoch in 1..=cfg.outer_epochs {
        if remaining.is_empty() {
            break;
        }

        // Positions into `remaining` under scrutiny this epoch.
        let positions: Vec<usize> = match selection {
            Selection::Threshold => (0..remaining.len()).collect(),
            Selection::Throttled => {
                sample_candidate_positions(remaining.len(), epoch, cfg.pool_scheme, cfg.seed)
            }
        };
        let preds: Vec<Prediction> = positions
            .iter()
            .map(|&pos| net.forward(&unlabeled.examples()[remaining[pos]].features))
            .collect::<Result<_>>()?;

        let chosen: Vec<usize> = match selection {
            Selection::Threshold => select_above_threshold(&preds, cfg.tau),
            Selection::Throttled => {
                let pool_indices: Vec<usize> = positions.iter().map(|&p| remaining[p]).collect();
                select_top_confident(&preds, &pool_indices, cfg.throttle_n)
            }
        };

        if let Some(trace) = trace.as_mut() {
            trace.epochs.push(TraceEpoch {
                epoch,
                candidates: positions.iter().map(|&p| remaining[p]).collect(),
                predictions: vec![preds.clone()],
                batches: vec![chosen
                    .iter()
                    .map(|&c| PseudoLabel {
                        pool_index: remaining[positions[c]],
                        label: preds[c].predicted,
                        confidence: preds[c].confidence(),
                    })
                    .collect()],
            });
        }

        if chosen.is_empty() {
            epochs.push(EpochRecord {
                epoch,
                pseudo_counts: [0, 0, 0],
                dev_accuracy: dev_acc,
                head3_skipped: false,
            });
            break;
        }

        // Move the chosen examples out of the pool, then continue training.
        let mut taken: Vec<usize> = chosen.iter().map(|&c| positions[c]).collect();
        for &c in &chosen {
            pseudo.push((remaining[positions[c]], preds[c].predicted));
        }
        taken.sort_unstable_by(|a, b| b.cmp(a));
        for pos in taken {
            remaining.swap_remove(pos);
        }
        remaining.sort_unstable();

        let pool = pool_items(&l_items, unlabeled, &pseudo);
        dev_acc = net.train(&pool, &dev_items, &cfg.train)?.best_dev_accuracy;

        epochs.push(EpochRecord {
            epoch,
            pseudo_counts: [chosen.len(), 0, 0],
            dev_accuracy: dev_acc,
            head3_skipped: false,
        });
    }

    let total = pseudo.len();
    Ok(SslResult {
        strategy: match selection {
            Selection::Threshold => Strategy::SelfThreshold,
            Selection::Throttled => Strategy::SelfThrottled,
        },
        predictor: Predictor::Single(net),
        epochs,
        total_pseudo_labels: total,
        final_dev_accuracy: dev_acc,
        trace,
    })
}
