//! Classic tri-training and the disagreement variant.

use super::{
    agree_pseudo_labels, items_of, pool_items, sample_candidates, validate_run_inputs,
    EpochRecord, Predictor, PseudoLabelBatch, SslConfig, SslResult, SslTrace, Strategy,
    TraceEpoch,
};
use crate::data::{bootstrap_sample, Dataset};
use crate::error::Result;
use crate::model::{MlpNet, Prediction, TrainItem};
use crate::rng::{derive, tags};

/// Tri-training: three models trained on independent bootstrap resamples of
/// `L`; per epoch each model receives the candidates on which the other two
/// agree and is retrained from a fresh initialization on `L ∪ L_i`. With
/// `disagreement` set, an agreed candidate is only accepted when the
/// receiving model disagrees with the agreed label.
///
/// All three batches are gathered from the epoch-start models before any
/// retraining, so the per-model retrainings are independent. A model whose
/// batch is empty is left untouched that epoch. The run ends when all three
/// batches repeat the previous epoch's exactly or after `cfg.outer_epochs`
/// epochs; the final predictor combines the three models under `cfg.vote`.
pub fn tri_train<F>(
    factory: F,
    labeled: &Dataset,
    unlabeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
    disagreement: bool,
) -> Result<SslResult>
where
    F: Fn(u64) -> MlpNet,
{
    validate_run_inputs(labeled, Some(unlabeled), dev, cfg)?;
    let l_items = items_of(labeled)?;
    let dev_items = items_of(dev)?;
    let model_seed = |epoch: usize, i: usize| {
        derive(derive(cfg.seed, tags::MODEL), (epoch * 3 + i) as u64)
    };

    // Independent bootstrap resamples and initial models (epoch 0 seeds).
    let mut models: Vec<MlpNet> = Vec::with_capacity(3);
    for i in 0..3 {
        let seed = model_seed(0, i);
        let sample = bootstrap_sample(labeled, seed)?;
        let sample_items = items_of(&sample)?;
        let mut net = factory(seed);
        net.train(&sample_items, &dev_items, &cfg.train.with_seed(seed))?;
        models.push(net);
    }

    let mut epochs = Vec::new();
    let mut trace = cfg.capture_trace.then(SslTrace::default);
    let mut total = 0usize;
    let mut prev_keys: Option<[Vec<(usize, usize)>; 3]> = None;

    for epoch in 1..=cfg.outer_epochs {
        let candidates = sample_candidates(unlabeled, epoch, cfg.pool_scheme, cfg.seed);
        let preds: Vec<Vec<Prediction>> = models
            .iter()
            .map(|m| {
                candidates
                    .iter()
                    .map(|&idx| m.forward(&unlabeled.examples()[idx].features))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        let mut batches: Vec<PseudoLabelBatch> = Vec::with_capacity(3);
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
                None,
                disagreement.then_some(preds[i].as_slice()),
            )?);
        }

        if let Some(trace) = trace.as_mut() {
            trace.epochs.push(TraceEpoch {
                epoch,
                candidates: candidates.clone(),
                predictions: preds.clone(),
                batches: batches.iter().map(|b| b.items().to_vec()).collect(),
            });
        }

        // Retrain each model from a fresh initialization on L ∪ L_i; an empty
        // batch carries no new signal and leaves its model unchanged.
        for (i, batch) in batches.iter().enumerate() {
            if batch.is_empty() {
                continue;
            }
            let pseudo: Vec<(usize, usize)> =
                batch.items().iter().map(|p| (p.pool_index, p.label)).collect();
            let pool: Vec<TrainItem<'_>> = pool_items(&l_items, unlabeled, &pseudo);
            let seed = model_seed(epoch, i);
            let mut net = factory(seed);
            net.train(&pool, &dev_items, &cfg.train.with_seed(seed))?;
            models[i] = net;
        }

        let counts = [batches[0].len(), batches[1].len(), batches[2].len()];
        total += counts.iter().sum::<usize>();

        let predictor = committee(&models, cfg);
        epochs.push(EpochRecord {
            epoch,
            pseudo_counts: counts,
            dev_accuracy: predictor.accuracy_on(dev)?,
            head3_skipped: false,
        });

        let keys = [batches[0].keys(), batches[1].keys(), batches[2].keys()];
        if prev_keys.as_ref() == Some(&keys) {
            break;
        }
        prev_keys = Some(keys);
    }

    let predictor = committee(&models, cfg);
    let final_dev_accuracy = predictor.accuracy_on(dev)?;
    Ok(SslResult {
        strategy: if disagreement { Strategy::TriD } else { Strategy::Tri },
        predictor,
        epochs,
        total_pseudo_labels: total,
        final_dev_accuracy,
        trace,
    })
}

fn committee(models: &[MlpNet], cfg: &SslConfig) -> Predictor {
    Predictor::Committee {
        models: Box::new([models[0].clone(), models[1].clone(), models[2].clone()]),
        vote: cfg.vote,
    }
}
