//! Bootstrapping strategies over labeled set `L` and unlabeled pool `U`.
//!
//! Five strategies share the machinery in this module:
//!
//! * [`self_train_threshold`] — move every prediction above a confidence
//!   threshold `tau` into the labeled pool, iterate until nothing qualifies.
//! * [`self_train_throttled`] — move the `throttle_n` most confident
//!   candidates per iteration instead of applying an absolute threshold.
//! * [`tri_train`] — three networks trained on bootstrap resamples; two
//!   models' agreement pseudo-labels data for the third, final prediction by
//!   majority vote. The `disagreement` flag additionally requires the
//!   receiving model to disagree with the agreed label.
//! * [`asym_tri_train`] — a shared-encoder three-head network where heads 1
//!   and 2 pseudo-label for head 3, which trains on pseudo-labels only and is
//!   the sole final predictor.
//! * [`mt_tri_train`] — the multi-task variant: all three heads both give and
//!   receive pseudo-labels over the shared encoder, with the orthogonality
//!   penalty keeping heads 1 and 2 diverse.
//!
//! Runs are pure functions of their inputs and [`SslConfig`]: the same seed
//! produces an identical [`SslResult`].

mod multitask;
mod self_train;
mod tri;

pub use multitask::{asym_tri_train, mt_tri_train};
pub use self_train::{self_train_threshold, self_train_throttled, source_only};
pub use tri::tri_train;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::{Dataset, SparseVector};
use crate::error::{Error, Result};
use crate::model::{labeled_items, MlpNet, MultiHeadNet, Prediction, TrainConfig, TrainItem};
use crate::rng::{tags, Rng};

pub use crate::model::majority_vote;

/// How many unlabeled candidates to score per outer epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoolScheme {
    /// `min(size, remaining)` candidates every epoch.
    Fixed(usize),
    /// `min(base + rate * (epoch - 1), remaining)` candidates, growing as the
    /// models improve.
    LinearGrowth { base: usize, rate: usize },
}

impl PoolScheme {
    fn size_at(&self, epoch: usize) -> usize {
        match *self {
            PoolScheme::Fixed(k) => k,
            PoolScheme::LinearGrowth { base, rate } => base + rate * (epoch - 1),
        }
    }
}

/// Final-prediction rule for committee strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteRule {
    Majority,
    /// The third model/head alone.
    Head3,
}

/// Strategy tags used by the experiment pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    SrcOnly,
    SelfThreshold,
    SelfThrottled,
    Tri,
    TriD,
    Asym,
    MtTri,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::SrcOnly,
        Strategy::SelfThreshold,
        Strategy::SelfThrottled,
        Strategy::Tri,
        Strategy::TriD,
        Strategy::Asym,
        Strategy::MtTri,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::SrcOnly => "src_only",
            Strategy::SelfThreshold => "self_threshold",
            Strategy::SelfThrottled => "self_throttled",
            Strategy::Tri => "tri",
            Strategy::TriD => "tri_d",
            Strategy::Asym => "asym",
            Strategy::MtTri => "mt_tri",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| Error::InvalidData(format!("unknown strategy {s:?}")))
    }
}

/// Settings for one bootstrapping run.
#[derive(Debug, Clone, PartialEq)]
pub struct SslConfig {
    /// Confidence threshold for threshold self-training and for agreement
    /// thresholding in the multi-head strategies.
    pub tau: f64,
    /// Examples moved per iteration by throttled self-training.
    pub throttle_n: usize,
    /// Upper bound on outer bootstrapping epochs.
    pub outer_epochs: usize,
    pub pool_scheme: PoolScheme,
    pub vote: VoteRule,
    pub seed: u64,
    pub train: TrainConfig,
    /// Record per-epoch candidate sets, head predictions, and batches in the
    /// result; used by diagnostics and oracle tests.
    pub capture_trace: bool,
}

impl Default for SslConfig {
    fn default() -> Self {
        SslConfig {
            tau: 0.9,
            throttle_n: 800,
            outer_epochs: 10,
            pool_scheme: PoolScheme::Fixed(10_000),
            vote: VoteRule::Majority,
            seed: 42,
            train: TrainConfig::default(),
            capture_trace: false,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidData("tau must be in [0, 1]".into()));
        }
        if self.throttle_n == 0 {
            return Err(Error::InvalidData("throttle_n must be at least 1".into()));
        }
        if self.outer_epochs == 0 {
            return Err(Error::InvalidData("outer_epochs must be at least 1".into()));
        }
        match self.pool_scheme {
            PoolScheme::Fixed(0) => {
                return Err(Error::InvalidData("fixed pool size must be at least 1".into()))
            }
            PoolScheme::LinearGrowth { base: 0, .. } => {
                return Err(Error::InvalidData("pool growth base must be at least 1".into()))
            }
            _ => {}
        }
        self.train.validate()
    }
}

/// One accepted pseudo-label.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabel {
    /// Index into the unlabeled pool.
    pub pool_index: usize,
    pub label: usize,
    pub confidence: f64,
}

/// Pseudo-labels accepted in one gathering pass; pool indices are unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseudoLabelBatch {
    items: Vec<PseudoLabel>,
}

impl PseudoLabelBatch {
    pub fn new(items: Vec<PseudoLabel>) -> Result<Self> {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.pool_index) {
                return Err(Error::InvalidData(format!(
                    "duplicate pool index {}",
                    item.pool_index
                )));
            }
            if !(0.0..=1.0).contains(&item.confidence) {
                return Err(Error::InvalidData(format!(
                    "confidence {} outside [0, 1]",
                    item.confidence
                )));
            }
        }
        Ok(PseudoLabelBatch { items })
    }

    pub fn items(&self) -> &[PseudoLabel] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `(pool_index, label)` pairs; the identity used by end-condition
    /// comparisons across epochs.
    pub fn keys(&self) -> Vec<(usize, usize)> {
        self.items.iter().map(|i| (i.pool_index, i.label)).collect()
    }
}

/// Per-epoch bookkeeping of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Pseudo-labels gathered this epoch, per model/head (unused slots stay
    /// zero for single-model strategies).
    pub pseudo_counts: [usize; 3],
    /// Dev accuracy of the strategy's final-prediction rule after the epoch.
    pub dev_accuracy: f64,
    /// Multi-task runs: head 3 had no pseudo-labels and skipped its update.
    pub head3_skipped: bool,
}

/// Optional per-epoch capture for diagnostics and oracle replay.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SslTrace {
    pub epochs: Vec<TraceEpoch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEpoch {
    pub epoch: usize,
    /// Candidate pool indices scored this epoch.
    pub candidates: Vec<usize>,
    /// Predictions over `candidates`, one list per model/head.
    pub predictions: Vec<Vec<Prediction>>,
    /// Batches gathered this epoch, one per model/head.
    pub batches: Vec<Vec<PseudoLabel>>,
}

/// Final predictor of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Single(MlpNet),
    Committee { models: Box<[MlpNet; 3]>, vote: VoteRule },
    MultiHead { net: MultiHeadNet, vote: VoteRule },
}

impl Predictor {
    pub fn predict(&self, x: &SparseVector) -> Result<Prediction> {
        match self {
            Predictor::Single(net) => net.forward(x),
            Predictor::Committee { models, vote } => match vote {
                VoteRule::Head3 => models[2].forward(x),
                VoteRule::Majority => {
                    let preds = [
                        models[0].forward(x)?,
                        models[1].forward(x)?,
                        models[2].forward(x)?,
                    ];
                    Ok(majority_vote(&preds))
                }
            },
            Predictor::MultiHead { net, vote } => match vote {
                VoteRule::Head3 => net.forward_head(2, x),
                VoteRule::Majority => Ok(majority_vote(&net.forward_all(x)?)),
            },
        }
    }

    /// Predicted labels over a dataset, in order.
    pub fn predict_labels(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        dataset
            .examples()
            .iter()
            .map(|ex| self.predict(&ex.features).map(|p| p.predicted))
            .collect()
    }

    /// Accuracy on a fully labeled dataset.
    pub fn accuracy_on(&self, dataset: &Dataset) -> Result<f64> {
        let gold = dataset.gold_labels()?;
        crate::eval::accuracy(&self.predict_labels(dataset)?, &gold)
    }
}

/// Outcome of one bootstrapping run.
#[derive(Debug, Clone, PartialEq)]
pub struct SslResult {
    pub strategy: Strategy,
    pub predictor: Predictor,
    pub epochs: Vec<EpochRecord>,
    /// Total pseudo-labels added across all epochs.
    pub total_pseudo_labels: usize,
    /// Dev accuracy of the final predictor.
    pub final_dev_accuracy: f64,
    pub trace: Option<SslTrace>,
}

/// Sample the candidate subset of `unlabeled` for one epoch: the scheme's
/// size (clamped to the pool) drawn uniformly without replacement, sorted,
/// deterministic under `(seed, epoch)`.
pub fn sample_candidates(
    unlabeled: &Dataset,
    epoch: usize,
    scheme: PoolScheme,
    seed: u64,
) -> Vec<usize> {
    assert!(epoch >= 1, "epochs are 1-based");
    sample_candidate_positions(unlabeled.len(), epoch, scheme, seed)
}

/// Index-level variant of [`sample_candidates`] for sampling from a shrinking
/// remaining pool.
fn sample_candidate_positions(n: usize, epoch: usize, scheme: PoolScheme, seed: u64) -> Vec<usize> {
    let k = scheme.size_at(epoch).min(n);
    Rng::from_stream(seed, &[tags::CANDIDATES, epoch as u64]).sample_without_replacement(n, k)
}

/// Positions of predictions whose confidence strictly exceeds `tau`.
pub fn select_above_threshold(preds: &[Prediction], tau: f64) -> Vec<usize> {
    preds
        .iter()
        .enumerate()
        .filter(|(_, p)| p.confidence() > tau)
        .map(|(i, _)| i)
        .collect()
}

/// Positions of the `n` most confident predictions, ranked by confidence
/// descending with ties broken by pool index ascending. `pool_indices` maps
/// positions to pool indices for the tie-break.
pub fn select_top_confident(preds: &[Prediction], pool_indices: &[usize], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence()
            .total_cmp(&preds[a].confidence())
            .then(pool_indices[a].cmp(&pool_indices[b]))
    });
    order.truncate(n.min(preds.len()));
    order
}

/// Pseudo-labels from the agreement of two models over a candidate pool.
///
/// A candidate is accepted when both argmaxes agree; with `tau` set, the
/// higher of the two confidences must strictly exceed it; with `disagree_i`
/// set, the third model's argmax must differ from the agreed label. Indices
/// in `exclude` are skipped. The recorded confidence is the mean of the two
/// agreeing confidences.
pub fn agree_pseudo_labels(
    candidates: &[usize],
    pred_j: &[Prediction],
    pred_k: &[Prediction],
    exclude: &[usize],
    tau: Option<f64>,
    disagree_i: Option<&[Prediction]>,
) -> Result<PseudoLabelBatch> {
    if pred_j.len() != candidates.len() || pred_k.len() != candidates.len() {
        return Err(Error::Misaligned(format!(
            "{} candidates vs {} and {} predictions",
            candidates.len(),
            pred_j.len(),
            pred_k.len()
        )));
    }
    if let Some(pred_i) = disagree_i {
        if pred_i.len() != candidates.len() {
            return Err(Error::Misaligned(format!(
                "{} candidates vs {} disagreement predictions",
                candidates.len(),
                pred_i.len()
            )));
        }
    }
    let excluded: HashSet<usize> = exclude.iter().copied().collect();

    let mut items = Vec::new();
    for (pos, &pool_index) in candidates.iter().enumerate() {
        if excluded.contains(&pool_index) {
            continue;
        }
        let (pj, pk) = (&pred_j[pos], &pred_k[pos]);
        if pj.predicted != pk.predicted {
            continue;
        }
        if let Some(tau) = tau {
            if pj.confidence().max(pk.confidence()) <= tau {
                continue;
            }
        }
        if let Some(pred_i) = disagree_i {
            if pred_i[pos].predicted == pj.predicted {
                continue;
            }
        }
        items.push(PseudoLabel {
            pool_index,
            label: pj.predicted,
            confidence: (pj.confidence() + pk.confidence()) / 2.0,
        });
    }
    PseudoLabelBatch::new(items)
}

/// Entry point used by the experiment pipeline: build the right learner shape
/// for `strategy` and run it.
pub fn run_strategy(
    strategy: Strategy,
    labeled: &Dataset,
    unlabeled: &Dataset,
    dev: &Dataset,
    cfg: &SslConfig,
    hidden_dim: usize,
) -> Result<SslResult> {
    let input_dim = labeled.dimensionality();
    let classes = labeled.num_classes();
    let train = cfg.train.clone();
    match strategy {
        Strategy::SrcOnly => source_only(
            MlpNet::init(input_dim, hidden_dim, classes, &train),
            labeled,
            dev,
            cfg,
        ),
        Strategy::SelfThreshold => self_train_threshold(
            MlpNet::init(input_dim, hidden_dim, classes, &train),
            labeled,
            unlabeled,
            dev,
            cfg,
        ),
        Strategy::SelfThrottled => self_train_throttled(
            MlpNet::init(input_dim, hidden_dim, classes, &train),
            labeled,
            unlabeled,
            dev,
            cfg,
        ),
        Strategy::Tri | Strategy::TriD => tri_train(
            |seed| MlpNet::init(input_dim, hidden_dim, classes, &train.with_seed(seed)),
            labeled,
            unlabeled,
            dev,
            cfg,
            strategy == Strategy::TriD,
        ),
        Strategy::Asym => asym_tri_train(
            MultiHeadNet::init(input_dim, hidden_dim, classes, &train),
            labeled,
            unlabeled,
            dev,
            cfg,
        ),
        Strategy::MtTri => mt_tri_train(
            MultiHeadNet::init(input_dim, hidden_dim, classes, &train),
            labeled,
            unlabeled,
            dev,
            cfg,
        ),
    }
}

/// Shared entry validation for the strategy functions.
fn validate_run_inputs(
    labeled: &Dataset,
    unlabeled: Option<&Dataset>,
    dev: &Dataset,
    cfg: &SslConfig,
) -> Result<()> {
    cfg.validate()?;
    if labeled.is_empty() || !labeled.is_labeled() {
        return Err(Error::InvalidData(
            "bootstrapping requires a nonempty labeled set".into(),
        ));
    }
    if let Some(u) = unlabeled {
        if !u.is_unlabeled() {
            return Err(Error::InvalidData("the pool must be unlabeled".into()));
        }
        if u.dimensionality() != labeled.dimensionality() {
            return Err(Error::Shape {
                what: "unlabeled pool".into(),
                expected: labeled.dimensionality(),
                got: u.dimensionality(),
            });
        }
    }
    if dev.is_empty() || !dev.is_labeled() {
        return Err(Error::InvalidData("dev set must be nonempty and labeled".into()));
    }
    Ok(())
}

/// Training items of `labeled` plus pseudo-labeled pool items.
fn pool_items<'a>(
    labeled_items: &[TrainItem<'a>],
    unlabeled: &'a Dataset,
    pseudo: &[(usize, usize)],
) -> Vec<TrainItem<'a>> {
    let mut items = labeled_items.to_vec();
    items.extend(pseudo.iter().map(|&(idx, label)| TrainItem {
        features: &unlabeled.examples()[idx].features,
        label,
    }));
    items
}

/// Persist a run as line-delimited records: one per epoch, then a summary.
pub fn save_result(result: &SslResult, cfg: &SslConfig, path: &Path) -> Result<()> {
    let mut out = String::new();
    for e in &result.epochs {
        out.push_str(&format!(
            "epoch\t{}\tcounts={},{},{}\tdev={:.6}{}\n",
            e.epoch,
            e.pseudo_counts[0],
            e.pseudo_counts[1],
            e.pseudo_counts[2],
            e.dev_accuracy,
            if e.head3_skipped { "\thead3=skipped" } else { "" },
        ));
    }
    let pool = match cfg.pool_scheme {
        PoolScheme::Fixed(k) => format!("fixed:{k}"),
        PoolScheme::LinearGrowth { base, rate } => format!("linear:{base}:{rate}"),
    };
    let vote = match cfg.vote {
        VoteRule::Majority => "majority",
        VoteRule::Head3 => "head3",
    };
    out.push_str(&format!(
        "summary\tstrategy={}\ttau={}\tthrottle_n={}\touter_epochs={}\tpool={}\tvote={}\tseed={}\tmu_pseudo={}\tfinal_dev={:.6}\n",
        result.strategy,
        cfg.tau,
        cfg.throttle_n,
        cfg.outer_epochs,
        pool,
        vote,
        cfg.seed,
        result.total_pseudo_labels,
        result.final_dev_accuracy,
    ));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Labeled items helper shared by the strategy submodules.
fn items_of(dataset: &Dataset) -> Result<Vec<TrainItem<'_>>> {
    labeled_items(dataset)
}
