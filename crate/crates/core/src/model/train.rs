//! Minibatch training with Adam updates and patience-based early stopping.
//!
//! Both network shapes train through the same loop: shuffle each pool per
//! epoch under a seed-derived stream, take Adam steps on minibatch gradients,
//! evaluate dev accuracy after every epoch, keep the best-scoring epoch's
//! parameters (ties to the earliest), and stop once `patience` epochs pass
//! without strict improvement. Identical pools receive identical minibatch
//! sequences, which keeps tied heads bitwise in lockstep.

use super::{majority_vote, Matrix, MlpNet, MultiHeadNet, TrainItem};
use crate::error::{Error, Result};
use crate::rng::{tags, Rng};

/// Hidden width used by the experiment pipeline unless overridden.
pub const DEFAULT_HIDDEN_DIM: usize = 50;

/// Optimization settings shared by both network shapes. `gamma` weighs the
/// orthogonality penalty and only affects [`MultiHeadNet`] training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 5,
            batch_size: 16,
            gamma: 0.01,
            seed: 42,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidData("learning_rate must be positive".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidData("gamma must be nonnegative".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidData("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidData("max_epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidData("batch_size must be at least 1".into()));
        }
        if self.init_scale < 0.0 {
            return Err(Error::InvalidData("init_scale must be nonnegative".into()));
        }
        Ok(())
    }

    /// Same settings under a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig {
            seed,
            ..self.clone()
        }
    }
}

/// What a training run did.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Epochs actually executed.
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (earliest among ties).
    pub best_epoch: usize,
    /// Dev accuracy of the kept parameters.
    pub best_dev_accuracy: f64,
    /// Dev accuracy after each executed epoch.
    pub dev_history: Vec<f64>,
}

/// Adam state over a flat parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= self.lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }
}

fn push_matrix(out: &mut Vec<f64>, m: &Matrix) {
    out.extend_from_slice(m.data());
}

fn pull_matrix(src: &[f64], at: &mut usize, m: &mut Matrix) {
    let len = m.data().len();
    m.data_mut().copy_from_slice(&src[*at..*at + len]);
    *at += len;
}

fn pull_vec(src: &[f64], at: &mut usize, v: &mut [f64]) {
    v.copy_from_slice(&src[*at..*at + v.len()]);
    *at += v.len();
}

/// One network under training: a gradient step over an epoch plus dev
/// evaluation and flat-parameter snapshots.
trait Trainee {
    fn run_epoch(&mut self, epoch: usize, adam: &mut Adam, cfg: &TrainConfig) -> Result<()>;
    fn evaluate(&self) -> Result<f64>;
    fn params(&self) -> Vec<f64>;
    fn restore(&mut self, params: &[f64]);
}

/// Epoch loop shared by both network shapes.
fn run_training<T: Trainee>(trainee: &mut T, param_count: usize, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut adam = Adam::new(param_count, cfg.learning_rate);
    let mut best_params = trainee.params();
    let mut best_acc = f64::NEG_INFINITY; // epoch 1 always becomes the first best
    let mut best_epoch = 0usize;
    let mut stale = 0usize;
    let mut dev_history = Vec::new();
    let mut epochs_run = 0usize;

    for epoch in 1..=cfg.max_epochs {
        trainee.run_epoch(epoch, &mut adam, cfg)?;
        epochs_run = epoch;
        let acc = trainee.evaluate()?;
        dev_history.push(acc);
        if acc > best_acc {
            best_acc = acc;
            best_epoch = epoch;
            best_params = trainee.params();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    trainee.restore(&best_params);
    Ok(TrainOutcome {
        epochs_run,
        best_epoch,
        best_dev_accuracy: best_acc,
        dev_history,
    })
}

struct MlpTrainee<'n, 'a> {
    net: &'n mut MlpNet,
    data: &'n [TrainItem<'a>],
    dev: &'n [TrainItem<'a>],
}

impl Trainee for MlpTrainee<'_, '_> {
    fn run_epoch(&mut self, epoch: usize, adam: &mut Adam, cfg: &TrainConfig) -> Result<()> {
        let order = Rng::from_stream(cfg.seed, &[tags::EPOCH_SHUFFLE, epoch as u64])
            .permutation(self.data.len());
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainItem<'_>> = chunk.iter().map(|&i| self.data[i]).collect();
            let (loss, grads) = self.net.batch_gradients(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let mut flat = self.net.flat_params();
            let mut gflat = Vec::with_capacity(flat.len());
            push_matrix(&mut gflat, &grads.w_in);
            gflat.extend_from_slice(&grads.b_in);
            push_matrix(&mut gflat, &grads.w_out);
            gflat.extend_from_slice(&grads.b_out);
            adam.step(&mut flat, &gflat);
            self.net.set_flat_params(&flat);
        }
        Ok(())
    }

    fn evaluate(&self) -> Result<f64> {
        self.net.dev_accuracy(self.dev)
    }

    fn params(&self) -> Vec<f64> {
        self.net.flat_params()
    }

    fn restore(&mut self, params: &[f64]) {
        self.net.set_flat_params(params);
    }
}

struct MultiTrainee<'n, 'a> {
    net: &'n mut MultiHeadNet,
    data: [&'n [TrainItem<'a>]; 3],
    dev: &'n [TrainItem<'a>],
}

impl Trainee for MultiTrainee<'_, '_> {
    fn run_epoch(&mut self, epoch: usize, adam: &mut Adam, cfg: &TrainConfig) -> Result<()> {
        // Same derived stream per head, so identical pools get identical
        // minibatch sequences.
        let orders: [Vec<usize>; 3] = [0, 1, 2].map(|h| {
            Rng::from_stream(cfg.seed, &[tags::EPOCH_SHUFFLE, epoch as u64])
                .permutation(self.data[h].len())
        });
        let steps = orders
            .iter()
            .map(|o| o.len().div_ceil(cfg.batch_size))
            .max()
            .unwrap_or(0);
        for step in 0..steps {
            let batches: [Vec<TrainItem<'_>>; 3] = [0, 1, 2].map(|h| {
                orders[h]
                    .iter()
                    .skip(step * cfg.batch_size)
                    .take(cfg.batch_size)
                    .map(|&i| self.data[h][i])
                    .collect()
            });
            let (loss, grads) = self
                .net
                .gradients([&batches[0], &batches[1], &batches[2]], cfg.gamma)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let mut flat = self.net.flat_params();
            let mut gflat = Vec::with_capacity(flat.len());
            push_matrix(&mut gflat, &grads.w_in);
            gflat.extend_from_slice(&grads.b_in);
            for h in &grads.heads {
                push_matrix(&mut gflat, &h.w);
                gflat.extend_from_slice(&h.b);
            }
            adam.step(&mut flat, &gflat);
            self.net.set_flat_params(&flat);
        }
        Ok(())
    }

    fn evaluate(&self) -> Result<f64> {
        self.net.dev_accuracy(self.dev)
    }

    fn params(&self) -> Vec<f64> {
        self.net.flat_params()
    }

    fn restore(&mut self, params: &[f64]) {
        self.net.set_flat_params(params);
    }
}

impl MlpNet {
    /// Flat parameter vector: `w_in` row-major, `b_in`, `w_out` row-major,
    /// `b_out`.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        push_matrix(&mut out, &self.w_in);
        out.extend_from_slice(&self.b_in);
        push_matrix(&mut out, &self.w_out);
        out.extend_from_slice(&self.b_out);
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut at = 0;
        pull_matrix(flat, &mut at, &mut self.w_in);
        pull_vec(flat, &mut at, &mut self.b_in);
        pull_matrix(flat, &mut at, &mut self.w_out);
        pull_vec(flat, &mut at, &mut self.b_out);
        debug_assert_eq!(at, flat.len());
    }

    /// Fraction of `dev` classified correctly.
    pub fn dev_accuracy(&self, dev: &[TrainItem<'_>]) -> Result<f64> {
        if dev.is_empty() {
            return Err(Error::InvalidData("dev set is empty".into()));
        }
        let mut hits = 0usize;
        for item in dev {
            if self.forward(item.features)?.predicted == item.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / dev.len() as f64)
    }

    /// Minibatch Adam training; see the module docs for the loop contract.
    pub fn train(
        &mut self,
        data: &[TrainItem<'_>],
        dev: &[TrainItem<'_>],
        cfg: &TrainConfig,
    ) -> Result<TrainOutcome> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidData("training data is empty".into()));
        }
        if dev.is_empty() {
            return Err(Error::InvalidData("dev set is empty".into()));
        }
        let param_count = self.flat_params().len();
        run_training(&mut MlpTrainee { net: self, data, dev }, param_count, cfg)
    }
}

impl MultiHeadNet {
    /// Flat parameter vector: `w_in` row-major, `b_in`, then each head's
    /// output matrix row-major followed by its bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        push_matrix(&mut out, &self.w_in);
        out.extend_from_slice(&self.b_in);
        for head in &self.heads {
            push_matrix(&mut out, &head.w);
            out.extend_from_slice(&head.b);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut at = 0;
        pull_matrix(flat, &mut at, &mut self.w_in);
        pull_vec(flat, &mut at, &mut self.b_in);
        for head in &mut self.heads {
            pull_matrix(flat, &mut at, &mut head.w);
            pull_vec(flat, &mut at, &mut head.b);
        }
        debug_assert_eq!(at, flat.len());
    }

    /// Dev accuracy under majority vote of the three heads, the same rule
    /// used for final predictions.
    pub fn dev_accuracy(&self, dev: &[TrainItem<'_>]) -> Result<f64> {
        if dev.is_empty() {
            return Err(Error::InvalidData("dev set is empty".into()));
        }
        let mut hits = 0usize;
        for item in dev {
            let preds = self.forward_all(item.features)?;
            if majority_vote(&preds).predicted == item.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / dev.len() as f64)
    }

    /// Joint minibatch training of the three heads over their own pools; a
    /// head whose pool is exhausted (or empty) contributes nothing to the
    /// remaining steps of the epoch.
    pub fn train(
        &mut self,
        data: [&[TrainItem<'_>]; 3],
        dev: &[TrainItem<'_>],
        cfg: &TrainConfig,
    ) -> Result<TrainOutcome> {
        cfg.validate()?;
        if data.iter().all(|d| d.is_empty()) {
            return Err(Error::InvalidData("training data is empty".into()));
        }
        if dev.is_empty() {
            return Err(Error::InvalidData("dev set is empty".into()));
        }
        let param_count = self.flat_params().len();
        run_training(&mut MultiTrainee { net: self, data, dev }, param_count, cfg)
    }
}
