//! Feed-forward classifiers with hand-derived gradients.
//!
//! Two network shapes cover every strategy in this crate:
//!
//! * [`MlpNet`] — one sigmoid hidden layer and a softmax output, the base
//!   learner for self-training and classic tri-training.
//! * [`MultiHeadNet`] — the same hidden layer shared by exactly three softmax
//!   output heads, used by asymmetric and multi-task tri-training. Head
//!   diversity is encouraged by penalizing `‖W₁ᵀW₂‖²_F` between the first two
//!   heads' output matrices ([`orth_loss`]).
//!
//! All gradients are analytic; [`MultiHeadNet::gradients`] is checked against
//! central finite differences in the test suite.

mod checkpoint;
mod train;

pub use checkpoint::{load_mlp, load_multi_head, save_mlp, save_multi_head};
pub use train::{TrainConfig, TrainOutcome, DEFAULT_HIDDEN_DIM};

use crate::data::{Dataset, SparseVector};
use crate::error::{Error, Result};
use crate::rng::{tags, Rng};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidData("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Class distribution plus the chosen class.
///
/// Model forward passes produce `predicted = argmax(probs)` with exact ties
/// resolved to the lowest class index. [`majority_vote`] may set `predicted`
/// to the vote winner, which is allowed to differ from the argmax of the
/// averaged distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub predicted: usize,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Prediction {
            predicted: best,
            probs,
        }
    }

    /// Probability assigned to the predicted class.
    pub fn confidence(&self) -> f64 {
        self.probs[self.predicted]
    }
}

/// One labeled training item, borrowing its features.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub features: &'a SparseVector,
    pub label: usize,
}

/// Borrow a fully labeled dataset as training items.
pub fn labeled_items(dataset: &Dataset) -> Result<Vec<TrainItem<'_>>> {
    dataset
        .examples()
        .iter()
        .map(|ex| {
            ex.label
                .map(|label| TrainItem {
                    features: &ex.features,
                    label,
                })
                .ok_or_else(|| Error::InvalidData("dataset is not labeled".into()))
        })
        .collect()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Softmax with max-subtraction for numerical stability.
fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

fn hidden_activation(w_in: &Matrix, b_in: &[f64], x: &SparseVector) -> Result<Vec<f64>> {
    if let Some(max) = x.max_index() {
        if max >= w_in.rows() {
            return Err(Error::Shape {
                what: "input features".into(),
                expected: w_in.rows(),
                got: max + 1,
            });
        }
    }
    let mut z = b_in.to_vec();
    for &(idx, w) in x.entries() {
        for (zj, &wij) in z.iter_mut().zip(w_in.row(idx)) {
            *zj += w * wij;
        }
    }
    for v in &mut z {
        *v = sigmoid(*v);
    }
    Ok(z)
}

fn output_distribution(w_out: &Matrix, b_out: &[f64], hidden: &[f64]) -> Vec<f64> {
    let mut logits = b_out.to_vec();
    for (hj, &h) in hidden.iter().enumerate() {
        for (l, &w) in logits.iter_mut().zip(w_out.row(hj)) {
            *l += h * w;
        }
    }
    softmax_in_place(&mut logits);
    logits
}

/// Single-head network: `softmax(W_outᵀ · sigmoid(W_inᵀ x + b_in) + b_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    pub w_in: Matrix,
    pub b_in: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl MlpNet {
    /// Fresh network with weights uniform in `[-init_scale, +init_scale]`
    /// under `cfg.seed` and zero biases. Draw order: `w_in` row-major, then
    /// `w_out` row-major.
    pub fn init(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        cfg: &TrainConfig,
    ) -> Self {
        let mut rng = Rng::from_stream(cfg.seed, &[tags::WEIGHT_INIT]);
        let mut draw = |rows: usize, cols: usize| {
            let mut m = Matrix::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.uniform(-cfg.init_scale, cfg.init_scale);
            }
            m
        };
        MlpNet {
            w_in: draw(input_dim, hidden_dim),
            b_in: vec![0.0; hidden_dim],
            w_out: draw(hidden_dim, num_classes),
            b_out: vec![0.0; num_classes],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b_in.len()
    }

    pub fn num_classes(&self) -> usize {
        self.b_out.len()
    }

    /// Class distribution for one input.
    pub fn forward(&self, x: &SparseVector) -> Result<Prediction> {
        let hidden = hidden_activation(&self.w_in, &self.b_in, x)?;
        Ok(Prediction::from_probs(output_distribution(
            &self.w_out,
            &self.b_out,
            &hidden,
        )))
    }

    /// Mean cross-entropy over a batch and its analytic gradient.
    pub fn batch_gradients(&self, batch: &[TrainItem<'_>]) -> Result<(f64, MlpGrads)> {
        let mut grads = MlpGrads::zeros_like(self);
        let mut loss = 0.0;
        if batch.is_empty() {
            return Ok((loss, grads));
        }
        let scale = 1.0 / batch.len() as f64;
        for item in batch {
            let hidden = hidden_activation(&self.w_in, &self.b_in, item.features)?;
            let probs = output_distribution(&self.w_out, &self.b_out, &hidden);
            loss -= probs[item.label].ln() * scale;
            backprop_head(
                &self.w_out,
                &hidden,
                &probs,
                item,
                scale,
                &mut grads.w_out,
                &mut grads.b_out,
                &mut grads.w_in,
                &mut grads.b_in,
            );
        }
        Ok((loss, grads))
    }
}

/// Gradients shaped like an [`MlpNet`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w_in: Matrix,
    pub b_in: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl MlpGrads {
    fn zeros_like(net: &MlpNet) -> Self {
        MlpGrads {
            w_in: Matrix::zeros(net.w_in.rows(), net.w_in.cols()),
            b_in: vec![0.0; net.b_in.len()],
            w_out: Matrix::zeros(net.w_out.rows(), net.w_out.cols()),
            b_out: vec![0.0; net.b_out.len()],
        }
    }
}

/// Shared encoder with exactly three softmax output heads.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadNet {
    pub w_in: Matrix,
    pub b_in: Vec<f64>,
    pub heads: [Head; 3],
}

/// Output parameters of one head.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl MultiHeadNet {
    /// Fresh network with independently drawn heads. Draw order: `w_in`
    /// row-major, then each head's output matrix row-major.
    pub fn init(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        cfg: &TrainConfig,
    ) -> Self {
        Self::init_inner(input_dim, hidden_dim, num_classes, cfg, false)
    }

    /// Fresh network whose three heads start from identical parameters (one
    /// head is drawn and copied).
    pub fn init_tied_heads(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        cfg: &TrainConfig,
    ) -> Self {
        Self::init_inner(input_dim, hidden_dim, num_classes, cfg, true)
    }

    fn init_inner(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        cfg: &TrainConfig,
        tied: bool,
    ) -> Self {
        let mut rng = Rng::from_stream(cfg.seed, &[tags::WEIGHT_INIT]);
        let mut draw = |rows: usize, cols: usize| {
            let mut m = Matrix::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.uniform(-cfg.init_scale, cfg.init_scale);
            }
            m
        };
        let w_in = draw(input_dim, hidden_dim);
        let head = |w: Matrix| Head {
            w,
            b: vec![0.0; num_classes],
        };
        let heads = if tied {
            let h = head(draw(hidden_dim, num_classes));
            [h.clone(), h.clone(), h]
        } else {
            [
                head(draw(hidden_dim, num_classes)),
                head(draw(hidden_dim, num_classes)),
                head(draw(hidden_dim, num_classes)),
            ]
        };
        MultiHeadNet {
            w_in,
            b_in: vec![0.0; hidden_dim],
            heads,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b_in.len()
    }

    pub fn num_classes(&self) -> usize {
        self.heads[0].b.len()
    }

    /// Class distribution of head `head` (0-based) over the shared encoding.
    pub fn forward_head(&self, head: usize, x: &SparseVector) -> Result<Prediction> {
        let hidden = hidden_activation(&self.w_in, &self.b_in, x)?;
        let h = &self.heads[head];
        Ok(Prediction::from_probs(output_distribution(&h.w, &h.b, &hidden)))
    }

    /// Predictions of all three heads for one input (one encoder pass).
    pub fn forward_all(&self, x: &SparseVector) -> Result<[Prediction; 3]> {
        let hidden = hidden_activation(&self.w_in, &self.b_in, x)?;
        Ok(self.heads.each_ref().map(|h| {
            Prediction::from_probs(output_distribution(&h.w, &h.b, &hidden))
        }))
    }

    /// Joint loss: per-head mean cross-entropy summed over heads, plus
    /// `gamma * orth_loss(W₁, W₂)` between the first two heads' output
    /// matrices. Empty batches contribute zero to their head's term; all
    /// three empty is an error.
    pub fn loss(&self, batches: [&[TrainItem<'_>]; 3], gamma: f64) -> Result<f64> {
        if batches.iter().all(|b| b.is_empty()) {
            return Err(Error::InvalidData("all three head batches are empty".into()));
        }
        let mut total = 0.0;
        for (head, batch) in self.heads.iter().zip(batches) {
            if batch.is_empty() {
                continue;
            }
            let scale = 1.0 / batch.len() as f64;
            for item in batch {
                let hidden = hidden_activation(&self.w_in, &self.b_in, item.features)?;
                let probs = output_distribution(&head.w, &head.b, &hidden);
                total -= probs[item.label].ln() * scale;
            }
        }
        total += gamma * orth_loss(&self.heads[0].w, &self.heads[1].w)?;
        Ok(total)
    }

    /// Analytic gradient of [`MultiHeadNet::loss`] with respect to every
    /// parameter. The orthogonality term contributes
    /// `2·gamma·W₂(W₂ᵀW₁)` to head 1's output matrix and symmetrically to
    /// head 2's; head 3 and the biases receive only cross-entropy gradient.
    pub fn gradients(
        &self,
        batches: [&[TrainItem<'_>]; 3],
        gamma: f64,
    ) -> Result<(f64, MultiHeadGrads)> {
        if batches.iter().all(|b| b.is_empty()) {
            return Err(Error::InvalidData("all three head batches are empty".into()));
        }
        let mut grads = MultiHeadGrads::zeros_like(self);
        let mut loss = 0.0;
        for i in 0..3 {
            let batch = batches[i];
            if batch.is_empty() {
                continue;
            }
            let scale = 1.0 / batch.len() as f64;
            for item in batch {
                let hidden = hidden_activation(&self.w_in, &self.b_in, item.features)?;
                let probs = output_distribution(&self.heads[i].w, &self.heads[i].b, &hidden);
                loss -= probs[item.label].ln() * scale;
                backprop_head(
                    &self.heads[i].w,
                    &hidden,
                    &probs,
                    item,
                    scale,
                    &mut grads.heads[i].w,
                    &mut grads.heads[i].b,
                    &mut grads.w_in,
                    &mut grads.b_in,
                );
            }
        }

        if gamma != 0.0 {
            loss += gamma * orth_loss(&self.heads[0].w, &self.heads[1].w)?;
            let w1 = &self.heads[0].w;
            let w2 = &self.heads[1].w;
            let hidden = w1.rows();
            let classes = w1.cols();
            // a = W₁ᵀW₂ (classes × classes)
            let mut a = Matrix::zeros(classes, classes);
            for c1 in 0..classes {
                for c2 in 0..classes {
                    let mut s = 0.0;
                    for h in 0..hidden {
                        s += w1.at(h, c1) * w2.at(h, c2);
                    }
                    *a.at_mut(c1, c2) = s;
                }
            }
            // dW₁ += 2γ W₂Aᵀ, dW₂ += 2γ W₁A
            for h in 0..hidden {
                for c in 0..classes {
                    let mut g1 = 0.0;
                    let mut g2 = 0.0;
                    for k in 0..classes {
                        g1 += w2.at(h, k) * a.at(c, k);
                        g2 += w1.at(h, k) * a.at(k, c);
                    }
                    *grads.heads[0].w.at_mut(h, c) += 2.0 * gamma * g1;
                    *grads.heads[1].w.at_mut(h, c) += 2.0 * gamma * g2;
                }
            }
        }
        Ok((loss, grads))
    }
}

/// Gradients shaped like a [`MultiHeadNet`].
#[derive(Debug, Clone)]
pub struct MultiHeadGrads {
    pub w_in: Matrix,
    pub b_in: Vec<f64>,
    pub heads: [HeadGrads; 3],
}

#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl MultiHeadGrads {
    fn zeros_like(net: &MultiHeadNet) -> Self {
        let head = |h: &Head| HeadGrads {
            w: Matrix::zeros(h.w.rows(), h.w.cols()),
            b: vec![0.0; h.b.len()],
        };
        MultiHeadGrads {
            w_in: Matrix::zeros(net.w_in.rows(), net.w_in.cols()),
            b_in: vec![0.0; net.b_in.len()],
            heads: [head(&net.heads[0]), head(&net.heads[1]), head(&net.heads[2])],
        }
    }
}

/// Shared softmax-cross-entropy backprop for one example through one output
/// head and the sigmoid encoder. `scale` is the example's weight in its
/// batch mean.
#[allow(clippy::too_many_arguments)]
fn backprop_head(
    w_out: &Matrix,
    hidden: &[f64],
    probs: &[f64],
    item: &TrainItem<'_>,
    scale: f64,
    gw_out: &mut Matrix,
    gb_out: &mut [f64],
    gw_in: &mut Matrix,
    gb_in: &mut [f64],
) {
    // dlogits = (probs - onehot) * scale
    let dlogits: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(c, &p)| (p - if c == item.label { 1.0 } else { 0.0 }) * scale)
        .collect();

    for (hj, &h) in hidden.iter().enumerate() {
        for (g, &d) in gw_out.row_mut(hj).iter_mut().zip(&dlogits) {
            *g += h * d;
        }
    }
    for (g, &d) in gb_out.iter_mut().zip(&dlogits) {
        *g += d;
    }

    // dz = (W_out · dlogits) ⊙ h ⊙ (1 - h)
    let dz: Vec<f64> = hidden
        .iter()
        .enumerate()
        .map(|(hj, &h)| {
            let dh: f64 = w_out.row(hj).iter().zip(&dlogits).map(|(&w, &d)| w * d).sum();
            dh * h * (1.0 - h)
        })
        .collect();

    for &(idx, xw) in item.features.entries() {
        for (g, &d) in gw_in.row_mut(idx).iter_mut().zip(&dz) {
            *g += xw * d;
        }
    }
    for (g, &d) in gb_in.iter_mut().zip(&dz) {
        *g += d;
    }
}

/// Squared Frobenius norm of `W_aᵀ W_b`. Zero exactly when every column of
/// `W_a` is orthogonal to every column of `W_b`.
pub fn orth_loss(w_a: &Matrix, w_b: &Matrix) -> Result<f64> {
    if w_a.rows() != w_b.rows() || w_a.cols() != w_b.cols() {
        return Err(Error::Shape {
            what: "orthogonality penalty operands".into(),
            expected: w_a.rows() * w_a.cols(),
            got: w_b.rows() * w_b.cols(),
        });
    }
    let mut total = 0.0;
    for c1 in 0..w_a.cols() {
        for c2 in 0..w_b.cols() {
            let mut dot = 0.0;
            for r in 0..w_a.rows() {
                dot += w_a.at(r, c1) * w_b.at(r, c2);
            }
            total += dot * dot;
        }
    }
    Ok(total)
}

/// Combine exactly three predictions: the label backed by at least two
/// argmaxes wins; a three-way disagreement falls to the class with the
/// highest probability summed across the three distributions (exact ties to
/// the lowest class index). The returned distribution is the elementwise
/// mean.
pub fn majority_vote(preds: &[Prediction; 3]) -> Prediction {
    let n = preds[0].probs.len();
    let mean: Vec<f64> = (0..n)
        .map(|c| preds.iter().map(|p| p.probs[c]).sum::<f64>() / 3.0)
        .collect();

    let votes = [preds[0].predicted, preds[1].predicted, preds[2].predicted];
    let winner = votes
        .iter()
        .find(|&&v| votes.iter().filter(|&&o| o == v).count() >= 2)
        .copied();
    let predicted = winner.unwrap_or_else(|| {
        // Three-way split: highest summed probability, lowest index on ties.
        let mut best = 0;
        for c in 1..n {
            if mean[c] > mean[best] {
                best = c;
            }
        }
        best
    });
    Prediction {
        probs: mean,
        predicted,
    }
}
