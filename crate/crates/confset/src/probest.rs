//! Class-probability estimators: the exact mixture posterior, k-nearest-
//! neighbor frequencies, and multinomial softmax regression.
//!
//! Fitted models are immutable; `predict` is pure, returns scores clipped to
//! `[0, 1]`, and may be called from any thread.

use serde::{Deserialize, Serialize};

use crate::distgen::{MixtureSpec, Population};
use crate::types::{LabeledDataset, Matrix, ScoreMatrix};
use crate::{Error, Result};

/// Exact identity-covariance, uniform-prior mixture posterior:
/// `softmax_k(-|x - mu_k|^2 / 2)`, computed with max subtraction so no
/// intermediate exponential overflows or underflows.
pub fn mixture_posterior(x: &[f64], spec: &MixtureSpec) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.k() as usize];
    mixture_posterior_into(x, spec, &mut out)?;
    Ok(out)
}

pub fn mixture_posterior_into(x: &[f64], spec: &MixtureSpec, out: &mut [f64]) -> Result<()> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: x.len(),
        });
    }
    for (col, v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteFeature { row: 0, col });
        }
    }
    debug_assert_eq!(out.len(), spec.k() as usize);
    let mut max = f64::NEG_INFINITY;
    for k in 0..spec.k() {
        let mu = spec.mean(k + 1);
        let sq_dist: f64 = x
            .iter()
            .zip(mu)
            .map(|(xi, mi)| (xi - mi) * (xi - mi))
            .sum();
        let logit = -0.5 * sq_dist;
        out[k as usize] = logit;
        max = max.max(logit);
    }
    let mut sum = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

/// Softmax-regression hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxHyper {
    /// L2 penalty on the non-bias weights.
    pub l2: f64,
    /// Full-batch gradient-descent iterations.
    pub iters: usize,
    /// Step size applied to the 1/n-averaged gradient.
    pub step: f64,
}

impl Default for SoftmaxHyper {
    fn default() -> Self {
        SoftmaxHyper {
            l2: 1e-3,
            iters: 2000,
            step: 0.5,
        }
    }
}

/// A fitted class-probability model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbModel {
    /// The exact posterior of a known distribution.
    OraclePosterior { dist: Population },
    /// k-nearest-neighbor label frequencies; training data stored inline.
    Knn {
        features: Matrix,
        labels: Vec<u32>,
        k_neighbors: usize,
        k_classes: u32,
    },
    /// Multinomial logistic model; `weights` is `K x (d + 1)` row-major with
    /// the bias in the last column.
    Softmax {
        weights: Matrix,
        k_classes: u32,
    },
}

impl ProbModel {
    pub fn oracle(dist: Population) -> ProbModel {
        ProbModel::OraclePosterior { dist }
    }

    pub fn k_classes(&self) -> u32 {
        match self {
            ProbModel::OraclePosterior { dist } => dist.k(),
            ProbModel::Knn { k_classes, .. } => *k_classes,
            ProbModel::Softmax { k_classes, .. } => *k_classes,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProbModel::OraclePosterior { dist } => dist.dim(),
            ProbModel::Knn { features, .. } => features.cols(),
            ProbModel::Softmax { weights, .. } => weights.cols() - 1,
        }
    }

    /// Length-`K` score vector at `x`, clipped to `[0, 1]`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k_classes() as usize];
        self.predict_into(x, &mut out)?;
        Ok(out)
    }

    pub fn predict_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        match self {
            ProbModel::OraclePosterior { dist } => dist.posterior_into(x, out)?,
            ProbModel::Knn {
                features,
                labels,
                k_neighbors,
                ..
            } => knn_predict_into(features, labels, *k_neighbors, x, out),
            ProbModel::Softmax { weights, .. } => softmax_predict_into(weights, x, out),
        }
        for v in out.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(())
    }

    /// Clipped scores for a whole feature batch.
    pub fn score_matrix(&self, features: &Matrix) -> Result<ScoreMatrix> {
        let k = self.k_classes() as usize;
        let m = features.rows();
        let mut data = vec![0.0; m * k];
        for (i, row) in features.iter_rows().enumerate() {
            self.predict_into(row, &mut data[i * k..(i + 1) * k])?;
        }
        ScoreMatrix::new(Matrix::from_rows(data, m, k)?)
    }
}

/// Default neighbor count: `ceil(sqrt(n))`.
pub fn default_knn_neighbors(n: usize) -> usize {
    (n as f64).sqrt().ceil() as usize
}

/// Fit a k-nearest-neighbor frequency model. Distance ties break by training
/// index order.
pub fn fit_knn(train: &LabeledDataset, k_neighbors: usize) -> Result<ProbModel> {
    if k_neighbors == 0 || k_neighbors > train.n() {
        return Err(Error::param(
            "k_neighbors",
            format!("need 1 <= k <= n = {}, got {k_neighbors}", train.n()),
        ));
    }
    Ok(ProbModel::Knn {
        features: train.features.clone(),
        labels: train.labels.clone(),
        k_neighbors,
        k_classes: train.label_space().k(),
    })
}

fn knn_predict_into(
    features: &Matrix,
    labels: &[u32],
    k_neighbors: usize,
    x: &[f64],
    out: &mut [f64],
) {
    let mut order: Vec<(f64, usize)> = features
        .iter_rows()
        .enumerate()
        .map(|(idx, row)| {
            let d: f64 = row
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, idx)
        })
        .collect();
    order.select_nth_unstable_by(k_neighbors - 1, |a, b| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    });
    out.fill(0.0);
    let weight = 1.0 / k_neighbors as f64;
    for &(_, idx) in &order[..k_neighbors] {
        out[(labels[idx] - 1) as usize] += weight;
    }
}

/// Fit multinomial softmax regression by full-batch gradient descent on the
/// L2-regularized cross-entropy, from zero-initialized weights. Deterministic
/// in the data ordering and hyperparameters.
pub fn fit_softmax(train: &LabeledDataset, hyper: SoftmaxHyper) -> Result<ProbModel> {
    if hyper.step <= 0.0 {
        return Err(Error::param("step", "need a positive step size"));
    }
    if hyper.l2 < 0.0 {
        return Err(Error::param("l2", "need a nonnegative penalty"));
    }
    let k = train.label_space().k() as usize;
    if train.n() < k {
        log::warn!(
            "softmax regression on n = {} rows with K = {k} classes; fit may be degenerate",
            train.n()
        );
    }
    let d = train.dim();
    let mut weights = Matrix::zeros(k, d + 1);
    let mut grad = vec![0.0; k * (d + 1)];
    for _ in 0..hyper.iters {
        softmax_loss_gradient(&weights, train, hyper.l2, &mut grad);
        let w = weights.values().len();
        for idx in 0..w {
            let row = idx / (d + 1);
            weights.row_mut(row)[idx % (d + 1)] -= hyper.step * grad[idx];
        }
    }
    Ok(ProbModel::Softmax {
        weights,
        k_classes: k as u32,
    })
}

/// L2-regularized mean cross-entropy of the softmax model on `train`.
///
/// `loss(W) = -(1/n) sum_i log softmax(W [x_i; 1])_{y_i} + l2 * |W_{:, :d}|^2`
/// (the bias column is not penalized).
pub fn softmax_loss(weights: &Matrix, train: &LabeledDataset, l2: f64) -> f64 {
    let k = weights.rows();
    let d = weights.cols() - 1;
    let n = train.n();
    let mut probs = vec![0.0; k];
    let mut loss = 0.0;
    for (i, x) in train.features.iter_rows().enumerate() {
        softmax_predict_into(weights, x, &mut probs);
        let y = (train.labels[i] - 1) as usize;
        loss -= probs[y].max(f64::MIN_POSITIVE).ln();
    }
    loss /= n as f64;
    for row in 0..k {
        for col in 0..d {
            let w = weights.get(row, col);
            loss += l2 * w * w;
        }
    }
    loss
}

/// Analytic gradient of [`softmax_loss`], written into `grad` (row-major
/// `K x (d + 1)`).
pub fn softmax_loss_gradient(
    weights: &Matrix,
    train: &LabeledDataset,
    l2: f64,
    grad: &mut [f64],
) {
    let k = weights.rows();
    let d = weights.cols() - 1;
    let n = train.n();
    grad.fill(0.0);
    let mut probs = vec![0.0; k];
    for (i, x) in train.features.iter_rows().enumerate() {
        softmax_predict_into(weights, x, &mut probs);
        let y = (train.labels[i] - 1) as usize;
        for class in 0..k {
            let residual = probs[class] - if class == y { 1.0 } else { 0.0 };
            let row = &mut grad[class * (d + 1)..(class + 1) * (d + 1)];
            for (col, xv) in x.iter().enumerate() {
                row[col] += residual * xv;
            }
            row[d] += residual;
        }
    }
    let scale = 1.0 / n as f64;
    for (idx, g) in grad.iter_mut().enumerate() {
        *g *= scale;
        let col = idx % (d + 1);
        if col < d {
            *g += 2.0 * l2 * weights.get(idx / (d + 1), col);
        }
    }
}

fn softmax_predict_into(weights: &Matrix, x: &[f64], out: &mut [f64]) {
    let d = weights.cols() - 1;
    let mut max = f64::NEG_INFINITY;
    for (class, logit) in out.iter_mut().enumerate() {
        let row = weights.row(class);
        let mut z = row[d];
        for (w, xv) in row[..d].iter().zip(x) {
            z += w * xv;
        }
        *logit = z;
        max = max.max(z);
    }
    let mut sum = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
}
