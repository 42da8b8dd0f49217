use super::loss::{cross_entropy, softmax_rows};
use super::{TrainConfig, TrainHistory};
use crate::augment::augment_batch;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

const AUGMENT_STREAM: u64 = 0xA116;

/// Softmax regression over flattened pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct MlrModel {
    /// `[C, D]`.
    pub w: Tensor,
    /// `[C]`.
    pub b: Tensor,
    pub class_names: Vec<String>,
}

/// Gradients of the training objective with respect to `w` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlrGradient {
    pub w: Tensor,
    pub b: Tensor,
}

impl MlrModel {
    pub fn zeros(features: usize, class_names: Vec<String>) -> Result<Self> {
        let c = class_names.len();
        Self::from_params(Tensor::zeros(&[c, features]), Tensor::zeros(&[c]), class_names)
    }

    pub fn from_params(w: Tensor, b: Tensor, class_names: Vec<String>) -> Result<Self> {
        let [c, _] = w.dims2()?;
        if c < 2 {
            return Err(Error::Argument(format!("a classifier needs at least 2 classes, got {c}")));
        }
        if b.shape() != [c] || class_names.len() != c {
            return Err(Error::Dimension(format!(
                "{c} weight rows, bias {:?}, {} class names",
                b.shape(),
                class_names.len()
            )));
        }
        if !w.is_finite() || !b.is_finite() {
            return Err(Error::Argument("non-finite parameters".into()));
        }
        Ok(MlrModel { w, b, class_names })
    }

    pub fn n_classes(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn n_features(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// `X Wᵀ + b` for an `[n, D]` feature matrix.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let [n, d] = x.dims2()?;
        if d != self.n_features() {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {d}",
                self.n_features()
            )));
        }
        let c = self.n_classes();
        let mut z = vec![0.0; n * c];
        for i in 0..n {
            let xi = x.row(i);
            for k in 0..c {
                let wk = self.w.row(k);
                let mut acc = self.b.data()[k];
                for (a, b) in wk.iter().zip(xi) {
                    acc += a * b;
                }
                z[i * c + k] = acc;
            }
        }
        Tensor::from_vec(&[n, c], z)
    }

    /// Class posteriors `[n, C]` for `[n, D]` features or `[n, h, w]` images.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        Ok(softmax_rows(&self.logits(&flatten(x)?)?))
    }

    /// Mean cross-entropy plus `(l2/2)·‖W‖²` and its exact gradient
    /// `(P − Y)ᵀX/n + l2·W`.
    pub fn loss_and_grad(&self, x: &Tensor, labels: &[usize], l2: f64) -> Result<(f64, MlrGradient)> {
        let (loss, _, grad) = self.pass(&flatten(x)?, labels, l2)?;
        Ok((loss, grad))
    }

    // objective, training accuracy and gradient in one sweep
    fn pass(&self, x: &Tensor, labels: &[usize], l2: f64) -> Result<(f64, f64, MlrGradient)> {
        let [n, d] = x.dims2()?;
        if labels.len() != n {
            return Err(Error::Dimension(format!("{n} rows but {} labels", labels.len())));
        }
        if n == 0 {
            return Err(Error::EmptyDataset("no training rows".into()));
        }
        let c = self.n_classes();
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Argument(format!("label {bad} out of range for {c} classes")));
        }
        let probs = softmax_rows(&self.logits(x)?);
        let penalty: f64 = self.w.data().iter().map(|v| v * v).sum::<f64>() * l2 / 2.0;
        let loss = cross_entropy(&probs, labels) + penalty;
        let acc = accuracy_of(&probs, labels);

        let mut gw = vec![0.0; c * d];
        let mut gb = vec![0.0; c];
        let inv_n = 1.0 / n as f64;
        for i in 0..n {
            let xi = x.row(i);
            for k in 0..c {
                let delta = (probs.data()[i * c + k] - f64::from(u8::from(labels[i] == k))) * inv_n;
                gb[k] += delta;
                for (g, &v) in gw[k * d..(k + 1) * d].iter_mut().zip(xi) {
                    *g += delta * v;
                }
            }
        }
        for (g, &w) in gw.iter_mut().zip(self.w.data()) {
            *g += l2 * w;
        }
        let grad = MlrGradient {
            w: Tensor::from_vec(&[c, d], gw)?,
            b: Tensor::from_vec(&[c], gb)?,
        };
        Ok((loss, acc, grad))
    }
}

fn flatten(x: &Tensor) -> Result<Tensor> {
    match *x.shape() {
        [_, _] => Ok(x.clone()),
        [n, h, w] => x.clone().reshape(&[n, h * w]),
        _ => Err(Error::Dimension(format!(
            "expected [n, D] or [n, h, w] input, got {:?}",
            x.shape()
        ))),
    }
}

fn accuracy_of(probs: &Tensor, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let c = probs.row_len();
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| argmax(&probs.data()[i * c..(i + 1) * c]) == l)
        .count();
    correct as f64 / labels.len() as f64
}

/// Index of the largest value; the first one on ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Full-batch gradient descent from a zero model.
///
/// History rows hold the training objective measured before each update and
/// the validation cross-entropy after it. The final model is returned.
pub fn mlr_train(
    train: &LabeledDataset,
    val: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(MlrModel, TrainHistory)> {
    cfg.validate()?;
    let present = train.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Argument(format!(
            "training set must contain at least 2 classes, found {present}"
        )));
    }
    if val.is_empty() {
        return Err(Error::EmptyDataset("validation set is empty".into()));
    }
    if (train.height(), train.width()) != (val.height(), val.width()) || train.class_names() != val.class_names() {
        return Err(Error::Dimension(
            "training and validation sets differ in image size or class table".into(),
        ));
    }
    let features = train.height() * train.width();
    let mut model = MlrModel::zeros(features, train.class_names().to_vec())?;
    let val_x = val.flat_features();
    let augment_seed = Rng::derive(cfg.seed, &[AUGMENT_STREAM]).next_u64();
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let images = augment_batch(train.images(), &cfg.augment_policy, augment_seed, epoch as u64)?;
        let x = flatten(&images)?;
        let (loss, acc, grad) = model.pass(&x, train.labels(), cfg.l2)?;
        for (p, g) in model.w.data_mut().iter_mut().zip(grad.w.data()) {
            *p -= cfg.learning_rate * g;
        }
        for (p, g) in model.b.data_mut().iter_mut().zip(grad.b.data()) {
            *p -= cfg.learning_rate * g;
        }
        let val_probs = model.predict_proba(&val_x)?;
        history.push(
            loss,
            acc,
            cross_entropy(&val_probs, val.labels()),
            accuracy_of(&val_probs, val.labels()),
        );
    }
    Ok((model, history))
}
