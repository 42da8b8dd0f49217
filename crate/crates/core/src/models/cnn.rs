use std::cmp::Ordering;

use super::layers::{
    conv2d_backward_acc, conv2d_forward, dense_backward_acc, dense_forward, maxpool2x2_backward,
    maxpool2x2_forward, relu_backward, relu_forward, sigmoid, sigmoid_backward, sigmoid_forward, Conv2d, Dense,
    PoolMask,
};
use super::loss::bce_loss;
use super::optim::{rmsprop_step, RmspropState};
use super::{TrainConfig, TrainHistory};
use crate::augment::augment_batch;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

const INIT_STREAM: u64 = 0x1417;
const SHUFFLE_STREAM: u64 = 0x5401;
const AUGMENT_STREAM: u64 = 0xA116;

/// Channel widths of the five convolution blocks.
const REFERENCE_CHANNELS: [usize; 5] = [32, 32, 64, 64, 128];
const REFERENCE_HIDDEN: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    MaxPool2x2,
    Relu,
    Flatten,
    Dense(Dense),
    Sigmoid,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv2d(c) => c.param_count(),
            Layer::Dense(d) => d.param_count(),
            _ => 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::MaxPool2x2 => "maxpool2x2",
            Layer::Relu => "relu",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
            Layer::Sigmoid => "sigmoid",
        }
    }

    fn forward(&self, x: &Tensor) -> Result<(Tensor, Option<PoolMask>)> {
        Ok(match self {
            Layer::Conv2d(c) => (conv2d_forward(x, c)?, None),
            Layer::MaxPool2x2 => {
                let (y, mask) = maxpool2x2_forward(x)?;
                (y, Some(mask))
            }
            Layer::Relu => (relu_forward(x), None),
            Layer::Flatten => (x.clone().reshape(&[x.len()])?, None),
            Layer::Dense(d) => (dense_forward(x, d)?, None),
            Layer::Sigmoid => (sigmoid_forward(x), None),
        })
    }
}

/// Feed-forward stack of layers operating on one `[c, h, w]` sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CnnModel {
    layers: Vec<Layer>,
}

/// Summed weight and bias element counts.
pub fn param_count(model: &CnnModel) -> usize {
    model.layers.iter().map(Layer::param_count).sum()
}

/// Five `[conv 3×3 → ReLU → max-pool 2×2]` blocks with 32, 32, 64, 64, 128
/// channels, then flatten → dense 128 → ReLU → dense 1 → sigmoid.
///
/// Parameters are zero; call [`CnnModel::initialize`] before training.
/// For a 64×64 input this has 204,641 trainable parameters.
pub fn reference_cnn(side: usize) -> Result<CnnModel> {
    if side == 0 || !side.is_multiple_of(32) {
        return Err(Error::Argument(format!(
            "input side {side} must be a positive multiple of 32"
        )));
    }
    let mut layers = Vec::new();
    let mut in_ch = 1;
    for &out_ch in &REFERENCE_CHANNELS {
        layers.push(Layer::Conv2d(Conv2d::new(in_ch, out_ch)));
        layers.push(Layer::Relu);
        layers.push(Layer::MaxPool2x2);
        in_ch = out_ch;
    }
    let final_side = side / 32;
    layers.push(Layer::Flatten);
    layers.push(Layer::Dense(Dense::new(final_side * final_side * in_ch, REFERENCE_HIDDEN)));
    layers.push(Layer::Relu);
    layers.push(Layer::Dense(Dense::new(REFERENCE_HIDDEN, 1)));
    layers.push(Layer::Sigmoid);
    Ok(CnnModel { layers })
}

struct Trace {
    inputs: Vec<Tensor>,
    masks: Vec<Option<PoolMask>>,
}

impl CnnModel {
    pub fn new(layers: Vec<Layer>) -> Self {
        CnnModel { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        param_count(self)
    }

    /// Glorot-uniform weights from a seeded stream, zero biases.
    pub fn initialize(&mut self, seed: u64) -> Result<()> {
        let mut rng = Rng::derive(seed, &[INIT_STREAM]);
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(c) => c.init(&mut rng)?,
                Layer::Dense(d) => d.init(&mut rng)?,
                _ => {}
            }
        }
        Ok(())
    }

    /// Parameter groups in layer order: weights then bias of each trainable layer.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv2d(c) => out.extend([c.weights.data(), c.bias.data()]),
                Layer::Dense(d) => out.extend([d.weights.data(), d.bias.data()]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(c) => out.extend([c.weights.data_mut(), c.bias.data_mut()]),
                Layer::Dense(d) => out.extend([d.weights.data_mut(), d.bias.data_mut()]),
                _ => {}
            }
        }
        out
    }

    /// Zeroed gradient buffers shaped like [`CnnModel::params`].
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|p| vec![0.0; p.len()]).collect()
    }

    /// Full forward pass of one sample.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut act = x.clone();
        for layer in &self.layers {
            act = layer.forward(&act)?.0;
        }
        Ok(act)
    }

    fn forward_trace(&self, x: &Tensor, upto: usize) -> Result<(Tensor, Trace)> {
        let mut trace = Trace {
            inputs: Vec::with_capacity(upto),
            masks: Vec::with_capacity(upto),
        };
        let mut act = x.clone();
        for layer in &self.layers[..upto] {
            let (next, mask) = layer.forward(&act)?;
            trace.inputs.push(act);
            trace.masks.push(mask);
            act = next;
        }
        Ok((act, trace))
    }

    fn backward(&self, trace: &Trace, upto: usize, grad_out: Tensor, grads: &mut [Vec<f64>]) -> Result<()> {
        let mut group = self.layers[..upto].iter().filter(|l| l.param_count() > 0).count() * 2;
        let mut g = grad_out;
        for k in (0..upto).rev() {
            let x = &trace.inputs[k];
            // the network input needs no gradient
            let need_x = k > 0;
            g = match &self.layers[k] {
                Layer::Conv2d(c) => {
                    group -= 2;
                    let (gw, rest) = grads[group..].split_at_mut(1);
                    let gx = conv2d_backward_acc(x, c, &g, need_x, &mut gw[0], &mut rest[0])?;
                    match gx {
                        Some(gx) => gx,
                        None => break,
                    }
                }
                Layer::Dense(d) => {
                    group -= 2;
                    let (gw, rest) = grads[group..].split_at_mut(1);
                    dense_backward_acc(x, d, &g, &mut gw[0], &mut rest[0])?
                }
                Layer::MaxPool2x2 => {
                    maxpool2x2_backward(trace.masks[k].as_ref().expect("pool mask recorded"), &g)?
                }
                Layer::Relu => relu_backward(x, &g)?,
                Layer::Flatten => g.reshape(x.shape())?,
                Layer::Sigmoid => sigmoid_backward(&sigmoid_forward(x), &g)?,
            };
        }
        Ok(())
    }

    /// Binary cross-entropy of one sample against target `y` ∈ {0, 1};
    /// parameter gradients are added into `grads`.
    ///
    /// The model must end in a sigmoid. The gradient enters at the logit as
    /// `p − y`, the exact derivative of the composed sigmoid + BCE.
    /// Returns `(loss, p)`.
    pub fn loss_and_grad(&self, x: &Tensor, y: f64, grads: &mut [Vec<f64>]) -> Result<(f64, f64)> {
        let upto = self.logit_layers()?;
        if grads.len() != self.params().len() {
            return Err(Error::Dimension("gradient buffers do not match the model".into()));
        }
        let (z, trace) = self.forward_trace(x, upto)?;
        if z.len() != 1 {
            return Err(Error::Dimension(format!(
                "network must emit a single logit, got shape {:?}",
                z.shape()
            )));
        }
        let p = sigmoid(z.data()[0]);
        let loss = bce_loss(p, y);
        let dz = Tensor::from_vec(z.shape(), vec![p - y])?;
        self.backward(&trace, upto, dz, grads)?;
        Ok((loss, p))
    }

    /// BCE loss only; same value `loss_and_grad` reports.
    pub fn loss(&self, x: &Tensor, y: f64) -> Result<f64> {
        let p = self.probability(x)?;
        Ok(bce_loss(p, y))
    }

    fn logit_layers(&self) -> Result<usize> {
        match self.layers.last() {
            Some(Layer::Sigmoid) => Ok(self.layers.len() - 1),
            _ => Err(Error::Argument("binary network must end with a sigmoid".into())),
        }
    }

    /// Probability of class 1 for one `[c, h, w]` sample.
    pub fn probability(&self, x: &Tensor) -> Result<f64> {
        let out = self.forward(x)?;
        if out.len() != 1 {
            return Err(Error::Dimension(format!(
                "network must emit a single probability, got shape {:?}",
                out.shape()
            )));
        }
        Ok(out.data()[0])
    }

    /// Class-1 probability for each image of an `[n, h, w]` batch.
    pub fn predict_proba(&self, images: &Tensor) -> Result<Vec<f64>> {
        let &[n, h, w] = images.shape() else {
            return Err(Error::Dimension(format!(
                "expected [n, h, w] images, got {:?}",
                images.shape()
            )));
        };
        (0..n)
            .map(|i| self.probability(&Tensor::from_vec(&[1, h, w], images.row(i).to_vec())?))
            .collect()
    }
}

fn sample(ds: &LabeledDataset, images: &Tensor, i: usize) -> Tensor {
    Tensor::from_vec(&[1, ds.height(), ds.width()], images.row(i).to_vec()).expect("shape is consistent")
}

/// Mean BCE, accuracy (class 1 when p > 0.5), and per-image probabilities.
pub fn evaluate_cnn(model: &CnnModel, ds: &LabeledDataset) -> Result<(f64, f64, Vec<f64>)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    let probs = model.predict_proba(ds.images())?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (&p, &l) in probs.iter().zip(ds.labels()) {
        loss += bce_loss(p, l as f64);
        correct += usize::from((p > 0.5) == (l == 1));
    }
    let n = ds.len() as f64;
    Ok((loss / n, correct as f64 / n, probs))
}

/// Indices sorted by label, then by pixel content, so training does not
/// depend on the order rows arrive in.
fn canonical_order(ds: &LabeledDataset) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.sort_by(|&a, &b| {
        ds.labels()[a].cmp(&ds.labels()[b]).then_with(|| {
            ds.image(a)
                .iter()
                .zip(ds.image(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    idx
}

fn check_binary(ds: &LabeledDataset, role: &str) -> Result<()> {
    if ds.n_classes() != 2 {
        return Err(Error::Argument(format!(
            "{role} set has {} classes; the network is a binary classifier",
            ds.n_classes()
        )));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset(format!("{role} set is empty")));
    }
    Ok(())
}

/// Train the reference network on a two-class dataset.
///
/// Weights are Glorot-initialized from `cfg.seed`. Returns the parameters of
/// the epoch with the lowest validation loss together with the full history.
pub fn cnn_train(
    train: &LabeledDataset,
    val: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(CnnModel, TrainHistory)> {
    check_binary(train, "training")?;
    check_binary(val, "validation")?;
    if train.height() != train.width() {
        return Err(Error::Argument(format!(
            "images must be square, got {}x{}",
            train.height(),
            train.width()
        )));
    }
    let mut model = reference_cnn(train.height())?;
    model.initialize(cfg.seed)?;
    train_binary_cnn(model, train, val, cfg)
}

/// Mini-batch RMSProp training of an already-initialized binary network.
///
/// Each epoch augments the training images with fresh draws, visits them in
/// a seeded shuffled order and records the running training loss/accuracy
/// and the (never augmented) validation loss/accuracy. Per-batch gradients
/// are summed in sample order.
pub fn train_binary_cnn(
    mut model: CnnModel,
    train: &LabeledDataset,
    val: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(CnnModel, TrainHistory)> {
    cfg.validate()?;
    check_binary(train, "training")?;
    check_binary(val, "validation")?;
    if (train.height(), train.width()) != (val.height(), val.width()) {
        return Err(Error::Dimension("training and validation image sizes differ".into()));
    }
    let train = train.subset(&canonical_order(train));
    let augment_seed = Rng::derive(cfg.seed, &[AUGMENT_STREAM]).next_u64();
    let mut history = TrainHistory::default();
    let mut best = (f64::INFINITY, model.clone());
    let mut state = RmspropState::new(model.params().iter().map(|p| p.len()));
    let n = train.len();

    for epoch in 0..cfg.epochs {
        let images = augment_batch(train.images(), &cfg.augment_policy, augment_seed, epoch as u64)?;
        let mut order: Vec<usize> = (0..n).collect();
        Rng::derive(cfg.seed, &[SHUFFLE_STREAM, epoch as u64]).shuffle(&mut order);

        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zero_grads();
            for &i in batch {
                let y = train.labels()[i] as f64;
                let (loss, p) = model.loss_and_grad(&sample(&train, &images, i), y, &mut grads)?;
                epoch_loss += loss;
                correct += usize::from((p > 0.5) == (y == 1.0));
            }
            let scale = 1.0 / batch.len() as f64;
            let weight_groups: Vec<bool> = (0..grads.len()).map(|g| g % 2 == 0).collect();
            {
                let params = model.params();
                for ((g, p), &is_weight) in grads.iter_mut().zip(&params).zip(&weight_groups) {
                    for (gv, &pv) in g.iter_mut().zip(p.iter()) {
                        *gv *= scale;
                        if is_weight {
                            *gv += cfg.l2 * pv;
                        }
                    }
                }
            }
            let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            rmsprop_step(&mut model.params_mut(), &grad_refs, &mut state, cfg)?;
        }

        let (val_loss, val_acc, _) = evaluate_cnn(&model, val)?;
        history.push(epoch_loss / n as f64, correct as f64 / n as f64, val_loss, val_acc);
        if val_loss < best.0 {
            best = (val_loss, model.clone());
        }
    }
    let model = if history.is_empty() { model } else { best.1 };
    Ok((model, history))
}
