//! Classifiers: multinomial logistic regression and a binary convolutional
//! network with hand-written forward/backward passes, trained with RMSProp.

mod cnn;
mod gmd;
pub mod layers;
mod loss;
mod mlr;
mod optim;

pub use cnn::{cnn_train, evaluate_cnn, param_count, reference_cnn, train_binary_cnn, CnnModel, Layer};
pub use gmd::{read_gmd, read_gmd_file, write_gmd, write_gmd_file, Model, GMD_MAGIC, GMD_VERSION};
pub use layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2x2_backward, maxpool2x2_forward,
    relu_backward, relu_forward, sigmoid, sigmoid_backward, sigmoid_forward, Conv2d, Dense, PoolMask,
};
pub use loss::{bce_loss, cross_entropy, softmax, softmax_rows};
pub use mlr::{mlr_train, MlrGradient, MlrModel};
pub use optim::{rmsprop_step, RmspropState};

use crate::augment::AugmentPolicy;
use crate::error::{Error, Result};

/// Optimization settings shared by both classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Mini-batch size (the logistic regression always uses the full batch).
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rmsprop_rho: f64,
    pub rmsprop_eps: f64,
    /// L2 penalty `(l2/2)·‖W‖²` on weights, not biases.
    pub l2: f64,
    pub seed: u64,
    pub augment_policy: AugmentPolicy,
}

impl TrainConfig {
    /// Batch 32, 30 epochs, RMSProp with lr 1e-4, ρ 0.9, ε 1e-8.
    pub fn cnn_default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-4,
            rmsprop_rho: 0.9,
            rmsprop_eps: 1e-8,
            l2: 0.0,
            seed: 0,
            augment_policy: AugmentPolicy::none(),
        }
    }

    /// Full-batch gradient descent, 500 epochs, lr 0.1, l2 1e-4.
    pub fn mlr_default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 0.1,
            l2: 1e-4,
            ..Self::cnn_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.rmsprop_rho > 0.0 && self.rmsprop_rho < 1.0) {
            return Err(Error::Argument(format!(
                "rmsprop rho must lie in (0, 1), got {}",
                self.rmsprop_rho
            )));
        }
        if !(self.rmsprop_eps > 0.0) {
            return Err(Error::Argument("rmsprop eps must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Argument("l2 must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be positive".into()));
        }
        self.augment_policy.validate()
    }
}

/// Per-epoch learning curves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
}

impl TrainHistory {
    pub fn push(&mut self, train_loss: f64, train_acc: f64, val_loss: f64, val_acc: f64) {
        self.train_loss.push(train_loss);
        self.train_acc.push(train_acc);
        self.val_loss.push(val_loss);
        self.val_acc.push(val_acc);
    }

    pub fn len(&self) -> usize {
        self.val_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.val_loss.is_empty()
    }

    /// `epoch,train_loss,train_acc,val_loss,val_acc`, one row per epoch
    /// (1-based), LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                self.train_loss[i],
                self.train_acc[i],
                self.val_loss[i],
                self.val_acc[i]
            ));
        }
        out
    }
}
