//! ROC curves, AUC, confusion matrices and overfitting detection.

use crate::error::{Error, Result};
use crate::models::TrainHistory;
use crate::numerics::Tensor;

/// Receiver operating characteristic: one point per distinct score, from
/// (0, 0) to (1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Score threshold reached at each point; the origin uses +∞.
    pub thresholds: Vec<f64>,
}

/// ROC curve for binary `labels` (0 or 1). Equal scores form one group, so
/// ties contribute diagonal segments.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Argument(format!("binary label expected, got {bad}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedCurve(format!(
            "need both classes ({positives} positives, {negatives} negatives)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(s);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// One-vs-rest AUC per class from an `[n, C]` probability matrix, plus the
/// unweighted mean.
pub fn macro_auc_ovr(probabilities: &Tensor, labels: &[usize]) -> Result<(Vec<f64>, f64)> {
    let [n, classes] = probabilities.dims2()?;
    if labels.len() != n {
        return Err(Error::Dimension(format!("{n} rows but {} labels", labels.len())));
    }
    if classes < 2 {
        return Err(Error::Argument("need at least two classes".into()));
    }
    let per_class = (0..classes)
        .map(|c| {
            let scores: Vec<f64> = (0..n).map(|i| probabilities.data()[i * classes + c]).collect();
            let binary: Vec<u8> = labels.iter().map(|&l| u8::from(l == c)).collect();
            match roc_curve(&scores, &binary) {
                Ok(curve) => Ok(auc(&curve)),
                Err(Error::UndefinedCurve(why)) => {
                    Err(Error::UndefinedCurve(format!("class {c}: {why}")))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let macro_auc = per_class.iter().sum::<f64>() / classes as f64;
    Ok((per_class, macro_auc))
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        accuracy(self)
    }
}

pub fn confusion_matrix(predicted: &[usize], truth: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions but {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut counts = vec![vec![0; classes]; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= classes || t >= classes {
            return Err(Error::Argument(format!(
                "label pair (true {t}, predicted {p}) out of range for {classes} classes"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Trace over total; 0 for an empty matrix.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    let trace: usize = (0..cm.n_classes()).map(|i| cm.counts[i][i]).sum();
    trace as f64 / total as f64
}

/// Epoch of minimum validation loss, if the next `patience` epochs all stay
/// above it.
pub fn overfit_epoch(history: &TrainHistory, patience: usize) -> Option<usize> {
    let val = &history.val_loss;
    let (best, &min) = val
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    if best + patience >= val.len() {
        return None;
    }
    val[best + 1..=best + patience]
        .iter()
        .all(|&v| v > min)
        .then_some(best)
}
