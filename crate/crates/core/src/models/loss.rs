use crate::numerics::Tensor;

const P_CLAMP: f64 = 1e-12;

/// Binary cross-entropy with `p` clamped to `[1e-12, 1 − 1e-12]`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Numerically stable softmax: `exp(z − max z)` normalized.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Row-wise softmax of an `[n, C]` logit matrix.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    let cols = logits.row_len();
    if cols == 0 {
        return out;
    }
    for row in out.data_mut().chunks_mut(cols) {
        let p = softmax(row);
        row.copy_from_slice(&p);
    }
    out
}

/// Mean cross-entropy of `[n, C]` probabilities against integer labels.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> f64 {
    let cols = probs.row_len();
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| -probs.data()[i * cols + l].max(P_CLAMP).ln())
        .sum();
    total / labels.len() as f64
}
