//! Exact O(n²) t-distributed stochastic neighbor embedding.

use super::pairwise_euclidean;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

const P_FLOOR: f64 = 1e-12;
const PERPLEXITY_TOL: f64 = 1e-5;
const MAX_BISECTIONS: usize = 64;
const GAIN_STEP: f64 = 0.2;
const GAIN_DECAY: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub out_dims: usize,
    /// Clamped to `[1, (n - 1) / 3]` at run time.
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum_early: f64,
    pub momentum_late: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            out_dims: 3,
            perplexity: 30.0,
            iters: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            momentum_early: 0.5,
            momentum_late: 0.8,
            seed: 0,
        }
    }
}

impl TsneConfig {
    /// Perplexity actually used for `n` points.
    pub fn effective_perplexity(&self, n: usize) -> f64 {
        let upper = (n.saturating_sub(1)) as f64 / 3.0;
        self.perplexity.min(upper).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `[n, out_dims]`.
    pub y: Tensor,
    /// KL(P‖Q) of the starting layout followed by the value after every
    /// update (`iters + 1` entries).
    pub kl_history: Vec<f64>,
}

impl Embedding {
    pub fn initial_kl(&self) -> f64 {
        self.kl_history[0]
    }

    pub fn final_kl(&self) -> f64 {
        *self.kl_history.last().expect("history is never empty")
    }
}

fn row_distribution(sq: &[f64], min_sq: f64, sigma: f64, out: &mut [f64]) -> f64 {
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut sum = 0.0;
    for (o, &d) in out.iter_mut().zip(sq) {
        *o = (-(d - min_sq) * scale).exp();
        sum += *o;
    }
    let mut entropy = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        if *o > 0.0 {
            entropy -= *o * o.ln();
        }
    }
    // 2^H(bits) == e^H(nats)
    entropy.exp()
}

/// Find the Gaussian bandwidth whose conditional distribution over
/// `distances` (self excluded) has the requested perplexity.
///
/// Bisection runs on ln σ over (1e-20, 1e20) for at most 64 steps and stops
/// once the perplexity is within 1e-5 relative of the target. Equal
/// distances give the uniform row for any σ.
pub fn calibrate_row(distances: &[f64], perplexity: f64) -> Result<(f64, Vec<f64>)> {
    if distances.is_empty() {
        return Err(Error::Argument("cannot calibrate an empty row".into()));
    }
    if !(perplexity >= 1.0) {
        return Err(Error::Argument(format!("perplexity {perplexity} must be >= 1")));
    }
    let sq: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let min_sq = sq.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p = vec![0.0; sq.len()];
    let (mut lo, mut hi) = (1e-20f64.ln(), 1e20f64.ln());
    let mut sigma = 1.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        sigma = mid.exp();
        let achieved = row_distribution(&sq, min_sq, sigma, &mut p);
        if ((achieved - perplexity) / perplexity).abs() <= PERPLEXITY_TOL {
            break;
        }
        if achieved > perplexity {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((sigma, p))
}

/// Symmetrized input affinities `p_ij = (p_j|i + p_i|j) / 2n`, floored at
/// 1e-12 off the diagonal.
pub fn joint_probabilities(x: &Tensor, perplexity: f64) -> Result<Tensor> {
    let dist = pairwise_euclidean(x)?;
    let n = dist.n();
    let mut cond = vec![0.0; n * n];
    let mut others = Vec::with_capacity(n - 1);
    for i in 0..n {
        others.clear();
        others.extend((0..n).filter(|&j| j != i).map(|j| dist.get(i, j)));
        let (_, p) = calibrate_row(&others, perplexity)?;
        for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
            cond[i * n + j] = p[k];
        }
    }
    let mut joint = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / denom).max(P_FLOOR);
            }
        }
    }
    Tensor::from_vec(&[n, n], joint)
}

fn embedding_dims(y: &Tensor) -> Result<(usize, usize)> {
    match y.shape() {
        &[n, d] if n >= 2 && d >= 1 => Ok((n, d)),
        s => Err(Error::Dimension(format!("embedding must be [n >= 2, d >= 1], got {s:?}"))),
    }
}

/// Student-t kernel `(1 + ‖y_i − y_j‖²)⁻¹` and its normalization Q, both `[n, n]`
/// with zero diagonals.
pub fn student_t_affinities(y: &Tensor) -> Result<(Tensor, Tensor)> {
    let (n, dims) = embedding_dims(y)?;
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        let yi = y.row(i);
        for j in i + 1..n {
            let yj = y.row(j);
            let sq: f64 = (0..dims).map(|k| (yi[k] - yj[k]).powi(2)).sum();
            let v = 1.0 / (1.0 + sq);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let total: f64 = kernel.iter().sum();
    let q = kernel.iter().map(|v| v / total).collect();
    Ok((Tensor::from_vec(&[n, n], q)?, Tensor::from_vec(&[n, n], kernel)?))
}

fn check_p(p: &Tensor, n: usize) -> Result<()> {
    if p.shape() != [n, n] {
        return Err(Error::Dimension(format!(
            "P is {:?} but the embedding has {n} points",
            p.shape()
        )));
    }
    Ok(())
}

/// KL(P‖Q) over off-diagonal pairs.
pub fn kl_divergence(p: &Tensor, y: &Tensor) -> Result<f64> {
    let (n, _) = embedding_dims(y)?;
    check_p(p, n)?;
    let (q, _) = student_t_affinities(y)?;
    Ok(kl_from(p, &q, n))
}

fn kl_from(p: &Tensor, q: &Tensor, n: usize) -> f64 {
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p.data()[i * n + j];
            if i != j && pij > 0.0 {
                kl += pij * (pij / q.data()[i * n + j]).ln();
            }
        }
    }
    kl
}

fn gradient_from(p: &Tensor, q: &Tensor, kernel: &Tensor, y: &Tensor, scale_p: f64) -> Tensor {
    let (n, dims) = (y.shape()[0], y.shape()[1]);
    let mut grad = Tensor::zeros(&[n, dims]);
    for i in 0..n {
        let yi = y.row(i).to_vec();
        let gi = grad.row_mut(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = 4.0
                * (scale_p * p.data()[i * n + j] - q.data()[i * n + j])
                * kernel.data()[i * n + j];
            let yj = y.row(j);
            for k in 0..dims {
                gi[k] += w * (yi[k] - yj[k]);
            }
        }
    }
    grad
}

/// `∂KL/∂y_i = 4 Σ_j (p_ij − q_ij)(y_i − y_j)(1 + ‖y_i − y_j‖²)⁻¹`.
pub fn tsne_gradient(p: &Tensor, y: &Tensor) -> Result<Tensor> {
    let (n, _) = embedding_dims(y)?;
    check_p(p, n)?;
    let (q, kernel) = student_t_affinities(y)?;
    Ok(gradient_from(p, &q, &kernel, y, 1.0))
}

/// Embed the rows of `x` (`[n, ...]`, trailing axes flattened).
///
/// Gradient descent with momentum and per-coordinate adaptive gains; P is
/// exaggerated and the early momentum used for the first
/// `exaggeration_iters` steps. The layout starts
/// from a seeded N(0, 1e-4²) draw and is re-centered after each step.
pub fn tsne(x: &Tensor, cfg: &TsneConfig) -> Result<Embedding> {
    let n = x.shape().first().copied().unwrap_or(0);
    if n < 4 {
        return Err(Error::Argument(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if cfg.out_dims == 0 {
        return Err(Error::Argument("out_dims must be positive".into()));
    }
    if cfg.iters < cfg.exaggeration_iters {
        return Err(Error::Argument(format!(
            "iters ({}) must be >= exaggeration_iters ({})",
            cfg.iters, cfg.exaggeration_iters
        )));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::Argument("learning rate must be positive".into()));
    }
    let p = joint_probabilities(x, cfg.effective_perplexity(n))?;

    let dims = cfg.out_dims;
    let mut rng = Rng::new(cfg.seed);
    let init = (0..n * dims).map(|_| 1e-4 * rng.normal()).collect();
    let mut y = Tensor::from_vec(&[n, dims], init)?;
    let mut velocity = vec![0.0; n * dims];
    let mut gains = vec![1.0; n * dims];
    let mut kl_history = Vec::with_capacity(cfg.iters + 1);

    for iter in 0..cfg.iters {
        let (q, kernel) = student_t_affinities(&y)?;
        if iter == 0 {
            kl_history.push(kl_from(&p, &q, n));
        }
        let early = iter < cfg.exaggeration_iters;
        let (exaggeration, momentum) = if early {
            (cfg.exaggeration, cfg.momentum_early)
        } else {
            (1.0, cfg.momentum_late)
        };
        let grad = gradient_from(&p, &q, &kernel, &y, exaggeration);
        for (((v, gain), g), yv) in velocity.iter_mut().zip(&mut gains).zip(grad.data()).zip(y.data_mut()) {
            // grow the step while the gradient keeps pushing the same way
            *gain = if (*g > 0.0) != (*v > 0.0) {
                *gain + GAIN_STEP
            } else {
                *gain * GAIN_DECAY
            }
            .max(MIN_GAIN);
            *v = momentum * *v - cfg.learning_rate * *gain * g;
            *yv += *v;
        }
        center(&mut y);
        kl_history.push(kl_divergence(&p, &y)?);
    }
    if kl_history.is_empty() {
        kl_history.push(kl_divergence(&p, &y)?);
    }
    Ok(Embedding { y, kl_history })
}

fn center(y: &mut Tensor) {
    let (n, dims) = (y.shape()[0], y.shape()[1]);
    for k in 0..dims {
        let mean = (0..n).map(|i| y.data()[i * dims + k]).sum::<f64>() / n as f64;
        for i in 0..n {
            y.data_mut()[i * dims + k] -= mean;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entropy_perplexity(p: &[f64]) -> f64 {
        let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|v| -v * v.log2()).sum();
        2f64.powf(h)
    }

    #[test]
    fn equal_distances_give_uniform_row() {
        for d in [0.0, 1.0, 7.5] {
            let (_, p) = calibrate_row(&[d; 5], 2.0).unwrap();
            for v in p {
                assert!((v - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn calibration_hits_target_perplexity() {
        let mut rng = Rng::new(17);
        for _ in 0..50 {
            let m = 5 + rng.below(40);
            let row: Vec<f64> = (0..m).map(|_| rng.uniform(0.1, 10.0).unwrap()).collect();
            let target = rng.uniform(1.5, (m as f64 - 1.0).max(2.0)).unwrap();
            let (sigma, p) = calibrate_row(&row, target).unwrap();
            assert!(sigma > 0.0);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let achieved = entropy_perplexity(&p);
            assert!(((achieved - target) / target).abs() <= 1e-5, "{achieved} vs {target}");
        }
    }

    #[test]
    fn single_near_neighbor_takes_all_mass() {
        let (_, p) = calibrate_row(&[0.1, 5.0, 6.0, 7.0], 1.0).unwrap();
        assert!(p[0] > 1.0 - 1e-6, "{p:?}");
    }

    #[test]
    fn q_sums_to_one() {
        let mut rng = Rng::new(3);
        let y = Tensor::from_vec(&[12, 3], (0..36).map(|_| rng.normal() * 5.0).collect()).unwrap();
        let (q, _) = student_t_affinities(&y).unwrap();
        assert!((q.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_perfect_embedding_has_zero_gradient() {
        // With two points P and Q both put 1/2 on the only pair.
        let p = Tensor::from_vec(&[2, 2], vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let y = Tensor::from_vec(&[2, 3], vec![0.3, -1.0, 2.0, -0.7, 0.4, 0.1]).unwrap();
        let g = tsne_gradient(&p, &y).unwrap();
        assert!(g.data().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn rejects_tiny_inputs_and_bad_config() {
        let x = Tensor::zeros(&[3, 2]);
        assert!(tsne(&x, &TsneConfig::default()).is_err());
        let x = Tensor::zeros(&[5, 2]);
        let cfg = TsneConfig {
            iters: 10,
            ..TsneConfig::default()
        };
        assert!(tsne(&x, &cfg).is_err());
    }

    #[test]
    fn simplex_kl_decreases() {
        // corners of the standard 3-simplex: origin plus unit vectors
        let x = Tensor::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let e = tsne(&x, &TsneConfig::default()).unwrap();
        assert_eq!(e.kl_history.len(), 1001);
        assert!(e.kl_history.iter().all(|v| v.is_finite()));
        assert!(e.final_kl() < e.initial_kl());
        // P is a star around the origin; the infimum over layouts is ln(4/3)
        assert!((e.final_kl() - (4.0f64 / 3.0).ln()).abs() < 1e-3);
    }

    #[test]
    fn deterministic() {
        let mut rng = Rng::new(1);
        let x = Tensor::from_vec(&[15, 4], (0..60).map(|_| rng.normal()).collect()).unwrap();
        let cfg = TsneConfig {
            iters: 300,
            seed: 5,
            ..TsneConfig::default()
        };
        assert_eq!(tsne(&x, &cfg).unwrap(), tsne(&x, &cfg).unwrap());
    }
}
