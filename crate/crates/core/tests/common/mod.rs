//! Finite-difference oracles shared by the integration tests.
#![allow(dead_code)]

use glyphlab::models::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2x2_backward, maxpool2x2_forward, sigmoid,
    Conv2d, Dense, MlrModel,
};
use glyphlab::eda::{kl_divergence, tsne_gradient};
use glyphlab::models::{bce_loss, reference_cnn, CnnModel};
use glyphlab::{Rng, Tensor};

pub const FD_EPS: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-5;

/// Relative error with the denominator floored at 1e-4, so entries whose
/// true value is ~0 are judged on the ~1e-10 absolute roundoff of the
/// central difference.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Central difference of `f` along every coordinate in `coords` of `x`.
pub fn central_diff(x: &mut [f64], coords: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    coords
        .iter()
        .map(|&k| {
            let orig = x[k];
            x[k] = orig + FD_EPS;
            let up = f(x);
            x[k] = orig - FD_EPS;
            let down = f(x);
            x[k] = orig;
            (up - down) / (2.0 * FD_EPS)
        })
        .collect()
}

/// Largest relative error between `analytic[coords]` and finite differences.
pub fn max_err(analytic: &[f64], x: &mut [f64], coords: &[usize], f: impl FnMut(&[f64]) -> f64) -> f64 {
    let numeric = central_diff(x, coords, f);
    coords
        .iter()
        .zip(&numeric)
        .map(|(&k, &n)| rel_err(analytic[k], n))
        .fold(0.0, f64::max)
}

/// False when the one-sided slopes disagree, i.e. `x ± ε` straddles a ReLU
/// kink or a max-pool switch and the central difference is meaningless.
pub fn is_smooth(up: f64, mid: f64, down: f64, central: f64) -> bool {
    let (fwd, bwd) = ((up - mid) / FD_EPS, (mid - down) / FD_EPS);
    (fwd - bwd).abs() <= FD_TOL * central.abs().max(1e-4)
}

pub fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn random_tensor(rng: &mut Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| scale * rng.normal()).collect()).unwrap()
}

fn dot(a: &Tensor, b: &[f64]) -> f64 {
    a.data().iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst error over input, weight and bias gradients of a conv layer on a
/// random 2×5×5 input under the linear probe loss `Σ r ⊙ out`.
pub fn conv_check(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut x = random_tensor(&mut rng, &[2, 5, 5], 1.0);
    let layer = Conv2d::from_params(random_tensor(&mut rng, &[3, 2, 3, 3], 0.5), random_tensor(&mut rng, &[3], 0.5))
        .unwrap();
    let r = random_tensor(&mut rng, &[3, 5, 5], 1.0);
    let (gx, gw, gb) = conv2d_backward(&x, &layer, &r).unwrap();

    let shape = x.shape().to_vec();
    let ex = max_err(gx.data(), x.data_mut(), &all(50), |v| {
        dot(&conv2d_forward(&Tensor::from_vec(&shape, v.to_vec()).unwrap(), &layer).unwrap(), r.data())
    });
    let mut w = layer.weights.data().to_vec();
    let ew = max_err(gw.data(), &mut w, &all(54), |v| {
        let l = Conv2d::from_params(Tensor::from_vec(&[3, 2, 3, 3], v.to_vec()).unwrap(), layer.bias.clone()).unwrap();
        dot(&conv2d_forward(&x, &l).unwrap(), r.data())
    });
    let mut b = layer.bias.data().to_vec();
    let eb = max_err(gb.data(), &mut b, &all(3), |v| {
        let l = Conv2d::from_params(layer.weights.clone(), Tensor::from_vec(&[3], v.to_vec()).unwrap()).unwrap();
        dot(&conv2d_forward(&x, &l).unwrap(), r.data())
    });
    ex.max(ew).max(eb)
}

/// Dense layer followed by ReLU, probed with `Σ r ⊙ relu(Wx + b)`.
pub fn dense_relu_check(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut x = random_tensor(&mut rng, &[7], 1.0);
    let layer = Dense::from_params(random_tensor(&mut rng, &[4, 7], 0.5), random_tensor(&mut rng, &[4], 0.5)).unwrap();
    let r = random_tensor(&mut rng, &[4], 1.0);
    let z = dense_forward(&x, &layer).unwrap();
    let gz = glyphlab::models::relu_backward(&z, &r).unwrap();
    let (gx, gw, gb) = dense_backward(&x, &layer, &gz).unwrap();
    let probe = |x: &Tensor, l: &Dense| dot(&glyphlab::models::relu_forward(&dense_forward(x, l).unwrap()), r.data());

    let ex = max_err(gx.data(), x.data_mut(), &all(7), |v| {
        probe(&Tensor::from_vec(&[7], v.to_vec()).unwrap(), &layer)
    });
    let mut w = layer.weights.data().to_vec();
    let ew = max_err(gw.data(), &mut w, &all(28), |v| {
        let l = Dense::from_params(Tensor::from_vec(&[4, 7], v.to_vec()).unwrap(), layer.bias.clone()).unwrap();
        probe(&x, &l)
    });
    let mut b = layer.bias.data().to_vec();
    let eb = max_err(gb.data(), &mut b, &all(4), |v| {
        let l = Dense::from_params(layer.weights.clone(), Tensor::from_vec(&[4], v.to_vec()).unwrap()).unwrap();
        probe(&x, &l)
    });
    ex.max(ew).max(eb)
}

/// Max-pool on a random 3×4×6 input (continuous values, so no ties).
pub fn maxpool_check(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut x = random_tensor(&mut rng, &[3, 4, 6], 1.0);
    let r = random_tensor(&mut rng, &[3, 2, 3], 1.0);
    let (_, mask) = maxpool2x2_forward(&x).unwrap();
    let gx = maxpool2x2_backward(&mask, &r).unwrap();
    max_err(gx.data(), x.data_mut(), &all(72), |v| {
        dot(&maxpool2x2_forward(&Tensor::from_vec(&[3, 4, 6], v.to_vec()).unwrap()).unwrap().0, r.data())
    })
}

/// `d BCE(sigmoid(z), y) / dz = sigmoid(z) − y` at a random logit.
pub fn sigmoid_bce_check(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut z = [3.0 * rng.normal()];
    let y = if rng.coin() { 1.0 } else { 0.0 };
    let analytic = [sigmoid(z[0]) - y];
    max_err(&analytic, &mut z, &[0], |v| bce_loss(sigmoid(v[0]), y))
}

/// MLR objective (softmax + cross-entropy + L2) on a 3-class toy.
pub fn softmax_ce_check(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (n, d, c) = (6, 4, 3);
    let x = random_tensor(&mut rng, &[n, d], 1.0);
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let names: Vec<String> = (0..c).map(|k| k.to_string()).collect();
    let model = MlrModel::from_params(random_tensor(&mut rng, &[c, d], 0.5), random_tensor(&mut rng, &[c], 0.5), names.clone())
        .unwrap();
    let l2 = 0.01;
    let (_, grad) = model.loss_and_grad(&x, &labels, l2).unwrap();
    let mut w = model.w.data().to_vec();
    let ew = max_err(grad.w.data(), &mut w, &all(c * d), |v| {
        let m = MlrModel::from_params(Tensor::from_vec(&[c, d], v.to_vec()).unwrap(), model.b.clone(), names.clone())
            .unwrap();
        m.loss_and_grad(&x, &labels, l2).unwrap().0
    });
    let mut b = model.b.data().to_vec();
    let eb = max_err(grad.b.data(), &mut b, &all(c), |v| {
        let m = MlrModel::from_params(model.w.clone(), Tensor::from_vec(&[c], v.to_vec()).unwrap(), names.clone())
            .unwrap();
        m.loss_and_grad(&x, &labels, l2).unwrap().0
    });
    ew.max(eb)
}

/// t-SNE KL objective with respect to the layout, for a random normalized P.
pub fn tsne_check(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (n, dims) = (8, 3);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.next_f64() + 0.01;
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
    }
    let total: f64 = p.iter().sum();
    let p = Tensor::from_vec(&[n, n], p.iter().map(|v| v / total).collect()).unwrap();
    let mut y = random_tensor(&mut rng, &[n, dims], 1.0);
    let g = tsne_gradient(&p, &y).unwrap();
    max_err(g.data(), y.data_mut(), &all(n * dims), |v| {
        kl_divergence(&p, &Tensor::from_vec(&[n, dims], v.to_vec()).unwrap()).unwrap()
    })
}

/// End-to-end BCE gradient of the reference network on one image, checked
/// on `per_group` random coordinates of every weight and bias tensor.
pub fn reference_cnn_check(seed: u64, side: usize, per_group: usize) -> f64 {
    let mut rng = Rng::new(seed);
    let mut model: CnnModel = reference_cnn(side).unwrap();
    model.initialize(seed).unwrap();
    // non-zero biases so every code path carries signal
    for p in model.params_mut() {
        if p.len() <= 128 {
            for v in p.iter_mut() {
                *v = 0.05 * rng.normal();
            }
        }
    }
    let x = Tensor::from_vec(&[1, side, side], (0..side * side).map(|_| rng.next_f64()).collect()).unwrap();
    let y = if rng.coin() { 1.0 } else { 0.0 };
    let mut grads = model.zero_grads();
    model.loss_and_grad(&x, y, &mut grads).unwrap();

    let mut worst: f64 = 0.0;
    for g in 0..grads.len() {
        let len = grads[g].len();
        let loss_at = |k: usize, delta: f64| {
            let mut m = model.clone();
            m.params_mut()[g][k] += delta;
            m.loss(&x, y).unwrap()
        };
        let mut checked = 0;
        for _ in 0..per_group * 20 {
            if checked == per_group.min(len) {
                break;
            }
            let k = rng.below(len);
            let (up, mid, down) = (loss_at(k, FD_EPS), loss_at(k, 0.0), loss_at(k, -FD_EPS));
            let numeric = (up - down) / (2.0 * FD_EPS);
            if !is_smooth(up, mid, down, numeric) {
                continue;
            }
            worst = worst.max(rel_err(grads[g][k], numeric));
            checked += 1;
        }
        assert_eq!(checked, per_group.min(len), "too few smooth coordinates in group {g}");
    }
    worst
}

/// Textbook O(n³) UPGMA over explicit member lists: every step recomputes
/// each cluster-pair mean from the original matrix. Returns
/// `(left, right, height, size)` per merge.
pub fn naive_upgma(d: &[f64], n: usize) -> Vec<(usize, usize, f64, usize)> {
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    let mut next = n;
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (ia, ma) = &clusters[a];
                let (ib, mb) = &clusters[b];
                let sum: f64 = ma.iter().flat_map(|&p| mb.iter().map(move |&q| d[p * n + q])).sum();
                let mean = sum / (ma.len() * mb.len()) as f64;
                let (l, r) = (*ia.min(ib), *ia.max(ib));
                let better = match best {
                    None => true,
                    Some((bd, bl, br, _, _)) => mean < bd || (mean == bd && (l, r) < (bl, br)),
                };
                if better {
                    best = Some((mean, l, r, a, b));
                }
            }
        }
        let (h, l, r, a, b) = best.unwrap();
        let mut members = clusters[a].1.clone();
        members.extend(&clusters[b].1);
        let size = members.len();
        clusters.remove(b);
        clusters.remove(a);
        clusters.push((next, members));
        next += 1;
        merges.push((l, r, h, size));
    }
    merges
}

/// Random symmetric distance matrix with a zero diagonal.
pub fn random_distances(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.uniform(0.1, 10.0).unwrap();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Fraction of (point, neighbor) pairs among each point's `k` nearest
/// neighbors in `y` that share the point's label.
pub fn knn_agreement(y: &Tensor, labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    let mut agree = 0usize;
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d: f64 = y.row(i).iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, j)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0));
        agree += others[..k].iter().filter(|&&(_, j)| labels[j] == labels[i]).count();
    }
    agree as f64 / (n * k) as f64
}
