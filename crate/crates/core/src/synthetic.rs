//! Seeded toy data: filled squares vs. circles, and Gaussian blobs.

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

/// Subsamples per pixel axis when rasterizing shapes.
const SUPERSAMPLE: usize = 4;

/// Parameters of the squares-vs-circles image task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapesConfig {
    pub side: usize,
    pub per_class: usize,
    /// Standard deviation of additive pixel noise.
    pub noise: f64,
    /// Shape radius range as fractions of the side.
    pub min_radius: f64,
    pub max_radius: f64,
    pub seed: u64,
}

impl ShapesConfig {
    pub fn new(side: usize, per_class: usize, seed: u64) -> Self {
        ShapesConfig {
            side,
            per_class,
            noise: 0.1,
            min_radius: 0.15,
            max_radius: 0.3,
            seed,
        }
    }
}

/// Filled shapes on a dark background, classes `"circle"` (0) and
/// `"square"` (1), interleaved. Squares are randomly rotated; both shapes
/// are randomly sized and placed fully inside the frame, anti-aliased and
/// corrupted with clamped Gaussian noise.
pub fn shapes(cfg: &ShapesConfig) -> Result<LabeledDataset> {
    let side = cfg.side;
    if side < 4 {
        return Err(Error::Argument(format!("image side {side} is too small")));
    }
    if !(0.0 < cfg.min_radius && cfg.min_radius <= cfg.max_radius && cfg.max_radius < 0.5) {
        return Err(Error::Argument(format!(
            "radius range [{}, {}] must lie inside (0, 0.5)",
            cfg.min_radius, cfg.max_radius
        )));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::Argument("noise must be non-negative".into()));
    }
    let n = 2 * cfg.per_class;
    let s = side as f64;
    let mut data = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let mut rng = Rng::derive(cfg.seed, &[i as u64]);
        let r = rng.uniform(cfg.min_radius, cfg.max_radius)? * s;
        // a rotated square reaches r·√2 from its center
        let reach = if label == 1 { r * std::f64::consts::SQRT_2 } else { r };
        let margin = reach.min(s / 2.0);
        let cx = rng.uniform(margin, s - margin)?;
        let cy = rng.uniform(margin, s - margin)?;
        let angle = rng.uniform(0.0, std::f64::consts::FRAC_PI_2)?;
        let (sin, cos) = angle.sin_cos();
        let inside = |x: f64, y: f64| {
            let (dx, dy) = (x - cx, y - cy);
            if label == 0 {
                dx * dx + dy * dy <= r * r
            } else {
                (cos * dx + sin * dy).abs() <= r && (-sin * dx + cos * dy).abs() <= r
            }
        };
        for py in 0..side {
            for px in 0..side {
                let mut hits = 0usize;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let x = px as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                        let y = py as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                        hits += usize::from(inside(x, y));
                    }
                }
                let v = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64 + cfg.noise * rng.normal();
                data.push(v.clamp(0.0, 1.0));
            }
        }
        labels.push(label);
    }
    LabeledDataset::new(
        Tensor::from_vec(&[n, side, side], data)?,
        labels,
        vec!["circle".into(), "square".into()],
    )
}

/// `k` isotropic unit-variance Gaussian clusters in `dims` dimensions whose
/// centers are pairwise `separation` apart. Returns `[k·per_cluster, dims]`
/// points and their cluster labels.
pub fn gaussian_clusters(
    k: usize,
    per_cluster: usize,
    dims: usize,
    separation: f64,
    seed: u64,
) -> Result<(Tensor, Vec<usize>)> {
    if k > dims {
        return Err(Error::Argument(format!("{k} equidistant centers need at least {k} dimensions")));
    }
    let offset = separation / std::f64::consts::SQRT_2;
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(k * per_cluster * dims);
    let mut labels = Vec::with_capacity(k * per_cluster);
    for c in 0..k {
        for _ in 0..per_cluster {
            for d in 0..dims {
                let center = if d == c { offset } else { 0.0 };
                data.push(center + rng.normal());
            }
            labels.push(c);
        }
    }
    Ok((Tensor::from_vec(&[k * per_cluster, dims], data)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_balanced_and_seeded() {
        let cfg = ShapesConfig::new(32, 5, 1);
        let a = shapes(&cfg).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.class_counts(), vec![5, 5]);
        assert_eq!(a, shapes(&cfg).unwrap());
        assert_ne!(a, shapes(&ShapesConfig { seed: 2, ..cfg }).unwrap());
        assert!(a.images().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn noiseless_shapes_have_expected_area() {
        let cfg = ShapesConfig {
            noise: 0.0,
            ..ShapesConfig::new(64, 10, 3)
        };
        let ds = shapes(&cfg).unwrap();
        for i in 0..ds.len() {
            let mass: f64 = ds.image(i).iter().sum();
            let (lo, hi) = (0.15 * 64.0, 0.3 * 64.0);
            let k = if ds.labels()[i] == 0 { std::f64::consts::PI } else { 4.0 };
            assert!(mass >= 0.95 * k * lo * lo && mass <= 1.05 * k * hi * hi, "mass {mass}");
        }
    }

    #[test]
    fn cluster_centers_are_equidistant() {
        let (x, labels) = gaussian_clusters(3, 400, 5, 10.0, 0).unwrap();
        let mut means = vec![vec![0.0; 5]; 3];
        for (i, &l) in labels.iter().enumerate() {
            for d in 0..5 {
                means[l][d] += x.row(i)[d] / 400.0;
            }
        }
        for a in 0..3 {
            for b in a + 1..3 {
                let dist: f64 = (0..5).map(|d| (means[a][d] - means[b][d]).powi(2)).sum::<f64>().sqrt();
                assert!((dist - 10.0).abs() < 0.3, "{dist}");
            }
        }
    }
}
