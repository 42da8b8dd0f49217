//! Exploratory analysis: pairwise distances, exact t-SNE, average-linkage
//! clustering and clustered distance maps.

mod cluster;
mod tsne;

pub use cluster::{clustered_map, hcluster_average, ClusteredMap, Dendrogram, Merge};
pub use tsne::{
    calibrate_row, joint_probabilities, kl_divergence, student_t_affinities, tsne, tsne_gradient, Embedding,
    TsneConfig,
};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Symmetric `n`×`n` distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Wrap a row-major matrix after checking symmetry (1e-12), zero diagonal
    /// and non-negativity.
    pub fn from_vec(n: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::Dimension(format!("{n}x{n} matrix needs {} entries", n * n)));
        }
        for i in 0..n {
            if d[i * n + i] != 0.0 {
                return Err(Error::Argument(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let v = d[i * n + j];
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Argument(format!("entry ({i},{j}) = {v} is not a distance")));
                }
                if (v - d[j * n + i]).abs() > 1e-12 {
                    return Err(Error::Argument(format!("matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(DistanceMatrix { n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

/// Euclidean distances between the rows of `x` (`[n, d]`, or any tensor
/// whose trailing axes are flattened into features).
pub fn pairwise_euclidean(x: &Tensor) -> Result<DistanceMatrix> {
    if x.rank() < 2 {
        return Err(Error::Dimension(format!("need [n, d] input, got {:?}", x.shape())));
    }
    let n = x.shape()[0];
    if n < 2 {
        return Err(Error::Argument(format!("need at least 2 points, got {n}")));
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let a = x.row(i);
        for j in i + 1..n {
            let b = x.row(j);
            let sq: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            let v = sq.sqrt();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix { n, d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn pairwise_examples() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(pairwise_euclidean(&x).unwrap().get(0, 1), 0.0);

        let x = Tensor::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(pairwise_euclidean(&x).unwrap().get(1, 0), 5.0);

        let one = Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(matches!(pairwise_euclidean(&one), Err(Error::Argument(_))));
    }

    #[test]
    fn pairwise_is_symmetric_with_zero_diagonal() {
        let mut rng = Rng::new(4);
        let x = Tensor::from_vec(&[9, 5], (0..45).map(|_| rng.normal()).collect()).unwrap();
        let d = pairwise_euclidean(&x).unwrap();
        // from_vec re-validates the invariants
        DistanceMatrix::from_vec(d.n(), d.as_slice().to_vec()).unwrap();
    }

    #[test]
    fn image_batches_are_flattened() {
        let x = Tensor::from_vec(&[2, 2, 2], vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(pairwise_euclidean(&x).unwrap().get(0, 1), 2.0);
    }
}
