//! Average-linkage (UPGMA) agglomerative clustering.

use super::DistanceMatrix;
use crate::error::{Error, Result};

/// One agglomeration step. Leaves are nodes `0..n`; the cluster formed by
/// merge `k` is node `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    /// Leaves in depth-first order, left child first.
    pub leaf_order: Vec<usize>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.merges.len() + 1
    }
}

// Candidate ordering: smaller distance first, then smaller (left, right) node pair.
fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => (a.1, a.2) < (b.1, b.2),
    }
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

struct Workspace {
    n: usize,
    d: Vec<f64>,
    active: Vec<bool>,
    node: Vec<usize>,
    size: Vec<usize>,
    // best candidate of each slot over every other active slot
    best: Vec<(f64, usize, usize, usize)>,
}

impl Workspace {
    fn candidate(&self, i: usize, j: usize) -> (f64, usize, usize) {
        let (l, r) = pair_key(self.node[i], self.node[j]);
        (self.d[i * self.n + j], l, r)
    }

    fn rescan(&mut self, i: usize) {
        let mut best: Option<((f64, usize, usize), usize)> = None;
        for j in 0..self.n {
            if j == i || !self.active[j] {
                continue;
            }
            let c = self.candidate(i, j);
            if best.is_none_or(|(b, _)| better(c, b)) {
                best = Some((c, j));
            }
        }
        self.best[i] = match best {
            Some(((d, l, r), j)) => (d, l, r, j),
            None => (f64::INFINITY, usize::MAX, usize::MAX, usize::MAX),
        };
    }
}

/// UPGMA: repeatedly merge the two clusters with the smallest mean
/// inter-cluster distance, ties going to the smallest `(left, right)` node
/// pair.
///
/// Cluster distances are maintained with the Lance–Williams average update
/// and each slot caches its nearest partner, so typical inputs cost O(n²).
pub fn hcluster_average(d: &DistanceMatrix) -> Result<Dendrogram> {
    let n = d.n();
    if n < 2 {
        return Err(Error::Argument(format!("clustering needs at least 2 points, got {n}")));
    }
    let mut ws = Workspace {
        n,
        d: d.as_slice().to_vec(),
        active: vec![true; n],
        node: (0..n).collect(),
        size: vec![1; n],
        best: vec![(0.0, 0, 0, 0); n],
    };
    for i in 0..n {
        ws.rescan(i);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if !ws.active[i] {
                continue;
            }
            let (dist, l, r, _) = ws.best[i];
            if pick.is_none_or(|p| {
                let (pd, pl, pr, _) = ws.best[p];
                better((dist, l, r), (pd, pl, pr))
            }) {
                pick = Some(i);
            }
        }
        let a = pick.expect("at least two active clusters");
        let b = ws.best[a].3;
        let (height, left, right, _) = ws.best[a];
        let (sa, sb) = (ws.size[a], ws.size[b]);
        let merged_size = sa + sb;
        merges.push(Merge {
            left,
            right,
            height,
            size: merged_size,
        });

        // merged cluster lives in slot `a`
        for k in 0..n {
            if !ws.active[k] || k == a || k == b {
                continue;
            }
            let v = (sa as f64 * ws.d[a * n + k] + sb as f64 * ws.d[b * n + k]) / merged_size as f64;
            ws.d[a * n + k] = v;
            ws.d[k * n + a] = v;
        }
        ws.active[b] = false;
        ws.size[a] = merged_size;
        ws.node[a] = n + step;
        ws.rescan(a);
        for k in 0..n {
            if !ws.active[k] || k == a {
                continue;
            }
            let partner = ws.best[k].3;
            if partner == a || partner == b {
                ws.rescan(k);
            } else {
                let c = ws.candidate(k, a);
                let (bd, bl, br, _) = ws.best[k];
                if better(c, (bd, bl, br)) {
                    ws.best[k] = (c.0, c.1, c.2, a);
                }
            }
        }
    }

    let leaf_order = leaf_order(&merges, n);
    Ok(Dendrogram { merges, leaf_order })
}

fn leaf_order(merges: &[Merge], n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![n + merges.len() - 1];
    while let Some(node) = stack.pop() {
        if node < n {
            order.push(node);
        } else {
            let m = &merges[node - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    order
}

/// Distance matrix permuted into dendrogram leaf order, with the class of
/// every position.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredMap {
    pub n: usize,
    /// Row-major `n`×`n`.
    pub reordered: Vec<f64>,
    pub ribbon: Vec<usize>,
    /// Original sample index at each position.
    pub order: Vec<usize>,
}

impl ClusteredMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.reordered[i * self.n + j]
    }
}

pub fn clustered_map(d: &DistanceMatrix, dg: &Dendrogram, labels: &[usize]) -> Result<ClusteredMap> {
    let n = d.n();
    if labels.len() != n {
        return Err(Error::Argument(format!("{} labels for {n} points", labels.len())));
    }
    if dg.leaf_order.len() != n {
        return Err(Error::Argument(format!(
            "dendrogram has {} leaves for {n} points",
            dg.leaf_order.len()
        )));
    }
    let perm = &dg.leaf_order;
    let mut reordered = Vec::with_capacity(n * n);
    for &pi in perm {
        for &pj in perm {
            reordered.push(d.get(pi, pj));
        }
    }
    Ok(ClusteredMap {
        n,
        reordered,
        ribbon: perm.iter().map(|&p| labels[p]).collect(),
        order: perm.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> DistanceMatrix {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DistanceMatrix::from_vec(n, d).unwrap()
    }

    #[test]
    fn unique_minimum_merges_first() {
        let d = matrix(3, |i, j| if (i, j) == (0, 1) { 1.0 } else { 10.0 });
        let dg = hcluster_average(&d).unwrap();
        assert_eq!(
            dg.merges[0],
            Merge {
                left: 0,
                right: 1,
                height: 1.0,
                size: 2
            }
        );
        assert_eq!(dg.merges[1].left, 2);
        assert_eq!(dg.merges[1].right, 3);
        assert_eq!(dg.merges[1].height, 10.0);
        assert_eq!(dg.leaf_order, vec![2, 0, 1]);
    }

    #[test]
    fn ties_resolve_to_smallest_pair() {
        let d = matrix(4, |_, _| 1.0);
        let dg = hcluster_average(&d).unwrap();
        let pairs: Vec<(usize, usize)> = dg.merges.iter().map(|m| (m.left, m.right)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5)]);
    }

    #[test]
    fn heights_non_decreasing_and_order_is_permutation() {
        let mut rng = Rng::new(12);
        for _ in 0..20 {
            let n = 2 + rng.below(30);
            let pts: Vec<f64> = (0..n * 2).map(|_| rng.normal()).collect();
            let d = matrix(n, |i, j| {
                ((pts[2 * i] - pts[2 * j]).powi(2) + (pts[2 * i + 1] - pts[2 * j + 1]).powi(2)).sqrt()
            });
            let dg = hcluster_average(&d).unwrap();
            for w in dg.merges.windows(2) {
                assert!(w[1].height >= w[0].height - 1e-12);
            }
            let mut order = dg.leaf_order.clone();
            order.sort_unstable();
            assert_eq!(order, (0..n).collect::<Vec<_>>());
            assert_eq!(dg.merges.last().unwrap().size, n);
        }
    }

    #[test]
    fn clustered_map_basics() {
        let d = matrix(3, |i, j| (i + j) as f64);
        let identity = Dendrogram {
            merges: vec![],
            leaf_order: vec![0, 1, 2],
        };
        let map = clustered_map(&d, &identity, &[0, 1, 1]).unwrap();
        assert_eq!(map.reordered, d.as_slice());

        let dg = hcluster_average(&d).unwrap();
        let map = clustered_map(&d, &dg, &[0, 1, 1]).unwrap();
        for i in 0..3 {
            assert_eq!(map.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(map.get(i, j), map.get(j, i));
            }
        }
        assert!(matches!(clustered_map(&d, &dg, &[0, 1]), Err(Error::Argument(_))));
    }
}
