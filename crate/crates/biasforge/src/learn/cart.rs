//! Weighted CART classification trees with greedy Gini splits over binned
//! features.
//!
//! Row weights are integer multiplicities, so a bootstrap resample is a
//! weight vector rather than a copied dataset, and all trees in a forest
//! share one binned matrix. The node type is reused by the boosting stage,
//! where a leaf's `value` is a raw additive weight rather than a
//! probability.

use crate::learn::bins::BinnedMatrix;
use crate::rng::SplitMix64;

/// A fitted tree node. Split rule: `x[feature] <= threshold` goes left.
/// Thresholds are observed data values (bin cuts), so training-time bin
/// routing and prediction-time value routing agree exactly.
#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn score(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> u32 {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CartConfig {
    pub max_depth: u32,
    /// Minimum weighted sample count on each side of a split.
    pub min_leaf: u64,
}

fn gini(pos: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    bins: &'a BinnedMatrix,
    labels: &'a [u8],
    weights: &'a [u32],
    features: &'a [usize],
    /// Per-node feature sampling (classic random-subspace splits): draw k
    /// candidates from the pool at every split search.
    sampler: Option<(usize, SplitMix64)>,
    cfg: CartConfig,
    hist: Vec<(u64, u64)>, // (weight, weighted positives) per flat bin slot
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<u32>, w_total: u64, w_pos: u64, depth: u32) -> TreeNode {
        let leaf = || TreeNode::Leaf {
            value: if w_total == 0 {
                0.0
            } else {
                w_pos as f64 / w_total as f64
            },
        };
        if depth >= self.cfg.max_depth
            || w_pos == 0
            || w_pos == w_total
            || w_total < 2 * self.cfg.min_leaf
        {
            return leaf();
        }

        let sampled: Vec<usize>;
        let candidates: &[usize] = match &mut self.sampler {
            Some((k, rng)) if *k < self.features.len() => {
                let pool = self.features;
                let mut picked: Vec<usize> =
                    rng.choose_k(pool.len(), *k).into_iter().map(|i| pool[i]).collect();
                picked.sort_unstable();
                sampled = picked;
                &sampled
            }
            _ => self.features,
        };

        self.hist.iter_mut().for_each(|e| *e = (0, 0));
        let d = self.bins.n_cols;
        for &r in &rows {
            let r = r as usize;
            let w = u64::from(self.weights[r]);
            let wp = w * u64::from(self.labels[r]);
            let base = r * d;
            for &f in candidates {
                let slot = self.bins.offsets[f] + self.bins.codes[base + f] as usize;
                let e = &mut self.hist[slot];
                e.0 += w;
                e.1 += wp;
            }
        }

        let parent = gini(w_pos, w_total);
        let mut best: Option<(f64, usize, u8)> = None;
        for &f in candidates {
            let n_bins = self.bins.n_bins(f);
            let (mut wl, mut wl_pos) = (0u64, 0u64);
            for b in 0..n_bins.saturating_sub(1) {
                let e = self.hist[self.bins.offsets[f] + b];
                wl += e.0;
                wl_pos += e.1;
                let wr = w_total - wl;
                if wl < self.cfg.min_leaf || wr < self.cfg.min_leaf {
                    continue;
                }
                let wr_pos = w_pos - wl_pos;
                let child =
                    (gini(wl_pos, wl) * wl as f64 + gini(wr_pos, wr) * wr as f64) / w_total as f64;
                let improves = match best {
                    None => child < parent - 1e-12,
                    Some((b_gini, _, _)) => child < b_gini - 1e-12,
                };
                if improves {
                    best = Some((child, f, b as u8));
                }
            }
        }

        let Some((_, feature, bin)) = best else {
            return leaf();
        };

        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        let (mut wl, mut wl_pos) = (0u64, 0u64);
        for &r in &rows {
            if self.bins.codes[r as usize * d + feature] <= bin {
                let w = u64::from(self.weights[r as usize]);
                wl += w;
                wl_pos += w * u64::from(self.labels[r as usize]);
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        drop(rows);
        let threshold = self.bins.cuts[feature][bin as usize];
        let left = self.grow(left_rows, wl, wl_pos, depth + 1);
        let right = self.grow(right_rows, w_total - wl, w_pos - wl_pos, depth + 1);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Build one classification tree. Leaves hold the weighted positive
/// fraction. `features` lists usable feature indices; `weights` are row
/// multiplicities (zero excludes a row).
pub fn build_cart(
    bins: &BinnedMatrix,
    labels: &[u8],
    weights: &[u32],
    features: &[usize],
    cfg: &CartConfig,
) -> TreeNode {
    build_cart_mtry(bins, labels, weights, features, features.len(), None, cfg)
}

/// [`build_cart`] with per-node feature sampling: every split search draws
/// `k_per_node` candidates from `features` using `rng`. With `k_per_node`
/// covering the whole pool the sampler is bypassed and the result is
/// identical to [`build_cart`].
pub fn build_cart_mtry(
    bins: &BinnedMatrix,
    labels: &[u8],
    weights: &[u32],
    features: &[usize],
    k_per_node: usize,
    rng: Option<SplitMix64>,
    cfg: &CartConfig,
) -> TreeNode {
    let rows: Vec<u32> = (0..bins.n_rows as u32)
        .filter(|&r| weights[r as usize] > 0)
        .collect();
    let (w_total, w_pos) = rows.iter().fold((0u64, 0u64), |(t, p), &r| {
        let w = u64::from(weights[r as usize]);
        (t + w, p + w * u64::from(labels[r as usize]))
    });
    let sampler = match rng {
        Some(rng) if k_per_node < features.len() => Some((k_per_node.max(1), rng)),
        _ => None,
    };
    let mut builder = Builder {
        bins,
        labels,
        weights,
        features,
        sampler,
        cfg: CartConfig {
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf.max(1),
        },
        hist: vec![(0, 0); bins.total_bins],
    };
    builder.grow(rows, w_total, w_pos, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, TabularDataset};
    use crate::learn::matrix::FeatureMatrix;

    fn binned_of(rows: Vec<Vec<f64>>) -> (FeatureMatrix, BinnedMatrix) {
        let n = rows.len();
        let d = rows[0].len();
        let mut cols: Vec<Column> = vec![Column::Time((0..n as u64).collect())];
        let mut names = vec!["t".to_string()];
        for c in 0..d {
            names.push(format!("f{c}"));
            cols.push(Column::Real(rows.iter().map(|r| r[c]).collect()));
        }
        names.push("y".into());
        cols.push(Column::Binary(vec![0; n]));
        let ds = TabularDataset::new(names, cols, "y", None, "t").unwrap();
        let m = FeatureMatrix::from_dataset(&ds, false).unwrap();
        let bins = BinnedMatrix::new(&m);
        (m, bins)
    }

    #[test]
    fn splits_separable_data() {
        let (m, bins) = binned_of(vec![
            vec![0.0, 5.0],
            vec![1.0, 4.0],
            vec![10.0, 5.0],
            vec![11.0, 4.0],
        ]);
        let labels = [0, 0, 1, 1];
        let weights = [1, 1, 1, 1];
        let tree = build_cart(
            &bins,
            &labels,
            &weights,
            &[0, 1],
            &CartConfig {
                max_depth: 3,
                min_leaf: 1,
            },
        );
        assert_eq!(tree.score(m.row(0)), 0.0);
        assert_eq!(tree.score(m.row(2)), 1.0);
        assert_eq!(tree.score(&[0.5, 4.5]), 0.0);
        assert_eq!(tree.score(&[10.5, 4.5]), 1.0);
        // single split on feature 0 suffices
        assert_eq!(tree.node_count(), 3);
    }

    #[test]
    fn depth_one_cannot_represent_xor() {
        let (_, bins) = binned_of(vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]);
        let labels = [0, 1, 1, 0];
        let weights = [1u32; 4];
        let tree = build_cart(
            &bins,
            &labels,
            &weights,
            &[0, 1],
            &CartConfig {
                max_depth: 1,
                min_leaf: 1,
            },
        );
        // training accuracy at 0.5 cutoff is at most 0.75
        let correct = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
            .iter()
            .zip(labels)
            .filter(|(row, y)| u8::from(tree.score(&row[..]) > 0.5) == *y)
            .count();
        assert!(correct <= 3, "xor solved at depth 1");

        // an AND pattern has first-order gain and depth 2 solves it
        let labels_and = [0, 0, 0, 1];
        let tree = build_cart(
            &bins,
            &labels_and,
            &weights,
            &[0, 1],
            &CartConfig {
                max_depth: 2,
                min_leaf: 1,
            },
        );
        let correct = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
            .iter()
            .zip(labels_and)
            .filter(|(row, y)| u8::from(tree.score(&row[..]) > 0.5) == *y)
            .count();
        assert_eq!(correct, 4);
    }

    #[test]
    fn min_leaf_respected() {
        let (m, bins) = binned_of((0..20).map(|i| vec![i as f64]).collect());
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 18)).collect();
        let weights = vec![1u32; 20];
        let tree = build_cart(
            &bins,
            &labels,
            &weights,
            &[0],
            &CartConfig {
                max_depth: 4,
                min_leaf: 5,
            },
        );
        fn check(node: &TreeNode, m: &FeatureMatrix, rows: Vec<usize>) {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = node
            {
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&row| m.value(row, *feature) <= *threshold);
                assert!(l.len() >= 5 && r.len() >= 5, "leaf below min_leaf");
                check(left, m, l);
                check(right, m, r);
            }
        }
        check(&tree, &m, (0..20).collect());
    }

    #[test]
    fn zero_weight_rows_ignored() {
        let (_, bins) = binned_of(vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]]);
        // the two high rows are positive but weighted out
        let labels = [0, 0, 1, 1];
        let weights = [1, 1, 0, 0];
        let tree = build_cart(
            &bins,
            &labels,
            &weights,
            &[0],
            &CartConfig {
                max_depth: 3,
                min_leaf: 1,
            },
        );
        assert_eq!(tree, TreeNode::Leaf { value: 0.0 });
    }

    #[test]
    fn bootstrap_weights_shift_leaf_probabilities() {
        let (_, bins) = binned_of(vec![vec![0.0], vec![0.0], vec![0.0], vec![0.0]]);
        let labels = [1, 0, 0, 0];
        let weights = [3, 1, 0, 0]; // resampled multiset {+,+,+,-}
        let tree = build_cart(
            &bins,
            &labels,
            &weights,
            &[0],
            &CartConfig {
                max_depth: 2,
                min_leaf: 1,
            },
        );
        assert_eq!(tree, TreeNode::Leaf { value: 0.75 });
    }

    #[test]
    fn split_resolution_matches_exact_search_on_small_data() {
        // with fewer distinct values than bins, every boundary is available,
        // so the histogram split equals an exact exhaustive split
        let (_m, bins) = binned_of((0..40).map(|i| vec![(i % 10) as f64]).collect());
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 10 >= 7)).collect();
        let tree = build_cart(
            &bins,
            &labels,
            &vec![1; 40],
            &[0],
            &CartConfig {
                max_depth: 1,
                min_leaf: 1,
            },
        );
        match tree {
            TreeNode::Split { threshold, .. } => assert_eq!(threshold, 6.0),
            _ => panic!("expected a split"),
        }
    }
}
