//! Random forest: bagged CART trees with per-node feature sampling, as in
//! classic random forests: every split search draws
//! ceil(feature_subsample * d) candidate features.
//!
//! With one tree, bootstrap off, and full feature sampling, the forest is
//! the plain CART tree with the same depth and [`FOREST_MIN_LEAF`],
//! score-for-score: both paths run the same builder on all-one weights.

use crate::learn::bins::BinnedMatrix;
use crate::learn::cart::{build_cart_mtry, CartConfig, TreeNode};
use crate::learn::ForestParams;
use crate::rng::{derive_seed, SplitMix64};

/// Minimum weighted samples per leaf inside forest trees.
pub const FOREST_MIN_LEAF: u64 = 5;

pub fn fit_forest(
    bins: &BinnedMatrix,
    labels: &[u8],
    params: &ForestParams,
    seed: u64,
) -> Vec<TreeNode> {
    let n = bins.n_rows;
    let d = bins.n_cols;
    let k_features = ((params.feature_subsample * d as f64).ceil() as usize).clamp(1, d);
    let cfg = CartConfig {
        max_depth: params.max_depth,
        min_leaf: FOREST_MIN_LEAF,
    };
    let mut trees = Vec::with_capacity(params.n_trees as usize);
    for t in 0..u64::from(params.n_trees) {
        let mut rng = SplitMix64::new(derive_seed(seed, &[0xf0e5, t]));
        let weights: Vec<u32> = if params.bootstrap {
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.next_range(n as u64) as usize] += 1;
            }
            counts
        } else {
            vec![1; n]
        };
        let pool: Vec<usize> = (0..d).collect();
        let node_rng = SplitMix64::new(rng.next_u64());
        trees.push(build_cart_mtry(
            bins,
            labels,
            &weights,
            &pool,
            k_features,
            Some(node_rng),
            &cfg,
        ));
    }
    trees
}

pub fn score_forest(trees: &[TreeNode], row: &[f64]) -> f64 {
    if trees.is_empty() {
        return 0.5;
    }
    trees.iter().map(|t| t.score(row)).sum::<f64>() / trees.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, TabularDataset};
    use crate::learn::cart::build_cart;
    use crate::learn::matrix::FeatureMatrix;

    fn matrix_of(rows: Vec<Vec<f64>>) -> FeatureMatrix {
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
        FeatureMatrix::from_dataset(&ds, false).unwrap()
    }

    #[test]
    fn single_unbootstrapped_tree_equals_cart() {
        let mut rng = crate::rng::SplitMix64::new(2);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|i| vec![rng.next_normal() + f64::from(i % 4 == 0) * 1.5, rng.next_normal()])
            .collect();
        let labels: Vec<u8> = (0..300).map(|i| u8::from(i % 4 == 0)).collect();
        let m = matrix_of(rows);
        let bins = BinnedMatrix::new(&m);
        let params = ForestParams {
            n_trees: 1,
            max_depth: 6,
            feature_subsample: 1.0,
            bootstrap: false,
        };
        let forest = fit_forest(&bins, &labels, &params, 99);
        let plain = build_cart(
            &bins,
            &labels,
            &vec![1; 300],
            &[0, 1],
            &CartConfig {
                max_depth: 6,
                min_leaf: FOREST_MIN_LEAF,
            },
        );
        assert_eq!(forest.len(), 1);
        assert_eq!(forest[0], plain);
        for r in 0..300 {
            assert_eq!(score_forest(&forest, m.row(r)), plain.score(m.row(r)));
        }
    }

    #[test]
    fn bootstrap_trees_differ_and_average_in_range() {
        let mut rng = crate::rng::SplitMix64::new(4);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|i| vec![rng.next_normal() + f64::from(i % 5 == 0) * 2.0, rng.next_normal()])
            .collect();
        let labels: Vec<u8> = (0..400).map(|i| u8::from(i % 5 == 0)).collect();
        let m = matrix_of(rows);
        let bins = BinnedMatrix::new(&m);
        let params = ForestParams {
            n_trees: 20,
            max_depth: 6,
            feature_subsample: 0.5,
            bootstrap: true,
        };
        let forest = fit_forest(&bins, &labels, &params, 7);
        assert_eq!(forest.len(), 20);
        assert!(forest.windows(2).any(|w| w[0] != w[1]), "all trees identical");
        for r in 0..400 {
            let s = score_forest(&forest, m.row(r));
            assert!((0.0..=1.0).contains(&s));
        }
        // deterministic
        let again = fit_forest(&bins, &labels, &params, 7);
        assert_eq!(forest, again);
    }
}
