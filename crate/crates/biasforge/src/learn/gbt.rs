//! Gradient-boosted regression trees for the weighted logistic loss.
//!
//! Features are quantile-binned once per fit (up to 256 bins); each round
//! fits a depth-wise histogram tree to the gradient/hessian pairs, with
//! second-order leaf weights value = -G / (H + lambda) and optional row
//! subsampling. Split thresholds are emitted as real cut values so a
//! finished tree routes raw feature vectors exactly as the binned training
//! rows were routed.

use crate::learn::bins::BinnedMatrix;
use crate::learn::cart::TreeNode;
use crate::learn::logreg::sigmoid;
use crate::learn::matrix::FeatureMatrix;
use crate::learn::GbtParams;
use crate::rng::{derive_seed, SplitMix64};

const LAMBDA: f64 = 1.0;
const MIN_CHILD_HESSIAN: f64 = 1.0;
const GAIN_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GbtModel {
    pub base_score: f64,
    /// Leaf values already scaled by the learning rate.
    pub trees: Vec<TreeNode>,
}

impl GbtModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut f = self.base_score;
        for tree in &self.trees {
            f += tree.score(row);
        }
        sigmoid(f)
    }
}

pub struct GbtFit {
    pub model: GbtModel,
    pub loss_trace: Vec<f64>,
    pub converged: bool,
}

enum RawNode {
    Pending,
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        bin: u8,
        left: usize,
        right: usize,
    },
}

struct Frontier {
    node: usize,
    rows: Vec<u32>,
    g_sum: f64,
    h_sum: f64,
}

/// Fit one histogram tree on the given rows. Leaf values are scaled by
/// `learning_rate` before being stored.
fn fit_tree(
    bins: &BinnedMatrix,
    d: usize,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<u32>,
    params: &GbtParams,
) -> Vec<RawNode> {
    let (g0, h0) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
        (g + grad[r as usize], h + hess[r as usize])
    });
    let mut raw = vec![RawNode::Pending];
    let mut frontier = vec![Frontier {
        node: 0,
        rows,
        g_sum: g0,
        h_sum: h0,
    }];
    let mut hist: Vec<(f64, f64)> = vec![(0.0, 0.0); bins.total_bins];

    for depth in 0..=params.max_depth {
        let mut next = Vec::new();
        for item in frontier {
            let leafify = |raw: &mut Vec<RawNode>| {
                raw[item.node] = RawNode::Leaf {
                    value: -item.g_sum / (item.h_sum + LAMBDA) * params.learning_rate,
                };
            };
            if depth == params.max_depth
                || item.h_sum < 2.0 * MIN_CHILD_HESSIAN
                || item.rows.len() < 2
            {
                leafify(&mut raw);
                continue;
            }

            hist.iter_mut().for_each(|e| *e = (0.0, 0.0));
            for &r in &item.rows {
                let r = r as usize;
                let base = r * d;
                let (g, h) = (grad[r], hess[r]);
                for c in 0..d {
                    let slot = bins.offsets[c] + bins.codes[base + c] as usize;
                    let e = &mut hist[slot];
                    e.0 += g;
                    e.1 += h;
                }
            }

            let parent_score = item.g_sum * item.g_sum / (item.h_sum + LAMBDA);
            let mut best: Option<(f64, usize, u8)> = None;
            for c in 0..d {
                let n_bins = bins.n_bins(c);
                let (mut gl, mut hl) = (0.0, 0.0);
                // the last bin has no right side
                for b in 0..n_bins.saturating_sub(1) {
                    let e = hist[bins.offsets[c] + b];
                    gl += e.0;
                    hl += e.1;
                    let hr = item.h_sum - hl;
                    if hl < MIN_CHILD_HESSIAN || hr < MIN_CHILD_HESSIAN {
                        continue;
                    }
                    let gr = item.g_sum - gl;
                    let score = gl * gl / (hl + LAMBDA) + gr * gr / (hr + LAMBDA);
                    if score > parent_score + GAIN_EPS
                        && best.is_none_or(|(s, _, _)| score > s + GAIN_EPS)
                    {
                        best = Some((score, c, b as u8));
                    }
                }
            }

            let Some((_, feature, bin)) = best else {
                leafify(&mut raw);
                continue;
            };

            let mut left_rows = Vec::new();
            let mut right_rows = Vec::new();
            let (mut gl, mut hl) = (0.0, 0.0);
            for &r in &item.rows {
                if bins.codes[r as usize * d + feature] <= bin {
                    gl += grad[r as usize];
                    hl += hess[r as usize];
                    left_rows.push(r);
                } else {
                    right_rows.push(r);
                }
            }
            let left = raw.len();
            raw.push(RawNode::Pending);
            let right = raw.len();
            raw.push(RawNode::Pending);
            raw[item.node] = RawNode::Split {
                feature,
                bin,
                left,
                right,
            };
            next.push(Frontier {
                node: left,
                rows: left_rows,
                g_sum: gl,
                h_sum: hl,
            });
            next.push(Frontier {
                node: right,
                rows: right_rows,
                g_sum: item.g_sum - gl,
                h_sum: item.h_sum - hl,
            });
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    raw
}

fn raw_leaf_value(raw: &[RawNode], d: usize, codes: &[u8], row: usize) -> f64 {
    let mut idx = 0;
    loop {
        match &raw[idx] {
            RawNode::Leaf { value } => return *value,
            RawNode::Split {
                feature,
                bin,
                left,
                right,
            } => {
                idx = if codes[row * d + feature] <= *bin {
                    *left
                } else {
                    *right
                };
            }
            RawNode::Pending => unreachable!("tree fully built"),
        }
    }
}

fn raw_to_tree(raw: &[RawNode], bins: &BinnedMatrix, idx: usize) -> TreeNode {
    match &raw[idx] {
        RawNode::Leaf { value } => TreeNode::Leaf { value: *value },
        RawNode::Split {
            feature,
            bin,
            left,
            right,
        } => TreeNode::Split {
            feature: *feature,
            threshold: bins.cuts[*feature][*bin as usize],
            left: Box::new(raw_to_tree(raw, bins, *left)),
            right: Box::new(raw_to_tree(raw, bins, *right)),
        },
        RawNode::Pending => unreachable!("tree fully built"),
    }
}

pub fn fit_gbt(m: &FeatureMatrix, labels: &[u8], params: &GbtParams, seed: u64) -> GbtFit {
    let n = m.n_rows();
    let d = m.n_cols();
    let bins = BinnedMatrix::new(m);

    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = n - n_pos;
    let w_pos = if n_pos > 0 { n_neg as f64 / n_pos as f64 } else { 1.0 };
    let weight = |y: u8| if y == 1 { w_pos } else { 1.0 };
    let weight_sum: f64 = labels.iter().map(|&y| weight(y)).sum();

    // weighted prior log-odds; exactly 0 under inverse-frequency weighting
    let pos_weight: f64 = labels.iter().filter(|&&y| y == 1).map(|&y| weight(y)).sum();
    let neg_weight = weight_sum - pos_weight;
    let base_score = if pos_weight > 0.0 && neg_weight > 0.0 {
        (pos_weight / neg_weight).ln()
    } else {
        0.0
    };

    let mut f = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees: Vec<TreeNode> = Vec::with_capacity(params.n_rounds as usize);
    let mut loss_trace = Vec::with_capacity(params.n_rounds as usize);
    let mut rng = SplitMix64::new(derive_seed(seed, &[0x9b7]));
    let mut idx_buf: Vec<u32> = (0..n as u32).collect();
    let k = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut converged = true;

    for _round in 0..params.n_rounds {
        let mut loss = 0.0;
        for r in 0..n {
            let p = sigmoid(f[r]);
            let w = weight(labels[r]);
            grad[r] = w * (p - f64::from(labels[r]));
            hess[r] = w * p * (1.0 - p);
            let pc = p.clamp(1e-12, 1.0 - 1e-12);
            loss -= w * if labels[r] == 1 { pc.ln() } else { (1.0 - pc).ln() };
        }
        loss /= weight_sum;
        loss_trace.push(loss);
        if !loss.is_finite() {
            converged = false;
            break;
        }

        let rows: Vec<u32> = if k == n {
            idx_buf.clone()
        } else {
            for i in 0..n {
                idx_buf[i] = i as u32;
            }
            for i in 0..k {
                let j = i + rng.next_range((n - i) as u64) as usize;
                idx_buf.swap(i, j);
            }
            idx_buf[..k].to_vec()
        };

        let raw = fit_tree(&bins, d, &grad, &hess, rows, params);
        // stop once the booster degenerates to a do-nothing root leaf
        if raw.len() == 1 {
            if let RawNode::Leaf { value } = raw[0] {
                if value.abs() < 1e-12 {
                    break;
                }
            }
        }
        for (r, fr) in f.iter_mut().enumerate() {
            *fr += raw_leaf_value(&raw, d, &bins.codes, r);
        }
        trees.push(raw_to_tree(&raw, &bins, 0));
    }

    GbtFit {
        model: GbtModel { base_score, trees },
        loss_trace,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, TabularDataset};
    use crate::eval::roc_auc;

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

    fn default_params() -> GbtParams {
        GbtParams {
            n_rounds: 40,
            learning_rate: 0.2,
            max_depth: 3,
            subsample: 1.0,
        }
    }

    #[test]
    fn learns_separable_data() {
        let mut rng = crate::rng::SplitMix64::new(5);
        let rows: Vec<Vec<f64>> = (0..800)
            .map(|i| {
                let shift = if i % 4 == 0 { 2.0 } else { 0.0 };
                vec![rng.next_normal() + shift, rng.next_normal()]
            })
            .collect();
        let labels: Vec<u8> = (0..800).map(|i| u8::from(i % 4 == 0)).collect();
        let m = matrix_of(rows);
        let fit = fit_gbt(&m, &labels, &default_params(), 3);
        assert!(fit.converged);
        let scores: Vec<f64> = (0..800).map(|r| fit.model.score_row(m.row(r))).collect();
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!(auc > 0.9, "train auc {auc}");
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s) && s.is_finite()));
    }

    #[test]
    fn learns_xor_with_depth_two() {
        let mut rng = crate::rng::SplitMix64::new(7);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.next_f64(), rng.next_f64()])
            .collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| u8::from((r[0] > 0.5) ^ (r[1] > 0.5)))
            .collect();
        let m = matrix_of(rows);
        let fit = fit_gbt(
            &m,
            &labels,
            &GbtParams {
                n_rounds: 60,
                learning_rate: 0.3,
                max_depth: 2,
                subsample: 1.0,
            },
            1,
        );
        let scores: Vec<f64> = (0..400).map(|r| fit.model.score_row(m.row(r))).collect();
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!(auc > 0.95, "xor auc {auc}");
    }

    #[test]
    fn loss_decreases_monotonically_without_subsampling() {
        let mut rng = crate::rng::SplitMix64::new(11);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|i| vec![rng.next_normal() + f64::from(i % 3 == 0)])
            .collect();
        let labels: Vec<u8> = (0..500).map(|i| u8::from(i % 3 == 0)).collect();
        let m = matrix_of(rows);
        let fit = fit_gbt(&m, &labels, &default_params(), 2);
        for w in fit.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn deterministic_with_subsampling() {
        let mut rng = crate::rng::SplitMix64::new(13);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.next_normal(), rng.next_normal()]).collect();
        let labels: Vec<u8> = (0..300).map(|i| u8::from(i % 5 == 0)).collect();
        let m = matrix_of(rows);
        let params = GbtParams {
            subsample: 0.7,
            ..default_params()
        };
        let a = fit_gbt(&m, &labels, &params, 9);
        let b = fit_gbt(&m, &labels, &params, 9);
        assert_eq!(a.model, b.model);
        let c = fit_gbt(&m, &labels, &params, 10);
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn base_score_is_zero_under_inverse_frequency_weighting() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 3)).collect();
        let m = matrix_of(rows);
        let fit = fit_gbt(&m, &labels, &default_params(), 0);
        assert_eq!(fit.model.base_score, 0.0);
    }
}
