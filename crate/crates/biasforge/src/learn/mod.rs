//! Fairness-blind classifiers with probability scores, an awareness toggle
//! (whether the protected column is a training feature), random
//! hyperparameter sampling from per-algorithm grids, and a versioned text
//! serialization for bit-exact model reload.

pub mod bins;
pub mod cart;
pub mod forest;
pub mod gbt;
pub mod logreg;
pub mod matrix;

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use bins::BinnedMatrix;
use cart::{build_cart, CartConfig, TreeNode};
use forest::{fit_forest, score_forest};
use gbt::{fit_gbt, GbtModel};
use logreg::{fit_logreg, LogRegModel};
use matrix::FeatureMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[serde(rename = "logreg")]
    LogReg,
    Tree,
    Forest,
    Gbt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::LogReg,
        Algorithm::Tree,
        Algorithm::Forest,
        Algorithm::Gbt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::LogReg => "logreg",
            Algorithm::Tree => "tree",
            Algorithm::Forest => "forest",
            Algorithm::Gbt => "gbt",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeParams {
    pub max_depth: u32,
    pub min_leaf: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub n_trees: u32,
    pub max_depth: u32,
    pub feature_subsample: f64,
    pub bootstrap: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbtParams {
    pub n_rounds: u32,
    pub learning_rate: f64,
    pub max_depth: u32,
    pub subsample: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HyperParams {
    LogReg(LogRegParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Gbt(GbtParams),
}

impl HyperParams {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            HyperParams::LogReg(_) => Algorithm::LogReg,
            HyperParams::Tree(_) => Algorithm::Tree,
            HyperParams::Forest(_) => Algorithm::Forest,
            HyperParams::Gbt(_) => Algorithm::Gbt,
        }
    }

    fn render(&self) -> String {
        match self {
            HyperParams::LogReg(p) => format!(
                "learning_rate={} l2={} epochs={}",
                p.learning_rate, p.l2, p.epochs
            ),
            HyperParams::Tree(p) => format!("max_depth={} min_leaf={}", p.max_depth, p.min_leaf),
            HyperParams::Forest(p) => format!(
                "n_trees={} max_depth={} feature_subsample={} bootstrap={}",
                p.n_trees, p.max_depth, p.feature_subsample, p.bootstrap
            ),
            HyperParams::Gbt(p) => format!(
                "n_rounds={} learning_rate={} max_depth={} subsample={}",
                p.n_rounds, p.learning_rate, p.max_depth, p.subsample
            ),
        }
    }

    fn parse(algorithm: Algorithm, pairs: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| -> Result<&str> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Model(format!("missing hyperparameter '{key}'")))
        };
        let f = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::Model(format!("bad hyperparameter '{key}'")))
        };
        let u = |key: &str| -> Result<u32> {
            get(key)?
                .parse()
                .map_err(|_| Error::Model(format!("bad hyperparameter '{key}'")))
        };
        Ok(match algorithm {
            Algorithm::LogReg => HyperParams::LogReg(LogRegParams {
                learning_rate: f("learning_rate")?,
                l2: f("l2")?,
                epochs: u("epochs")?,
            }),
            Algorithm::Tree => HyperParams::Tree(TreeParams {
                max_depth: u("max_depth")?,
                min_leaf: u64::from(u("min_leaf")?),
            }),
            Algorithm::Forest => HyperParams::Forest(ForestParams {
                n_trees: u("n_trees")?,
                max_depth: u("max_depth")?,
                feature_subsample: f("feature_subsample")?,
                bootstrap: get("bootstrap")? == "true",
            }),
            Algorithm::Gbt => HyperParams::Gbt(GbtParams {
                n_rounds: u("n_rounds")?,
                learning_rate: f("learning_rate")?,
                max_depth: u("max_depth")?,
                subsample: f("subsample")?,
            }),
        })
    }
}

/// One model configuration: algorithm, hyperparameters, whether the
/// protected column is a feature, and the training seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub params: HyperParams,
    pub awareness: bool,
    pub seed: u64,
}

impl ModelSpec {
    pub fn algorithm(&self) -> Algorithm {
        self.params.algorithm()
    }

    pub fn with_awareness(mut self, awareness: bool) -> Self {
        self.awareness = awareness;
        self
    }

    /// Stable identifier used in reports and deterministic tie-breaking.
    /// Semicolon-separated so it embeds safely in CSV cells.
    pub fn spec_id(&self) -> String {
        format!(
            "{}({})",
            self.algorithm(),
            self.params.render().replace(' ', ";")
        )
    }
}

/// Per-dimension sampling bounds, shared by every experiment.
mod grid {
    pub const LOGREG_LR: (f64, f64) = (1e-3, 1e-1);
    pub const LOGREG_L2: (f64, f64) = (1e-6, 1e-1);
    pub const LOGREG_EPOCHS: (u64, u64) = (10, 100);
    pub const TREE_DEPTH: (u64, u64) = (2, 12);
    pub const TREE_MIN_LEAF: (u64, u64) = (5, 200);
    pub const FOREST_TREES: (u64, u64) = (25, 200);
    pub const FOREST_DEPTH: (u64, u64) = (4, 16);
    pub const FOREST_FEATURE_SUBSAMPLE: (f64, f64) = (0.3, 1.0);
    pub const GBT_ROUNDS: (u64, u64) = (50, 300);
    pub const GBT_LR: (f64, f64) = (0.02, 0.3);
    pub const GBT_DEPTH: (u64, u64) = (2, 6);
    pub const GBT_SUBSAMPLE: (f64, f64) = (0.5, 1.0);
}

fn uniform_int(rng: &mut SplitMix64, (lo, hi): (u64, u64)) -> u64 {
    lo + rng.next_range(hi - lo + 1)
}

/// Draw `count` specs uniformly and independently per grid dimension.
/// Duplicates are permitted; awareness defaults to false (toggled by the
/// caller per run). Deterministic in (algorithm, count, seed).
pub fn sample_hyperparams(algorithm: Algorithm, count: u32, seed: u64) -> Result<Vec<ModelSpec>> {
    if count == 0 {
        return Err(Error::Config("hyperparameter sample count must be positive".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut specs = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let params = match algorithm {
            Algorithm::LogReg => HyperParams::LogReg(LogRegParams {
                learning_rate: rng.next_log_uniform(grid::LOGREG_LR.0, grid::LOGREG_LR.1),
                l2: rng.next_log_uniform(grid::LOGREG_L2.0, grid::LOGREG_L2.1),
                epochs: uniform_int(&mut rng, grid::LOGREG_EPOCHS) as u32,
            }),
            Algorithm::Tree => HyperParams::Tree(TreeParams {
                max_depth: uniform_int(&mut rng, grid::TREE_DEPTH) as u32,
                min_leaf: uniform_int(&mut rng, grid::TREE_MIN_LEAF),
            }),
            Algorithm::Forest => HyperParams::Forest(ForestParams {
                n_trees: uniform_int(&mut rng, grid::FOREST_TREES) as u32,
                max_depth: uniform_int(&mut rng, grid::FOREST_DEPTH) as u32,
                feature_subsample: rng.next_uniform(
                    grid::FOREST_FEATURE_SUBSAMPLE.0,
                    grid::FOREST_FEATURE_SUBSAMPLE.1,
                ),
                bootstrap: true,
            }),
            Algorithm::Gbt => HyperParams::Gbt(GbtParams {
                n_rounds: uniform_int(&mut rng, grid::GBT_ROUNDS) as u32,
                learning_rate: rng.next_log_uniform(grid::GBT_LR.0, grid::GBT_LR.1),
                max_depth: uniform_int(&mut rng, grid::GBT_DEPTH) as u32,
                subsample: rng.next_uniform(grid::GBT_SUBSAMPLE.0, grid::GBT_SUBSAMPLE.1),
            }),
        };
        specs.push(ModelSpec {
            params,
            awareness: false,
            seed: rng.next_u64(),
        });
    }
    Ok(specs)
}

/// Check a sampled spec against its grid bounds.
pub fn within_grid(params: &HyperParams) -> bool {
    let inr = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    let ini = |v: u64, (lo, hi): (u64, u64)| v >= lo && v <= hi;
    match params {
        HyperParams::LogReg(p) => {
            inr(p.learning_rate, grid::LOGREG_LR)
                && inr(p.l2, grid::LOGREG_L2)
                && ini(u64::from(p.epochs), grid::LOGREG_EPOCHS)
        }
        HyperParams::Tree(p) => {
            ini(u64::from(p.max_depth), grid::TREE_DEPTH) && ini(p.min_leaf, grid::TREE_MIN_LEAF)
        }
        HyperParams::Forest(p) => {
            ini(u64::from(p.n_trees), grid::FOREST_TREES)
                && ini(u64::from(p.max_depth), grid::FOREST_DEPTH)
                && inr(p.feature_subsample, grid::FOREST_FEATURE_SUBSAMPLE)
        }
        HyperParams::Gbt(p) => {
            ini(u64::from(p.n_rounds), grid::GBT_ROUNDS)
                && inr(p.learning_rate, grid::GBT_LR)
                && ini(u64::from(p.max_depth), grid::GBT_DEPTH)
                && inr(p.subsample, grid::GBT_SUBSAMPLE)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedParams {
    LogReg(LogRegModel),
    Tree(TreeNode),
    Forest(Vec<TreeNode>),
    Gbt(GbtModel),
}

/// A fitted model plus the exact feature list it consumes and training
/// metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub features: Vec<String>,
    pub fitted: FittedParams,
    pub iterations: u32,
    pub loss_trace: Vec<f64>,
    pub converged: bool,
}

/// Fit a model on a dataset. The training partition must contain both
/// classes; with awareness the protected column must be present.
pub fn fit(spec: &ModelSpec, train: &TabularDataset) -> Result<TrainedModel> {
    let m = FeatureMatrix::from_dataset(train, spec.awareness)?;
    fit_matrix(spec, &m, train.labels())
}

/// Fit against an already-extracted feature matrix (the runner's fast path;
/// many specs share one matrix).
pub fn fit_matrix(spec: &ModelSpec, m: &FeatureMatrix, labels: &[u8]) -> Result<TrainedModel> {
    if labels.len() != m.n_rows() {
        return Err(Error::Model("labels and matrix differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::Model("single-class training data".into()));
    }
    let (fitted, iterations, loss_trace, converged) = match &spec.params {
        HyperParams::LogReg(p) => {
            let out = fit_logreg(m, labels, p, spec.seed);
            (
                FittedParams::LogReg(out.model),
                p.epochs,
                out.loss_trace,
                out.converged,
            )
        }
        HyperParams::Tree(p) => {
            let bins = BinnedMatrix::new(m);
            let features: Vec<usize> = (0..m.n_cols()).collect();
            let tree = build_cart(
                &bins,
                labels,
                &vec![1; m.n_rows()],
                &features,
                &CartConfig {
                    max_depth: p.max_depth,
                    min_leaf: p.min_leaf,
                },
            );
            (FittedParams::Tree(tree), 1, Vec::new(), true)
        }
        HyperParams::Forest(p) => {
            let bins = BinnedMatrix::new(m);
            let trees = fit_forest(&bins, labels, p, spec.seed);
            (FittedParams::Forest(trees), p.n_trees, Vec::new(), true)
        }
        HyperParams::Gbt(p) => {
            let out = fit_gbt(m, labels, p, spec.seed);
            let rounds = out.model.trees.len() as u32;
            (
                FittedParams::Gbt(out.model),
                rounds,
                out.loss_trace,
                out.converged,
            )
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        features: m.names().to_vec(),
        fitted,
        iterations,
        loss_trace,
        converged,
    })
}

/// Score a dataset: one probability per row. The dataset must contain every
/// feature in the model's feature list.
pub fn predict(model: &TrainedModel, ds: &TabularDataset) -> Result<Vec<f64>> {
    let m = FeatureMatrix::select(ds, &model.features)?;
    predict_matrix(model, &m)
}

pub fn predict_matrix(model: &TrainedModel, m: &FeatureMatrix) -> Result<Vec<f64>> {
    if m.names() != model.features.as_slice() {
        return Err(Error::Model("feature list mismatch".into()));
    }
    let scores = (0..m.n_rows())
        .map(|r| {
            let row = m.row(r);
            match &model.fitted {
                FittedParams::LogReg(lr) => lr.score_row(row),
                FittedParams::Tree(tree) => tree.score(row),
                FittedParams::Forest(trees) => score_forest(trees, row),
                FittedParams::Gbt(gbt) => gbt.score_row(row),
            }
        })
        .collect();
    Ok(scores)
}

// --- model persistence -----------------------------------------------------

#[derive(Debug)]
enum FlatNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

fn flatten_tree(root: &TreeNode, out: &mut Vec<Option<FlatNode>>) -> usize {
    let idx = out.len();
    out.push(None);
    match root {
        TreeNode::Leaf { value } => out[idx] = Some(FlatNode::Leaf(*value)),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let l = flatten_tree(left, out);
            let r = flatten_tree(right, out);
            out[idx] = Some(FlatNode::Split {
                feature: *feature,
                threshold: *threshold,
                left: l,
                right: r,
            });
        }
    }
    idx
}

fn render_tree(root: &TreeNode, out: &mut String) {
    use std::fmt::Write;
    let mut nodes = Vec::new();
    flatten_tree(root, &mut nodes);
    out.push_str("tree\n");
    for (i, node) in nodes.iter().enumerate() {
        match node.as_ref().expect("flatten fills every slot") {
            FlatNode::Leaf(v) => writeln!(out, "node {i} leaf {v}").unwrap(),
            FlatNode::Split {
                feature,
                threshold,
                left,
                right,
            } => writeln!(out, "node {i} split {feature} {threshold} {left} {right}").unwrap(),
        }
    }
    out.push_str("end\n");
}

fn rebuild_tree(nodes: &[FlatNode], idx: usize, depth: u32) -> Result<TreeNode> {
    if depth > 64 {
        return Err(Error::Model("tree serialization exceeds depth bound".into()));
    }
    match nodes
        .get(idx)
        .ok_or_else(|| Error::Model(format!("tree node {idx} out of range")))?
    {
        FlatNode::Leaf(v) => Ok(TreeNode::Leaf { value: *v }),
        FlatNode::Split {
            feature,
            threshold,
            left,
            right,
        } => Ok(TreeNode::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(rebuild_tree(nodes, *left, depth + 1)?),
            right: Box::new(rebuild_tree(nodes, *right, depth + 1)?),
        }),
    }
}

fn render_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Render a model in the versioned `.model` text format. Floats use the
/// shortest decimal form that round-trips, so reload is bit-exact.
pub fn render_model(model: &TrainedModel) -> String {
    use std::fmt::Write;
    let mut out = String::from("biasforge model v1\n");
    writeln!(out, "algorithm {}", model.spec.algorithm()).unwrap();
    writeln!(out, "awareness {}", model.spec.awareness).unwrap();
    writeln!(out, "spec_seed {}", model.spec.seed).unwrap();
    writeln!(out, "params {}", model.spec.params.render()).unwrap();
    writeln!(out, "features {}", model.features.join(",")).unwrap();
    writeln!(out, "iterations {}", model.iterations).unwrap();
    writeln!(out, "converged {}", model.converged).unwrap();
    writeln!(out, "loss {}", render_floats(&model.loss_trace)).unwrap();
    match &model.fitted {
        FittedParams::LogReg(lr) => {
            writeln!(out, "weights {}", render_floats(&lr.weights)).unwrap();
            writeln!(out, "bias {}", lr.bias).unwrap();
            writeln!(out, "means {}", render_floats(&lr.means)).unwrap();
            writeln!(out, "stds {}", render_floats(&lr.stds)).unwrap();
        }
        FittedParams::Tree(tree) => render_tree(tree, &mut out),
        FittedParams::Forest(trees) => {
            for tree in trees {
                render_tree(tree, &mut out);
            }
        }
        FittedParams::Gbt(gbt) => {
            writeln!(out, "base_score {}", gbt.base_score).unwrap();
            for tree in &gbt.trees {
                render_tree(tree, &mut out);
            }
        }
    }
    out
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_model(model)).map_err(Error::Io)
}

/// Parse a `.model` file rendered by [`render_model`].
pub fn parse_model(text: &str) -> Result<TrainedModel> {
    let bad = |msg: &str| Error::Model(format!("model parse: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some("biasforge model v1") {
        return Err(bad("missing or unsupported version header"));
    }
    let mut fields: Vec<(String, String)> = Vec::new();
    let mut trees: Vec<TreeNode> = Vec::new();
    while let Some(line) = lines.next() {
        if line.is_empty() {
            continue;
        }
        if line == "tree" {
            let mut nodes: Vec<FlatNode> = Vec::new();
            for tree_line in lines.by_ref() {
                if tree_line == "end" {
                    break;
                }
                let parts: Vec<&str> = tree_line.split(' ').collect();
                match parts.as_slice() {
                    ["node", idx, "leaf", v] => {
                        if idx.parse::<usize>().map_err(|_| bad("node index"))? != nodes.len() {
                            return Err(bad("non-sequential node index"));
                        }
                        nodes.push(FlatNode::Leaf(v.parse().map_err(|_| bad("leaf value"))?));
                    }
                    ["node", idx, "split", f, t, l, r] => {
                        if idx.parse::<usize>().map_err(|_| bad("node index"))? != nodes.len() {
                            return Err(bad("non-sequential node index"));
                        }
                        nodes.push(FlatNode::Split {
                            feature: f.parse().map_err(|_| bad("split feature"))?,
                            threshold: t.parse().map_err(|_| bad("split threshold"))?,
                            left: l.parse().map_err(|_| bad("split child"))?,
                            right: r.parse().map_err(|_| bad("split child"))?,
                        });
                    }
                    _ => return Err(bad("unrecognized tree line")),
                }
            }
            trees.push(rebuild_tree(&nodes, 0, 0)?);
        } else if let Some((key, value)) = line.split_once(' ') {
            fields.push((key.to_string(), value.to_string()));
        } else {
            fields.push((line.to_string(), String::new()));
        }
    }

    let field = |key: &str| -> Result<&str> {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| bad(&format!("missing field '{key}'")))
    };
    let floats = |key: &str| -> Result<Vec<f64>> {
        let raw = field(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(' ')
            .map(|v| v.parse().map_err(|_| bad(&format!("bad float in '{key}'"))))
            .collect()
    };

    let algorithm: Algorithm = field("algorithm")?.parse()?;
    let param_pairs: Vec<(String, String)> = field("params")?
        .split(' ')
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let spec = ModelSpec {
        params: HyperParams::parse(algorithm, &param_pairs)?,
        awareness: field("awareness")? == "true",
        seed: field("spec_seed")?
            .parse()
            .map_err(|_| bad("spec_seed"))?,
    };
    let features: Vec<String> = {
        let raw = field("features")?;
        if raw.is_empty() {
            Vec::new()
        } else {
            raw.split(',').map(str::to_string).collect()
        }
    };
    let fitted = match algorithm {
        Algorithm::LogReg => FittedParams::LogReg(LogRegModel {
            weights: floats("weights")?,
            bias: field("bias")?.parse().map_err(|_| bad("bias"))?,
            means: floats("means")?,
            stds: floats("stds")?,
        }),
        Algorithm::Tree => FittedParams::Tree(
            trees
                .into_iter()
                .next()
                .ok_or_else(|| bad("tree model without a tree block"))?,
        ),
        Algorithm::Forest => FittedParams::Forest(trees),
        Algorithm::Gbt => FittedParams::Gbt(GbtModel {
            base_score: field("base_score")?
                .parse()
                .map_err(|_| bad("base_score"))?,
            trees,
        }),
    };
    Ok(TrainedModel {
        spec,
        features,
        fitted,
        iterations: field("iterations")?
            .parse()
            .map_err(|_| bad("iterations"))?,
        loss_trace: floats("loss")?,
        converged: field("converged")? == "true",
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    parse_model(&fs::read_to_string(path)?)
}
