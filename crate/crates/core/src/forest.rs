//! Extremely randomized trees for regression.
//!
//! Every tree is grown on the full training sample (no bootstrap). At each
//! node, up to K candidate features are drawn among the features that are
//! non-constant in the node, one uniformly random cut-point is drawn per
//! candidate in the open (min, max) interval of that feature, and the
//! candidate with the largest variance reduction wins. Leaves predict the
//! mean target of the samples reaching them.
//!
//! Tree `i` consumes the ChaCha8 stream `i` of the forest seed, so the
//! sequential and tree-parallel builds produce bit-identical forests.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    /// Number of trees M.
    pub n_trees: usize,
    /// Candidate features per split K; `None` means all features.
    pub k_features: Option<usize>,
    /// Minimum node size still eligible for splitting, n_min.
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            k_features: None,
            min_samples_split: 5,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParam("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParam("min_samples_split must be >= 2".into()));
        }
        if let Some(k) = self.k_features {
            if k == 0 || k > n_features {
                return Err(Error::InvalidParam(format!(
                    "k_features {k} out of range [1, {n_features}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature_index: usize,
        threshold: f64,
        impurity_decrease: f64,
        n_samples: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature_index] < *threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub params: ForestParams,
    pub n_features: usize,
    /// Normalized impurity-based importances; all zero if no split occurred.
    pub feature_importances: Vec<f64>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    d: usize,
    k: usize,
    n_min: usize,
    n_total: f64,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn node_mean(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }

    /// Variance of y over the node, computed two-pass around the node mean.
    fn node_variance(&self, idx: &[usize], mean: f64) -> f64 {
        idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum::<f64>() / idx.len() as f64
    }

    fn feature_range(&self, idx: &[usize], f: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in idx {
            let v = self.x[i][f];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Variance reduction of splitting at `threshold`; returns None when a
    /// side would be empty (cannot happen for thresholds in the open range).
    fn score_split(&self, idx: &[usize], f: usize, threshold: f64, mean: f64, var: f64) -> Option<f64> {
        let mut n_l = 0usize;
        let mut sum_l = 0.0;
        let mut sq_l = 0.0;
        let mut sum_r = 0.0;
        let mut sq_r = 0.0;
        for &i in idx {
            let dy = self.y[i] - mean;
            if self.x[i][f] < threshold {
                n_l += 1;
                sum_l += dy;
                sq_l += dy * dy;
            } else {
                sum_r += dy;
                sq_r += dy * dy;
            }
        }
        let n = idx.len();
        let n_r = n - n_l;
        if n_l == 0 || n_r == 0 {
            return None;
        }
        let var_l = sq_l / n_l as f64 - (sum_l / n_l as f64).powi(2);
        let var_r = sq_r / n_r as f64 - (sum_r / n_r as f64).powi(2);
        let reduction =
            var - (n_l as f64 / n as f64) * var_l - (n_r as f64 / n as f64) * var_r;
        Some(reduction.max(0.0))
    }

    fn build(&self, idx: Vec<usize>, rng: &mut ChaCha8Rng) -> TreeNode {
        let n = idx.len();
        let mean = self.node_mean(&idx);
        let leaf = |n: usize| TreeNode::Leaf { value: mean, n_samples: n };

        if n < self.n_min {
            return leaf(n);
        }
        let var = self.node_variance(&idx, mean);
        if var == 0.0 {
            return leaf(n);
        }

        // Only features that vary within the node are candidates.
        let mut usable: Vec<(usize, f64, f64)> = Vec::new();
        for f in 0..self.d {
            let (lo, hi) = self.feature_range(&idx, f);
            if hi > lo {
                usable.push((f, lo, hi));
            }
        }
        if usable.is_empty() {
            return leaf(n);
        }

        let k = self.k.min(usable.len());
        let chosen = sample_indices(rng, usable.len(), k);

        let mut best: Option<BestSplit> = None;
        for ci in chosen.iter() {
            let (f, lo, hi) = usable[ci];
            let Some(threshold) = draw_cut_point(rng, lo, hi) else {
                continue;
            };
            let Some(score) = self.score_split(&idx, f, threshold, mean, var) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    score > b.score
                        || (score == b.score
                            && (f < b.feature || (f == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(BestSplit { feature: f, threshold, score });
            }
        }
        let Some(best) = best else {
            return leaf(n);
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[i][best.feature] < best.threshold);

        TreeNode::Split {
            feature_index: best.feature,
            threshold: best.threshold,
            impurity_decrease: best.score,
            n_samples: n,
            left: Box::new(self.build(left_idx, rng)),
            right: Box::new(self.build(right_idx, rng)),
        }
    }
}

/// Uniform draw from the open interval (lo, hi). Gives up when the interval
/// holds no representable point strictly between the bounds.
fn draw_cut_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Option<f64> {
    for _ in 0..64 {
        let t = lo + rng.random::<f64>() * (hi - lo);
        if t > lo && t < hi {
            return Some(t);
        }
    }
    None
}

fn check_training_input(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput("forest fit".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::EmptyInput("forest fit: zero features".into()));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("training features".into()));
        }
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("training targets".into()));
    }
    Ok(d)
}

fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

fn fit_impl(x: &[Vec<f64>], y: &[f64], params: ForestParams, parallel: bool) -> Result<ForestModel> {
    let d = check_training_input(x, y)?;
    params.validate(d)?;
    let builder = Builder {
        x,
        y,
        d,
        k: params.k_features.unwrap_or(d),
        n_min: params.min_samples_split,
        n_total: x.len() as f64,
    };
    let grow = |i: usize| {
        let mut rng = tree_rng(params.seed, i);
        builder.build((0..x.len()).collect(), &mut rng)
    };
    let trees: Vec<TreeNode> = if parallel {
        (0..params.n_trees).into_par_iter().map(grow).collect()
    } else {
        (0..params.n_trees).map(grow).collect()
    };

    let mut importances = vec![0.0; d];
    for tree in &trees {
        accumulate_importance(tree, builder.n_total, &mut importances);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in &mut importances {
            *v /= total;
        }
    }

    Ok(ForestModel {
        trees,
        params,
        n_features: d,
        feature_importances: importances,
    })
}

fn accumulate_importance(node: &TreeNode, n_total: f64, acc: &mut [f64]) {
    if let TreeNode::Split {
        feature_index,
        impurity_decrease,
        n_samples,
        left,
        right,
        ..
    } = node
    {
        acc[*feature_index] += (*n_samples as f64 / n_total) * impurity_decrease;
        accumulate_importance(left, n_total, acc);
        accumulate_importance(right, n_total, acc);
    }
}

/// Fit the forest, growing trees in parallel.
pub fn fit_extra_trees(x: &[Vec<f64>], y: &[f64], params: ForestParams) -> Result<ForestModel> {
    fit_impl(x, y, params, true)
}

/// Sequential build; produces a forest identical to [`fit_extra_trees`].
pub fn fit_extra_trees_sequential(
    x: &[Vec<f64>],
    y: &[f64],
    params: ForestParams,
) -> Result<ForestModel> {
    fit_impl(x, y, params, false)
}

/// Ensemble-mean prediction.
pub fn predict_forest(model: &ForestModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    x.iter()
        .map(|row| {
            if row.len() != model.n_features {
                return Err(Error::DimensionMismatch {
                    expected: model.n_features,
                    got: row.len(),
                });
            }
            let sum: f64 = model.trees.iter().map(|t| t.predict(row)).sum();
            Ok(sum / model.trees.len() as f64)
        })
        .collect()
}

pub fn feature_importance(model: &ForestModel) -> &[f64] {
    &model.feature_importances
}

// ---- versioned JSON serialization (trees flattened in preorder) ----

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FlatNode {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature_index: usize,
        threshold: f64,
        impurity_decrease: f64,
        n_samples: usize,
        left: usize,
        right: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    params: ForestParams,
    n_features: usize,
    feature_importances: Vec<f64>,
    trees: Vec<Vec<FlatNode>>,
}

fn flatten(node: &TreeNode, out: &mut Vec<FlatNode>) -> usize {
    let slot = out.len();
    match node {
        TreeNode::Leaf { value, n_samples } => {
            out.push(FlatNode::Leaf { value: *value, n_samples: *n_samples });
        }
        TreeNode::Split {
            feature_index,
            threshold,
            impurity_decrease,
            n_samples,
            left,
            right,
        } => {
            out.push(FlatNode::Split {
                feature_index: *feature_index,
                threshold: *threshold,
                impurity_decrease: *impurity_decrease,
                n_samples: *n_samples,
                left: 0,
                right: 0,
            });
            let l = flatten(left, out);
            let r = flatten(right, out);
            if let FlatNode::Split { left, right, .. } = &mut out[slot] {
                *left = l;
                *right = r;
            }
        }
    }
    slot
}

fn unflatten(nodes: &[FlatNode], at: usize) -> Result<TreeNode> {
    match nodes.get(at) {
        None => Err(Error::Schema(format!("model document: node index {at} out of range"))),
        Some(FlatNode::Leaf { value, n_samples }) => Ok(TreeNode::Leaf {
            value: *value,
            n_samples: *n_samples,
        }),
        Some(FlatNode::Split {
            feature_index,
            threshold,
            impurity_decrease,
            n_samples,
            left,
            right,
        }) => Ok(TreeNode::Split {
            feature_index: *feature_index,
            threshold: *threshold,
            impurity_decrease: *impurity_decrease,
            n_samples: *n_samples,
            left: Box::new(unflatten(nodes, *left)?),
            right: Box::new(unflatten(nodes, *right)?),
        }),
    }
}

impl ForestModel {
    pub fn to_json(&self) -> Result<String> {
        let trees = self
            .trees
            .iter()
            .map(|t| {
                let mut flat = Vec::new();
                flatten(t, &mut flat);
                flat
            })
            .collect();
        let doc = ModelDoc {
            version: MODEL_FORMAT_VERSION,
            params: self.params,
            n_features: self.n_features,
            feature_importances: self.feature_importances.clone(),
            trees,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {}",
                doc.version
            )));
        }
        let trees = doc
            .trees
            .iter()
            .map(|nodes| unflatten(nodes, 0))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForestModel {
            trees,
            params: doc.params,
            n_features: doc.n_features,
            feature_importances: doc.feature_importances,
        })
    }
}
