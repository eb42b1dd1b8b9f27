//! Random forests over weighted trees: plain training, the per-feature
//! differential-ratio vulnerability metric, the exponential weighting
//! scheme, the two-pass weighted forest, and pooled majority voting.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{bootstrap_sample, Dataset, FeatureSchema, Instance, Label};
use crate::error::{Error, Result};
use crate::rng::{derive, derive2};
use crate::tree::{
    information_gain, train_tree, DecisionTree, SplitKind, TreeNode, TreeParams, WeightVector,
};

/// How a pool was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PlainRf,
    WeightedRf { r: f64 },
    IgWeighted { r: f64 },
    SingleTree,
}

/// Per-feature modification costs. All entries strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::BadParam("cost vector must be nonempty".into()));
        }
        for (j, &c) in costs.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::BadParam(format!(
                    "cost for feature {j} must be positive and finite, got {c}"
                )));
            }
        }
        Ok(Self(costs))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, feature: usize) -> f64 {
        self.0[feature]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Parse a `feature_name,cost` CSV (no header) against a schema.
    /// Features absent from the file keep cost 1.
    pub fn from_file(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut costs = vec![1.0; schema.n_features()];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) = line.split_once(',').ok_or_else(|| {
                Error::BadParam(format!("costs line {}: expected 'name,cost'", lineno + 1))
            })?;
            let j = schema.feature_index(name.trim()).ok_or_else(|| {
                Error::BadParam(format!(
                    "costs line {}: unknown feature '{name}'",
                    lineno + 1
                ))
            })?;
            costs[j] = value.trim().parse().map_err(|_| {
                Error::BadParam(format!("costs line {}: bad cost '{value}'", lineno + 1))
            })?;
        }
        Self::new(costs)
    }
}

/// An ordered collection of trees plus the weight vector and per-feature
/// differential ratios that produced it.
#[derive(Debug, Clone)]
pub struct ModelPool {
    trees: Vec<DecisionTree>,
    weights_used: WeightVector,
    per_feature_ratio: Vec<f64>,
    provenance: Provenance,
}

impl ModelPool {
    /// Assemble a pool. The stored per-feature ratio vector is always
    /// recomputed from the given trees, never taken on trust.
    pub fn from_trees(
        trees: Vec<DecisionTree>,
        n_features: usize,
        weights_used: WeightVector,
        provenance: Provenance,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::BadParam("a model pool needs at least one tree".into()));
        }
        if weights_used.len() != n_features {
            return Err(Error::BadParam(
                "weight vector length does not match the feature count".into(),
            ));
        }
        let per_feature_ratio = per_feature_ratios(&trees, n_features);
        Ok(ModelPool {
            trees,
            weights_used,
            per_feature_ratio,
            provenance,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.weights_used.len()
    }

    pub fn weights_used(&self) -> &WeightVector {
        &self.weights_used
    }

    pub fn per_feature_ratio(&self) -> &[f64] {
        &self.per_feature_ratio
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Majority-vote the full pool on one instance.
    pub fn predict(&self, x: &Instance) -> (Label, usize) {
        predict_pool(self.trees.iter(), x)
    }
}

fn child_positive_fraction(c: &TreeNode) -> f64 {
    if c.total() == 0 {
        0.0
    } else {
        c.positives as f64 / c.total() as f64
    }
}

/// Differential ratio of the split at an internal node: how much the
/// positive-instance fraction moves when an instance is pushed to the
/// other side, scaled by the fraction of training data reaching the node.
///
/// Numeric splits compare the two children directly; multiway splits first
/// group children into majority-positive and majority-negative sides
/// (ties count as positive, matching leaf labeling) and compare the
/// groups. If either group is empty the node's ratio is zero.
pub fn node_differential_ratio(node: &TreeNode, total_training: usize) -> Result<f64> {
    let rule = node
        .split
        .as_ref()
        .ok_or_else(|| Error::BadParam("differential ratio of a leaf node".into()))?;
    if total_training == 0 {
        return Err(Error::BadParam("total training count is zero".into()));
    }
    let reach = node.total() as f64 / total_training as f64;
    let ratio = match rule.kind {
        SplitKind::NumericThreshold(_) => {
            let p_left = child_positive_fraction(&node.children[0]);
            let p_right = child_positive_fraction(&node.children[1]);
            (p_left - p_right).abs() * reach
        }
        SplitKind::CategoricalMultiway(_) => {
            let (mut pp, mut pt, mut np, mut nt) = (0usize, 0usize, 0usize, 0usize);
            for c in &node.children {
                if c.positives >= c.negatives {
                    pp += c.positives;
                    pt += c.total();
                } else {
                    np += c.positives;
                    nt += c.total();
                }
            }
            if pt == 0 || nt == 0 {
                0.0
            } else {
                (pp as f64 / pt as f64 - np as f64 / nt as f64).abs() * reach
            }
        }
    };
    Ok(ratio)
}

/// Differential ratio of one feature across a set of trees: the maximum
/// node ratio within each tree (zero where the feature is unused), summed
/// over trees and divided by the tree count.
pub fn feature_differential_ratio(feature: usize, trees: &[DecisionTree]) -> f64 {
    if trees.is_empty() {
        return 0.0;
    }
    let sum: f64 = trees
        .iter()
        .map(|t| {
            t.internal_nodes()
                .iter()
                .filter(|n| n.split.as_ref().map(|r| r.feature) == Some(feature))
                .map(|n| {
                    node_differential_ratio(n, t.total_training_count())
                        .expect("internal node has a split")
                })
                .fold(0.0f64, f64::max)
        })
        .sum();
    sum / trees.len() as f64
}

/// Differential ratios for every feature at once (one traversal per tree).
pub fn per_feature_ratios(trees: &[DecisionTree], n_features: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n_features];
    for t in trees {
        let mut tree_max = vec![0.0f64; n_features];
        for n in t.internal_nodes() {
            let j = n.split.as_ref().map(|r| r.feature).expect("internal node");
            let d = node_differential_ratio(n, t.total_training_count())
                .expect("internal node has a split");
            if d > tree_max[j] {
                tree_max[j] = d;
            }
        }
        for (s, m) in sums.iter_mut().zip(&tree_max) {
            *s += m;
        }
    }
    let m_trees = trees.len().max(1) as f64;
    sums.iter_mut().for_each(|s| *s /= m_trees);
    sums
}

/// Information-gain analogue of the differential ratio, used by the IG
/// weighting baseline: per tree, the maximum gain of nodes splitting on
/// the feature; aggregated as the mean over trees.
pub fn per_feature_max_gains(trees: &[DecisionTree], n_features: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n_features];
    for t in trees {
        let mut tree_max = vec![0.0f64; n_features];
        for n in t.internal_nodes() {
            let j = n.split.as_ref().map(|r| r.feature).expect("internal node");
            let children: Vec<(usize, usize)> = n
                .children
                .iter()
                .map(|c| (c.positives, c.negatives))
                .collect();
            let g = information_gain((n.positives, n.negatives), &children)
                .expect("counts conserved at construction");
            if g > tree_max[j] {
                tree_max[j] = g;
            }
        }
        for (s, m) in sums.iter_mut().zip(&tree_max) {
            *s += m;
        }
    }
    let m_trees = trees.len().max(1) as f64;
    sums.iter_mut().for_each(|s| *s /= m_trees);
    sums
}

/// Exponential weighting: `w_j = exp(-r * d_j / c_j)`. Weights fall with
/// vulnerability and rise with modification cost; `r = 0` gives all ones.
pub fn compute_weights(vulnerability: &[f64], costs: &CostVector, r: f64) -> Result<WeightVector> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::BadParam(format!(
            "robustness parameter r must be nonnegative and finite, got {r}"
        )));
    }
    if costs.len() != vulnerability.len() {
        return Err(Error::BadParam(
            "cost vector length does not match the vulnerability vector".into(),
        ));
    }
    let weights: Vec<f64> = vulnerability
        .iter()
        .zip(costs.as_slice())
        .map(|(&d, &c)| (-r * d / c).exp())
        .collect();
    debug_assert!(weights.iter().all(|&w| w > 0.0 && w <= 1.0));
    WeightVector::new(weights)
}

const TREE_STREAM: u64 = 0x11;
const BOOT_STREAM: u64 = 0x12;
const GROW_STREAM: u64 = 0x13;
const WRF_PASS1: u64 = 0x21;
const WRF_PASS2: u64 = 0x22;

/// Seed of the second (weighted) training pass inside [`train_wrf`];
/// exposed so the r = 0 degenerate-equivalence property is testable.
pub fn wrf_pass2_seed(seed: u64) -> u64 {
    derive(seed, WRF_PASS2)
}

/// Train `m_trees` trees, each on an independent bootstrap of the full
/// training size, with per-node random feature subsets of `subspace_size`
/// and the given split-criterion weights. Trees train in parallel;
/// per-tree seed streams make the result independent of scheduling.
pub fn train_random_forest(
    train: &Dataset,
    m_trees: usize,
    subspace_size: usize,
    weights: &WeightVector,
    params: &TreeParams,
    seed: u64,
) -> Result<ModelPool> {
    if m_trees == 0 {
        return Err(Error::BadParam("a forest needs at least one tree".into()));
    }
    let n = train.n_rows();
    let trees: Vec<DecisionTree> = (0..m_trees)
        .into_par_iter()
        .map(|i| {
            let tree_seed = derive2(seed, TREE_STREAM, i as u64);
            let boot = bootstrap_sample(train, n, derive(tree_seed, BOOT_STREAM))?;
            train_tree(
                &boot,
                weights,
                subspace_size,
                params,
                derive(tree_seed, GROW_STREAM),
            )
        })
        .collect::<Result<_>>()?;
    ModelPool::from_trees(
        trees,
        train.n_features(),
        weights.clone(),
        Provenance::PlainRf,
    )
}

/// The single-tree baseline: one unweighted, non-bootstrapped tree grown
/// with the full feature set as candidates at every node.
pub fn train_single_tree(train: &Dataset, params: &TreeParams, seed: u64) -> Result<ModelPool> {
    let m = train.n_features();
    let weights = WeightVector::uniform(m);
    let tree = train_tree(train, &weights, m, params, seed)?;
    ModelPool::from_trees(vec![tree], m, weights, Provenance::SingleTree)
}

/// Which vulnerability metric drives the weighting pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnerabilityMetric {
    DifferentialRatio,
    InformationGain,
}

/// Two-pass weighted random forest: pass one trains a plain pool with
/// uniform weights, the per-feature vulnerability of that pool sets the
/// weights, and pass two retrains with them. The returned pool records the
/// weights used and the differential ratios of its own (final) trees.
pub fn train_wrf(
    train: &Dataset,
    m_trees: usize,
    subspace_size: usize,
    r: f64,
    costs: &CostVector,
    metric: VulnerabilityMetric,
    params: &TreeParams,
    seed: u64,
) -> Result<ModelPool> {
    let m = train.n_features();
    if costs.len() != m {
        return Err(Error::BadParam(
            "cost vector length does not match the feature count".into(),
        ));
    }
    let pass1 = train_random_forest(
        train,
        m_trees,
        subspace_size,
        &WeightVector::uniform(m),
        params,
        derive(seed, WRF_PASS1),
    )?;
    let vulnerability = match metric {
        VulnerabilityMetric::DifferentialRatio => pass1.per_feature_ratio().to_vec(),
        VulnerabilityMetric::InformationGain => per_feature_max_gains(pass1.trees(), m),
    };
    let weights = compute_weights(&vulnerability, costs, r)?;
    let pass2 = train_random_forest(
        train,
        m_trees,
        subspace_size,
        &weights,
        params,
        wrf_pass2_seed(seed),
    )?;
    let provenance = match metric {
        VulnerabilityMetric::DifferentialRatio => Provenance::WeightedRf { r },
        VulnerabilityMetric::InformationGain => Provenance::IgWeighted { r },
    };
    ModelPool::from_trees(pass2.trees, m, weights, provenance)
}

/// Majority vote over a tree subset: positive when at least half the
/// trees (rounded up) vote positive. Returns the label and the positive
/// vote count.
///
/// Panics if the subset is empty.
pub fn predict_pool<'a, I>(trees: I, x: &Instance) -> (Label, usize)
where
    I: IntoIterator<Item = &'a DecisionTree>,
{
    let mut votes = 0usize;
    let mut total = 0usize;
    for t in trees {
        total += 1;
        if t.predict(x) == Label::Positive {
            votes += 1;
        }
    }
    assert!(total > 0, "predict_pool needs a nonempty tree subset");
    let label = if votes >= total.div_ceil(2) {
        Label::Positive
    } else {
        Label::Negative
    };
    (label, votes)
}

/// Per-feature tree-appearance counts, sorted descending (ties by feature
/// index ascending).
pub fn feature_usage_histogram(pool: &ModelPool) -> Vec<(usize, usize)> {
    let mut counts = vec![0usize; pool.n_features()];
    for t in pool.trees() {
        for &j in t.feature_set() {
            counts[j] += 1;
        }
    }
    let mut out: Vec<(usize, usize)> = counts.into_iter().enumerate().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

// --- Pool serialization ---------------------------------------------------
//
// A pool directory holds `manifest.json` plus one `tree_NNNN.txt` per tree
// in the deterministic text form.

/// Sidecar metadata stored with a serialized pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolManifest {
    pub provenance: Provenance,
    pub tree_count: usize,
    pub subspace_size: Option<usize>,
    pub seed: Option<u64>,
    pub weights: Vec<f64>,
    pub ratios: Vec<f64>,
    pub schema: FeatureSchema,
}

impl ModelPool {
    /// Write the pool as a directory: manifest plus one text file per tree.
    pub fn save_dir(
        &self,
        dir: impl AsRef<Path>,
        schema: &FeatureSchema,
        subspace_size: Option<usize>,
        seed: Option<u64>,
    ) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let manifest = PoolManifest {
            provenance: self.provenance,
            tree_count: self.trees.len(),
            subspace_size,
            seed,
            weights: self.weights_used.as_slice().to_vec(),
            ratios: self.per_feature_ratio.clone(),
            schema: schema.clone(),
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        for (i, t) in self.trees.iter().enumerate() {
            std::fs::write(dir.join(format!("tree_{i:04}.txt")), t.to_text())?;
        }
        Ok(())
    }

    /// Load a pool directory. The stored ratio vector must match the
    /// ratios recomputed from the trees exactly.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<(ModelPool, FeatureSchema, PoolManifest)> {
        let dir = dir.as_ref();
        let manifest: PoolManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut trees = Vec::with_capacity(manifest.tree_count);
        for i in 0..manifest.tree_count {
            let path = dir.join(format!("tree_{i:04}.txt"));
            trees.push(DecisionTree::from_text(&std::fs::read_to_string(&path)?)?);
        }
        let pool = ModelPool::from_trees(
            trees,
            manifest.schema.n_features(),
            WeightVector::new(manifest.weights.clone())?,
            manifest.provenance,
        )?;
        if pool.per_feature_ratio != manifest.ratios {
            return Err(Error::Serialization(
                "stored differential ratios disagree with the stored trees".into(),
            ));
        }
        Ok((pool, manifest.schema.clone(), manifest))
    }
}
