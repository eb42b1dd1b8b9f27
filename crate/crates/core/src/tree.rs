//! Decision-tree induction with weight-multiplied split criteria,
//! prediction, and critical-path extraction.
//!
//! Every node keeps the (positive, negative) training counts of the
//! instances that reached it; the vulnerability metrics and the
//! certificates downstream are computed from those counts, so they are
//! never discarded. Numeric features split binary at value midpoints,
//! categorical features split multiway with one branch per category
//! observed at the node.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, Instance, Label};
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Per-feature multipliers applied to the split criterion.
///
/// Entries must be positive and finite. Weights produced by the
/// exponential weighting scheme always land in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::BadParam("weight vector must be nonempty".into()));
        }
        for (j, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::BadParam(format!(
                    "weight for feature {j} must be positive and finite, got {w}"
                )));
            }
        }
        Ok(Self(weights))
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

    /// Scaled copy; used to check argmax invariance of the weighted criterion.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * factor).collect())
    }
}

/// How an internal node routes instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitKind {
    /// Child 0 takes `value <= t`, child 1 takes `value > t`.
    NumericThreshold(f64),
    /// One child per category observed at the node during training,
    /// listed in ascending category index, parallel to the children.
    CategoricalMultiway(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub kind: SplitKind,
}

/// A node of a decision tree. Internal nodes carry a split rule and at
/// least two children; leaves carry a label. Both carry the training
/// counts of instances that reached them.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub split: Option<SplitRule>,
    pub children: Vec<TreeNode>,
    pub positives: usize,
    pub negatives: usize,
    pub leaf_label: Option<Label>,
}

impl TreeNode {
    pub fn leaf(positives: usize, negatives: usize) -> Self {
        TreeNode {
            split: None,
            children: Vec::new(),
            positives,
            negatives,
            // Ties go to positive: missing an attack is costlier than a false alarm.
            leaf_label: Some(if positives >= negatives {
                Label::Positive
            } else {
                Label::Negative
            }),
        }
    }

    pub fn internal(rule: SplitRule, children: Vec<TreeNode>) -> Self {
        let positives = children.iter().map(|c| c.positives).sum();
        let negatives = children.iter().map(|c| c.negatives).sum();
        TreeNode {
            split: Some(rule),
            children,
            positives,
            negatives,
            leaf_label: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn total(&self) -> usize {
        self.positives + self.negatives
    }

    fn validate(&self) -> Result<()> {
        if self.is_leaf() {
            if self.leaf_label.is_none() {
                return Err(Error::BadParam("leaf node without a label".into()));
            }
            if self.split.is_some() {
                return Err(Error::BadParam("leaf node with a split rule".into()));
            }
        } else {
            if self.children.len() < 2 {
                return Err(Error::BadParam(
                    "internal node with fewer than 2 children".into(),
                ));
            }
            if self.leaf_label.is_some() {
                return Err(Error::BadParam("internal node with a leaf label".into()));
            }
            let rule = self
                .split
                .as_ref()
                .ok_or_else(|| Error::BadParam("internal node without a split rule".into()))?;
            if let SplitKind::CategoricalMultiway(cats) = &rule.kind {
                if cats.len() != self.children.len() {
                    return Err(Error::BadParam(
                        "categorical split arity does not match children".into(),
                    ));
                }
            } else if self.children.len() != 2 {
                return Err(Error::BadParam(
                    "numeric split must have exactly 2 children".into(),
                ));
            }
            let pos: usize = self.children.iter().map(|c| c.positives).sum();
            let neg: usize = self.children.iter().map(|c| c.negatives).sum();
            if pos != self.positives || neg != self.negatives {
                return Err(Error::BadParam(
                    "children counts do not sum to the parent's".into(),
                ));
            }
            for c in &self.children {
                c.validate()?;
            }
        }
        Ok(())
    }
}

/// An induced decision tree plus the bookkeeping the rest of the pipeline
/// needs: total training count and the set of features used anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    root: TreeNode,
    total_training_count: usize,
    feature_set: BTreeSet<usize>,
}

impl DecisionTree {
    /// Wrap a hand- or machine-built node tree, checking structural
    /// invariants (count conservation, arity, labels).
    pub fn new(root: TreeNode, total_training_count: usize) -> Result<Self> {
        root.validate()?;
        if root.total() > total_training_count {
            return Err(Error::BadParam(
                "root counts exceed the declared training total".into(),
            ));
        }
        let mut feature_set = BTreeSet::new();
        collect_features(&root, &mut feature_set);
        Ok(Self {
            root,
            total_training_count,
            feature_set,
        })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn total_training_count(&self) -> usize {
        self.total_training_count
    }

    pub fn feature_set(&self) -> &BTreeSet<usize> {
        &self.feature_set
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.feature_set.contains(&feature)
    }

    /// Route an instance from the root to a leaf and return its label.
    pub fn predict(&self, x: &Instance) -> Label {
        let mut node = &self.root;
        while let Some(rule) = &node.split {
            let child = match &rule.kind {
                SplitKind::NumericThreshold(t) => {
                    if x[rule.feature].as_num() <= *t {
                        0
                    } else {
                        1
                    }
                }
                SplitKind::CategoricalMultiway(cats) => {
                    let c = x[rule.feature].as_cat();
                    match cats.binary_search(&c) {
                        Ok(i) => i,
                        // Category unseen at this node during training:
                        // fall back to the branch with the most training data.
                        Err(_) => node
                            .children
                            .iter()
                            .enumerate()
                            .max_by(|a, b| a.1.total().cmp(&b.1.total()).then(b.0.cmp(&a.0)))
                            .map(|(i, _)| i)
                            .unwrap_or(0),
                    }
                }
            };
            node = &node.children[child];
        }
        node.leaf_label.expect("leaf checked at construction")
    }

    /// Feature sets of every root-to-positive-leaf path.
    pub fn critical_paths(&self) -> BTreeSet<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        let mut path = BTreeSet::new();
        walk_critical(&self.root, &mut path, &mut out);
        out
    }

    /// Union of features on any critical path.
    pub fn critical_features(&self) -> BTreeSet<usize> {
        self.critical_paths().into_iter().flatten().collect()
    }

    /// All internal nodes, preorder.
    pub fn internal_nodes(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if !n.is_leaf() {
                out.push(n);
                for c in n.children.iter().rev() {
                    stack.push(c);
                }
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        let mut count = 0;
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            count += 1;
            for c in &n.children {
                stack.push(c);
            }
        }
        count
    }

    pub fn depth(&self) -> usize {
        fn d(n: &TreeNode) -> usize {
            1 + n.children.iter().map(d).max().unwrap_or(0)
        }
        d(&self.root)
    }
}

fn collect_features(node: &TreeNode, set: &mut BTreeSet<usize>) {
    if let Some(rule) = &node.split {
        set.insert(rule.feature);
    }
    for c in &node.children {
        collect_features(c, set);
    }
}

fn walk_critical(node: &TreeNode, path: &mut BTreeSet<usize>, out: &mut BTreeSet<BTreeSet<usize>>) {
    if node.is_leaf() {
        if node.leaf_label == Some(Label::Positive) {
            out.insert(path.clone());
        }
        return;
    }
    let feature = node.split.as_ref().map(|r| r.feature).unwrap();
    let inserted = path.insert(feature);
    for c in &node.children {
        walk_critical(c, path, out);
    }
    if inserted {
        path.remove(&feature);
    }
}

/// Shannon entropy of a two-class node, in bits.
pub fn entropy(positives: usize, negatives: usize) -> Result<f64> {
    if positives + negatives == 0 {
        return Err(Error::BadParam("entropy of an empty node".into()));
    }
    Ok(entropy_raw(positives, negatives))
}

fn entropy_raw(positives: usize, negatives: usize) -> f64 {
    let n = (positives + negatives) as f64;
    let mut h = 0.0;
    for &c in &[positives, negatives] {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

/// Information gain of a split: parent entropy minus the size-weighted
/// child entropies. Empty children contribute nothing.
pub fn information_gain(parent: (usize, usize), children: &[(usize, usize)]) -> Result<f64> {
    let (pp, pn) = parent;
    if pp + pn == 0 {
        return Err(Error::BadParam("information gain of an empty node".into()));
    }
    let (cp, cn): (usize, usize) = children.iter().fold((0, 0), |(a, b), &(p, n)| (a + p, b + n));
    if cp != pp || cn != pn {
        return Err(Error::BadParam(
            "children counts do not sum to the parent's".into(),
        ));
    }
    let total = (pp + pn) as f64;
    let mut h_children = 0.0;
    for &(p, n) in children {
        if p + n > 0 {
            h_children += ((p + n) as f64 / total) * entropy_raw(p, n);
        }
    }
    Ok(entropy_raw(pp, pn) - h_children)
}

/// Stopping configuration for tree induction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Nodes smaller than this become leaves.
    pub min_node_size: usize,
    /// Maximum depth counted in edges from the root; `None` is unlimited.
    pub max_depth: Option<usize>,
    /// Weighted gains at or below this are treated as no gain.
    pub gain_tolerance: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_node_size: 2,
            max_depth: None,
            gain_tolerance: 1e-12,
        }
    }
}

/// A chosen split with its gain, as found by [`best_split`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSplit {
    pub rule: SplitRule,
    pub gain: f64,
    pub weighted_gain: f64,
}

/// Find the split maximizing `w_j * information_gain` over the candidate
/// features. Numeric thresholds are midpoints between consecutive distinct
/// sorted values. Ties break toward the lowest feature index, then the
/// lowest threshold. Returns `None` when no candidate has weighted gain
/// above the tolerance.
pub fn best_split(
    d: &Dataset,
    rows: &[u32],
    candidate_features: &[usize],
    weights: &WeightVector,
    gain_tolerance: f64,
) -> Option<ScoredSplit> {
    if rows.is_empty() || candidate_features.is_empty() {
        return None;
    }
    let parent_pos = rows
        .iter()
        .filter(|&&i| d.label(i as usize).is_positive())
        .count();
    let parent_neg = rows.len() - parent_pos;
    if parent_pos == 0 || parent_neg == 0 {
        return None;
    }
    let n = rows.len() as f64;
    let h_parent = entropy_raw(parent_pos, parent_neg);

    let mut candidates: Vec<usize> = candidate_features.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let mut best: Option<ScoredSplit> = None;
    let mut scratch: Vec<(f64, bool)> = Vec::with_capacity(rows.len());

    for &j in &candidates {
        let w = weights.get(j);
        match &d.schema().features()[j].kind {
            FeatureKind::Numeric => {
                scratch.clear();
                scratch.extend(rows.iter().map(|&i| {
                    (
                        d.row(i as usize)[j].as_num(),
                        d.label(i as usize).is_positive(),
                    )
                }));
                scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                let mut left_pos = 0usize;
                let mut left_neg = 0usize;
                for k in 0..scratch.len() - 1 {
                    if scratch[k].1 {
                        left_pos += 1;
                    } else {
                        left_neg += 1;
                    }
                    if scratch[k].0 < scratch[k + 1].0 {
                        let right_pos = parent_pos - left_pos;
                        let right_neg = parent_neg - left_neg;
                        let h_split = ((left_pos + left_neg) as f64 / n)
                            * entropy_raw(left_pos, left_neg)
                            + ((right_pos + right_neg) as f64 / n)
                                * entropy_raw(right_pos, right_neg);
                        let gain = h_parent - h_split;
                        let weighted = w * gain;
                        if weighted > gain_tolerance
                            && best.as_ref().map_or(true, |b| weighted > b.weighted_gain)
                        {
                            let t = 0.5 * (scratch[k].0 + scratch[k + 1].0);
                            best = Some(ScoredSplit {
                                rule: SplitRule {
                                    feature: j,
                                    kind: SplitKind::NumericThreshold(t),
                                },
                                gain,
                                weighted_gain: weighted,
                            });
                        }
                    }
                }
            }
            FeatureKind::Categorical(cats) => {
                let mut counts: Vec<(usize, usize)> = vec![(0, 0); cats.len()];
                for &i in rows {
                    let c = d.row(i as usize)[j].as_cat();
                    if d.label(i as usize).is_positive() {
                        counts[c].0 += 1;
                    } else {
                        counts[c].1 += 1;
                    }
                }
                let observed: Vec<usize> = (0..cats.len())
                    .filter(|&c| counts[c].0 + counts[c].1 > 0)
                    .collect();
                if observed.len() < 2 {
                    continue;
                }
                let mut h_split = 0.0;
                for &c in &observed {
                    let (p, q) = counts[c];
                    h_split += ((p + q) as f64 / n) * entropy_raw(p, q);
                }
                let gain = h_parent - h_split;
                let weighted = w * gain;
                if weighted > gain_tolerance
                    && best.as_ref().map_or(true, |b| weighted > b.weighted_gain)
                {
                    best = Some(ScoredSplit {
                        rule: SplitRule {
                            feature: j,
                            kind: SplitKind::CategoricalMultiway(observed),
                        },
                        gain,
                        weighted_gain: weighted,
                    });
                }
            }
        }
    }
    best
}

/// Train a decision tree by recursive induction. At each node a fresh
/// uniform random subset of `subspace_size` features becomes the candidate
/// set. Deterministic per seed.
pub fn train_tree(
    train: &Dataset,
    weights: &WeightVector,
    subspace_size: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<DecisionTree> {
    let m = train.n_features();
    if train.is_empty() {
        return Err(Error::BadParam("cannot train on an empty dataset".into()));
    }
    if subspace_size == 0 {
        return Err(Error::BadParam("feature subset size must be positive".into()));
    }
    if subspace_size > m {
        return Err(Error::BadParam(format!(
            "feature subset size {subspace_size} exceeds feature count {m}"
        )));
    }
    if weights.len() != m {
        return Err(Error::BadParam(format!(
            "weight vector length {} does not match feature count {m}",
            weights.len()
        )));
    }
    let rows: Vec<u32> = (0..train.n_rows() as u32).collect();
    let mut rng = rng_from(seed);
    let root = grow(train, rows, weights, subspace_size, params, 0, &mut rng);
    DecisionTree::new(root, train.n_rows())
}

fn grow(
    d: &Dataset,
    rows: Vec<u32>,
    weights: &WeightVector,
    subspace_size: usize,
    params: &TreeParams,
    depth: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> TreeNode {
    let pos = rows
        .iter()
        .filter(|&&i| d.label(i as usize).is_positive())
        .count();
    let neg = rows.len() - pos;

    let stop = pos == 0
        || neg == 0
        || rows.len() < params.min_node_size
        || params.max_depth.map_or(false, |md| depth >= md);
    if stop {
        return TreeNode::leaf(pos, neg);
    }

    let mut subset = sample(rng, d.n_features(), subspace_size).into_vec();
    subset.sort_unstable();

    let Some(found) = best_split(d, &rows, &subset, weights, params.gain_tolerance) else {
        return TreeNode::leaf(pos, neg);
    };

    let groups: Vec<Vec<u32>> = partition(d, &rows, &found.rule);
    debug_assert!(groups.iter().all(|g| !g.is_empty()));
    let children: Vec<TreeNode> = groups
        .into_iter()
        .map(|g| grow(d, g, weights, subspace_size, params, depth + 1, rng))
        .collect();
    TreeNode::internal(found.rule, children)
}

fn partition(d: &Dataset, rows: &[u32], rule: &SplitRule) -> Vec<Vec<u32>> {
    match &rule.kind {
        SplitKind::NumericThreshold(t) => {
            let mut le = Vec::new();
            let mut gt = Vec::new();
            for &i in rows {
                if d.row(i as usize)[rule.feature].as_num() <= *t {
                    le.push(i);
                } else {
                    gt.push(i);
                }
            }
            vec![le, gt]
        }
        SplitKind::CategoricalMultiway(cats) => {
            let mut groups: Vec<Vec<u32>> = vec![Vec::new(); cats.len()];
            for &i in rows {
                let c = d.row(i as usize)[rule.feature].as_cat();
                if let Ok(k) = cats.binary_search(&c) {
                    groups[k].push(i);
                }
            }
            groups
        }
    }
}

// --- Deterministic text serialization -----------------------------------
//
// Preorder, one node per line:
//   tree <total_training_count>
//   split <feature> num <threshold> <pos> <neg> <children>
//   split <feature> cat <c0|c1|...> <pos> <neg> <children>
//   leaf <positive|negative> <pos> <neg>

impl DecisionTree {
    pub fn to_text(&self) -> String {
        let mut out = format!("tree {}\n", self.total_training_count);
        write_node(&self.root, &mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<DecisionTree> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Serialization("empty tree text".into()))?;
        let total: usize = header
            .strip_prefix("tree ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Serialization(format!("bad tree header '{header}'")))?;
        let mut iter = lines.peekable();
        let root = read_node(&mut iter)?;
        if iter.next().is_some() {
            return Err(Error::Serialization("trailing lines after tree".into()));
        }
        DecisionTree::new(root, total)
    }
}

fn write_node(node: &TreeNode, out: &mut String) {
    match (&node.split, node.leaf_label) {
        (Some(rule), None) => {
            match &rule.kind {
                SplitKind::NumericThreshold(t) => out.push_str(&format!(
                    "split {} num {} {} {} {}\n",
                    rule.feature,
                    t,
                    node.positives,
                    node.negatives,
                    node.children.len()
                )),
                SplitKind::CategoricalMultiway(cats) => {
                    let cs: Vec<String> = cats.iter().map(|c| c.to_string()).collect();
                    out.push_str(&format!(
                        "split {} cat {} {} {} {}\n",
                        rule.feature,
                        cs.join("|"),
                        node.positives,
                        node.negatives,
                        node.children.len()
                    ))
                }
            }
            for c in &node.children {
                write_node(c, out);
            }
        }
        (None, Some(label)) => {
            out.push_str(&format!(
                "leaf {} {} {}\n",
                label, node.positives, node.negatives
            ));
        }
        _ => unreachable!("validated at construction"),
    }
}

fn read_node<'a, I: Iterator<Item = &'a str>>(
    lines: &mut std::iter::Peekable<I>,
) -> Result<TreeNode> {
    let line = lines
        .next()
        .ok_or_else(|| Error::Serialization("unexpected end of tree text".into()))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    let bad = || Error::Serialization(format!("bad tree line '{line}'"));
    match fields.first() {
        Some(&"leaf") => {
            if fields.len() != 4 {
                return Err(bad());
            }
            let label = match fields[1] {
                "positive" => Label::Positive,
                "negative" => Label::Negative,
                _ => return Err(bad()),
            };
            let pos: usize = fields[2].parse().map_err(|_| bad())?;
            let neg: usize = fields[3].parse().map_err(|_| bad())?;
            let mut node = TreeNode::leaf(pos, neg);
            node.leaf_label = Some(label);
            Ok(node)
        }
        Some(&"split") => {
            if fields.len() != 7 {
                return Err(bad());
            }
            let feature: usize = fields[1].parse().map_err(|_| bad())?;
            let kind = match fields[2] {
                "num" => SplitKind::NumericThreshold(fields[3].parse().map_err(|_| bad())?),
                "cat" => {
                    let cats: std::result::Result<Vec<usize>, _> =
                        fields[3].split('|').map(str::parse).collect();
                    SplitKind::CategoricalMultiway(cats.map_err(|_| bad())?)
                }
                _ => return Err(bad()),
            };
            let pos: usize = fields[4].parse().map_err(|_| bad())?;
            let neg: usize = fields[5].parse().map_err(|_| bad())?;
            let n_children: usize = fields[6].parse().map_err(|_| bad())?;
            let mut children = Vec::with_capacity(n_children);
            for _ in 0..n_children {
                children.push(read_node(lines)?);
            }
            let node = TreeNode::internal(SplitRule { feature, kind }, children);
            if node.positives != pos || node.negatives != neg {
                return Err(Error::Serialization(format!(
                    "counts on line '{line}' disagree with children"
                )));
            }
            Ok(node)
        }
        _ => Err(bad()),
    }
}
