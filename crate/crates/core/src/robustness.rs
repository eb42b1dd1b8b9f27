//! Worst-case robustness bounds for tree pools: critical counts, the
//! (t1, t2, k) certificate, the post-clustering k*l*q bound, and a
//! brute-force minimal-attack search for validating both on small pools.
//!
//! The certificate logic assumes the pooled vote rule "positive when the
//! positive votes reach half the pool, rounded up", which is exactly what
//! [`crate::forest::predict_pool`] implements.

use std::collections::BTreeSet;

use crate::cluster::Clustering;
use crate::data::{FeatureKind, FeatureSchema, Instance, Label, NegativeProfile, Value};
use crate::error::{Error, Result};
use crate::forest::{predict_pool, CostVector};
use crate::tree::{DecisionTree, SplitKind};

/// A worst-case robustness statement for a tree subset: any instance whose
/// positive votes reach `required_margin` needs more than `k` modified
/// features (equivalently, more than `t2` total cost) to be classified
/// negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub k: usize,
    /// Maximum total critical count over any k-subset of features.
    pub t1: usize,
    /// Minimum total modification cost over any k-subset of features.
    pub t2: f64,
    /// ceil(M/2) + t1 for the subset size M the certificate covers.
    pub required_margin: usize,
}

/// Number of trees having the feature on at least one critical path.
pub fn critical_count(feature: usize, trees: &[DecisionTree]) -> usize {
    trees
        .iter()
        .filter(|t| t.critical_features().contains(&feature))
        .count()
}

/// Critical-path feature sets, one per tree.
pub fn critical_sets(trees: &[DecisionTree]) -> Vec<BTreeSet<usize>> {
    trees.iter().map(|t| t.critical_features()).collect()
}

fn sum_k_smallest_costs(costs: &CostVector, k: usize) -> f64 {
    let mut c = costs.as_slice().to_vec();
    c.sort_by(f64::total_cmp);
    c.iter().take(k).sum()
}

/// Compute the tightest certifiable (t1, t2) pair for budget `k` over a
/// tree subset: `t1` sums the k largest critical counts, `t2` the k
/// smallest costs.
pub fn certify(trees: &[DecisionTree], costs: &CostVector, k: usize) -> Result<Certificate> {
    if k == 0 {
        return Err(Error::BadParam("feature budget k must be at least 1".into()));
    }
    if k > costs.len() {
        return Err(Error::BadParam(format!(
            "feature budget {k} exceeds feature count {}",
            costs.len()
        )));
    }
    if trees.is_empty() {
        return Err(Error::BadParam("certify needs at least one tree".into()));
    }
    let sets = critical_sets(trees);
    let mut cc = vec![0usize; costs.len()];
    for set in &sets {
        for &f in set {
            if f < cc.len() {
                cc[f] += 1;
            }
        }
    }
    cc.sort_unstable_by(|a, b| b.cmp(a));
    let t1: usize = cc.iter().take(k).sum();
    let t2 = sum_k_smallest_costs(costs, k);
    Ok(Certificate {
        k,
        t1,
        t2,
        required_margin: trees.len().div_ceil(2) + t1,
    })
}

/// Worst-case certificate for clustered per-query selection: with `q`
/// models drawn per cluster and no feature critically used in more than
/// `l` clusters, any k-subset's total critical count within any selected
/// subset is bounded by k*l*q. Valid for every possible selection.
pub fn clustering_bound(
    clustering: &Clustering,
    critical_feature_sets: &[BTreeSet<usize>],
    q: usize,
    k: usize,
    costs: &CostVector,
) -> Result<Certificate> {
    if clustering.assignment().len() != critical_feature_sets.len() {
        return Err(Error::BadParam(
            "clustering does not cover the given trees".into(),
        ));
    }
    if k == 0 || q == 0 {
        return Err(Error::BadParam("k and q must be at least 1".into()));
    }
    if k > costs.len() {
        return Err(Error::BadParam(format!(
            "feature budget {k} exceeds feature count {}",
            costs.len()
        )));
    }
    // l = max over features of the number of distinct clusters holding a
    // tree that uses the feature critically.
    let mut clusters_of_feature: std::collections::HashMap<usize, BTreeSet<usize>> =
        std::collections::HashMap::new();
    for (tree, set) in critical_feature_sets.iter().enumerate() {
        for &f in set {
            clusters_of_feature
                .entry(f)
                .or_default()
                .insert(clustering.cluster_of(tree));
        }
    }
    let l = clusters_of_feature
        .values()
        .map(BTreeSet::len)
        .max()
        .unwrap_or(0);
    let t1 = k * l * q;
    let t2 = sum_k_smallest_costs(costs, k);
    Ok(Certificate {
        k,
        t1,
        t2,
        required_margin: clustering.selection_size(q).div_ceil(2) + t1,
    })
}

/// Outcome of the brute-force minimal-attack search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinAttack {
    /// Smallest number of modified features that flips the pooled label.
    Modifications(usize),
    /// No attack found with subsets up to this size.
    NoneUpTo(usize),
    /// The evaluation cap was hit before the search finished this size.
    LimitExceeded { subset_size: usize, evaluated: u64 },
}

/// Caps for the exhaustive search.
#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    pub max_subset_size: usize,
    pub max_evaluations: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_subset_size: 6,
            max_evaluations: 5_000_000,
        }
    }
}

/// Candidate substitution values per feature: every split threshold on the
/// feature anywhere in the pool, nudged to both sides by less than the
/// smallest threshold gap, plus the negative-profile value. Tree
/// predictions are piecewise constant between thresholds, so this grid
/// covers every behaviorally distinct assignment.
pub fn attack_value_domains(
    trees: &[DecisionTree],
    schema: &FeatureSchema,
    profile: Option<&NegativeProfile>,
) -> Vec<Vec<Value>> {
    let m = schema.n_features();
    let mut thresholds: Vec<Vec<f64>> = vec![Vec::new(); m];
    for t in trees {
        for n in t.internal_nodes() {
            if let Some(rule) = &n.split {
                if let SplitKind::NumericThreshold(th) = rule.kind {
                    thresholds[rule.feature].push(th);
                }
            }
        }
    }
    (0..m)
        .map(|j| match &schema.features()[j].kind {
            FeatureKind::Numeric => {
                let mut ts = thresholds[j].clone();
                ts.sort_by(f64::total_cmp);
                ts.dedup();
                let mut gap = f64::INFINITY;
                for w in ts.windows(2) {
                    gap = gap.min(w[1] - w[0]);
                }
                let scale = ts.iter().fold(1.0f64, |a, &t| a.max(t.abs()));
                let eps = if gap.is_finite() {
                    (gap / 4.0).min(scale * 1e-6).max(f64::MIN_POSITIVE)
                } else {
                    scale * 1e-6
                };
                let mut vals: Vec<f64> = Vec::with_capacity(ts.len() * 2 + 1);
                for &t in &ts {
                    vals.push(t - eps);
                    vals.push(t + eps);
                }
                if let Some(p) = profile {
                    vals.push(p.value(j).as_num());
                }
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                vals.into_iter().map(Value::Num).collect()
            }
            FeatureKind::Categorical(cats) => (0..cats.len()).map(Value::Cat).collect(),
        })
        .collect()
}

/// Exhaustive minimal-attack search: try feature subsets in increasing
/// size and, per subset, every assignment over the candidate domains,
/// until the pooled label flips to negative.
pub fn brute_force_min_attack(
    trees: &[DecisionTree],
    x: &Instance,
    value_domains: &[Vec<Value>],
    limits: SearchLimits,
) -> Result<MinAttack> {
    if trees.is_empty() {
        return Err(Error::BadParam("empty tree subset".into()));
    }
    if predict_pool(trees.iter(), x).0 != Label::Positive {
        return Err(Error::BadParam(
            "brute-force attack needs an instance currently classified positive".into(),
        ));
    }
    // Only features used by some tree can influence the vote.
    let mut usable: Vec<usize> = Vec::new();
    for (j, dom) in value_domains.iter().enumerate() {
        if !dom.is_empty() && trees.iter().any(|t| t.uses_feature(j)) {
            usable.push(j);
        }
    }
    let max_size = limits.max_subset_size.min(usable.len());
    let mut evaluated: u64 = 0;

    for size in 1..=max_size {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let features: Vec<usize> = combo.iter().map(|&i| usable[i]).collect();
            if let Some(found) = try_assignments(
                trees,
                x,
                &features,
                value_domains,
                &mut evaluated,
                limits.max_evaluations,
            )? {
                if found {
                    return Ok(MinAttack::Modifications(size));
                }
            } else {
                return Ok(MinAttack::LimitExceeded {
                    subset_size: size,
                    evaluated,
                });
            }
            // Next combination of `size` indices out of usable.len().
            let mut i = size;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if combo[i] != i + usable.len() - size {
                    combo[i] += 1;
                    for j in (i + 1)..size {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    combo.clear();
                    break;
                }
            }
            if combo.is_empty() {
                break;
            }
        }
    }
    Ok(MinAttack::NoneUpTo(max_size))
}

/// Depth-first sweep over value assignments for a fixed feature subset.
/// Returns Some(true) on a successful flip, Some(false) when exhausted,
/// None when the evaluation cap was hit.
fn try_assignments(
    trees: &[DecisionTree],
    x: &Instance,
    features: &[usize],
    domains: &[Vec<Value>],
    evaluated: &mut u64,
    cap: u64,
) -> Result<Option<bool>> {
    fn rec(
        trees: &[DecisionTree],
        work: &mut Instance,
        original: &Instance,
        features: &[usize],
        domains: &[Vec<Value>],
        depth: usize,
        evaluated: &mut u64,
        cap: u64,
    ) -> Option<bool> {
        if depth == features.len() {
            *evaluated += 1;
            if *evaluated > cap {
                return None;
            }
            return Some(predict_pool(trees.iter(), work).0 == Label::Negative);
        }
        let j = features[depth];
        for &v in &domains[j] {
            if v == original[j] {
                continue; // unmodified value belongs to a smaller subset
            }
            work[j] = v;
            match rec(trees, work, original, features, domains, depth + 1, evaluated, cap) {
                Some(true) => {
                    work[j] = original[j];
                    return Some(true);
                }
                Some(false) => {}
                None => {
                    work[j] = original[j];
                    return None;
                }
            }
        }
        work[j] = original[j];
        Some(false)
    }
    let mut work = x.clone();
    Ok(rec(trees, &mut work, x, features, domains, 0, evaluated, cap))
}
