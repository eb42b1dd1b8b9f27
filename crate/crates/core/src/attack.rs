//! The simulated adversary: random-probing order learning against a
//! black-box oracle, then bounded- and unbounded-cost attack phases.
//!
//! The attacker only ever observes accept/reject outcomes. Every
//! modification substitutes the feature's negative-profile value, each
//! feature is modified at most once per instance, and the oracle is
//! re-queried after every single modification, so per-query randomized
//! defenses are exercised exactly as deployed.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{select_models, Clustering};
use crate::data::{split_train_test, Dataset, Instance, Label, NegativeProfile, Value};
use crate::error::{Error, Result};
use crate::forest::{predict_pool, ModelPool};
use crate::rng::{derive, derive2, rng_from};

/// Identifier of one query event; per-query randomized oracles derive
/// their model selection from it.
pub type QueryId = u64;

/// A black-box classifier as the attacker sees it.
pub trait ModelOracle: Sync {
    fn classify(&self, x: &Instance, query: QueryId) -> Label;
}

/// Oracle voting the full pool on every query.
pub struct FullPoolOracle<'a> {
    pool: &'a ModelPool,
}

impl<'a> FullPoolOracle<'a> {
    pub fn new(pool: &'a ModelPool) -> Self {
        Self { pool }
    }
}

impl ModelOracle for FullPoolOracle<'_> {
    fn classify(&self, x: &Instance, _query: QueryId) -> Label {
        self.pool.predict(x).0
    }
}

/// Oracle drawing `q` models per cluster afresh for every query.
pub struct ClusteredOracle<'a> {
    pool: &'a ModelPool,
    clustering: &'a Clustering,
    q: usize,
    seed: u64,
}

impl<'a> ClusteredOracle<'a> {
    pub fn new(pool: &'a ModelPool, clustering: &'a Clustering, q: usize, seed: u64) -> Self {
        Self {
            pool,
            clustering,
            q,
            seed,
        }
    }
}

impl ModelOracle for ClusteredOracle<'_> {
    fn classify(&self, x: &Instance, query: QueryId) -> Label {
        let trees = select_models(self.pool, self.clustering, self.q, self.seed, query)
            .expect("clustering covers the pool");
        predict_pool(trees, x).0
    }
}

/// Feature indices in descending order of recorded flip frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOrder {
    features: Vec<usize>,
}

impl AttackOrder {
    pub fn new(features: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if !features.iter().all(|f| seen.insert(*f)) {
            return Err(Error::BadParam("attack order contains duplicates".into()));
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

const PROBE_PICK: u64 = 0x51;
const PROBE_WALK: u64 = 0x52;
const PROBE_QUERY: u64 = 0x53;
const ATTACK_QUERY: u64 = 0x54;
const KNOWLEDGE_SPLIT: u64 = 0x55;

/// Probe the oracle with `n_probe` random positive instances: while an
/// instance is rejected, replace one uniformly chosen not-yet-modified
/// feature with its negative-profile value and re-query. On acceptance
/// only the last modified feature is recorded. Features come back sorted
/// by recorded frequency, descending, ties toward the lower index.
pub fn learn_attack_order(
    oracle: &dyn ModelOracle,
    probing: &Dataset,
    n_probe: usize,
    profile: &NegativeProfile,
    max_steps: usize,
    seed: u64,
) -> Result<AttackOrder> {
    let positives = probing.indices_with_label(Label::Positive);
    if positives.len() < n_probe {
        return Err(Error::BadParam(format!(
            "probing set has {} positive instances, need {n_probe}",
            positives.len()
        )));
    }
    let m = probing.n_features();
    let mut pick_rng = rng_from(derive(seed, PROBE_PICK));
    let chosen = sample(&mut pick_rng, positives.len(), n_probe);

    let mut freq = vec![0usize; m];
    for (pi, idx) in chosen.into_iter().enumerate() {
        let row = positives[idx];
        let mut x = probing.row(row).clone();
        let query = |step: usize| derive2(PROBE_QUERY, pi as u64, step as u64);
        if oracle.classify(&x, query(0)) == Label::Negative {
            continue; // accepted outright; nothing to learn here
        }
        let mut walk_rng = rng_from(derive2(seed, PROBE_WALK, pi as u64));
        let mut unmodified: Vec<usize> = (0..m).collect();
        let mut steps = 0usize;
        while steps < max_steps && !unmodified.is_empty() {
            let pick = walk_rng.gen_range(0..unmodified.len());
            let f = unmodified.swap_remove(pick);
            x[f] = profile.value(f);
            steps += 1;
            if oracle.classify(&x, query(steps)) == Label::Negative {
                freq[f] += 1;
                break;
            }
        }
    }

    let mut recorded: Vec<(usize, usize)> = freq
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .collect();
    recorded.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    AttackOrder::new(recorded.into_iter().map(|(f, _)| f).collect())
}

/// Attack budget regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackMode {
    Bounded { k: usize },
    Unbounded,
}

/// Outcome of one attacked instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceOutcome {
    /// The oracle accepted the unmodified instance; nothing was attacked.
    InitiallyAccepted,
    /// Accepted after this many modifications.
    Evaded { steps: usize },
    /// Budget or attack order ran out with the instance still rejected.
    NotEvaded,
}

/// Per-instance record of an attack.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackTrace {
    /// Row index of the instance withinout the attack set.
    pub instance: usize,
    /// Modifications in application order.
    pub modifications: Vec<(usize, Value)>,
    pub outcome: TraceOutcome,
}

/// Aggregate result of an attack phase, with per-instance traces.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub mode: AttackMode,
    /// Positive instances the oracle initially rejected (and so were attacked).
    pub attacked: usize,
    pub evaded: usize,
    pub initially_accepted: usize,
    /// Attacked but never accepted within the budget/order.
    pub exhausted: usize,
    /// evaded / attacked; 0 when nothing was attacked.
    pub success_rate: f64,
    /// Mean modifications over evaded instances (unbounded mode).
    pub avg_modified: Option<f64>,
    pub traces: Vec<AttackTrace>,
}

impl AttackResult {
    /// Line-delimited trace export: `instance feature,feature,... outcome`.
    pub fn traces_to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.traces {
            let feats: Vec<String> = t
                .modifications
                .iter()
                .map(|(f, _)| f.to_string())
                .collect();
            let feats = if feats.is_empty() {
                "-".to_string()
            } else {
                feats.join(",")
            };
            let outcome = match t.outcome {
                TraceOutcome::InitiallyAccepted => "initially_accepted".to_string(),
                TraceOutcome::Evaded { steps } => format!("evaded:{steps}"),
                TraceOutcome::NotEvaded => "not_evaded".to_string(),
            };
            out.push_str(&format!("{} {} {}\n", t.instance, feats, outcome));
        }
        out
    }
}

fn run_attack(
    oracle: &dyn ModelOracle,
    attack_set: &Dataset,
    order: &AttackOrder,
    profile: &NegativeProfile,
    mode: AttackMode,
    step_cap: usize,
) -> Result<AttackResult> {
    let positive_rows: Vec<usize> = attack_set.indices_with_label(Label::Positive);
    if positive_rows.is_empty() {
        return Err(Error::BadParam(
            "attack set contains no positive instances".into(),
        ));
    }

    let traces: Vec<AttackTrace> = positive_rows
        .par_iter()
        .map(|&row| {
            let mut x = attack_set.row(row).clone();
            let query = |step: usize| derive2(ATTACK_QUERY, row as u64, step as u64);
            if oracle.classify(&x, query(0)) == Label::Negative {
                return AttackTrace {
                    instance: row,
                    modifications: Vec::new(),
                    outcome: TraceOutcome::InitiallyAccepted,
                };
            }
            let mut modifications = Vec::new();
            let mut outcome = TraceOutcome::NotEvaded;
            for (step, &f) in order.features().iter().take(step_cap).enumerate() {
                let v = profile.value(f);
                x[f] = v;
                modifications.push((f, v));
                if oracle.classify(&x, query(step + 1)) == Label::Negative {
                    outcome = TraceOutcome::Evaded { steps: step + 1 };
                    break;
                }
            }
            AttackTrace {
                instance: row,
                modifications,
                outcome,
            }
        })
        .collect();

    let initially_accepted = traces
        .iter()
        .filter(|t| t.outcome == TraceOutcome::InitiallyAccepted)
        .count();
    let attacked = traces.len() - initially_accepted;
    let evaded = traces
        .iter()
        .filter(|t| matches!(t.outcome, TraceOutcome::Evaded { .. }))
        .count();
    let exhausted = attacked - evaded;
    let success_rate = if attacked > 0 {
        evaded as f64 / attacked as f64
    } else {
        0.0
    };
    let avg_modified = if evaded > 0 {
        Some(
            traces
                .iter()
                .filter_map(|t| match t.outcome {
                    TraceOutcome::Evaded { steps } => Some(steps as f64),
                    _ => None,
                })
                .sum::<f64>()
                / evaded as f64,
        )
    } else {
        None
    };
    Ok(AttackResult {
        mode,
        attacked,
        evaded,
        initially_accepted,
        exhausted,
        success_rate,
        avg_modified,
        traces,
    })
}

/// Bounded-cost attack: modify features in order, re-querying after each,
/// stopping at acceptance or after `k` modifications.
pub fn attack_bounded(
    oracle: &dyn ModelOracle,
    attack_set: &Dataset,
    order: &AttackOrder,
    k: usize,
    profile: &NegativeProfile,
) -> Result<AttackResult> {
    if k == 0 {
        return Err(Error::BadParam("bounded attack needs k >= 1".into()));
    }
    run_attack(
        oracle,
        attack_set,
        order,
        profile,
        AttackMode::Bounded { k },
        k,
    )
}

/// Unbounded-cost attack: modify in order until accepted or the order is
/// exhausted. Instances never accepted are counted separately and excluded
/// from the modification average.
pub fn attack_unbounded(
    oracle: &dyn ModelOracle,
    attack_set: &Dataset,
    order: &AttackOrder,
    profile: &NegativeProfile,
    max_steps: usize,
) -> Result<AttackResult> {
    if order.is_empty() {
        return Err(Error::BadParam(
            "unbounded attack needs a nonempty order".into(),
        ));
    }
    run_attack(
        oracle,
        attack_set,
        order,
        profile,
        AttackMode::Unbounded,
        max_steps,
    )
}

/// Attacker knowledge regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knowledge {
    Incomplete,
    Complete,
}

/// Split the test set into the attacker's probing and attacking views.
/// Incomplete knowledge probes one random half and attacks the other;
/// complete knowledge probes the whole test set (the attack half is the
/// same as in the incomplete case for a given seed).
pub fn make_knowledge_split(
    test: &Dataset,
    mode: Knowledge,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (probe_half, attack_half) = split_train_test(test, 0.5, derive(seed, KNOWLEDGE_SPLIT))?;
    Ok(match mode {
        Knowledge::Incomplete => (probe_half, attack_half),
        Knowledge::Complete => (test.clone(), attack_half),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::negative_profile;
    use crate::forest::{ModelPool, Provenance};
    use crate::testutil::{fig1_instance, fig1_negatives, fig1_pool, fig1_schema, DOLLAR};
    use crate::tree::WeightVector;

    /// Oracle accepting iff one specific feature carries its profile value.
    struct SingleFeatureOracle {
        feature: usize,
        profile_value: Value,
    }

    impl ModelOracle for SingleFeatureOracle {
        fn classify(&self, x: &Instance, _q: QueryId) -> Label {
            if x[self.feature] == self.profile_value {
                Label::Negative
            } else {
                Label::Positive
            }
        }
    }

    struct AlwaysAccept;
    impl ModelOracle for AlwaysAccept {
        fn classify(&self, _x: &Instance, _q: QueryId) -> Label {
            Label::Negative
        }
    }

    struct NeverAccept;
    impl ModelOracle for NeverAccept {
        fn classify(&self, _x: &Instance, _q: QueryId) -> Label {
            Label::Positive
        }
    }

    fn probing_set(n_pos: usize) -> Dataset {
        let d = crate::synth::separable_blobs(n_pos * 2 + 8, 4, 0.3, 77);
        d.subset(&(0..d.n_rows()).collect::<Vec<_>>())
    }

    #[test]
    fn single_feature_oracle_tops_the_order() {
        let d = probing_set(30);
        let profile = negative_profile(&d).unwrap();
        let oracle = SingleFeatureOracle {
            feature: 3,
            profile_value: profile.value(3),
        };
        let order = learn_attack_order(&oracle, &d, 20, &profile, 4, 5).unwrap();
        assert_eq!(order.features().first(), Some(&3));
        assert_eq!(order.len(), 1, "only feature 3 can flip this oracle");
    }

    #[test]
    fn always_accepting_oracle_leaves_order_empty() {
        let d = probing_set(20);
        let profile = negative_profile(&d).unwrap();
        let order = learn_attack_order(&AlwaysAccept, &d, 10, &profile, 4, 1).unwrap();
        assert!(order.is_empty());
    }

    #[test]
    fn probe_requires_enough_positives() {
        let d = probing_set(5);
        let profile = negative_profile(&d).unwrap();
        let err = learn_attack_order(&NeverAccept, &d, 1000, &profile, 4, 1);
        assert!(err.is_err());
    }

    #[test]
    fn probe_order_is_deterministic() {
        let pool_trees = fig1_pool();
        let pool = ModelPool::from_trees(
            pool_trees,
            5,
            WeightVector::uniform(5),
            Provenance::PlainRf,
        )
        .unwrap();
        let oracle = FullPoolOracle::new(&pool);
        let d = fig1_attack_set(40);
        let profile = negative_profile(&fig1_negatives()).unwrap();
        let a = learn_attack_order(&oracle, &d, 15, &profile, 5, 42).unwrap();
        let b = learn_attack_order(&oracle, &d, 15, &profile, 5, 42).unwrap();
        assert_eq!(a, b);
    }

    /// Attack set over the fig1 schema: copies of the worked spam example
    /// plus a few negatives.
    fn fig1_attack_set(n_pos: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_pos {
            let mut x = fig1_instance();
            // jitter that never crosses the tree thresholds
            x[DOLLAR] = Value::Num(0.2 + (i as f64) * 1e-4);
            rows.push(x);
            labels.push(Label::Positive);
        }
        for neg in fig1_negatives()
            .indices_with_label(Label::Negative)
            .iter()
            .map(|&i| fig1_negatives().row(i).clone())
        {
            rows.push(neg);
            labels.push(Label::Negative);
        }
        Dataset::new(fig1_schema(), rows, labels).unwrap()
    }

    #[test]
    fn bounded_attack_on_single_tree_with_dollar_first() {
        let pool_trees = vec![crate::testutil::fig1_f1()];
        let pool = ModelPool::from_trees(
            pool_trees,
            5,
            WeightVector::uniform(5),
            Provenance::SingleTree,
        )
        .unwrap();
        let oracle = FullPoolOracle::new(&pool);
        let attack_set = fig1_attack_set(10);
        let profile = negative_profile(&fig1_negatives()).unwrap();
        let order = AttackOrder::new(vec![DOLLAR]).unwrap();
        let res = attack_bounded(&oracle, &attack_set, &order, 1, &profile).unwrap();
        assert_eq!(res.attacked, 10);
        assert_eq!(res.evaded, 10, "profile dollar value 0.01 <= 0.05 flips f1");
        assert_eq!(res.success_rate, 1.0);
        // Every trace wrote exactly the profile value once.
        for t in &res.traces {
            if let TraceOutcome::Evaded { steps } = t.outcome {
                assert_eq!(steps, 1);
                assert_eq!(t.modifications, vec![(DOLLAR, profile.value(DOLLAR))]);
            }
        }
    }

    #[test]
    fn bounded_rejects_k_zero_and_handles_empty_positives() {
        let pool = ModelPool::from_trees(
            fig1_pool(),
            5,
            WeightVector::uniform(5),
            Provenance::PlainRf,
        )
        .unwrap();
        let oracle = FullPoolOracle::new(&pool);
        let profile = negative_profile(&fig1_negatives()).unwrap();
        let order = AttackOrder::new(vec![DOLLAR]).unwrap();
        let set = fig1_attack_set(3);
        assert!(attack_bounded(&oracle, &set, &order, 0, &profile).is_err());
        let negatives_only = set.subset(&set.indices_with_label(Label::Negative));
        assert!(attack_bounded(&oracle, &negatives_only, &order, 1, &profile).is_err());
    }

    /// Oracle accepting once at least `need` features sit at their
    /// profile values.
    struct ProfileCountOracle {
        profile: Vec<Value>,
        need: usize,
    }

    impl ModelOracle for ProfileCountOracle {
        fn classify(&self, x: &Instance, _q: QueryId) -> Label {
            let matches = x.iter().zip(&self.profile).filter(|(a, b)| a == b).count();
            if matches >= self.need {
                Label::Negative
            } else {
                Label::Positive
            }
        }
    }

    #[test]
    fn unbounded_average_counts_modifications() {
        let attack_set = fig1_attack_set(6);
        let profile = negative_profile(&fig1_negatives()).unwrap();
        // Attacked rows start with one profile-valued feature (remove = 0)
        // and the order writes that feature first, so acceptance lands
        // after exactly two modifications for every instance.
        let oracle = ProfileCountOracle {
            profile: profile.values().to_vec(),
            need: 2,
        };
        let order = AttackOrder::new(vec![0, 1, 2, 3, 4]).unwrap();
        let res = attack_unbounded(&oracle, &attack_set, &order, &profile, 5).unwrap();
        assert_eq!(res.avg_modified, Some(2.0));
        assert_eq!(res.evaded, res.attacked);
        assert_eq!(res.exhausted, 0);
    }

    #[test]
    fn unbounded_excludes_exhausted_instances() {
        let attack_set = fig1_attack_set(4);
        let profile = negative_profile(&fig1_negatives()).unwrap();
        let order = AttackOrder::new(vec![0, 1]).unwrap();
        let res = attack_unbounded(&NeverAccept, &attack_set, &order, &profile, 5).unwrap();
        assert_eq!(res.evaded, 0);
        assert_eq!(res.exhausted, res.attacked);
        assert_eq!(res.avg_modified, None);
        assert!(res.traces.iter().all(|t| t.outcome == TraceOutcome::NotEvaded));
    }

    #[test]
    fn unbounded_requires_nonempty_order() {
        let attack_set = fig1_attack_set(2);
        let profile = negative_profile(&fig1_negatives()).unwrap();
        let order = AttackOrder::new(vec![]).unwrap();
        assert!(attack_unbounded(&NeverAccept, &attack_set, &order, &profile, 5).is_err());
    }

    #[test]
    fn success_rate_monotone_in_k() {
        let pool = ModelPool::from_trees(
            fig1_pool(),
            5,
            WeightVector::uniform(5),
            Provenance::PlainRf,
        )
        .unwrap();
        let oracle = FullPoolOracle::new(&pool);
        let attack_set = fig1_attack_set(12);
        let profile = negative_profile(&fig1_negatives()).unwrap();
        let order = AttackOrder::new(vec![DOLLAR, crate::testutil::TOTAL_CAPITAL, 0, 2, 3]).unwrap();
        let mut prev = 0.0;
        for k in 1..=5 {
            let res = attack_bounded(&oracle, &attack_set, &order, k, &profile).unwrap();
            assert!(
                res.success_rate >= prev - 1e-12,
                "success rate dropped at k={k}"
            );
            prev = res.success_rate;
        }
    }

    #[test]
    fn traces_reconstruct_aggregates() {
        let pool = ModelPool::from_trees(
            fig1_pool(),
            5,
            WeightVector::uniform(5),
            Provenance::PlainRf,
        )
        .unwrap();
        let oracle = FullPoolOracle::new(&pool);
        let attack_set = fig1_attack_set(9);
        let profile = negative_profile(&fig1_negatives()).unwrap();
        let order =
            AttackOrder::new(vec![DOLLAR, crate::testutil::TOTAL_CAPITAL, crate::testutil::BANG])
                .unwrap();
        let res = attack_bounded(&oracle, &attack_set, &order, 2, &profile).unwrap();
        let evaded = res
            .traces
            .iter()
            .filter(|t| matches!(t.outcome, TraceOutcome::Evaded { .. }))
            .count();
        let accepted = res
            .traces
            .iter()
            .filter(|t| t.outcome == TraceOutcome::InitiallyAccepted)
            .count();
        assert_eq!(res.evaded, evaded);
        assert_eq!(res.initially_accepted, accepted);
        assert_eq!(res.attacked, res.traces.len() - accepted);
        assert_eq!(res.exhausted, res.attacked - evaded);
        // No trace modifies the same feature twice, and all writes are
        // profile values.
        for t in &res.traces {
            let mut seen = std::collections::HashSet::new();
            for &(f, v) in &t.modifications {
                assert!(seen.insert(f), "feature {f} modified twice");
                assert_eq!(v, profile.value(f));
            }
        }
        let text = res.traces_to_text();
        assert_eq!(text.lines().count(), res.traces.len());
    }

    #[test]
    fn knowledge_split_shapes() {
        let d = fig1_attack_set(48); // 51 rows total
        let (probe, attack) = make_knowledge_split(&d, Knowledge::Incomplete, 3).unwrap();
        assert_eq!(probe.n_rows() + attack.n_rows(), d.n_rows());
        assert!((probe.n_rows() as i64 - attack.n_rows() as i64).abs() <= 1);

        let (probe_c, attack_c) = make_knowledge_split(&d, Knowledge::Complete, 3).unwrap();
        assert_eq!(probe_c.n_rows(), d.n_rows(), "complete probes everything");
        assert_eq!(attack_c.rows(), attack.rows(), "same attack half per seed");

        let (p2, a2) = make_knowledge_split(&d, Knowledge::Incomplete, 3).unwrap();
        assert_eq!(p2.rows(), probe.rows());
        assert_eq!(a2.rows(), attack.rows());
    }

    #[test]
    fn clustered_oracle_varies_with_query_id() {
        let d = crate::synth::separable_blobs(80, 5, 0.45, 31);
        let pool = crate::forest::train_random_forest(
            &d,
            6,
            2,
            &WeightVector::uniform(5),
            &crate::tree::TreeParams::default(),
            8,
        )
        .unwrap();
        let g = crate::cluster::build_similarity_graph(&pool);
        let clustering = crate::cluster::spectral_clustering(&g, 3, 4).unwrap();
        let oracle = ClusteredOracle::new(&pool, &clustering, 1, 99);
        // Deterministic per query id.
        let x = d.row(0);
        for q in 0..5u64 {
            assert_eq!(oracle.classify(x, q), oracle.classify(x, q));
        }
    }
}
