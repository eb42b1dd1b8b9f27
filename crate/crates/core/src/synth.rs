//! Deterministic synthetic dataset generators.
//!
//! `spam_like` produces an email-spam-shaped table (57 zero-inflated
//! numeric frequency features, 4601 rows, 1813 positive) whose class
//! structure mirrors the benchmark the experiments target: a couple of
//! dozen signal features with decaying strength and prevalence, a long
//! tail of rare noise features, and a hard positive subpopulation that
//! caps the reachable true positive rate. `mixed_traffic` produces a
//! small intrusion-detection-shaped table with both numeric and
//! categorical columns. Both are deterministic per seed.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, FeatureDef, FeatureKind, FeatureSchema, Label, Value};
use crate::rng::{derive, rng_from};

fn exp_draw(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let u: f64 = rng.gen_range(0.0..1.0f64);
    -(1.0 - u).ln() * mean
}

/// Tunable shape of the spam-like generator. The defaults are the
/// calibrated values used by the reproduction experiments.
#[derive(Debug, Clone)]
pub struct SpamLikeParams {
    pub rows: usize,
    pub positives: usize,
    pub n_features: usize,
    /// Spiky tier: rarely nonzero in benign mail, strongly indicative when
    /// present (think "$" or "remove" frequencies).
    pub n_spiky: usize,
    /// Per-positive activation probability of the strongest spiky feature;
    /// decays mildly across the tier.
    pub spiky_activation: f64,
    pub spiky_activation_decay: f64,
    /// How often benign instances show a spiky feature anyway.
    pub spiky_neg_rate: f64,
    /// Balanced tier: present in both classes with a shifted distribution
    /// (think common-word frequencies).
    pub n_balanced: usize,
    /// Mean value of balanced features in negatives.
    pub balanced_neg_mean: f64,
    /// Extra mean in positives for the strongest balanced feature.
    pub balanced_shift: f64,
    /// Multiplier on the shift from the first to the last balanced feature.
    pub balanced_floor: f64,
    /// Zero-inflation applied to balanced features in both classes.
    pub balanced_dropout: f64,
    /// Fraction of positives drawn with strongly attenuated signal.
    pub hard_fraction: f64,
    /// Signal attenuation for the hard positives.
    pub hard_scale: f64,
    /// Background nonzero rate for the most common noise feature; decays
    /// geometrically to nearly constant-zero for the rarest.
    pub noise_rate_max: f64,
    pub noise_rate_min: f64,
}

impl Default for SpamLikeParams {
    fn default() -> Self {
        SpamLikeParams {
            rows: 4601,
            positives: 1813,
            n_features: 57,
            n_spiky: 8,
            spiky_activation: 0.24,
            spiky_activation_decay: 0.93,
            spiky_neg_rate: 0.004,
            n_balanced: 16,
            balanced_neg_mean: 0.22,
            balanced_shift: 0.26,
            balanced_floor: 0.5,
            balanced_dropout: 0.15,
            hard_fraction: 0.10,
            hard_scale: 0.15,
            noise_rate_max: 0.25,
            noise_rate_min: 0.003,
        }
    }
}

fn spam_like_schema(n_features: usize) -> Arc<FeatureSchema> {
    let names: Vec<String> = (0..n_features).map(|j| format!("freq_{j:02}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Arc::new(FeatureSchema::numeric(&refs, "is_spam", "1").unwrap())
}

/// Generate a spam-like dataset with the given shape parameters.
pub fn spam_like_with(params: &SpamLikeParams, seed: u64) -> Dataset {
    let p = params;
    let schema = spam_like_schema(p.n_features);
    let mut rng = rng_from(derive(seed, 0xD47A));

    let n_noise = p
        .n_features
        .saturating_sub(p.n_spiky)
        .saturating_sub(p.n_balanced);
    let noise_rate: Vec<f64> = (0..n_noise)
        .map(|j| {
            if n_noise <= 1 {
                p.noise_rate_max
            } else {
                let t = j as f64 / (n_noise - 1) as f64;
                p.noise_rate_max * (p.noise_rate_min / p.noise_rate_max).powf(t)
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(p.rows);
    let mut labels = Vec::with_capacity(p.rows);
    for i in 0..p.rows {
        let positive = i < p.positives;
        let z = if positive {
            if rng.gen_range(0.0..1.0f64) < p.hard_fraction {
                p.hard_scale
            } else {
                rng.gen_range(0.85..1.15f64)
            }
        } else {
            0.0
        };
        let mut row = Vec::with_capacity(p.n_features);
        // Spiky tier: zero unless activated; activation decays across the
        // tier and collapses for hard positives.
        for j in 0..p.n_spiky {
            let act = if positive {
                p.spiky_activation * p.spiky_activation_decay.powi(j as i32) * z.clamp(0.3, 1.0)
            } else {
                p.spiky_neg_rate
            };
            let v = if rng.gen_range(0.0..1.0f64) < act {
                if positive {
                    (0.4 + exp_draw(&mut rng, 0.5)) * z.max(0.3)
                } else {
                    exp_draw(&mut rng, 0.10)
                }
            } else {
                0.0
            };
            row.push(Value::Num(v));
        }
        // Balanced tier: both classes show values; positives sit higher by
        // a shift that fades across the tier.
        for j in 0..p.n_balanced {
            let frac = if p.n_balanced > 1 {
                j as f64 / (p.n_balanced - 1) as f64
            } else {
                0.0
            };
            let gradient = 1.0 - (1.0 - p.balanced_floor) * frac;
            let mean = p.balanced_neg_mean + p.balanced_shift * gradient * z;
            let v = if rng.gen_range(0.0..1.0f64) < p.balanced_dropout {
                0.0
            } else {
                exp_draw(&mut rng, mean)
            };
            row.push(Value::Num(v));
        }
        for j in 0..n_noise {
            let v = if rng.gen_range(0.0..1.0f64) < noise_rate[j] {
                exp_draw(&mut rng, 0.3)
            } else {
                0.0
            };
            row.push(Value::Num(v));
        }
        rows.push(row);
        labels.push(if positive { Label::Positive } else { Label::Negative });
    }
    Dataset::new(schema, rows, labels).expect("generator output is schema-valid")
}

/// The default 4601x57 spam-like dataset.
pub fn spam_like(seed: u64) -> Dataset {
    spam_like_with(&SpamLikeParams::default(), seed)
}

/// Spam-like data with a custom row count (class balance preserved);
/// used by the scalability smoke test.
pub fn spam_like_sized(rows: usize, seed: u64) -> Dataset {
    let mut p = SpamLikeParams::default();
    p.positives = (rows as f64 * 0.394).round() as usize;
    p.rows = rows;
    spam_like_with(&p, seed)
}

/// Intrusion-detection-shaped table: 9 numeric and 5 categorical features,
/// roughly half attacks. Exercises the multiway-split code paths.
pub fn mixed_traffic(rows: usize, seed: u64) -> Dataset {
    let schema = Arc::new(
        FeatureSchema::new(
            vec![
                FeatureDef { name: "duration".into(), kind: FeatureKind::Numeric },
                FeatureDef { name: "src_bytes".into(), kind: FeatureKind::Numeric },
                FeatureDef { name: "dst_bytes".into(), kind: FeatureKind::Numeric },
                FeatureDef { name: "count".into(), kind: FeatureKind::Numeric },
                FeatureDef { name: "srv_count".into(), kind: FeatureKind::Numeric },
                FeatureDef { name: "serror_rate".into(), kind: FeatureKind::Numeric },
                FeatureDef { name: "srv_serror_rate".into(), kind: FeatureKind::Numeric },
                FeatureDef { name: "same_srv_rate".into(), kind: FeatureKind::Numeric },
                FeatureDef { name: "diff_srv_rate".into(), kind: FeatureKind::Numeric },
                FeatureDef {
                    name: "protocol".into(),
                    kind: FeatureKind::Categorical(vec!["tcp".into(), "udp".into(), "icmp".into()]),
                },
                FeatureDef {
                    name: "service".into(),
                    kind: FeatureKind::Categorical(vec![
                        "http".into(),
                        "smtp".into(),
                        "ssh".into(),
                        "dns".into(),
                        "telnet".into(),
                        "other".into(),
                    ]),
                },
                FeatureDef {
                    name: "flag".into(),
                    kind: FeatureKind::Categorical(vec![
                        "SF".into(),
                        "S0".into(),
                        "REJ".into(),
                        "RSTO".into(),
                    ]),
                },
                FeatureDef {
                    name: "land".into(),
                    kind: FeatureKind::Categorical(vec!["0".into(), "1".into()]),
                },
                FeatureDef {
                    name: "logged_in".into(),
                    kind: FeatureKind::Categorical(vec!["0".into(), "1".into()]),
                },
            ],
            "class",
            "attack",
        )
        .unwrap(),
    );
    let mut rng = rng_from(derive(seed, 0x7EA7));
    let mut rows_out = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let attack = i % 2 == 0;
        let noisy = rng.gen_range(0.0..1.0f64) < 0.12;
        let hot = attack != noisy; // attacks mostly hot, benign mostly cold
        let duration = if hot { exp_draw(&mut rng, 2.0) } else { exp_draw(&mut rng, 30.0) };
        let src_bytes = if hot { exp_draw(&mut rng, 300.0) } else { exp_draw(&mut rng, 4000.0) };
        let dst_bytes = if hot { exp_draw(&mut rng, 80.0) } else { exp_draw(&mut rng, 2500.0) };
        let count = if hot { 80.0 + exp_draw(&mut rng, 120.0) } else { exp_draw(&mut rng, 25.0) };
        let srv_count = count * rng.gen_range(0.3..1.0) ;
        let serror = if hot { rng.gen_range(0.5..1.0) } else { rng.gen_range(0.0..0.2) };
        let srv_serror = (serror + rng.gen_range(-0.1..0.1f64)).clamp(0.0, 1.0);
        let same_srv = if hot { rng.gen_range(0.0..0.4) } else { rng.gen_range(0.6..1.0) };
        let diff_srv = 1.0 - same_srv * rng.gen_range(0.7..1.0);
        let protocol = if hot {
            if rng.gen_range(0.0..1.0f64) < 0.55 { 0 } else { 2 }
        } else {
            if rng.gen_range(0.0..1.0f64) < 0.8 { 0 } else { 1 }
        };
        let service = if hot {
            *[2usize, 4, 5][rng.gen_range(0..3)..][..1].first().unwrap()
        } else {
            [0usize, 1, 3][rng.gen_range(0..3)]
        };
        let flag = if hot { rng.gen_range(1..4) } else { 0 };
        let land = usize::from(hot && rng.gen_range(0.0..1.0f64) < 0.05);
        let logged_in = usize::from(!hot || rng.gen_range(0.0..1.0f64) < 0.15);
        rows_out.push(vec![
            Value::Num(duration),
            Value::Num(src_bytes),
            Value::Num(dst_bytes),
            Value::Num(count),
            Value::Num(srv_count),
            Value::Num(serror),
            Value::Num(srv_serror),
            Value::Num(same_srv),
            Value::Num(diff_srv),
            Value::Cat(protocol),
            Value::Cat(service),
            Value::Cat(flag),
            Value::Cat(land),
            Value::Cat(logged_in),
        ]);
        labels.push(if attack { Label::Positive } else { Label::Negative });
    }
    Dataset::new(schema, rows_out, labels).expect("generator output is schema-valid")
}

/// Random small tree pools over `n_features` numeric features, for
/// validating certificates against the brute-force attack oracle. Split
/// thresholds come from the grid {0.2, 0.4, 0.6, 0.8} and leaf counts are
/// small random integers, so instances drawn off-grid (for example from
/// {0.1, 0.3, 0.5, 0.7, 0.9}) route deterministically.
pub fn random_pool(
    n_features: usize,
    max_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Vec<crate::tree::DecisionTree> {
    use crate::tree::{DecisionTree, SplitKind, SplitRule, TreeNode};

    fn node(m: usize, depth_left: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        if depth_left == 0 || rng.gen_range(0.0..1.0f64) < 0.3 {
            let p = rng.gen_range(0..12usize);
            let n = rng.gen_range(0..12usize);
            return TreeNode::leaf(p.max(usize::from(p + n == 0)), n);
        }
        let rule = SplitRule {
            feature: rng.gen_range(0..m),
            kind: SplitKind::NumericThreshold([0.2, 0.4, 0.6, 0.8][rng.gen_range(0..4)]),
        };
        let children = vec![node(m, depth_left - 1, rng), node(m, depth_left - 1, rng)];
        TreeNode::internal(rule, children)
    }

    let mut rng = rng_from(derive(seed, 0xF0E57));
    let m_trees = rng.gen_range(1..=max_trees);
    (0..m_trees)
        .map(|_| {
            let root = node(n_features, max_depth, &mut rng);
            let total = root.total();
            DecisionTree::new(root, total).expect("generated tree is structurally valid")
        })
        .collect()
}

/// Off-grid instances for [`random_pool`] trees.
pub fn random_grid_instance(n_features: usize, rng: &mut ChaCha8Rng) -> Vec<Value> {
    (0..n_features)
        .map(|_| Value::Num([0.1, 0.3, 0.5, 0.7, 0.9][rng.gen_range(0..5)]))
        .collect()
}

/// Two noisy blobs over `m` numeric features; small fixtures for tree and
/// certificate tests. Roughly 1/7 of the labels are flipped so nodes stay
/// impure and trees are non-trivial.
pub fn separable_blobs(n: usize, m: usize, noise: f64, seed: u64) -> Dataset {
    let names: Vec<String> = (0..m).map(|j| format!("f{j}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let schema = Arc::new(FeatureSchema::numeric(&refs, "y", "1").unwrap());
    let mut rng = rng_from(derive(seed, 0xB10B));
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let pos = i % 2 == 0;
        let center = if pos { 1.0 } else { 0.0 };
        let row: Vec<Value> = (0..m)
            .map(|_| Value::Num(center + rng.gen_range(-1.0..1.0) * noise * 2.0))
            .collect();
        let flip = i % 7 == 3;
        rows.push(row);
        labels.push(if pos != flip { Label::Positive } else { Label::Negative });
    }
    Dataset::new(schema, rows, labels).expect("generator output is schema-valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spam_like_has_requested_shape() {
        let d = spam_like(1);
        assert_eq!(d.n_rows(), 4601);
        assert_eq!(d.n_features(), 57);
        assert_eq!(d.positives(), 1813);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = spam_like_sized(200, 9);
        let b = spam_like_sized(200, 9);
        assert_eq!(a.rows(), b.rows());
        let a = mixed_traffic(100, 3);
        let b = mixed_traffic(100, 3);
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn mixed_traffic_is_mixed_and_balanced() {
        let d = mixed_traffic(300, 4);
        assert_eq!(d.positives(), 150);
        assert!(d.schema().features().iter().any(|f| f.kind.is_numeric()));
        assert!(d.schema().features().iter().any(|f| !f.kind.is_numeric()));
    }
}
