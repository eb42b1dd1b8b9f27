//! Shared unit-test fixtures: the three hand-built spam-filter trees used
//! throughout the worked examples, over the feature set
//! (remove, dollar, bang, zeros, total_capital).

use std::sync::Arc;

use crate::data::{Dataset, FeatureSchema, Instance, Label, Value};
use crate::tree::{DecisionTree, SplitKind, SplitRule, TreeNode};

pub const REMOVE: usize = 0;
pub const DOLLAR: usize = 1;
pub const BANG: usize = 2;
pub const ZEROS: usize = 3;
pub const TOTAL_CAPITAL: usize = 4;

pub fn fig1_schema() -> Arc<FeatureSchema> {
    Arc::new(
        FeatureSchema::numeric(
            &["remove", "dollar", "bang", "zeros", "total_capital"],
            "class",
            "spam",
        )
        .unwrap(),
    )
}

fn num_split(feature: usize, t: f64, le: TreeNode, gt: TreeNode) -> TreeNode {
    TreeNode::internal(
        SplitRule {
            feature,
            kind: SplitKind::NumericThreshold(t),
        },
        vec![le, gt],
    )
}

/// f1: remove > 0 -> spam(800,100); else dollar > 0.05 -> spam(90,10),
/// else not-spam(100,900).
pub fn fig1_f1() -> DecisionTree {
    let dollar_node = num_split(DOLLAR, 0.05, TreeNode::leaf(100, 900), TreeNode::leaf(90, 10));
    let root = num_split(REMOVE, 0.0, dollar_node, TreeNode::leaf(800, 100));
    DecisionTree::new(root, 2000).unwrap()
}

/// f2: bang > 0.378 -> spam(800,100); else zeros > 0.25 -> spam(400,200),
/// else not-spam(50,450).
pub fn fig1_f2() -> DecisionTree {
    let zeros_node = num_split(ZEROS, 0.25, TreeNode::leaf(50, 450), TreeNode::leaf(400, 200));
    let root = num_split(BANG, 0.378, zeros_node, TreeNode::leaf(800, 100));
    DecisionTree::new(root, 2000).unwrap()
}

/// f3: dollar > 0.05 -> spam(900,100); else total_capital > 64 ->
/// spam(80,20), else not-spam(20,880).
pub fn fig1_f3() -> DecisionTree {
    let cap_node = num_split(
        TOTAL_CAPITAL,
        64.0,
        TreeNode::leaf(20, 880),
        TreeNode::leaf(80, 20),
    );
    let root = num_split(DOLLAR, 0.05, cap_node, TreeNode::leaf(900, 100));
    DecisionTree::new(root, 2000).unwrap()
}

pub fn fig1_pool() -> Vec<DecisionTree> {
    vec![fig1_f1(), fig1_f2(), fig1_f3()]
}

/// The attacker's original spam email: remove=0, dollar=0.2, bang=0.4,
/// zeros=0.3, total_capital=100.
pub fn fig1_instance() -> Instance {
    vec![
        Value::Num(0.0),
        Value::Num(0.2),
        Value::Num(0.4),
        Value::Num(0.3),
        Value::Num(100.0),
    ]
}

/// A tiny benign-profile dataset over the fig1 schema: two negatives whose
/// means make a plausible substitution target for every feature.
pub fn fig1_negatives() -> Dataset {
    let rows = vec![
        vec![
            Value::Num(0.0),
            Value::Num(0.0),
            Value::Num(0.1),
            Value::Num(0.0),
            Value::Num(20.0),
        ],
        vec![
            Value::Num(0.0),
            Value::Num(0.02),
            Value::Num(0.1),
            Value::Num(0.1),
            Value::Num(30.0),
        ],
        vec![
            Value::Num(0.0),
            Value::Num(0.3),
            Value::Num(0.5),
            Value::Num(0.4),
            Value::Num(120.0),
        ],
    ];
    let labels = vec![Label::Negative, Label::Negative, Label::Positive];
    Dataset::new(fig1_schema(), rows, labels).unwrap()
}
