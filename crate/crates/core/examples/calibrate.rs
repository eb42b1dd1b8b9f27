// Tuning harness for the spam-like generator constants. Not part of the
// test suite; prints the pipeline statistics the reproduction experiments
// target.

use std::time::Instant;

use thicket::experiment::*;
use thicket::forest::feature_usage_histogram;
use thicket::synth::spam_like;

fn main() {
    let repeats: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let data = spam_like(2024);
    println!(
        "data: {} rows, {} features, {} positive",
        data.n_rows(),
        data.n_features(),
        data.positives()
    );

    let base = ExperimentConfig {
        repeats,
        seed: 7,
        tree_params: thicket::tree::TreeParams {
            min_node_size: 40,
            max_depth: Some(5),
            gain_tolerance: 1e-12,
        },
        ..ExperimentConfig::default()
    };

    // Plain RF, unbounded.
    let t = Instant::now();
    let rf = run_experiment(
        &data,
        &ExperimentConfig {
            algorithm: Algorithm::Rf,
            ..base.clone()
        },
    )
    .unwrap();
    println!(
        "RF   : tpr={:.4} fpr={:.4} avg_mod={:?} orderlens={:?} [{:.1}s]",
        rf.mean_tpr,
        rf.mean_fpr,
        rf.mean_avg_modified,
        rf.runs.iter().map(|r| r.attack_order_len).collect::<Vec<_>>(),
        t.elapsed().as_secs_f64()
    );

    // Histogram shape on one training split.
    let (train, _) = thicket::data::split_train_test(&data, 0.7, 99).unwrap();
    let defense = train_defense(
        &train,
        &ExperimentConfig {
            algorithm: Algorithm::Rf,
            ..base.clone()
        },
        1234,
    )
    .unwrap();
    let hist = feature_usage_histogram(&defense.pool);
    let counts: Vec<usize> = hist.iter().map(|&(_, c)| c).collect();
    let ge80 = counts.iter().filter(|&&c| c >= 80).count();
    let ge50 = counts.iter().filter(|&&c| c >= 50).count();
    println!(
        "hist : max={} ge80={} ge50={} top12={:?} tail12={:?}",
        counts[0],
        ge80,
        ge50,
        &counts[..12],
        &counts[counts.len() - 12..]
    );
    let wrf_defense = train_defense(
        &train,
        &ExperimentConfig {
            algorithm: Algorithm::Wrf,
            ..base.clone()
        },
        1234,
    )
    .unwrap();
    let whist = feature_usage_histogram(&wrf_defense.pool);
    println!(
        "wrfh : max={} ge80={}",
        whist[0].1,
        whist.iter().filter(|&&(_, c)| c >= 80).count()
    );

    // Weighting diagnostics: pass-1 ratios and weights.
    let ratios = defense.pool.per_feature_ratio();
    let mut top: Vec<(usize, f64)> = ratios.iter().copied().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!(
        "d    : {:?}",
        top.iter()
            .take(14)
            .map(|&(j, d)| format!("f{j}:{d:.3}"))
            .collect::<Vec<_>>()
    );
    let w = wrf_defense.pool.weights_used();
    let mut ws: Vec<(usize, f64)> = w.as_slice().iter().copied().enumerate().collect();
    ws.sort_by(|a, b| a.1.total_cmp(&b.1));
    println!(
        "w    : {:?}",
        ws.iter()
            .take(14)
            .map(|&(j, w)| format!("f{j}:{w:.3}"))
            .collect::<Vec<_>>()
    );
    // Root features across the two pools.
    let roots = |pool: &thicket::forest::ModelPool| {
        let mut counts = std::collections::BTreeMap::new();
        for t in pool.trees() {
            if let Some(rule) = &t.root().split {
                *counts.entry(rule.feature).or_insert(0usize) += 1;
            }
        }
        counts
    };
    println!("rfroot : {:?}", roots(&defense.pool));
    println!("wrfroot: {:?}", roots(&wrf_defense.pool));

    // WRF r=1.5 unbounded.
    let t = Instant::now();
    let wrf = run_experiment(
        &data,
        &ExperimentConfig {
            algorithm: Algorithm::Wrf,
            ..base.clone()
        },
    )
    .unwrap();
    println!(
        "WRF  : tpr={:.4} fpr={:.4} avg_mod={:?} [{:.1}s]",
        wrf.mean_tpr,
        wrf.mean_fpr,
        wrf.mean_avg_modified,
        t.elapsed().as_secs_f64()
    );

    // CWRF r=1.5 s=10 q=5 unbounded.
    let t = Instant::now();
    let cwrf = run_experiment(
        &data,
        &ExperimentConfig {
            algorithm: Algorithm::Cwrf,
            ..base.clone()
        },
    )
    .unwrap();
    println!(
        "CWRF : tpr={:.4} fpr={:.4} avg_mod={:?} [{:.1}s]",
        cwrf.mean_tpr,
        cwrf.mean_fpr,
        cwrf.mean_avg_modified,
        t.elapsed().as_secs_f64()
    );

    // Bounded k=4 comparison.
    let bounded = CostMode::Bounded(vec![4]);
    let rf4 = run_experiment(
        &data,
        &ExperimentConfig {
            algorithm: Algorithm::Rf,
            cost_mode: bounded.clone(),
            ..base.clone()
        },
    )
    .unwrap();
    let cwrf4 = run_experiment(
        &data,
        &ExperimentConfig {
            algorithm: Algorithm::Cwrf,
            cost_mode: bounded,
            ..base.clone()
        },
    )
    .unwrap();
    println!(
        "k=4  : rf_succ={:.3} cwrf_succ={:.3} gap={:.1}pp",
        rf4.mean_bounded_success[0].1,
        cwrf4.mean_bounded_success[0].1,
        100.0 * (rf4.mean_bounded_success[0].1 - cwrf4.mean_bounded_success[0].1)
    );
}
