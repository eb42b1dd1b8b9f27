//! Seeded multi-run experiment harness: per-repeat split/train/evaluate/
//! probe/attack pipelines, baseline algorithms, parameter sweeps, and
//! machine-readable result emission. This is the engine behind the CLI.
//!
//! Determinism contract: identical config and master seed produce
//! identical metrics (the CSV emission contains no wall-clock values;
//! timings live only in the JSON summary).

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{
    attack_bounded, attack_unbounded, learn_attack_order, make_knowledge_split,
    ClusteredOracle, FullPoolOracle, Knowledge, ModelOracle,
};
use crate::cluster::{build_similarity_graph, spectral_clustering, Clustering};
use crate::data::{
    negative_profile, split_train_test, split_train_test_stratified, Dataset, Label,
};
use crate::error::{Error, Result};
use crate::forest::{
    train_random_forest, train_single_tree, train_wrf, CostVector, ModelPool,
    VulnerabilityMetric,
};
use crate::rng::{derive, derive2};
use crate::tree::{TreeParams, WeightVector};

/// The algorithms under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rf,
    C45,
    Ig,
    Wrf,
    Cwrf,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" => Ok(Algorithm::Rf),
            "c45" | "c4.5" => Ok(Algorithm::C45),
            "ig" => Ok(Algorithm::Ig),
            "wrf" => Ok(Algorithm::Wrf),
            "cwrf" => Ok(Algorithm::Cwrf),
            other => Err(Error::BadParam(format!("unknown algorithm '{other}'"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::Rf => "rf",
            Algorithm::C45 => "c45",
            Algorithm::Ig => "ig",
            Algorithm::Wrf => "wrf",
            Algorithm::Cwrf => "cwrf",
        };
        write!(f, "{s}")
    }
}

/// Attack budget configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "k")]
pub enum CostMode {
    /// One bounded attack per listed budget.
    Bounded(Vec<usize>),
    Unbounded,
}

/// Everything one experiment needs besides the dataset itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    /// Pool size M.
    pub m_trees: usize,
    /// Feature subset size F; defaults to round(sqrt(m)).
    pub subspace: Option<usize>,
    /// Robustness tradeoff r (wrf / ig / cwrf).
    pub r: f64,
    /// Cluster count s (cwrf).
    pub s: usize,
    /// Models selected per cluster q (cwrf).
    pub q: usize,
    pub knowledge: Knowledge,
    pub cost_mode: CostMode,
    /// Positive instances probed before attacking.
    pub n_probe: usize,
    pub repeats: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub stratified: bool,
    #[serde(default)]
    pub tree_params: TreeParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Rf,
            m_trees: 100,
            subspace: None,
            r: 1.5,
            s: 10,
            q: 5,
            knowledge: Knowledge::Incomplete,
            cost_mode: CostMode::Unbounded,
            n_probe: 50,
            repeats: 20,
            seed: 1,
            train_fraction: 0.7,
            stratified: false,
            tree_params: TreeParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_trees == 0 {
            return Err(Error::BadParam("m_trees must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::BadParam("repeats must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::BadFraction(self.train_fraction));
        }
        if self.algorithm == Algorithm::Cwrf {
            if self.s < 1 || self.q < 1 {
                return Err(Error::BadParam("cwrf requires s >= 1 and q >= 1".into()));
            }
            if self.s > self.m_trees {
                return Err(Error::BadParam(format!(
                    "cwrf cluster count {} exceeds pool size {}",
                    self.s, self.m_trees
                )));
            }
        }
        if let CostMode::Bounded(ks) = &self.cost_mode {
            if ks.is_empty() {
                return Err(Error::BadParam("bounded mode needs at least one k".into()));
            }
            if ks.contains(&0) {
                return Err(Error::BadParam("bounded budgets must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn subspace_for(&self, n_features: usize) -> usize {
        match self.algorithm {
            // The single-tree baseline always considers every feature.
            Algorithm::C45 => n_features,
            _ => self
                .subspace
                .unwrap_or_else(|| ((n_features as f64).sqrt().round() as usize).max(1))
                .min(n_features),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::BadParam(format!("config parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Deterministic metrics of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatMetrics {
    pub repeat: usize,
    pub true_positive_rate: f64,
    pub false_positive_rate: f64,
    /// (k, attacker success rate) per bounded budget.
    pub bounded_success: Vec<(usize, f64)>,
    /// Mean modifications over evaded instances (unbounded mode).
    pub avg_modified: Option<f64>,
    pub attacked: usize,
    pub evaded: usize,
    pub exhausted: usize,
    pub initially_accepted: usize,
    pub attack_order_len: usize,
}

/// Wall-clock seconds per phase, summed over repeats. Reported in the
/// JSON summary only, never in the CSV.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub train: f64,
    pub cluster: f64,
    pub evaluate: f64,
    pub probe: f64,
    pub attack: f64,
}

/// Per-repeat metrics plus their arithmetic means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub runs: Vec<RepeatMetrics>,
    pub mean_tpr: f64,
    pub mean_fpr: f64,
    pub mean_bounded_success: Vec<(usize, f64)>,
    /// Mean of per-repeat averages, over repeats that evaded at all.
    pub mean_avg_modified: Option<f64>,
    pub timings: PhaseTimings,
}

impl MetricsReport {
    /// Long-format CSV: `repeat,metric,value`, with `mean` rows last.
    /// Contains only deterministic values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repeat,metric,value\n");
        for r in &self.runs {
            out.push_str(&format!("{},tpr,{}\n", r.repeat, r.true_positive_rate));
            out.push_str(&format!("{},fpr,{}\n", r.repeat, r.false_positive_rate));
            for &(k, rate) in &r.bounded_success {
                out.push_str(&format!("{},success_k{k},{rate}\n", r.repeat));
            }
            if let Some(avg) = r.avg_modified {
                out.push_str(&format!("{},avg_modified,{avg}\n", r.repeat));
            }
            out.push_str(&format!("{},attacked,{}\n", r.repeat, r.attacked));
            out.push_str(&format!("{},evaded,{}\n", r.repeat, r.evaded));
            out.push_str(&format!("{},exhausted,{}\n", r.repeat, r.exhausted));
        }
        out.push_str(&format!("mean,tpr,{}\n", self.mean_tpr));
        out.push_str(&format!("mean,fpr,{}\n", self.mean_fpr));
        for &(k, rate) in &self.mean_bounded_success {
            out.push_str(&format!("mean,success_k{k},{rate}\n"));
        }
        if let Some(avg) = self.mean_avg_modified {
            out.push_str(&format!("mean,avg_modified,{avg}\n"));
        }
        out
    }

    /// Full report, timings included.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

const REPEAT_STREAM: u64 = 0x61;
const SPLIT_STREAM: u64 = 0x62;
const TRAIN_STREAM: u64 = 0x63;
const CLUSTER_STREAM: u64 = 0x64;
const ORACLE_STREAM: u64 = 0x65;
const PROBE_STREAM: u64 = 0x67;
const EVAL_QUERY: u64 = 0x68;

/// A trained defense: the pool plus, for cwrf, its clustering.
pub struct TrainedDefense {
    pub pool: ModelPool,
    pub clustering: Option<Clustering>,
}

impl TrainedDefense {
    pub fn oracle<'a>(&'a self, q: usize, oracle_seed: u64) -> Box<dyn ModelOracle + 'a> {
        match &self.clustering {
            Some(c) => Box::new(ClusteredOracle::new(&self.pool, c, q, oracle_seed)),
            None => Box::new(FullPoolOracle::new(&self.pool)),
        }
    }
}

/// Train the configured algorithm on one training set.
pub fn train_defense(
    train: &Dataset,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<TrainedDefense> {
    let m = train.n_features();
    let f = cfg.subspace_for(m);
    let costs = CostVector::uniform(m);
    let pool = match cfg.algorithm {
        Algorithm::Rf => train_random_forest(
            train,
            cfg.m_trees,
            f,
            &WeightVector::uniform(m),
            &cfg.tree_params,
            derive(seed, TRAIN_STREAM),
        )?,
        Algorithm::C45 => train_single_tree(train, &cfg.tree_params, derive(seed, TRAIN_STREAM))?,
        Algorithm::Wrf | Algorithm::Cwrf => train_wrf(
            train,
            cfg.m_trees,
            f,
            cfg.r,
            &costs,
            VulnerabilityMetric::DifferentialRatio,
            &cfg.tree_params,
            derive(seed, TRAIN_STREAM),
        )?,
        Algorithm::Ig => train_wrf(
            train,
            cfg.m_trees,
            f,
            cfg.r,
            &costs,
            VulnerabilityMetric::InformationGain,
            &cfg.tree_params,
            derive(seed, TRAIN_STREAM),
        )?,
    };
    let clustering = if cfg.algorithm == Algorithm::Cwrf {
        let graph = build_similarity_graph(&pool);
        Some(spectral_clustering(
            &graph,
            cfg.s,
            derive(seed, CLUSTER_STREAM),
        )?)
    } else {
        None
    };
    Ok(TrainedDefense { pool, clustering })
}

/// Clean-data detection quality of an oracle over a labeled set.
pub fn evaluate_oracle(oracle: &dyn ModelOracle, test: &Dataset) -> Result<(f64, f64)> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut pos = 0usize;
    let mut neg = 0usize;
    for i in 0..test.n_rows() {
        let predicted = oracle.classify(test.row(i), derive2(EVAL_QUERY, 0, i as u64));
        match test.label(i) {
            Label::Positive => {
                pos += 1;
                if predicted == Label::Positive {
                    tp += 1;
                }
            }
            Label::Negative => {
                neg += 1;
                if predicted == Label::Positive {
                    fp += 1;
                }
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::MissingClass);
    }
    Ok((tp as f64 / pos as f64, fp as f64 / neg as f64))
}

fn run_one_repeat(
    data: &Dataset,
    cfg: &ExperimentConfig,
    repeat: usize,
    timings: &mut PhaseTimings,
) -> Result<RepeatMetrics> {
    let rep_seed = derive2(cfg.seed, REPEAT_STREAM, repeat as u64);
    let (train, test) = if cfg.stratified {
        split_train_test_stratified(data, cfg.train_fraction, derive(rep_seed, SPLIT_STREAM))?
    } else {
        split_train_test(data, cfg.train_fraction, derive(rep_seed, SPLIT_STREAM))?
    };

    let t0 = Instant::now();
    let defense = train_defense(&train, cfg, rep_seed)?;
    let train_elapsed = t0.elapsed().as_secs_f64();

    let oracle = defense.oracle(cfg.q, derive(rep_seed, ORACLE_STREAM));

    let t1 = Instant::now();
    let (tpr, fpr) = evaluate_oracle(oracle.as_ref(), &test)?;
    let eval_elapsed = t1.elapsed().as_secs_f64();

    let (probing, attacking) = make_knowledge_split(&test, cfg.knowledge, rep_seed)?;
    let profile = negative_profile(&probing)?;
    let n_probe = cfg
        .n_probe
        .min(probing.indices_with_label(Label::Positive).len());

    let t2 = Instant::now();
    let order = learn_attack_order(
        oracle.as_ref(),
        &probing,
        n_probe,
        &profile,
        data.n_features(),
        derive(rep_seed, PROBE_STREAM),
    )?;
    let probe_elapsed = t2.elapsed().as_secs_f64();

    let t3 = Instant::now();
    let mut bounded_success = Vec::new();
    let mut unbounded = None;
    match &cfg.cost_mode {
        CostMode::Bounded(ks) => {
            for &k in ks {
                if order.is_empty() {
                    bounded_success.push((k, 0.0));
                    continue;
                }
                let res = attack_bounded(oracle.as_ref(), &attacking, &order, k, &profile)?;
                bounded_success.push((k, res.success_rate));
                unbounded = Some(res); // keep last for the count fields
            }
        }
        CostMode::Unbounded => {
            if !order.is_empty() {
                unbounded = Some(attack_unbounded(
                    oracle.as_ref(),
                    &attacking,
                    &order,
                    &profile,
                    order.len(),
                )?);
            }
        }
    }
    let attack_elapsed = t3.elapsed().as_secs_f64();

    timings.train += train_elapsed;
    timings.evaluate += eval_elapsed;
    timings.probe += probe_elapsed;
    timings.attack += attack_elapsed;

    let (attacked, evaded, exhausted, initially_accepted, avg_modified) = match &unbounded {
        Some(res) => (
            res.attacked,
            res.evaded,
            res.exhausted,
            res.initially_accepted,
            match cfg.cost_mode {
                CostMode::Unbounded => res.avg_modified,
                CostMode::Bounded(_) => None,
            },
        ),
        None => (0, 0, 0, 0, None),
    };

    Ok(RepeatMetrics {
        repeat,
        true_positive_rate: tpr,
        false_positive_rate: fpr,
        bounded_success,
        avg_modified,
        attacked,
        evaded,
        exhausted,
        initially_accepted,
        attack_order_len: order.len(),
    })
}

/// Run the configured experiment end to end: per repeat, split, train,
/// evaluate clean detection quality, learn the attack order, attack, and
/// aggregate arithmetic means over repeats.
pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let results: Vec<(RepeatMetrics, PhaseTimings)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|i| {
            let mut t = PhaseTimings::default();
            run_one_repeat(data, cfg, i, &mut t).map(|m| (m, t))
        })
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(results.len());
    let mut timings = PhaseTimings::default();
    for (m, t) in results {
        timings.train += t.train;
        timings.cluster += t.cluster;
        timings.evaluate += t.evaluate;
        timings.probe += t.probe;
        timings.attack += t.attack;
        runs.push(m);
    }

    let n = runs.len() as f64;
    let mean_tpr = runs.iter().map(|r| r.true_positive_rate).sum::<f64>() / n;
    let mean_fpr = runs.iter().map(|r| r.false_positive_rate).sum::<f64>() / n;
    let mean_bounded_success = match &cfg.cost_mode {
        CostMode::Bounded(ks) => ks
            .iter()
            .map(|&k| {
                let mean = runs
                    .iter()
                    .flat_map(|r| r.bounded_success.iter())
                    .filter(|&&(kk, _)| kk == k)
                    .map(|&(_, rate)| rate)
                    .sum::<f64>()
                    / n;
                (k, mean)
            })
            .collect(),
        CostMode::Unbounded => Vec::new(),
    };
    let with_avg: Vec<f64> = runs.iter().filter_map(|r| r.avg_modified).collect();
    let mean_avg_modified = if with_avg.is_empty() {
        None
    } else {
        Some(with_avg.iter().sum::<f64>() / with_avg.len() as f64)
    };

    Ok(MetricsReport {
        config: cfg.clone(),
        runs,
        mean_tpr,
        mean_fpr,
        mean_bounded_success,
        mean_avg_modified,
        timings,
    })
}

/// Which config field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    R,
    S,
    Q,
    K,
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r" => Ok(SweepParameter::R),
            "s" => Ok(SweepParameter::S),
            "q" => Ok(SweepParameter::Q),
            "k" => Ok(SweepParameter::K),
            other => Err(Error::BadParam(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

/// One experiment per value, all sharing the master seed; results come
/// back keyed by the swept value.
pub fn sweep(
    data: &Dataset,
    base: &ExperimentConfig,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<(f64, MetricsReport)>> {
    if values.is_empty() {
        return Err(Error::BadParam("sweep needs at least one value".into()));
    }
    let weighted = matches!(
        base.algorithm,
        Algorithm::Wrf | Algorithm::Cwrf | Algorithm::Ig
    );
    match parameter {
        SweepParameter::R if !weighted => {
            return Err(Error::BadParam(format!(
                "parameter r does not apply to algorithm {}",
                base.algorithm
            )))
        }
        SweepParameter::S | SweepParameter::Q if base.algorithm != Algorithm::Cwrf => {
            return Err(Error::BadParam(format!(
                "parameter {parameter:?} only applies to cwrf, not {}",
                base.algorithm
            )))
        }
        _ => {}
    }
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        match parameter {
            SweepParameter::R => cfg.r = v,
            SweepParameter::S => cfg.s = v as usize,
            SweepParameter::Q => cfg.q = v as usize,
            SweepParameter::K => cfg.cost_mode = CostMode::Bounded(vec![v as usize]),
        }
        out.push((v, run_experiment(data, &cfg)?));
    }
    Ok(out)
}

/// Median wall-clock seconds to train one forest configuration at each
/// dataset size; the scalability smoke check fits these against a linear
/// reference.
pub fn training_scaling(
    sizes: &[usize],
    m_trees: usize,
    max_depth: Option<usize>,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let params = TreeParams {
        max_depth,
        ..TreeParams::default()
    };
    let mut out = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        let data = crate::synth::spam_like_sized(n, derive(seed, i as u64));
        let f = ExperimentConfig::default().subspace_for(data.n_features());
        let w = WeightVector::uniform(data.n_features());
        // Warm-up run, then the median of three timed runs.
        train_random_forest(&data, m_trees, f, &w, &params, derive2(seed, 1, i as u64))?;
        let mut times = Vec::with_capacity(3);
        for rep in 0..3u64 {
            let t = Instant::now();
            train_random_forest(
                &data,
                m_trees,
                f,
                &w,
                &params,
                derive2(seed, 2 + rep, i as u64),
            )?;
            times.push(t.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        out.push((n, times[1]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(algorithm: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            algorithm,
            m_trees: 8,
            subspace: Some(2),
            r: 1.5,
            s: 3,
            q: 2,
            n_probe: 8,
            repeats: 2,
            seed: 11,
            ..ExperimentConfig::default()
        }
    }

    fn small_data() -> Dataset {
        crate::synth::separable_blobs(160, 6, 0.4, 5)
    }

    #[test]
    fn experiment_runs_all_algorithms() {
        let data = small_data();
        for alg in [
            Algorithm::Rf,
            Algorithm::C45,
            Algorithm::Ig,
            Algorithm::Wrf,
            Algorithm::Cwrf,
        ] {
            let report = run_experiment(&data, &small_cfg(alg)).unwrap();
            assert_eq!(report.runs.len(), 2, "{alg}");
            assert!(report.mean_tpr > 0.5, "{alg}: tpr {}", report.mean_tpr);
            assert!(report.mean_fpr < 0.5, "{alg}: fpr {}", report.mean_fpr);
            for r in &report.runs {
                assert!((0.0..=1.0).contains(&r.true_positive_rate));
                assert!((0.0..=1.0).contains(&r.false_positive_rate));
            }
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let data = small_data();
        let cfg = small_cfg(Algorithm::Cwrf);
        let a = run_experiment(&data, &cfg).unwrap();
        let b = run_experiment(&data, &cfg).unwrap();
        assert_eq!(a.runs, b.runs);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn c45_pool_is_a_single_tree() {
        let data = small_data();
        let defense = train_defense(&data, &small_cfg(Algorithm::C45), 3).unwrap();
        assert_eq!(defense.pool.len(), 1);
        assert!(defense.clustering.is_none());
        // The report is consistent with single-tree prediction.
        let oracle = defense.oracle(1, 0);
        let (tpr, _) = evaluate_oracle(oracle.as_ref(), &data).unwrap();
        let tree = &defense.pool.trees()[0];
        let mut tp = 0;
        let mut pos = 0;
        for i in 0..data.n_rows() {
            if data.label(i) == Label::Positive {
                pos += 1;
                if tree.predict(data.row(i)) == Label::Positive {
                    tp += 1;
                }
            }
        }
        assert!((tpr - tp as f64 / pos as f64).abs() < 1e-12);
    }

    #[test]
    fn bounded_mode_reports_success_per_k() {
        let data = small_data();
        let mut cfg = small_cfg(Algorithm::Rf);
        cfg.cost_mode = CostMode::Bounded(vec![1, 2, 4]);
        let report = run_experiment(&data, &cfg).unwrap();
        assert_eq!(report.mean_bounded_success.len(), 3);
        // Monotone in k on the mean.
        let rates: Vec<f64> = report.mean_bounded_success.iter().map(|&(_, r)| r).collect();
        assert!(rates[0] <= rates[1] + 1e-12 && rates[1] <= rates[2] + 1e-12);
        assert!(report.mean_avg_modified.is_none());
    }

    #[test]
    fn sweep_validates_parameter_applicability() {
        let data = small_data();
        let cfg = small_cfg(Algorithm::Rf);
        assert!(sweep(&data, &cfg, SweepParameter::R, &[0.5]).is_err());
        assert!(sweep(&data, &cfg, SweepParameter::S, &[2.0]).is_err());
        assert!(sweep(&data, &cfg, SweepParameter::K, &[]).is_err());
        let out = sweep(&data, &cfg, SweepParameter::K, &[1.0, 3.0]).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[0].1.mean_bounded_success[0].1 <= out[1].1.mean_bounded_success[0].1 + 1e-12);
    }

    #[test]
    fn sweep_r_runs_for_weighted_algorithms() {
        let data = small_data();
        let mut cfg = small_cfg(Algorithm::Wrf);
        cfg.repeats = 1;
        let out = sweep(&data, &cfg, SweepParameter::R, &[0.0, 1.0]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].0, 0.0);
    }

    #[test]
    fn csv_has_no_timing_rows() {
        let data = small_data();
        let report = run_experiment(&data, &small_cfg(Algorithm::Rf)).unwrap();
        let csv = report.to_csv();
        assert!(csv.starts_with("repeat,metric,value\n"));
        assert!(!csv.contains("secs"));
        assert!(csv.contains("mean,tpr,"));
        // JSON carries the timings instead.
        let json = report.to_json().unwrap();
        assert!(json.contains("timings"));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = small_cfg(Algorithm::Cwrf);
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_validation_catches_bad_setups() {
        let mut cfg = small_cfg(Algorithm::Cwrf);
        cfg.s = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(Algorithm::Cwrf);
        cfg.s = 100; // exceeds m_trees = 8
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(Algorithm::Rf);
        cfg.cost_mode = CostMode::Bounded(vec![]);
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(Algorithm::Rf);
        cfg.train_fraction = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn training_scaling_reports_increasing_sizes() {
        let out = training_scaling(&[300, 600], 2, Some(8), 7).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].0, 300);
        assert!(out.iter().all(|&(_, t)| t > 0.0));
    }
}
