//! Clustered model selection: build the feature-sharing similarity graph
//! over a pool, spectrally cluster it offline, and draw a random subset of
//! models per cluster for each query.
//!
//! The spectral step is the symmetric normalized-Laplacian variant with a
//! row-normalized embedding; k-means with k-means++ seeding and a capped
//! number of restarts does the final partitioning. Per-query selection is
//! a pure function of `(seed, query_id)`, so concurrent queries never
//! contend on shared RNG state.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forest::ModelPool;
use crate::linalg::eigensolve_symmetric;
use crate::rng::{derive, derive2, rng_from};
use crate::tree::DecisionTree;

/// Similarity graph over the trees of a pool: nodes are trees, an edge
/// links trees sharing at least one feature, and the edge weight is the
/// summed differential ratio of the shared features.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    weights: Vec<f64>, // dense n*n, symmetric, zero diagonal
    edges: Vec<(usize, usize)>,
}

impl SimilarityGraph {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Pairs (i < j) of trees sharing at least one feature.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.iter().any(|&(a, b)| (a, b) == (i.min(j), i.max(j)))
    }

    pub fn degree(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.weight(i, j)).sum()
    }
}

/// Partition of pool members into `s` clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<usize>,
    s: usize,
}

impl Clustering {
    pub fn new(assignment: Vec<usize>, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::BadClusterCount { s, m: assignment.len() });
        }
        if assignment.iter().any(|&c| c >= s) {
            return Err(Error::BadParam("cluster id out of range".into()));
        }
        Ok(Self { assignment, s })
    }

    pub fn cluster_count(&self) -> usize {
        self.s
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, tree: usize) -> usize {
        self.assignment[tree]
    }

    /// Tree indices per cluster, each ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.s];
        for (tree, &c) in self.assignment.iter().enumerate() {
            out[c].push(tree);
        }
        out
    }

    /// Number of distinct clusters that contain at least one of the trees.
    pub fn spread(&self, trees: &BTreeSet<usize>) -> usize {
        trees
            .iter()
            .map(|&t| self.assignment[t])
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Size of every per-query selection with `q` draws per cluster.
    pub fn selection_size(&self, q: usize) -> usize {
        self.members().iter().map(|m| m.len().min(q)).sum()
    }
}

/// Build the similarity graph of a pool: `w(i,j)` sums the pool's
/// per-feature differential ratios over the features trees i and j share.
pub fn build_similarity_graph(pool: &ModelPool) -> SimilarityGraph {
    let n = pool.len();
    let ratios = pool.per_feature_ratio();
    let sets: Vec<&BTreeSet<usize>> = pool.trees().iter().map(|t| t.feature_set()).collect();
    let mut weights = vec![0.0; n * n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let shared: Vec<usize> = sets[i].intersection(sets[j]).copied().collect();
            if shared.is_empty() {
                continue;
            }
            let w: f64 = shared.iter().map(|&f| ratios[f]).sum();
            weights[i * n + j] = w;
            weights[j * n + i] = w;
            edges.push((i, j));
        }
    }
    SimilarityGraph { n, weights, edges }
}

const KMEANS_RESTARTS: usize = 50;
const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_STREAM: u64 = 0x31;
const SELECT_STREAM: u64 = 0x32;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    let dim = points[0].len();

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, &x) in sums[labels[i]].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
            // Empty centroids keep their position; repair happens later.
        }
    }
    let wcss: f64 = points
        .iter()
        .zip(&labels)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum();
    (labels, wcss)
}

/// Move points into empty clusters until none remain: each repair takes
/// the point farthest from its current centroid among clusters of size
/// at least two.
fn repair_empty_clusters(points: &[Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = (0..k).find(|&c| sizes[c] == 0) else {
            return;
        };
        // Centroids of current assignment.
        let dim = points[0].len();
        let mut centroids = vec![vec![0.0; dim]; k];
        for (p, &l) in points.iter().zip(labels.iter()) {
            for (s, &x) in centroids[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                for s in centroids[c].iter_mut() {
                    *s /= sizes[c] as f64;
                }
            }
        }
        let victim = points
            .iter()
            .enumerate()
            .filter(|(i, _)| sizes[labels[*i]] >= 2)
            .max_by(|(i, p), (j, q)| {
                sq_dist(p, &centroids[labels[*i]])
                    .total_cmp(&sq_dist(q, &centroids[labels[*j]]))
                    .then(j.cmp(i))
            })
            .map(|(i, _)| i)
            .expect("k <= n guarantees a donor cluster");
        labels[victim] = empty;
    }
}

/// Normalized-cut spectral clustering of a similarity graph into `s`
/// clusters: symmetric normalized Laplacian, the `s` eigenvectors of
/// smallest eigenvalue, row-normalized embedding, seeded k-means.
pub fn spectral_clustering(g: &SimilarityGraph, s: usize, seed: u64) -> Result<Clustering> {
    let m = g.node_count();
    if s < 1 || s > m {
        return Err(Error::BadClusterCount { s, m });
    }
    if s == 1 {
        return Clustering::new(vec![0; m], 1);
    }

    // L = I - D^{-1/2} W D^{-1/2}; isolated nodes get D^{-1/2} = 0.
    let dinv: Vec<f64> = (0..m)
        .map(|i| {
            let d = g.degree(i);
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut lap = vec![vec![0.0; m]; m];
    for (i, row) in lap.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let w = if i == j { 0.0 } else { g.weight(i, j) };
            *entry = f64::from(u8::from(i == j)) - dinv[i] * w * dinv[j];
        }
    }
    let (_vals, vecs) = eigensolve_symmetric(&lap)?;

    // M x s embedding from the s smallest eigenvectors, rows normalized.
    let mut points: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..s).map(|k| vecs[k][i]).collect::<Vec<f64>>())
        .collect();
    for row in points.iter_mut() {
        let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = rng_from(derive2(seed, KMEANS_STREAM, restart as u64));
        let (labels, wcss) = kmeans_once(&points, s, &mut rng);
        if best.as_ref().map_or(true, |(_, w)| wcss < *w) {
            best = Some((labels, wcss));
        }
    }
    let (mut labels, _) = best.expect("at least one restart");
    repair_empty_clusters(&points, &mut labels, s);
    Clustering::new(labels, s)
}

/// Per-query model selection: an independent uniform draw of
/// `min(q, cluster size)` trees from each cluster, without replacement
/// within a cluster. Deterministic in `(seed, query_id)`.
pub fn select_model_indices(
    c: &Clustering,
    q: usize,
    seed: u64,
    query_id: u64,
) -> Result<Vec<usize>> {
    if q == 0 {
        return Err(Error::BadParam("q must be at least 1".into()));
    }
    let mut rng = rng_from(derive(derive2(seed, SELECT_STREAM, query_id), 0x5E1));
    let mut picked = Vec::new();
    for members in c.members() {
        if members.is_empty() {
            continue;
        }
        let take = q.min(members.len());
        let idx = sample(&mut rng, members.len(), take);
        picked.extend(idx.into_iter().map(|i| members[i]));
    }
    picked.sort_unstable();
    Ok(picked)
}

/// [`select_model_indices`] resolved against a pool.
pub fn select_models<'a>(
    pool: &'a ModelPool,
    c: &Clustering,
    q: usize,
    seed: u64,
    query_id: u64,
) -> Result<Vec<&'a DecisionTree>> {
    if c.assignment().len() != pool.len() {
        return Err(Error::BadParam(
            "clustering does not cover this pool".into(),
        ));
    }
    Ok(select_model_indices(c, q, seed, query_id)?
        .into_iter()
        .map(|i| &pool.trees()[i])
        .collect())
}

// --- Serialization ---------------------------------------------------------
//
// Line-oriented: `clusters <s>`, one `cluster <tree> <id>` per tree, then
// the edge list as `edge <i> <j> <weight>`.

pub fn clustering_to_text(c: &Clustering, g: &SimilarityGraph) -> String {
    let mut out = format!("clusters {}\n", c.cluster_count());
    for (tree, &cid) in c.assignment().iter().enumerate() {
        out.push_str(&format!("cluster {tree} {cid}\n"));
    }
    for &(i, j) in g.edges() {
        out.push_str(&format!("edge {i} {j} {}\n", g.weight(i, j)));
    }
    out
}

pub fn clustering_from_text(text: &str) -> Result<(Clustering, SimilarityGraph)> {
    let bad = |line: &str| Error::Serialization(format!("bad clustering line '{line}'"));
    let mut s: Option<usize> = None;
    let mut assignment: Vec<(usize, usize)> = Vec::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["clusters", v] => s = Some(v.parse().map_err(|_| bad(line))?),
            ["cluster", t, c] => assignment.push((
                t.parse().map_err(|_| bad(line))?,
                c.parse().map_err(|_| bad(line))?,
            )),
            ["edge", i, j, w] => edges.push((
                i.parse().map_err(|_| bad(line))?,
                j.parse().map_err(|_| bad(line))?,
                w.parse().map_err(|_| bad(line))?,
            )),
            _ => return Err(bad(line)),
        }
    }
    let s = s.ok_or_else(|| Error::Serialization("missing clusters header".into()))?;
    let n = assignment.len();
    let mut labels = vec![usize::MAX; n];
    for (t, c) in assignment {
        if t >= n {
            return Err(Error::Serialization(format!("tree index {t} out of range")));
        }
        labels[t] = c;
    }
    if labels.iter().any(|&c| c == usize::MAX) {
        return Err(Error::Serialization("clustering does not cover all trees".into()));
    }
    let mut weights = vec![0.0; n * n];
    let mut edge_list = Vec::with_capacity(edges.len());
    for (i, j, w) in edges {
        if i >= n || j >= n {
            return Err(Error::Serialization(format!("edge ({i},{j}) out of range")));
        }
        weights[i * n + j] = w;
        weights[j * n + i] = w;
        edge_list.push((i.min(j), i.max(j)));
    }
    Ok((
        Clustering::new(labels, s)?,
        SimilarityGraph {
            n,
            weights,
            edges: edge_list,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{ModelPool, Provenance};
    use crate::testutil::fig1_pool;
    use crate::tree::WeightVector;

    fn fig1_model_pool() -> ModelPool {
        ModelPool::from_trees(fig1_pool(), 5, WeightVector::uniform(5), Provenance::PlainRf)
            .unwrap()
    }

    #[test]
    fn fig1_graph_edges_and_weights() {
        let pool = fig1_model_pool();
        let g = build_similarity_graph(&pool);
        // f1 and f3 share {dollar}: positive weight, edge present.
        assert!(g.weight(0, 2) > 0.0);
        assert!(g.has_edge(0, 2));
        // f1 and f2 share nothing.
        assert_eq!(g.weight(0, 1), 0.0);
        assert!(!g.has_edge(0, 1));
        // Weight equals the pool ratio of the shared feature.
        let d_dollar = pool.per_feature_ratio()[crate::testutil::DOLLAR];
        assert_eq!(g.weight(0, 2), d_dollar);
        // Symmetry across all pairs.
        for i in 0..3 {
            assert_eq!(g.weight(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(g.weight(i, j), g.weight(j, i));
            }
        }
    }

    /// Block graph: `sizes[c]` nodes per component, intra-component edges
    /// only. Returns the graph and ground-truth component labels.
    fn block_graph(sizes: &[usize], seed: u64) -> (SimilarityGraph, Vec<usize>) {
        use rand::Rng;
        let n: usize = sizes.iter().sum();
        let mut truth = Vec::with_capacity(n);
        for (c, &k) in sizes.iter().enumerate() {
            truth.extend(std::iter::repeat(c).take(k));
        }
        let mut rng = rng_from(seed);
        let mut weights = vec![0.0; n * n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if truth[i] == truth[j] {
                    let w = rng.gen_range(0.2..1.0);
                    weights[i * n + j] = w;
                    weights[j * n + i] = w;
                    edges.push((i, j));
                }
            }
        }
        (SimilarityGraph { n, weights, edges }, truth)
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        let mut map = std::collections::HashMap::new();
        let mut seen = std::collections::HashSet::new();
        for (&x, &y) in a.iter().zip(b) {
            match map.entry(x) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    if *e.get() != y {
                        return false;
                    }
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    if !seen.insert(y) {
                        return false;
                    }
                    e.insert(y);
                }
            }
        }
        true
    }

    #[test]
    fn disconnected_components_are_recovered_exactly() {
        for (seed, sizes) in [(1u64, vec![4, 4, 4]), (2, vec![2, 5, 3]), (3, vec![6, 2])] {
            let (g, truth) = block_graph(&sizes, seed);
            let c = spectral_clustering(&g, sizes.len(), 100 + seed).unwrap();
            assert!(
                same_partition(c.assignment(), &truth),
                "seed {seed}: {:?} vs truth {:?}",
                c.assignment(),
                truth
            );
        }
    }

    #[test]
    fn s_equals_one_and_s_equals_m() {
        let (g, _) = block_graph(&[3, 3], 9);
        let c = spectral_clustering(&g, 1, 5).unwrap();
        assert!(c.assignment().iter().all(|&x| x == 0));

        let c = spectral_clustering(&g, 6, 5).unwrap();
        let mut sizes = vec![0usize; 6];
        for &x in c.assignment() {
            sizes[x] += 1;
        }
        assert!(sizes.iter().all(|&k| k == 1), "sizes {sizes:?}");
    }

    #[test]
    fn cluster_count_bounds_are_enforced() {
        let (g, _) = block_graph(&[2, 2], 1);
        assert!(spectral_clustering(&g, 0, 1).is_err());
        assert!(spectral_clustering(&g, 5, 1).is_err());
    }

    #[test]
    fn no_empty_clusters_even_with_duplicate_embeddings() {
        // Complete graph with equal weights: all rows of the embedding
        // coincide, so only the repair step can separate them.
        let n = 5;
        let mut weights = vec![1.0; n * n];
        let mut edges = Vec::new();
        for i in 0..n {
            weights[i * n + i] = 0.0;
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        let g = SimilarityGraph { n, weights, edges };
        for s in 2..=n {
            let c = spectral_clustering(&g, s, 77).unwrap();
            let mut sizes = vec![0usize; s];
            for &x in c.assignment() {
                sizes[x] += 1;
            }
            assert!(sizes.iter().all(|&k| k > 0), "s={s}: empty cluster");
        }
    }

    #[test]
    fn selection_is_deterministic_and_duplicate_free() {
        let c = Clustering::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let a = select_model_indices(&c, 2, 42, 7).unwrap();
        let b = select_model_indices(&c, 2, 42, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        let set: BTreeSet<usize> = a.iter().copied().collect();
        assert_eq!(set.len(), a.len(), "duplicates in selection");
        let other = select_model_indices(&c, 2, 42, 8).unwrap();
        assert!(!other.is_empty());
    }

    #[test]
    fn selection_saturates_to_full_pool() {
        let c = Clustering::new(vec![0, 1, 1, 0, 1], 2).unwrap();
        let all = select_model_indices(&c, 10, 3, 0).unwrap();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn selection_is_uniform_within_clusters() {
        let c = Clustering::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let mut counts = vec![0usize; 6];
        let queries = 1000;
        for query in 0..queries {
            for i in select_model_indices(&c, 1, 99, query).unwrap() {
                counts[i] += 1;
            }
        }
        for (i, &k) in counts.iter().enumerate() {
            let freq = k as f64 / queries as f64;
            assert!(
                (freq - 1.0 / 3.0).abs() < 0.05,
                "tree {i} picked with frequency {freq}"
            );
        }
    }

    #[test]
    fn selection_matches_expected_size() {
        let c = Clustering::new(vec![0, 0, 1, 1, 1, 2], 3).unwrap();
        assert_eq!(c.selection_size(2), 2 + 2 + 1);
        let picked = select_model_indices(&c, 2, 5, 123).unwrap();
        assert_eq!(picked.len(), c.selection_size(2));
    }

    #[test]
    fn graph_is_invariant_under_tree_relabeling() {
        let pool = fig1_model_pool();
        let g = build_similarity_graph(&pool);
        // Reverse the tree order and rebuild.
        let trees: Vec<_> = pool.trees().iter().rev().cloned().collect();
        let rev = ModelPool::from_trees(trees, 5, WeightVector::uniform(5), Provenance::PlainRf)
            .unwrap();
        let g2 = build_similarity_graph(&rev);
        let n = pool.len();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(g.weight(i, j), g2.weight(n - 1 - i, n - 1 - j));
            }
        }
    }

    #[test]
    fn clustering_text_round_trip() {
        let pool = fig1_model_pool();
        let g = build_similarity_graph(&pool);
        let c = spectral_clustering(&g, 2, 11).unwrap();
        let text = clustering_to_text(&c, &g);
        let (c2, g2) = clustering_from_text(&text).unwrap();
        assert_eq!(c, c2);
        assert_eq!(g, g2);
    }

    #[test]
    fn select_models_resolves_against_pool() {
        let pool = fig1_model_pool();
        let g = build_similarity_graph(&pool);
        let c = spectral_clustering(&g, 2, 1).unwrap();
        let trees = select_models(&pool, &c, 1, 4, 0).unwrap();
        assert_eq!(trees.len(), 2);
        assert!(select_models(&pool, &c, 0, 4, 0).is_err());
    }
}
