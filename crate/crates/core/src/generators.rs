//! Seeded network models: uniformly random (ER), preferential attachment
//! (BA) and Delaunay triangulations of a jittered square lattice (GEO).

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Default lattice jitter for GEO networks.
pub const DEFAULT_EPSILON: f64 = 0.001;

/// Deterministic random stream for a generator or perturbation seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Er,
    Ba,
    Geo,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Er, Model::Ba, Model::Geo];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Er => "er",
            Model::Ba => "ba",
            Model::Geo => "geo",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "er" => Ok(Model::Er),
            "ba" => Ok(Model::Ba),
            "geo" => Ok(Model::Geo),
            other => Err(Error::invalid(format!("unknown model `{other}`"))),
        }
    }
}

/// Parameters for one draw from a network model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub model: Model,
    /// Node count `N` for ER/BA; lattice side `n` for GEO.
    pub target_size: usize,
    /// Requested average degree (ER, and BA through `m = round(a_k / 2)`).
    pub target_avg_degree: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Spec for a network with `nodes` nodes. For GEO, `nodes` must be a
    /// perfect square.
    pub fn for_nodes(model: Model, nodes: usize, avg_degree: f64, seed: u64) -> Result<Self> {
        let target_size = match model {
            Model::Geo => lattice_side(nodes)?,
            _ => nodes,
        };
        Ok(GeneratorSpec {
            model,
            target_size,
            target_avg_degree: avg_degree,
            epsilon: DEFAULT_EPSILON,
            seed,
        })
    }

    pub fn generate(&self) -> Result<Graph> {
        match self.model {
            Model::Er => gen_er(self.target_size, self.target_avg_degree, self.seed),
            Model::Ba => gen_ba(
                self.target_size,
                ba_edges_per_node(self.target_avg_degree)?,
                self.seed,
            ),
            Model::Geo => gen_geo(self.target_size, self.epsilon, self.seed),
        }
    }
}

/// `n` such that `n * n == nodes`.
pub fn lattice_side(nodes: usize) -> Result<usize> {
    let n = (nodes as f64).sqrt().round() as usize;
    if n * n != nodes {
        return Err(Error::invalid(format!("size {nodes} is not a perfect square")));
    }
    if n < 2 {
        return Err(Error::invalid(format!("GEO lattice side must be >= 2, got {n}")));
    }
    Ok(n)
}

/// Attachment count used for a requested BA average degree (`<k> ~ 2m`).
pub fn ba_edges_per_node(avg_degree: f64) -> Result<usize> {
    let m = (avg_degree / 2.0).round();
    if !(m >= 1.0) {
        return Err(Error::invalid(format!(
            "average degree {avg_degree} gives fewer than one BA edge per node"
        )));
    }
    Ok(m as usize)
}

/// Edge count an ER network of `n` nodes gets for average degree `avg_degree`.
pub fn er_edge_count(n: usize, avg_degree: f64) -> usize {
    (n as f64 * avg_degree / 2.0).round() as usize
}

/// Exactly `round(n * avg_degree / 2)` edges drawn uniformly without
/// replacement from all node pairs.
pub fn gen_er(n: usize, avg_degree: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("ER network needs at least one node"));
    }
    if !(avg_degree >= 0.0) || !avg_degree.is_finite() {
        return Err(Error::invalid(format!("bad average degree {avg_degree}")));
    }
    let pairs = n * (n - 1) / 2;
    let m = er_edge_count(n, avg_degree);
    if m > pairs {
        return Err(Error::invalid(format!(
            "{m} edges requested but only {pairs} node pairs exist for N={n}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut g = Graph::new(n);
    for k in index::sample(&mut rng, pairs, m) {
        let (u, v) = pair_from_index(n, k);
        g.add_edge(u, v)?;
    }
    Ok(g)
}

/// Maps `k` in `0..n(n-1)/2` to the `k`-th pair `(u, v)`, `u < v`, in row-major order.
fn pair_from_index(n: usize, mut k: usize) -> (usize, usize) {
    let mut u = 0;
    loop {
        let row = n - 1 - u;
        if k < row {
            return (u, u + 1 + k);
        }
        k -= row;
        u += 1;
    }
}

/// Fenwick tree over integer node weights, used to draw nodes with
/// probability proportional to degree.
#[derive(Debug, Clone)]
pub struct PrefixSumTree {
    tree: Vec<u64>,
    weights: Vec<u64>,
    total: u64,
}

impl PrefixSumTree {
    pub fn with_len(len: usize) -> Self {
        PrefixSumTree {
            tree: vec![0; len + 1],
            weights: vec![0; len],
            total: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn weight(&self, i: usize) -> u64 {
        self.weights[i]
    }

    pub fn set(&mut self, i: usize, w: u64) {
        let old = self.weights[i];
        if w >= old {
            self.add(i, w - old);
        } else {
            self.sub(i, old - w);
        }
    }

    pub fn add(&mut self, i: usize, delta: u64) {
        self.weights[i] += delta;
        self.total += delta;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn sub(&mut self, i: usize, delta: u64) {
        self.weights[i] -= delta;
        self.total -= delta;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] -= delta;
            j += j & j.wrapping_neg();
        }
    }

    /// Sum of weights `0..i`.
    pub fn prefix_sum(&self, i: usize) -> u64 {
        let mut s = 0;
        let mut j = i;
        while j > 0 {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        s
    }

    /// Smallest index `i` with `prefix_sum(i + 1) > target`; requires `target < total`.
    pub fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.total == 0 {
            return None;
        }
        Some(self.find(rng.gen_range(0..self.total)))
    }
}

/// Preferential-attachment growth from an `m`-clique core. Each new node
/// links to `m` distinct existing nodes drawn proportionally to degree.
pub fn gen_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || m >= n {
        return Err(Error::invalid(format!("BA needs 1 <= m < N, got m={m}, N={n}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut g = Graph::new(n);
    let mut weights = PrefixSumTree::with_len(n);
    for u in 0..m {
        for v in u + 1..m {
            g.add_edge(u, v)?;
        }
    }
    for u in 0..m {
        weights.set(u, g.degree(u) as u64);
    }
    let mut targets = Vec::with_capacity(m);
    for new in m..n {
        targets.clear();
        for _ in 0..m {
            let pick = match weights.sample(&mut rng) {
                Some(t) => t,
                None => {
                    // No weight left among existing nodes: fall back to a uniform pick.
                    let free: Vec<usize> = (0..new).filter(|v| !targets.contains(v)).collect();
                    free[rng.gen_range(0..free.len())]
                }
            };
            weights.set(pick, 0);
            targets.push(pick);
        }
        for &t in &targets {
            g.add_edge(new, t)?;
        }
        for &t in &targets {
            weights.set(t, g.degree(t) as u64);
        }
        weights.set(new, g.degree(new) as u64);
    }
    Ok(g)
}

/// Delaunay triangulation of an `n x n` unit lattice whose coordinates are
/// jittered independently and uniformly in `[-epsilon, epsilon]`.
///
/// Node `j * n + i` sits near `(i, j)`. With `epsilon == 0` the lattice is
/// cocircular everywhere and the triangulation's own tie-breaking decides
/// the diagonals.
pub fn gen_geo(n: usize, epsilon: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid(format!("GEO lattice side must be >= 2, got {n}")));
    }
    if !(epsilon >= 0.0) || epsilon >= 0.5 {
        return Err(Error::invalid(format!("GEO epsilon must lie in [0, 0.5), got {epsilon}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (du, dv) = if epsilon > 0.0 {
                (
                    rng.gen_range(-epsilon..=epsilon),
                    rng.gen_range(-epsilon..=epsilon),
                )
            } else {
                (0.0, 0.0)
            };
            coords.push((i as f64 + du, j as f64 + dv));
        }
    }
    let edges = delaunay_edges(&coords)?;
    let mut g = Graph::from_edges(coords.len(), edges)?;
    g.set_coords(coords)?;
    Ok(g)
}

/// Undirected Delaunay edges of a point set, as node-index pairs `u < v`.
pub fn delaunay_edges(points: &[(f64, f64)]) -> Result<Vec<(usize, usize)>> {
    let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut node_of = vec![usize::MAX; points.len()];
    for (id, &(x, y)) in points.iter().enumerate() {
        let handle = tri
            .insert(Point2::new(x, y))
            .map_err(|e| Error::Numeric(format!("delaunay insertion failed: {e:?}")))?;
        if handle.index() >= node_of.len() || node_of[handle.index()] != usize::MAX {
            return Err(Error::invalid(format!("duplicate point at node {id}")));
        }
        node_of[handle.index()] = id;
    }
    let mut edges: Vec<(usize, usize)> = tri
        .undirected_edges()
        .map(|e| {
            let [a, b] = e.vertices();
            let (u, v) = (node_of[a.fix().index()], node_of[b.fix().index()]);
            (u.min(v), u.max(v))
        })
        .collect();
    edges.sort_unstable();
    Ok(edges)
}
