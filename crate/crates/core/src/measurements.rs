//! The fourteen topological measurements, each reduced to a network-wide
//! value (the mean of the per-node values for local measurements).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Distances, Graph, UNREACHABLE};
use crate::matrix::{expm_sparse, DenseMatrix, SparseRows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasurementId {
    Degree,
    ClustCoeff,
    BetwCentr,
    Assortativity,
    AvgShortPaths,
    HierDegH2,
    HierDegH3,
    HierDegH4,
    HierDegH5,
    AccessH2,
    AccessH3,
    AccessH4,
    AccessH5,
    GenAccess,
}

impl MeasurementId {
    pub const ALL: [MeasurementId; 14] = [
        MeasurementId::Degree,
        MeasurementId::ClustCoeff,
        MeasurementId::BetwCentr,
        MeasurementId::Assortativity,
        MeasurementId::AvgShortPaths,
        MeasurementId::HierDegH2,
        MeasurementId::HierDegH3,
        MeasurementId::HierDegH4,
        MeasurementId::HierDegH5,
        MeasurementId::AccessH2,
        MeasurementId::AccessH3,
        MeasurementId::AccessH4,
        MeasurementId::AccessH5,
        MeasurementId::GenAccess,
    ];

    pub const COUNT: usize = 14;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            MeasurementId::Degree => "Degree",
            MeasurementId::ClustCoeff => "Clust.Coeff.",
            MeasurementId::BetwCentr => "Betw.Centr.",
            MeasurementId::Assortativity => "Assortativity",
            MeasurementId::AvgShortPaths => "Avg.Short.Paths",
            MeasurementId::HierDegH2 => "Hier.Deg_h2",
            MeasurementId::HierDegH3 => "Hier.Deg_h3",
            MeasurementId::HierDegH4 => "Hier.Deg_h4",
            MeasurementId::HierDegH5 => "Hier.Deg_h5",
            MeasurementId::AccessH2 => "Access_h2",
            MeasurementId::AccessH3 => "Access_h3",
            MeasurementId::AccessH4 => "Access_h4",
            MeasurementId::AccessH5 => "Access_h5",
            MeasurementId::GenAccess => "Gen.Access.",
        }
    }
}

impl fmt::Display for MeasurementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for MeasurementId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasurementId::ALL
            .into_iter()
            .find(|m| m.abbreviation() == s)
            .ok_or_else(|| Error::invalid(format!("unknown measurement `{s}`")))
    }
}

/// Conditions recorded while computing a measurement.
///
/// Degenerate flags mark placeholder values (the measurement is undefined);
/// the others are notes on a value that is still meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Some node pairs are unreachable; path statistics use reachable pairs.
    Disconnected,
    /// Isolated nodes got walk-based value 0.
    IsolatedNodes,
    /// Zero endpoint-degree variance, value reported as 0.
    ZeroVariance,
    /// No reachable pair at all, value reported as 0.
    NoConnectedPair,
}

impl Flag {
    pub fn is_degenerate(self) -> bool {
        matches!(self, Flag::ZeroVariance | Flag::NoConnectedPair)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Disconnected => "disconnected",
            Flag::IsolatedNodes => "isolated_nodes",
            Flag::ZeroVariance => "zero_variance",
            Flag::NoConnectedPair => "no_connected_pair",
        }
    }
}

impl FromStr for Flag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Flag::Disconnected,
            Flag::IsolatedNodes,
            Flag::ZeroVariance,
            Flag::NoConnectedPair,
        ]
        .into_iter()
        .find(|f| f.as_str() == s)
        .ok_or_else(|| Error::Parse(format!("unknown flag `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementReport {
    /// Per-node values; `None` for intrinsically global measurements.
    pub per_node: Option<Vec<f64>>,
    pub value: f64,
    pub flags: Vec<Flag>,
}

impl MeasurementReport {
    fn from_nodes(per_node: Vec<f64>, flags: Vec<Flag>) -> Self {
        let value = mean(&per_node);
        MeasurementReport {
            per_node: Some(per_node),
            value,
            flags,
        }
    }

    fn global(value: f64, flags: Vec<Flag>) -> Self {
        MeasurementReport {
            per_node: None,
            value,
            flags,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.flags.iter().any(|f| f.is_degenerate())
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// How the h-step walk distribution is turned into an accessibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessibilityMode {
    /// Entropy of the full row of `T^h`.
    #[default]
    Full,
    /// Entropy of `T^h` restricted to the distance-`h` ring and renormalized.
    Ring,
}

impl FromStr for AccessibilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(AccessibilityMode::Full),
            "ring" => Ok(AccessibilityMode::Ring),
            other => Err(Error::invalid(format!("unknown accessibility mode `{other}`"))),
        }
    }
}

pub fn avg_degree(g: &Graph) -> f64 {
    g.avg_degree()
}

pub fn degree(g: &Graph) -> MeasurementReport {
    let per_node = (0..g.node_count()).map(|v| g.degree(v) as f64).collect();
    MeasurementReport::from_nodes(per_node, Vec::new())
}

/// Local clustering; nodes with degree below two contribute 0 to the mean.
pub fn clustering_coefficient(g: &Graph) -> MeasurementReport {
    let n = g.node_count();
    let mut per_node = vec![0.0; n];
    for v in 0..n {
        let nb = g.neighbors(v);
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if g.has_edge(a, b) {
                    links += 1;
                }
            }
        }
        per_node[v] = 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    MeasurementReport::from_nodes(per_node, Vec::new())
}

/// Unnormalized shortest-path betweenness (Brandes), each unordered pair
/// counted once.
pub fn betweenness_centrality(g: &Graph) -> MeasurementReport {
    let n = g.node_count();
    let mut centrality = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![UNREACHABLE; n];
    let mut delta = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::with_capacity(n);
    for s in 0..n {
        sigma.iter_mut().for_each(|x| *x = 0.0);
        dist.iter_mut().for_each(|x| *x = UNREACHABLE);
        delta.iter_mut().for_each(|x| *x = 0.0);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == UNREACHABLE {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                }
            }
        }
        for &w in order.iter().rev() {
            for &v in g.neighbors(w) {
                if dist[v] != UNREACHABLE && dist[v] + 1 == dist[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    centrality.iter_mut().for_each(|c| *c /= 2.0);
    MeasurementReport::from_nodes(centrality, Vec::new())
}

/// Newman degree assortativity: Pearson correlation of the degrees at the
/// two ends of every edge, both orientations included. Computed in exact
/// integer arithmetic so that zero variance is detected exactly.
pub fn assortativity(g: &Graph) -> Result<MeasurementReport> {
    if g.edge_count() == 0 {
        return Err(Error::invalid("assortativity needs at least one edge"));
    }
    let (mut sx, mut sxx, mut sxy) = (0i128, 0i128, 0i128);
    for (u, v) in g.edges() {
        let (j, k) = (g.degree(u) as i128, g.degree(v) as i128);
        sx += j + k;
        sxx += j * j + k * k;
        sxy += 2 * j * k;
    }
    let m = 2 * g.edge_count() as i128;
    let num = m * sxy - sx * sx;
    let den = m * sxx - sx * sx;
    if den == 0 {
        return Ok(MeasurementReport::global(0.0, vec![Flag::ZeroVariance]));
    }
    Ok(MeasurementReport::global(num as f64 / den as f64, Vec::new()))
}

/// Mean hop distance over reachable unordered pairs.
pub fn avg_shortest_path(g: &Graph) -> Result<MeasurementReport> {
    avg_shortest_path_from(&g.all_pairs_distances())
}

fn avg_shortest_path_from(d: &Distances) -> Result<MeasurementReport> {
    let n = d.node_count();
    let (mut total, mut pairs, mut unreachable) = (0u64, 0u64, false);
    for u in 0..n {
        for &x in &d.row(u)[u + 1..] {
            if x == UNREACHABLE {
                unreachable = true;
            } else {
                total += u64::from(x);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Degenerate("no connected node pair".into()));
    }
    let flags = if unreachable {
        vec![Flag::Disconnected]
    } else {
        Vec::new()
    };
    Ok(MeasurementReport::global(total as f64 / pairs as f64, flags))
}

/// Edges joining ring `h-1` to ring `h`, per node.
pub fn hierarchical_degree(g: &Graph, h: usize) -> Result<MeasurementReport> {
    Ok(hierarchical_degrees(g, &g.all_pairs_distances(), &[h])?.remove(0))
}

fn hierarchical_degrees(g: &Graph, d: &Distances, levels: &[usize]) -> Result<Vec<MeasurementReport>> {
    if levels.contains(&0) {
        return Err(Error::invalid("hierarchical level must be >= 1"));
    }
    let n = g.node_count();
    let max_h = levels.iter().copied().max().unwrap_or(0);
    let mut per_level = vec![vec![0.0; n]; max_h + 1];
    for v in 0..n {
        let row = d.row(v);
        for (a, b) in g.edges() {
            let (da, db) = (row[a], row[b]);
            if da == UNREACHABLE || da == db {
                continue;
            }
            let outer = da.max(db) as usize;
            if outer <= max_h {
                per_level[outer][v] += 1.0;
            }
        }
    }
    Ok(levels
        .iter()
        .map(|&h| MeasurementReport::from_nodes(per_level[h].clone(), Vec::new()))
        .collect())
}

/// Uniform random-walk transition matrix, `T[u][v] = 1/deg(u)` on edges.
pub fn transition_matrix(g: &Graph) -> Result<DenseMatrix> {
    if let Some(v) = (0..g.node_count()).find(|&v| g.degree(v) == 0) {
        return Err(Error::invalid(format!(
            "node {v} is isolated; its transition row is undefined"
        )));
    }
    Ok(transition_matrix_lenient(g))
}

/// Transition matrix with all-zero rows for isolated nodes.
fn transition_matrix_lenient(g: &Graph) -> DenseMatrix {
    let mut t = DenseMatrix::zeros(g.node_count());
    for u in 0..g.node_count() {
        let k = g.degree(u);
        for &v in g.neighbors(u) {
            t[(u, v)] = 1.0 / k as f64;
        }
    }
    t
}

/// `exp(-sum p ln p)` over the positive entries.
pub fn exp_entropy(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    h.exp()
}

/// Walk distribution after `h` steps from `source`, by sparse propagation.
pub fn walk_distribution(g: &Graph, source: usize, h: usize) -> Vec<f64> {
    let n = g.node_count();
    let mut p = vec![0.0; n];
    let mut next = vec![0.0; n];
    p[source] = 1.0;
    for _ in 0..h {
        next.iter_mut().for_each(|x| *x = 0.0);
        for u in 0..n {
            if p[u] == 0.0 || g.degree(u) == 0 {
                continue;
            }
            let share = p[u] / g.degree(u) as f64;
            for &w in g.neighbors(u) {
                next[w] += share;
            }
        }
        std::mem::swap(&mut p, &mut next);
    }
    p
}

/// Accessibility at level `h`; fails on graphs with isolated nodes.
pub fn accessibility(g: &Graph, h: usize) -> Result<MeasurementReport> {
    transition_matrix(g)?;
    accessibility_with(g, h, AccessibilityMode::Full, None)
}

/// Accessibility with a selectable walk restriction. Isolated nodes get 0
/// and raise [`Flag::IsolatedNodes`].
pub fn accessibility_with(
    g: &Graph,
    h: usize,
    mode: AccessibilityMode,
    distances: Option<&Distances>,
) -> Result<MeasurementReport> {
    if h == 0 {
        return Err(Error::invalid("accessibility level must be >= 1"));
    }
    let n = g.node_count();
    let owned;
    let d = match (mode, distances) {
        (AccessibilityMode::Ring, None) => {
            owned = g.all_pairs_distances();
            Some(&owned)
        }
        (_, d) => d,
    };
    let mut flags = Vec::new();
    let mut per_node = vec![0.0; n];
    for v in 0..n {
        if g.degree(v) == 0 {
            if !flags.contains(&Flag::IsolatedNodes) {
                flags.push(Flag::IsolatedNodes);
            }
            continue;
        }
        let mut p = walk_distribution(g, v, h);
        if mode == AccessibilityMode::Ring {
            let row = d.expect("ring mode has distances").row(v);
            for (w, x) in p.iter_mut().enumerate() {
                if row[w] as usize != h {
                    *x = 0.0;
                }
            }
            let total: f64 = p.iter().sum();
            if total == 0.0 {
                continue;
            }
            p.iter_mut().for_each(|x| *x /= total);
        }
        per_node[v] = exp_entropy(&p);
    }
    Ok(MeasurementReport::from_nodes(per_node, flags))
}

/// Row-stochastic `exp(T) / e`.
pub fn generalized_transition(g: &Graph) -> Result<DenseMatrix> {
    let t = transition_matrix(g)?;
    let mut p = expm_sparse(&SparseRows::from_dense(&t))?;
    p.scale((-1f64).exp());
    Ok(p)
}

/// Accessibility over walks of every length, weighted as in `exp(T)/e`.
pub fn generalized_accessibility(g: &Graph) -> Result<MeasurementReport> {
    transition_matrix(g)?;
    generalized_accessibility_lenient(g)
}

fn generalized_accessibility_lenient(g: &Graph) -> Result<MeasurementReport> {
    let n = g.node_count();
    let t = transition_matrix_lenient(g);
    let mut p = expm_sparse(&SparseRows::from_dense(&t))?;
    p.scale((-1f64).exp());
    let mut flags = Vec::new();
    let per_node = (0..n)
        .map(|v| {
            if g.degree(v) == 0 {
                if flags.is_empty() {
                    flags.push(Flag::IsolatedNodes);
                }
                0.0
            } else {
                exp_entropy(p.row(v))
            }
        })
        .collect();
    Ok(MeasurementReport::from_nodes(per_node, flags))
}

/// Options that change how individual measurements are evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub accessibility: AccessibilityMode,
}

/// Network values of all fourteen measurements, in [`MeasurementId::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSet {
    pub values: [f64; MeasurementId::COUNT],
    pub flags: [Vec<Flag>; MeasurementId::COUNT],
}

impl MeasurementSet {
    pub fn get(&self, m: MeasurementId) -> f64 {
        self.values[m.index()]
    }

    pub fn flags(&self, m: MeasurementId) -> &[Flag] {
        &self.flags[m.index()]
    }

    pub fn is_degenerate(&self, m: MeasurementId) -> bool {
        self.flags(m).iter().any(|f| f.is_degenerate())
    }
}

/// Computes every measurement. Undefined cases are recorded as flags with a
/// placeholder value of 0; only a graph without nodes is an error.
pub fn measure_all(g: &Graph, opts: &MeasureOptions) -> Result<MeasurementSet> {
    if g.node_count() == 0 {
        return Err(Error::invalid("cannot measure an empty graph"));
    }
    let d = g.all_pairs_distances();
    let mut values = [0.0; MeasurementId::COUNT];
    let mut flags: [Vec<Flag>; MeasurementId::COUNT] = Default::default();
    let mut put = |m: MeasurementId, r: MeasurementReport| {
        values[m.index()] = r.value;
        flags[m.index()] = r.flags;
    };

    put(MeasurementId::Degree, degree(g));
    put(MeasurementId::ClustCoeff, clustering_coefficient(g));
    put(MeasurementId::BetwCentr, betweenness_centrality(g));
    put(
        MeasurementId::Assortativity,
        assortativity(g).unwrap_or_else(|_| MeasurementReport::global(0.0, vec![Flag::ZeroVariance])),
    );
    put(
        MeasurementId::AvgShortPaths,
        avg_shortest_path_from(&d)
            .unwrap_or_else(|_| MeasurementReport::global(0.0, vec![Flag::NoConnectedPair])),
    );
    let hier = hierarchical_degrees(g, &d, &[2, 3, 4, 5])?;
    let hier_ids = [
        MeasurementId::HierDegH2,
        MeasurementId::HierDegH3,
        MeasurementId::HierDegH4,
        MeasurementId::HierDegH5,
    ];
    for (m, r) in hier_ids.into_iter().zip(hier) {
        put(m, r);
    }
    let access_ids = [
        MeasurementId::AccessH2,
        MeasurementId::AccessH3,
        MeasurementId::AccessH4,
        MeasurementId::AccessH5,
    ];
    for (h, m) in (2..=5).zip(access_ids) {
        put(m, accessibility_with(g, h, opts.accessibility, Some(&d))?);
    }
    put(MeasurementId::GenAccess, generalized_accessibility_lenient(g)?);
    Ok(MeasurementSet { values, flags })
}
