//! Undirected simple graphs and the traversal primitives used by the
//! generators, perturbations and measurements.
//!
//! Adjacency lists are kept sorted by node id, so every iteration order in
//! the crate is deterministic. Randomness only enters through the explicitly
//! seeded generators and perturbation routines.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Sentinel for "unreachable" in [`Distances`].
pub const UNREACHABLE: u32 = u32::MAX;

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
    coords: Option<Vec<(f64, f64)>>,
}

impl Graph {
    /// Edgeless graph with `n` nodes.
    pub fn new(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
            edge_count: 0,
            coords: None,
        }
    }

    /// Builds a graph from an edge list, rejecting self-loops, duplicate
    /// edges and out-of-range endpoints.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::new(n);
        for (u, v) in edges {
            if !g.add_edge(u, v)? {
                return Err(Error::invalid(format!("duplicate edge {{{u}, {v}}}")));
            }
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Neighbors of `v` in increasing id order.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.adj.len() && self.adj[u].binary_search(&v).is_ok()
    }

    /// `2E / N`.
    pub fn avg_degree(&self) -> f64 {
        2.0 * self.edge_count as f64 / self.node_count() as f64
    }

    pub fn coords(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    pub fn set_coords(&mut self, coords: Vec<(f64, f64)>) -> Result<()> {
        if coords.len() != self.node_count() {
            return Err(Error::invalid(format!(
                "{} coordinates for {} nodes",
                coords.len(),
                self.node_count()
            )));
        }
        self.coords = Some(coords);
        Ok(())
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.node_count() {
            Err(Error::invalid(format!(
                "node id {v} out of range for graph with {} nodes",
                self.node_count()
            )))
        } else {
            Ok(())
        }
    }

    /// Inserts `{u, v}`. Returns `Ok(false)` if the edge was already present.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(Error::invalid(format!("self-loop at node {u}")));
        }
        match self.adj[u].binary_search(&v) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.adj[u].insert(pos, v);
                let pos = self.adj[v].binary_search(&u).unwrap_err();
                self.adj[v].insert(pos, u);
                self.edge_count += 1;
                Ok(true)
            }
        }
    }

    /// Removes `{u, v}`. Returns `false` if the edge was absent.
    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        if u >= self.node_count() || v >= self.node_count() {
            return false;
        }
        match self.adj[u].binary_search(&v) {
            Ok(pos) => {
                self.adj[u].remove(pos);
                let pos = self.adj[v].binary_search(&u).expect("adjacency is symmetric");
                self.adj[v].remove(pos);
                self.edge_count -= 1;
                true
            }
            Err(_) => false,
        }
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// The `k`-th edge in [`Graph::edges`] order.
    pub fn nth_edge(&self, k: usize) -> Option<(usize, usize)> {
        let mut remaining = k;
        for (u, nb) in self.adj.iter().enumerate() {
            let start = nb.partition_point(|&v| v <= u);
            let upper = nb.len() - start;
            if remaining < upper {
                return Some((u, nb[start + remaining]));
            }
            remaining -= upper;
        }
        None
    }

    /// Number of unordered node pairs that are not joined by an edge.
    pub fn non_edge_count(&self) -> usize {
        let n = self.node_count();
        n * n.saturating_sub(1) / 2 - self.edge_count
    }

    /// BFS distances from `source`, [`UNREACHABLE`] for other components.
    pub fn bfs_distances(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let next = dist[u] + 1;
            for &w in &self.adj[u] {
                if dist[w] == UNREACHABLE {
                    dist[w] = next;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Nodes at exact shortest-path distance `0..=h_max` from `origin`.
    pub fn ring_decomposition(&self, origin: usize, h_max: usize) -> Result<RingDecomposition> {
        self.check_node(origin)?;
        let mut rings: Vec<Vec<usize>> = vec![Vec::new(); h_max + 1];
        rings[0].push(origin);
        let mut seen = vec![false; self.node_count()];
        seen[origin] = true;
        for h in 1..=h_max {
            let (done, rest) = rings.split_at_mut(h);
            let frontier = &done[h - 1];
            let ring = &mut rest[0];
            for &u in frontier {
                for &w in &self.adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        ring.push(w);
                    }
                }
            }
            ring.sort_unstable();
            if ring.is_empty() {
                break;
            }
        }
        Ok(RingDecomposition { origin, rings })
    }

    /// Maximal connected node sets, each sorted, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut components = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = vec![start];
            label[start] = id;
            let mut i = 0;
            while i < members.len() {
                let u = members[i];
                i += 1;
                for &w in &self.adj[u] {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() <= 1 || self.connected_components().len() == 1
    }

    pub fn all_pairs_distances(&self) -> Distances {
        let n = self.node_count();
        let mut data = Vec::with_capacity(n * n);
        for s in 0..n {
            data.extend(self.bfs_distances(s));
        }
        Distances { n, data }
    }

    /// Edge-list text: `N E` header, one `u v` line per edge (`u < v`), then
    /// one `v x y` line per node when coordinates are attached.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.node_count(), self.edge_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        if let Some(coords) = &self.coords {
            for (v, (x, y)) in coords.iter().enumerate() {
                let _ = writeln!(out, "{v} {x} {y}");
            }
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (lineno, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse(format!("line {lineno}: expected `N E` header")));
        }
        let n: usize = parse_field(head[0], lineno)?;
        let e: usize = parse_field(head[1], lineno)?;
        let mut g = Graph::new(n);
        for _ in 0..e {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {e} edge lines")))?;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!("line {lineno}: expected `u v`")));
            }
            let u: usize = parse_field(cols[0], lineno)?;
            let v: usize = parse_field(cols[1], lineno)?;
            if !g
                .add_edge(u, v)
                .map_err(|err| Error::Parse(format!("line {lineno}: {err}")))?
            {
                return Err(Error::Parse(format!("line {lineno}: duplicate edge {u} {v}")));
            }
        }
        let rest: Vec<(usize, &str)> = lines.collect();
        if !rest.is_empty() {
            if rest.len() != n {
                return Err(Error::Parse(format!(
                    "expected {n} coordinate lines, found {}",
                    rest.len()
                )));
            }
            let mut coords = vec![(0.0, 0.0); n];
            let mut filled = vec![false; n];
            for (lineno, line) in rest {
                let cols: Vec<&str> = line.split_whitespace().collect();
                if cols.len() != 3 {
                    return Err(Error::Parse(format!("line {lineno}: expected `v x y`")));
                }
                let v: usize = parse_field(cols[0], lineno)?;
                if v >= n || filled[v] {
                    return Err(Error::Parse(format!("line {lineno}: bad node id {v}")));
                }
                coords[v] = (parse_field(cols[1], lineno)?, parse_field(cols[2], lineno)?);
                filled[v] = true;
            }
            g.coords = Some(coords);
        }
        Ok(g)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {lineno}: cannot parse `{s}`")))
}

/// Rings around a node: `rings[d]` holds the nodes at distance exactly `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingDecomposition {
    pub origin: usize,
    pub rings: Vec<Vec<usize>>,
}

impl RingDecomposition {
    /// Nodes within distance `h` (the h-ball).
    pub fn ball(&self, h: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.rings.iter().take(h + 1).flatten().copied().collect();
        out.sort_unstable();
        out
    }
}

/// Dense all-pairs hop distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distances {
    n: usize,
    data: Vec<u32>,
}

impl Distances {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Raw entry, [`UNREACHABLE`] when no path exists.
    pub fn raw(&self, u: usize, v: usize) -> u32 {
        self.data[u * self.n + v]
    }

    pub fn get(&self, u: usize, v: usize) -> Option<u32> {
        match self.raw(u, v) {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    pub fn row(&self, u: usize) -> &[u32] {
        &self.data[u * self.n..(u + 1) * self.n]
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn rejects_loops_duplicates_and_bad_ids() {
        assert!(Graph::from_edges(3, [(1, 1)]).is_err());
        assert!(Graph::from_edges(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn rings_on_small_graphs() {
        let r = path(3).ring_decomposition(0, 2).unwrap();
        assert_eq!(r.rings, vec![vec![0], vec![1], vec![2]]);

        let r = complete(3).ring_decomposition(0, 2).unwrap();
        assert_eq!(r.rings, vec![vec![0], vec![1, 2], vec![]]);

        let r = Graph::new(1).ring_decomposition(0, 3).unwrap();
        assert_eq!(r.rings, vec![vec![0], vec![], vec![], vec![]]);

        assert!(path(3).ring_decomposition(5, 1).is_err());
        assert_eq!(cycle(4).ring_decomposition(0, 2).unwrap().ball(1), vec![0, 1, 3]);
    }

    #[test]
    fn components() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.connected_components(), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(complete(3).connected_components(), vec![vec![0, 1, 2]]);
        assert_eq!(
            Graph::new(3).connected_components(),
            vec![vec![0], vec![1], vec![2]]
        );
    }

    #[test]
    fn distances() {
        assert_eq!(path(3).all_pairs_distances().get(0, 2), Some(2));
        let k4 = complete(4).all_pairs_distances();
        for u in 0..4 {
            for v in 0..4 {
                assert_eq!(k4.get(u, v), Some(u32::from(u != v)));
            }
        }
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let d = g.all_pairs_distances();
        assert_eq!(d.get(0, 2), None);
        assert_eq!(d.raw(1, 3), UNREACHABLE);
    }

    #[test]
    fn nth_edge_matches_edge_order() {
        let g = Graph::from_edges(5, [(3, 4), (0, 2), (1, 4), (0, 1), (2, 3)]).unwrap();
        let all: Vec<_> = g.edges().collect();
        assert_eq!(all, vec![(0, 1), (0, 2), (1, 4), (2, 3), (3, 4)]);
        for (k, e) in all.iter().enumerate() {
            assert_eq!(g.nth_edge(k), Some(*e));
        }
        assert_eq!(g.nth_edge(5), None);
        assert_eq!(g.non_edge_count(), 5);
    }

    #[test]
    fn edge_list_round_trip_with_coords() {
        let mut g = star(3);
        g.set_coords(vec![(0.0, 0.0), (1.0, 0.5), (-1.0, 0.25), (0.125, 2.0)])
            .unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("4 3\n0 1\n0 2\n0 3\n"));
        assert_eq!(Graph::from_edge_list(&text).unwrap(), g);
        assert!(Graph::from_edge_list("3 1\n0 0\n").is_err());
        assert!(Graph::from_edge_list("3 2\n0 1\n").is_err());
    }
}
