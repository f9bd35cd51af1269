//! Similarity-based agglomerative clustering and dendrogram export.
//!
//! Heights are similarities: leaves sit at 1 and merges descend towards 0.
//! Conversion to branch lengths only happens when writing Newick.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Average, Linkage::Single, Linkage::Complete];

    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Average => "average",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            other => Err(Error::invalid(format!("unknown linkage `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller of the two merged cluster ids.
    pub a: usize,
    pub b: usize,
    /// Id of the new cluster; leaves are `0..n`, merges continue from `n`.
    pub id: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

const SYMMETRY_TOL: f64 = 1e-12;

fn validate(sim: &[Vec<f64>], labels: &[String]) -> Result<()> {
    let n = sim.len();
    if n == 0 {
        return Err(Error::invalid("similarity matrix is empty"));
    }
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} leaves", labels.len())));
    }
    for (i, row) in sim.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid("similarity matrix is not square"));
        }
        for (j, &s) in row.iter().enumerate() {
            if !(-SYMMETRY_TOL..=1.0 + SYMMETRY_TOL).contains(&s) {
                return Err(Error::invalid(format!("similarity ({i}, {j}) = {s} is outside [0, 1]")));
            }
            if (s - sim[j][i]).abs() > SYMMETRY_TOL {
                return Err(Error::invalid(format!("similarity matrix is not symmetric at ({i}, {j})")));
            }
        }
        if (row[i] - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("diagonal entry {i} is {} rather than 1", row[i])));
        }
    }
    Ok(())
}

fn linkage_similarity(sim: &[Vec<f64>], x: &[usize], y: &[usize], linkage: Linkage) -> f64 {
    let cross = x.iter().flat_map(|&i| y.iter().map(move |&j| sim[i][j]));
    match linkage {
        Linkage::Average => cross.sum::<f64>() / (x.len() * y.len()) as f64,
        Linkage::Single => cross.fold(f64::NEG_INFINITY, f64::max),
        Linkage::Complete => cross.fold(f64::INFINITY, f64::min),
    }
}

/// Repeatedly merges the two active clusters of highest similarity. Ties go
/// to the lexicographically smallest pair of cluster ids. Inter-cluster
/// similarity is aggregated from the pairwise leaf similarities.
pub fn agglomerate(sim: &[Vec<f64>], labels: &[String], linkage: Linkage) -> Result<Dendrogram> {
    validate(sim, labels)?;
    let n = sim.len();
    // (id, members) for every active cluster, kept sorted by id.
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut ceiling = f64::INFINITY;
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..active.len() {
            for j in i + 1..active.len() {
                let s = linkage_similarity(sim, &active[i].1, &active[j].1, linkage);
                if best.is_none_or(|(b, _, _)| s > b) {
                    best = Some((s, i, j));
                }
            }
        }
        let (s, i, j) = best.expect("at least two active clusters");
        let (b_id, b_members) = active.remove(j);
        let (a_id, mut members) = active.remove(i);
        members.extend(b_members);
        members.sort_unstable();
        // Exact arithmetic cannot raise the height for these linkages;
        // the clamp only absorbs rounding.
        let height = s.min(ceiling);
        ceiling = height;
        let id = n + merges.len();
        merges.push(Merge {
            a: a_id,
            b: b_id,
            id,
            height,
            size: members.len(),
        });
        active.push((id, members));
    }
    Ok(Dendrogram {
        leaves: labels.to_vec(),
        linkage,
        merges,
    })
}

impl Dendrogram {
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    fn children(&self, id: usize) -> Option<(usize, usize)> {
        let n = self.leaf_count();
        (id >= n).then(|| {
            let m = &self.merges[id - n];
            (m.a, m.b)
        })
    }

    pub fn height(&self, id: usize) -> f64 {
        let n = self.leaf_count();
        if id < n {
            1.0
        } else {
            self.merges[id - n].height
        }
    }

    /// Sorted leaf indices under cluster `id`.
    pub fn members(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(c) = stack.pop() {
            match self.children(c) {
                Some((a, b)) => stack.extend([a, b]),
                None => out.push(c),
            }
        }
        out.sort_unstable();
        out
    }

    /// Every internal cluster as (sorted leaf indices, height), sorted.
    pub fn clusters(&self) -> Vec<(Vec<usize>, f64)> {
        let n = self.leaf_count();
        let mut out: Vec<_> = (n..n + self.merges.len())
            .map(|id| (self.members(id), self.height(id)))
            .collect();
        out.sort_by(|x, y| x.0.cmp(&y.0));
        out
    }

    fn partition_from(&self, applied: usize) -> Vec<Vec<usize>> {
        let n = self.leaf_count();
        let mut parent: Vec<usize> = (0..n + applied).collect();
        for m in &self.merges[..applied] {
            parent[m.a] = m.id;
            parent[m.b] = m.id;
        }
        let root = |mut c: usize| {
            while parent[c] != c {
                c = parent[c];
            }
            c
        };
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for leaf in 0..n {
            groups.entry(root(leaf)).or_default().push(leaf);
        }
        let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
        parts.sort();
        parts
    }

    /// Partition after the first `k` merges.
    pub fn partition_after(&self, k: usize) -> Vec<Vec<usize>> {
        self.partition_from(k.min(self.merges.len()))
    }

    /// Partition formed by all merges at similarity `>= cut`.
    pub fn cut(&self, cut: f64) -> Vec<Vec<usize>> {
        let applied = self.merges.iter().take_while(|m| m.height >= cut).count();
        self.partition_from(applied)
    }

    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        match self.merges.last() {
            Some(root) => self.write_node(root.id, None, &mut out),
            None => out.push_str(&quote_label(&self.leaves[0])),
        }
        out.push(';');
        out
    }

    fn write_node(&self, id: usize, parent_height: Option<f64>, out: &mut String) {
        match self.children(id) {
            Some((a, b)) => {
                let (first, second) = if self.members(a)[0] <= self.members(b)[0] {
                    (a, b)
                } else {
                    (b, a)
                };
                out.push('(');
                self.write_node(first, Some(self.height(id)), out);
                out.push(',');
                self.write_node(second, Some(self.height(id)), out);
                out.push(')');
            }
            None => out.push_str(&quote_label(&self.leaves[id])),
        }
        if let Some(ph) = parent_height {
            out.push(':');
            out.push_str(&format_length((self.height(id) - ph).max(0.0)));
        }
    }
}

fn format_length(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}

const RESERVED: &[char] = &['(', ')', '[', ']', '\'', ':', ';', ',', '_', ' '];

fn quote_label(label: &str) -> String {
    if label.contains(RESERVED) || label.is_empty() {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

/// A parsed Newick tree, reduced to what a dendrogram records.
#[derive(Debug, Clone, PartialEq)]
pub struct NewickTree {
    pub leaves: Vec<String>,
    /// Internal clusters as (sorted leaf indices into `leaves`, height).
    pub clusters: Vec<(Vec<usize>, f64)>,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    leaves: Vec<String>,
    clusters: Vec<(Vec<usize>, f64)>,
}

/// Subtree summary: leaf indices and height relative to the root (root = 0).
struct Sub {
    leaves: Vec<usize>,
    depth_to_leaf: f64,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> Error {
        Error::Parse(format!("newick: {what} at byte {}", self.pos))
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn label(&mut self) -> Result<String> {
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return Err(self.err("unterminated quoted label")),
                    Some(b'\'') if self.s.get(self.pos + 1) == Some(&b'\'') => {
                        out.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            String::from_utf8(out).map_err(|_| self.err("label is not UTF-8"))
        } else {
            let start = self.pos;
            while self.peek().is_some_and(|c| !b"(),:;".contains(&c)) {
                self.pos += 1;
            }
            Ok(String::from_utf8_lossy(&self.s[start..self.pos]).replace('_', " "))
        }
    }

    fn length(&mut self) -> Result<f64> {
        if self.peek() != Some(b':') {
            return Ok(0.0);
        }
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|c| !b"(),:;".contains(&c)) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        text.trim().parse().map_err(|_| self.err("bad branch length"))
    }

    /// Parses a subtree; returns it with the distance from its root to a leaf.
    fn node(&mut self) -> Result<Sub> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut children = vec![self.child()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                children.push(self.child()?);
            }
            self.expect(b')')?;
            if self.peek().is_some_and(|c| !b",):;".contains(&c)) {
                self.label()?;
            }
            let depth = children[0].1 + children[0].0.depth_to_leaf;
            let mut leaves: Vec<usize> = children.into_iter().flat_map(|(c, _)| c.leaves).collect();
            leaves.sort_unstable();
            self.clusters.push((leaves.clone(), 1.0 - depth));
            Ok(Sub {
                leaves,
                depth_to_leaf: depth,
            })
        } else {
            let label = self.label()?;
            self.leaves.push(label);
            Ok(Sub {
                leaves: vec![self.leaves.len() - 1],
                depth_to_leaf: 0.0,
            })
        }
    }

    fn child(&mut self) -> Result<(Sub, f64)> {
        let sub = self.node()?;
        let len = self.length()?;
        Ok((sub, len))
    }
}

/// Drops `[...]` comments that sit outside quoted labels.
fn strip_comments(text: &str) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let (mut quoted, mut depth) = (false, 0usize);
    for c in text.chars() {
        match c {
            '\'' if depth == 0 => {
                quoted = !quoted;
                out.push(c);
            }
            '[' if !quoted => depth += 1,
            ']' if !quoted => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::Parse("newick: unbalanced `]`".into()))?;
            }
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::Parse("newick: unterminated comment".into()));
    }
    Ok(out)
}

/// Parses Newick text written by [`Dendrogram::to_newick`], taking leaf
/// heights as 1. Bracketed comments are ignored.
pub fn parse_newick(text: &str) -> Result<NewickTree> {
    let text = strip_comments(text)?;
    let mut p = Parser {
        s: text.trim().as_bytes(),
        pos: 0,
        leaves: Vec::new(),
        clusters: Vec::new(),
    };
    p.node()?;
    p.length()?;
    p.expect(b';')?;
    if p.pos != p.s.len() {
        return Err(p.err("trailing input"));
    }
    let unique: BTreeSet<&String> = p.leaves.iter().collect();
    if unique.len() != p.leaves.len() {
        return Err(Error::Parse("newick: duplicate leaf label".into()));
    }
    p.clusters.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(NewickTree {
        leaves: p.leaves,
        clusters: p.clusters,
    })
}

impl NewickTree {
    /// Internal clusters re-indexed by `labels` order, for comparison with
    /// [`Dendrogram::clusters`].
    pub fn clusters_for(&self, labels: &[String]) -> Result<Vec<(Vec<usize>, f64)>> {
        let index = |leaf: usize| {
            labels
                .iter()
                .position(|l| *l == self.leaves[leaf])
                .ok_or_else(|| Error::Parse(format!("newick: unknown leaf `{}`", self.leaves[leaf])))
        };
        let mut out = Vec::with_capacity(self.clusters.len());
        for (members, h) in &self.clusters {
            let mut m = members.iter().map(|&l| index(l)).collect::<Result<Vec<_>>>()?;
            m.sort_unstable();
            out.push((m, *h));
        }
        out.sort_by(|x, y| x.0.cmp(&y.0));
        Ok(out)
    }
}
