//! Multiset similarity of nonnegative vectors (Jaccard, interiority and
//! their product, the coincidence index) and the coincidence similarity
//! network over measurement change curves.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::MeasurementId;
use crate::signals::{ChangeCurve, GroupLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceParams {
    /// Regularization added to numerator and denominator.
    pub delta: f64,
    /// Jaccard strictness exponent.
    pub d: f64,
    /// Interiority strictness exponent.
    pub e_exp: f64,
}

impl Default for CoincidenceParams {
    fn default() -> Self {
        CoincidenceParams {
            delta: 0.0,
            d: 5.0,
            e_exp: 1.0,
        }
    }
}

impl CoincidenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.d >= 1.0) || !self.d.is_finite() {
            return Err(Error::invalid(format!("D must be >= 1, got {}", self.d)));
        }
        if !(self.e_exp >= 1.0) || !self.e_exp.is_finite() {
            return Err(Error::invalid(format!("E_exp must be >= 1, got {}", self.e_exp)));
        }
        Ok(())
    }
}

struct Sums {
    min: f64,
    max: f64,
    x: f64,
    y: f64,
}

fn sums(x: &[f64], y: &[f64]) -> Result<Sums> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("vectors must have at least one entry"));
    }
    let mut s = Sums {
        min: 0.0,
        max: 0.0,
        x: 0.0,
        y: 0.0,
    };
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!(
                "entries must be finite and nonnegative, got ({a}, {b}) at index {i}"
            )));
        }
        s.min += a.min(b);
        s.max += a.max(b);
        s.x += a;
        s.y += b;
    }
    Ok(s)
}

/// `ratio^exponent`, with `0/0` read as 1 (both vectors zero).
fn powered_ratio(num: f64, den: f64, exponent: f64) -> f64 {
    if den == 0.0 {
        1.0
    } else {
        (num / den).min(1.0).powf(exponent)
    }
}

pub fn multiset_jaccard(x: &[f64], y: &[f64], params: &CoincidenceParams) -> Result<f64> {
    let s = sums(x, y)?;
    Ok(powered_ratio(s.min + params.delta, s.max + params.delta, params.d))
}

pub fn interiority(x: &[f64], y: &[f64], params: &CoincidenceParams) -> Result<f64> {
    let s = sums(x, y)?;
    Ok(powered_ratio(
        s.min + params.delta,
        s.x.min(s.y) + params.delta,
        params.e_exp,
    ))
}

/// Jaccard index times interiority index.
pub fn coincidence(x: &[f64], y: &[f64], params: &CoincidenceParams) -> Result<f64> {
    let s = sums(x, y)?;
    let j = powered_ratio(s.min + params.delta, s.max + params.delta, params.d);
    let i = powered_ratio(s.min + params.delta, s.x.min(s.y) + params.delta, params.e_exp);
    Ok(j * i)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityComparison {
    pub alpha: f64,
    pub inner_product: f64,
    pub cosine: f64,
    pub coincidence: f64,
}

/// Compares `r = [sqrt(2)/2, sqrt(2)/2]` against `magnitude * [cos a, sin a]`
/// for each angle with inner product, cosine and coincidence.
pub fn fig2_demo(
    magnitude: f64,
    angles: &[f64],
    params: &CoincidenceParams,
) -> Result<Vec<SimilarityComparison>> {
    if !(magnitude > 0.0) {
        return Err(Error::invalid(format!("magnitude must be > 0, got {magnitude}")));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = [h, h];
    angles
        .iter()
        .map(|&alpha| {
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&alpha) {
                return Err(Error::invalid(format!(
                    "angle {alpha} is outside the first quadrant"
                )));
            }
            let v = [magnitude * alpha.cos(), magnitude * alpha.sin()];
            // cos(pi/2) is not exactly zero in floating point.
            let v = v.map(|c| c.max(0.0));
            let inner = r[0] * v[0] + r[1] * v[1];
            let cosine = inner / (magnitude * (r[0] * r[0] + r[1] * r[1]).sqrt());
            Ok(SimilarityComparison {
                alpha,
                inner_product: inner,
                cosine,
                coincidence: coincidence(&r, &v, params)?,
            })
        })
        .collect()
}

/// Whether the node weight sums normalized changes or raw changes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeWeight {
    #[default]
    Normalized,
    Raw,
}

impl std::str::FromStr for NodeWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(NodeWeight::Normalized),
            "raw" => Ok(NodeWeight::Raw),
            other => Err(Error::invalid(format!("unknown node weight `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityNode {
    pub measurement: MeasurementId,
    pub weight: f64,
    pub label: Option<GroupLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityEdge {
    pub a: MeasurementId,
    pub b: MeasurementId,
    pub weight: f64,
}

/// Complete weighted graph over the measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityNetwork {
    pub nodes: Vec<SimilarityNode>,
    pub edges: Vec<SimilarityEdge>,
}

impl SimilarityNetwork {
    /// Symmetric similarity matrix with unit diagonal, in node order.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.nodes.len();
        let mut m = vec![vec![0.0; n]; n];
        let pos = |id: MeasurementId| self.nodes.iter().position(|x| x.measurement == id).unwrap();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for e in &self.edges {
            let (i, j) = (pos(e.a), pos(e.b));
            m[i][j] = e.weight;
            m[j][i] = e.weight;
        }
        m
    }

    pub fn weight(&self, a: MeasurementId, b: MeasurementId) -> Option<f64> {
        if a == b {
            return Some(1.0);
        }
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map(|e| e.weight)
    }

    /// Graphviz rendering: edge `penwidth` and node `width` proportional to
    /// the weights. Edges below `threshold` are left out of the drawing.
    pub fn to_dot(&self, name: &str, threshold: f64) -> String {
        const MAX_PEN: f64 = 10.0;
        const MAX_WIDTH: f64 = 2.0;
        let max_node = self.nodes.iter().map(|n| n.weight).fold(0.0, f64::max);
        let mut out = String::new();
        let _ = writeln!(out, "graph \"{name}\" {{");
        let _ = writeln!(out, "  node [shape=circle, fixedsize=true];");
        for n in &self.nodes {
            let width = if max_node > 0.0 {
                MAX_WIDTH * n.weight / max_node
            } else {
                0.0
            };
            let label = n.label.map(|l| l.as_str()).unwrap_or("");
            let _ = writeln!(
                out,
                "  \"{}\" [width={}, group=\"{}\", weight={}];",
                n.measurement, width, label, n.weight
            );
        }
        for e in self.edges.iter().filter(|e| e.weight >= threshold) {
            let _ = writeln!(
                out,
                "  \"{}\" -- \"{}\" [penwidth={}, weight={}];",
                e.a,
                e.b,
                MAX_PEN * e.weight,
                e.weight
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Coincidence network over change curves that share one grid.
pub fn build_similarity_network(
    curves: &[ChangeCurve],
    labels: Option<&[GroupLabel]>,
    params: &CoincidenceParams,
    node_weight: NodeWeight,
) -> Result<SimilarityNetwork> {
    params.validate()?;
    if let Some(labels) = labels {
        if labels.len() != curves.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} curves",
                labels.len(),
                curves.len()
            )));
        }
    }
    if let Some(first) = curves.first() {
        for c in curves {
            if c.grid != first.grid {
                return Err(Error::invalid(format!(
                    "grid of {} differs from grid of {}",
                    c.measurement, first.measurement
                )));
            }
        }
    }
    let nodes = curves
        .iter()
        .enumerate()
        .map(|(i, c)| SimilarityNode {
            measurement: c.measurement,
            weight: match node_weight {
                NodeWeight::Normalized => c.values.iter().map(|x| x.abs()).sum(),
                NodeWeight::Raw => c.raw_changes().iter().map(|x| x.abs()).sum(),
            },
            label: labels.map(|l| l[i]),
        })
        .collect();
    let mut edges = Vec::with_capacity(curves.len() * curves.len().saturating_sub(1) / 2);
    for (i, x) in curves.iter().enumerate() {
        for y in &curves[i + 1..] {
            let weight = coincidence(&x.values, &y.values, params).map_err(|e| {
                Error::invalid(format!("{} vs {}: {e}", x.measurement, y.measurement))
            })?;
            edges.push(SimilarityEdge {
                a: x.measurement,
                b: y.measurement,
                weight,
            });
        }
    }
    Ok(SimilarityNetwork { nodes, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::normalize_curve;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn jaccard_examples() {
        let p = CoincidenceParams::default();
        assert_eq!(multiset_jaccard(&[1.0, 2.0], &[1.0, 2.0], &p).unwrap(), 1.0);
        // sum min = sqrt(2)/2, sum max = 0.95 + sqrt(2)/2.
        let expected = (H / (0.95 + H)).powi(5);
        let got = multiset_jaccard(&[H, H], &[0.95, 0.0], &p).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.01415).abs() < 1e-5);
        let got = multiset_jaccard(&[H, H], &[0.95 * H, 0.95 * H], &p).unwrap();
        assert!((got - 0.77378).abs() < 1e-5);
    }

    #[test]
    fn interiority_examples() {
        let p = CoincidenceParams::default();
        assert!((interiority(&[H, H], &[0.95 * H, 0.95 * H], &p).unwrap() - 1.0).abs() < 1e-15);
        let got = interiority(&[H, H], &[0.95, 0.0], &p).unwrap();
        assert!((got - H / 0.95).abs() < 1e-15);
        assert!((got - 0.7443).abs() < 1e-4);
        assert_eq!(interiority(&[3.0, 1.0], &[3.0, 1.0], &p).unwrap(), 1.0);
    }

    #[test]
    fn coincidence_examples() {
        let p = CoincidenceParams::default();
        let c = coincidence(&[H, H], &[0.95 * H, 0.95 * H], &p).unwrap();
        assert!((c - 0.95f64.powi(5)).abs() < 1e-12);
        let c = coincidence(&[H, H], &[0.95, 0.0], &p).unwrap();
        assert!((c - 0.01053).abs() < 1e-5);
        assert_eq!(coincidence(&[0.2, 0.0, 4.0], &[0.2, 0.0, 4.0], &p).unwrap(), 1.0);
    }

    #[test]
    fn argument_errors() {
        let p = CoincidenceParams::default();
        assert!(coincidence(&[1.0], &[1.0, 2.0], &p).is_err());
        assert!(coincidence(&[-1.0], &[1.0], &p).is_err());
        assert!(multiset_jaccard(&[], &[], &p).is_err());
        assert!(interiority(&[f64::NAN], &[1.0], &p).is_err());
    }

    #[test]
    fn zero_vectors_are_identical() {
        let p = CoincidenceParams::default();
        assert_eq!(coincidence(&[0.0, 0.0], &[0.0, 0.0], &p).unwrap(), 1.0);
        assert_eq!(coincidence(&[0.0, 0.0], &[0.0, 1.0], &p).unwrap(), 0.0);
        let p = CoincidenceParams { delta: 0.1, ..p };
        assert!((coincidence(&[0.0, 0.0], &[0.0, 1.0], &p).unwrap() - (0.1f64 / 1.1).powi(5)).abs() < 1e-15);
    }

    #[test]
    fn fig2_demo_shape() {
        let p = CoincidenceParams::default();
        let angles = [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2];
        let rows = fig2_demo(0.95, &angles, &p).unwrap();
        assert!((rows[0].inner_product - 0.95 * H).abs() < 1e-15);
        assert!((rows[1].cosine - 1.0).abs() < 1e-15);
        assert!((rows[1].coincidence - 0.95f64.powi(5)).abs() < 1e-12);
        assert!((rows[0].coincidence - rows[2].coincidence).abs() < 1e-12);
        assert!(fig2_demo(0.95, &[-0.1], &p).is_err());
        assert!(fig2_demo(0.95, &[2.0], &p).is_err());
        assert!(fig2_demo(0.0, &[0.1], &p).is_err());
    }

    fn curve(m: MeasurementId, raw: &[f64]) -> ChangeCurve {
        let grid: Vec<f64> = (0..raw.len()).map(|i| i as f64).collect();
        normalize_curve(m, &grid, raw)
    }

    #[test]
    fn network_over_fourteen_curves() {
        let curves: Vec<ChangeCurve> = MeasurementId::ALL
            .iter()
            .enumerate()
            .map(|(i, &m)| curve(m, &[1.0, 2.0 + i as f64, 3.0, (i % 3) as f64]))
            .collect();
        let net = build_similarity_network(&curves, None, &CoincidenceParams::default(), NodeWeight::Normalized)
            .unwrap();
        assert_eq!(net.nodes.len(), 14);
        assert_eq!(net.edges.len(), 91);
        for e in &net.edges {
            assert!((0.0..=1.0).contains(&e.weight));
        }
        let m = net.matrix();
        for i in 0..14 {
            assert_eq!(m[i][i], 1.0);
            for j in 0..14 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }

    #[test]
    fn network_edge_cases() {
        let p = CoincidenceParams::default();
        let a = curve(MeasurementId::Degree, &[1.0, 4.0, 2.0]);
        let b = curve(MeasurementId::ClustCoeff, &[10.0, 40.0, 20.0]);
        let flat = curve(MeasurementId::BetwCentr, &[5.0, 5.0, 5.0]);
        let net = build_similarity_network(&[a.clone(), b, flat], None, &p, NodeWeight::Normalized).unwrap();
        assert!((net.weight(MeasurementId::Degree, MeasurementId::ClustCoeff).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(net.weight(MeasurementId::Degree, MeasurementId::BetwCentr), Some(0.0));
        assert_eq!(net.nodes[2].weight, 0.0);

        let other = ChangeCurve {
            grid: vec![0.0, 1.0, 5.0],
            ..a.clone()
        };
        assert!(build_similarity_network(&[a, other], None, &p, NodeWeight::Normalized).is_err());
    }

    #[test]
    fn dot_export_scales_widths() {
        let p = CoincidenceParams::default();
        let a = curve(MeasurementId::Degree, &[1.0, 4.0, 2.0]);
        let b = curve(MeasurementId::ClustCoeff, &[3.0, 1.0, 2.0]);
        let net = build_similarity_network(&[a, b], Some(&[GroupLabel::C, GroupLabel::B]), &p, NodeWeight::Normalized)
            .unwrap();
        let dot = net.to_dot("er_size", 0.0);
        assert!(dot.starts_with("graph \"er_size\" {"));
        assert!(dot.contains("\"Degree\" -- \"Clust.Coeff.\" [penwidth="));
        assert!(dot.contains("group=\"B\""));
        assert!(!net.to_dot("x", 1.1).contains("--"));
    }
}
