//! From raw trajectories to normalized change curves, their summary
//! statistics (dispersion index, Pearson correlation, magnitude) and the
//! A/B/C response classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::SignatureMatrix;
use crate::measurements::MeasurementId;

/// Relative spread below which a raw curve counts as constant.
pub const CONSTANT_TOL: f64 = 1e-12;

/// Value subtracted from a raw curve before dividing by its standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Curve minimum; the result is nonnegative with minimum 0.
    #[default]
    Min,
    /// Value at the first grid point; the result may be negative.
    Initial,
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Baseline::Min),
            "initial" => Ok(Baseline::Initial),
            other => Err(Error::invalid(format!("unknown baseline `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeCurve {
    pub measurement: MeasurementId,
    pub grid: Vec<f64>,
    /// Normalized changes `c`.
    pub values: Vec<f64>,
    /// Raw curve the changes were derived from.
    pub raw: Vec<f64>,
    /// Population standard deviation of `raw`.
    pub sigma: f64,
    /// Mean of `raw`; exported, not used by the transform.
    pub mean_level: f64,
    pub baseline: Baseline,
    pub degenerate: bool,
}

impl ChangeCurve {
    /// Non-standardized changes relative to the first grid point.
    pub fn raw_changes(&self) -> Vec<f64> {
        let start = self.raw.first().copied().unwrap_or(0.0);
        self.raw.iter().map(|x| x - start).collect()
    }

    /// Spread of the raw curve, `max - min`.
    pub fn raw_range(&self) -> f64 {
        let (lo, hi) = min_max(&self.raw);
        hi - lo
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn pop_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// True when the spread of `xs` is negligible relative to its magnitude.
pub fn is_constant(xs: &[f64]) -> bool {
    let (lo, hi) = min_max(xs);
    let scale = lo.abs().max(hi.abs());
    hi - lo <= CONSTANT_TOL * scale
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanTrajectory {
    pub values: Vec<f64>,
    /// Degenerate cells left out of the averages.
    pub skipped: usize,
}

/// Pointwise mean over realizations, leaving out degenerate cells.
pub fn mean_trajectory(sig: &SignatureMatrix, m: MeasurementId) -> Result<MeanTrajectory> {
    if sig.realizations() == 0 {
        return Err(Error::invalid("signature matrix has no realizations"));
    }
    let mut skipped = 0;
    let mut values = Vec::with_capacity(sig.grid().len());
    for t in 0..sig.grid().len() {
        let (mut sum, mut count) = (0.0, 0usize);
        for q in 0..sig.realizations() {
            if sig.is_degenerate(m, t, q) {
                skipped += 1;
            } else {
                sum += sig.value(m, t, q);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Degenerate(format!(
                "{m}: every realization is degenerate at grid point {t} (free variable {})",
                sig.grid()[t]
            )));
        }
        values.push(sum / count as f64);
    }
    Ok(MeanTrajectory { values, skipped })
}

pub fn normalize_curve(m: MeasurementId, grid: &[f64], raw: &[f64]) -> ChangeCurve {
    normalize_curve_with(m, grid, raw, Baseline::Min)
}

/// `c = (x - baseline) / sigma` with the population standard deviation of
/// the raw curve. A constant curve maps to all zeros and is marked degenerate.
pub fn normalize_curve_with(
    m: MeasurementId,
    grid: &[f64],
    raw: &[f64],
    baseline: Baseline,
) -> ChangeCurve {
    let sigma = pop_std(raw);
    let degenerate = raw.is_empty() || is_constant(raw) || sigma == 0.0;
    let base = match baseline {
        Baseline::Min => min_max(raw).0,
        Baseline::Initial => raw.first().copied().unwrap_or(0.0),
    };
    let values = if degenerate {
        vec![0.0; raw.len()]
    } else {
        raw.iter().map(|x| (x - base) / sigma).collect()
    };
    ChangeCurve {
        measurement: m,
        grid: grid.to_vec(),
        values,
        raw: raw.to_vec(),
        sigma,
        mean_level: if raw.is_empty() { 0.0 } else { mean(raw) },
        baseline,
        degenerate,
    }
}

/// A statistic together with whether its input was degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flagged {
    pub value: f64,
    pub degenerate: bool,
}

/// Mean over grid points of the across-realization standard deviation of
/// the standardized trajectories. Every realization is standardized with the
/// mean curve's own transform, so a constant offset between realizations
/// survives into the index.
pub fn psi_index(sig: &SignatureMatrix, m: MeasurementId, curve: &ChangeCurve) -> Flagged {
    if curve.degenerate {
        return Flagged {
            value: 0.0,
            degenerate: true,
        };
    }
    let base = match curve.baseline {
        Baseline::Min => min_max(&curve.raw).0,
        Baseline::Initial => curve.raw[0],
    };
    let r = sig.grid().len();
    let mut total = 0.0;
    let mut column = Vec::with_capacity(sig.realizations());
    for t in 0..r {
        column.clear();
        column.extend(
            (0..sig.realizations())
                .filter(|&q| !sig.is_degenerate(m, t, q))
                .map(|q| (sig.value(m, t, q) - base) / curve.sigma),
        );
        total += pop_std(&column);
    }
    Flagged {
        value: total / r as f64,
        degenerate: false,
    }
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 || is_constant(x) || is_constant(y) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks (ties share the mean of their positions), starting at 1.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` for constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Pearson correlation of the change curve against its free variable.
/// Degenerate curves give 0 with the flag set.
pub fn pearson_vs_freevar(curve: &ChangeCurve) -> Flagged {
    match (curve.degenerate, pearson(&curve.values, &curve.grid)) {
        (false, Some(r)) => Flagged {
            value: r,
            degenerate: false,
        },
        _ => Flagged {
            value: 0.0,
            degenerate: true,
        },
    }
}

/// Mean absolute change of the raw mean trajectory from its first point.
pub fn magnitude_index(raw_mean: &[f64]) -> f64 {
    match raw_mean.first() {
        None => 0.0,
        Some(&start) => raw_mean.iter().map(|x| (x - start).abs()).sum::<f64>() / raw_mean.len() as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupLabel {
    /// Mostly monotone increase along the perturbation.
    A,
    /// Mostly monotone decrease.
    B,
    /// Anything else: constant or fluctuating.
    C,
}

impl GroupLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupLabel::A => "A",
            GroupLabel::B => "B",
            GroupLabel::C => "C",
        }
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(GroupLabel::A),
            "B" => Ok(GroupLabel::B),
            "C" => Ok(GroupLabel::C),
            other => Err(Error::Parse(format!("unknown group label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Minimum |Spearman| against the perturbation order for A or B.
    pub tau_mono: f64,
    /// Minimum magnitude as a fraction of the raw curve's range.
    pub mag_rel: f64,
    /// Absolute floor for the magnitude threshold.
    pub mag_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            tau_mono: 0.8,
            mag_rel: 1e-3,
            mag_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveStats {
    pub psi: Flagged,
    pub pearson: Flagged,
    pub magnitude: f64,
    /// Spearman correlation against the perturbation order (0 if degenerate).
    pub spearman: f64,
}

impl CurveStats {
    pub fn compute(sig: &SignatureMatrix, curve: &ChangeCurve) -> Self {
        CurveStats {
            psi: psi_index(sig, curve.measurement, curve),
            pearson: pearson_vs_freevar(curve),
            magnitude: magnitude_index(&curve.raw),
            spearman: progression_spearman(curve),
        }
    }
}

/// Spearman correlation of the curve against the order in which the grid
/// was visited (size growth, removal count or rewiring count).
pub fn progression_spearman(curve: &ChangeCurve) -> f64 {
    if curve.degenerate {
        return 0.0;
    }
    let order: Vec<f64> = (0..curve.values.len()).map(|i| i as f64).collect();
    spearman(&curve.values, &order).unwrap_or(0.0)
}

/// Label A for a mostly increasing response, B for mostly decreasing, C otherwise.
pub fn classify_abc(curve: &ChangeCurve, stats: &CurveStats, th: &Thresholds) -> GroupLabel {
    if curve.degenerate {
        return GroupLabel::C;
    }
    let tau_mag = (th.mag_rel * curve.raw_range()).max(th.mag_floor);
    if stats.magnitude < tau_mag {
        return GroupLabel::C;
    }
    if stats.spearman >= th.tau_mono {
        GroupLabel::A
    } else if stats.spearman <= -th.tau_mono {
        GroupLabel::B
    } else {
        GroupLabel::C
    }
}
