//! Perturbation protocols (size growth, edge removal, edge rewiring) run
//! over seeded realizations, producing raw measurement trajectories.
//!
//! Every random stream is derived from the master seed with [`split_seed`],
//! keyed by model, experiment, grid index and realization index, and results
//! are stored at fixed coordinates. The output therefore does not depend on
//! how many workers execute the realizations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{rng_from_seed, GeneratorSpec, Model, DEFAULT_EPSILON};
use crate::graph::Graph;
use crate::measurements::{measure_all, Flag, MeasureOptions, MeasurementId, MeasurementSet};
use crate::signals::GroupLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Size,
    Removal,
    Rewiring,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Size, Experiment::Removal, Experiment::Rewiring];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Size => "size",
            Experiment::Removal => "removal",
            Experiment::Rewiring => "rewiring",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Experiment::Size => 1,
            Experiment::Removal => 2,
            Experiment::Rewiring => 3,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "size" => Ok(Experiment::Size),
            "removal" => Ok(Experiment::Removal),
            "rewiring" => Ok(Experiment::Rewiring),
            other => Err(Error::invalid(format!("unknown experiment `{other}`"))),
        }
    }
}

fn model_tag(model: Model) -> u64 {
    match model {
        Model::Er => 1,
        Model::Ba => 2,
        Model::Geo => 3,
    }
}

const INITIAL_NETWORK_TAG: u64 = 0x1717;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed: `h = splitmix64(master)`, then
/// `h = splitmix64(h ^ k)` for every key in order.
pub fn split_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |h, &k| splitmix64(h ^ k))
}

/// How one rewiring step changes the network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewiringMode {
    /// Remove a uniform edge, add a uniform non-edge other than the removed one.
    #[default]
    Uniform,
    /// Degree-preserving double edge swap.
    Swap,
}

impl FromStr for RewiringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(RewiringMode::Uniform),
            "swap" => Ok(RewiringMode::Swap),
            other => Err(Error::invalid(format!("unknown rewiring mode `{other}`"))),
        }
    }
}

/// Removes one uniformly chosen edge and returns it.
pub fn remove_random_edge<R: Rng + ?Sized>(g: &mut Graph, rng: &mut R) -> Result<(usize, usize)> {
    if g.edge_count() == 0 {
        return Err(Error::invalid("cannot remove an edge from an edgeless graph"));
    }
    let (u, v) = g
        .nth_edge(rng.gen_range(0..g.edge_count()))
        .expect("index below edge count");
    g.remove_edge(u, v);
    Ok((u, v))
}

/// Removes a uniformly chosen edge, then adds a uniformly chosen non-edge
/// (never the one just removed). Returns `(removed, added)`.
pub fn rewire_random_edge<R: Rng + ?Sized>(
    g: &mut Graph,
    rng: &mut R,
) -> Result<((usize, usize), (usize, usize))> {
    if g.edge_count() == 0 {
        return Err(Error::invalid("cannot rewire an edgeless graph"));
    }
    if g.non_edge_count() == 0 {
        return Err(Error::invalid("cannot rewire a complete graph"));
    }
    let edge = g
        .nth_edge(rng.gen_range(0..g.edge_count()))
        .expect("index below edge count");
    let added = rewire_edge(g, edge, rng)?;
    Ok((edge, added))
}

/// Rewires the given edge: removes it and adds a uniformly chosen non-edge
/// other than itself.
pub fn rewire_edge<R: Rng + ?Sized>(g: &mut Graph, edge: (usize, usize), rng: &mut R) -> Result<(usize, usize)> {
    let (a, b) = (edge.0.min(edge.1), edge.0.max(edge.1));
    if !g.has_edge(a, b) {
        return Err(Error::invalid(format!("edge {{{a}, {b}}} is not in the graph")));
    }
    if g.non_edge_count() == 0 {
        return Err(Error::invalid("cannot rewire a complete graph"));
    }
    g.remove_edge(a, b);
    let n = g.node_count();
    let candidates = g.non_edge_count() - 1;
    let pick = if 4 * candidates < n * (n - 1) / 2 {
        // Sparse complement: enumerate it.
        let k = rng.gen_range(0..candidates);
        (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v) && (u, v) != (a, b))
            .nth(k)
            .expect("candidate count is exact")
    } else {
        loop {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            let (u, v) = (u.min(v), u.max(v));
            if u != v && (u, v) != (a, b) && !g.has_edge(u, v) {
                break (u, v);
            }
        }
    };
    g.add_edge(pick.0, pick.1)?;
    Ok(pick)
}

/// Degree-preserving swap `{a,b},{c,d} -> {a,d},{c,b}` on two uniform edges.
pub fn swap_random_edges<R: Rng + ?Sized>(g: &mut Graph, rng: &mut R) -> Result<()> {
    let e = g.edge_count();
    if e < 2 {
        return Err(Error::invalid("edge swap needs at least two edges"));
    }
    for _ in 0..100 * e {
        let i = rng.gen_range(0..e);
        let j = rng.gen_range(0..e);
        if i == j {
            continue;
        }
        let (a, b) = g.nth_edge(i).expect("index below edge count");
        let (mut c, mut d) = g.nth_edge(j).expect("index below edge count");
        if rng.gen::<bool>() {
            std::mem::swap(&mut c, &mut d);
        }
        if a == d || c == b || g.has_edge(a, d) || g.has_edge(c, b) {
            continue;
        }
        g.remove_edge(a, b);
        g.remove_edge(c, d);
        g.add_edge(a, d)?;
        g.add_edge(c, b)?;
        return Ok(());
    }
    Err(Error::invalid("no valid degree-preserving swap found"))
}

/// Which network each rewiring realization starts from. Removal always
/// shares one network so that the edge-count grid is common.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewiringStart {
    /// One initial network for all realizations.
    #[default]
    Shared,
    /// A fresh network per realization.
    Independent,
}

impl FromStr for RewiringStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(RewiringStart::Shared),
            "independent" => Ok(RewiringStart::Independent),
            other => Err(Error::invalid(format!("unknown rewiring start `{other}`"))),
        }
    }
}

/// One model/experiment combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: Model,
    /// Network sizes visited by the size experiment.
    pub sizes: Vec<usize>,
    /// Fixed node count for removal and rewiring.
    pub nodes: usize,
    pub avg_degree: f64,
    /// Number of removals or rewirings.
    pub steps: usize,
    pub realizations: usize,
    pub seed: u64,
    /// Measure every `stride` perturbation steps.
    pub stride: usize,
    pub epsilon: f64,
    pub rewiring: RewiringMode,
    pub rewiring_start: RewiringStart,
    pub measure: MeasureOptions,
}

pub const DEFAULT_SIZES: [usize; 7] = [16, 25, 36, 49, 64, 81, 100];

impl ExperimentConfig {
    pub fn new(model: Model, experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            model,
            sizes: DEFAULT_SIZES.to_vec(),
            nodes: 100,
            avg_degree: 5.7,
            steps: 100,
            realizations: match experiment {
                Experiment::Size => 1000,
                _ => 50,
            },
            seed: 1,
            stride: 1,
            epsilon: DEFAULT_EPSILON,
            rewiring: RewiringMode::Uniform,
            rewiring_start: RewiringStart::Shared,
            measure: MeasureOptions::default(),
        }
    }

    fn spec(&self, nodes: usize, seed: u64) -> Result<GeneratorSpec> {
        let mut spec = GeneratorSpec::for_nodes(self.model, nodes, self.avg_degree, seed)?;
        spec.epsilon = self.epsilon;
        Ok(spec)
    }

    /// Seed of the shared starting network for removal and rewiring.
    pub fn initial_network_seed(&self) -> u64 {
        split_seed(self.seed, &[model_tag(self.model), INITIAL_NETWORK_TAG])
    }

    /// Seed of the size-experiment network at `(grid_index, realization)`,
    /// or of the perturbation stream of `realization` otherwise.
    pub fn cell_seed(&self, grid_index: usize, realization: usize) -> u64 {
        split_seed(
            self.seed,
            &[
                model_tag(self.model),
                self.experiment.tag(),
                grid_index as u64,
                realization as u64,
            ],
        )
    }

    pub fn initial_network(&self) -> Result<Graph> {
        self.spec(self.nodes, self.initial_network_seed())?.generate()
    }

    /// Whether realization `q` starts from its own network.
    pub fn independent_start(&self) -> bool {
        self.experiment == Experiment::Rewiring && self.rewiring_start == RewiringStart::Independent
    }

    /// Seed of the starting network of realization `q` when starts are independent.
    pub fn realization_network_seed(&self, realization: usize) -> u64 {
        split_seed(
            self.seed,
            &[model_tag(self.model), INITIAL_NETWORK_TAG, realization as u64],
        )
    }

    /// Starting network of realization `q`.
    pub fn start_network(&self, realization: usize) -> Result<Graph> {
        if self.independent_start() {
            self.spec(self.nodes, self.realization_network_seed(realization))?.generate()
        } else {
            self.initial_network()
        }
    }
}

/// Raw measurement values indexed by (measurement, grid point, realization).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureMatrix {
    pub model: Model,
    pub experiment: Experiment,
    grid: Vec<f64>,
    /// Perturbation step (or size) behind each grid point.
    steps: Vec<usize>,
    realizations: usize,
    /// Row-major `[grid][realization]`.
    cells: Vec<MeasurementSet>,
    /// Set when removal ran out of edges before the configured step count.
    pub truncated: bool,
}

impl SignatureMatrix {
    pub fn new(
        model: Model,
        experiment: Experiment,
        grid: Vec<f64>,
        steps: Vec<usize>,
        realizations: usize,
        cells: Vec<MeasurementSet>,
    ) -> Result<Self> {
        if cells.len() != grid.len() * realizations || steps.len() != grid.len() {
            return Err(Error::invalid("signature matrix dimensions do not match"));
        }
        Ok(SignatureMatrix {
            model,
            experiment,
            grid,
            steps,
            realizations,
            cells,
            truncated: false,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn realizations(&self) -> usize {
        self.realizations
    }

    pub fn cell(&self, t: usize, q: usize) -> &MeasurementSet {
        &self.cells[t * self.realizations + q]
    }

    pub fn value(&self, m: MeasurementId, t: usize, q: usize) -> f64 {
        self.cell(t, q).get(m)
    }

    pub fn flags(&self, m: MeasurementId, t: usize, q: usize) -> &[Flag] {
        self.cell(t, q).flags(m)
    }

    pub fn is_degenerate(&self, m: MeasurementId, t: usize, q: usize) -> bool {
        self.cell(t, q).is_degenerate(m)
    }

    /// Trajectory of one realization.
    pub fn trajectory(&self, m: MeasurementId, q: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|t| self.value(m, t, q)).collect()
    }

    pub fn degenerate_count(&self, m: MeasurementId) -> usize {
        self.cells.iter().filter(|c| c.is_degenerate(m)).count()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<SignatureMatrix> {
    match cfg.experiment {
        Experiment::Size => run_size_experiment(cfg, workers),
        Experiment::Removal => run_removal_experiment(cfg, workers),
        Experiment::Rewiring => run_rewiring_experiment(cfg, workers),
    }
}

fn check_common(cfg: &ExperimentConfig, expected: Experiment) -> Result<()> {
    if cfg.experiment != expected {
        return Err(Error::invalid(format!(
            "config is for the {} experiment, not {expected}",
            cfg.experiment
        )));
    }
    if cfg.realizations == 0 {
        return Err(Error::invalid("at least one realization is required"));
    }
    Ok(())
}

/// A fresh network per (size, realization). The free variable of each grid
/// point is the mean realized edge count at that size.
pub fn run_size_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<SignatureMatrix> {
    check_common(cfg, Experiment::Size)?;
    if cfg.sizes.is_empty() {
        return Err(Error::invalid("size grid is empty"));
    }
    let q = cfg.realizations;
    let tasks: Vec<(usize, usize)> = (0..cfg.sizes.len())
        .flat_map(|t| (0..q).map(move |r| (t, r)))
        .collect();
    let results: Vec<(usize, MeasurementSet)> = pool(workers)?.install(|| {
        tasks
            .par_iter()
            .map(|&(t, r)| {
                let g = cfg.spec(cfg.sizes[t], cfg.cell_seed(t, r))?.generate()?;
                Ok((g.edge_count(), measure_all(&g, &cfg.measure)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let grid = (0..cfg.sizes.len())
        .map(|t| results[t * q..(t + 1) * q].iter().map(|(e, _)| *e as f64).sum::<f64>() / q as f64)
        .collect();
    let cells = results.into_iter().map(|(_, m)| m).collect();
    SignatureMatrix::new(cfg.model, cfg.experiment, grid, cfg.sizes.clone(), q, cells)
}

/// Independent removal sequences applied to one shared initial network.
pub fn run_removal_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<SignatureMatrix> {
    check_common(cfg, Experiment::Removal)?;
    run_perturbation(cfg, workers, |g, rng| remove_random_edge(g, rng).map(|_| ()))
}

/// Independent rewiring sequences, applied to one shared initial network or
/// to a fresh network per realization.
pub fn run_rewiring_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<SignatureMatrix> {
    check_common(cfg, Experiment::Rewiring)?;
    match cfg.rewiring {
        RewiringMode::Uniform => run_perturbation(cfg, workers, |g, rng| rewire_random_edge(g, rng).map(|_| ())),
        RewiringMode::Swap => run_perturbation(cfg, workers, swap_random_edges),
    }
}

fn run_perturbation<F>(cfg: &ExperimentConfig, workers: usize, step: F) -> Result<SignatureMatrix>
where
    F: Fn(&mut Graph, &mut rand_chacha::ChaCha8Rng) -> Result<()> + Sync,
{
    if cfg.stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let initial = cfg.initial_network()?;
    let e0 = initial.edge_count();
    let removal = cfg.experiment == Experiment::Removal;
    let mut last = cfg.steps;
    let mut truncated = false;
    if removal && last > e0 {
        last = e0;
        truncated = true;
    }
    let steps: Vec<usize> = (0..=last).step_by(cfg.stride).collect();
    let q = cfg.realizations;

    let runs: Vec<Vec<MeasurementSet>> = pool(workers)?.install(|| {
        (0..q)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng_from_seed(cfg.cell_seed(0, r));
                let mut g = if cfg.independent_start() {
                    cfg.start_network(r)?
                } else {
                    initial.clone()
                };
                let mut out = Vec::with_capacity(steps.len());
                let mut done = 0;
                for &target in &steps {
                    while done < target {
                        step(&mut g, &mut rng)?;
                        done += 1;
                    }
                    out.push(measure_all(&g, &cfg.measure)?);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let grid: Vec<f64> = steps
        .iter()
        .map(|&s| if removal { (e0 - s) as f64 } else { s as f64 })
        .collect();
    let mut cells = Vec::with_capacity(steps.len() * q);
    for t in 0..steps.len() {
        for run in &runs {
            cells.push(run[t].clone());
        }
    }
    let mut sig = SignatureMatrix::new(cfg.model, cfg.experiment, grid, steps, q, cells)?;
    sig.truncated = truncated;
    Ok(sig)
}

pub type Cell = (Model, Experiment);

/// Labels of every measurement for each (model, experiment) column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipTable {
    pub columns: Vec<Cell>,
    labels: BTreeMap<Cell, [GroupLabel; MeasurementId::COUNT]>,
}

impl MembershipTable {
    pub fn label(&self, m: MeasurementId, model: Model, experiment: Experiment) -> Option<GroupLabel> {
        self.labels.get(&(model, experiment)).map(|l| l[m.index()])
    }

    pub fn column(&self, model: Model, experiment: Experiment) -> Option<&[GroupLabel; MeasurementId::COUNT]> {
        self.labels.get(&(model, experiment))
    }

    /// One row per measurement, one column per (model, experiment).
    pub fn to_csv_rows(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["measurement".to_string()];
        header.extend(self.columns.iter().map(|(m, e)| format!("{m}/{e}")));
        let rows = MeasurementId::ALL
            .iter()
            .map(|&id| {
                let mut row = vec![id.abbreviation().to_string()];
                row.extend(self.columns.iter().map(|c| self.labels[c][id.index()].to_string()));
                row
            })
            .collect();
        (header, rows)
    }
}

/// Assembles the measurement x (model, experiment) label table. Every cell
/// in `required` must be present.
pub fn export_membership_table(
    labels: &BTreeMap<Cell, [GroupLabel; MeasurementId::COUNT]>,
    required: &[Cell],
) -> Result<MembershipTable> {
    let missing: Vec<String> = required
        .iter()
        .filter(|c| !labels.contains_key(c))
        .map(|(m, e)| format!("{m}/{e}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "membership table is missing {}",
            missing.join(", ")
        )));
    }
    let columns: Vec<Cell> = required.to_vec();
    let labels = columns.iter().map(|c| (*c, labels[c])).collect();
    Ok(MembershipTable { columns, labels })
}

/// All nine (model, experiment) combinations, models outermost.
pub fn all_cells() -> Vec<Cell> {
    Model::ALL
        .iter()
        .flat_map(|&m| Experiment::ALL.iter().map(move |&e| (m, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    fn quick(model: Model, experiment: Experiment) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(model, experiment);
        cfg.realizations = 2;
        cfg.stride = 10;
        cfg
    }

    #[test]
    fn seeds_split_deterministically() {
        assert_eq!(split_seed(7, &[1, 2]), split_seed(7, &[1, 2]));
        assert_ne!(split_seed(7, &[1, 2]), split_seed(7, &[2, 1]));
        assert_ne!(split_seed(7, &[1, 2]), split_seed(8, &[1, 2]));
        let cfg = ExperimentConfig::new(Model::Er, Experiment::Size);
        assert_ne!(cfg.cell_seed(0, 1), cfg.cell_seed(1, 0));
    }

    #[test]
    fn removal_examples() {
        let mut rng = rng_from_seed(1);
        let mut g = complete(3);
        remove_random_edge(&mut g, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.is_connected());
        let mut g = complete(2);
        remove_random_edge(&mut g, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!(remove_random_edge(&mut g, &mut rng).is_err());
    }

    #[test]
    fn removal_is_uniform_over_edges() {
        let mut counts = [0usize; 3];
        let mut rng = rng_from_seed(2);
        for _ in 0..3000 {
            let mut g = complete(3);
            let (u, v) = remove_random_edge(&mut g, &mut rng).unwrap();
            counts[u + v - 1] += 1;
        }
        for c in counts {
            assert!((850..1150).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn rewiring_examples() {
        let mut rng = rng_from_seed(3);
        let mut g = path(3);
        assert_eq!(rewire_edge(&mut g, (0, 1), &mut rng).unwrap(), (0, 2));
        assert!(g.has_edge(0, 2) && g.has_edge(1, 2) && !g.has_edge(0, 1));

        let mut g = complete(4);
        assert!(rewire_random_edge(&mut g, &mut rng).is_err());
        assert_eq!(g, complete(4));

        let mut g = crate::generators::gen_er(30, 4.0, 5).unwrap();
        let e = g.edge_count();
        for _ in 0..1000 {
            let (removed, added) = rewire_random_edge(&mut g, &mut rng).unwrap();
            assert_ne!(removed, added);
            assert_eq!(g.edge_count(), e);
            let deg_sum: usize = (0..30).map(|v| g.degree(v)).sum();
            assert_eq!(deg_sum, 2 * e);
        }
    }

    #[test]
    fn dense_rewiring_uses_enumeration() {
        let mut rng = rng_from_seed(4);
        let mut g = complete(6);
        g.remove_edge(0, 1);
        g.remove_edge(2, 3);
        for _ in 0..50 {
            rewire_random_edge(&mut g, &mut rng).unwrap();
            assert_eq!(g.edge_count(), 13);
        }
    }

    #[test]
    fn swap_preserves_degrees() {
        let mut rng = rng_from_seed(5);
        let mut g = crate::generators::gen_ba(40, 2, 1).unwrap();
        let before: Vec<usize> = (0..40).map(|v| g.degree(v)).collect();
        for _ in 0..200 {
            swap_random_edges(&mut g, &mut rng).unwrap();
        }
        let after: Vec<usize> = (0..40).map(|v| g.degree(v)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn er_size_grid_and_degree_row() {
        let cfg = quick(Model::Er, Experiment::Size);
        let sig = run_size_experiment(&cfg, 2).unwrap();
        assert_eq!(sig.grid(), &[46.0, 71.0, 103.0, 140.0, 182.0, 231.0, 285.0]);
        for t in 0..7 {
            let d0 = sig.value(MeasurementId::Degree, t, 0);
            assert_eq!(d0, sig.value(MeasurementId::Degree, t, 1));
            assert!((d0 - 5.7).abs() < 0.06);
        }
        let mut one = cfg.clone();
        one.realizations = 1;
        assert_eq!(run_size_experiment(&one, 1).unwrap().realizations(), 1);
        assert!(run_removal_experiment(&cfg, 1).is_err());
    }

    #[test]
    fn removal_grid_is_arithmetic_and_degree_exact() {
        let cfg = quick(Model::Er, Experiment::Removal);
        let sig = run_removal_experiment(&cfg, 2).unwrap();
        assert_eq!(sig.grid().len(), 11);
        assert_eq!(sig.grid()[0], 285.0);
        assert_eq!(*sig.grid().last().unwrap(), 185.0);
        for (t, &e) in sig.grid().iter().enumerate() {
            assert_eq!(e, 285.0 - 10.0 * t as f64);
            for q in 0..2 {
                assert_eq!(sig.value(MeasurementId::Degree, t, q), 2.0 * e / 100.0);
            }
        }
        assert!((sig.value(MeasurementId::Degree, 10, 0) - 3.7).abs() < 1e-12);
    }

    #[test]
    fn removal_truncates_on_exhaustion() {
        let mut cfg = quick(Model::Er, Experiment::Removal);
        cfg.nodes = 10;
        cfg.avg_degree = 2.0;
        cfg.steps = 30;
        cfg.stride = 5;
        let sig = run_removal_experiment(&cfg, 1).unwrap();
        assert!(sig.truncated);
        assert_eq!(sig.steps(), &[0, 5, 10]);
        assert_eq!(sig.grid(), &[10.0, 5.0, 0.0]);
    }

    #[test]
    fn rewiring_keeps_degree_and_starts_at_initial_network() {
        let cfg = quick(Model::Er, Experiment::Rewiring);
        let sig = run_rewiring_experiment(&cfg, 2).unwrap();
        assert_eq!(sig.grid()[0], 0.0);
        assert_eq!(sig.grid().len(), 11);
        let initial = measure_all(&cfg.initial_network().unwrap(), &cfg.measure).unwrap();
        for q in 0..2 {
            assert_eq!(sig.cell(0, q), &initial);
            for t in 0..11 {
                assert!((sig.value(MeasurementId::Degree, t, q) - 5.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = quick(Model::Ba, Experiment::Rewiring);
        assert_eq!(run_experiment(&cfg, 1).unwrap(), run_experiment(&cfg, 4).unwrap());
        let cfg = quick(Model::Geo, Experiment::Size);
        assert_eq!(run_experiment(&cfg, 1).unwrap(), run_experiment(&cfg, 3).unwrap());
    }

    #[test]
    fn membership_table_shape_and_missing_cells() {
        let mut labels = BTreeMap::new();
        for cell in all_cells() {
            labels.insert(cell, [GroupLabel::C; 14]);
        }
        let t = export_membership_table(&labels, &all_cells()).unwrap();
        let (header, rows) = t.to_csv_rows();
        assert_eq!(header.len(), 10);
        assert_eq!(rows.len(), 14);
        assert!(rows.iter().all(|r| r.len() == 10));
        labels.remove(&(Model::Geo, Experiment::Removal));
        let err = export_membership_table(&labels, &all_cells()).unwrap_err();
        assert!(err.to_string().contains("geo/removal"));
    }
}
