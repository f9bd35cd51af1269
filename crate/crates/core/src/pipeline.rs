//! End-to-end run: generate, perturb, measure, normalize, compare, cluster,
//! classify and export.
//!
//! Output files are rendered from the aggregated results in a fixed order,
//! so identical configurations give identical bytes whatever the worker
//! count. Every file carries the config hash and master seed.
//!
//! CSV schemas (all with a header row):
//!
//! * `raw.csv`: config_hash, seed, experiment, model, measurement, grid_index,
//!   grid_value, realization, value, flags (`|`-separated)
//! * `curves.csv`: config_hash, seed, model, experiment, measurement,
//!   grid_index, grid_value, raw_mean, c
//! * `stats.csv`: config_hash, seed, model, experiment, measurement, psi,
//!   psi_degenerate, pearson, pearson_degenerate, magnitude, spearman, label,
//!   mean_level, sigma, curve_degenerate, degenerate_cells
//! * `membership.csv`: config_hash, seed, measurement, then one label column
//!   per `model/experiment`

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::coincidence::{build_similarity_network, SimilarityNetwork};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{export_membership_table, run_experiment, Experiment, MembershipTable, SignatureMatrix};
use crate::generators::Model;
use crate::hcluster::{agglomerate, Dendrogram};
use crate::measurements::MeasurementId;
use crate::signals::{classify_abc, mean_trajectory, normalize_curve_with, ChangeCurve, CurveStats, GroupLabel};

pub const OUTPUT_FILES: [&str; 9] = [
    "raw.csv",
    "curves.csv",
    "stats.csv",
    "simnet.json",
    "simnet.dot",
    "dendrogram.nwk",
    "dendrogram.json",
    "membership.csv",
    "meta.json",
];

#[derive(Debug, Clone)]
pub struct CellResult {
    pub model: Model,
    pub experiment: Experiment,
    pub signature: SignatureMatrix,
    /// Per measurement, in [`MeasurementId::ALL`] order.
    pub curves: Vec<ChangeCurve>,
    pub stats: Vec<CurveStats>,
    pub labels: [GroupLabel; MeasurementId::COUNT],
    /// Degenerate cells skipped in each mean trajectory.
    pub skipped: [usize; MeasurementId::COUNT],
    pub network: SimilarityNetwork,
    pub dendrogram: Dendrogram,
}

impl CellResult {
    pub fn coordinate(&self) -> String {
        format!("{}/{}", self.model, self.experiment)
    }

    pub fn curve(&self, m: MeasurementId) -> &ChangeCurve {
        &self.curves[m.index()]
    }

    pub fn label(&self, m: MeasurementId) -> GroupLabel {
        self.labels[m.index()]
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub config_hash: String,
    pub cells: Vec<CellResult>,
}

fn measurement_labels() -> Vec<String> {
    MeasurementId::ALL.iter().map(|m| m.abbreviation().to_string()).collect()
}

/// Everything downstream of the raw measurements for one signature matrix.
pub fn analyze_signature(sig: SignatureMatrix, cfg: &RunConfig) -> Result<CellResult> {
    let coord = format!("{}/{}", sig.model, sig.experiment);
    let mut curves = Vec::with_capacity(MeasurementId::COUNT);
    let mut stats = Vec::with_capacity(MeasurementId::COUNT);
    let mut labels = [GroupLabel::C; MeasurementId::COUNT];
    let mut skipped = [0; MeasurementId::COUNT];
    for m in MeasurementId::ALL {
        let mean = mean_trajectory(&sig, m).map_err(|e| e.at_stage("normalize", format!("{coord}/{m}")))?;
        let curve = normalize_curve_with(m, sig.grid(), &mean.values, cfg.baseline);
        let s = CurveStats::compute(&sig, &curve);
        labels[m.index()] = classify_abc(&curve, &s, &cfg.thresholds);
        skipped[m.index()] = mean.skipped;
        curves.push(curve);
        stats.push(s);
    }
    let network = build_similarity_network(&curves, Some(&labels), &cfg.coincidence, cfg.node_weight)
        .map_err(|e| e.at_stage("similarity", coord.clone()))?;
    let dendrogram = agglomerate(&network.matrix(), &measurement_labels(), cfg.linkage)
        .map_err(|e| e.at_stage("cluster", coord.clone()))?;
    Ok(CellResult {
        model: sig.model,
        experiment: sig.experiment,
        signature: sig,
        curves,
        stats,
        labels,
        skipped,
        network,
        dendrogram,
    })
}

/// Runs every configured (model, experiment) cell.
pub fn run_pipeline(cfg: &RunConfig, workers: usize) -> Result<RunResult> {
    let mut cells = Vec::new();
    for exp in cfg.cells() {
        let coord = format!("{}/{}", exp.model, exp.experiment);
        let sig = run_experiment(&exp, workers).map_err(|e| e.at_stage("perturb", coord))?;
        cells.push(analyze_signature(sig, cfg)?);
    }
    Ok(RunResult {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        cells,
    })
}

fn flags_field(flags: &[crate::measurements::Flag]) -> String {
    flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("|")
}

impl RunResult {
    pub fn cell(&self, model: Model, experiment: Experiment) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.model == model && c.experiment == experiment)
    }

    fn prefix(&self) -> String {
        format!("{},{}", self.config_hash, self.config.seed)
    }

    pub fn raw_csv(&self) -> String {
        let mut out = String::from(
            "config_hash,seed,experiment,model,measurement,grid_index,grid_value,realization,value,flags\n",
        );
        let p = self.prefix();
        for c in &self.cells {
            let sig = &c.signature;
            for m in MeasurementId::ALL {
                for (t, g) in sig.grid().iter().enumerate() {
                    for q in 0..sig.realizations() {
                        let _ = writeln!(
                            out,
                            "{p},{},{},{},{t},{g},{q},{},{}",
                            c.experiment,
                            c.model,
                            m,
                            sig.value(m, t, q),
                            flags_field(sig.flags(m, t, q))
                        );
                    }
                }
            }
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out = String::from("config_hash,seed,model,experiment,measurement,grid_index,grid_value,raw_mean,c\n");
        let p = self.prefix();
        for c in &self.cells {
            for curve in &c.curves {
                for (t, g) in curve.grid.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{p},{},{},{},{t},{g},{},{}",
                        c.model, c.experiment, curve.measurement, curve.raw[t], curve.values[t]
                    );
                }
            }
        }
        out
    }

    pub fn stats_csv(&self) -> String {
        let mut out = String::from(
            "config_hash,seed,model,experiment,measurement,psi,psi_degenerate,pearson,pearson_degenerate,\
             magnitude,spearman,label,mean_level,sigma,curve_degenerate,degenerate_cells\n",
        );
        let p = self.prefix();
        for c in &self.cells {
            for m in MeasurementId::ALL {
                let (s, curve) = (&c.stats[m.index()], c.curve(m));
                let _ = writeln!(
                    out,
                    "{p},{},{},{m},{},{},{},{},{},{},{},{},{},{},{}",
                    c.model,
                    c.experiment,
                    s.psi.value,
                    s.psi.degenerate,
                    s.pearson.value,
                    s.pearson.degenerate,
                    s.magnitude,
                    s.spearman,
                    c.label(m),
                    curve.mean_level,
                    curve.sigma,
                    curve.degenerate,
                    c.skipped[m.index()]
                );
            }
        }
        out
    }

    pub fn simnet_json(&self) -> String {
        let networks: Vec<Value> = self
            .cells
            .iter()
            .map(|c| network_json(c.model, c.experiment, &c.network))
            .collect();
        pretty(&json!({
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "coincidence": self.config.coincidence,
            "networks": networks,
        }))
    }

    pub fn simnet_dot(&self) -> String {
        let mut out = format!("// config_hash={} seed={}\n", self.config_hash, self.config.seed);
        for c in &self.cells {
            out.push_str(&c.network.to_dot(&c.coordinate(), self.config.dot_threshold));
        }
        out
    }

    pub fn dendrogram_nwk(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let _ = writeln!(
                out,
                "[{} config_hash={} seed={}]{}",
                c.coordinate(),
                self.config_hash,
                self.config.seed,
                c.dendrogram.to_newick()
            );
        }
        out
    }

    pub fn dendrogram_json(&self) -> String {
        let trees: Vec<Value> = self
            .cells
            .iter()
            .map(|c| dendrogram_json(c.model, c.experiment, &c.dendrogram))
            .collect();
        pretty(&json!({
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "dendrograms": trees,
        }))
    }

    pub fn membership(&self) -> Result<MembershipTable> {
        let labels: BTreeMap<_, _> = self
            .cells
            .iter()
            .map(|c| ((c.model, c.experiment), c.labels))
            .collect();
        let required: Vec<_> = self.cells.iter().map(|c| (c.model, c.experiment)).collect();
        export_membership_table(&labels, &required)
    }

    pub fn membership_csv(&self) -> Result<String> {
        let (header, rows) = self.membership()?.to_csv_rows();
        let mut out = format!("config_hash,seed,{}\n", header.join(","));
        for row in rows {
            let _ = writeln!(out, "{},{}", self.prefix(), row.join(","));
        }
        Ok(out)
    }

    pub fn meta_json(&self) -> String {
        let cells: Vec<Value> = self
            .config
            .cells()
            .iter()
            .zip(&self.cells)
            .map(|(exp, c)| {
                let sig = &c.signature;
                let seeds: Value = match c.experiment {
                    Experiment::Size => json!((0..sig.grid().len())
                        .map(|t| (0..sig.realizations()).map(|q| exp.cell_seed(t, q)).collect::<Vec<_>>())
                        .collect::<Vec<_>>()),
                    _ if exp.independent_start() => json!({
                        "realization_networks": (0..sig.realizations())
                            .map(|q| exp.realization_network_seed(q))
                            .collect::<Vec<_>>(),
                        "perturbation": (0..sig.realizations()).map(|q| exp.cell_seed(0, q)).collect::<Vec<_>>(),
                    }),
                    _ => json!({
                        "initial_network": exp.initial_network_seed(),
                        "perturbation": (0..sig.realizations()).map(|q| exp.cell_seed(0, q)).collect::<Vec<_>>(),
                    }),
                };
                let degenerate: serde_json::Map<String, Value> = MeasurementId::ALL
                    .iter()
                    .map(|&m| (m.abbreviation().to_string(), json!(sig.degenerate_count(m))))
                    .collect();
                json!({
                    "model": c.model,
                    "experiment": c.experiment,
                    "grid": sig.grid(),
                    "steps": sig.steps(),
                    "realizations": sig.realizations(),
                    "truncated": sig.truncated,
                    "seeds": seeds,
                    "degenerate_cells": degenerate,
                })
            })
            .collect();
        pretty(&json!({
            "tool": "netperturb",
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "config": self.config,
            "config_toml": self.config.to_toml(),
            "exact_lattice": self.config.epsilon == 0.0 && self.config.models.contains(&Model::Geo),
            "stages": ["generate", "perturb", "measure", "normalize", "similarity", "cluster", "classify", "export"],
            "files": OUTPUT_FILES,
            "cells": cells,
        }))
    }

    /// Writes all output files into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let membership = self.membership_csv().map_err(|e| e.at_stage("export", "membership"))?;
        let contents = [
            self.raw_csv(),
            self.curves_csv(),
            self.stats_csv(),
            self.simnet_json(),
            self.simnet_dot(),
            self.dendrogram_nwk(),
            self.dendrogram_json(),
            membership,
            self.meta_json(),
        ];
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (name, text) in OUTPUT_FILES.iter().zip(contents) {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}

pub fn network_json(model: Model, experiment: Experiment, net: &SimilarityNetwork) -> Value {
    json!({
        "model": model,
        "experiment": experiment,
        "labels": net.nodes.iter().map(|n| n.measurement.abbreviation()).collect::<Vec<_>>(),
        "matrix": net.matrix(),
        "nodes": net.nodes.iter().map(|n| json!({
            "measurement": n.measurement.abbreviation(),
            "weight": n.weight,
            "group": n.label.map(|l| l.as_str()),
        })).collect::<Vec<_>>(),
        "edges": net.edges.iter().map(|e| json!({
            "a": e.a.abbreviation(),
            "b": e.b.abbreviation(),
            "weight": e.weight,
        })).collect::<Vec<_>>(),
    })
}

pub fn dendrogram_json(model: Model, experiment: Experiment, d: &Dendrogram) -> Value {
    json!({
        "model": model,
        "experiment": experiment,
        "linkage": d.linkage,
        "leaves": d.leaves,
        "merges": d.merges,
        "newick": d.to_newick(),
    })
}

/// Rebuilds change curves from `curves.csv` text, grouped by cell in file order.
pub fn read_curves_csv(text: &str, baseline: crate::signals::Baseline) -> Result<Vec<(Model, Experiment, Vec<ChangeCurve>)>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("curves.csv is empty".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Parse(format!("curves.csv: missing column `{name}`")))
    };
    let (cm, ce, cmeas, cg, craw) = (col("model")?, col("experiment")?, col("measurement")?, col("grid_value")?, col("raw_mean")?);
    type Key = (Model, Experiment);
    let mut order: Vec<Key> = Vec::new();
    let mut data: BTreeMap<Key, BTreeMap<MeasurementId, (Vec<f64>, Vec<f64>)>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| Error::Parse(format!("curves.csv line {}: {what}", i + 2));
        if f.len() != cols.len() {
            return Err(bad("wrong number of fields"));
        }
        let key: Key = (f[cm].parse()?, f[ce].parse()?);
        let m: MeasurementId = f[cmeas].parse()?;
        let g: f64 = f[cg].parse().map_err(|_| bad("bad grid_value"))?;
        let r: f64 = f[craw].parse().map_err(|_| bad("bad raw_mean"))?;
        if !order.contains(&key) {
            order.push(key);
        }
        let entry = data.entry(key).or_default().entry(m).or_default();
        entry.0.push(g);
        entry.1.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let per = &data[&key];
            if per.len() != MeasurementId::COUNT {
                return Err(Error::Parse(format!(
                    "curves.csv: {}/{} has {} of {} measurements",
                    key.0,
                    key.1,
                    per.len(),
                    MeasurementId::COUNT
                )));
            }
            let curves = MeasurementId::ALL
                .iter()
                .map(|m| {
                    let (g, r) = &per[m];
                    normalize_curve_with(*m, g, r, baseline)
                })
                .collect();
            Ok((key.0, key.1, curves))
        })
        .collect()
}
