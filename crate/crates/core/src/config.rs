//! Flat key-value run configuration (TOML syntax).
//!
//! Unset keys fall back to the selected profile. `paper` mirrors the original
//! study (1000 size realizations, measurement after every step); `desk` keeps
//! runtime in minutes (50 realizations, stride 5).

use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::coincidence::{CoincidenceParams, NodeWeight};
use crate::error::{Error, Result};
use crate::experiments::{Experiment, ExperimentConfig, RewiringMode, RewiringStart, DEFAULT_SIZES};
use crate::generators::{lattice_side, Model, DEFAULT_EPSILON};
use crate::hcluster::Linkage;
use crate::measurements::{AccessibilityMode, MeasureOptions};
use crate::signals::{Baseline, Thresholds};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Paper,
    Desk,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub profile: Profile,
    pub models: Vec<Model>,
    pub experiments: Vec<Experiment>,
    pub sizes: Vec<usize>,
    pub nodes: usize,
    pub avg_degree: f64,
    pub steps: usize,
    /// Realizations for the size experiment.
    pub realizations_size: usize,
    /// Realizations for removal and rewiring.
    pub realizations_perturb: usize,
    pub seed: u64,
    pub stride: usize,
    pub epsilon: f64,
    pub rewiring: RewiringMode,
    pub rewiring_start: RewiringStart,
    pub accessibility: AccessibilityMode,
    pub coincidence: CoincidenceParams,
    pub baseline: Baseline,
    pub node_weight: NodeWeight,
    pub linkage: Linkage,
    pub thresholds: Thresholds,
    /// Edges below this similarity are left out of the DOT drawing.
    pub dot_threshold: f64,
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (q_size, stride) = match profile {
            Profile::Paper => (1000, 1),
            Profile::Desk => (50, 5),
        };
        RunConfig {
            profile,
            models: Model::ALL.to_vec(),
            experiments: Experiment::ALL.to_vec(),
            sizes: DEFAULT_SIZES.to_vec(),
            nodes: 100,
            avg_degree: 5.7,
            steps: 100,
            realizations_size: q_size,
            realizations_perturb: 50,
            seed: 1,
            stride,
            epsilon: DEFAULT_EPSILON,
            rewiring: RewiringMode::Uniform,
            rewiring_start: RewiringStart::Shared,
            accessibility: AccessibilityMode::Full,
            coincidence: CoincidenceParams::default(),
            baseline: Baseline::Min,
            node_weight: NodeWeight::Normalized,
            linkage: Linkage::Average,
            thresholds: Thresholds::default(),
            dot_threshold: 0.0,
        }
    }

    /// One experiment configuration per (model, experiment), models outermost.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &model in &self.models {
            for &experiment in &self.experiments {
                let mut c = ExperimentConfig::new(model, experiment);
                c.sizes = self.sizes.clone();
                c.nodes = self.nodes;
                c.avg_degree = self.avg_degree;
                c.steps = self.steps;
                c.realizations = match experiment {
                    Experiment::Size => self.realizations_size,
                    _ => self.realizations_perturb,
                };
                c.seed = self.seed;
                c.stride = self.stride;
                c.epsilon = self.epsilon;
                c.rewiring = self.rewiring;
                c.rewiring_start = self.rewiring_start;
                c.measure = MeasureOptions {
                    accessibility: self.accessibility,
                };
                out.push(c);
            }
        }
        out
    }

    /// Canonical TOML rendering with every key explicit. Parsing it back
    /// yields the same configuration.
    pub fn to_toml(&self) -> String {
        let list = |xs: Vec<String>| format!("[{}]", xs.join(", "));
        let quoted = |s: &str| format!("\"{s}\"");
        let mut lines = vec![
            format!("profile = {}", quoted(profile_str(self.profile))),
            format!("model = {}", list(self.models.iter().map(|m| quoted(m.as_str())).collect())),
            format!(
                "experiment = {}",
                list(self.experiments.iter().map(|e| quoted(e.as_str())).collect())
            ),
            format!("sizes = {}", list(self.sizes.iter().map(|s| s.to_string()).collect())),
            format!("n = {}", self.nodes),
            format!("avg_degree = {:?}", self.avg_degree),
            format!("steps = {}", self.steps),
            format!("realizations_size = {}", self.realizations_size),
            format!("realizations = {}", self.realizations_perturb),
            format!("seed = {}", quoted(&self.seed.to_string())),
            format!("stride = {}", self.stride),
            format!("epsilon = {:?}", self.epsilon),
            format!("rewiring = {}", quoted(rewiring_str(self.rewiring))),
            format!("rewiring_start = {}", quoted(rewiring_start_str(self.rewiring_start))),
            format!("accessibility = {}", quoted(accessibility_str(self.accessibility))),
            format!("delta = {:?}", self.coincidence.delta),
            format!("d = {:?}", self.coincidence.d),
            format!("e_exp = {:?}", self.coincidence.e_exp),
            format!("baseline = {}", quoted(baseline_str(self.baseline))),
            format!("node_weight = {}", quoted(node_weight_str(self.node_weight))),
            format!("linkage = {}", quoted(self.linkage.as_str())),
            format!("tau_mono = {:?}", self.thresholds.tau_mono),
            format!("mag_rel = {:?}", self.thresholds.mag_rel),
            format!("mag_floor = {:?}", self.thresholds.mag_floor),
            format!("dot_threshold = {:?}", self.dot_threshold),
        ];
        lines.push(String::new());
        lines.join("\n")
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn profile_str(p: Profile) -> &'static str {
    match p {
        Profile::Paper => "paper",
        Profile::Desk => "desk",
    }
}

fn rewiring_str(r: RewiringMode) -> &'static str {
    match r {
        RewiringMode::Uniform => "uniform",
        RewiringMode::Swap => "swap",
    }
}

fn rewiring_start_str(r: RewiringStart) -> &'static str {
    match r {
        RewiringStart::Shared => "shared",
        RewiringStart::Independent => "independent",
    }
}

fn accessibility_str(a: AccessibilityMode) -> &'static str {
    match a {
        AccessibilityMode::Full => "full",
        AccessibilityMode::Ring => "ring",
    }
}

fn baseline_str(b: Baseline) -> &'static str {
    match b {
        Baseline::Min => "min",
        Baseline::Initial => "initial",
    }
}

fn node_weight_str(w: NodeWeight) -> &'static str {
    match w {
        NodeWeight::Normalized => "normalized",
        NodeWeight::Raw => "raw",
    }
}

const KEYS: &[&str] = &[
    "profile",
    "model",
    "experiment",
    "sizes",
    "n",
    "avg_degree",
    "steps",
    "realizations",
    "realizations_size",
    "seed",
    "stride",
    "epsilon",
    "rewiring",
    "rewiring_start",
    "accessibility",
    "delta",
    "d",
    "e_exp",
    "baseline",
    "node_weight",
    "linkage",
    "tau_mono",
    "mag_rel",
    "mag_floor",
    "dot_threshold",
];

/// Collects violations instead of stopping at the first one.
struct Reader<'a> {
    table: &'a Table,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn type_error(&mut self, key: &str, expected: &str, got: &Value) {
        self.errors
            .push(format!("`{key}`: expected {expected}, found {}", got.type_str()));
    }

    fn int(&mut self, key: &str) -> Option<i64> {
        match self.table.get(key)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.type_error(key, "an integer", other);
                None
            }
        }
    }

    fn count(&mut self, key: &str, min: i64) -> Option<usize> {
        let i = self.int(key)?;
        if i < min {
            self.errors.push(format!("`{key}` must be at least {min}, got {i}"));
            return None;
        }
        Some(i as usize)
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.table.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.type_error(key, "a number", other);
                None
            }
        }
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(&mut self, key: &str) -> Option<T> {
        match self.table.get(key)? {
            Value::String(s) => match s.parse() {
                Ok(v) => Some(v),
                Err(e) => {
                    self.errors.push(format!("`{key}`: {}", e.root_message()));
                    None
                }
            },
            other => {
                self.type_error(key, "a string", other);
                None
            }
        }
    }

    /// A single name, a list of names, or "all".
    fn selection<T: std::str::FromStr<Err = Error> + Copy>(&mut self, key: &str, all: &[T]) -> Option<Vec<T>> {
        let names: Vec<&Value> = match self.table.get(key)? {
            Value::String(s) if s == "all" => return Some(all.to_vec()),
            v @ Value::String(_) => vec![v],
            Value::Array(a) => a.iter().collect(),
            other => {
                self.type_error(key, "a string or a list of strings", other);
                return None;
            }
        };
        let mut out = Vec::new();
        for v in names {
            match v {
                Value::String(s) => match s.parse::<T>() {
                    Ok(x) => out.push(x),
                    Err(e) => self.errors.push(format!("`{key}`: {}", e.root_message())),
                },
                other => self.type_error(key, "a string", other),
            }
        }
        if out.is_empty() {
            self.errors.push(format!("`{key}` selects nothing"));
            return None;
        }
        Some(out)
    }

    fn seed(&mut self) -> Option<u64> {
        match self.table.get("seed")? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::String(s) => match s.parse() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.errors
                        .push(format!("`seed`: `{s}` is not an unsigned 64-bit integer"));
                    None
                }
            },
            Value::Integer(i) => {
                self.errors.push(format!("`seed` must be nonnegative, got {i}"));
                None
            }
            other => {
                self.type_error("seed", "an integer", other);
                None
            }
        }
    }
}

impl Error {
    fn root_message(&self) -> String {
        match self {
            Error::InvalidArgument(m) | Error::Parse(m) | Error::Degenerate(m) => m.clone(),
            other => other.to_string(),
        }
    }
}

/// Parses and validates configuration text, reporting every violation.
pub fn validate_config(text: &str) -> Result<RunConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax: {}", e.message())]))?;
    let mut r = Reader {
        table: &table,
        errors: Vec::new(),
    };
    for (key, value) in &table {
        if !KEYS.contains(&key.as_str()) {
            r.errors.push(format!("unknown key `{key}`"));
        } else if value.is_table() {
            r.errors.push(format!("`{key}`: nested tables are not supported"));
        }
    }

    let profile = match table.get("profile") {
        None => Profile::Paper,
        Some(Value::String(s)) if s == "paper" => Profile::Paper,
        Some(Value::String(s)) if s == "desk" => Profile::Desk,
        Some(Value::String(s)) => {
            r.errors.push(format!("`profile`: unknown profile `{s}`"));
            Profile::Paper
        }
        Some(other) => {
            r.type_error("profile", "a string", other);
            Profile::Paper
        }
    };
    let mut cfg = RunConfig::for_profile(profile);

    if let Some(v) = r.selection("model", &Model::ALL) {
        cfg.models = v;
    }
    if let Some(v) = r.selection("experiment", &Experiment::ALL) {
        cfg.experiments = v;
    }
    match table.get("sizes") {
        None => {}
        Some(Value::Array(a)) => {
            let mut sizes = Vec::new();
            for v in a {
                match v {
                    Value::Integer(i) if *i >= 2 => sizes.push(*i as usize),
                    Value::Integer(i) => r.errors.push(format!("`sizes`: {i} is below the minimum of 2")),
                    other => r.type_error("sizes", "a list of integers", other),
                }
            }
            if a.is_empty() {
                r.errors.push("`sizes` must not be empty".into());
            }
            if sizes.windows(2).any(|w| w[0] >= w[1]) {
                r.errors.push("`sizes` must be strictly increasing".into());
            }
            cfg.sizes = sizes;
        }
        Some(other) => r.type_error("sizes", "a list of integers", other),
    }
    if let Some(v) = r.count("n", 2) {
        cfg.nodes = v;
    }
    if let Some(v) = r.float("avg_degree") {
        cfg.avg_degree = v;
    }
    if let Some(v) = r.count("steps", 0) {
        cfg.steps = v;
    }
    if let Some(v) = r.count("realizations", 1) {
        cfg.realizations_perturb = v;
        if !table.contains_key("realizations_size") {
            cfg.realizations_size = v;
        }
    }
    if let Some(v) = r.count("realizations_size", 1) {
        cfg.realizations_size = v;
    }
    if let Some(v) = r.seed() {
        cfg.seed = v;
    }
    if let Some(v) = r.count("stride", 1) {
        cfg.stride = v;
    }
    if let Some(v) = r.float("epsilon") {
        cfg.epsilon = v;
    }
    if let Some(v) = r.parsed("rewiring") {
        cfg.rewiring = v;
    }
    if let Some(v) = r.parsed("rewiring_start") {
        cfg.rewiring_start = v;
    }
    if let Some(v) = r.parsed("accessibility") {
        cfg.accessibility = v;
    }
    if let Some(v) = r.float("delta") {
        cfg.coincidence.delta = v;
    }
    if let Some(v) = r.float("d") {
        cfg.coincidence.d = v;
    }
    if let Some(v) = r.float("e_exp") {
        cfg.coincidence.e_exp = v;
    }
    if let Some(v) = r.parsed("baseline") {
        cfg.baseline = v;
    }
    if let Some(v) = r.parsed("node_weight") {
        cfg.node_weight = v;
    }
    if let Some(v) = r.parsed("linkage") {
        cfg.linkage = v;
    }
    if let Some(v) = r.float("tau_mono") {
        cfg.thresholds.tau_mono = v;
    }
    if let Some(v) = r.float("mag_rel") {
        cfg.thresholds.mag_rel = v;
    }
    if let Some(v) = r.float("mag_floor") {
        cfg.thresholds.mag_floor = v;
    }
    if let Some(v) = r.float("dot_threshold") {
        cfg.dot_threshold = v;
    }

    let mut errors = r.errors;
    errors.extend(constraint_violations(&cfg));
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

fn constraint_violations(cfg: &RunConfig) -> Vec<String> {
    let mut errors = Vec::new();
    if !(cfg.avg_degree > 0.0 && cfg.avg_degree.is_finite()) {
        errors.push(format!("`avg_degree` must be positive, got {}", cfg.avg_degree));
    }
    if !(0.0..0.5).contains(&cfg.epsilon) {
        errors.push(format!("`epsilon` must lie in [0, 0.5), got {}", cfg.epsilon));
    }
    if let Err(e) = cfg.coincidence.validate() {
        errors.push(e.root_message());
    }
    let th = &cfg.thresholds;
    if !(th.tau_mono > 0.0 && th.tau_mono <= 1.0) {
        errors.push(format!("`tau_mono` must lie in (0, 1], got {}", th.tau_mono));
    }
    if !(th.mag_rel >= 0.0 && th.mag_rel.is_finite()) || !(th.mag_floor >= 0.0 && th.mag_floor.is_finite()) {
        errors.push("`mag_rel` and `mag_floor` must be nonnegative".into());
    }
    if !(0.0..=1.0).contains(&cfg.dot_threshold) {
        errors.push(format!("`dot_threshold` must lie in [0, 1], got {}", cfg.dot_threshold));
    }
    let perturbs = cfg.experiments.iter().any(|e| *e != Experiment::Size);
    let sizes = cfg.experiments.contains(&Experiment::Size);
    for &model in &cfg.models {
        let mut check = |n: usize, what: &str| {
            if n as f64 <= cfg.avg_degree {
                errors.push(format!("{model}: {what} {n} cannot reach average degree {}", cfg.avg_degree));
            }
            if model == Model::Geo && lattice_side(n).is_err() {
                errors.push(format!("geo: {what} {n} is not a perfect square"));
            }
        };
        if sizes {
            for &n in &cfg.sizes {
                check(n, "size");
            }
        }
        if perturbs {
            check(cfg.nodes, "n");
        }
        if model == Model::Ba && (cfg.avg_degree / 2.0).round() < 1.0 {
            errors.push(format!("ba: avg_degree {} gives zero edges per new node", cfg.avg_degree));
        }
    }
    if sizes && cfg.sizes.len() < 2 {
        errors.push("the size experiment needs at least two sizes".into());
    }
    if perturbs && cfg.steps < cfg.stride {
        errors.push(format!(
            "`steps` ({}) must be at least `stride` ({}) to give two grid points",
            cfg.steps, cfg.stride
        ));
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<String> {
        match validate_config(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn defaults_follow_paper_profile() {
        let cfg = validate_config("model = \"er\"\nexperiment = \"size\"").unwrap();
        assert_eq!(cfg.sizes, vec![16, 25, 36, 49, 64, 81, 100]);
        assert_eq!(cfg.realizations_size, 1000);
        assert_eq!(cfg.avg_degree, 5.7);
        assert_eq!(cfg.stride, 1);
        let cells = cfg.cells();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].realizations, 1000);

        let empty = validate_config("").unwrap();
        assert_eq!(empty.cells().len(), 9);
        assert_eq!(empty.realizations_perturb, 50);
    }

    #[test]
    fn desk_profile() {
        let cfg = validate_config("profile = \"desk\"").unwrap();
        assert_eq!((cfg.realizations_size, cfg.realizations_perturb, cfg.stride), (50, 50, 5));
    }

    #[test]
    fn geo_sizes_must_be_squares() {
        let e = errors("model = \"geo\"\nexperiment = \"size\"\nsizes = [16, 20, 25]");
        assert!(e.iter().any(|m| m.contains("not a perfect square")), "{e:?}");
    }

    #[test]
    fn zero_realizations_rejected() {
        let e = errors("realizations = 0");
        assert!(e.iter().any(|m| m.contains("realizations")));
    }

    #[test]
    fn all_violations_are_reported() {
        let e = errors("bogus = 1\nrealizations = 0\nlinkage = \"ward\"\nstride = \"x\"\nd = 0.5");
        assert!(e.len() >= 5, "{e:?}");
        assert!(e.iter().any(|m| m.contains("unknown key `bogus`")));
        assert!(e.iter().any(|m| m.contains("ward")));
        assert!(e.iter().any(|m| m.contains("`stride`")));
        assert!(e.iter().any(|m| m.contains("D must be")));
    }

    #[test]
    fn selections_and_seed() {
        let cfg = validate_config("model = [\"ba\", \"geo\"]\nexperiment = \"all\"\nseed = \"18446744073709551615\"").unwrap();
        assert_eq!(cfg.models, vec![Model::Ba, Model::Geo]);
        assert_eq!(cfg.experiments.len(), 3);
        assert_eq!(cfg.seed, u64::MAX);
        assert!(validate_config("seed = -1").is_err());
        assert!(validate_config("model = \"ws\"").is_err());
    }

    #[test]
    fn canonical_rendering_round_trips() {
        let cfg = validate_config(
            "profile = \"desk\"\nmodel = \"geo\"\nsizes = [16, 36]\nseed = 99\nlinkage = \"single\"\ndelta = 0.1",
        )
        .unwrap();
        let again = validate_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
        let other = validate_config("profile = \"desk\"\nmodel = \"geo\"\nsizes = [16, 36]\nseed = 98").unwrap();
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn syntax_errors_are_config_errors() {
        assert!(matches!(validate_config("n = = 3"), Err(Error::Config(_))));
    }
}
