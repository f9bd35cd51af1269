use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use netperturb::coincidence::build_similarity_network;
use netperturb::config::{validate_config, RunConfig};
use netperturb::experiments::Experiment;
use netperturb::generators::{GeneratorSpec, Model, DEFAULT_EPSILON};
use netperturb::hcluster::{agglomerate, Linkage};
use netperturb::measurements::{measure_all, AccessibilityMode, MeasureOptions, MeasurementId};
use netperturb::pipeline::{dendrogram_json, network_json, read_curves_csv, run_pipeline};
use netperturb::{Error, Graph, Result};

const WORKERS_ENV: &str = "NETPERTURB_WORKERS";

#[derive(Parser)]
#[command(name = "netperturb", version, about = "Topological measurement responses to network perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one network and write it as an edge list.
    Gen {
        #[arg(long)]
        model: Model,
        /// Node count (a perfect square for geo).
        #[arg(long)]
        n: usize,
        /// Target average degree.
        #[arg(long, default_value_t = 5.7)]
        k: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the fourteen measurements on an edge list.
    Measure {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        accessibility: AccessibilityMode,
    },
    /// Run the full pipeline described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild similarity networks from a curves.csv file.
    Simnet {
        #[arg(long)]
        curves: PathBuf,
        /// Supplies coincidence parameters, baseline and node weights.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster the similarity networks of a simnet.json file.
    Cluster {
        #[arg(long)]
        simnet: PathBuf,
        #[arg(long, default_value = "average")]
        linkage: Linkage,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize the labels and statistics of a finished run.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values always serialize") + "\n"
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => validate_config(&read(p)?),
        None => Ok(RunConfig::for_profile(Default::default())),
    }
}

fn measure(input: &Path, out: Option<&Path>, accessibility: AccessibilityMode) -> Result<()> {
    let g = Graph::from_edge_list(&read(input)?)?;
    let set = measure_all(&g, &MeasureOptions { accessibility })?;
    let mut obj = Map::new();
    for m in MeasurementId::ALL {
        obj.insert(m.abbreviation().into(), json!(set.get(m)));
    }
    for m in MeasurementId::ALL {
        let flags: Vec<&str> = set.flags(m).iter().map(|f| f.as_str()).collect();
        obj.insert(format!("{}_flags", m.abbreviation()), json!(flags));
    }
    emit(out, &pretty(&Value::Object(obj)))
}

fn simnet(curves: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let cells = read_curves_csv(&read(curves)?, cfg.baseline)?;
    let mut networks = Vec::new();
    let mut dot = format!("// config_hash={} seed={}\n", cfg.hash(), cfg.seed);
    for (model, experiment, curves) in cells {
        let coord = format!("{model}/{experiment}");
        let net = build_similarity_network(&curves, None, &cfg.coincidence, cfg.node_weight)
            .map_err(|e| e.at_stage("similarity", coord.clone()))?;
        dot.push_str(&net.to_dot(&coord, cfg.dot_threshold));
        networks.push(network_json(model, experiment, &net));
    }
    let doc = json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "coincidence": cfg.coincidence,
        "networks": networks,
    });
    write(&out.join("simnet.json"), &pretty(&doc))?;
    write(&out.join("simnet.dot"), &dot)
}

fn cluster(simnet: &Path, linkage: Linkage, out: &Path) -> Result<()> {
    let doc: Value = serde_json::from_str(&read(simnet)?).map_err(|e| Error::Parse(format!("simnet.json: {e}")))?;
    let bad = |what: &str| Error::Parse(format!("simnet.json: {what}"));
    let hash = doc["config_hash"].as_str().unwrap_or("").to_string();
    let seed = doc["seed"].as_u64().unwrap_or(0);
    let mut nwk = String::new();
    let mut trees = Vec::new();
    for net in doc["networks"].as_array().ok_or_else(|| bad("missing `networks`"))? {
        let model: Model = net["model"].as_str().ok_or_else(|| bad("missing `model`"))?.parse()?;
        let experiment: Experiment = net["experiment"].as_str().ok_or_else(|| bad("missing `experiment`"))?.parse()?;
        let labels: Vec<String> =
            serde_json::from_value(net["labels"].clone()).map_err(|_| bad("bad `labels`"))?;
        let matrix: Vec<Vec<f64>> =
            serde_json::from_value(net["matrix"].clone()).map_err(|_| bad("bad `matrix`"))?;
        let coord = format!("{model}/{experiment}");
        let d = agglomerate(&matrix, &labels, linkage).map_err(|e| e.at_stage("cluster", coord.clone()))?;
        nwk.push_str(&format!("[{coord} config_hash={hash} seed={seed}]{}\n", d.to_newick()));
        trees.push(dendrogram_json(model, experiment, &d));
    }
    let doc = json!({ "config_hash": hash, "seed": seed, "dendrograms": trees });
    write(&out.join("dendrogram.nwk"), &nwk)?;
    write(&out.join("dendrogram.json"), &pretty(&doc))
}

fn report(dir: &Path) -> Result<()> {
    let membership = read(&dir.join("membership.csv"))?;
    let stats = read(&dir.join("stats.csv"))?;
    let mut lines = membership.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').skip(2).collect();
    println!("{:<16} {}", header.first().copied().unwrap_or(""), header[1..].join(" "));
    for line in lines {
        let f: Vec<&str> = line.split(',').skip(2).collect();
        let cells: Vec<String> = f[1..]
            .iter()
            .zip(&header[1..])
            .map(|(l, h)| format!("{l:^w$}", w = h.len()))
            .collect();
        println!("{:<16} {}", f[0], cells.join(" "));
    }
    let mut rows = stats.lines();
    let cols: Vec<&str> = rows.next().unwrap_or("").split(',').collect();
    let idx = |n: &str| cols.iter().position(|c| *c == n);
    if let (Some(cm), Some(ce), Some(cl), Some(cd)) =
        (idx("model"), idx("experiment"), idx("label"), idx("curve_degenerate"))
    {
        let mut summary: Vec<(String, [usize; 4])> = Vec::new();
        for row in rows {
            let f: Vec<&str> = row.split(',').collect();
            let key = format!("{}/{}", f[cm], f[ce]);
            if summary.last().is_none_or(|(k, _)| *k != key) {
                summary.push((key, [0; 4]));
            }
            let counts = &mut summary.last_mut().expect("just pushed").1;
            match f[cl] {
                "A" => counts[0] += 1,
                "B" => counts[1] += 1,
                _ => counts[2] += 1,
            }
            if f[cd] == "true" {
                counts[3] += 1;
            }
        }
        println!();
        for (key, [a, b, c, d]) in summary {
            println!("{key:<16} A={a:<2} B={b:<2} C={c:<2} degenerate={d}");
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            model,
            n,
            k,
            seed,
            epsilon,
            out,
        } => {
            let mut spec = GeneratorSpec::for_nodes(model, n, k, seed)?;
            spec.epsilon = epsilon;
            emit(out.as_deref(), &spec.generate()?.to_edge_list())
        }
        Command::Measure {
            input,
            out,
            accessibility,
        } => measure(&input, out.as_deref(), accessibility),
        Command::Run { config, out } => {
            let cfg = validate_config(&read(&config)?)?;
            let result = run_pipeline(&cfg, workers())?;
            let written = result.write(&out)?;
            eprintln!(
                "wrote {} files to {} (config {})",
                written.len(),
                out.display(),
                &result.config_hash[..12]
            );
            Ok(())
        }
        Command::Simnet { curves, config, out } => simnet(&curves, config.as_deref(), &out),
        Command::Cluster { simnet, linkage, out } => cluster(&simnet, linkage, &out),
        Command::Report { dir } => report(&dir),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Degenerate(_) | Error::Numeric(_) => 3,
        Error::Io { .. } | Error::Parse(_) => 4,
        Error::Stage { .. } => 1,
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
