//! `adgat` command-line tool: dataset preparation, depth advice, table runs,
//! diagnostic probes and re-aggregation of stored results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use adgat::dataset::{convert, generate_synthetic, load_dataset, Dataset, SplitSource, SyntheticParams};
use adgat::experiment::{parse_depths, run_experiment, run_probe, ExperimentSpec, Preset, ProbeOptions, ResultTable};
use adgat::model::{adaptive_depth_with_max, Variant, DEFAULT_MAX_DEPTH};
use adgat::{Error, Result};

/// Report rows whose re-aggregated statistics differ by more than this fail.
const REPORT_TOLERANCE: f64 = 1e-12;

#[derive(Parser)]
#[command(
    name = "adgat",
    version,
    about = "Deep graph attention experiments with adaptive depth"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset directory from the synthetic generator or loose files.
    #[command(subcommand)]
    Prep(Prep),
    /// Print the sparsity-based depth for a dataset.
    Depth {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory for depth.json (not written when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: usize,
    },
    /// Train every (variant, depth) cell of an experiment spec.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated variants, overriding the spec.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Run a diagnostic preset and write its plot-data CSV.
    Probe {
        /// One of: overfitting, oversmoothing, overcorrelation, gradient_vanishing,
        /// oversquashing, activation_sweep, fa, decoupled, residual_comparison.
        preset: String,
        #[command(flatten)]
        common: Common,
        /// Epoch budget, overriding the config.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Re-aggregate a stored result table from its per-run traces.
    Report {
        /// Directory holding table.json and traces/.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Dataset directory; the synthetic generator is used when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Number of seeds (0..N).
    #[arg(long)]
    seeds: Option<u64>,
    /// Depth list such as "1-8" or "2,5,10".
    #[arg(long)]
    depths: Option<String>,
    /// Experiment spec (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Prep {
    /// Generate a stochastic-block graph with class-dependent features.
    Synthetic {
        #[arg(long)]
        out: PathBuf,
        /// TOML file with generator parameters; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        avg_degree: Option<f64>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        feat_dim: Option<usize>,
        #[arg(long)]
        homophily: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        /// Split sizes as TRAIN,VAL,TEST.
        #[arg(long)]
        splits: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert an edge list, feature CSV and label file.
    Convert {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// splits.json with train/val/test index lists.
        #[arg(long, conflicts_with = "random_splits")]
        splits: Option<PathBuf>,
        /// Random split sizes as TRAIN,VAL,TEST.
        #[arg(long)]
        random_splits: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::parse("split sizes", format!("expected TRAIN,VAL,TEST, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let n = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
    Ok((n(0)?, n(1)?, n(2)?))
}

fn write_json(dir: &Path, file: &str, value: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(file), serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn print_stats(ds: &Dataset, dir: &Path) {
    let s = ds.graph.degree_stats();
    println!(
        "wrote {} ({} nodes, {} edges, {} features, {} classes) to {}",
        ds.meta.name,
        ds.meta.num_nodes,
        ds.meta.num_edges,
        ds.meta.feat_dim,
        ds.meta.num_classes,
        dir.display()
    );
    println!(
        "degree: q={:.4} min={} max={} isolated={}",
        s.avg_degree_q, s.min_degree, s.max_degree, s.num_isolated
    );
}

fn prep(cmd: Prep) -> Result<()> {
    match cmd {
        Prep::Synthetic {
            out,
            config,
            nodes,
            avg_degree,
            classes,
            feat_dim,
            homophily,
            noise,
            splits,
            seed,
        } => {
            let mut p = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingFile(path.clone()))?;
                    toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.message()))?
                }
                None => SyntheticParams::default(),
            };
            if let Some(n) = nodes {
                p = p.with_nodes(n);
            }
            p.avg_degree = avg_degree.unwrap_or(p.avg_degree);
            p.num_classes = classes.unwrap_or(p.num_classes);
            p.feat_dim = feat_dim.unwrap_or(p.feat_dim);
            p.homophily = homophily.unwrap_or(p.homophily);
            p.noise = noise.unwrap_or(p.noise);
            p.seed = seed.unwrap_or(p.seed);
            if let Some(s) = splits {
                (p.train, p.val, p.test) = parse_triple(&s)?;
            }
            let ds = generate_synthetic(&p)?;
            ds.save(&out)?;
            print_stats(&load_dataset(&out)?, &out);
        }
        Prep::Convert {
            out,
            name,
            edges,
            features,
            labels,
            splits,
            random_splits,
            seed,
        } => {
            let source = match (splits, random_splits) {
                (Some(path), _) => SplitSource::File(path),
                (None, Some(sizes)) => {
                    let (train, val, test) = parse_triple(&sizes)?;
                    SplitSource::Random { train, val, test, seed }
                }
                (None, None) => {
                    return Err(Error::Config(
                        "pass --splits FILE or --random-splits TRAIN,VAL,TEST".into(),
                    ))
                }
            };
            let ds = convert(&name, &edges, &features, &labels, &source)?;
            ds.save(&out)?;
            print_stats(&load_dataset(&out)?, &out);
        }
    }
    Ok(())
}

fn depth(dataset: &Path, out: Option<&Path>, max_depth: usize) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let (n, e) = (ds.meta.num_nodes, ds.meta.num_edges);
    let q = 2.0 * e as f64 / n as f64;
    let (l_real, l_selected) = adaptive_depth_with_max(n, e, max_depth)?;
    println!("q={q:.4} L_real={l_real:.4} L_selected={l_selected}");
    if let Some(dir) = out {
        let value = json!({
            "dataset": ds.meta.name,
            "num_nodes": n,
            "num_edges": e,
            "q": q,
            "L_real": l_real,
            "L_selected": l_selected,
        });
        write_json(dir, "depth.json", &value)?;
    }
    Ok(())
}

fn load_spec(common: &Common) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(d) = &common.dataset {
        spec.dataset = Some(d.clone());
    }
    if let Some(n) = common.seeds {
        spec.seeds = (0..n).collect();
    }
    if let Some(d) = &common.depths {
        spec.depths = parse_depths(d)?;
    }
    if let Some(w) = common.workers {
        spec.workers = w;
    }
    Ok(spec)
}

fn run(common: Common, variant: Option<String>) -> Result<()> {
    let mut spec = load_spec(&common)?;
    if let Some(v) = variant {
        spec.variants = v.split(',').map(str::parse).collect::<Result<Vec<Variant>>>()?;
    }
    spec.validate()?;
    let ds = spec.load_dataset()?;
    let table = run_experiment(&spec, &ds, Some(&common.out))?;
    println!("{:<20} {:>5} {:>9} {:>9}", "variant", "depth", "test", "std");
    for r in &table.rows {
        println!(
            "{:<20} {:>5} {:>9.4} {:>9.4}",
            r.variant.name(),
            r.depth,
            r.test_mean,
            r.test_std
        );
    }
    println!("wrote {}", common.out.display());
    Ok(())
}

fn probe(preset: &str, common: Common, epochs: Option<usize>) -> Result<()> {
    let preset: Preset = preset.parse()?;
    let explicit_seeds = common.config.is_some();
    let spec = load_spec(&common)?;
    let mut opts = ProbeOptions {
        depths: common.depths.as_deref().map(parse_depths).transpose()?,
        workers: spec.workers,
        ..ProbeOptions::default()
    };
    if explicit_seeds || common.seeds.is_some() {
        opts.seeds = spec.seeds.clone();
    }
    if common.config.is_some() {
        opts.model = spec.model.clone();
        opts.hparams = spec.hparams.clone();
    }
    if let Some(e) = epochs {
        opts.hparams.epochs = e;
        opts.hparams.patience = opts.hparams.patience.min(e);
    }
    let ds = spec.load_dataset()?;
    let table = run_probe(preset, &ds, &opts)?;
    let path = common.out.join(format!("{preset}.csv"));
    table.write_csv(&path)?;
    println!("{}", table.columns.join(","));
    for row in &table.rows {
        println!(
            "{}",
            row.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",")
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn report(out: &Path) -> Result<()> {
    let table = ResultTable::read(out)?;
    let again = table.reaggregate(out)?;
    let diff = again
        .max_difference(&table)
        .ok_or_else(|| Error::Config("stored table and traces disagree on layout".into()))?;
    println!(
        "{:<20} {:>5} {:>9} {:>9} {:>6}",
        "variant", "depth", "test", "std", "seeds"
    );
    for r in &again.rows {
        println!(
            "{:<20} {:>5} {:>9.4} {:>9.4} {:>6}",
            r.variant.name(),
            r.depth,
            r.test_mean,
            r.test_std,
            r.per_seed_test.len()
        );
    }
    println!("max |stored - recomputed| = {diff:e}");
    if diff > REPORT_TOLERANCE {
        return Err(Error::Config(format!("stored table differs from traces by {diff:e}")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prep(p) => prep(p),
        Command::Depth {
            dataset,
            out,
            max_depth,
        } => depth(&dataset, out.as_deref(), max_depth),
        Command::Run { common, variant } => run(common, variant),
        Command::Probe { preset, common, epochs } => probe(&preset, common, epochs),
        Command::Report { out } => report(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.tag(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
