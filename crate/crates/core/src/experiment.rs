//! Experiment orchestration shared by the command-line tool: run specs,
//! result tables with provenance, diagnostic probe presets and
//! re-aggregation of stored traces.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::Activation;
use crate::dataset::{generate_synthetic, load_dataset, Dataset, SyntheticParams};
use crate::error::{Error, Result};
use crate::layers::ResidualKind;
use crate::model::{ModelConfig, Variant};
use crate::trainer::{
    hparam_sweep, mean_std, read_traces_csv, run_seeds, select_best, HParams, SeedSummary, SweepGrid,
};

/// Parses `"1,2,5"`, `"1-8"` or `"1..8"` (inclusive ranges), or a mix.
pub fn parse_depths(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::parse("depth list", format!("cannot read '{part}'"));
        let range = part.split_once("..").or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(Error::parse(
            "depth list",
            format!("'{s}' must name at least one depth >= 1"),
        ));
    }
    Ok(out)
}

/// First 16 hex digits of SHA-256 over the value's JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&json)[..8].iter().map(|b| format!("{b:02x}")).collect())
}

/// What to train, on what, and how often.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Dataset directory; the synthetic generator is used when absent.
    pub dataset: Option<PathBuf>,
    pub synthetic: SyntheticParams,
    pub variants: Vec<Variant>,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub model: ModelConfig,
    pub hparams: HParams,
    /// When present, each (variant, depth) cell first picks its optimizer
    /// settings by mean validation accuracy over the grid.
    pub sweep: Option<SweepGrid>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: None,
            synthetic: SyntheticParams::default(),
            variants: vec![Variant::Gat, Variant::Adgat],
            depths: (1..=8).collect(),
            seeds: (0..10).collect(),
            workers: 1,
            model: ModelConfig::default(),
            hparams: HParams {
                epochs: 200,
                ..HParams::default()
            },
            sweep: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::parse("experiment config", e.message()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("variants must not be empty".into()));
        }
        if self.depths.is_empty() || self.depths.contains(&0) {
            return Err(Error::Config("depths must be a nonempty list of values >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        self.model.validate()?;
        self.hparams.validate()
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            Some(dir) => load_dataset(dir),
            None => generate_synthetic(&self.synthetic),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub code_version: String,
    pub dataset_digest: String,
}

impl Provenance {
    pub fn new<T: Serialize>(config: &T, seeds: &[u64], ds: &Dataset) -> Result<Self> {
        Ok(Self {
            config_hash: config_hash(config)?,
            seeds: seeds.to_vec(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_digest: ds.digest(),
        })
    }

    /// Single-line form used as the comment header of emitted CSV files.
    pub fn comment(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "config_hash={} seeds=[{}] version={} dataset={}",
            self.config_hash,
            seeds.join(","),
            self.code_version,
            self.dataset_digest
        )
    }
}

/// One (dataset, variant, depth) cell aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub variant: Variant,
    pub depth: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta: Option<f64>,
    pub test_mean: f64,
    pub test_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
    pub per_seed_test: Vec<f64>,
    /// Per-seed trace files, relative to the table's directory.
    pub trace_files: Vec<String>,
}

#[derive(Serialize)]
struct ResultCsvRow<'a> {
    dataset: &'a str,
    variant: Variant,
    depth: usize,
    learning_rate: f64,
    weight_decay: f64,
    beta: Option<f64>,
    test_mean: f64,
    test_std: f64,
    val_mean: f64,
    val_std: f64,
    num_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub provenance: Provenance,
    pub rows: Vec<ResultRow>,
}

pub const TABLE_JSON: &str = "table.json";
pub const TABLE_CSV: &str = "table.csv";

impl ResultTable {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(TABLE_JSON), serde_json::to_string_pretty(self)?)?;
        let file = std::fs::File::create(dir.join(TABLE_CSV))?;
        let mut file = std::io::BufWriter::new(file);
        use std::io::Write;
        writeln!(file, "# {}", self.provenance.comment())?;
        let mut w = csv::Writer::from_writer(file);
        for r in &self.rows {
            w.serialize(ResultCsvRow {
                dataset: &r.dataset,
                variant: r.variant,
                depth: r.depth,
                learning_rate: r.learning_rate,
                weight_decay: r.weight_decay,
                beta: r.beta,
                test_mean: r.test_mean,
                test_std: r.test_std,
                val_mean: r.val_mean,
                val_std: r.val_std,
                num_seeds: r.per_seed_test.len(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(TABLE_JSON);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Recomputes every row's statistics from its stored trace files using the
    /// validation-based selection rule.
    pub fn reaggregate(&self, dir: &Path) -> Result<ResultTable> {
        let mut out = self.clone();
        for row in &mut out.rows {
            let mut tests = Vec::with_capacity(row.trace_files.len());
            let mut vals = Vec::with_capacity(row.trace_files.len());
            for f in &row.trace_files {
                let traces = read_traces_csv(&dir.join(f))?;
                let v: Vec<f64> = traces.iter().map(|t| t.acc_val).collect();
                let best = select_best(&v).expect("trace files are nonempty");
                tests.push(traces[best].acc_test);
                vals.push(traces[best].acc_val);
            }
            (row.test_mean, row.test_std) = mean_std(&tests);
            (row.val_mean, row.val_std) = mean_std(&vals);
            row.per_seed_test = tests;
        }
        Ok(out)
    }

    /// Largest absolute difference between matching statistics of two tables
    /// with the same layout.
    pub fn max_difference(&self, other: &ResultTable) -> Option<f64> {
        if self.rows.len() != other.rows.len() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            if (a.variant, a.depth) != (b.variant, b.depth) || a.per_seed_test.len() != b.per_seed_test.len() {
                return None;
            }
            let pairs = [
                (a.test_mean, b.test_mean),
                (a.test_std, b.test_std),
                (a.val_mean, b.val_mean),
                (a.val_std, b.val_std),
            ];
            for (x, y) in pairs
                .into_iter()
                .chain(a.per_seed_test.iter().copied().zip(b.per_seed_test.iter().copied()))
            {
                worst = worst.max((x - y).abs());
            }
        }
        Some(worst)
    }
}

fn trace_name(variant: Variant, depth: usize, seed: u64) -> String {
    format!("traces/{variant}_d{depth}_seed{seed}.csv")
}

fn store_traces(
    summary: &SeedSummary,
    variant: Variant,
    depth: usize,
    dir: &Path,
    comment: &str,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir.join("traces"))?;
    summary
        .runs
        .iter()
        .map(|run| {
            let name = trace_name(variant, depth, run.seed);
            run.result.write_csv(&dir.join(&name), comment)?;
            Ok(name)
        })
        .collect()
}

/// Trains every (variant, depth) cell of `spec` and, when `out` is given,
/// stores per-run traces and the table there.
///
/// A failing cell aborts with its identifier; rows finished before it are
/// still written to `out`.
pub fn run_experiment(spec: &ExperimentSpec, ds: &Dataset, out: Option<&Path>) -> Result<ResultTable> {
    spec.validate()?;
    let provenance = Provenance::new(spec, &spec.seeds, ds)?;
    let mut table = ResultTable {
        name: spec.name.clone(),
        provenance,
        rows: Vec::new(),
    };
    for &variant in &spec.variants {
        for &depth in &spec.depths {
            let cell = || -> Result<ResultRow> {
                let cfg = ModelConfig {
                    variant,
                    depth: crate::model::Depth::Fixed(depth),
                    ..spec.model.clone()
                };
                let hp = match &spec.sweep {
                    Some(grid) => hparam_sweep(grid, &cfg, ds, &spec.hparams, &spec.seeds, spec.workers)?.best,
                    None => spec.hparams.clone(),
                };
                let summary = run_seeds(&cfg, ds, &hp, &spec.seeds, spec.workers)?;
                let trace_files = match out {
                    Some(dir) => store_traces(&summary, variant, depth, dir, &table.provenance.comment())?,
                    None => Vec::new(),
                };
                Ok(ResultRow {
                    dataset: ds.meta.name.clone(),
                    variant,
                    depth,
                    learning_rate: hp.learning_rate,
                    weight_decay: hp.weight_decay,
                    beta: if variant == Variant::Adgat {
                        Some(hp.beta.unwrap_or(cfg.beta))
                    } else {
                        None
                    },
                    test_mean: summary.test_mean,
                    test_std: summary.test_std,
                    val_mean: summary.val_mean,
                    val_std: summary.val_std,
                    per_seed_test: summary.runs.iter().map(|r| r.result.test_at_best).collect(),
                    trace_files,
                })
            };
            match cell() {
                Ok(row) => table.rows.push(row),
                Err(e) => {
                    if let Some(dir) = out {
                        table.write(dir)?;
                    }
                    return Err(Error::Run {
                        run: format!("{variant} depth {depth}"),
                        source: Box::new(e),
                    });
                }
            }
        }
    }
    if let Some(dir) = out {
        table.write(dir)?;
    }
    Ok(table)
}

/// Diagnostic experiments, one per figure-style series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Overfitting,
    Oversmoothing,
    Overcorrelation,
    GradientVanishing,
    Oversquashing,
    ActivationSweep,
    Fa,
    Decoupled,
    ResidualComparison,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Overfitting,
        Preset::Oversmoothing,
        Preset::Overcorrelation,
        Preset::GradientVanishing,
        Preset::Oversquashing,
        Preset::ActivationSweep,
        Preset::Fa,
        Preset::Decoupled,
        Preset::ResidualComparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Overfitting => "overfitting",
            Preset::Oversmoothing => "oversmoothing",
            Preset::Overcorrelation => "overcorrelation",
            Preset::GradientVanishing => "gradient_vanishing",
            Preset::Oversquashing => "oversquashing",
            Preset::ActivationSweep => "activation_sweep",
            Preset::Fa => "fa",
            Preset::Decoupled => "decoupled",
            Preset::ResidualComparison => "residual_comparison",
        }
    }

    /// Depths swept when the caller gives none.
    pub fn default_depths(self) -> Vec<usize> {
        match self {
            Preset::Overfitting | Preset::Oversmoothing | Preset::Overcorrelation => vec![2, 5, 10, 15, 20, 25, 30],
            Preset::GradientVanishing => vec![2, 7],
            Preset::ResidualComparison => (2..=8).collect(),
            _ => (1..=8).collect(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or(Error::Unknown {
            kind: "preset",
            name: s,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub depths: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub model: ModelConfig,
    pub hparams: HParams,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            depths: None,
            seeds: (0..3).collect(),
            workers: 1,
            model: ModelConfig::default(),
            hparams: HParams {
                learning_rate: 0.01,
                epochs: 200,
                patience: 100,
                ..HParams::default()
            },
        }
    }
}

/// Plot-ready series: named columns, one numeric row per x value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub preset: Preset,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl ProbeTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        use std::io::Write;
        writeln!(file, "# preset={} {}", self.preset, self.provenance.comment())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Cell {
    summary: SeedSummary,
}

impl Cell {
    fn at_best(&self, f: impl Fn(&crate::metrics::EpochTrace) -> Option<f64>) -> f64 {
        let xs: Vec<f64> = self
            .summary
            .runs
            .iter()
            .filter_map(|r| f(&r.result.traces[r.result.best_epoch]))
            .collect();
        mean_std(&xs).0
    }
}

fn train_cell(opts: &ProbeOptions, ds: &Dataset, cfg: ModelConfig, hp: &HParams) -> Result<Cell> {
    let run = format!("{} depth {}", cfg.variant, cfg.depth);
    run_seeds(&cfg, ds, hp, &opts.seeds, opts.workers)
        .map(|summary| Cell { summary })
        .map_err(|e| Error::Run {
            run,
            source: Box::new(e),
        })
}

/// Runs one diagnostic preset and returns its series.
///
/// Accuracies are test accuracy at the validation-selected epoch, averaged
/// over seeds. The fully-adjacent preset refuses graphs above the model's
/// `fa_cap` before training anything.
pub fn run_probe(preset: Preset, ds: &Dataset, opts: &ProbeOptions) -> Result<ProbeTable> {
    let depths = opts.depths.clone().unwrap_or_else(|| preset.default_depths());
    if depths.is_empty() || depths.contains(&0) {
        return Err(Error::Config(
            "probe depths must be a nonempty list of values >= 1".into(),
        ));
    }
    if opts.seeds.is_empty() {
        return Err(Error::Config("probe needs at least one seed".into()));
    }
    if preset == Preset::Fa && ds.num_nodes() > opts.model.fa_cap {
        return Err(Error::FaTooLarge {
            nodes: ds.num_nodes(),
            cap: opts.model.fa_cap,
        });
    }
    let base = |variant: Variant, depth: usize| ModelConfig {
        variant,
        depth: crate::model::Depth::Fixed(depth),
        ..opts.model.clone()
    };
    let hp = opts.hparams.clone();
    let acc = |c: &Cell| c.summary.test_mean;
    let mut rows = Vec::new();
    let columns: Vec<&str> = match preset {
        Preset::Overfitting => vec!["depth", "acc_train", "acc_test"],
        Preset::Oversmoothing => vec!["depth", "acc", "smv"],
        Preset::Overcorrelation => vec!["depth", "acc", "corr"],
        Preset::GradientVanishing => vec!["epoch"],
        Preset::Oversquashing => vec!["depth", "acc_constant_width", "acc_width_doubling"],
        Preset::ActivationSweep => vec!["depth", "acc_leaky_relu", "acc_sigmoid", "acc_tanh"],
        Preset::Fa => vec!["depth", "acc_gat", "acc_gat_fa"],
        Preset::Decoupled => vec!["depth", "acc_entangled", "acc_decoupled"],
        Preset::ResidualComparison => vec!["depth", "acc_none", "acc_input_residual", "acc_initial_residual"],
    };
    let mut columns: Vec<String> = columns.into_iter().map(String::from).collect();

    match preset {
        Preset::GradientVanishing => {
            let hp = HParams {
                patience: hp.epochs,
                ..hp
            };
            let mut series = Vec::new();
            for &d in &depths {
                let cell = train_cell(opts, ds, base(Variant::Gat, d), &hp)?;
                let len = cell
                    .summary
                    .runs
                    .iter()
                    .map(|r| r.result.traces.len())
                    .min()
                    .unwrap_or(0);
                let s: Vec<f64> = (0..len)
                    .map(|e| {
                        mean_std(
                            &cell
                                .summary
                                .runs
                                .iter()
                                .map(|r| r.result.traces[e].grad_l1_mean)
                                .collect::<Vec<_>>(),
                        )
                        .0
                    })
                    .collect();
                columns.push(format!("grad_depth{d}"));
                series.push(s);
            }
            let len = series.iter().map(Vec::len).min().unwrap_or(0);
            for e in 0..len {
                let mut row = vec![e as f64];
                row.extend(series.iter().map(|s| s[e]));
                rows.push(row);
            }
        }
        _ => {
            for &d in &depths {
                let row = match preset {
                    Preset::Overfitting => {
                        let c = train_cell(opts, ds, base(Variant::Gat, d), &hp)?;
                        vec![c.at_best(|t| Some(t.acc_train)), acc(&c)]
                    }
                    Preset::Oversmoothing | Preset::Overcorrelation => {
                        let hp = HParams {
                            diagnostics_every: 1,
                            ..hp.clone()
                        };
                        let c = train_cell(opts, ds, base(Variant::Gat, d), &hp)?;
                        let metric = if preset == Preset::Oversmoothing {
                            c.at_best(|t| t.smv)
                        } else {
                            c.at_best(|t| t.corr)
                        };
                        vec![acc(&c), metric]
                    }
                    Preset::Oversquashing => vec![
                        acc(&train_cell(opts, ds, base(Variant::Gat, d), &hp)?),
                        acc(&train_cell(opts, ds, base(Variant::GatWidthDoubling, d), &hp)?),
                    ],
                    Preset::ActivationSweep => {
                        let mut r = Vec::new();
                        for act in [Activation::LeakyRelu(0.2), Activation::Sigmoid, Activation::Tanh] {
                            let cfg = ModelConfig {
                                attention_activation: act,
                                ..base(Variant::Gat, d)
                            };
                            r.push(acc(&train_cell(opts, ds, cfg, &hp)?));
                        }
                        r
                    }
                    Preset::Fa => vec![
                        acc(&train_cell(opts, ds, base(Variant::Gat, d), &hp)?),
                        acc(&train_cell(opts, ds, base(Variant::GatFa, d), &hp)?),
                    ],
                    Preset::Decoupled => vec![
                        acc(&train_cell(opts, ds, base(Variant::Gat, d), &hp)?),
                        acc(&train_cell(opts, ds, base(Variant::GatDecoupled, d), &hp)?),
                    ],
                    Preset::ResidualComparison => {
                        let mut r = Vec::new();
                        for kind in [
                            ResidualKind::None,
                            ResidualKind::InputResidual,
                            ResidualKind::InitialResidual,
                        ] {
                            let cfg = ModelConfig {
                                residual: kind,
                                ..base(Variant::Adgat, d)
                            };
                            r.push(acc(&train_cell(opts, ds, cfg, &hp)?));
                        }
                        r
                    }
                    Preset::GradientVanishing => unreachable!(),
                };
                let mut full = vec![d as f64];
                full.extend(row);
                rows.push(full);
            }
        }
    }
    let provenance = Provenance::new(&(preset, &depths, &opts.model, &opts.hparams), &opts.seeds, ds)?;
    Ok(ProbeTable {
        preset,
        columns,
        rows,
        provenance,
    })
}
