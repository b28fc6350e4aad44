//! Seeded training with validation-based model selection, multi-seed
//! aggregation and grid search over optimizer settings.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape, Var};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, corr, grad_first_layer_mean_abs, smv, EpochTrace};
use crate::model::{build_model, DropoutSpec, GraphContext, Model, ModelConfig};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Optimizer and protocol settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HParams {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Overrides the model's residual strength when set.
    pub beta: Option<f64>,
    pub epochs: usize,
    /// Stop after this many epochs without a new best validation accuracy.
    pub patience: usize,
    /// Overrides the model's dropout rate when set.
    pub dropout: Option<f64>,
    pub seed: u64,
    /// Record SMV and Corr of the logits every this many epochs (0 = never).
    pub diagnostics_every: usize,
}

impl Default for HParams {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            weight_decay: 5e-4,
            beta: None,
            epochs: 500,
            patience: 100,
            dropout: None,
            seed: 0,
            diagnostics_every: 0,
        }
    }
}

impl HParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay must be finite and >= 0, got {}",
                self.weight_decay
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.patience > self.epochs {
            return bad(format!("patience {} exceeds epochs {}", self.patience, self.epochs));
        }
        if let Some(d) = self.dropout {
            if !(0.0..1.0).contains(&d) {
                return bad(format!("dropout must lie in [0, 1), got {d}"));
            }
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return bad(format!("beta must be finite and >= 0, got {b}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    /// One entry per completed epoch, metrics taken before that epoch's update.
    pub traces: Vec<EpochTrace>,
    pub best_epoch: usize,
    pub val_at_best: f64,
    pub test_at_best: f64,
    pub params_digest: String,
}

/// Earliest epoch with the highest validation accuracy.
///
/// Reads only `acc_val`, so test accuracy never influences selection.
pub fn select_best(val_acc: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in val_acc.iter().enumerate() {
        if best.is_none_or(|b| v > val_acc[b]) {
            best = Some(i);
        }
    }
    best
}

impl TrainResult {
    fn from_traces(traces: Vec<EpochTrace>, params_digest: String) -> Self {
        let vals: Vec<f64> = traces.iter().map(|t| t.acc_val).collect();
        let best_epoch = select_best(&vals).expect("at least one epoch");
        Self {
            best_epoch,
            val_at_best: traces[best_epoch].acc_val,
            test_at_best: traces[best_epoch].acc_test,
            traces,
            params_digest,
        }
    }

    /// Writes the per-epoch trace as CSV, preceded by a `# `-prefixed comment line.
    pub fn write_csv(&self, path: &Path, comment: &str) -> Result<()> {
        write_traces_csv(&self.traces, path, comment)
    }
}

pub fn write_traces_csv(traces: &[EpochTrace], path: &Path, comment: &str) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "# {comment}")?;
    let mut w = csv::Writer::from_writer(file);
    for t in traces {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_traces_csv`]; comment lines are skipped.
pub fn read_traces_csv(path: &Path) -> Result<Vec<EpochTrace>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let traces = r.deserialize().collect::<std::result::Result<Vec<EpochTrace>, _>>()?;
    if traces.is_empty() {
        return Err(Error::parse(path.display().to_string(), "trace has no epochs"));
    }
    Ok(traces)
}

fn dropout_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: i32,
}

impl Adam {
    fn new(params: &[Matrix]) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let (p, g, m, v) = (p.as_mut_slice(), g.as_slice(), m.as_mut_slice(), v.as_mut_slice());
            for k in 0..p.len() {
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Training loss and its gradient with respect to every parameter.
pub fn loss_and_gradients(
    model: &Model,
    ctx: &GraphContext,
    ds: &Dataset,
    weight_decay: f64,
    dropout: Option<DropoutSpec>,
) -> Result<(f64, Matrix, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = model.params().iter().map(|p| tape.param(p.clone())).collect();
    let logits = model.forward_with(&mut tape, &vars, ctx, &ds.features, dropout)?;
    let loss = model.loss_with(&mut tape, &vars, logits, &ds.labels, &ds.train_mask, weight_decay)?;
    let loss_value = tape.value(loss).get(0, 0);
    let logits_value = tape.value(logits).clone();
    let grads = tape.backward(loss)?;
    let grads = vars
        .iter()
        .zip(model.params())
        .map(|(&v, p)| grads.get_or_zeros(v, p.shape()))
        .collect();
    Ok((loss_value, logits_value, grads))
}

/// Trains `model` in place with Adam on masked cross-entropy plus
/// `weight_decay · ½‖θ‖²`, stopping early on validation accuracy.
///
/// Each trace entry describes the parameters at the start of its epoch. Fails
/// with [`Error::Diverged`] as soon as the loss is not finite.
pub fn train(model: &mut Model, ds: &Dataset, hp: &HParams) -> Result<TrainResult> {
    hp.validate()?;
    if let Some(b) = hp.beta {
        model.set_beta(b);
    }
    if let Some(d) = hp.dropout {
        model.config.dropout = d;
    }
    let ctx = GraphContext::new(model, ds)?;
    let rate = model.config.dropout;
    let mut adam = Adam::new(model.params());
    let mut traces = Vec::with_capacity(hp.epochs);
    let mut best_val = f64::NEG_INFINITY;
    let mut since_best = 0;

    for epoch in 0..hp.epochs {
        let dropout = (rate > 0.0).then(|| DropoutSpec {
            rate,
            seed: dropout_seed(hp.seed, epoch),
        });
        let (loss, train_logits, grads) = loss_and_gradients(model, &ctx, ds, hp.weight_decay, dropout)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let logits = if dropout.is_some() {
            model.forward_ctx(&ctx, ds, false, 0)?
        } else {
            train_logits
        };
        let diagnostics = hp.diagnostics_every > 0 && epoch % hp.diagnostics_every == 0;
        let trace = EpochTrace {
            epoch,
            loss,
            acc_train: accuracy(&logits, &ds.labels, &ds.train_mask)?,
            acc_val: accuracy(&logits, &ds.labels, &ds.val_mask)?,
            acc_test: accuracy(&logits, &ds.labels, &ds.test_mask)?,
            smv: if diagnostics { Some(smv(&logits)?) } else { None },
            corr: if diagnostics { Some(corr(&logits)?) } else { None },
            grad_l1_mean: grad_first_layer_mean_abs(&grads, model)?,
        };
        let improved = trace.acc_val > best_val;
        traces.push(trace);
        if improved {
            best_val = trace.acc_val;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hp.patience {
                break;
            }
        }
        if hp.learning_rate > 0.0 {
            adam.step(model.params_mut(), &grads, hp.learning_rate);
        }
    }
    let digest = model.params_digest();
    Ok(TrainResult::from_traces(traces, digest))
}

/// Builds a model from `config` with `hp.seed` and trains it.
pub fn train_fresh(config: &ModelConfig, ds: &Dataset, hp: &HParams) -> Result<TrainResult> {
    let mut model = build_model(config, ds, hp.seed)?;
    train(&mut model, ds, hp)
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub result: TrainResult,
}

/// Results of one configuration over several seeds, in seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub test_mean: f64,
    pub test_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
    pub runs: Vec<SeedRun>,
}

impl SeedSummary {
    pub fn from_runs(runs: Vec<SeedRun>) -> Self {
        let tests: Vec<f64> = runs.iter().map(|r| r.result.test_at_best).collect();
        let vals: Vec<f64> = runs.iter().map(|r| r.result.val_at_best).collect();
        let (test_mean, test_std) = mean_std(&tests);
        let (val_mean, val_std) = mean_std(&vals);
        Self {
            test_mean,
            test_std,
            val_mean,
            val_std,
            runs,
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Trains one model per seed (model init and dropout both follow the seed) on
/// `workers` threads. Results are ordered by `seeds`; the first failing seed in
/// that order fails the batch.
pub fn run_seeds(
    config: &ModelConfig,
    ds: &Dataset,
    hp_base: &HParams,
    seeds: &[u64],
    workers: usize,
) -> Result<SeedSummary> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let outcomes: Vec<Result<TrainResult>> = pool(workers)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let hp = HParams {
                    seed,
                    ..hp_base.clone()
                };
                train_fresh(config, ds, &hp)
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(seeds.len());
    for (&seed, outcome) in seeds.iter().zip(outcomes) {
        let result = outcome.map_err(|e| Error::Run {
            run: format!("{} seed {seed}", config.variant),
            source: Box::new(e),
        })?;
        runs.push(SeedRun { seed, result });
    }
    Ok(SeedSummary::from_runs(runs))
}

/// Values to try per field; an empty `beta` list keeps the model's own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub learning_rate: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            learning_rate: vec![5e-3],
            weight_decay: vec![5e-4],
            beta: Vec::new(),
        }
    }
}

impl SweepGrid {
    /// Every combination, in lexicographic (lr, decay, beta) order.
    pub fn points(&self, base: &HParams) -> Vec<HParams> {
        let betas: Vec<Option<f64>> = if self.beta.is_empty() {
            vec![base.beta]
        } else {
            self.beta.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &lr in &self.learning_rate {
            for &wd in &self.weight_decay {
                for &beta in &betas {
                    out.push(HParams {
                        learning_rate: lr,
                        weight_decay: wd,
                        beta,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta: Option<f64>,
    pub val_mean: f64,
    pub val_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    /// Failure message when any seed at this point diverged or errored.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: HParams,
    pub best_row: usize,
    pub rows: Vec<SweepRow>,
}

/// Exhaustive grid search. The winner has the highest mean validation
/// accuracy; ties go to the smaller learning rate, then the smaller weight
/// decay, then the smaller beta. Points that fail are kept in the table with
/// their error and never selected.
pub fn hparam_sweep(
    grid: &SweepGrid,
    config: &ModelConfig,
    ds: &Dataset,
    hp_base: &HParams,
    seeds: &[u64],
    workers: usize,
) -> Result<SweepResult> {
    let points = grid.points(hp_base);
    if points.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(points.len());
    for hp in &points {
        let row = match run_seeds(config, ds, hp, seeds, workers) {
            Ok(s) => SweepRow {
                learning_rate: hp.learning_rate,
                weight_decay: hp.weight_decay,
                beta: hp.beta,
                val_mean: s.val_mean,
                val_std: s.val_std,
                test_mean: s.test_mean,
                test_std: s.test_std,
                error: None,
            },
            Err(e @ (Error::Run { .. } | Error::Diverged { .. })) => SweepRow {
                learning_rate: hp.learning_rate,
                weight_decay: hp.weight_decay,
                beta: hp.beta,
                val_mean: f64::NAN,
                val_std: f64::NAN,
                test_mean: f64::NAN,
                test_std: f64::NAN,
                error: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let key = |r: &SweepRow| (r.learning_rate, r.weight_decay, r.beta.unwrap_or(0.0));
    let best_row = (0..rows.len())
        .filter(|&i| rows[i].error.is_none())
        .reduce(|a, b| {
            let (ra, rb) = (&rows[a], &rows[b]);
            if rb.val_mean > ra.val_mean || (rb.val_mean == ra.val_mean && key(rb) < key(ra)) {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| Error::Config("every grid point failed".into()))?;
    Ok(SweepResult {
        best: points[best_row].clone(),
        best_row,
        rows,
    })
}

#[cfg(test)]
mod tests;
