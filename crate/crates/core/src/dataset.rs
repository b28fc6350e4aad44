//! Node-classification datasets: the on-disk directory format, conversion from
//! loose CSV files, and a seeded stochastic-block generator.
//!
//! A dataset directory holds five files:
//!
//! | file          | contents                                                        |
//! |---------------|-----------------------------------------------------------------|
//! | `meta.json`   | `{"name", "num_nodes", "num_edges", "feat_dim", "num_classes"}` |
//! | `edges.csv`   | one `u,v` pair per line, 0-based, each undirected edge once     |
//! | `features.csv`| `num_nodes` lines of `feat_dim` comma-separated values          |
//! | `labels.csv`  | `num_nodes` lines, one integer each                             |
//! | `splits.json` | `{"train": [..], "val": [..], "test": [..]}`                    |
//!
//! `num_edges` is the raw line count of `edges.csv`, which may differ from the
//! number of distinct undirected edges when the source lists duplicates.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::AdjacencyCSR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub feat_dim: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    /// Symmetrized topology without self-loops.
    pub graph: AdjacencyCSR,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

fn mask_from(indices: &[usize], n: usize, which: &str) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::parse(
                "splits.json",
                format!("{which} index {i} out of range for {n} nodes"),
            ));
        }
        mask[i] = true;
    }
    Ok(mask)
}

fn indices_of(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

impl Dataset {
    /// Assembles and validates a dataset from parts.
    pub fn new(
        name: impl Into<String>,
        raw_edges: &[(usize, usize)],
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        splits: &Splits,
    ) -> Result<Self> {
        let n = labels.len();
        if features.rows() != n {
            return Err(Error::CountMismatch {
                field: "features rows",
                expected: n,
                found: features.rows(),
            });
        }
        for (node, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    node,
                    label: label as i64,
                    num_classes,
                });
            }
        }
        let graph = AdjacencyCSR::build(raw_edges, n, false)?;
        let ds = Self {
            meta: DatasetMeta {
                name: name.into(),
                num_nodes: n,
                num_edges: raw_edges.len(),
                feat_dim: features.cols(),
                num_classes,
            },
            graph,
            features,
            labels,
            train_mask: mask_from(&splits.train, n, "train")?,
            val_mask: mask_from(&splits.val, n, "val")?,
            test_mask: mask_from(&splits.test, n, "test")?,
        };
        ds.check_disjoint()?;
        Ok(ds)
    }

    fn check_disjoint(&self) -> Result<()> {
        let masks = [
            ("train", &self.train_mask),
            ("val", &self.val_mask),
            ("test", &self.test_mask),
        ];
        for node in 0..self.num_nodes() {
            let hits: Vec<&'static str> = masks.iter().filter(|(_, m)| m[node]).map(|(name, _)| *name).collect();
            if hits.len() > 1 {
                return Err(Error::SplitOverlap {
                    node,
                    first: hits[0],
                    second: hits[1],
                });
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.meta.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.meta.num_classes
    }

    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn splits(&self) -> Splits {
        Splits {
            train: indices_of(&self.train_mask),
            val: indices_of(&self.val_mask),
            test: indices_of(&self.test_mask),
        }
    }

    /// Writes the directory format, creating `dir` if needed.
    ///
    /// Edges are written deduplicated; a dataset loaded from files with
    /// repeated lines comes back with the smaller `num_edges`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        // Only distinct edges are written, so the stored count follows them.
        let meta = DatasetMeta {
            num_edges: self.graph.num_undirected_edges(),
            ..self.meta.clone()
        };
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;

        let mut w = BufWriter::new(fs::File::create(dir.join("edges.csv"))?);
        for (u, v) in self.graph.edges() {
            writeln!(w, "{u},{v}")?;
        }
        w.flush()?;

        let mut w = BufWriter::new(fs::File::create(dir.join("features.csv"))?);
        for i in 0..self.features.rows() {
            let line: Vec<String> = self.features.row(i).iter().map(f64::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;

        let mut w = BufWriter::new(fs::File::create(dir.join("labels.csv"))?);
        for l in &self.labels {
            writeln!(w, "{l}")?;
        }
        w.flush()?;

        fs::write(dir.join("splits.json"), serde_json::to_string(&self.splits())?)?;
        Ok(())
    }

    /// Relabels node `i` as `perm[i]`, moving features, labels and masks along.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.num_nodes();
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let moved = |m: &[bool]| (0..n).map(|p| m[inv[p]]).collect::<Vec<_>>();
        Self {
            meta: self.meta.clone(),
            graph: self.graph.permuted(perm),
            features: self.features.select_rows(&inv),
            labels: inv.iter().map(|&i| self.labels[i]).collect(),
            train_mask: moved(&self.train_mask),
            val_mask: moved(&self.val_mask),
            test_mask: moved(&self.test_mask),
        }
    }

    /// Stable digest of the dataset contents, used for provenance lines.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.meta.name.as_bytes());
        for &o in self.graph.row_offsets() {
            h.update((o as u64).to_le_bytes());
        }
        for &c in self.graph.col_indices() {
            h.update((c as u64).to_le_bytes());
        }
        for x in self.features.as_slice() {
            h.update(x.to_le_bytes());
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    match fs::File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingFile(path.to_path_buf())),
        Err(e) => Err(e.into()),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::io::Read::read_to_string(&mut open(path)?, &mut s)?;
    Ok(s)
}

fn nonblank_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push((i + 1, t.to_string()));
        }
    }
    Ok(out)
}

/// Reads `u,v` pairs (comma or whitespace separated).
pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    let ctx = path.display().to_string();
    nonblank_lines(path)?
        .into_iter()
        .map(|(lineno, line)| {
            let mut parts = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty());
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| Error::parse(&ctx, format!("line {lineno}: expected two indices")))?
                    .parse()
                    .map_err(|e| Error::parse(&ctx, format!("line {lineno}: {e}")))
            };
            Ok((next()?, next()?))
        })
        .collect()
}

pub fn read_features(path: &Path) -> Result<Matrix> {
    let ctx = path.display().to_string();
    let rows = nonblank_lines(path)?
        .into_iter()
        .map(|(lineno, line)| {
            line.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse(&ctx, format!("line {lineno}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows).map_err(|e| Error::parse(ctx, e))
}

fn read_labels(path: &Path, num_classes: Option<usize>) -> Result<Vec<usize>> {
    let ctx = path.display().to_string();
    nonblank_lines(path)?
        .into_iter()
        .enumerate()
        .map(|(node, (lineno, line))| {
            let label: i64 = line
                .parse()
                .map_err(|e| Error::parse(&ctx, format!("line {lineno}: {e}")))?;
            let limit = num_classes.unwrap_or(usize::MAX);
            if label < 0 || label as u64 >= limit as u64 {
                return Err(Error::LabelOutOfRange {
                    node,
                    label,
                    num_classes: limit,
                });
            }
            Ok(label as usize)
        })
        .collect()
}

/// Loads a dataset directory, cross-checking every count against `meta.json`.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    for f in ["meta.json", "edges.csv", "features.csv", "labels.csv", "splits.json"] {
        if !dir.join(f).is_file() {
            return Err(Error::MissingFile(dir.join(f)));
        }
    }
    let meta: DatasetMeta =
        serde_json::from_str(&read_to_string(&dir.join("meta.json"))?).map_err(|e| Error::parse("meta.json", e))?;
    let edges = read_edge_list(&dir.join("edges.csv"))?;
    let features = read_features(&dir.join("features.csv"))?;
    let labels = read_labels(&dir.join("labels.csv"), Some(meta.num_classes))?;
    let splits: Splits =
        serde_json::from_str(&read_to_string(&dir.join("splits.json"))?).map_err(|e| Error::parse("splits.json", e))?;

    let checks = [
        ("num_edges", meta.num_edges, edges.len()),
        ("num_nodes (features.csv rows)", meta.num_nodes, features.rows()),
        ("num_nodes (labels.csv rows)", meta.num_nodes, labels.len()),
        ("feat_dim", meta.feat_dim, features.cols()),
    ];
    for (field, expected, found) in checks {
        if expected != found {
            return Err(Error::CountMismatch { field, expected, found });
        }
    }
    let mut ds = Dataset::new(meta.name.clone(), &edges, features, labels, meta.num_classes, &splits)?;
    ds.meta = meta;
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    ds.save(dir)
}

/// How to split nodes when converting loose files.
#[derive(Debug, Clone)]
pub enum SplitSource {
    File(std::path::PathBuf),
    Random {
        train: usize,
        val: usize,
        test: usize,
        seed: u64,
    },
}

/// Builds a dataset from an edge list, a feature CSV and a label CSV.
pub fn convert(
    name: &str,
    edges_path: &Path,
    features_path: &Path,
    labels_path: &Path,
    split: &SplitSource,
) -> Result<Dataset> {
    let edges = read_edge_list(edges_path)?;
    let features = read_features(features_path)?;
    let labels = read_labels(labels_path, None)?;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let splits = match split {
        SplitSource::File(p) => {
            serde_json::from_str(&read_to_string(p)?).map_err(|e| Error::parse(p.display().to_string(), e))?
        }
        SplitSource::Random { train, val, test, seed } => random_splits(labels.len(), (*train, *val, *test), *seed)?,
    };
    Dataset::new(name, &edges, features, labels, num_classes, &splits)
}

fn random_splits(n: usize, (train, val, test): (usize, usize, usize), seed: u64) -> Result<Splits> {
    if train + val + test > n {
        return Err(Error::Infeasible(format!(
            "split sizes {train}+{val}+{test} exceed {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5117_5eed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let take = |k: usize, from: &mut &[usize]| {
        let (head, tail) = from.split_at(k);
        *from = tail;
        let mut v = head.to_vec();
        v.sort_unstable();
        v
    };
    let mut rest: &[usize] = &order;
    Ok(Splits {
        train: take(train, &mut rest),
        val: take(val, &mut rest),
        test: take(test, &mut rest),
    })
}

/// Parameters of the stochastic-block generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub num_nodes: usize,
    pub avg_degree: f64,
    pub num_classes: usize,
    pub feat_dim: usize,
    /// Expected fraction of intra-class edges.
    pub homophily: f64,
    /// Standard deviation of the per-entry Gaussian feature noise.
    pub noise: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            num_nodes: 2700,
            avg_degree: 4.0,
            num_classes: 7,
            feat_dim: 64,
            homophily: 0.9,
            noise: 0.5,
            train: 140,
            val: 500,
            test: 1000,
            seed: 0,
        }
    }
}

impl SyntheticParams {
    /// Cora-sized defaults with a different seed.
    pub fn cora_like(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Scales node count, keeping split proportions of the Cora-sized default.
    pub fn with_nodes(self, num_nodes: usize) -> Self {
        let f = num_nodes as f64 / self.num_nodes as f64;
        Self {
            num_nodes,
            train: ((self.train as f64 * f).round() as usize).max(self.num_classes),
            val: (self.val as f64 * f).round() as usize,
            test: (self.test as f64 * f).round() as usize,
            ..self
        }
    }
}

/// Seeded stochastic-block graph with orthogonal class-mean features.
///
/// Exactly `round(avg_degree * n / 2)` distinct undirected edges are drawn; each
/// is intra-class with probability `homophily`. Class `c` has mean vector equal
/// to the normalized indicator of feature dimensions `k` with `k % C == c`, so
/// means are orthonormal whenever `feat_dim >= num_classes`.
pub fn generate_synthetic(p: &SyntheticParams) -> Result<Dataset> {
    let n = p.num_nodes;
    let c = p.num_classes;
    if c == 0 || n < c {
        return Err(Error::Infeasible(format!(
            "need num_nodes ({n}) >= num_classes ({c}) >= 1"
        )));
    }
    if p.feat_dim < c {
        return Err(Error::Infeasible(format!(
            "feat_dim ({}) must be at least num_classes ({c}) for orthogonal class means",
            p.feat_dim
        )));
    }
    if !(0.0..=1.0).contains(&p.homophily) || !p.avg_degree.is_finite() || p.avg_degree < 0.0 || p.noise < 0.0 {
        return Err(Error::Infeasible(
            "homophily must lie in [0,1]; avg_degree and noise must be nonnegative".into(),
        ));
    }
    if p.train + p.val + p.test > n {
        return Err(Error::Infeasible(format!(
            "split sizes {}+{}+{} exceed {n} nodes",
            p.train, p.val, p.test
        )));
    }
    let target = (p.avg_degree * n as f64 / 2.0).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }

    let intra_capacity: usize = members.iter().map(|m| m.len() * m.len().saturating_sub(1) / 2).sum();
    let total_capacity = n * (n - 1) / 2;
    let inter_capacity = total_capacity - intra_capacity;
    let want_intra = p.homophily * target as f64;
    let want_inter = (1.0 - p.homophily) * target as f64;
    // Rejection sampling slows sharply once a block is more than half full.
    if target > total_capacity
        || want_intra > 0.5 * intra_capacity as f64 + 1.0
        || want_inter > 0.5 * inter_capacity as f64 + 1.0
    {
        return Err(Error::Infeasible(format!(
            "{target} edges at homophily {} do not fit in {n} nodes over {c} classes",
            p.homophily
        )));
    }

    let mut seen = HashSet::with_capacity(target);
    let mut edges = Vec::with_capacity(target);
    let max_attempts = 50 * target + 1000;
    let mut attempts = 0;
    while edges.len() < target {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Infeasible("edge sampling did not converge".into()));
        }
        let u = rng.gen_range(0..n);
        let cu = labels[u];
        let v = if rng.gen::<f64>() < p.homophily {
            let m = &members[cu];
            if m.len() < 2 {
                continue;
            }
            m[rng.gen_range(0..m.len())]
        } else {
            if c < 2 {
                continue;
            }
            let mut other = rng.gen_range(0..c - 1);
            if other >= cu {
                other += 1;
            }
            let m = &members[other];
            m[rng.gen_range(0..m.len())]
        };
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        }
    }

    let block = |class: usize| (0..p.feat_dim).filter(|k| k % c == class).count() as f64;
    let scale: Vec<f64> = (0..c).map(|cl| 1.0 / block(cl).sqrt()).collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let features = Matrix::from_fn(n, p.feat_dim, |i, k| {
        let mean = if k % c == labels[i] { scale[labels[i]] } else { 0.0 };
        let z: f64 = normal.sample(&mut rng);
        mean + p.noise * z
    });

    let splits = random_splits(n, (p.train, p.val, p.test), p.seed)?;
    let name = format!("synthetic-n{n}-q{}-h{}-s{}", p.avg_degree, p.homophily, p.seed);
    Dataset::new(name, &edges, features, labels, c, &splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let features =
            Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.25, 2.0], vec![0.1, 0.2], vec![3.0, -1.0 / 3.0]]).unwrap();
        let splits = Splits {
            train: vec![0, 1],
            val: vec![2],
            test: vec![3],
        };
        Dataset::new("toy", &[(0, 1), (1, 2), (2, 3)], features, vec![0, 1, 0, 1], 2, &splits).unwrap()
    }

    #[test]
    fn toy_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn missing_file_is_distinct() {
        let dir = tempfile::tempdir().unwrap();
        toy().save(dir.path()).unwrap();
        fs::remove_file(dir.path().join("labels.csv")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::MissingFile(_))));
    }

    #[test]
    fn overlapping_splits_rejected() {
        let dir = tempfile::tempdir().unwrap();
        toy().save(dir.path()).unwrap();
        fs::write(
            dir.path().join("splits.json"),
            r#"{"train":[0,1],"val":[0],"test":[3]}"#,
        )
        .unwrap();
        match load_dataset(dir.path()) {
            Err(Error::SplitOverlap { node: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn meta_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        toy().save(dir.path()).unwrap();
        fs::write(
            dir.path().join("meta.json"),
            r#"{"name":"toy","num_nodes":4,"num_edges":5,"feat_dim":2,"num_classes":2}"#,
        )
        .unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::CountMismatch {
                field: "num_edges",
                expected: 5,
                found: 3
            })
        ));
    }

    #[test]
    fn label_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        toy().save(dir.path()).unwrap();
        fs::write(dir.path().join("labels.csv"), "0\n1\n2\n0\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::LabelOutOfRange { node: 2, label: 2, .. })
        ));
    }

    #[test]
    fn noise_free_fully_homophilous() {
        let p = SyntheticParams {
            num_nodes: 200,
            avg_degree: 4.0,
            num_classes: 4,
            feat_dim: 8,
            homophily: 1.0,
            noise: 0.0,
            train: 20,
            val: 40,
            test: 80,
            seed: 3,
        };
        let ds = generate_synthetic(&p).unwrap();
        for (u, v) in ds.graph.edges() {
            assert_eq!(ds.labels[u], ds.labels[v]);
        }
        for i in 0..200 {
            for j in 0..200 {
                if ds.labels[i] == ds.labels[j] {
                    assert_eq!(ds.features.row(i), ds.features.row(j));
                }
            }
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let p = SyntheticParams {
            num_nodes: 400,
            seed: 11,
            train: 40,
            val: 100,
            test: 200,
            ..SyntheticParams::default()
        };
        let a = generate_synthetic(&p).unwrap();
        let b = generate_synthetic(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_hits_average_degree() {
        for seed in 0..20 {
            let p = SyntheticParams {
                num_nodes: 1000,
                avg_degree: 4.0,
                seed,
                train: 100,
                val: 200,
                test: 300,
                ..SyntheticParams::default()
            };
            let q = generate_synthetic(&p).unwrap().graph.degree_stats().avg_degree_q;
            assert!((q - 4.0).abs() <= 0.4, "seed {seed}: q = {q}");
        }
    }

    #[test]
    fn generator_rejects_infeasible() {
        let p = SyntheticParams {
            num_nodes: 10,
            avg_degree: 9.5,
            num_classes: 2,
            feat_dim: 4,
            train: 2,
            val: 2,
            test: 2,
            ..SyntheticParams::default()
        };
        assert!(matches!(generate_synthetic(&p), Err(Error::Infeasible(_))));
        let p = SyntheticParams {
            num_nodes: 3,
            num_classes: 4,
            ..SyntheticParams::default()
        };
        assert!(matches!(generate_synthetic(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn convert_counts_match_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        fs::write(d.join("e.csv"), "0,1\n1 2\n2,0\n0,1\n").unwrap();
        fs::write(d.join("f.csv"), "1,0\n0,1\n1,1\n").unwrap();
        fs::write(d.join("l.csv"), "0\n1\n2\n").unwrap();
        let ds = convert(
            "tri",
            &d.join("e.csv"),
            &d.join("f.csv"),
            &d.join("l.csv"),
            &SplitSource::Random {
                train: 1,
                val: 1,
                test: 1,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(ds.meta.num_nodes, 3);
        assert_eq!(ds.meta.num_edges, 4);
        assert_eq!(ds.graph.num_undirected_edges(), 3);
        assert_eq!(ds.meta.num_classes, 3);
        assert_eq!(ds.meta.feat_dim, 2);
    }
}
