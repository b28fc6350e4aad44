//! Undirected graph topology in compressed sparse row form.
//!
//! Graphs are always stored symmetrized and deduplicated. Self-loops are never
//! part of a stored edge list; they are appended per row on request, which is
//! what every attention layer needs so that each node has a nonempty
//! neighborhood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyCSR {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    has_self_loops: bool,
}

/// Summary of node degrees, self-loops excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    /// Average degree `2|E| / |V|`.
    pub avg_degree_q: f64,
    pub min_degree: usize,
    pub max_degree: usize,
    pub num_isolated: usize,
}

impl AdjacencyCSR {
    /// Builds a symmetric, deduplicated CSR from an undirected edge list.
    ///
    /// Each pair may appear in either orientation and any number of times.
    /// Explicit `(u, u)` pairs are dropped; pass `add_self_loops` to give every
    /// row its own index instead. Rows are sorted ascending.
    pub fn build(edges: &[(usize, usize)], num_nodes: usize, add_self_loops: bool) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::EdgeOutOfRange { u, v, num_nodes });
            }
            if u == v {
                continue;
            }
            rows[u].push(v);
            rows[v].push(u);
        }
        if add_self_loops {
            for (i, row) in rows.iter_mut().enumerate() {
                row.push(i);
            }
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(&row);
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            num_nodes,
            row_offsets,
            col_indices,
            has_self_loops: add_self_loops,
        })
    }

    /// Complete graph on `num_nodes` nodes, self-loops included.
    pub fn fully_adjacent(num_nodes: usize) -> Self {
        let row_offsets = (0..=num_nodes).map(|i| i * num_nodes).collect();
        let col_indices = (0..num_nodes).flat_map(|_| 0..num_nodes).collect();
        Self {
            num_nodes,
            row_offsets,
            col_indices,
            has_self_loops: true,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn has_self_loops(&self) -> bool {
        self.has_self_loops
    }

    /// Number of stored (directed) entries, self-loops included.
    pub fn num_entries(&self) -> usize {
        self.col_indices.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[node]..self.row_offsets[node + 1]]
    }

    /// Degree of `node` not counting its self-loop.
    pub fn degree(&self, node: usize) -> usize {
        let row = self.neighbors(node);
        row.len() - usize::from(self.has_self_loops && row.binary_search(&node).is_ok())
    }

    /// Number of undirected edges, self-loops excluded.
    pub fn num_undirected_edges(&self) -> usize {
        (0..self.num_nodes).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Each undirected edge once as `(u, v)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_undirected_edges());
        for u in 0..self.num_nodes {
            out.extend(self.neighbors(u).iter().filter(|&&v| u < v).map(|&v| (u, v)));
        }
        out
    }

    /// Same topology with a self-loop on every row.
    pub fn with_self_loops(&self) -> Self {
        if self.has_self_loops {
            return self.clone();
        }
        Self::build(&self.edges(), self.num_nodes, true).expect("indices already validated")
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let edges: Vec<_> = self.edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
        Self::build(&edges, self.num_nodes, self.has_self_loops).expect("permutation stays in range")
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees: Vec<usize> = (0..self.num_nodes).map(|i| self.degree(i)).collect();
        let total: usize = degrees.iter().sum();
        DegreeStats {
            avg_degree_q: if self.num_nodes == 0 {
                0.0
            } else {
                total as f64 / self.num_nodes as f64
            },
            min_degree: degrees.iter().copied().min().unwrap_or(0),
            max_degree: degrees.iter().copied().max().unwrap_or(0),
            num_isolated: degrees.iter().filter(|&&d| d == 0).count(),
        }
    }
}

/// Complete graph including self-loops; used by the fully-adjacent final layer.
pub fn make_fully_adjacent(num_nodes: usize) -> AdjacencyCSR {
    AdjacencyCSR::fully_adjacent(num_nodes)
}

pub fn build_csr(edges: &[(usize, usize)], num_nodes: usize, add_self_loops: bool) -> Result<AdjacencyCSR> {
    AdjacencyCSR::build(edges, num_nodes, add_self_loops)
}

/// Average degree from raw counts, `2|E| / |V|`.
pub fn average_degree(num_nodes: usize, num_edges: usize) -> f64 {
    2.0 * num_edges as f64 / num_nodes as f64
}
