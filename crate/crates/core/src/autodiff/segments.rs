use crate::graph::AdjacencyCSR;

/// Edge array of a CSR graph viewed as per-destination segments.
///
/// Edge `k` in row `i` carries a message from `src[k] = col_indices[k]` into
/// `dst[k] = i`; segment `i` is `row_offsets[i]..row_offsets[i+1]`. Graphs are
/// symmetric, so in-edges and out-edges of a node coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSegments {
    row_offsets: Vec<usize>,
    src: Vec<usize>,
    dst: Vec<usize>,
}

impl EdgeSegments {
    pub fn new(graph: &AdjacencyCSR) -> Self {
        let row_offsets = graph.row_offsets().to_vec();
        let src = graph.col_indices().to_vec();
        let mut dst = Vec::with_capacity(src.len());
        for (i, w) in row_offsets.windows(2).enumerate() {
            dst.extend(std::iter::repeat_n(i, w[1] - w[0]));
        }
        Self { row_offsets, src, dst }
    }

    pub fn num_nodes(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    #[inline]
    pub fn range(&self, node: usize) -> std::ops::Range<usize> {
        self.row_offsets[node]..self.row_offsets[node + 1]
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }

    pub fn dst(&self) -> &[usize] {
        &self.dst
    }

    /// First node whose segment is empty, if any.
    pub fn first_empty(&self) -> Option<usize> {
        self.row_offsets.windows(2).position(|w| w[0] == w[1])
    }
}
