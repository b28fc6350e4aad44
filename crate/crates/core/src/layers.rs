//! Differentiable graph-attention layers.
//!
//! Every layer works on edge segments of a graph that already carries
//! self-loops, so each node attends at least to itself. Edge `k` in segment `i`
//! scores the pair `(i, src[k])` as `act(a[..d]·Wh_i + a[d..]·Wh_src)`.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, EdgeSegments, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::AdjacencyCSR;

/// One attention head: shared transform `w` (d × d') and attention vector `a`
/// (2d' × 1).
#[derive(Debug, Clone, Copy)]
pub struct HeadParams {
    pub w: Var,
    pub a: Var,
}

/// Tape handles for a full attention layer.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub heads: Vec<HeadParams>,
    /// Residual alignment `d_res × d_out`; identity when absent.
    pub w_res: Option<Var>,
    pub attention_activation: Activation,
}

impl AttentionParams {
    pub fn single(w: Var, a: Var, attention_activation: Activation) -> Self {
        Self {
            heads: vec![HeadParams { w, a }],
            w_res: None,
            attention_activation,
        }
    }
}

/// How per-head outputs are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadCombine {
    /// Hidden layers: heads side by side.
    Concat,
    /// Output layer: elementwise mean.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    None,
    /// Anchor is the layer's own input.
    InputResidual,
    /// Anchor is the stack's initial representation.
    #[default]
    InitialResidual,
}

impl FromStr for ResidualKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(ResidualKind::None),
            "input" | "input_residual" => Ok(ResidualKind::InputResidual),
            "initial" | "initial_residual" => Ok(ResidualKind::InitialResidual),
            _ => Err(Error::Unknown {
                kind: "residual mode",
                name: s.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for ResidualKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResidualKind::None => "none",
            ResidualKind::InputResidual => "input_residual",
            ResidualKind::InitialResidual => "initial_residual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualMode {
    pub kind: ResidualKind,
    pub beta: f64,
}

impl ResidualMode {
    pub const NONE: ResidualMode = ResidualMode {
        kind: ResidualKind::None,
        beta: 0.0,
    };

    /// Whether the residual term contributes anything at all.
    pub fn is_active(&self) -> bool {
        self.kind != ResidualKind::None && self.beta != 0.0
    }
}

/// Default cap on node count for a fully-adjacent layer (its edge count is N²).
pub const DEFAULT_FA_CAP: usize = 5000;

/// Segments over the complete graph, refusing graphs larger than `cap`.
pub fn fully_adjacent_segments(num_nodes: usize, cap: usize) -> Result<Arc<EdgeSegments>> {
    if num_nodes > cap {
        return Err(Error::FaTooLarge { nodes: num_nodes, cap });
    }
    Ok(Arc::new(EdgeSegments::new(&AdjacencyCSR::fully_adjacent(num_nodes))))
}

/// Segments of `graph` after adding self-loops.
pub fn attention_segments(graph: &AdjacencyCSR) -> Arc<EdgeSegments> {
    Arc::new(EdgeSegments::new(&graph.with_self_loops()))
}

/// Transformed features `Wh` and per-edge activated scores for one head.
pub fn attention_scores(
    tape: &mut Tape,
    h: Var,
    head: HeadParams,
    act: Activation,
    seg: &Arc<EdgeSegments>,
) -> Result<(Var, Var)> {
    let wh = tape.matmul(h, head.w)?;
    let raw = tape.edge_scores(wh, head.a, seg)?;
    Ok((wh, tape.activation(raw, act)))
}

/// Attention-weighted neighbor sum per head, merged, before any nonlinearity.
fn attend(
    tape: &mut Tape,
    h: Var,
    params: &AttentionParams,
    seg: &Arc<EdgeSegments>,
    combine: HeadCombine,
) -> Result<Var> {
    let mut outs = Vec::with_capacity(params.heads.len());
    for &head in &params.heads {
        let (wh, scores) = attention_scores(tape, h, head, params.attention_activation, seg)?;
        let alpha = tape.segment_softmax(scores, seg)?;
        outs.push(tape.neighbor_aggregate(alpha, wh, seg)?);
    }
    match combine {
        HeadCombine::Concat => tape.concat_cols(&outs),
        HeadCombine::Mean => tape.mean(&outs),
    }
}

/// `σ(Σ_j α_ij W h_j)`, heads merged by `combine`.
pub fn gat_layer_forward(
    tape: &mut Tape,
    h: Var,
    params: &AttentionParams,
    seg: &Arc<EdgeSegments>,
    sigma: Activation,
    combine: HeadCombine,
) -> Result<Var> {
    let pre = attend(tape, h, params, seg, combine)?;
    Ok(tape.activation(pre, sigma))
}

/// `σ(Σ_j α_ij W h_j + β W_res anchor_i)`.
///
/// The anchor is the layer input for [`ResidualKind::InputResidual`] and the
/// caller-supplied initial representation otherwise. When the residual is
/// inactive (`None` or `β = 0`) the recorded operations are exactly those of
/// [`gat_layer_forward`].
#[allow(clippy::too_many_arguments)]
pub fn adgat_layer_forward(
    tape: &mut Tape,
    h: Var,
    initial: Var,
    params: &AttentionParams,
    seg: &Arc<EdgeSegments>,
    mode: ResidualMode,
    sigma: Activation,
    combine: HeadCombine,
) -> Result<Var> {
    let pre = attend(tape, h, params, seg, combine)?;
    if !mode.is_active() {
        return Ok(tape.activation(pre, sigma));
    }
    let anchor = match mode.kind {
        ResidualKind::InputResidual => h,
        _ => initial,
    };
    let aligned = match params.w_res {
        Some(w) => tape.matmul(anchor, w)?,
        None => {
            let (a, p) = (tape.shape(anchor), tape.shape(pre));
            if a != p {
                return Err(Error::shape(
                    "adgat_layer_forward",
                    format!("anchor {a:?} does not match output {p:?} and no residual transform is set"),
                ));
            }
            anchor
        }
    };
    let scaled = tape.scale(aligned, mode.beta);
    let sum = tape.add(pre, scaled)?;
    Ok(tape.activation(sum, sigma))
}

/// Repeated attention propagation without a transform.
///
/// Each of the `steps` iterations rescores edges on the current
/// representation with the shared vector `a` (identity transform) and replaces
/// every row by its attention-weighted neighborhood sum. No nonlinearity is
/// applied between steps.
pub fn decoupled_propagate(
    tape: &mut Tape,
    h: Var,
    a: Var,
    act: Activation,
    seg: &Arc<EdgeSegments>,
    steps: usize,
) -> Result<Var> {
    if steps == 0 {
        return Err(Error::Config("propagation depth must be at least 1".into()));
    }
    let mut z = h;
    for _ in 0..steps {
        let raw = tape.edge_scores(z, a, seg)?;
        let scores = tape.activation(raw, act);
        let alpha = tape.segment_softmax(scores, seg)?;
        z = tape.neighbor_aggregate(alpha, z, seg)?;
    }
    Ok(z)
}
