//! Model assembly: architecture variants, adaptive depth selection, seeded
//! initialization and the full forward pass.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{
    grad_check, require_deterministic, Activation, EdgeSegments, GradCheckReport, Matrix, Tape, Var,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::layers::{
    adgat_layer_forward, attention_segments, decoupled_propagate, fully_adjacent_segments, gat_layer_forward,
    AttentionParams, HeadCombine, HeadParams, ResidualKind, ResidualMode, DEFAULT_FA_CAP,
};

/// Upper clamp for the adaptive depth rule.
pub const DEFAULT_MAX_DEPTH: usize = 16;

/// Cap on the summed hidden width of the width-doubling variant.
pub const WIDTH_CAP: usize = 1 << 20;

/// Depth suggested by graph sparsity.
///
/// With average degree `q = 2|E|/|V|`, returns `L = ln(1 − |V| + 2|E|) / ln q`
/// and that value rounded half up and clamped to `[1, max_depth]`.
pub fn adaptive_depth_with_max(num_nodes: usize, num_edges: usize, max_depth: usize) -> Result<(f64, usize)> {
    if num_nodes == 0 {
        return Err(Error::DepthDomain("graph has no nodes".into()));
    }
    let n = num_nodes as f64;
    let e = num_edges as f64;
    let q = 2.0 * e / n;
    if q <= 1.0 {
        return Err(Error::DepthDomain(format!("average degree {q:.4} is not above 1")));
    }
    let arg = 1.0 - n + 2.0 * e;
    if arg <= 1.0 {
        return Err(Error::DepthDomain(format!(
            "log argument 1 - |V| + 2|E| = {arg} is not above 1"
        )));
    }
    let l_real = arg.ln() / q.ln();
    let selected = ((l_real + 0.5).floor() as usize).clamp(1, max_depth.max(1));
    Ok((l_real, selected))
}

/// [`adaptive_depth_with_max`] with the default clamp of 16.
pub fn adaptive_depth(num_nodes: usize, num_edges: usize) -> Result<(f64, usize)> {
    adaptive_depth_with_max(num_nodes, num_edges, DEFAULT_MAX_DEPTH)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Plain stack of attention layers, the last one producing logits.
    Gat,
    /// Pre-MLP, residual attention stack, post-MLP.
    Adgat,
    /// Attention layers whose width doubles at every layer, then a classifier.
    GatWidthDoubling,
    /// Plain stack whose last layer attends over the complete graph.
    GatFa,
    /// One transform, then repeated transform-free propagation.
    GatDecoupled,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Gat,
        Variant::Adgat,
        Variant::GatWidthDoubling,
        Variant::GatFa,
        Variant::GatDecoupled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gat => "gat",
            Variant::Adgat => "adgat",
            Variant::GatWidthDoubling => "gat_width_doubling",
            Variant::GatFa => "gat_fa",
            Variant::GatDecoupled => "gat_decoupled",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or(Error::Unknown {
            kind: "variant",
            name: s,
        })
    }
}

/// A fixed layer count or the sparsity-based rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DepthRepr", into = "DepthRepr")]
pub enum Depth {
    Fixed(usize),
    Adaptive,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DepthRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<DepthRepr> for Depth {
    type Error = Error;
    fn try_from(r: DepthRepr) -> Result<Self> {
        match r {
            DepthRepr::Count(n) => Ok(Depth::Fixed(n)),
            DepthRepr::Name(s) => s.parse(),
        }
    }
}

impl From<Depth> for DepthRepr {
    fn from(d: Depth) -> Self {
        match d {
            Depth::Fixed(n) => DepthRepr::Count(n),
            Depth::Adaptive => DepthRepr::Name("adaptive".into()),
        }
    }
}

impl FromStr for Depth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("adaptive") {
            return Ok(Depth::Adaptive);
        }
        s.parse().map(Depth::Fixed).map_err(|_| Error::Unknown {
            kind: "depth",
            name: s.to_string(),
        })
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Fixed(n) => write!(f, "{n}"),
            Depth::Adaptive => f.write_str("adaptive"),
        }
    }
}

/// Architecture description; serializes as flat keys in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub depth: Depth,
    /// Per-head width of hidden attention layers (base width for width doubling).
    pub hidden_dim: usize,
    pub heads: usize,
    pub residual: ResidualKind,
    pub beta: f64,
    pub attention_activation: Activation,
    pub pre_mlp_layers: usize,
    pub post_mlp_layers: usize,
    pub dropout: f64,
    /// Propagation steps of the decoupled variant; defaults to the depth.
    pub d_p: Option<usize>,
    pub fa_cap: usize,
    pub max_depth: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Gat,
            depth: Depth::Fixed(2),
            hidden_dim: 8,
            heads: 1,
            residual: ResidualKind::InitialResidual,
            beta: 0.5,
            attention_activation: Activation::default(),
            pre_mlp_layers: 1,
            post_mlp_layers: 1,
            dropout: 0.0,
            d_p: None,
            fa_cap: DEFAULT_FA_CAP,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl ModelConfig {
    pub fn new(variant: Variant, depth: usize) -> Self {
        Self {
            variant,
            depth: Depth::Fixed(depth),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if self.heads == 0 {
            return bad("heads must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be a finite value >= 0");
        }
        if self.depth == Depth::Fixed(0) {
            return bad("depth must be at least 1");
        }
        if self.d_p == Some(0) {
            return bad("d_p must be at least 1");
        }
        if self.variant == Variant::Adgat && (self.pre_mlp_layers == 0 || self.post_mlp_layers == 0) {
            return bad("adgat needs at least one pre-MLP and one post-MLP layer");
        }
        Ok(())
    }

    /// Layer count for this config on a graph of the given size.
    pub fn resolve_depth(&self, num_nodes: usize, num_edges: usize) -> Result<usize> {
        match self.depth {
            Depth::Fixed(n) => Ok(n),
            Depth::Adaptive => Ok(adaptive_depth_with_max(num_nodes, num_edges, self.max_depth)?.1),
        }
    }

    fn residual_mode(&self) -> ResidualMode {
        ResidualMode {
            kind: self.residual,
            beta: self.beta,
        }
    }
}

/// One stage of the forward pass; fields index into the parameter list.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Linear {
        w: usize,
        b: usize,
        act: Activation,
        /// The output becomes the residual anchor for later attention layers.
        sets_anchor: bool,
    },
    Attention {
        heads: Vec<(usize, usize)>,
        sigma: Activation,
        combine: HeadCombine,
        residual: bool,
        fully_adjacent: bool,
    },
    Propagate {
        a: usize,
        steps: usize,
    },
}

/// Edge segments a model needs for one graph.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub seg: Arc<EdgeSegments>,
    pub fa: Option<Arc<EdgeSegments>>,
}

impl GraphContext {
    pub fn new(model: &Model, ds: &Dataset) -> Result<Self> {
        let fa = if model.uses_fully_adjacent() {
            Some(fully_adjacent_segments(ds.num_nodes(), model.config.fa_cap)?)
        } else {
            None
        };
        Ok(Self {
            seg: attention_segments(&ds.graph),
            fa,
        })
    }
}

/// Dropout applied to the inputs of every transforming layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub depth: usize,
    pub feat_dim: usize,
    pub num_classes: usize,
    params: Vec<Matrix>,
    names: Vec<String>,
    layers: Vec<LayerSpec>,
    first_attention_w: usize,
}

struct Builder {
    rng: ChaCha8Rng,
    params: Vec<Matrix>,
    names: Vec<String>,
}

impl Builder {
    fn glorot(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let m = Matrix::from_fn(rows, cols, |_, _| self.rng.gen_range(-limit..limit));
        self.push(name, m)
    }

    fn zeros(&mut self, name: String, rows: usize, cols: usize) -> usize {
        self.push(name, Matrix::zeros(rows, cols))
    }

    fn push(&mut self, name: String, m: Matrix) -> usize {
        self.params.push(m);
        self.names.push(name);
        self.params.len() - 1
    }

    fn linear(&mut self, layer: usize, d_in: usize, d_out: usize, act: Activation, sets_anchor: bool) -> LayerSpec {
        let w = self.glorot(format!("layer{layer}.w"), d_in, d_out);
        let b = self.zeros(format!("layer{layer}.b"), 1, d_out);
        LayerSpec::Linear { w, b, act, sets_anchor }
    }

    #[allow(clippy::too_many_arguments)]
    fn attention(
        &mut self,
        layer: usize,
        d_in: usize,
        d_head: usize,
        heads: usize,
        sigma: Activation,
        combine: HeadCombine,
        residual: bool,
        fully_adjacent: bool,
    ) -> LayerSpec {
        let heads = (0..heads)
            .map(|k| {
                let w = self.glorot(format!("layer{layer}.head{k}.w"), d_in, d_head);
                let a = self.glorot(format!("layer{layer}.head{k}.a"), 2 * d_head, 1);
                (w, a)
            })
            .collect();
        LayerSpec::Attention {
            heads,
            sigma,
            combine,
            residual,
            fully_adjacent,
        }
    }
}

/// Builds a model for `ds` with parameters drawn from `seed`.
///
/// Weights use uniform Glorot scaling, biases start at zero. Hidden attention
/// layers concatenate `heads` outputs of width `hidden_dim` each; layers that
/// emit logits average their heads.
pub fn build_model(config: &ModelConfig, ds: &Dataset, seed: u64) -> Result<Model> {
    config.validate()?;
    let depth = config.resolve_depth(ds.num_nodes(), ds.meta.num_edges)?;
    if depth == 0 {
        return Err(Error::Config("depth must be at least 1".into()));
    }
    let (f, c, h, nh) = (ds.feat_dim(), ds.num_classes(), config.hidden_dim, config.heads);
    let hw = h * nh;
    let elu = Activation::Elu;
    let id = Activation::Identity;
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        params: Vec::new(),
        names: Vec::new(),
    };
    let mut layers = Vec::new();
    let mut first_attention_w = None;
    let note_first = |spec: &LayerSpec, first: &mut Option<usize>| {
        if first.is_none() {
            if let LayerSpec::Attention { heads, .. } = spec {
                *first = Some(heads[0].0);
            }
        }
    };

    match config.variant {
        Variant::Gat | Variant::GatFa => {
            let mut d_in = f;
            for k in 0..depth {
                let last = k + 1 == depth;
                let fa = last && config.variant == Variant::GatFa;
                let spec = if last {
                    b.attention(k, d_in, c, nh, id, HeadCombine::Mean, false, fa)
                } else {
                    b.attention(k, d_in, h, nh, elu, HeadCombine::Concat, false, fa)
                };
                note_first(&spec, &mut first_attention_w);
                layers.push(spec);
                d_in = hw;
            }
        }
        Variant::GatWidthDoubling => {
            let units: usize = (0..depth)
                .map(|k| h.checked_shl(k as u32).unwrap_or(usize::MAX).saturating_mul(nh))
                .fold(0usize, |acc, u| acc.saturating_add(u));
            if units > WIDTH_CAP || depth >= usize::BITS as usize {
                return Err(Error::WidthTooLarge { units, cap: WIDTH_CAP });
            }
            let mut d_in = f;
            for k in 0..depth {
                let width = h << k;
                let spec = b.attention(k, d_in, width, nh, elu, HeadCombine::Concat, false, false);
                note_first(&spec, &mut first_attention_w);
                layers.push(spec);
                d_in = width * nh;
            }
            layers.push(b.linear(depth, d_in, c, id, false));
        }
        Variant::Adgat => {
            let mut idx = 0;
            let mut d_in = f;
            for k in 0..config.pre_mlp_layers {
                layers.push(b.linear(idx, d_in, hw, elu, k + 1 == config.pre_mlp_layers));
                d_in = hw;
                idx += 1;
            }
            for _ in 0..depth {
                let spec = b.attention(idx, hw, h, nh, elu, HeadCombine::Concat, true, false);
                note_first(&spec, &mut first_attention_w);
                layers.push(spec);
                idx += 1;
            }
            for k in 0..config.post_mlp_layers {
                let last = k + 1 == config.post_mlp_layers;
                let (d_out, act) = if last { (c, id) } else { (hw, elu) };
                layers.push(b.linear(idx, hw, d_out, act, false));
                idx += 1;
            }
        }
        Variant::GatDecoupled => {
            let et = b.linear(0, f, h, elu, false);
            let LayerSpec::Linear { w, .. } = et else {
                unreachable!()
            };
            first_attention_w = Some(w);
            layers.push(et);
            let a = b.glorot("layer1.a".into(), 2 * h, 1);
            layers.push(LayerSpec::Propagate {
                a,
                steps: config.d_p.unwrap_or(depth),
            });
            layers.push(b.linear(2, h, c, id, false));
        }
    }

    Ok(Model {
        config: config.clone(),
        depth,
        feat_dim: f,
        num_classes: c,
        params: b.params,
        names: b.names,
        layers,
        first_attention_w: first_attention_w.expect("every variant has a first transform"),
    })
}

impl Model {
    pub fn params(&self) -> &[Matrix] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params.iter().map(Matrix::shape).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Matrix::len).sum()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Index of the first attention layer's transform (the first head). The
    /// ADGAT pre-MLP is skipped; the decoupled variant reports its single
    /// transform.
    pub fn first_attention_weight(&self) -> usize {
        self.first_attention_w
    }

    /// Per-head output widths of the attention layers, in order.
    pub fn attention_widths(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Attention { heads, .. } => Some(self.params[heads[0].0].cols()),
                _ => None,
            })
            .collect()
    }

    pub fn uses_fully_adjacent(&self) -> bool {
        self.layers.iter().any(|l| {
            matches!(
                l,
                LayerSpec::Attention {
                    fully_adjacent: true,
                    ..
                }
            )
        })
    }

    /// Sets the residual strength used by subsequent forward passes.
    pub fn set_beta(&mut self, beta: f64) {
        self.config.beta = beta;
    }

    /// First 16 hex digits of SHA-256 over all parameter bits.
    pub fn params_digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.params {
            h.update((p.rows() as u64).to_le_bytes());
            h.update((p.cols() as u64).to_le_bytes());
            for v in p.as_slice() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Records the forward pass on `tape` using `params` as parameter leaves.
    pub fn forward_with(
        &self,
        tape: &mut Tape,
        params: &[Var],
        ctx: &GraphContext,
        features: &Matrix,
        dropout: Option<DropoutSpec>,
    ) -> Result<Var> {
        if params.len() != self.params.len() {
            return Err(Error::shape(
                "forward",
                format!("{} parameter leaves for {} parameters", params.len(), self.params.len()),
            ));
        }
        let mut rng = dropout.map(|d| ChaCha8Rng::seed_from_u64(d.seed));
        let mut h = tape.constant(features.clone());
        let mut anchor = h;
        let mode = self.config.residual_mode();
        for layer in &self.layers {
            if !matches!(layer, LayerSpec::Propagate { .. }) {
                if let (Some(d), Some(rng)) = (dropout, rng.as_mut()) {
                    h = apply_dropout(tape, h, d.rate, rng)?;
                }
            }
            h = match layer {
                &LayerSpec::Linear { w, b, act, sets_anchor } => {
                    let z = tape.linear(h, params[w], Some(params[b]))?;
                    let out = tape.activation(z, act);
                    if sets_anchor {
                        anchor = out;
                    }
                    out
                }
                LayerSpec::Attention {
                    heads,
                    sigma,
                    combine,
                    residual,
                    fully_adjacent,
                } => {
                    let seg = if *fully_adjacent {
                        ctx.fa
                            .as_ref()
                            .ok_or_else(|| Error::Config("graph context lacks fully-adjacent segments".into()))?
                    } else {
                        &ctx.seg
                    };
                    let p = AttentionParams {
                        heads: heads
                            .iter()
                            .map(|&(w, a)| HeadParams {
                                w: params[w],
                                a: params[a],
                            })
                            .collect(),
                        w_res: None,
                        attention_activation: self.config.attention_activation,
                    };
                    if *residual {
                        adgat_layer_forward(tape, h, anchor, &p, seg, mode, *sigma, *combine)?
                    } else {
                        gat_layer_forward(tape, h, &p, seg, *sigma, *combine)?
                    }
                }
                &LayerSpec::Propagate { a, steps } => {
                    decoupled_propagate(tape, h, params[a], self.config.attention_activation, &ctx.seg, steps)?
                }
            };
        }
        Ok(h)
    }

    /// Masked cross-entropy plus `weight_decay · ½‖θ‖²`.
    pub fn loss_with(
        &self,
        tape: &mut Tape,
        params: &[Var],
        logits: Var,
        labels: &[usize],
        mask: &[bool],
        weight_decay: f64,
    ) -> Result<Var> {
        let ce = tape.masked_cross_entropy(logits, labels, mask)?;
        if weight_decay == 0.0 {
            return Ok(ce);
        }
        let mut loss = ce;
        for &p in params {
            let sq = tape.sum_squares(p);
            let term = tape.scale(sq, 0.5 * weight_decay);
            loss = tape.add(loss, term)?;
        }
        Ok(loss)
    }

    /// Logits for every node. Dropout (at the configured rate) is applied only
    /// when `training`, with masks drawn from `seed`.
    pub fn forward(&self, ds: &Dataset, training: bool, seed: u64) -> Result<Matrix> {
        let ctx = GraphContext::new(self, ds)?;
        self.forward_ctx(&ctx, ds, training, seed)
    }

    pub fn forward_ctx(&self, ctx: &GraphContext, ds: &Dataset, training: bool, seed: u64) -> Result<Matrix> {
        let mut tape = Tape::new();
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let dropout = (training && self.config.dropout > 0.0).then_some(DropoutSpec {
            rate: self.config.dropout,
            seed,
        });
        let out = self.forward_with(&mut tape, &params, ctx, &ds.features, dropout)?;
        Ok(tape.value(out).clone())
    }
}

fn apply_dropout(tape: &mut Tape, x: Var, rate: f64, rng: &mut ChaCha8Rng) -> Result<Var> {
    if rate <= 0.0 {
        return Ok(x);
    }
    let (r, c) = tape.shape(x);
    let keep = 1.0 / (1.0 - rate);
    let mask = Matrix::from_fn(r, c, |_, _| if rng.gen::<f64>() < rate { 0.0 } else { keep });
    tape.dropout(x, mask)
}

/// Finite-difference check of the full model's training loss.
pub fn grad_check_model(
    model: &Model,
    ds: &Dataset,
    weight_decay: f64,
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    require_deterministic(model.config.dropout)?;
    let ctx = GraphContext::new(model, ds)?;
    grad_check(
        model.params(),
        |tape, params| {
            let logits = model.forward_with(tape, params, &ctx, &ds.features, None)?;
            model.loss_with(tape, params, logits, &ds.labels, &ds.train_mask, weight_decay)
        },
        eps,
        seed,
    )
}
