//! The assembled classifier: adapters, a stack of attention-alignment
//! layers with optional mid-network token reduction, mean pooling over all
//! tokens of all modalities, and a linear head. Also home to the parameter
//! and FLOP accounting plus checkpoint persistence.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use crate::adapters::{self, linear_adapter_forward, msa_forward};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Graph, Scalar, Tensor, Var};
use crate::umaa::{self, AlignmentConfig, UmaaLayerVars, UmaaLayerWeights};

/// LayerNorm variance floor used everywhere in the model.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// One input modality: a name used in artifacts plus its raw channel count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Modality {
    pub name: String,
    pub channels: usize,
}

impl Modality {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            name: name.to_string(),
            channels,
        }
    }
}

/// Adapter flavor: the two-conv spectral adapter or a single linear
/// projection (the adapter-ablation variant).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdapterKind {
    Msa { hidden: usize },
    Linear,
}

/// Mid-network token pooling: applied to every modality after `after_layer`
/// layers (1-based count of completed layers).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenReduce {
    pub after_layer: usize,
    pub factor: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub patch_size: usize,
    pub classes: usize,
    pub modalities: Vec<Modality>,
    pub adapter: AdapterKind,
    /// When false, modalities only self-attend (standard MHA ablation).
    pub cross_modal: bool,
    /// When false, the alignment loss is forced to zero (ablation).
    pub contrastive: bool,
    pub token_reduce: Option<TokenReduce>,
    pub tau: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 128,
            n_layers: 4,
            n_heads: 4,
            patch_size: 16,
            classes: 11,
            modalities: vec![Modality::new("sar", 2), Modality::new("optical", 10)],
            adapter: AdapterKind::Msa { hidden: 4 },
            cross_modal: true,
            contrastive: true,
            token_reduce: Some(TokenReduce {
                after_layer: 2,
                factor: 2,
            }),
            tau: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.embed_dim % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "head count {} must divide embedding dim {}",
                self.n_heads, self.embed_dim
            )));
        }
        if self.patch_size == 0 || self.classes == 0 || self.n_layers == 0 {
            return Err(Error::Config(
                "patch size, class count and layer count must be positive".into(),
            ));
        }
        if self.modalities.is_empty() {
            return Err(Error::Config("at least one modality required".into()));
        }
        for m in &self.modalities {
            if m.channels == 0 {
                return Err(Error::Config(format!(
                    "modality {} has no channels",
                    m.name
                )));
            }
        }
        if let AdapterKind::Msa { hidden } = self.adapter {
            if hidden == 0 {
                return Err(Error::Config(
                    "adapter hidden width must be positive".into(),
                ));
            }
        }
        if let Some(tr) = self.token_reduce {
            if tr.factor == 0 || self.patch_size % tr.factor != 0 {
                return Err(Error::Config(format!(
                    "token reduction factor {} must divide patch size {}",
                    tr.factor, self.patch_size
                )));
            }
            if tr.after_layer == 0 || tr.after_layer > self.n_layers {
                return Err(Error::Config(format!(
                    "token reduction after layer {} outside 1..={}",
                    tr.after_layer, self.n_layers
                )));
            }
        }
        if self.tau <= 0.0 {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn tokens_per_modality(&self) -> usize {
        self.patch_size * self.patch_size
    }

    fn alignment(&self) -> AlignmentConfig {
        AlignmentConfig {
            tau: self.tau,
            heads: self.n_heads,
            cross_modal: self.cross_modal,
            contrastive: self.contrastive,
        }
    }

    /// Early-fusion comparison baseline: all channels concatenated into one
    /// 12-channel pseudo-modality behind a single shared adapter, same depth,
    /// no cross-modal attention and no alignment loss by construction.
    pub fn early_fusion(classes: usize) -> Self {
        Self {
            modalities: vec![Modality::new("fused", 12)],
            classes,
            ..Self::default()
        }
    }
}

/// Ablation variants of the architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// Per-modality self-attention only; no cross-modal terms and no loss.
    NoUmaa,
    /// Cross-modal attention kept, alignment loss forced to zero.
    NoContrastive,
    /// Adapters replaced by one linear projection per modality.
    NoMsa,
    /// Mid-network token reduction disabled.
    NoTokenReduce,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoUmaa,
        Variant::NoContrastive,
        Variant::NoMsa,
        Variant::NoTokenReduce,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Variant::Full),
            "no_umaa" => Ok(Variant::NoUmaa),
            "no_contrastive" => Ok(Variant::NoContrastive),
            "no_msa" => Ok(Variant::NoMsa),
            "no_token_reduce" => Ok(Variant::NoTokenReduce),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected full | no_umaa | no_contrastive | no_msa | no_token_reduce)"
            ))),
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoUmaa => "no_umaa",
            Variant::NoContrastive => "no_contrastive",
            Variant::NoMsa => "no_msa",
            Variant::NoTokenReduce => "no_token_reduce",
        }
    }

    /// Row label used in ablation reports.
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoUmaa => "-U-MAA",
            Variant::NoContrastive => "-Contrastive",
            Variant::NoMsa => "-MSA",
            Variant::NoTokenReduce => "-TokenReduction",
        }
    }

    pub fn apply(&self, mut cfg: ModelConfig) -> ModelConfig {
        match self {
            Variant::Full => {}
            Variant::NoUmaa => {
                cfg.cross_modal = false;
                cfg.contrastive = false;
            }
            Variant::NoContrastive => {
                cfg.contrastive = false;
            }
            Variant::NoMsa => {
                cfg.adapter = AdapterKind::Linear;
            }
            Variant::NoTokenReduce => {
                cfg.token_reduce = None;
            }
        }
        cfg
    }
}

/// Build a model for a named ablation variant of `base`.
pub fn build_variant<T: Scalar>(
    variant: Variant,
    base: &ModelConfig,
    seed: u64,
) -> Result<Model<T>> {
    Model::init(variant.apply(base.clone()), seed)
}

/// Training stage recorded in checkpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Initialized,
    Pretrained,
    Finetuned,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Initialized => "initialized",
            Stage::Pretrained => "pretrained",
            Stage::Finetuned => "finetuned",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "initialized" => Ok(Stage::Initialized),
            "pretrained" => Ok(Stage::Pretrained),
            "finetuned" => Ok(Stage::Finetuned),
            other => Err(Error::Config(format!("unknown stage '{other}'"))),
        }
    }
}

/// Parameter grouping for freezing, counting and reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamGroup {
    /// Adapter projection weights of modality `i`.
    AdapterWeight(usize),
    /// Adapter modality-norm affine parameters of modality `i`.
    AdapterNorm(usize),
    /// Attention/MLP matrices of layer `l`.
    AttentionWeight(usize),
    /// LayerNorm affine parameters of layer `l`.
    AttentionNorm(usize),
    Head,
}

impl ParamGroup {
    /// Everything except the classification head, i.e. what the two-stage
    /// protocol freezes during fine-tuning.
    pub fn is_backbone(&self) -> bool {
        !matches!(self, ParamGroup::Head)
    }
}

/// One named parameter tensor.
#[derive(Clone, Debug)]
pub struct ParamEntry<T: Scalar> {
    pub name: String,
    pub group: ParamGroup,
    pub tensor: Tensor<T>,
}

/// The full model: configuration plus named parameters in a fixed,
/// checkpoint-stable order.
#[derive(Clone, Debug)]
pub struct Model<T: Scalar> {
    config: ModelConfig,
    params: Vec<ParamEntry<T>>,
    pub seed: u64,
    pub stage: Stage,
}

impl<T: Scalar> Model<T> {
    /// Fresh model with seed-deterministic Glorot-normal weights (LayerNorm
    /// affines start at identity).
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(seed, "init", 0);
        let mut params = Vec::new();
        let embed = config.embed_dim;

        for (mi, m) in config.modalities.iter().enumerate() {
            match config.adapter {
                AdapterKind::Msa { hidden } => {
                    let w = adapters::MsaWeights::<T>::init(m.channels, hidden, embed, &mut r)?;
                    params.push(ParamEntry {
                        name: format!("adapter.{}.w1", m.name),
                        group: ParamGroup::AdapterWeight(mi),
                        tensor: w.w1,
                    });
                    params.push(ParamEntry {
                        name: format!("adapter.{}.w2", m.name),
                        group: ParamGroup::AdapterWeight(mi),
                        tensor: w.w2,
                    });
                }
                AdapterKind::Linear => {
                    params.push(ParamEntry {
                        name: format!("adapter.{}.w", m.name),
                        group: ParamGroup::AdapterWeight(mi),
                        tensor: adapters::glorot(embed, m.channels, &mut r),
                    });
                }
            }
            params.push(ParamEntry {
                name: format!("adapter.{}.norm.gamma", m.name),
                group: ParamGroup::AdapterNorm(mi),
                tensor: Tensor::full(vec![embed], T::one()),
            });
            params.push(ParamEntry {
                name: format!("adapter.{}.norm.beta", m.name),
                group: ParamGroup::AdapterNorm(mi),
                tensor: Tensor::zeros(vec![embed]),
            });
        }

        for l in 0..config.n_layers {
            let w = UmaaLayerWeights::<T>::init(embed, config.n_heads, &mut r)?;
            let mut push = |name: String, group: ParamGroup, tensor: Tensor<T>| {
                params.push(ParamEntry {
                    name,
                    group,
                    tensor,
                })
            };
            for (h, t) in w.wq.into_iter().enumerate() {
                push(
                    format!("layer.{l}.wq.{h}"),
                    ParamGroup::AttentionWeight(l),
                    t,
                );
            }
            for (h, t) in w.wk.into_iter().enumerate() {
                push(
                    format!("layer.{l}.wk.{h}"),
                    ParamGroup::AttentionWeight(l),
                    t,
                );
            }
            for (h, t) in w.wv.into_iter().enumerate() {
                push(
                    format!("layer.{l}.wv.{h}"),
                    ParamGroup::AttentionWeight(l),
                    t,
                );
            }
            push(
                format!("layer.{l}.wo"),
                ParamGroup::AttentionWeight(l),
                w.wo,
            );
            push(
                format!("layer.{l}.mlp.w1"),
                ParamGroup::AttentionWeight(l),
                w.mlp_w1,
            );
            push(
                format!("layer.{l}.mlp.w2"),
                ParamGroup::AttentionWeight(l),
                w.mlp_w2,
            );
            push(
                format!("layer.{l}.norm1.gamma"),
                ParamGroup::AttentionNorm(l),
                w.ln1_gamma,
            );
            push(
                format!("layer.{l}.norm1.beta"),
                ParamGroup::AttentionNorm(l),
                w.ln1_beta,
            );
            push(
                format!("layer.{l}.norm2.gamma"),
                ParamGroup::AttentionNorm(l),
                w.ln2_gamma,
            );
            push(
                format!("layer.{l}.norm2.beta"),
                ParamGroup::AttentionNorm(l),
                w.ln2_beta,
            );
        }

        params.push(ParamEntry {
            name: "head.w".to_string(),
            group: ParamGroup::Head,
            tensor: adapters::glorot(embed, config.classes, &mut r), // [embed×classes]
        });

        Ok(Self {
            config,
            params,
            seed,
            stage: Stage::Initialized,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.params
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.params
    }

    pub fn param_by_name(&self, name: &str) -> Option<&ParamEntry<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Trainability mask over the fixed parameter order.
    pub fn mask(&self, trainable: impl Fn(ParamGroup) -> bool) -> Vec<bool> {
        self.params.iter().map(|p| trainable(p.group)).collect()
    }

    /// Registers every parameter as a graph leaf, in parameter order.
    pub fn bind(&self) -> BoundModel<'_, T> {
        let mut graph = Graph::new();
        let param_vars = self
            .params
            .iter()
            .map(|p| graph.param(p.tensor.clone()))
            .collect();
        BoundModel {
            graph,
            param_vars,
            model: self,
        }
    }

    /// Inference: logits and mean alignment loss for one sample. `patches`
    /// holds one `[C_m × patch × patch]` tensor per configured modality.
    pub fn forward(&self, patches: &[Tensor<T>]) -> Result<(Tensor<T>, f64)> {
        let mut bm = self.bind();
        let out = bm.forward(patches, true)?;
        let logits = bm.graph.value(out.logits.expect("requested")).clone();
        let align = bm.graph.value(out.align_loss).item().as_f64();
        Ok((logits, align))
    }

    /// Pooled backbone features for one sample (used by head-only training).
    pub fn features(&self, patches: &[Tensor<T>]) -> Result<Tensor<T>> {
        let mut bm = self.bind();
        let out = bm.forward(patches, false)?;
        Ok(bm.graph.value(out.pooled).clone())
    }
}

/// Index map from the fixed parameter order to model structure. Derived
/// purely from the configuration, so checkpoints and graphs agree.
struct Layout {
    adapters: Vec<AdapterIdx>,
    layers: Vec<LayerIdx>,
    head: usize,
}

struct AdapterIdx {
    w1: usize,
    w2: Option<usize>,
    gamma: usize,
    beta: usize,
}

struct LayerIdx {
    wq: Vec<usize>,
    wk: Vec<usize>,
    wv: Vec<usize>,
    wo: usize,
    mlp_w1: usize,
    mlp_w2: usize,
    ln1_gamma: usize,
    ln1_beta: usize,
    ln2_gamma: usize,
    ln2_beta: usize,
}

fn layout(cfg: &ModelConfig) -> Layout {
    let mut next = 0usize;
    let mut take = |n: usize| {
        let start = next;
        next += n;
        start
    };
    let adapters = cfg
        .modalities
        .iter()
        .map(|_| match cfg.adapter {
            AdapterKind::Msa { .. } => AdapterIdx {
                w1: take(1),
                w2: Some(take(1)),
                gamma: take(1),
                beta: take(1),
            },
            AdapterKind::Linear => AdapterIdx {
                w1: take(1),
                w2: None,
                gamma: take(1),
                beta: take(1),
            },
        })
        .collect();
    let h = cfg.n_heads;
    let layers = (0..cfg.n_layers)
        .map(|_| LayerIdx {
            wq: (0..h).map(|_| take(1)).collect(),
            wk: (0..h).map(|_| take(1)).collect(),
            wv: (0..h).map(|_| take(1)).collect(),
            wo: take(1),
            mlp_w1: take(1),
            mlp_w2: take(1),
            ln1_gamma: take(1),
            ln1_beta: take(1),
            ln2_gamma: take(1),
            ln2_beta: take(1),
        })
        .collect();
    Layout {
        adapters,
        layers,
        head: take(1),
    }
}

/// Forward-pass handles into a bound graph.
pub struct BoundForward {
    pub logits: Option<Var>,
    pub align_loss: Var,
    pub pooled: Var,
}

/// A model whose parameters are registered in a fresh graph; one instance
/// per sample/step. Weights are immutable during the forward pass.
pub struct BoundModel<'a, T: Scalar> {
    pub graph: Graph<T>,
    pub param_vars: Vec<Var>,
    model: &'a Model<T>,
}

impl<T: Scalar> BoundModel<'_, T> {
    /// Builds the forward graph for one sample. Skipping logits also skips
    /// the head matmul, which pretraining never needs.
    pub fn forward(&mut self, patches: &[Tensor<T>], need_logits: bool) -> Result<BoundForward> {
        forward_graph(
            &mut self.graph,
            self.model.config(),
            &self.param_vars,
            patches,
            need_logits,
        )
    }
}

/// Builds one sample's forward pass into an existing graph whose
/// `param_vars` hold the parameters in model order. This is the single
/// forward implementation; [`BoundModel`] and the gradient-check harness
/// both go through it.
pub fn forward_graph<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &ModelConfig,
    param_vars: &[Var],
    patches: &[Tensor<T>],
    need_logits: bool,
) -> Result<BoundForward> {
    let lay = layout(cfg);
    if patches.len() != cfg.modalities.len() {
        return Err(Error::Config(format!(
            "model expects {} modality patches, got {}",
            cfg.modalities.len(),
            patches.len()
        )));
    }

    // adapters
    let mut tokens: Vec<Var> = Vec::with_capacity(patches.len());
    for (mi, patch) in patches.iter().enumerate() {
        let m = &cfg.modalities[mi];
        let expect = [m.channels, cfg.patch_size, cfg.patch_size];
        if patch.shape() != expect {
            return Err(Error::Config(format!(
                "modality {} expects patch {:?}, got {:?}",
                m.name,
                expect,
                patch.shape()
            )));
        }
        let x = g.input(adapters::pixel_matrix(patch)?);
        let a = &lay.adapters[mi];
        let toks = match a.w2 {
            Some(w2) => msa_forward(
                g,
                x,
                param_vars[a.w1],
                param_vars[w2],
                param_vars[a.gamma],
                param_vars[a.beta],
            )?,
            None => linear_adapter_forward(
                g,
                x,
                param_vars[a.w1],
                param_vars[a.gamma],
                param_vars[a.beta],
            )?,
        };
        tokens.push(toks);
    }

    // attention-alignment stack with optional token reduction
    let align_cfg = cfg.alignment();
    let mut layer_losses = Vec::with_capacity(cfg.n_layers);
    for (li, l) in lay.layers.iter().enumerate() {
        let vars = UmaaLayerVars {
            wq: l.wq.iter().map(|&i| param_vars[i]).collect(),
            wk: l.wk.iter().map(|&i| param_vars[i]).collect(),
            wv: l.wv.iter().map(|&i| param_vars[i]).collect(),
            wo: param_vars[l.wo],
            mlp_w1: param_vars[l.mlp_w1],
            mlp_w2: param_vars[l.mlp_w2],
            ln1_gamma: param_vars[l.ln1_gamma],
            ln1_beta: param_vars[l.ln1_beta],
            ln2_gamma: param_vars[l.ln2_gamma],
            ln2_beta: param_vars[l.ln2_beta],
        };
        let (updated, loss) = umaa::umaa_forward(g, &tokens, &vars, &align_cfg)?;
        tokens = updated;
        layer_losses.push(loss);
        if let Some(tr) = cfg.token_reduce {
            if tr.after_layer == li + 1 {
                tokens = tokens
                    .into_iter()
                    .map(|t| umaa::token_reduce(g, t, tr.factor))
                    .collect::<Result<_>>()?;
            }
        }
    }

    // alignment loss averaged over layers
    let mut align = layer_losses[0];
    for &l in &layer_losses[1..] {
        align = g.add(align, l)?;
    }
    let align = g.scale(align, 1.0 / cfg.n_layers as f64);

    // mean over all tokens of all modalities, weighted by token count
    let total_tokens: usize = tokens.iter().map(|&t| g.value(t).rows()).sum();
    let mut pooled: Option<Var> = None;
    for &t in &tokens {
        let w = g.value(t).rows() as f64 / total_tokens as f64;
        let m = g.mean_rows(t)?;
        let m = g.scale(m, w);
        pooled = Some(match pooled {
            Some(p) => g.add(p, m)?,
            None => m,
        });
    }
    let pooled = pooled.expect("at least one modality");

    let logits = if need_logits {
        Some(g.matmul(pooled, param_vars[lay.head])?)
    } else {
        None
    };
    Ok(BoundForward {
        logits,
        align_loss: align,
        pooled,
    })
}

/// Maps a stored sample onto the model's modality inputs by name: `sar` and
/// `optical` take the respective patches; `fused` takes their channel
/// concatenation (the early-fusion baseline).
pub fn sample_inputs<T: Scalar>(
    cfg: &ModelConfig,
    pair: &crate::data::PatchPair,
) -> Result<Vec<Tensor<T>>> {
    cfg.modalities
        .iter()
        .map(|m| match m.name.as_str() {
            "sar" => Ok(pair.sar.cast()),
            "optical" => Ok(pair.opt.cast()),
            "fused" => {
                let (s, o) = (&pair.sar, &pair.opt);
                let (ch_s, ch_o) = (s.shape()[0], o.shape()[0]);
                let hw = s.shape()[1] * s.shape()[2];
                let mut fused = Tensor::zeros(vec![ch_s + ch_o, s.shape()[1], s.shape()[2]]);
                for (dst, src) in fused.data_mut()[..ch_s * hw].iter_mut().zip(s.data()) {
                    *dst = T::from_f64(*src as f64);
                }
                for (dst, src) in fused.data_mut()[ch_s * hw..].iter_mut().zip(o.data()) {
                    *dst = T::from_f64(*src as f64);
                }
                Ok(fused)
            }
            other => Err(Error::Config(format!(
                "no input mapping for modality '{other}'"
            ))),
        })
        .collect()
}

/// Hex SHA-256 over the little-endian bytes of the parameters selected by
/// `filter`, in parameter order. Used to verify frozen groups.
pub fn hash_params<T: Scalar>(model: &Model<T>, filter: impl Fn(ParamGroup) -> bool) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in model.entries() {
        if filter(p.group) {
            h.update(p.name.as_bytes());
            h.update(p.tensor.le_bytes());
        }
    }
    let d = h.finalize();
    d.iter().map(|b| format!("{b:02x}")).collect()
}

// ---- accounting ---------------------------------------------------------

/// Exact element counts per named component, from brute-force enumeration
/// of the model's tensors.
#[derive(Clone, Debug)]
pub struct ParamBreakdown {
    pub rows: Vec<(String, usize)>,
    /// Attention/MLP matrix elements across all layers (norms excluded);
    /// 393,216 under the default configuration.
    pub attention_weights: usize,
    pub total: usize,
}

pub fn count_params<T: Scalar>(model: &Model<T>) -> ParamBreakdown {
    let cfg = model.config();
    let mut rows: Vec<(String, usize)> = Vec::new();
    let mut add = |key: String, n: usize| {
        if let Some(r) = rows.iter_mut().find(|(k, _)| *k == key) {
            r.1 += n;
        } else {
            rows.push((key, n));
        }
    };
    for p in model.entries() {
        let key = match p.group {
            ParamGroup::AdapterWeight(i) => format!("adapter ({})", cfg.modalities[i].name),
            ParamGroup::AdapterNorm(i) => format!("adapter norm ({})", cfg.modalities[i].name),
            ParamGroup::AttentionWeight(_) => "attention layers".to_string(),
            ParamGroup::AttentionNorm(_) => "attention norms".to_string(),
            ParamGroup::Head => "head".to_string(),
        };
        add(key, p.tensor.numel());
    }
    let attention_weights = model
        .entries()
        .iter()
        .filter(|p| matches!(p.group, ParamGroup::AttentionWeight(_)))
        .map(|p| p.tensor.numel())
        .sum();
    let total = model.entries().iter().map(|p| p.tensor.numel()).sum();
    ParamBreakdown {
        rows,
        attention_weights,
        total,
    }
}

/// Analytic multiply-accumulate estimate for one forward pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct FlopsEstimate {
    pub adapters: u64,
    pub qkv_projections: u64,
    pub attention: u64,
    pub output_and_mlp: u64,
    pub head: u64,
}

impl FlopsEstimate {
    pub fn total(&self) -> u64 {
        self.adapters + self.qkv_projections + self.attention + self.output_and_mlp + self.head
    }
}

/// MAC count for one forward pass under `cfg`, honoring its token-reduction
/// setting. Counts matrix products only; norms and softmaxes are omitted.
pub fn count_flops(cfg: &ModelConfig) -> FlopsEstimate {
    let e = cfg.embed_dim as u64;
    let m = cfg.modalities.len() as u64;
    let hw = cfg.tokens_per_modality() as u64;
    let dk = (cfg.embed_dim / cfg.n_heads) as u64;
    let heads = cfg.n_heads as u64;
    let mut est = FlopsEstimate::default();

    for modality in &cfg.modalities {
        let c = modality.channels as u64;
        est.adapters += match cfg.adapter {
            AdapterKind::Msa { hidden } => hw * (hidden as u64) * (c + e),
            AdapterKind::Linear => hw * c * e,
        };
    }

    let mut n = hw;
    for l in 0..cfg.n_layers {
        est.qkv_projections += m * 3 * n * e * e; // H heads × [N×e]·[e×dk]
        let pairs = if cfg.cross_modal { m * m } else { m };
        est.attention += pairs * heads * 2 * n * n * dk; // scores + A·V
        est.output_and_mlp += m * 3 * n * e * e; // wo + two MLP layers
        if let Some(tr) = cfg.token_reduce {
            if tr.after_layer == l + 1 {
                n /= (tr.factor * tr.factor) as u64;
            }
        }
    }

    est.head = e * cfg.classes as u64;
    est
}
