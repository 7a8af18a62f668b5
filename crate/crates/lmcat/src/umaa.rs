//! Unpaired multimodal attention alignment.
//!
//! One layer runs multi-head attention where every modality attends to every
//! modality (itself included). The pre-softmax score matrices of the
//! cross-modal pairs additionally feed a contrastive alignment loss: within a
//! sample, token `n` of modality `i` and token `n` of modality `j` cover the
//! same spatial region, so the diagonal of `S = Q_i·K_jᵀ` holds the positive
//! pairs and each row is normalized against all other tokens at temperature
//! `tau`. The loss is the standard negated InfoNCE — nonnegative, minimized
//! toward zero as the diagonal dominates — accumulated over ordered pairs
//! `i ≠ j` and all heads, then normalized by `H·M·(M−1)`.
//!
//! No positional encodings enter anywhere: attention is purely content-based,
//! which is what makes the model indifferent to spatial misalignment between
//! modalities.

use rand::Rng;

use crate::adapters::glorot;
use crate::error::{Error, Result};
use crate::model::LAYER_NORM_EPS;
use crate::tensor::{Graph, Scalar, Tensor, Var};

/// Attention-alignment settings shared by all layers.
#[derive(Clone, Debug)]
pub struct AlignmentConfig {
    /// Contrastive temperature; must be positive.
    pub tau: f64,
    /// Attention head count; must divide the embedding dimension.
    pub heads: usize,
    /// When false, modalities only self-attend (ablation: standard MHA).
    pub cross_modal: bool,
    /// When false, the alignment loss is forced to zero (ablation).
    pub contrastive: bool,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            heads: 4,
            cross_modal: true,
            contrastive: true,
        }
    }
}

/// Weights of one attention-alignment layer.
///
/// Per head: query/key/value projections `[embed × d_k]` with
/// `d_k = embed / heads`; after head concatenation an output projection
/// `[embed × embed]`; a two-layer MLP `[embed × embed]` each with GELU
/// between; and two LayerNorm parameter sets. None of the projections carry
/// biases, so the matrix weight count per layer is `6·embed²` — 98,304 at
/// the default embed of 128.
#[derive(Clone, Debug)]
pub struct UmaaLayerWeights<T: Scalar> {
    pub wq: Vec<Tensor<T>>,
    pub wk: Vec<Tensor<T>>,
    pub wv: Vec<Tensor<T>>,
    pub wo: Tensor<T>,
    pub mlp_w1: Tensor<T>,
    pub mlp_w2: Tensor<T>,
    pub ln1_gamma: Tensor<T>,
    pub ln1_beta: Tensor<T>,
    pub ln2_gamma: Tensor<T>,
    pub ln2_beta: Tensor<T>,
}

impl<T: Scalar> UmaaLayerWeights<T> {
    pub fn init(embed: usize, heads: usize, rng: &mut impl Rng) -> Result<Self> {
        if heads == 0 || embed % heads != 0 {
            return Err(Error::Config(format!(
                "head count {heads} must divide embedding dim {embed}"
            )));
        }
        let dk = embed / heads;
        let mut proj = |_: usize| glorot::<T>(embed, dk, rng);
        Ok(Self {
            wq: (0..heads).map(&mut proj).collect(),
            wk: (0..heads).map(&mut proj).collect(),
            wv: (0..heads).map(&mut proj).collect(),
            wo: glorot(embed, embed, rng),
            mlp_w1: glorot(embed, embed, rng),
            mlp_w2: glorot(embed, embed, rng),
            ln1_gamma: Tensor::full(vec![embed], T::one()),
            ln1_beta: Tensor::zeros(vec![embed]),
            ln2_gamma: Tensor::full(vec![embed], T::one()),
            ln2_beta: Tensor::zeros(vec![embed]),
        })
    }

    /// Weight elements in the attention/MLP matrices (norms excluded).
    pub fn matrix_param_count(&self) -> usize {
        self.wq.iter().map(Tensor::numel).sum::<usize>()
            + self.wk.iter().map(Tensor::numel).sum::<usize>()
            + self.wv.iter().map(Tensor::numel).sum::<usize>()
            + self.wo.numel()
            + self.mlp_w1.numel()
            + self.mlp_w2.numel()
    }

    /// LayerNorm affine elements (gamma and beta of both norms).
    pub fn norm_param_count(&self) -> usize {
        self.ln1_gamma.numel()
            + self.ln1_beta.numel()
            + self.ln2_gamma.numel()
            + self.ln2_beta.numel()
    }
}

/// Graph handles for one layer's parameters, in the same shape as
/// [`UmaaLayerWeights`].
#[derive(Clone, Debug)]
pub struct UmaaLayerVars {
    pub wq: Vec<Var>,
    pub wk: Vec<Var>,
    pub wv: Vec<Var>,
    pub wo: Var,
    pub mlp_w1: Var,
    pub mlp_w2: Var,
    pub ln1_gamma: Var,
    pub ln1_beta: Var,
    pub ln2_gamma: Var,
    pub ln2_beta: Var,
}

/// Scaled-dot-product attention for one head: returns the attention matrix
/// `A = softmax(Q·Kᵀ/√d_k)` and the attended values `A·V`. Queries and keys
/// may come from the same or different modalities.
pub fn attention<T: Scalar>(g: &mut Graph<T>, q: Var, k: Var, v: Var) -> Result<(Var, Var)> {
    if g.value(q).rows() == 0 || g.value(k).rows() == 0 {
        return Err(Error::Contract("attention over zero tokens".into()));
    }
    let dk = g.value(q).cols();
    let scores = g.matmul_nt(q, k)?;
    let attn = g.softmax_rows(scores, 1.0 / (dk as f64).sqrt())?;
    let out = g.matmul(attn, v)?;
    Ok((attn, out))
}

/// Contrastive alignment loss between the queries of modality `i` and keys of
/// modality `j` (`i ≠ j`): token-index InfoNCE over `S = Q_i·K_jᵀ`.
pub fn alignment_loss<T: Scalar>(g: &mut Graph<T>, q_i: Var, k_j: Var, tau: f64) -> Result<Var> {
    if g.value(q_i).rows() != g.value(k_j).rows() {
        return Err(Error::Contract(format!(
            "alignment needs equal token counts, got {} vs {}",
            g.value(q_i).rows(),
            g.value(k_j).rows()
        )));
    }
    let scores = g.matmul_nt(q_i, k_j)?;
    g.info_nce_rows(scores, tau)
}

/// One attention-alignment layer over `M` modality token sets.
///
/// For every head and modality `i`, the update `ΔZ_i = Σ_j A_ij·V_j` runs
/// over all modalities `j` (including `j = i`); heads are concatenated and
/// projected through `wo`, residual-added, normalized, then followed by the
/// residual MLP block with its own norm. Alignment terms come from ordered
/// pairs `i ≠ j` only and reuse the attention score matrices before the
/// `1/√d_k` scaling. Returns the updated token sets and the layer loss
/// normalized by `H·M·(M−1)`; with a single modality the loss is exactly
/// zero and tokens are still updated by self-attention.
pub fn umaa_forward<T: Scalar>(
    g: &mut Graph<T>,
    tokens: &[Var],
    layer: &UmaaLayerVars,
    cfg: &AlignmentConfig,
) -> Result<(Vec<Var>, Var)> {
    let modalities = tokens.len();
    if modalities == 0 {
        return Err(Error::Contract("umaa_forward with zero modalities".into()));
    }
    let n = g.value(tokens[0]).rows();
    let embed = g.value(tokens[0]).cols();
    for &t in tokens {
        if g.value(t).rows() != n || g.value(t).cols() != embed {
            return Err(Error::Contract(format!(
                "token sets must share [N×embed], got {:?} vs [{n}, {embed}]",
                g.value(t).shape()
            )));
        }
    }
    if n == 0 {
        return Err(Error::Contract("umaa_forward over zero tokens".into()));
    }
    let heads = layer.wq.len();
    if heads == 0 || cfg.heads != heads {
        return Err(Error::Config(format!(
            "layer has {heads} heads, config says {}",
            cfg.heads
        )));
    }
    if cfg.tau <= 0.0 {
        return Err(Error::Config(format!(
            "temperature must be > 0, got {}",
            cfg.tau
        )));
    }

    // Per-head updates for each modality, concatenated after the head loop.
    let mut head_updates: Vec<Vec<Var>> = vec![Vec::with_capacity(heads); modalities];
    let mut loss_terms: Vec<Var> = Vec::new();
    for h in 0..heads {
        let q: Vec<Var> = tokens
            .iter()
            .map(|&z| g.matmul(z, layer.wq[h]))
            .collect::<Result<_>>()?;
        let k: Vec<Var> = tokens
            .iter()
            .map(|&z| g.matmul(z, layer.wk[h]))
            .collect::<Result<_>>()?;
        let v: Vec<Var> = tokens
            .iter()
            .map(|&z| g.matmul(z, layer.wv[h]))
            .collect::<Result<_>>()?;
        let dk = g.value(q[0]).cols();
        let inv_sqrt_dk = 1.0 / (dk as f64).sqrt();

        for i in 0..modalities {
            let mut delta: Option<Var> = None;
            for j in 0..modalities {
                if !cfg.cross_modal && j != i {
                    continue;
                }
                let scores = g.matmul_nt(q[i], k[j])?;
                let attn = g.softmax_rows(scores, inv_sqrt_dk)?;
                let attended = g.matmul(attn, v[j])?;
                delta = Some(match delta {
                    Some(d) => g.add(d, attended)?,
                    None => attended,
                });
                if cfg.cross_modal && cfg.contrastive && i != j {
                    loss_terms.push(g.info_nce_rows(scores, cfg.tau)?);
                }
            }
            head_updates[i].push(delta.expect("j loop ran at least once"));
        }
    }

    let mut updated = Vec::with_capacity(modalities);
    for (i, &z) in tokens.iter().enumerate() {
        let concat = g.concat_cols(&head_updates[i])?;
        let proj = g.matmul(concat, layer.wo)?;
        let residual = g.add(z, proj)?;
        let attn_out = g.layer_norm(residual, layer.ln1_gamma, layer.ln1_beta, LAYER_NORM_EPS)?;
        let hidden = g.matmul(attn_out, layer.mlp_w1)?;
        let act = g.gelu(hidden);
        let mlp_out = g.matmul(act, layer.mlp_w2)?;
        let with_mlp = g.add(attn_out, mlp_out)?;
        updated.push(g.layer_norm(with_mlp, layer.ln2_gamma, layer.ln2_beta, LAYER_NORM_EPS)?);
    }

    // Normalizer H·M(M−1); guarded: no ordered pairs means a zero loss.
    let loss = if loss_terms.is_empty() {
        g.input(Tensor::scalar(T::zero()))
    } else {
        let mut total = loss_terms[0];
        for &t in &loss_terms[1..] {
            total = g.add(total, t)?;
        }
        let norm = (heads * modalities * (modalities - 1)) as f64;
        g.scale(total, 1.0 / norm)
    };
    Ok((updated, loss))
}

/// Grid average pooling that merges tokens mid-network: `[N×d]` with
/// `N = g²` becomes `[(g/factor)² × d]`. Window and stride both equal
/// `factor`; applied identically to every modality so token indices keep
/// referring to the same pooled region across modalities.
pub fn token_reduce<T: Scalar>(g: &mut Graph<T>, tokens: Var, factor: usize) -> Result<Var> {
    g.pool_grid(tokens, factor)
}
