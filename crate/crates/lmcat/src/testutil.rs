//! Small shared fixtures for unit tests.

use crate::data::GenConfig;
use crate::model::{AdapterKind, Modality, ModelConfig, TokenReduce};

/// 8-dim, 2-layer, 4x4-patch model over the standard sar/optical pair.
pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        embed_dim: 8,
        n_layers: 2,
        n_heads: 2,
        patch_size: 4,
        classes: 3,
        modalities: vec![Modality::new("sar", 2), Modality::new("optical", 10)],
        adapter: AdapterKind::Msa { hidden: 4 },
        cross_modal: true,
        contrastive: true,
        token_reduce: Some(TokenReduce {
            after_layer: 1,
            factor: 2,
        }),
        tau: 0.1,
    }
}

/// Matching generator: 3 classes on an 8x8 canvas with 4x4 patches.
pub fn tiny_gen() -> GenConfig {
    GenConfig {
        classes: 3,
        canvas: 8,
        patch: 4,
        ..GenConfig::default()
    }
}
