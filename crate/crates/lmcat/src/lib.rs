//! Lightweight multimodal contrastive attention transformer (L-MCAT).
//!
//! A desk-scale, dependency-light implementation of a two-modality
//! transformer for satellite patch classification:
//!
//! - [`tensor`]: dense tensors with tape-based reverse-mode gradients;
//! - [`adapters`]: modality-spectral adapters compressing raw channels into
//!   a shared embedding space;
//! - [`umaa`]: cross-modal attention with an attention-level contrastive
//!   alignment loss;
//! - [`model`]: the assembled classifier plus parameter/FLOP accounting and
//!   checkpointing;
//! - [`data`]: synthetic unpaired SAR/optical scenes, preprocessing,
//!   misalignment injection and dataset files;
//! - [`train`]: two-stage protocol (contrastive pretraining, frozen-backbone
//!   fine-tuning) with from-scratch AdamW/Adam;
//! - [`eval`]: metrics, misalignment robustness sweeps, label-efficiency
//!   grids and the component ablation harness.
//!
//! The companion guide under `book/` walks through each piece with runnable
//! examples; `lmcat-cli` exposes the full pipeline as a command line tool.

pub mod adapters;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod rng;
pub mod tensor;
#[cfg(test)]
pub(crate) mod testutil;
pub mod train;
pub mod umaa;

pub use error::{Error, Result};
pub use tensor::{Graph, Scalar, Tensor, Var};

/// Content hash identifying this build in run artifacts.
pub fn code_version_hash() -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).as_bytes());
    let d = h.finalize();
    d.iter().take(10).map(|b| format!("{b:02x}")).collect()
}
