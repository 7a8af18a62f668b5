//! Two-stage training protocol.
//!
//! Stage one pretrains the backbone (adapters + attention layers) on
//! unlabeled pairs by minimizing the mean alignment loss with AdamW. Stage
//! two freezes the backbone and trains only the classification head with
//! cross-entropy under Adam; because the backbone never changes, its pooled
//! features are computed once per sample and the head trains on the cache —
//! observably identical to recomputing, just cheaper.
//!
//! Batch gradients are evaluated per sample (in parallel) and reduced in
//! sample order, so runs are deterministic given the stage seed. A global
//! gradient-norm clip at 5.0 guards against divergence; every clip event is
//! recorded in the report.

mod optim;

pub use optim::{adamw_update, AdamHyper, OptimState};

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{hash_params, sample_inputs, Model, ParamGroup, Stage};
use crate::rng;
use crate::tensor::Tensor;

/// Default clip threshold on the global gradient norm.
pub const CLIP_NORM: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageKind {
    Pretrain,
    Finetune,
}

/// Settings for one training stage.
#[derive(Clone, Debug)]
pub struct StageConfig {
    pub stage: StageKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub hyper: AdamHyper,
    pub seed: u64,
    pub clip_norm: Option<f64>,
}

impl StageConfig {
    /// Published stage-one settings: batch 128, 50 epochs, AdamW at 3e-4.
    pub fn pretrain(seed: u64) -> Self {
        Self {
            stage: StageKind::Pretrain,
            epochs: 50,
            batch_size: 128,
            hyper: AdamHyper::pretrain(),
            seed,
            clip_norm: Some(CLIP_NORM),
        }
    }

    /// Desk-scale stage-one preset (epochs 20, batch 32).
    pub fn pretrain_desk(seed: u64) -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            ..Self::pretrain(seed)
        }
    }

    /// Published stage-two settings: batch 32, 10 epochs, Adam at 1e-3.
    pub fn finetune(seed: u64) -> Self {
        Self {
            stage: StageKind::Finetune,
            epochs: 10,
            batch_size: 32,
            hyper: AdamHyper::finetune(),
            seed,
            clip_norm: Some(CLIP_NORM),
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch_size = batch;
        self
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.hyper.lr = lr;
        self
    }

    fn echo(&self) -> Vec<(String, String)> {
        vec![
            (
                "stage".into(),
                match self.stage {
                    StageKind::Pretrain => "pretrain".into(),
                    StageKind::Finetune => "finetune".into(),
                },
            ),
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("lr".into(), self.hyper.lr.to_string()),
            ("beta1".into(), self.hyper.beta1.to_string()),
            ("beta2".into(), self.hyper.beta2.to_string()),
            ("eps".into(), self.hyper.eps.to_string()),
            ("weight_decay".into(), self.hyper.weight_decay.to_string()),
            (
                "clip_norm".into(),
                self.clip_norm.map_or("off".into(), |c| c.to_string()),
            ),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// Per-epoch record; `accuracy` is present for supervised stages.
#[derive(Clone, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub wall_ms: u64,
    pub clip_events: u64,
    pub accuracy: Option<f64>,
}

/// The unit of reproducibility: config echo, seed, code version and the
/// per-epoch curve. Serialized as CSV with a plain-text run header.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub stage: String,
    pub seed: u64,
    pub code_version: String,
    pub config_echo: Vec<(String, String)>,
    pub epochs: Vec<EpochRecord>,
    pub frozen_hash_before: Option<String>,
    pub frozen_hash_after: Option<String>,
}

impl TrainReport {
    fn new(cfg: &StageConfig) -> Self {
        Self {
            stage: match cfg.stage {
                StageKind::Pretrain => "pretrain".into(),
                StageKind::Finetune => "finetune".into(),
            },
            seed: cfg.seed,
            code_version: crate::code_version_hash(),
            config_echo: cfg.echo(),
            epochs: Vec::new(),
            frozen_hash_before: None,
            frozen_hash_after: None,
        }
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// CSV with a `#`-prefixed run header: config, seed, and a content hash
    /// of the code version string.
    pub fn to_csv(&self) -> String {
        let cfg: Vec<String> = self
            .config_echo
            .iter()
            .map(|(k, v)| format!("\"{k}\":\"{v}\""))
            .collect();
        let mut out = format!(
            "# run {{\"stage\":\"{}\",\"seed\":{},\"code_version\":\"{}\",\"config\":{{{}}}}}\n",
            self.stage,
            self.seed,
            self.code_version,
            cfg.join(",")
        );
        if let (Some(b), Some(a)) = (&self.frozen_hash_before, &self.frozen_hash_after) {
            out.push_str(&format!(
                "# frozen sha256 before={b} after={a} equal={}\n",
                b == a
            ));
        }
        out.push_str("epoch,loss,lr,wall_ms,clip_events,accuracy\n");
        for e in &self.epochs {
            let acc = e.accuracy.map_or(String::new(), |a| a.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.epoch, e.loss, e.lr, e.wall_ms, e.clip_events, acc
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn shuffled_indices(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, "batching", epoch as u64);
    for i in (1..n).rev() {
        let j = r.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Global-norm clip over the gradient set; returns true when clipping fired.
fn clip_gradients(grads: &mut [Tensor<f32>], trainable: &[bool], clip: f64) -> bool {
    let mut sq_sum = 0.0f64;
    for (g, &t) in grads.iter().zip(trainable) {
        if t {
            sq_sum += g
                .data()
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum::<f64>();
        }
    }
    let norm = sq_sum.sqrt();
    if norm > clip {
        let scale = (clip / norm) as f32;
        for (g, &t) in grads.iter_mut().zip(trainable) {
            if t {
                g.scale_assign(scale);
            }
        }
        true
    } else {
        false
    }
}

enum Objective {
    Alignment,
    CrossEntropy,
}

/// Shared per-sample batch loop used by pretraining and end-to-end
/// supervised training. Returns per-epoch (loss, accuracy, clip events).
fn train_epochs(
    model: &mut Model<f32>,
    data: &Dataset,
    cfg: &StageConfig,
    objective: Objective,
    trainable: &[bool],
    report: &mut TrainReport,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("training dataset is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if matches!(objective, Objective::CrossEntropy) {
        if let Some(s) = data.samples.iter().find(|s| s.pair.label.is_none()) {
            return Err(Error::Data(format!(
                "sample {} has no label; supervised training needs labels",
                s.id
            )));
        }
    }

    let mut opt = OptimState::<f32>::new(model.entries().len());
    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        let order = shuffled_indices(data.len(), cfg.seed, epoch);
        let mut epoch_loss = 0.0f64;
        let mut epoch_correct = 0usize;
        let mut clip_events = 0u64;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            // per-sample forward/backward in parallel, reduced in order
            let results: Vec<(f64, bool, Vec<Tensor<f32>>)> = chunk
                .par_iter()
                .map(|&idx| {
                    let sample = &data.samples[idx];
                    let inputs = sample_inputs::<f32>(model.config(), &sample.pair)?;
                    let mut bm = model.bind();
                    let (loss_var, correct) = match objective {
                        Objective::Alignment => {
                            let out = bm.forward(&inputs, false)?;
                            (out.align_loss, false)
                        }
                        Objective::CrossEntropy => {
                            let out = bm.forward(&inputs, true)?;
                            let logits = out.logits.expect("requested");
                            let label = sample.pair.label.expect("checked above");
                            let correct = argmax(bm.graph.value(logits).data()) == label;
                            (bm.graph.cross_entropy(logits, &[label])?, correct)
                        }
                    };
                    bm.graph.backward(loss_var)?;
                    let grads: Vec<Tensor<f32>> = bm
                        .param_vars
                        .iter()
                        .map(|&v| bm.graph.grad_or_zeros(v))
                        .collect();
                    Ok((bm.graph.value(loss_var).item() as f64, correct, grads))
                })
                .collect::<Result<_>>()?;

            let inv_b = 1.0 / chunk.len() as f32;
            let mut batch_loss = 0.0f64;
            let mut grads: Vec<Tensor<f32>> = model
                .entries()
                .iter()
                .map(|p| Tensor::zeros(p.tensor.shape().to_vec()))
                .collect();
            for (loss, correct, sample_grads) in results {
                batch_loss += loss;
                epoch_correct += correct as usize;
                for (acc, g) in grads.iter_mut().zip(&sample_grads) {
                    acc.add_assign(g);
                }
            }
            batch_loss /= chunk.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    msg: format!("batch loss is {batch_loss}"),
                });
            }
            for g in grads.iter_mut() {
                g.scale_assign(inv_b);
            }
            if let Some(clip) = cfg.clip_norm {
                if clip_gradients(&mut grads, trainable, clip) {
                    clip_events += 1;
                }
            }
            opt.step(&cfg.hyper, model.entries_mut(), &grads, trainable)?;
            epoch_loss += batch_loss * chunk.len() as f64;
        }
        report.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss / data.len() as f64,
            lr: cfg.hyper.lr,
            wall_ms: t0.elapsed().as_millis() as u64,
            clip_events,
            accuracy: match objective {
                Objective::Alignment => None,
                Objective::CrossEntropy => Some(epoch_correct as f64 / data.len() as f64),
            },
        });
    }
    Ok(())
}

pub(crate) fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Stage one: minimizes the mean alignment loss over unlabeled pairs.
/// Trains adapters, attention layers and their norms; the head is untouched
/// (nothing in the objective reaches it). Deterministic given `cfg.seed`.
pub fn pretrain(model: &mut Model<f32>, data: &Dataset, cfg: &StageConfig) -> Result<TrainReport> {
    if cfg.stage != StageKind::Pretrain {
        return Err(Error::Config(
            "pretrain called with a finetune config".into(),
        ));
    }
    let trainable = model.mask(|g| g.is_backbone());
    let mut report = TrainReport::new(cfg);
    train_epochs(
        model,
        data,
        cfg,
        Objective::Alignment,
        &trainable,
        &mut report,
    )?;
    model.stage = Stage::Pretrained;
    Ok(report)
}

/// Stage two: freezes the backbone and trains the classification head with
/// cross-entropy on the labeled subset. Pooled features are cached once per
/// sample (the backbone is frozen, so recomputation would be identical).
/// The report carries the frozen-group hash before and after.
pub fn finetune(
    model: &mut Model<f32>,
    labeled: &Dataset,
    cfg: &StageConfig,
) -> Result<TrainReport> {
    if cfg.stage != StageKind::Finetune {
        return Err(Error::Config(
            "finetune called with a pretrain config".into(),
        ));
    }
    if labeled.is_empty() {
        return Err(Error::Data("labeled set is empty".into()));
    }
    if let Some(s) = labeled.samples.iter().find(|s| s.pair.label.is_none()) {
        return Err(Error::Data(format!(
            "sample {} has no label; fine-tuning needs labels",
            s.id
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }

    let mut report = TrainReport::new(cfg);
    report.frozen_hash_before = Some(hash_params(model, |g| g.is_backbone()));

    // cache pooled features of the frozen backbone
    let features: Vec<Tensor<f32>> = labeled
        .samples
        .par_iter()
        .map(|s| {
            let inputs = sample_inputs::<f32>(model.config(), &s.pair)?;
            model.features(&inputs)
        })
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = labeled
        .samples
        .iter()
        .map(|s| s.pair.label.expect("checked above"))
        .collect();
    let embed = model.config().embed_dim;
    let classes = model.config().classes;

    let head_idx = model
        .entries()
        .iter()
        .position(|p| matches!(p.group, ParamGroup::Head))
        .expect("model has a head");
    let trainable: Vec<bool> = model
        .entries()
        .iter()
        .map(|p| matches!(p.group, ParamGroup::Head))
        .collect();

    let mut opt = OptimState::<f32>::new(model.entries().len());
    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        let order = shuffled_indices(labeled.len(), cfg.seed, epoch);
        let mut epoch_loss = 0.0f64;
        let mut clip_events = 0u64;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch = Tensor::<f32>::zeros(vec![chunk.len(), embed]);
            let mut batch_labels = Vec::with_capacity(chunk.len());
            for (row, &idx) in chunk.iter().enumerate() {
                batch.data_mut()[row * embed..(row + 1) * embed]
                    .copy_from_slice(features[idx].data());
                batch_labels.push(labels[idx]);
            }
            let mut g = crate::tensor::Graph::new();
            let x = g.input(batch);
            let w = g.param(model.entries()[head_idx].tensor.clone());
            let logits = g.matmul(x, w)?;
            let loss = g.cross_entropy(logits, &batch_labels)?;
            g.backward(loss)?;
            let loss_val = g.value(loss).item() as f64;
            if !loss_val.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    msg: format!("batch loss is {loss_val}"),
                });
            }
            let mut grads: Vec<Tensor<f32>> = model
                .entries()
                .iter()
                .map(|p| Tensor::zeros(p.tensor.shape().to_vec()))
                .collect();
            grads[head_idx] = g.grad_or_zeros(w);
            if let Some(clip) = cfg.clip_norm {
                if clip_gradients(&mut grads, &trainable, clip) {
                    clip_events += 1;
                }
            }
            opt.step(&cfg.hyper, model.entries_mut(), &grads, &trainable)?;
            epoch_loss += loss_val * chunk.len() as f64;
        }

        // train accuracy with the head as of the end of the epoch
        let head = &model.entries()[head_idx].tensor;
        let mut correct = 0usize;
        for (f, &y) in features.iter().zip(&labels) {
            let mut logits = vec![0.0f32; classes];
            crate::tensor::kernels::matmul_nn_acc(
                1,
                embed,
                classes,
                f.data(),
                head.data(),
                &mut logits,
            );
            if argmax(&logits) == y {
                correct += 1;
            }
        }
        report.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss / labeled.len() as f64,
            lr: cfg.hyper.lr,
            wall_ms: t0.elapsed().as_millis() as u64,
            clip_events,
            accuracy: Some(correct as f64 / labeled.len() as f64),
        });
    }

    model.stage = Stage::Finetuned;
    report.frozen_hash_after = Some(hash_params(model, |g| g.is_backbone()));
    Ok(report)
}

/// End-to-end supervised training of every parameter (used by the
/// early-fusion comparison baseline, which has no self-supervised stage).
pub fn supervised_full(
    model: &mut Model<f32>,
    labeled: &Dataset,
    cfg: &StageConfig,
) -> Result<TrainReport> {
    let trainable = vec![true; model.entries().len()];
    let mut report = TrainReport::new(cfg);
    train_epochs(
        model,
        labeled,
        cfg,
        Objective::CrossEntropy,
        &trainable,
        &mut report,
    )?;
    model.stage = Stage::Finetuned;
    Ok(report)
}

#[cfg(test)]
mod tests;
