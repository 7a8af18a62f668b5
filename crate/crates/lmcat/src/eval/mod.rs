//! Evaluation: classification metrics, misalignment robustness sweeps, the
//! label-efficiency grid, the component ablation harness and the
//! early-fusion comparison baseline.
//!
//! Comparative results are reported as means over a set of seeds; every
//! variant in a comparison sees identical datasets, splits and seeds (the
//! shared split hash in the reports makes that checkable). Percentages are
//! rendered with one decimal.

use rayon::prelude::*;

use crate::data::{few_shot_split, render_pair, Dataset, PatchPair};
use crate::error::{Error, Result};
use crate::model::{
    build_variant, count_flops, count_params, hash_params, sample_inputs, Modality, Model,
    ModelConfig, Variant,
};
use crate::rng;
use crate::train::{argmax, finetune, pretrain, StageConfig, StageKind};

/// Row-=-truth, column-=-prediction counts.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn add(&mut self, truth: usize, prediction: usize) {
        assert!(truth < self.classes && prediction < self.classes);
        self.counts[truth * self.classes + prediction] += 1;
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, truth: usize, prediction: usize) -> u64 {
        self.counts[truth * self.classes + prediction]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Contract(format!(
                "confusion matrix needs {classes}x{classes} counts, got {}",
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }
}

/// Overall accuracy, average accuracy (mean per-class recall over classes
/// with support) and unweighted macro-F1 (0/0 counted as 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub oa: f64,
    pub aa: f64,
    pub macro_f1: f64,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Contract(
            "metrics of an empty confusion matrix".into(),
        ));
    }
    let c = cm.classes();
    let mut trace = 0u64;
    let mut recalls = Vec::new();
    let mut f1_sum = 0.0f64;
    for k in 0..c {
        let tp = cm.count(k, k);
        trace += tp;
        let truth: u64 = (0..c).map(|j| cm.count(k, j)).sum();
        let predicted: u64 = (0..c).map(|i| cm.count(i, k)).sum();
        if truth > 0 {
            recalls.push(tp as f64 / truth as f64);
        }
        let denom = truth + predicted; // 2tp + fp + fn
        if denom > 0 {
            f1_sum += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(Metrics {
        oa: trace as f64 / total as f64,
        aa: recalls.iter().sum::<f64>() / recalls.len() as f64,
        macro_f1: f1_sum / c as f64,
    })
}

/// Percent with one decimal, the rendering used in reports.
pub fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// Argmax class for one sample (ties resolve to the lowest index).
pub fn predict(model: &Model<f32>, pair: &PatchPair) -> Result<usize> {
    let inputs = sample_inputs::<f32>(model.config(), pair)?;
    let (logits, _) = model.forward(&inputs)?;
    Ok(argmax(logits.data()))
}

/// Evaluates the model over a fully labeled dataset.
pub fn evaluate(model: &Model<f32>, data: &Dataset) -> Result<(ConfusionMatrix, Metrics)> {
    if data.is_empty() {
        return Err(Error::Data("evaluation dataset is empty".into()));
    }
    let pairs: Vec<(usize, usize)> = data
        .samples
        .par_iter()
        .map(|s| {
            let truth = s.pair.label.ok_or_else(|| {
                Error::Data(format!(
                    "sample {} has no label; evaluation needs labels",
                    s.id
                ))
            })?;
            Ok((truth, predict(model, &s.pair)?))
        })
        .collect::<Result<_>>()?;
    let mut cm = ConfusionMatrix::new(model.config().classes);
    for (truth, pred) in pairs {
        cm.add(truth, pred);
    }
    let m = metrics(&cm)?;
    Ok((cm, m))
}

/// Overall accuracy per misalignment fraction for one model.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub model_id: String,
    pub seed: u64,
    pub points: Vec<(f64, f64)>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# sweep model={} seed={}\n", self.model_id, self.seed);
        out.push_str("offset_frac,oa\n");
        for (f, oa) in &self.points {
            out.push_str(&format!("{f},{oa}\n"));
        }
        out
    }

    /// Accuracy drop between the first and last sweep points.
    pub fn drop(&self) -> f64 {
        self.points.first().map(|p| p.1).unwrap_or(0.0)
            - self.points.last().map(|p| p.1).unwrap_or(0.0)
    }

    pub fn oa_at(&self, frac: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|(f, _)| (*f - frac).abs() < 1e-12)
            .map(|(_, oa)| *oa)
    }
}

/// Re-crops every test sample at each misalignment fraction (regenerating
/// its scene from the stored seed) and scores overall accuracy. The zero
/// entry evaluates the stored co-registered patches, so it equals the plain
/// test accuracy exactly.
pub fn robustness_sweep(
    model: &Model<f32>,
    test: &Dataset,
    fracs: &[f64],
    seed: u64,
) -> Result<SweepResult> {
    if fracs.is_empty() {
        return Err(Error::Config("sweep needs at least one fraction".into()));
    }
    for w in fracs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!(
                "sweep fractions must be strictly increasing, got {fracs:?}"
            )));
        }
    }
    if !(0.0..=0.5).contains(&fracs[0]) || !(0.0..=0.5).contains(fracs.last().unwrap()) {
        return Err(Error::Config(format!(
            "sweep fractions must lie in [0, 0.5], got {fracs:?}"
        )));
    }

    let mut points = Vec::with_capacity(fracs.len());
    for (fi, &frac) in fracs.iter().enumerate() {
        let outcomes: Vec<bool> = test
            .samples
            .par_iter()
            .map(|s| {
                let truth = s.pair.label.ok_or_else(|| {
                    Error::Data(format!("sample {} has no label; sweep needs labels", s.id))
                })?;
                let pair = if frac == 0.0 {
                    s.pair.clone()
                } else {
                    let mut r =
                        rng::stream(seed, "sweep", (fi as u64) << 48 | (s.id & 0xffff_ffff));
                    render_pair(&test.gen, truth, s.seed, frac, &mut r)?
                };
                Ok(predict(model, &pair)? == truth)
            })
            .collect::<Result<_>>()?;
        let correct = outcomes.iter().filter(|&&c| c).count();
        points.push((frac, correct as f64 / test.len() as f64));
    }
    Ok(SweepResult {
        model_id: hash_params(model, |_| true)[..12].to_string(),
        seed,
        points,
    })
}

/// Early-fusion baseline configuration derived from `base`: SAR and optical
/// channels concatenated at the input behind one shared adapter, same
/// transformer depth, no cross-modal attention and no alignment loss (a
/// single modality has neither).
pub fn early_fusion_config(base: &ModelConfig) -> ModelConfig {
    let channels = base.modalities.iter().map(|m| m.channels).sum();
    ModelConfig {
        modalities: vec![Modality::new("fused", channels)],
        ..base.clone()
    }
}

/// Builds the early-fusion baseline model.
pub fn early_fusion_baseline(base: &ModelConfig, seed: u64) -> Result<Model<f32>> {
    Model::init(early_fusion_config(base), seed)
}

/// One `(k, seed)` cell of the label-efficiency grid.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub k: usize,
    pub per_seed: Vec<(u64, f64)>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
}

impl GridResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,seed,oa\n");
        for p in &self.points {
            for (seed, oa) in &p.per_seed {
                out.push_str(&format!("{},{},{}\n", p.k, seed, oa));
            }
        }
        out
    }

    pub fn mean_for(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.mean)
    }
}

/// For each labels-per-class budget `k` and each seed: draw the few-shot
/// split, fine-tune a fresh copy of `base` on it, and score test accuracy.
/// Reports mean and range across seeds.
pub fn label_efficiency_grid(
    base: &Model<f32>,
    pool: &Dataset,
    test: &Dataset,
    ks: &[usize],
    seeds: &[u64],
    finetune_template: &StageConfig,
) -> Result<GridResult> {
    let mut points = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let (labeled, _) = few_shot_split(pool, k, seed)?;
            let mut model = base.clone();
            let mut cfg = finetune_template.clone();
            cfg.seed = seed;
            finetune(&mut model, &labeled, &cfg)?;
            let (_, m) = evaluate(&model, test)?;
            per_seed.push((seed, m.oa));
        }
        let mean = per_seed.iter().map(|(_, o)| o).sum::<f64>() / per_seed.len() as f64;
        let min = per_seed
            .iter()
            .map(|(_, o)| *o)
            .fold(f64::INFINITY, f64::min);
        let max = per_seed
            .iter()
            .map(|(_, o)| *o)
            .fold(f64::NEG_INFINITY, f64::max);
        points.push(GridPoint {
            k,
            per_seed,
            mean,
            min,
            max,
        });
    }
    Ok(GridResult { points })
}

/// Identical protocol applied to every ablation variant.
#[derive(Clone, Debug)]
pub struct AblationProtocol {
    pub base: ModelConfig,
    pub pretrain_template: StageConfig,
    pub finetune_template: StageConfig,
    /// Labels per class for the fine-tuning split.
    pub k: usize,
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: Variant,
    pub per_seed: Vec<f64>,
    pub mean_oa: f64,
    pub delta_vs_full: f64,
    pub params: usize,
    pub flops_macs: u64,
    pub pretrained: bool,
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub seeds: Vec<u64>,
    pub k: usize,
    /// Hash over the evaluation data and per-seed splits; identical for
    /// every variant by construction and recorded so reports are checkable.
    pub split_hash: String,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# ablation seeds={} k={} split_hash={}\n",
            self.seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join("|"),
            self.k,
            self.split_hash
        );
        out.push_str("variant,mean_oa,delta_oa,params,flops_macs,pretrained\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.variant.key(),
                r.mean_oa,
                r.delta_vs_full,
                r.params,
                r.flops_macs,
                r.pretrained
            ));
        }
        out
    }

    /// Aligned plain-text table with percentages at one decimal.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>8} {:>8} {:>10} {:>12}\n",
            "variant", "OA(%)", "dOA", "params", "MACs"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:>8} {:>8} {:>10} {:>12}\n",
                r.variant.label(),
                pct(r.mean_oa),
                if r.variant == Variant::Full {
                    "-".to_string()
                } else {
                    format!("{:+.1}", 100.0 * r.delta_vs_full)
                },
                r.params,
                r.flops_macs
            ));
        }
        out
    }

    pub fn row(&self, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }
}

fn split_hash(pool: &Dataset, test: &Dataset, seeds: &[u64], k: usize) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update((k as u64).to_le_bytes());
    for s in &test.samples {
        h.update(s.id.to_le_bytes());
    }
    for &seed in seeds {
        h.update(seed.to_le_bytes());
        let (labeled, _) = few_shot_split(pool, k, seed)?;
        for s in &labeled.samples {
            h.update(s.id.to_le_bytes());
        }
    }
    let d = h.finalize();
    Ok(d.iter().take(12).map(|b| format!("{b:02x}")).collect())
}

/// Trains every requested variant under the identical two-stage protocol and
/// seeds, and reports mean accuracy, delta against the full model, parameter
/// count and FLOP estimate.
///
/// Variants whose alignment objective is identically zero (`-U-MAA`,
/// `-Contrastive`) skip the vacuous pretraining stage: with a constant-zero
/// loss every gradient is zero, so the stage could only apply weight decay
/// to an untrained backbone. The `pretrained` column records the skip.
pub fn ablation_suite(
    variants: &[Variant],
    pretrain_data: &Dataset,
    pool: &Dataset,
    test: &Dataset,
    seeds: &[u64],
    proto: &AblationProtocol,
) -> Result<AblationReport> {
    if !variants.contains(&Variant::Full) {
        return Err(Error::Config(
            "ablation needs the full variant as the delta baseline".into(),
        ));
    }
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let cfg = variant.apply(proto.base.clone());
        let has_alignment = cfg.cross_modal && cfg.contrastive && cfg.modalities.len() >= 2;
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut model = build_variant::<f32>(variant, &proto.base, seed)?;
            if has_alignment {
                let mut pcfg = proto.pretrain_template.clone();
                pcfg.seed = seed;
                pcfg.stage = StageKind::Pretrain;
                pretrain(&mut model, pretrain_data, &pcfg)?;
            }
            let (labeled, _) = few_shot_split(pool, proto.k, seed)?;
            let mut fcfg = proto.finetune_template.clone();
            fcfg.seed = seed;
            fcfg.stage = StageKind::Finetune;
            finetune(&mut model, &labeled, &fcfg)?;
            let (_, m) = evaluate(&model, test)?;
            per_seed.push(m.oa);
        }
        let mean_oa = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        let sample = Model::<f32>::init(cfg.clone(), seeds[0])?;
        rows.push(AblationRow {
            variant,
            per_seed,
            mean_oa,
            delta_vs_full: 0.0,
            params: count_params(&sample).total,
            flops_macs: count_flops(&cfg).total(),
            pretrained: has_alignment,
        });
    }
    let full_oa = rows
        .iter()
        .find(|r| r.variant == Variant::Full)
        .expect("checked above")
        .mean_oa;
    for r in rows.iter_mut() {
        r.delta_vs_full = r.mean_oa - full_oa;
    }
    Ok(AblationReport {
        rows,
        seeds: seeds.to_vec(),
        k: proto.k,
        split_hash: split_hash(pool, test, seeds, proto.k)?,
    })
}
