//! Synthetic data pipeline: scene synthesis, sensor preprocessing,
//! misalignment injection, few-shot label sampling and dataset files.

mod dataset;
mod synth;

pub use dataset::{load_dataset, save_dataset, Dataset, DatasetSample};
pub use synth::{synth_scene, ClassParams, GenConfig, Scene, SceneSpec};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Scalar, Tensor};

/// Floor applied to SAR amplitudes before the log.
pub const SAR_AMPLITUDE_FLOOR: f64 = 1e-6;
/// Optical sensor scale.
pub const OPTICAL_SCALE: f64 = 10_000.0;

/// One preprocessed sample: a SAR patch, an optical patch, an optional class
/// label and the misalignment fraction that was actually applied when
/// cropping. Patch values are finite and in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub sar: Tensor<f32>,
    pub opt: Tensor<f32>,
    pub label: Option<usize>,
    pub offset_frac: f32,
}

/// SAR preprocessing: log scaling followed by per-patch per-channel min-max
/// normalization to `[0, 1]`. Amplitudes are clamped at a small positive
/// floor before the log; a constant channel maps to all zeros.
pub fn preprocess_sar<T: Scalar>(raw: &Tensor<T>) -> Result<Tensor<T>> {
    let shape = raw.shape();
    if shape.len() != 3 {
        return Err(Error::Contract(format!(
            "preprocess_sar expects [C×H×W], got {shape:?}"
        )));
    }
    let (c, hw) = (shape[0], shape[1] * shape[2]);
    let floor = T::from_f64(SAR_AMPLITUDE_FLOOR);
    let mut out = Tensor::zeros(shape.to_vec());
    for ch in 0..c {
        let src = &raw.data()[ch * hw..(ch + 1) * hw];
        let dst = &mut out.data_mut()[ch * hw..(ch + 1) * hw];
        for (o, &v) in dst.iter_mut().zip(src) {
            *o = v.max(floor).ln();
        }
        let mut min = dst[0];
        let mut max = dst[0];
        for &v in dst.iter() {
            if v < min {
                min = v;
            }
            if v > max {
                max = v;
            }
        }
        if max == min {
            dst.fill(T::zero());
        } else {
            let span = max - min;
            for o in dst.iter_mut() {
                *o = (*o - min) / span;
            }
        }
    }
    Ok(out)
}

/// Optical preprocessing: clamp to the sensor range and scale to `[0, 1]`.
pub fn preprocess_optical<T: Scalar>(raw: &Tensor<T>) -> Result<Tensor<T>> {
    if raw.shape().len() != 3 {
        return Err(Error::Contract(format!(
            "preprocess_optical expects [C×H×W], got {:?}",
            raw.shape()
        )));
    }
    let scale = T::from_f64(OPTICAL_SCALE);
    Ok(raw.map(|v| v.max(T::zero()).min(scale) / scale))
}

fn crop(canvas: &Tensor<f64>, side: usize, top: usize, left: usize) -> Tensor<f64> {
    let shape = canvas.shape();
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    debug_assert!(top + side <= h && left + side <= w);
    Tensor::from_fn(vec![c, side, side], |i| {
        let ch = i / (side * side);
        let y = (i / side) % side;
        let x = i % side;
        canvas.data()[ch * h * w + (top + y) * w + (left + x)]
    })
}

/// The eight compass directions used for misalignment offsets.
const DIRECTIONS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Crops a patch pair from the scene canvases with a spatial offset between
/// the modalities. The optical patch is cropped at the canvas center; the
/// SAR patch at the center displaced by `round(frac·patch)` pixels along a
/// uniformly random compass direction (per-axis magnitude equals the
/// rounded offset). `frac = 0` consumes no randomness and reproduces the
/// co-registered crop exactly.
pub fn misalign(
    scene: &Scene,
    gen: &GenConfig,
    frac: f64,
    rng: &mut impl Rng,
) -> Result<PatchPair> {
    if !(0.0..=0.5).contains(&frac) {
        return Err(Error::Config(format!(
            "misalignment fraction must be in [0, 0.5], got {frac}"
        )));
    }
    let patch = gen.patch;
    let offset = (frac * patch as f64).round() as isize;
    let center = ((gen.canvas - patch) / 2) as isize;
    let (dy, dx) = if offset == 0 {
        (0, 0)
    } else {
        let (sy, sx) = DIRECTIONS[rng.gen_range(0..DIRECTIONS.len())];
        (sy * offset, sx * offset)
    };
    let opt_crop = crop(&scene.optical, patch, center as usize, center as usize);
    let sar_crop = crop(
        &scene.sar,
        patch,
        (center + dy) as usize,
        (center + dx) as usize,
    );
    Ok(PatchPair {
        sar: preprocess_sar(&sar_crop)?.cast(),
        opt: preprocess_optical(&opt_crop)?.cast(),
        label: Some(scene.label),
        offset_frac: frac as f32,
    })
}

/// Renders and crops one sample end to end; the path used both when building
/// datasets and when re-cropping stored samples at new misalignment levels.
pub fn render_pair(
    gen: &GenConfig,
    class_id: usize,
    seed: u64,
    frac: f64,
    rng: &mut impl Rng,
) -> Result<PatchPair> {
    let scene = synth_scene(&SceneSpec {
        class_id,
        seed,
        gen,
    })?;
    misalign(&scene, gen, frac, rng)
}

/// Builds a dataset of `count` co-registered samples, classes assigned
/// round-robin so every class is equally represented. Sample seeds derive
/// from the master seed, so generation is seed-partitioned and parallel.
pub fn make_dataset(gen: &GenConfig, count: usize, seed: u64) -> Result<Dataset> {
    gen.validate()?;
    let samples: Vec<DatasetSample> = (0..count)
        .into_par_iter()
        .map(|idx| {
            let sample_seed = rng::derive_seed(seed, "data", idx as u64);
            let class = idx % gen.classes;
            let mut r = rng::stream(sample_seed, "crop", 0);
            let pair = render_pair(gen, class, sample_seed, 0.0, &mut r)?;
            Ok(DatasetSample {
                id: idx as u64,
                seed: sample_seed,
                pair,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        gen: gen.clone(),
        samples,
    })
}

/// Samples exactly `k` labeled examples per class, uniformly without
/// replacement and deterministically in `seed`. Returns `(labeled, rest)`;
/// the two parts are disjoint and their union is the input dataset.
pub fn few_shot_split(dataset: &Dataset, k: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if k == 0 {
        return Err(Error::Config("few-shot split needs k >= 1".into()));
    }
    let classes = dataset.gen.classes;
    let mut chosen: Vec<usize> = Vec::with_capacity(k * classes);
    for class in 0..classes {
        let mut indices: Vec<usize> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.pair.label == Some(class))
            .map(|(i, _)| i)
            .collect();
        if indices.len() < k {
            return Err(Error::Data(format!(
                "class {class} has {} labeled samples, need {k}",
                indices.len()
            )));
        }
        let mut r = rng::stream(seed, "split", class as u64);
        for i in (1..indices.len()).rev() {
            let j = r.gen_range(0..=i);
            indices.swap(i, j);
        }
        chosen.extend_from_slice(&indices[..k]);
    }
    chosen.sort_unstable();
    let mut labeled = Vec::with_capacity(chosen.len());
    let mut rest = Vec::with_capacity(dataset.samples.len() - chosen.len());
    let mut take = chosen.iter().peekable();
    for (i, s) in dataset.samples.iter().enumerate() {
        if take.peek() == Some(&&i) {
            take.next();
            labeled.push(s.clone());
        } else {
            rest.push(s.clone());
        }
    }
    Ok((
        Dataset {
            gen: dataset.gen.clone(),
            samples: labeled,
        },
        Dataset {
            gen: dataset.gen.clone(),
            samples: rest,
        },
    ))
}

#[cfg(test)]
mod tests;
