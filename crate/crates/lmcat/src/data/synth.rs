//! Synthetic unpaired SAR/optical scene generator.
//!
//! Real co-registered satellite archives are far beyond desk scale, so the
//! generator builds class-conditional scenes with the structure the model is
//! supposed to exploit:
//!
//! - two independent smooth blob fields per scene;
//! - ten optical bands, half driven by each field, with per-class spectra
//!   (paired classes share almost the same spectra);
//! - two SAR channels driven by *one* of the fields — which one is a class
//!   property, as is a mean-shifting exponent — plus multiplicative speckle.
//!
//! Class identity therefore lives partly in per-channel statistics and
//! partly in the cross-modal relation (which optical bands the SAR content
//! co-varies with). The relation survives spatial misalignment of the crops,
//! while pixel-level SAR/optical pairings do not — exactly the contrast the
//! robustness experiments measure.
//!
//! Scenes are rendered on a canvas twice the patch side so misaligned crops
//! never need padding. Everything is derived deterministically from a
//! per-sample seed.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Generator-wide settings; serialized into dataset manifests so stored
/// samples can be regenerated (the robustness sweep re-crops scenes).
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub classes: usize,
    pub canvas: usize,
    pub patch: usize,
    pub sar_channels: usize,
    pub optical_channels: usize,
    /// Gaussian noise on optical reflectance, as a fraction of full range.
    pub optical_noise: f64,
    /// Log-normal sigma of multiplicative SAR speckle.
    pub speckle_sigma: f64,
    /// Log-normal sigma of the per-sample optical gain.
    pub gain_jitter: f64,
    pub blob_count: (usize, usize),
    /// Documented lower bound on the spectral distance between class groups.
    pub spectral_separation: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            classes: 11,
            canvas: 32,
            patch: 16,
            sar_channels: 2,
            optical_channels: 10,
            optical_noise: 0.05,
            speckle_sigma: 0.3,
            gain_jitter: 0.15,
            blob_count: (3, 6),
            spectral_separation: 0.25,
        }
    }
}

impl GenConfig {
    /// Noise-free variant used by separability checks.
    pub fn zero_noise(mut self) -> Self {
        self.optical_noise = 0.0;
        self.speckle_sigma = 0.0;
        self.gain_jitter = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::Config("generator needs at least one class".into()));
        }
        if self.canvas < 2 * self.patch {
            return Err(Error::Config(format!(
                "canvas {} too small for patch {} with misalignment up to half a patch",
                self.canvas, self.patch
            )));
        }
        if self.blob_count.0 == 0 || self.blob_count.0 > self.blob_count.1 {
            return Err(Error::Config(format!(
                "bad blob count range {:?}",
                self.blob_count
            )));
        }
        Ok(())
    }
}

/// Everything needed to rebuild one scene: class, per-class render
/// parameters and the sample seed.
#[derive(Clone, Debug)]
pub struct SceneSpec<'a> {
    pub class_id: usize,
    pub seed: u64,
    pub gen: &'a GenConfig,
}

/// Per-class render parameters, a fixed function of the class id.
///
/// Classes come in pairs `(2k, 2k+1)` sharing nearly the same optical
/// spectra; the pair members differ in which latent field drives the SAR
/// channels and in the SAR response exponent.
#[derive(Clone, Debug)]
pub struct ClassParams {
    pub mid: Vec<f64>,
    pub amp: f64,
    pub sar_field: usize,
    pub sar_exponent: f64,
    pub sar_gain: f64,
    pub sar_base: Vec<f64>,
}

impl ClassParams {
    pub fn for_class(class_id: usize, gen: &GenConfig) -> Self {
        let group = (class_id / 2) as f64;
        let pair_sign = if class_id % 2 == 0 { -1.0 } else { 1.0 };
        let bands = gen.optical_channels;
        let mid = (0..bands)
            .map(|b| {
                let phase = std::f64::consts::TAU * (group + 1.0) * (b as f64 + 0.5) / bands as f64;
                0.40 + 0.22 * (phase + 0.7 * group).cos() + 0.02 * pair_sign
            })
            .collect();
        let sar_base = (0..gen.sar_channels)
            .map(|ch| 0.25 * (1.3 * class_id as f64 + 0.9 * ch as f64).cos())
            .collect();
        Self {
            mid,
            amp: 0.30,
            sar_field: class_id % 2,
            sar_exponent: if class_id % 2 == 0 { 0.7 } else { 1.5 },
            sar_gain: 2.0,
            sar_base,
        }
    }
}

/// Raw rendered canvases (pre-preprocessing): SAR amplitudes are positive,
/// optical values live on the sensor's 0..10000 scale.
#[derive(Clone, Debug)]
pub struct Scene {
    pub sar: Tensor<f64>,
    pub optical: Tensor<f64>,
    pub label: usize,
}

/// Smooth blob field on the canvas, min-max normalized to `[0, 1]`.
fn blob_field(gen: &GenConfig, rng: &mut impl Rng) -> Vec<f64> {
    let side = gen.canvas;
    let count = rng.gen_range(gen.blob_count.0..=gen.blob_count.1);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let cy = rng.gen_range(0.0..side as f64);
            let cx = rng.gen_range(0.0..side as f64);
            let sigma = rng.gen_range(2.5..6.0);
            let weight = rng.gen_range(0.5..1.0);
            (cy, cx, sigma, weight)
        })
        .collect();
    let mut field = vec![0.0f64; side * side];
    for y in 0..side {
        for x in 0..side {
            let mut v = 0.0;
            for &(cy, cx, sigma, w) in &blobs {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                v += w * (-d2 / (2.0 * sigma * sigma)).exp();
            }
            field[y * side + x] = v;
        }
    }
    let min = field.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min < 1e-12 {
        field.fill(0.5);
    } else {
        for v in field.iter_mut() {
            *v = (*v - min) / (max - min);
        }
    }
    field
}

/// Renders the scene for `spec`. The same spec always yields bit-identical
/// canvases: all randomness comes from the spec's seed in a fixed draw order
/// (fields, gain, optical noise, speckle).
pub fn synth_scene(spec: &SceneSpec) -> Result<Scene> {
    let gen = spec.gen;
    gen.validate()?;
    if spec.class_id >= gen.classes {
        return Err(Error::Config(format!(
            "class {} outside 0..{}",
            spec.class_id, gen.classes
        )));
    }
    let params = ClassParams::for_class(spec.class_id, gen);
    let mut r = rng::stream(spec.seed, "scene", 0);
    let side = gen.canvas;
    let n = side * side;

    let fields = [blob_field(gen, &mut r), blob_field(gen, &mut r)];
    let gain = if gen.gain_jitter > 0.0 {
        let z: f64 = r.sample(StandardNormal);
        (z * gen.gain_jitter).exp()
    } else {
        1.0
    };

    // optical: band b follows field b/5 with the class spectrum
    let bands = gen.optical_channels;
    let mut optical = Tensor::zeros(vec![bands, side, side]);
    for b in 0..bands {
        let field = &fields[b * 2 / bands];
        for p in 0..n {
            let mut reflectance = params.mid[b] + params.amp * (field[p] - 0.5);
            if gen.optical_noise > 0.0 {
                let z: f64 = r.sample(StandardNormal);
                reflectance += z * gen.optical_noise;
            }
            optical.data_mut()[b * n + p] = (reflectance * gain).max(0.0) * 10_000.0;
        }
    }

    // SAR: log-amplitude is an affine, monotone function of one field raised
    // to the class exponent; speckle is multiplicative log-normal
    let driver = &fields[params.sar_field];
    let mut sar = Tensor::zeros(vec![gen.sar_channels, side, side]);
    for ch in 0..gen.sar_channels {
        for p in 0..n {
            let mut log_amp =
                params.sar_gain * (driver[p].powf(params.sar_exponent) - 0.5) + params.sar_base[ch];
            if gen.speckle_sigma > 0.0 {
                let z: f64 = r.sample(StandardNormal);
                log_amp += z * gen.speckle_sigma;
            }
            sar.data_mut()[ch * n + p] = log_amp.exp();
        }
    }
    Ok(Scene {
        sar,
        optical,
        label: spec.class_id,
    })
}
