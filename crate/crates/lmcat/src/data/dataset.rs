//! Flat-file dataset format.
//!
//! A dataset directory holds `manifest.txt` plus `sar.bin` and `opt.bin`.
//! The manifest starts with the shape header line
//! `patch=16 sar_ch=2 opt_ch=10`, a `#`-prefixed generator line (so stored
//! samples can be regenerated and re-cropped), then one record per sample:
//! `id label|- offset_frac seed`. The bin files hold the preprocessed
//! patches as concatenated little-endian `f32` arrays, sample-major.

use std::fs;
use std::path::Path;

use crate::data::{GenConfig, PatchPair};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A loaded dataset: generator settings plus samples. Immutable once loaded.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub gen: GenConfig,
    pub samples: Vec<DatasetSample>,
}

/// One stored sample; `seed` regenerates its scene canvases.
#[derive(Clone, Debug)]
pub struct DatasetSample {
    pub id: u64,
    pub seed: u64,
    pub pair: PatchPair,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Indices must be within range; panics otherwise.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            gen: self.gen.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

fn gen_line(gen: &GenConfig) -> String {
    format!(
        "# gen classes={} canvas={} optical_noise={} speckle_sigma={} gain_jitter={} blob_min={} blob_max={} spectral_separation={}",
        gen.classes,
        gen.canvas,
        gen.optical_noise,
        gen.speckle_sigma,
        gen.gain_jitter,
        gen.blob_count.0,
        gen.blob_count.1,
        gen.spectral_separation,
    )
}

fn parse_gen_line(line: &str, base: GenConfig, path: &str, lineno: usize) -> Result<GenConfig> {
    let mut gen = base;
    let body = line.trim_start_matches("# gen ").trim();
    for kv in body.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse {
            path: path.into(),
            pos: format!("line {lineno}"),
            msg: format!("bad generator field '{kv}'"),
        })?;
        let bad = |msg: String| Error::Parse {
            path: path.into(),
            pos: format!("line {lineno}"),
            msg,
        };
        match k {
            "classes" => gen.classes = v.parse().map_err(|_| bad(format!("bad classes '{v}'")))?,
            "canvas" => gen.canvas = v.parse().map_err(|_| bad(format!("bad canvas '{v}'")))?,
            "optical_noise" => {
                gen.optical_noise = v.parse().map_err(|_| bad(format!("bad noise '{v}'")))?
            }
            "speckle_sigma" => {
                gen.speckle_sigma = v.parse().map_err(|_| bad(format!("bad speckle '{v}'")))?
            }
            "gain_jitter" => {
                gen.gain_jitter = v.parse().map_err(|_| bad(format!("bad jitter '{v}'")))?
            }
            "blob_min" => {
                gen.blob_count.0 = v.parse().map_err(|_| bad(format!("bad blob_min '{v}'")))?
            }
            "blob_max" => {
                gen.blob_count.1 = v.parse().map_err(|_| bad(format!("bad blob_max '{v}'")))?
            }
            "spectral_separation" => {
                gen.spectral_separation = v
                    .parse()
                    .map_err(|_| bad(format!("bad separation '{v}'")))?
            }
            other => return Err(bad(format!("unknown generator field '{other}'"))),
        }
    }
    Ok(gen)
}

/// Writes `dataset` into directory `dir` (created if missing).
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let gen = &dataset.gen;

    let mut manifest = format!(
        "patch={} sar_ch={} opt_ch={}\n",
        gen.patch, gen.sar_channels, gen.optical_channels
    );
    manifest.push_str(&gen_line(gen));
    manifest.push('\n');

    let mut sar_blob: Vec<u8> = Vec::new();
    let mut opt_blob: Vec<u8> = Vec::new();
    for s in &dataset.samples {
        let label = match s.pair.label {
            Some(l) => l.to_string(),
            None => "-".to_string(),
        };
        manifest.push_str(&format!(
            "{} {} {} {}\n",
            s.id, label, s.pair.offset_frac, s.seed
        ));
        sar_blob.extend_from_slice(&s.pair.sar.le_bytes());
        opt_blob.extend_from_slice(&s.pair.opt.le_bytes());
    }

    let write = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p.display().to_string(), e))
    };
    write("manifest.txt", manifest.as_bytes())?;
    write("sar.bin", &sar_blob)?;
    write("opt.bin", &opt_blob)?;
    Ok(())
}

/// Loads a dataset directory, validating record counts, array sizes and the
/// `[0, 1]` range of stored patches.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let mpath = manifest_path.display().to_string();
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: mpath.clone(),
        pos: "line 1".into(),
        msg: "empty manifest".into(),
    })?;
    let mut patch = 0usize;
    let mut sar_ch = 0usize;
    let mut opt_ch = 0usize;
    for kv in header.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse {
            path: mpath.clone(),
            pos: "line 1".into(),
            msg: format!("bad header field '{kv}'"),
        })?;
        let val: usize = v.parse().map_err(|_| Error::Parse {
            path: mpath.clone(),
            pos: "line 1".into(),
            msg: format!("bad header value '{kv}'"),
        })?;
        match k {
            "patch" => patch = val,
            "sar_ch" => sar_ch = val,
            "opt_ch" => opt_ch = val,
            other => {
                return Err(Error::Parse {
                    path: mpath.clone(),
                    pos: "line 1".into(),
                    msg: format!("unknown header field '{other}'"),
                })
            }
        }
    }
    if patch == 0 || sar_ch == 0 || opt_ch == 0 {
        return Err(Error::Parse {
            path: mpath.clone(),
            pos: "line 1".into(),
            msg: "header must set patch, sar_ch and opt_ch".into(),
        });
    }

    let mut gen = GenConfig {
        patch,
        sar_channels: sar_ch,
        optical_channels: opt_ch,
        ..GenConfig::default()
    };
    let mut records: Vec<(u64, Option<usize>, f32, u64)> = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.starts_with("# gen ") {
            gen = parse_gen_line(line, gen, &mpath, lineno)?;
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse {
                path: mpath.clone(),
                pos: format!("line {lineno}"),
                msg: format!("expected 'id label offset_frac seed', got '{line}'"),
            });
        }
        let bad = |what: &str| Error::Parse {
            path: mpath.clone(),
            pos: format!("line {lineno}"),
            msg: format!("bad {what} '{}'", line),
        };
        let id: u64 = parts[0].parse().map_err(|_| bad("id"))?;
        let label = if parts[1] == "-" {
            None
        } else {
            Some(parts[1].parse::<usize>().map_err(|_| bad("label"))?)
        };
        let offset: f32 = parts[2].parse().map_err(|_| bad("offset_frac"))?;
        let seed: u64 = parts[3].parse().map_err(|_| bad("seed"))?;
        records.push((id, label, offset, seed));
    }

    let read_bin = |name: &str, channels: usize| -> Result<Vec<Tensor<f32>>> {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| Error::io(p.display().to_string(), e))?;
        let per_sample = channels * patch * patch * 4;
        let expected = per_sample * records.len();
        if bytes.len() != expected {
            return Err(Error::Parse {
                path: p.display().to_string(),
                pos: format!("byte {}", bytes.len().min(expected)),
                msg: format!(
                    "{} samples of {per_sample} bytes need {expected} bytes, file has {}",
                    records.len(),
                    bytes.len()
                ),
            });
        }
        bytes
            .chunks_exact(per_sample)
            .enumerate()
            .map(|(i, chunk)| {
                let t = Tensor::<f32>::from_le_bytes(vec![channels, patch, patch], chunk)?;
                for &v in t.data() {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Parse {
                            path: p.display().to_string(),
                            pos: format!("byte {}", i * per_sample),
                            msg: format!("sample {i} holds out-of-range value {v}"),
                        });
                    }
                }
                Ok(t)
            })
            .collect()
    };
    let sar = read_bin("sar.bin", sar_ch)?;
    let opt = read_bin("opt.bin", opt_ch)?;

    let samples = records
        .into_iter()
        .zip(sar)
        .zip(opt)
        .map(
            |(((id, label, offset_frac, seed), sar), opt)| DatasetSample {
                id,
                seed,
                pair: PatchPair {
                    sar,
                    opt,
                    label,
                    offset_frac,
                },
            },
        )
        .collect();
    Ok(Dataset { gen, samples })
}
