//! Checkpoint persistence.
//!
//! Plain binary file: a version header line, a text manifest (stage, seed,
//! config snapshot, then one line per tensor with name, dtype, shape and
//! byte offset), a `blob <nbytes>` separator line, and the concatenated
//! little-endian raw arrays in parameter order. Tensor ordering is the
//! model's fixed parameter order, so identical models produce identical
//! files and a load→save round trip is byte-stable.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{AdapterKind, Modality, Model, ModelConfig, Stage, TokenReduce};
use crate::tensor::{Scalar, Tensor};

const MAGIC: &str = "LMCAT-CKPT 1";

fn config_line(cfg: &ModelConfig) -> String {
    let modalities: Vec<String> = cfg
        .modalities
        .iter()
        .map(|m| format!("{}:{}", m.name, m.channels))
        .collect();
    let adapter = match cfg.adapter {
        AdapterKind::Msa { hidden } => format!("msa:{hidden}"),
        AdapterKind::Linear => "linear".to_string(),
    };
    let reduce = match cfg.token_reduce {
        Some(tr) => format!("{}:{}", tr.after_layer, tr.factor),
        None => "off".to_string(),
    };
    format!(
        "config embed_dim={} n_layers={} n_heads={} patch_size={} classes={} modalities={} adapter={} cross_modal={} contrastive={} token_reduce={} tau={}",
        cfg.embed_dim,
        cfg.n_layers,
        cfg.n_heads,
        cfg.patch_size,
        cfg.classes,
        modalities.join(","),
        adapter,
        cfg.cross_modal,
        cfg.contrastive,
        reduce,
        cfg.tau,
    )
}

fn parse_config_line(line: &str, path: &str) -> Result<ModelConfig> {
    let perr = |msg: String| Error::Parse {
        path: path.to_string(),
        pos: "config line".to_string(),
        msg,
    };
    let mut cfg = ModelConfig::default();
    let body = line
        .strip_prefix("config ")
        .ok_or_else(|| perr("missing 'config' prefix".into()))?;
    for kv in body.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| perr(format!("bad key=value pair '{kv}'")))?;
        match k {
            "embed_dim" => cfg.embed_dim = parse_num(v, k, path)?,
            "n_layers" => cfg.n_layers = parse_num(v, k, path)?,
            "n_heads" => cfg.n_heads = parse_num(v, k, path)?,
            "patch_size" => cfg.patch_size = parse_num(v, k, path)?,
            "classes" => cfg.classes = parse_num(v, k, path)?,
            "modalities" => {
                cfg.modalities = v
                    .split(',')
                    .map(|m| {
                        let (name, ch) = m
                            .split_once(':')
                            .ok_or_else(|| perr(format!("bad modality '{m}'")))?;
                        Ok(Modality::new(name, parse_num(ch, "channels", path)?))
                    })
                    .collect::<Result<_>>()?;
            }
            "adapter" => {
                cfg.adapter = if v == "linear" {
                    AdapterKind::Linear
                } else if let Some(h) = v.strip_prefix("msa:") {
                    AdapterKind::Msa {
                        hidden: parse_num(h, "hidden", path)?,
                    }
                } else {
                    return Err(perr(format!("bad adapter '{v}'")));
                };
            }
            "cross_modal" => cfg.cross_modal = v == "true",
            "contrastive" => cfg.contrastive = v == "true",
            "token_reduce" => {
                cfg.token_reduce = if v == "off" {
                    None
                } else {
                    let (a, f) = v
                        .split_once(':')
                        .ok_or_else(|| perr(format!("bad token_reduce '{v}'")))?;
                    Some(TokenReduce {
                        after_layer: parse_num(a, "after_layer", path)?,
                        factor: parse_num(f, "factor", path)?,
                    })
                };
            }
            "tau" => {
                cfg.tau = v.parse().map_err(|_| perr(format!("bad tau '{v}'")))?;
            }
            other => return Err(perr(format!("unknown config key '{other}'"))),
        }
    }
    Ok(cfg)
}

fn parse_num(v: &str, key: &str, path: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        pos: "config line".to_string(),
        msg: format!("bad value for {key}: '{v}'"),
    })
}

/// Writes the model to `path` in the checkpoint format.
pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    header.push_str(&format!("stage {}\n", model.stage.as_str()));
    header.push_str(&format!("seed {}\n", model.seed));
    header.push_str(&config_line(model.config()));
    header.push('\n');
    header.push_str(&format!("tensors {}\n", model.entries().len()));

    let mut blob: Vec<u8> = Vec::new();
    for p in model.entries() {
        let dims: Vec<String> = p.tensor.shape().iter().map(|d| d.to_string()).collect();
        let bytes = p.tensor.le_bytes();
        header.push_str(&format!(
            "{} {} {} {} {}\n",
            p.name,
            T::DTYPE,
            dims.join(","),
            blob.len(),
            bytes.len()
        ));
        blob.extend_from_slice(&bytes);
    }
    header.push_str(&format!("blob {}\n", blob.len()));

    let mut out = header.into_bytes();
    out.extend_from_slice(&blob);
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a checkpoint written by [`save_checkpoint`]. The stored dtype must
/// match `T`.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let raw = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let pstr = path.display().to_string();
    let perr = |pos: String, msg: String| Error::Parse {
        path: pstr.clone(),
        pos,
        msg,
    };

    // split text header from blob: read line by line until the blob marker
    let mut offset = 0usize;
    let mut lines: Vec<(usize, String)> = Vec::new();
    let mut blob_start = None;
    while offset < raw.len() {
        let end = raw[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p)
            .ok_or_else(|| perr(format!("byte {offset}"), "unterminated header line".into()))?;
        let line = std::str::from_utf8(&raw[offset..end])
            .map_err(|_| perr(format!("byte {offset}"), "non-UTF8 header".into()))?
            .to_string();
        let is_blob = line.starts_with("blob ");
        lines.push((offset, line));
        offset = end + 1;
        if is_blob {
            blob_start = Some(offset);
            break;
        }
    }
    let blob_start =
        blob_start.ok_or_else(|| perr("end of file".into(), "missing blob marker".into()))?;
    let blob = &raw[blob_start..];

    let mut it = lines.iter();
    let (pos0, magic) = it
        .next()
        .ok_or_else(|| perr("byte 0".into(), "empty file".into()))?;
    if magic != MAGIC {
        return Err(perr(format!("byte {pos0}"), format!("bad magic '{magic}'")));
    }
    let mut stage = Stage::Initialized;
    let mut seed = 0u64;
    let mut config: Option<ModelConfig> = None;
    let mut tensor_count: Option<usize> = None;
    let mut tensor_lines: Vec<(usize, String)> = Vec::new();
    let mut blob_len: Option<usize> = None;
    for (pos, line) in it {
        if let Some(v) = line.strip_prefix("stage ") {
            stage = Stage::parse(v)?;
        } else if let Some(v) = line.strip_prefix("seed ") {
            seed = v
                .parse()
                .map_err(|_| perr(format!("byte {pos}"), format!("bad seed '{v}'")))?;
        } else if line.starts_with("config ") {
            config = Some(parse_config_line(line, &pstr)?);
        } else if let Some(v) = line.strip_prefix("tensors ") {
            tensor_count = Some(
                v.parse()
                    .map_err(|_| perr(format!("byte {pos}"), format!("bad tensor count '{v}'")))?,
            );
        } else if let Some(v) = line.strip_prefix("blob ") {
            blob_len = Some(
                v.parse()
                    .map_err(|_| perr(format!("byte {pos}"), format!("bad blob length '{v}'")))?,
            );
        } else {
            tensor_lines.push((*pos, line.clone()));
        }
    }
    let config = config.ok_or_else(|| perr("header".into(), "missing config line".into()))?;
    let count = tensor_count.ok_or_else(|| perr("header".into(), "missing tensor count".into()))?;
    if tensor_lines.len() != count {
        return Err(perr(
            "header".into(),
            format!(
                "expected {count} tensor lines, found {}",
                tensor_lines.len()
            ),
        ));
    }
    let blob_len = blob_len.ok_or_else(|| perr("header".into(), "missing blob length".into()))?;
    if blob.len() != blob_len {
        return Err(perr(
            format!("byte {blob_start}"),
            format!("blob is {} bytes, header says {blob_len}", blob.len()),
        ));
    }

    // reconstruct via a skeleton so names, groups and order come from config
    let mut model = Model::<T>::init(config, seed)?;
    model.stage = stage;
    let mut by_name = std::collections::HashMap::new();
    for (pos, line) in &tensor_lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(perr(
                format!("byte {pos}"),
                format!("bad tensor line '{line}'"),
            ));
        }
        let dtype = parts[1];
        if dtype != T::DTYPE {
            return Err(perr(
                format!("byte {pos}"),
                format!(
                    "tensor {} has dtype {dtype}, expected {}",
                    parts[0],
                    T::DTYPE
                ),
            ));
        }
        let shape: Vec<usize> = parts[2]
            .split(',')
            .map(|d| parse_num(d, "shape", &pstr))
            .collect::<Result<_>>()?;
        let start: usize = parse_num(parts[3], "offset", &pstr)?;
        let nbytes: usize = parse_num(parts[4], "length", &pstr)?;
        if start + nbytes > blob.len() {
            return Err(perr(
                format!("byte {}", blob_start + start),
                format!("tensor {} extends past end of blob", parts[0]),
            ));
        }
        let tensor = Tensor::<T>::from_le_bytes(shape, &blob[start..start + nbytes])?;
        by_name.insert(parts[0].to_string(), tensor);
    }
    for entry in model.entries_mut() {
        let tensor = by_name
            .remove(&entry.name)
            .ok_or_else(|| perr("header".into(), format!("missing tensor '{}'", entry.name)))?;
        if tensor.shape() != entry.tensor.shape() {
            return Err(perr(
                "header".into(),
                format!(
                    "tensor '{}' has shape {:?}, config implies {:?}",
                    entry.name,
                    tensor.shape(),
                    entry.tensor.shape()
                ),
            ));
        }
        entry.tensor = tensor;
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(perr(
            "header".into(),
            format!("unexpected tensor '{extra}'"),
        ));
    }
    Ok(model)
}
