//! On-disk formats for descriptor sets and embedding models.
//!
//! * CSV: `D` numeric columns, then a `g=<group id>` column, optionally a trailing
//!   `tag=<text>` column. A single header row is allowed and skipped.
//! * Binary: magic `RDE1`, little-endian `u64 N`, `u64 D`, `N*D` `f64` row-major,
//!   then `N` `u64` group ids. Source tags are not stored.
//! * Model: JSON document tagged `"format": "rde-model"`, `"version": 1`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::descriptors::{DescriptorSet, EmbeddingModel, ModelConfig};
use crate::error::{Error, Result};
use crate::scatter::BetaWeights;
use crate::solver::SolverMode;

pub const BINARY_MAGIC: &[u8; 4] = b"RDE1";
pub const MODEL_FORMAT: &str = "rde-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorFormat {
    Csv,
    Binary,
}

impl DescriptorFormat {
    /// `.bin`/`.rde` extensions select binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("rde") => DescriptorFormat::Binary,
            _ => DescriptorFormat::Csv,
        }
    }
}

/// Loads a descriptor file, detecting the binary format by its magic bytes.
pub fn load_descriptors_auto(path: impl AsRef<Path>) -> Result<DescriptorSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format("descriptor file is neither RDE1 binary nor UTF-8 CSV".into()))?;
        parse_csv(&text)
    }
}

pub fn load_descriptors(path: impl AsRef<Path>, format: DescriptorFormat) -> Result<DescriptorSet> {
    let path = path.as_ref();
    match format {
        DescriptorFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_binary(&bytes)
        }
        DescriptorFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text)
        }
    }
}

pub fn save_descriptors(set: &DescriptorSet, path: impl AsRef<Path>, format: DescriptorFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        DescriptorFormat::Binary => encode_binary(set),
        DescriptorFormat::Csv => format_csv(set)?.into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<DescriptorSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut dim: Option<usize> = None;
    let mut values = Vec::new();
    let mut groups = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut any_tag = false;

    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        let fields: Vec<&str> = record.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        let (label_col, tag) = match fields.last() {
            Some(last) if last.starts_with("tag=") => (fields.len() - 2, Some(&last[4..])),
            _ => (fields.len().saturating_sub(1), None),
        };
        let label = fields.get(label_col).copied().unwrap_or("");
        let Some(group_text) = label.strip_prefix("g=") else {
            if idx == 0 && values.is_empty() && fields[0].parse::<f64>().is_err() {
                // header row
                continue;
            }
            return Err(Error::Parse {
                row,
                col: label_col + 1,
                msg: format!("expected a `g=<id>` label column, found {label:?}"),
            });
        };
        let group = group_text.parse::<u64>().map_err(|_| Error::Parse {
            row,
            col: label_col + 1,
            msg: format!("group id {group_text:?} is not a nonnegative integer"),
        })?;
        let width = label_col;
        match dim {
            None => {
                if width == 0 {
                    return Err(Error::Parse {
                        row,
                        col: 1,
                        msg: "row has no numeric columns".into(),
                    });
                }
                dim = Some(width);
            }
            Some(d) if d != width => {
                return Err(Error::Parse {
                    row,
                    col: width.min(d) + 1,
                    msg: format!("row has {width} numeric columns, expected {d}"),
                });
            }
            _ => {}
        }
        for (c, field) in fields[..width].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: c + 1,
                    msg: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        groups.push(group);
        any_tag |= tag.is_some();
        tags.push(tag.unwrap_or("").to_string());
    }

    let dim = dim.ok_or_else(|| Error::Format("no descriptor rows found".into()))?;
    let set = DescriptorSet::new(values, dim, groups)?;
    if any_tag {
        set.with_source_tags(tags)
    } else {
        Ok(set)
    }
}

pub fn format_csv(set: &DescriptorSet) -> Result<String> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_writer(Vec::new());
    for i in 0..set.len() {
        let mut fields: Vec<String> = set.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        fields.push(format!("g={}", set.group(i)));
        if let Some(tags) = set.source_tags() {
            fields.push(format!("tag={}", tags[i]));
        }
        writer
            .write_record(&fields)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn encode_binary(set: &DescriptorSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * (set.values().len() + set.len()));
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    out.extend_from_slice(&(set.dim() as u64).to_le_bytes());
    for v in set.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for g in set.group_ids() {
        out.extend_from_slice(&g.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<DescriptorSet> {
    if bytes.len() < 20 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing RDE1 magic header".into()));
    }
    let read_u64 = |offset: usize| u64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
    let n = read_u64(4) as usize;
    let dim = read_u64(12) as usize;
    let expected = n
        .checked_mul(dim)
        .and_then(|nd| nd.checked_add(n))
        .and_then(|w| w.checked_mul(8))
        .and_then(|b| b.checked_add(20))
        .ok_or_else(|| Error::Format(format!("header sizes N={n}, D={dim} overflow")))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "binary payload is {} bytes, header N={n}, D={dim} implies {expected}",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(n * dim);
    for idx in 0..n * dim {
        let v = f64::from_le_bytes(bytes[20 + 8 * idx..28 + 8 * idx].try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Parse {
                row: idx / dim.max(1) + 1,
                col: idx % dim.max(1) + 1,
                msg: "non-finite value".into(),
            });
        }
        values.push(v);
    }
    let base = 20 + 8 * n * dim;
    let groups = (0..n).map(|i| read_u64(base + 8 * i)).collect();
    DescriptorSet::new(values, dim, groups)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    k: usize,
    betas: BetaWeights,
    epsilon_scale: f64,
    epsilon: f64,
    solver_mode: SolverMode,
    input_dim: usize,
    output_dim: usize,
    seed: u64,
    achieved_ratio: f64,
    iterations: usize,
    eigenvalues: Vec<f64>,
    /// Row-major `output_dim x input_dim`.
    projection: Vec<f64>,
}

pub fn model_to_json(model: &EmbeddingModel) -> Result<String> {
    model.validate()?;
    let (d, big_d) = model.projection.shape();
    let mut projection = Vec::with_capacity(d * big_d);
    for r in 0..d {
        projection.extend(model.projection.row(r).iter().copied());
    }
    let cfg = &model.config;
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        k: cfg.k,
        betas: cfg.betas,
        epsilon_scale: cfg.epsilon_scale,
        epsilon: cfg.epsilon,
        solver_mode: cfg.solver_mode,
        input_dim: cfg.input_dim,
        output_dim: cfg.output_dim,
        seed: cfg.seed,
        achieved_ratio: model.achieved_ratio,
        iterations: model.iterations,
        eigenvalues: model.eigenvalues.clone(),
        projection,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

pub fn model_from_json(text: &str) -> Result<EmbeddingModel> {
    let raw: serde_json::Value = serde_json::from_str(text)?;
    let format = raw.get("format").and_then(|v| v.as_str()).unwrap_or("");
    if format != MODEL_FORMAT {
        return Err(Error::Version {
            expected: MODEL_FORMAT.to_string(),
            found: format.to_string(),
        });
    }
    let version = raw.get("version").and_then(|v| v.as_u64());
    if version != Some(MODEL_VERSION as u64) {
        return Err(Error::Version {
            expected: MODEL_VERSION.to_string(),
            found: raw.get("version").map_or("none".into(), |v| v.to_string()),
        });
    }
    let file: ModelFile = serde_json::from_value(raw)?;
    if file.projection.len() != file.output_dim * file.input_dim {
        return Err(Error::Format(format!(
            "projection has {} entries, expected {}x{}",
            file.projection.len(),
            file.output_dim,
            file.input_dim
        )));
    }
    let model = EmbeddingModel {
        projection: DMatrix::from_row_slice(file.output_dim, file.input_dim, &file.projection),
        eigenvalues: file.eigenvalues,
        config: ModelConfig {
            k: file.k,
            betas: file.betas,
            epsilon_scale: file.epsilon_scale,
            epsilon: file.epsilon,
            solver_mode: file.solver_mode,
            input_dim: file.input_dim,
            output_dim: file.output_dim,
            seed: file.seed,
        },
        achieved_ratio: file.achieved_ratio,
        iterations: file.iterations,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
