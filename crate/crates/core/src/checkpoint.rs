//! Versioned JSON checkpoints. Floats are written in shortest round-trip form,
//! so loading reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use odernn_autodiff::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InputNorm, ModelConfig, ModelParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format_version: u32,
    model: ModelConfig,
    input_norm: InputNorm,
    tensors: Vec<NamedTensor>,
}

pub fn to_json(params: &ModelParams) -> Result<String> {
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        model: params.config().clone(),
        input_norm: params.norm().clone(),
        tensors: params
            .names()
            .iter()
            .zip(params.tensors())
            .map(|(name, t)| NamedTensor {
                name: name.clone(),
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))
}

pub fn from_json(text: &str) -> Result<ModelParams> {
    let file: CheckpointFile = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("malformed checkpoint: {e}")))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint format version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    let named = file
        .tensors
        .into_iter()
        .map(|t| Ok((t.name, Tensor::new(t.shape, t.data)?)))
        .collect::<Result<Vec<_>>>()?;
    ModelParams::from_named(&file.model, file.input_norm, named)
}

pub fn save(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, to_json(params)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let p = ModelParams::init(&ModelConfig::default(), InputNorm::identity(), 3).unwrap();
        let back = from_json(&to_json(&p).unwrap()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let p = ModelParams::init(&ModelConfig::default(), InputNorm::identity(), 3).unwrap();
        let text = to_json(&p)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":99");
        let err = from_json(&text).unwrap_err().to_string();
        assert!(err.contains("version 99"), "{err}");
    }
}
