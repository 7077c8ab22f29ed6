use std::collections::HashMap;
use std::path::{Path, PathBuf};

use safetensors::{Dtype, SafeTensors};
use serde::{Deserialize, Serialize};

use super::{ClassifierCheckpoint, Group, ModelError, ModelSpec, ParameterSet, Tensor, TensorData};

/// Where a checkpoint tensor belongs when building a backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRole {
    Backbone(Group),
    /// Task heads are never transplanted.
    Head,
}

const HEAD_PREFIXES: &[&str] = &["classifier", "cls.", "qa_outputs", "score.", "lm_head"];

/// Classifies a checkpoint tensor name following BERT-style naming:
/// anything under a `pooler` component is the pooler, task heads are
/// skipped, everything else (embeddings included) is the encoder stack.
pub fn classify_layer(name: &str) -> LayerRole {
    let bare = name.strip_prefix("model.").unwrap_or(name);
    if HEAD_PREFIXES.iter().any(|p| bare.starts_with(p)) {
        LayerRole::Head
    } else if bare.split('.').any(|part| part == "pooler") {
        LayerRole::Backbone(Group::Pooler)
    } else {
        LayerRole::Backbone(Group::Encoder)
    }
}

fn ckpt_err(path: &Path, message: impl ToString) -> ModelError {
    ModelError::Checkpoint {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn parse_dtype(s: &str) -> Option<Dtype> {
    serde_json::from_str(&format!("\"{s}\"")).ok()
}

/// Reads a safetensors file into a backbone, keeping raw bytes. Returns
/// the backbone and the names of skipped head tensors.
pub fn load_safetensors(path: &Path) -> Result<(ParameterSet, Vec<String>), ModelError> {
    let bytes = std::fs::read(path).map_err(|e| ckpt_err(path, e))?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| ckpt_err(path, e))?;
    let mut set = ParameterSet::new();
    let mut skipped = Vec::new();
    let mut tensors = st.tensors();
    tensors.sort_by(|a, b| a.0.cmp(&b.0));
    for (name, view) in tensors {
        let group = match classify_layer(&name) {
            LayerRole::Head => {
                skipped.push(name);
                continue;
            }
            LayerRole::Backbone(g) => g,
        };
        let data = if view.dtype() == Dtype::F64 {
            let v = view
                .data()
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            TensorData::F64(v)
        } else {
            TensorData::Raw {
                dtype: view.dtype().to_string(),
                bytes: view.data().to_vec(),
            }
        };
        set.insert(
            group,
            name,
            Tensor {
                shape: view.shape().to_vec(),
                data,
            },
        )?;
    }
    Ok((set, skipped))
}

/// Writes a backbone as safetensors; the group of each tensor is recorded
/// in the header metadata.
pub fn save_safetensors(set: &ParameterSet, path: &Path) -> Result<(), ModelError> {
    let mut owned: Vec<(String, Dtype, Vec<usize>, Vec<u8>)> = Vec::with_capacity(set.len());
    let mut meta = HashMap::new();
    for (group, name, t) in set.iter() {
        let (dtype, bytes) = match &t.data {
            TensorData::F64(v) => (Dtype::F64, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            TensorData::Raw { dtype, bytes } => (
                parse_dtype(dtype).ok_or_else(|| ckpt_err(path, format!("unknown dtype {dtype}")))?,
                bytes.clone(),
            ),
        };
        meta.insert(name.to_string(), group.to_string());
        owned.push((name.to_string(), dtype, t.shape.clone(), bytes));
    }
    let views = owned
        .iter()
        .map(|(n, d, s, b)| {
            safetensors::tensor::TensorView::new(*d, s.clone(), b)
                .map(|v| (n.clone(), v))
                .map_err(|e| ckpt_err(path, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let bytes = safetensors::serialize(views, Some(meta)).map_err(|e| ckpt_err(path, e))?;
    std::fs::write(path, bytes).map_err(|e| ckpt_err(path, e))
}

/// A backbone read from disk, with the architecture when the checkpoint
/// carries one.
#[derive(Debug, Clone)]
pub struct LoadedBackbone {
    pub backbone: ParameterSet,
    pub spec: Option<ModelSpec>,
    pub skipped: Vec<String>,
}

/// Loads a backbone from `.safetensors` or a JSON classifier checkpoint.
pub fn load_backbone(path: &Path) -> Result<LoadedBackbone, ModelError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("safetensors") => {
            let (backbone, skipped) = load_safetensors(path)?;
            Ok(LoadedBackbone {
                backbone,
                spec: None,
                skipped,
            })
        }
        _ => {
            let ckpt = load_json_checkpoint(path)?;
            Ok(LoadedBackbone {
                backbone: ckpt.backbone,
                spec: Some(ckpt.spec),
                skipped: ckpt.head.into_keys().collect(),
            })
        }
    }
}

pub fn load_json_checkpoint(path: &Path) -> Result<ClassifierCheckpoint, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ckpt_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| ckpt_err(path, e))
}

pub fn save_json_checkpoint(ckpt: &ClassifierCheckpoint, path: &Path) -> Result<(), ModelError> {
    let text = serde_json::to_string(ckpt).map_err(|e| ckpt_err(path, e))?;
    std::fs::write(path, text).map_err(|e| ckpt_err(path, e))
}

/// Maps backbone groups to source checkpoints for a transplant.
///
/// ```toml
/// encoder_layers = "structbert.safetensors"
/// pooler_layer = "roberta.safetensors"
/// head_seed = 7
/// ```
///
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleManifest {
    pub encoder_layers: PathBuf,
    pub pooler_layer: PathBuf,
    #[serde(default)]
    pub head_seed: u64,
}

impl EnsembleManifest {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ckpt_err(path, e))?;
        let mut m: EnsembleManifest = toml::from_str(&text).map_err(|e| ckpt_err(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut m.encoder_layers, &mut m.pooler_layer] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bert_style_names() {
        assert_eq!(classify_layer("bert.pooler.dense.weight"), LayerRole::Backbone(Group::Pooler));
        assert_eq!(classify_layer("pooler.dense.bias"), LayerRole::Backbone(Group::Pooler));
        assert_eq!(
            classify_layer("bert.encoder.layer.0.attention.self.query.weight"),
            LayerRole::Backbone(Group::Encoder)
        );
        assert_eq!(classify_layer("embeddings.word_embeddings.weight"), LayerRole::Backbone(Group::Encoder));
        assert_eq!(classify_layer("classifier.weight"), LayerRole::Head);
        assert_eq!(classify_layer("cls.predictions.bias"), LayerRole::Head);
    }

    #[test]
    fn safetensors_roundtrip_keeps_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = ParameterSet::new();
        set.insert(Group::Encoder, "enc.w", Tensor::from_f64(vec![2], vec![1.5, -0.0]).unwrap())
            .unwrap();
        set.insert(
            Group::Pooler,
            "pooler.dense.weight",
            Tensor {
                shape: vec![2],
                data: TensorData::Raw {
                    dtype: "F32".into(),
                    bytes: [1.0f32, 2.0].iter().flat_map(|x| x.to_le_bytes()).collect(),
                },
            },
        )
        .unwrap();
        let path = dir.path().join("a.safetensors");
        save_safetensors(&set, &path).unwrap();
        let (back, skipped) = load_safetensors(&path).unwrap();
        assert!(skipped.is_empty());
        assert!(back.bit_eq(&set));
    }

    #[test]
    fn json_checkpoint_roundtrip_is_bit_exact() {
        use crate::model::{ClassifierModel, EncoderRegistry};
        let dir = tempfile::tempdir().unwrap();
        let model = ClassifierModel::new(&EncoderRegistry::default(), ModelSpec::default(), 11).unwrap();
        let ckpt = model.checkpoint();
        let path = dir.path().join("m.json");
        save_json_checkpoint(&ckpt, &path).unwrap();
        let back = load_json_checkpoint(&path).unwrap();
        assert!(back.backbone.bit_eq(&ckpt.backbone));
        for (name, t) in &ckpt.head {
            let (a, b) = (t.as_f64().unwrap(), back.head[name].as_f64().unwrap());
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()), "{name}");
        }
    }

    #[test]
    fn manifest_paths_resolve_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ens.toml");
        std::fs::write(&p, "encoder_layers = \"a.json\"\npooler_layer = \"/abs/b.json\"\n").unwrap();
        let m = EnsembleManifest::load(&p).unwrap();
        assert_eq!(m.encoder_layers, dir.path().join("a.json"));
        assert_eq!(m.pooler_layer, PathBuf::from("/abs/b.json"));
        std::fs::write(&p, "encoder_layers = \"a\"\npooler_layer = \"b\"\nextra = 1\n").unwrap();
        assert!(EnsembleManifest::load(&p).is_err());
    }
}
