use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Element storage. Toy models use `F64`; tensors read from external
/// checkpoints keep their original bytes so transplants are bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorData {
    F64(Vec<f64>),
    Raw { dtype: String, bytes: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn from_f64(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, ModelError> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(ModelError::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor {
            shape,
            data: TensorData::F64(values),
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: TensorData::F64(vec![0.0; n]),
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn dtype(&self) -> &str {
        match &self.data {
            TensorData::F64(_) => "F64",
            TensorData::Raw { dtype, .. } => dtype,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            TensorData::F64(v) => Some(v),
            TensorData::Raw { .. } => None,
        }
    }

    pub fn as_f64_mut(&mut self) -> Option<&mut Vec<f64>> {
        match &mut self.data {
            TensorData::F64(v) => Some(v),
            TensorData::Raw { .. } => None,
        }
    }

    /// Equality of shape, dtype and every bit of the payload.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        if self.shape != other.shape {
            return false;
        }
        match (&self.data, &other.data) {
            (TensorData::F64(a), TensorData::F64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (TensorData::Raw { dtype: da, bytes: ba }, TensorData::Raw { dtype: db, bytes: bb }) => {
                da == db && ba == bb
            }
            _ => false,
        }
    }
}

/// Parameter group of a backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    #[serde(rename = "encoder_layers")]
    Encoder,
    #[serde(rename = "pooler_layer")]
    Pooler,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Encoder => "encoder_layers",
            Group::Pooler => "pooler_layer",
        })
    }
}

/// Named backbone parameters split into encoder layers and the pooler.
///
/// Names are unique across both groups.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    encoder_layers: BTreeMap<String, Tensor>,
    pooler_layer: BTreeMap<String, Tensor>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, group: Group, name: impl Into<String>, tensor: Tensor) -> Result<(), ModelError> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(ModelError::Shape(format!("duplicate parameter name {name}")));
        }
        self.group_mut(group).insert(name, tensor);
        Ok(())
    }

    pub fn group(&self, group: Group) -> &BTreeMap<String, Tensor> {
        match group {
            Group::Encoder => &self.encoder_layers,
            Group::Pooler => &self.pooler_layer,
        }
    }

    fn group_mut(&mut self, group: Group) -> &mut BTreeMap<String, Tensor> {
        match group {
            Group::Encoder => &mut self.encoder_layers,
            Group::Pooler => &mut self.pooler_layer,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.encoder_layers.get(name).or_else(|| self.pooler_layer.get(name))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        if self.encoder_layers.contains_key(name) {
            self.encoder_layers.get_mut(name)
        } else {
            self.pooler_layer.get_mut(name)
        }
    }

    pub fn group_of(&self, name: &str) -> Option<Group> {
        if self.encoder_layers.contains_key(name) {
            Some(Group::Encoder)
        } else if self.pooler_layer.contains_key(name) {
            Some(Group::Pooler)
        } else {
            None
        }
    }

    /// All tensors, encoder group first, each group in name order.
    pub fn iter(&self) -> impl Iterator<Item = (Group, &str, &Tensor)> {
        self.encoder_layers
            .iter()
            .map(|(n, t)| (Group::Encoder, n.as_str(), t))
            .chain(self.pooler_layer.iter().map(|(n, t)| (Group::Pooler, n.as_str(), t)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (Group, &str, &mut Tensor)> {
        self.encoder_layers
            .iter_mut()
            .map(|(n, t)| (Group::Encoder, n.as_str(), t))
            .chain(self.pooler_layer.iter_mut().map(|(n, t)| (Group::Pooler, n.as_str(), t)))
    }

    pub fn len(&self) -> usize {
        self.encoder_layers.len() + self.pooler_layer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total scalar count.
    pub fn num_parameters(&self) -> usize {
        self.iter().map(|(_, _, t)| t.numel()).sum()
    }

    pub fn bit_eq(&self, other: &ParameterSet) -> bool {
        self.len() == other.len()
            && self.iter().all(|(g, n, t)| {
                other.group_of(n) == Some(g) && other.get(n).is_some_and(|o| t.bit_eq(o))
            })
    }
}

/// One incompatibility between two parameter sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMismatch {
    pub layer: String,
    pub reason: String,
}

impl fmt::Display for LayerMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.layer, self.reason)
    }
}

/// Lists every layer where the two sets differ in group, presence, shape
/// or dtype.
pub fn compatibility(a: &ParameterSet, b: &ParameterSet) -> Vec<LayerMismatch> {
    let mut out = Vec::new();
    for (group, name, ta) in a.iter() {
        match (b.group_of(name), b.get(name)) {
            (Some(gb), Some(tb)) => {
                if gb != group {
                    out.push(LayerMismatch {
                        layer: name.to_string(),
                        reason: format!("group {group} vs {gb}"),
                    });
                } else if ta.shape != tb.shape {
                    out.push(LayerMismatch {
                        layer: name.to_string(),
                        reason: format!("shape {:?} vs {:?}", ta.shape, tb.shape),
                    });
                } else if ta.dtype() != tb.dtype() {
                    out.push(LayerMismatch {
                        layer: name.to_string(),
                        reason: format!("dtype {} vs {}", ta.dtype(), tb.dtype()),
                    });
                }
            }
            _ => out.push(LayerMismatch {
                layer: name.to_string(),
                reason: "missing from second set".into(),
            }),
        }
    }
    for (_, name, _) in b.iter() {
        if a.get(name).is_none() {
            out.push(LayerMismatch {
                layer: name.to_string(),
                reason: "missing from first set".into(),
            });
        }
    }
    out
}

/// Hybrid backbone: encoder layers copied from `encoder_source`, pooler
/// copied from `pooler_source`. Both must share layer names and shapes.
pub fn ensemble_init(encoder_source: &ParameterSet, pooler_source: &ParameterSet) -> Result<ParameterSet, ModelError> {
    let mismatches = compatibility(encoder_source, pooler_source);
    if !mismatches.is_empty() {
        return Err(ModelError::Incompatible(mismatches));
    }
    Ok(ParameterSet {
        encoder_layers: encoder_source.encoder_layers.clone(),
        pooler_layer: pooler_source.pooler_layer.clone(),
    })
}
