//! Binary checkpoint: magic, version, length-prefixed JSON manifest, then
//! little-endian f32 parameter payloads in manifest order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::graph::{Architecture, ModelGraph};
use super::prior::{CausalPrior, WeightTable};
use crate::data::AttributeSchema;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"AALGRAPH";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SchemaManifest {
    names: Vec<String>,
    cardinalities: Vec<usize>,
    class_sharing: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct ParamManifest {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema: SchemaManifest,
    arch: Architecture,
    weights: WeightTable,
    lambda: Vec<Vec<u8>>,
    params: Vec<ParamManifest>,
}

pub fn encode_checkpoint(graph: &ModelGraph) -> Result<Vec<u8>> {
    let manifest = Manifest {
        schema: SchemaManifest {
            names: graph.schema.names().to_vec(),
            cardinalities: graph.schema.cardinalities().to_vec(),
            class_sharing: graph.schema.class_sharing().to_vec(),
        },
        arch: graph.arch.clone(),
        weights: graph.weights.clone(),
        lambda: graph.prior.matrix().to_vec(),
        params: graph.params.iter().map(|(_, p)| ParamManifest { name: p.name.clone(), shape: p.value.shape().to_vec() }).collect(),
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in graph.params.iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let slice = bytes
        .get(*at..*at + n)
        .ok_or_else(|| Error::Length(format!("checkpoint truncated in {what} at byte {at}")))?;
    *at += n;
    Ok(slice)
}

fn read_u32(bytes: &[u8], at: &mut usize, what: &str) -> Result<u32> {
    let b = take(bytes, at, 4, what)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Rebuilds a graph from checkpoint bytes. With `expected`, the stored schema must match it.
pub fn decode_checkpoint(bytes: &[u8], expected: Option<&AttributeSchema>) -> Result<ModelGraph> {
    let mut at = 0;
    if take(bytes, &mut at, 8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a model checkpoint".into()));
    }
    let version = read_u32(bytes, &mut at, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let len = read_u32(bytes, &mut at, "manifest length")? as usize;
    let json = take(bytes, &mut at, len, "manifest")?;
    let manifest: Manifest = serde_json::from_slice(json).map_err(|e| Error::Format(format!("manifest: {e}")))?;

    let names: Vec<&str> = manifest.schema.names.iter().map(String::as_str).collect();
    let schema = AttributeSchema::new(&names, &manifest.schema.cardinalities, &manifest.schema.class_sharing)?;
    if let Some(exp) = expected {
        if exp.cardinalities() != schema.cardinalities() {
            return Err(Error::Schema(format!(
                "checkpoint cardinalities {:?} differ from {:?}",
                schema.cardinalities(),
                exp.cardinalities()
            )));
        }
    }
    let prior = CausalPrior::from_matrix(manifest.lambda)?;
    let mut graph = ModelGraph::new(schema, manifest.arch, manifest.weights, prior, 0)?;
    if graph.params.len() != manifest.params.len() {
        return Err(Error::Format(format!(
            "checkpoint lists {} parameters, architecture has {}",
            manifest.params.len(),
            graph.params.len()
        )));
    }
    for entry in &manifest.params {
        let id = graph.params.id(&entry.name).map_err(|_| Error::Format(format!("unknown parameter `{}`", entry.name)))?;
        if graph.params.value(id).shape() != entry.shape.as_slice() {
            return Err(Error::Format(format!("parameter `{}` has shape {:?}", entry.name, entry.shape)));
        }
        let n: usize = entry.shape.iter().product();
        let raw = take(bytes, &mut at, 4 * n, "parameters")?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        *graph.params.value_mut(id) = Tensor::new(&entry.shape, data)?;
    }
    if at != bytes.len() {
        return Err(Error::Length(format!("{} trailing bytes after parameters", bytes.len() - at)));
    }
    Ok(graph)
}
