//! Sample files, split manifests, checkpoints and metric CSVs.

use std::fmt::Write as _;
use std::path::Path;

use aal_core::data::{AttributeSchema, CausalEdge, Dataset, GcdrSplit, Role, Sample, SplitEntry};
use aal_core::model::{decode_checkpoint, encode_checkpoint, ModelGraph};
use aal_core::numerics::Tensor;
use aal_core::training::{EpochRecord, Variant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunId;
use crate::error::{io_err, CliError, Result};

pub const SAMPLES_MAGIC: &[u8; 8] = b"AALSAMPL";
pub const SAMPLES_VERSION: u32 = 1;
pub const MANIFEST_HEADER: &str = "# aal split manifest v1";
pub const CSV_HEADER: &str = "run_id,variant,stage,epoch,split,metric,value";

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Serialize, Deserialize)]
struct SchemaHeader {
    names: Vec<String>,
    cardinalities: Vec<usize>,
    class_sharing: Vec<bool>,
}

impl SchemaHeader {
    fn of(schema: &AttributeSchema) -> Self {
        Self {
            names: schema.names().to_vec(),
            cardinalities: schema.cardinalities().to_vec(),
            class_sharing: schema.class_sharing().to_vec(),
        }
    }

    fn schema(&self) -> aal_core::Result<AttributeSchema> {
        let names: Vec<&str> = self.names.iter().map(String::as_str).collect();
        AttributeSchema::new(&names, &self.cardinalities, &self.class_sharing)
    }
}

#[derive(Serialize, Deserialize)]
struct SamplesHeader {
    schema: SchemaHeader,
    item_shape: Vec<usize>,
    count: usize,
}

/// Magic, version, JSON header length and header, then per sample its
/// attributes as `u32` followed by its features as `f32`, all little-endian.
pub fn encode_samples(data: &Dataset) -> Vec<u8> {
    let header = SamplesHeader { schema: SchemaHeader::of(&data.schema), item_shape: data.item_shape.clone(), count: data.len() };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + data.len() * (4 * data.item_shape.iter().product::<usize>() + 12));
    out.extend_from_slice(SAMPLES_MAGIC);
    out.extend_from_slice(&SAMPLES_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for s in &data.samples {
        for &a in &s.attrs {
            out.extend_from_slice(&(a as u32).to_le_bytes());
        }
        for v in s.x.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, path: &Path) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(CliError::Parse { path: path.to_path_buf(), message: "truncated sample file".into() });
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn u32_at(bytes: &mut &[u8], path: &Path) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, 4, path)?.try_into().expect("4 bytes")))
}

pub fn decode_samples(mut bytes: &[u8], path: &Path) -> Result<Dataset> {
    let bad = |message: String| CliError::Parse { path: path.to_path_buf(), message };
    if take(&mut bytes, 8, path)? != SAMPLES_MAGIC {
        return Err(bad("not a sample file".into()));
    }
    let version = u32_at(&mut bytes, path)?;
    if version != SAMPLES_VERSION {
        return Err(bad(format!("sample file version {version}, expected {SAMPLES_VERSION}")));
    }
    let len = u32_at(&mut bytes, path)? as usize;
    let header: SamplesHeader = serde_json::from_slice(take(&mut bytes, len, path)?).map_err(|e| bad(e.to_string()))?;
    let schema = header.schema.schema()?;
    let width = schema.width();
    let item: usize = header.item_shape.iter().product();
    let mut samples = Vec::with_capacity(header.count);
    for _ in 0..header.count {
        let attrs = (0..width).map(|_| u32_at(&mut bytes, path).map(|a| a as usize)).collect::<Result<Vec<_>>>()?;
        let raw = take(&mut bytes, 4 * item, path)?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        samples.push(Sample { x: Tensor::new(&header.item_shape, values)?, attrs });
    }
    if !bytes.is_empty() {
        return Err(bad(format!("{} trailing bytes", bytes.len())));
    }
    Ok(Dataset::new(schema, header.item_shape, samples)?)
}

pub fn load_samples(path: &Path) -> Result<Dataset> {
    decode_samples(&read(path)?, path)
}

fn schema_line(schema: &AttributeSchema) -> String {
    let parts: Vec<String> = (0..schema.width())
        .map(|j| {
            let shared = if schema.is_class_sharing(j) { ":shared" } else { "" };
            format!("{}:{}{shared}", schema.name(j), schema.k(j))
        })
        .collect();
    parts.join(",")
}

/// Split manifest: `#` header lines, then `index<TAB>role<TAB>a1,..,am+1` per sample.
pub fn encode_manifest(split: &GcdrSplit, schema: &AttributeSchema, edges: &[CausalEdge]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n# schema {}\n", schema_line(schema));
    if !edges.is_empty() {
        let e: Vec<String> = edges.iter().map(|e| format!("{}->{}", e.cause, e.effect)).collect();
        out.push_str(&format!("# causal_edges {}\n", e.join(",")));
    }
    for e in &split.entries {
        let attrs: Vec<String> = e.attrs.iter().map(usize::to_string).collect();
        out.push_str(&format!("{}\t{}\t{}\n", e.index, e.role.as_str(), attrs.join(",")));
    }
    out
}

/// Parsed manifest. The schema line is kept verbatim for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub schema_line: Option<String>,
    pub causal_edges: Option<String>,
    pub split: GcdrSplit,
}

pub fn decode_manifest(text: &str, path: &Path) -> Result<Manifest> {
    let bad = |line: usize, message: String| CliError::Parse { path: path.to_path_buf(), message: format!("line {line}: {message}") };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim_end() == MANIFEST_HEADER => {}
        _ => return Err(bad(1, format!("expected `{MANIFEST_HEADER}`"))),
    }
    let (mut schema_line, mut causal_edges, mut entries) = (None, None, Vec::new());
    for (n, line) in lines {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(s) = rest.strip_prefix("schema ") {
                schema_line = Some(s.trim().to_string());
            } else if let Some(s) = rest.strip_prefix("causal_edges ") {
                causal_edges = Some(s.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(bad(n + 1, format!("expected 3 tab-separated columns, got {}", cols.len())));
        }
        let index = cols[0].parse().map_err(|e| bad(n + 1, format!("index: {e}")))?;
        let role = Role::parse(cols[1]).ok_or_else(|| bad(n + 1, format!("unknown role `{}`", cols[1])))?;
        let attrs = cols[2]
            .split(',')
            .map(|a| a.parse::<usize>().map_err(|e| bad(n + 1, format!("attribute `{a}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        entries.push(SplitEntry { index, role, attrs });
    }
    Ok(Manifest { schema_line, causal_edges, split: GcdrSplit::new(entries) })
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    decode_manifest(&text, path)
}

/// Problems that tie a manifest to the wrong sample file.
pub fn manifest_mismatches(manifest: &Manifest, data: &Dataset) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(line) = &manifest.schema_line {
        if *line != schema_line(&data.schema) {
            out.push(format!("manifest schema `{line}` differs from sample schema `{}`", schema_line(&data.schema)));
        }
    }
    for e in &manifest.split.entries {
        match data.samples.get(e.index) {
            None => out.push(format!("index {} beyond {} samples", e.index, data.len())),
            Some(s) if s.attrs != e.attrs => {
                out.push(format!("index {}: manifest attributes {:?} differ from sample {:?}", e.index, e.attrs, s.attrs))
            }
            _ => {}
        }
    }
    out
}

pub fn save_checkpoint(path: &Path, graph: &ModelGraph) -> Result<()> {
    write(path, &encode_checkpoint(graph)?)
}

pub fn load_checkpoint(path: &Path, schema: Option<&AttributeSchema>) -> Result<ModelGraph> {
    Ok(decode_checkpoint(&read(path)?, schema)?)
}

/// Metric rows for one run; floats carry six decimals.
pub fn csv_rows(run_id: &RunId, variant: Variant, records: &[EpochRecord]) -> String {
    let mut out = String::new();
    for r in records {
        for (metric, value) in &r.metrics {
            let _ = writeln!(out, "{run_id},{variant},{},{},{},{metric},{value:.6}", r.stage, r.epoch, r.split);
        }
    }
    out
}
