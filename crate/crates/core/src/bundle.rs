//! Activation bundles: the on-disk hand-off between a model runner and the
//! analyses in this crate.
//!
//! A bundle is a directory:
//!
//! ```text
//! manifest.json     model shape, prompt metadata, tensor index
//! values.bin        final-token value vectors, one [H, d_v] record per (layer, prompt)
//! attention.bin     final-token attention rows, one [H, T] record per (layer, prompt)
//! keys.bin          key projections, one [d_model, d_k] record per (layer, head)
//! entropy.bin       predictive entropy (bits), one rank-0 record per prompt
//! ```
//!
//! Every record is self-describing:
//!
//! ```text
//! magic    8 bytes  "BGEOTNSR"
//! version  u32 LE
//! rank     u32 LE
//! dims     u64 LE × rank
//! payload  f32 LE × prod(dims), row-major
//! crc      u32 LE, CRC-32 (IEEE) of every preceding byte of the record
//! ```
//!
//! `manifest.json` fields:
//!
//! | field | meaning |
//! |---|---|
//! | `format_version` | record/manifest layout version, currently 1 |
//! | `model_name` | free-form model identifier |
//! | `n_layers`, `n_heads`, `d_v`, `d_k`, `d_model` | model shape |
//! | `prompt_ids` | prompt order used by every per-prompt record |
//! | `per_prompt[]` | `id`, `token_count`, `predictive_entropy_bits`, optional `domain`, optional `sula_ref` |
//! | `tensor_index[]` | `kind`, optional `layer`/`prompt`/`head`, byte `offset` into the kind's file, `shape` |
//! | `provenance[]` | human-readable history of transformations applied |
//! | `precision` | optional note on the inference precision the runner used |

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"BGEOTNSR";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
/// Tolerance on attention-row sums.
pub const ATTENTION_SUM_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    ValuesFinalToken,
    AttentionFinalToken,
    KeyMatrix,
    LogitsEntropy,
}

impl TensorKind {
    pub const ALL: [TensorKind; 4] = [
        TensorKind::ValuesFinalToken,
        TensorKind::AttentionFinalToken,
        TensorKind::KeyMatrix,
        TensorKind::LogitsEntropy,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TensorKind::ValuesFinalToken => "values.bin",
            TensorKind::AttentionFinalToken => "attention.bin",
            TensorKind::KeyMatrix => "keys.bin",
            TensorKind::LogitsEntropy => "entropy.bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMeta {
    pub id: String,
    pub token_count: usize,
    pub predictive_entropy_bits: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    /// Id of the SULA prompt this row was generated from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sula_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub kind: TensorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
    pub offset: u64,
    pub shape: Vec<usize>,
}

impl TensorEntry {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn record_len(&self) -> u64 {
        record_len(self.shape.len(), self.numel())
    }

    fn key(&self) -> TensorKey {
        (self.kind, self.layer, self.prompt, self.head)
    }
}

type TensorKey = (TensorKind, Option<usize>, Option<usize>, Option<usize>);

fn record_len(rank: usize, numel: usize) -> u64 {
    (8 + 4 + 4 + 8 * rank + 4 * numel + 4) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_v: usize,
    pub d_k: usize,
    pub d_model: usize,
}

impl ModelDims {
    /// Width of the head-concatenated value vector.
    pub fn value_width(&self) -> usize {
        self.n_heads * self.d_v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub model_name: String,
    #[serde(flatten)]
    pub dims: ModelDims,
    pub prompt_ids: Vec<String>,
    pub per_prompt: Vec<PromptMeta>,
    pub tensor_index: Vec<TensorEntry>,
    #[serde(default)]
    pub provenance: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<String>,
}

/// A bundle held in memory.
///
/// `values[layer][prompt]` is the `[H, d_v]` row-major value block,
/// `attention[layer][prompt]` the `[H, T]` attention rows, and
/// `keys[layer][head]` the `[d_model, d_k]` key projection. `attention` and
/// `keys` may be empty when the runner did not capture them.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBundle {
    pub model_name: String,
    pub dims: ModelDims,
    pub prompts: Vec<PromptMeta>,
    pub values: Vec<Vec<Vec<f32>>>,
    pub attention: Vec<Vec<Vec<f32>>>,
    pub keys: Vec<Vec<Vec<f32>>>,
    pub provenance: Vec<String>,
    pub precision: Option<String>,
}

impl ActivationBundle {
    /// An empty bundle with the given shape.
    pub fn empty(model_name: impl Into<String>, dims: ModelDims) -> Self {
        Self {
            model_name: model_name.into(),
            dims,
            prompts: Vec::new(),
            values: vec![Vec::new(); dims.n_layers],
            attention: Vec::new(),
            keys: Vec::new(),
            provenance: Vec::new(),
            precision: None,
        }
    }

    pub fn n_prompts(&self) -> usize {
        self.prompts.len()
    }

    pub fn prompt_ids(&self) -> Vec<String> {
        self.prompts.iter().map(|p| p.id.clone()).collect()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.prompts.iter().map(|p| p.predictive_entropy_bits).collect()
    }

    pub fn has_attention(&self) -> bool {
        !self.attention.is_empty()
    }

    pub fn has_keys(&self) -> bool {
        !self.keys.is_empty()
    }

    pub fn prompt_index(&self, id: &str) -> Option<usize> {
        self.prompts.iter().position(|p| p.id == id)
    }

    /// Value rows of one layer widened to f64, one row per prompt.
    pub fn layer_values_f64(&self, layer: usize) -> Vec<Vec<f64>> {
        self.values[layer]
            .iter()
            .map(|r| r.iter().map(|&x| f64::from(x)).collect())
            .collect()
    }

    /// Shape consistency between the header and every tensor.
    pub fn check_shapes(&self) -> Result<()> {
        let d = self.dims;
        if self.values.len() != d.n_layers {
            return Err(Error::Shape(format!(
                "values hold {} layers, manifest declares {}",
                self.values.len(),
                d.n_layers
            )));
        }
        for (l, layer) in self.values.iter().enumerate() {
            if layer.len() != self.prompts.len() {
                return Err(Error::Shape(format!(
                    "layer {l} has {} value rows for {} prompts",
                    layer.len(),
                    self.prompts.len()
                )));
            }
            if let Some((p, r)) = layer.iter().enumerate().find(|(_, r)| r.len() != d.value_width()) {
                return Err(Error::Shape(format!(
                    "values[{l}][{p}] has {} floats, expected H·d_v = {}",
                    r.len(),
                    d.value_width()
                )));
            }
        }
        if self.has_attention() {
            if self.attention.len() != d.n_layers {
                return Err(Error::Shape(format!(
                    "attention holds {} layers, expected {}",
                    self.attention.len(),
                    d.n_layers
                )));
            }
            for (l, layer) in self.attention.iter().enumerate() {
                if layer.len() != self.prompts.len() {
                    return Err(Error::Shape(format!("attention layer {l} prompt count mismatch")));
                }
                for (p, rows) in layer.iter().enumerate() {
                    let t = self.prompts[p].token_count;
                    if t == 0 || rows.len() != d.n_heads * t {
                        return Err(Error::Shape(format!(
                            "attention[{l}][{p}] has {} floats, expected H·T = {}",
                            rows.len(),
                            d.n_heads * t
                        )));
                    }
                }
            }
        }
        if self.has_keys() {
            if self.keys.len() != d.n_layers {
                return Err(Error::Shape(format!(
                    "keys hold {} layers, expected {}",
                    self.keys.len(),
                    d.n_layers
                )));
            }
            for (l, heads) in self.keys.iter().enumerate() {
                if heads.len() != d.n_heads
                    || heads.iter().any(|k| k.len() != d.d_model * d.d_k)
                {
                    return Err(Error::Shape(format!(
                        "keys[{l}] must hold {} matrices of d_model·d_k = {} floats",
                        d.n_heads,
                        d.d_model * d.d_k
                    )));
                }
            }
        }
        if let Some(p) = self.prompts.iter().find(|p| !(p.predictive_entropy_bits >= 0.0)) {
            return Err(Error::Invariant(format!(
                "prompt {} has predictive entropy {}",
                p.id, p.predictive_entropy_bits
            )));
        }
        Ok(())
    }
}

pub(crate) fn encode_record(shape: &[usize], data: &[f32]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(record_len(shape.len(), data.len()) as usize);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Decode one record; `file`/`offset` only label errors.
pub(crate) fn decode_record(buf: &[u8], file: &str, offset: u64) -> Result<(Vec<usize>, Vec<f32>)> {
    let bad = || Error::Format(format!("{file} at offset {offset}"));
    if buf.len() < 20 || buf[..8] != MAGIC {
        return Err(bad());
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let rank = u32::from_le_bytes(buf[12..16].try_into().expect("4 bytes")) as usize;
    let dims_end = 16 + 8 * rank;
    if buf.len() < dims_end + 4 {
        return Err(bad());
    }
    let shape: Vec<usize> = buf[16..dims_end]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")) as usize)
        .collect();
    let numel: usize = shape.iter().product();
    let payload_end = dims_end + 4 * numel;
    if buf.len() != payload_end + 4 {
        return Err(bad());
    }
    let stored = u32::from_le_bytes(buf[payload_end..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&buf[..payload_end]);
    if stored != computed {
        return Err(Error::Checksum {
            file: file.to_string(),
            offset,
            stored,
            computed,
        });
    }
    let data = buf[dims_end..payload_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((shape, data))
}

struct KindWriter {
    out: BufWriter<File>,
    path: PathBuf,
    offset: u64,
}

impl KindWriter {
    fn create(dir: &Path, kind: TensorKind) -> Result<Self> {
        let path = dir.join(kind.file_name());
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            out: BufWriter::new(file),
            path,
            offset: 0,
        })
    }

    fn push(&mut self, shape: &[usize], data: &[f32]) -> Result<u64> {
        let rec = encode_record(shape, data);
        self.out.write_all(&rec).map_err(|e| Error::io(&self.path, e))?;
        let at = self.offset;
        self.offset += rec.len() as u64;
        Ok(at)
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Write `bundle` to the directory `path` (created if missing) and return the
/// manifest that was written.
pub fn write_bundle(bundle: &ActivationBundle, path: &Path) -> Result<BundleManifest> {
    bundle.check_shapes()?;
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    let d = bundle.dims;
    let mut index = Vec::new();

    let mut w = KindWriter::create(path, TensorKind::ValuesFinalToken)?;
    for (l, layer) in bundle.values.iter().enumerate() {
        for (p, v) in layer.iter().enumerate() {
            let shape = vec![d.n_heads, d.d_v];
            let offset = w.push(&shape, v)?;
            index.push(TensorEntry {
                kind: TensorKind::ValuesFinalToken,
                layer: Some(l),
                prompt: Some(p),
                head: None,
                offset,
                shape,
            });
        }
    }
    w.finish()?;

    let mut w = KindWriter::create(path, TensorKind::AttentionFinalToken)?;
    for (l, layer) in bundle.attention.iter().enumerate() {
        for (p, a) in layer.iter().enumerate() {
            let shape = vec![d.n_heads, bundle.prompts[p].token_count];
            let offset = w.push(&shape, a)?;
            index.push(TensorEntry {
                kind: TensorKind::AttentionFinalToken,
                layer: Some(l),
                prompt: Some(p),
                head: None,
                offset,
                shape,
            });
        }
    }
    w.finish()?;

    let mut w = KindWriter::create(path, TensorKind::KeyMatrix)?;
    for (l, heads) in bundle.keys.iter().enumerate() {
        for (h, k) in heads.iter().enumerate() {
            let shape = vec![d.d_model, d.d_k];
            let offset = w.push(&shape, k)?;
            index.push(TensorEntry {
                kind: TensorKind::KeyMatrix,
                layer: Some(l),
                prompt: None,
                head: Some(h),
                offset,
                shape,
            });
        }
    }
    w.finish()?;

    let mut w = KindWriter::create(path, TensorKind::LogitsEntropy)?;
    for (p, meta) in bundle.prompts.iter().enumerate() {
        let offset = w.push(&[], &[meta.predictive_entropy_bits as f32])?;
        index.push(TensorEntry {
            kind: TensorKind::LogitsEntropy,
            layer: None,
            prompt: Some(p),
            head: None,
            offset,
            shape: Vec::new(),
        });
    }
    w.finish()?;

    let manifest = BundleManifest {
        format_version: FORMAT_VERSION,
        model_name: bundle.model_name.clone(),
        dims: d,
        prompt_ids: bundle.prompt_ids(),
        per_prompt: bundle.prompts.clone(),
        tensor_index: index,
        provenance: bundle.provenance.clone(),
        precision: bundle.precision.clone(),
    };
    let mpath = path.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&mpath, text + "\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Bytes and records fetched from disk by a reader.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoStats {
    pub records_read: u64,
    pub bytes_read: u64,
}

/// Lazy reader: opening a bundle reads only `manifest.json`; each tensor is
/// fetched (and checksummed) when requested.
pub struct BundleReader {
    dir: PathBuf,
    manifest: BundleManifest,
    index: HashMap<TensorKey, usize>,
    strict: bool,
    files: Mutex<HashMap<TensorKind, File>>,
    records_read: AtomicU64,
    bytes_read: AtomicU64,
}

impl std::fmt::Debug for BundleReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BundleReader")
            .field("dir", &self.dir)
            .field("strict", &self.strict)
            .finish_non_exhaustive()
    }
}

/// Open a bundle directory. With `strict`, every fetched tensor is checked for
/// non-finite values and attention rows for normalization.
pub fn read_bundle(path: &Path, strict: bool) -> Result<BundleReader> {
    BundleReader::open(path, strict)
}

impl BundleReader {
    pub fn open(path: &Path, strict: bool) -> Result<Self> {
        let mpath = path.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: BundleManifest = serde_json::from_str(&text)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: manifest.format_version,
                supported: FORMAT_VERSION,
            });
        }
        let ids: Vec<&String> = manifest.per_prompt.iter().map(|p| &p.id).collect();
        if ids.len() != manifest.prompt_ids.len()
            || ids.iter().zip(&manifest.prompt_ids).any(|(a, b)| *a != b)
        {
            return Err(Error::Shape("prompt_ids disagree with per_prompt".into()));
        }
        let index = manifest
            .tensor_index
            .iter()
            .enumerate()
            .map(|(i, e)| (e.key(), i))
            .collect();
        Ok(Self {
            dir: path.to_path_buf(),
            manifest,
            index,
            strict,
            files: Mutex::new(HashMap::new()),
            records_read: AtomicU64::new(0),
            bytes_read: AtomicU64::new(0),
        })
    }

    pub fn manifest(&self) -> &BundleManifest {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn io_stats(&self) -> IoStats {
        IoStats {
            records_read: self.records_read.load(Ordering::Relaxed),
            bytes_read: self.bytes_read.load(Ordering::Relaxed),
        }
    }

    fn entry(&self, key: TensorKey) -> Result<&TensorEntry> {
        self.index
            .get(&key)
            .map(|&i| &self.manifest.tensor_index[i])
            .ok_or_else(|| Error::InvalidInput(format!("bundle has no tensor {key:?}")))
    }

    /// Raw bytes of one record.
    fn fetch(&self, entry: &TensorEntry) -> Result<Vec<u8>> {
        let mut files = self.files.lock().expect("reader file table poisoned");
        let file = match files.entry(entry.kind) {
            std::collections::hash_map::Entry::Occupied(o) => o.into_mut(),
            std::collections::hash_map::Entry::Vacant(v) => {
                let p = self.dir.join(entry.kind.file_name());
                v.insert(File::open(&p).map_err(|e| Error::io(&p, e))?)
            }
        };
        let p = self.dir.join(entry.kind.file_name());
        file.seek(SeekFrom::Start(entry.offset))
            .map_err(|e| Error::io(&p, e))?;
        let mut buf = vec![0u8; entry.record_len() as usize];
        file.read_exact(&mut buf).map_err(|e| Error::io(&p, e))?;
        self.records_read.fetch_add(1, Ordering::Relaxed);
        self.bytes_read.fetch_add(buf.len() as u64, Ordering::Relaxed);
        Ok(buf)
    }

    /// Read and decode the record behind `entry`.
    pub fn read_entry(&self, entry: &TensorEntry) -> Result<Vec<f32>> {
        let buf = self.fetch(entry)?;
        let (shape, data) = decode_record(&buf, entry.kind.file_name(), entry.offset)?;
        if shape != entry.shape {
            return Err(Error::Shape(format!(
                "{:?} record at offset {} has shape {shape:?}, manifest says {:?}",
                entry.kind, entry.offset, entry.shape
            )));
        }
        if self.strict {
            if let Some(v) = record_violations(entry, &data).into_iter().next() {
                return Err(Error::Invariant(v.to_string()));
            }
        }
        Ok(data)
    }

    pub fn values(&self, layer: usize, prompt: usize) -> Result<Vec<f32>> {
        let e = self.entry((TensorKind::ValuesFinalToken, Some(layer), Some(prompt), None))?;
        self.read_entry(e)
    }

    pub fn attention(&self, layer: usize, prompt: usize) -> Result<Vec<f32>> {
        let e = self.entry((TensorKind::AttentionFinalToken, Some(layer), Some(prompt), None))?;
        self.read_entry(e)
    }

    pub fn key_matrix(&self, layer: usize, head: usize) -> Result<Vec<f32>> {
        let e = self.entry((TensorKind::KeyMatrix, Some(layer), None, Some(head)))?;
        self.read_entry(e)
    }

    pub fn logits_entropy(&self, prompt: usize) -> Result<f32> {
        let e = self.entry((TensorKind::LogitsEntropy, None, Some(prompt), None))?;
        Ok(self.read_entry(e)?[0])
    }

    /// All value rows of one layer.
    pub fn layer_values(&self, layer: usize) -> Result<Vec<Vec<f32>>> {
        (0..self.manifest.per_prompt.len())
            .map(|p| self.values(layer, p))
            .collect()
    }

    fn has_kind(&self, kind: TensorKind) -> bool {
        self.manifest.tensor_index.iter().any(|e| e.kind == kind)
    }

    /// Materialize the whole bundle.
    pub fn load(&self) -> Result<ActivationBundle> {
        let m = &self.manifest;
        let d = m.dims;
        let n = m.per_prompt.len();
        let values = (0..d.n_layers)
            .map(|l| self.layer_values(l))
            .collect::<Result<Vec<_>>>()?;
        let attention = if self.has_kind(TensorKind::AttentionFinalToken) {
            (0..d.n_layers)
                .map(|l| (0..n).map(|p| self.attention(l, p)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let keys = if self.has_kind(TensorKind::KeyMatrix) {
            (0..d.n_layers)
                .map(|l| (0..d.n_heads).map(|h| self.key_matrix(l, h)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(ActivationBundle {
            model_name: m.model_name.clone(),
            dims: d,
            prompts: m.per_prompt.clone(),
            values,
            attention,
            keys,
            provenance: m.provenance.clone(),
            precision: m.precision.clone(),
        })
    }
}

/// Kinds of invariant violation reported by [`validate_bundle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Checksum,
    Format,
    Shape,
    Missing,
    NonFinite,
    AttentionRange,
    AttentionNormalization,
    NegativeEntropy,
    EntropyMismatch,
}

/// One invariant violation with its coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub violation: ViolationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<TensorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
    /// Flat offset within the record (or within the head's row).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.violation)?;
        if let Some(k) = self.kind {
            write!(f, " {k:?}")?;
        }
        for (name, v) in [
            ("layer", self.layer),
            ("prompt", self.prompt),
            ("head", self.head),
            ("index", self.index),
        ] {
            if let Some(v) = v {
                write!(f, " {name}={v}")?;
            }
        }
        write!(f, ": {}", self.detail)
    }
}

fn violation(v: ViolationKind, e: &TensorEntry, head: Option<usize>, index: Option<usize>, detail: String) -> Violation {
    Violation {
        violation: v,
        kind: Some(e.kind),
        layer: e.layer,
        prompt: e.prompt,
        head: head.or(e.head),
        index,
        detail,
    }
}

/// Content checks for one decoded record.
fn record_violations(entry: &TensorEntry, data: &[f32]) -> Vec<Violation> {
    let mut out = Vec::new();
    let row_len = entry.shape.last().copied().unwrap_or(1).max(1);
    let per_head = entry.kind == TensorKind::AttentionFinalToken || entry.kind == TensorKind::ValuesFinalToken;
    for (i, x) in data.iter().enumerate() {
        if !x.is_finite() {
            let (head, idx) = if per_head { (Some(i / row_len), i % row_len) } else { (None, i) };
            out.push(violation(ViolationKind::NonFinite, entry, head, Some(idx), format!("value {x}")));
        }
    }
    match entry.kind {
        TensorKind::AttentionFinalToken => {
            for (h, row) in data.chunks(row_len).enumerate() {
                if row.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                if let Some((j, x)) = row.iter().enumerate().find(|(_, &x)| !(0.0..=1.0).contains(&x)) {
                    out.push(violation(
                        ViolationKind::AttentionRange,
                        entry,
                        Some(h),
                        Some(j),
                        format!("weight {x} outside [0, 1]"),
                    ));
                }
                let s: f64 = row.iter().map(|&x| f64::from(x)).sum();
                if (s - 1.0).abs() > ATTENTION_SUM_TOL {
                    out.push(violation(
                        ViolationKind::AttentionNormalization,
                        entry,
                        Some(h),
                        None,
                        format!("row sums to {s}"),
                    ));
                }
            }
        }
        TensorKind::LogitsEntropy => {
            if let Some(x) = data.first().filter(|x| x.is_finite() && **x < 0.0) {
                out.push(violation(ViolationKind::NegativeEntropy, entry, None, None, format!("entropy {x}")));
            }
        }
        _ => {}
    }
    out
}

/// Every invariant violation in a bundle. An empty list means the bundle is
/// valid.
pub fn validate_bundle(path: &Path) -> Result<Vec<Violation>> {
    let reader = BundleReader::open(path, false)?;
    let m = reader.manifest().clone();
    let d = m.dims;
    let mut out = Vec::new();
    for p in &m.per_prompt {
        if !(p.predictive_entropy_bits >= 0.0) {
            out.push(Violation {
                violation: ViolationKind::NegativeEntropy,
                kind: None,
                layer: None,
                prompt: m.per_prompt.iter().position(|q| q.id == p.id),
                head: None,
                index: None,
                detail: format!("manifest entropy {} for {}", p.predictive_entropy_bits, p.id),
            });
        }
    }
    for e in &m.tensor_index {
        let expected: Option<Vec<usize>> = match e.kind {
            TensorKind::ValuesFinalToken => Some(vec![d.n_heads, d.d_v]),
            TensorKind::AttentionFinalToken => e
                .prompt
                .and_then(|p| m.per_prompt.get(p))
                .map(|p| vec![d.n_heads, p.token_count]),
            TensorKind::KeyMatrix => Some(vec![d.d_model, d.d_k]),
            TensorKind::LogitsEntropy => Some(Vec::new()),
        };
        if expected.as_ref() != Some(&e.shape) {
            out.push(violation(
                ViolationKind::Shape,
                e,
                None,
                None,
                format!("declared shape {:?}, expected {expected:?}", e.shape),
            ));
            continue;
        }
        let buf = match reader.fetch(e) {
            Ok(b) => b,
            Err(err) => {
                out.push(violation(ViolationKind::Missing, e, None, None, err.to_string()));
                continue;
            }
        };
        match decode_record(&buf, e.kind.file_name(), e.offset) {
            Ok((shape, data)) => {
                if shape != e.shape {
                    out.push(violation(
                        ViolationKind::Shape,
                        e,
                        None,
                        None,
                        format!("stored shape {shape:?}, manifest {:?}", e.shape),
                    ));
                    continue;
                }
                out.extend(record_violations(e, &data));
                if e.kind == TensorKind::LogitsEntropy {
                    if let Some(meta) = e.prompt.and_then(|p| m.per_prompt.get(p)) {
                        let stored = f64::from(data[0]);
                        let tol = 1e-6 * meta.predictive_entropy_bits.abs().max(1.0);
                        if data[0].is_finite() && (stored - meta.predictive_entropy_bits).abs() > tol {
                            out.push(violation(
                                ViolationKind::EntropyMismatch,
                                e,
                                None,
                                None,
                                format!("stored {stored}, manifest {}", meta.predictive_entropy_bits),
                            ));
                        }
                    }
                }
            }
            Err(Error::Checksum { stored, computed, .. }) => out.push(violation(
                ViolationKind::Checksum,
                e,
                None,
                None,
                format!("crc stored {stored:#010x}, computed {computed:#010x}"),
            )),
            Err(err) => out.push(violation(ViolationKind::Format, e, None, None, err.to_string())),
        }
    }
    // every expected tensor present
    let have: std::collections::HashSet<TensorKey> = m.tensor_index.iter().map(TensorEntry::key).collect();
    let n = m.per_prompt.len();
    let mut require = |key: TensorKey| {
        if !have.contains(&key) {
            out.push(Violation {
                violation: ViolationKind::Missing,
                kind: Some(key.0),
                layer: key.1,
                prompt: key.2,
                head: key.3,
                index: None,
                detail: "no tensor_index entry".into(),
            });
        }
    };
    for l in 0..d.n_layers {
        for p in 0..n {
            require((TensorKind::ValuesFinalToken, Some(l), Some(p), None));
        }
    }
    for p in 0..n {
        require((TensorKind::LogitsEntropy, None, Some(p), None));
    }
    Ok(out)
}
