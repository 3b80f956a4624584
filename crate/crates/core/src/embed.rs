//! Embedding contract, the built-in hashing embedder and the `RMV1` vector
//! file format.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Chunk;
use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 256;
pub const MIN_HASH_DIM: usize = 8;
pub const NORM_TOLERANCE: f32 = 1e-4;
pub const MAGIC: &[u8; 4] = b"RMV1";

/// A single unit-normalized embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub id: String,
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f32 {
        l2_norm(&self.values)
    }
}

pub fn l2_norm(v: &[f32]) -> f32 {
    v.iter().map(|x| x * x).sum::<f32>().sqrt()
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maps text to a unit vector. Implementations must be deterministic.
pub trait Embedder: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f32>;
}

/// Signed feature hashing of lowercased character trigrams.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < MIN_HASH_DIM {
            return Err(Error::InvalidParameter(format!(
                "hash embedder dim must be at least {MIN_HASH_DIM}, got {dim}"
            )));
        }
        Ok(Self { dim })
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl Embedder for HashEmbedder {
    fn name(&self) -> &str {
        "hash-trigram"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        hash_embed_values(text, self.dim)
    }
}

fn trigram_hash(gram: &[char]) -> u64 {
    // FNV-1a over the UTF-8 bytes, then a splitmix64 finalizer so that both
    // the low bits (bucket) and the top bit (sign) are well mixed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut buf = [0u8; 4];
    for c in gram {
        for b in c.encode_utf8(&mut buf).bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Bucket and sign a trigram is hashed to.
pub fn trigram_slot(gram: &[char], dim: usize) -> (usize, f32) {
    let h = trigram_hash(gram);
    let bucket = (h % dim as u64) as usize;
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    (bucket, sign)
}

pub fn lowercase_chars(text: &str) -> Vec<char> {
    text.chars().flat_map(char::to_lowercase).collect()
}

fn hash_embed_values(text: &str, dim: usize) -> Vec<f32> {
    let chars = lowercase_chars(text);
    let mut raw = vec![0f64; dim];
    for gram in chars.windows(3) {
        let (bucket, sign) = trigram_slot(gram, dim);
        raw[bucket] += f64::from(sign);
    }
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut unit = vec![0f32; dim];
        unit[0] = 1.0;
        return unit;
    }
    raw.iter().map(|x| (x / norm) as f32).collect()
}

/// Hash-embeds `text` into a `dim`-dimensional unit vector.
pub fn hash_embed(text: &str, dim: usize) -> Result<EmbeddingVector> {
    let embedder = HashEmbedder::new(dim)?;
    Ok(EmbeddingVector {
        id: String::new(),
        values: embedder.embed(text),
    })
}

/// A collection of equal-dimension unit vectors stored contiguously.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorSet {
    dim: usize,
    ids: Vec<String>,
    values: Vec<f32>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.values.chunks_exact(self.dim.max(1)))
    }

    /// Appends a vector, checking its dimension and norm.
    pub fn push(&mut self, id: impl Into<String>, values: &[f32]) -> Result<()> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: values.len(),
            });
        }
        check_unit(&id, values)?;
        self.ids.push(id);
        self.values.extend_from_slice(values);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| self.vector(i))
    }

    pub fn to_vectors(&self) -> Vec<EmbeddingVector> {
        self.iter()
            .map(|(id, v)| EmbeddingVector {
                id: id.to_owned(),
                values: v.to_vec(),
            })
            .collect()
    }

    pub fn from_vectors(dim: usize, vectors: &[EmbeddingVector]) -> Result<Self> {
        let mut set = VectorSet::new(dim);
        for v in vectors {
            set.push(v.id.clone(), &v.values)?;
        }
        Ok(set)
    }

    pub fn id_positions(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }
}

fn check_unit(id: &str, values: &[f32]) -> Result<()> {
    let norm = l2_norm(values);
    if (norm - 1.0).abs() > NORM_TOLERANCE || !norm.is_finite() {
        return Err(Error::NotUnitNorm {
            id: id.to_owned(),
            norm,
        });
    }
    Ok(())
}

/// Embeds chunks in order; the vector id is the chunk id.
pub fn embed_chunks(chunks: &[Chunk], embedder: &dyn Embedder) -> Result<VectorSet> {
    let embedded: Vec<Vec<f32>> = chunks.par_iter().map(|c| embedder.embed(&c.text)).collect();
    let mut set = VectorSet::new(embedder.dim());
    for (chunk, values) in chunks.iter().zip(embedded) {
        set.push(chunk.chunk_id.clone(), &values)?;
    }
    Ok(set)
}

/// Embeds arbitrary `(id, text)` pairs, e.g. query quotes.
pub fn embed_texts<'a, I>(items: I, embedder: &dyn Embedder) -> Result<VectorSet>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let items: Vec<(&str, &str)> = items.into_iter().collect();
    let embedded: Vec<Vec<f32>> = items.par_iter().map(|(_, t)| embedder.embed(t)).collect();
    let mut set = VectorSet::new(embedder.dim());
    for ((id, _), values) in items.iter().zip(embedded) {
        set.push(*id, &values)?;
    }
    Ok(set)
}

/// Serializes to the `RMV1` layout: magic, dim (u32 LE), count (u64 LE),
/// `count` ids as (u16 LE byte length, UTF-8), then `count * dim` f32 LE.
pub fn save_vectors(set: &VectorSet) -> Result<Vec<u8>> {
    let dim = u32::try_from(set.dim)
        .map_err(|_| Error::InvalidParameter(format!("dim {} exceeds u32", set.dim)))?;
    let mut out = Vec::with_capacity(16 + set.values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for id in &set.ids {
        let len = u16::try_from(id.len()).map_err(|_| {
            Error::InvalidParameter(format!("id of {} bytes is too long", id.len()))
        })?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for v in &set.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Truncated(format!("{what} at byte {}", self.pos)))?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }
}

pub fn load_vectors(bytes: &[u8]) -> Result<VectorSet> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    cur.pos = MAGIC.len();
    let dim = u32::from_le_bytes(cur.take(4, "dim")?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(cur.take(8, "count")?.try_into().unwrap());
    if count > 0 && dim == 0 {
        return Err(Error::DimMismatch {
            expected: 1,
            found: 0,
        });
    }
    let count = usize::try_from(count).map_err(|_| Error::Truncated("count".into()))?;
    // every id needs at least its length prefix
    if count > bytes.len() / 2 {
        return Err(Error::Truncated(format!("{count} ids cannot fit")));
    }
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let len = u16::from_le_bytes(cur.take(2, "id length")?.try_into().unwrap()) as usize;
        let raw = cur.take(len, "id")?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| Error::InvalidParameter(format!("id {i} is not UTF-8")))?;
        ids.push(id.to_owned());
    }
    let payload_len = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Truncated("payload size overflow".into()))?;
    let payload = cur.take(payload_len, "vector payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::TrailingBytes(bytes.len() - cur.pos));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let set = VectorSet { dim, ids, values };
    for (id, v) in set.iter() {
        check_unit(id, v)?;
    }
    Ok(set)
}

pub fn read_vectors(path: &std::path::Path) -> Result<VectorSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_vectors(&bytes)
}

pub fn write_vectors(path: &std::path::Path, set: &VectorSet) -> Result<()> {
    let bytes = save_vectors(set)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
