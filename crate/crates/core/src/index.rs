//! Exact per-concept and co-occurrence frequencies over a corpus.
//!
//! The index maps every concept id to the sorted ordinals of the samples
//! containing it. Co-occurrence counts intersect posting lists starting
//! from the shortest one and stop as soon as the running intersection is
//! empty.
//!
//! On disk the index uses a small little-endian container (`CGIX`):
//!
//! ```text
//! magic "CGIX" | version u16 = 1 | flags u16 = 0 | n_samples u64 | vocab_size u32
//! vocab_size x [posting_count u64 | payload_len u64 | delta LEB128 payload]
//! n_samples  x [id_len u32 | UTF-8 id bytes]
//! ```

use std::collections::HashSet;
use std::path::Path;

use crate::error::IndexError;
use crate::vocab::ConceptId;

pub const INDEX_MAGIC: &[u8; 4] = b"CGIX";
pub const INDEX_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptIndex {
    postings: Vec<Vec<u32>>,
    sample_ids: Vec<String>,
}

impl ConceptIndex {
    /// An index over zero samples.
    pub fn empty(vocab_size: usize) -> Self {
        Self {
            postings: vec![Vec::new(); vocab_size],
            sample_ids: Vec::new(),
        }
    }

    /// Builds an index from raw postings, validating ordering and bounds.
    pub fn from_parts(postings: Vec<Vec<u32>>, sample_ids: Vec<String>) -> Result<Self, IndexError> {
        let n = sample_ids.len() as u64;
        if n > u64::from(u32::MAX) {
            return Err(IndexError::TooManySamples { n });
        }
        for (c, list) in postings.iter().enumerate() {
            let ascending = list.windows(2).all(|w| w[0] < w[1]);
            let bounded = list.last().is_none_or(|&last| u64::from(last) < n);
            if !ascending || !bounded {
                return Err(IndexError::InvalidPosting { concept: c as u32 });
            }
        }
        Ok(Self {
            postings,
            sample_ids,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.postings.len()
    }

    pub fn sample_id(&self, ordinal: u32) -> Option<&str> {
        self.sample_ids.get(ordinal as usize).map(String::as_str)
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn postings(&self, c: ConceptId) -> Result<&[u32], IndexError> {
        self.postings
            .get(c.index())
            .map(Vec::as_slice)
            .ok_or(IndexError::ConceptOutOfRange {
                id: c.0,
                vocab_size: self.vocab_size(),
            })
    }

    /// Number of samples containing concept `c`.
    pub fn frequency(&self, c: ConceptId) -> Result<u64, IndexError> {
        Ok(self.postings(c)?.len() as u64)
    }

    /// All per-concept frequencies in id order.
    pub fn frequencies(&self) -> Vec<u64> {
        self.postings.iter().map(|p| p.len() as u64).collect()
    }

    /// Number of samples containing every concept in `concepts`.
    ///
    /// Duplicate ids are ignored. An empty query is an error since the
    /// count is undefined for the empty set.
    pub fn cooccurrence_frequency(&self, concepts: &[ConceptId]) -> Result<u64, IndexError> {
        if concepts.is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        let mut ids = concepts.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut lists = ids
            .into_iter()
            .map(|c| self.postings(c))
            .collect::<Result<Vec<_>, _>>()?;
        lists.sort_by_key(|l| l.len());
        Ok(intersection_len(&lists) as u64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.n_samples() as u64).to_le_bytes());
        out.extend_from_slice(&(self.vocab_size() as u32).to_le_bytes());
        let mut payload = Vec::new();
        for list in &self.postings {
            payload.clear();
            let mut prev = 0u32;
            for (i, &ord) in list.iter().enumerate() {
                let delta = if i == 0 { ord } else { ord - prev };
                write_varint(&mut payload, u64::from(delta));
                prev = ord;
            }
            out.extend_from_slice(&(list.len() as u64).to_le_bytes());
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        for id in &self.sample_ids {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        if bytes.len() < 4 || &bytes[..4] != INDEX_MAGIC {
            return Err(IndexError::BadMagic { offset: 0 });
        }
        let mut r = Reader::new(bytes, 4);
        let version = r.u16("version")?;
        if version != INDEX_VERSION {
            return Err(IndexError::UnsupportedVersion { version, offset: 4 });
        }
        let flags = r.u16("flags")?;
        if flags != 0 {
            return Err(IndexError::UnsupportedFlags { flags, offset: 6 });
        }
        let n_samples = r.u64("n_samples")?;
        if n_samples > u64::from(u32::MAX) {
            return Err(IndexError::TooManySamples { n: n_samples });
        }
        let vocab_size = r.u32("vocab_size")? as usize;

        let mut postings = Vec::with_capacity(vocab_size.min(1 << 20));
        for concept in 0..vocab_size {
            let count = r.u64("posting count")?;
            let payload_len = r.u64("payload length")?;
            let payload_start = r.pos;
            let payload = r.take(to_usize(payload_len, payload_start)?, "posting payload")?;
            if count > n_samples {
                return Err(IndexError::Corrupt {
                    offset: payload_start,
                    reason: format!("concept {concept} has {count} postings but only {n_samples} samples"),
                });
            }
            postings.push(decode_postings(payload, payload_start, count as usize, n_samples)?);
        }

        let mut sample_ids = Vec::with_capacity((n_samples as usize).min(1 << 20));
        for _ in 0..n_samples {
            let at = r.pos;
            let len = r.u32("sample id length")? as usize;
            let raw = r.take(len, "sample id")?;
            let id = std::str::from_utf8(raw).map_err(|_| IndexError::Corrupt {
                offset: at + 4,
                reason: "sample id is not valid UTF-8".into(),
            })?;
            sample_ids.push(id.to_string());
        }
        if r.pos != bytes.len() {
            return Err(IndexError::Corrupt {
                offset: r.pos,
                reason: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(Self {
            postings,
            sample_ids,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let bytes = std::fs::read(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

/// Cardinality of the intersection of ascending lists, shortest first.
fn intersection_len(lists: &[&[u32]]) -> usize {
    let Some((first, rest)) = lists.split_first() else {
        return 0;
    };
    if rest.is_empty() {
        return first.len();
    }
    let mut running: Vec<u32> = first.to_vec();
    for list in rest {
        if running.is_empty() {
            break;
        }
        let mut lo = 0;
        running.retain(|&x| match gallop(&list[lo..], x) {
            Ok(i) => {
                lo += i + 1;
                true
            }
            Err(i) => {
                lo += i;
                false
            }
        });
    }
    running.len()
}

/// Exponential search followed by binary search; same contract as
/// `slice::binary_search`.
fn gallop(list: &[u32], target: u32) -> Result<usize, usize> {
    let mut bound = 1;
    while bound < list.len() && list[bound] < target {
        bound *= 2;
    }
    let lo = bound / 2;
    let hi = (bound + 1).min(list.len());
    list[lo..hi]
        .binary_search(&target)
        .map(|i| i + lo)
        .map_err(|i| i + lo)
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn decode_postings(payload: &[u8], base: usize, count: usize, n_samples: u64) -> Result<Vec<u32>, IndexError> {
    let mut list = Vec::with_capacity(count);
    let mut pos = 0;
    let mut prev: u64 = 0;
    for i in 0..count {
        let at = base + pos;
        let mut value = 0u64;
        let mut shift = 0;
        loop {
            let Some(&byte) = payload.get(pos) else {
                return Err(IndexError::Corrupt {
                    offset: base + pos,
                    reason: format!("posting payload ends after {i} of {count} values"),
                });
            };
            pos += 1;
            if shift >= 64 || (shift == 63 && byte > 1) {
                return Err(IndexError::Corrupt {
                    offset: at,
                    reason: "varint overflows u64".into(),
                });
            }
            value |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                break;
            }
            shift += 7;
        }
        let ord = if i == 0 {
            value
        } else if value == 0 {
            return Err(IndexError::Corrupt {
                offset: at,
                reason: "zero delta: postings must be strictly ascending".into(),
            });
        } else {
            prev.saturating_add(value)
        };
        if ord >= n_samples {
            return Err(IndexError::Corrupt {
                offset: at,
                reason: format!("ordinal {ord} not below n_samples {n_samples}"),
            });
        }
        list.push(ord as u32);
        prev = ord;
    }
    if pos != payload.len() {
        return Err(IndexError::Corrupt {
            offset: base + pos,
            reason: "posting payload longer than its values".into(),
        });
    }
    Ok(list)
}

fn to_usize(v: u64, offset: usize) -> Result<usize, IndexError> {
    usize::try_from(v).map_err(|_| IndexError::Corrupt {
        offset,
        reason: format!("length {v} does not fit in memory"),
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], pos: usize) -> Self {
        Self { buf, pos }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], IndexError> {
        let remaining = self.buf.len() - self.pos;
        if n > remaining {
            return Err(IndexError::Truncated {
                offset: self.pos,
                needed: n - remaining,
                what,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Single-writer accumulator for a [`ConceptIndex`].
///
/// Builders over disjoint shards combine with [`IndexBuilder::merge`]; the
/// right operand's ordinals are appended after the left's, so merging shards
/// in corpus order reproduces single-pass ingestion exactly.
#[derive(Debug, Clone)]
pub struct IndexBuilder {
    postings: Vec<Vec<u32>>,
    sample_ids: Vec<String>,
    seen: HashSet<String>,
}

impl IndexBuilder {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            postings: vec![Vec::new(); vocab_size],
            sample_ids: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.seen.contains(id)
    }

    /// Appends a sample. Returns `None` if the id was already added.
    pub fn add(&mut self, id: &str, concepts: &[ConceptId]) -> Result<Option<u32>, IndexError> {
        if self.seen.contains(id) {
            return Ok(None);
        }
        let ordinal = u32::try_from(self.sample_ids.len()).map_err(|_| IndexError::TooManySamples {
            n: self.sample_ids.len() as u64 + 1,
        })?;
        let vocab_size = self.postings.len();
        if let Some(bad) = concepts.iter().find(|c| c.index() >= vocab_size) {
            return Err(IndexError::ConceptOutOfRange { id: bad.0, vocab_size });
        }
        for &c in concepts {
            let list = &mut self.postings[c.index()];
            if list.last() != Some(&ordinal) {
                list.push(ordinal);
            }
        }
        self.seen.insert(id.to_string());
        self.sample_ids.push(id.to_string());
        Ok(Some(ordinal))
    }

    pub fn merge(mut self, other: IndexBuilder) -> Result<Self, IndexError> {
        if self.postings.len() != other.postings.len() {
            return Err(IndexError::VocabMismatch {
                left: self.postings.len(),
                right: other.postings.len(),
            });
        }
        if let Some(dup) = other.sample_ids.iter().find(|id| self.seen.contains(*id)) {
            return Err(IndexError::DuplicateAcrossShards { id: dup.clone() });
        }
        let offset = self.sample_ids.len() as u64;
        if offset + other.sample_ids.len() as u64 > u64::from(u32::MAX) {
            return Err(IndexError::TooManySamples {
                n: offset + other.sample_ids.len() as u64,
            });
        }
        for (mine, theirs) in self.postings.iter_mut().zip(other.postings) {
            mine.extend(theirs.into_iter().map(|o| o + offset as u32));
        }
        self.seen.extend(other.seen);
        self.sample_ids.extend(other.sample_ids);
        Ok(self)
    }

    pub fn finish(self) -> ConceptIndex {
        ConceptIndex {
            postings: self.postings,
            sample_ids: self.sample_ids,
        }
    }
}
