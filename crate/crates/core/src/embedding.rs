//! Dense row-major f32 embedding matrices and the `CGEM` file format.
//!
//! ```text
//! magic "CGEM" | version u16 = 1 | dtype u16 = 1 (f32) | rows u64 | dim u32 | reserved u32 = 0
//! rows x dim little-endian f32, row-major
//! ```

use std::path::Path;

use crate::error::RetrievalError;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"CGEM";
pub const EMBEDDING_VERSION: u16 = 1;
pub const DTYPE_F32: u16 = 1;
const HEADER_LEN: usize = 24;

/// Tolerance on row norms for a matrix to count as normalized.
pub const UNIT_NORM_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self, RetrievalError> {
        let expected = rows.saturating_mul(dim);
        if data.len() != expected {
            return Err(RetrievalError::Shape {
                rows,
                dim,
                expected,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let mut m = Self {
            rows,
            dim,
            data,
            normalized: false,
        };
        m.normalized = (0..rows).all(|r| (row_norm(m.row(r)) - 1.0).abs() <= UNIT_NORM_TOL);
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, RetrievalError> {
        let dim = rows.first().map_or(0, Vec::len);
        let data: Vec<f32> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), dim, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    /// Scales every row to unit L2 norm.
    pub fn normalize_rows(&self) -> Result<Self, RetrievalError> {
        let mut data = self.data.clone();
        for r in 0..self.rows {
            let row = &mut data[r * self.dim..(r + 1) * self.dim];
            let norm = row_norm(row);
            if norm == 0.0 {
                return Err(RetrievalError::ZeroNormRow { row: r });
            }
            for v in row.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
        Ok(Self {
            rows: self.rows,
            dim: self.dim,
            data,
            normalized: true,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&DTYPE_F32.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RetrievalError> {
        if bytes.len() < 4 || &bytes[..4] != EMBEDDING_MAGIC {
            return Err(RetrievalError::BadMagic { offset: 0 });
        }
        if bytes.len() < HEADER_LEN {
            return Err(RetrievalError::Truncated {
                offset: bytes.len(),
                needed: HEADER_LEN - bytes.len(),
                what: "header",
            });
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != EMBEDDING_VERSION {
            return Err(RetrievalError::UnsupportedVersion { version, offset: 4 });
        }
        let dtype = u16_at(6);
        if dtype != DTYPE_F32 {
            return Err(RetrievalError::UnsupportedDtype { dtype, offset: 6 });
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u32_at(16) as usize;
        if u32_at(20) != 0 {
            return Err(RetrievalError::Reserved { offset: 20 });
        }
        let body = bytes.len() - HEADER_LEN;
        let needed = usize::try_from(rows)
            .ok()
            .and_then(|r| r.checked_mul(dim))
            .and_then(|n| n.checked_mul(4))
            .unwrap_or(usize::MAX);
        if body < needed {
            return Err(RetrievalError::Truncated {
                offset: bytes.len(),
                needed: needed - body,
                what: "matrix data",
            });
        }
        if body > needed {
            return Err(RetrievalError::TrailingBytes {
                offset: HEADER_LEN + needed,
                extra: body - needed,
            });
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(rows as usize, dim, data)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let bytes = std::fs::read(path).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

fn row_norm(row: &[f32]) -> f64 {
    row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
}
