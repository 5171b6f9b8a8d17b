//! Bit-exact binary feature files.
//!
//! Layout, little-endian throughout: magic `GLVF`, version u32 = 1,
//! rows u32, cols u32, then rows x cols IEEE-754 binary32 values in
//! row-major order. No padding, no footer.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::DataError;

pub const FEATURE_MAGIC: [u8; 4] = *b"GLVF";
pub const FEATURE_VERSION: u32 = 1;

/// Dense per-frame feature matrix, row-major 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureTable {
    /// Build a table from row-major data; `data.len()` must be `rows * cols`
    /// and both dimensions must be at least 1.
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, DataError> {
        if rows == 0 || cols == 0 {
            return Err(DataError::InvalidTable {
                reason: format!("dimensions must be positive, got {rows}x{cols}"),
            });
        }
        if data.len() != rows * cols {
            return Err(DataError::InvalidTable {
                reason: format!(
                    "data length {} does not fill {rows}x{cols} = {}",
                    data.len(),
                    rows * cols
                ),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32, DataError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            DataError::TruncatedFile {
                path: path.to_path_buf(),
            }
        } else {
            DataError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    Ok(u32::from_le_bytes(buf))
}

/// Load a feature file, verifying magic, version, exact body length and
/// finiteness of every value. Byte-for-byte deterministic.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureTable, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            DataError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            DataError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            DataError::TruncatedFile {
                path: path.to_path_buf(),
            }
        } else {
            DataError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    if magic != FEATURE_MAGIC {
        return Err(DataError::BadMagic {
            path: path.to_path_buf(),
        });
    }

    let version = read_u32(&mut reader, path)?;
    if version != FEATURE_VERSION {
        return Err(DataError::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }

    let rows = read_u32(&mut reader, path)? as usize;
    let cols = read_u32(&mut reader, path)? as usize;
    if rows == 0 || cols == 0 {
        return Err(DataError::BadHeader {
            path: path.to_path_buf(),
            reason: format!("dimensions must be positive, got {rows}x{cols}"),
        });
    }

    let count = rows * cols;
    let mut bytes = vec![0u8; count * 4];
    reader.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            DataError::TruncatedFile {
                path: path.to_path_buf(),
            }
        } else {
            DataError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;

    // The header must account for the entire body.
    let mut probe = [0u8; 1];
    match reader.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => {
            return Err(DataError::TrailingBytes {
                path: path.to_path_buf(),
            })
        }
        Err(e) => {
            return Err(DataError::Io {
                path: path.to_path_buf(),
                source: e,
            })
        }
    }

    let mut data = Vec::with_capacity(count);
    for chunk in bytes.chunks_exact(4) {
        data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
    }

    if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
        return Err(DataError::NonFiniteValue {
            path: path.to_path_buf(),
            row: idx / cols,
            col: idx % cols,
        });
    }

    FeatureTable::new(rows, cols, data)
}

/// Write a feature file in the exact on-disk layout `load_features` reads.
pub fn write_features(path: impl AsRef<Path>, table: &FeatureTable) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| DataError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if table.rows > u32::MAX as usize || table.cols > u32::MAX as usize {
        return Err(DataError::InvalidTable {
            reason: format!("dimensions {}x{} exceed u32 header range", table.rows, table.cols),
        });
    }
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(&FEATURE_MAGIC).map_err(io_err)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(table.rows as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(table.cols as u32).to_le_bytes()).map_err(io_err)?;
    for v in &table.data {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
