//! Checkpoint files: trained parameters plus the config that shapes them.
//!
//! Layout: magic `GLVP`, format version (u32 LE), a length-prefixed JSON
//! metadata blob, then every parameter tensor in declaration order as
//! `rows: u32 LE, cols: u32 LE, data: f64 LE row-major`. The metadata
//! carries the model config — which fully determines tensor shapes — plus
//! the training variant and context mode so a reloaded model knows what
//! graphs it expects.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::graph::{ContextMode, Variant};

use super::{init_params, ModelConfig, ModelError, ModelParams};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"GLVP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// What a checkpoint knows about itself beyond raw weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub variant: Variant,
    pub context: ContextMode,
}

fn io_err(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::CheckpointIo {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> ModelError {
    ModelError::CheckpointFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Write parameters and metadata to `path`.
pub fn save_checkpoint(
    path: impl AsRef<Path>,
    params: &ModelParams,
    meta: &CheckpointMeta,
) -> Result<(), ModelError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<(), ModelError> {
        w.write_all(bytes).map_err(|e| io_err(path, e))
    };

    write(&mut w, &CHECKPOINT_MAGIC)?;
    write(&mut w, &CHECKPOINT_VERSION.to_le_bytes())?;
    let meta_json = serde_json::to_vec(meta)
        .map_err(|e| format_err(path, format!("metadata serialization failed: {e}")))?;
    let meta_len = u32::try_from(meta_json.len())
        .map_err(|_| format_err(path, "metadata blob exceeds u32 length"))?;
    write(&mut w, &meta_len.to_le_bytes())?;
    write(&mut w, &meta_json)?;

    for tensor in params.tensors() {
        let rows = u32::try_from(tensor.nrows())
            .map_err(|_| format_err(path, "tensor rows exceed u32"))?;
        let cols = u32::try_from(tensor.ncols())
            .map_err(|_| format_err(path, "tensor cols exceed u32"))?;
        write(&mut w, &rows.to_le_bytes())?;
        write(&mut w, &cols.to_le_bytes())?;
        for &v in tensor.iter() {
            write(&mut w, &v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<(), ModelError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            format_err(path, "file truncated")
        } else {
            io_err(path, e)
        }
    })
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32, ModelError> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, path)?;
    Ok(u32::from_le_bytes(buf))
}

/// Read a checkpoint back; the returned parameters are bit-identical to
/// what was saved.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, CheckpointMeta), ModelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, path)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(format_err(path, format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r, path)?;
    if version != CHECKPOINT_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let meta_len = read_u32(&mut r, path)? as usize;
    let mut meta_json = vec![0u8; meta_len];
    read_exact(&mut r, &mut meta_json, path)?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_json)
        .map_err(|e| format_err(path, format!("bad metadata blob: {e}")))?;

    // The config determines every shape; materialize the structure, then
    // overwrite tensor contents from the file.
    let mut params = init_params(&meta.model, 0);
    for tensor in params.tensors_mut() {
        let rows = read_u32(&mut r, path)? as usize;
        let cols = read_u32(&mut r, path)? as usize;
        if (rows, cols) != tensor.dim() {
            return Err(format_err(
                path,
                format!("tensor shape ({rows},{cols}) does not match config {:?}", tensor.dim()),
            ));
        }
        let mut data = vec![0u8; rows * cols * 8];
        read_exact(&mut r, &mut data, path)?;
        let values: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
            .collect();
        *tensor = Array2::from_shape_vec((rows, cols), values).expect("length checked");
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(format_err(path, "trailing bytes after tensors")),
        Err(e) => return Err(io_err(path, e)),
    }
    Ok((params, meta))
}
