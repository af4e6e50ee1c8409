//! FLKE binary embedding format.
//!
//! ```text
//! magic   "FLKE"            4 bytes
//! version u32 = 1
//! n       u64
//! d       u32
//! ids     n x (u32 byte length, UTF-8 bytes)
//! values  n*d f32, row-major
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingSet;
use crate::error::{FlickError, Result};

pub const MAGIC: &[u8; 4] = b"FLKE";
pub const VERSION: u32 = 1;

pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FlickError::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(set, &mut w).map_err(|e| FlickError::io(path, e))?;
    w.flush().map_err(|e| FlickError::io(path, e))
}

pub fn encode<W: Write>(set: &EmbeddingSet, w: &mut W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&(set.dim() as u32).to_le_bytes())?;
    for id in set.ids() {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    for v in set.vectors() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FlickError::io(path, e))?;
    decode(&mut BufReader::new(file))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => FlickError::Format(format!("truncated file while reading {what}")),
        _ => FlickError::Format(format!("read failed in {what}: {e}")),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn decode<R: Read>(r: &mut R) -> Result<EmbeddingSet> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(FlickError::Format(format!("bad magic {magic:?}, expected FLKE")));
    }
    let version = read_u32(r, "version")?;
    if version != VERSION {
        return Err(FlickError::Format(format!("unsupported FLKE version {version}")));
    }
    let mut nb = [0u8; 8];
    read_exact(r, &mut nb, "row count")?;
    let n = u64::from_le_bytes(nb);
    let dim = read_u32(r, "dimension")? as usize;
    if n == 0 {
        return Err(FlickError::Data("embedding file has no rows".into()));
    }
    if dim == 0 {
        return Err(FlickError::Format("embedding dimension is zero".into()));
    }
    let n = usize::try_from(n).map_err(|_| FlickError::Format(format!("row count {n} too large")))?;

    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        let len = read_u32(r, "id length")? as usize;
        let mut bytes = vec![0u8; len];
        read_exact(r, &mut bytes, "id bytes")?;
        let id = String::from_utf8(bytes)
            .map_err(|_| FlickError::Format(format!("id {i} is not valid UTF-8")))?;
        ids.push(id);
    }

    let total = n
        .checked_mul(dim)
        .ok_or_else(|| FlickError::Format("matrix size overflows".into()))?;
    let mut raw = vec![0u8; total * 4];
    read_exact(r, &mut raw, "values")?;
    let vectors = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(FlickError::Format("trailing bytes after values".into())),
        Err(e) => return Err(FlickError::Format(format!("read failed: {e}"))),
    }

    EmbeddingSet::new(ids, vectors, dim)
}
