//! TNPK parameter checkpoints.
//!
//! ```text
//! "TNPK" | u32 count | count x (u16 name_len, name bytes, u8 ndims, ndims x u32, f32 payload)
//! ```
//! All integers and floats are little-endian. Values are stored as `f32`.

use std::fs;
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNPK";

/// Named parameters in a fixed order.
pub type NamedTensors = Vec<(String, Tensor)>;

pub fn encode_checkpoint(params: &[(String, Tensor)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params {
        let nb = name.as_bytes();
        let len = u16::try_from(nb.len())
            .map_err(|_| Error::InvalidArgument(format!("parameter name too long: {name}")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(nb);
        // trailing unit axes are implied
        let dims = t.dims();
        let nd = dims.iter().rposition(|&d| d != 1).map_or(1, |p| p + 1);
        out.push(nd as u8);
        for d in &dims[..nd] {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(field, "truncated checkpoint"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<NamedTensors> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format("magic", "missing TNPK magic bytes"));
    }
    let count = r.u32("count")? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let nl = r.take(2, "name_len")?;
        let nl = u16::from_le_bytes([nl[0], nl[1]]) as usize;
        let name = std::str::from_utf8(r.take(nl, "name")?)
            .map_err(|_| Error::format("name", "parameter name is not UTF-8"))?
            .to_string();
        let nd = r.take(1, "ndims")?[0] as usize;
        if nd == 0 || nd > 5 {
            return Err(Error::format("ndims", format!("{nd} dims for {name}")));
        }
        let mut dims = [1usize; 5];
        for d in dims.iter_mut().take(nd) {
            *d = r.u32("dims")? as usize;
        }
        let n: usize = dims.iter().product();
        let payload = r.take(n * 4, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        out.push((name, Tensor::new(dims, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            "payload",
            "trailing bytes after last parameter",
        ));
    }
    Ok(out)
}

pub fn write_checkpoint(params: &[(String, Tensor)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params)?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<NamedTensors> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
