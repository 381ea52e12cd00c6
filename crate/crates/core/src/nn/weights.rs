//! Binary weight format.
//!
//! ```text
//! magic      8 bytes  "TALEMLP\0"
//! version    u32
//! output     u32      0 = identity, 1 = tanh
//! n_widths   u32
//! widths     u32 × n_widths
//! n_params   u64
//! crc32      u32      over every preceding byte and the parameter block
//! params     f64 × n_params, layer by layer: w[in][out] then b[out]
//! ```
//!
//! All integers and floats are little-endian. [`encode_f64s`] uses the same
//! framing with magic `"TALEF64\0"` and no widths, for optimizer moments.

use alloc::vec::Vec;

use super::{param_count, Activation, Mlp, NnError};

pub const WEIGHTS_MAGIC: &[u8; 8] = b"TALEMLP\0";
pub const WEIGHTS_VERSION: u32 = 1;
const BLOCK_MAGIC: &[u8; 8] = b"TALEF64\0";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).ok_or(NnError::Corrupt("length overflow"))?;
        if end > self.buf.len() {
            return Err(NnError::Corrupt("truncated"));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn push_params(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_params(r: &mut Reader<'_>, n: usize) -> Result<Vec<f64>, NnError> {
    let bytes = r.take(n.checked_mul(8).ok_or(NnError::Corrupt("length overflow"))?)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn checksum(header: &[u8], params: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(header);
    h.update(params);
    h.finalize()
}

pub fn encode_weights(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + net.param_count() * 8);
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    let act: u32 = match net.output_activation() {
        Activation::Identity => 0,
        Activation::Tanh => 1,
    };
    out.extend_from_slice(&act.to_le_bytes());
    out.extend_from_slice(&(net.widths().len() as u32).to_le_bytes());
    for &w in net.widths() {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
    let mut body = Vec::with_capacity(net.param_count() * 8);
    push_params(&mut body, net.params());
    let crc = checksum(&out, &body);
    out.extend_from_slice(&crc.to_le_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decodes a weight blob. With `expected` set, the stored widths must match it.
pub fn decode_weights(bytes: &[u8], expected: Option<&[usize]>) -> Result<Mlp, NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != WEIGHTS_MAGIC {
        return Err(NnError::Corrupt("bad magic"));
    }
    if r.u32()? != WEIGHTS_VERSION {
        return Err(NnError::Corrupt("unsupported version"));
    }
    let output = match r.u32()? {
        0 => Activation::Identity,
        1 => Activation::Tanh,
        _ => return Err(NnError::Corrupt("unknown output activation")),
    };
    let n_widths = r.u32()? as usize;
    if !(2..=64).contains(&n_widths) {
        return Err(NnError::Corrupt("implausible layer count"));
    }
    let mut widths = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        widths.push(r.u32()? as usize);
    }
    let n_params = r.u64()? as usize;
    let header_end = r.pos;
    let crc = r.u32()?;
    let body_start = r.pos;
    let params = read_params(&mut r, n_params)?;
    if r.pos != bytes.len() {
        return Err(NnError::Corrupt("trailing bytes"));
    }
    if checksum(&bytes[..header_end], &bytes[body_start..]) != crc {
        return Err(NnError::Corrupt("checksum mismatch"));
    }
    if widths.contains(&0) || param_count(&widths) != n_params {
        return Err(NnError::Corrupt("parameter count does not match widths"));
    }
    if let Some(exp) = expected {
        if exp != widths.as_slice() {
            return Err(NnError::Layout { expected: exp.to_vec(), found: widths });
        }
    }
    Mlp::from_params(&widths, output, params)
}

pub fn encode_f64s(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + values.len() * 8);
    out.extend_from_slice(BLOCK_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    let mut body = Vec::with_capacity(values.len() * 8);
    push_params(&mut body, values);
    let crc = checksum(&out, &body);
    out.extend_from_slice(&crc.to_le_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn decode_f64s(bytes: &[u8]) -> Result<Vec<f64>, NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != BLOCK_MAGIC {
        return Err(NnError::Corrupt("bad magic"));
    }
    if r.u32()? != WEIGHTS_VERSION {
        return Err(NnError::Corrupt("unsupported version"));
    }
    let n = r.u64()? as usize;
    let header_end = r.pos;
    let crc = r.u32()?;
    let body_start = r.pos;
    let values = read_params(&mut r, n)?;
    if r.pos != bytes.len() {
        return Err(NnError::Corrupt("trailing bytes"));
    }
    if checksum(&bytes[..header_end], &bytes[body_start..]) != crc {
        return Err(NnError::Corrupt("checksum mismatch"));
    }
    Ok(values)
}
