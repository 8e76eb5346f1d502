//! Single-file index format: header, codebooks, optional rotation, packed
//! codes, CRC32 trailer.
//!
//! ```text
//! "NEQX" | u32 version | u8 kind | u8 M | u8 M′ | u8 reserved | u32 K | u32 d
//!        | u64 n | u32 flags | payload | u32 crc32(payload)
//! ```
//!
//! All integers and floats are little-endian. The payload holds the norm
//! codebooks (NEQ only), the vector codebooks, the `d × d` rotation when
//! flagged, then `n × M` indexes at one byte each for `K ≤ 256` and two bytes
//! otherwise.

use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::AnyModel;
use crate::neq::{NeqModel, NormCodebooks, EXACT_NORM_SLOTS};
use crate::vq::{subspace_layout, Codebook, Codes, QuantizerKind, QuantizerModel, MAX_K};

pub const MAGIC: [u8; 4] = *b"NEQX";
pub const VERSION: u32 = 1;
pub const SUPPORTED_VERSIONS: [u32; 1] = [VERSION];
pub const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 4 + 8 + 4;

pub const FLAG_NORM_EXPLICIT: u32 = 1;
pub const FLAG_ROTATION: u32 = 1 << 1;
pub const FLAG_EXACT_NORM: u32 = 1 << 2;
pub const FLAG_RAW_DIRECTION: u32 = 1 << 3;
pub const FLAG_RIDGE: u32 = 1 << 4;
const BEAM_SHIFT: u32 = 16;

fn kind_byte(kind: QuantizerKind) -> u8 {
    match kind {
        QuantizerKind::Pq => 0,
        QuantizerKind::Opq => 1,
        QuantizerKind::Rq => 2,
        QuantizerKind::Aq => 3,
    }
}

fn kind_from(b: u8) -> Result<QuantizerKind> {
    Ok(match b {
        0 => QuantizerKind::Pq,
        1 => QuantizerKind::Opq,
        2 => QuantizerKind::Rq,
        3 => QuantizerKind::Aq,
        other => return Err(Error::Format(format!("unknown quantizer kind byte {other}"))),
    })
}

fn put_f32s(out: &mut Vec<u8>, v: impl IntoIterator<Item = f32>) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

/// Encodes a model and its codes into the file layout.
pub fn to_bytes(model: &AnyModel, codes: &Codes) -> Result<Vec<u8>> {
    let (vq, neq) = match model {
        AnyModel::Vq(m) => (m, None),
        AnyModel::Neq(m) => (m.direction_model(), Some(m)),
    };
    let (m, k, d) = (model.m(), model.k(), model.dim());
    if k > MAX_K {
        return Err(Error::Range(format!("K={k} exceeds {MAX_K}")));
    }
    if m > usize::from(u8::MAX) {
        return Err(Error::Range(format!("M={m} does not fit the header")));
    }
    if d > u32::MAX as usize {
        return Err(Error::Range(format!("d={d} does not fit the header")));
    }
    if !codes.is_empty() && codes.code_len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: codes.code_len(),
        });
    }
    let mut flags = 0u32;
    if let Some(n) = neq {
        flags |= FLAG_NORM_EXPLICIT;
        if n.exact_norm() {
            flags |= FLAG_EXACT_NORM;
        }
        if n.raw_direction() {
            flags |= FLAG_RAW_DIRECTION;
        }
    }
    if vq.rotation().is_some() {
        flags |= FLAG_ROTATION;
    }
    if vq.ridge_applied() {
        flags |= FLAG_RIDGE;
    }
    let beam = u32::try_from(vq.beam_width())
        .ok()
        .filter(|&b| b <= u32::from(u16::MAX))
        .ok_or_else(|| Error::Range("beam width does not fit the header".into()))?;
    flags |= beam << BEAM_SHIFT;

    let mut payload = Vec::new();
    if let Some(books) = neq.and_then(NeqModel::norm_codebooks) {
        for b in books.books() {
            put_f32s(&mut payload, b.iter().map(|&v| v as f32));
        }
    }
    for cb in vq.codebooks() {
        put_f32s(&mut payload, cb.as_slice().iter().copied());
    }
    if let Some(r) = vq.rotation() {
        put_f32s(&mut payload, r.iter().copied());
    }
    let wide = k > 256;
    for &i in codes.as_slice() {
        if wide {
            payload.extend_from_slice(&i.to_le_bytes());
        } else {
            payload.push(i as u8);
        }
    }

    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind_byte(vq.kind()));
    out.push(m as u8);
    out.push(model.m_prime() as u8);
    out.push(0);
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(codes.len() as u64).to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(out)
}

pub fn serialize_index(model: &AnyModel, codes: &Codes, path: impl AsRef<Path>) -> Result<()> {
    let bytes = to_bytes(model, codes)?;
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "index file is truncated",
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(too_large)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

fn too_large() -> Error {
    Error::Format("header sizes overflow".into())
}

/// Parses the file layout back into a model and its codes.
pub fn from_bytes(buf: &[u8]) -> Result<(AnyModel, Codes)> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not an index file (bad magic)".into()));
    }
    let version = c.u32()?;
    if !SUPPORTED_VERSIONS.contains(&version) {
        return Err(Error::Version {
            found: version,
            supported: SUPPORTED_VERSIONS.to_vec(),
        });
    }
    let kind = kind_from(c.u8()?)?;
    let m = usize::from(c.u8()?);
    let m_prime = usize::from(c.u8()?);
    let _reserved = c.u8()?;
    let k = c.u32()? as usize;
    let d = c.u32()? as usize;
    let n = usize::try_from(c.u64()?).map_err(|_| too_large())?;
    let flags = c.u32()?;
    if k == 0 || k > MAX_K || d == 0 || m == 0 {
        return Err(Error::Format(format!("invalid header sizes M={m} K={k} d={d}")));
    }
    let ne = flags & FLAG_NORM_EXPLICIT != 0;
    let exact = flags & FLAG_EXACT_NORM != 0;
    if !ne && (m_prime != 0 || exact) {
        return Err(Error::Format("norm fields set on a plain quantizer".into()));
    }
    if ne && (m_prime == 0 || m_prime >= m || (exact && m_prime != EXACT_NORM_SLOTS)) {
        return Err(Error::Format(format!("invalid M'={m_prime} for M={m}")));
    }

    let payload_start = c.pos;
    let norm_books = if ne && !exact {
        let mut books = Vec::with_capacity(m_prime);
        for _ in 0..m_prime {
            books.push(c.f32s(k)?.into_iter().map(f64::from).collect());
        }
        Some(NormCodebooks::new(books)?)
    } else {
        None
    };
    let mv = m - m_prime;
    let widths: Vec<usize> = if kind.is_product() {
        if mv > d {
            return Err(Error::Format(format!("M={mv} subspaces exceed d={d}")));
        }
        subspace_layout(d, mv).into_iter().map(|(_, l)| l).collect()
    } else {
        vec![d; mv]
    };
    let mut codebooks = Vec::with_capacity(mv);
    for w in widths {
        let words = c.f32s(k.checked_mul(w).ok_or_else(too_large)?)?;
        codebooks.push(Codebook::new(w, words)?);
    }
    let rotation = if flags & FLAG_ROTATION != 0 {
        Some(c.f32s(d.checked_mul(d).ok_or_else(too_large)?)?)
    } else {
        None
    };
    let per = if k > 256 { 2 } else { 1 };
    let total = n.checked_mul(m).ok_or_else(too_large)?;
    let raw = c.take(total.checked_mul(per).ok_or_else(too_large)?)?;
    let data: Vec<u16> = if per == 2 {
        raw.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect()
    } else {
        raw.iter().map(|&b| u16::from(b)).collect()
    };
    let payload = &buf[payload_start..c.pos];
    let stored = c.u32()?;
    if c.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes after the checksum", buf.len() - c.pos)));
    }
    if crc32fast::hash(payload) != stored {
        return Err(Error::Integrity("payload checksum mismatch".into()));
    }

    let beam = ((flags >> BEAM_SHIFT) as usize).max(1);
    let vq = QuantizerModel::from_parts(kind, d, codebooks, rotation, beam, flags & FLAG_RIDGE != 0)?;
    let model = if ne {
        AnyModel::Neq(NeqModel::from_parts(norm_books, vq, flags & FLAG_RAW_DIRECTION != 0)?)
    } else {
        AnyModel::Vq(vq)
    };
    let codes = Codes::new(m, data)?;
    if !codes.is_empty() {
        for code in codes.iter() {
            model.reconstruct(code)?;
        }
    }
    Ok((model, codes))
}

pub fn deserialize_index(path: impl AsRef<Path>) -> Result<(AnyModel, Codes)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
