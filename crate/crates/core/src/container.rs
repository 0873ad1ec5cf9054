//! Shared binary container for map files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes ("RM4D" or "CAPM")
//! version      u16
//! robot name   u32 byte length + UTF-8 bytes
//! params       4 x f64: r_xy, r_z, l_c, delta_theta
//! dims         3 x u32: n_z, n_theta, n_xy
//! extra        n x u32 (format specific; CAPM: n_dirs, n_inplane)
//! samples      u64
//! bits         ceil(cells / 8) bytes, bit i at byte i/8, position i%8
//! crc32        u32 over every preceding byte
//! ```

use std::io::{Read, Write};

use crate::bits::AtomicBits;
use crate::canonical::GridParams;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u16 = 1;

pub(crate) struct Header {
    pub robot_name: String,
    pub params: GridParams,
    pub dims: [u32; 3],
    pub extra: Vec<u32>,
    pub samples: u64,
}

pub(crate) fn write_container<W: Write>(
    sink: &mut W,
    magic: &[u8; 4],
    header: &Header,
    bits: &AtomicBits,
) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + header.robot_name.len() + bits.len().div_ceil(8) as usize);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let name = header.robot_name.as_bytes();
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name);
    let p = &header.params;
    for v in [p.r_xy, p.r_z, p.l_c, p.delta_theta] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for d in header.dims.iter().chain(&header.extra) {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    buf.extend_from_slice(&header.samples.to_le_bytes());
    buf.extend_from_slice(&bits.to_bytes());
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    sink.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                needed: end,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a container, checks magic, version, sizes and checksum. `n_extra`
/// is the number of format-specific u32 fields; `cells` computes the bit
/// count from the decoded header.
pub(crate) fn read_container<R: Read>(
    source: &mut R,
    magic: &[u8; 4],
    n_extra: usize,
    cells: impl Fn(&Header) -> Result<u64>,
) -> Result<(Header, AtomicBits)> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    let found: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if &found != magic {
        return Err(Error::BadMagic {
            expected: *magic,
            found,
        });
    }
    let version = cur.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let name_len = cur.u32()? as usize;
    let robot_name = String::from_utf8(cur.take(name_len)?.to_vec())
        .map_err(|_| Error::Corrupt("robot name is not valid UTF-8".into()))?;
    let params = GridParams {
        r_xy: cur.f64()?,
        r_z: cur.f64()?,
        l_c: cur.f64()?,
        delta_theta: cur.f64()?,
    };
    let dims = [cur.u32()?, cur.u32()?, cur.u32()?];
    let extra = (0..n_extra).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
    let samples = cur.u64()?;
    let header = Header {
        robot_name,
        params,
        dims,
        extra,
        samples,
    };

    // Parameter validation happens before the payload is sized so that a
    // corrupted header cannot request a huge allocation.
    header
        .params
        .validate()
        .map_err(|e| Error::Corrupt(format!("header parameters: {e}")))?;
    let n_cells = cells(&header)?;
    let n_bytes = n_cells.div_ceil(8) as usize;
    let payload_end = cur.pos + n_bytes;
    let total = payload_end + 4;
    if bytes.len() < total {
        return Err(Error::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes after checksum",
            bytes.len() - total
        )));
    }
    let stored = u32::from_le_bytes(bytes[payload_end..total].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..payload_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let bits = AtomicBits::from_bytes(&bytes[cur.pos..payload_end], n_cells)
        .ok_or_else(|| Error::Corrupt("nonzero padding bits".into()))?;
    Ok((header, bits))
}
