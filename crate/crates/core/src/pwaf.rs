//! The `PWAF` binary field format.
//!
//! ```text
//! offset  size  content
//!      0     4  magic "PWAF"
//!      4     4  version (u32 LE, currently 1)
//!      8     4  nx (u32 LE)
//!     12     4  ny (u32 LE)
//!     16     4  nz (u32 LE)
//!     20     3  halo widths x, y, z (u8 each; always 1, 1, 0)
//!     23     9  zero padding
//!     32     -  (nx+2)*(ny+2)*nz IEEE-754 doubles, LE, storage order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Extents, Field3D, HALO_X, HALO_Y, HALO_Z};

pub const MAGIC: [u8; 4] = *b"PWAF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

fn encode_header(extents: Extents) -> Result<[u8; HEADER_LEN]> {
    let dim = |n: usize| {
        u32::try_from(n).map_err(|_| Error::Format(format!("extent {n} does not fit in u32")))
    };
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..8].copy_from_slice(&VERSION.to_le_bytes());
    h[8..12].copy_from_slice(&dim(extents.nx)?.to_le_bytes());
    h[12..16].copy_from_slice(&dim(extents.ny)?.to_le_bytes());
    h[16..20].copy_from_slice(&dim(extents.nz)?.to_le_bytes());
    h[20] = HALO_X as u8;
    h[21] = HALO_Y as u8;
    h[22] = HALO_Z as u8;
    Ok(h)
}

fn decode_header(h: &[u8; HEADER_LEN]) -> Result<Extents> {
    if h[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"PWAF\"",
            String::from_utf8_lossy(&h[0..4])
        )));
    }
    let word = |at: usize| u32::from_le_bytes(h[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let halos = (h[20], h[21], h[22]);
    if halos != (HALO_X as u8, HALO_Y as u8, HALO_Z as u8) {
        return Err(Error::ExtentsMismatch(format!(
            "halo widths {halos:?}, expected ({HALO_X}, {HALO_Y}, {HALO_Z})"
        )));
    }
    Extents::new(word(8) as usize, word(12) as usize, word(16) as usize)
        .map_err(|e| Error::ExtentsMismatch(e.to_string()))
}

/// Serialize a field to a writer.
pub fn write_to(field: &Field3D, mut out: impl Write) -> Result<()> {
    out.write_all(&encode_header(field.extents())?)?;
    for v in field.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Deserialize a field from a reader. Trailing bytes are an error.
pub fn read_from(mut input: impl Read) -> Result<Field3D> {
    let mut header = [0u8; HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    let extents = decode_header(&header)?;
    let expected = extents.padded_len() * 8;
    let mut payload = Vec::with_capacity(expected);
    input.read_to_end(&mut payload)?;
    if payload.len() < expected {
        return Err(Error::Format(format!(
            "truncated payload: {} of {expected} bytes",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::ExtentsMismatch(format!(
            "payload holds {} bytes, header extents need {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Field3D::from_vec(extents, data)
}

pub fn write_field(field: &Field3D, path: impl AsRef<Path>) -> Result<()> {
    write_to(field, BufWriter::new(File::create(path)?))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field3D> {
    read_from(BufReader::new(File::open(path)?))
}

/// Read a field and require specific extents.
pub fn read_field_expecting(path: impl AsRef<Path>, extents: Extents) -> Result<Field3D> {
    let field = read_field(path)?;
    if field.extents() != extents {
        let e = field.extents();
        return Err(Error::ExtentsMismatch(format!(
            "file holds {}x{}x{}, expected {}x{}x{}",
            e.nx, e.ny, e.nz, extents.nx, extents.ny, extents.nz
        )));
    }
    Ok(field)
}
