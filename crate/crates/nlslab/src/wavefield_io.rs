//! Little-endian binary container for wavefields and run checkpoints.
//!
//! Layout:
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 4    | magic `NLSF`                             |
//! | 4      | 2    | format version (`u16`, currently 1)      |
//! | 6      | 1    | dimension d (`u8`)                       |
//! | 7      | 4    | points per axis N (`u32`)                |
//! | 11     | 8    | box length L (`f64`)                     |
//! | 19     | 1    | representation: 0 physical, 1 spectral   |
//! | 20     | 16·N^d | interleaved `(re, im)` `f64` pairs, row-major |
//!
//! A checkpoint appends the trailer `CKPT`, the time `t` (`f64`) and the
//! step index (`u64`).

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use nlslab_core::{Complex64, GridError, GridSpec, Representation, Wavefield};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NLSF";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CKPT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not an NLSF record (bad magic)")]
    Magic,
    #[error("unsupported NLSF version {0}")]
    Version(u16),
    #[error("invalid representation flag {0}")]
    Representation(u8),
    #[error("invalid grid in header: {0}")]
    Grid(#[from] GridError),
    #[error("record truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("missing or malformed checkpoint trailer")]
    Trailer,
    #[error("{0} trailing bytes after the record")]
    TrailingBytes(usize),
}

/// A field with the time and step at which it was captured.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub field: Wavefield,
    pub t: f64,
    pub step: u64,
}

pub fn encode(field: &Wavefield) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * field.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(grid.dims() as u8);
    out.extend_from_slice(&(grid.points_per_axis() as u32).to_le_bytes());
    out.extend_from_slice(&grid.box_length().to_le_bytes());
    out.push(match field.representation() {
        Representation::Physical => 0,
        Representation::Spectral => 1,
    });
    for z in field.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("slice of 8"))
}

/// Decodes one field; returns it with the number of bytes consumed.
fn decode_prefix(bytes: &[u8]) -> Result<(Wavefield, usize), FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[0..4] != MAGIC {
        return Err(FormatError::Magic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    let dims = bytes[6] as usize;
    let points = u32::from_le_bytes(bytes[7..11].try_into().expect("slice of 4")) as usize;
    let box_length = f64_at(bytes, 11);
    let repr = match bytes[19] {
        0 => Representation::Physical,
        1 => Representation::Spectral,
        other => return Err(FormatError::Representation(other)),
    };
    let grid = GridSpec::new(dims, points, box_length)?;
    let n = grid.total_points();
    let end = HEADER_LEN + 16 * n;
    if bytes.len() < end {
        return Err(FormatError::Truncated {
            expected: end,
            found: bytes.len(),
        });
    }
    let values = bytes[HEADER_LEN..end]
        .chunks_exact(16)
        .map(|c| Complex64::new(f64_at(c, 0), f64_at(c, 8)))
        .collect();
    let field = Wavefield::new(grid, repr, values).expect("length checked against header");
    Ok((field, end))
}

pub fn decode(bytes: &[u8]) -> Result<Wavefield, FormatError> {
    let (field, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - used));
    }
    Ok(field)
}

pub fn encode_checkpoint(cp: &Checkpoint) -> Vec<u8> {
    let mut out = encode(&cp.field);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&cp.t.to_le_bytes());
    out.extend_from_slice(&cp.step.to_le_bytes());
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, FormatError> {
    let (field, used) = decode_prefix(bytes)?;
    let trailer = &bytes[used..];
    if trailer.len() != 20 || &trailer[0..4] != CHECKPOINT_MAGIC {
        return Err(FormatError::Trailer);
    }
    Ok(Checkpoint {
        field,
        t: f64_at(trailer, 4),
        step: u64::from_le_bytes(trailer[12..20].try_into().expect("slice of 8")),
    })
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_field(path: &Path, field: &Wavefield) -> io::Result<()> {
    write_atomic(path, &encode(field))
}

pub fn read_field(path: &Path) -> Result<Wavefield, FormatError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn write_checkpoint(path: &Path, cp: &Checkpoint) -> io::Result<()> {
    write_atomic(path, &encode_checkpoint(cp))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, FormatError> {
    decode_checkpoint(&fs::read(path)?)
}
