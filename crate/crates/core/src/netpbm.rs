//! Minimal Netpbm I/O: binary PGM (P5) for single-chromosome imports and
//! binary PPM (P6) for rendered overlays. 8-bit only.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetpbmError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("only maxval 255 is supported, found {0}")]
    MaxVal(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// 8-bit grayscale raster as stored in a PGM file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub w: usize,
    pub h: usize,
    pub data: Vec<u8>,
}

/// 8-bit RGB raster as stored in a PPM file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ppm {
    pub w: usize,
    pub h: usize,
    /// Interleaved RGB, 3 bytes per pixel.
    pub data: Vec<u8>,
}

// Reads ASCII header tokens, skipping whitespace and '#' comments.
fn read_token(r: &mut impl Read) -> Result<String, NetpbmError> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    let mut in_comment = false;
    loop {
        if r.read(&mut byte)? == 0 {
            if tok.is_empty() {
                return Err(NetpbmError::Header("unexpected end of header".into()));
            }
            return Ok(tok);
        }
        let c = byte[0] as char;
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        if c == '#' {
            in_comment = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            return Ok(tok);
        }
        tok.push(c);
    }
}

fn read_header(r: &mut impl Read, magic: &'static str) -> Result<(usize, usize), NetpbmError> {
    let found = read_token(r)?;
    if found != magic {
        return Err(NetpbmError::BadMagic { expected: magic, found });
    }
    let parse = |s: String| {
        s.parse::<usize>()
            .map_err(|_| NetpbmError::Header(format!("expected integer, found {s:?}")))
    };
    let w = parse(read_token(r)?)?;
    let h = parse(read_token(r)?)?;
    let maxval = parse(read_token(r)?)?;
    if maxval != 255 {
        return Err(NetpbmError::MaxVal(maxval as u32));
    }
    Ok((w, h))
}

fn read_exact_pixels(r: &mut impl Read, expected: usize) -> Result<Vec<u8>, NetpbmError> {
    let mut data = Vec::with_capacity(expected);
    r.take(expected as u64).read_to_end(&mut data)?;
    if data.len() != expected {
        return Err(NetpbmError::Truncated { expected, found: data.len() });
    }
    Ok(data)
}

pub fn read_pgm(path: &Path) -> Result<Pgm, NetpbmError> {
    let mut r = BufReader::new(File::open(path)?);
    let (w, h) = read_header(&mut r, "P5")?;
    let data = read_exact_pixels(&mut r, w * h)?;
    Ok(Pgm { w, h, data })
}

pub fn write_pgm(path: &Path, img: &Pgm) -> Result<(), NetpbmError> {
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "P5\n{} {}\n255\n", img.w, img.h)?;
    f.write_all(&img.data)?;
    f.flush()?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<Ppm, NetpbmError> {
    let mut r = BufReader::new(File::open(path)?);
    let (w, h) = read_header(&mut r, "P6")?;
    let data = read_exact_pixels(&mut r, w * h * 3)?;
    Ok(Ppm { w, h, data })
}

pub fn write_ppm(path: &Path, img: &Ppm) -> Result<(), NetpbmError> {
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "P6\n{} {}\n255\n", img.w, img.h)?;
    f.write_all(&img.data)?;
    f.flush()?;
    Ok(())
}
