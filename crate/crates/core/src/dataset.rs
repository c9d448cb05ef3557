//! Labeled samples and the on-disk dataset container.
//!
//! ## CHRSEG01 format
//!
//! Little-endian binary, in file order:
//!
//! ```text
//! magic   8 bytes   "CHRSEG01"
//! count   u32       number of samples
//! height  u16
//! width   u16
//! then per sample:
//!   image  h*w bytes  u8, value = round(gray * 255)
//!   label  h*w bytes  u8 class id
//! ```
//!
//! Labels are 0..=3 everywhere in this pipeline. A value of 4 is tolerated
//! on read and write so that externally converted datasets containing the
//! known mislabels can flow through the cleaning stage; anything above 4
//! is rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::image::{GrayImage, LabelMap};

pub const DATASET_MAGIC: &[u8; 8] = b"CHRSEG01";

/// Highest label value the container accepts (4 = uncleaned mislabel).
const MAX_RAW_LABEL: u8 = 4;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected \"CHRSEG01\", found {0:?}")]
    BadMagic(Vec<u8>),
    #[error("truncated file: expected {expected} more bytes for {what}")]
    Truncated { what: &'static str, expected: usize },
    #[error("label value {0} out of range (max {MAX_RAW_LABEL})")]
    BadLabel(u8),
    #[error("sample dims {0}x{1} do not match dataset dims {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("dataset dims {0}x{1} exceed the u16 range of the format")]
    DimsTooLarge(usize, usize),
}

/// Provenance of a generated sample: which source pair it came from and
/// the exact transform draw, enough to re-derive the placement.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeta {
    /// Source ids `(first, second)`; the first id takes label 1.
    pub pair: (u32, u32),
    /// Rotation angles in degrees `(first, second)`.
    pub angles: (f64, f64),
    /// Integer pixel offsets `(dx, dy)` per chromosome.
    pub offsets: ((i32, i32), (i32, i32)),
    /// The per-sample RNG seed the accepted draw was made with.
    pub seed: u64,
}

/// One labeled segmentation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub label: LabelMap,
    /// Present on freshly generated samples; not stored in the file format.
    pub meta: Option<SampleMeta>,
}

/// An in-memory dataset with uniform raster dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub h: usize,
    pub w: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(h: usize, w: usize) -> Self {
        Self { h, w, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: Sample) -> Result<(), DatasetError> {
        if sample.image.h != self.h
            || sample.image.w != self.w
            || sample.label.h != self.h
            || sample.label.w != self.w
        {
            return Err(DatasetError::DimMismatch(sample.image.h, sample.image.w, self.h, self.w));
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Sub-dataset from a list of indices (samples are cloned).
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            h: self.h,
            w: self.w,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    if ds.h > u16::MAX as usize || ds.w > u16::MAX as usize {
        return Err(DatasetError::DimsTooLarge(ds.h, ds.w));
    }
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(DATASET_MAGIC)?;
    f.write_all(&(ds.samples.len() as u32).to_le_bytes())?;
    f.write_all(&(ds.h as u16).to_le_bytes())?;
    f.write_all(&(ds.w as u16).to_le_bytes())?;
    for s in &ds.samples {
        if s.image.h != ds.h || s.image.w != ds.w || s.label.h != ds.h || s.label.w != ds.w {
            return Err(DatasetError::DimMismatch(s.image.h, s.image.w, ds.h, ds.w));
        }
        f.write_all(&s.image.to_u8())?;
        for &l in &s.label.data {
            if l > MAX_RAW_LABEL {
                return Err(DatasetError::BadLabel(l));
            }
        }
        f.write_all(&s.label.data)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != DATASET_MAGIC {
        return Err(DatasetError::BadMagic(magic.to_vec()));
    }
    let mut buf4 = [0u8; 4];
    read_exact(&mut r, &mut buf4, "sample count")?;
    let count = u32::from_le_bytes(buf4) as usize;
    let mut buf2 = [0u8; 2];
    read_exact(&mut r, &mut buf2, "height")?;
    let h = u16::from_le_bytes(buf2) as usize;
    read_exact(&mut r, &mut buf2, "width")?;
    let w = u16::from_le_bytes(buf2) as usize;

    let mut ds = Dataset::new(h, w);
    let mut image_bytes = vec![0u8; h * w];
    let mut label_bytes = vec![0u8; h * w];
    for _ in 0..count {
        read_exact(&mut r, &mut image_bytes, "image pixels")?;
        read_exact(&mut r, &mut label_bytes, "label pixels")?;
        if let Some(&bad) = label_bytes.iter().find(|&&l| l > MAX_RAW_LABEL) {
            return Err(DatasetError::BadLabel(bad));
        }
        let image = GrayImage::from_u8(h, w, &image_bytes).expect("length checked");
        let label = LabelMap::from_vec(h, w, label_bytes.clone()).expect("length checked");
        ds.samples.push(Sample { image, label, meta: None });
    }
    Ok(ds)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &'static str) -> Result<(), DatasetError> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(DatasetError::Truncated { what, expected: buf.len() - filled });
        }
        filled += n;
    }
    Ok(())
}
