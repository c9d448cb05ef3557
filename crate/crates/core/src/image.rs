//! Raster types shared across the pipeline.
//!
//! All rasters are row-major with `h` rows and `w` columns. Pixel `(y, x)`
//! lives at index `y * w + x`. Gray values are `f32` in `[0, 1]`; labels
//! and masks are `u8`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("raster data length {len} does not match {h}x{w}")]
    BadLength { len: usize, h: usize, w: usize },
}

/// Grayscale raster, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, data: vec![0.0; h * w] }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if data.len() != h * w {
            return Err(ImageError::BadLength { len: data.len(), h, w });
        }
        Ok(Self { h, w, data })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.data[y * self.w + x] = v;
    }

    /// Quantize to the 8-bit scale used by the on-disk format.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn from_u8(h: usize, w: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.len() != h * w {
            return Err(ImageError::BadLength { len: bytes.len(), h, w });
        }
        Ok(Self { h, w, data: bytes.iter().map(|&b| b as f32 / 255.0).collect() })
    }
}

/// Per-pixel class raster. In this pipeline values are the four classes
/// 0..=3 (plus the transient erroneous value 4 in uncleaned imports).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub h: usize,
    pub w: usize,
    pub data: Vec<u8>,
}

impl LabelMap {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, data: vec![0; h * w] }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if data.len() != h * w {
            return Err(ImageError::BadLength { len: data.len(), h, w });
        }
        Ok(Self { h, w, data })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        self.data[y * self.w + x] = v;
    }

    /// Number of pixels carrying the given label.
    pub fn count(&self, label: u8) -> usize {
        self.data.iter().filter(|&&v| v == label).count()
    }
}

/// Binary raster (0 or 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub h: usize,
    pub w: usize,
    pub data: Vec<u8>,
}

impl Mask {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, data: vec![0; h * w] }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if data.len() != h * w {
            return Err(ImageError::BadLength { len: data.len(), h, w });
        }
        Ok(Self { h, w, data })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        self.data[y * self.w + x] = if v != 0 { 1 } else { 0 };
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Centroid `(cy, cx)` of the set pixels. `None` when empty.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut sy = 0.0;
        let mut sx = 0.0;
        let mut n = 0usize;
        for y in 0..self.h {
            for x in 0..self.w {
                if self.get(y, x) != 0 {
                    sy += y as f64;
                    sx += x as f64;
                    n += 1;
                }
            }
        }
        if n == 0 {
            None
        } else {
            Some((sy / n as f64, sx / n as f64))
        }
    }

    /// Inclusive bounding box `(min_y, min_x, max_y, max_x)` of the set
    /// pixels. `None` when empty.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.h {
            for x in 0..self.w {
                if self.get(y, x) != 0 {
                    b = Some(match b {
                        None => (y, x, y, x),
                        Some((y0, x0, y1, x1)) => (y0.min(y), x0.min(x), y1.max(y), x1.max(x)),
                    });
                }
            }
        }
        b
    }
}

/// Label the 4-connected components of a mask.
///
/// Returns the number of components and a raster of component ids
/// (0 = background, components numbered from 1 in scan order).
pub fn connected_components4(mask: &Mask) -> (usize, Vec<u32>) {
    let (h, w) = (mask.h, mask.w);
    let mut labels = vec![0u32; h * w];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..h * w {
        if mask.data[start] == 0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (y, x) = (i / w, i % w);
            let mut visit = |j: usize| {
                if mask.data[j] != 0 && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
        }
    }
    (next as usize, labels)
}

/// Keep only the largest 4-connected component of a mask.
///
/// Ties go to the component discovered first in scan order. Returns the
/// input unchanged when it is empty or already a single component.
pub fn largest_component4(mask: &Mask) -> Mask {
    let (n, labels) = connected_components4(mask);
    if n <= 1 {
        return mask.clone();
    }
    let mut sizes = vec![0usize; n + 1];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let best = (1..=n).max_by_key(|&i| (sizes[i], usize::MAX - i)).unwrap() as u32;
    let data = labels.iter().map(|&l| u8::from(l == best)).collect();
    Mask { h: mask.h, w: mask.w, data }
}
