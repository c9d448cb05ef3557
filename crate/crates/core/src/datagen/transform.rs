//! Geometric and photometric transforms on single-chromosome images.

use thiserror::Error;

use super::{ChromoImage, DatagenError};
use crate::image::{connected_components4, GrayImage, Mask};

/// A placement that produced no usable chromosome; the caller resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlaceReject {
    #[error("transformed chromosome left the canvas entirely")]
    OffCanvas,
    #[error("transformed mask broke into multiple components")]
    Fragmented,
}

/// Per-pixel maximum of two fluorescence channels, preserving bright
/// telomere spots over the chromosome body.
pub fn combine_channels(dapi: &GrayImage, cy3: &GrayImage) -> Result<GrayImage, DatagenError> {
    if dapi.h != cy3.h || dapi.w != cy3.w {
        return Err(DatagenError::DimMismatch {
            what: "combine_channels",
            gh: dapi.h,
            gw: dapi.w,
            mh: cy3.h,
            mw: cy3.w,
        });
    }
    let data = dapi.data.iter().zip(&cy3.data).map(|(&a, &b)| a.max(b)).collect();
    Ok(GrayImage::from_vec(dapi.h, dapi.w, data).expect("same dims"))
}

/// Halves resolution: each output pixel is the mean of its 2x2 source
/// block. An odd trailing row or column is dropped.
pub fn downscale2x(img: &GrayImage) -> GrayImage {
    let (oh, ow) = (img.h / 2, img.w / 2);
    let mut out = GrayImage::zeros(oh, ow);
    for y in 0..oh {
        for x in 0..ow {
            let s = img.get(2 * y, 2 * x)
                + img.get(2 * y, 2 * x + 1)
                + img.get(2 * y + 1, 2 * x)
                + img.get(2 * y + 1, 2 * x + 1);
            out.set(y, x, s / 4.0);
        }
    }
    out
}

/// Mask counterpart of [`downscale2x`]: block mean thresholded at >= 0.5
/// (i.e. at least two of the four source pixels set).
pub fn downscale2x_mask(mask: &Mask) -> Mask {
    let (oh, ow) = (mask.h / 2, mask.w / 2);
    let mut out = Mask::zeros(oh, ow);
    for y in 0..oh {
        for x in 0..ow {
            let s = mask.get(2 * y, 2 * x)
                + mask.get(2 * y, 2 * x + 1)
                + mask.get(2 * y + 1, 2 * x)
                + mask.get(2 * y + 1, 2 * x + 1);
            out.set(y, x, u8::from(s >= 2));
        }
    }
    out
}

/// Sine/cosine of an angle in degrees, exact at the cardinal angles so
/// that quarter-turn rotations are pure index permutations.
fn sincos_deg(angle: f64) -> (f64, f64) {
    let a = angle.rem_euclid(360.0);
    if a == 0.0 {
        (0.0, 1.0)
    } else if a == 90.0 {
        (1.0, 0.0)
    } else if a == 180.0 {
        (0.0, -1.0)
    } else if a == 270.0 {
        (-1.0, 0.0)
    } else {
        let r = a.to_radians();
        (r.sin(), r.cos())
    }
}

/// Bilinear sample with zero outside the raster. Weights of exactly zero
/// are skipped so integer coordinates read a single pixel.
fn bilinear_gray(img: &GrayImage, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (iy, ix) = (y0 as i64, x0 as i64);
    let mut acc = 0.0;
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        if wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let w = wy * wx;
            if w == 0.0 {
                continue;
            }
            let (yy, xx) = (iy + dy, ix + dx);
            if yy >= 0 && xx >= 0 && (yy as usize) < img.h && (xx as usize) < img.w {
                acc += w * img.get(yy as usize, xx as usize) as f64;
            }
        }
    }
    acc
}

fn bilinear_mask(mask: &Mask, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (iy, ix) = (y0 as i64, x0 as i64);
    let mut acc = 0.0;
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        if wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let w = wy * wx;
            if w == 0.0 {
                continue;
            }
            let (yy, xx) = (iy + dy, ix + dx);
            if yy >= 0 && xx >= 0 && (yy as usize) < mask.h && (xx as usize) < mask.w {
                acc += w * mask.get(yy as usize, xx as usize) as f64;
            }
        }
    }
    acc
}

/// Rotates a chromosome about its mask centroid and translates it onto a
/// canvas of the given size.
///
/// Positive angles turn counterclockwise on screen (y growing downward);
/// `offset` is `(dx, dy)` in (columns, rows). The grayscale image is
/// resampled bilinearly; the mask gets the same bilinear weights and is
/// thresholded at 0.5. Angle 0 with offset (0,0) reproduces the input
/// exactly (modulo canvas size), and integer offsets are exact shifts.
pub fn place(
    chromo: &ChromoImage,
    angle_deg: f64,
    offset: (i32, i32),
    canvas_h: usize,
    canvas_w: usize,
) -> Result<ChromoImage, PlaceReject> {
    let (cy, cx) = chromo.mask.centroid().expect("ChromoImage mask is never empty");
    let (sin, cos) = sincos_deg(angle_deg);
    let (tx, ty) = (offset.0 as f64, offset.1 as f64);

    let mut gray = GrayImage::zeros(canvas_h, canvas_w);
    let mut mask = Mask::zeros(canvas_h, canvas_w);
    for y in 0..canvas_h {
        for x in 0..canvas_w {
            // Inverse map: undo the translation, rotate back by -angle.
            let ry = y as f64 - cy - ty;
            let rx = x as f64 - cx - tx;
            let sy = cy + cos * ry + sin * rx;
            let sx = cx - sin * ry + cos * rx;
            if bilinear_mask(&chromo.mask, sy, sx) >= 0.5 {
                mask.set(y, x, 1);
                gray.set(y, x, bilinear_gray(&chromo.gray, sy, sx).clamp(0.0, 1.0) as f32);
            }
        }
    }

    let (components, _) = connected_components4(&mask);
    match components {
        0 => Err(PlaceReject::OffCanvas),
        1 => Ok(ChromoImage { gray, mask, id: chromo.id }),
        _ => Err(PlaceReject::Fragmented),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band_chromo(h: usize, w: usize) -> ChromoImage {
        // Horizontal band two rows tall in the middle of the raster.
        let mut gray = GrayImage::zeros(h, w);
        let mut mask = Mask::zeros(h, w);
        for y in h / 2 - 1..=h / 2 {
            for x in w / 4..3 * w / 4 {
                mask.set(y, x, 1);
                gray.set(y, x, 0.5 + 0.4 * (x as f32 / w as f32));
            }
        }
        ChromoImage::from_parts(gray, mask, 7).unwrap()
    }

    #[test]
    fn combine_channels_is_pixelwise_max() {
        let dapi = GrayImage::from_vec(1, 3, vec![0.3, 0.5, 0.0]).unwrap();
        let cy3 = GrayImage::from_vec(1, 3, vec![0.8, 0.5, 0.0]).unwrap();
        let out = combine_channels(&dapi, &cy3).unwrap();
        assert_eq!(out.data, vec![0.8, 0.5, 0.0]);
        // zero cy3 leaves dapi untouched
        let zero = GrayImage::zeros(1, 3);
        assert_eq!(combine_channels(&dapi, &zero).unwrap().data, dapi.data);
        // idempotent on equal inputs
        assert_eq!(combine_channels(&dapi, &dapi).unwrap().data, dapi.data);
    }

    #[test]
    fn combine_channels_rejects_dim_mismatch() {
        let a = GrayImage::zeros(2, 2);
        let b = GrayImage::zeros(3, 3);
        assert!(combine_channels(&a, &b).is_err());
    }

    #[test]
    fn downscale_averages_blocks() {
        let img = GrayImage::from_vec(2, 2, vec![1.0; 4]).unwrap();
        assert_eq!(downscale2x(&img).data, vec![1.0]);
        let img = GrayImage::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(downscale2x(&img).data, vec![0.5]);
    }

    #[test]
    fn downscale_matches_block_mean_oracle() {
        let img = GrayImage::from_vec(4, 4, (0..16).map(|i| i as f32 / 16.0).collect()).unwrap();
        let out = downscale2x(&img);
        for y in 0..2 {
            for x in 0..2 {
                let expect = (img.get(2 * y, 2 * x)
                    + img.get(2 * y, 2 * x + 1)
                    + img.get(2 * y + 1, 2 * x)
                    + img.get(2 * y + 1, 2 * x + 1))
                    / 4.0;
                assert_eq!(out.get(y, x), expect);
            }
        }
    }

    #[test]
    fn downscale_drops_odd_trailing_row_and_column() {
        let img = GrayImage::zeros(5, 7);
        let out = downscale2x(&img);
        assert_eq!((out.h, out.w), (2, 3));
    }

    #[test]
    fn downscale_mask_needs_majority() {
        let m = Mask::from_vec(2, 2, vec![1, 1, 0, 0]).unwrap();
        assert_eq!(downscale2x_mask(&m).data, vec![1]);
        let m = Mask::from_vec(2, 2, vec![1, 0, 0, 0]).unwrap();
        assert_eq!(downscale2x_mask(&m).data, vec![0]);
    }

    #[test]
    fn place_identity_round_trips() {
        let c = band_chromo(20, 20);
        let placed = place(&c, 0.0, (0, 0), 20, 20).unwrap();
        assert_eq!(placed.mask, c.mask);
        assert_eq!(placed.gray, c.gray);
    }

    #[test]
    fn place_full_turn_equals_identity_within_tolerance() {
        let c = band_chromo(20, 20);
        let placed = place(&c, 360.0, (0, 0), 20, 20).unwrap();
        assert_eq!(placed.mask, c.mask);
        for (a, b) in placed.gray.data.iter().zip(&c.gray.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn place_integer_offset_is_exact_shift() {
        let c = band_chromo(20, 20);
        let placed = place(&c, 0.0, (3, -2), 20, 20).unwrap();
        for y in 0..20usize {
            for x in 0..20usize {
                let (sy, sx) = (y as i32 + 2, x as i32 - 3);
                let expect = if sy >= 0 && sx >= 0 && sy < 20 && sx < 20 {
                    c.gray.get(sy as usize, sx as usize)
                } else {
                    0.0
                };
                assert_eq!(placed.gray.get(y, x), expect, "at ({y},{x})");
            }
        }
    }

    #[test]
    fn place_quarter_turn_matches_index_permutation_oracle() {
        // Asymmetric pattern whose centroid is exactly the center pixel
        // (2,2) of a 5x5 raster, so a 90-degree turn permutes indices.
        let pts = [(2, 2), (1, 2), (3, 2), (2, 1), (2, 3), (1, 1), (3, 3)];
        let mut gray = GrayImage::zeros(5, 5);
        let mut mask = Mask::zeros(5, 5);
        for (i, &(y, x)) in pts.iter().enumerate() {
            mask.set(y, x, 1);
            gray.set(y, x, 0.1 + 0.1 * i as f32);
        }
        let c = ChromoImage::from_parts(gray, mask, 0).unwrap();
        assert_eq!(c.mask.centroid(), Some((2.0, 2.0)));

        let placed = place(&c, 90.0, (0, 0), 5, 5).unwrap();
        // forward map for +90 degrees: (cy+u, cx+v) -> (cy-v, cx+u)
        let mut want_gray = GrayImage::zeros(5, 5);
        let mut want_mask = Mask::zeros(5, 5);
        for &(y, x) in &pts {
            let (u, v) = (y as i32 - 2, x as i32 - 2);
            let (ny, nx) = ((2 - v) as usize, (2 + u) as usize);
            want_mask.set(ny, nx, 1);
            want_gray.set(ny, nx, c.gray.get(y, x));
        }
        assert_eq!(placed.mask, want_mask);
        assert_eq!(placed.gray, want_gray);
    }

    #[test]
    fn place_off_canvas_is_rejected() {
        let c = band_chromo(20, 20);
        assert_eq!(place(&c, 0.0, (100, 0), 20, 20), Err(PlaceReject::OffCanvas));
    }

    #[test]
    fn place_preserves_id_and_intensity_range() {
        let c = band_chromo(24, 24);
        let placed = place(&c, 37.0, (1, -1), 24, 24).unwrap();
        assert_eq!(placed.id, 7);
        assert!(placed.gray.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // gray is zero outside the mask
        for (g, m) in placed.gray.data.iter().zip(&placed.mask.data) {
            assert!(*m == 1 || *g == 0.0);
        }
    }
}
