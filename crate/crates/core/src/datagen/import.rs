//! Import of externally extracted single-chromosome images.
//!
//! Sources are 8-bit PGM pairs named `<id>_gray.pgm` / `<id>_mask.pgm`
//! (any nonzero mask byte is foreground). An optional `<id>_cy3.pgm`
//! second fluorescence channel is combined into the grayscale by
//! per-pixel maximum before anything else happens.

use std::path::Path;

use super::transform::{combine_channels, downscale2x, downscale2x_mask};
use super::{ChromoImage, DatagenError};
use crate::image::{largest_component4, GrayImage, Mask};
use crate::netpbm::read_pgm;

/// Loads every `<id>_gray.pgm` / `<id>_mask.pgm` pair under `dir`,
/// recentered onto a `canvas_h x canvas_w` raster (exact integer shift of
/// the mask centroid to the canvas center). With `downscale` set, each
/// source is first block-averaged by 2, matching how the original crops
/// were reduced before composition.
///
/// Masks with satellite specks are reduced to their largest 4-connected
/// component rather than rejected; real extractions are rarely perfectly
/// clean.
pub fn load_sources(
    dir: &Path,
    canvas_h: usize,
    canvas_w: usize,
    downscale: bool,
) -> Result<Vec<ChromoImage>, DatagenError> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.ends_with("_gray.pgm"))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(DatagenError::NoSources { dir: dir.to_path_buf() });
    }

    let mut sources = Vec::with_capacity(entries.len());
    for gray_path in entries {
        let name = gray_path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string();
        let id: u32 = name
            .strip_suffix("_gray.pgm")
            .and_then(|s| s.parse().ok())
            .ok_or(DatagenError::BadSourceName { name: name.clone() })?;

        let mask_path = gray_path.with_file_name(format!("{id}_mask.pgm"));
        if !mask_path.exists() {
            return Err(DatagenError::MissingMask { id, path: mask_path });
        }
        let gray_pgm = read_pgm(&gray_path)?;
        let mask_pgm = read_pgm(&mask_path)?;
        let mut gray =
            GrayImage::from_u8(gray_pgm.h, gray_pgm.w, &gray_pgm.data).expect("pgm len checked");
        let mask_data = mask_pgm.data.iter().map(|&b| u8::from(b != 0)).collect();
        let mut mask = Mask::from_vec(mask_pgm.h, mask_pgm.w, mask_data).expect("pgm len checked");

        let cy3_path = gray_path.with_file_name(format!("{id}_cy3.pgm"));
        if cy3_path.exists() {
            let cy3_pgm = read_pgm(&cy3_path)?;
            let cy3 = GrayImage::from_u8(cy3_pgm.h, cy3_pgm.w, &cy3_pgm.data)
                .expect("pgm len checked");
            gray = combine_channels(&gray, &cy3)?;
        }

        if gray.h != mask.h || gray.w != mask.w {
            return Err(DatagenError::DimMismatch {
                what: "imported source",
                gh: gray.h,
                gw: gray.w,
                mh: mask.h,
                mw: mask.w,
            });
        }
        if downscale {
            gray = downscale2x(&gray);
            mask = downscale2x_mask(&mask);
        }
        mask = largest_component4(&mask);
        sources.push(recenter(gray, mask, id, canvas_h, canvas_w)?);
    }
    sources.sort_by_key(|c| c.id);
    Ok(sources)
}

/// Pastes a source onto the canvas with the integer shift that brings its
/// mask centroid closest to the canvas center.
fn recenter(
    gray: GrayImage,
    mask: Mask,
    id: u32,
    canvas_h: usize,
    canvas_w: usize,
) -> Result<ChromoImage, DatagenError> {
    let (cy, cx) = mask.centroid().ok_or(DatagenError::EmptyMask { id })?;
    let (y0, x0, y1, x1) = mask.bbox().expect("nonempty mask has a bbox");
    let dy = ((canvas_h as f64 - 1.0) / 2.0 - cy).round() as i64;
    let dx = ((canvas_w as f64 - 1.0) / 2.0 - cx).round() as i64;
    if (y0 as i64 + dy) < 0
        || (x0 as i64 + dx) < 0
        || (y1 as i64 + dy) >= canvas_h as i64
        || (x1 as i64 + dx) >= canvas_w as i64
    {
        return Err(DatagenError::SourceTooLarge {
            id,
            h: y1 - y0 + 1,
            w: x1 - x0 + 1,
            ch: canvas_h,
            cw: canvas_w,
        });
    }
    let mut out_gray = GrayImage::zeros(canvas_h, canvas_w);
    let mut out_mask = Mask::zeros(canvas_h, canvas_w);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if mask.get(y, x) != 0 {
                let (ny, nx) = ((y as i64 + dy) as usize, (x as i64 + dx) as usize);
                out_mask.set(ny, nx, 1);
                out_gray.set(ny, nx, gray.get(y, x));
            }
        }
    }
    ChromoImage::from_parts(out_gray, out_mask, id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netpbm::{write_pgm, Pgm};

    fn write_source(dir: &Path, id: u32, h: usize, w: usize) {
        // lopsided blob in the top-left corner
        let mut gray = vec![0u8; h * w];
        let mut mask = vec![0u8; h * w];
        for y in 1..5 {
            for x in 1..7 {
                gray[y * w + x] = 100 + (x as u8);
                mask[y * w + x] = 255;
            }
        }
        write_pgm(&dir.join(format!("{id}_gray.pgm")), &Pgm { w, h, data: gray }).unwrap();
        write_pgm(&dir.join(format!("{id}_mask.pgm")), &Pgm { w, h, data: mask }).unwrap();
    }

    #[test]
    fn loads_and_recenters_sources() {
        let dir = tempfile::tempdir().unwrap();
        write_source(dir.path(), 0, 20, 20);
        write_source(dir.path(), 3, 20, 20);
        let sources = load_sources(dir.path(), 31, 31, false).unwrap();
        assert_eq!(sources.len(), 2);
        assert_eq!(sources[0].id, 0);
        assert_eq!(sources[1].id, 3);
        for s in &sources {
            assert_eq!((s.gray.h, s.gray.w), (31, 31));
            let (cy, cx) = s.mask.centroid().unwrap();
            assert!((cy - 15.0).abs() <= 0.5 && (cx - 15.0).abs() <= 0.5);
            assert_eq!(s.mask.count(), 4 * 6);
        }
        // gray values survive the shift (255-scale to unit scale)
        let max = sources[0].gray.data.iter().cloned().fold(0.0f32, f32::max);
        assert!((max - 106.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn missing_mask_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let pgm = Pgm { w: 4, h: 4, data: vec![7; 16] };
        write_pgm(&dir.path().join("2_gray.pgm"), &pgm).unwrap();
        assert!(matches!(
            load_sources(dir.path(), 31, 31, false),
            Err(DatagenError::MissingMask { id: 2, .. })
        ));
    }

    #[test]
    fn empty_dir_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_sources(dir.path(), 31, 31, false),
            Err(DatagenError::NoSources { .. })
        ));
    }

    #[test]
    fn non_numeric_prefix_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let pgm = Pgm { w: 4, h: 4, data: vec![7; 16] };
        write_pgm(&dir.path().join("blob_gray.pgm"), &pgm).unwrap();
        assert!(matches!(
            load_sources(dir.path(), 31, 31, false),
            Err(DatagenError::BadSourceName { .. })
        ));
    }

    #[test]
    fn oversized_source_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_source(dir.path(), 0, 20, 20);
        write_source(dir.path(), 1, 20, 20);
        assert!(matches!(
            load_sources(dir.path(), 5, 5, false),
            Err(DatagenError::SourceTooLarge { .. })
        ));
    }

    #[test]
    fn cy3_channel_combines_by_max() {
        let dir = tempfile::tempdir().unwrap();
        write_source(dir.path(), 0, 20, 20);
        write_source(dir.path(), 1, 20, 20);
        // bright spot inside source 0's mask
        let mut cy3 = vec![0u8; 400];
        cy3[2 * 20 + 2] = 250;
        write_pgm(&dir.path().join("0_cy3.pgm"), &Pgm { w: 20, h: 20, data: cy3 }).unwrap();
        let sources = load_sources(dir.path(), 31, 31, false).unwrap();
        let max = sources[0].gray.data.iter().cloned().fold(0.0f32, f32::max);
        assert!((max - 250.0 / 255.0).abs() < 1e-6);
        let other = sources[1].gray.data.iter().cloned().fold(0.0f32, f32::max);
        assert!((other - 106.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn downscale_halves_source_resolution() {
        let dir = tempfile::tempdir().unwrap();
        write_source(dir.path(), 0, 20, 20);
        write_source(dir.path(), 1, 20, 20);
        let sources = load_sources(dir.path(), 31, 31, true).unwrap();
        // 4x6 blob becomes roughly 2x3 after block-majority downscale
        assert!(sources[0].mask.count() <= 8);
        assert!(sources[0].mask.count() >= 4);
    }
}
