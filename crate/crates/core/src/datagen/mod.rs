//! Semi-synthetic dataset construction.
//!
//! Real overlapping chromosomes are rare in metaphase images, so training
//! data is manufactured: single-chromosome grayscale/mask sources are
//! rotated, one of the pair is translated, the two grayscale images are
//! averaged, and the two masks combine into an exact four-class label map
//! (3 where both masks are set). Sources come either from a procedural
//! phantom generator or from PGM pairs extracted from real images.

mod generate;
mod import;
mod phantom;
mod transform;

pub use generate::{
    compose_pair, generate_dataset, generate_dataset_parallel, pair_census, ComposeReject,
};
pub use import::load_sources;
pub use phantom::{build_phantom_set, generate_phantom, PhantomParams};
pub use transform::{combine_channels, downscale2x, downscale2x_mask, place, PlaceReject};

// The on-disk dataset format lives with the Dataset type; re-exported
// here because generation is where files usually get written first.
pub use crate::dataset::{read_dataset, write_dataset};

use std::path::PathBuf;

use thiserror::Error;

use crate::image::{connected_components4, GrayImage, Mask};
use crate::netpbm::NetpbmError;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("pgm: {0}")]
    Netpbm(#[from] NetpbmError),
    #[error("{what}: gray is {gh}x{gw} but mask is {mh}x{mw}")]
    DimMismatch { what: &'static str, gh: usize, gw: usize, mh: usize, mw: usize },
    #[error("source {id}: mask has no foreground pixels")]
    EmptyMask { id: u32 },
    #[error("source {id}: mask splits into {components} 4-connected components")]
    FragmentedMask { id: u32, components: usize },
    #[error("source {id}: {h}x{w} does not fit the {ch}x{cw} canvas")]
    SourceTooLarge { id: u32, h: usize, w: usize, ch: usize, cw: usize },
    #[error("source file {name:?} does not match <id>_gray.pgm")]
    BadSourceName { name: String },
    #[error("source {id}: gray image present but {path:?} is missing")]
    MissingMask { id: u32, path: PathBuf },
    #[error("no *_gray.pgm sources found in {dir:?}")]
    NoSources { dir: PathBuf },
    #[error("need at least 2 sources to form pairs, found {found}")]
    TooFewSources { found: usize },
    #[error("duplicate source id {id}")]
    DuplicateSource { id: u32 },
    #[error(
        "acceptance rate below 1% ({accepts} of {draws} draws): transform \
         ranges make the requested overlap improbable"
    )]
    InfeasibleConfig { draws: u64, accepts: u64 },
    #[error("angle_set must not be empty")]
    EmptyAngleSet,
    #[error("min_overlap must be at least 1")]
    ZeroMinOverlap,
}

/// A single extracted (or synthesized) chromosome on its own raster.
///
/// Invariants enforced by [`ChromoImage::from_parts`]: gray values lie in
/// `[0,1]` and are zero wherever the mask is zero, and the mask is exactly
/// one 4-connected component.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromoImage {
    pub gray: GrayImage,
    pub mask: Mask,
    pub id: u32,
}

impl ChromoImage {
    /// Validates the invariants, forcing background gray to zero and
    /// clamping intensities into `[0,1]`.
    pub fn from_parts(mut gray: GrayImage, mask: Mask, id: u32) -> Result<Self, DatagenError> {
        if gray.h != mask.h || gray.w != mask.w {
            return Err(DatagenError::DimMismatch {
                what: "chromo image",
                gh: gray.h,
                gw: gray.w,
                mh: mask.h,
                mw: mask.w,
            });
        }
        let (components, _) = connected_components4(&mask);
        if components == 0 {
            return Err(DatagenError::EmptyMask { id });
        }
        if components > 1 {
            return Err(DatagenError::FragmentedMask { id, components });
        }
        for (g, &m) in gray.data.iter_mut().zip(&mask.data) {
            *g = if m == 0 { 0.0 } else { g.clamp(0.0, 1.0) };
        }
        Ok(Self { gray, mask, id })
    }
}

/// Where the single-chromosome sources come from.
#[derive(Debug, Clone)]
pub enum GenSource {
    /// Procedural phantoms: how many distinct sources to synthesize.
    Phantoms { count: usize, params: PhantomParams },
    /// Directory of `<id>_gray.pgm` / `<id>_mask.pgm` pairs. When
    /// `downscale` is set each source is block-averaged 2x before use.
    Files { dir: PathBuf, downscale: bool },
}

/// Dataset-generation parameters.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub n_samples: usize,
    pub canvas_h: usize,
    pub canvas_w: usize,
    /// Rotation angles are drawn uniformly from this set, in degrees.
    pub angle_set: Vec<f64>,
    /// Cap on |dx| and |dy| of the second chromosome's translation.
    pub max_translation: i32,
    /// Minimum number of label-3 pixels for a sample to be kept.
    pub min_overlap: usize,
    pub seed: u64,
    pub source: GenSource,
}

impl GenConfig {
    /// Defaults mirroring the source imagery: a 94x93 canvas, angles in
    /// multiples of 15 degrees, and at least one overlap pixel.
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            canvas_h: 94,
            canvas_w: 93,
            angle_set: (0..24).map(|k| k as f64 * 15.0).collect(),
            max_translation: 20,
            min_overlap: 1,
            seed,
            source: GenSource::Phantoms { count: 12, params: PhantomParams::default() },
        }
    }

    pub(crate) fn validate(&self) -> Result<(), DatagenError> {
        if self.angle_set.is_empty() {
            return Err(DatagenError::EmptyAngleSet);
        }
        if self.min_overlap == 0 {
            return Err(DatagenError::ZeroMinOverlap);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_parts_zeroes_background_and_clamps() {
        let gray = GrayImage::from_vec(1, 3, vec![0.5, 2.0, 0.7]).unwrap();
        let mask = Mask::from_vec(1, 3, vec![1, 1, 0]).unwrap();
        let c = ChromoImage::from_parts(gray, mask, 0).unwrap();
        assert_eq!(c.gray.data, vec![0.5, 1.0, 0.0]);
    }

    #[test]
    fn from_parts_rejects_empty_mask() {
        let gray = GrayImage::zeros(2, 2);
        let mask = Mask::zeros(2, 2);
        assert!(matches!(
            ChromoImage::from_parts(gray, mask, 3),
            Err(DatagenError::EmptyMask { id: 3 })
        ));
    }

    #[test]
    fn from_parts_rejects_fragmented_mask() {
        let gray = GrayImage::zeros(1, 3);
        let mask = Mask::from_vec(1, 3, vec![1, 0, 1]).unwrap();
        assert!(matches!(
            ChromoImage::from_parts(gray, mask, 0),
            Err(DatagenError::FragmentedMask { components: 2, .. })
        ));
    }

    #[test]
    fn default_config_is_valid() {
        assert!(GenConfig::new(10, 0).validate().is_ok());
        assert_eq!(GenConfig::new(10, 0).angle_set.len(), 24);
    }
}
