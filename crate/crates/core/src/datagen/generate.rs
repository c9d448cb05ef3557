//! Pair composition and the dataset generation loop.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::phantom::build_phantom_set;
use super::transform::place;
use super::{ChromoImage, DatagenError, GenConfig, GenSource};
use crate::dataset::{Dataset, Sample, SampleMeta};
use crate::image::{GrayImage, LabelMap, Mask};
use crate::rng::{mix_seed, seeded_rng, splitmix64};

/// Attempt budget for a single sample index before the configuration is
/// declared infeasible; also the window length of the acceptance-rate
/// guard.
const MAX_ATTEMPTS: u64 = 10_000;

/// Composition produced fewer overlap pixels than requested; the caller
/// draws a fresh transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("only {found} overlap pixels, needed {needed}")]
pub struct ComposeReject {
    pub found: usize,
    pub needed: usize,
}

/// Number of distinct unordered pairs of `n` chromosomes, C(n,2).
pub fn pair_census(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Averages two placed chromosomes into one sample.
///
/// The image is the unconditional pixelwise mean of the two grayscale
/// images (background zeros included, so single-chromosome regions sit at
/// half intensity). The label is `1*mask_a + 2*mask_b`, which encodes the
/// overlap as 3. Both inputs must share dims; `a` is the chromosome that
/// becomes label 1, by convention the one with the lower source id.
pub fn compose_pair(
    a: &ChromoImage,
    b: &ChromoImage,
    min_overlap: usize,
) -> Result<Sample, ComposeReject> {
    assert_eq!(
        (a.gray.h, a.gray.w),
        (b.gray.h, b.gray.w),
        "compose_pair requires a shared canvas"
    );
    let mut image = GrayImage::zeros(a.gray.h, a.gray.w);
    let mut label = LabelMap::zeros(a.gray.h, a.gray.w);
    let mut overlap = 0usize;
    for i in 0..image.data.len() {
        image.data[i] = (a.gray.data[i] + b.gray.data[i]) / 2.0;
        let l = a.mask.data[i] + 2 * b.mask.data[i];
        label.data[i] = l;
        if l == 3 {
            overlap += 1;
        }
    }
    if overlap < min_overlap {
        return Err(ComposeReject { found: overlap, needed: min_overlap });
    }
    Ok(Sample { image, label, meta: None })
}

/// Exact integer translation of a placed chromosome. Pixels shifted off
/// the raster are lost, which the caller prevents by sampling offsets
/// from the bounding-box slack.
fn shift_chromo(c: &ChromoImage, dx: i32, dy: i32) -> ChromoImage {
    let (h, w) = (c.gray.h, c.gray.w);
    let mut gray = GrayImage::zeros(h, w);
    let mut mask = Mask::zeros(h, w);
    for y in 0..h {
        let sy = y as i64 - dy as i64;
        if sy < 0 || sy >= h as i64 {
            continue;
        }
        for x in 0..w {
            let sx = x as i64 - dx as i64;
            if sx < 0 || sx >= w as i64 {
                continue;
            }
            gray.set(y, x, c.gray.get(sy as usize, sx as usize));
            if c.mask.get(sy as usize, sx as usize) != 0 {
                mask.set(y, x, 1);
            }
        }
    }
    ChromoImage { gray, mask, id: c.id }
}

/// One accepted sample for `index`, plus the number of draws it took.
///
/// Every attempt runs from its own seed, `mix(mix(seed, index), attempt)`,
/// so the result depends only on the config — not on sibling indices or
/// execution order.
fn generate_one(
    config: &GenConfig,
    sources: &[ChromoImage],
    pairs: &[(usize, usize)],
    index: usize,
) -> Result<(Sample, u64), DatagenError> {
    let (ia, ib) = pairs[index % pairs.len()];
    let index_seed = mix_seed(config.seed, index as u64);
    for attempt in 0..MAX_ATTEMPTS {
        let attempt_seed = mix_seed(index_seed, attempt);
        let mut rng = seeded_rng(attempt_seed);
        let angle_a = config.angle_set[rng.gen_range(0..config.angle_set.len())];
        let angle_b = config.angle_set[rng.gen_range(0..config.angle_set.len())];
        let Ok(placed_a) = place(&sources[ia], angle_a, (0, 0), config.canvas_h, config.canvas_w)
        else {
            continue;
        };
        let Ok(placed_b) = place(&sources[ib], angle_b, (0, 0), config.canvas_h, config.canvas_w)
        else {
            continue;
        };
        // Translate the second chromosome, keeping its bounding box on
        // the canvas and within the configured cap.
        let (y0, x0, y1, x1) = placed_b.mask.bbox().expect("placed mask is nonempty");
        let dy_lo = (-(y0 as i32)).max(-config.max_translation);
        let dy_hi = (config.canvas_h as i32 - 1 - y1 as i32).min(config.max_translation);
        let dx_lo = (-(x0 as i32)).max(-config.max_translation);
        let dx_hi = (config.canvas_w as i32 - 1 - x1 as i32).min(config.max_translation);
        let dx = rng.gen_range(dx_lo..=dx_hi);
        let dy = rng.gen_range(dy_lo..=dy_hi);
        let placed_b = shift_chromo(&placed_b, dx, dy);

        if let Ok(mut sample) = compose_pair(&placed_a, &placed_b, config.min_overlap) {
            sample.meta = Some(SampleMeta {
                pair: (sources[ia].id, sources[ib].id),
                angles: (angle_a, angle_b),
                offsets: ((0, 0), (dx, dy)),
                seed: attempt_seed,
            });
            return Ok((sample, attempt + 1));
        }
    }
    Err(DatagenError::InfeasibleConfig { draws: MAX_ATTEMPTS, accepts: 0 })
}

fn generate_impl(config: &GenConfig, parallel: bool) -> Result<Dataset, DatagenError> {
    config.validate()?;
    let sources = match &config.source {
        GenSource::Phantoms { count, params } => {
            let mut p = params.clone();
            p.canvas_h = config.canvas_h;
            p.canvas_w = config.canvas_w;
            // A separate seed stream from the per-sample seeds.
            build_phantom_set(*count, &p, splitmix64(config.seed))
        }
        GenSource::Files { dir, downscale } => {
            super::import::load_sources(dir, config.canvas_h, config.canvas_w, *downscale)?
        }
    };
    if sources.len() < 2 {
        return Err(DatagenError::TooFewSources { found: sources.len() });
    }
    let mut by_id = sources;
    by_id.sort_by_key(|c| c.id);
    for pair in by_id.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(DatagenError::DuplicateSource { id: pair[0].id });
        }
    }
    let mut pairs = Vec::new();
    for i in 0..by_id.len() {
        for j in i + 1..by_id.len() {
            pairs.push((i, j));
        }
    }
    debug_assert_eq!(pairs.len() as u64, pair_census(by_id.len()));

    let mut ds = Dataset::new(config.canvas_h, config.canvas_w);
    let mut window_draws = 0u64;
    let mut window_accepts = 0u64;
    // Chunked so the parallel path produces exactly the sequential output
    // (per-index purity) while the acceptance-rate guard still sees draw
    // counts in order.
    for chunk in (0..config.n_samples).collect::<Vec<_>>().chunks(64) {
        let results: Vec<Result<(Sample, u64), DatagenError>> = if parallel {
            chunk.par_iter().map(|&i| generate_one(config, &by_id, &pairs, i)).collect()
        } else {
            chunk.iter().map(|&i| generate_one(config, &by_id, &pairs, i)).collect()
        };
        for r in results {
            let (sample, draws) = r?;
            window_draws += draws;
            window_accepts += 1;
            ds.push(sample).expect("generated sample matches canvas dims");
        }
        if window_draws >= MAX_ATTEMPTS {
            if window_accepts * 100 < window_draws {
                return Err(DatagenError::InfeasibleConfig {
                    draws: window_draws,
                    accepts: window_accepts,
                });
            }
            window_draws = 0;
            window_accepts = 0;
        }
    }
    Ok(ds)
}

/// Generates the configured number of samples sequentially.
pub fn generate_dataset(config: &GenConfig) -> Result<Dataset, DatagenError> {
    generate_impl(config, false)
}

/// Parallel variant of [`generate_dataset`]; bit-identical output because
/// every sample is a pure function of `(config, index)`.
pub fn generate_dataset_parallel(config: &GenConfig) -> Result<Dataset, DatagenError> {
    generate_impl(config, true)
}
