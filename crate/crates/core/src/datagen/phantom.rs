//! Procedural single-chromosome phantoms.
//!
//! Each phantom is a curved band drawn along a random quadratic Bézier
//! spine at double resolution and then block-averaged down, which gives
//! soft anti-aliased edges similar to extracted fluorescence crops. The
//! band interior carries a per-source base intensity with low-frequency
//! banding noise; the two spine endpoints are brightened toward white to
//! mimic telomeric probe spots.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::transform::{downscale2x, downscale2x_mask};
use super::ChromoImage;
use crate::image::{GrayImage, Mask};
use crate::rng::{mix_seed, seeded_rng};

/// Ranges the phantom generator draws from. Lengths and widths are in
/// output pixels (the generator internally works at 2x resolution).
#[derive(Debug, Clone)]
pub struct PhantomParams {
    pub canvas_h: usize,
    pub canvas_w: usize,
    pub len_range: (f64, f64),
    pub half_width_range: (f64, f64),
    /// Lateral deflection of the Bézier control point, as a fraction of
    /// the spine length.
    pub curl_range: (f64, f64),
    pub body_intensity: (f64, f64),
    pub telomere_intensity: (f64, f64),
    /// Amplitude of the smooth banding noise added to the body.
    pub noise_amp: f64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            canvas_h: 94,
            canvas_w: 93,
            len_range: (26.0, 40.0),
            half_width_range: (2.8, 4.6),
            curl_range: (0.05, 0.30),
            body_intensity: (0.42, 0.68),
            telomere_intensity: (0.90, 1.0),
            noise_amp: 0.06,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.gen_range(range.0..range.1)
    } else {
        range.0
    }
}

/// Synthesizes one phantom chromosome centered on the canvas.
///
/// The construction guarantees a single 4-connected mask component: the
/// band is a union of disks of radius ≥ 2 output pixels stamped along a
/// densely sampled continuous curve, which survives the 2x block-majority
/// downscale as a connected region.
pub fn generate_phantom(rng: &mut ChaCha8Rng, params: &PhantomParams, id: u32) -> ChromoImage {
    let (h2, w2) = (params.canvas_h * 2, params.canvas_w * 2);
    let (cy, cx) = (h2 as f64 / 2.0, w2 as f64 / 2.0);

    // Spine: quadratic Bézier, endpoints symmetric about the center.
    let len2 = 2.0 * draw(rng, params.len_range);
    let hw2 = 2.0 * draw(rng, params.half_width_range);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let (uy, ux) = (phi.sin(), phi.cos());
    let (ny, nx) = (-ux, uy);
    let curl = draw(rng, params.curl_range) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let p0 = (cy - 0.5 * len2 * uy, cx - 0.5 * len2 * ux);
    let p2 = (cy + 0.5 * len2 * uy, cx + 0.5 * len2 * ux);
    let p1 = (cy + curl * len2 * ny, cx + curl * len2 * nx);

    let body = draw(rng, params.body_intensity);
    let telo = draw(rng, params.telomere_intensity);
    let (f1, f2) = (rng.gen_range(2.0..4.0), rng.gen_range(5.0..9.0));
    let (ph1, ph2) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));

    // Distance-to-spine field, built by stamping each curve sample into
    // its neighborhood. Also remembers the curve parameter of the nearest
    // sample for the banding texture.
    let mut dist2 = vec![f64::INFINITY; h2 * w2];
    let mut tnear = vec![0.0f64; h2 * w2];
    let n_samples = (4.0 * len2).ceil() as usize;
    let reach = hw2.ceil() as i64 + 1;
    for i in 0..=n_samples {
        let t = i as f64 / n_samples as f64;
        let s = 1.0 - t;
        let by = s * s * p0.0 + 2.0 * s * t * p1.0 + t * t * p2.0;
        let bx = s * s * p0.1 + 2.0 * s * t * p1.1 + t * t * p2.1;
        let (iy, ix) = (by.round() as i64, bx.round() as i64);
        for y in (iy - reach).max(0)..=(iy + reach).min(h2 as i64 - 1) {
            for x in (ix - reach).max(0)..=(ix + reach).min(w2 as i64 - 1) {
                let dy = y as f64 - by;
                let dx = x as f64 - bx;
                let d2 = dy * dy + dx * dx;
                let idx = y as usize * w2 + x as usize;
                if d2 < dist2[idx] {
                    dist2[idx] = d2;
                    tnear[idx] = t;
                }
            }
        }
    }

    let mut gray2 = GrayImage::zeros(h2, w2);
    let mut mask2 = Mask::zeros(h2, w2);
    let sigma = 0.9 * hw2;
    for y in 0..h2 {
        for x in 0..w2 {
            let idx = y * w2 + x;
            let d = dist2[idx].sqrt();
            if d > hw2 {
                continue;
            }
            mask2.data[idx] = 1;
            let t = tnear[idx];
            let band = params.noise_amp
                * ((std::f64::consts::TAU * (f1 * t + ph1)).sin()
                    + 0.5 * (std::f64::consts::TAU * (f2 * t + ph2)).sin());
            // Slightly domed cross-profile so the spine is brightest.
            let profile = 0.85 + 0.15 * (1.0 - (d / hw2).powi(2)).max(0.0).sqrt();
            let mut v = (body + band) * profile;
            // Telomere spots: brighten near both endpoints.
            for e in [p0, p2] {
                let de2 = (y as f64 - e.0).powi(2) + (x as f64 - e.1).powi(2);
                let spot = telo * (-de2 / (sigma * sigma)).exp();
                if spot > v {
                    v = spot;
                }
            }
            gray2.data[idx] = v.clamp(0.0, 1.0) as f32;
        }
    }

    let gray = downscale2x(&gray2);
    let mask = downscale2x_mask(&mask2);
    ChromoImage::from_parts(gray, mask, id)
        .expect("phantom band is a single component by construction")
}

/// Builds `count` phantoms with per-id seeds, so each source is a pure
/// function of `(seed, id)`.
///
/// Base intensity and band width ramp monotonically with the source id;
/// together with the convention that the lower id becomes label 1 this
/// keeps the two chromosomes of every composed pair visually
/// distinguishable, the way real extracted chromosomes differ in size
/// and stain uptake.
pub fn build_phantom_set(count: usize, params: &PhantomParams, seed: u64) -> Vec<ChromoImage> {
    let (b_lo, b_hi) = params.body_intensity;
    let (w_lo, w_hi) = params.half_width_range;
    (0..count)
        .map(|id| {
            let frac = if count > 1 { id as f64 / (count - 1) as f64 } else { 0.5 };
            let b = b_lo + frac * (b_hi - b_lo);
            let w = w_lo + frac * (w_hi - w_lo);
            let per_id = PhantomParams {
                body_intensity: ((b - 0.01).max(0.0), b + 0.01),
                half_width_range: ((w - 0.15).max(1.0), w + 0.15),
                ..params.clone()
            };
            let mut rng = seeded_rng(mix_seed(seed, id as u64));
            generate_phantom(&mut rng, &per_id, id as u32)
        })
        .collect()
}
