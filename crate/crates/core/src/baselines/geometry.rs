//! Contour-based crossing resolution.
//!
//! A crossing of two chromosomes shows up on the binarized silhouette as
//! four concave ("remarkable") contour vertices; the quadrilateral they
//! span is the predicted overlap region. Masks whose contour does not
//! expose exactly four such vertices are declared inapplicable and fall
//! back to plain thresholding.

use super::threshold::{threshold_predict, ThresholdModel};
use super::BaselineError;
use crate::image::{largest_component4, GrayImage, LabelMap, Mask};

/// Contour simplification tolerance in pixels.
pub const DEFAULT_APPROX_EPSILON: f64 = 2.0;
/// A vertex counts as reflex once its interior angle exceeds 180° plus
/// this margin, which filters out pixel-staircase noise.
pub const DEFAULT_REFLEX_MARGIN_DEG: f64 = 10.0;

/// Closed polygon; `vertices` are `(x, y)` pixel coordinates and the last
/// vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<(f64, f64)>,
}

impl Polygon {
    /// Twice the signed area (shoelace); positive for the counterclockwise
    /// orientation this module normalizes to.
    pub fn signed_area2(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        let mut s = 0.0;
        for i in 0..n {
            let (x0, y0) = v[i];
            let (x1, y1) = v[(i + 1) % n];
            s += x0 * y1 - x1 * y0;
        }
        s
    }

    /// Fewer than three vertices cannot bound a region.
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }
}

/// Moore-neighbor directions `(dx, dy)`, clockwise on screen starting west.
const CW: [(i32, i32); 8] =
    [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn dir_index(d: (i32, i32)) -> usize {
    CW.iter().position(|&c| c == d).expect("offset between ring neighbors")
}

/// Traces the outer boundary of the mask's foreground with Moore-neighbor
/// tracing and normalizes the result to counterclockwise orientation.
///
/// The mask must hold a single 4-connected component. An isolated pixel
/// yields a 1-vertex degenerate polygon for the caller to flag.
pub fn trace_contour(mask: &Mask) -> Result<Polygon, BaselineError> {
    let fg = |x: i32, y: i32| -> bool {
        x >= 0 && y >= 0 && (x as usize) < mask.w && (y as usize) < mask.h
            && mask.get(y as usize, x as usize) != 0
    };
    let mut start = None;
    'scan: for y in 0..mask.h {
        for x in 0..mask.w {
            if mask.get(y, x) != 0 {
                start = Some((x as i32, y as i32));
                break 'scan;
            }
        }
    }
    let Some(start) = start else {
        return Err(BaselineError::EmptyMask);
    };

    let mut vertices = vec![(f64::from(start.0), f64::from(start.1))];
    let mut p = start;
    let mut back = 0usize; // row-major scan enters from the west
    let cap = 4 * mask.h * mask.w + 8;
    let mut steps = 0usize;
    loop {
        let mut found = None;
        for k in 1..=8 {
            let idx = (back + k) % 8;
            let (dx, dy) = CW[idx];
            if fg(p.0 + dx, p.1 + dy) {
                found = Some(idx);
                break;
            }
        }
        let Some(idx) = found else {
            // isolated pixel: no foreground neighbor at all
            return Ok(Polygon { vertices });
        };
        let q = (p.0 + CW[idx].0, p.1 + CW[idx].1);
        let prev = (p.0 + CW[(idx + 7) % 8].0, p.1 + CW[(idx + 7) % 8].1);
        back = dir_index((prev.0 - q.0, prev.1 - q.1));
        p = q;
        if p == start && back == 0 {
            break; // re-entered the start pixel in the starting state
        }
        vertices.push((f64::from(p.0), f64::from(p.1)));
        steps += 1;
        if steps > cap {
            return Err(BaselineError::TraceFailed { steps });
        }
    }
    let mut poly = Polygon { vertices };
    if poly.signed_area2() < 0.0 {
        poly.vertices.reverse();
    }
    Ok(poly)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Distance from `p` to the closed segment `a`–`b`.
fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0);
    dist(p, (a.0 + t * vx, a.1 + t * vy))
}

/// Douglas–Peucker simplification of the vertex chain. Output vertices are
/// a subset of the input and every dropped vertex stays within `epsilon`
/// of the simplified chain. A non-positive `epsilon` keeps the input as is.
pub fn polygonal_approx(polygon: &Polygon, epsilon: f64) -> Polygon {
    let v = &polygon.vertices;
    if epsilon <= 0.0 || v.len() <= 2 {
        return polygon.clone();
    }
    let mut keep = vec![false; v.len()];
    keep[0] = true;
    keep[v.len() - 1] = true;
    let mut stack = vec![(0usize, v.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let mut worst = (0.0f64, lo);
        for i in lo + 1..hi {
            let d = segment_distance(v[i], v[lo], v[hi]);
            if d > worst.0 {
                worst = (d, i);
            }
        }
        if worst.0 > epsilon {
            keep[worst.1] = true;
            stack.push((lo, worst.1));
            stack.push((worst.1, hi));
        }
    }
    let vertices = v.iter().zip(&keep).filter(|(_, &k)| k).map(|(&p, _)| p).collect();
    Polygon { vertices }
}

/// Reflex vertices with their turn angle in degrees (negative = reflex,
/// more negative = sharper), in contour order.
fn reflex_vertices(polygon: &Polygon, margin_deg: f64) -> Vec<(usize, f64)> {
    let v = &polygon.vertices;
    let n = v.len();
    if n < 3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..n {
        let a = v[(i + n - 1) % n];
        let b = v[i];
        let c = v[(i + 1) % n];
        let u = (b.0 - a.0, b.1 - a.1);
        let w = (c.0 - b.0, c.1 - b.1);
        if (u.0 == 0.0 && u.1 == 0.0) || (w.0 == 0.0 && w.1 == 0.0) {
            continue; // repeated vertex: no measurable angle
        }
        let cross = u.0 * w.1 - u.1 * w.0;
        let dot = u.0 * w.0 + u.1 * w.1;
        let turn_deg = cross.atan2(dot).to_degrees();
        // interior angle = 180° − turn; reflex beyond the margin means
        // turn < −margin for a counterclockwise polygon
        if turn_deg < -margin_deg {
            out.push((i, turn_deg));
        }
    }
    out
}

/// Concave contour vertices — interior angle above 180° plus
/// [`DEFAULT_REFLEX_MARGIN_DEG`] — in contour order.
pub fn find_remarkable_points(polygon: &Polygon) -> Vec<(f64, f64)> {
    reflex_vertices(polygon, DEFAULT_REFLEX_MARGIN_DEG)
        .into_iter()
        .map(|(i, _)| polygon.vertices[i])
        .collect()
}

/// Point-in-polygon by the even-odd (ray crossing) rule.
fn even_odd_inside(px: f64, py: f64, pts: &[(f64, f64)]) -> bool {
    let n = pts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = pts[i];
        let (xj, yj) = pts[j];
        if (yi > py) != (yj > py) {
            let x_int = xi + (py - yi) * (xj - xi) / (yj - yi);
            if px < x_int {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Pixels of `mask` that fall inside the quadrilateral spanned by the four
/// crossing points (even-odd fill) — the predicted overlap region.
/// Degenerate (collinear) points enclose no pixel and yield an empty mask.
pub fn crossing_domain(four_points: &[(f64, f64); 4], mask: &Mask) -> Mask {
    let mut out = Mask::zeros(mask.h, mask.w);
    let xs: Vec<f64> = four_points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = four_points.iter().map(|p| p.1).collect();
    let x0 = xs.iter().cloned().fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let y0 = ys.iter().cloned().fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let x1 = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
    let y1 = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
    if x1 < 0.0 || y1 < 0.0 {
        return out;
    }
    let x1 = (x1 as usize).min(mask.w.saturating_sub(1));
    let y1 = (y1 as usize).min(mask.h.saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            if mask.get(y, x) != 0 && even_odd_inside(x as f64, y as f64, four_points) {
                out.set(y, x, 1);
            }
        }
    }
    out
}

/// The three ways to join four chromosome arms into two pairs.
pub fn enumerate_pairings<T: Copy>(arm_ids: [T; 4]) -> [[(T, T); 2]; 3] {
    let [a, b, c, d] = arm_ids;
    [[(a, b), (c, d)], [(a, c), (b, d)], [(a, d), (b, c)]]
}

/// Result of the geometric resolver on one image. When the contour method
/// was inapplicable the prediction is the threshold fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricOutcome {
    pub prediction: LabelMap,
    pub applicable: bool,
}

/// Contour pipeline: binarize above `t_low`, trace the silhouette,
/// simplify, find the four crossing points and fill their quadrilateral as
/// overlap. Silhouettes without exactly four usable reflex vertices (after
/// narrowing to the four sharpest) fall back to thresholding.
pub fn geometric_resolve(
    image: &GrayImage,
    model: &ThresholdModel,
    epsilon: f64,
) -> GeometricOutcome {
    let fallback = |image: &GrayImage| GeometricOutcome {
        prediction: threshold_predict(model, image),
        applicable: false,
    };
    let mut silhouette = Mask::zeros(image.h, image.w);
    for y in 0..image.h {
        for x in 0..image.w {
            if image.get(y, x) > model.t_low {
                silhouette.set(y, x, 1);
            }
        }
    }
    // tracing expects one 4-connected component; stray specks (normally
    // removed during preprocessing) are dropped here defensively
    let silhouette = largest_component4(&silhouette);
    if silhouette.count() == 0 {
        return fallback(image);
    }
    let Ok(contour) = trace_contour(&silhouette) else {
        return fallback(image);
    };
    if contour.is_degenerate() {
        return fallback(image);
    }
    let approx = polygonal_approx(&contour, epsilon);
    let mut reflex = reflex_vertices(&approx, DEFAULT_REFLEX_MARGIN_DEG);
    if reflex.len() < 4 {
        return fallback(image);
    }
    if reflex.len() > 4 {
        // keep the four sharpest, then restore contour order
        reflex.sort_by(|a, b| a.1.total_cmp(&b.1));
        reflex.truncate(4);
        reflex.sort_by_key(|&(i, _)| i);
    }
    let four = [
        approx.vertices[reflex[0].0],
        approx.vertices[reflex[1].0],
        approx.vertices[reflex[2].0],
        approx.vertices[reflex[3].0],
    ];
    let domain = crossing_domain(&four, &silhouette);
    if domain.count() == 0 {
        return fallback(image);
    }
    let mut data = vec![0u8; image.h * image.w];
    for ((d, &dom), &sil) in data.iter_mut().zip(&domain.data).zip(&silhouette.data) {
        if dom != 0 {
            *d = 3;
        } else if sil != 0 {
            *d = 1;
        }
    }
    GeometricOutcome {
        prediction: LabelMap::from_vec(image.h, image.w, data).expect("same dims"),
        applicable: true,
    }
}
