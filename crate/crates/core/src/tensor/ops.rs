//! Forward and backward kernels.
//!
//! Convolutions are direct (no im2col, FFT or Winograd): planes are
//! copied into zero-bordered scratch buffers so each kernel tap sweeps
//! the whole plane as a single contiguous AXPY or dot product, which the
//! compiler turns into packed fused multiply-adds. Border reads are
//! explicit zeros and border writes are discarded on copy-out, matching
//! 'same' padding semantics exactly.

use super::{ConvKernel, Dims4, Scalar, Tensor4, TensorError};

/// Gradients of a convolution's parameters, laid out like the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T: Scalar> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Argmax bookkeeping from a pooling forward pass.
#[derive(Debug, Clone)]
pub struct PoolIndices {
    pub input_dims: Dims4,
    /// Flat index into the pooled input, one entry per output element.
    pub argmax: Vec<usize>,
}

/// Copies an `h x w` plane into the interior of a zero-bordered
/// `(h + 2*py) x (w + 2*px)` scratch plane. The caller guarantees the
/// border slots of `dst` are already zero; only interior rows are
/// rewritten, so borders stay zero across reuses.
#[inline]
fn pad_plane<T: Scalar>(src: &[T], h: usize, w: usize, py: usize, px: usize, dst: &mut [T]) {
    let wp = w + 2 * px;
    for y in 0..h {
        dst[(y + py) * wp + px..][..w].copy_from_slice(&src[y * w..][..w]);
    }
}

/// Copies the interior of a padded plane back out to an `h x w` plane.
#[inline]
fn unpad_plane<T: Scalar>(src: &[T], h: usize, w: usize, py: usize, px: usize, dst: &mut [T]) {
    let wp = w + 2 * px;
    for y in 0..h {
        dst[y * w..][..w].copy_from_slice(&src[(y + py) * wp + px..][..w]);
    }
}

/// Lanes per accumulator block in the reductions below. Eight f32 lanes
/// fill one 256-bit register; independent partial sums break the serial
/// dependency chain of a single accumulator and let the compiler emit
/// packed fused multiply-adds.
///
/// The row kernels are `#[inline(never)]`: inlined into the surrounding
/// loop nests the vectorizer compiles them noticeably worse, and the
/// call cost is trivial against thousands of elements per call.
const LANES: usize = 8;

/// `out[i] += w * inp[i]` (fused), one fused multiply-add per element.
#[inline(never)]
fn axpy_row<T: Scalar>(out: &mut [T], inp: &[T], w: T) {
    for (o, &i) in out.iter_mut().zip(inp) {
        *o = w.mul_add(i, *o);
    }
}

/// Three shifted AXPYs fused into one pass:
/// `out[i] += w[0]*a[i]; out[i] += w[1]*b[i]; out[i] += w[2]*c[i]`,
/// applied in that order per element, all adds fused.
#[inline(never)]
fn axpy3_row<T: Scalar>(out: &mut [T], a: &[T], b: &[T], c: &[T], w: [T; 3]) {
    for (((o, &x), &y), &z) in out.iter_mut().zip(a).zip(b).zip(c) {
        let t = w[0].mul_add(x, *o);
        let t = w[1].mul_add(y, t);
        *o = w[2].mul_add(z, t);
    }
}

/// `sum(a[i] * b[i])` via `LANES` independent partial sums plus a scalar
/// tail, folded left to right at the end. The grouping depends only on
/// the slice lengths, so the result is deterministic. Products here are
/// deliberately unfused: the lane pattern only turns into packed
/// instructions in that form.
#[inline(never)]
fn dot_row<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); LANES];
    let mut tail = T::zero();
    let mut ac = a.chunks_exact(LANES);
    let mut bc = b.chunks_exact(LANES);
    for (a8, b8) in ac.by_ref().zip(bc.by_ref()) {
        for k in 0..LANES {
            acc[k] += a8[k] * b8[k];
        }
    }
    for (&x, &y) in ac.remainder().iter().zip(bc.remainder()) {
        tail += x * y;
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// Three dot products against a shared left stream in one pass:
/// `[sum(a*b0), sum(a*b1), sum(a*b2)]`, each reduced as in [`dot_row`].
#[inline(never)]
fn dot3_rows<T: Scalar>(a: &[T], b0: &[T], b1: &[T], b2: &[T]) -> [T; 3] {
    let mut acc0 = [T::zero(); LANES];
    let mut acc1 = [T::zero(); LANES];
    let mut acc2 = [T::zero(); LANES];
    let mut tails = [T::zero(); 3];
    let mut ac = a.chunks_exact(LANES);
    let mut c0 = b0.chunks_exact(LANES);
    let mut c1 = b1.chunks_exact(LANES);
    let mut c2 = b2.chunks_exact(LANES);
    for (((a8, x0), x1), x2) in ac.by_ref().zip(c0.by_ref()).zip(c1.by_ref()).zip(c2.by_ref()) {
        for k in 0..LANES {
            acc0[k] += a8[k] * x0[k];
            acc1[k] += a8[k] * x1[k];
            acc2[k] += a8[k] * x2[k];
        }
    }
    for (((&x, &y0), &y1), &y2) in
        ac.remainder().iter().zip(c0.remainder()).zip(c1.remainder()).zip(c2.remainder())
    {
        tails[0] += x * y0;
        tails[1] += x * y1;
        tails[2] += x * y2;
    }
    [
        acc0.iter().fold(tails[0], |s, &v| s + v),
        acc1.iter().fold(tails[1], |s, &v| s + v),
        acc2.iter().fold(tails[2], |s, &v| s + v),
    ]
}

fn check_kernel<T: Scalar>(
    op: &'static str,
    input: &Tensor4<T>,
    kernel: &ConvKernel<T>,
) -> Result<(), TensorError> {
    if kernel.kh.is_multiple_of(2) || kernel.kw.is_multiple_of(2) {
        return Err(TensorError::EvenKernel { op, kh: kernel.kh, kw: kernel.kw });
    }
    if input.dims().c != kernel.in_c {
        return Err(TensorError::ChannelMismatch { op, input: input.dims().c, kernel: kernel.in_c });
    }
    Ok(())
}

/// 'Same'-padded stride-1 convolution. Output spatial size equals the
/// input's; taps outside the input read zero.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor4<T>,
    kernel: &ConvKernel<T>,
) -> Result<Tensor4<T>, TensorError> {
    check_kernel("conv2d_forward", input, kernel)?;
    if !input.all_finite() {
        return Err(TensorError::NonFinite { op: "conv2d_forward" });
    }
    let d = input.dims();
    let (py, px) = (kernel.kh / 2, kernel.kw / 2);
    let wp = d.w + 2 * px;
    let plane_p = (d.h + 2 * py) * wp;
    // Flat window covering output rows 0..h at a fixed tap shift; the
    // (2*px) slack columns between rows receive junk that the interior
    // copy-out discards, and read only explicit border zeros.
    let flat = (d.h - 1) * wp + d.w;
    let mut out = Tensor4::zeros(Dims4::new(d.n, kernel.out_c, d.h, d.w));
    let mut inpad = vec![T::zero(); d.c * plane_p];
    let mut outpad = vec![T::zero(); plane_p];
    for n in 0..d.n {
        for ic in 0..d.c {
            pad_plane(input.plane(n, ic), d.h, d.w, py, px, &mut inpad[ic * plane_p..][..plane_p]);
        }
        for oc in 0..kernel.out_c {
            outpad.fill(kernel.bias[oc]);
            for ic in 0..d.c {
                let ip = &inpad[ic * plane_p..][..plane_p];
                for ky in 0..kernel.kh {
                    let off = ky * wp;
                    let op = &mut outpad[py * wp + px..][..flat];
                    if kernel.kw == 3 {
                        // One pass per kernel row, the three column taps
                        // fused in order.
                        let w = [
                            kernel.weight(oc, ic, ky, 0),
                            kernel.weight(oc, ic, ky, 1),
                            kernel.weight(oc, ic, ky, 2),
                        ];
                        axpy3_row(
                            op,
                            &ip[off..off + flat],
                            &ip[off + 1..off + 1 + flat],
                            &ip[off + 2..off + 2 + flat],
                            w,
                        );
                    } else {
                        for kx in 0..kernel.kw {
                            let wv = kernel.weight(oc, ic, ky, kx);
                            axpy_row(op, &ip[off + kx..off + kx + flat], wv);
                        }
                    }
                }
            }
            unpad_plane(&outpad, d.h, d.w, py, px, out.plane_mut(n, oc));
        }
    }
    Ok(out)
}

/// Gradients of a scalar loss through [`conv2d_forward`], given the
/// upstream gradient w.r.t. the convolution output.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor4<T>,
    kernel: &ConvKernel<T>,
    upstream: &Tensor4<T>,
) -> Result<(Tensor4<T>, ConvGrads<T>), TensorError> {
    check_kernel("conv2d_backward", input, kernel)?;
    let d = input.dims();
    let expected = Dims4::new(d.n, kernel.out_c, d.h, d.w);
    if upstream.dims() != expected {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_backward",
            expected,
            found: upstream.dims(),
        });
    }
    let (py, px) = (kernel.kh / 2, kernel.kw / 2);
    let wp = d.w + 2 * px;
    let plane_p = (d.h + 2 * py) * wp;
    let flat = (d.h - 1) * wp + d.w;
    let mut grad_input = Tensor4::zeros(d);
    let mut grads = ConvGrads {
        weights: vec![T::zero(); kernel.weights.len()],
        bias: vec![T::zero(); kernel.out_c],
    };

    // Padded copies: upstream border zeros contribute nothing to either
    // product, and input-gradient writes landing in the border (taps
    // shifted past the edge) are dropped by the interior copy-out.
    let mut inpad = vec![T::zero(); d.c * plane_p];
    let mut uppad = vec![T::zero(); kernel.out_c * plane_p];
    let mut gipad = vec![T::zero(); plane_p];
    for n in 0..d.n {
        for ic in 0..d.c {
            pad_plane(input.plane(n, ic), d.h, d.w, py, px, &mut inpad[ic * plane_p..][..plane_p]);
        }
        for oc in 0..kernel.out_c {
            let up_plane = upstream.plane(n, oc);
            grads.bias[oc] += up_plane.iter().copied().sum();
            pad_plane(up_plane, d.h, d.w, py, px, &mut uppad[oc * plane_p..][..plane_p]);
        }
        let base = py * wp + px;
        for ic in 0..d.c {
            gipad.fill(T::zero());
            let ip = &inpad[ic * plane_p..][..plane_p];
            for oc in 0..kernel.out_c {
                let up = &uppad[oc * plane_p..][..plane_p];
                let urow = &up[base..][..flat];
                for ky in 0..kernel.kh {
                    let widx0 = ((oc * kernel.in_c + ic) * kernel.kh + ky) * kernel.kw;
                    let off = ky * wp;
                    if kernel.kw == 3 {
                        // dL/dw: three column taps share the upstream
                        // stream, reduced in one pass.
                        let r = dot3_rows(
                            urow,
                            &ip[off..off + flat],
                            &ip[off + 1..off + 1 + flat],
                            &ip[off + 2..off + 2 + flat],
                        );
                        for (k, v) in r.into_iter().enumerate() {
                            grads.weights[widx0 + k] += v;
                        }
                        // dL/dinput in gather form: element q reads the
                        // upstream at q + (py-ky, px-kx), which is zero
                        // whenever the forward tap fell outside.
                        let s = (base + py * wp) - ky * wp;
                        axpy3_row(
                            &mut gipad[base..][..flat],
                            &up[s + 1..s + 1 + flat],
                            &up[s..s + flat],
                            &up[s - 1..s - 1 + flat],
                            [
                                kernel.weights[widx0],
                                kernel.weights[widx0 + 1],
                                kernel.weights[widx0 + 2],
                            ],
                        );
                    } else {
                        for kx in 0..kernel.kw {
                            // dL/dw = sum(up * shifted input)
                            grads.weights[widx0 + kx] += dot_row(urow, &ip[off + kx..][..flat]);
                            // dL/dinput accumulates at the shifted position
                            axpy_row(
                                &mut gipad[off + kx..][..flat],
                                urow,
                                kernel.weights[widx0 + kx],
                            );
                        }
                    }
                }
            }
            unpad_plane(&gipad, d.h, d.w, py, px, grad_input.plane_mut(n, ic));
        }
    }
    Ok((grad_input, grads))
}

/// 2x2 max pooling with stride 2. Ties resolve to the first element of
/// the window in row-major order.
pub fn maxpool2x2_forward<T: Scalar>(
    input: &Tensor4<T>,
) -> Result<(Tensor4<T>, PoolIndices), TensorError> {
    let d = input.dims();
    if !d.h.is_multiple_of(2) || !d.w.is_multiple_of(2) {
        return Err(TensorError::OddSpatial { op: "maxpool2x2_forward", h: d.h, w: d.w });
    }
    let (oh, ow) = (d.h / 2, d.w / 2);
    let mut out = Tensor4::zeros(Dims4::new(d.n, d.c, oh, ow));
    let mut argmax = vec![0usize; out.dims().len()];
    let mut oi = 0usize;
    for n in 0..d.n {
        for c in 0..d.c {
            let plane_base = (n * d.c + c) * d.h * d.w;
            let in_plane = input.plane(n, c);
            let out_plane = out.plane_mut(n, c);
            for oy in 0..oh {
                let y0 = 2 * oy;
                for ox in 0..ow {
                    let x0 = 2 * ox;
                    // Row-major window order; strict > keeps the first max.
                    let mut best_idx = y0 * d.w + x0;
                    let mut best = in_plane[best_idx];
                    for (yy, xx) in [(y0, x0 + 1), (y0 + 1, x0), (y0 + 1, x0 + 1)] {
                        let idx = yy * d.w + xx;
                        if in_plane[idx] > best {
                            best = in_plane[idx];
                            best_idx = idx;
                        }
                    }
                    out_plane[oy * ow + ox] = best;
                    argmax[oi] = plane_base + best_idx;
                    oi += 1;
                }
            }
        }
    }
    Ok((out, PoolIndices { input_dims: d, argmax }))
}

/// Routes each upstream value to its recorded argmax position.
pub fn maxpool2x2_backward<T: Scalar>(
    upstream: &Tensor4<T>,
    indices: &PoolIndices,
) -> Result<Tensor4<T>, TensorError> {
    let d = indices.input_dims;
    let expected = Dims4::new(d.n, d.c, d.h / 2, d.w / 2);
    if upstream.dims() != expected {
        return Err(TensorError::ShapeMismatch {
            op: "maxpool2x2_backward",
            expected,
            found: upstream.dims(),
        });
    }
    if indices.argmax.len() != upstream.dims().len() {
        return Err(TensorError::BadLength { len: indices.argmax.len(), dims: upstream.dims() });
    }
    let mut grad = Tensor4::zeros(d);
    let gdata = grad.data_mut();
    for (&idx, &u) in indices.argmax.iter().zip(upstream.data()) {
        if idx >= gdata.len() {
            return Err(TensorError::IndexOutOfRange { index: idx, len: gdata.len() });
        }
        gdata[idx] += u;
    }
    Ok(grad)
}

/// Nearest-neighbor 2x upsampling: each pixel becomes a 2x2 block.
pub fn upsample2x_nearest<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    let d = input.dims();
    let mut out = Tensor4::zeros(Dims4::new(d.n, d.c, d.h * 2, d.w * 2));
    let ow = d.w * 2;
    for n in 0..d.n {
        for c in 0..d.c {
            let in_plane = input.plane(n, c);
            let out_plane = out.plane_mut(n, c);
            for y in 0..d.h {
                let irow = &in_plane[y * d.w..(y + 1) * d.w];
                let orow = &mut out_plane[2 * y * ow..(2 * y + 1) * ow];
                for (x, &v) in irow.iter().enumerate() {
                    orow[2 * x] = v;
                    orow[2 * x + 1] = v;
                }
                // Second row of the block is a copy of the first.
                let (first, second) = out_plane[2 * y * ow..(2 * y + 2) * ow].split_at_mut(ow);
                second.copy_from_slice(first);
            }
        }
    }
    out
}

/// Backward of [`upsample2x_nearest`]: sums each 2x2 block.
pub fn upsample2x_backward<T: Scalar>(upstream: &Tensor4<T>) -> Result<Tensor4<T>, TensorError> {
    let d = upstream.dims();
    if !d.h.is_multiple_of(2) || !d.w.is_multiple_of(2) {
        return Err(TensorError::OddSpatial { op: "upsample2x_backward", h: d.h, w: d.w });
    }
    let (oh, ow) = (d.h / 2, d.w / 2);
    let mut out = Tensor4::zeros(Dims4::new(d.n, d.c, oh, ow));
    for n in 0..d.n {
        for c in 0..d.c {
            let up_plane = upstream.plane(n, c);
            let out_plane = out.plane_mut(n, c);
            for oy in 0..oh {
                let r0 = &up_plane[2 * oy * d.w..(2 * oy + 1) * d.w];
                let r1 = &up_plane[(2 * oy + 1) * d.w..(2 * oy + 2) * d.w];
                for ox in 0..ow {
                    out_plane[oy * ow + ox] =
                        r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1];
                }
            }
        }
    }
    Ok(out)
}

/// Elementwise `max(v, 0)`.
pub fn relu_forward<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    let data = input.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
    Tensor4::from_vec(input.dims(), data).expect("same dims")
}

/// Passes upstream gradient where the forward input was strictly
/// positive; the derivative at exactly 0 is taken as 0.
pub fn relu_backward<T: Scalar>(
    input: &Tensor4<T>,
    upstream: &Tensor4<T>,
) -> Result<Tensor4<T>, TensorError> {
    if input.dims() != upstream.dims() {
        return Err(TensorError::ShapeMismatch {
            op: "relu_backward",
            expected: input.dims(),
            found: upstream.dims(),
        });
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&v, &u)| if v > T::zero() { u } else { T::zero() })
        .collect();
    Ok(Tensor4::from_vec(input.dims(), data).expect("same dims"))
}

/// Stacks `b`'s channels after `a`'s. Batch and spatial dims must match.
pub fn concat_channels<T: Scalar>(
    a: &Tensor4<T>,
    b: &Tensor4<T>,
) -> Result<Tensor4<T>, TensorError> {
    let (da, db) = (a.dims(), b.dims());
    if da.n != db.n || da.h != db.h || da.w != db.w {
        return Err(TensorError::ShapeMismatch { op: "concat_channels", expected: da, found: db });
    }
    let mut out = Tensor4::zeros(Dims4::new(da.n, da.c + db.c, da.h, da.w));
    let hw = da.h * da.w;
    for n in 0..da.n {
        for c in 0..da.c {
            out.plane_mut(n, c).copy_from_slice(a.plane(n, c));
        }
        for c in 0..db.c {
            out.plane_mut(n, da.c + c).copy_from_slice(b.plane(n, c));
        }
    }
    debug_assert_eq!(out.dims().len(), (da.c + db.c) * da.n * hw);
    Ok(out)
}

/// Inverse of [`concat_channels`]: splits off the first `c_first`
/// channels. This is also the concat backward pass applied to an
/// upstream gradient.
pub fn split_channels<T: Scalar>(
    t: &Tensor4<T>,
    c_first: usize,
) -> Result<(Tensor4<T>, Tensor4<T>), TensorError> {
    let d = t.dims();
    if c_first > d.c {
        return Err(TensorError::ShapeMismatch {
            op: "split_channels",
            expected: Dims4::new(d.n, c_first, d.h, d.w),
            found: d,
        });
    }
    let mut a = Tensor4::zeros(Dims4::new(d.n, c_first, d.h, d.w));
    let mut b = Tensor4::zeros(Dims4::new(d.n, d.c - c_first, d.h, d.w));
    for n in 0..d.n {
        for c in 0..c_first {
            a.plane_mut(n, c).copy_from_slice(t.plane(n, c));
        }
        for c in 0..d.c - c_first {
            b.plane_mut(n, c).copy_from_slice(t.plane(n, c_first + c));
        }
    }
    Ok((a, b))
}

/// Per-pixel softmax across the channel axis.
pub fn softmax_channels<T: Scalar>(logits: &Tensor4<T>) -> Tensor4<T> {
    let d = logits.dims();
    let hw = d.h * d.w;
    let mut out = Tensor4::zeros(d);
    let mut probs = vec![T::zero(); d.c];
    for n in 0..d.n {
        let base = n * d.c * hw;
        for pix in 0..hw {
            pixel_softmax(logits.data(), base + pix, hw, &mut probs);
            for (k, &p) in probs.iter().enumerate() {
                out.data_mut()[base + k * hw + pix] = p;
            }
        }
    }
    out
}

/// Numerically stable softmax over one pixel's channel values.
/// `start` is the flat index of channel 0; channels are `stride` apart.
#[inline]
fn pixel_softmax<T: Scalar>(data: &[T], start: usize, stride: usize, out: &mut [T]) {
    let mut m = data[start];
    for k in 1..out.len() {
        let z = data[start + k * stride];
        if z > m {
            m = z;
        }
    }
    let mut sum = T::zero();
    for (k, o) in out.iter_mut().enumerate() {
        let e = (data[start + k * stride] - m).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Mean softmax cross-entropy over all pixels of the batch, with optional
/// per-class weights, and its exact gradient w.r.t. the logits.
///
/// `labels` is one class id per pixel, laid out `(n, h, w)` row-major.
/// The loss is `mean_p[-w[y_p] * ln softmax(logits_p)[y_p]]`.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor4<T>,
    labels: &[u8],
    class_weights: Option<&[T]>,
) -> Result<(T, Tensor4<T>), TensorError> {
    let d = logits.dims();
    let hw = d.h * d.w;
    let n_pix = d.n * hw;
    if labels.len() != n_pix {
        return Err(TensorError::BadLabelCount { len: labels.len(), expected: n_pix });
    }
    if let Some(w) = class_weights {
        if w.len() != d.c {
            return Err(TensorError::BadWeightCount { len: w.len(), classes: d.c });
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= d.c) {
        return Err(TensorError::LabelOutOfRange { label: bad, classes: d.c });
    }

    let inv_n = T::from_f64(1.0 / n_pix as f64);
    let mut grad = Tensor4::zeros(d);
    let mut probs = vec![T::zero(); d.c];
    let mut loss_acc = 0.0f64;
    for n in 0..d.n {
        let base = n * d.c * hw;
        for pix in 0..hw {
            let y = labels[n * hw + pix] as usize;
            let wy = class_weights.map_or(T::one(), |w| w[y]);
            pixel_softmax(logits.data(), base + pix, hw, &mut probs);
            // ln p_y via the stable pieces: p_y is already normalized.
            loss_acc -= wy.as_f64() * probs[y].as_f64().max(f64::MIN_POSITIVE).ln();
            for (k, &p) in probs.iter().enumerate() {
                let indicator = if k == y { T::one() } else { T::zero() };
                grad.data_mut()[base + k * hw + pix] = wy * (p - indicator) * inv_n;
            }
        }
    }
    Ok((T::from_f64(loss_acc / n_pix as f64), grad))
}
