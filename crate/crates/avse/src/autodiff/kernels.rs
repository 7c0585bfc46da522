//! Forward/backward math kernels.
//!
//! The kernels operate on raw slices so the tape ops and the streaming
//! inference path share one implementation. Inner loops are laid out as
//! contiguous row operations (axpy/dot) over the last axis.

use super::tensor::{AutodiffError, Scalar};

/// Time-axis padding of a convolution. The frequency/width axis is always
/// padded symmetrically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    /// Centered kernel: same padding on both sides of the first spatial axis.
    Symmetric,
    /// Pad only the past side of the first spatial axis.
    CausalPast,
}

/// Stride-1 dilated cross-correlation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvSpec {
    /// (first-axis, second-axis) dilation.
    pub dilation: (usize, usize),
    pub pad: PadMode,
}

impl ConvSpec {
    pub fn pad_top(&self, kh: usize) -> usize {
        let reach = (kh - 1) * self.dilation.0;
        match self.pad {
            PadMode::Symmetric => reach / 2,
            PadMode::CausalPast => reach,
        }
    }

    pub fn pad_left(&self, kw: usize) -> usize {
        (kw - 1) * self.dilation.1 / 2
    }

    pub fn validate(&self, kh: usize, kw: usize) -> Result<(), AutodiffError> {
        if kh == 0 || kw == 0 {
            return Err(AutodiffError::InvalidOp("zero kernel size".into()));
        }
        if self.pad == PadMode::Symmetric && (kh - 1) * self.dilation.0 % 2 != 0 {
            return Err(AutodiffError::InvalidOp(format!(
                "symmetric padding needs an even first-axis reach, kernel {kh} dilation {}",
                self.dilation.0
            )));
        }
        if (kw - 1) * self.dilation.1 % 2 != 0 {
            return Err(AutodiffError::InvalidOp(format!(
                "width padding needs an even reach, kernel {kw} dilation {}",
                self.dilation.1
            )));
        }
        Ok(())
    }
}

/// `out[f0..f1] += a * src[f0+off..f1+off]`, the convolution inner loop.
#[inline]
fn axpy<F: Scalar>(dst: &mut [F], src: &[F], a: F) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d = a.mul_add(*s, *d);
    }
}

/// Eight independent accumulator lanes so the FMA chain pipelines and
/// vectorizes; lane order is fixed, keeping results deterministic.
#[inline]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut lanes = [F::zero(); 8];
    let mut ia = a.chunks_exact(8);
    let mut ib = b.chunks_exact(8);
    for (ca, cb) in (&mut ia).zip(&mut ib) {
        for l in 0..8 {
            lanes[l] = ca[l].mul_add(cb[l], lanes[l]);
        }
    }
    let mut tail = F::zero();
    for (x, y) in ia.remainder().iter().zip(ib.remainder()) {
        tail = x.mul_add(*y, tail);
    }
    let mut acc = tail;
    for l in lanes {
        acc = acc + l;
    }
    acc
}

/// Valid output column range for a width offset `off`: columns `f` with
/// `0 <= f + off < w`.
#[inline]
fn col_range(w: usize, off: isize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = ((w as isize - off).max(0) as usize).min(w);
    (lo.min(hi), hi)
}

/// Dilated same-size cross-correlation.
///
/// `x` is `[c_in, h, w]`, `weights` `[c_out, c_in, kh, kw]`, `bias`
/// `[c_out]`, `out` `[c_out, h, w]`. `ctx` optionally supplies
/// `[c_in, pad_top, w]` of real past rows for streaming; otherwise the past
/// is zero.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward<F: Scalar>(
    x: &[F],
    (c_in, h, w): (usize, usize, usize),
    weights: &[F],
    (c_out, kh, kw): (usize, usize, usize),
    bias: &[F],
    spec: &ConvSpec,
    ctx: Option<&[F]>,
    out: &mut [F],
) {
    let (dh, dw) = spec.dilation;
    let pad_top = spec.pad_top(kh);
    let pad_left = spec.pad_left(kw);
    debug_assert_eq!(out.len(), c_out * h * w);

    for o in 0..c_out {
        let out_plane = &mut out[o * h * w..(o + 1) * h * w];
        out_plane.fill(bias[o]);
        for i in 0..c_in {
            let x_plane = &x[i * h * w..(i + 1) * h * w];
            for r in 0..kh {
                for c in 0..kw {
                    let wv = weights[((o * c_in + i) * kh + r) * kw + c];
                    if wv == F::zero() {
                        continue;
                    }
                    let off = (c * dw) as isize - pad_left as isize;
                    let (f0, f1) = col_range(w, off);
                    if f0 >= f1 {
                        continue;
                    }
                    for t in 0..h {
                        let src_t = t as isize + (r * dh) as isize - pad_top as isize;
                        let src_row: &[F] = if src_t >= 0 && (src_t as usize) < h {
                            let s = src_t as usize * w;
                            &x_plane[s..s + w]
                        } else if src_t < 0 {
                            match ctx {
                                Some(ctx) => {
                                    let row = (pad_top as isize + src_t) as usize;
                                    let s = (i * pad_top + row) * w;
                                    &ctx[s..s + w]
                                }
                                None => continue,
                            }
                        } else {
                            continue;
                        };
                        let dst = &mut out_plane[t * w + f0..t * w + f1];
                        let src = &src_row[(f0 as isize + off) as usize..(f1 as isize + off) as usize];
                        axpy(dst, src, wv);
                    }
                }
            }
        }
    }
}

/// Gradients of [`conv2d_forward`] (zero-padded past only; the streaming
/// context path is inference-only). Accumulates into zeroed buffers.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<F: Scalar>(
    x: &[F],
    (c_in, h, w): (usize, usize, usize),
    weights: &[F],
    (c_out, kh, kw): (usize, usize, usize),
    spec: &ConvSpec,
    grad_out: &[F],
    dx: Option<&mut [F]>,
    dw_acc: &mut [F],
    db_acc: &mut [F],
) {
    let (dh, dwil) = spec.dilation;
    let pad_top = spec.pad_top(kh);
    let pad_left = spec.pad_left(kw);

    for o in 0..c_out {
        let g_plane = &grad_out[o * h * w..(o + 1) * h * w];
        db_acc[o] = db_acc[o] + g_plane.iter().copied().sum();
        for i in 0..c_in {
            let x_plane = &x[i * h * w..(i + 1) * h * w];
            for r in 0..kh {
                for c in 0..kw {
                    let off = (c * dwil) as isize - pad_left as isize;
                    let (f0, f1) = col_range(w, off);
                    if f0 >= f1 {
                        continue;
                    }
                    let mut acc = F::zero();
                    for t in 0..h {
                        let src_t = t as isize + (r * dh) as isize - pad_top as isize;
                        if src_t < 0 || src_t as usize >= h {
                            continue;
                        }
                        let s = src_t as usize * w;
                        let g_row = &g_plane[t * w + f0..t * w + f1];
                        let x_row =
                            &x_plane[(s as isize + f0 as isize + off) as usize
                                ..(s as isize + f1 as isize + off) as usize];
                        acc = acc + dot(g_row, x_row);
                    }
                    let wi = ((o * c_in + i) * kh + r) * kw + c;
                    dw_acc[wi] = dw_acc[wi] + acc;
                }
            }
        }
    }

    if let Some(dx) = dx {
        for i in 0..c_in {
            let dx_plane = &mut dx[i * h * w..(i + 1) * h * w];
            for o in 0..c_out {
                let g_plane = &grad_out[o * h * w..(o + 1) * h * w];
                for r in 0..kh {
                    for c in 0..kw {
                        let wv = weights[((o * c_in + i) * kh + r) * kw + c];
                        if wv == F::zero() {
                            continue;
                        }
                        let off = (c * dwil) as isize - pad_left as isize;
                        let (f0, f1) = col_range(w, off);
                        if f0 >= f1 {
                            continue;
                        }
                        for t in 0..h {
                            let src_t = t as isize + (r * dh) as isize - pad_top as isize;
                            if src_t < 0 || src_t as usize >= h {
                                continue;
                            }
                            let s = src_t as usize * w;
                            let dst = &mut dx_plane[(s as isize + f0 as isize + off) as usize
                                ..(s as isize + f1 as isize + off) as usize];
                            let src = &g_plane[t * w + f0..t * w + f1];
                            axpy(dst, src, wv);
                        }
                    }
                }
            }
        }
    }
}

/// Non-overlapping max pooling with floor division of the spatial dims.
/// `argmax` receives, per output element, the flat input index that won
/// (first occurrence on ties).
pub fn maxpool2d_forward<F: Scalar>(
    x: &[F],
    (c, h, w): (usize, usize, usize),
    (ph, pw): (usize, usize),
    out: &mut [F],
    argmax: &mut [usize],
) {
    let oh = h / ph;
    let ow = w / pw;
    debug_assert_eq!(out.len(), c * oh * ow);
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = F::neg_infinity();
                let mut best_idx = 0usize;
                for di in 0..ph {
                    for dj in 0..pw {
                        let idx = ch * h * w + (i * ph + di) * w + (j * pw + dj);
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let oi = ch * oh * ow + i * ow + j;
                out[oi] = best;
                argmax[oi] = best_idx;
            }
        }
    }
}

pub fn maxpool2d_backward<F: Scalar>(grad_out: &[F], argmax: &[usize], dx: &mut [F]) {
    for (g, &idx) in grad_out.iter().zip(argmax.iter()) {
        dx[idx] = dx[idx] + *g;
    }
}

/// Post-affine activation of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
}

/// `out[t, o] = act(dot(x[t,:], w[o,:]) + b[o])`; weights are shared across
/// the leading (time) axis.
pub fn dense_forward<F: Scalar>(
    x: &[F],
    (t_len, d): (usize, usize),
    w: &[F],
    b: &[F],
    o_len: usize,
    act: Activation,
    out: &mut [F],
) {
    for t in 0..t_len {
        let x_row = &x[t * d..(t + 1) * d];
        for o in 0..o_len {
            let z = dot(x_row, &w[o * d..(o + 1) * d]) + b[o];
            out[t * o_len + o] = match act {
                Activation::None => z,
                Activation::Relu => {
                    if z > F::zero() {
                        z
                    } else {
                        F::zero()
                    }
                }
                Activation::Sigmoid => sigmoid(z),
            };
        }
    }
}

/// Gradients of [`dense_forward`]; `out` is the saved forward output (the
/// activation derivative is reconstructed from it).
#[allow(clippy::too_many_arguments)]
pub fn dense_backward<F: Scalar>(
    x: &[F],
    (t_len, d): (usize, usize),
    w: &[F],
    o_len: usize,
    act: Activation,
    out: &[F],
    grad_out: &[F],
    dx: &mut [F],
    dw_acc: &mut [F],
    db_acc: &mut [F],
) {
    for t in 0..t_len {
        let x_row = &x[t * d..(t + 1) * d];
        let dx_row = &mut dx[t * d..(t + 1) * d];
        for o in 0..o_len {
            let y = out[t * o_len + o];
            let g = grad_out[t * o_len + o];
            let dz = match act {
                Activation::None => g,
                Activation::Relu => {
                    if y > F::zero() {
                        g
                    } else {
                        F::zero()
                    }
                }
                Activation::Sigmoid => g * y * (F::one() - y),
            };
            if dz == F::zero() {
                continue;
            }
            axpy(dx_row, &w[o * d..(o + 1) * d], dz);
            axpy(&mut dw_acc[o * d..(o + 1) * d], x_row, dz);
            db_acc[o] = db_acc[o] + dz;
        }
    }
}

#[inline]
pub fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// LSTM weights: gate rows are stacked `[input; forget; cell; output]`.
pub struct LstmWeights<'a, F> {
    /// `[4 * units, input_dim]`
    pub w_x: &'a [F],
    /// `[4 * units, units]`
    pub w_h: &'a [F],
    /// `[4 * units]`
    pub b: &'a [F],
}

/// Recurrent state carried between sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<F> {
    pub h: Vec<F>,
    pub c: Vec<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(units: usize) -> Self {
        Self {
            h: vec![F::zero(); units],
            c: vec![F::zero(); units],
        }
    }
}

/// Saved intermediates for backpropagation through time.
pub struct LstmCache<F> {
    /// `[t, 4 * units]` post-activation gates (i, f, g, o).
    pub gates: Vec<F>,
    /// `[t, units]` cell states.
    pub c: Vec<F>,
    /// `[t, units]` tanh of cell states.
    pub tanh_c: Vec<F>,
}

/// Unidirectional LSTM over `x: [t_len, d]`; writes hidden states to
/// `hs: [t_len, units]` and returns the final state.
#[allow(clippy::too_many_arguments)]
pub fn lstm_forward<F: Scalar>(
    x: &[F],
    (t_len, d): (usize, usize),
    units: usize,
    weights: &LstmWeights<'_, F>,
    init: &LstmState<F>,
    hs: &mut [F],
    cache: Option<&mut LstmCache<F>>,
) -> LstmState<F> {
    let u4 = 4 * units;
    let mut h = init.h.clone();
    let mut c = init.c.clone();
    let mut z = vec![F::zero(); u4];
    let mut cache = cache;

    for t in 0..t_len {
        let x_row = &x[t * d..(t + 1) * d];
        for r in 0..u4 {
            z[r] = dot(&weights.w_x[r * d..(r + 1) * d], x_row)
                + dot(&weights.w_h[r * units..(r + 1) * units], &h)
                + weights.b[r];
        }
        for uidx in 0..units {
            let gi = sigmoid(z[uidx]);
            let gf = sigmoid(z[units + uidx]);
            let gg = z[2 * units + uidx].tanh();
            let go = sigmoid(z[3 * units + uidx]);
            let cn = gf * c[uidx] + gi * gg;
            let tc = cn.tanh();
            c[uidx] = cn;
            h[uidx] = go * tc;
            hs[t * units + uidx] = h[uidx];
            if let Some(cache) = cache.as_deref_mut() {
                cache.gates[t * u4 + uidx] = gi;
                cache.gates[t * u4 + units + uidx] = gf;
                cache.gates[t * u4 + 2 * units + uidx] = gg;
                cache.gates[t * u4 + 3 * units + uidx] = go;
                cache.c[t * units + uidx] = cn;
                cache.tanh_c[t * units + uidx] = tc;
            }
        }
    }
    LstmState { h, c }
}

/// Backpropagation through time for [`lstm_forward`] started from a zero
/// state. Accumulates into zeroed buffers.
#[allow(clippy::too_many_arguments)]
pub fn lstm_backward<F: Scalar>(
    x: &[F],
    (t_len, d): (usize, usize),
    units: usize,
    weights: &LstmWeights<'_, F>,
    hs: &[F],
    cache: &LstmCache<F>,
    grad_hs: &[F],
    dx: &mut [F],
    dwx_acc: &mut [F],
    dwh_acc: &mut [F],
    db_acc: &mut [F],
) {
    let u4 = 4 * units;
    // transpose the weight matrices once so the per-step matvecs stay
    // contiguous
    let mut wx_t = vec![F::zero(); u4 * d];
    for r in 0..u4 {
        for j in 0..d {
            wx_t[j * u4 + r] = weights.w_x[r * d + j];
        }
    }
    let mut wh_t = vec![F::zero(); u4 * units];
    for r in 0..u4 {
        for j in 0..units {
            wh_t[j * u4 + r] = weights.w_h[r * units + j];
        }
    }

    let mut dh_next = vec![F::zero(); units];
    let mut dc_next = vec![F::zero(); units];
    let mut dz = vec![F::zero(); u4];

    for t in (0..t_len).rev() {
        for uidx in 0..units {
            let gi = cache.gates[t * u4 + uidx];
            let gf = cache.gates[t * u4 + units + uidx];
            let gg = cache.gates[t * u4 + 2 * units + uidx];
            let go = cache.gates[t * u4 + 3 * units + uidx];
            let tc = cache.tanh_c[t * units + uidx];
            let c_prev = if t == 0 {
                F::zero()
            } else {
                cache.c[(t - 1) * units + uidx]
            };

            let dh = grad_hs[t * units + uidx] + dh_next[uidx];
            let dgo = dh * tc;
            let dc = dh * go * (F::one() - tc * tc) + dc_next[uidx];
            let dgi = dc * gg;
            let dgg = dc * gi;
            let dgf = dc * c_prev;
            dc_next[uidx] = dc * gf;

            dz[uidx] = dgi * gi * (F::one() - gi);
            dz[units + uidx] = dgf * gf * (F::one() - gf);
            dz[2 * units + uidx] = dgg * (F::one() - gg * gg);
            dz[3 * units + uidx] = dgo * go * (F::one() - go);
        }

        let x_row = &x[t * d..(t + 1) * d];
        for r in 0..u4 {
            let dzr = dz[r];
            if dzr == F::zero() {
                continue;
            }
            axpy(&mut dwx_acc[r * d..(r + 1) * d], x_row, dzr);
            db_acc[r] = db_acc[r] + dzr;
        }
        if t > 0 {
            let h_prev = &hs[(t - 1) * units..t * units];
            for r in 0..u4 {
                let dzr = dz[r];
                if dzr == F::zero() {
                    continue;
                }
                axpy(&mut dwh_acc[r * units..(r + 1) * units], h_prev, dzr);
            }
        }

        let dx_row = &mut dx[t * d..(t + 1) * d];
        for j in 0..d {
            dx_row[j] = dx_row[j] + dot(&wx_t[j * u4..(j + 1) * u4], &dz);
        }
        for uidx in 0..units {
            dh_next[uidx] = dot(&wh_t[uidx * u4..(uidx + 1) * u4], &dz);
        }
    }
}

/// Clamp bound applied to predictions before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy with the prediction clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn bce_forward<F: Scalar>(pred: &[F], target: &[F]) -> F {
    let lo = F::from_f64(BCE_EPS);
    let hi = F::one() - lo;
    let mut acc = F::zero();
    for (&p, &t) in pred.iter().zip(target.iter()) {
        let p = p.max(lo).min(hi);
        acc = acc - (t * p.ln() + (F::one() - t) * (F::one() - p).ln());
    }
    acc / F::from_f64(pred.len() as f64)
}

/// Gradient of [`bce_forward`] with respect to the raw prediction; zero
/// where the clamp was active.
pub fn bce_backward<F: Scalar>(pred: &[F], target: &[F], grad: F, dpred: &mut [F]) {
    let lo = F::from_f64(BCE_EPS);
    let hi = F::one() - lo;
    let n = F::from_f64(pred.len() as f64);
    for ((&p, &t), d) in pred.iter().zip(target.iter()).zip(dpred.iter_mut()) {
        if p < lo || p > hi {
            continue;
        }
        let dl = (p - t) / (p * (F::one() - p));
        *d = *d + grad * dl / n;
    }
}
