//! Reverse-mode tape.
//!
//! Each op runs its forward kernel eagerly and, when any parent needs a
//! gradient, stores a closure that maps the node's output gradient to
//! contributions for its parents. `backward` walks nodes in reverse
//! creation order (parents always precede children), accumulating fan-out
//! by addition, so results are deterministic for a fixed graph.

use super::kernels::{self, Activation, ConvSpec, LstmCache, LstmState, LstmWeights};
use super::tensor::{AutodiffError, Scalar, Tensor};
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

type BackwardFn<F> = Box<dyn Fn(&Tensor<F>) -> Vec<(usize, Tensor<F>)>>;

struct Node<F> {
    value: Rc<Tensor<F>>,
    grad: Option<Tensor<F>>,
    requires_grad: bool,
    backward: Option<BackwardFn<F>>,
}

/// A single-use computation tape. Build the forward pass, call
/// [`Graph::backward`] once, read gradients.
pub struct Graph<F: Scalar> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    /// Leaf that does not participate in differentiation.
    pub fn input(&mut self, value: Tensor<F>) -> NodeId {
        self.push(value, false, None)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor<F>) -> NodeId {
        self.push(value, true, None)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<F> {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor<F>> {
        self.nodes[id.0].grad.as_ref()
    }

    fn push(&mut self, value: Tensor<F>, requires_grad: bool, backward: Option<BackwardFn<F>>) -> NodeId {
        self.nodes.push(Node {
            value: Rc::new(value),
            grad: None,
            requires_grad,
            backward,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rc(&self, id: NodeId) -> Rc<Tensor<F>> {
        Rc::clone(&self.nodes[id.0].value)
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Reverse accumulation from a scalar loss. Fills `grad` on every
    /// differentiable node reachable from it.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), AutodiffError> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(AutodiffError::NonScalarLoss(
                self.nodes[loss.0].value.shape().to_vec(),
            ));
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(F::one()));
        for id in (0..=loss.0).rev() {
            let grad = self.nodes[id].grad.take();
            let contribs = match (&grad, &self.nodes[id].backward) {
                (Some(g), Some(bw)) => bw(g),
                _ => Vec::new(),
            };
            self.nodes[id].grad = grad;
            for (pid, c) in contribs {
                if !self.nodes[pid].requires_grad {
                    continue;
                }
                match &mut self.nodes[pid].grad {
                    Some(g) => g.add_assign(&c),
                    slot @ None => *slot = Some(c),
                }
            }
        }
        Ok(())
    }

    // ---- shape plumbing ----

    /// Reinterprets the value with a new shape (same element count).
    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId, AutodiffError> {
        let value = self.value(x).reshape(shape)?;
        let req = self.requires(x);
        let old_shape = self.value(x).shape().to_vec();
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let xi = x.0;
            Box::new(move |g: &Tensor<F>| {
                vec![(xi, g.reshape(&old_shape).expect("same numel"))]
            }) as BackwardFn<F>
        });
        Ok(self.push(value, req, bw))
    }

    /// `[c, t, f] -> [t, c * f]`: per-time-step feature rows.
    pub fn flatten_time_major(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 3 {
            return Err(AutodiffError::ShapeMismatch(format!(
                "flatten_time_major wants rank 3, got {xs:?}"
            )));
        }
        let (c, t, f) = (xs[0], xs[1], xs[2]);
        let xv = self.rc(x);
        let mut out = Tensor::zeros(&[t, c * f]);
        {
            let o = out.data_mut();
            let xd = xv.data();
            for ci in 0..c {
                for ti in 0..t {
                    let src = &xd[(ci * t + ti) * f..(ci * t + ti + 1) * f];
                    o[ti * c * f + ci * f..ti * c * f + (ci + 1) * f].copy_from_slice(src);
                }
            }
        }
        let req = self.requires(x);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let xi = x.0;
            Box::new(move |g: &Tensor<F>| {
                let mut dx = Tensor::zeros(&[c, t, f]);
                let d = dx.data_mut();
                let gd = g.data();
                for ci in 0..c {
                    for ti in 0..t {
                        let dst = &mut d[(ci * t + ti) * f..(ci * t + ti + 1) * f];
                        dst.copy_from_slice(&gd[ti * c * f + ci * f..ti * c * f + (ci + 1) * f]);
                    }
                }
                vec![(xi, dx)]
            }) as BackwardFn<F>
        });
        Ok(self.push(out, req, bw))
    }

    /// Keeps every `stride`-th column of the last axis of `[c, t, f]`.
    pub fn subsample_freq(&mut self, x: NodeId, stride: usize) -> Result<NodeId, AutodiffError> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 3 || stride == 0 {
            return Err(AutodiffError::InvalidOp(format!(
                "subsample_freq wants rank 3 and stride > 0, got {xs:?} stride {stride}"
            )));
        }
        let (c, t, f) = (xs[0], xs[1], xs[2]);
        let fs = f.div_ceil(stride);
        let xv = self.rc(x);
        let mut out = Tensor::zeros(&[c, t, fs]);
        {
            let o = out.data_mut();
            let xd = xv.data();
            for row in 0..c * t {
                for j in 0..fs {
                    o[row * fs + j] = xd[row * f + j * stride];
                }
            }
        }
        let req = self.requires(x);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let xi = x.0;
            Box::new(move |g: &Tensor<F>| {
                let mut dx = Tensor::zeros(&[c, t, f]);
                let d = dx.data_mut();
                let gd = g.data();
                for row in 0..c * t {
                    for j in 0..fs {
                        d[row * f + j * stride] = gd[row * fs + j];
                    }
                }
                vec![(xi, dx)]
            }) as BackwardFn<F>
        });
        Ok(self.push(out, req, bw))
    }

    /// Concatenates two `[t, *]` matrices along columns.
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let sa = self.value(a).shape().to_vec();
        let sb = self.value(b).shape().to_vec();
        if sa.len() != 2 || sb.len() != 2 || sa[0] != sb[0] {
            return Err(AutodiffError::ShapeMismatch(format!(
                "concat_cols wants [t, a] and [t, b], got {sa:?} and {sb:?}"
            )));
        }
        let (t, ca, cb) = (sa[0], sa[1], sb[1]);
        let av = self.rc(a);
        let bv = self.rc(b);
        let mut out = Tensor::zeros(&[t, ca + cb]);
        {
            let o = out.data_mut();
            for ti in 0..t {
                o[ti * (ca + cb)..ti * (ca + cb) + ca]
                    .copy_from_slice(&av.data()[ti * ca..(ti + 1) * ca]);
                o[ti * (ca + cb) + ca..(ti + 1) * (ca + cb)]
                    .copy_from_slice(&bv.data()[ti * cb..(ti + 1) * cb]);
            }
        }
        let (ra, rb) = (self.requires(a), self.requires(b));
        let req = ra || rb;
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let (ai, bi) = (a.0, b.0);
            Box::new(move |g: &Tensor<F>| {
                let gd = g.data();
                let mut out = Vec::new();
                if ra {
                    let mut da = Tensor::zeros(&[t, ca]);
                    for ti in 0..t {
                        da.data_mut()[ti * ca..(ti + 1) * ca]
                            .copy_from_slice(&gd[ti * (ca + cb)..ti * (ca + cb) + ca]);
                    }
                    out.push((ai, da));
                }
                if rb {
                    let mut db = Tensor::zeros(&[t, cb]);
                    for ti in 0..t {
                        db.data_mut()[ti * cb..(ti + 1) * cb]
                            .copy_from_slice(&gd[ti * (ca + cb) + ca..(ti + 1) * (ca + cb)]);
                    }
                    out.push((bi, db));
                }
                out
            }) as BackwardFn<F>
        });
        Ok(self.push(out, req, bw))
    }

    /// Repeats each row of `[t, d]` `factor` times: temporal upsampling.
    pub fn repeat_rows(&mut self, x: NodeId, factor: usize) -> Result<NodeId, AutodiffError> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 2 || factor == 0 {
            return Err(AutodiffError::InvalidOp(format!(
                "repeat_rows wants rank 2 and factor > 0, got {xs:?} factor {factor}"
            )));
        }
        let (t, d) = (xs[0], xs[1]);
        let xv = self.rc(x);
        let mut out = Tensor::zeros(&[t * factor, d]);
        {
            let o = out.data_mut();
            for ti in 0..t {
                let src = &xv.data()[ti * d..(ti + 1) * d];
                for k in 0..factor {
                    o[(ti * factor + k) * d..(ti * factor + k + 1) * d].copy_from_slice(src);
                }
            }
        }
        let req = self.requires(x);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let xi = x.0;
            Box::new(move |g: &Tensor<F>| {
                let mut dx = Tensor::zeros(&[t, d]);
                let gd = g.data();
                for ti in 0..t {
                    for k in 0..factor {
                        let row = &gd[(ti * factor + k) * d..(ti * factor + k + 1) * d];
                        for (slot, v) in dx.data_mut()[ti * d..(ti + 1) * d]
                            .iter_mut()
                            .zip(row.iter())
                        {
                            *slot = *slot + *v;
                        }
                    }
                }
                vec![(xi, dx)]
            }) as BackwardFn<F>
        });
        Ok(self.push(out, req, bw))
    }

    // ---- elementwise ----

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let xv = self.rc(x);
        let out = xv.map(|v| if v > F::zero() { v } else { F::zero() });
        let req = self.requires(x);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let xi = x.0;
            let xv = Rc::clone(&xv);
            Box::new(move |g: &Tensor<F>| {
                let mut dx = Tensor::zeros(xv.shape());
                for ((d, &v), &gv) in dx
                    .data_mut()
                    .iter_mut()
                    .zip(xv.data().iter())
                    .zip(g.data().iter())
                {
                    if v > F::zero() {
                        *d = gv;
                    }
                }
                vec![(xi, dx)]
            }) as BackwardFn<F>
        });
        self.push(out, req, bw)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(AutodiffError::ShapeMismatch(format!(
                "mul: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let av = self.rc(a);
        let bv = self.rc(b);
        let mut out = Tensor::zeros(av.shape());
        for ((o, &x), &y) in out
            .data_mut()
            .iter_mut()
            .zip(av.data().iter())
            .zip(bv.data().iter())
        {
            *o = x * y;
        }
        let (ra, rb) = (self.requires(a), self.requires(b));
        let req = ra || rb;
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let (ai, bi) = (a.0, b.0);
            let av = Rc::clone(&av);
            let bv = Rc::clone(&bv);
            Box::new(move |g: &Tensor<F>| {
                let mut out = Vec::new();
                if ra {
                    let mut da = Tensor::zeros(av.shape());
                    for ((d, &y), &gv) in da
                        .data_mut()
                        .iter_mut()
                        .zip(bv.data().iter())
                        .zip(g.data().iter())
                    {
                        *d = y * gv;
                    }
                    out.push((ai, da));
                }
                if rb {
                    let mut db = Tensor::zeros(bv.shape());
                    for ((d, &x), &gv) in db
                        .data_mut()
                        .iter_mut()
                        .zip(av.data().iter())
                        .zip(g.data().iter())
                    {
                        *d = x * gv;
                    }
                    out.push((bi, db));
                }
                out
            }) as BackwardFn<F>
        });
        Ok(self.push(out, req, bw))
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let xv = self.rc(x);
        let total: F = xv.data().iter().copied().sum();
        let req = self.requires(x);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let xi = x.0;
            let xv = Rc::clone(&xv);
            Box::new(move |g: &Tensor<F>| {
                let gv = g.data()[0];
                vec![(xi, Tensor::from_fn(xv.shape(), |_| gv))]
            }) as BackwardFn<F>
        });
        self.push(Tensor::scalar(total), req, bw)
    }

    // ---- layers ----

    /// Dilated same-size convolution. `x` is `[c_in, h, w]` or
    /// `[batch, c_in, h, w]`; `w` is `[c_out, c_in, kh, kw]`; `b` `[c_out]`.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        spec: ConvSpec,
    ) -> Result<NodeId, AutodiffError> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 4 {
            return Err(AutodiffError::ShapeMismatch(format!(
                "conv2d weights must be rank 4, got {ws:?}"
            )));
        }
        let (batched, bsz, c_in, h, wdt) = match xs.len() {
            3 => (false, 1, xs[0], xs[1], xs[2]),
            4 => (true, xs[0], xs[1], xs[2], xs[3]),
            _ => {
                return Err(AutodiffError::ShapeMismatch(format!(
                    "conv2d input must be rank 3 or 4, got {xs:?}"
                )))
            }
        };
        let (c_out, kc, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
        if kc != c_in {
            return Err(AutodiffError::ShapeMismatch(format!(
                "conv2d: input has {c_in} channels, kernel expects {kc}"
            )));
        }
        if self.value(b).shape() != [c_out] {
            return Err(AutodiffError::ShapeMismatch(format!(
                "conv2d bias must be [{c_out}], got {:?}",
                self.value(b).shape()
            )));
        }
        spec.validate(kh, kw)?;
        if (kh - 1) * spec.dilation.0 >= h + spec.pad_top(kh) + 1 || (kw - 1) * spec.dilation.1 / 2 >= wdt + 1 {
            // oversized kernels never fit the padded input
            return Err(AutodiffError::ShapeMismatch(format!(
                "conv2d kernel {kh}x{kw} dilation {:?} exceeds padded input {h}x{wdt}",
                spec.dilation
            )));
        }

        let xv = self.rc(x);
        let wv = self.rc(w);
        let bv = self.rc(b);
        let plane = c_in * h * wdt;
        let out_plane = c_out * h * wdt;
        let out_shape: Vec<usize> = if batched {
            vec![bsz, c_out, h, wdt]
        } else {
            vec![c_out, h, wdt]
        };
        let mut out = Tensor::zeros(&out_shape);
        for bi in 0..bsz {
            kernels::conv2d_forward(
                &xv.data()[bi * plane..(bi + 1) * plane],
                (c_in, h, wdt),
                wv.data(),
                (c_out, kh, kw),
                bv.data(),
                &spec,
                None,
                &mut out.data_mut()[bi * out_plane..(bi + 1) * out_plane],
            );
        }

        let (rx, rw, rb) = (self.requires(x), self.requires(w), self.requires(b));
        let req = rx || rw || rb;
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let (xi, wi, bi_id) = (x.0, w.0, b.0);
            let xv = Rc::clone(&xv);
            let wv = Rc::clone(&wv);
            let xshape = xs.clone();
            Box::new(move |g: &Tensor<F>| {
                let mut dx = rx.then(|| Tensor::zeros(&xshape));
                let mut dw = Tensor::zeros(&[c_out, c_in, kh, kw]);
                let mut db = Tensor::zeros(&[c_out]);
                for bidx in 0..bsz {
                    kernels::conv2d_backward(
                        &xv.data()[bidx * plane..(bidx + 1) * plane],
                        (c_in, h, wdt),
                        wv.data(),
                        (c_out, kh, kw),
                        &spec,
                        &g.data()[bidx * out_plane..(bidx + 1) * out_plane],
                        dx.as_mut()
                            .map(|t| &mut t.data_mut()[bidx * plane..(bidx + 1) * plane]),
                        dw.data_mut(),
                        db.data_mut(),
                    );
                }
                let mut out = Vec::new();
                if let Some(dx) = dx {
                    out.push((xi, dx));
                }
                if rw {
                    out.push((wi, dw));
                }
                if rb {
                    out.push((bi_id, db));
                }
                out
            }) as BackwardFn<F>
        });
        Ok(self.push(out, req, bw))
    }

    /// Non-overlapping max pooling over the trailing two axes of a rank-3
    /// or rank-4 input.
    pub fn maxpool2d(&mut self, x: NodeId, pool: (usize, usize)) -> Result<NodeId, AutodiffError> {
        let xs = self.value(x).shape().to_vec();
        let (batched, bsz, c, h, w) = match xs.len() {
            3 => (false, 1, xs[0], xs[1], xs[2]),
            4 => (true, xs[0], xs[1], xs[2], xs[3]),
            _ => {
                return Err(AutodiffError::ShapeMismatch(format!(
                    "maxpool2d input must be rank 3 or 4, got {xs:?}"
                )))
            }
        };
        if pool.0 == 0 || pool.1 == 0 || h < pool.0 || w < pool.1 {
            return Err(AutodiffError::InvalidOp(format!(
                "maxpool2d: pool {pool:?} does not fit {h}x{w}"
            )));
        }
        let (oh, ow) = (h / pool.0, w / pool.1);
        let xv = self.rc(x);
        let out_shape: Vec<usize> = if batched {
            vec![bsz, c, oh, ow]
        } else {
            vec![c, oh, ow]
        };
        let mut out = Tensor::zeros(&out_shape);
        let mut argmax = vec![0usize; bsz * c * oh * ow];
        let in_plane = c * h * w;
        let out_plane = c * oh * ow;
        for bi in 0..bsz {
            kernels::maxpool2d_forward(
                &xv.data()[bi * in_plane..(bi + 1) * in_plane],
                (c, h, w),
                pool,
                &mut out.data_mut()[bi * out_plane..(bi + 1) * out_plane],
                &mut argmax[bi * out_plane..(bi + 1) * out_plane],
            );
        }
        let req = self.requires(x);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let xi = x.0;
            let xshape = xs.clone();
            let argmax = Rc::new(argmax);
            Box::new(move |g: &Tensor<F>| {
                let mut dx = Tensor::zeros(&xshape);
                for bi in 0..bsz {
                    kernels::maxpool2d_backward(
                        &g.data()[bi * out_plane..(bi + 1) * out_plane],
                        &argmax[bi * out_plane..(bi + 1) * out_plane],
                        &mut dx.data_mut()[bi * in_plane..(bi + 1) * in_plane],
                    );
                }
                vec![(xi, dx)]
            }) as BackwardFn<F>
        });
        Ok(self.push(out, req, bw))
    }

    /// Affine layer with weights shared over the leading axis:
    /// `out[t] = act(w x[t] + b)` for `x: [t, d]`, `w: [o, d]`, `b: [o]`.
    pub fn dense(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        act: Activation,
    ) -> Result<NodeId, AutodiffError> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(AutodiffError::ShapeMismatch(format!(
                "dense: x {xs:?} vs w {ws:?}"
            )));
        }
        let (t, d, o) = (xs[0], xs[1], ws[0]);
        if self.value(b).shape() != [o] {
            return Err(AutodiffError::ShapeMismatch(format!(
                "dense bias must be [{o}], got {:?}",
                self.value(b).shape()
            )));
        }
        let xv = self.rc(x);
        let wv = self.rc(w);
        let bv = self.rc(b);
        let mut out = Tensor::zeros(&[t, o]);
        kernels::dense_forward(xv.data(), (t, d), wv.data(), bv.data(), o, act, out.data_mut());

        let (rx, rw, rb) = (self.requires(x), self.requires(w), self.requires(b));
        let req = rx || rw || rb;
        let out_rc = Rc::new(out);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let (xi, wi, bi) = (x.0, w.0, b.0);
            let xv = Rc::clone(&xv);
            let wv = Rc::clone(&wv);
            let saved = Rc::clone(&out_rc);
            Box::new(move |g: &Tensor<F>| {
                let mut dx = Tensor::zeros(&[t, d]);
                let mut dw = Tensor::zeros(&[o, d]);
                let mut db = Tensor::zeros(&[o]);
                kernels::dense_backward(
                    xv.data(),
                    (t, d),
                    wv.data(),
                    o,
                    act,
                    saved.data(),
                    g.data(),
                    dx.data_mut(),
                    dw.data_mut(),
                    db.data_mut(),
                );
                let mut outv = Vec::new();
                if rx {
                    outv.push((xi, dx));
                }
                if rw {
                    outv.push((wi, dw));
                }
                if rb {
                    outv.push((bi, db));
                }
                outv
            }) as BackwardFn<F>
        });
        self.nodes.push(Node {
            value: out_rc,
            grad: None,
            requires_grad: req,
            backward: bw,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Unidirectional LSTM over `x: [t, d]` from a zero initial state;
    /// returns the `[t, units]` hidden states.
    pub fn lstm_seq(
        &mut self,
        x: NodeId,
        w_x: NodeId,
        w_h: NodeId,
        b: NodeId,
    ) -> Result<NodeId, AutodiffError> {
        let xs = self.value(x).shape().to_vec();
        let wxs = self.value(w_x).shape().to_vec();
        let whs = self.value(w_h).shape().to_vec();
        if xs.len() != 2 || wxs.len() != 2 || whs.len() != 2 {
            return Err(AutodiffError::ShapeMismatch(format!(
                "lstm_seq: x {xs:?}, w_x {wxs:?}, w_h {whs:?}"
            )));
        }
        let (t, d) = (xs[0], xs[1]);
        let units = whs[1];
        if wxs != [4 * units, d] || whs != [4 * units, units] || self.value(b).shape() != [4 * units]
        {
            return Err(AutodiffError::ShapeMismatch(format!(
                "lstm_seq: expected w_x [{}, {d}], w_h [{}, {units}], b [{}]",
                4 * units,
                4 * units,
                4 * units
            )));
        }
        if t == 0 {
            return Err(AutodiffError::InvalidOp("lstm_seq on empty sequence".into()));
        }

        let xv = self.rc(x);
        let wxv = self.rc(w_x);
        let whv = self.rc(w_h);
        let bv = self.rc(b);
        let mut hs = Tensor::zeros(&[t, units]);
        let mut cache = LstmCache {
            gates: vec![F::zero(); t * 4 * units],
            c: vec![F::zero(); t * units],
            tanh_c: vec![F::zero(); t * units],
        };
        kernels::lstm_forward(
            xv.data(),
            (t, d),
            units,
            &LstmWeights {
                w_x: wxv.data(),
                w_h: whv.data(),
                b: bv.data(),
            },
            &LstmState::zeros(units),
            hs.data_mut(),
            Some(&mut cache),
        );

        let (rx, rwx, rwh, rb) = (
            self.requires(x),
            self.requires(w_x),
            self.requires(w_h),
            self.requires(b),
        );
        let req = rx || rwx || rwh || rb;
        let hs_rc = Rc::new(hs);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let (xi, wxi, whi, bi) = (x.0, w_x.0, w_h.0, b.0);
            let xv = Rc::clone(&xv);
            let wxv = Rc::clone(&wxv);
            let whv = Rc::clone(&whv);
            let hs = Rc::clone(&hs_rc);
            let cache = Rc::new(cache);
            Box::new(move |g: &Tensor<F>| {
                let mut dx = Tensor::zeros(&[t, d]);
                let mut dwx = Tensor::zeros(&[4 * units, d]);
                let mut dwh = Tensor::zeros(&[4 * units, units]);
                let mut db = Tensor::zeros(&[4 * units]);
                kernels::lstm_backward(
                    xv.data(),
                    (t, d),
                    units,
                    &LstmWeights {
                        w_x: wxv.data(),
                        w_h: whv.data(),
                        b: &[],
                    },
                    hs.data(),
                    &cache,
                    g.data(),
                    dx.data_mut(),
                    dwx.data_mut(),
                    dwh.data_mut(),
                    db.data_mut(),
                );
                let mut outv = Vec::new();
                if rx {
                    outv.push((xi, dx));
                }
                if rwx {
                    outv.push((wxi, dwx));
                }
                if rwh {
                    outv.push((whi, dwh));
                }
                if rb {
                    outv.push((bi, db));
                }
                outv
            }) as BackwardFn<F>
        });
        self.nodes.push(Node {
            value: hs_rc,
            grad: None,
            requires_grad: req,
            backward: bw,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Mean binary cross-entropy against a constant target, as a scalar
    /// node. Predictions are clamped to `[1e-7, 1 - 1e-7]` before logs.
    pub fn bce_loss(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId, AutodiffError> {
        if self.value(pred).shape() != self.value(target).shape() {
            return Err(AutodiffError::ShapeMismatch(format!(
                "bce_loss: {:?} vs {:?}",
                self.value(pred).shape(),
                self.value(target).shape()
            )));
        }
        let pv = self.rc(pred);
        let tv = self.rc(target);
        let loss = kernels::bce_forward(pv.data(), tv.data());
        let req = self.requires(pred) || self.requires(target);
        let bw: Option<BackwardFn<F>> = req.then(|| {
            let pi = pred.0;
            let pv = Rc::clone(&pv);
            let tv = Rc::clone(&tv);
            Box::new(move |g: &Tensor<F>| {
                let mut dp = Tensor::zeros(pv.shape());
                kernels::bce_backward(pv.data(), tv.data(), g.data()[0], dp.data_mut());
                vec![(pi, dp)]
            }) as BackwardFn<F>
        });
        Ok(self.push(Tensor::scalar(loss), req, bw))
    }
}
