//! Minimal reverse-mode automatic differentiation.
//!
//! Exactly the layers the mask estimator needs: dilated 2-D convolution,
//! max pooling, time-shared dense layers, a unidirectional LSTM, binary
//! cross-entropy, and Adam. The engine is generic over `f32`/`f64`; `f64`
//! instantiations back the finite-difference gradient checks.

mod adam;
pub mod gradcheck;
mod graph;
pub mod kernels;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Graph, NodeId};
pub use kernels::{Activation, ConvSpec, LstmState, PadMode};
pub use tensor::{AutodiffError, Scalar, Tensor};

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn rng_tensor(rng: &mut ChaCha20Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
    }

    /// Independent nested-loop cross-correlation oracle with explicit
    /// padding arithmetic.
    fn conv_oracle(
        x: &Tensor<f64>,
        w: &Tensor<f64>,
        b: &Tensor<f64>,
        dil: (usize, usize),
        causal: bool,
    ) -> Tensor<f64> {
        let (c_in, h, wid) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (c_out, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
        let pad_top = if causal {
            (kh - 1) * dil.0
        } else {
            (kh - 1) * dil.0 / 2
        };
        let pad_left = (kw - 1) * dil.1 / 2;
        let mut out = Tensor::zeros(&[c_out, h, wid]);
        for o in 0..c_out {
            for t in 0..h {
                for f in 0..wid {
                    let mut acc = b.data()[o];
                    for i in 0..c_in {
                        for r in 0..kh {
                            for c in 0..kw {
                                let ti = t as isize + (r * dil.0) as isize - pad_top as isize;
                                let fi = f as isize + (c * dil.1) as isize - pad_left as isize;
                                if ti < 0 || ti >= h as isize || fi < 0 || fi >= wid as isize {
                                    continue;
                                }
                                acc += w.data()[((o * c_in + i) * kh + r) * kw + c]
                                    * x.data()[(i * h + ti as usize) * wid + fi as usize];
                            }
                        }
                    }
                    out.data_mut()[(o * h + t) * wid + f] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv2d_identity_kernel() {
        let mut g = Graph::<f64>::new();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = rng_tensor(&mut rng, &[1, 4, 5], -1.0, 1.0);
        let xv = g.input(x.clone());
        let w = g.input(Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap());
        let b = g.input(Tensor::zeros(&[1]));
        let y = g
            .conv2d(
                xv,
                w,
                b,
                ConvSpec {
                    dilation: (1, 1),
                    pad: PadMode::Symmetric,
                },
            )
            .unwrap();
        assert_eq!(g.value(y).data(), x.data());
    }

    #[test]
    fn conv2d_averaging_kernel_constant_interior() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_fn(&[1, 6, 6], |_| 0.7));
        let w = g.input(Tensor::from_fn(&[1, 1, 3, 3], |_| 1.0 / 9.0));
        let b = g.input(Tensor::zeros(&[1]));
        let y = g
            .conv2d(
                x,
                w,
                b,
                ConvSpec {
                    dilation: (1, 1),
                    pad: PadMode::Symmetric,
                },
            )
            .unwrap();
        // away from borders every tap lands inside
        for t in 1..5 {
            for f in 1..5 {
                assert!((g.value(y).data()[t * 6 + f] - 0.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv2d_matches_nested_loop_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for case in 0..10 {
            let causal = case % 2 == 0;
            let x = rng_tensor(&mut rng, &[2, 5, 7], -1.0, 1.0);
            let w = rng_tensor(&mut rng, &[3, 2, 3, 3], -0.5, 0.5);
            let b = rng_tensor(&mut rng, &[3], -0.1, 0.1);
            let spec = ConvSpec {
                dilation: (2, 1),
                pad: if causal {
                    PadMode::CausalPast
                } else {
                    PadMode::Symmetric
                },
            };
            let expect = conv_oracle(&x, &w, &b, (2, 1), causal);

            let mut g = Graph::<f64>::new();
            let (xi, wi, bi) = (g.input(x), g.input(w), g.input(b));
            let y = g.conv2d(xi, wi, bi, spec).unwrap();
            for (a, e) in g.value(y).data().iter().zip(expect.data().iter()) {
                assert!((a - e).abs() < 1e-6, "case {case}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn conv2d_causal_output_ignores_future() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x = rng_tensor(&mut rng, &[1, 8, 4], -1.0, 1.0);
        let w = rng_tensor(&mut rng, &[2, 1, 3, 3], -0.5, 0.5);
        let b = rng_tensor(&mut rng, &[2], -0.1, 0.1);
        let spec = ConvSpec {
            dilation: (2, 1),
            pad: PadMode::CausalPast,
        };

        let mut x2 = x.clone();
        for f in 0..4 {
            x2.data_mut()[6 * 4 + f] += 5.0; // perturb time step 6
        }
        let mut g = Graph::<f64>::new();
        let (xi, wi, bi) = (g.input(x), g.input(w.clone()), g.input(b.clone()));
        let y = g.conv2d(xi, wi, bi, spec).unwrap();
        let mut g2 = Graph::<f64>::new();
        let (xi2, wi2, bi2) = (g2.input(x2), g2.input(w), g2.input(b));
        let y2 = g2.conv2d(xi2, wi2, bi2, spec).unwrap();
        for o in 0..2 {
            for t in 0..6 {
                for f in 0..4 {
                    let idx = (o * 8 + t) * 4 + f;
                    assert_eq!(g.value(y).data()[idx], g2.value(y2).data()[idx]);
                }
            }
        }
    }

    #[test]
    fn maxpool_shapes_and_constant() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_fn(&[96, 40, 80], |_| 0.3));
        let y = g.maxpool2d(x, (2, 3)).unwrap();
        assert_eq!(g.value(y).shape(), &[96, 20, 26]);
        assert!(g.value(y).data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn maxpool_routes_gradient_to_single_max() {
        let mut g = Graph::<f64>::new();
        let mut t = Tensor::zeros(&[1, 2, 3]);
        t.data_mut().copy_from_slice(&[0.1, 0.9, 0.3, 0.2, 0.4, 0.0]);
        let x = g.param(t);
        let y = g.maxpool2d(x, (2, 3)).unwrap();
        let loss = g.sum(y);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dense_identity_and_relu() {
        let mut g = Graph::<f64>::new();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let x = rng_tensor(&mut rng, &[3, 4], -1.0, 1.0);
        let xi = g.input(x.clone());
        let eye = Tensor::from_fn(&[4, 4], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 });
        let wi = g.input(eye);
        let bi = g.input(Tensor::zeros(&[4]));
        let y = g.dense(xi, wi, bi, Activation::None).unwrap();
        assert_eq!(g.value(y).data(), x.data());

        let y_relu = g.dense(xi, wi, bi, Activation::Relu).unwrap();
        for (a, &v) in g.value(y_relu).data().iter().zip(x.data()) {
            assert_eq!(*a, v.max(0.0));
        }
    }

    #[test]
    fn dense_matches_matmul_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let x = rng_tensor(&mut rng, &[4, 6], -1.0, 1.0);
        let w = rng_tensor(&mut rng, &[3, 6], -1.0, 1.0);
        let b = rng_tensor(&mut rng, &[3], -1.0, 1.0);
        let mut g = Graph::<f64>::new();
        let (xi, wi, bi) = (g.input(x.clone()), g.input(w.clone()), g.input(b.clone()));
        let y = g.dense(xi, wi, bi, Activation::None).unwrap();
        for t in 0..4 {
            for o in 0..3 {
                let mut acc = b.data()[o];
                for d in 0..6 {
                    acc += x.data()[t * 6 + d] * w.data()[o * 6 + d];
                }
                let got = g.value(y).data()[t * 3 + o];
                assert!((got - acc).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lstm_zero_weights_gives_zero_states() {
        let mut g = Graph::<f64>::new();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let x = g.input(rng_tensor(&mut rng, &[5, 3], -1.0, 1.0));
        let wx = g.input(Tensor::zeros(&[8, 3]));
        let wh = g.input(Tensor::zeros(&[8, 2]));
        let b = g.input(Tensor::zeros(&[8]));
        let y = g.lstm_seq(x, wx, wh, b).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_single_step_matches_hand_computation() {
        // one unit, one step: spell out the cell equations with scalars
        let (x0, wxi, wxf, wxg, wxo) = (0.7, 0.3, -0.2, 0.5, 0.1);
        let (bi_, bf, bg, bo) = (0.05, 1.0, -0.1, 0.2);
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = sig(wxi * x0 + bi_);
        let f = sig(wxf * x0 + bf);
        let gg = (wxg * x0 + bg).tanh();
        let o = sig(wxo * x0 + bo);
        let c = f * 0.0 + i * gg;
        let h = o * c.tanh();

        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::new(vec![1, 1], vec![x0]).unwrap());
        let wx = g.input(Tensor::new(vec![4, 1], vec![wxi, wxf, wxg, wxo]).unwrap());
        let wh = g.input(Tensor::from_fn(&[4, 1], |_| 0.33));
        let b = g.input(Tensor::new(vec![4], vec![bi_, bf, bg, bo]).unwrap());
        let y = g.lstm_seq(x, wx, wh, b).unwrap();
        assert!((g.value(y).data()[0] - h).abs() < 1e-12);
    }

    #[test]
    fn lstm_is_causal() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let x = rng_tensor(&mut rng, &[6, 3], -1.0, 1.0);
        let wx = rng_tensor(&mut rng, &[8, 3], -0.5, 0.5);
        let wh = rng_tensor(&mut rng, &[8, 2], -0.5, 0.5);
        let b = rng_tensor(&mut rng, &[8], -0.5, 0.5);
        let mut x2 = x.clone();
        x2.data_mut()[4 * 3] += 3.0; // perturb step 4

        let run = |xt: Tensor<f64>| {
            let mut g = Graph::<f64>::new();
            let (xi, a, c, d) = (
                g.input(xt),
                g.input(wx.clone()),
                g.input(wh.clone()),
                g.input(b.clone()),
            );
            let y = g.lstm_seq(xi, a, c, d).unwrap();
            g.value(y).data().to_vec()
        };
        let (ya, yb) = (run(x), run(x2));
        for t in 0..4 {
            for u in 0..2 {
                assert_eq!(ya[t * 2 + u], yb[t * 2 + u], "step {t} unit {u}");
            }
        }
        assert!(ya[4 * 2] != yb[4 * 2]);
    }

    #[test]
    fn bce_perfect_prediction_is_tiny() {
        let mut g = Graph::<f64>::new();
        let p = g.input(Tensor::new(vec![4], vec![0.0, 1.0, 1.0, 0.0]).unwrap());
        let t = g.input(Tensor::new(vec![4], vec![0.0, 1.0, 1.0, 0.0]).unwrap());
        let loss = g.bce_loss(p, t).unwrap();
        let v = g.value(loss).data()[0];
        assert!(v > 0.0 && v < 2e-7, "{v}");
    }

    #[test]
    fn bce_uniform_half_is_ln_two() {
        let mut g = Graph::<f64>::new();
        let p = g.input(Tensor::from_fn(&[10], |_| 0.5));
        let t = g.input(Tensor::from_fn(&[10], |i| (i % 2) as f64));
        let loss = g.bce_loss(p, t).unwrap();
        assert!((g.value(loss).data()[0] - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_is_symmetric() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let p = rng_tensor(&mut rng, &[12], 0.05, 0.95);
        let t = Tensor::from_fn(&[12], |i| ((i * 7) % 2) as f64);
        let flip = |x: &Tensor<f64>| x.map(|v| 1.0 - v);

        let mut g = Graph::<f64>::new();
        let (pi, ti) = (g.input(p.clone()), g.input(t.clone()));
        let l1 = g.bce_loss(pi, ti).unwrap();
        let (pf, tf) = (g.input(flip(&p)), g.input(flip(&t)));
        let l2 = g.bce_loss(pf, tf).unwrap();
        assert!((g.value(l1).data()[0] - g.value(l2).data()[0]).abs() < 1e-12);
    }

    #[test]
    fn backward_square_gives_two_x() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::scalar(3.0));
        let sq = g.mul(x, x).unwrap();
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn backward_skips_detached_inputs() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::scalar(2.0));
        let d = g.input(Tensor::scalar(5.0));
        let prod = g.mul(x, d).unwrap();
        let loss = g.sum(prod);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[5.0]);
        assert!(g.grad(d).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::zeros(&[2, 2]));
        assert!(matches!(
            g.backward(x),
            Err(AutodiffError::NonScalarLoss(_))
        ));
    }

    #[test]
    fn backward_accumulates_over_fanout() {
        // loss = sum(x * x) + sum(x * c): grad = 2x + c
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::new(vec![2], vec![1.0, -2.0]).unwrap());
        let c = g.input(Tensor::new(vec![2], vec![0.5, 0.25]).unwrap());
        let sq = g.mul(x, x).unwrap();
        let xc = g.mul(x, c).unwrap();
        let s1 = g.sum(sq);
        let s2 = g.sum(xc);
        let r1 = g.reshape(s1, &[1, 1]).unwrap();
        let r2 = g.reshape(s2, &[1, 1]).unwrap();
        let both = g.concat_cols(r1, r2).unwrap();
        let loss = g.sum(both);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2.5, -3.75]);
    }

    #[test]
    fn repeat_rows_and_subsample_shapes() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::from_fn(&[2, 3], |i| i as f64));
        let r = g.repeat_rows(x, 3).unwrap();
        assert_eq!(g.value(r).shape(), &[6, 3]);
        assert_eq!(&g.value(r).data()[0..3], &g.value(r).data()[6..9]);
        let loss = g.sum(r);
        g.backward(loss).unwrap();
        assert!(g.grad(x).unwrap().data().iter().all(|&v| v == 3.0));

        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::from_fn(&[1, 2, 7], |i| i as f64));
        let s = g.subsample_freq(x, 3).unwrap();
        assert_eq!(g.value(s).shape(), &[1, 2, 3]);
        assert_eq!(g.value(s).data(), &[0.0, 3.0, 6.0, 7.0, 10.0, 13.0]);
    }

    #[test]
    fn flatten_time_major_layout() {
        let mut g = Graph::<f64>::new();
        // x[c, t, f] with value c*100 + t*10 + f
        let x = g.param(Tensor::from_fn(&[2, 3, 4], |i| {
            let (c, rest) = (i / 12, i % 12);
            let (t, f) = (rest / 4, rest % 4);
            (c * 100 + t * 10 + f) as f64
        }));
        let y = g.flatten_time_major(x).unwrap();
        assert_eq!(g.value(y).shape(), &[3, 8]);
        // row t=1 should be [c0 f0..3, c1 f0..3] = [10..13, 110..113]
        assert_eq!(
            &g.value(y).data()[8..16],
            &[10.0, 11.0, 12.0, 13.0, 110.0, 111.0, 112.0, 113.0]
        );
        let loss = g.sum(y);
        g.backward(loss).unwrap();
        assert!(g.grad(x).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn forward_backward_is_deterministic() {
        let build = || {
            let mut rng = ChaCha20Rng::seed_from_u64(99);
            let mut g = Graph::<f32>::new();
            let x = g.input(Tensor::from_fn(&[1, 6, 8], |_| rng.gen_range(-1.0f32..1.0)));
            let w = g.param(Tensor::from_fn(&[2, 1, 3, 3], |_| {
                rng.gen_range(-0.5f32..0.5)
            }));
            let b = g.param(Tensor::zeros(&[2]));
            let y = g
                .conv2d(
                    x,
                    w,
                    b,
                    ConvSpec {
                        dilation: (2, 1),
                        pad: PadMode::CausalPast,
                    },
                )
                .unwrap();
            let act = g.relu(y);
            let loss = g.sum(act);
            g.backward(loss).unwrap();
            (
                g.value(loss).data().to_vec(),
                g.grad(w).unwrap().data().to_vec(),
            )
        };
        let (l1, g1) = build();
        let (l2, g2) = build();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut params = vec![Tensor::<f32>::from_fn(&[3], |i| i as f32)];
        let before = params[0].clone();
        let mut adam = AdamState::new(AdamConfig::default(), &params);
        let zero = Tensor::zeros(&[3]);
        adam.step(&mut params, &[Some(&zero)]).unwrap();
        assert_eq!(params[0], before);
        adam.step(&mut params, &[None]).unwrap();
        assert_eq!(params[0], before);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let cfg = AdamConfig::default();
        let mut params = vec![Tensor::<f64>::new(vec![2], vec![1.0, -1.0]).unwrap()];
        let g = Tensor::new(vec![2], vec![0.3, -0.02]).unwrap();
        let mut adam = AdamState::new(cfg, &params);
        adam.step(&mut params, &[Some(&g)]).unwrap();
        // bias-corrected first step: lr * g / (|g| + eps) ~= lr * sign(g)
        for (p0, (p, gv)) in [1.0, -1.0]
            .iter()
            .zip(params[0].data().iter().zip(g.data()))
        {
            let expect = p0 - cfg.lr * gv / (gv.abs() + cfg.eps);
            assert!((p - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_converges_on_quadratic_bowl() {
        let mut params = vec![Tensor::<f64>::new(vec![4], vec![0.1, -0.1, 0.05, 0.08]).unwrap()];
        let mut adam = AdamState::new(AdamConfig::with_lr(2e-4), &params);
        let mut loss = f64::INFINITY;
        for _ in 0..2000 {
            let g = params[0].map(|p| 2.0 * p);
            adam.step(&mut params, &[Some(&g)]).unwrap();
            loss = params[0].data().iter().map(|p| p * p).sum();
        }
        assert!(loss < 1e-6, "final loss {loss}");
    }

    // Small finite-difference spot checks; the acceptance suite runs the
    // full per-layer sweeps.
    fn fd_check(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64]) {
        let numeric = gradcheck::central_diff(&mut f, x, gradcheck::DEFAULT_H);
        let err = gradcheck::max_rel_err(analytic, &numeric, 1e-3);
        assert!(err < 1e-4, "max rel err {err}");
    }

    #[test]
    fn conv2d_gradients_match_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let x = rng_tensor(&mut rng, &[2, 4, 5], -1.0, 1.0);
        let w0 = rng_tensor(&mut rng, &[2, 2, 3, 3], -0.5, 0.5);
        let b0 = rng_tensor(&mut rng, &[2], -0.1, 0.1);
        let proj = rng_tensor(&mut rng, &[2, 4, 5], -1.0, 1.0);
        let spec = ConvSpec {
            dilation: (2, 1),
            pad: PadMode::CausalPast,
        };

        let n_w = w0.numel();
        let run = |flat: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
            let w = Tensor::new(vec![2, 2, 3, 3], flat[..n_w].to_vec()).unwrap();
            let b = Tensor::new(vec![2], flat[n_w..].to_vec()).unwrap();
            let mut g = Graph::<f64>::new();
            let (xi, wi, bi) = (g.input(x.clone()), g.param(w), g.param(b));
            let y = g.conv2d(xi, wi, bi, spec).unwrap();
            let pi = g.input(proj.clone());
            let weighted = g.mul(y, pi).unwrap();
            let loss = g.sum(weighted);
            g.backward(loss).unwrap();
            (
                g.value(loss).data()[0],
                g.grad(wi).unwrap().data().to_vec(),
                g.grad(bi).unwrap().data().to_vec(),
            )
        };

        let mut flat = w0.data().to_vec();
        flat.extend_from_slice(b0.data());
        let (_, dw, db) = run(&flat);
        let mut analytic = dw;
        analytic.extend(db);
        fd_check(|p| run(p).0, &flat, &analytic);
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let x = rng_tensor(&mut rng, &[4, 3], -1.0, 1.0);
        let wx0 = rng_tensor(&mut rng, &[8, 3], -0.5, 0.5);
        let wh0 = rng_tensor(&mut rng, &[8, 2], -0.5, 0.5);
        let b0 = rng_tensor(&mut rng, &[8], -0.3, 0.3);
        let proj = rng_tensor(&mut rng, &[4, 2], -1.0, 1.0);

        let (nx, nh) = (wx0.numel(), wh0.numel());
        let run = |flat: &[f64]| -> (f64, Vec<f64>) {
            let wx = Tensor::new(vec![8, 3], flat[..nx].to_vec()).unwrap();
            let wh = Tensor::new(vec![8, 2], flat[nx..nx + nh].to_vec()).unwrap();
            let b = Tensor::new(vec![8], flat[nx + nh..].to_vec()).unwrap();
            let mut g = Graph::<f64>::new();
            let (xi, wxi, whi, bi) = (g.input(x.clone()), g.param(wx), g.param(wh), g.param(b));
            let y = g.lstm_seq(xi, wxi, whi, bi).unwrap();
            let pi = g.input(proj.clone());
            let weighted = g.mul(y, pi).unwrap();
            let loss = g.sum(weighted);
            g.backward(loss).unwrap();
            let mut grads = g.grad(wxi).unwrap().data().to_vec();
            grads.extend_from_slice(g.grad(whi).unwrap().data());
            grads.extend_from_slice(g.grad(bi).unwrap().data());
            (g.value(loss).data()[0], grads)
        };

        let mut flat = wx0.data().to_vec();
        flat.extend_from_slice(wh0.data());
        flat.extend_from_slice(b0.data());
        let (_, analytic) = run(&flat);
        fd_check(|p| run(p).0, &flat, &analytic);
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let p0 = rng_tensor(&mut rng, &[6], 0.1, 0.9);
        let t = Tensor::from_fn(&[6], |i| (i % 2) as f64);
        let run = |flat: &[f64]| -> (f64, Vec<f64>) {
            let mut g = Graph::<f64>::new();
            let pi = g.param(Tensor::new(vec![6], flat.to_vec()).unwrap());
            let ti = g.input(t.clone());
            let loss = g.bce_loss(pi, ti).unwrap();
            g.backward(loss).unwrap();
            (g.value(loss).data()[0], g.grad(pi).unwrap().data().to_vec())
        };
        let flat = p0.data().to_vec();
        let (_, analytic) = run(&flat);
        fd_check(|p| run(p).0, &flat, &analytic);
    }
}
