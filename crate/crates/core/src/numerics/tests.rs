use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernels::*;
use super::*;

fn t32(dims: &[usize], data: &[f32]) -> Tensor<f32> {
    Tensor::new(dims, data.to_vec()).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct nested-loop cross-correlation.
fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, stride: usize, pad: usize) -> Vec<f64> {
    let (c, h, wd) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let (o, k) = (w.dims()[0], w.dims()[2]);
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = Vec::new();
    for oc in 0..o {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = b.data()[oc];
                for ic in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                s += x.data()[(ic * h + iy as usize) * wd + ix as usize]
                                    * w.data()[((oc * c + ic) * k + ky) * k + kx];
                            }
                        }
                    }
                }
                out.push(s);
            }
        }
    }
    out
}

#[test]
fn conv_identity_kernel_is_bit_exact() {
    let mut r = rng(1);
    let x = Tensor::<f32>::uniform([1, 4, 4], -1.0, 1.0, &mut r);
    let w = t32(&[1, 1, 1, 1], &[1.0]);
    let b = t32(&[1], &[0.0]);
    let y = conv2d(&x, &w, &b, 1, 0).unwrap();
    assert_eq!(y, x);
}

#[test]
fn conv_all_ones_two_by_two() {
    let x = t32(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
    let w = t32(&[1, 1, 2, 2], &[1.0; 4]);
    let b = t32(&[1], &[0.0]);
    let y = conv2d(&x, &w, &b, 1, 0).unwrap();
    let oracle = conv_oracle(&x.cast(), &w.cast(), &b.cast(), 1, 0);
    assert_eq!(oracle, vec![10.0]);
    assert_eq!(y.dims(), &[1, 1, 1]);
    assert_eq!(y.data(), &[10.0]);
}

#[test]
fn conv_zero_input_gives_bias() {
    let mut r = rng(2);
    let x = Tensor::<f32>::zeros([3, 5, 5]);
    let w = Tensor::<f32>::randn([2, 3, 3, 3], 1.0, &mut r);
    let b = t32(&[2], &[0.25, -1.5]);
    let y = conv2d(&x, &w, &b, 1, 1).unwrap();
    assert!(y.data()[..25].iter().all(|&v| v == 0.25));
    assert!(y.data()[25..].iter().all(|&v| v == -1.5));
}

#[test]
fn conv_channel_mismatch_is_error() {
    let x = Tensor::<f32>::zeros([2, 4, 4]);
    let w = Tensor::<f32>::zeros([1, 3, 3, 3]);
    let b = Tensor::<f32>::zeros([1]);
    assert!(matches!(conv2d(&x, &w, &b, 1, 1), Err(Error::Shape { .. })));
}

#[test]
fn conv_floor_stride_geometry() {
    let x = Tensor::<f32>::zeros([1, 6, 6]);
    let w = Tensor::<f32>::zeros([1, 1, 3, 3]);
    let b = Tensor::<f32>::zeros([1]);
    // (6 + 0 - 3) / 2 + 1 = 2
    assert_eq!(conv2d(&x, &w, &b, 2, 0).unwrap().dims(), &[1, 2, 2]);
}

proptest! {
    #[test]
    fn conv_matches_nested_loop_oracle(seed in 0u64..1000, stride in 1usize..3, pad in 0usize..3, k in prop::sample::select(vec![1usize, 3, 5])) {
        let mut r = rng(seed);
        let x = Tensor::<f64>::uniform([2, 7, 6], -1.0, 1.0, &mut r);
        let w = Tensor::<f64>::uniform([3, 2, k, k], -1.0, 1.0, &mut r);
        let b = Tensor::<f64>::uniform([3], -1.0, 1.0, &mut r);
        let y = conv2d(&x, &w, &b, stride, pad).unwrap();
        let oracle = conv_oracle(&x, &w, &b, stride, pad);
        for (a, e) in y.data().iter().zip(&oracle) {
            prop_assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(vals in prop::collection::vec(-50.0f32..50.0, 12)) {
        let x = Tensor::new([3, 4], vals).unwrap();
        for axis in 0..2 {
            let y = softmax(&x, axis).unwrap();
            let (outer, len) = if axis == 1 { (3, 4) } else { (4, 3) };
            for o in 0..outer {
                let s: f32 = (0..len)
                    .map(|j| if axis == 1 { y.data()[o * 4 + j] } else { y.data()[j * 4 + o] })
                    .sum();
                prop_assert!((s - 1.0).abs() <= 1e-6);
            }
            prop_assert!(y.data().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn pixel_shuffle_is_a_permutation(seed in 0u64..1000, r in 1usize..4, c in 1usize..3) {
        let mut g = rng(seed);
        let x = Tensor::<f32>::uniform([c * r * r, 3, 2], -1.0, 1.0, &mut g);
        let y = pixel_shuffle(&x, r).unwrap();
        let mut a = x.data().to_vec();
        let mut b = y.data().to_vec();
        a.sort_by(f32::total_cmp);
        b.sort_by(f32::total_cmp);
        prop_assert_eq!(a, b);
        prop_assert_eq!(pixel_unshuffle(&y, r).unwrap(), x);
    }
}

#[test]
fn linear_examples() {
    let x = t32(&[1, 2], &[1.0, 2.0]);
    let w = t32(&[2, 2], &[1.0, 1.0, 1.0, -1.0]);
    let zero = t32(&[2], &[0.0, 0.0]);
    assert_eq!(linear(&x, &w, &zero).unwrap().data(), &[3.0, -1.0]);

    let eye = t32(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
    assert_eq!(linear(&x, &eye, &zero).unwrap(), x);

    let b = t32(&[2], &[0.5, -2.0]);
    let z = t32(&[3, 2], &[0.0; 6]);
    assert_eq!(linear(&z, &w, &b).unwrap().data(), &[0.5, -2.0, 0.5, -2.0, 0.5, -2.0]);

    assert!(linear(&t32(&[1, 3], &[0.0; 3]), &w, &zero).is_err());
}

#[test]
fn layer_norm_examples() {
    let ones = t32(&[2], &[1.0, 1.0]);
    let zeros = t32(&[2], &[0.0, 0.0]);
    let c = t32(&[1, 2], &[3.0, 3.0]);
    assert_eq!(layer_norm(&c, &ones, &zeros, 1e-5).unwrap().data(), &[0.0, 0.0]);

    let x = Tensor::<f64>::new([1, 2], vec![0.0, 2.0]).unwrap();
    let y = layer_norm(&x, &ones.cast(), &zeros.cast(), 1e-12).unwrap();
    assert!((y.data()[0] + 1.0).abs() < 1e-9 && (y.data()[1] - 1.0).abs() < 1e-9);

    let beta = t32(&[2], &[0.3, -0.7]);
    let y = layer_norm(&t32(&[1, 2], &[5.0, -1.0]), &zeros, &beta, 1e-5).unwrap();
    assert_eq!(y.data(), &[0.3, -0.7]);
}

#[test]
fn softmax_examples() {
    let u = softmax(&t32(&[4], &[0.7; 4]), 0).unwrap();
    assert!(u.data().iter().all(|&p| (p - 0.25).abs() < 1e-7));

    let y = softmax(&Tensor::<f64>::new([2], vec![0.0, 2f64.ln()]).unwrap(), 0).unwrap();
    assert!((y.data()[0] - 1.0 / 3.0).abs() < 1e-12);
    assert!((y.data()[1] - 2.0 / 3.0).abs() < 1e-12);

    let x = Tensor::<f64>::new([3], vec![0.1, -2.0, 3.0]).unwrap();
    let a = softmax(&x, 0).unwrap();
    let b = softmax(&x.map(|v| v + 17.5), 0).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-12);
}

/// Φ(x) from the Maclaurin series of erf, independent of the kernel's erf.
fn phi_series(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let mut term = z;
    let mut sum = z;
    for n in 1..60 {
        term *= -z * z / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * sum)
}

#[test]
fn gelu_examples() {
    let x = Tensor::<f64>::new([3], vec![0.0, 1.0, 10.0]).unwrap();
    let y = gelu(&x);
    assert_eq!(y.data()[0], 0.0);
    let expected = 1.0 * phi_series(1.0);
    assert!((expected - 0.841345).abs() < 1e-6);
    assert!((y.data()[1] - expected).abs() < 1e-12);
    assert!((y.data()[2] - 10.0).abs() < 1e-6);
}

#[test]
fn attention_examples() {
    let mut r = rng(3);
    // single key
    let q = Tensor::<f64>::randn([3, 4], 1.0, &mut r);
    let k = Tensor::<f64>::randn([1, 4], 1.0, &mut r);
    let v = Tensor::<f64>::new([1, 2], vec![0.5, -1.25]).unwrap();
    let y = attention(&q, &k, &v, 2, None, None).unwrap();
    for row in y.data().chunks(2) {
        assert!((row[0] - 0.5).abs() < 1e-12 && (row[1] + 1.25).abs() < 1e-12);
    }

    // identical keys average the values
    let krow = Tensor::<f64>::randn([1, 4], 1.0, &mut r);
    let k3 = Tensor::new([3, 4], krow.data().repeat(3)).unwrap();
    let v3 = Tensor::<f64>::randn([3, 2], 1.0, &mut r);
    let y = attention(&q, &k3, &v3, 1, None, None).unwrap();
    for row in y.data().chunks(2) {
        for c in 0..2 {
            let mean = (v3.data()[c] + v3.data()[2 + c] + v3.data()[4 + c]) / 3.0;
            assert!((row[c] - mean).abs() < 1e-12);
        }
    }

    // logits [0, ln 2] with D = 1: q·k / sqrt(1)
    let q = Tensor::<f64>::new([1, 1], vec![1.0]).unwrap();
    let k = Tensor::<f64>::new([2, 1], vec![0.0, 2f64.ln()]).unwrap();
    let v = Tensor::<f64>::new([2, 2], vec![3.0, 0.0, 0.0, 6.0]).unwrap();
    let y = attention(&q, &k, &v, 1, None, None).unwrap();
    assert!((y.data()[0] - 1.0).abs() < 1e-12);
    assert!((y.data()[1] - 4.0).abs() < 1e-12);

    // mask removes a key entirely
    let mask = Tensor::<f64>::new([1, 2], vec![0.0, MASKED]).unwrap();
    let y = attention(&q, &k, &v, 1, None, Some(&mask)).unwrap();
    assert_eq!(y.data(), &[3.0, 0.0]);

    assert!(attention(&Tensor::<f64>::zeros([1, 3]), &Tensor::zeros([1, 3]), &Tensor::zeros([1, 2]), 2, None, None).is_err());
}

#[test]
fn pixel_shuffle_examples() {
    let x = t32(&[4, 1, 1], &[1.0, 2.0, 3.0, 4.0]);
    let y = pixel_shuffle(&x, 2).unwrap();
    assert_eq!(y.dims(), &[1, 2, 2]);
    assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);

    let mut r = rng(4);
    let x = Tensor::<f32>::randn([3, 2, 5], 1.0, &mut r);
    assert_eq!(pixel_shuffle(&x, 1).unwrap(), x);
    assert!(pixel_shuffle(&Tensor::<f32>::zeros([3, 2, 2]), 2).is_err());
}

#[test]
fn sum_of_squares_gradient() {
    let x = Tensor::<f64>::new([1], vec![3.0]).unwrap();
    let mut g = Graph::new();
    let v = g.input(x.clone());
    let sq = g.mul(v, v).unwrap();
    let s = g.sum(sq);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.wrt(v).unwrap().data(), &[6.0]);
    let err = grad_check(
        |g, x| {
            let sq = g.mul(x, x)?;
            Ok(g.sum(sq))
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-9, "{err}");
}

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn check_each_seed(name: &str, f: impl Fn(u64) -> f64) {
    for seed in [11, 22, 33] {
        let err = f(seed);
        assert!(err < TOL, "{name} seed {seed}: max relative error {err}");
    }
}

#[test]
fn grad_conv2d_all_inputs() {
    check_each_seed("conv2d", |seed| {
        let mut r = rng(seed);
        let x = Tensor::<f64>::randn([2, 5, 5], 1.0, &mut r);
        let w = Tensor::<f64>::randn([3, 2, 3, 3], 0.5, &mut r);
        let b = Tensor::<f64>::randn([3], 0.5, &mut r);
        let wt = Tensor::<f64>::randn([3, 3, 3], 1.0, &mut r);
        let weighting = move |g: &mut Graph<'_, f64>, y: Var| -> Result<Var> {
            let c = g.constant(wt.clone());
            g.mul(y, c)
        };
        let ex = grad_check(
            |g, x| {
                let (w, b) = (g.constant(w.clone()), g.constant(b.clone()));
                let y = g.conv2d(x, w, b, 2, 1)?;
                weighting(g, y)
            },
            &x,
            H,
        )
        .unwrap();
        let ew = grad_check(
            |g, w| {
                let (x, b) = (g.constant(x.clone()), g.constant(b.clone()));
                let y = g.conv2d(x, w, b, 2, 1)?;
                weighting(g, y)
            },
            &w,
            H,
        )
        .unwrap();
        let eb = grad_check(
            |g, b| {
                let (x, w) = (g.constant(x.clone()), g.constant(w.clone()));
                let y = g.conv2d(x, w, b, 2, 1)?;
                weighting(g, y)
            },
            &b,
            H,
        )
        .unwrap();
        ex.max(ew).max(eb)
    });
}

#[test]
fn grad_linear_all_inputs() {
    check_each_seed("linear", |seed| {
        let mut r = rng(seed);
        let x = Tensor::<f64>::randn([3, 4], 1.0, &mut r);
        let w = Tensor::<f64>::randn([5, 4], 1.0, &mut r);
        let b = Tensor::<f64>::randn([5], 1.0, &mut r);
        let wt = Tensor::<f64>::randn([3, 5], 1.0, &mut r);
        let run = |which: usize| {
            let (x, w, b, wt) = (x.clone(), w.clone(), b.clone(), wt.clone());
            let point = [&x, &w, &b][which].clone();
            grad_check(
                move |g, p| {
                    let mut vars = [None, None, None];
                    vars[which] = Some(p);
                    let x = vars[0].unwrap_or_else(|| g.constant(x.clone()));
                    let w = vars[1].unwrap_or_else(|| g.constant(w.clone()));
                    let b = vars[2].unwrap_or_else(|| g.constant(b.clone()));
                    let y = g.linear(x, w, b)?;
                    let c = g.constant(wt.clone());
                    g.mul(y, c)
                },
                &point,
                H,
            )
            .unwrap()
        };
        (0..3).map(run).fold(0.0, f64::max)
    });
}

#[test]
fn grad_layer_norm_all_inputs() {
    check_each_seed("layer_norm", |seed| {
        let mut r = rng(seed);
        let x = Tensor::<f64>::randn([3, 6], 1.0, &mut r);
        let gamma = Tensor::<f64>::randn([6], 1.0, &mut r);
        let beta = Tensor::<f64>::randn([6], 1.0, &mut r);
        let wt = Tensor::<f64>::randn([3, 6], 1.0, &mut r);
        let run = |which: usize| {
            let (x, gm, bt, wt) = (x.clone(), gamma.clone(), beta.clone(), wt.clone());
            let point = [&x, &gm, &bt][which].clone();
            grad_check(
                move |g, p| {
                    let mut vars = [None, None, None];
                    vars[which] = Some(p);
                    let x = vars[0].unwrap_or_else(|| g.constant(x.clone()));
                    let gm = vars[1].unwrap_or_else(|| g.constant(gm.clone()));
                    let bt = vars[2].unwrap_or_else(|| g.constant(bt.clone()));
                    let y = g.layer_norm(x, gm, bt, 1e-5)?;
                    let c = g.constant(wt.clone());
                    g.mul(y, c)
                },
                &point,
                H,
            )
            .unwrap()
        };
        (0..3).map(run).fold(0.0, f64::max)
    });
}

#[test]
fn grad_pointwise_and_softmax() {
    check_each_seed("softmax/gelu/relu", |seed| {
        let mut r = rng(seed);
        let x = Tensor::<f64>::randn([3, 5], 1.5, &mut r);
        let wt = Tensor::<f64>::randn([3, 5], 1.0, &mut r);
        let mut worst = 0.0f64;
        for axis in 0..2 {
            let wt = wt.clone();
            worst = worst.max(
                grad_check(
                    move |g, x| {
                        let y = g.softmax(x, axis)?;
                        let c = g.constant(wt.clone());
                        g.mul(y, c)
                    },
                    &x,
                    H,
                )
                .unwrap(),
            );
        }
        let wt2 = wt.clone();
        worst = worst.max(
            grad_check(
                move |g, x| {
                    let y = g.gelu(x);
                    let c = g.constant(wt2.clone());
                    g.mul(y, c)
                },
                &x,
                H,
            )
            .unwrap(),
        );
        // keep the relu probe away from its kink
        let xr = x.map(|v| if v.abs() < 0.05 { v + 0.2 } else { v });
        worst.max(
            grad_check(
                move |g, x| {
                    let y = g.relu(x);
                    let c = g.constant(wt.clone());
                    g.mul(y, c)
                },
                &xr,
                H,
            )
            .unwrap(),
        )
    });
}

#[test]
fn grad_attention_with_bias() {
    check_each_seed("attention", |seed| {
        let mut r = rng(seed);
        let q = Tensor::<f64>::randn([4, 6], 1.0, &mut r);
        let k = Tensor::<f64>::randn([5, 6], 1.0, &mut r);
        let v = Tensor::<f64>::randn([5, 4], 1.0, &mut r);
        let bias = Tensor::<f64>::randn([2, 4, 5], 1.0, &mut r);
        let mut mask = Tensor::<f64>::zeros([4, 5]);
        mask.data_mut()[3] = MASKED;
        let wt = Tensor::<f64>::randn([4, 4], 1.0, &mut r);
        let run = |which: usize| {
            let (q, k, v, bias, mask, wt) = (q.clone(), k.clone(), v.clone(), bias.clone(), mask.clone(), wt.clone());
            let point = [&q, &k, &v, &bias][which].clone();
            grad_check(
                move |g, p| {
                    let mut vars = [None, None, None, None];
                    vars[which] = Some(p);
                    let q = vars[0].unwrap_or_else(|| g.constant(q.clone()));
                    let k = vars[1].unwrap_or_else(|| g.constant(k.clone()));
                    let v = vars[2].unwrap_or_else(|| g.constant(v.clone()));
                    let b = vars[3].unwrap_or_else(|| g.constant(bias.clone()));
                    let y = g.attention(q, k, v, 2, Some(b), Some(&mask))?;
                    let c = g.constant(wt.clone());
                    g.mul(y, c)
                },
                &point,
                H,
            )
            .unwrap()
        };
        (0..4).map(run).fold(0.0, f64::max)
    });
}

#[test]
fn grad_attention_block_four_tokens() {
    check_each_seed("attention block", |seed| {
        let mut r = rng(seed);
        let x = Tensor::<f64>::randn([4, 8], 1.0, &mut r);
        let ws: Vec<_> = (0..3).map(|_| Tensor::<f64>::randn([8, 8], 0.4, &mut r)).collect();
        let bs: Vec<_> = (0..3).map(|_| Tensor::<f64>::randn([8], 0.1, &mut r)).collect();
        grad_check(
            |g, x| {
                let mut proj = Vec::new();
                for (w, b) in ws.iter().zip(&bs) {
                    let (w, b) = (g.constant(w.clone()), g.constant(b.clone()));
                    proj.push(g.linear(x, w, b)?);
                }
                g.attention(proj[0], proj[1], proj[2], 2, None, None)
            },
            &x,
            H,
        )
        .unwrap()
    });
}

#[test]
fn grad_composed_conv_gelu_layer_norm() {
    check_each_seed("conv→gelu→layer_norm", |seed| {
        let mut r = rng(seed);
        let x = Tensor::<f64>::randn([1, 6, 6], 1.0, &mut r);
        let w = Tensor::<f64>::randn([2, 1, 3, 3], 0.5, &mut r);
        let b = Tensor::<f64>::randn([2], 0.1, &mut r);
        let gm = Tensor::<f64>::randn([6], 1.0, &mut r);
        let bt = Tensor::<f64>::randn([6], 1.0, &mut r);
        let wt = Tensor::<f64>::randn([2, 6, 6], 1.0, &mut r);
        grad_check(
            |g, x| {
                let (w, b) = (g.constant(w.clone()), g.constant(b.clone()));
                let y = g.conv2d(x, w, b, 1, 1)?;
                let y = g.gelu(y);
                let (gm, bt) = (g.constant(gm.clone()), g.constant(bt.clone()));
                let y = g.layer_norm(y, gm, bt, 1e-5)?;
                let c = g.constant(wt.clone());
                g.mul(y, c)
            },
            &x,
            H,
        )
        .unwrap()
    });
}

#[test]
fn grad_structural_ops() {
    check_each_seed("structural", |seed| {
        let mut r = rng(seed);
        let x = Tensor::<f64>::randn([8, 2, 3], 1.0, &mut r);
        let wt = Tensor::<f64>::randn([6, 4], 1.0, &mut r);
        let target = Tensor::<f64>::randn([2, 4, 6], 1.0, &mut r);
        let e1 = grad_check(
            |g, x| {
                let y = g.pixel_shuffle(x, 2)?; // [2,4,6]
                let t = g.constant(target.clone());
                let l = g.l1(y, t)?;
                let y = g.reshape(y, [8, 6])?;
                let y = g.transpose(y)?; // [6,8]
                let a = g.slice_rows(y, 1, 3)?;
                let b = g.gather_rows(y, vec![5, 0, 5])?;
                let y = g.concat_rows(&[a, b])?; // [6,8]
                let y = g.gather_flat(y, (0..24).map(|i| (i * 7) % 48).collect(), vec![6, 4])?;
                let c = g.constant(wt.clone());
                let y = g.mul(y, c)?;
                let y = g.scale(y, 0.5);
                let s = g.mean(y);
                g.add(s, l)
            },
            &x,
            H,
        )
        .unwrap();
        e1
    });
}

#[test]
fn backward_is_deterministic() {
    let run = || {
        let mut r = rng(5);
        let x = Tensor::<f32>::randn([3, 16, 16], 1.0, &mut r);
        let w = Tensor::<f32>::randn([8, 3, 5, 5], 0.2, &mut r);
        let b = Tensor::<f32>::randn([8], 0.2, &mut r);
        let mut g = Graph::new();
        let xv = g.input(x);
        let (wv, bv) = (g.param(&w, 0), g.param(&b, 1));
        let y = g.conv2d(xv, wv, bv, 1, 2).unwrap();
        let y = g.gelu(y);
        let s = g.mean(y);
        let grads = g.backward(s).unwrap();
        let mut out: Vec<u32> = grads.wrt(xv).unwrap().data().iter().map(|v| v.to_bits()).collect();
        for (_, t) in grads.tagged() {
            out.extend(t.data().iter().map(|v| v.to_bits()));
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn tagged_gradients_cover_only_used_params() {
    let a = Tensor::<f32>::full([2], 1.0);
    let b = Tensor::<f32>::full([2], 2.0);
    let mut g = Graph::new();
    let av = g.param(&a, 7);
    let _unused = g.param(&b, 9);
    let s = g.sum(av);
    let grads = g.backward(s).unwrap();
    let tags: Vec<usize> = grads.tagged().map(|(t, _)| t).collect();
    assert_eq!(tags, vec![7]);
}

#[test]
fn backward_requires_scalar() {
    let mut g = Graph::<f32>::new();
    let x = g.input(Tensor::zeros([2]));
    assert!(g.backward(x).is_err());
}
