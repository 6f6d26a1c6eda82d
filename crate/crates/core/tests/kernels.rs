mod common;

use std::f64::consts::PI;

use common::*;
use gmob_core::cbam::{apply_cbam, channel_attention, CbamWeights};
use gmob_core::gabor::{build_filter_bank, gabor_kernel, gabor_value, BankSpec, GaborParams, GaborPart};
use gmob_core::ops::*;
use gmob_core::{Exec, Tensor};
use proptest::prelude::*;

#[test]
fn conv2d_matches_direct_sum() {
    let mut r = rng(1);
    for (h, w, c, m, k, s) in [
        (7, 9, 3, 4, 3, 1),
        (8, 8, 2, 5, 5, 2),
        (5, 6, 1, 1, 1, 1),
        (9, 4, 4, 2, 3, 3),
    ] {
        let x = random_tensor(&mut r, &[h, w, c], -1.0, 1.0);
        let kern = random_tensor(&mut r, &[k, k, c, m], -1.0, 1.0);
        let got = conv2d(&x, &kern, s, Padding::Same).unwrap();
        let want = naive_conv2d(&x, &kern, s);
        assert!(got.max_abs_diff(&want) < 1e-12, "{h}x{w}x{c} k{k} s{s}");
    }
}

#[test]
fn depthwise_separable_matches_direct_sum() {
    let mut r = rng(2);
    for (h, w, c, m, s) in [(6, 6, 3, 5, 1), (9, 7, 4, 2, 2)] {
        let x = random_tensor(&mut r, &[h, w, c], -1.0, 1.0);
        let dw = random_tensor(&mut r, &[3, 3, c], -1.0, 1.0);
        let pw = random_tensor(&mut r, &[1, 1, c, m], -1.0, 1.0);
        let got = depthwise_separable_conv(&x, &dw, &pw, s, Padding::Same).unwrap();
        assert!(got.max_abs_diff(&naive_depthwise_separable(&x, &dw, &pw, s)) < 1e-12);
    }
}

#[test]
fn execution_policies_agree_bitwise() {
    let mut r = rng(3);
    let x = random_tensor(&mut r, &[17, 13, 3], -1.0, 1.0);
    let k = random_tensor(&mut r, &[3, 3, 3, 8], -1.0, 1.0);
    let col = random_tensor(&mut r, &[3, 1, 3, 8], -1.0, 1.0);
    let row = random_tensor(&mut r, &[1, 3, 3, 8], -1.0, 1.0);
    let dw = random_tensor(&mut r, &[3, 3, 3], -1.0, 1.0);
    let pw = random_tensor(&mut r, &[1, 1, 3, 8], -1.0, 1.0);
    for s in [1, 2] {
        let a = conv2d_with(Exec::Sequential, &x, &k, s, Padding::Same).unwrap();
        let b = conv2d_with(Exec::Parallel, &x, &k, s, Padding::Same).unwrap();
        assert_eq!(a, b);
        let a = spatial_separable_conv_with(Exec::Sequential, &x, &col, &row, s, Padding::Same).unwrap();
        let b = spatial_separable_conv_with(Exec::Parallel, &x, &col, &row, s, Padding::Same).unwrap();
        assert_eq!(a, b);
        let a = depthwise_separable_conv_with(Exec::Sequential, &x, &dw, &pw, s, Padding::Same).unwrap();
        let b = depthwise_separable_conv_with(Exec::Parallel, &x, &dw, &pw, s, Padding::Same).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn gabor_entries_match_scalar_formula() {
    for &theta in &[0.0, PI / 8.0, 1.0, PI, 2.0 * PI] {
        for &phi in &[-PI, 0.0, 0.4, PI] {
            let p = GaborParams {
                lambda: 3.0,
                theta,
                phi,
                sigma: 1.7,
                gamma: 0.6,
                ksize: 7,
            };
            for part in [GaborPart::Real, GaborPart::Imag] {
                let k = gabor_kernel(&p, part).unwrap();
                for row in 0..7 {
                    for col in 0..7 {
                        let (x, y) = (col as f64 - 3.0, row as f64 - 3.0);
                        let xr = x * theta.cos() + y * theta.sin();
                        let yr = -x * theta.sin() + y * theta.cos();
                        let env = (-(xr * xr + 0.36 * yr * yr) / (2.0 * 1.7 * 1.7)).exp();
                        let a = 2.0 * PI * xr / 3.0 + phi;
                        let want = env * if part == GaborPart::Real { a.cos() } else { a.sin() };
                        assert!((k.get(&[row, col]) - want).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn stem_bank_is_plain_conv() {
    let bank = build_filter_bank(&BankSpec::default()).unwrap();
    assert_eq!(bank.shape(), &[3, 3, 1, 16]);
    let mut r = rng(4);
    let img = random_tensor(&mut r, &[12, 12, 1], 0.0, 1.0);
    let got = conv2d(&img, &bank, 1, Padding::Same).unwrap();
    assert!(got.max_abs_diff(&naive_conv2d(&img, &bank, 1)) < 1e-12);
    // filter j of the bank is the single kernel for (θ_j, λ_j)
    for (j, p) in BankSpec::default().params().iter().enumerate() {
        let k = gabor_kernel(p, GaborPart::Real).unwrap();
        for row in 0..3 {
            for col in 0..3 {
                assert_eq!(bank.get(&[row, col, 0, j]), k.get(&[row, col]));
            }
        }
    }
}

fn params() -> impl Strategy<Value = GaborParams> {
    (
        2.0..10.0f64,
        0.0..PI,
        0.3..4.0f64,
        0.05..1.0f64,
        prop::sample::select(vec![3usize, 5, 7, 9]),
    )
        .prop_map(|(lambda, theta, sigma, gamma, ksize)| GaborParams {
            lambda,
            theta,
            phi: 0.0,
            sigma,
            gamma,
            ksize,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_shift_invariant(v in prop::collection::vec(-30.0..30.0f64, 1..12), c in -100.0..100.0f64) {
        let a = softmax(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_kernels_factor(seed in any::<u64>(), c in 1usize..4, m in 1usize..4, stride in 1usize..3) {
        let mut r = rng(seed);
        let x = random_tensor(&mut r, &[8, 8, c], -1.0, 1.0);
        let col = random_tensor(&mut r, &[3, 1, c, m], -1.0, 1.0);
        let row = random_tensor(&mut r, &[1, 3, c, m], -1.0, 1.0);
        let sep = spatial_separable_conv(&x, &col, &row, stride, Padding::Same).unwrap();
        let full = conv2d(&x, &outer_kernel(&col, &row), stride, Padding::Same).unwrap();
        prop_assert!(max_rel_diff(&sep, &full) < 1e-9);
    }

    #[test]
    fn cbam_never_amplifies(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_tensor(&mut r, &[6, 5, 8], -3.0, 3.0);
        let mut w = CbamWeights::zeros(8, 4).unwrap();
        for t in [&mut w.w1, &mut w.b1, &mut w.w2, &mut w.b2, &mut w.sam_kernel] {
            *t = random_tensor(&mut r, t.shape(), -1.0, 1.0);
        }
        let out = apply_cbam(&f, &w).unwrap();
        for (o, i) in out.data().iter().zip(f.data()) {
            prop_assert!(o.abs() <= i.abs());
        }
        // channel attention only sees pooled statistics
        let mut perm = f.data().to_vec();
        let c = 8;
        let sites = perm.len() / c;
        for s in 0..sites / 2 {
            for ch in 0..c {
                perm.swap(s * c + ch, (sites - 1 - s) * c + ch);
            }
        }
        let g = Tensor::new(&[6, 5, 8], perm).unwrap();
        let a = channel_attention(&f, &w).unwrap();
        let b = channel_attention(&g, &w).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gabor_symmetries(p in params()) {
        let re = gabor_kernel(&p, GaborPart::Real).unwrap();
        let im = gabor_kernel(&p, GaborPart::Imag).unwrap();
        let k = p.ksize;
        for row in 0..k {
            for col in 0..k {
                let (rr, cc) = (k - 1 - row, k - 1 - col);
                prop_assert!((re.get(&[row, col]) - re.get(&[rr, cc])).abs() <= 1e-12);
                prop_assert!((im.get(&[row, col]) + im.get(&[rr, cc])).abs() <= 1e-12);
            }
        }
        prop_assert!(im.data().iter().sum::<f64>().abs() <= 1e-12);

        // a quarter turn of θ is a quarter turn of the sampling grid
        let turned = gabor_kernel(&GaborParams { theta: p.theta + PI / 2.0, ..p }, GaborPart::Real).unwrap();
        for row in 0..k {
            for col in 0..k {
                prop_assert!((turned.get(&[row, col]) - re.get(&[k - 1 - col, row])).abs() <= 1e-12);
            }
        }
        let r = (k / 2) as f64;
        prop_assert!((re.get(&[0, 0]) - gabor_value(&p, GaborPart::Real, -r, -r)).abs() <= 1e-15);
    }
}
