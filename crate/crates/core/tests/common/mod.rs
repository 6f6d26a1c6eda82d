//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use gmob_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(r: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.random_range(lo..hi)).collect()).unwrap()
}

/// Direct cross-correlation with zero "same" padding: every output sample
/// is written out as its own sum over kernel taps and channels.
pub fn naive_conv2d(x: &Tensor, k: &Tensor, stride: usize) -> Tensor {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (kh, kw, m) = (k.shape()[0], k.shape()[1], k.shape()[3]);
    let (ph, pw) = ((kh / 2) as i64, (kw / 2) as i64);
    let ho = (h - 1) / stride + 1;
    let wo = (w - 1) / stride + 1;
    let mut out = Tensor::zeros(&[ho, wo, m]).unwrap();
    for oy in 0..ho {
        for ox in 0..wo {
            for om in 0..m {
                let mut acc = 0.0;
                for dy in 0..kh {
                    for dx in 0..kw {
                        let iy = (oy * stride) as i64 + dy as i64 - ph;
                        let ix = (ox * stride) as i64 + dx as i64 - pw;
                        if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                            continue;
                        }
                        for ic in 0..c {
                            acc += x.get(&[iy as usize, ix as usize, ic]) * k.get(&[dy, dx, ic, om]);
                        }
                    }
                }
                out.set(&[oy, ox, om], acc);
            }
        }
    }
    out
}

/// Per-channel spatial filter then 1×1 mix, both by direct summation.
pub fn naive_depthwise_separable(x: &Tensor, dw: &Tensor, pw: &Tensor, stride: usize) -> Tensor {
    let c = x.shape()[2];
    let m = pw.shape()[3];
    let k = dw.shape()[0];
    let mut mids = Vec::new();
    for ch in 0..c {
        let xc = Tensor::from_fn(&[x.shape()[0], x.shape()[1], 1], |i| x.get(&[i[0], i[1], ch])).unwrap();
        let kc = Tensor::from_fn(&[k, k, 1, 1], |i| dw.get(&[i[0], i[1], ch])).unwrap();
        mids.push(naive_conv2d(&xc, &kc, stride));
    }
    let (ho, wo) = (mids[0].shape()[0], mids[0].shape()[1]);
    Tensor::from_fn(&[ho, wo, m], |i| {
        (0..c)
            .map(|ch| mids[ch].get(&[i[0], i[1], 0]) * pw.get(&[0, 0, ch, i[2]]))
            .sum()
    })
    .unwrap()
}

/// `col ⊗ row` as a full k×k×C×M kernel.
pub fn outer_kernel(col: &Tensor, row: &Tensor) -> Tensor {
    let (k, c, m) = (col.shape()[0], col.shape()[2], col.shape()[3]);
    Tensor::from_fn(&[k, k, c, m], |i| {
        col.get(&[i[0], 0, i[2], i[3]]) * row.get(&[0, i[1], i[2], i[3]])
    })
    .unwrap()
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

pub fn max_rel_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = b.data().iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    a.max_abs_diff(b) / scale
}
