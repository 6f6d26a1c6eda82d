//! Convolution and activation primitives.
//!
//! Convolutions use the cross-correlation convention (no kernel flip) on
//! H×W×C feature maps. `Same` padding pads zeros symmetrically by `k / 2`,
//! which is why only odd kernel extents are accepted.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Same,
    Valid,
}

/// Output extent and leading pad along one axis.
pub fn output_extent(n: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::invalid("stride", "must be ≥ 1"));
    }
    if k.is_multiple_of(2) {
        return Err(Error::dim(format!(
            "kernel extent {k} is even; only odd kernels are supported"
        )));
    }
    match padding {
        Padding::Same => Ok(((n - 1) / stride + 1, k / 2)),
        Padding::Valid => {
            if n < k {
                return Err(Error::dim(format!(
                    "input extent {n} smaller than kernel {k} with valid padding"
                )));
            }
            Ok(((n - k) / stride + 1, 0))
        }
    }
}

fn kernel4(t: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [kh, kw, c, m] => Ok((kh, kw, c, m)),
        [kh, kw, c] => Ok((kh, kw, c, 1)),
        _ => Err(Error::dim(format!(
            "{what}: expected k×k×C×M kernel, got {:?}",
            t.shape()
        ))),
    }
}

#[inline]
fn tap(pos: usize, k: usize, pad: usize, n: usize) -> Option<usize> {
    let p = pos + k;
    if p < pad || p - pad >= n {
        None
    } else {
        Some(p - pad)
    }
}

pub fn conv2d(input: &Tensor, kernels: &Tensor, stride: usize, padding: Padding) -> Result<Tensor> {
    conv2d_with(Exec::auto(), input, kernels, stride, padding)
}

pub fn conv2d_with(exec: Exec, input: &Tensor, kernels: &Tensor, stride: usize, padding: Padding) -> Result<Tensor> {
    let (h, w, c) = input.hwc()?;
    let (kh, kw, kc, m) = kernel4(kernels, "conv2d")?;
    if kc != c {
        return Err(Error::dim(format!(
            "conv2d: kernel expects {kc} input channels, input has {c}"
        )));
    }
    let (ho, pad_y) = output_extent(h, kh, stride, padding)?;
    let (wo, pad_x) = output_extent(w, kw, stride, padding)?;
    let x = input.data();
    let k = kernels.data();
    let mut out = vec![0.0; ho * wo * m];
    exec.fill_chunks(&mut out, wo * m, |oy, row| {
        for ky in 0..kh {
            let Some(iy) = tap(oy * stride, ky, pad_y, h) else {
                continue;
            };
            for ox in 0..wo {
                let acc = &mut row[ox * m..(ox + 1) * m];
                for kx in 0..kw {
                    let Some(ix) = tap(ox * stride, kx, pad_x, w) else {
                        continue;
                    };
                    let px = &x[(iy * w + ix) * c..(iy * w + ix + 1) * c];
                    let kbase = (ky * kw + kx) * c * m;
                    for (ci, &v) in px.iter().enumerate() {
                        let kr = &k[kbase + ci * m..kbase + (ci + 1) * m];
                        for (a, &kv) in acc.iter_mut().zip(kr) {
                            *a += v * kv;
                        }
                    }
                }
            }
        }
    });
    Tensor::new(&[ho, wo, m], out)
}

/// One-pass spatially separable convolution: a k×1 column kernel followed by
/// a 1×k row kernel for every (input, output) channel pair. Equivalent to
/// [`conv2d`] with the per-pair outer-product kernel `col ⊗ row`.
///
/// `col` has shape k×1×C×M, `row` has shape 1×k×C×M.
pub fn spatial_separable_conv(
    input: &Tensor,
    col: &Tensor,
    row: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    spatial_separable_conv_with(Exec::auto(), input, col, row, stride, padding)
}

pub fn spatial_separable_conv_with(
    exec: Exec,
    input: &Tensor,
    col: &Tensor,
    row: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let (h, w, c) = input.hwc()?;
    let (kh, one_a, cc, m) = kernel4(col, "spatial_separable_conv col")?;
    let (one_b, kw, rc, rm) = kernel4(row, "spatial_separable_conv row")?;
    if one_a != 1 || one_b != 1 {
        return Err(Error::dim(format!(
            "spatial_separable_conv: expected k×1 column and 1×k row kernels, got {:?} and {:?}",
            col.shape(),
            row.shape()
        )));
    }
    if kh != kw {
        return Err(Error::dim(format!(
            "spatial_separable_conv: column length {kh} differs from row length {kw}"
        )));
    }
    if cc != rc || m != rm {
        return Err(Error::dim(format!(
            "spatial_separable_conv: column kernel is {cc}→{m}, row kernel is {rc}→{rm}"
        )));
    }
    if cc != c {
        return Err(Error::dim(format!(
            "spatial_separable_conv: kernels expect {cc} input channels, input has {c}"
        )));
    }
    let k = kh;
    let (ho, pad_y) = output_extent(h, k, stride, padding)?;
    let (wo, pad_x) = output_extent(w, k, stride, padding)?;
    let x = input.data();
    let cw = col.data();
    let rw = row.data();
    let mut out = vec![0.0; ho * wo * m];
    exec.fill_chunks(&mut out, wo * m, |oy, orow| {
        let mut colbuf = vec![0.0; w];
        for ci in 0..c {
            for mi in 0..m {
                // column pass for this output row
                colbuf.iter_mut().for_each(|v| *v = 0.0);
                for ky in 0..k {
                    let Some(iy) = tap(oy * stride, ky, pad_y, h) else {
                        continue;
                    };
                    let wv = cw[(ky * c + ci) * m + mi];
                    for (ix, cb) in colbuf.iter_mut().enumerate() {
                        *cb += wv * x[(iy * w + ix) * c + ci];
                    }
                }
                // row pass
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for kx in 0..k {
                        let Some(ix) = tap(ox * stride, kx, pad_x, w) else {
                            continue;
                        };
                        acc += rw[(kx * c + ci) * m + mi] * colbuf[ix];
                    }
                    orow[ox * m + mi] += acc;
                }
            }
        }
    });
    Tensor::new(&[ho, wo, m], out)
}

/// Two-stage depthwise separable convolution: a per-channel k×k spatial
/// filter (`dw`, shape k×k×C) followed by a 1×1 channel mix (`pw`, shape
/// 1×1×C×M).
pub fn depthwise_separable_conv(
    input: &Tensor,
    dw: &Tensor,
    pw: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let mid = depthwise_conv_with(Exec::auto(), input, dw, stride, padding)?;
    pointwise_conv_with(Exec::auto(), &mid, pw)
}

pub fn depthwise_separable_conv_with(
    exec: Exec,
    input: &Tensor,
    dw: &Tensor,
    pw: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let mid = depthwise_conv_with(exec, input, dw, stride, padding)?;
    pointwise_conv_with(exec, &mid, pw)
}

/// Stage one of the depthwise separable convolution.
pub fn depthwise_conv_with(exec: Exec, input: &Tensor, dw: &Tensor, stride: usize, padding: Padding) -> Result<Tensor> {
    let (h, w, c) = input.hwc()?;
    let (kh, kw, dc, mult) = kernel4(dw, "depthwise")?;
    if mult != 1 {
        return Err(Error::dim(format!(
            "depthwise: channel multiplier must be 1, got {mult}"
        )));
    }
    if dc != c {
        return Err(Error::dim(format!(
            "depthwise: kernel has {dc} channels, input has {c}"
        )));
    }
    let (ho, pad_y) = output_extent(h, kh, stride, padding)?;
    let (wo, pad_x) = output_extent(w, kw, stride, padding)?;
    let x = input.data();
    let k = dw.data();
    let mut out = vec![0.0; ho * wo * c];
    exec.fill_chunks(&mut out, wo * c, |oy, row| {
        for ky in 0..kh {
            let Some(iy) = tap(oy * stride, ky, pad_y, h) else {
                continue;
            };
            for ox in 0..wo {
                let acc = &mut row[ox * c..(ox + 1) * c];
                for kx in 0..kw {
                    let Some(ix) = tap(ox * stride, kx, pad_x, w) else {
                        continue;
                    };
                    let px = &x[(iy * w + ix) * c..(iy * w + ix + 1) * c];
                    let kr = &k[(ky * kw + kx) * c..(ky * kw + kx + 1) * c];
                    for ((a, &v), &kv) in acc.iter_mut().zip(px).zip(kr) {
                        *a += v * kv;
                    }
                }
            }
        }
    });
    Tensor::new(&[ho, wo, c], out)
}

/// Stage two: 1×1 channel mix.
pub fn pointwise_conv_with(exec: Exec, input: &Tensor, pw: &Tensor) -> Result<Tensor> {
    let (h, w, c) = input.hwc()?;
    let (one_a, one_b, pc, m) = kernel4(pw, "pointwise")?;
    if one_a != 1 || one_b != 1 {
        return Err(Error::dim(format!(
            "pointwise: expected 1×1×C×M kernel, got {:?}",
            pw.shape()
        )));
    }
    if pc != c {
        return Err(Error::dim(format!(
            "pointwise: kernel expects {pc} channels, input has {c}"
        )));
    }
    let x = input.data();
    let k = pw.data();
    let mut out = vec![0.0; h * w * m];
    exec.fill_chunks(&mut out, w * m, |y, row| {
        for xi in 0..w {
            let px = &x[(y * w + xi) * c..(y * w + xi + 1) * c];
            let acc = &mut row[xi * m..(xi + 1) * m];
            for (ci, &v) in px.iter().enumerate() {
                for (a, &kv) in acc.iter_mut().zip(&k[ci * m..(ci + 1) * m]) {
                    *a += v * kv;
                }
            }
        }
    });
    Tensor::new(&[h, w, m], out)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn swish_tensor(t: &Tensor) -> Result<Tensor> {
    if !t.all_finite() {
        return Err(Error::NonFinite("swish input".into()));
    }
    Ok(t.map(swish))
}

/// Per-channel batch normalisation with frozen statistics. Channels are the
/// last axis of `t`.
pub fn batchnorm_inference(
    t: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    mean: &[f64],
    var: &[f64],
    eps: f64,
) -> Result<Tensor> {
    let c = *t.shape().last().expect("tensor rank ≥ 1");
    for (name, v) in [("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)] {
        if v.len() != c {
            return Err(Error::dim(format!(
                "batchnorm {name} has {} entries, tensor has {c} channels",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("batchnorm {name}")));
        }
    }
    if !t.all_finite() || !eps.is_finite() {
        return Err(Error::NonFinite("batchnorm input".into()));
    }
    if let Some(i) = var.iter().position(|&v| v < 0.0) {
        return Err(Error::invalid("var", format!("channel {i} variance {} < 0", var[i])));
    }
    let scale: Vec<f64> = gamma.iter().zip(var).map(|(g, v)| g / (v + eps).sqrt()).collect();
    let mut out = t.clone();
    for px in out.data_mut().chunks_mut(c) {
        for (i, v) in px.iter_mut().enumerate() {
            *v = (*v - mean[i]) * scale[i] + beta[i];
        }
    }
    if !out.all_finite() {
        return Err(Error::NonFinite("batchnorm output (var + eps = 0?)".into()));
    }
    Ok(out)
}

pub fn global_avg_pool(t: &Tensor) -> Result<Vec<f64>> {
    let (h, w, c) = t.hwc()?;
    let mut acc = vec![0.0; c];
    for px in t.data().chunks(c) {
        for (a, v) in acc.iter_mut().zip(px) {
            *a += v;
        }
    }
    let n = (h * w) as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

pub fn global_max_pool(t: &Tensor) -> Result<Vec<f64>> {
    let (_, _, c) = t.hwc()?;
    let mut acc = vec![f64::NEG_INFINITY; c];
    for px in t.data().chunks(c) {
        for (a, &v) in acc.iter_mut().zip(px) {
            *a = a.max(v);
        }
    }
    Ok(acc)
}

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("softmax of empty vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}
