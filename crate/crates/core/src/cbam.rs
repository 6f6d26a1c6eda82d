//! Channel and spatial attention gates, applied channel-first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{conv2d, global_avg_pool, global_max_pool, sigmoid, swish, Padding};
use crate::tensor::Tensor;

pub const SAM_KERNEL: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MlpActivation {
    #[default]
    Swish,
    Relu,
}

impl MlpActivation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            MlpActivation::Swish => swish(x),
            MlpActivation::Relu => x.max(0.0),
        }
    }
}

/// Weights of one attention block over `channels` channels.
///
/// The shared channel MLP maps C → C/r → C; `w1` is C×(C/r), `w2` is
/// (C/r)×C, stored row-major as input × output. The spatial kernel is
/// 7×7×2×1 over the (channel-mean, channel-max) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CbamWeights {
    pub reduction: usize,
    pub activation: MlpActivation,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub sam_kernel: Tensor,
}

impl CbamWeights {
    pub fn hidden(channels: usize, reduction: usize) -> Result<usize> {
        if reduction == 0 || !channels.is_multiple_of(reduction) {
            return Err(Error::invalid(
                "reduction",
                format!("reduction ratio {reduction} does not divide {channels} channels"),
            ));
        }
        Ok(channels / reduction)
    }

    /// Parameter shapes in (name, shape) order.
    pub fn param_shapes(channels: usize, reduction: usize) -> Result<Vec<(&'static str, Vec<usize>)>> {
        let h = Self::hidden(channels, reduction)?;
        Ok(vec![
            ("mlp1.weight", vec![channels, h]),
            ("mlp1.bias", vec![h]),
            ("mlp2.weight", vec![h, channels]),
            ("mlp2.bias", vec![channels]),
            ("sam.weight", vec![SAM_KERNEL, SAM_KERNEL, 2, 1]),
        ])
    }

    pub fn zeros(channels: usize, reduction: usize) -> Result<Self> {
        let shapes = Self::param_shapes(channels, reduction)?;
        let t = |i: usize| Tensor::zeros(&shapes[i].1);
        Ok(CbamWeights {
            reduction,
            activation: MlpActivation::default(),
            w1: t(0)?,
            b1: t(1)?,
            w2: t(2)?,
            b2: t(3)?,
            sam_kernel: t(4)?,
        })
    }

    pub fn channels(&self) -> usize {
        self.b2.len()
    }

    pub fn check(&self, channels: usize) -> Result<()> {
        let shapes = Self::param_shapes(channels, self.reduction)?;
        let have = [&self.w1, &self.b1, &self.w2, &self.b2, &self.sam_kernel];
        for ((name, shape), t) in shapes.iter().zip(have) {
            if t.shape() != shape.as_slice() {
                return Err(Error::WeightShape {
                    name: format!("cbam.{name}"),
                    expected: shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
            if !t.all_finite() {
                return Err(Error::NonFinite(format!("cbam.{name}")));
            }
        }
        Ok(())
    }

    fn mlp(&self, x: &[f64]) -> Vec<f64> {
        let c = x.len();
        let h = self.b1.len();
        let w1 = self.w1.data();
        let w2 = self.w2.data();
        let hidden: Vec<f64> = (0..h)
            .map(|j| {
                let s = self.b1.data()[j] + (0..c).map(|i| x[i] * w1[i * h + j]).sum::<f64>();
                self.activation.apply(s)
            })
            .collect();
        (0..c)
            .map(|k| self.b2.data()[k] + (0..h).map(|j| hidden[j] * w2[j * c + k]).sum::<f64>())
            .collect()
    }
}

/// Per-channel gate in (0, 1): `σ(MLP(avgpool f) + MLP(maxpool f))`.
pub fn channel_attention(f: &Tensor, w: &CbamWeights) -> Result<Vec<f64>> {
    let (_, _, c) = f.hwc()?;
    w.check(c)?;
    let avg = w.mlp(&global_avg_pool(f)?);
    let max = w.mlp(&global_max_pool(f)?);
    Ok(avg.iter().zip(&max).map(|(a, m)| sigmoid(a + m)).collect())
}

/// Per-site gate in (0, 1), shape H×W×1:
/// `σ(conv7×7([mean_c f, max_c f]))` with same padding.
pub fn spatial_attention(f: &Tensor, w: &CbamWeights) -> Result<Tensor> {
    let (h, wd, c) = f.hwc()?;
    w.check(c)?;
    let mut pooled = Vec::with_capacity(h * wd * 2);
    for px in f.data().chunks(c) {
        let mean = px.iter().sum::<f64>() / c as f64;
        let max = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        pooled.push(mean);
        pooled.push(max);
    }
    let pooled = Tensor::new(&[h, wd, 2], pooled)?;
    let logits = conv2d(&pooled, &w.sam_kernel, 1, Padding::Same)?;
    Ok(logits.map(sigmoid))
}

/// Channel gate, then spatial gate computed on the channel-refined map.
pub fn apply_cbam(f: &Tensor, w: &CbamWeights) -> Result<Tensor> {
    let (_, _, c) = f.hwc()?;
    let cw = channel_attention(f, w)?;
    let mut refined = f.clone();
    for px in refined.data_mut().chunks_mut(c) {
        for (v, g) in px.iter_mut().zip(&cw) {
            *v *= g;
        }
    }
    let sw = spatial_attention(&refined, w)?;
    for (px, &g) in refined.data_mut().chunks_mut(c).zip(sw.data()) {
        px.iter_mut().for_each(|v| *v *= g);
    }
    Ok(refined)
}
