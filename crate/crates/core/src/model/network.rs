use std::collections::HashMap;

use crate::cbam::{apply_cbam, CbamWeights};
use crate::cost::{count_operations, ConvKind, LayerShape};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gabor::build_filter_bank;
use crate::ops::{
    batchnorm_inference, conv2d_with, depthwise_conv_with, output_extent, pointwise_conv_with, softmax,
    spatial_separable_conv_with, swish_tensor, Padding,
};
use crate::tensor::Tensor;

use super::config::{NetConfig, StemSpec};
use super::weights::WeightStore;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Conv(ConvKind),
    Dense,
}

/// One convolution block (or the classifier head) of the built graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: String,
    pub kind: StageKind,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub ksize: usize,
    pub stride: usize,
    pub cbam: bool,
}

impl Stage {
    /// Layers contributed under the one-layer-per-convolution-stage convention.
    pub fn layers(&self) -> u32 {
        match self.kind {
            StageKind::Conv(k) => k.stages(),
            StageKind::Dense => 1,
        }
    }

    pub fn layer_shape(&self) -> Option<LayerShape> {
        match self.kind {
            StageKind::Conv(kind) => Some(LayerShape {
                in_h: self.in_shape[0],
                in_w: self.in_shape[1],
                in_c: self.in_shape[2],
                kernel_h: self.ksize,
                kernel_w: self.ksize,
                out_c: self.out_shape[2],
                stride: self.stride,
                conv_kind: kind,
            }),
            StageKind::Dense => None,
        }
    }
}

/// Built layer graph: stem → blocks → global average pool → dropout →
/// dense → softmax. Immutable once built.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: NetConfig,
    pub stages: Vec<Stage>,
    gabor_bank: Option<Tensor>,
}

fn bn_params(prefix: &str, c: usize, out: &mut Vec<ParamSpec>) {
    for (n, trainable) in [("gamma", true), ("beta", true), ("mean", false), ("var", false)] {
        out.push(ParamSpec {
            name: format!("{prefix}.{n}"),
            shape: vec![c],
            trainable,
        });
    }
}

pub fn build_network(cfg: &NetConfig) -> Result<Network> {
    cfg.validate()?;
    let mut stages = Vec::with_capacity(cfg.blocks.len() + 2);
    let stem_k = cfg.stem.ksize();
    let (h, _) = output_extent(cfg.input_h, stem_k, cfg.stem.stride(), Padding::Same)?;
    let (w, _) = output_extent(cfg.input_w, stem_k, cfg.stem.stride(), Padding::Same)?;
    let mut shape = [h, w, cfg.stem.out_channels()];
    stages.push(Stage {
        name: "stem".into(),
        kind: StageKind::Conv(cfg.stem.conv_kind()),
        in_shape: [cfg.input_h, cfg.input_w, 1],
        out_shape: shape,
        ksize: stem_k,
        stride: cfg.stem.stride(),
        cbam: cfg.stem.cbam(),
    });
    for (i, b) in cfg.blocks.iter().enumerate() {
        let (h, _) = output_extent(shape[0], b.ksize, b.stride, Padding::Same)?;
        let (w, _) = output_extent(shape[1], b.ksize, b.stride, Padding::Same)?;
        let out = [h, w, b.out_channels];
        stages.push(Stage {
            name: format!("block{:02}", i + 1),
            kind: StageKind::Conv(b.conv_kind),
            in_shape: shape,
            out_shape: out,
            ksize: b.ksize,
            stride: b.stride,
            cbam: b.cbam,
        });
        shape = out;
    }
    stages.push(Stage {
        name: "fc".into(),
        kind: StageKind::Dense,
        in_shape: [1, 1, shape[2]],
        out_shape: [1, 1, cfg.n_classes],
        ksize: 1,
        stride: 1,
        cbam: false,
    });
    for s in &stages {
        if s.cbam {
            CbamWeights::hidden(s.out_shape[2], cfg.cbam_reduction).map_err(|_| {
                Error::invalid(
                    format!("{}.cbam", s.name),
                    format!(
                        "cbam_reduction {} does not divide {} channels",
                        cfg.cbam_reduction, s.out_shape[2]
                    ),
                )
            })?;
        }
    }
    let gabor_bank = match &cfg.stem {
        StemSpec::Gabor { bank, .. } => Some(build_filter_bank(bank)?),
        StemSpec::Full2d { .. } => None,
    };
    Ok(Network {
        config: cfg.clone(),
        stages,
        gabor_bank,
    })
}

impl Network {
    pub fn layer_count(&self) -> u32 {
        self.stages.iter().map(Stage::layers).sum()
    }

    pub fn gabor_bank(&self) -> Option<&Tensor> {
        self.gabor_bank.as_ref()
    }

    /// Every stored parameter, in manifest order.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        let p = |name: String, shape: Vec<usize>| ParamSpec {
            name,
            shape,
            trainable: true,
        };
        for s in &self.stages {
            let [_, _, c] = s.in_shape;
            let m = s.out_shape[2];
            let k = s.ksize;
            let n = &s.name;
            match s.kind {
                StageKind::Conv(ConvKind::GaborFixed) => bn_params(&format!("{n}.bn"), m, &mut out),
                StageKind::Conv(ConvKind::Full2d) => {
                    out.push(p(format!("{n}.conv.weight"), vec![k, k, c, m]));
                    bn_params(&format!("{n}.bn"), m, &mut out);
                }
                StageKind::Conv(ConvKind::SpatialSeparable) => {
                    out.push(p(format!("{n}.col.weight"), vec![k, 1, c, m]));
                    out.push(p(format!("{n}.row.weight"), vec![1, k, c, m]));
                    bn_params(&format!("{n}.bn"), m, &mut out);
                }
                StageKind::Conv(ConvKind::DepthwiseSeparable) => {
                    out.push(p(format!("{n}.dw.weight"), vec![k, k, c]));
                    bn_params(&format!("{n}.dw_bn"), c, &mut out);
                    out.push(p(format!("{n}.pw.weight"), vec![1, 1, c, m]));
                    bn_params(&format!("{n}.pw_bn"), m, &mut out);
                }
                StageKind::Dense => {
                    out.push(p(format!("{n}.weight"), vec![c, m]));
                    out.push(p(format!("{n}.bias"), vec![m]));
                }
            }
            if s.cbam {
                let shapes =
                    CbamWeights::param_shapes(m, self.config.cbam_reduction).expect("reduction checked at build time");
                for (pn, shape) in shapes {
                    out.push(p(format!("{n}.cbam.{pn}"), shape));
                }
            }
        }
        out
    }

    /// Op count of each stage, in graph order. Convolutions go through
    /// [`count_operations`]; the dense head counts `in × out`.
    pub fn stage_ops(&self) -> Result<Vec<u64>> {
        self.stages
            .iter()
            .map(|s| match s.layer_shape() {
                Some(l) => count_operations(&l).map(|c| c.total_ops),
                None => Ok((s.in_shape[2] * s.out_shape[2]) as u64),
            })
            .collect()
    }
}

/// A network with its weights promoted to 64-bit and checked against the
/// graph. Immutable; inference is callable from many threads.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub net: Network,
    params: HashMap<String, Tensor>,
    cbam: HashMap<String, CbamWeights>,
}

impl LoadedModel {
    pub fn new(net: &Network, store: &WeightStore) -> Result<Self> {
        let mut params = HashMap::new();
        for spec in net.param_specs() {
            let t = store.tensor(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::WeightShape {
                    name: spec.name,
                    expected: spec.shape,
                    found: t.shape().to_vec(),
                });
            }
            params.insert(spec.name, t);
        }
        let mut cbam = HashMap::new();
        for s in net.stages.iter().filter(|s| s.cbam) {
            let g = |n: &str| params[&format!("{}.cbam.{n}", s.name)].clone();
            cbam.insert(
                s.name.clone(),
                CbamWeights {
                    reduction: net.config.cbam_reduction,
                    activation: net.config.cbam_activation,
                    w1: g("mlp1.weight"),
                    b1: g("mlp1.bias"),
                    w2: g("mlp2.weight"),
                    b2: g("mlp2.bias"),
                    sam_kernel: g("sam.weight"),
                },
            );
        }
        Ok(LoadedModel {
            net: net.clone(),
            params,
            cbam,
        })
    }

    pub fn param(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::MissingWeight(name.to_string()))
    }

    fn bn_swish(&self, x: &Tensor, prefix: &str) -> Result<Tensor> {
        let g = |n: &str| self.param(&format!("{prefix}.{n}")).map(|t| t.data());
        let y = batchnorm_inference(
            x,
            g("gamma")?,
            g("beta")?,
            g("mean")?,
            g("var")?,
            self.net.config.bn_eps,
        )?;
        swish_tensor(&y)
    }

    /// Class probabilities for one H×W×1 image with pixels in [0, 1].
    pub fn predict(&self, image: &Tensor) -> Result<Vec<f64>> {
        self.predict_with(Exec::auto(), image)
    }

    pub fn predict_with(&self, exec: Exec, image: &Tensor) -> Result<Vec<f64>> {
        let trace = self.trace_with(exec, image)?;
        Ok(trace.last().expect("non-empty trace").1.data().to_vec())
    }

    /// Batch inference; images are independent, so the batch fans out.
    pub fn predict_batch(&self, exec: Exec, images: &[Tensor]) -> Result<Vec<Vec<f64>>> {
        exec.map(images, |img| self.predict_with(Exec::Sequential, img))
            .into_iter()
            .collect()
    }

    /// Named intermediate activations, in evaluation order; the last entry
    /// is `probs`.
    pub fn trace(&self, image: &Tensor) -> Result<Vec<(String, Tensor)>> {
        self.trace_with(Exec::auto(), image)
    }

    pub fn trace_with(&self, exec: Exec, image: &Tensor) -> Result<Vec<(String, Tensor)>> {
        let cfg = &self.net.config;
        let shape = image.shape();
        if !(shape == [cfg.input_h, cfg.input_w, 1] || shape == [cfg.input_h, cfg.input_w]) {
            return Err(Error::dim(format!(
                "image shape {:?} does not match network input {}×{}×1",
                shape, cfg.input_h, cfg.input_w
            )));
        }
        if image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("image", "pixel values must lie in [0, 1]"));
        }
        let mut x = image.clone().reshape(&[cfg.input_h, cfg.input_w, 1])?;
        let mut trace = Vec::new();
        for s in &self.net.stages {
            let n = &s.name;
            x = match s.kind {
                StageKind::Conv(ConvKind::GaborFixed) => {
                    let bank = self.net.gabor_bank.as_ref().expect("gabor stem has a bank");
                    let y = conv2d_with(exec, &x, bank, s.stride, Padding::Same)?;
                    trace.push((format!("{n}.conv"), y.clone()));
                    self.bn_swish(&y, &format!("{n}.bn"))?
                }
                StageKind::Conv(ConvKind::Full2d) => {
                    let y = conv2d_with(
                        exec,
                        &x,
                        self.param(&format!("{n}.conv.weight"))?,
                        s.stride,
                        Padding::Same,
                    )?;
                    trace.push((format!("{n}.conv"), y.clone()));
                    self.bn_swish(&y, &format!("{n}.bn"))?
                }
                StageKind::Conv(ConvKind::SpatialSeparable) => {
                    let y = spatial_separable_conv_with(
                        exec,
                        &x,
                        self.param(&format!("{n}.col.weight"))?,
                        self.param(&format!("{n}.row.weight"))?,
                        s.stride,
                        Padding::Same,
                    )?;
                    trace.push((format!("{n}.conv"), y.clone()));
                    self.bn_swish(&y, &format!("{n}.bn"))?
                }
                StageKind::Conv(ConvKind::DepthwiseSeparable) => {
                    let y = depthwise_conv_with(
                        exec,
                        &x,
                        self.param(&format!("{n}.dw.weight"))?,
                        s.stride,
                        Padding::Same,
                    )?;
                    trace.push((format!("{n}.dw"), y.clone()));
                    let y = self.bn_swish(&y, &format!("{n}.dw_bn"))?;
                    let y = pointwise_conv_with(exec, &y, self.param(&format!("{n}.pw.weight"))?)?;
                    trace.push((format!("{n}.pw"), y.clone()));
                    self.bn_swish(&y, &format!("{n}.pw_bn"))?
                }
                StageKind::Dense => {
                    // global average pool; dropout is the identity at inference
                    let pooled = crate::ops::global_avg_pool(&x)?;
                    trace.push(("pool".into(), Tensor::new(&[pooled.len()], pooled.clone())?));
                    let w = self.param(&format!("{n}.weight"))?;
                    let b = self.param(&format!("{n}.bias"))?;
                    let m = b.len();
                    let logits: Vec<f64> = (0..m)
                        .map(|j| {
                            b.data()[j]
                                + pooled
                                    .iter()
                                    .enumerate()
                                    .map(|(i, v)| v * w.data()[i * m + j])
                                    .sum::<f64>()
                        })
                        .collect();
                    trace.push(("logits".into(), Tensor::new(&[m], logits.clone())?));
                    let probs = softmax(&logits)?;
                    trace.push(("probs".into(), Tensor::new(&[m], probs)?));
                    return Ok(trace);
                }
            };
            trace.push((format!("{n}.act"), x.clone()));
            if s.cbam {
                x = apply_cbam(&x, &self.cbam[n])?;
                trace.push((format!("{n}.cbam"), x.clone()));
            }
        }
        unreachable!("graph always ends with the dense head")
    }
}

/// One-shot inference: bind `weights` to `net` and classify `image`.
pub fn forward(net: &Network, image: &Tensor, weights: &WeightStore) -> Result<Vec<f64>> {
    LoadedModel::new(net, weights)?.predict(image)
}
