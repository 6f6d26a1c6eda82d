use serde::{Deserialize, Serialize};

use crate::cbam::MlpActivation;
use crate::cost::ConvKind;
use crate::error::{Error, Result};
use crate::gabor::BankSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StemSpec {
    /// Fixed Gabor filter bank; not trainable.
    Gabor {
        bank: BankSpec,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        cbam: bool,
    },
    /// Ordinary trainable convolution (baseline stem).
    Full2d {
        out_channels: usize,
        #[serde(default = "three")]
        ksize: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        cbam: bool,
    },
}

impl StemSpec {
    pub fn out_channels(&self) -> usize {
        match self {
            StemSpec::Gabor { bank, .. } => bank.n_filters(),
            StemSpec::Full2d { out_channels, .. } => *out_channels,
        }
    }

    pub fn ksize(&self) -> usize {
        match self {
            StemSpec::Gabor { bank, .. } => bank.ksize,
            StemSpec::Full2d { ksize, .. } => *ksize,
        }
    }

    pub fn stride(&self) -> usize {
        match self {
            StemSpec::Gabor { stride, .. } | StemSpec::Full2d { stride, .. } => *stride,
        }
    }

    pub fn cbam(&self) -> bool {
        match self {
            StemSpec::Gabor { cbam, .. } | StemSpec::Full2d { cbam, .. } => *cbam,
        }
    }

    pub fn conv_kind(&self) -> ConvKind {
        match self {
            StemSpec::Gabor { .. } => ConvKind::GaborFixed,
            StemSpec::Full2d { .. } => ConvKind::Full2d,
        }
    }
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub conv_kind: ConvKind,
    pub out_channels: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub cbam: bool,
    #[serde(default = "three")]
    pub ksize: usize,
}

impl BlockSpec {
    pub fn new(conv_kind: ConvKind, out_channels: usize, stride: usize, cbam: bool) -> Self {
        BlockSpec {
            conv_kind,
            out_channels,
            stride,
            cbam,
            ksize: 3,
        }
    }
}

/// Fields left out of a config file take their desk-scale G-MobNet values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub input_h: usize,
    pub input_w: usize,
    pub stem: StemSpec,
    pub blocks: Vec<BlockSpec>,
    #[serde(default = "default_dropout")]
    pub dropout_p: f64,
    pub n_classes: usize,
    #[serde(default = "default_reduction")]
    pub cbam_reduction: usize,
    #[serde(default)]
    pub cbam_activation: MlpActivation,
    #[serde(default = "default_eps")]
    pub bn_eps: f64,
}

fn default_dropout() -> f64 {
    0.4
}

fn default_reduction() -> usize {
    8
}

fn default_eps() -> f64 {
    1e-3
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::gmobnet_desk()
    }
}

impl NetConfig {
    /// Desk-scale G-MobNet: 32×32 grayscale input, 16-filter Gabor stem,
    /// three spatially separable lower blocks, seven depthwise separable
    /// upper blocks. 19 layers.
    pub fn gmobnet_desk() -> Self {
        use ConvKind::*;
        let b = |k, c, s| BlockSpec::new(k, c, s, true);
        NetConfig {
            input_h: 32,
            input_w: 32,
            stem: StemSpec::Gabor {
                bank: BankSpec::default(),
                stride: 1,
                cbam: true,
            },
            blocks: vec![
                b(SpatialSeparable, 16, 1),
                b(SpatialSeparable, 32, 2),
                b(SpatialSeparable, 32, 1),
                b(DepthwiseSeparable, 64, 2),
                b(DepthwiseSeparable, 64, 1),
                b(DepthwiseSeparable, 128, 2),
                // the run of repeated same-shape blocks, shortened to two
                b(DepthwiseSeparable, 128, 1),
                b(DepthwiseSeparable, 128, 1),
                b(DepthwiseSeparable, 256, 2),
                b(DepthwiseSeparable, 256, 1),
            ],
            dropout_p: 0.4,
            n_classes: 10,
            cbam_reduction: 8,
            cbam_activation: MlpActivation::Swish,
            bn_eps: 1e-3,
        }
    }

    /// All-depthwise MobileNet-style baseline at the same widths as
    /// [`NetConfig::gmobnet_desk`]: full 3×3 stem, thirteen depthwise
    /// separable blocks, no attention. 28 layers. Used for comparison only.
    pub fn mobilenet_baseline_desk() -> Self {
        use ConvKind::DepthwiseSeparable as D;
        let b = |c, s| BlockSpec::new(D, c, s, false);
        let mut blocks = vec![b(16, 1), b(32, 2), b(32, 1), b(64, 2), b(64, 1), b(128, 2)];
        blocks.extend(std::iter::repeat_n(b(128, 1), 5));
        blocks.extend([b(256, 2), b(256, 1)]);
        NetConfig {
            input_h: 32,
            input_w: 32,
            stem: StemSpec::Full2d {
                out_channels: 16,
                ksize: 3,
                stride: 1,
                cbam: false,
            },
            blocks,
            dropout_p: 0.4,
            n_classes: 10,
            cbam_reduction: 8,
            cbam_activation: MlpActivation::Swish,
            bn_eps: 1e-3,
        }
    }

    /// Full-resolution layout (224×224, MobileNet widths). The widths are
    /// approximate: the published parameter count is not reproduced.
    pub fn gmobnet_paper_scale() -> Self {
        use ConvKind::*;
        let b = |k, c, s| BlockSpec::new(k, c, s, true);
        NetConfig {
            input_h: 224,
            input_w: 224,
            stem: StemSpec::Gabor {
                bank: BankSpec {
                    n_orientations: 16,
                    ..BankSpec::default()
                },
                stride: 2,
                cbam: true,
            },
            blocks: vec![
                b(SpatialSeparable, 64, 1),
                b(SpatialSeparable, 128, 2),
                b(SpatialSeparable, 128, 1),
                b(DepthwiseSeparable, 256, 2),
                b(DepthwiseSeparable, 256, 1),
                b(DepthwiseSeparable, 512, 2),
                b(DepthwiseSeparable, 512, 1),
                b(DepthwiseSeparable, 512, 1),
                b(DepthwiseSeparable, 1024, 2),
                b(DepthwiseSeparable, 1024, 1),
            ],
            dropout_p: 0.4,
            n_classes: 10,
            cbam_reduction: 8,
            cbam_activation: MlpActivation::Swish,
            bn_eps: 1e-3,
        }
    }

    /// Field-level validation; errors name the offending field path.
    pub fn validate(&self) -> Result<()> {
        if !(self.dropout_p >= 0.0 && self.dropout_p < 1.0) {
            return Err(Error::invalid(
                "dropout_p",
                format!("must lie in [0, 1), got {}", self.dropout_p),
            ));
        }
        if self.input_h == 0 || self.input_w == 0 {
            return Err(Error::invalid("input_h/input_w", "must be positive"));
        }
        if self.n_classes == 0 {
            return Err(Error::invalid("n_classes", "must be ≥ 1"));
        }
        if !(self.bn_eps >= 0.0) {
            return Err(Error::invalid("bn_eps", "must be ≥ 0"));
        }
        if self.stem.out_channels() == 0 {
            return Err(Error::invalid("stem.out_channels", "must be ≥ 1"));
        }
        if self.stem.stride() == 0 {
            return Err(Error::invalid("stem.stride", "must be ≥ 1"));
        }
        let k = self.stem.ksize();
        if k.is_multiple_of(2) {
            return Err(Error::invalid("stem.ksize", format!("must be odd, got {k}")));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.out_channels == 0 {
                return Err(Error::invalid(format!("blocks[{i}].out_channels"), "must be ≥ 1"));
            }
            if b.stride == 0 {
                return Err(Error::invalid(format!("blocks[{i}].stride"), "must be ≥ 1"));
            }
            if b.ksize % 2 == 0 {
                return Err(Error::invalid(
                    format!("blocks[{i}].ksize"),
                    format!("must be odd, got {}", b.ksize),
                ));
            }
            if matches!(b.conv_kind, ConvKind::GaborFixed) {
                return Err(Error::invalid(
                    format!("blocks[{i}].conv_kind"),
                    "gabor_fixed is only valid as the stem",
                ));
            }
        }
        Ok(())
    }
}
