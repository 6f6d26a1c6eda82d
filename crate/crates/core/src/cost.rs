//! Operation accounting for convolution layers and the training-cost
//! arithmetic over externally measured GPU figures.
//!
//! Counts are multiply-accumulate kernel positions per output site, the unit
//! in which the reference table quotes 27 / 6 / 9 for a 3×3 kernel over three
//! channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{output_extent, Padding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvKind {
    Full2d,
    SpatialSeparable,
    DepthwiseSeparable,
    GaborFixed,
}

impl ConvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConvKind::Full2d => "full2d",
            ConvKind::SpatialSeparable => "spatial_separable",
            ConvKind::DepthwiseSeparable => "depthwise_separable",
            ConvKind::GaborFixed => "gabor_fixed",
        }
    }

    /// Sequential stages; also the number of layers the kind contributes.
    pub fn stages(self) -> u32 {
        match self {
            ConvKind::DepthwiseSeparable => 2,
            _ => 1,
        }
    }
}

impl std::str::FromStr for ConvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full2d" => Ok(ConvKind::Full2d),
            "spatial_separable" => Ok(ConvKind::SpatialSeparable),
            "depthwise_separable" => Ok(ConvKind::DepthwiseSeparable),
            "gabor_fixed" => Ok(ConvKind::GaborFixed),
            other => Err(Error::invalid("conv_kind", format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub out_c: usize,
    pub stride: usize,
    pub conv_kind: ConvKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub per_site_ops: u64,
    pub total_ops: u64,
    pub stages: u32,
}

/// Count kernel positions for one layer (same padding).
///
/// * full2d: `kh·kw·C` per site (one kernel spans all input channels)
/// * spatial separable: `kh·1 + 1·kw` per site
/// * depthwise separable: `kh·kw` per site, the channel-wise kernel
/// * gabor fixed: `kh·kw` per site
///
/// `total_ops = per_site_ops × output sites × out_c`.
pub fn count_operations(layer: &LayerShape) -> Result<OpCount> {
    let l = layer;
    if [l.in_h, l.in_w, l.in_c, l.kernel_h, l.kernel_w, l.out_c, l.stride].contains(&0) {
        return Err(Error::invalid("layer", format!("all extents must be positive: {l:?}")));
    }
    let (ho, _) = output_extent(l.in_h, l.kernel_h, l.stride, Padding::Same)?;
    let (wo, _) = output_extent(l.in_w, l.kernel_w, l.stride, Padding::Same)?;
    let (kh, kw, c) = (l.kernel_h as u64, l.kernel_w as u64, l.in_c as u64);
    let per_site_ops = match l.conv_kind {
        ConvKind::Full2d => kh * kw * c,
        ConvKind::SpatialSeparable => kh + kw,
        // channel-wise kernel positions; the 1×1 mix is not counted
        ConvKind::DepthwiseSeparable => kh * kw,
        ConvKind::GaborFixed => kh * kw,
    };
    let sites = (ho * wo) as u64;
    Ok(OpCount {
        per_site_ops,
        total_ops: per_site_ops * sites * l.out_c as u64,
        stages: l.conv_kind.stages(),
    })
}

/// Training compute cost from supplied measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostMeasurements {
    pub runtime: f64,
    pub gpuload: f64,
    pub gpumem: f64,
    pub data_cores: f64,
    pub windows_process: f64,
    pub training_epochs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompCost {
    pub cost: f64,
    pub comp_cost: f64,
}

/// `cost = runtime·gpuload·gpumem·data_cores`,
/// `comp_cost = (cost − windows_process) / training_epochs`.
pub fn comp_cost(m: &CostMeasurements) -> Result<CompCost> {
    for (name, v) in [
        ("runtime", m.runtime),
        ("gpuload", m.gpuload),
        ("gpumem", m.gpumem),
        ("data_cores", m.data_cores),
        ("windows_process", m.windows_process),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
    }
    if m.training_epochs == 0 {
        return Err(Error::invalid("training_epochs", "must be ≥ 1"));
    }
    let cost = m.runtime * m.gpuload * m.gpumem * m.data_cores;
    Ok(CompCost {
        cost,
        comp_cost: (cost - m.windows_process) / m.training_epochs as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(kind: ConvKind) -> LayerShape {
        LayerShape {
            in_h: 8,
            in_w: 8,
            in_c: 3,
            kernel_h: 3,
            kernel_w: 3,
            out_c: 1,
            stride: 1,
            conv_kind: kind,
        }
    }

    #[test]
    fn reference_table_rows() {
        let f = count_operations(&layer(ConvKind::Full2d)).unwrap();
        let s = count_operations(&layer(ConvKind::SpatialSeparable)).unwrap();
        let d = count_operations(&layer(ConvKind::DepthwiseSeparable)).unwrap();
        assert_eq!((f.per_site_ops, f.stages), (27, 1));
        assert_eq!((s.per_site_ops, s.stages), (6, 1));
        assert_eq!((d.per_site_ops, d.stages), (9, 2));
        assert_eq!(f.total_ops, 27 * 64);
    }

    #[test]
    fn gabor_counts_kernel_area() {
        let mut l = layer(ConvKind::GaborFixed);
        l.in_c = 1;
        l.out_c = 16;
        let g = count_operations(&l).unwrap();
        assert_eq!(g.per_site_ops, 9);
        assert_eq!(g.total_ops, 9 * 64 * 16);
    }

    #[test]
    fn stride_reduces_sites() {
        let mut l = layer(ConvKind::Full2d);
        l.stride = 2;
        assert_eq!(count_operations(&l).unwrap().total_ops, 27 * 16);
    }

    #[test]
    fn unknown_kind_is_an_error() {
        assert!("winograd".parse::<ConvKind>().is_err());
        assert_eq!(
            "spatial_separable".parse::<ConvKind>().unwrap(),
            ConvKind::SpatialSeparable
        );
    }

    #[test]
    fn comp_cost_substitution() {
        let m = CostMeasurements {
            runtime: 10.0,
            gpuload: 0.8,
            gpumem: 4.0,
            data_cores: 2.0,
            windows_process: 4.0,
            training_epochs: 100,
        };
        let c = comp_cost(&m).unwrap();
        assert_eq!(c.cost, 64.0);
        assert_eq!(c.comp_cost, 0.6);

        let c = comp_cost(&CostMeasurements {
            windows_process: 64.0,
            ..m
        })
        .unwrap();
        assert_eq!(c.comp_cost, 0.0);
        let c = comp_cost(&CostMeasurements { runtime: 0.0, ..m }).unwrap();
        assert_eq!(c.cost, 0.0);
        assert!(comp_cost(&CostMeasurements {
            training_epochs: 0,
            ..m
        })
        .is_err());
    }
}
