use serde::Serialize;

use crate::error::Result;

use super::network::{Network, StageKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub name: String,
    pub kind: String,
    pub out_shape: [usize; 3],
    pub layers: u32,
    pub trainable_params: usize,
    pub fixed_params: usize,
    pub ops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub layer_count: u32,
    /// Convolution, dense, batch-norm scale/shift and attention weights.
    pub trainable_params: usize,
    /// Gabor stem kernels and batch-norm running statistics.
    pub fixed_params: usize,
    pub total_ops_per_inference: u64,
    /// `4 × (trainable + fixed)`: every value held as f32.
    pub model_size_bytes: usize,
    pub dropout_p: f64,
    pub stages: Vec<StageReport>,
}

pub fn model_report(net: &Network) -> Result<ModelReport> {
    let specs = net.param_specs();
    let ops = net.stage_ops()?;
    let mut stages = Vec::with_capacity(net.stages.len());
    for (s, ops) in net.stages.iter().zip(ops) {
        let prefix = format!("{}.", s.name);
        let mine = specs.iter().filter(|p| p.name.starts_with(&prefix));
        let (mut trainable, mut fixed) = (0, 0);
        for p in mine {
            if p.trainable {
                trainable += p.numel();
            } else {
                fixed += p.numel();
            }
        }
        let kind = match s.kind {
            StageKind::Conv(k) => k.as_str().to_string(),
            StageKind::Dense => "dense".to_string(),
        };
        if s.name == "stem" {
            fixed += net.gabor_bank().map_or(0, |b| b.len());
        }
        stages.push(StageReport {
            name: s.name.clone(),
            kind,
            out_shape: s.out_shape,
            layers: s.layers(),
            trainable_params: trainable,
            fixed_params: fixed,
            ops,
        });
    }
    let trainable_params = stages.iter().map(|s| s.trainable_params).sum();
    let fixed_params = stages.iter().map(|s| s.fixed_params).sum::<usize>();
    Ok(ModelReport {
        layer_count: net.layer_count(),
        trainable_params,
        fixed_params,
        total_ops_per_inference: stages.iter().map(|s| s.ops).sum(),
        model_size_bytes: 4 * (trainable_params + fixed_params),
        dropout_p: net.config.dropout_p,
        stages,
    })
}
