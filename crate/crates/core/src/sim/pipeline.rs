use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::ControlConfig;
use crate::data::{resample, OracleClassifier, MAX_CLASSES};
use crate::error::{Error, Result};
use crate::estimation::EkfConfig;
use crate::exec::Exec;
use crate::model::{build_network, LoadedModel, NetConfig, WeightStore};
use crate::tensor::Tensor;

use super::world::NoiseConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    /// `None` echoes the gesture the frame was rendered from
    #[serde(default)]
    pub class_id: Option<usize>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierSpec {
    /// template matcher
    #[default]
    Oracle,
    /// G-MobNet; random weights from `seed` unless a weight file is given
    Gmobnet {
        #[serde(default)]
        weights: Option<PathBuf>,
        #[serde(default)]
        seed: u64,
    },
    /// fixed outputs, cycled frame by frame
    Scripted { frames: Vec<ScriptEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// control tick, s
    pub dt: f64,
    /// settle ticks appended to every segment
    pub hold_ticks: usize,
    /// hover ticks after a refused gesture
    pub reject_hold_ticks: usize,
    /// frames shown per mission command before it is skipped
    pub max_attempts: usize,
    /// side of the synthesized gesture frame
    pub frame_size: usize,
    pub control: ControlConfig,
    pub ekf: EkfConfig,
    pub noise: NoiseConfig,
    pub classifier: ClassifierSpec,
    pub model: NetConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dt: 0.05,
            hold_ticks: 2,
            reject_hold_ticks: 4,
            max_attempts: 3,
            frame_size: 32,
            control: ControlConfig::default(),
            ekf: EkfConfig::default(),
            noise: NoiseConfig::default(),
            classifier: ClassifierSpec::Oracle,
            model: NetConfig::gmobnet_desk(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts", "must be ≥ 1"));
        }
        if self.frame_size < 16 {
            return Err(Error::invalid("frame_size", "must be ≥ 16"));
        }
        self.control.validate()?;
        self.ekf.validate()?;
        self.noise.validate()?;
        self.model.validate().map_err(|e| match e {
            Error::InvalidArgument { field, reason } => Error::invalid(format!("model.{field}"), reason),
            e => e,
        })?;
        if let ClassifierSpec::Scripted { frames } = &self.classifier {
            if frames.is_empty() {
                return Err(Error::invalid("classifier.frames", "needs at least one entry"));
            }
            for (i, f) in frames.iter().enumerate() {
                if !(0.0..=1.0).contains(&f.confidence) {
                    return Err(Error::invalid(
                        format!("classifier.frames[{i}].confidence"),
                        "must lie in [0, 1]",
                    ));
                }
                if f.class_id.is_some_and(|c| c >= MAX_CLASSES) {
                    return Err(Error::invalid(
                        format!("classifier.frames[{i}].class_id"),
                        "unknown class",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Turns a gesture frame into `(class id, confidence)`.
#[derive(Debug, Clone)]
pub enum Classifier {
    Oracle(OracleClassifier),
    Network(Box<LoadedModel>),
    Scripted(Vec<ScriptEntry>),
}

impl Classifier {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        Ok(match &cfg.classifier {
            ClassifierSpec::Oracle => {
                Classifier::Oracle(OracleClassifier::new(MAX_CLASSES, cfg.frame_size, cfg.frame_size)?)
            }
            ClassifierSpec::Gmobnet { weights, seed } => {
                let net = build_network(&cfg.model)?;
                let store = match weights {
                    Some(p) => WeightStore::load_for(p, &net)?,
                    None => WeightStore::random(&net, *seed),
                };
                Classifier::Network(Box::new(LoadedModel::new(&net, &store)?))
            }
            ClassifierSpec::Scripted { frames } => Classifier::Scripted(frames.clone()),
        })
    }

    /// `intended` is the class the frame was rendered from; only the
    /// scripted classifier looks at it.
    pub fn classify(&self, frame: &Tensor, intended: usize, frame_index: usize) -> Result<(usize, f64)> {
        match self {
            Classifier::Oracle(o) => {
                let p = o.classify(frame)?;
                Ok((p.class.id, p.confidence))
            }
            Classifier::Network(m) => {
                let cfg = &m.net.config;
                let img = resample(frame, cfg.input_h, cfg.input_w)?;
                let probs = m.predict_with(Exec::Sequential, &img)?;
                let best = probs
                    .iter()
                    .enumerate()
                    .fold(0, |b, (i, &p)| if p > probs[b] { i } else { b });
                Ok((best, probs[best]))
            }
            Classifier::Scripted(frames) => {
                let e = frames[frame_index % frames.len()];
                Ok((e.class_id.unwrap_or(intended), e.confidence))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let back = PipelineConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), c);
    }

    #[test]
    fn dropout_error_has_path() {
        match PipelineConfig::from_toml_str("[model]\ndropout_p = 1.5\n") {
            Err(Error::Config(msg)) => panic!("parsed as config error: {msg}"),
            Err(Error::InvalidArgument { field, .. }) => assert_eq!(field, "model.dropout_p"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scripted_cycles() {
        let c = Classifier::Scripted(vec![
            ScriptEntry {
                class_id: None,
                confidence: 0.9,
            },
            ScriptEntry {
                class_id: Some(4),
                confidence: 0.3,
            },
        ]);
        let f = Tensor::zeros(&[32, 32, 1]).unwrap();
        assert_eq!(c.classify(&f, 7, 0).unwrap(), (7, 0.9));
        assert_eq!(c.classify(&f, 7, 1).unwrap(), (4, 0.3));
        assert_eq!(c.classify(&f, 2, 2).unwrap(), (2, 0.9));
    }
}
