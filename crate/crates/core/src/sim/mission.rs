use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::CommandKind;
use crate::data::{centroid_quartile, synth_gesture_image, DrParams, GestureClass};
use crate::error::{Error, Result};
use crate::exec::Exec;

use super::flight::{FlightLoop, GestureOutcome};
use super::log::FlightLog;
use super::pipeline::{Classifier, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mission {
    /// Closed loop: forward `w`, left turn, forward `h`, ... back to the start.
    Rectangle { w: f64, h: f64, alt: f64 },
    /// Forward `w`, left turn, forward `h`, land.
    LShape { w: f64, h: f64, alt: f64 },
}

impl Default for Mission {
    fn default() -> Self {
        Mission::Rectangle {
            w: 8.0,
            h: 4.0,
            alt: 1.5,
        }
    }
}

impl Mission {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn dims(&self) -> (f64, f64, f64) {
        match *self {
            Mission::Rectangle { w, h, alt } | Mission::LShape { w, h, alt } => (w, h, alt),
        }
    }

    fn steps(len: f64, step: f64, field: &str) -> Result<usize> {
        let n = len / step;
        if !(len.is_finite() && len > 0.0) || (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
            return Err(Error::invalid(
                field,
                format!("must be a positive multiple of the step length {step}, got {len}"),
            ));
        }
        Ok(n.round() as usize)
    }

    /// The command sequence that traces the mission.
    pub fn commands(&self, step_length: f64) -> Result<Vec<CommandKind>> {
        use CommandKind::*;
        let (w, h, alt) = self.dims();
        if !(alt.is_finite() && alt > 0.0) {
            return Err(Error::invalid("mission.alt", "must be positive"));
        }
        let nw = Self::steps(w, step_length, "mission.w")?;
        let nh = Self::steps(h, step_length, "mission.h")?;
        let legs: &[usize] = match self {
            Mission::Rectangle { .. } => &[nw, nh, nw, nh],
            Mission::LShape { .. } => &[nw, nh],
        };
        let mut out = vec![Takeoff];
        for (i, &n) in legs.iter().enumerate() {
            if i > 0 {
                out.push(YawLeft);
            }
            out.extend(std::iter::repeat_n(Forward, n));
        }
        out.push(Land);
        Ok(out)
    }

    /// Reference polyline, including the vertical take-off and landing legs.
    pub fn reference(&self) -> Vec<[f64; 3]> {
        let (w, h, alt) = self.dims();
        let mut pts = vec![[0.0, 0.0, 0.0], [0.0, 0.0, alt], [w, 0.0, alt], [w, h, alt]];
        match self {
            Mission::Rectangle { .. } => {
                pts.extend([[0.0, h, alt], [0.0, 0.0, alt], [0.0, 0.0, 0.0]]);
            }
            Mission::LShape { .. } => pts.push([w, h, 0.0]),
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionRun {
    pub log: FlightLog,
    pub reference: Vec<[f64; 3]>,
    /// every frame shown, in order
    pub outcomes: Vec<GestureOutcome>,
    /// mission commands given up on after `max_attempts` refusals
    pub skipped: usize,
}

/// Fly a mission end to end. Fully determined by `(mission, cfg, seed)`.
pub fn run_mission(mission: &Mission, cfg: &PipelineConfig, classifier: &Classifier, seed: u64) -> Result<MissionRun> {
    let (_, _, alt) = mission.dims();
    let mut cfg = cfg.clone();
    cfg.control.flight.hover_altitude = alt;
    cfg.validate()?;
    let commands = mission.commands(cfg.control.flight.step_length)?;

    let mut fl = FlightLoop::new(&cfg, seed)?;
    let mut frame_rng = ChaCha8Rng::seed_from_u64(seed);
    frame_rng.set_stream(4);
    let mut outcomes = Vec::new();
    let mut skipped = 0;
    for kind in commands {
        let class_id = cfg
            .control
            .mapping
            .class_for(kind)
            .ok_or_else(|| Error::invalid("control.mapping", format!("no gesture is bound to `{kind}`")))?;
        let class = GestureClass::new(class_id)?;
        let mut done = false;
        for _ in 0..cfg.max_attempts {
            let dr = DrParams::mild(frame_rng.random());
            let frame = synth_gesture_image(&class, &dr, cfg.frame_size, cfg.frame_size)?;
            let quartile = centroid_quartile(&frame)?;
            let (pred, conf) = classifier.classify(&frame, class_id, outcomes.len())?;
            let outcome = fl.submit(pred, conf, quartile)?;
            let accepted = outcome.is_accepted();
            outcomes.push(outcome);
            fl.run_until_idle(|_| {})?;
            if accepted {
                done = true;
                break;
            }
        }
        if !done {
            skipped += 1;
        }
    }
    Ok(MissionRun {
        log: fl.log,
        reference: mission.reference(),
        outcomes,
        skipped,
    })
}

/// Independent missions over a seed list; each run is itself sequential.
pub fn run_missions(
    exec: Exec,
    mission: &Mission,
    cfg: &PipelineConfig,
    classifier: &Classifier,
    seeds: &[u64],
) -> Vec<Result<MissionRun>> {
    exec.map(seeds, |&s| run_mission(mission, cfg, classifier, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_sequences() {
        use CommandKind::*;
        let l = Mission::LShape {
            w: 2.0,
            h: 1.0,
            alt: 1.0,
        }
        .commands(1.0)
        .unwrap();
        assert_eq!(l, vec![Takeoff, Forward, Forward, YawLeft, Forward, Land]);
        let r = Mission::default().commands(1.0).unwrap();
        assert_eq!(r.len(), 1 + 8 + 1 + 4 + 1 + 8 + 1 + 4 + 1);
        assert!(Mission::Rectangle {
            w: 2.5,
            h: 1.0,
            alt: 1.0
        }
        .commands(1.0)
        .is_err());
        assert!(Mission::Rectangle {
            w: 0.0,
            h: 1.0,
            alt: 1.0
        }
        .commands(1.0)
        .is_err());
    }

    #[test]
    fn mission_file() {
        let m = Mission::from_toml_str("kind = \"l_shape\"\nw = 4\nh = 2\nalt = 1.0\n").unwrap();
        assert_eq!(
            m,
            Mission::LShape {
                w: 4.0,
                h: 2.0,
                alt: 1.0
            }
        );
        assert!(Mission::from_toml_str("kind = \"circle\"\n").is_err());
    }
}
