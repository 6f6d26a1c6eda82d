//! Template-matching classifier used in place of trained network weights.

use crate::error::Result;
use crate::exec::Exec;
use crate::ops::softmax;
use crate::tensor::Tensor;

use super::glyph::{synth_gesture_image, DrParams, GestureClass};

/// Softmax temperature applied to correlation scores.
pub const ORACLE_TEMPERATURE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: GestureClass,
    pub confidence: f64,
    pub probs: Vec<f64>,
}

/// Normalised cross-correlation against the clean glyph of every class.
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    h: usize,
    w: usize,
    classes: Vec<GestureClass>,
    /// zero-mean, unit-norm templates
    templates: Vec<Vec<f64>>,
    pub temperature: f64,
}

fn centred_unit(v: &[f64]) -> Option<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 1e-12).then(|| c.into_iter().map(|x| x / norm).collect())
}

/// Bilinear resample of an H×W×1 image to `h`×`w` (pixel-centre aligned).
pub fn resample(img: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (ih, iw, _) = img.hwc()?;
    if (ih, iw) == (h, w) {
        return img.clone().reshape(&[h, w, 1]);
    }
    let d = img.data();
    let at = |y: usize, x: usize| d[y * iw + x];
    Tensor::from_fn(&[h, w, 1], |i| {
        let sy = ((i[0] as f64 + 0.5) * ih as f64 / h as f64 - 0.5).clamp(0.0, (ih - 1) as f64);
        let sx = ((i[1] as f64 + 0.5) * iw as f64 / w as f64 - 0.5).clamp(0.0, (iw - 1) as f64);
        let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(ih - 1), (x0 + 1).min(iw - 1));
        let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
        let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
        let bot = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
        top * (1.0 - fy) + bot * fy
    })
}

impl OracleClassifier {
    pub fn new(n_classes: usize, h: usize, w: usize) -> Result<Self> {
        let classes = GestureClass::all(n_classes)?;
        let templates = classes
            .iter()
            .map(|c| {
                let t = synth_gesture_image(c, &DrParams::identity(), h, w)?;
                Ok(centred_unit(t.data()).expect("glyphs are never blank"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OracleClassifier {
            h,
            w,
            classes,
            templates,
            temperature: ORACLE_TEMPERATURE,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Correlation score per class, in [-1, 1]; all zero for a flat image.
    pub fn scores(&self, image: &Tensor) -> Result<Vec<f64>> {
        let img = resample(image, self.h, self.w)?;
        Ok(match centred_unit(img.data()) {
            Some(v) => self
                .templates
                .iter()
                .map(|t| t.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect(),
            None => vec![0.0; self.templates.len()],
        })
    }

    pub fn classify(&self, image: &Tensor) -> Result<Prediction> {
        let scores = self.scores(image)?;
        let logits: Vec<f64> = scores.iter().map(|s| s * self.temperature).collect();
        let probs = softmax(&logits)?;
        // first maximum wins ties
        let best = probs
            .iter()
            .enumerate()
            .fold(0, |b, (i, &p)| if p > probs[b] { i } else { b });
        Ok(Prediction {
            class: self.classes[best].clone(),
            confidence: probs[best],
            probs,
        })
    }

    /// Fraction of `n_seeds` frames of `class` classified back to `class`
    /// with confidence above `min_confidence`.
    pub fn accuracy(
        &self,
        exec: Exec,
        class: &GestureClass,
        dr: &DrParams,
        seeds: std::ops::Range<u64>,
        min_confidence: f64,
    ) -> Result<f64> {
        let seeds: Vec<u64> = seeds.collect();
        let n = seeds.len();
        let hits = exec
            .map(&seeds, |&s| -> Result<bool> {
                let img = synth_gesture_image(class, &dr.with_seed(s), self.h, self.w)?;
                let p = self.classify(&img)?;
                Ok(p.class.id == class.id && p.confidence > min_confidence)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|&h| h)
            .count();
        Ok(hits as f64 / n.max(1) as f64)
    }
}
