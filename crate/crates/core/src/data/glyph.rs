//! Procedural gesture glyphs and domain-randomised rendering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAX_CLASSES: usize = 10;
const HALF_WIDTH: f64 = 0.12;
const EDGE: f64 = 0.08;

type Seg = ((f64, f64), (f64, f64));

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GestureClass {
    pub id: usize,
    pub label: String,
}

const LABELS: [&str; MAX_CLASSES] = [
    "ring",
    "bar",
    "dash",
    "slash",
    "backslash",
    "ell",
    "gamma",
    "vee",
    "wedge",
    "equals",
];

impl GestureClass {
    pub fn new(id: usize) -> Result<Self> {
        LABELS
            .get(id)
            .map(|l| GestureClass {
                id,
                label: (*l).to_string(),
            })
            .ok_or_else(|| Error::invalid("class", format!("class id {id} outside 0..{MAX_CLASSES}")))
    }

    pub fn all(n_classes: usize) -> Result<Vec<GestureClass>> {
        (0..n_classes).map(GestureClass::new).collect()
    }
}

/// Stroke segments in normalised frame coordinates (u right, v down, both in
/// [-1, 1]).
fn strokes(id: usize) -> Vec<Seg> {
    const A: f64 = 0.7;
    match id {
        0 => {
            let n = 32;
            (0..n)
                .map(|i| {
                    let a0 = i as f64 / n as f64 * std::f64::consts::TAU;
                    let a1 = (i + 1) as f64 / n as f64 * std::f64::consts::TAU;
                    ((A * a0.cos(), A * a0.sin()), (A * a1.cos(), A * a1.sin()))
                })
                .collect()
        }
        1 => vec![((0.0, -0.8), (0.0, 0.8))],
        2 => vec![((-0.8, 0.0), (0.8, 0.0))],
        3 => vec![((-A, A), (A, -A))],
        4 => vec![((-A, -A), (A, A))],
        5 => vec![((-A, -A), (-A, A)), ((-A, A), (A, A))],
        6 => vec![((-A, -A), (A, -A)), ((A, -A), (A, A))],
        7 => vec![((-A, -A), (0.0, A)), ((0.0, A), (A, -A))],
        8 => vec![((-A, A), (0.0, -A)), ((0.0, -A), (A, A))],
        9 => vec![((-0.8, -0.5), (0.8, -0.5)), ((-0.8, 0.5), (0.8, 0.5))],
        _ => Vec::new(),
    }
}

fn seg_distance(p: (f64, f64), s: &Seg) -> f64 {
    let ((ax, ay), (bx, by)) = *s;
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - ax) * dx + (p.1 - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx - p.0, ay + t * dy - p.1);
    (cx * cx + cy * cy).sqrt()
}

fn stroke_intensity(strokes: &[Seg], p: (f64, f64)) -> f64 {
    let d = strokes.iter().map(|s| seg_distance(p, s)).fold(f64::INFINITY, f64::min);
    ((HALF_WIDTH + EDGE - d) / EDGE).clamp(0.0, 1.0)
}

/// Inclusive sampling range; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Range { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            // still advance the stream so fixed and random ranges stay aligned
            let _: f64 = rng.random();
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Domain-randomisation ranges for lighting, orientation, texture and
/// background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrParams {
    /// Multiplicative glyph brightness.
    pub brightness: Range,
    /// Rotation about the frame centre, degrees.
    pub rotation_deg: Range,
    /// Per-pixel additive noise amplitude (uniform in ±amplitude).
    pub noise: Range,
    /// Background intensity.
    pub background: Range,
    pub seed: u64,
}

impl DrParams {
    /// Clean canonical rendering.
    pub fn identity() -> Self {
        DrParams {
            brightness: Range::fixed(1.0),
            rotation_deg: Range::fixed(0.0),
            noise: Range::fixed(0.0),
            background: Range::fixed(0.0),
            seed: 0,
        }
    }

    /// The mild ranges used for closed-loop frames.
    pub fn mild(seed: u64) -> Self {
        DrParams {
            brightness: Range::new(0.8, 1.2),
            rotation_deg: Range::new(-10.0, 10.0),
            noise: Range::new(0.0, 0.1),
            background: Range::new(0.0, 0.2),
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("brightness", self.brightness),
            ("rotation_deg", self.rotation_deg),
            ("noise", self.noise),
            ("background", self.background),
        ] {
            if !(r.lo <= r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
                return Err(Error::invalid(name, format!("empty range [{}, {}]", r.lo, r.hi)));
            }
        }
        Ok(())
    }
}

/// Independent generator stream per (seed, class).
fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&(class as u64).to_le_bytes());
    s[16..24].copy_from_slice(b"gesture!");
    ChaCha8Rng::from_seed(s)
}

/// Render one domain-randomised H×W×1 frame of `class`. Pixels lie in [0, 1].
pub fn synth_gesture_image(class: &GestureClass, dr: &DrParams, h: usize, w: usize) -> Result<Tensor> {
    if h < 16 || w < 16 {
        return Err(Error::invalid(
            "size",
            format!("frames must be at least 16×16, got {h}×{w}"),
        ));
    }
    if class.id >= MAX_CLASSES {
        return Err(Error::invalid(
            "class",
            format!("class id {} outside 0..{MAX_CLASSES}", class.id),
        ));
    }
    dr.validate()?;
    let mut rng = class_rng(dr.seed, class.id);
    let rot = dr.rotation_deg.sample(&mut rng).to_radians();
    let bright = dr.brightness.sample(&mut rng);
    let amp = dr.noise.sample(&mut rng);
    let bg = dr.background.sample(&mut rng);
    let segs = strokes(class.id);
    let (s, c) = rot.sin_cos();
    let (hh, hw) = (h as f64 / 2.0, w as f64 / 2.0);
    let scale = hh.min(hw);
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let u = (x as f64 + 0.5 - hw) / scale;
            let v = (y as f64 + 0.5 - hh) / scale;
            // sample the glyph in its own (unrotated) frame
            let (gu, gv) = (c * u + s * v, -s * u + c * v);
            let g = stroke_intensity(&segs, (gu, gv));
            let n = if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
            data.push((bg + bright * g * (1.0 - bg) + n).clamp(0.0, 1.0));
        }
    }
    Tensor::new(&[h, w, 1], data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quartile {
    TL,
    TR,
    BL,
    BR,
}

impl Quartile {
    pub const ALL: [Quartile; 4] = [Quartile::TL, Quartile::TR, Quartile::BL, Quartile::BR];

    pub fn as_str(self) -> &'static str {
        match self {
            Quartile::TL => "TL",
            Quartile::TR => "TR",
            Quartile::BL => "BL",
            Quartile::BR => "BR",
        }
    }
}

impl std::str::FromStr for Quartile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TL" => Ok(Quartile::TL),
            "TR" => Ok(Quartile::TR),
            "BL" => Ok(Quartile::BL),
            "BR" => Ok(Quartile::BR),
            _ => Err(Error::invalid("quartile", format!("unknown quartile `{s}`"))),
        }
    }
}

/// Frame quartile containing the foreground centroid. Foreground weight is
/// the pixel's excess over the frame mean. Ties on the centre lines go to
/// the right / bottom half.
pub fn centroid_quartile(frame: &Tensor) -> Result<Quartile> {
    let (h, w, _) = frame.hwc()?;
    let d = frame.data();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let wt = (d[y * w + x] - mean).max(0.0);
            sx += wt * (x as f64 + 0.5);
            sy += wt * (y as f64 + 0.5);
            sw += wt;
        }
    }
    let (cx, cy) = if sw > 0.0 {
        (sx / sw, sy / sw)
    } else {
        (w as f64 / 2.0, h as f64 / 2.0)
    };
    let left = cx < w as f64 / 2.0;
    let top = cy < h as f64 / 2.0;
    Ok(match (top, left) {
        (true, true) => Quartile::TL,
        (true, false) => Quartile::TR,
        (false, true) => Quartile::BL,
        (false, false) => Quartile::BR,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_frame() {
        let c = GestureClass::new(3).unwrap();
        let a = synth_gesture_image(&c, &DrParams::mild(42), 32, 32).unwrap();
        let b = synth_gesture_image(&c, &DrParams::mild(42), 32, 32).unwrap();
        assert_eq!(a, b);
        let other = synth_gesture_image(&c, &DrParams::mild(43), 32, 32).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn identity_randomisation_is_clean_glyph() {
        let c = GestureClass::new(5).unwrap();
        let img = synth_gesture_image(&c, &DrParams::identity(), 32, 32).unwrap();
        let segs = strokes(5);
        for y in 0..32 {
            for x in 0..32 {
                let u = (x as f64 + 0.5 - 16.0) / 16.0;
                let v = (y as f64 + 0.5 - 16.0) / 16.0;
                assert_eq!(img.get(&[y, x, 0]), stroke_intensity(&segs, (u, v)));
            }
        }
    }

    #[test]
    fn pixels_in_unit_range() {
        let dr = DrParams {
            noise: Range::new(0.5, 0.9),
            brightness: Range::new(0.5, 3.0),
            ..DrParams::mild(1)
        };
        for id in 0..MAX_CLASSES {
            let img = synth_gesture_image(&GestureClass::new(id).unwrap(), &dr, 20, 24).unwrap();
            assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn size_and_range_checks() {
        let c = GestureClass::new(0).unwrap();
        assert!(synth_gesture_image(&c, &DrParams::identity(), 15, 32).is_err());
        let dr = DrParams {
            noise: Range::new(0.2, 0.1),
            ..DrParams::identity()
        };
        assert!(synth_gesture_image(&c, &dr, 32, 32).is_err());
        assert!(GestureClass::new(10).is_err());
    }

    #[test]
    fn quartile_of_offcentre_glyphs() {
        // ell sits on the left/bottom edges, gamma on the top/right
        let ell = synth_gesture_image(&GestureClass::new(5).unwrap(), &DrParams::identity(), 32, 32).unwrap();
        let gam = synth_gesture_image(&GestureClass::new(6).unwrap(), &DrParams::identity(), 32, 32).unwrap();
        assert_eq!(centroid_quartile(&ell).unwrap(), Quartile::BL);
        assert_eq!(centroid_quartile(&gam).unwrap(), Quartile::TR);
    }
}
