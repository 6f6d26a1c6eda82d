use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Quartile;
use crate::error::{Error, Result};

/// N×N speed grid. Each camera quartile owns an (N/2)×(N/2) block of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionGrid {
    pub n: usize,
    /// row-major, `n * n` entries
    pub speeds: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for ActionGrid {
    fn default() -> Self {
        // every quartile block holds a slow-to-fast ladder
        ActionGrid {
            n: 4,
            speeds: vec![
                2.0, 4.0, 4.0, 6.0, //
                6.0, 8.0, 8.0, 10.0, //
                2.0, 4.0, 4.0, 6.0, //
                6.0, 8.0, 8.0, 10.0,
            ],
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SpeedSelection {
    Selected {
        speed: f64,
        row: usize,
        col: usize,
        /// confidence range index, 0 = slowest
        bucket: usize,
    },
    Rejected {
        confidence: f64,
        threshold: f64,
    },
}

impl SpeedSelection {
    pub fn speed(&self) -> Option<f64> {
        match *self {
            SpeedSelection::Selected { speed, .. } => Some(speed),
            SpeedSelection::Rejected { .. } => None,
        }
    }
}

/// How the confidence picks a cell inside the quartile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedPolicy {
    /// equal-width confidence buckets over [threshold, 1]
    #[default]
    Bucketed,
    /// random cell, weight 1 / (1 + bucket distance)
    Proximity,
}

impl ActionGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(Error::invalid(
                "grid.n",
                format!("must be even and positive, got {}", self.n),
            ));
        }
        if self.speeds.len() != self.n * self.n {
            return Err(Error::invalid(
                "grid.speeds",
                format!("expected {} values, got {}", self.n * self.n, self.speeds.len()),
            ));
        }
        if let Some(i) = self.speeds.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid(format!("grid.speeds[{i}]"), "speeds must be positive"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("grid.threshold", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Cells of a quartile, slowest first (ties keep row-major order).
    pub fn quartile_cells(&self, q: Quartile) -> Vec<GridCell> {
        let h = self.n / 2;
        let (r0, c0) = match q {
            Quartile::TL => (0, 0),
            Quartile::TR => (0, h),
            Quartile::BL => (h, 0),
            Quartile::BR => (h, h),
        };
        let mut cells: Vec<GridCell> = (r0..r0 + h)
            .flat_map(|row| (c0..c0 + h).map(move |col| (row, col)))
            .map(|(row, col)| GridCell {
                row,
                col,
                speed: self.speeds[row * self.n + col],
            })
            .collect();
        cells.sort_by(|a, b| a.speed.total_cmp(&b.speed));
        cells
    }

    /// Index of the confidence range containing `confidence` (top range closed).
    pub fn bucket(&self, confidence: f64) -> usize {
        let k = (self.n / 2) * (self.n / 2);
        let width = (1.0 - self.threshold) / k as f64;
        (((confidence - self.threshold) / width).floor() as usize).min(k - 1)
    }
}

fn check_confidence(confidence: f64) -> Result<()> {
    if (0.0..=1.0).contains(&confidence) {
        Ok(())
    } else {
        Err(Error::invalid("confidence", format!("{confidence} outside [0, 1]")))
    }
}

pub fn select_speed(grid: &ActionGrid, quartile: Quartile, confidence: f64) -> Result<SpeedSelection> {
    check_confidence(confidence)?;
    if confidence < grid.threshold {
        return Ok(SpeedSelection::Rejected {
            confidence,
            threshold: grid.threshold,
        });
    }
    let bucket = grid.bucket(confidence);
    let c = grid.quartile_cells(quartile)[bucket];
    Ok(SpeedSelection::Selected {
        speed: c.speed,
        row: c.row,
        col: c.col,
        bucket,
    })
}

/// Seeded alternative to [`select_speed`]: the bucket is drawn at random,
/// favouring buckets close to the one the confidence falls in.
pub fn select_speed_proximity(
    grid: &ActionGrid,
    quartile: Quartile,
    confidence: f64,
    rng: &mut impl Rng,
) -> Result<SpeedSelection> {
    check_confidence(confidence)?;
    if confidence < grid.threshold {
        return Ok(SpeedSelection::Rejected {
            confidence,
            threshold: grid.threshold,
        });
    }
    let cells = grid.quartile_cells(quartile);
    let home = grid.bucket(confidence);
    let weights: Vec<f64> = (0..cells.len())
        .map(|j| 1.0 / (1.0 + j.abs_diff(home) as f64))
        .collect();
    let mut r = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut bucket = cells.len() - 1;
    for (j, w) in weights.iter().enumerate() {
        if r < *w {
            bucket = j;
            break;
        }
        r -= w;
    }
    let c = cells[bucket];
    Ok(SpeedSelection::Selected {
        speed: c.speed,
        row: c.row,
        col: c.col,
        bucket,
    })
}

pub fn select_with_policy(
    policy: SpeedPolicy,
    grid: &ActionGrid,
    quartile: Quartile,
    confidence: f64,
    rng: &mut impl Rng,
) -> Result<SpeedSelection> {
    match policy {
        SpeedPolicy::Bucketed => select_speed(grid, quartile, confidence),
        SpeedPolicy::Proximity => select_speed_proximity(grid, quartile, confidence, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threshold_gate() {
        let g = ActionGrid::default();
        assert!(matches!(
            select_speed(&g, Quartile::TL, 0.45).unwrap(),
            SpeedSelection::Rejected { .. }
        ));
    }

    #[test]
    fn tl_quartile_partition() {
        let g = ActionGrid::default();
        let speeds: Vec<f64> = g.quartile_cells(Quartile::TL).iter().map(|c| c.speed).collect();
        assert_eq!(speeds, vec![2.0, 4.0, 6.0, 8.0]);
        assert_eq!(select_speed(&g, Quartile::TL, 1.0).unwrap().speed(), Some(8.0));
        assert_eq!(select_speed(&g, Quartile::TL, 0.55).unwrap().speed(), Some(2.0));
        assert_eq!(select_speed(&g, Quartile::TL, 0.5).unwrap().speed(), Some(2.0));
        assert_eq!(select_speed(&g, Quartile::TL, 0.625).unwrap().speed(), Some(4.0));
        assert_eq!(select_speed(&g, Quartile::TR, 1.0).unwrap().speed(), Some(10.0));
        match select_speed(&g, Quartile::BR, 0.99).unwrap() {
            SpeedSelection::Selected { row, col, .. } => assert_eq!((row, col), (3, 3)),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn out_of_range_confidence() {
        let g = ActionGrid::default();
        assert!(select_speed(&g, Quartile::TL, 1.01).is_err());
        assert!(select_speed(&g, Quartile::TL, f64::NAN).is_err());
    }

    #[test]
    fn validation() {
        assert!(ActionGrid::default().validate().is_ok());
        let odd = ActionGrid {
            n: 3,
            speeds: vec![1.0; 9],
            threshold: 0.5,
        };
        assert!(odd.validate().is_err());
        let mut neg = ActionGrid::default();
        neg.speeds[5] = 0.0;
        assert!(neg.validate().is_err());
    }

    #[test]
    fn proximity_stays_in_quartile_and_gates() {
        let g = ActionGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tl: Vec<f64> = g.quartile_cells(Quartile::TL).iter().map(|c| c.speed).collect();
        for i in 0..200 {
            let c = 0.5 + 0.5 * i as f64 / 199.0;
            let s = select_speed_proximity(&g, Quartile::TL, c, &mut rng).unwrap();
            assert!(tl.contains(&s.speed().unwrap()));
        }
        assert!(select_speed_proximity(&g, Quartile::TL, 0.2, &mut rng)
            .unwrap()
            .speed()
            .is_none());
    }
}
