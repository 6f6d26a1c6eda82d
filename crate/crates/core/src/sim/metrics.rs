use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::log::FlightLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackMetrics {
    pub max_abs_error: [f64; 3],
    pub rmse: [f64; 3],
    /// length of the flown (true) path
    pub path_length: f64,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| a[i] - b[i])
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Closest point to `p` on segment `a`–`b`.
pub fn closest_on_segment(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return a;
    }
    let s = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    std::array::from_fn(|i| a[i] + s * ab[i])
}

/// Closest point to `p` on a polyline (first one wins on ties).
pub fn closest_on_polyline(p: [f64; 3], poly: &[[f64; 3]]) -> Result<[f64; 3]> {
    match poly {
        [] => Err(Error::Empty("reference polyline".into())),
        [only] => Ok(*only),
        _ => {
            let mut best = poly[0];
            let mut best_d = f64::INFINITY;
            for w in poly.windows(2) {
                let c = closest_on_segment(p, w[0], w[1]);
                let e = sub(p, c);
                let d = dot(e, e);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            Ok(best)
        }
    }
}

/// Per-axis displacement of each position from the nearest reference point.
pub fn track_displacement_points(points: &[[f64; 3]], reference: &[[f64; 3]]) -> Result<TrackMetrics> {
    if reference.is_empty() {
        return Err(Error::Empty("reference polyline".into()));
    }
    if points.is_empty() {
        return Err(Error::Empty("flight log".into()));
    }
    let mut max_abs = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for &p in points {
        let e = sub(p, closest_on_polyline(p, reference)?);
        for a in 0..3 {
            max_abs[a] = max_abs[a].max(e[a].abs());
            sq[a] += e[a] * e[a];
        }
    }
    let n = points.len() as f64;
    let path_length = points
        .windows(2)
        .map(|w| dot(sub(w[1], w[0]), sub(w[1], w[0])).sqrt())
        .sum();
    Ok(TrackMetrics {
        max_abs_error: max_abs,
        rmse: sq.map(|s| (s / n).sqrt()),
        path_length,
    })
}

pub fn track_displacement(log: &FlightLog, reference: &[[f64; 3]]) -> Result<TrackMetrics> {
    track_displacement_points(&log.true_positions(), reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [[f64; 3]; 5] = [
        [0.0, 0.0, 1.0],
        [2.0, 0.0, 1.0],
        [2.0, 2.0, 1.0],
        [0.0, 2.0, 1.0],
        [0.0, 0.0, 1.0],
    ];

    #[test]
    fn on_reference_is_zero() {
        let pts = [[1.0, 0.0, 1.0], [2.0, 1.5, 1.0], [0.0, 0.5, 1.0]];
        let m = track_displacement_points(&pts, &SQUARE).unwrap();
        assert_eq!(m.max_abs_error, [0.0; 3]);
        assert_eq!(m.rmse, [0.0; 3]);
    }

    #[test]
    fn constant_offset() {
        let line = [[0.0, 0.0, 0.0], [0.0, 10.0, 0.0]];
        let pts: Vec<[f64; 3]> = (0..20).map(|i| [0.5, i as f64 * 0.5, 0.0]).collect();
        let m = track_displacement_points(&pts, &line).unwrap();
        assert_eq!(m.max_abs_error, [0.5, 0.0, 0.0]);
        assert_eq!(m.rmse[0], 0.5);
        assert!((m.path_length - 9.5).abs() < 1e-12);
    }

    #[test]
    fn empty_inputs() {
        assert!(track_displacement_points(&[[0.0; 3]], &[]).is_err());
        assert!(track_displacement_points(&[], &SQUARE).is_err());
        let m = track_displacement_points(&[[1.0, 2.0, 3.0]], &[[0.0; 3]]).unwrap();
        assert_eq!(m.max_abs_error, [1.0, 2.0, 3.0]);
    }
}
