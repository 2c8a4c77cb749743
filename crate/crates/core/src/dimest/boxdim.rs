//! Box-counting slope estimate, a cross-check for limit-set samples.

use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashSet;

use crate::critexp::least_squares_slope;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxCount {
    /// Least-squares slope of log N(ε) against log(1/ε).
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Count occupied ε-cells per scale and fit the log-log slope.
pub fn box_count_dimension(points: &[Complex64], scales: &[f64]) -> Result<BoxCount> {
    if points.len() < 100 {
        return Err(Error::DegenerateSample(format!(
            "need ≥ 100 points, got {}",
            points.len()
        )));
    }
    if scales.len() < 4 || scales.iter().any(|&e| e <= 0.0) {
        return Err(Error::DegenerateSample("need ≥ 4 positive scales".into()));
    }
    let mut xs = Vec::with_capacity(scales.len());
    let mut ys = Vec::with_capacity(scales.len());
    for &eps in scales {
        let mut cells: HashSet<(i64, i64)> = HashSet::new();
        for p in points {
            cells.insert(((p.re / eps).floor() as i64, (p.im / eps).floor() as i64));
        }
        xs.push((1.0 / eps).ln());
        ys.push((cells.len() as f64).ln());
    }
    let slope = least_squares_slope(&xs, &ys);
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let fit = my + slope * (x - mx);
        ss += (y - fit) * (y - fit);
    }
    Ok(BoxCount {
        slope,
        residual: (ss / xs.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_has_dimension_one() {
        let points: Vec<Complex64> = (0..4000)
            .map(|i| Complex64::new(i as f64 / 4000.0, 0.25))
            .collect();
        let scales = [0.05, 0.02, 0.01, 0.005, 0.002];
        let bc = box_count_dimension(&points, &scales).unwrap();
        assert!((bc.slope - 1.0).abs() <= 0.15, "slope {}", bc.slope);
    }

    #[test]
    fn repeated_point_has_dimension_zero() {
        let points = vec![Complex64::new(0.3, 0.7); 500];
        let scales = [0.1, 0.05, 0.02, 0.01];
        let bc = box_count_dimension(&points, &scales).unwrap();
        assert!(bc.slope.abs() <= 1e-9);
    }

    #[test]
    fn middle_thirds_set_matches_log2_over_log3() {
        // Depth-8 endpoints of the middle-thirds construction.
        let mut xs = vec![0.0f64];
        let mut len = 1.0;
        for _ in 0..8 {
            len /= 3.0;
            let mut next = Vec::with_capacity(xs.len() * 2);
            for &x in &xs {
                next.push(x);
                next.push(x + 2.0 * len);
            }
            xs = next;
        }
        let points: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let scales = [1.0 / 27.0, 1.0 / 81.0, 1.0 / 243.0, 1.0 / 729.0];
        let bc = box_count_dimension(&points, &scales).unwrap();
        let expect = 2f64.ln() / 3f64.ln();
        assert!((bc.slope - expect).abs() <= 0.1, "slope {}", bc.slope);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let few = vec![Complex64::new(0.0, 0.0); 10];
        assert!(box_count_dimension(&few, &[0.1, 0.05, 0.02, 0.01]).is_err());
        let many = vec![Complex64::new(0.0, 0.0); 200];
        assert!(box_count_dimension(&many, &[0.1, 0.05]).is_err());
    }
}
