//! Forward-orbit sampling and escape-time rendering.

use num_complex::Complex64;
use serde::Serialize;

use crate::polefield::PoleField;
use crate::Error;

/// Orbit classification against the radius R: an escaping candidate keeps the
/// last half of its modulus track at or above R (finite-horizon stand-in for
/// the liminf), a pole hit leaves every compact set by convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    EscapingCandidate,
    Bounded,
    PoleHit,
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub seed: Complex64,
    pub modulus_track: Vec<f64>,
    pub classification: OrbitClass,
    pub horizon: usize,
    /// Pole hits count as escaping by convention; the flag records it.
    pub escaping_by_convention: bool,
}

/// Iterate the truncated model from `z0` for up to `horizon` steps and
/// classify the track.
pub fn escape_orbit_sample(
    field: &PoleField,
    z0: Complex64,
    r: f64,
    horizon: usize,
) -> OrbitRecord {
    assert!(horizon >= 1);
    let mut track = vec![z0.norm()];
    let mut z = z0;
    for _ in 0..horizon {
        match field.evaluate(z) {
            Ok(eval) => {
                z = eval.value;
                track.push(z.norm());
            }
            Err(Error::PoleHit { .. }) => {
                return OrbitRecord {
                    seed: z0,
                    modulus_track: track,
                    classification: OrbitClass::PoleHit,
                    horizon,
                    escaping_by_convention: true,
                };
            }
            Err(_) => {
                return OrbitRecord {
                    seed: z0,
                    modulus_track: track,
                    classification: OrbitClass::Undecided,
                    horizon,
                    escaping_by_convention: false,
                };
            }
        }
    }
    let from = track.len() - track.len().div_ceil(2);
    let tail_min = track[from..].iter().copied().fold(f64::INFINITY, f64::min);
    OrbitRecord {
        seed: z0,
        modulus_track: track,
        classification: if tail_min >= r {
            OrbitClass::EscapingCandidate
        } else {
            OrbitClass::Bounded
        },
        horizon,
        escaping_by_convention: false,
    }
}

/// Per-pixel first-exit steps over a window, row-major. The sentinel
/// `u32::MAX` marks pixels that never left `{|z| < r}` within the horizon.
#[derive(Debug, Clone, Serialize)]
pub struct EscapeMap {
    pub width: usize,
    pub height: usize,
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub r: f64,
    pub horizon: usize,
    pub steps: Vec<u32>,
}

pub const NEVER_EXITED: u32 = u32::MAX;

impl EscapeMap {
    pub fn step_at(&self, ix: usize, iy: usize) -> u32 {
        self.steps[iy * self.width + ix]
    }

    pub fn pixel_center(&self, ix: usize, iy: usize) -> Complex64 {
        let fx = (ix as f64 + 0.5) / self.width as f64;
        let fy = (iy as f64 + 0.5) / self.height as f64;
        Complex64::new(
            self.re_range.0 + fx * (self.re_range.1 - self.re_range.0),
            self.im_range.0 + fy * (self.im_range.1 - self.im_range.0),
        )
    }

    /// Binary PPM (P6) with a fixed smooth palette; deterministic bytes.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for &s in &self.steps {
            out.extend_from_slice(&palette(s, self.horizon));
        }
        out
    }
}

fn palette(step: u32, horizon: usize) -> [u8; 3] {
    if step == NEVER_EXITED {
        return [8, 8, 16];
    }
    let s = (step as f64 / horizon.max(1) as f64).clamp(0.0, 1.0);
    let v = 1.0 - s;
    [
        (255.0 * v.powf(0.45)) as u8,
        (255.0 * (0.25 + 0.75 * v).powf(1.2)) as u8,
        (255.0 * (0.55 + 0.45 * s)) as u8,
    ]
}

/// First step at which each pixel's orbit leaves `{|z| < r}` (pole hits exit
/// immediately). Deterministic row-major evaluation.
pub fn render_escape_map(
    field: &PoleField,
    re_range: (f64, f64),
    im_range: (f64, f64),
    width: usize,
    height: usize,
    r: f64,
    horizon: usize,
) -> EscapeMap {
    assert!(width >= 1 && height >= 1);
    let mut map = EscapeMap {
        width,
        height,
        re_range,
        im_range,
        r,
        horizon,
        steps: Vec::new(),
    };
    map.steps = render_escape_rows(field, &map, 0, height);
    map
}

/// Steps for the row band `[y_from, y_to)` of the map's global pixel grid.
/// Pixel centers are computed from global coordinates, so splitting the rows
/// across workers reproduces the sequential bytes exactly.
pub fn render_escape_rows(
    field: &PoleField,
    map: &EscapeMap,
    y_from: usize,
    y_to: usize,
) -> Vec<u32> {
    let mut steps = Vec::with_capacity(map.width * (y_to - y_from));
    for iy in y_from..y_to {
        for ix in 0..map.width {
            let z0 = map.pixel_center(ix, iy);
            steps.push(first_exit_step(field, z0, map.r, map.horizon));
        }
    }
    steps
}

/// An empty map descriptor for row-band rendering.
pub fn escape_map_frame(
    re_range: (f64, f64),
    im_range: (f64, f64),
    width: usize,
    height: usize,
    r: f64,
    horizon: usize,
) -> EscapeMap {
    EscapeMap {
        width,
        height,
        re_range,
        im_range,
        r,
        horizon,
        steps: Vec::new(),
    }
}

fn first_exit_step(field: &PoleField, z0: Complex64, r: f64, horizon: usize) -> u32 {
    let mut z = z0;
    if z.norm() >= r {
        return 0;
    }
    for step in 1..=horizon {
        match field.evaluate(z) {
            Ok(eval) => {
                z = eval.value;
                if z.norm() >= r {
                    return step as u32;
                }
            }
            // Pole hit: the orbit leaves every compact set now.
            Err(_) => return step as u32,
        }
    }
    NEVER_EXITED
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polefield::PoleField;

    #[test]
    fn pole_seed_classified_as_pole_hit() {
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let a = f.poles()[0].location;
        let rec = escape_orbit_sample(&f, a, 10.0, 5);
        assert_eq!(rec.classification, OrbitClass::PoleHit);
        assert!(rec.escaping_by_convention);
    }

    #[test]
    fn off_disk_points_are_bounded() {
        // Away from every pole disk the value is ≤ 2 < R, so the orbit is
        // bounded at the first step already.
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let rec = escape_orbit_sample(&f, Complex64::new(0.4, 0.3), 10.0, 8);
        assert_eq!(rec.classification, OrbitClass::Bounded);
        assert!(rec.modulus_track[1] <= 2.0);
    }

    #[test]
    fn render_shapes_and_determinism() {
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let one = render_escape_map(&f, (-1.0, 1.0), (-1.0, 1.0), 1, 1, 10.0, 4);
        assert_eq!(one.steps.len(), 1);
        let m1 = render_escape_map(&f, (10.0, 20.0), (10.0, 20.0), 32, 16, 10.0, 6);
        assert_eq!(m1.steps.len(), 512);
        let m2 = render_escape_map(&f, (10.0, 20.0), (10.0, 20.0), 32, 16, 10.0, 6);
        assert_eq!(m1.steps, m2.steps);
        assert_eq!(m1.to_ppm(), m2.to_ppm());
        assert!(m1.to_ppm().len() > 512 * 3);
    }

    #[test]
    fn fast_exit_ring_near_a_pole() {
        // Around a pole, pixels in the inner ring exit on step 1; compare a
        // few probes against the orbit sampler.
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let a = f.poles()[0].location;
        let b = f.poles()[0].coeff.norm();
        let span = 8.0 * b;
        let map = render_escape_map(
            &f,
            (a.re - span, a.re + span),
            (a.im - span, a.im + span),
            33,
            33,
            10.0,
            8,
        );
        // Center pixel contains the pole: immediate exit.
        let center = map.step_at(16, 16);
        assert!(center <= 1, "center step {center}");
        let mut probes = 0;
        for (ix, iy) in [(0usize, 0usize), (5, 28), (16, 2), (30, 16), (8, 8)] {
            let z0 = map.pixel_center(ix, iy);
            let rec = escape_orbit_sample(&f, z0, 10.0, 8);
            let step = map.step_at(ix, iy);
            match rec.classification {
                OrbitClass::PoleHit => assert!(step <= map.horizon as u32),
                OrbitClass::Bounded => {
                    assert!(rec.modulus_track.iter().skip(1).any(|&m| m < 10.0))
                }
                _ => {}
            }
            // Exit step consistent with the recorded track.
            if step != NEVER_EXITED && step > 0 && rec.classification != OrbitClass::PoleHit {
                let s = step as usize;
                if s < rec.modulus_track.len() {
                    assert!(rec.modulus_track[s] >= 10.0 || rec.modulus_track[s] <= 2.0);
                }
            }
            probes += 1;
        }
        assert_eq!(probes, 5);
    }
}
