//! Local geometry at a pole: neighborhood disk brackets, inverse branches by
//! damped Newton iteration, and the derivative comparison `|f'| ≍ |f|^(1+1/m)/|b|`.

use num_complex::Complex64;

use super::{PoleDatum, PoleField};
use crate::{Error, Result};

/// Newton residual target, relative to |w|.
pub const NEWTON_REL_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 60;

/// Disk bracket for the pole neighborhood `U_j(R)`: the component of
/// `{|f| > R}` at the pole contains the inner disk and is contained in the
/// outer one; every point of it has `|z|/|a| ∈ [1/kappa, kappa]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskBracket {
    pub center: Complex64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub kappa: f64,
}

impl DiskBracket {
    /// Annulus membership of the bracket (distance from the center).
    pub fn contains_radius(&self, r: f64) -> bool {
        r >= self.inner_radius && r <= self.outer_radius
    }
}

/// Local conformal model at a pole: `f = 1/Ψ^m` with `Ψ(a) = 0`, `Ψ'(a) = 1/b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalModel {
    pub pole: PoleDatum,
    pub psi_deriv_at_pole: Complex64,
    pub domain_radius: f64,
}

/// A point expressed relative to a pole, `z = pole.location + offset`, with the
/// offset kept at full precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetPoint {
    pub pole: PoleDatum,
    pub offset: Complex64,
}

impl OffsetPoint {
    /// Absolute coordinate (quantized at the pole's ulp).
    pub fn point(&self) -> Complex64 {
        self.pole.location + self.offset
    }
}

impl PoleField {
    /// Local model data at an explicit pole.
    pub fn local_model(&self, index: usize) -> Result<LocalModel> {
        let pole = *self.pole(index)?;
        let r0 = self.r0_threshold()?;
        Ok(LocalModel {
            pole,
            psi_deriv_at_pole: 1.0 / pole.coeff,
            domain_radius: r0.powf(-1.0 / pole.multiplicity as f64),
        })
    }

    /// Disk bracket of the neighborhood `U_j(R)` for an explicit pole.
    pub fn pole_neighborhood(&self, index: usize, r: f64, k: f64) -> Result<DiskBracket> {
        let pole = *self.pole(index)?;
        self.neighborhood_of(&pole, r, k)
    }

    /// Same, for any pole datum (including lazily materialized ones).
    pub fn neighborhood_of(&self, pole: &PoleDatum, r: f64, k: f64) -> Result<DiskBracket> {
        let r0 = self.r0_threshold()?;
        let threshold = 2f64.powi(self.max_mult as i32) * r0;
        if r < threshold {
            return Err(Error::RadiusTooSmall { r, threshold });
        }
        if k < 1.0 {
            return Err(Error::BadParameter("distortion constant below 1".into()));
        }
        let m = pole.multiplicity as f64;
        let scale = pole.coeff.norm() * r.powf(-1.0 / m);
        let x = 2f64.powi(self.max_mult as i32) * k * k * r0 * r.powf(-1.0 / self.max_mult as f64);
        let kappa = if x < 0.5 { 1.0 / (1.0 - x) } else { 2.0 };
        Ok(DiskBracket {
            center: pole.location,
            inner_radius: scale / k,
            outer_radius: scale * k,
            kappa: kappa.clamp(1.0 + f64::EPSILON, 2.0),
        })
    }

    /// One of the `m_j` local inverse branches of f at pole `index`, solving
    /// `f(z) = w` inside the pole's neighborhood. Branches are indexed by the
    /// m-th roots of unity seeding the Newton iteration.
    pub fn inverse_branch(&self, index: usize, w: Complex64, branch: u32) -> Result<Complex64> {
        let pole = *self.pole(index)?;
        Ok(self.inverse_branch_offset(&pole, w, branch)?.point())
    }

    /// Inverse branch at any pole datum, as an absolute coordinate.
    pub fn inverse_branch_at(
        &self,
        pole: &PoleDatum,
        w: Complex64,
        branch: u32,
    ) -> Result<Complex64> {
        Ok(self.inverse_branch_offset(pole, w, branch)?.point())
    }

    /// Inverse branch in pole-relative form. The Newton iteration runs on the
    /// offset `d = z - a`, which stays in full precision however small it is;
    /// the residual target is relative to |w| and measured by offset
    /// evaluation.
    pub fn inverse_branch_offset(
        &self,
        pole: &PoleDatum,
        w: Complex64,
        branch: u32,
    ) -> Result<OffsetPoint> {
        let r0 = self.r0_threshold()?;
        let w_abs = w.norm();
        if w_abs < r0 {
            return Err(Error::RadiusTooSmall {
                r: w_abs,
                threshold: r0,
            });
        }
        let m = pole.multiplicity;
        if branch >= m {
            return Err(Error::BadParameter(format!(
                "branch {branch} out of range for multiplicity {m}"
            )));
        }
        let zeta = Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * branch as f64 / m as f64,
        );
        let root = w.powf(1.0 / m as f64);
        let mut d = pole.coeff * zeta / root;
        let (mut fv, mut fd) = self.evaluate_offset(pole, d)?;
        for _ in 0..NEWTON_MAX_ITER {
            let r = fv.value - w;
            let residual = r.norm();
            if residual <= NEWTON_REL_TOL * w_abs {
                return Ok(OffsetPoint { pole: *pole, offset: d });
            }
            // Full-derivative Newton step when it is representable. For
            // offsets near the subnormal range f' ≈ -m·f/d overflows, but the
            // multiplicative form of the same step, d·(f-w)/(m·w), stays
            // finite at any scale.
            let classic = r / fd.value;
            let step = if classic.is_finite() && classic.norm() > 0.0 {
                classic
            } else {
                -d * (r / (m as f64 * w))
            };
            // Damp when the residual refuses to shrink; poles make f steep
            // and a full step can jump across branches. Candidate
            // evaluations are carried into the next iteration.
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..8 {
                let cand = d - lambda * step;
                if let Ok((fc, fcd)) = self.evaluate_offset(pole, cand) {
                    if (fc.value - w).norm() < residual {
                        d = cand;
                        fv = fc;
                        fd = fcd;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(Error::NoConvergence {
            index: pole.index,
            w_abs,
        })
    }

    /// All `m_j` branches at once, checking that they stay distinct.
    pub fn inverse_branches(&self, index: usize, w: Complex64) -> Result<Vec<Complex64>> {
        let pole = *self.pole(index)?;
        let m = pole.multiplicity;
        let mut offsets = Vec::with_capacity(m as usize);
        for branch in 0..m {
            offsets.push(self.inverse_branch_offset(&pole, w, branch)?.offset);
        }
        let sep = pole.coeff.norm() * w.norm().powf(-1.0 / m as f64) * 1e-6;
        for i in 0..offsets.len() {
            for j in i + 1..offsets.len() {
                if (offsets[i] - offsets[j]).norm() < sep {
                    return Err(Error::BranchCollision { index });
                }
            }
        }
        Ok(offsets.into_iter().map(|d| pole.location + d).collect())
    }

    /// Fit the leading coefficient from values on a small circle around the
    /// pole and return the relative deviation from the stored `b^m`. The mean
    /// over the 16th roots of unity cancels the smooth part of f to far below
    /// the fit tolerance.
    pub fn local_coeff_check(&self, index: usize) -> Result<f64> {
        let pole = *self.pole(index)?;
        let r0 = self.r0_threshold()?;
        let m = pole.multiplicity;
        let inner_scale =
            pole.coeff.norm() * (2f64.powi(self.max_mult as i32) * r0).powf(-1.0 / m as f64) / 12.0;
        let eps = (1e-4 * inner_scale).max(10.0 * super::POLE_HIT_TOL * pole.location.norm().max(1.0));
        let n = 16;
        let mut fit = Complex64::default();
        for i in 0..n {
            let zeta = Complex64::from_polar(eps, 2.0 * std::f64::consts::PI * i as f64 / n as f64);
            let fv = self.evaluate(pole.location + zeta)?;
            fit += fv.value * zeta.powi(m as i32);
        }
        fit /= n as f64;
        let target = pole.coeff.powi(m as i32);
        Ok((fit - target).norm() / target.norm())
    }

    /// Extremes of `|f'|·|b| / |f|^(1+1/m)` over a sample of the pole's
    /// neighborhood annulus at radius parameter `r`. Both must lie within
    /// `[1/(K·M), K·M]`.
    pub fn derivative_comparison_stats(
        &self,
        index: usize,
        r: f64,
        k: f64,
        samples: usize,
    ) -> Result<(f64, f64)> {
        if samples < 8 {
            return Err(Error::BadParameter("need at least 8 samples".into()));
        }
        let pole = *self.pole(index)?;
        let bracket = self.neighborhood_of(&pole, r, k)?;
        let b_abs = pole.coeff.norm();
        let expo = 1.0 + 1.0 / pole.multiplicity as f64;
        let n_r = (samples / 8).max(1);
        let n_th = samples / n_r;
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = 0.0f64;
        for i in 0..n_r {
            // Geometric radii strictly inside the annulus.
            let s = (i as f64 + 0.5) / n_r as f64;
            let rad = bracket.inner_radius * (bracket.outer_radius / bracket.inner_radius).powf(s);
            for jt in 0..n_th {
                let th = 2.0 * std::f64::consts::PI * jt as f64 / n_th as f64 + 0.05;
                let z = pole.location + Complex64::from_polar(rad, th);
                let (fv, fd) = self.evaluate_both(z)?;
                let ratio = fd.value.norm() * b_abs / fv.value.norm().powf(expo);
                min_ratio = min_ratio.min(ratio);
                max_ratio = max_ratio.max(ratio);
            }
        }
        Ok((min_ratio, max_ratio))
    }
}
