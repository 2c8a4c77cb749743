//! Conformal machinery for the lower bound: admissible radii, a pole-rich
//! cone, the desingularizing change of variables `u(ξ) = ξ^(-M)`, and the
//! conjugated inverse branches acting on a bounded sector domain.
//!
//! Inverse branches of f near its poles contract `{|z| > R}` into tiny disks
//! at the poles, but have no uniform distortion there; conjugating by u moves
//! infinity to 0 and turns them into maps `φ_j` of a bounded sector Ω into
//! itself with derivative comparable to the series weight
//! `|b_j|/|a_j|^(1+1/M)`. Triple compositions through a maximal-multiplicity
//! pole, `Φ_{l,j} = φ_{l}∘φ_j∘φ_l`, have uniformly bracketed derivatives for
//! every multiplicity mix.

mod maps;

pub use maps::{finite_difference_phi, finite_difference_triple, DistortionReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::critexp;
use crate::polefield::{PoleDatum, PoleField};
use crate::{Error, Result};

/// Default Koebe-type distortion constant: the classical bound for a
/// univalent map restricted to half its disk of definition.
pub const DEFAULT_KOEBE_K: f64 = 12.0;

/// Radii budget `R0 ≤ R1 ≤ R2` and the distortion constants attached to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiiBudget {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    /// Distortion constant K used in every bracket formula.
    pub koebe_k: f64,
    /// Chain constant L = 2MK.
    pub chain_l: f64,
    pub max_mult: u32,
    /// Whether the three budget inequalities are actually satisfied. Desk
    /// budgets trade them for sampled verification to keep the pole pool
    /// within reach of f64 finite differences.
    pub strict: bool,
}

impl RadiiBudget {
    /// Threshold `2^M · R0` below which pole neighborhoods are undefined.
    pub fn neighborhood_threshold(&self) -> f64 {
        2f64.powi(self.max_mult as i32) * self.r0
    }
}

/// Smallest power-of-two radii satisfying, in order: the singular set and
/// f(0) lie in `D(0, R0/2)`; `R1^(1/M) ≥ L·K·2^(M+1)·R0`; `R2 ≥ 2K^(2M)·R1`.
pub fn admissible_radii(field: &PoleField, koebe_k: f64) -> Result<RadiiBudget> {
    if koebe_k < 1.0 {
        return Err(Error::BadParameter("Koebe constant below 1".into()));
    }
    let m = field.max_mult;
    let mut r0 = field.r0_threshold()?;
    let f0 = field.evaluate(Complex64::new(0.0, 0.0))?;
    while f0.value.norm() + f0.tail_bound > r0 / 2.0 {
        r0 *= 2.0;
    }
    let chain_l = 2.0 * m as f64 * koebe_k;
    let r1_min = (chain_l * koebe_k * 2f64.powi(m as i32 + 1) * r0).powi(m as i32);
    let r1 = next_power_of_two(r1_min);
    let r2 = next_power_of_two(2.0 * koebe_k.powi(2 * m as i32) * r1);
    Ok(RadiiBudget {
        r0,
        r1,
        r2,
        koebe_k,
        chain_l,
        max_mult: m,
        strict: true,
    })
}

/// Desk-scale budget: a small R2 chosen by the caller so the pole pool stays
/// where finite differences and forward replay are f64-verifiable. The budget
/// inequalities are not asserted; contraction and distortion are checked by
/// sampling instead.
pub fn desk_radii(field: &PoleField, koebe_k: f64, r2: f64) -> Result<RadiiBudget> {
    let m = field.max_mult;
    let r0 = field.r0_threshold()?;
    let r1 = (2f64.powi(m as i32) * r0 * 2.0).min(r2 / 2.0).max(r0);
    if r2 <= r1 {
        return Err(Error::BadParameter(format!(
            "desk R2 = {r2} too small for R0 = {r0}"
        )));
    }
    Ok(RadiiBudget {
        r0,
        r1,
        r2,
        koebe_k,
        chain_l: 2.0 * m as f64 * koebe_k,
        max_mult: m,
        strict: false,
    })
}

fn next_power_of_two(x: f64) -> f64 {
    let mut p = 1.0;
    while p < x {
        p *= 2.0;
    }
    p
}

/// Number of explicit head poles usable at this budget (beyond `R1`).
pub fn usable_pole_count(field: &PoleField, budget: &RadiiBudget) -> usize {
    field
        .poles()
        .iter()
        .filter(|p| p.location.norm() > budget.r1)
        .count()
}

/// An open cone `{0 < arg(z) - alpha < 2π·aperture_fraction}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub alpha: f64,
    pub aperture_fraction: f64,
    pub widened: bool,
}

impl ConeSpec {
    pub fn new(alpha: f64, aperture_fraction: f64) -> Self {
        Self {
            alpha,
            aperture_fraction,
            widened: false,
        }
    }

    /// Hat-domain extension: π/8 below the base direction, 1/16 of a turn
    /// above the top, total aperture 7/8 of a turn.
    pub fn widen(&self) -> ConeSpec {
        ConeSpec {
            alpha: self.alpha - std::f64::consts::PI / 8.0,
            aperture_fraction: self.aperture_fraction + 2.0 / 16.0,
            widened: true,
        }
    }

    /// Angle of z above the base direction, folded into [0, 2π).
    pub fn angle_above_base(&self, z: Complex64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut th = (z.arg() - self.alpha) % two_pi;
        if th < 0.0 {
            th += two_pi;
        }
        th
    }

    pub fn contains(&self, z: Complex64) -> bool {
        if z.norm() == 0.0 {
            return false;
        }
        let th = self.angle_above_base(z);
        th > 0.0 && th < 2.0 * std::f64::consts::PI * self.aperture_fraction
    }
}

/// Pick a 3/4-turn cone containing maximal-multiplicity poles, maximizing the
/// restricted weight mass at `t_probe` over a grid of base directions (ties
/// resolved toward the smallest angle).
pub fn select_cone(field: &PoleField, t_probe: f64) -> Result<ConeSpec> {
    let max_mult = field.max_mult;
    let tail_positive = field.tails().iter().any(|t| t.mult == max_mult);
    if !tail_positive {
        return Err(Error::NoMaxPolesInAnyCone);
    }
    let mut best: Option<(f64, ConeSpec)> = None;
    for k in 0..16 {
        let alpha = k as f64 * std::f64::consts::PI / 8.0;
        let cone = ConeSpec::new(alpha, 0.75);
        let mut count = 0usize;
        let mut mass = 0.0f64;
        for p in field.poles() {
            if p.multiplicity == max_mult && cone.contains(p.location) {
                count += 1;
                mass += p.weight(field.mu).powf(t_probe);
            }
        }
        if count < 25 {
            continue;
        }
        if best.map_or(true, |(m, _)| mass > m) {
            best = Some((mass, cone));
        }
    }
    best.map(|(_, c)| c).ok_or(Error::NoMaxPolesInAnyCone)
}

/// Bounded sector `{0 < |ξ| < r_max, theta_lo < arg ξ < theta_lo + width}`:
/// the image of the truncated widened cone under a fixed branch of `u^(-1)`.
/// Boundedness is verified; convexity is not asserted (the aperture exceeds π
/// for M = 1) and sampling uses the sector itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorDomain {
    pub r_max: f64,
    pub theta_lo: f64,
    pub width: f64,
}

impl SectorDomain {
    pub fn contains(&self, xi: Complex64) -> bool {
        let r = xi.norm();
        if r <= 0.0 || r >= self.r_max {
            return false;
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut th = (xi.arg() - self.theta_lo) % two_pi;
        if th < 0.0 {
            th += two_pi;
        }
        th > 0.0 && th < self.width
    }

    /// A reference interior point.
    pub fn center(&self) -> Complex64 {
        Complex64::from_polar(0.5 * self.r_max, self.theta_lo + 0.5 * self.width)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.r_max
    }

    /// Deterministic interior grid, radii geometric and angles linear, both
    /// inset from the boundary.
    pub fn sample_grid(&self, n_r: usize, n_theta: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(n_r * n_theta);
        for i in 0..n_r {
            let s = (i as f64 + 0.5) / n_r as f64;
            let r = self.r_max * 0.05 * (0.9 / 0.05f64).powf(s);
            for j in 0..n_theta {
                let frac = 0.05 + 0.9 * (j as f64 + 0.5) / n_theta as f64;
                out.push(Complex64::from_polar(r, self.theta_lo + frac * self.width));
            }
        }
        out
    }
}

/// Recorded branch selections making a run reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchChoices {
    /// Which m-th root of unity seeds every inverse branch of f.
    pub inverse_branch: u32,
    /// Which branch of `z^(-1/M)` maps the widened cone into the sector
    /// (offset index added to -arg(z)/M).
    pub u_branch: i32,
}

/// The conjugated system: field, budget, cone, sector domain, the pole pool
/// inside the cone beyond 2·R2, and the selected maximal-multiplicity poles.
#[derive(Debug, Clone)]
pub struct ConjugatedSystem {
    pub field: PoleField,
    pub budget: RadiiBudget,
    pub cone: ConeSpec,
    pub omega: SectorDomain,
    pub branch: BranchChoices,
    /// Cone poles with `2·R2 ≤ |a| ≤ pool_hi`, ordered by (|a|, arg).
    pool: Vec<PoleDatum>,
    /// Indices into `pool` of the maximal-multiplicity poles.
    selected: Vec<usize>,
}

impl ConjugatedSystem {
    /// Assemble the system, materializing the pole pool out to `pool_hi`.
    pub fn build(
        field: PoleField,
        budget: RadiiBudget,
        cone: ConeSpec,
        pool_hi: f64,
    ) -> Result<Self> {
        let m = budget.max_mult;
        let lo = 2.0 * budget.r2;
        if pool_hi <= lo {
            return Err(Error::BadParameter("pool_hi below 2·R2".into()));
        }
        let pool: Vec<PoleDatum> = field
            .poles_in_annulus(lo, pool_hi)
            .into_iter()
            .filter(|p| cone.contains(p.location) && p.coeff.norm() > 0.0)
            .collect();
        if pool.is_empty() {
            return Err(Error::PipelineUnavailable(format!(
                "no representable poles in the cone beyond 2·R2 = {lo}"
            )));
        }
        let selected: Vec<usize> = pool
            .iter()
            .enumerate()
            .filter(|(_, p)| p.multiplicity == m)
            .map(|(i, _)| i)
            .collect();
        if selected.is_empty() {
            return Err(Error::PipelineUnavailable(
                "no maximal-multiplicity poles in the pool".into(),
            ));
        }
        let widened = cone.widen();
        let mf = m as f64;
        // ξ-arguments are -arg(z)/M over the widened window.
        let theta_hi_z = widened.alpha + 2.0 * std::f64::consts::PI * widened.aperture_fraction;
        let omega = SectorDomain {
            r_max: budget.r2.powf(-1.0 / mf),
            theta_lo: -theta_hi_z / mf,
            width: 2.0 * std::f64::consts::PI * widened.aperture_fraction / mf,
        };
        Ok(Self {
            field,
            budget,
            cone,
            omega,
            branch: BranchChoices {
                inverse_branch: 0,
                u_branch: 0,
            },
            pool,
            selected,
        })
    }

    pub fn pool(&self) -> &[PoleDatum] {
        &self.pool
    }

    /// Selected maximal-multiplicity poles (indices into the pool).
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn selected_pole(&self, l: usize) -> Result<&PoleDatum> {
        self.selected
            .get(l)
            .map(|&i| &self.pool[i])
            .ok_or(Error::UnknownPole { index: l })
    }

    /// Weight pool for schedule construction: per-pole derivative bracket
    /// ends `(inf, sup) = (w/(2KM), w·2KM)` of the single-branch maps.
    pub fn weight_pool(&self) -> (Vec<f64>, Vec<f64>) {
        let c = 2.0 * self.budget.koebe_k * self.budget.max_mult as f64;
        let mu = self.budget.max_mult;
        let mut lo = Vec::with_capacity(self.pool.len());
        let mut hi = Vec::with_capacity(self.pool.len());
        for p in &self.pool {
            let w = p.weight(mu);
            lo.push(w / c);
            hi.push(w * c);
        }
        (lo, hi)
    }

    /// Serializable descriptor: everything needed to reproduce the run.
    pub fn descriptor(&self) -> SystemDescriptor {
        SystemDescriptor {
            family: self.field.family,
            budget: self.budget,
            cone: self.cone,
            omega: self.omega,
            branch: self.branch,
            pool_len: self.pool.len(),
            selected_len: self.selected.len(),
            selected_poles: self
                .selected
                .iter()
                .take(32)
                .map(|&i| self.pool[i])
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.descriptor()).expect("descriptor serializes")
    }
}

/// JSON document reproducing a conjugated-system run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDescriptor {
    pub family: crate::polefield::FamilyTag,
    pub budget: RadiiBudget,
    pub cone: ConeSpec,
    pub omega: SectorDomain,
    pub branch: BranchChoices,
    pub pool_len: usize,
    pub selected_len: usize,
    pub selected_poles: Vec<PoleDatum>,
}

/// Divergence mass of the cone-restricted weight series at `t`, over the
/// explicit head. Used by cone selection and reported for diagnostics.
pub fn cone_mass(field: &PoleField, cone: &ConeSpec, t: f64) -> f64 {
    field
        .poles()
        .iter()
        .filter(|p| p.multiplicity == field.max_mult && cone.contains(p.location))
        .map(|p| p.weight(field.mu).powf(t))
        .sum()
}

/// Convenience: probe parameter for cone selection a bit under the field's δ.
pub fn default_probe(field: &PoleField) -> f64 {
    let est = critexp::field_critical_exponent(field, 1e-3);
    (est.value() - 0.05).max(0.05)
}
