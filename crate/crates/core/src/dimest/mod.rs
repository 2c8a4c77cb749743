//! Upper cover-sum bounds, the combined dimension bracket, and the
//! backward-orbit escape certificate.
//!
//! The neighborhoods `U_j` of poles beyond radius 2R, pulled back through
//! inverse branches, cover the points whose orbits stay beyond R. Summing
//! spherical diameters of depth-l pullbacks gives the geometric bound
//! `(K^t/R^(t/M)) · [C·M·Σ_{Z_0(R)} w_j^t]^l`, so whenever the bracketed
//! factor drops below 1 the dimension is at most t. The bracket combines the
//! smallest such t over a radius ladder with the pressure-positive lower
//! estimate from the conjugated IFS.

mod boxdim;
mod orbit;

pub use boxdim::{box_count_dimension, BoxCount};
pub use orbit::{
    escape_map_frame, escape_orbit_sample, render_escape_map, render_escape_rows, EscapeMap,
    OrbitClass, OrbitRecord, NEVER_EXITED,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conjugacy::{self, ConjugatedSystem};
use crate::critexp::{self, Confidence, DimensionEstimate, EstimateMethod};
use crate::nais;
use crate::polefield::PoleField;
use crate::{Error, Result};

/// Constants entering the cover bound: the per-level constant C and the
/// distortion constant K of the prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverConstants {
    pub c: f64,
    pub k: f64,
}

impl CoverConstants {
    /// Default C = 2KM for a field of maximal multiplicity M.
    pub fn for_field(field: &PoleField, k: f64) -> Self {
        Self {
            c: 2.0 * k * field.max_mult as f64,
            k,
        }
    }
}

/// One cover level: the geometric bound at radius R, exponent t, depth l.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverLevel {
    pub radius: f64,
    pub level: u32,
    /// `C·M·Σ_{Z_0(R)} w_j^t` (+inf when the weight series diverges at t).
    pub per_level_factor: f64,
    /// `K^t / R^(t/M)`.
    pub prefactor: f64,
    /// `prefactor · factor^level` (0 on underflow; see `log_sum_bound`).
    pub sum_bound: f64,
    pub log_sum_bound: f64,
}

/// Weight mass `Σ w_j^t` over poles with `U_j ⊂ {|z| > R}`, i.e. `|a_j| ≥ 2R`:
/// explicit head plus the analytic tail bounds. `None` when divergent.
fn cover_mass(field: &PoleField, r: f64, t: f64) -> Option<f64> {
    let mut mass = 0.0f64;
    for p in field.poles() {
        if p.location.norm() >= 2.0 * r {
            mass += p.weight(field.mu).powf(t);
        }
    }
    for tail in field.tails() {
        match tail.log_weight_tail_sum(field.mu, t, 2.0 * r) {
            Some(log_sum) => mass += log_sum.exp(),
            None => return None,
        }
    }
    Some(mass)
}

/// The depth-l cover bound at radius R and exponent t. Never enumerates
/// branch tuples: the bound is geometric in l.
pub fn cover_sum(
    field: &PoleField,
    r: f64,
    t: f64,
    level: u32,
    consts: CoverConstants,
) -> Result<CoverLevel> {
    let r0 = field.r0_threshold()?;
    let threshold = 2f64.powi(field.max_mult as i32) * r0;
    if r < threshold {
        return Err(Error::RadiusTooSmall { r, threshold });
    }
    if t <= 0.0 || level == 0 {
        return Err(Error::BadParameter("need t > 0 and level ≥ 1".into()));
    }
    let m = field.max_mult as f64;
    let factor = match cover_mass(field, r, t) {
        Some(mass) => consts.c * m * mass,
        None => f64::INFINITY,
    };
    let prefactor = consts.k.powf(t) / r.powf(t / m);
    let log_sum_bound = prefactor.ln() + level as f64 * factor.ln();
    Ok(CoverLevel {
        radius: r,
        level,
        per_level_factor: factor,
        prefactor,
        sum_bound: log_sum_bound.exp(),
        log_sum_bound,
    })
}

/// Smallest t (to within tol) whose per-level factor at radius R is below 1:
/// the cover sums then vanish geometrically in depth and t bounds the
/// dimension of orbits staying beyond R.
pub fn upper_dimension_estimate(
    field: &PoleField,
    r: f64,
    tol: f64,
    consts: CoverConstants,
) -> Result<DimensionEstimate> {
    let factor_below_one = |t: f64| -> Result<bool> {
        Ok(cover_sum(field, r, t, 1, consts)?.per_level_factor < 1.0)
    };
    let mut lo = 0.0f64;
    let mut hi = 4.0f64;
    if !factor_below_one(hi)? {
        return Err(Error::Inconclusive);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if factor_below_one(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(DimensionEstimate {
        lo,
        hi,
        method: EstimateMethod::CoverUpper,
        tolerance: tol,
        degenerate: false,
        confidence: Confidence::ExactTail,
    })
}

/// One rung of the radius ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderPoint {
    pub radius: f64,
    pub t_upper: f64,
}

/// Upper estimates along increasing radii; the sequence is non-increasing and
/// its minimum bounds the limit dimension.
pub fn upper_dimension_ladder(
    field: &PoleField,
    radii: &[f64],
    tol: f64,
    consts: CoverConstants,
) -> Result<Vec<LadderPoint>> {
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let est = upper_dimension_estimate(field, r, tol, consts)?;
        out.push(LadderPoint {
            radius: r,
            t_upper: est.hi,
        });
    }
    Ok(out)
}

/// Configuration of the full bracket pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct BracketConfig {
    /// Distortion constant for formulas and the cover prefactor.
    pub koebe_k: f64,
    /// Override for the cover constant C (default 2KM).
    pub cover_c: Option<f64>,
    /// Radius ladder for the upper estimates.
    pub ladder: Vec<f64>,
    /// Desk budget radius R2 for the lower pipeline.
    pub desk_r2: f64,
    /// Pool extent (outer radius) for the conjugated system.
    pub pool_hi: f64,
    /// Bisection tolerance.
    pub tol: f64,
    /// Schedule depth and pressure depth.
    pub n_levels: usize,
}

impl Default for BracketConfig {
    fn default() -> Self {
        Self {
            koebe_k: 2.0,
            cover_c: None,
            ladder: vec![1e3, 1e4, 1e5, 1e6, 1e7, 1e8],
            desk_r2: 20.0,
            pool_hi: 80.0,
            tol: 1e-2,
            n_levels: 64,
        }
    }
}

/// Everything the bracket run produces.
#[derive(Debug, Clone, Serialize)]
pub struct BracketReport {
    pub delta: DimensionEstimate,
    pub delta_closed: Option<f64>,
    pub lower: Option<DimensionEstimate>,
    pub lower_unavailable: Option<String>,
    pub ladder: Vec<LadderPoint>,
    pub upper_min: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub cover_constants: CoverConstants,
}

/// The conjugated system at the desk budget, ready for scheduling.
pub fn desk_system(field: &PoleField, cfg: &BracketConfig) -> Result<ConjugatedSystem> {
    let budget = conjugacy::desk_radii(field, cfg.koebe_k, cfg.desk_r2)?;
    let probe = conjugacy::default_probe(field);
    let cone = conjugacy::select_cone(field, probe)?;
    ConjugatedSystem::build(field.clone(), budget, cone, cfg.pool_hi)
}

/// Lower estimate: Bowen bisection over schedules built from the conjugated
/// system's inf-bracket weights.
pub fn lower_dimension_estimate(
    sys: &ConjugatedSystem,
    tol: f64,
    n_levels: usize,
) -> Result<DimensionEstimate> {
    let (lo, hi) = sys.weight_pool();
    let distortion = (2.0 * sys.budget.koebe_k * sys.budget.max_mult as f64).powi(2);
    let family = nais::ContractionFamily::new(lo.clone(), hi, distortion)?;
    Ok(nais::bowen_dimension(
        &family,
        |t| nais::build_schedule(&lo, t, n_levels),
        tol,
        n_levels,
    ))
}

/// Combined bracket: pressure-certified lower end, cover-ladder upper end,
/// with the critical exponent alongside.
pub fn dimension_bracket(field: &PoleField, cfg: &BracketConfig) -> Result<BracketReport> {
    let delta = critexp::field_critical_exponent(field, cfg.tol.min(1e-3));
    let consts = CoverConstants {
        c: cfg
            .cover_c
            .unwrap_or(2.0 * cfg.koebe_k * field.max_mult as f64),
        k: cfg.koebe_k,
    };
    let ladder = upper_dimension_ladder(field, &cfg.ladder, cfg.tol.min(1e-3), consts)?;
    let upper_min = ladder
        .iter()
        .map(|p| p.t_upper)
        .fold(f64::INFINITY, f64::min);
    let (lower, lower_unavailable) = match desk_system(field, cfg) {
        Ok(sys) => match lower_dimension_estimate(&sys, cfg.tol, cfg.n_levels) {
            Ok(est) => (Some(est), None),
            Err(e) => (None, Some(e.to_string())),
        },
        Err(e) => (None, Some(e.to_string())),
    };
    let bracket_lo = lower.map(|e| e.lo).unwrap_or(0.0);
    Ok(BracketReport {
        delta,
        delta_closed: critexp::closed_form_delta(field),
        lower,
        lower_unavailable,
        ladder,
        upper_min,
        bracket_lo,
        bracket_hi: upper_min,
        cover_constants: consts,
    })
}

/// A verified pseudo-orbit: points of a backward chain through scheduled
/// inverse branches, each checked one forward application at a time.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub seeds: usize,
    pub verified: usize,
    pub forward_steps: usize,
    pub min_modulus: f64,
    pub max_step_error: f64,
    pub r2: f64,
}

/// Build `n_seeds` seeds by depth-`triple_depth` backward orbits of the
/// third-iterate maps (3·depth single pullbacks) and verify that the forward
/// orbit stays at modulus ≥ R2 for `forward_steps` steps, with per-step
/// consistency `|f(z_k) - z_(k+1)| ≤ rel_tol·|z_(k+1)|`.
///
/// The chain is replayed rather than re-iterated: every z_k comes from its
/// own Newton solve and is kept pole-anchored (offset form), and each check
/// is a single forward application from that exact point. Twenty naive
/// forward steps would amplify the coordinate rounding by |f'|^20 and verify
/// nothing.
pub fn escape_certificate(
    sys: &ConjugatedSystem,
    n_seeds: usize,
    triple_depth: usize,
    forward_steps: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<CertificateReport> {
    let chain_len = 3 * triple_depth;
    if chain_len < forward_steps + 1 {
        return Err(Error::BadParameter(
            "backward chain shorter than the forward horizon".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = sys.pool();
    let mut verified = 0usize;
    let mut min_modulus = f64::INFINITY;
    let mut max_step_error = 0.0f64;
    for _ in 0..n_seeds {
        // Random pole chain; triples pass through a selected max-mult pole.
        let mut xi = sys.omega.center();
        let mut chain = Vec::with_capacity(chain_len);
        for step in 0..chain_len {
            let pole = if step % 3 == 1 {
                // middle factor of each triple: any pool pole
                pool[rng.gen_range(0..pool.len())]
            } else {
                *sys.selected_pole(rng.gen_range(0..sys.selected().len()))?
            };
            let (xi_next, op) = sys.phi_with_branch(&pole, xi)?;
            xi = xi_next;
            chain.push(op);
        }
        // Deepest pullback first: the forward orbit walks the chain backward.
        chain.reverse();
        let mut ok = true;
        for k in 0..=forward_steps {
            let z = chain[k].point();
            min_modulus = min_modulus.min(z.norm());
            if z.norm() < sys.budget.r2 {
                ok = false;
                break;
            }
            if k < forward_steps {
                let next = chain[k + 1].point();
                let fz = sys
                    .field
                    .evaluate_offset(&chain[k].pole, chain[k].offset)?
                    .0;
                let err = (fz.value - next).norm() / next.norm();
                max_step_error = max_step_error.max(err);
                if err > rel_tol {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            verified += 1;
        }
    }
    Ok(CertificateReport {
        seeds: n_seeds,
        verified,
        forward_steps,
        min_modulus,
        max_step_error,
        r2: sys.budget.r2,
    })
}
