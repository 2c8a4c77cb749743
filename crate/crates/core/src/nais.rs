//! Generic non-autonomous conformal IFS engine: level schedules built from a
//! weight pool, subexponential growth checks, lower-pressure evaluation, and
//! the dimension of the limit set as the zero crossing of the pressure.
//!
//! A schedule assigns to each composition depth n a finite index set I^(n).
//! Blocks are grown until their weight mass `Σ inf|Φ'|^t` reaches 2, block
//! starts advance by one through the pool, and consecutive level sizes differ
//! by at most one, which forces `(1/n)·log #I^(n) → 0`. Every level then
//! carries mass ≥ 2, so the depth-averaged log sums stay above log 2 — the
//! mechanism behind the positive lower pressure at parameters below the
//! critical exponent.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::critexp::{Confidence, DimensionEstimate, EstimateMethod};
use crate::{Error, Result};

/// Per-block weight mass target.
pub const BLOCK_MASS: f64 = 2.0;

/// Indexed contraction family described by per-map derivative brackets.
#[derive(Debug, Clone)]
pub struct ContractionFamily {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Uniform contraction: max of the upper ends, < 1.
    pub contraction: f64,
    /// Uniform distortion constant for compositions (metadata for bracket
    /// widths).
    pub distortion: f64,
}

impl ContractionFamily {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, distortion: f64) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::BadParameter("bracket arrays mismatch".into()));
        }
        let mut contraction = 0.0f64;
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(l > 0.0 && l <= h) {
                return Err(Error::BadParameter(
                    "bracket ends must be 0 < lo ≤ hi".into(),
                ));
            }
            if h >= 1.0 {
                return Err(Error::BadParameter(format!(
                    "map with derivative bound {h} is not a contraction"
                )));
            }
            contraction = contraction.max(h);
        }
        Ok(Self {
            lo,
            hi,
            contraction,
            distortion,
        })
    }

    /// Constant family: n identical maps of derivative modulus c.
    pub fn autonomous(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n], vec![c; n], 1.0)
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }
}

/// One level: indices `start..start+len` into the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LevelSpec {
    pub start: usize,
    pub len: usize,
}

/// Index sets per depth, plus the growth diagnostic `(1/n)·log #I^(n)`.
#[derive(Debug, Clone, Serialize)]
pub struct IndexSchedule {
    pub levels: Vec<LevelSpec>,
    pub growth_log: Vec<f64>,
}

impl IndexSchedule {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn from_levels(levels: Vec<LevelSpec>) -> Self {
        let growth_log = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.len as f64).ln() / (i + 1) as f64)
            .collect();
        Self { levels, growth_log }
    }

    /// Autonomous schedule: every level is the full index set.
    pub fn autonomous(n_maps: usize, n_levels: usize) -> Self {
        Self::from_levels(vec![
            LevelSpec {
                start: 0,
                len: n_maps
            };
            n_levels
        ])
    }
}

/// Build a schedule over `weights` (the inf-bracket values `inf|Φ'|`) at
/// parameter t: per block, indices accumulate until the block mass
/// `Σ w^t ≥ 2`; block starts advance one index per block; level sizes
/// interpolate by at most +1 between blocks.
pub fn build_schedule(weights: &[f64], t: f64, n_levels: usize) -> Result<IndexSchedule> {
    if weights.is_empty() || n_levels == 0 {
        return Err(Error::BadParameter("empty pool or zero levels".into()));
    }
    // Prefix sums of w^t.
    let mut prefix = Vec::with_capacity(weights.len() + 1);
    prefix.push(0.0f64);
    for &w in weights {
        prefix.push(prefix.last().unwrap() + w.powf(t));
    }
    let pool = weights.len();

    let mut levels: Vec<LevelSpec> = Vec::with_capacity(n_levels);
    let mut block = 0usize; // block index = start offset into the pool
    let mut prev_len = 0usize;
    while levels.len() < n_levels {
        let start = block;
        if start >= pool {
            return Err(Error::PoolExhausted {
                level: levels.len(),
                t,
            });
        }
        // Smallest len with block mass ≥ target; lengths never shrink.
        let mut len = prev_len.max(1).min(pool - start);
        if prefix[start + len] - prefix[start] < BLOCK_MASS {
            let need = BLOCK_MASS + prefix[start];
            if *prefix.last().unwrap() < need {
                return Err(Error::PoolExhausted {
                    level: levels.len(),
                    t,
                });
            }
            // First index where the running sum reaches the target.
            let mut lo = start + len;
            let mut hi = pool;
            while lo < hi {
                let mid = (lo + hi) / 2;
                if prefix[mid] >= need {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            len = lo - start;
        }
        // Interpolating levels: grow the previous block by one index at a
        // time until this block's size is reached.
        if !levels.is_empty() && len > prev_len {
            let prev = *levels.last().unwrap();
            for extra in 1..=(len - prev_len) {
                if prev.start + prev_len + extra > pool {
                    return Err(Error::PoolExhausted {
                        level: levels.len(),
                        t,
                    });
                }
                levels.push(LevelSpec {
                    start: prev.start,
                    len: prev_len + extra,
                });
                if levels.len() >= n_levels {
                    break;
                }
            }
            if levels.len() >= n_levels {
                break;
            }
        }
        levels.push(LevelSpec { start, len });
        prev_len = len;
        block += 1;
    }
    levels.truncate(n_levels);
    Ok(IndexSchedule::from_levels(levels))
}

/// Subexponential-growth check: mean of the last quartile of
/// `(1/n)·log #I^(n)` must be below epsilon.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub pass: bool,
    pub last_quartile_mean: f64,
    pub curve: Vec<f64>,
}

pub fn growth_check(schedule: &IndexSchedule, epsilon: f64) -> Result<GrowthReport> {
    let n = schedule.depth();
    if n < 10 {
        return Err(Error::BadParameter(
            "growth check needs at least 10 levels".into(),
        ));
    }
    let from = 3 * n / 4;
    let tail = &schedule.growth_log[from..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(GrowthReport {
        pass: mean < epsilon,
        last_quartile_mean: mean,
        curve: schedule.growth_log.clone(),
    })
}

/// Lower-pressure data at one parameter.
#[derive(Debug, Clone, Serialize)]
pub struct PressureCurve {
    pub t: f64,
    /// log Σ_{I^(k)} lo_i^t per level.
    pub per_level_log_sums_lo: Vec<f64>,
    pub per_level_log_sums_hi: Vec<f64>,
    /// Running averages (1/n)·Σ_{k≤n} of the above.
    pub depth_lo: Vec<f64>,
    pub depth_hi: Vec<f64>,
    /// Bracket at the deepest evaluated level.
    pub pressure_bracket: (f64, f64),
    /// Running minimum of the lower average over the last half of the depths.
    pub liminf_lo: f64,
    pub monotone_tail: bool,
}

/// Pressure bracket from the chain-rule bounds: the sup norm of a composition
/// derivative sits between the products of per-level infs and sups, so the
/// depth-n log-sum average is bracketed by the lo/hi level sums.
pub fn lower_pressure(
    family: &ContractionFamily,
    schedule: &IndexSchedule,
    t: f64,
    n_max: usize,
) -> PressureCurve {
    let depth = schedule.depth().min(n_max);
    let mut log_lo = Vec::with_capacity(depth);
    let mut log_hi = Vec::with_capacity(depth);
    for level in &schedule.levels[..depth] {
        let mut s_lo = 0.0f64;
        let mut s_hi = 0.0f64;
        for i in level.start..level.start + level.len {
            s_lo += family.lo[i].powf(t);
            s_hi += family.hi[i].powf(t);
        }
        log_lo.push(s_lo.ln());
        log_hi.push(s_hi.ln());
    }
    let mut depth_lo = Vec::with_capacity(depth);
    let mut depth_hi = Vec::with_capacity(depth);
    let (mut acc_lo, mut acc_hi) = (0.0f64, 0.0f64);
    for k in 0..depth {
        acc_lo += log_lo[k];
        acc_hi += log_hi[k];
        depth_lo.push(acc_lo / (k + 1) as f64);
        depth_hi.push(acc_hi / (k + 1) as f64);
    }
    let from = depth / 2;
    let tail = &depth_lo[from..];
    let liminf_lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let monotone_tail = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    PressureCurve {
        t,
        per_level_log_sums_lo: log_lo,
        per_level_log_sums_hi: log_hi,
        pressure_bracket: (
            *depth_lo.last().unwrap_or(&f64::NEG_INFINITY),
            *depth_hi.last().unwrap_or(&f64::NEG_INFINITY),
        ),
        depth_lo,
        depth_hi,
        liminf_lo,
        monotone_tail,
    }
}

/// Sign classification of a pressure bracket.
enum PressureSign {
    Positive,
    Negative,
    Straddle,
}

/// Dimension of the limit set by bisection on the pressure sign. The schedule
/// builder may refuse a parameter (pool exhausted); that counts as the
/// negative side, since no positive pressure can be certified there.
pub fn bowen_dimension(
    family: &ContractionFamily,
    schedule_builder: impl Fn(f64) -> Result<IndexSchedule>,
    tol: f64,
    n_max: usize,
) -> DimensionEstimate {
    assert!(tol > 0.0);
    let classify = |t: f64| -> PressureSign {
        match schedule_builder(t) {
            Err(_) => PressureSign::Negative,
            Ok(s) => {
                let p = lower_pressure(family, &s, t, n_max);
                if p.pressure_bracket.0 > 0.0 {
                    PressureSign::Positive
                } else if p.pressure_bracket.1 < 0.0 {
                    PressureSign::Negative
                } else {
                    PressureSign::Straddle
                }
            }
        }
    };
    let mut lo = 0.0f64;
    let mut hi = 4.0f64;
    let mut straddled = false;
    if matches!(classify(hi), PressureSign::Positive) {
        return DimensionEstimate {
            lo: hi,
            hi,
            method: EstimateMethod::PressureLower,
            tolerance: tol,
            degenerate: true,
            confidence: Confidence::ExactTail,
        };
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match classify(mid) {
            PressureSign::Positive => lo = mid,
            PressureSign::Negative => hi = mid,
            PressureSign::Straddle => {
                straddled = true;
                hi = mid;
            }
        }
    }
    DimensionEstimate {
        lo,
        hi,
        method: EstimateMethod::PressureLower,
        tolerance: if straddled { 2.0 * tol } else { tol },
        degenerate: false,
        confidence: Confidence::ExactTail,
    }
}

/// Depth-n images of the domain center under scheduled compositions.
#[derive(Debug, Clone)]
pub struct LimitSetSample {
    pub points: Vec<Complex64>,
    pub depth: usize,
}

/// Breadth-limited enumeration of depth-long tuples: apply the innermost
/// level to the center, then push through the outer levels. When full
/// branching would exceed `max_points`, (point, index) pairs are drawn with a
/// seeded generator instead, so the per-level work stays bounded.
pub fn sample_limit_set(
    map: &dyn Fn(usize, Complex64) -> Result<Complex64>,
    schedule: &IndexSchedule,
    center: Complex64,
    depth: usize,
    max_points: usize,
    seed: u64,
) -> Result<LimitSetSample> {
    if depth == 0 || depth > schedule.depth() {
        return Err(Error::BadParameter(format!(
            "depth {depth} outside schedule depth {}",
            schedule.depth()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![center];
    for level in schedule.levels[..depth].iter().rev() {
        let full = points.len().saturating_mul(level.len);
        let mut next;
        if full <= max_points {
            next = Vec::with_capacity(full);
            for &x in &points {
                for i in level.start..level.start + level.len {
                    next.push(map(i, x)?);
                }
            }
        } else {
            next = Vec::with_capacity(max_points);
            for _ in 0..max_points {
                let x = points[rng.gen_range(0..points.len())];
                let i = level.start + rng.gen_range(0..level.len);
                next.push(map(i, x)?);
            }
        }
        points = next;
    }
    Ok(LimitSetSample { points, depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn moran(n: usize, c: f64) -> f64 {
        (n as f64).ln() / (1.0 / c).ln()
    }

    #[test]
    fn schedule_blocks_of_constant_weights() {
        // w^t = 0.5 each: every block needs 4 indices.
        let w = vec![0.25f64; 64]; // at t = 0.5, w^t = 0.5
        let s = build_schedule(&w, 0.5, 10).unwrap();
        for level in &s.levels {
            assert_eq!(level.len, 4);
        }
        // Starts advance one per block.
        assert_eq!(s.levels[0].start, 0);
        assert_eq!(s.levels[1].start, 1);
    }

    #[test]
    fn schedule_cumulative_block() {
        // w^t = 1.5, 0.3, 0.3, 0.3, ... at t = 1: first block is 3 indices.
        let mut w = vec![0.3f64; 50];
        w[0] = 1.5;
        let s = build_schedule(&w, 1.0, 5).unwrap();
        assert_eq!(s.levels[0].len, 3); // 1.5+0.3+0.3 = 2.1 ≥ 2
    }

    #[test]
    fn schedule_levels_satisfy_mass_and_growth_rules() {
        // Decaying pool: block lengths grow, interpolation keeps steps ≤ 1.
        let w: Vec<f64> = (1..4000).map(|j| 0.8 / (j as f64).powf(0.8)).collect();
        let t = 1.0;
        let s = build_schedule(&w, t, 40).unwrap();
        let mass =
            |l: &LevelSpec| -> f64 { (l.start..l.start + l.len).map(|i| w[i].powf(t)).sum() };
        for level in &s.levels {
            assert!(
                mass(level) >= BLOCK_MASS - 1e-12,
                "level mass {}",
                mass(level)
            );
        }
        for pair in s.levels.windows(2) {
            assert!(pair[1].len <= pair[0].len + 1, "size step > 1");
        }
    }

    #[test]
    fn pool_exhaustion_reported() {
        let w = vec![0.5f64; 8];
        match build_schedule(&w, 2.0, 50) {
            Err(Error::PoolExhausted { .. }) => {}
            other => panic!("expected PoolExhausted, got {other:?}"),
        }
    }

    #[test]
    fn growth_passes_for_constant_and_fails_for_exponential() {
        let s = IndexSchedule::autonomous(5, 40);
        assert!(growth_check(&s, 0.1).unwrap().pass);
        // Synthetic schedule with #I^(n) = 2^n.
        let levels: Vec<LevelSpec> = (0..20)
            .map(|n| LevelSpec {
                start: 0,
                len: 1usize << n,
            })
            .collect();
        let s2 = IndexSchedule::from_levels(levels);
        assert!(!growth_check(&s2, 0.1).unwrap().pass);
    }

    #[test]
    fn growth_passes_for_built_schedule() {
        let w: Vec<f64> = (1..2000).map(|j| 0.5 / (j as f64)).collect();
        let s = build_schedule(&w, 1.0, 24).unwrap();
        let rep = growth_check(&s, 0.5).unwrap();
        assert!(rep.pass, "last-quartile mean {}", rep.last_quartile_mean);
        // The +1 rule keeps the growth curve eventually decreasing.
        let tail = &s.growth_log[s.growth_log.len() / 2..];
        assert!(tail.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    }

    #[test]
    fn autonomous_pressure_is_exact() {
        // N maps of constant modulus c: pressure = log(N·c^t), degenerate
        // bracket.
        let fam = ContractionFamily::autonomous(4, 0.5).unwrap();
        let s = IndexSchedule::autonomous(4, 16);
        let p = lower_pressure(&fam, &s, 1.0, 16);
        assert_relative_eq!(
            p.pressure_bracket.0,
            (4.0 * 0.5f64).ln(),
            max_relative = 1e-12
        );
        assert_relative_eq!(p.pressure_bracket.0, p.pressure_bracket.1);
    }

    #[test]
    fn single_small_map_pressure_negative() {
        let fam = ContractionFamily::autonomous(1, 0.25).unwrap();
        let s = IndexSchedule::autonomous(1, 8);
        let p = lower_pressure(&fam, &s, 1.0, 8);
        assert!(p.pressure_bracket.1 < 0.0);
        assert_relative_eq!(p.pressure_bracket.0, 0.25f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn block_schedules_certify_log2_pressure() {
        let w: Vec<f64> = (1..3000).map(|j| 0.6 / (j as f64).powf(0.9)).collect();
        let t = 1.0;
        let s = build_schedule(&w, t, 32).unwrap();
        let fam =
            ContractionFamily::new(w.clone(), w.iter().map(|x| x * 1.5).collect(), 1.5).unwrap();
        let p = lower_pressure(&fam, &s, t, 32);
        assert!(
            p.pressure_bracket.0 >= BLOCK_MASS.ln() - 1e-9,
            "pressure lo {}",
            p.pressure_bracket.0
        );
        assert!(p.liminf_lo >= BLOCK_MASS.ln() - 1e-9);
    }

    #[test]
    fn moran_dimensions_via_bowen_bisection() {
        for (n, c, expect) in [
            (4usize, 0.5f64, 2.0f64),
            (2, 1.0 / 3.0, moran(2, 1.0 / 3.0)),
        ] {
            let fam = ContractionFamily::autonomous(n, c).unwrap();
            let est =
                bowen_dimension(&fam, |_t| Ok(IndexSchedule::autonomous(n, 32)), 1e-4, 32);
            assert!(
                (est.value() - expect).abs() <= 1e-3,
                "N = {n}, c = {c}: got {} want {expect}",
                est.value()
            );
            assert!((expect - moran(n, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn pressure_monotone_in_t() {
        let fam = ContractionFamily::autonomous(3, 0.4).unwrap();
        let s = IndexSchedule::autonomous(3, 16);
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let t = 0.2 * k as f64;
            let p = lower_pressure(&fam, &s, t, 16);
            assert!(p.pressure_bracket.0 <= last + 1e-12);
            last = p.pressure_bracket.0;
        }
    }

    #[test]
    fn limit_set_sampling_contracts_and_nests() {
        // Two affine maps on the unit disk: x/4 and x/4 + 1/2.
        let map = |i: usize, x: Complex64| -> Result<Complex64> {
            Ok(match i {
                0 => 0.25 * x,
                _ => 0.25 * x + Complex64::new(0.5, 0.0),
            })
        };
        let s = IndexSchedule::autonomous(2, 12);
        let c0 = Complex64::new(0.3, 0.1);
        let shallow = sample_limit_set(&map, &s, c0, 4, 4096, 7).unwrap();
        let deep = sample_limit_set(&map, &s, c0, 8, 4096, 7).unwrap();
        assert_eq!(shallow.points.len(), 16);
        assert_eq!(deep.points.len(), 256);
        // Every depth-8 point is within s^4·diam of a depth-4 point.
        let tol = 0.25f64.powi(4) * 2.0;
        for p in &deep.points {
            let d = shallow
                .points
                .iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d <= tol, "nesting violated: {d} > {tol}");
        }
    }

    #[test]
    fn limit_set_single_map_is_orbit_tail() {
        let map = |_i: usize, x: Complex64| -> Result<Complex64> {
            Ok(0.5 * x + Complex64::new(0.25, 0.0))
        };
        let s = IndexSchedule::autonomous(1, 10);
        let sample = sample_limit_set(&map, &s, Complex64::new(0.0, 0.0), 10, 100, 1).unwrap();
        assert_eq!(sample.points.len(), 1);
        // Fixed point of x/2 + 1/4 is 1/2; depth-10 iterate is close.
        assert!((sample.points[0].re - 0.5).abs() < 1e-3);
    }

    #[test]
    fn rejects_non_contracting_family() {
        assert!(ContractionFamily::new(vec![0.5], vec![1.0], 1.0).is_err());
        assert!(ContractionFamily::new(vec![0.0], vec![0.5], 1.0).is_err());
    }
}
