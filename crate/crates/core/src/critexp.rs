//! Critical exponents of weight series, function order, and the
//! order-multiplicity upper bound `2Mρ/(2+Mρ)`.
//!
//! The dimension of the escaping set equals the critical exponent δ of
//! `Σ_j (|b_j|/|a_j|^(1+1/M))^t` — the infimum of t for which the series
//! converges. Convergence at a given t is decided by the tail model; the
//! explicit head is a finite sum and never decides on its own. δ is found by
//! bisection on that decision. Restricting to poles of multiplicity ≤ M gives
//! the exponents δ_M of orbits escaping through bounded-multiplicity poles.

use serde::{Deserialize, Serialize};

use crate::polefield::{PoleField, TailModel, Ternary};
use crate::{Error, Result};

/// Default bisection tolerance.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Bisection search interval; profiles from planar pole fields clamp to [0, 2].
const SEARCH_HI: f64 = 4.0;

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ClosedForm,
    Bisection,
    PressureLower,
    CoverUpper,
    Regression,
}

/// Whether the tail was decided exactly or fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    ExactTail,
    RegressionOnly,
}

/// A dimension value or bracket with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub lo: f64,
    pub hi: f64,
    pub method: EstimateMethod,
    pub tolerance: f64,
    pub degenerate: bool,
    pub confidence: Confidence,
}

impl DimensionEstimate {
    pub fn exact(v: f64, method: EstimateMethod) -> Self {
        Self {
            lo: v,
            hi: v,
            method,
            tolerance: 0.0,
            degenerate: false,
            confidence: Confidence::ExactTail,
        }
    }

    /// Midpoint of the bracket.
    pub fn value(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Order of a function: critical exponent of `Σ |a_j|^(-t)`, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoValue {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub rho: RhoValue,
    pub method: EstimateMethod,
}

/// Weight sequence with a classified tail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesProfile {
    /// Explicit head weights (finite, positive).
    pub weights: Vec<f64>,
    /// Tail classifier; `None` means finitely many terms (degenerate).
    pub tail: Option<TailModel>,
    pub mu: u32,
    /// Multiplicity cap applied when building from a pole field.
    pub restriction: Option<u32>,
    /// Profiles built from planar pole data clamp their exponent to [0, 2].
    pub from_pole_field: bool,
}

impl SeriesProfile {
    pub fn raw(weights: Vec<f64>, tail: Option<TailModel>) -> Self {
        Self {
            weights,
            tail,
            mu: 1,
            restriction: None,
            from_pole_field: false,
        }
    }
}

/// One bisection step of the trace requested by the CLI `--trace` flag.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub decision: Ternary,
    pub partial_sum_head: f64,
    /// Tail bound of `Σ w^t` when convergent, +inf when divergent/unknown.
    pub tail_bound: f64,
}

/// Full-series weight profile of a field (μ = field's μ).
pub fn profile_of(field: &PoleField) -> SeriesProfile {
    let weights = field
        .poles()
        .iter()
        .map(|p| p.weight(field.mu))
        .collect();
    SeriesProfile {
        weights,
        tail: field.weight_tail_model(),
        mu: field.mu,
        restriction: None,
        from_pole_field: true,
    }
}

/// Profile restricted to poles of multiplicity ≤ cap; μ becomes the largest
/// multiplicity among what is kept.
pub fn restricted_profile(field: &PoleField, cap: u32) -> Result<SeriesProfile> {
    let head: Vec<_> = field
        .poles()
        .iter()
        .filter(|p| p.multiplicity <= cap)
        .collect();
    let tails: Vec<_> = field.tails().iter().filter(|t| t.mult <= cap).collect();
    if head.is_empty() && tails.is_empty() {
        return Err(Error::EmptyRestriction { cap });
    }
    let mu = head
        .iter()
        .map(|p| p.multiplicity)
        .chain(tails.iter().map(|t| t.mult))
        .max()
        .unwrap();
    let models: Vec<TailModel> = tails.iter().map(|t| t.weight_tail_model(mu)).collect();
    Ok(SeriesProfile {
        weights: head.iter().map(|p| p.weight(mu)).collect(),
        tail: TailModel::combine(&models),
        mu,
        restriction: Some(cap),
        from_pole_field: true,
    })
}

/// Convergence of `Σ w_j^t` for the profile. The decision is the tail's: a
/// finite head cannot change convergence, and a profile without a tail is a
/// finite sum that converges everywhere (degenerate downstream).
pub fn converges(profile: &SeriesProfile, t: f64) -> Ternary {
    match &profile.tail {
        Some(model) => model.converges_at(t),
        None => Ternary::Converges,
    }
}

/// Critical exponent of the profile by bisection, to within `tol`.
pub fn critical_exponent(profile: &SeriesProfile, tol: f64) -> DimensionEstimate {
    critical_exponent_traced(profile, tol, false).0
}

/// Same, optionally recording one trace row per bisection step.
pub fn critical_exponent_traced(
    profile: &SeriesProfile,
    tol: f64,
    trace: bool,
) -> (DimensionEstimate, Vec<TraceRow>) {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut rows = Vec::new();
    let hi_cap = if profile.from_pole_field { 2.0 } else { SEARCH_HI };

    if profile.tail.is_none() {
        // Finitely many poles: the series converges for every t > 0 and δ is
        // defined as 0 with the degenerate flag.
        return (
            DimensionEstimate {
                lo: 0.0,
                hi: 0.0,
                method: EstimateMethod::ClosedForm,
                tolerance: 0.0,
                degenerate: true,
                confidence: Confidence::ExactTail,
            },
            rows,
        );
    }

    let probe = |t: f64, rows: &mut Vec<TraceRow>| -> Ternary {
        let d = converges(profile, t);
        if trace {
            let partial: f64 = profile.weights.iter().map(|w| w.powf(t)).sum();
            let tail_bound = match d {
                Ternary::Converges => profile
                    .tail
                    .as_ref()
                    .and_then(|m| m.critical_t())
                    .map(|_| f64::NAN)
                    .unwrap_or(f64::NAN),
                _ => f64::INFINITY,
            };
            rows.push(TraceRow {
                t,
                decision: d,
                partial_sum_head: partial,
                tail_bound,
            });
        }
        d
    };

    // Regression fallback when the tail cannot decide.
    if probe(1.0, &mut rows) == Ternary::Inconclusive {
        let est = regression_exponent(profile, tol, hi_cap);
        return (est, rows);
    }

    // Invariant: diverges at lo (δ ≥ 0 always: infinitely many terms at t=0),
    // converges at hi.
    let mut lo = 0.0f64;
    let mut hi = hi_cap;
    if probe(hi, &mut rows) != Ternary::Converges {
        // Diverges everywhere in range (e.g. declared infinite threshold).
        return (
            DimensionEstimate {
                lo: hi_cap,
                hi: hi_cap,
                method: EstimateMethod::Bisection,
                tolerance: tol,
                degenerate: false,
                confidence: Confidence::ExactTail,
            },
            rows,
        );
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match probe(mid, &mut rows) {
            Ternary::Converges => hi = mid,
            _ => lo = mid,
        }
    }
    (
        DimensionEstimate {
            lo,
            hi,
            method: EstimateMethod::Bisection,
            tolerance: tol,
            degenerate: false,
            confidence: Confidence::ExactTail,
        },
        rows,
    )
}

/// Log-log slope of the head weights against their index, as a stand-in
/// threshold when no tail model is decisive. Flagged `RegressionOnly`.
fn regression_exponent(profile: &SeriesProfile, tol: f64, hi_cap: f64) -> DimensionEstimate {
    let n = profile.weights.len();
    let half = &profile.weights[n / 2..];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, w) in half.iter().enumerate() {
        if *w > 0.0 {
            xs.push(((n / 2 + i + 1) as f64).ln());
            ys.push(w.ln());
        }
    }
    let est = if xs.len() < 4 {
        hi_cap
    } else {
        let q = -least_squares_slope(&xs, &ys);
        if q <= 1.0 {
            hi_cap
        } else {
            (1.0 / q).min(hi_cap)
        }
    };
    DimensionEstimate {
        lo: (est - tol).max(0.0),
        hi: (est + tol).min(hi_cap),
        method: EstimateMethod::Regression,
        tolerance: tol,
        degenerate: false,
        confidence: Confidence::RegressionOnly,
    }
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// δ of the full weight series of a field.
pub fn field_critical_exponent(field: &PoleField, tol: f64) -> DimensionEstimate {
    critical_exponent(&profile_of(field), tol)
}

/// δ_M: critical exponent restricted to poles of multiplicity ≤ cap.
pub fn restricted_critical_exponent(
    field: &PoleField,
    cap: u32,
    tol: f64,
) -> Result<DimensionEstimate> {
    Ok(critical_exponent(&restricted_profile(field, cap)?, tol))
}

/// The ladder M ↦ δ_M for every multiplicity present, and its supremum δ_∞
/// (attained at M = max multiplicity).
pub fn restriction_ladder(
    field: &PoleField,
    tol: f64,
) -> Result<(Vec<(u32, DimensionEstimate)>, DimensionEstimate)> {
    let mut ladder = Vec::new();
    for cap in 1..=field.max_mult {
        if let Ok(est) = restricted_critical_exponent(field, cap, tol) {
            ladder.push((cap, est));
        }
    }
    let sup = ladder
        .last()
        .map(|(_, e)| *e)
        .ok_or(Error::EmptyRestriction { cap: 0 })?;
    Ok((ladder, sup))
}

/// Order ρ: critical exponent of `Σ |a_j|^(-t)`, +∞ when that series diverges
/// for every t (log-spaced poles).
pub fn order_of_function(field: &PoleField, tol: f64) -> Result<OrderEstimate> {
    if field.finite {
        return Err(Error::BadParameter(
            "order undefined for finitely many poles".into(),
        ));
    }
    let order_models: Vec<TailModel> =
        field.tails().iter().map(|t| t.order_tail_model()).collect();
    let tail = TailModel::combine(&order_models);
    match tail {
        Some(TailModel::CustomHint {
            critical_t: Some(tc),
        }) if tc.is_infinite() => {
            return Ok(OrderEstimate {
                rho: RhoValue::Infinite,
                method: EstimateMethod::ClosedForm,
            })
        }
        Some(TailModel::CustomHint { critical_t: None }) | None => {
            // No usable geometry: regress log|a_j| against log j; slope 1/ρ.
            let xs: Vec<f64> = (1..=field.poles().len())
                .map(|i| (i as f64).ln())
                .collect();
            let ys: Vec<f64> = field
                .poles()
                .iter()
                .map(|p| p.location.norm().ln())
                .collect();
            let n = xs.len();
            if n < 8 {
                return Err(Error::Inconclusive);
            }
            let slope = least_squares_slope(&xs[n / 2..], &ys[n / 2..]);
            let rho = if slope <= 1e-6 {
                RhoValue::Infinite
            } else {
                RhoValue::Finite(1.0 / slope)
            };
            return Ok(OrderEstimate {
                rho,
                method: EstimateMethod::Regression,
            });
        }
        _ => {}
    }
    let profile = SeriesProfile {
        weights: field
            .poles()
            .iter()
            .map(|p| 1.0 / p.location.norm())
            .collect(),
        tail,
        mu: 1,
        restriction: None,
        from_pole_field: false,
    };
    let est = critical_exponent(&profile, tol);
    Ok(OrderEstimate {
        rho: RhoValue::Finite(est.value()),
        method: est.method,
    })
}

/// Upper bound `2Mρ/(2+Mρ)` for the escaping-set dimension of a function of
/// order ρ with pole multiplicities at most M.
pub fn bk_upper_bound(m: u32, rho: &RhoValue) -> f64 {
    match rho {
        RhoValue::Infinite => 2.0,
        RhoValue::Finite(r) => {
            let mr = m as f64 * r;
            if mr == 0.0 {
                0.0
            } else {
                2.0 * mr / (2.0 + mr)
            }
        }
    }
}

/// Exact δ for the built-in families, used as the reporting target.
pub fn closed_form_delta(field: &PoleField) -> Option<f64> {
    use crate::polefield::FamilyTag::*;
    match field.family {
        LatticePower { alpha, mult } => Some(2.0 / (alpha + 1.0 + 1.0 / mult as f64)),
        LatticeExp { .. } | LogPoles | Gamma { .. } => Some(0.0),
        Custom => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polefield::{PoleDatum, PoleField};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn p_series_profile_decisions() {
        // w_j = 1/j^2 with a line tail of exponent 2.
        let p = SeriesProfile::raw(
            (1..100).map(|j| 1.0 / (j * j) as f64).collect(),
            Some(TailModel::PowerLawLine { exponent: 2.0 }),
        );
        assert_eq!(converges(&p, 0.6), Ternary::Converges);
        assert_eq!(converges(&p, 0.4), Ternary::Diverges);
        let est = critical_exponent(&p, 1e-4);
        assert!((est.value() - 0.5).abs() <= 1e-4);
    }

    #[test]
    fn lattice_power_delta_is_boundary_divergent() {
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let p = profile_of(&f);
        // At exactly δ the exponent t(α+1+1/M) equals 2: diverges.
        assert_eq!(converges(&p, 0.4), Ternary::Diverges);
        assert_eq!(converges(&p, 0.4 + 1e-9), Ternary::Converges);
    }

    #[test]
    fn lattice_power_delta_closed_forms() {
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let est = field_critical_exponent(&f, 1e-3);
        assert!((est.value() - 0.4).abs() <= 1e-3, "δ = {}", est.value());
        assert_relative_eq!(closed_form_delta(&f).unwrap(), 0.4);

        let f2 = PoleField::lattice_power(1.5, 2).unwrap();
        let est2 = field_critical_exponent(&f2, 1e-3);
        assert!((est2.value() - 2.0 / 3.0).abs() <= 1e-3);
    }

    #[test]
    fn zero_delta_families() {
        for f in [
            PoleField::lattice_exp(1).unwrap(),
            PoleField::log_poles(),
        ] {
            let est = field_critical_exponent(&f, 1e-3);
            assert!(est.value() <= 0.05, "δ = {}", est.value());
        }
        let g = PoleField::gamma(0.0).unwrap();
        let est = restricted_critical_exponent(&g, 1, 1e-3).unwrap();
        assert!(est.value() <= 0.05);
    }

    #[test]
    fn degenerate_finite_field_is_zero_flagged() {
        let f = PoleField::custom(
            vec![PoleDatum::new(
                0,
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                1,
            )],
            vec![],
        )
        .unwrap();
        let est = field_critical_exponent(&f, 1e-3);
        assert_eq!(est.value(), 0.0);
        assert!(est.degenerate);
    }

    #[test]
    fn scaling_invariance_of_decisions() {
        // Replacing b_j by c·b_j rescales head weights but not the tail law,
        // so every decision and hence δ is unchanged.
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let p = profile_of(&f);
        let scaled = SeriesProfile {
            weights: p.weights.iter().map(|w| 7.3 * w).collect(),
            ..p.clone()
        };
        for t in [0.1, 0.3999, 0.4, 0.41, 1.0] {
            assert_eq!(converges(&p, t), converges(&scaled, t));
        }
        assert_eq!(
            critical_exponent(&p, 1e-4).value(),
            critical_exponent(&scaled, 1e-4).value()
        );
    }

    #[test]
    fn restriction_ladder_monotone_on_mixed_family() {
        // Half simple poles with power-law b on a ray, half double poles with
        // exponential b: δ_1 sees only the power-law half.
        let mut poles = Vec::new();
        for j in 1..60 {
            poles.push(PoleDatum::new(
                2 * j,
                Complex64::new(j as f64, 0.1),
                Complex64::new((j as f64).powf(-3.0), 0.0),
                1,
            ));
            poles.push(PoleDatum::new(
                2 * j + 1,
                Complex64::new(j as f64 + 0.5, -0.1),
                Complex64::new((-(j as f64)).exp(), 0.0),
                2,
            ));
        }
        use crate::polefield::{CoeffDecay, PoleTail, TailGeometry};
        let tails = vec![
            PoleTail {
                mult: 1,
                geometry: TailGeometry::Line {
                    spacing: 1.0,
                    direction: Some(0.0),
                },
                coeff: CoeffDecay::Power { exponent: 3.0 },
                start_index: 60,
                start_radius: 60.0,
            },
            PoleTail {
                mult: 2,
                geometry: TailGeometry::Line {
                    spacing: 1.0,
                    direction: Some(0.0),
                },
                coeff: CoeffDecay::ExpIndex { rate: 1.0 },
                start_index: 60,
                start_radius: 60.0,
            },
        ];
        let f = PoleField::custom(poles, tails).unwrap();
        // δ_1: weights j^-3/j^2 = j^-5 on a line -> 1/5.
        let d1 = restricted_critical_exponent(&f, 1, 1e-4).unwrap();
        assert!((d1.value() - 0.2).abs() <= 1e-4, "δ_1 = {}", d1.value());
        // δ_2: μ = 2, power half dominates: j^-(3+1.5) -> 1/4.5.
        let d2 = restricted_critical_exponent(&f, 2, 1e-4).unwrap();
        assert!(
            (d2.value() - 1.0 / 4.5).abs() <= 1e-4,
            "δ_2 = {}",
            d2.value()
        );
        assert!(d2.value() >= d1.value());
        let (ladder, sup) = restriction_ladder(&f, 1e-4).unwrap();
        assert_eq!(ladder.len(), 2);
        assert_relative_eq!(sup.value(), d2.value());
    }

    #[test]
    fn restriction_equal_at_max_mult() {
        let f = PoleField::lattice_power(1.5, 2).unwrap();
        let full = field_critical_exponent(&f, 1e-4);
        let capped = restricted_critical_exponent(&f, 2, 1e-4).unwrap();
        assert_relative_eq!(full.value(), capped.value());
    }

    #[test]
    fn empty_restriction_errors() {
        let f = PoleField::lattice_power(1.5, 2).unwrap();
        assert!(matches!(
            restricted_critical_exponent(&f, 1, 1e-3),
            Err(Error::EmptyRestriction { cap: 1 })
        ));
    }

    #[test]
    fn orders_of_builtin_families() {
        let tol = 1e-3;
        for f in [
            PoleField::lattice_power(3.0, 1).unwrap(),
            PoleField::lattice_exp(1).unwrap(),
        ] {
            match order_of_function(&f, tol).unwrap().rho {
                RhoValue::Finite(r) => assert!((r - 2.0).abs() <= 0.05, "ρ = {r}"),
                RhoValue::Infinite => panic!("lattice order should be finite"),
            }
        }
        assert!(matches!(
            order_of_function(&PoleField::log_poles(), tol).unwrap().rho,
            RhoValue::Infinite
        ));
        match order_of_function(&PoleField::gamma(0.0).unwrap(), tol)
            .unwrap()
            .rho
        {
            RhoValue::Finite(r) => assert!((r - 1.0).abs() <= 0.05, "ρ = {r}"),
            RhoValue::Infinite => panic!("gamma order is 1"),
        }
    }

    #[test]
    fn ray_poles_have_order_one() {
        use crate::polefield::{CoeffDecay, PoleTail, TailGeometry};
        let poles = (1..50)
            .map(|j| {
                PoleDatum::new(
                    j,
                    Complex64::new(j as f64, 0.0),
                    Complex64::new(1.0, 0.0),
                    1,
                )
            })
            .collect();
        let f = PoleField::custom(
            poles,
            vec![PoleTail {
                mult: 1,
                geometry: TailGeometry::Line {
                    spacing: 1.0,
                    direction: Some(0.0),
                },
                coeff: CoeffDecay::Power { exponent: 0.0 },
                start_index: 50,
                start_radius: 50.0,
            }],
        )
        .unwrap();
        match order_of_function(&f, 1e-3).unwrap().rho {
            RhoValue::Finite(r) => assert!((r - 1.0).abs() <= 0.05, "ρ = {r}"),
            _ => panic!(),
        }
    }

    #[test]
    fn bk_bound_arithmetic() {
        assert_relative_eq!(bk_upper_bound(2, &RhoValue::Finite(2.0)), 4.0 / 3.0);
        assert_eq!(bk_upper_bound(3, &RhoValue::Finite(0.0)), 0.0);
        assert_eq!(bk_upper_bound(1, &RhoValue::Infinite), 2.0);
    }

    #[test]
    fn bk_consistency_for_finite_order_builtins() {
        let tol = 1e-3;
        let cases: Vec<(PoleField, u32)> = vec![
            (PoleField::lattice_power(3.0, 1).unwrap(), 1),
            (PoleField::lattice_power(1.5, 2).unwrap(), 2),
            (PoleField::lattice_exp(1).unwrap(), 1),
            (PoleField::gamma(0.0).unwrap(), 1),
        ];
        for (f, m) in cases {
            let delta = field_critical_exponent(&f, tol).value();
            let rho = order_of_function(&f, tol).unwrap().rho;
            let bound = bk_upper_bound(m, &rho);
            assert!(
                delta <= bound + 1e-3,
                "δ = {delta} exceeds bound {bound} for {:?}",
                f.family
            );
        }
        // Strictness for the double-pole lattice: 2/3 < 4/3.
        let f = PoleField::lattice_power(1.5, 2).unwrap();
        let delta = field_critical_exponent(&f, tol).value();
        let rho = order_of_function(&f, tol).unwrap().rho;
        assert!(delta + 0.5 < bk_upper_bound(2, &rho));
    }

    #[test]
    fn regression_fallback_for_unknown_tail() {
        let p = SeriesProfile::raw(
            (1..200).map(|j| (j as f64).powf(-4.0)).collect(),
            Some(TailModel::CustomHint { critical_t: None }),
        );
        let est = critical_exponent(&p, 1e-3);
        assert_eq!(est.confidence, Confidence::RegressionOnly);
        assert_eq!(est.method, EstimateMethod::Regression);
        assert!((est.value() - 0.25).abs() <= 0.05, "got {}", est.value());
    }
}
