//! Tail models: what is known about the poles beyond the explicit head.
//!
//! A [`PoleTail`] component describes one infinite sub-family of non-explicit
//! poles by the geometry of their locations and the decay of their leading
//! coefficients. From a component (or a set of them) we induce a [`TailModel`]
//! for any derived weight series, which is what makes convergence questions
//! decidable: the explicit head is a finite sum and never decides convergence
//! on its own.

use serde::{Deserialize, Serialize};

/// Three-valued convergence decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ternary {
    Converges,
    Diverges,
    Inconclusive,
}

/// Classifier for a positive weight sequence `w_j`: decides, for every `t`,
/// whether `Σ w_j^t` over the non-explicit tail converges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// `w ~ r^(-exponent)` over a planar set of density ~ r dr:
    /// converges iff `exponent * t > 2`.
    PowerLawPlane { exponent: f64 },
    /// `w_j ~ j^(-exponent)` with one-dimensional counting:
    /// converges iff `exponent * t > 1`.
    PowerLawLine { exponent: f64 },
    /// `w_j ≲ e^(-rate * j)` (or in the radius, for planar sets):
    /// converges for every t > 0.
    Exponential { rate: f64 },
    /// `w_j ~ 1/j!`: converges for every t > 0.
    Factorial,
    /// Declared critical value, or nothing at all. `critical_t = None` forces
    /// regression-based estimation downstream.
    CustomHint { critical_t: Option<f64> },
}

impl TailModel {
    /// Convergence of `Σ w_j^t` over the tail. An infinite tail diverges for
    /// every `t ≤ 0`, whatever the decay.
    pub fn converges_at(&self, t: f64) -> Ternary {
        if t <= 0.0 {
            return Ternary::Diverges;
        }
        match *self {
            TailModel::PowerLawPlane { exponent } => {
                if exponent * t > 2.0 {
                    Ternary::Converges
                } else {
                    Ternary::Diverges
                }
            }
            TailModel::PowerLawLine { exponent } => {
                if exponent * t > 1.0 {
                    Ternary::Converges
                } else {
                    Ternary::Diverges
                }
            }
            TailModel::Exponential { rate } => {
                if rate > 0.0 {
                    Ternary::Converges
                } else {
                    Ternary::Diverges
                }
            }
            TailModel::Factorial => Ternary::Converges,
            TailModel::CustomHint { critical_t } => match critical_t {
                Some(tc) => {
                    if t > tc {
                        Ternary::Converges
                    } else {
                        Ternary::Diverges
                    }
                }
                None => Ternary::Inconclusive,
            },
        }
    }

    /// Exact convergence threshold when the kind has one.
    pub fn critical_t(&self) -> Option<f64> {
        match *self {
            TailModel::PowerLawPlane { exponent } => {
                (exponent > 0.0).then(|| 2.0 / exponent)
            }
            TailModel::PowerLawLine { exponent } => {
                (exponent > 0.0).then(|| 1.0 / exponent)
            }
            TailModel::Exponential { rate } => (rate > 0.0).then_some(0.0),
            TailModel::Factorial => Some(0.0),
            TailModel::CustomHint { critical_t } => critical_t,
        }
    }

    /// Combine components: the union series converges iff every part does.
    pub fn combine(models: &[TailModel]) -> Option<TailModel> {
        if models.is_empty() {
            return None;
        }
        if models
            .iter()
            .any(|m| matches!(m, TailModel::CustomHint { critical_t: None }))
        {
            return Some(TailModel::CustomHint { critical_t: None });
        }
        // All components have thresholds; the union's threshold is the max,
        // and we keep the sharpest kind realizing it so boundary behavior
        // stays faithful.
        let mut best = models[0];
        for m in &models[1..] {
            let tb = best.critical_t().unwrap_or(f64::INFINITY);
            let tm = m.critical_t().unwrap_or(f64::INFINITY);
            if tm > tb {
                best = *m;
            }
        }
        Some(best)
    }
}

/// Where the non-explicit poles of a component sit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailGeometry {
    /// Planar lattice-like set: about `c·r` poles per unit annulus at radius r.
    Plane,
    /// Poles along a ray, `|a_j| ≈ spacing·j`. `direction` (radians) is given
    /// when the ray's direction is known, enabling point-to-ray distance
    /// bounds in evaluation remainders.
    Line {
        spacing: f64,
        #[serde(default)]
        direction: Option<f64>,
    },
    /// Logarithmically spaced on the positive real axis: `a_j = log j`.
    LogSpaced,
}

/// How fast the non-explicit coefficients decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoeffDecay {
    /// `|b_j| ~ |a_j|^(-exponent)` (plane) or `~ j^(-exponent)` (line).
    Power { exponent: f64 },
    /// `|b_j| ~ e^(-rate·|a_j|)`.
    ExpRadius { rate: f64 },
    /// `|b_j| ~ e^(-rate·j)`.
    ExpIndex { rate: f64 },
    /// `|b_j| ~ 1/j!`.
    Factorial,
    /// Nothing declared.
    Unknown,
}

/// One infinite sub-family of non-explicit poles: all of multiplicity `mult`,
/// starting at index `start_index` / radius `start_radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleTail {
    pub mult: u32,
    pub geometry: TailGeometry,
    pub coeff: CoeffDecay,
    pub start_index: usize,
    pub start_radius: f64,
}

impl PoleTail {
    /// Classifier for the weight sequence `w_j = |b_j| / |a_j|^(1 + 1/mu)`.
    pub fn weight_tail_model(&self, mu: u32) -> TailModel {
        let s = 1.0 + 1.0 / mu as f64;
        match (self.geometry, self.coeff) {
            (TailGeometry::Plane, CoeffDecay::Power { exponent }) => {
                TailModel::PowerLawPlane { exponent: exponent + s }
            }
            (TailGeometry::Plane, CoeffDecay::ExpRadius { rate }) => {
                TailModel::Exponential { rate }
            }
            (TailGeometry::Line { .. }, CoeffDecay::Power { exponent }) => {
                TailModel::PowerLawLine { exponent: exponent + s }
            }
            (TailGeometry::Line { .. }, CoeffDecay::ExpIndex { rate })
            | (TailGeometry::LogSpaced, CoeffDecay::ExpIndex { rate }) => {
                TailModel::Exponential { rate }
            }
            (_, CoeffDecay::Factorial) => TailModel::Factorial,
            // Log-spaced locations only dampen a power decay by log factors;
            // the threshold is the coefficient's own.
            (TailGeometry::LogSpaced, CoeffDecay::Power { exponent }) => {
                TailModel::PowerLawLine { exponent }
            }
            (TailGeometry::Plane, CoeffDecay::ExpIndex { rate }) => {
                // Planar count: index j at radius ~ sqrt(j), still summable
                // for every positive t.
                TailModel::Exponential { rate }
            }
            (TailGeometry::Line { .. }, CoeffDecay::ExpRadius { rate }) => {
                TailModel::Exponential { rate }
            }
            (TailGeometry::LogSpaced, CoeffDecay::ExpRadius { .. }) => {
                // e^(-rate·log j) is a power law in j.
                TailModel::CustomHint { critical_t: None }
            }
            (_, CoeffDecay::Unknown) => TailModel::CustomHint { critical_t: None },
        }
    }

    /// Classifier for the order series `Σ |a_j|^(-t)`.
    pub fn order_tail_model(&self) -> TailModel {
        match self.geometry {
            TailGeometry::Plane => TailModel::PowerLawPlane { exponent: 1.0 },
            TailGeometry::Line { .. } => TailModel::PowerLawLine { exponent: 1.0 },
            // Σ (log j)^(-t) diverges for every t.
            TailGeometry::LogSpaced => TailModel::CustomHint {
                critical_t: Some(f64::INFINITY),
            },
        }
    }

    /// `ln` of an upper bound for `Σ w_j^t` over the part of the tail with
    /// `|a_j| ≥ from_radius`, with `w_j = |b_j|/|a_j|^(1+1/mu)`. `None` when
    /// the series diverges or the model cannot bound it.
    pub fn log_weight_tail_sum(&self, mu: u32, t: f64, from_radius: f64) -> Option<f64> {
        if self.weight_tail_model(mu).converges_at(t) != Ternary::Converges {
            return None;
        }
        let s = 1.0 + 1.0 / mu as f64;
        let from = from_radius.max(self.start_radius).max(2.0);
        match (self.geometry, self.coeff) {
            (TailGeometry::Plane, CoeffDecay::Power { exponent }) => {
                Some(log_plane_power_tail((exponent + s) * t, from))
            }
            (TailGeometry::Plane, CoeffDecay::ExpRadius { rate }) => {
                // w^t ≤ e^(-rate·t·r) · r^(-s·t) ≤ e^(-rate·t·r) for r ≥ 1.
                Some(log_plane_exp_tail(rate * t, from))
            }
            (TailGeometry::Line { spacing, .. }, CoeffDecay::Power { exponent }) => {
                let j0 = (from / spacing).max(self.start_index as f64).max(1.0);
                let q = (exponent + s) * t;
                Some(log_line_power_tail(q, j0) - s * t * spacing.ln().min(0.0))
            }
            (TailGeometry::Line { spacing, .. }, CoeffDecay::ExpIndex { rate }) => {
                let j0 = (from / spacing).max(self.start_index as f64).max(1.0);
                Some(log_line_exp_tail(rate * t, j0))
            }
            (TailGeometry::LogSpaced, CoeffDecay::ExpIndex { rate }) => {
                // |a_j| ≥ from ⟺ j ≥ e^from; w_j ≤ e^(-rate·j) for log j ≥ 1.
                let j0 = from.exp().max(self.start_index as f64).max(3.0);
                Some(log_line_exp_tail(rate * t, j0))
            }
            (_, CoeffDecay::Factorial) => {
                let j0 = match self.geometry {
                    TailGeometry::Line { spacing, .. } => {
                        (from / spacing).max(self.start_index as f64)
                    }
                    _ => self.start_index as f64,
                }
                .max(2.0) as u64;
                Some(log_factorial_tail(t, j0))
            }
            _ => None,
        }
    }
}

/// Number of integer lattice points in the annulus `n ≤ |a| < n+1`, bounded by
/// packing disjoint unit squares into the fattened annulus.
pub(crate) fn plane_shell_bound(n: f64) -> f64 {
    7.6 * (2.0 * n + 1.0)
}

/// `ln` of an upper bound for `Σ_{|a| ≥ from} |a|^(-s)` over a planar lattice,
/// for `s > 2`.
pub fn log_plane_power_tail(s: f64, from: f64) -> f64 {
    debug_assert!(s > 2.0 && from >= 1.0);
    // Σ_{n≥A} 7.6(2n+1) n^(-s) ≤ 7.6 [ (2A+1)A^(-s) + 2A^(2-s)/(s-2) + A^(1-s)/(s-1) ]
    let a = from;
    let bracket = (2.0 + 1.0 / a) / a + 2.0 / (s - 2.0) + 1.0 / ((s - 1.0) * a);
    7.6f64.ln() + (2.0 - s) * a.ln() + bracket.ln()
}

/// `ln` of an upper bound for `Σ_{|a| ≥ from} e^(-c|a|)` over a planar lattice.
pub fn log_plane_exp_tail(c: f64, from: f64) -> f64 {
    debug_assert!(c > 0.0 && from >= 1.0);
    let a = from;
    let bracket = (2.0 * a + 1.0) * (1.0 + 1.0 / c) + 2.0 / (c * c);
    7.6f64.ln() - c * a + bracket.ln()
}

/// `ln` of an upper bound for `Σ_{j ≥ j0} j^(-q)`, `q > 1`.
pub fn log_line_power_tail(q: f64, j0: f64) -> f64 {
    debug_assert!(q > 1.0 && j0 >= 1.0);
    -q * j0.ln() + (1.0 + j0 / (q - 1.0)).ln()
}

/// `ln` of `Σ_{j ≥ j0} e^(-cj) = e^(-c·j0)/(1 - e^(-c))`, `c > 0`.
pub fn log_line_exp_tail(c: f64, j0: f64) -> f64 {
    debug_assert!(c > 0.0);
    -c * j0 - (-(-c).exp_m1()).ln()
}

/// `ln` of an upper bound for `Σ_{j ≥ j0} (1/j!)^t`: consecutive term ratios
/// are at most `(j0+1)^(-t)`, so the sum is dominated by a geometric series.
pub fn log_factorial_tail(t: f64, j0: u64) -> f64 {
    debug_assert!(t > 0.0 && j0 >= 2);
    let ratio = -(t * ((j0 + 1) as f64).ln());
    -t * ln_factorial(j0) - (-ratio.exp()).ln_1p()
}

/// `ln(n!)` via exact products for small n and a Stirling series otherwise.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 16 {
        let mut acc = 0.0;
        for k in 2..=n {
            acc += (k as f64).ln();
        }
        return acc;
    }
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Stirling for ln Γ(x): error < 1e-12 for x ≥ 17.
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}
