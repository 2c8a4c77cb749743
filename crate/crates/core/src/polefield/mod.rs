//! Pole-data model of a meromorphic function.
//!
//! A function is represented by an explicit head of poles (location, leading
//! coefficient, multiplicity), tail components describing everything beyond
//! the truncation horizon, and a family tag for the built-in constructions.
//! Near a pole `a_j` the function behaves like `(b_j/(z-a_j))^{m_j}`, and all
//! built-in families are plain sums of such terms.

mod branch;
mod eval;
pub mod tail;

pub use branch::{DiskBracket, LocalModel, OffsetPoint};
pub use eval::Evaluation;
pub use tail::{CoeffDecay, PoleTail, TailGeometry, TailModel, Ternary};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::{Error, Result};

/// Relative tolerance below which an evaluation point counts as hitting a pole.
pub const POLE_HIT_TOL: f64 = 1e-12;

/// One explicit pole: `f(z) ~ (coeff/(z - location))^multiplicity` as z → location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleDatum {
    pub index: usize,
    pub location: Complex64,
    pub coeff: Complex64,
    pub multiplicity: u32,
}

impl PoleDatum {
    pub fn new(index: usize, location: Complex64, coeff: Complex64, multiplicity: u32) -> Self {
        Self {
            index,
            location,
            coeff,
            multiplicity,
        }
    }

    /// Weight `|b| / |a|^(1 + 1/mu)` entering the critical-exponent series.
    pub fn weight(&self, mu: u32) -> f64 {
        self.coeff.norm() / self.location.norm().powf(1.0 + 1.0 / mu as f64)
    }
}

/// Built-in family tags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum FamilyTag {
    /// Square-lattice poles `a = j + ik`, `|j|,|k| ≥ N`, all of multiplicity M,
    /// with `b = |a|^(-alpha)`.
    LatticePower { alpha: f64, mult: u32 },
    /// Same lattice with `b = e^(-|a|)`.
    LatticeExp { mult: u32 },
    /// `a_j = log j`, `b_j = e^(-j)`, simple poles, j ≥ 8.
    LogPoles,
    /// Translated Euler Gamma: simple poles `a_j = -j - shift`, residues
    /// `(-1)^j / j!`, j ≥ 1. Only the pole data is modelled; the entire part
    /// (the logarithmic tract) is out of scope.
    Gamma { shift: f64 },
    Custom,
}

/// A meromorphic function modelled by its pole data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoleField {
    pub family: FamilyTag,
    poles: Vec<PoleDatum>,
    tails: Vec<PoleTail>,
    pub max_mult: u32,
    pub mu: u32,
    /// Truncation horizon: explicit poles have `|a| ≤ horizon` (lattices) or
    /// family index ≤ horizon_index (enumerated families).
    pub horizon: f64,
    pub horizon_index: usize,
    /// Start index N of the lattice families.
    pub start_index: i64,
    /// Radius bounding the singular set, when known (2 for every built-in).
    pub singular_bound: Option<f64>,
    /// No tail components: finitely many poles, degenerate downstream.
    pub finite: bool,
    /// Flat summation table for the hot evaluation loop.
    #[serde(skip)]
    table: OnceLock<SumTable>,
}

/// Structure-of-arrays head layout for the series summation.
#[derive(Debug, Clone, Default)]
pub(crate) struct SumTable {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub br: Vec<f64>,
    pub bi: Vec<f64>,
    pub tol2: Vec<f64>,
    pub mult: Vec<u32>,
    /// Common multiplicity when every head pole shares one.
    pub uniform: Option<u32>,
}

impl PoleField {
    pub(crate) fn table(&self) -> &SumTable {
        self.table.get_or_init(|| {
            let n = self.poles.len();
            let mut t = SumTable {
                re: Vec::with_capacity(n),
                im: Vec::with_capacity(n),
                br: Vec::with_capacity(n),
                bi: Vec::with_capacity(n),
                tol2: Vec::with_capacity(n),
                mult: Vec::with_capacity(n),
                uniform: None,
            };
            for p in &self.poles {
                t.re.push(p.location.re);
                t.im.push(p.location.im);
                t.br.push(p.coeff.re);
                t.bi.push(p.coeff.im);
                let tol = POLE_HIT_TOL * p.location.norm().max(1.0);
                t.tol2.push(tol * tol);
                t.mult.push(p.multiplicity);
            }
            let first = self.poles.first().map(|p| p.multiplicity);
            if self.poles.iter().all(|p| Some(p.multiplicity) == first) {
                t.uniform = first;
            }
            t
        })
    }
}

/// Default truncation radius for lattice heads.
pub const LATTICE_HORIZON: f64 = 200.0;
/// Default index cap for enumerated families.
pub const INDEX_HORIZON: usize = 500;
/// 1/j! is no longer a normal f64 past this index.
const GAMMA_INDEX_CAP: usize = 150;

impl PoleField {
    /// Lattice family with `b = |a|^(-alpha)`; requires `alpha > 2/mult`.
    pub fn lattice_power(alpha: f64, mult: u32) -> Result<Self> {
        Self::lattice_power_with_horizon(alpha, mult, LATTICE_HORIZON)
    }

    pub fn lattice_power_with_horizon(alpha: f64, mult: u32, horizon: f64) -> Result<Self> {
        if mult == 0 {
            return Err(Error::BadParameter("multiplicity must be ≥ 1".into()));
        }
        if alpha <= 2.0 / mult as f64 {
            return Err(Error::BadParameter(format!(
                "alpha = {alpha} must exceed 2/M = {}",
                2.0 / mult as f64
            )));
        }
        let n = lattice_start_index(
            MassLaw::Power {
                s: alpha * mult as f64,
            },
            mult,
        )?;
        let poles = lattice_head(n, horizon, mult, |r| Complex64::new(r.powf(-alpha), 0.0));
        let tails = vec![PoleTail {
            mult,
            geometry: TailGeometry::Plane,
            coeff: CoeffDecay::Power { exponent: alpha },
            start_index: 0,
            start_radius: (n as f64) * std::f64::consts::SQRT_2,
        }];
        Ok(Self {
            family: FamilyTag::LatticePower { alpha, mult },
            poles,
            tails,
            max_mult: mult,
            mu: mult,
            horizon,
            horizon_index: 0,
            start_index: n,
            singular_bound: Some(2.0),
            finite: false,
            table: OnceLock::new(),
        })
    }

    /// Lattice family with `b = e^(-|a|)`.
    pub fn lattice_exp(mult: u32) -> Result<Self> {
        if mult == 0 {
            return Err(Error::BadParameter("multiplicity must be ≥ 1".into()));
        }
        let n = lattice_start_index(MassLaw::Exp { c: mult as f64 }, mult)?;
        // Terms below 1e-22 are invisible at every tolerance used downstream.
        let horizon = LATTICE_HORIZON.min(22.0 * std::f64::consts::LN_10);
        let poles = lattice_head(n, horizon, mult, |r| Complex64::new((-r).exp(), 0.0));
        let tails = vec![PoleTail {
            mult,
            geometry: TailGeometry::Plane,
            coeff: CoeffDecay::ExpRadius { rate: 1.0 },
            start_index: 0,
            start_radius: (n as f64) * std::f64::consts::SQRT_2,
        }];
        Ok(Self {
            family: FamilyTag::LatticeExp { mult },
            poles,
            tails,
            max_mult: mult,
            mu: mult,
            horizon,
            horizon_index: 0,
            start_index: n,
            singular_bound: Some(2.0),
            finite: false,
            table: OnceLock::new(),
        })
    }

    /// `f(z) = Σ_{j≥8} e^(-j)/(z - log j)`.
    pub fn log_poles() -> Self {
        let mut poles = Vec::new();
        for j in 8..=INDEX_HORIZON {
            poles.push(PoleDatum::new(
                j,
                Complex64::new((j as f64).ln(), 0.0),
                Complex64::new((-(j as f64)).exp(), 0.0),
                1,
            ));
        }
        let horizon = (INDEX_HORIZON as f64).ln();
        Self {
            family: FamilyTag::LogPoles,
            poles,
            tails: vec![PoleTail {
                mult: 1,
                geometry: TailGeometry::LogSpaced,
                coeff: CoeffDecay::ExpIndex { rate: 1.0 },
                start_index: INDEX_HORIZON + 1,
                start_radius: (INDEX_HORIZON as f64 + 1.0).ln(),
            }],
            max_mult: 1,
            mu: 1,
            horizon,
            horizon_index: INDEX_HORIZON,
            start_index: 8,
            singular_bound: Some(2.0),
            finite: false,
            table: OnceLock::new(),
        }
    }

    /// Pole data of `Γ(z + shift)`: `a_j = -j - shift`, `b_j = (-1)^j/j!`, j ≥ 1.
    pub fn gamma(shift: f64) -> Result<Self> {
        let mut poles = Vec::new();
        let mut factorial = 1.0f64;
        for j in 1..=GAMMA_INDEX_CAP {
            factorial *= j as f64;
            let b = if j % 2 == 0 { 1.0 } else { -1.0 } / factorial;
            let a = Complex64::new(-(j as f64) - shift, 0.0);
            if a.norm() == 0.0 {
                return Err(Error::BadParameter(
                    "shift puts a pole at the origin".into(),
                ));
            }
            poles.push(PoleDatum::new(j, a, Complex64::new(b, 0.0), 1));
        }
        Ok(Self {
            family: FamilyTag::Gamma { shift },
            poles,
            tails: vec![PoleTail {
                mult: 1,
                geometry: TailGeometry::Line {
                    spacing: 1.0,
                    direction: Some(std::f64::consts::PI),
                },
                coeff: CoeffDecay::Factorial,
                start_index: GAMMA_INDEX_CAP + 1,
                start_radius: GAMMA_INDEX_CAP as f64 + 1.0 + shift.min(0.0),
            }],
            max_mult: 1,
            mu: 1,
            horizon: GAMMA_INDEX_CAP as f64,
            horizon_index: GAMMA_INDEX_CAP,
            start_index: 1,
            singular_bound: Some(2.0),
            finite: false,
            table: OnceLock::new(),
        })
    }

    /// Custom field from an explicit pole list plus declared tail components
    /// (empty list = finitely many poles, flagged degenerate).
    pub fn custom(mut poles: Vec<PoleDatum>, tails: Vec<PoleTail>) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::BadParameter("empty pole list".into()));
        }
        for p in &poles {
            if p.multiplicity == 0 {
                return Err(Error::BadParameter(format!(
                    "pole {} has multiplicity 0",
                    p.index
                )));
            }
            if p.coeff.norm() == 0.0 {
                return Err(Error::BadParameter(format!("pole {} has b = 0", p.index)));
            }
            if p.location.norm() == 0.0 {
                return Err(Error::BadParameter("a pole sits at the origin".into()));
            }
        }
        poles.sort_by(|p, q| {
            (p.location.norm(), p.location.arg())
                .partial_cmp(&(q.location.norm(), q.location.arg()))
                .unwrap()
        });
        for w in poles.windows(2) {
            if w[0].location == w[1].location {
                return Err(Error::BadParameter(format!(
                    "poles {} and {} coincide",
                    w[0].index, w[1].index
                )));
            }
        }
        let head_max = poles.iter().map(|p| p.multiplicity).max().unwrap();
        let tail_max = tails.iter().map(|t| t.mult).max().unwrap_or(0);
        let max_mult = head_max.max(tail_max);
        let horizon = poles.last().map(|p| p.location.norm()).unwrap_or(0.0);
        let finite = tails.is_empty();
        Ok(Self {
            family: FamilyTag::Custom,
            poles,
            tails,
            max_mult,
            mu: max_mult,
            horizon,
            horizon_index: 0,
            start_index: 0,
            singular_bound: None,
            finite,
            table: OnceLock::new(),
        })
    }

    /// Parse a pole list in the CSV layout `index,re_a,im_a,re_b,im_b,mult`.
    pub fn from_csv_str(csv: &str, tails: Vec<PoleTail>) -> Result<Self> {
        let mut poles = Vec::new();
        for (lineno, line) in csv.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 && line.starts_with("index") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
            if fields.len() != 6 {
                return Err(Error::BadParameter(format!(
                    "CSV line {}: expected 6 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::BadParameter(format!("CSV line {}: bad {what} `{s}`", lineno + 1))
                })
            };
            let index = fields[0].parse::<usize>().map_err(|_| {
                Error::BadParameter(format!("CSV line {}: bad index", lineno + 1))
            })?;
            poles.push(PoleDatum::new(
                index,
                Complex64::new(parse(fields[1], "re_a")?, parse(fields[2], "im_a")?),
                Complex64::new(parse(fields[3], "re_b")?, parse(fields[4], "im_b")?),
                fields[5].parse::<u32>().map_err(|_| {
                    Error::BadParameter(format!("CSV line {}: bad mult", lineno + 1))
                })?,
            ));
        }
        Self::custom(poles, tails)
    }

    /// Declare a singular-value bound for a custom field.
    pub fn with_singular_bound(mut self, bound: f64) -> Self {
        self.singular_bound = Some(bound);
        self
    }

    pub fn poles(&self) -> &[PoleDatum] {
        &self.poles
    }

    pub fn tails(&self) -> &[PoleTail] {
        &self.tails
    }

    /// Explicit pole by its family index.
    pub fn pole(&self, index: usize) -> Result<&PoleDatum> {
        self.poles
            .iter()
            .find(|p| p.index == index)
            .ok_or(Error::UnknownPole { index })
    }

    /// Weight-series tail classifier (μ = self.mu), combined over components.
    pub fn weight_tail_model(&self) -> Option<TailModel> {
        let models: Vec<TailModel> = self
            .tails
            .iter()
            .map(|t| t.weight_tail_model(self.mu))
            .collect();
        TailModel::combine(&models)
    }

    /// Smallest power of two R0 with the singular set inside the disk of
    /// radius R0/2.
    pub fn r0_threshold(&self) -> Result<f64> {
        let bound = self.singular_bound.ok_or(Error::NoSingularBound)?;
        let mut r0 = 1.0f64;
        while r0 < 2.0 * bound {
            r0 *= 2.0;
        }
        Ok(r0)
    }

    /// Explicit head poles with `lo ≤ |a| ≤ hi`, extended by lazily
    /// materialized family poles beyond the truncation horizon. Lattice
    /// families generate from the lattice law; enumerated families extend
    /// while their coefficients remain representable. Results are sorted by
    /// `(|a|, arg)`, with generated poles indexed after the head.
    pub fn poles_in_annulus(&self, lo: f64, hi: f64) -> Vec<PoleDatum> {
        let mut out: Vec<PoleDatum> = self
            .poles
            .iter()
            .filter(|p| {
                let r = p.location.norm();
                r >= lo && r <= hi
            })
            .copied()
            .collect();
        if hi > self.horizon {
            self.generate_beyond_head(lo.max(self.horizon), hi, &mut out);
        }
        out.sort_by(|p, q| {
            (p.location.norm(), p.location.arg())
                .partial_cmp(&(q.location.norm(), q.location.arg()))
                .unwrap()
        });
        out
    }

    /// Family poles within distance `radius` of `center`, beyond the head.
    /// Used by the far-field evaluation window.
    pub(crate) fn poles_near(&self, center: Complex64, radius: f64) -> Vec<PoleDatum> {
        let mut out = Vec::new();
        match self.family {
            FamilyTag::LatticePower { alpha, mult } => {
                let n = self.start_index;
                let jlo = (center.re - radius).floor() as i64;
                let jhi = (center.re + radius).ceil() as i64;
                let klo = (center.im - radius).floor() as i64;
                let khi = (center.im + radius).ceil() as i64;
                let mut idx = self.poles.len();
                for j in jlo..=jhi {
                    for k in klo..=khi {
                        if j.abs() < n || k.abs() < n {
                            continue;
                        }
                        let a = Complex64::new(j as f64, k as f64);
                        let r = a.norm();
                        if r <= self.horizon || (a - center).norm() > radius {
                            continue;
                        }
                        out.push(PoleDatum::new(
                            idx,
                            a,
                            Complex64::new(r.powf(-alpha), 0.0),
                            mult,
                        ));
                        idx += 1;
                    }
                }
            }
            FamilyTag::LatticeExp { .. } => {
                // Coefficients past the head horizon are below 1e-22; nothing
                // representable to add.
            }
            FamilyTag::LogPoles | FamilyTag::Gamma { .. } | FamilyTag::Custom => {
                let lo = (center.norm() - radius).max(self.horizon);
                let hi = center.norm() + radius;
                let mut ann = Vec::new();
                self.generate_beyond_head(lo, hi, &mut ann);
                out.extend(
                    ann.into_iter()
                        .filter(|p| (p.location - center).norm() <= radius),
                );
            }
        }
        out.sort_by(|p, q| {
            (p.location.norm(), p.location.arg())
                .partial_cmp(&(q.location.norm(), q.location.arg()))
                .unwrap()
        });
        out
    }

    fn generate_beyond_head(&self, lo: f64, hi: f64, out: &mut Vec<PoleDatum>) {
        match self.family {
            FamilyTag::LatticePower { alpha, mult } => {
                let n = self.start_index;
                let bound = hi.ceil() as i64;
                let mut idx = self.poles.len();
                for j in -bound..=bound {
                    if j.abs() < n {
                        continue;
                    }
                    for k in -bound..=bound {
                        if k.abs() < n {
                            continue;
                        }
                        let a = Complex64::new(j as f64, k as f64);
                        let r = a.norm();
                        if r < lo.max(self.horizon + 1e-9) || r > hi {
                            continue;
                        }
                        out.push(PoleDatum::new(
                            idx,
                            a,
                            Complex64::new(r.powf(-alpha), 0.0),
                            mult,
                        ));
                        idx += 1;
                    }
                }
            }
            FamilyTag::LatticeExp { .. } => {}
            FamilyTag::LogPoles => {
                // a_j = log j ≥ lo ⟺ j ≥ e^lo; e^(-j) underflows past ~700.
                let jlo = (lo.exp().ceil() as usize).max(self.horizon_index + 1);
                let jhi = (hi.exp().floor() as usize).min(700);
                for j in jlo..=jhi {
                    out.push(PoleDatum::new(
                        j,
                        Complex64::new((j as f64).ln(), 0.0),
                        Complex64::new((-(j as f64)).exp(), 0.0),
                        1,
                    ));
                }
            }
            FamilyTag::Gamma { shift } => {
                let jlo = ((lo - 1.0).floor().max(0.0) as usize).max(self.horizon_index + 1);
                let jhi = (hi.ceil() as usize).min(170);
                let mut lnfac = tail::ln_factorial(jlo.saturating_sub(1) as u64);
                for j in jlo..=jhi {
                    lnfac += (j as f64).ln();
                    let b = if j % 2 == 0 { 1.0 } else { -1.0 } * (-lnfac).exp();
                    if b == 0.0 {
                        break;
                    }
                    let a = Complex64::new(-(j as f64) - shift, 0.0);
                    if a.norm() >= lo && a.norm() <= hi {
                        out.push(PoleDatum::new(j, a, Complex64::new(b, 0.0), 1));
                    }
                }
            }
            FamilyTag::Custom => {}
        }
    }
}

/// Least lattice start index N with
/// `Σ_{|j|,|k| ≥ N} exp(M · log_term(|a|)) ≤ 2^-(M+1)`
/// (`log_term(r) = -αM·log r` for the power family, `-M·r` for the
/// exponential one, folded into the closure as log of the per-pole mass).
/// Per-pole mass law for the start-index search.
enum MassLaw {
    /// mass(r) = r^(-s), s > 2.
    Power { s: f64 },
    /// mass(r) = e^(-c·r), c > 0.
    Exp { c: f64 },
}

impl MassLaw {
    fn at(&self, r: f64) -> f64 {
        match *self {
            MassLaw::Power { s } => r.powf(-s),
            MassLaw::Exp { c } => (-c * r).exp(),
        }
    }

    /// Upper bound for `Σ_{max(|j|,|k|) > g} mass(|a|)`: exactly 8m points per
    /// max-norm shell m, each with |a| ≥ m, so the mass is below
    /// `8 Σ_{m>g} m·mass(m) ≤ 8 (∫_g^∞ x·mass(x) dx + g·mass(g))`.
    fn outside_square(&self, g: f64) -> f64 {
        match *self {
            MassLaw::Power { s } => 8.0 * (g.powf(2.0 - s) / (s - 2.0) + g.powf(1.0 - s)),
            MassLaw::Exp { c } => {
                8.0 * ((-c * g).exp() * (g / c + 1.0 / (c * c)) + g * (-c * g).exp())
            }
        }
    }
}

fn lattice_start_index(law: MassLaw, mult: u32) -> Result<i64> {
    let target = 0.5f64.powi(mult as i32 + 1);
    // Exact quadrant sums on a fixed grid plus a safe bound for the rest.
    const GRID: i64 = 2200;
    let mass = |j: i64, k: i64| -> f64 { law.at(((j * j + k * k) as f64).sqrt()) };
    // quadrant[n] = Σ_{n ≤ j,k ≤ GRID} mass(j,k), by backward recurrence
    // S(n) = S(n+1) + 2·row(n) - corner(n).
    let mut quadrant = vec![0.0f64; (GRID + 2) as usize];
    for n in (1..=GRID).rev() {
        let mut row = 0.0;
        for k in n..=GRID {
            row += mass(n, k);
        }
        quadrant[n as usize] = quadrant[(n + 1) as usize] + 2.0 * row - mass(n, n);
    }
    let strip = law.outside_square(GRID as f64);
    for n in 1..=GRID / 2 {
        let s = 4.0 * quadrant[n as usize] + strip;
        if s <= target {
            return Ok(n);
        }
    }
    Err(Error::BadParameter(
        "no admissible lattice start index below grid bound".into(),
    ))
}

fn lattice_head(
    n: i64,
    horizon: f64,
    mult: u32,
    coeff: impl Fn(f64) -> Complex64,
) -> Vec<PoleDatum> {
    let bound = horizon.ceil() as i64;
    let mut sites = Vec::new();
    for j in -bound..=bound {
        if j.abs() < n {
            continue;
        }
        for k in -bound..=bound {
            if k.abs() < n {
                continue;
            }
            let a = Complex64::new(j as f64, k as f64);
            let r = a.norm();
            if r <= horizon {
                sites.push((r, a.arg(), a));
            }
        }
    }
    sites.sort_by(|p, q| (p.0, p.1).partial_cmp(&(q.0, q.1)).unwrap());
    sites
        .into_iter()
        .enumerate()
        .map(|(i, (r, _, a))| PoleDatum::new(i, a, coeff(r), mult))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lattice_power_start_index_meets_mass_target() {
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let n = f.start_index;
        assert!(n >= 2, "start index {n}");
        // Direct check of the defining inequality at N and its failure at N-1.
        let s = |nn: i64| -> f64 {
            let mut acc = 0.0;
            for j in -3000i64..=3000 {
                if j.abs() < nn {
                    continue;
                }
                for k in -3000i64..=3000 {
                    if k.abs() < nn {
                        continue;
                    }
                    let r2 = (j * j + k * k) as f64;
                    acc += r2.powf(-1.5);
                }
            }
            acc
        };
        assert!(s(n) <= 0.25 + 1e-6, "mass at N = {}", s(n));
        assert!(s(n - 1) > 0.25, "N not minimal: mass at N-1 = {}", s(n - 1));
    }

    #[test]
    fn lattice_power_rejects_small_alpha() {
        assert!(PoleField::lattice_power(2.0, 1).is_err());
        assert!(PoleField::lattice_power(0.9, 2).is_err());
        assert!(PoleField::lattice_power(1.5, 2).is_ok());
    }

    #[test]
    fn lattice_power_coeffs_follow_the_law() {
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        for p in f.poles().iter().take(40) {
            assert_relative_eq!(
                p.coeff.re,
                p.location.norm().powf(-3.0),
                max_relative = 1e-12
            );
            assert_eq!(p.multiplicity, 1);
            assert!(p.location.re.abs() >= f.start_index as f64);
            assert!(p.location.im.abs() >= f.start_index as f64);
        }
    }

    #[test]
    fn log_poles_first_pole_is_log8() {
        let f = PoleField::log_poles();
        let first = f.pole(8).unwrap();
        assert_relative_eq!(first.location.re, 8.0f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(first.coeff.re, (-8.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn gamma_residues_alternate_inverse_factorials() {
        let f = PoleField::gamma(0.0).unwrap();
        let p3 = f.pole(3).unwrap();
        assert_relative_eq!(p3.coeff.re, -1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(p3.location.re, -3.0, max_relative = 1e-15);
        let p4 = f.pole(4).unwrap();
        assert_relative_eq!(p4.coeff.re, 1.0 / 24.0, max_relative = 1e-15);
    }

    #[test]
    fn custom_rejects_invalid_data() {
        let z = Complex64::new(1.0, 0.0);
        let b = Complex64::new(1.0, 0.0);
        assert!(PoleField::custom(vec![PoleDatum::new(0, z, b, 0)], vec![]).is_err());
        assert!(
            PoleField::custom(vec![PoleDatum::new(0, z, Complex64::new(0.0, 0.0), 1)], vec![])
                .is_err()
        );
        assert!(PoleField::custom(
            vec![PoleDatum::new(0, Complex64::new(0.0, 0.0), b, 1)],
            vec![]
        )
        .is_err());
        assert!(PoleField::custom(
            vec![PoleDatum::new(0, z, b, 1), PoleDatum::new(1, z, b, 1)],
            vec![]
        )
        .is_err());
        let ok = PoleField::custom(vec![PoleDatum::new(0, z, b, 1)], vec![]).unwrap();
        assert!(ok.finite);
    }

    #[test]
    fn csv_roundtrip() {
        let csv = "index,re_a,im_a,re_b,im_b,mult\n1,2.0,0.0,1.0,0.0,1\n2,0.0,3.0,0.5,0.5,2\n";
        let f = PoleField::from_csv_str(csv, vec![]).unwrap();
        assert_eq!(f.poles().len(), 2);
        assert_eq!(f.max_mult, 2);
        let p2 = f.pole(2).unwrap();
        assert_relative_eq!(p2.location.im, 3.0);
    }

    #[test]
    fn annulus_query_extends_past_head() {
        let f = PoleField::lattice_power_with_horizon(3.0, 1, 40.0).unwrap();
        let far = f.poles_in_annulus(50.0, 60.0);
        assert!(!far.is_empty());
        for p in &far {
            let r = p.location.norm();
            assert!((50.0..=60.0).contains(&r));
            assert_relative_eq!(p.coeff.re, r.powf(-3.0), max_relative = 1e-12);
        }
        // Deterministic: repeated query gives the same list.
        let again = f.poles_in_annulus(50.0, 60.0);
        assert_eq!(far.len(), again.len());
        for (p, q) in far.iter().zip(&again) {
            assert_eq!(p.location, q.location);
        }
    }

    #[test]
    fn r0_threshold_is_four_for_builtins() {
        for f in [
            PoleField::lattice_power(3.0, 1).unwrap(),
            PoleField::log_poles(),
        ] {
            assert_relative_eq!(f.r0_threshold().unwrap(), 4.0);
        }
    }
}
