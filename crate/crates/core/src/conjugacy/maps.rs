//! The conjugated maps: `φ_j = u^(-1) ∘ f_j^(-1) ∘ u` and the triple
//! compositions `Φ_{l,j} = φ_l ∘ φ_j ∘ φ_l` through a maximal-multiplicity
//! pole, with analytic derivative brackets and numeric cross-checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ConjugatedSystem;
use crate::polefield::PoleDatum;
use crate::{Error, Result};

/// Two-sided derivative bound `center/constant ≤ |φ'| ≤ center·constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBracket {
    pub lo: f64,
    pub hi: f64,
    /// The comparability constant; `hi/lo = constant²`.
    pub constant: f64,
}

impl DerivativeBracket {
    pub fn around(center: f64, constant: f64) -> Self {
        Self {
            lo: center / constant,
            hi: center * constant,
            constant,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Sampled distortion of a composition over the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionReport {
    /// sup/inf of the sampled |F'|.
    pub ratio: f64,
    pub samples: usize,
    /// Analytic lower bound for the separating annulus modulus,
    /// `log 2 / (2πM)`.
    pub modulus_lower_bound: f64,
}

impl ConjugatedSystem {
    /// The change of variables `u(ξ) = ξ^(-M)`.
    pub fn u(&self, xi: Complex64) -> Complex64 {
        xi.powi(-(self.budget.max_mult as i32))
    }

    /// The recorded branch of `u^(-1)`: argument of z read in the widened
    /// cone's window, divided by -M.
    pub fn u_inv(&self, z: Complex64) -> Result<Complex64> {
        let m = self.budget.max_mult as f64;
        let widened = self.cone.widen();
        let th = widened.angle_above_base(z);
        if th >= 2.0 * std::f64::consts::PI * widened.aperture_fraction {
            return Err(Error::OutOfDomain);
        }
        let theta_z = widened.alpha + th;
        let r = z.norm().powf(-1.0 / m);
        Ok(Complex64::from_polar(
            r,
            (-theta_z + 2.0 * std::f64::consts::PI * self.branch.u_branch as f64) / m,
        ))
    }

    /// `φ_j(ξ) = u^(-1)(f_j^(-1)(u(ξ)))` for a pool pole.
    pub fn phi(&self, pole: &PoleDatum, xi: Complex64) -> Result<Complex64> {
        Ok(self.phi_with_branch(pole, xi)?.0)
    }

    /// Same, also returning the pole-anchored branch point `f_j^(-1)(u(ξ))`
    /// in full precision (the replay certificate needs it).
    pub fn phi_with_branch(
        &self,
        pole: &PoleDatum,
        xi: Complex64,
    ) -> Result<(Complex64, crate::polefield::OffsetPoint)> {
        if !self.omega.contains(xi) {
            return Err(Error::OutOfDomain);
        }
        let z = self.u(xi);
        let op = self
            .field
            .inverse_branch_offset(pole, z, self.branch.inverse_branch)?;
        Ok((self.u_inv(op.point())?, op))
    }

    /// `|φ_j'(ξ)|` through the inverse-function theorem:
    /// `(u^(-1))'(z')·(1/f'(z'))·u'(ξ)`. Stays well-conditioned at every
    /// budget, unlike finite differences of the composed map.
    pub fn phi_derivative_abs(&self, pole: &PoleDatum, xi: Complex64) -> Result<f64> {
        if !self.omega.contains(xi) {
            return Err(Error::OutOfDomain);
        }
        let m = self.budget.max_mult as f64;
        let z = self.u(xi);
        let op = self
            .field
            .inverse_branch_offset(pole, z, self.branch.inverse_branch)?;
        let fprime = self.field.evaluate_offset(pole, op.offset)?.1.value;
        let zp = op.point();
        let xi_p = self.u_inv(zp)?;
        // |u'(ξ)| = M·|ξ|^(-M-1), |(u^(-1))'(z')| = |ξ'|/(M·|z'|).
        let u_deriv = m * xi.norm().powi(-(self.budget.max_mult as i32) - 1);
        let uinv_deriv = xi_p.norm() / (m * zp.norm());
        Ok(uinv_deriv * u_deriv / fprime.norm())
    }

    /// Analytic bracket for `|φ_j'|`: center `w_j·|ξ|^(M/m_j - 1)` with
    /// comparability constant 2KM (ξ-independent at maximal multiplicity).
    pub fn phi_bracket(&self, pole: &PoleDatum, xi_abs: f64) -> DerivativeBracket {
        let m_cap = self.budget.max_mult as f64;
        let w = pole.weight(self.budget.max_mult);
        let expo = m_cap / pole.multiplicity as f64 - 1.0;
        let center = w * xi_abs.powf(expo);
        DerivativeBracket::around(center, 2.0 * self.budget.koebe_k * m_cap)
    }

    /// Image and derivative modulus of one φ step from a single Newton solve.
    pub fn phi_step(&self, pole: &PoleDatum, xi: Complex64) -> Result<(Complex64, f64)> {
        if !self.omega.contains(xi) {
            return Err(Error::OutOfDomain);
        }
        let m = self.budget.max_mult as f64;
        let z = self.u(xi);
        let op = self
            .field
            .inverse_branch_offset(pole, z, self.branch.inverse_branch)?;
        let fprime = self.field.evaluate_offset(pole, op.offset)?.1.value;
        let zp = op.point();
        let xi_p = self.u_inv(zp)?;
        let u_deriv = m * xi.norm().powi(-(self.budget.max_mult as i32) - 1);
        let uinv_deriv = xi_p.norm() / (m * zp.norm());
        Ok((xi_p, uinv_deriv * u_deriv / fprime.norm()))
    }

    /// Triple composition `Φ_{l,j} = φ_l ∘ φ_j ∘ φ_l` through the l-th
    /// selected maximal-multiplicity pole.
    pub fn triple(&self, l: usize, pole_j: &PoleDatum, xi: Complex64) -> Result<Complex64> {
        let pole_l = *self.selected_pole(l)?;
        let x1 = self.phi(&pole_l, xi)?;
        let x2 = self.phi(pole_j, x1)?;
        self.phi(&pole_l, x2)
    }

    /// Numeric `|Φ'_{l,j}(ξ)|` as the chain product of the three factor
    /// derivatives at the chained points.
    pub fn triple_derivative_abs(
        &self,
        l: usize,
        pole_j: &PoleDatum,
        xi: Complex64,
    ) -> Result<f64> {
        let pole_l = *self.selected_pole(l)?;
        let (x1, d1) = self.phi_step(&pole_l, xi)?;
        let (x2, d2) = self.phi_step(pole_j, x1)?;
        let (_, d3) = self.phi_step(&pole_l, x2)?;
        Ok(d1 * d2 * d3)
    }

    /// Analytic bracket for `|Φ'_{l,j}|`: center
    /// `(|b_l|²/|a_l|^(2+1/m_j+1/M)) · |b_j|/|a_j|^(1+1/M)`, comparability
    /// constant `2L³` with `L = 2KM`. At a strict budget the upper end is
    /// additionally at most 1/4.
    pub fn triple_bracket(&self, l: usize, pole_j: &PoleDatum) -> Result<DerivativeBracket> {
        let pole_l = self.selected_pole(l)?;
        let m_cap = self.budget.max_mult as f64;
        let b_l = pole_l.coeff.norm();
        let a_l = pole_l.location.norm();
        let center = b_l * b_l
            / a_l.powf(2.0 + 1.0 / pole_j.multiplicity as f64 + 1.0 / m_cap)
            * pole_j.weight(self.budget.max_mult);
        let constant = 2.0 * self.budget.chain_l.powi(3);
        let bracket = DerivativeBracket::around(center, constant);
        if self.budget.strict {
            debug_assert!(bracket.hi <= 0.25, "strict budget must contract by 1/4");
        }
        Ok(bracket)
    }

    /// Single-branch derivative `|g_{j,k}'|` of an inverse branch of f from a
    /// neighborhood into another, via 1/|f'| at the branch point.
    pub fn single_branch_derivative_abs(
        &self,
        pole_j: &PoleDatum,
        w: Complex64,
    ) -> Result<f64> {
        let op = self
            .field
            .inverse_branch_offset(pole_j, w, self.branch.inverse_branch)?;
        let fprime = self.field.evaluate_offset(pole_j, op.offset)?.1.value;
        Ok(1.0 / fprime.norm())
    }

    /// Sampled sup/inf of |F'| for a composition of triple maps over the
    /// domain grid, with the annulus-modulus metadata from the nesting
    /// `U(R2) ⊂ U(R2/(2K^(2M)))`.
    pub fn distortion_estimate(
        &self,
        composition: &[(usize, usize)],
        samples: usize,
    ) -> Result<DistortionReport> {
        if composition.is_empty() {
            return Err(Error::BadParameter("empty composition".into()));
        }
        let n_r = (samples as f64).sqrt().ceil() as usize;
        let grid = self.omega.sample_grid(n_r.max(2), n_r.max(2));
        let mut inf = f64::INFINITY;
        let mut sup = 0.0f64;
        let mut used = 0usize;
        for &xi0 in grid.iter().take(samples) {
            let mut xi = xi0;
            let mut log_deriv = 0.0f64;
            let mut ok = true;
            // Innermost map first; each triple is three fused steps.
            for &(l, j) in composition.iter().rev() {
                let pole_l = *self.selected_pole(l)?;
                let pole_j = self.pool[j];
                let mut advance = || -> Result<()> {
                    let (x1, d1) = self.phi_step(&pole_l, xi)?;
                    let (x2, d2) = self.phi_step(&pole_j, x1)?;
                    let (x3, d3) = self.phi_step(&pole_l, x2)?;
                    log_deriv += (d1 * d2 * d3).ln();
                    xi = x3;
                    Ok(())
                };
                if advance().is_err() {
                    ok = false;
                    break;
                }
            }
            if ok {
                inf = inf.min(log_deriv);
                sup = sup.max(log_deriv);
                if used == 0 {
                    sup = log_deriv;
                }
                used += 1;
            }
        }
        if used < 2 {
            return Err(Error::DegenerateSample(
                "too few distortion samples".into(),
            ));
        }
        Ok(DistortionReport {
            ratio: (sup - inf).exp(),
            samples: used,
            modulus_lower_bound: 2f64.ln()
                / (2.0 * std::f64::consts::PI * self.budget.max_mult as f64),
        })
    }
}

/// Central-difference `|φ_j'(ξ)|` with a step adapted so the numerator clears
/// the f64 granularity of the output values. Independent of the bracket
/// formulas; used to validate them.
pub fn finite_difference_phi(
    sys: &ConjugatedSystem,
    pole: &PoleDatum,
    xi: Complex64,
) -> Result<f64> {
    let m = sys.budget.max_mult;
    // Output scale |ξ'| ≈ |a|^(-1/M); expected derivative ≈ the weight.
    let out_scale = pole.location.norm().powf(-1.0 / m as f64);
    let expected = pole.weight(m).max(1e-300);
    let h_floor = 1e4 * f64::EPSILON * out_scale / expected;
    let h = h_floor.max(1e-7 * xi.norm()).min(2e-2 * xi.norm());
    let hp = Complex64::new(h, 0.0);
    let fp = sys.phi(pole, xi + hp)?;
    let fm = sys.phi(pole, xi - hp)?;
    Ok(((fp - fm) / (2.0 * h)).norm())
}

/// Finite-difference `|Φ'_{l,j}|` as the product of per-factor central
/// differences along the chain. A direct difference of the composed map is
/// below f64 resolution at every budget (|Φ'| ~ w²·w is that small), while
/// each factor difference is resolvable.
pub fn finite_difference_triple(
    sys: &ConjugatedSystem,
    l: usize,
    pole_j: &PoleDatum,
    xi: Complex64,
) -> Result<f64> {
    let pole_l = *sys.selected_pole(l)?;
    let d1 = finite_difference_phi(sys, &pole_l, xi)?;
    let x1 = sys.phi(&pole_l, xi)?;
    let d2 = finite_difference_phi(sys, pole_j, x1)?;
    let x2 = sys.phi(pole_j, x1)?;
    let d3 = finite_difference_phi(sys, &pole_l, x2)?;
    Ok(d1 * d2 * d3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugacy::{desk_radii, select_cone, ConjugatedSystem};
    use crate::polefield::{PoleDatum, PoleField};
    use approx::assert_relative_eq;

    fn lattice_system() -> ConjugatedSystem {
        let f = PoleField::lattice_power(3.0, 1).unwrap();
        let budget = desk_radii(&f, 2.0, 20.0).unwrap();
        let cone = select_cone(&f, 0.35).unwrap();
        ConjugatedSystem::build(f, budget, cone, 120.0).unwrap()
    }

    #[test]
    fn u_roundtrip_on_domain() {
        let sys = lattice_system();
        for xi in sys.omega.sample_grid(4, 6) {
            let z = sys.u(xi);
            assert!(z.norm() >= sys.budget.r2 * 0.999);
            let back = sys.u_inv(z).unwrap();
            assert!((back - xi).norm() <= 1e-12 * xi.norm(), "ξ = {xi}");
        }
    }

    #[test]
    fn conjugation_identity() {
        // u(φ_j(ξ)) = f_j^(-1)(u(ξ)) to 1e-9 relative.
        let sys = lattice_system();
        let pole = sys.pool()[0];
        for xi in sys.omega.sample_grid(3, 4) {
            let z = sys.u(xi);
            let branch = sys.field.inverse_branch_at(&pole, z, 0).unwrap();
            let phi = sys.phi(&pole, xi).unwrap();
            let lhs = sys.u(phi);
            assert!(
                (lhs - branch).norm() <= 1e-9 * branch.norm(),
                "ξ = {xi}: {lhs} vs {branch}"
            );
        }
    }

    #[test]
    fn phi_closed_form_single_pole() {
        // One simple pole: f = b/(z-a), f^(-1)(w) = a + b/w, M = 1, u = 1/ξ:
        // φ(ξ) = 1/(a + b·ξ).
        let a = Complex64::new(60.0, 45.0);
        let b = Complex64::new(2e-3, 1e-3);
        let f = PoleField::custom(vec![PoleDatum::new(0, a, b, 1)], vec![])
            .unwrap()
            .with_singular_bound(2.0);
        let budget = desk_radii(&f, 2.0, 20.0).unwrap();
        let cone = super::super::ConeSpec::new(0.0, 0.75);
        let sys = ConjugatedSystem::build(f, budget, cone, 200.0).unwrap();
        for xi in sys.omega.sample_grid(3, 5) {
            let phi = sys.phi(&sys.pool()[0].clone(), xi).unwrap();
            let exact = 1.0 / (a + b * xi);
            assert!(
                (phi - exact).norm() <= 1e-9 * exact.norm(),
                "ξ = {xi}: φ = {phi}, exact {exact}"
            );
        }
    }

    #[test]
    fn phi_derivative_inside_bracket() {
        let sys = lattice_system();
        for (pi, pole) in sys.pool().iter().enumerate().step_by(37).take(6) {
            let _ = pi;
            for xi in sys.omega.sample_grid(2, 3) {
                let d = sys.phi_derivative_abs(pole, xi).unwrap();
                let bracket = sys.phi_bracket(pole, xi.norm());
                assert!(
                    bracket.contains(d),
                    "|φ'| = {d:e} outside [{:e}, {:e}]",
                    bracket.lo,
                    bracket.hi
                );
            }
        }
    }

    #[test]
    fn finite_difference_agrees_with_ift_derivative() {
        let sys = lattice_system();
        let pole = sys.pool()[5];
        for xi in sys.omega.sample_grid(2, 3) {
            let fd = finite_difference_phi(&sys, &pole, xi).unwrap();
            let ift = sys.phi_derivative_abs(&pole, xi).unwrap();
            assert_relative_eq!(fd, ift, max_relative = 1e-2);
        }
    }

    #[test]
    fn triple_contraction_and_bracket() {
        let sys = lattice_system();
        let xi = sys.omega.center();
        for (l, j) in [(0usize, 1usize), (2, 7), (5, 3)] {
            let pole_j = sys.pool()[j];
            let d = sys.triple_derivative_abs(l, &pole_j, xi).unwrap();
            assert!(d <= 0.25, "|Φ'| = {d:e}");
            let bracket = sys.triple_bracket(l, &pole_j).unwrap();
            assert!(
                bracket.contains(d),
                "|Φ'| = {d:e} outside [{:e}, {:e}]",
                bracket.lo,
                bracket.hi
            );
            // Bracket ratio is constant².
            assert_relative_eq!(
                bracket.hi / bracket.lo,
                bracket.constant * bracket.constant,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn triple_maps_domain_into_itself() {
        let sys = lattice_system();
        let pole_j = sys.pool()[4];
        for xi in sys.omega.sample_grid(3, 5) {
            let img = sys.triple(0, &pole_j, xi).unwrap();
            assert!(sys.omega.contains(img), "Φ(ξ) = {img} escaped");
        }
    }

    #[test]
    fn single_branch_derivatives_contract() {
        let sys = lattice_system();
        for (j, pole) in sys.pool().iter().enumerate().step_by(53).take(5) {
            let _ = j;
            let w = Complex64::new(2.5 * sys.budget.r2, sys.budget.r2);
            let g = sys.single_branch_derivative_abs(pole, w).unwrap();
            assert!(g <= 0.5, "|g'| = {g:e}");
        }
    }

    #[test]
    fn distortion_report_for_compositions() {
        let sys = lattice_system();
        let rep1 = sys.distortion_estimate(&[(0, 1)], 16).unwrap();
        assert!(rep1.ratio >= 1.0);
        let rep3 = sys.distortion_estimate(&[(0, 1), (1, 4), (2, 2)], 12).unwrap();
        assert!(rep3.ratio >= 1.0 && rep3.ratio.is_finite());
        assert_relative_eq!(
            rep3.modulus_lower_bound,
            2f64.ln() / (2.0 * std::f64::consts::PI),
            max_relative = 1e-12
        );
    }
}
