//! The acceptance harness: thirteen checks, one deterministic pass/fail line
//! each. Wall-clock timings are collected per check but kept out of the
//! rendered report so two runs of the same config produce identical bytes.

use std::time::Instant;

use escapedim::conjugacy::{finite_difference_phi, finite_difference_triple, ConjugatedSystem};
use escapedim::critexp::{self, RhoValue};
use escapedim::dimest;
use escapedim::nais;
use escapedim::polefield::PoleField;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{self, bracket_config};
use crate::config::RunConfig;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub results: Vec<CriterionResult>,
    pub config_hash: String,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    /// Deterministic report: no timings, fixed float formatting.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} verify v{} config {}\n",
            crate::config::TOOL_NAME,
            crate::config::TOOL_VERSION,
            self.config_hash
        );
        for r in &self.results {
            out.push_str(&format!(
                "criterion {:02} {} {}: {}\n",
                r.id,
                if r.pass { "PASS" } else { "FAIL" },
                r.name,
                r.detail
            ));
        }
        out.push_str(&format!(
            "result: {}\n",
            if self.all_pass() { "PASS" } else { "FAIL" }
        ));
        out
    }

    /// Timing lines for the console (not part of the deterministic report).
    pub fn timings(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            out.push_str(&format!(
                "criterion {:02}: {:.2}s\n",
                r.id, r.seconds
            ));
        }
        out
    }
}

struct Ctx {
    lp31: PoleField,
    lp152: PoleField,
    le1: PoleField,
    logp: PoleField,
    gam: PoleField,
    desk: escapedim::Result<ConjugatedSystem>,
}

fn timed(
    id: u32,
    name: &'static str,
    f: impl FnOnce() -> (bool, String),
) -> CriterionResult {
    let t0 = Instant::now();
    let (pass, detail) = f();
    CriterionResult {
        id,
        name,
        pass,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

/// Run the full acceptance suite for the built-in families.
pub fn run_verify(config: &RunConfig) -> escapedim::Result<VerifyReport> {
    let ctx = Ctx {
        lp31: PoleField::lattice_power(3.0, 1)?,
        lp152: PoleField::lattice_power(1.5, 2)?,
        le1: PoleField::lattice_exp(1)?,
        logp: PoleField::log_poles(),
        gam: PoleField::gamma(0.0)?,
        desk: {
            let f = PoleField::lattice_power(3.0, 1)?;
            dimest::desk_system(&f, &bracket_config(config))
        },
    };
    let tol = config.tolerances.delta;
    let mut results = Vec::new();

    results.push(timed(1, "delta closed form, M=1 lattice", || {
        let est = critexp::field_critical_exponent(&ctx.lp31, tol);
        let target = 2.0 / (3.0 + 1.0 + 1.0);
        (
            (est.value() - target).abs() <= 1e-3,
            format!("delta = {:.6}, target {:.6}", est.value(), target),
        )
    }));

    results.push(timed(2, "delta closed form, M=2 lattice", || {
        let est = critexp::field_critical_exponent(&ctx.lp152, tol);
        let target = 2.0 / (1.5 + 1.0 + 0.5);
        (
            (est.value() - target).abs() <= 1e-3,
            format!("delta = {:.6}, target {:.6}", est.value(), target),
        )
    }));

    results.push(timed(3, "vanishing delta families", || {
        let d1 = critexp::field_critical_exponent(&ctx.le1, tol).value();
        let d2 = critexp::field_critical_exponent(&ctx.logp, tol).value();
        let d3 = critexp::restricted_critical_exponent(&ctx.gam, 1, tol)
            .map(|e| e.value())
            .unwrap_or(f64::NAN);
        (
            d1 <= 0.05 && d2 <= 0.05 && d3 <= 0.05,
            format!("lattice_exp {d1:.6}, log_poles {d2:.6}, gamma delta_1 {d3:.6}"),
        )
    }));

    results.push(timed(4, "orders of the families", || {
        let r1 = critexp::order_of_function(&ctx.lp31, tol);
        let r2 = critexp::order_of_function(&ctx.le1, tol);
        let r3 = critexp::order_of_function(&ctx.logp, tol);
        let fin = |r: &escapedim::Result<critexp::OrderEstimate>| match r {
            Ok(critexp::OrderEstimate {
                rho: RhoValue::Finite(v),
                ..
            }) => Some(*v),
            _ => None,
        };
        let (v1, v2) = (fin(&r1), fin(&r2));
        let inf3 = matches!(
            r3,
            Ok(critexp::OrderEstimate {
                rho: RhoValue::Infinite,
                ..
            })
        );
        let ok = v1.is_some_and(|v| (v - 2.0).abs() <= 0.05)
            && v2.is_some_and(|v| (v - 2.0).abs() <= 0.05)
            && inf3;
        (
            ok,
            format!(
                "lattice orders {:?} {:?}, log_poles infinite: {inf3}",
                v1, v2
            ),
        )
    }));

    results.push(timed(5, "order bound dominates delta", || {
        let cases: [(&PoleField, u32, Option<u32>); 4] = [
            (&ctx.lp31, 1, None),
            (&ctx.lp152, 2, None),
            (&ctx.le1, 1, None),
            (&ctx.gam, 1, Some(1)),
        ];
        let mut ok = true;
        let mut details = Vec::new();
        for (f, m, cap) in cases {
            let delta = match cap {
                Some(c) => critexp::restricted_critical_exponent(f, c, tol)
                    .map(|e| e.value())
                    .unwrap_or(f64::NAN),
                None => critexp::field_critical_exponent(f, tol).value(),
            };
            let rho = match critexp::order_of_function(f, tol) {
                Ok(o) => o.rho,
                Err(_) => {
                    ok = false;
                    continue;
                }
            };
            let bound = critexp::bk_upper_bound(m, &rho);
            ok &= delta <= bound + 1e-3;
            details.push(format!("{delta:.4}<={bound:.4}"));
        }
        // Strictness for the M=2 lattice: 2/3 sits well under 4/3.
        let d152 = critexp::field_critical_exponent(&ctx.lp152, tol).value();
        let rho152 = critexp::order_of_function(&ctx.lp152, tol)
            .map(|o| o.rho)
            .unwrap_or(RhoValue::Infinite);
        let strict = critexp::bk_upper_bound(2, &rho152) - d152 > 0.5;
        ok &= strict;
        (ok, format!("{} strict_gap {strict}", details.join(" ")))
    }));

    results.push(timed(6, "contraction at the admissible budget", || {
        match commands::strict_system(&ctx.lp31, 1.4, 2.1) {
            Ok(sys) => {
                let grid = sys.omega.sample_grid(2, 5);
                let n_pool = sys.pool().len();
                let n_sel = sys.selected().len();
                let mut max_triple = 0.0f64;
                let mut max_single = 0.0f64;
                let mut n_triple = 0usize;
                let mut n_single = 0usize;
                let mut ok = true;
                'outer: for i in 0..100 {
                    let l = (i * 17) % n_sel;
                    let pole_j = sys.pool()[(i * 37 + 5) % n_pool];
                    for &xi in &grid {
                        match sys.triple_derivative_abs(l, &pole_j, xi) {
                            Ok(d) => {
                                max_triple = max_triple.max(d);
                                n_triple += 1;
                                if d > 0.25 {
                                    ok = false;
                                    break 'outer;
                                }
                            }
                            Err(_) => {
                                ok = false;
                                break 'outer;
                            }
                        }
                    }
                    let w = Complex64::from_polar(
                        2.2 * sys.budget.r2,
                        0.1 + i as f64 * 0.04,
                    );
                    for k in 0..10 {
                        let pole = sys.pool()[(i * 53 + k * 7) % n_pool];
                        match sys.single_branch_derivative_abs(&pole, w) {
                            Ok(g) => {
                                max_single = max_single.max(g);
                                n_single += 1;
                                if g > 0.5 {
                                    ok = false;
                                    break 'outer;
                                }
                            }
                            Err(_) => {
                                ok = false;
                                break 'outer;
                            }
                        }
                    }
                }
                ok &= n_triple >= 1000 && n_single >= 1000;
                (
                    ok,
                    format!(
                        "{n_triple} triple samples max {max_triple:.3e} <= 0.25, {n_single} single max {max_single:.3e} <= 0.5"
                    ),
                )
            }
            Err(e) => (false, format!("system unavailable: {e}")),
        }
    }));

    results.push(timed(7, "derivative brackets hold numerically", || {
        let sys = match &ctx.desk {
            Ok(s) => s,
            Err(e) => return (false, format!("desk system unavailable: {e}")),
        };
        let grid = sys.omega.sample_grid(10, 10);
        let n_pool = sys.pool().len();
        let mut phi_total = 0usize;
        let mut phi_inside = 0usize;
        for i in 0..10 {
            let pole = sys.pool()[(i * 97 + 3) % n_pool];
            for &xi in &grid {
                if let Ok(fd) = finite_difference_phi(sys, &pole, xi) {
                    phi_total += 1;
                    if sys.phi_bracket(&pole, xi.norm()).contains(fd) {
                        phi_inside += 1;
                    }
                }
            }
        }
        let mut tri_total = 0usize;
        let mut tri_inside = 0usize;
        for i in 0..10 {
            let l = (i * 13) % sys.selected().len();
            let pole_j = sys.pool()[(i * 41 + 11) % n_pool];
            for &xi in grid.iter() {
                if let Ok(fd) = finite_difference_triple(sys, l, &pole_j, xi) {
                    tri_total += 1;
                    if let Ok(b) = sys.triple_bracket(l, &pole_j) {
                        if b.contains(fd) {
                            tri_inside += 1;
                        }
                    }
                }
            }
        }
        let phi_rate = phi_inside as f64 / phi_total.max(1) as f64;
        let tri_rate = tri_inside as f64 / tri_total.max(1) as f64;
        (
            phi_total >= 1000 && tri_total >= 1000 && phi_rate >= 0.99 && tri_rate >= 0.99,
            format!(
                "phi {phi_inside}/{phi_total} inside, triple {tri_inside}/{tri_total} inside"
            ),
        )
    }));

    results.push(timed(8, "schedule pressure at t below delta", || {
        let sys = match &ctx.desk {
            Ok(s) => s,
            Err(e) => return (false, format!("desk system unavailable: {e}")),
        };
        let t = 0.4 - 0.05;
        let (lo, hi) = sys.weight_pool();
        let fam = match nais::ContractionFamily::new(lo.clone(), hi, 16.0) {
            Ok(f) => f,
            Err(e) => return (false, e.to_string()),
        };
        match nais::build_schedule(&lo, t, config.pipeline.n_levels) {
            Ok(schedule) => {
                let p = nais::lower_pressure(&fam, &schedule, t, config.pipeline.n_levels);
                let target = 2f64.ln() - 0.1;
                (
                    p.pressure_bracket.0 >= target && schedule.depth() >= 64,
                    format!(
                        "depth {} pressure lo {:.4} >= {:.4}",
                        schedule.depth(),
                        p.pressure_bracket.0,
                        target
                    ),
                )
            }
            Err(e) => (false, format!("schedule failed: {e}")),
        }
    }));

    results.push(timed(9, "autonomous Moran oracle", || {
        let cases = [(4usize, 0.5f64, 2.0f64), (2, 1.0 / 3.0, 0.63093)];
        let mut ok = true;
        let mut details = Vec::new();
        for (n, c, target) in cases {
            let fam = nais::ContractionFamily::autonomous(n, c).unwrap();
            let est = nais::bowen_dimension(
                &fam,
                |_| Ok(nais::IndexSchedule::autonomous(n, 32)),
                1e-4,
                32,
            );
            ok &= (est.value() - target).abs() <= 1e-3;
            details.push(format!("{:.4}", est.value()));
        }
        (ok, format!("dimensions {} targets 2.0000 0.6309", details.join(" ")))
    }));

    results.push(timed(10, "sandwich bracket", || {
        let cfg = bracket_config(config);
        let rep = match dimest::dimension_bracket(&ctx.lp31, &cfg) {
            Ok(r) => r,
            Err(e) => return (false, e.to_string()),
        };
        let lattice_ok = rep.bracket_lo <= 0.4
            && 0.4 <= rep.bracket_hi
            && rep.bracket_hi - rep.bracket_lo <= 0.1;
        let log_cfg = dimest::BracketConfig {
            ladder: vec![100.0, 1e3, 1e4],
            ..cfg
        };
        let log_rep = match dimest::dimension_bracket(&ctx.logp, &log_cfg) {
            Ok(r) => r,
            Err(e) => return (false, e.to_string()),
        };
        let log_ok = log_rep.bracket_hi <= 0.05;
        (
            lattice_ok && log_ok,
            format!(
                "lattice [{:.4}, {:.4}], log_poles upper {:.4}",
                rep.bracket_lo, rep.bracket_hi, log_rep.bracket_hi
            ),
        )
    }));

    results.push(timed(11, "inverse branch residuals", || {
        let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
        let fields = [&ctx.lp31, &ctx.lp152, &ctx.le1, &ctx.logp, &ctx.gam];
        let mut failures = 0usize;
        let mut no_conv = 0usize;
        let mut total = 0usize;
        let mut worst = 0.0f64;
        for f in fields {
            let r0 = f.r0_threshold().unwrap_or(4.0);
            for _ in 0..2000 {
                total += 1;
                let p = f.poles()[rng.gen_range(0..f.poles().len())];
                let w = Complex64::from_polar(
                    r0 * (1.0 + rng.gen_range(0.5..40.0)),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                );
                let branch = rng.gen_range(0..p.multiplicity);
                match f.inverse_branch_offset(&p, w, branch) {
                    Ok(op) => match f.evaluate_offset(&p, op.offset) {
                        Ok((fv, _)) => {
                            let res = (fv.value - w).norm() / w.norm();
                            worst = worst.max(res);
                            if res > 1e-10 {
                                failures += 1;
                            }
                        }
                        Err(_) => failures += 1,
                    },
                    Err(escapedim::Error::NoConvergence { .. }) => no_conv += 1,
                    Err(_) => failures += 1,
                }
            }
        }
        let ok = failures == 0 && (no_conv as f64) < 0.001 * total as f64;
        (
            ok,
            format!(
                "{total} pairs, worst residual {worst:.2e}, {failures} over 1e-10, {no_conv} no-convergence"
            ),
        )
    }));

    results.push(timed(12, "backward-orbit escape certificate", || {
        let sys = match &ctx.desk {
            Ok(s) => s,
            Err(e) => return (false, format!("desk system unavailable: {e}")),
        };
        match dimest::escape_certificate(sys, 100, 8, 20, config.run.seed, 1e-6) {
            Ok(rep) => (
                rep.verified == rep.seeds && rep.min_modulus >= rep.r2,
                format!(
                    "{}/{} chains verified, min modulus {:.2} >= R2 {:.0}, max step error {:.2e}",
                    rep.verified, rep.seeds, rep.min_modulus, rep.r2, rep.max_step_error
                ),
            ),
            Err(e) => (false, e.to_string()),
        }
    }));

    results.push(timed(13, "byte-identical reruns", || {
        let once = determinism_probe(config);
        let twice = determinism_probe(config);
        match (once, twice) {
            (Ok(a), Ok(b)) => (a == b, format!("probe bytes {} == {}", a.len(), b.len())),
            (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
        }
    }));

    Ok(VerifyReport {
        results,
        config_hash: config.hash(),
    })
}

/// A cheap command bundle reflecting every output path (JSON + CSV).
fn determinism_probe(config: &RunConfig) -> escapedim::Result<String> {
    let d = commands::cmd_delta(config, None, true)?;
    let o = commands::cmd_order(config)?;
    let mut s = d.stdout;
    s.push_str(&o.stdout);
    for (_, bytes) in d.files {
        s.push_str(&String::from_utf8_lossy(&bytes));
    }
    Ok(s)
}
