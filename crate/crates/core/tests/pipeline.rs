//! Cross-module behavior on the built-in families.

use escapedim::conjugacy::{self, ConjugatedSystem};
use escapedim::critexp;
use escapedim::dimest::{self, BracketConfig};
use escapedim::nais;
use escapedim::polefield::PoleField;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Singular-value confinement surrogate: the value stays within modulus 2 on
/// a large sample of the region outside all pole disks D(a, b), and the
/// derivative never vanishes on a large sample of the punctured disks.
#[test]
fn lattice_singular_value_confinement() {
    let f = PoleField::lattice_power(3.0, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut outside = 0usize;
    while outside < 10_000 {
        let z = Complex64::new(rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0));
        let site = Complex64::new(z.re.round(), z.im.round());
        // Disk radii are |a|^-3 ≤ 1e-3 in this range; 1e-2 clearance is ample.
        if (z - site).norm() < 1e-2 {
            continue;
        }
        let e = f.evaluate(z).unwrap();
        assert!(
            e.value.norm() + e.tail_bound <= 2.0,
            "|f({z})| = {}",
            e.value.norm()
        );
        outside += 1;
    }
    // Critical points avoid the pole disks: f' ≠ 0 there.
    let poles: Vec<_> = f.poles().iter().step_by(7).take(100).collect();
    let mut inside = 0usize;
    'outer: loop {
        for p in &poles {
            let frac: f64 = rng.gen_range(0.05..0.95);
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let z = p.location + Complex64::from_polar(frac * p.coeff.norm(), angle);
            let d = f.evaluate_derivative(z).unwrap();
            assert!(
                d.value.norm() > d.tail_bound,
                "derivative could vanish near pole {}",
                p.index
            );
            inside += 1;
            if inside >= 10_000 {
                break 'outer;
            }
        }
    }
}

/// Branch completeness: all m branches at a fixed target are distinct, for
/// each multiplicity among the built-ins.
#[test]
fn branch_completeness_on_builtins() {
    let cases = [
        PoleField::lattice_power(3.0, 1).unwrap(),
        PoleField::lattice_power(1.5, 2).unwrap(),
    ];
    for f in cases {
        let idx = f.poles()[2].index;
        let w = Complex64::new(37.0, 11.0);
        let branches = f.inverse_branches(idx, w).unwrap();
        assert_eq!(branches.len(), f.max_mult as usize);
        for i in 0..branches.len() {
            for j in i + 1..branches.len() {
                assert!((branches[i] - branches[j]).norm() > 1e-9);
            }
        }
    }
}

/// The restricted exponents increase with the multiplicity cap and stabilize
/// at the full δ once the cap reaches the maximal multiplicity.
#[test]
fn restricted_exponent_ladder_is_monotone() {
    let f = PoleField::lattice_power(1.5, 2).unwrap();
    let (ladder, sup) = critexp::restriction_ladder(&f, 1e-4).unwrap();
    let mut last = -1.0;
    for (_, est) in &ladder {
        assert!(est.value() >= last - 1e-9);
        last = est.value();
    }
    let full = critexp::field_critical_exponent(&f, 1e-4);
    assert!((sup.value() - full.value()).abs() <= 1e-6);
}

/// The strict budget (K = 1.4 is sound at radius ratios ≤ 1/16) pushes the
/// pole pool beyond the head; lazy materialization plus offset Newton keep
/// the conjugacy identity and contraction verifiable out there.
#[test]
fn strict_budget_system_far_from_head() {
    let f = PoleField::lattice_power(3.0, 1).unwrap();
    let budget = conjugacy::admissible_radii(&f, 1.4).unwrap();
    assert!(budget.strict);
    assert!(2.0 * budget.r2 > f.horizon);
    let cone = conjugacy::select_cone(&f, 0.35).unwrap();
    let sys = ConjugatedSystem::build(f, budget, cone, 2.5 * budget.r2).unwrap();
    assert!(sys.pool().len() > 100);
    let xi = sys.omega.center();
    for step in [0usize, 41, 113] {
        let pole = sys.pool()[step.min(sys.pool().len() - 1)];
        // Conjugation identity at the far pole.
        let z = sys.u(xi);
        let branch = sys.field.inverse_branch_at(&pole, z, 0).unwrap();
        let phi = sys.phi(&pole, xi).unwrap();
        assert!((sys.u(phi) - branch).norm() <= 1e-9 * branch.norm());
        // Derivatives are far inside the contraction targets.
        let d = sys.phi_derivative_abs(&pole, xi).unwrap();
        let bracket = sys.phi_bracket(&pole, xi.norm());
        assert!(bracket.contains(d));
        let g = sys
            .single_branch_derivative_abs(&pole, Complex64::new(2.2 * sys.budget.r2, 0.0))
            .unwrap();
        assert!(g <= 0.5);
        let t = sys.triple_derivative_abs(0, &pole, xi).unwrap();
        assert!(t <= 0.25);
    }
}

/// Limit-set samples of the conjugated system stay in the sector and push
/// forward (through u) to points beyond R2 — seeds of escaping orbits.
#[test]
fn limit_set_sample_pushes_beyond_r2() {
    let f = PoleField::lattice_power(3.0, 1).unwrap();
    let cfg = BracketConfig::default();
    let sys = dimest::desk_system(&f, &cfg).unwrap();
    let (lo, _) = sys.weight_pool();
    let schedule = nais::build_schedule(&lo, 0.35, 8).unwrap();
    let map = |i: usize, x: Complex64| sys.phi(&sys.pool()[i], x);
    let sample =
        nais::sample_limit_set(&map, &schedule, sys.omega.center(), 8, 64, 3).unwrap();
    assert!(!sample.points.is_empty());
    for p in &sample.points {
        assert!(sys.omega.contains(*p), "sample point {p} left the sector");
        assert!(sys.u(*p).norm() >= sys.budget.r2);
    }
    // Box-count cross-check runs on the pushed-forward sample (coarse scales
    // only; the sample is a sparse subset, so this is a smoke test of the
    // plumbing, not a dimension claim).
    if sample.points.len() >= 100 {
        let pts: Vec<Complex64> = sample.points.iter().map(|p| sys.u(*p)).collect();
        let scales = [4.0, 2.0, 1.0, 0.5];
        let bc = dimest::box_count_dimension(&pts, &scales).unwrap();
        assert!(bc.slope >= -0.1 && bc.slope <= 2.1);
    }
}

/// Upper ladder decreasing toward δ and the bracket sandwiching it, for the
/// second lattice parameter set.
#[test]
fn sandwich_for_double_multiplicity_delta() {
    let f = PoleField::lattice_power(1.5, 2).unwrap();
    let delta = critexp::field_critical_exponent(&f, 1e-4).value();
    assert!((delta - 2.0 / 3.0).abs() <= 1e-3);
    let consts = dimest::CoverConstants::for_field(&f, 2.0);
    let ladder =
        dimest::upper_dimension_ladder(&f, &[1e4, 1e6, 1e8, 1e10], 1e-3, consts).unwrap();
    for pair in ladder.windows(2) {
        assert!(pair[1].t_upper <= pair[0].t_upper + 1e-9);
    }
    let upper = ladder.last().unwrap().t_upper;
    assert!(upper >= delta - 1e-3, "upper {upper} under δ {delta}");
    assert!(upper <= delta + 0.2, "upper {upper} far above δ {delta}");
}
