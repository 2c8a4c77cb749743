use escapedim::polefield::PoleField;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fields = [
        ("lp31", PoleField::lattice_power(3.0, 1).unwrap()),
        ("lp152", PoleField::lattice_power(1.5, 2).unwrap()),
        ("le1", PoleField::lattice_exp(1).unwrap()),
        ("log", PoleField::log_poles()),
        ("gam", PoleField::gamma(0.0).unwrap()),
    ];
    for (name, f) in &fields {
        let r0 = f.r0_threshold().unwrap_or(4.0);
        let mut fails = 0;
        let mut examples = Vec::new();
        for _ in 0..2000 {
            let p = f.poles()[rng.gen_range(0..f.poles().len())];
            let w = Complex64::from_polar(
                r0 * (1.0 + rng.gen_range(0.5..40.0)),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            let branch = rng.gen_range(0..p.multiplicity);
            if let Err(e) = f.inverse_branch_offset(&p, w, branch) {
                fails += 1;
                if examples.len() < 3 {
                    examples.push(format!("pole |a|={:.2} b={:.3e} m={} |w|={:.1}: {e}", p.location.norm(), p.coeff.norm(), p.multiplicity, w.norm()));
                }
            }
        }
        println!("{name}: {fails}/2000 failures");
        for e in examples { println!("   {e}"); }
    }
}
