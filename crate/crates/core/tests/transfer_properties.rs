use std::f64::consts::PI;

use dirac_spectral::chardet;
use dirac_spectral::transfer::{self, Family, SeriesOptions};
use dirac_spectral::{BoundaryMatrix, Potential, ProblemSpec, C64};
use proptest::prelude::*;

fn component() -> impl Strategy<Value = String> {
    let c = || (-1.5..1.5f64, -1.5..1.5f64).prop_map(|(a, b)| format!("({a:.4}{b:+.4}*i)"));
    prop_oneof![
        (c(), c()).prop_map(|(a, b)| format!("{a}+{b}*x")),
        (c(), 1..4u32).prop_map(|(a, k)| format!("{a}*cos({k}*x)")),
        (c(), -1.0..0.5f64).prop_map(|(a, s)| format!("{a}*exp({s:.3}*x)")),
        (c(), -0.5..2.0f64).prop_map(|(a, s)| format!("{a}*x^{s:.3}")),
        (c(), 0.3..2.8f64).prop_map(|(a, s)| format!("{a}*abs(x-{s:.3})")),
    ]
}

fn lambda(im: f64) -> impl Strategy<Value = C64> {
    (-12.0..12.0f64, -im..im).prop_map(|(a, b)| C64::new(a, b))
}

fn periodic() -> BoundaryMatrix {
    BoundaryMatrix::from_real([[1., 0., -1., 0.], [0., 1., 0., -1.]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn swapping_p_and_q_reflects_lambda(p in component(), q in component(), l in lambda(6.0)) {
        let pot = Potential::from_exprs(&p, &q).unwrap();
        let opts = SeriesOptions::default();
        let grid = transfer::solution_grid(&pot, 32, l).unwrap();
        let e = transfer::fundamental_solution(&pot, l, &grid, &opts).unwrap();
        let f = transfer::fundamental_solution(&pot.swapped(), -l, &grid, &opts).unwrap();
        for k in 0..e.len() {
            let (a, b) = (e.at(k), f.at(k));
            prop_assert!((a[1][0] + b[0][1]).norm() <= 1e-9 * (1.0 + b[0][1].norm()));
            prop_assert!((a[1][1] - b[0][0]).norm() <= 1e-9 * (1.0 + b[0][0].norm()));
        }
    }

    #[test]
    fn terms_respect_factorial_bound(p in component(), q in component(), l in lambda(4.0)) {
        let pot = Potential::from_exprs(&p, &q).unwrap();
        let grid = transfer::solution_grid(&pot, 32, l).unwrap();
        let m = transfer::factorial_bound_mass(&pot, l, &grid).unwrap();
        for family in [Family::P, Family::Q, Family::G, Family::H] {
            let terms = transfer::picard_terms(&pot, l, family, &grid, &SeriesOptions::default()).unwrap();
            for t in &terms {
                let k = t.bound_power();
                let bound = (1..=k).fold(1.0, |acc, j| acc * m / j as f64);
                prop_assert!(t.sup_norm() <= 1.01 * bound, "{:?} n = {}: {} > {}", family, t.order, t.sup_norm(), bound);
            }
        }
    }

    #[test]
    fn determinant_is_analytic(p in component(), q in component(), l in lambda(4.0)) {
        let spec = ProblemSpec::with_defaults(Potential::from_exprs(&p, &q).unwrap(), periodic()).unwrap();
        let h = 1e-4;
        let d = |z: C64| chardet::delta(&spec, z).unwrap().delta;
        let dx = (d(l + h) - d(l - h)) / (2.0 * h);
        let dy = (d(l + C64::new(0.0, h)) - d(l - C64::new(0.0, h))) / C64::new(0.0, 2.0 * h);
        let scale = chardet::delta_scale(spec.bc(), l) * PI;
        prop_assert!((dx - dy).norm() <= 1e-6 * scale, "{} vs {}", dx, dy);
    }
}

#[test]
fn coarse_asymptotics_of_e11() {
    let pot = Potential::from_exprs("cos(x)", "1+x").unwrap();
    let mut sups = Vec::new();
    for l in [10.0, 20.0, 40.0, 80.0] {
        let l = C64::new(l, 0.0);
        let grid = transfer::solution_grid(&pot, 32, l).unwrap();
        let e = transfer::fundamental_solution(&pot, l, &grid, &SeriesOptions::default()).unwrap();
        let sup = (0..e.len())
            .map(|k| (e.at(k)[0][0] - (C64::new(0.0, 1.0) * l * e.x()[k]).exp()).norm())
            .fold(0.0, f64::max);
        sups.push(sup);
    }
    for w in sups.windows(2) {
        assert!(w[1] * 1.5 <= w[0], "{sups:?}");
    }
}

#[test]
fn wronskian_holds_where_f64_can_resolve_it() {
    // moderate |Im lambda| keeps e11 e22 - e12 e21 well conditioned
    let pot = Potential::from_exprs("x^0.5", "exp(-x)*(1+i)").unwrap();
    for l in [C64::new(3.0, 0.5), C64::new(-7.0, -1.0), C64::new(0.2, 2.0)] {
        let grid = transfer::solution_grid(&pot, 32, l).unwrap();
        let e = transfer::fundamental_solution(&pot, l, &grid, &SeriesOptions::default()).unwrap();
        for w in e.wronskian() {
            assert!((w - 1.0).norm() < 1e-9, "{l}: {w}");
        }
    }
}
