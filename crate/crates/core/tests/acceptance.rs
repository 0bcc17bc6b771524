//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use dirac_spectral::asymptotics::{self, HalfPlane, Lemma, Sector};
use dirac_spectral::completeness::{self, conclude, Conclusion, ConditionStatus, TestFunction};
use dirac_spectral::potential::Endpoint;
use dirac_spectral::quad::{integrate_adaptive, iterated_integral, IteratedOptions};
use dirac_spectral::spectrum::{self, Rect};
use dirac_spectral::transfer::{self, FundamentalSolution, SeriesOptions};
use dirac_spectral::{BoundaryMatrix, Potential, ProblemSpec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: C64 = C64::new(0.0, 1.0);

fn verdict(id: &str, what: &str, pass: bool, detail: String) {
    println!("{} [{id}] {what}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn bc(rows: [[f64; 4]; 2]) -> BoundaryMatrix {
    BoundaryMatrix::from_real(rows).unwrap()
}

fn spec(p: &str, q: &str, rows: [[f64; 4]; 2]) -> ProblemSpec {
    ProblemSpec::with_defaults(Potential::from_exprs(p, q).unwrap(), bc(rows)).unwrap()
}

const PERIODIC: [[f64; 4]; 2] = [[1., 0., -1., 0.], [0., 1., 0., -1.]];
const ANTI: [[f64; 4]; 2] = [[1., 0., 1., 0.], [0., 1., 0., 0.]];
const DEGENERATE: [[f64; 4]; 2] = [[1., 0., 0., 0.], [0., 1., 1., 0.]];
const DEGENERATE_Y1: [[f64; 4]; 2] = [[1., 0., 0., 0.], [0., 0., 1., 0.]];

fn coeff(rng: &mut ChaCha8Rng, s: f64) -> String {
    format!("({:.3}{:+.3}*i)", rng.random_range(-s..s), rng.random_range(-s..s))
}

/// Closed-form potential drawn from five families (polynomial, trigonometric, exponential,
/// power law, kink).
fn random_component(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..5) {
        0 => format!("{}+{}*x+{}*x^2", coeff(rng, 1.0), coeff(rng, 0.5), coeff(rng, 0.2)),
        1 => format!("{}*sin({}*x)+{}*cos(x)", coeff(rng, 1.5), rng.random_range(1..4), coeff(rng, 1.0)),
        2 => format!("{}*exp({:.3}*x)", coeff(rng, 1.0), rng.random_range(-1.0..0.5)),
        3 => format!("{}*x^{:.3}", coeff(rng, 1.0), rng.random_range(-0.5..2.0)),
        _ => format!("{}*abs(x-{:.3})", coeff(rng, 1.0), rng.random_range(0.5..2.5)),
    }
}

struct Pair {
    label: String,
    potential: Potential,
    lambda: C64,
}

/// The 100 (potential, lambda) pairs shared by criteria 2 and 3; `|Im lambda| <= 8`.
fn random_pairs(count: usize, seed: u64) -> Vec<Pair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (p, q) = (random_component(&mut rng), random_component(&mut rng));
            let lambda = C64::new(rng.random_range(-12.0..12.0), rng.random_range(-8.0..8.0));
            Pair {
                label: format!("P = {p}, Q = {q}, lambda = {lambda:.3}"),
                potential: Potential::from_exprs(&p, &q).unwrap(),
                lambda,
            }
        })
        .collect()
}

fn series_and_oracle(pair: &Pair) -> (FundamentalSolution, FundamentalSolution) {
    let s = ProblemSpec::with_defaults(pair.potential.clone(), bc(PERIODIC)).unwrap();
    let grid = transfer::solution_grid(&pair.potential, s.grid_size(), pair.lambda).unwrap();
    let e = transfer::fundamental_solution(&pair.potential, pair.lambda, &grid, &SeriesOptions::from_spec(&s))
        .unwrap();
    let o = transfer::oracle_solution(&pair.potential, pair.lambda, &grid).unwrap();
    (e, o)
}

fn max_entry(e: &[[C64; 2]; 2]) -> f64 {
    e.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_nested_integral_identity() {
    const TOL: f64 = 1e-8;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checks = 0;
    for k in 0..50 {
        // (f, int_0^pi f, non-smooth points, label)
        type Case = (Box<dyn Fn(f64) -> C64>, C64, Vec<f64>, String);
        let case: Case = match k % 3 {
            0 => {
                let c: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let total = c.iter().enumerate().map(|(j, a)| a * PI.powi(j as i32 + 1) / (j + 1) as f64).sum::<f64>();
                let label = format!("polynomial {c:.3?}");
                let f = move |x: f64| C64::new(c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x, 0.0);
                (Box::new(f), C64::new(total, 0.0), vec![], label)
            }
            1 => {
                let (a, b) = (rng.random_range(0.2..2.0), rng.random_range(0.3..2.8));
                let label = format!("{a:.3}*|sin(x-{b:.3})|");
                let f = move |x: f64| C64::new(a * (x - b).sin().abs(), 0.0);
                (Box::new(f), C64::new(2.0 * a, 0.0), vec![b], label)
            }
            _ => {
                let s = rng.random_range(-0.9..2.0);
                let cut = rng.random_range(0.5..PI);
                let a = C64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
                let label = format!("{a:.3}*x^{s:.3} on [0, {cut:.3}]");
                let f = move |x: f64| if x < cut { a * x.powf(s) } else { C64::new(0.0, 0.0) };
                (Box::new(f), a * cut.powf(s + 1.0) / (s + 1.0), vec![cut], label)
            }
        };
        let (f, total, breaks, label) = case;
        let opts = IteratedOptions {
            breakpoints: breaks,
            ..IteratedOptions::default()
        };
        let mut fact = 1.0;
        for n in 1..=6usize {
            fact *= n as f64;
            let got = iterated_integral(&f, 0.0, PI, n, &opts).unwrap();
            let exact = total.powu(n as u32) / fact;
            let rel = (got - exact).norm() / exact.norm();
            checks += 1;
            if rel > worst.0 {
                worst = (rel, format!("{label}, n = {n}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst.0 <= TOL && elapsed < Duration::from_secs(10);
    verdict(
        "1",
        "nested quadrature equals (int f)^n / n!",
        pass,
        format!("{checks} checks, worst relative error {:.2e} ({}), tol {TOL:e}, {elapsed:.2?}", worst.0, worst.1),
    );
    assert!(pass);
}

#[test]
fn criterion_02_wronskian_conservation() {
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let pairs = random_pairs(100, 2024);
    let mut failures = Vec::new();
    let mut explained = 0;
    for pair in &pairs {
        let (e, _) = series_and_oracle(pair);
        let mut dev: f64 = 0.0;
        // rounding floor of e11 e22 - e12 e21 in f64
        let mut floor: f64 = 0.0;
        for k in 0..e.len() {
            let m = e.at(k);
            dev = dev.max((m[0][0] * m[1][1] - m[0][1] * m[1][0] - 1.0).norm());
            floor = floor.max(f64::EPSILON * ((m[0][0] * m[1][1]).norm() + (m[0][1] * m[1][0]).norm()));
        }
        if dev > TOL {
            if dev <= 1e4 * floor {
                explained += 1;
            }
            failures.push((dev, floor, pair.label.clone()));
        }
    }
    let elapsed = start.elapsed();
    failures.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (dev, floor, label) in failures.iter().take(5) {
        println!("    |det E - 1| = {dev:.2e} (rounding floor {floor:.2e}) for {label}");
    }
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    verdict(
        "2",
        "det E(x, lambda) = 1 across x",
        pass,
        format!(
            "{}/{} pairs exceed {TOL:e}; {} of them lie within 1e4 x the f64 cancellation floor \
             eps(|e11 e22| + |e12 e21|); {elapsed:.2?}",
            failures.len(),
            pairs.len(),
            explained
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_oracle_equivalence() {
    const TOL: f64 = 1e-7;
    // entries below this fraction of max|E(x)| carry no relative information in f64
    const ENTRY_FLOOR: f64 = 1e-12;
    let pairs = random_pairs(100, 2024);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut failed = 0;
    for pair in &pairs {
        let (e, o) = series_and_oracle(pair);
        let mut err: f64 = 0.0;
        for k in 0..e.len() {
            let (a, b) = (e.at(k), o.at(k));
            let scale = max_entry(&b);
            for j in 0..2 {
                for l in 0..2 {
                    err = err.max((a[j][l] - b[j][l]).norm() / b[j][l].norm().max(ENTRY_FLOOR * scale));
                }
            }
        }
        if err > TOL {
            failed += 1;
        }
        if err > worst.0 {
            worst = (err, pair.label.clone());
        }
    }
    let pass = failed == 0;
    verdict(
        "3",
        "series vs marching oracle, entrywise",
        pass,
        format!("{failed}/{} pairs exceed {TOL:e}; worst {:.2e} for {}", pairs.len(), worst.0, worst.1),
    );
    assert!(pass);
}

fn closed_form_f(l: C64) -> C64 {
    // 1 - i sin(pi w) / w with w^2 = l^2 - 1; even in w, so the branch is irrelevant
    let u = l * l - 1.0;
    let s = u.sqrt();
    let sinc = if s.norm() < 1e-4 {
        PI * (1.0 - PI * PI * u / 6.0 + PI.powi(4) * u * u / 120.0)
    } else {
        (PI * s).sin() / s
    };
    1.0 - I * sinc
}

/// Roots of the closed form in a rectangle by Newton from a lattice of starting points.
fn newton_scan(re: (f64, f64), im: (f64, f64)) -> Vec<C64> {
    let mut roots: Vec<C64> = Vec::new();
    let steps = 60;
    for a in 0..=steps {
        for b in 0..=steps {
            let mut z = C64::new(
                re.0 + (re.1 - re.0) * a as f64 / steps as f64,
                im.0 + (im.1 - im.0) * b as f64 / steps as f64,
            );
            let mut converged = false;
            for _ in 0..60 {
                let h = 1e-6 * (1.0 + z.norm());
                let d = (closed_form_f(z + h) - closed_form_f(z - h)) / (2.0 * h);
                let step = closed_form_f(z) / d;
                z -= step;
                if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 100.0 {
                    break;
                }
                if step.norm() < 1e-15 * (1.0 + z.norm()) {
                    converged = true;
                    break;
                }
            }
            let inside = z.re > re.0 && z.re < re.1 && z.im > im.0 && z.im < im.1;
            if converged && inside && closed_form_f(z).norm() < 1e-10 && !roots.iter().any(|r| (r - z).norm() < 1e-8) {
                roots.push(z);
            }
        }
    }
    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    roots
}

fn expected_match(found: &[spectrum::Eigenvalue], expected: &[(C64, usize)], tol: f64) -> (bool, f64) {
    let mut worst: f64 = 0.0;
    let mut ok = found.len() == expected.len();
    for (z, m) in expected {
        match found.iter().min_by(|a, b| (a.lambda - z).norm().total_cmp(&(b.lambda - z).norm())) {
            Some(e) => {
                worst = worst.max((e.lambda - z).norm());
                ok &= e.multiplicity == *m && (e.lambda - z).norm() <= tol;
            }
            None => ok = false,
        }
    }
    (ok, worst)
}

#[test]
fn criterion_04_closed_form_spectra() {
    const TOL_AB: f64 = 1e-8;
    const TOL_C: f64 = 1e-7;
    let start = Instant::now();

    let periodic = spec("0", "0", PERIODIC);
    let found = spectrum::find_eigenvalues(&periodic, &Rect::new(-5.0, 5.0, -2.0, 2.0).unwrap(), 100).unwrap();
    let expect: Vec<(C64, usize)> = [-4.0, -2.0, 0.0, 2.0, 4.0].iter().map(|&x| (C64::new(x, 0.0), 2)).collect();
    let (ok_a, worst_a) = expected_match(&found, &expect, TOL_AB);

    let anti = spec("0", "0", ANTI);
    let found = spectrum::find_eigenvalues(&anti, &Rect::new(-6.0, 6.0, -2.0, 2.0).unwrap(), 100).unwrap();
    let expect: Vec<(C64, usize)> =
        [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0].iter().map(|&x| (C64::new(x, 0.0), 1)).collect();
    let (ok_b, worst_b) = expected_match(&found, &expect, TOL_AB);

    let pq = spec("1", "1", DEGENERATE);
    let found = spectrum::find_eigenvalues(&pq, &Rect::new(0.0, 6.0, -3.0, 3.0).unwrap(), 100).unwrap();
    let found: Vec<_> = found
        .into_iter()
        .filter(|e| e.lambda.re > 0.0 && e.lambda.re < 6.0 && e.lambda.im.abs() < 3.0)
        .collect();
    let scan = newton_scan((0.0, 6.0), (-3.0, 3.0));
    let expect: Vec<(C64, usize)> = scan.iter().map(|&z| (z, 1)).collect();
    let (ok_c, worst_c) = expected_match(&found, &expect, TOL_C);

    let elapsed = start.elapsed();
    let pass = ok_a && ok_b && ok_c && elapsed < Duration::from_secs(120);
    verdict(
        "4",
        "closed-form spectra",
        pass,
        format!(
            "(a) periodic {} worst {worst_a:.1e}; (b) antiperiodic-type {} worst {worst_b:.1e}; \
             (c) P=Q=1 {} of {} scan roots, worst {worst_c:.1e}; {elapsed:.2?}",
            if ok_a { "ok" } else { "mismatch" },
            if ok_b { "ok" } else { "mismatch" },
            found.len(),
            scan.len()
        ),
    );
    assert!(pass);
}

/// `int_0^inf x^rho e^{+-2 i l x} dx` by adaptive quadrature over unit-decay chunks.
fn kernel_by_quadrature(rho: f64, l: C64, half: HalfPlane) -> C64 {
    let sign = if half == HalfPlane::Upper { 1.0 } else { -1.0 };
    let f = |x: f64| x.powf(rho) * (sign * 2.0 * I * l * x).exp();
    let decay = 2.0 * l.im.abs();
    let chunk = (1.0 / decay).min(1.0 / l.norm());
    let mut total = C64::new(0.0, 0.0);
    let mut a = 0.0;
    while a * decay < 60.0 + rho * (1.0 + a).ln() {
        let b = a + chunk;
        total += integrate_adaptive(f, a, b, 1e-300, 1e-13, 20_000).unwrap().value;
        a = b;
    }
    total
}

#[test]
fn criterion_05_kernel_integrals() {
    const TOL: f64 = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut count = 0;
    for half in [HalfPlane::Upper, HalfPlane::Lower] {
        for _ in 0..20 {
            let arg = rng.random_range(PI / 12.0..11.0 * PI / 12.0);
            let l = C64::from_polar(rng.random_range(0.5..8.0), if half == HalfPlane::Upper { arg } else { -arg });
            for rho in [0.0, 0.5, 1.0, 2.0] {
                let closed = asymptotics::kernel_integral(rho, l, half).unwrap();
                let quad = kernel_by_quadrature(rho, l, half);
                let rel = (closed - quad).norm() / quad.norm();
                count += 1;
                if rel > worst.0 {
                    worst = (rel, format!("rho = {rho}, lambda = {l:.3}"));
                }
            }
        }
    }
    let pass = worst.0 <= TOL;
    verdict(
        "5",
        "kernel integral closed forms vs quadrature",
        pass,
        format!("{count} cases, worst relative error {:.2e} ({}), tol {TOL:e}", worst.0, worst.1),
    );
    assert!(pass);
}

#[test]
fn criterion_06_endpoint_order_recovery() {
    const TOL: f64 = 0.02;
    let c = C64::new(2.0, -1.0);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut count = 0;
    for s in [0.0, 0.5, 1.0, 2.0] {
        let near0 = format!("(2-i)*x^{s}");
        let near_pi = format!("(2-i)*(pi-x)^{s}");
        let cases = [
            (Potential::from_exprs(&near0, &near_pi).unwrap(), [Endpoint::PAt0, Endpoint::QAtPi]),
            (Potential::from_exprs(&near_pi, &near0).unwrap(), [Endpoint::PAtPi, Endpoint::QAt0]),
        ];
        for (pot, ends) in &cases {
            for &which in ends {
                let o = asymptotics::estimate_endpoint_order(pot, which).unwrap();
                let (rho, nu) = (s + 1.0, c / (s + 1.0));
                let err = ((o.rho - rho).abs() / rho).max((o.nu - nu).norm() / nu.norm());
                count += 1;
                if err > worst.0 {
                    worst = (err, format!("s = {s}, {}: rho {:.5}, nu {:.5}", which.name(), o.rho, o.nu));
                }
            }
        }
    }
    let pass = worst.0 < TOL;
    verdict(
        "6",
        "endpoint order recovery",
        pass,
        format!("{count} endpoints, worst relative error {:.2e} ({}), tol {TOL}", worst.0, worst.1),
    );
    assert!(pass);
}

const RADII: [f64; 5] = [8.0, 12.0, 16.0, 24.0, 32.0];

#[test]
fn criterion_07_sector_asymptotics() {
    let s = spec("1", "1", DEGENERATE);
    let mut total = 0;
    let mut passed = 0;
    let mut controls = 0;
    let mut controls_failed = 0;
    let rays = [
        (PI / 3.0, [Lemma::Four, Lemma::Six]),
        (2.0 * PI / 3.0, [Lemma::Four, Lemma::Six]),
        (-PI / 3.0, [Lemma::Five, Lemma::Seven]),
        (-2.0 * PI / 3.0, [Lemma::Five, Lemma::Seven]),
    ];
    for (arg, lemmas) in rays {
        let ray = asymptotics::ray(arg, &RADII);
        for lemma in lemmas {
            for pred in asymptotics::predict_sector(&s, lemma).unwrap() {
                let r = asymptotics::verify_sector_prediction(&s, &pred, &ray).unwrap();
                total += 1;
                if r.pass {
                    passed += 1;
                } else {
                    println!("    {} on arg {:.4}: r {:?}", r.label, arg, r.points.iter().map(|p| p.scaled_remainder).collect::<Vec<_>>());
                }
                if let Some(nu) = pred.nu {
                    // deliberately wrong nu: the leading term is off by a factor 2
                    let wrong = asymptotics::verify_sector_prediction(&s, &pred.clone().with_nu(2.0 * nu), &ray).unwrap();
                    controls += 1;
                    if !wrong.pass {
                        controls_failed += 1;
                    }
                }
            }
        }
    }
    let pass = passed == total && controls > 0 && controls_failed == controls;
    verdict(
        "7",
        "sector asymptotics, Lemmas 4-7",
        pass,
        format!("{passed}/{total} predictions decay by >= 50%; wrong-nu control fails in {controls_failed}/{controls}"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_determinant_lower_bound() {
    let rays = [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, -PI / 3.0, -PI / 2.0, -2.0 * PI / 3.0];
    let run = |s: &ProblemSpec| -> Vec<(f64, bool, f64, f64)> {
        rays.iter()
            .map(|&arg| {
                let sector = if arg > 0.0 { Sector::upper() } else { Sector::lower() };
                let r = asymptotics::delta_lower_bound_check(s, &sector, &asymptotics::ray(arg, &RADII)).unwrap();
                (arg, r.pass, r.median, r.tail_min)
            })
            .collect()
    };
    let regular = run(&spec("0", "0", PERIODIC));
    let degenerate = run(&spec("1", "1", DEGENERATE_Y1));
    let unperturbed = run(&spec("0", "0", DEGENERATE_Y1));
    let theorem = completeness::check_theorem(&spec("1", "1", DEGENERATE_Y1));
    let summary = |rs: &[(f64, bool, f64, f64)]| {
        rs.iter().map(|(a, p, m, t)| format!("{:+.2}:{}(med {m:.2e}, min {t:.2e})", a, if *p { "ok" } else { "low" })).collect::<Vec<_>>().join(" ")
    };
    println!("    regular V=0: {}", summary(&regular));
    println!("    P=Q=1 degenerate: {}", summary(&degenerate));
    println!("    V=0 degenerate: {}", summary(&unperturbed));
    let pass = regular.iter().all(|r| r.1)
        && theorem.conclusion == Conclusion::CompleteAndMinimal
        && degenerate.iter().all(|r| r.1)
        && unperturbed.iter().all(|r| !r.1);
    verdict(
        "8",
        "determinant lower bound",
        pass,
        format!(
            "regular {}/{} rays, P=Q=1 degenerate {}/{} rays (theorem: {:?}), V=0 degenerate fails on {}/{} rays as expected",
            regular.iter().filter(|r| r.1).count(),
            rays.len(),
            degenerate.iter().filter(|r| r.1).count(),
            rays.len(),
            theorem.conclusion,
            unperturbed.iter().filter(|r| !r.1).count(),
            rays.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_theorem_truth_table() {
    use ConditionStatus::{Fails, Holds};
    let mut table_ok = 0;
    for c65 in [false, true] {
        for c66 in [Fails, Holds] {
            for c67 in [false, true] {
                for c68 in [Fails, Holds] {
                    let expected = (c65 || c66 == Holds) && (c67 || c68 == Holds);
                    if (conclude(c65, c66, c67, c68) == Conclusion::CompleteAndMinimal) == expected {
                        table_ok += 1;
                    }
                }
            }
        }
    }
    let worked = [
        (DEGENERATE, Conclusion::CompleteAndMinimal),
        (ANTI, Conclusion::Inconclusive),
        (PERIODIC, Conclusion::CompleteAndMinimal),
    ];
    let mut worked_ok = 0;
    for (rows, expected) in worked {
        let v = completeness::check_theorem(&spec("1", "1", rows));
        if v.conclusion == expected {
            worked_ok += 1;
        } else {
            println!("    bc {rows:?}: {:?}, expected {expected:?}", v.conclusion);
        }
    }
    let pass = table_ok == 16 && worked_ok == 3;
    verdict(
        "9",
        "theorem checker",
        pass,
        format!("truth table {table_ok}/16, worked examples {worked_ok}/3"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_completeness_diagnostic() {
    const SLACK: f64 = 1e-10;
    let start = Instant::now();
    let s = spec("1", "1", DEGENERATE);
    let radii = [5.0, 10.0, 20.0, 40.0];
    let diags = completeness::completeness_diagnostic(&s, &TestFunction::defaults(), &radii).unwrap();
    let elapsed = start.elapsed();
    let mut ok = true;
    for d in &diags {
        let monotone = d.residuals.windows(2).all(|w| w[1] <= w[0] + SLACK);
        let decay = d.residuals.last().unwrap() < &(0.5 * d.residuals[0]);
        ok &= monotone && decay;
        println!(
            "    {}: residuals {:?} (root functions {:?})",
            d.test_function,
            d.residuals.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>(),
            d.root_functions
        );
    }
    let pass = ok && diags.len() == 4 && elapsed < Duration::from_secs(300);
    verdict(
        "10",
        "completeness diagnostic",
        pass,
        format!("4 test functions non-increasing with final < 50% of first: {ok}; {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_symmetry() {
    // combined absolute + relative tolerance
    const ATOL: f64 = 1e-9;
    const RTOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: (f64, String) = (0.0, String::new());
    for _ in 0..50 {
        let (p, q) = (random_component(&mut rng), random_component(&mut rng));
        let l = C64::new(rng.random_range(-12.0..12.0), rng.random_range(-8.0..8.0));
        let pot = Potential::from_exprs(&p, &q).unwrap();
        let swapped = pot.swapped();
        let s = ProblemSpec::with_defaults(pot.clone(), bc(PERIODIC)).unwrap();
        let opts = SeriesOptions::from_spec(&s);
        let grid = transfer::solution_grid(&pot, s.grid_size(), l).unwrap();
        let e = transfer::fundamental_solution(&pot, l, &grid, &opts).unwrap();
        let f = transfer::fundamental_solution(&swapped, -l, &grid, &opts).unwrap();
        let mut excess: f64 = 0.0;
        for k in 0..e.len() {
            let (a, b) = (e.at(k), f.at(k));
            for (x, y) in [(a[1][0], -b[0][1]), (a[1][1], b[0][0])] {
                excess = excess.max((x - y).norm() / (ATOL + RTOL * y.norm()));
            }
        }
        if excess > worst.0 {
            worst = (excess, format!("P = {p}, Q = {q}, lambda = {l:.3}"));
        }
    }
    let pass = worst.0 <= 1.0;
    verdict(
        "11",
        "P <-> Q, lambda -> -lambda symmetry",
        pass,
        format!("50 potentials, worst error / tolerance {:.2e} ({}), atol {ATOL:e}, rtol {RTOL:e}", worst.0, worst.1),
    );
    assert!(pass);
}
