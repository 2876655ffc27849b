//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::time::{Duration, Instant};

use dfl_core::diophantine::{
    alpha_exponent, bad_pair_margin, convergence_threshold, exception_volume_mc, phi_visibility_exponent,
    udt_certified_inf, udt_violation_consistency, PhiSpec, ThetaTuple,
};
use dfl_core::exact::{ThreeLatticeConstants, Q23};
use dfl_core::forest_gen::{
    cut_and_project, generic_plane, golden_ratio, min_pairwise_distance, peres_forest, three_lattice_forest,
    toral_visit_set, CutProjectSpec, ForestSpec, Section,
};
use dfl_core::lattice_core::{banaszczyk_check, covolume, dual, jarnik_check, Grid, Lattice, Window};
use dfl_core::torus_dynamics::{certify_unavoidable, check_propreduc_with_m, probe_points, UnavoidOutcome};
use dfl_core::visibility::{empty_slab_certificate, verify_slab, visibility_curve, VisibilityReport};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `bad_pair_margin(phi, 100)` from the brute-force oracle in `tests/oracles.rs`.
const BAD_PAIR_T100: f64 = 2.0787066149769049;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(id: u32, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let ok = out.passed && in_time;
    println!(
        "{} criterion {id:>2}: {} [{:.2}s of {}s]",
        if ok { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn inclusion_d1() -> Outcome {
    let xs = probe_points(1, 10_000, 0);
    let mut detail = Vec::new();
    let mut passed = true;
    for eps in [0.25, 0.125] {
        let m = (2.0f64 / eps).ceil() as u64;
        let bad = check_propreduc_with_m(1, eps, m, &xs).expect("valid query");
        passed &= bad.is_empty();
        detail.push(format!("eps={eps} M={m} violations={}", bad.len()));
    }
    Outcome { passed, detail: format!("d=1 inclusion, {} probes: {}", xs.len(), detail.join(", ")) }
}

fn inclusion_d2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let xs: Vec<Vec<f64>> = (0..2000).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let bad = check_propreduc_with_m(2, 0.25, 64, &xs).expect("valid query");
    Outcome { passed: bad.is_empty(), detail: format!("d=2 inclusion, eps=1/4 M=64, 2000 probes: violations={}", bad.len()) }
}

fn random_lattice(rng: &mut ChaCha8Rng, d: usize) -> Lattice {
    loop {
        let rows: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        if let Ok(l) = Lattice::new(rows) {
            if covolume(&l) > 0.05 {
                return l;
            }
        }
    }
}

fn lattice_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut parts = Vec::new();
    let mut passed = true;
    for d in 2..=4 {
        let (mut dual_bad, mut jarnik_bad, mut bana_bad) = (0, 0, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let l = random_lattice(&mut rng, d);
            let prod = covolume(&l) * covolume(&dual(&l).expect("full rank"));
            if (prod - 1.0).abs() > 1e-6 {
                dual_bad += 1;
            }
            if !jarnik_check(&l).expect("d <= 6").ok {
                jarnik_bad += 1;
            }
            let (p, ok) = banaszczyk_check(&l).expect("d <= 6");
            worst = worst.max(p);
            if !ok {
                bana_bad += 1;
            }
        }
        passed &= dual_bad + jarnik_bad + bana_bad == 0;
        parts.push(format!("d={d}: dual {dual_bad} jarnik {jarnik_bad} banaszczyk {bana_bad} (max product {worst:.4})"));
    }
    Outcome { passed, detail: format!("1000 lattices per d, failures: {}", parts.join("; ")) }
}

fn three_lattice() -> Outcome {
    let c = ThreeLatticeConstants::new();
    let ids = c.product_identity() == Q23::one() && c.ratio_identity() == -Q23::one();
    let spec = three_lattice_forest();
    let mut ds = Vec::new();
    for r in [250.0, 500.0, 1000.0] {
        let pc = dfl_core::forest_gen::generate(&spec, &Window::centered(2, r)).expect("window fits budget");
        ds.push(min_pairwise_distance(&pc).expect("at least two points"));
    }
    let stable = ds.iter().all(|&d| d > 0.0 && (d - ds[0]).abs() <= 1e-12);
    Outcome {
        passed: ids && stable,
        detail: format!("identities exact: {ids}; min distance at r=250/500/1000: {ds:?}"),
    }
}

fn curve_line(name: &str, rep: &VisibilityReport) -> String {
    let lens: Vec<String> = rep
        .records
        .iter()
        .map(|r| format!("{:.3}{}", r.max_empty_length, if r.exhaustive { "" } else { "*" }))
        .collect();
    let slope = rep.slope.map(|s| format!("{s:.3}")).unwrap_or_else(|| "none".into());
    format!("{name} L=[{}] slope {slope}", lens.join(", "))
}

fn visibility_curves() -> Outcome {
    let eps = [0.4, 0.2, 0.1];
    let w = Window::centered(2, 2000.0);
    let z2 = ForestSpec::UnionOfGrids { grids: vec![Grid::unshifted(Lattice::identity(2))] };
    let a = visibility_curve(&z2, &eps, &w).expect("z2 curve");
    let b = visibility_curve(&peres_forest(), &eps, &w).expect("peres curve");
    let c = visibility_curve(&three_lattice_forest(), &eps, &w).expect("three-lattice curve");
    let ok_a = a.not_a_forest && a.slope.is_none();
    let ok_b = !b.not_a_forest && b.slope.is_some_and(|s| s <= 3.5);
    let ok_c = !c.not_a_forest && c.slope.is_some_and(|s| s <= 5.5);
    let ok_d = a.monotone && b.monotone && c.monotone;
    Outcome {
        passed: ok_a && ok_b && ok_c && ok_d,
        detail: format!(
            "(a) {ok_a} (b) {ok_b} (c) {ok_c} (d) {ok_d}; {}; {}; {} (* = budget-limited lower bound)",
            curve_line("z2", &a),
            curve_line("peres", &b),
            curve_line("three-lattice", &c)
        ),
    }
}

fn golden_slab() -> Outcome {
    let spec = CutProjectSpec::golden_2_3();
    let w = Window::centered(2, 1e4);
    let cert = match empty_slab_certificate(&spec, &w) {
        Ok(c) => c,
        Err(e) => return Outcome { passed: false, detail: format!("no certificate: {e}") },
    };
    let cloud = cut_and_project(&spec, &w).expect("window fits budget");
    let holds = verify_slab(&cert, &cloud).expect("dimensions match");
    let mut wide = cert.clone();
    wide.gap = (cert.gap.0 - cert.gap.1 / 2.0, 2.0 * cert.gap.1);
    let caught = !verify_slab(&wide, &cloud).expect("dimensions match");
    Outcome {
        passed: holds && caught,
        detail: format!(
            "q={:?} gap width {:.4} eps {:.4}; verified on {} points: {holds}; doubled gap rejected: {caught}",
            cert.q,
            cert.gap.1,
            cert.epsilon,
            cloud.len()
        ),
    }
}

fn axis_section() -> Outcome {
    let section = Section::axis_circles();
    let certified = matches!(certify_unavoidable(&section), Ok(UnavoidOutcome::Certified(ref c)) if c.tail_ok());
    let plane = generic_plane();
    let base = [0.0; 3];
    let mut ds = Vec::new();
    let mut sizes = Vec::new();
    for r in [50.0, 100.0] {
        let pc = toral_visit_set(&section, &plane, &base, &Window::centered(2, r)).expect("transverse plane");
        sizes.push(pc.len());
        ds.push(if pc.len() >= 2 { min_pairwise_distance(&pc).expect("two points") } else { 0.0 });
    }
    let nonempty = sizes.iter().all(|&n| n > 0);
    let stable = ds[0] > 0.0 && (ds[0] - ds[1]).abs() <= 1e-9;
    let spec = ForestSpec::ToralVisit { section, plane, base };
    let rep = visibility_curve(&spec, &[0.4, 0.2, 0.1], &Window::centered(2, 50.0)).expect("visit curve");
    // lengths must not shrink as eps shrinks
    let lens: Vec<f64> = rep.records.iter().map(|r| r.family_length).collect();
    let ordered = lens.windows(2).all(|p| p[1] >= p[0]);
    Outcome {
        passed: certified && nonempty && stable && ordered,
        detail: format!(
            "certified {certified}; points at r=50/100 {sizes:?}; min distance {ds:?}; L(eps=0.4,0.2,0.1)={lens:?}"
        ),
    }
}

fn udt_margins() -> Outcome {
    let phi = golden_ratio();
    let margins: Vec<f64> = [10, 100, 1000].iter().map(|&t| bad_pair_margin(phi, t)).collect();
    let positive = margins.iter().all(|&m| m > 0.0);
    let pinned = (margins[1] - BAD_PAIR_T100).abs() <= 1e-12;
    let theta = ThetaTuple::new(vec![vec![0.0], vec![phi]]).expect("valid tuple");
    let rep = udt_certified_inf(&theta, 10, 1e-4).expect("within budget");
    let kill = ThetaTuple::new(vec![vec![0.0], vec![1.0 / 3.0]]).expect("valid tuple");
    let dead = udt_certified_inf(&kill, 3, 1e-3).expect("within budget");
    Outcome {
        passed: positive && pinned && rep.certified > 0.0 && dead.raw_min == 0.0,
        detail: format!(
            "bad pair margins {margins:?} (T=100 pinned: {pinned}); certified inf for (0, phi) at T=10: {:.6}; rational (0, 1/3) at T=3: raw min {}",
            rep.certified, dead.raw_min
        ),
    }
}

fn exponent_identities() -> Outcome {
    let mut bad = 0;
    let mut count = 0;
    for n in 2..=6i64 {
        for s in n..=50i64 {
            let d = n - 1;
            let lhs = convergence_threshold(s, d).and_then(|tau| phi_visibility_exponent(d, tau));
            let rhs = alpha_exponent(n, s).map(|a| a + Rational64::from_integer(d));
            count += 1;
            if !matches!((lhs, rhs), (Ok(a), Ok(b)) if a == b) {
                bad += 1;
            }
        }
    }
    let tau = convergence_threshold(2, 1).expect("s > d");
    let special = phi_visibility_exponent(1, tau).expect("tau >= d");
    let ok_special = tau == Rational64::from_integer(3) && special == Rational64::from_integer(3);
    Outcome {
        passed: bad == 0 && ok_special,
        detail: format!("{count} (n, s) pairs, {bad} mismatches; (n, s) = (2, 2): tau = {tau}, exponent = {special}"),
    }
}

fn wedge_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let phi = PhiSpec::power(0.3, 1.2);
    let (mut found, mut skipped, mut failures) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let rows: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.random::<f64>()]).collect();
        let theta = ThetaTuple::new(rows).expect("valid tuple");
        let rep = udt_violation_consistency(&theta, &phi, 10).expect("d = 1");
        found += rep.violations_found;
        skipped += rep.skipped;
        failures += rep.failures;
        worst = worst.max(rep.worst_ratio);
    }
    Outcome {
        passed: failures == 0,
        detail: format!(
            "200 tuples (s=3, d=1), Phi=0.3 T^-1.2: violations {found}, skipped {skipped}, failures {failures}, worst residual ratio {worst:.4}"
        ),
    }
}

fn exception_volume() -> Outcome {
    let u = vec![vec![4], vec![3], vec![1]];
    let phi = PhiSpec::power(1.0, 2.0);
    let mut ratios = Vec::new();
    for t in [4, 8, 16] {
        let rep = exception_volume_mc(&u, t, &phi, 1.0, 100_000, 0).expect("valid U");
        ratios.push(rep.bound_ratio);
    }
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let spread = hi / lo;
    Outcome {
        passed: lo > 0.0 && spread <= 3.0,
        detail: format!("U=(4,3,1), ratios at T=4/8/16: {ratios:.4?}, largest/smallest {spread:.3}"),
    }
}

fn main() {
    let results = [
        check(1, secs(10), inclusion_d1),
        check(2, secs(60), inclusion_d2),
        check(3, secs(60), lattice_suite),
        check(4, secs(30), three_lattice),
        check(5, secs(600), visibility_curves),
        check(6, secs(60), golden_slab),
        check(7, secs(300), axis_section),
        check(8, secs(120), udt_margins),
        check(9, secs(1), exponent_identities),
        check(10, secs(300), wedge_consistency),
        check(11, secs(120), exception_volume),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
