//! Brute-force oracles and frozen regression values.

use dfl_core::diophantine::bad_pair_margin;
use dfl_core::forest_gen::{cut_and_project, generate, golden_ratio, peres_forest, CutProjectSpec, ForestSpec};
use dfl_core::lattice_core::{Grid, Lattice, Window};
use dfl_core::visibility::{
    empty_slab_certificate, max_empty_segment_for, segment_clearance, verify_slab, SegmentQuery,
    DEFAULT_WORK_BUDGET,
};

/// Frozen output of `brute_bad_pair(phi, 100)`; also pinned in the acceptance gate.
const BAD_PAIR_T100: f64 = 2.0787066149769049;

/// Longest empty segment of the Peres forest at r = 60, eps = 0.2, frozen
/// from an exhaustive run.
const PERES_R60_EPS02: f64 = 16.2282474538391703;

fn brute_bad_pair(sigma: f64, t: u64) -> f64 {
    let mut best = f64::INFINITY;
    for q in 1..=t {
        for v in 1..=t {
            let f = ((q * v) as f64 * sigma).rem_euclid(1.0);
            let d = f.min(1.0 - f);
            best = best.min(d / (q as f64).hypot(v as f64));
        }
    }
    (t as f64).powi(3) * best
}

#[test]
fn bad_pair_matches_brute_force() {
    let phi = golden_ratio();
    for t in [1, 2, 7, 10, 100] {
        let a = bad_pair_margin(phi, t);
        let b = brute_bad_pair(phi, t);
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "T={t}: {a} vs {b}");
    }
    // T = 1 is the single pair (1, 1)
    let hand = (2.0 - phi) / 2f64.sqrt();
    assert!((bad_pair_margin(phi, 1) - hand).abs() < 1e-15);
}

#[test]
fn bad_pair_pinned() {
    let b = brute_bad_pair(golden_ratio(), 100);
    assert!((b - BAD_PAIR_T100).abs() <= 1e-12, "{b:.16}");
}

#[test]
fn peres_count_matches_coefficient_box() {
    let r = 10.0;
    let w = Window::centered(2, r);
    let pc = generate(&peres_forest(), &w).unwrap();
    let phi = golden_ratio();
    let bases = [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [phi, 1.0]], [[phi, 1.0], [1.0, 0.0]]];
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for b in bases {
        for m in -40i32..=40 {
            for n in -40i32..=40 {
                let p = [b[0][0] * m as f64 + b[0][1] * n as f64, b[1][0] * m as f64 + b[1][1] * n as f64];
                if p[0].abs() <= r && p[1].abs() <= r && !pts.iter().any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) < 1e-9) {
                    pts.push(p);
                }
            }
        }
    }
    assert_eq!(pc.len(), pts.len());
}

#[test]
fn z2_has_spanning_corridor() {
    let z2 = ForestSpec::UnionOfGrids { grids: vec![Grid::unshifted(Lattice::identity(2))] };
    let q = SegmentQuery::standard(0.25, Window::centered(2, 100.0));
    let (seg, _, _) = max_empty_segment_for(&z2, &q, DEFAULT_WORK_BUDGET).unwrap();
    assert!(seg.length >= 199.0, "{}", seg.length);
    assert!(seg.spans_chord());
}

#[test]
fn witness_keeps_clearance() {
    let r = 30.0;
    let spec = peres_forest();
    let q = SegmentQuery::standard(0.3, Window::centered(2, r));
    let (seg, exhaustive, _) = max_empty_segment_for(&spec, &q, DEFAULT_WORK_BUDGET).unwrap();
    assert!(exhaustive);
    let pc = generate(&spec, &Window::centered(2, r + 1.0)).unwrap();
    let clear = segment_clearance(&pc, seg.a, seg.b);
    assert!(clear >= q.effective_epsilon() - 1e-9, "{clear} < {}", q.effective_epsilon());
}

#[test]
fn peres_regression() {
    let r = 60.0;
    let q = SegmentQuery::standard(0.2, Window::centered(2, r));
    let (seg, exhaustive, _) = max_empty_segment_for(&peres_forest(), &q, DEFAULT_WORK_BUDGET).unwrap();
    assert!(exhaustive);
    assert!(!seg.spans_chord());
    assert!(seg.length < q.window.diameter());
    assert!((seg.length - PERES_R60_EPS02).abs() < 1e-9, "{:.16}", seg.length);
}

#[test]
fn golden_slab_verifies() {
    let spec = CutProjectSpec::golden_2_3();
    let w = Window::centered(2, 2000.0);
    let cert = empty_slab_certificate(&spec, &w).unwrap();
    let pc = cut_and_project(&spec, &w).unwrap();
    assert!(!pc.is_empty());
    assert!(cert.epsilon > 0.0);
    assert!(verify_slab(&cert, &pc).unwrap());
}
