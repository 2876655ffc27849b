use dfl_core::circle::{in_open_arc, uncovered};
use dfl_core::diophantine::{udt_margin, ThetaTuple};
use dfl_core::lattice_core::{covolume, dual, enumerate_points, Grid, Lattice, Window};
use dfl_core::linalg::dist_to_int;
use dfl_core::visibility::loglog_slope;
use proptest::prelude::*;

fn lattice2() -> impl Strategy<Value = Lattice> {
    prop::array::uniform4(-2.0f64..2.0)
        .prop_filter("well conditioned", |a| (a[0] * a[3] - a[1] * a[2]).abs() > 0.1)
        .prop_map(|a| Lattice::new(vec![vec![a[0], a[1]], vec![a[2], a[3]]]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn margin_is_periodic_in_xi(t in 1u64..6, th in -1.0f64..1.0, xi in -1.0f64..1.0, k in -3i32..=3) {
        let theta = ThetaTuple::new(vec![vec![0.0], vec![th]]).unwrap();
        let a = udt_margin(&theta, t, &[xi]).unwrap();
        let b = udt_margin(&theta, t, &[xi + k as f64]).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn margin_shrinks_with_t(t in 1u64..8, th in -1.0f64..1.0, xi in -1.0f64..1.0) {
        let theta = ThetaTuple::new(vec![vec![0.0], vec![th]]).unwrap();
        let a = udt_margin(&theta, t, &[xi]).unwrap();
        let b = udt_margin(&theta, t + 1, &[xi]).unwrap();
        prop_assert!(b <= a + 1e-15);
        prop_assert!((0.0..=0.5).contains(&a));
    }

    #[test]
    fn dual_is_involutive(l in lattice2()) {
        let dd = dual(&dual(&l).unwrap()).unwrap();
        prop_assert!(dd.same_as(&l, 1e-7));
        let v = covolume(&l) * covolume(&dual(&l).unwrap());
        prop_assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn z2_window_count(r in 0.5f64..12.0, cx in -3.0f64..3.0) {
        // keep the box edges away from integers
        prop_assume!(dist_to_int(r + cx) > 1e-6 && dist_to_int(cx - r) > 1e-6);
        let w = Window::new(vec![cx, 0.0], r).unwrap();
        let pc = enumerate_points(&Grid::unshifted(Lattice::identity(2)), &w).unwrap();
        let nx = ((cx + r).floor() - (cx - r).ceil() + 1.0) as usize;
        let ny = 2 * r.floor() as usize + 1;
        prop_assert_eq!(pc.len(), nx * ny);
    }

    #[test]
    fn uncovered_gaps_avoid_arcs(arcs in prop::collection::vec((0.0f64..1.0, 0.0f64..0.2), 0..12)) {
        for (s, w) in uncovered(&arcs, 1e-12) {
            for k in 1..8 {
                let t = s + w * k as f64 / 8.0;
                for &(a, l) in &arcs {
                    prop_assert!(!in_open_arc(t, a, l, 1e-9));
                }
            }
        }
    }

    #[test]
    fn slope_recovers_power(c in 0.1f64..10.0, p in 0.5f64..6.0) {
        let xs = [0.4f64, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(-p)).collect();
        prop_assert!((loglog_slope(&xs, &ys).unwrap() - p).abs() < 1e-9);
    }
}
