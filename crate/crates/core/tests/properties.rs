use biphoton::filters::{apply_filter_to_tpsa, composite_transmission, FilterSpec};
use biphoton::interference::{coincidence_probability, overlap, visibility_from_overlap};
use biphoton::tpsa::{normalize_grid, TpsaGrid, WavelengthAxis};
use proptest::prelude::*;

fn square_grid(n: usize) -> impl Strategy<Value = TpsaGrid> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let axis = WavelengthAxis::new(794.0, 797.0, n).unwrap();
        TpsaGrid::from_values(axis, axis, v).unwrap()
    })
}

fn positive_grid(n: usize) -> impl Strategy<Value = TpsaGrid> {
    prop::collection::vec(0.05f64..1.0, n * n).prop_map(move |v| {
        let axis = WavelengthAxis::new(794.0, 797.0, n).unwrap();
        TpsaGrid::from_values(axis, axis, v).unwrap()
    })
}

fn filter() -> impl Strategy<Value = FilterSpec> {
    let center = 794.5f64..796.5;
    let width = 0.2f64..4.0;
    prop_oneof![
        (center.clone(), width.clone(), 1u32..6).prop_map(|(c, w, o)| FilterSpec::SuperGaussian {
            center_nm: c,
            fwhm_nm: w,
            order: o,
        }),
        (center.clone(), width).prop_map(|(c, w)| FilterSpec::Lorentzian {
            center_nm: c,
            fwhm_nm: w
        }),
        (center, 50.0f64..500.0, 1.0f64..20.0, 1.0f64..2.0).prop_map(|(c, d, f, n)| FilterSpec::FabryPerotAiry {
            base_um: d,
            finesse: f,
            index: n,
            center_nm: c,
        }),
    ]
}

fn naive_overlap(g: &TpsaGrid) -> f64 {
    let (n, _) = g.shape();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = g.signal.trapezoid_weight(i) * g.idler.trapezoid_weight(j);
            num += w * g.get(i, j) * g.get(j, i);
            den += w * g.get(i, j).powi(2);
        }
    }
    num / den
}

proptest! {
    #[test]
    fn overlap_is_bounded(g in square_grid(9)) {
        prop_assume!(g.power() > 0.0);
        prop_assert!(overlap(&g).unwrap().overlap.abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn overlap_ignores_global_scale(g in square_grid(7), s in prop_oneof![0.25f64..4.0, -4.0f64..-0.25]) {
        prop_assume!(g.power() > 0.0);
        let a = overlap(&g).unwrap().overlap;
        let b = overlap(&g.scaled(s)).unwrap().overlap;
        prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn overlap_survives_transposition(g in square_grid(8)) {
        prop_assume!(g.power() > 0.0);
        let a = overlap(&g).unwrap().overlap;
        let b = overlap(&g.transposed()).unwrap().overlap;
        prop_assert!((a - b).abs() <= 1e-14);
    }

    #[test]
    fn overlap_matches_double_loop(g in square_grid(8)) {
        prop_assume!(g.power() > 0.0);
        prop_assert!((overlap(&g).unwrap().overlap - naive_overlap(&g)).abs() <= 1e-12);
    }

    #[test]
    fn visibility_increases_with_overlap(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        prop_assume!(a < b);
        prop_assert!(visibility_from_overlap(a).unwrap() < visibility_from_overlap(b).unwrap());
    }

    #[test]
    fn visibility_stays_above_classical_limit(o in 0.0f64..=1.0) {
        let v = visibility_from_overlap(o).unwrap();
        prop_assert!((1.0 / 3.0..=1.0).contains(&v));
    }

    #[test]
    fn hwp_model_period_and_parity(o in -1.0f64..=1.0, theta in -180.0f64..180.0) {
        let p = coincidence_probability(theta, o);
        prop_assert!((p - coincidence_probability(theta + 45.0, o)).abs() <= 1e-12);
        prop_assert!((p - coincidence_probability(-theta, o)).abs() <= 1e-12);
        prop_assert!(p >= -1e-15);
    }

    #[test]
    fn transmission_is_a_fraction(f in filter(), l in 780.0f64..810.0) {
        let t = f.transmission(l).unwrap();
        prop_assert!((0.0..=1.0).contains(&t), "{t}");
    }

    #[test]
    fn composite_order_is_irrelevant(a in filter(), b in filter(), l in 780.0f64..810.0) {
        let ab = composite_transmission(l, &[a.clone(), b.clone()]).unwrap();
        let ba = composite_transmission(l, &[b, a]).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-15);
    }

    #[test]
    fn filtering_commutes_with_transposition(g in positive_grid(6), f in filter()) {
        let a = apply_filter_to_tpsa(&g, &f);
        let b = apply_filter_to_tpsa(&g.transposed(), &f);
        prop_assume!(a.is_ok() && b.is_ok());
        let (a, b) = (a.unwrap().transposed(), b.unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn normalization_is_idempotent(g in positive_grid(6)) {
        let once = normalize_grid(&g).unwrap();
        let twice = normalize_grid(&once).unwrap();
        prop_assert!((once.power() - 1.0).abs() <= 1e-9);
        for (x, y) in once.values().iter().zip(twice.values()) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
    }
}
