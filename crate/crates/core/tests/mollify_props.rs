use contint::expr::Axis;
use contint::moduli::Modulus;
use contint::mollify::{mollify, verify_bounds, GridFunction};
use proptest::prelude::*;

fn line(h: f64) -> Vec<Axis> {
    vec![GridFunction::axis_covering(-1.0, 1.0, h)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constants_are_preserved(c in -5.0f64..5.0, eps in 0.05f64..0.3) {
        let f = GridFunction::sample(line(eps / 10.0), |_| c).unwrap();
        let g = mollify(&f, eps).unwrap();
        for i in g.interior(0) {
            prop_assert!((g.values()[i] - c).abs() < 1e-8);
        }
    }

    #[test]
    fn plane_constants_are_preserved(c in -5.0f64..5.0) {
        let axes = vec![GridFunction::axis_covering(-0.5, 0.5, 0.01); 2];
        let g = mollify(&GridFunction::sample(axes, |_| c).unwrap(), 0.1).unwrap();
        for i in g.interior(0) {
            prop_assert!((g.values()[i] - c).abs() < 1e-8);
        }
    }

    #[test]
    fn smoothing_error_shrinks(a in 0.2f64..3.0, b in -0.3f64..0.3, k in 1.0f64..6.0) {
        let f = GridFunction::sample(line(0.025 / 10.0), |x| a * (x[0] - b).abs() + (k * x[0]).sin()).unwrap();
        let eps = [0.2, 0.1, 0.05, 0.025];
        let w = Modulus::lipschitz(a + k).unwrap();
        let reports = verify_bounds(&f, &w, std::slice::from_ref(&w), &eps).unwrap();
        for pair in reports.windows(2) {
            prop_assert!(pair[1].sup_dist <= pair[0].sup_dist * 1.05, "{:?}", (pair[0].sup_dist, pair[1].sup_dist));
        }
    }

    #[test]
    fn lipschitz_constant_fit_is_stable(a in 0.2f64..3.0, b in -0.3f64..0.3) {
        let f = GridFunction::sample(line(0.025 / 10.0), |x| a * (x[0] - b).abs()).unwrap();
        let w = Modulus::lipschitz(a).unwrap();
        let reports = verify_bounds(&f, &w, std::slice::from_ref(&w), &[0.1, 0.05, 0.025]).unwrap();
        let fits: Vec<f64> = reports.iter().map(|r| r.k_fit).collect();
        let (lo, hi) = fits.iter().fold((f64::MAX, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        prop_assert!(hi <= 2.0 * lo, "{fits:?}");
    }

    #[test]
    fn binary_and_csv_round_trip(seed in 0u64..1000, n in 3usize..40) {
        let axes = vec![Axis { origin: -0.5, step: 0.1, len: n }, Axis { origin: 0.25, step: 0.05, len: 3 }];
        let f = GridFunction::sample(axes, |x| ((seed as f64 + 1.0) * x[0]).sin() * x[1]).unwrap();
        let back = GridFunction::from_bytes(&f.to_bytes()).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.axes(), f.axes());
        let text = f.to_csv().unwrap().render();
        let back = GridFunction::from_csv(&text).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }
}
