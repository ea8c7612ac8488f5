use contint::expr::Expr;
use contint::geometry::{
    annihilator_frame, involutivity_constant, BoxDomain, Distribution, Form, PlaneField, SupProtocol,
};
use contint::presets::{contact_distribution, involutive_distribution};
use proptest::prelude::*;

const DIM: usize = 3;

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..DIM).prop_map(Expr::var),
        (-2.0f64..2.0).prop_map(Expr::c),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(Expr::sin),
            inner.prop_map(|a| (a * Expr::c(0.3)).exp()),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, DIM)
}

fn names() -> Vec<String> {
    ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
}

/// Rank-2 graph distribution in ℝ³ with coefficients from `expr()`.
fn distribution() -> impl Strategy<Value = Distribution> {
    (expr(), expr()).prop_map(|(a, b)| {
        Distribution::new(names(), 2, vec![vec![a], vec![b]], BoxDomain::cube(DIM, -1.0, 1.0)).unwrap()
    })
}

fn small_protocol(n_dirs: usize) -> SupProtocol {
    SupProtocol {
        lattice: 3,
        n_dirs,
        rounds: 2,
        seed: 11,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exterior_derivative_squares_to_zero(f in expr(), a in expr(), b in expr(), c in expr(), p in point()) {
        let zero_form = Form::function(DIM, f);
        let one_form = Form::one_form(vec![a, b, c]);
        for form in [zero_form, one_form] {
            let dd = form.d().d();
            prop_assert!(dd.is_zero());
            prop_assert_eq!(dd.eval(&p).norm(), 0.0);
        }
    }

    #[test]
    fn annihilator_kills_spanning_fields(d in distribution(), pts in prop::collection::vec(point(), 16)) {
        let frame = annihilator_frame(&d);
        for p in &pts {
            let a = frame.matrix_at(p);
            let b = d.basis_at(p).unwrap();
            let scale = 1.0 + a.abs().max() * b.abs().max();
            prop_assert!((a * b).abs().max() <= 1e-14 * scale);
        }
    }

    #[test]
    fn defect_zero_set_survives_rescaling(g in expr(), pts in prop::collection::vec(point(), 8)) {
        let positive = (g * Expr::c(0.5)).sin().exp();
        for d in [contact_distribution().unwrap(), involutive_distribution().unwrap()] {
            let frame = annihilator_frame(&d);
            let scaled = frame.scaled(&positive).unwrap();
            for p in &pts {
                let plain = frame.defect_at(p) <= 1e-12;
                let rescaled = scaled.defect_at(p) <= 1e-12;
                prop_assert_eq!(plain, rescaled);
            }
        }
    }

    #[test]
    fn involutivity_constant_ignores_constant_rescaling(d in distribution(), c in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0]) {
        let frame = annihilator_frame(&d);
        let region = BoxDomain::cube(DIM, -0.5, 0.5);
        let proto = small_protocol(16);
        let plain = involutivity_constant(&frame, &d, &region, &proto).unwrap().value;
        let scaled = involutivity_constant(&frame.scaled(&Expr::c(c)).unwrap(), &d, &region, &proto).unwrap().value;
        prop_assert!((plain - scaled).abs() <= 1e-12 * plain.max(1.0), "{plain} {scaled}");
    }

    #[test]
    fn involutivity_constant_grows_with_directions(d in distribution(), n in 1usize..16) {
        let frame = annihilator_frame(&d);
        let region = BoxDomain::cube(DIM, -0.5, 0.5);
        let few = involutivity_constant(&frame, &d, &region, &small_protocol(n)).unwrap().value;
        let many = involutivity_constant(&frame, &d, &region, &small_protocol(2 * n)).unwrap().value;
        prop_assert!(many >= few);
    }
}
