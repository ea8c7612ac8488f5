use contint::expr::Expr;
use contint::geometry::BoxDomain;
use contint::moduli::{Modulus, Verdict};
use contint::odelab::{extend, funnel, theorem1_check, FunnelConfig, OdeSpec, Probe};
use contint::pdelab::{
    determinant, hat_matrix, special_solve, submatrix, theorem2_check, PdeSpec, PdeVerdict, SpecialFormSpec,
};
use proptest::prelude::*;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("v{i}")).collect()
}

fn modulus() -> impl Strategy<Value = Modulus> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|k| Modulus::lipschitz(k).unwrap()),
        (0.05f64..1.0).prop_map(|a| Modulus::hoelder(a, 1.0).unwrap()),
        (0.05f64..1.0).prop_map(|b| Modulus::log_lip(b, 1.0).unwrap()),
    ]
}

/// Affine right-hand sides `c + Σ a_j v_j` in `dim` variables.
fn affine(dim: usize) -> impl Strategy<Value = Expr> {
    (prop::collection::vec(-2.0f64..2.0, dim), -2.0f64..2.0).prop_map(|(a, c)| {
        Expr::sum(
            a.iter()
                .enumerate()
                .map(|(j, &v)| Expr::c(v) * Expr::var(j))
                .chain([Expr::c(c)])
                .collect(),
        )
    })
}

fn linear_ode(n: usize) -> impl Strategy<Value = (OdeSpec, Vec<f64>)> {
    (
        prop::collection::vec(affine(n + 1), n),
        prop::collection::vec(0.1f64..3.0, n + 1),
        prop::collection::vec(-0.5f64..0.5, n + 1),
    )
        .prop_map(move |(rhs, ks, xi)| {
            let moduli = ks.iter().map(|&k| Modulus::lipschitz(k).unwrap()).collect();
            let spec = OdeSpec::new(names(n + 1), rhs, BoxDomain::cube(n + 1, -1.0, 1.0))
                .unwrap()
                .with_moduli(moduli, Some(Modulus::lipschitz(1.0).unwrap()))
                .unwrap();
            (spec, xi)
        })
}

/// Homogeneous linear systems on a box far larger than the horizon reaches.
fn wide_linear_ode(n: usize) -> impl Strategy<Value = OdeSpec> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), n).prop_map(move |a| {
        let rhs = a
            .iter()
            .map(|row| Expr::sum(row.iter().enumerate().map(|(j, &v)| Expr::c(v) * Expr::var(j + 1)).collect()))
            .collect();
        OdeSpec::new(names(n + 1), rhs, BoxDomain::cube(n + 1, -20.0, 20.0)).unwrap()
    })
}

fn funnel_config(seed: u64) -> FunnelConfig {
    FunnelConfig {
        horizon: 0.5,
        deltas: vec![1e-2, 1e-3, 1e-4],
        ensemble: 4,
        seed,
        probes: vec![Probe::InitialCondition, Probe::FieldOffset],
        ..FunnelConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extension_leads_with_unit_time(rhs in prop::collection::vec(affine(3), 2)) {
        let spec = OdeSpec::new(names(3), rhs, BoxDomain::cube(3, -1.0, 1.0)).unwrap();
        let field = extend(&spec);
        prop_assert_eq!(&field.components()[0], &Expr::one());
    }

    #[test]
    fn lipschitz_systems_are_certified((spec, xi) in linear_ode(2)) {
        prop_assert_eq!(theorem1_check(&spec, &xi).unwrap().verdict(), Verdict::Holds);
    }

    #[test]
    fn funnel_dispersion_shrinks_with_delta(spec in wide_linear_ode(2), seed in 0u64..100) {
        let report = funnel(&spec, &[0.0, 0.0, 0.0], &funnel_config(seed)).unwrap();
        for trace in &report.probes {
            for pair in trace.dispersion.windows(2) {
                prop_assert!(pair[1] <= pair[0], "{:?}", trace.dispersion);
            }
        }
    }

    #[test]
    fn funnel_reports_are_reproducible(spec in wide_linear_ode(1), seed in 0u64..100) {
        let a = funnel(&spec, &[0.1, 0.1], &funnel_config(seed)).unwrap();
        let b = funnel(&spec, &[0.1, 0.1], &funnel_config(seed)).unwrap();
        prop_assert_eq!(a.to_csv().render(), b.to_csv().render());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn identity_block_has_unit_determinant(m in 1usize..3, n in 1usize..4, seed in prop::collection::vec(-2.0f64..2.0, 12)) {
        let rhs: Vec<Vec<Expr>> = (0..n)
            .map(|i| (0..m).map(|j| (Expr::c(seed[(i * m + j) % 12]) * Expr::var(j)).sin()).collect())
            .collect();
        let spec = PdeSpec::new(names(m + n), m, rhs, BoxDomain::cube(m + n, -1.0, 1.0)).unwrap();
        let cols: Vec<usize> = (0..n).collect();
        prop_assert_eq!(determinant(&submatrix(&hat_matrix(&spec), &cols).unwrap()), Expr::one());
    }

    #[test]
    fn special_solutions_satisfy_the_system(
        alpha in 0.2f64..0.95,
        betas in prop::array::uniform2(0.1f64..0.9),
        y0 in prop::array::uniform2(0.3f64..0.7),
        targets in prop::collection::vec(prop::array::uniform2(0.4f64..0.6), 1..6),
    ) {
        let x = names(2);
        let y: Vec<String> = vec!["y1".into(), "y2".into()];
        let h = format!("abs(v0)^{p:?}/{p:?} + abs(v1)^{p:?}/{p:?}", p = alpha + 1.0);
        let g: Vec<String> = ["y1", "y2"].iter().zip(betas).map(|(v, b)| format!("-{v}*log(abs({v})^{b:?})")).collect();
        let sf = SpecialFormSpec::parse(&x, &y, &g, &[h.clone(), h]).unwrap();
        let targets: Vec<Vec<f64>> = targets.iter().map(|t| t.to_vec()).collect();
        let sol = special_solve(&sf, &[0.5, 0.5], &y0, &targets, &BoxDomain::cube(2, 0.01, 0.99)).unwrap();
        prop_assert!(sol.max_residual() <= 1e-6);
    }

    #[test]
    fn single_variable_pde_matches_ode(
        (spec, xi) in linear_ode(2),
        per_variable in prop::collection::vec(modulus(), 3),
        overall in modulus(),
    ) {
        let ode = spec.clone().with_moduli(per_variable.clone(), Some(overall.clone())).unwrap();
        let rhs: Vec<Vec<Expr>> = spec.rhs().iter().map(|f| vec![f.clone()]).collect();
        let pde = PdeSpec::new(names(3), 1, rhs, spec.domain().clone())
            .unwrap()
            .with_moduli(per_variable, Some(overall))
            .unwrap();
        let cert = theorem1_check(&ode, &xi).unwrap();
        for &(i, verdict) in &cert.attempts {
            // dropping variable i keeps every other column of [I | F]
            let dropped = if i == 0 { 2 } else { i - 1 };
            let cols: Vec<usize> = (0..3).filter(|&c| c != dropped).collect();
            let other = theorem2_check(&pde, &xi, &cols).unwrap();
            prop_assert_eq!(other.verdict, PdeVerdict::from(verdict));
        }
    }
}
