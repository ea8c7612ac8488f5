use contint::dynsys::{
    compatibility_defect, domination_report, orthonormal_pullback_frames, transport, SplittingSetup,
    TransportedField,
};
use contint::expr::Expr;
use contint::geometry::{Form, FrameSection, PlaneField};
use contint::linalg::{sigma_min, spectral_norm, subspace_angle};
use contint::presets::{cat_map, skew_product, DynPreset};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn preset(which: bool) -> DynPreset {
    if which { cat_map() } else { skew_product() }.unwrap()
}

fn torus_points(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, dim), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_is_a_cocycle(which in any::<bool>(), k1 in 0usize..6, k2 in 0usize..6, seed in torus_points(3)) {
        let p = preset(which);
        let d = p.spec.dim();
        let points: Vec<Vec<f64>> = seed.iter().map(|q| q[..d].to_vec()).collect();
        let direct = transport(&p.spec, &p.initial, k1 + k2, &points, None).unwrap();
        let first = TransportedField { spec: &p.spec, initial: &p.initial, k: k1 };
        let composed = transport(&p.spec, &first, k2, &points, None).unwrap();
        for (a, b) in direct.bases[k1 + k2].iter().zip(&composed.bases[k2]) {
            prop_assert!(subspace_angle(a, b) <= 1e-8);
        }
    }

    #[test]
    fn conorm_is_reciprocal_inverse_norm(which in any::<bool>(), k in 1usize..12, seed in torus_points(3)) {
        let p = preset(which);
        let d = p.spec.dim();
        for q in seed {
            let q = &q[..d];
            let orbit = p.spec.orbit(q, k);
            let pushed = p.spec.push(&orbit, k, &p.expanding.basis_at(q).unwrap());
            let inverse = pushed.clone().pseudo_inverse(1e-300).unwrap();
            let conorm = sigma_min(&pushed);
            let dual = 1.0 / spectral_norm(&inverse);
            prop_assert!((conorm - dual).abs() <= 1e-10 * conorm, "{conorm} {dual}");
        }
    }

    #[test]
    fn orthonormal_frame_choice_is_an_isometry(angle in 0.0f64..std::f64::consts::TAU, flip in any::<bool>(), k in 0usize..5) {
        // two orthonormal annihilators of the skew product's E⁰ = span{∂x1, ∂θ}
        let p = skew_product().unwrap();
        let frames = orthonormal_pullback_frames(&p.spec, &p.c0, k).unwrap();
        let sign = if flip { -1.0 } else { 1.0 };
        let other = FrameSection::new(
            vec![Form::one_form(vec![Expr::zero(), Expr::c(sign), Expr::zero()])],
            vec![1],
        )
        .unwrap();
        let others = orthonormal_pullback_frames(&p.spec, &other, k).unwrap();
        let points: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1 + 0.2 * i as f64, (angle + i as f64).sin().abs(), 0.3]).collect();
        for (a, b) in frames.iter().zip(&others) {
            prop_assert!(compatibility_defect(a, b, &points).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn splitting_reports_are_reproducible(which in any::<bool>(), seed in torus_points(3)) {
        let p = preset(which);
        let d = p.spec.dim();
        let points: Vec<Vec<f64>> = seed.iter().map(|q| q[..d].to_vec()).collect();
        let setup = SplittingSetup {
            initial: &p.invariant,
            expanding: &p.expanding,
            limit: Some(&p.invariant),
            transverse: p.transverse.clone(),
            k_max: 4,
            eps_list: vec![0.1, 1.0],
        };
        let a = domination_report(&p.spec, &setup, &points).unwrap().to_csv().render();
        let b = domination_report(&p.spec, &setup, &points).unwrap().to_csv().render();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn rotated_constant_frames_are_compatible() {
    let p = cat_map().unwrap();
    let c = DMatrix::from_row_slice(1, 2, &[0.0, -1.0]);
    let row = Form::one_form(c.iter().map(|&v| Expr::c(v)).collect());
    let flipped = FrameSection::new(vec![row], vec![1]).unwrap();
    let a = orthonormal_pullback_frames(&p.spec, &p.c0, 3).unwrap();
    let b = orthonormal_pullback_frames(&p.spec, &flipped, 3).unwrap();
    let points = vec![vec![0.2, 0.7], vec![0.9, 0.1]];
    for (x, y) in a.iter().zip(&b) {
        assert!(compatibility_defect(x, y, &points).unwrap() <= 1e-8);
    }
}
