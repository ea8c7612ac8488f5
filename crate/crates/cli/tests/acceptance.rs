//! The ten acceptance checks, one line of output each.

use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use contint::dynsys::{
    domination_report, splitting_involutivity_pipeline, transport, SplittingSetup, TransportedField,
};
use contint::expr::Expr;
use contint::geometry::{annihilator_frame, BoxDomain, Distribution, Form, PlaneField, SupProtocol};
use contint::linalg::{sigma_min, spectral_norm, subspace_angle};
use contint::moduli::{Modulus, Verdict};
use contint::mollify::{verify_bounds, GridFunction};
use contint::odelab::{funnel, theorem1_check, FunnelConfig, FunnelVerdict, Probe};
use contint::pdelab::special_form_oracle;
use contint::presets::{
    cat_map, contact_distribution, involutive_distribution, peano, skew_product, LogFamilyPde, LogHoelderOde,
    LAMBDA_MINUS, LAMBDA_PLUS,
};
use contint::surface::{build_surface, tangency_defect, FlowConfig, PushforwardContext};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Sampled = (&'static str, Distribution, Vec<(f64, f64)>);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn log_hoelder_slope() -> Outcome {
    let spec = LogHoelderOde::default().spec().map_err(|e| e.to_string())?;
    let cert = theorem1_check(&spec, &[0.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    let slope = cert.report.log_slope(1e-8, 1e-3).ok_or("no slope")?;
    ensure(
        (slope - 0.4).abs() <= 0.05 && cert.verdict() == Verdict::Holds,
        format!("slope {slope:.4}, verdict {}", cert.verdict()),
    )
}

fn peano_funnel() -> Outcome {
    let spec = peano().map_err(|e| e.to_string())?;
    let cert = theorem1_check(&spec, &[0.0, 0.0]).map_err(|e| e.to_string())?;
    let cfg = FunnelConfig {
        horizon: 1.0,
        ..FunnelConfig::default()
    };
    let rep = funnel(&spec, &[0.0, 0.0], &cfg).map_err(|e| e.to_string())?;
    let offset = rep.probe(Probe::FieldOffset).ok_or("no field-offset probe")?;
    let plateau = *offset.dispersion.last().unwrap();
    let target = (1.0f64 / 3.0).powi(3);
    ensure(
        cert.verdict() == Verdict::Fails
            && rep.verdict == FunnelVerdict::FunnelDetected
            && plateau <= 3.0 * target
            && plateau >= target / 3.0,
        format!("criterion {}, funnel {:?}, plateau {plateau:.5} vs {target:.5}", cert.verdict(), rep.verdict),
    )
}

fn frobenius_defects() -> Outcome {
    let pts = BoxDomain::cube(3, -1.0, 1.0).lattice(7);
    let contact = annihilator_frame(&contact_distribution().map_err(|e| e.to_string())?);
    let involutive = annihilator_frame(&involutive_distribution().map_err(|e| e.to_string())?);
    let worst_contact = pts.iter().map(|p| (contact.defect_at(p) - 1.0).abs()).fold(0.0, f64::max);
    let worst_involutive = pts.iter().map(|p| involutive.defect_at(p).abs()).fold(0.0, f64::max);
    ensure(
        worst_contact <= 1e-10 && worst_involutive <= 1e-10,
        format!("|contact − 1| ≤ {worst_contact:e}, involutive ≤ {worst_involutive:e}"),
    )
}

fn tangency_bound() -> Outcome {
    let d = contact_distribution().map_err(|e| e.to_string())?;
    let proto = SupProtocol {
        lattice: 9,
        n_dirs: 64,
        ..SupProtocol::default()
    };
    let rhs_at = |eps1: f64| {
        let cfg = FlowConfig {
            h: eps1 / 16.0,
            ..FlowConfig::default()
        };
        let patch = build_surface(&d, &[0.0; 3], eps1, 17, &cfg)?;
        tangency_defect(&patch, &d, &proto)
    };
    let full = rhs_at(0.1).map_err(|e| e.to_string())?;
    let half = rhs_at(0.05).map_err(|e| e.to_string())?;
    let ratio = full.rhs / half.rhs;
    ensure(
        full.holds() && (ratio / 2.0 - 1.0).abs() <= 0.2,
        format!(
            "max defect {:.3e} ≤ rhs {:.3e} + {:.1e}; rhs ratio {ratio:.3}",
            full.max_defect, full.rhs, full.fd_tolerance
        ),
    )
}

fn pushforward_bound() -> Outcome {
    const EPS1: f64 = 0.1;
    let flow = FlowConfig {
        h: EPS1 / 16.0,
        ..FlowConfig::default()
    };
    let proto = SupProtocol {
        lattice: 5,
        n_dirs: 32,
        ..SupProtocol::default()
    };
    let special = LogFamilyPde::default().spec().and_then(|s| s.distribution()).map_err(|e| e.to_string())?;
    let cases: [Sampled; 3] = [
        ("involutive", involutive_distribution().map_err(|e| e.to_string())?, vec![(-0.5, 0.5); 3]),
        ("contact", contact_distribution().map_err(|e| e.to_string())?, vec![(-0.5, 0.5); 3]),
        ("special-form", special, vec![(0.45, 0.55), (0.45, 0.55), (0.4, 0.6), (0.4, 0.6)]),
    ];
    let mut summary = Vec::new();
    for (name, d, base) in cases {
        let frame = annihilator_frame(&d);
        let ctx = PushforwardContext::new(&d, frame, d.domain(), EPS1, &proto).map_err(|e| e.to_string())?;
        let m = d.m();
        let n = d.dim() - m;
        let count = Cell::new(0usize);
        let worst = Cell::new(0.0f64);
        let x0 = base.iter().map(|&(lo, hi)| lo..hi).collect::<Vec<_>>();
        let strategy = (x0, prop::collection::vec(-EPS1..EPS1, m), prop::collection::vec(-2.0f64..2.0, n));
        let result = runner(100).run(&strategy, |(x0, t, y)| {
            let mut y0 = vec![0.0; m];
            y0.extend(&y);
            prop_assume!(y.iter().any(|v| v.abs() > 1e-3));
            let check = ctx.check(&d, &x0, &t, &y0, &flow).unwrap();
            count.set(count.get() + 1);
            worst.set(worst.get().max(check.lhs / check.rhs));
            prop_assert!(check.pass, "lhs {} rhs {}", check.lhs, check.rhs);
            Ok(())
        });
        if let Err(e) = result {
            return Err(format!("{name}: {e}"));
        }
        summary.push(format!("{name} {} checks (max lhs/rhs {:.3})", count.get(), worst.get()));
    }
    Ok(summary.join(", "))
}

fn oracle_equivalence() -> Outcome {
    let preset = LogFamilyPde::default();
    let sf = preset.special_form().map_err(|e| e.to_string())?;
    let rep = special_form_oracle(&sf, &LogFamilyPde::names(), &LogFamilyPde::oracle_setup())
        .map_err(|e| e.to_string())?;
    let wedge = rep.wedge_max.iter().copied().fold(0.0, f64::max);
    let err = rep.final_error();
    ensure(
        err <= 1e-4 && wedge <= 1e-10,
        format!("final sup error {err:.3e}, max wedge {wedge:e}, {:?}", rep.convergence.verdict),
    )
}

fn mollification_bounds() -> Outcome {
    let eps = [0.1, 0.05, 0.025];
    let axes = vec![GridFunction::axis_covering(-1.0, 1.0, 0.0025)];
    let spread = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::MAX, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        (lo, hi)
    };
    let abs = GridFunction::sample(axes.clone(), |x| x[0].abs()).map_err(|e| e.to_string())?;
    let lip = Modulus::lipschitz(1.0).map_err(|e| e.to_string())?;
    let fits: Vec<f64> = verify_bounds(&abs, &lip, std::slice::from_ref(&lip), &eps)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| r.k_fit)
        .collect();
    let root = GridFunction::sample(axes, |x| x[0].abs().sqrt()).map_err(|e| e.to_string())?;
    let half = Modulus::hoelder(0.5, 1.0).map_err(|e| e.to_string())?;
    let scaled: Vec<f64> = verify_bounds(&root, &half, std::slice::from_ref(&half), &eps)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| r.deriv_sup[0] * r.eps.sqrt())
        .collect();
    let (flo, fhi) = spread(&fits);
    let (slo, shi) = spread(&scaled);
    let variation = (shi - slo) / slo;
    ensure(
        fhi <= 2.0 * flo && variation <= 0.25,
        format!("|x| k_fit in [{flo:.3}, {fhi:.3}]; √|x| deriv·ε^½ varies {:.2}%", 100.0 * variation),
    )
}

fn cat_map_rates() -> Outcome {
    let p = cat_map().map_err(|e| e.to_string())?;
    let setup = SplittingSetup {
        initial: &p.invariant,
        expanding: &p.expanding,
        limit: Some(&p.invariant),
        transverse: p.transverse.clone(),
        k_max: 15,
        eps_list: vec![0.1, 0.5, 1.0],
    };
    let pts = BoxDomain::cube(2, 0.0, 1.0).lattice(5);
    let rep = domination_report(&p.spec, &setup, &pts).map_err(|e| e.to_string())?;
    let mut worst_n = 0.0f64;
    let mut worst_m = 0.0f64;
    for k in 5..=15 {
        let root = 1.0 / k as f64;
        worst_n = worst_n.max((rep.norm_e[k - 1].powf(root) / LAMBDA_MINUS - 1.0).abs());
        worst_m = worst_m.max((rep.conorm_f[k - 1].powf(root) / LAMBDA_PLUS - 1.0).abs());
    }
    let mut worst_ratio = 0.0f64;
    for e in 0..rep.eps_list.len() {
        for r in &rep.involutivity_ratios(e)[2..] {
            worst_ratio = worst_ratio.max(*r);
        }
    }
    ensure(
        worst_n <= 0.05 && worst_m <= 0.05 && worst_ratio <= 0.2,
        format!(
            "norm rate within {:.2}%, conorm rate within {:.2}%, max q ratio {worst_ratio:.4}",
            100.0 * worst_n,
            100.0 * worst_m
        ),
    )
}

fn skew_product_growth() -> Outcome {
    let p = skew_product().map_err(|e| e.to_string())?;
    let eps_list = vec![0.1, 0.5, 1.0];
    let setup = SplittingSetup {
        initial: &p.initial,
        expanding: &p.expanding,
        limit: Some(&p.invariant),
        transverse: p.transverse.clone(),
        k_max: 8,
        eps_list: eps_list.clone(),
    };
    let region = BoxDomain::cube(3, 0.0, 1.0);
    let proto = SupProtocol {
        lattice: 5,
        n_dirs: 32,
        ..SupProtocol::default()
    };
    let rep = splitting_involutivity_pipeline(&p.spec, &setup, &p.c0, Some(&p.limit_frame), eps_list[0], &region, &proto)
        .map_err(|e| e.to_string())?;
    let dom = &rep.domination;
    let decay = |v: &[f64]| v[0] / v[v.len() - 1];
    let mut worst = f64::INFINITY;
    for e in 0..eps_list.len() {
        worst = worst.min(decay(&dom.involutivity_bound[e])).min(decay(&dom.regularity_bound[e]));
    }
    ensure(
        dom.growth_slope <= 0.05 && worst >= 10.0,
        format!("growth slope {:.4}, weakest decay ×{worst:.1}", dom.growth_slope),
    )
}

fn expr3() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0..3usize).prop_map(Expr::var), (-2.0f64..2.0).prop_map(Expr::c)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.prop_map(Expr::sin),
        ]
    })
}

fn distribution3() -> impl Strategy<Value = Distribution> {
    (expr3(), expr3()).prop_map(|(a, b)| {
        let names = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        Distribution::new(names, 2, vec![vec![a], vec![b]], BoxDomain::cube(3, -1.0, 1.0)).unwrap()
    })
}

fn invariant_suites() -> Outcome {
    let point = || prop::collection::vec(-0.5f64..0.5, 3);
    let mut passed = Vec::new();

    runner(32)
        .run(&(expr3(), expr3(), expr3(), expr3()), |(f, a, b, c)| {
            for form in [Form::function(3, f), Form::one_form(vec![a, b, c])] {
                prop_assert!(form.d().d().is_zero());
            }
            Ok(())
        })
        .map_err(|e| format!("d∘d: {e}"))?;
    passed.push("d∘d=0");

    runner(32)
        .run(&(distribution3(), point()), |(d, p)| {
            let frame = annihilator_frame(&d);
            let basis = d.basis_at(&p).unwrap();
            let scale = 1.0 + basis.norm();
            prop_assert!((frame.matrix_at(&p) * basis).norm() <= 1e-14 * scale);
            Ok(())
        })
        .map_err(|e| format!("annihilation: {e}"))?;
    passed.push("annihilation");

    let flow = FlowConfig {
        h: 0.1 / 16.0,
        ..FlowConfig::default()
    };
    let proto = SupProtocol {
        lattice: 3,
        n_dirs: 8,
        ..SupProtocol::default()
    };
    runner(16)
        .run(&(distribution3(), point(), prop::array::uniform2(-0.1f64..0.1), -2.0f64..2.0), |(d, x0, t, y)| {
            let ctx = PushforwardContext::new(&d, annihilator_frame(&d), d.domain(), 0.1, &proto).unwrap();
            let check = ctx.check(&d, &x0, &t, &[0.0, 0.0, y], &flow).unwrap();
            prop_assert!(check.image[0].abs() <= 1e-10 && check.image[1].abs() <= 1e-10);
            Ok(())
        })
        .map_err(|e| format!("transverse invariance: {e}"))?;
    passed.push("𝒴-invariance");

    let presets = [cat_map().unwrap(), skew_product().unwrap()];
    runner(16)
        .run(&(0usize..2, 0usize..5, 0usize..5, prop::collection::vec(0.0f64..1.0, 3)), |(w, k1, k2, q)| {
            let p = &presets[w];
            let pts = vec![q[..p.spec.dim()].to_vec()];
            let direct = transport(&p.spec, &p.initial, k1 + k2, &pts, None).unwrap();
            let first = TransportedField {
                spec: &p.spec,
                initial: &p.initial,
                k: k1,
            };
            let composed = transport(&p.spec, &first, k2, &pts, None).unwrap();
            prop_assert!(subspace_angle(&direct.bases[k1 + k2][0], &composed.bases[k2][0]) <= 1e-8);
            Ok(())
        })
        .map_err(|e| format!("cocycle: {e}"))?;
    passed.push("cocycle");

    runner(16)
        .run(&(0usize..2, 1usize..12, prop::collection::vec(0.0f64..1.0, 3)), |(w, k, q)| {
            let p = &presets[w];
            let q = &q[..p.spec.dim()];
            let pushed = p.spec.push(&p.spec.orbit(q, k), k, &p.expanding.basis_at(q).unwrap());
            let conorm = sigma_min(&pushed);
            let dual = 1.0 / spectral_norm(&pushed.clone().pseudo_inverse(1e-300).unwrap());
            prop_assert!((conorm - dual).abs() <= 1e-10 * conorm);
            Ok(())
        })
        .map_err(|e| format!("conorm duality: {e}"))?;
    passed.push("conorm duality");

    let spec = peano().unwrap();
    runner(4)
        .run(&(0u64..1000), |seed| {
            let cfg = FunnelConfig {
                deltas: vec![1e-2, 1e-3],
                ensemble: 2,
                seed,
                ..FunnelConfig::default()
            };
            let a = funnel(&spec, &[0.0, 0.0], &cfg).unwrap().to_csv().render();
            let b = funnel(&spec, &[0.0, 0.0], &cfg).unwrap().to_csv().render();
            prop_assert_eq!(a, b);
            Ok(())
        })
        .map_err(|e| format!("determinism: {e}"))?;
    passed.push("report determinism");

    Ok(passed.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("log-Hölder ODE limit slope", log_hoelder_slope),
        ("Peano counterexample", peano_funnel),
        ("Frobenius defects", frobenius_defects),
        ("tangency bound on contact surface", tangency_bound),
        ("pushforward bound", pushforward_bound),
        ("mollified frames match closed form", oracle_equivalence),
        ("mollification bounds", mollification_bounds),
        ("cat map rates", cat_map_rates),
        ("skew product growth and traces", skew_product_growth),
        ("invariant suites", invariant_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
