//! Preset expansion, default filling and experiment dispatch.

use anyhow::{anyhow, bail, Context, Result};
use contint::dynsys::{
    domination_report, splitting_involutivity_pipeline, transport, ConstantPlane, DiffeoSpec, PipelineStatus,
    SplittingSetup,
};
use contint::expr::{parse_expr, Expr};
use contint::geometry::{
    annihilator_frame, frobenius_defect, involutivity_constant, BoxDomain, Distribution, FrameSection,
    KernelField, PlaneField, SupProtocol,
};
use contint::linalg::subspace_angle;
use contint::moduli::{default_limit_grid, limit_condition_check, osgood_check, Modulus, Verdict};
use contint::mollify::{reports_to_csv, verify_bounds, GridFunction};
use contint::odelab::{funnel, theorem1_check, FunnelConfig, FunnelVerdict, OdeSpec, Probe};
use contint::pdelab::{
    special_form_oracle, special_solve, theorem2_check, OracleSetup, PdeSpec, PdeVerdict, SpecialFormSpec,
};
use contint::presets::{self, DynPreset, LogFamilyPde, LogHoelderOde, MixedPde};
use contint::report::{fmt_f64, Csv};
use contint::surface::{build_surface, tangency_defect, ConvergenceVerdict, FlowConfig};

use crate::config::{CriterionChoice, ExperimentConfig, Kind, Preset, System};

/// Reports produced by one experiment and its overall verdict, if any.
#[derive(Debug)]
pub struct Outcome {
    pub reports: Vec<(String, Csv)>,
    pub verdict: Option<Verdict>,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn render(e: &Expr, names: &[String]) -> String {
    e.display(names).to_string()
}

fn columns(plane: &ConstantPlane, dim: usize) -> Vec<Vec<f64>> {
    let b = plane.basis_at(&vec![0.0; dim]).expect("constant planes are defined everywhere");
    b.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn fill<T: Clone>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

fn fill_ode(sys: &mut System, spec: &OdeSpec) {
    let names = spec.names().to_vec();
    fill(&mut sys.rhs, spec.rhs().iter().map(|e| render(e, &names)).collect());
    fill(&mut sys.moduli, spec.moduli().iter().map(|w| w.to_string()).collect());
    if let Ok(w) = spec.overall_modulus() {
        fill(&mut sys.overall, w.to_string());
    }
    fill(&mut sys.lo, spec.domain().lo.to_vec());
    fill(&mut sys.hi, spec.domain().hi.to_vec());
    fill(&mut sys.point, vec![0.0; names.len()]);
    fill(&mut sys.names, names);
}

fn fill_pde(sys: &mut System, spec: &PdeSpec, point: Vec<f64>, cols: Vec<usize>) {
    let names = spec.names().to_vec();
    fill(
        &mut sys.matrix,
        spec.rhs().iter().map(|row| row.iter().map(|e| render(e, &names)).collect()).collect(),
    );
    fill(&mut sys.m, spec.m());
    fill(&mut sys.moduli, spec.moduli().iter().map(|w| w.to_string()).collect());
    if let Some(w) = spec.overall_modulus() {
        fill(&mut sys.overall, w.to_string());
    }
    fill(&mut sys.lo, spec.domain().lo.to_vec());
    fill(&mut sys.hi, spec.domain().hi.to_vec());
    fill(&mut sys.point, point);
    fill(&mut sys.columns, cols);
    fill(&mut sys.names, names);
}

fn fill_distribution(sys: &mut System, d: &Distribution) {
    let names = d.names().to_vec();
    fill(&mut sys.m, d.m());
    fill(
        &mut sys.matrix,
        d.coeffs().iter().map(|row| row.iter().map(|e| render(e, &names)).collect()).collect(),
    );
    fill(&mut sys.forms, annihilator_frame(d).render(&names));
    fill(&mut sys.lo, d.domain().lo.to_vec());
    fill(&mut sys.hi, d.domain().hi.to_vec());
    fill(&mut sys.point, vec![0.0; names.len()]);
    fill(&mut sys.names, names);
}

fn fill_dyn(sys: &mut System, p: &DynPreset) {
    let names = p.spec.names().to_vec();
    let d = names.len();
    let map = p.spec.map().components().iter().map(|e| render(e, &names)).collect();
    let inverse = p.spec.inverse().components().iter().map(|e| render(e, &names)).collect();
    fill(&mut sys.map, map);
    fill(&mut sys.inverse, inverse);
    fill(&mut sys.torus, p.spec.is_torus());
    fill(&mut sys.initial, columns(&p.initial, d));
    fill(&mut sys.invariant, columns(&p.invariant, d));
    fill(&mut sys.expanding, columns(&p.expanding, d));
    fill(&mut sys.transverse, p.transverse.clone());
    fill(&mut sys.coframe, p.c0.render(&names));
    fill(&mut sys.limit_coframe, p.limit_frame.render(&names));
    fill(&mut sys.lo, vec![0.0; d]);
    fill(&mut sys.hi, vec![1.0; d]);
    fill(&mut sys.names, names);
}

fn expand_preset(cfg: &mut ExperimentConfig) -> Result<()> {
    let Some(preset) = cfg.experiment.preset else {
        return Ok(());
    };
    let (sys, par) = (&mut cfg.system, &mut cfg.params);
    match preset {
        Preset::PaperEx1 => {
            let d = LogHoelderOde::default();
            let p = LogHoelderOde {
                alpha: *par.alpha.get_or_insert(d.alpha),
                beta: *par.beta.get_or_insert(d.beta),
                gamma: *par.gamma.get_or_insert(d.gamma),
                delta: *par.delta.get_or_insert(d.delta),
            };
            fill_ode(sys, &p.spec()?);
        }
        Preset::Peano => fill_ode(sys, &presets::peano()?),
        Preset::PaperEx2 => {
            let d = LogFamilyPde::default();
            let p = LogFamilyPde {
                alpha: *par.alpha.get_or_insert(d.alpha),
                beta: *par.beta.get_or_insert(d.beta),
            };
            let sf = p.special_form()?;
            let x_names = strings(&["x1", "x2"]);
            let y_names = strings(&["y1", "y2"]);
            let g = sf.g().iter().zip(&y_names).map(|(e, y)| render(e, std::slice::from_ref(y)));
            fill(&mut sys.g, g.collect());
            fill(&mut sys.h, sf.h().iter().map(|e| render(e, &x_names)).collect());
            fill(&mut sys.x_names, x_names);
            fill(&mut sys.y_names, y_names);
            let setup = LogFamilyPde::oracle_setup();
            fill(&mut sys.x0, setup.x0.clone());
            fill(&mut sys.y0, setup.y0.clone());
            let spec = p.spec()?;
            let point = [setup.x0, setup.y0].concat();
            fill_pde(sys, &spec, point, vec![1, 2]);
            fill(&mut par.eps1, setup.eps1);
            fill(&mut par.eps, setup.eps_list);
        }
        Preset::PaperEx3 => {
            let d = MixedPde::default();
            let v = par
                .mixed
                .get_or_insert_with(|| vec![d.a11, d.a12, d.a21, d.a22, d.b1, d.b2])
                .clone();
            let [a11, a12, a21, a22, b1, b2] = v[..] else {
                bail!("mixed needs six exponents a11 a12 a21 a22 b1 b2");
            };
            let spec = MixedPde { a11, a12, a21, a22, b1, b2 }.spec()?;
            let cols = MixedPde::COLUMNS.iter().map(|c| c + 1).collect();
            fill_pde(sys, &spec, vec![0.0; 4], cols);
        }
        Preset::Contact => fill_distribution(sys, &presets::contact_distribution()?),
        Preset::Involutive => fill_distribution(sys, &presets::involutive_distribution()?),
        Preset::CatMap => fill_dyn(sys, &presets::cat_map()?),
        Preset::SkewProduct => fill_dyn(sys, &presets::skew_product()?),
    }
    Ok(())
}

fn fill_defaults(cfg: &mut ExperimentConfig) {
    let kind = cfg.experiment.kind;
    let p = &mut cfg.params;
    match kind {
        Kind::ModuliCheck => {
            let c = if cfg.system.second_modulus.is_some() {
                CriterionChoice::Limit
            } else {
                CriterionChoice::Osgood
            };
            fill(&mut p.criterion, c);
            if p.criterion == Some(CriterionChoice::Osgood) {
                fill(&mut p.eps, vec![0.1]);
                fill(&mut p.depth, 40);
            }
        }
        Kind::MollifyVerify => {
            fill(&mut p.eps, vec![0.1, 0.05, 0.025]);
            let smallest = p.eps.as_ref().unwrap().iter().copied().fold(f64::INFINITY, f64::min);
            fill(&mut p.step, smallest / 10.0);
        }
        Kind::Frobenius => {
            fill(&mut p.lattice, 5);
            fill(&mut p.n_dirs, 64);
            fill(&mut p.rounds, 3);
        }
        Kind::Surface => {
            fill(&mut p.eps1, 0.1);
            fill(&mut p.grid, 17);
            fill(&mut p.step, p.eps1.unwrap() / 16.0);
            fill(&mut p.lattice, 9);
            fill(&mut p.n_dirs, 64);
            fill(&mut p.rounds, 3);
        }
        Kind::OdeCheck => {}
        Kind::OdeFunnel => {
            let d = FunnelConfig::default();
            fill(&mut p.horizon, d.horizon);
            fill(&mut p.deltas, d.deltas);
            fill(&mut p.ensemble, d.ensemble);
            fill(&mut p.step, d.flow.h);
        }
        Kind::PdeCheck => {}
        Kind::PdeSolveSpecial => {
            fill(&mut p.grid, 9);
        }
        Kind::PdeFrames => {
            fill(&mut p.eps1, 0.1);
            fill(&mut p.grid, 17);
            fill(&mut p.step, p.eps1.unwrap() / 16.0);
            fill(&mut p.eps, (1..=6).map(|k| 0.5f64.powi(k)).collect());
        }
        Kind::DynTransport => {
            fill(&mut p.k_max, 10);
            fill(&mut p.lattice, 5);
        }
        Kind::DynDominate => {
            fill(&mut p.k_max, 15);
            fill(&mut p.lattice, 5);
            fill(&mut p.eps, vec![0.1, 0.5, 1.0]);
        }
        Kind::DynTraces => {
            fill(&mut p.k_max, 8);
            fill(&mut p.lattice, 5);
            fill(&mut p.n_dirs, 32);
            fill(&mut p.rounds, 3);
            fill(&mut p.eps, vec![0.1, 0.5, 1.0]);
        }
    }
}

/// Expands the preset and fills every unset parameter the experiment uses.
pub fn resolve(cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
    let mut out = cfg.clone();
    expand_preset(&mut out).context("expanding preset")?;
    fill_defaults(&mut out);
    Ok(out)
}

fn need<'a, T>(v: &'a Option<T>, key: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| anyhow!("missing `{key}`"))
}

fn names_or(sys: &System, default: &[&str]) -> Vec<String> {
    sys.names.clone().unwrap_or_else(|| strings(default))
}

fn region(sys: &System, dim: usize, lo: f64, hi: f64) -> Result<BoxDomain> {
    let lo = sys.lo.clone().unwrap_or_else(|| vec![lo; dim]);
    let hi = sys.hi.clone().unwrap_or_else(|| vec![hi; dim]);
    if lo.len() != dim || hi.len() != dim {
        bail!("`lo` and `hi` need {dim} entries");
    }
    Ok(BoxDomain::new(lo, hi)?)
}

fn parse_moduli(list: &[String]) -> Result<Vec<Modulus>> {
    list.iter()
        .map(|s| s.parse::<Modulus>().with_context(|| format!("modulus `{s}`")))
        .collect()
}

fn protocol(cfg: &ExperimentConfig) -> SupProtocol {
    let d = SupProtocol::default();
    SupProtocol {
        lattice: cfg.params.lattice.unwrap_or(d.lattice),
        n_dirs: cfg.params.n_dirs.unwrap_or(d.n_dirs),
        rounds: cfg.params.rounds.unwrap_or(d.rounds),
        seed: cfg.experiment.seed,
    }
}

fn flow_config(cfg: &ExperimentConfig) -> FlowConfig {
    FlowConfig {
        h: cfg.params.step.unwrap_or(FlowConfig::default().h),
        ..FlowConfig::default()
    }
}

fn ode_spec(sys: &System) -> Result<OdeSpec> {
    let names = need(&sys.names, "names")?.clone();
    let dom = region(sys, names.len(), -1.0, 1.0)?;
    let spec = OdeSpec::parse(names, need(&sys.rhs, "rhs")?, dom)?;
    let overall = sys.overall.as_ref().map(|s| s.parse::<Modulus>()).transpose()?;
    Ok(match &sys.moduli {
        Some(list) => spec.with_moduli(parse_moduli(list)?, overall)?,
        None => spec.with_estimated_moduli(9)?,
    })
}

fn special_form(sys: &System) -> Result<(SpecialFormSpec, Vec<String>, Vec<String>)> {
    let x = need(&sys.x_names, "x_names")?.clone();
    let y = need(&sys.y_names, "y_names")?.clone();
    let sf = SpecialFormSpec::parse(&x, &y, need(&sys.g, "g")?, need(&sys.h, "h")?)?;
    Ok((sf, x, y))
}

fn pde_spec(sys: &System) -> Result<PdeSpec> {
    let names = need(&sys.names, "names")?.clone();
    let m = *need(&sys.m, "m")?;
    let dom = region(sys, names.len(), -1.0, 1.0)?;
    let spec = PdeSpec::parse(names, m, need(&sys.matrix, "matrix")?, dom)?;
    let overall = sys.overall.as_ref().map(|s| s.parse::<Modulus>()).transpose()?;
    Ok(spec.with_moduli(parse_moduli(need(&sys.moduli, "moduli")?)?, overall)?)
}

fn split_boxes(sys: &System, m: usize, n: usize) -> Result<(BoxDomain, BoxDomain)> {
    let full = region(sys, m + n, 0.0, 1.0)?;
    let x = BoxDomain::new(full.lo[..m].to_vec(), full.hi[..m].to_vec())?;
    let y = BoxDomain::new(full.lo[m..].to_vec(), full.hi[m..].to_vec())?;
    Ok((x, y))
}

fn plane(cols: &Option<Vec<Vec<f64>>>, dim: usize, key: &str) -> Result<ConstantPlane> {
    Ok(ConstantPlane::from_columns(dim, need(cols, key)?)?)
}

struct DynSystem {
    spec: DiffeoSpec,
    initial: ConstantPlane,
    invariant: Option<ConstantPlane>,
    expanding: Option<ConstantPlane>,
}

fn dyn_system(sys: &System) -> Result<DynSystem> {
    let names = need(&sys.names, "names")?.clone();
    let d = names.len();
    let spec = DiffeoSpec::parse(
        names,
        need(&sys.map, "map")?,
        need(&sys.inverse, "inverse")?,
        sys.torus.unwrap_or(false),
    )?;
    let optional = |c: &Option<Vec<Vec<f64>>>| -> Result<Option<ConstantPlane>> {
        c.as_ref().map(|c| ConstantPlane::from_columns(d, c)).transpose().map_err(Into::into)
    };
    Ok(DynSystem {
        initial: plane(&sys.initial, d, "initial")?,
        invariant: optional(&sys.invariant)?,
        expanding: optional(&sys.expanding)?,
        spec,
    })
}

fn verdict_of(v: PdeVerdict) -> Option<Verdict> {
    match v {
        PdeVerdict::Holds => Some(Verdict::Holds),
        PdeVerdict::Fails => Some(Verdict::Fails),
        PdeVerdict::Inconclusive => Some(Verdict::Inconclusive),
        PdeVerdict::NotApplicable => None,
    }
}

fn single(name: &str, csv: Csv, verdict: Option<Verdict>) -> Outcome {
    Outcome {
        reports: vec![(name.to_string(), csv)],
        verdict,
    }
}

/// Runs a resolved configuration.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let kind = cfg.experiment.kind;
    run_kind(cfg).with_context(|| format!("{} failed", kind.name()))
}

fn run_kind(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (sys, par) = (&cfg.system, &cfg.params);
    let kind = cfg.experiment.kind;
    match kind {
        Kind::ModuliCheck => {
            let w1: Modulus = need(&sys.modulus, "modulus")?.parse()?;
            let report = match need(&par.criterion, "criterion")? {
                CriterionChoice::Osgood => {
                    let eps = need(&par.eps, "eps")?.first().copied().ok_or_else(|| anyhow!("empty `eps`"))?;
                    osgood_check(&w1, eps, *need(&par.depth, "depth")?)?
                }
                CriterionChoice::Limit => {
                    let w2: Modulus = match &sys.second_modulus {
                        Some(s) => s.parse()?,
                        None => w1.clone(),
                    };
                    limit_condition_check(&w1, &w2, &default_limit_grid(&w1, &w2))?
                }
            };
            let v = report.verdict;
            Ok(single(kind.name(), report.to_csv(), Some(v)))
        }
        Kind::MollifyVerify => {
            let names = names_or(sys, &["x"]);
            let f = parse_expr(need(&sys.function, "function")?, &names)?;
            let dom = region(sys, names.len(), -1.0, 1.0)?;
            let h = *need(&par.step, "step")?;
            let axes = (0..names.len())
                .map(|d| GridFunction::axis_covering(dom.lo[d], dom.hi[d], h))
                .collect();
            let grid = GridFunction::sample(axes, |x| f.eval(x))?;
            let w: Modulus = need(&sys.modulus, "modulus")?.parse()?;
            let per_axis = match &sys.moduli {
                Some(list) => parse_moduli(list)?,
                None => vec![w.clone(); names.len()],
            };
            let reports = verify_bounds(&grid, &w, &per_axis, need(&par.eps, "eps")?)?;
            Ok(single(kind.name(), reports_to_csv(&reports), None))
        }
        Kind::Frobenius => {
            let names = names_or(sys, &["x", "y", "z"]);
            let frame = FrameSection::parse(need(&sys.forms, "forms")?, &names)?;
            let dom = region(sys, names.len(), -1.0, 1.0)?;
            let proto = protocol(cfg);
            let points = dom.lattice(proto.lattice);
            let defects = frobenius_defect(&frame, &points);
            let m_a = involutivity_constant(&frame, &KernelField(&frame), &dom, &proto)?;
            let mut cols = names.clone();
            cols.push("defect".into());
            let mut csv = Csv::new(cols);
            let max = defects.iter().copied().fold(0.0, f64::max);
            let min = defects.iter().copied().fold(f64::INFINITY, f64::min);
            csv.meta("max_defect", fmt_f64(max));
            csv.meta("min_defect", fmt_f64(min));
            csv.meta("involutivity_constant", fmt_f64(m_a.value));
            csv.meta("protocol", &m_a.protocol);
            for (p, d) in points.iter().zip(&defects) {
                let mut row = p.clone();
                row.push(*d);
                csv.push_numbers(&row);
            }
            let v = if max <= 1e-10 { Verdict::Holds } else { Verdict::Fails };
            Ok(single(kind.name(), csv, Some(v)))
        }
        Kind::Surface => {
            let names = need(&sys.names, "names")?.clone();
            let dom = region(sys, names.len(), -1.0, 1.0)?;
            let d = Distribution::parse(names.clone(), *need(&sys.m, "m")?, need(&sys.matrix, "matrix")?, dom.clone())?;
            let x0 = sys.point.clone().unwrap_or_else(|| dom.center());
            let patch = build_surface(&d, &x0, *need(&par.eps1, "eps1")?, *need(&par.grid, "grid")?, &flow_config(cfg))?;
            let t = tangency_defect(&patch, &d, &protocol(cfg))?;
            let mut csv = patch.to_csv(Some(&d), &names);
            csv.meta("max_defect", fmt_f64(t.max_defect));
            csv.meta("rhs", fmt_f64(t.rhs));
            csv.meta("fd_tolerance", fmt_f64(t.fd_tolerance));
            csv.meta("max_violation", fmt_f64(t.max_violation));
            csv.meta("involutivity_constant", fmt_f64(t.m_a));
            csv.meta("protocol", &t.protocol);
            let v = if t.holds() { Verdict::Holds } else { Verdict::Fails };
            Ok(single(kind.name(), csv, Some(v)))
        }
        Kind::OdeCheck => {
            let spec = ode_spec(sys)?;
            let xi = sys.point.clone().unwrap_or_else(|| spec.domain().center());
            let cert = theorem1_check(&spec, &xi)?;
            let v = cert.verdict();
            Ok(single(kind.name(), cert.to_csv(spec.names()), Some(v)))
        }
        Kind::OdeFunnel => {
            let spec = ode_spec(sys)?;
            let xi = sys.point.clone().unwrap_or_else(|| spec.domain().center());
            let fc = FunnelConfig {
                horizon: *need(&par.horizon, "horizon")?,
                deltas: need(&par.deltas, "deltas")?.clone(),
                ensemble: *need(&par.ensemble, "ensemble")?,
                seed: cfg.experiment.seed,
                probes: vec![Probe::InitialCondition, Probe::FieldOffset],
                flow: flow_config(cfg),
            };
            let report = funnel(&spec, &xi, &fc)?;
            let v = match report.verdict {
                FunnelVerdict::UniqueLike => Verdict::Holds,
                FunnelVerdict::FunnelDetected => Verdict::Fails,
                FunnelVerdict::Inconclusive => Verdict::Inconclusive,
            };
            Ok(single(kind.name(), report.to_csv(), Some(v)))
        }
        Kind::PdeCheck => {
            let spec = pde_spec(sys)?;
            let xi = sys.point.clone().unwrap_or_else(|| spec.domain().center());
            let cols: Vec<usize> = match &sys.columns {
                Some(c) => c.iter().map(|&c| c.checked_sub(1).ok_or_else(|| anyhow!("columns are 1-based"))).collect::<Result<_>>()?,
                None => (0..spec.n()).collect(),
            };
            let cert = theorem2_check(&spec, &xi, &cols)?;
            let v = verdict_of(cert.verdict);
            Ok(single(kind.name(), cert.to_csv(), v))
        }
        Kind::PdeSolveSpecial => {
            let (sf, x, y) = special_form(sys)?;
            let (x_box, y_box) = split_boxes(sys, x.len(), y.len())?;
            let targets = x_box.lattice(*need(&par.grid, "grid")?);
            let sol = special_solve(&sf, need(&sys.x0, "x0")?, need(&sys.y0, "y0")?, &targets, &y_box)?;
            let v = if sol.max_residual() <= 1e-6 { Verdict::Holds } else { Verdict::Fails };
            Ok(single(kind.name(), sol.to_csv(&x, &y), Some(v)))
        }
        Kind::PdeFrames => {
            let (sf, x, y) = special_form(sys)?;
            let (x_box, y_box) = split_boxes(sys, x.len(), y.len())?;
            let setup = OracleSetup {
                x0: need(&sys.x0, "x0")?.clone(),
                y0: need(&sys.y0, "y0")?.clone(),
                eps1: *need(&par.eps1, "eps1")?,
                grid: *need(&par.grid, "grid")?,
                x_box,
                y_box,
                eps_list: need(&par.eps, "eps")?.clone(),
                flow: flow_config(cfg),
            };
            let names = [x, y].concat();
            let report = special_form_oracle(&sf, &names, &setup)?;
            let v = match report.convergence.verdict {
                ConvergenceVerdict::Converged => Verdict::Holds,
                ConvergenceVerdict::NotConverged => Verdict::Fails,
                ConvergenceVerdict::Inconclusive => Verdict::Inconclusive,
            };
            Ok(single(kind.name(), report.to_csv(), Some(v)))
        }
        Kind::DynTransport => {
            let ds = dyn_system(sys)?;
            let d = ds.spec.dim();
            let points = region(sys, d, 0.0, 1.0)?.lattice(*need(&par.lattice, "lattice")?);
            let k = *need(&par.k_max, "k_max")?;
            let expanding = ds.expanding.as_ref().map(|p| p as &dyn PlaneField);
            let tr = transport(&ds.spec, &ds.initial, k, &points, expanding)?;
            let steps = tr.step_angles();
            let mut csv = Csv::new(["k", "step_angle", "invariant_angle"]);
            for (j, bases) in tr.bases.iter().enumerate() {
                let to_invariant = match &ds.invariant {
                    Some(inv) => bases
                        .iter()
                        .zip(&tr.points)
                        .map(|(b, p)| Ok(subspace_angle(b, &inv.basis_at(p)?)))
                        .collect::<Result<Vec<f64>>>()?
                        .into_iter()
                        .fold(0.0, f64::max),
                    None => f64::NAN,
                };
                let step = if j == 0 { f64::NAN } else { steps[j - 1] };
                csv.push_numbers(&[j as f64, step, to_invariant]);
            }
            Ok(single(kind.name(), csv, None))
        }
        Kind::DynDominate => {
            let ds = dyn_system(sys)?;
            let d = ds.spec.dim();
            let points = region(sys, d, 0.0, 1.0)?.lattice(*need(&par.lattice, "lattice")?);
            let expanding = ds.expanding.as_ref().ok_or_else(|| anyhow!("missing `expanding`"))?;
            let measured: &dyn PlaneField = match &ds.invariant {
                Some(inv) => inv,
                None => &ds.initial,
            };
            let setup = SplittingSetup {
                initial: measured,
                expanding,
                limit: ds.invariant.as_ref().map(|p| p as &dyn PlaneField),
                transverse: need(&sys.transverse, "transverse")?.clone(),
                k_max: *need(&par.k_max, "k_max")?,
                eps_list: need(&par.eps, "eps")?.clone(),
            };
            let report = domination_report(&ds.spec, &setup, &points)?;
            let v = if report.dominated { Verdict::Holds } else { Verdict::Fails };
            Ok(single(kind.name(), report.to_csv(), Some(v)))
        }
        Kind::DynTraces => {
            let ds = dyn_system(sys)?;
            let names = need(&sys.names, "names")?;
            let d = ds.spec.dim();
            let dom = region(sys, d, 0.0, 1.0)?;
            let expanding = ds.expanding.as_ref().ok_or_else(|| anyhow!("missing `expanding`"))?;
            let invariant = ds.invariant.as_ref().ok_or_else(|| anyhow!("missing `invariant`"))?;
            let transverse = need(&sys.transverse, "transverse")?.clone();
            let coframe = |rows: &[String]| -> Result<FrameSection> {
                Ok(FrameSection::parse(rows, names)?.with_transverse(transverse.clone())?)
            };
            let c0 = coframe(need(&sys.coframe, "coframe")?)?;
            let limit_frame = sys.limit_coframe.as_deref().map(coframe).transpose()?;
            let eps_list = need(&par.eps, "eps")?.clone();
            let setup = SplittingSetup {
                initial: &ds.initial,
                expanding,
                limit: Some(invariant),
                transverse,
                k_max: *need(&par.k_max, "k_max")?,
                eps_list: eps_list.clone(),
            };
            let proto = protocol(cfg);
            let mut reports = Vec::new();
            let mut decaying = true;
            for &eps in &eps_list {
                let r = splitting_involutivity_pipeline(&ds.spec, &setup, &c0, limit_frame.as_ref(), eps, &dom, &proto)?;
                let e = r.domination.eps_list.iter().position(|v| *v == eps).unwrap_or(0);
                for trace in [&r.domination.involutivity_bound[e], &r.domination.regularity_bound[e]] {
                    let (first, last) = (trace[0], trace[trace.len() - 1]);
                    decaying &= last <= first / 10.0;
                }
                decaying &= r.status == PipelineStatus::Applicable;
                reports.push((format!("{}-eps{}", kind.name(), fmt_f64(eps)), r.to_csv()));
            }
            let v = if decaying { Verdict::Holds } else { Verdict::Fails };
            Ok(Outcome {
                reports,
                verdict: Some(v),
            })
        }
    }
}
