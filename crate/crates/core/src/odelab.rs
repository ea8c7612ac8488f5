//! ODE uniqueness via the extended field `F̃ = ∂_t + Σ Fⁱ ∂_{yⁱ}`:
//! criterion certificates and perturbation-funnel experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, VectorField};
use crate::geometry::BoxDomain;
use crate::moduli::{
    default_limit_grid, estimate_modulus, limit_condition_check, CriterionReport, Modulus, Verdict,
};
use crate::numeric::fit_line;
use crate::report::{fmt_f64, Csv};
use crate::surface::{flow, FlowConfig};

/// Components with `|F̃ⁱ(ξ)|` at or below this count as zero.
pub const NONZERO_THRESHOLD: f64 = 1e-9;

/// `dyⁱ/dt = Fⁱ(t, y)` on a box over `(t, y¹..yⁿ)`.
#[derive(Clone, Debug)]
pub struct OdeSpec {
    names: Vec<String>,
    rhs: Vec<Expr>,
    domain: BoxDomain,
    /// Modulus of `F` with respect to each of `t, y¹, …, yⁿ`.
    moduli: Vec<Modulus>,
    overall: Option<Modulus>,
}

impl OdeSpec {
    /// `names[0]` is time; `rhs` has one component per remaining name.
    pub fn new(names: Vec<String>, rhs: Vec<Expr>, domain: BoxDomain) -> Result<OdeSpec> {
        if names.len() != rhs.len() + 1 || rhs.is_empty() {
            return Err(Error::Shape(format!(
                "{} names for {} right-hand sides",
                names.len(),
                rhs.len()
            )));
        }
        if domain.dim() != names.len() {
            return Err(Error::Shape("domain dimension differs from the variable count".into()));
        }
        let spec = OdeSpec {
            names,
            rhs,
            domain,
            moduli: Vec::new(),
            overall: None,
        };
        spec.check_continuity()?;
        Ok(spec)
    }

    pub fn parse(names: Vec<String>, rhs: &[String], domain: BoxDomain) -> Result<OdeSpec> {
        let exprs = rhs
            .iter()
            .map(|s| parse_expr(s, &names))
            .collect::<Result<Vec<_>>>()?;
        OdeSpec::new(names, exprs, domain)
    }

    fn check_continuity(&self) -> Result<()> {
        for p in self.domain.lattice(5) {
            for e in &self.rhs {
                e.try_eval(&p)?;
            }
        }
        Ok(())
    }

    pub fn with_moduli(mut self, per_variable: Vec<Modulus>, overall: Option<Modulus>) -> Result<OdeSpec> {
        if per_variable.len() != self.names.len() {
            return Err(Error::Shape(format!(
                "{} moduli for {} variables",
                per_variable.len(),
                self.names.len()
            )));
        }
        self.moduli = per_variable;
        self.overall = overall;
        Ok(self)
    }

    /// Replaces the per-variable moduli by empirical ones from a
    /// `per_axis`-point lattice of the domain.
    pub fn with_estimated_moduli(self, per_axis: usize) -> Result<OdeSpec> {
        let (pts, vals) = self.samples(per_axis);
        let est = (0..self.names.len())
            .map(|j| estimate_modulus(&pts, &vals, &[j], 16))
            .collect::<Result<Vec<_>>>()?;
        self.with_moduli(est, None)
    }

    fn samples(&self, per_axis: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let pts = self.domain.lattice(per_axis);
        let vals = pts
            .iter()
            .map(|p| self.rhs.iter().map(|e| e.eval(p)).collect())
            .collect();
        (pts, vals)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    /// The declared overall modulus, or the max of the per-variable ones.
    pub fn overall_modulus(&self) -> Result<Modulus> {
        if let Some(w) = &self.overall {
            return Ok(w.clone());
        }
        combined(self.moduli.iter()).ok_or_else(|| Error::InsufficientData("no moduli declared".into()))
    }
}

fn combined<'a>(mut it: impl Iterator<Item = &'a Modulus>) -> Option<Modulus> {
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, w| Modulus::max(acc, w.clone())))
}

/// `F̃ = (1, F¹, …, Fⁿ)`.
pub fn extend(spec: &OdeSpec) -> VectorField {
    let mut comps = vec![Expr::one()];
    comps.extend(spec.rhs.iter().cloned());
    VectorField::new(comps)
}

/// Outcome of the uniqueness criterion at one point.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub point: Vec<f64>,
    /// Chosen transverse coordinate (0-based index into `(t, y)`).
    pub index: usize,
    pub value: f64,
    pub w1: Modulus,
    pub w2: Modulus,
    pub report: CriterionReport,
    /// Every candidate tried, in order, with its verdict.
    pub attempts: Vec<(usize, Verdict)>,
}

impl Certificate {
    pub fn verdict(&self) -> Verdict {
        self.report.verdict
    }

    pub fn to_csv(&self, names: &[String]) -> Csv {
        let mut csv = self.report.to_csv();
        csv.meta("point", format!("{:?}", self.point));
        csv.meta("component", &names[self.index]);
        csv.meta("component_value", fmt_f64(self.value));
        let tried: Vec<String> = self
            .attempts
            .iter()
            .map(|(i, v)| format!("{}:{v}", names[*i]))
            .collect();
        csv.meta("attempts", tried.join(" "));
        csv
    }
}

/// Runs the limit condition for each nonvanishing component of `F̃(ξ)`
/// in order of decreasing magnitude and keeps the first that holds
/// (otherwise the largest).
pub fn theorem1_check(spec: &OdeSpec, xi: &[f64]) -> Result<Certificate> {
    if xi.len() != spec.names.len() {
        return Err(Error::Shape("point dimension differs from the variable count".into()));
    }
    if !spec.domain.contains(xi) {
        return Err(Error::Domain(format!("{xi:?} lies outside the domain")));
    }
    let w1 = spec.overall_modulus()?;
    let values = extend(spec).eval(xi);
    let mut candidates: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].abs() > NONZERO_THRESHOLD)
        .collect();
    candidates.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    // the time component is identically 1, so the list is never empty
    let mut attempts = Vec::new();
    let mut best: Option<Certificate> = None;
    for &i in &candidates {
        let w2 = match combined(spec.moduli.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w)) {
            Some(w) => w,
            None => w1.clone(),
        };
        let report = limit_condition_check(&w1, &w2, &default_limit_grid(&w1, &w2))?;
        attempts.push((i, report.verdict));
        let holds = report.verdict == Verdict::Holds;
        let cert = Certificate {
            point: xi.to_vec(),
            index: i,
            value: values[i],
            w1: w1.clone(),
            w2,
            report,
            attempts: Vec::new(),
        };
        if best.is_none() || holds {
            best = Some(cert);
        }
        if holds {
            break;
        }
    }
    let mut cert = best.expect("time component is always a candidate");
    cert.attempts = attempts;
    Ok(cert)
}

/// Spot check of one declared modulus against the sampled field.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulusCheck {
    pub variable: usize,
    /// Largest `empirical / declared` over the sampled scales.
    pub worst_ratio: f64,
    pub ok: bool,
}

/// Compares declared per-variable moduli to empirical ones on a
/// `per_axis`-point lattice; a declared modulus passes when the empirical
/// one exceeds it by at most a factor 2 at every sampled scale.
pub fn validate_moduli(spec: &OdeSpec, per_axis: usize) -> Result<Vec<ModulusCheck>> {
    if spec.moduli.is_empty() {
        return Err(Error::InsufficientData("no moduli declared".into()));
    }
    let (pts, vals) = spec.samples(per_axis);
    let mut out = Vec::new();
    for (j, declared) in spec.moduli.iter().enumerate() {
        let emp = estimate_modulus(&pts, &vals, &[j], 16)?;
        let crate::moduli::ModulusKind::Tabulated(table) = emp.kind() else {
            unreachable!("estimates are tabulated")
        };
        let mut worst = 0.0f64;
        for &(s, w) in table {
            if s > declared.domain_cap() {
                continue;
            }
            let d = declared.eval(s)?;
            let r = if d > 0.0 {
                w / d
            } else if w > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(r);
        }
        out.push(ModulusCheck {
            variable: j,
            worst_ratio: worst,
            ok: worst <= 2.0,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Probe {
    InitialCondition,
    FieldOffset,
}

impl Probe {
    pub fn name(self) -> &'static str {
        match self {
            Probe::InitialCondition => "initial-condition",
            Probe::FieldOffset => "field-offset",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FunnelVerdict {
    UniqueLike,
    FunnelDetected,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunnelConfig {
    pub horizon: f64,
    /// Strictly descending perturbation sizes.
    pub deltas: Vec<f64>,
    /// Random directions per δ; each is used with both signs.
    pub ensemble: usize,
    pub seed: u64,
    pub probes: Vec<Probe>,
    pub flow: FlowConfig,
}

impl Default for FunnelConfig {
    fn default() -> Self {
        FunnelConfig {
            horizon: 1.0,
            deltas: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            ensemble: 8,
            seed: 0,
            probes: vec![Probe::InitialCondition, Probe::FieldOffset],
            flow: FlowConfig::default(),
        }
    }
}

/// Fitted exponent at or above which dispersion counts as linear in δ.
pub const LINEAR_EXPONENT: f64 = 0.9;
/// A plateau must exceed this multiple of the smallest δ.
pub const PLATEAU_FACTOR: f64 = 1e3;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeTrace {
    pub probe: Probe,
    /// Max pairwise terminal distance per δ, the unperturbed run included.
    pub dispersion: Vec<f64>,
    pub escapes: Vec<usize>,
    /// Slope of `ln dispersion` against `ln δ`.
    pub exponent: f64,
    /// `dispersion(δ_min)/δ_min`, the linear-response scale.
    pub linear_floor: f64,
    pub verdict: FunnelVerdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunnelReport {
    pub basepoint: Vec<f64>,
    pub horizon: f64,
    pub deltas: Vec<f64>,
    pub ensemble: usize,
    pub seed: u64,
    pub probes: Vec<ProbeTrace>,
    pub verdict: FunnelVerdict,
}

impl FunnelReport {
    pub fn probe(&self, p: Probe) -> Option<&ProbeTrace> {
        self.probes.iter().find(|t| t.probe == p)
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(["probe", "delta", "dispersion", "escapes"]);
        csv.meta("basepoint", format!("{:?}", self.basepoint));
        csv.meta("horizon", fmt_f64(self.horizon));
        csv.meta("ensemble", self.ensemble);
        csv.meta("seed", self.seed);
        csv.meta("verdict", format!("{:?}", self.verdict));
        for t in &self.probes {
            csv.meta(
                format!("{}_exponent", t.probe.name()),
                fmt_f64(t.exponent),
            );
            csv.meta(format!("{}_verdict", t.probe.name()), format!("{:?}", t.verdict));
            for (k, d) in self.deltas.iter().enumerate() {
                csv.push_row(vec![
                    t.probe.name().into(),
                    fmt_f64(*d),
                    fmt_f64(t.dispersion[k]),
                    t.escapes[k].to_string(),
                ]);
            }
        }
        csv
    }
}

fn unit_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

fn max_pairwise(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.max(d);
        }
    }
    best
}

fn classify(deltas: &[f64], dispersion: &[f64]) -> (f64, f64, FunnelVerdict) {
    let d_min = *deltas.last().unwrap();
    let disp_min = *dispersion.last().unwrap();
    let floor = disp_min / d_min;
    let usable: Vec<(f64, f64)> = deltas
        .iter()
        .zip(dispersion)
        .filter(|(_, d)| **d > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if usable.len() < 2 {
        // no spread at all: every probe reproduced the reference trajectory
        return (f64::NAN, floor, FunnelVerdict::UniqueLike);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    let exponent = fit_line(&xs, &ys).slope;
    let verdict = if exponent >= LINEAR_EXPONENT {
        FunnelVerdict::UniqueLike
    } else if disp_min > PLATEAU_FACTOR * d_min {
        FunnelVerdict::FunnelDetected
    } else {
        FunnelVerdict::Inconclusive
    };
    (exponent, floor, verdict)
}

/// Terminal spread of perturbed trajectories through `ξ₀` as δ shrinks.
///
/// The initial-condition probe starts at `ξ₀ + δ(0, ±u)`; the field-offset
/// probe integrates `F ± δu` from `ξ₀`, with `u` random unit vectors.
pub fn funnel(spec: &OdeSpec, xi0: &[f64], cfg: &FunnelConfig) -> Result<FunnelReport> {
    if cfg.deltas.len() < 2 || cfg.deltas.windows(2).any(|w| !(w[1] < w[0])) || cfg.deltas[cfg.deltas.len() - 1] <= 0.0 {
        return Err(Error::Domain("δ list must be positive, strictly descending, ≥ 2 entries".into()));
    }
    if cfg.ensemble == 0 || cfg.probes.is_empty() {
        return Err(Error::Domain("ensemble and probe list must be nonempty".into()));
    }
    let n = spec.rhs.len();
    let field = extend(spec);
    let domain = Some(&spec.domain);
    let reference = flow(&field, xi0, cfg.horizon, &cfg.flow, domain)?;
    let dirs = unit_directions(n, cfg.ensemble, cfg.seed);
    let mut probes = Vec::new();
    for &probe in &cfg.probes {
        let mut dispersion = Vec::new();
        let mut escapes = Vec::new();
        for &delta in &cfg.deltas {
            let runs: Vec<Result<Vec<f64>>> = dirs
                .par_iter()
                .flat_map_iter(|u| [1.0, -1.0].map(|sign| (u, sign)))
                .map(|(u, sign)| match probe {
                    Probe::InitialCondition => {
                        let mut start = xi0.to_vec();
                        for (k, c) in u.iter().enumerate() {
                            start[k + 1] += sign * delta * c;
                        }
                        flow(&field, &start, cfg.horizon, &cfg.flow, domain)
                    }
                    Probe::FieldOffset => {
                        let mut comps = field.components().to_vec();
                        for (k, c) in u.iter().enumerate() {
                            comps[k + 1] = comps[k + 1].clone() + Expr::c(sign * delta * c);
                        }
                        flow(&VectorField::new(comps), xi0, cfg.horizon, &cfg.flow, domain)
                    }
                })
                .collect();
            let mut ends = vec![reference.clone()];
            let mut escaped = 0;
            for r in runs {
                match r {
                    Ok(p) => ends.push(p),
                    Err(Error::Escape { .. }) | Err(Error::NonFinite { .. }) => escaped += 1,
                    Err(e) => return Err(e),
                }
            }
            dispersion.push(max_pairwise(&ends));
            escapes.push(escaped);
        }
        let (exponent, linear_floor, verdict) = classify(&cfg.deltas, &dispersion);
        probes.push(ProbeTrace {
            probe,
            dispersion,
            escapes,
            exponent,
            linear_floor,
            verdict,
        });
    }
    let verdict = if probes.iter().any(|p| p.verdict == FunnelVerdict::FunnelDetected) {
        FunnelVerdict::FunnelDetected
    } else if probes.iter().all(|p| p.verdict == FunnelVerdict::UniqueLike) {
        FunnelVerdict::UniqueLike
    } else {
        FunnelVerdict::Inconclusive
    };
    Ok(FunnelReport {
        basepoint: xi0.to_vec(),
        horizon: cfg.horizon,
        deltas: cfg.deltas.clone(),
        ensemble: cfg.ensemble,
        seed: cfg.seed,
        probes,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn peano() -> OdeSpec {
        let w = Modulus::hoelder(2.0 / 3.0, 1.0).unwrap();
        OdeSpec::parse(
            names(&["t", "y"]),
            &["abs(y)^(2/3)".into()],
            BoxDomain::new(vec![-0.5, -2.0], vec![2.0, 2.0]).unwrap(),
        )
        .unwrap()
        .with_moduli(vec![Modulus::lipschitz(1.0).unwrap(), w.clone()], Some(w))
        .unwrap()
    }

    #[test]
    fn extension_prepends_unit_time_component() {
        let spec = OdeSpec::parse(names(&["t", "y"]), &["y".into()], BoxDomain::cube(2, -1.0, 1.0)).unwrap();
        let f = extend(&spec);
        assert_eq!(f.components()[0], Expr::one());
        assert_eq!(f.eval(&[0.3, 0.7]), vec![1.0, 0.7]);
    }

    #[test]
    fn peano_fails_the_criterion_and_shows_a_funnel() {
        let spec = peano();
        let cert = theorem1_check(&spec, &[0.0, 0.0]).unwrap();
        assert_eq!(cert.index, 0);
        assert_eq!(cert.verdict(), Verdict::Fails);
        let cfg = FunnelConfig {
            ensemble: 2,
            probes: vec![Probe::FieldOffset],
            ..FunnelConfig::default()
        };
        let rep = funnel(&spec, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(rep.verdict, FunnelVerdict::FunnelDetected);
        let plateau = *rep.probes[0].dispersion.last().unwrap();
        assert!((plateau / (1.0f64 / 27.0) - 1.0).abs() < 0.05, "{plateau}");
    }

    #[test]
    fn contraction_is_unique_like() {
        let spec = OdeSpec::parse(names(&["t", "y"]), &["-y".into()], BoxDomain::new(vec![-1.0, -2.0], vec![2.0, 2.0]).unwrap()).unwrap();
        let rep = funnel(&spec, &[0.0, 1.0], &FunnelConfig::default()).unwrap();
        assert_eq!(rep.verdict, FunnelVerdict::UniqueLike);
        for p in &rep.probes {
            assert!((p.exponent - 1.0).abs() < 1e-3);
        }
        let again = funnel(&spec, &[0.0, 1.0], &FunnelConfig::default()).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn lipschitz_field_holds() {
        let l = Modulus::lipschitz(1.0).unwrap();
        let spec = OdeSpec::parse(names(&["t", "y"]), &["sin(y)".into()], BoxDomain::cube(2, -1.0, 1.0))
            .unwrap()
            .with_moduli(vec![l.clone(), l], None)
            .unwrap();
        let cert = theorem1_check(&spec, &[0.0, 0.5]).unwrap();
        assert_eq!(cert.verdict(), Verdict::Holds);
        let checks = validate_moduli(&spec, 11).unwrap();
        assert!(checks.iter().all(|c| c.ok), "{checks:?}");
    }
}
