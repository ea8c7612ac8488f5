//! Plane fields transported by a diffeomorphism, domination and
//! linear-growth diagnostics, and pulled-back orthonormal frames feeding
//! the involutivity and regularity traces.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, VectorField};
use crate::geometry::{
    asymptotic_involutivity_trace, compatibility_norm, exterior_regularity_trace, BoxDomain, Form,
    FrameSection, PlaneField, SupProtocol, TraceEntry,
};
use crate::linalg::{orthonormalize, sigma_min, spectral_norm, subspace_angle};
use crate::numeric::fit_line;
use crate::report::{fmt_f64, Csv};

/// Minimal angle (radians) accepted between `E⁰` and the expanding field.
pub const CONE_ANGLE: f64 = 1e-3;

/// A diffeomorphism of `ℝ^d`, or of the torus `ℝ^d/ℤ^d` when `torus` is
/// set (the expressions then describe a lift).
#[derive(Clone, Debug)]
pub struct DiffeoSpec {
    names: Vec<String>,
    map: VectorField,
    inverse: VectorField,
    torus: bool,
}

impl DiffeoSpec {
    pub fn new(names: Vec<String>, map: Vec<Expr>, inverse: Vec<Expr>, torus: bool) -> Result<DiffeoSpec> {
        let d = names.len();
        if map.len() != d || inverse.len() != d {
            return Err(Error::Shape(format!("map and inverse need {d} components")));
        }
        let spec = DiffeoSpec {
            names,
            map: VectorField::new(map),
            inverse: VectorField::new(inverse),
            torus,
        };
        spec.check_inverse()?;
        Ok(spec)
    }

    pub fn parse(names: Vec<String>, map: &[String], inverse: &[String], torus: bool) -> Result<DiffeoSpec> {
        let p = |v: &[String]| v.iter().map(|s| parse_expr(s, &names)).collect::<Result<Vec<_>>>();
        let (m, i) = (p(map)?, p(inverse)?);
        DiffeoSpec::new(names, m, i, torus)
    }

    fn check_inverse(&self) -> Result<()> {
        let d = self.dim();
        let lattice = BoxDomain::cube(d, 0.05, 0.95).lattice(5);
        for p in &lattice {
            let q = self.apply(&self.inverse.eval(p));
            let gap = p.iter().zip(&q).map(|(a, b)| self.coordinate_gap(*a, *b)).fold(0.0, f64::max);
            if !(gap <= 1e-8) {
                return Err(Error::Invalid(format!("map ∘ inverse differs from the identity by {gap:e} at {p:?}")));
            }
            let j = DMatrix::from_row_slice(d, d, &self.map.jacobian_at(p));
            if !(sigma_min(&j) > 1e-12) {
                return Err(Error::Degenerate(format!("singular jacobian at {p:?}")));
            }
        }
        Ok(())
    }

    fn coordinate_gap(&self, a: f64, b: f64) -> f64 {
        let g = (a - b).abs();
        if self.torus {
            let f = g.rem_euclid(1.0);
            f.min(1.0 - f)
        } else {
            g
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn is_torus(&self) -> bool {
        self.torus
    }

    pub fn map(&self) -> &VectorField {
        &self.map
    }

    pub fn inverse(&self) -> &VectorField {
        &self.inverse
    }

    /// `φ(p)`, reduced to `[0,1)^d` on the torus.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut q = self.map.eval(p);
        if self.torus {
            q.iter_mut().for_each(|v| *v = v.rem_euclid(1.0));
        }
        q
    }

    pub fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.map.jacobian_at(p))
    }

    /// `p, φ(p), …, φ^k(p)`.
    pub fn orbit(&self, p: &[f64], k: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(k + 1);
        out.push(p.to_vec());
        for j in 0..k {
            let next = self.apply(&out[j]);
            out.push(next);
        }
        out
    }

    /// `Dφ^k_p · basis` along the orbit.
    pub fn push(&self, orbit: &[Vec<f64>], k: usize, basis: &DMatrix<f64>) -> DMatrix<f64> {
        orbit[..k].iter().fold(basis.clone(), |acc, q| self.jacobian(q) * acc)
    }

    /// Components of the lift of `φ^k` by repeated substitution.
    pub fn iterate_symbolic(&self, k: usize) -> Vec<Expr> {
        let mut comps: Vec<Expr> = (0..self.dim()).map(Expr::var).collect();
        for _ in 0..k {
            comps = self.map.components().iter().map(|c| c.substitute(&comps)).collect();
        }
        comps
    }
}

/// A plane field with the same basis everywhere.
#[derive(Clone, Debug)]
pub struct ConstantPlane(DMatrix<f64>);

impl ConstantPlane {
    pub fn new(basis: DMatrix<f64>) -> Result<ConstantPlane> {
        Ok(ConstantPlane(orthonormalize(&basis)?))
    }

    pub fn from_columns(dim: usize, columns: &[Vec<f64>]) -> Result<ConstantPlane> {
        if columns.iter().any(|c| c.len() != dim) || columns.is_empty() {
            return Err(Error::Shape("basis vectors must match the dimension".into()));
        }
        ConstantPlane::new(DMatrix::from_fn(dim, columns.len(), |r, c| columns[c][r]))
    }
}

impl PlaneField for ConstantPlane {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn rank(&self) -> usize {
        self.0.ncols()
    }

    fn basis_at(&self, _p: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.0.clone())
    }
}

/// `E^k_p = Dφ^{-k}_{φ^k p} E⁰_{φ^k p}`, re-orthonormalized after every
/// inverse step.
pub struct TransportedField<'a> {
    pub spec: &'a DiffeoSpec,
    pub initial: &'a dyn PlaneField,
    pub k: usize,
}

fn pull_back(spec: &DiffeoSpec, orbit: &[Vec<f64>], k: usize, top: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut b = orthonormalize(&top)?;
    for q in orbit[..k].iter().rev() {
        let j = spec.jacobian(q);
        let inv = j
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate(format!("singular jacobian at {q:?}")))?;
        b = orthonormalize(&(inv * b))?;
    }
    Ok(b)
}

impl PlaneField for TransportedField<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn rank(&self) -> usize {
        self.initial.rank()
    }

    fn basis_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let orbit = self.spec.orbit(p, self.k);
        pull_back(self.spec, &orbit, self.k, self.initial.basis_at(&orbit[self.k])?)
    }
}

fn transversality_angle(e: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<f64> {
    let mut joined = DMatrix::zeros(e.nrows(), e.ncols() + f.ncols());
    joined.columns_mut(0, e.ncols()).copy_from(&orthonormalize(e)?);
    joined.columns_mut(e.ncols(), f.ncols()).copy_from(&orthonormalize(f)?);
    let s = sigma_min(&joined);
    Ok(2.0 * (s / 2f64.sqrt()).min(1.0).asin())
}

/// Transported plane fields at lattice points.
#[derive(Clone, Debug)]
pub struct Transport {
    pub points: Vec<Vec<f64>>,
    /// `bases[j][i]`: orthonormal basis of `E^j` at `points[i]`, `j = 0..=k`.
    pub bases: Vec<Vec<DMatrix<f64>>>,
}

impl Transport {
    /// Largest angle between `E^j` and `E^{j+1}` over the points.
    pub fn step_angles(&self) -> Vec<f64> {
        self.bases
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| subspace_angle(a, b))
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// `E^j` for `j = 0..=k` at each point. With `expanding` given, `E⁰` must
/// stay at angle above [`CONE_ANGLE`] from it along every orbit.
pub fn transport(
    spec: &DiffeoSpec,
    initial: &dyn PlaneField,
    k: usize,
    points: &[Vec<f64>],
    expanding: Option<&dyn PlaneField>,
) -> Result<Transport> {
    if initial.dim() != spec.dim() {
        return Err(Error::Shape("plane field and map dimensions differ".into()));
    }
    let per_point: Vec<Vec<DMatrix<f64>>> = points
        .par_iter()
        .map(|p| {
            let orbit = spec.orbit(p, k);
            if let Some(f) = expanding {
                for q in &orbit {
                    let angle = transversality_angle(&initial.basis_at(q)?, &f.basis_at(q)?)?;
                    if angle <= CONE_ANGLE {
                        return Err(Error::Cone { point: q.clone(), angle });
                    }
                }
            }
            (0..=k)
                .map(|j| pull_back(spec, &orbit, j, initial.basis_at(&orbit[j])?))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let bases = (0..=k)
        .map(|j| per_point.iter().map(|v| v[j].clone()).collect())
        .collect();
    Ok(Transport {
        points: points.to_vec(),
        bases,
    })
}

/// Per-iterate domination and growth diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SplittingReport {
    pub ks: Vec<usize>,
    /// `sup_p ‖Dφ^k_p|_{E^k_p}‖`.
    pub norm_e: Vec<f64>,
    /// `inf_p m(Dφ^k_p|_{F_p})`.
    pub conorm_f: Vec<f64>,
    /// `sup_p ‖Dφ^k_p|_{E_p}‖` for the limit field (`E^{k_max}` if none given).
    pub norm_limit: Vec<f64>,
    /// `sup_p ∠(E^k, E^{k+1})`.
    pub step_angle: Vec<f64>,
    /// `inf |Dφ^k v| / m(Dφ^k|_F)` over unit `v` in the transverse coordinates.
    pub transverse_ratio: Vec<f64>,
    /// Least-squares `norm_e ≈ C·k + D`.
    pub growth_slope: f64,
    pub growth_intercept: f64,
    pub growth_residual: f64,
    pub eps_list: Vec<f64>,
    /// `q[e][k] = N_k²/m_k · e^{ε N_k}`.
    pub involutivity_bound: Vec<Vec<f64>>,
    /// `2·max(N_k, N^E_k)/m_k · e^{ε N_k}`.
    pub regularity_bound: Vec<Vec<f64>>,
    /// `sup ‖Dφ|_E‖ < inf m(Dφ|_F)` at `k = 1`.
    pub dominated: bool,
}

impl SplittingReport {
    pub fn to_csv(&self) -> Csv {
        let mut cols = vec![
            "k".to_string(),
            "norm_e".into(),
            "conorm_f".into(),
            "norm_limit".into(),
            "step_angle".into(),
            "transverse_ratio".into(),
        ];
        for e in &self.eps_list {
            cols.push(format!("q_eps{}", fmt_f64(*e)));
            cols.push(format!("reg_eps{}", fmt_f64(*e)));
        }
        let mut csv = Csv::new(cols);
        csv.meta("dominated", self.dominated);
        csv.meta("growth_slope", fmt_f64(self.growth_slope));
        csv.meta("growth_intercept", fmt_f64(self.growth_intercept));
        csv.meta("growth_residual", fmt_f64(self.growth_residual));
        for (i, k) in self.ks.iter().enumerate() {
            let mut row = vec![
                *k as f64,
                self.norm_e[i],
                self.conorm_f[i],
                self.norm_limit[i],
                self.step_angle[i],
                self.transverse_ratio[i],
            ];
            for e in 0..self.eps_list.len() {
                row.push(self.involutivity_bound[e][i]);
                row.push(self.regularity_bound[e][i]);
            }
            csv.push_numbers(&row);
        }
        csv
    }

    /// `(q_{k+1}/q_k)` for the given ε index.
    pub fn involutivity_ratios(&self, e: usize) -> Vec<f64> {
        self.involutivity_bound[e].windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Inputs of [`domination_report`] besides the map.
pub struct SplittingSetup<'a> {
    pub initial: &'a dyn PlaneField,
    pub expanding: &'a dyn PlaneField,
    /// Limit bundle `E`, if known.
    pub limit: Option<&'a dyn PlaneField>,
    /// Coordinates spanning the transverse subspace `𝒴`.
    pub transverse: Vec<usize>,
    pub k_max: usize,
    pub eps_list: Vec<f64>,
}

/// Norms, conorms and the bound quantities for `k = 1..=k_max`.
pub fn domination_report(spec: &DiffeoSpec, setup: &SplittingSetup<'_>, points: &[Vec<f64>]) -> Result<SplittingReport> {
    let d = spec.dim();
    if setup.k_max < 2 {
        return Err(Error::Domain("k_max must be at least 2".into()));
    }
    if setup.initial.rank() + setup.expanding.rank() != d {
        return Err(Error::Degenerate("E and F must have complementary ranks".into()));
    }
    if setup.transverse.len() != setup.expanding.rank() || setup.transverse.iter().any(|&c| c >= d) {
        return Err(Error::Shape("transverse coordinates must match the rank of F".into()));
    }
    let k_max = setup.k_max;
    let tr = transport(spec, setup.initial, k_max + 1, points, None)?;
    let y_basis = DMatrix::from_fn(d, setup.transverse.len(), |r, c| if setup.transverse[c] == r { 1.0 } else { 0.0 });
    // per point, per k: (N, m, N_limit, transverse ratio)
    let rows: Vec<Vec<(f64, f64, f64, f64)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let orbit = spec.orbit(p, k_max);
            let f = orthonormalize(&setup.expanding.basis_at(p)?)?;
            let lim = match setup.limit {
                Some(l) => orthonormalize(&l.basis_at(p)?)?,
                None => tr.bases[k_max][i].clone(),
            };
            (1..=k_max)
                .map(|k| {
                    let n = spectral_norm(&spec.push(&orbit, k, &tr.bases[k][i]));
                    let m = sigma_min(&spec.push(&orbit, k, &f));
                    let nl = spectral_norm(&spec.push(&orbit, k, &lim));
                    let ratio = sigma_min(&spec.push(&orbit, k, &y_basis)) / m;
                    Ok((n, m, nl, ratio))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |k: usize, pick: fn(&(f64, f64, f64, f64)) -> f64, sup: bool| -> f64 {
        let it = rows.iter().map(|r| pick(&r[k]));
        if sup {
            it.fold(f64::NEG_INFINITY, f64::max)
        } else {
            it.fold(f64::INFINITY, f64::min)
        }
    };
    let norm_e: Vec<f64> = (0..k_max).map(|k| col(k, |t| t.0, true)).collect();
    let conorm_f: Vec<f64> = (0..k_max).map(|k| col(k, |t| t.1, false)).collect();
    let norm_limit: Vec<f64> = (0..k_max).map(|k| col(k, |t| t.2, true)).collect();
    let transverse_ratio: Vec<f64> = (0..k_max).map(|k| col(k, |t| t.3, false)).collect();
    let step_angle = tr.step_angles()[1..=k_max].to_vec();
    let ks: Vec<usize> = (1..=k_max).collect();
    let kx: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let fit = fit_line(&kx, &norm_e);
    let bound = |e: f64, num: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..k_max).map(|k| num(k) / conorm_f[k] * (e * norm_e[k]).exp()).collect()
    };
    let involutivity_bound = setup.eps_list.iter().map(|&e| bound(e, &|k| norm_e[k] * norm_e[k])).collect();
    let regularity_bound = setup
        .eps_list
        .iter()
        .map(|&e| bound(e, &|k| 2.0 * norm_e[k].max(norm_limit[k])))
        .collect();
    Ok(SplittingReport {
        dominated: norm_e[0] < conorm_f[0] * (1.0 - 1e-9),
        ks,
        norm_e,
        conorm_f,
        norm_limit,
        step_angle,
        transverse_ratio,
        growth_slope: fit.slope,
        growth_intercept: fit.intercept,
        growth_residual: fit.max_residual,
        eps_list: setup.eps_list.clone(),
        involutivity_bound,
        regularity_bound,
    })
}

/// `(φ^k)^* η = Σ_j η_j(φ^k)·dφ^k_j` for symbolic `φ^k`.
pub fn pullback_form(form: &Form, map: &[Expr]) -> Form {
    let d = form.dim();
    let coeffs: Vec<Expr> = (0..d)
        .map(|j| form.component(1 << j).substitute(map))
        .collect();
    let pulled = (0..d)
        .map(|l| Expr::sum((0..d).map(|j| coeffs[j].clone() * map[j].diff(l)).collect()))
        .collect();
    Form::one_form(pulled)
}

/// `C^j = (φ^j)^* C⁰` for `j = 0..=k`; `C⁰` must have orthonormal rows on a
/// test lattice.
pub fn orthonormal_pullback_frames(spec: &DiffeoSpec, c0: &FrameSection, k: usize) -> Result<Vec<FrameSection>> {
    let d = spec.dim();
    if c0.dim() != d {
        return Err(Error::Shape("frame and map dimensions differ".into()));
    }
    for p in BoxDomain::cube(d, 0.0, 1.0).lattice(4) {
        let a = c0.matrix_at(&p);
        let gram = &a * a.transpose();
        let err = (gram - DMatrix::identity(a.nrows(), a.nrows())).abs().max();
        if err > 1e-10 {
            return Err(Error::Invalid(format!("frame rows are not orthonormal at {p:?} (error {err:e})")));
        }
    }
    (0..=k)
        .map(|j| {
            let map = spec.iterate_symbolic(j);
            let rows = c0.rows().iter().map(|r| pullback_form(r, &map)).collect();
            FrameSection::new(rows, c0.transverse().to_vec())
        })
        .collect()
}

/// `max_p |‖A1_p ∘ (A2_p|_𝒴)^{-1}‖ − 1|`.
pub fn compatibility_defect(a1: &FrameSection, a2: &FrameSection, points: &[Vec<f64>]) -> Result<f64> {
    points
        .par_iter()
        .map(|p| compatibility_norm(a1, a2, p).map(|v| (v - 1.0).abs()))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineStatus {
    Applicable,
    /// No domination at `k = 1`; the traces carry no information.
    NotApplicable,
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub status: PipelineStatus,
    pub eps: f64,
    pub involutivity: Vec<TraceEntry>,
    pub regularity: Vec<TraceEntry>,
    pub domination: SplittingReport,
}

impl PipelineReport {
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(["k", "inv_norm", "inv_inverse", "inv_m", "inv_q", "reg_norm", "reg_inverse", "reg_m", "reg_q", "bound_q", "bound_reg"]);
        csv.meta("status", format!("{:?}", self.status));
        csv.meta("eps", fmt_f64(self.eps));
        let e = self
            .domination
            .eps_list
            .iter()
            .position(|v| *v == self.eps)
            .unwrap_or(0);
        for (i, (a, b)) in self.involutivity.iter().zip(&self.regularity).enumerate() {
            csv.push_numbers(&[
                a.k as f64,
                a.norm,
                a.inv_norm,
                a.m_a,
                a.q,
                b.norm,
                b.inv_norm,
                b.m_a,
                b.q,
                self.domination.involutivity_bound[e][i],
                self.domination.regularity_bound[e][i],
            ]);
        }
        csv
    }
}

/// Frames `C^k` and fields `E^k` for `k = 1..=k_max`, fed to both traces,
/// alongside the domination report with `eps` included in its sweep.
#[allow(clippy::too_many_arguments)]
pub fn splitting_involutivity_pipeline(
    spec: &DiffeoSpec,
    setup: &SplittingSetup<'_>,
    c0: &FrameSection,
    limit_frame: Option<&FrameSection>,
    eps: f64,
    region: &BoxDomain,
    proto: &SupProtocol,
) -> Result<PipelineReport> {
    let limit = setup
        .limit
        .ok_or_else(|| Error::Invalid("the regularity trace needs the limit field".into()))?;
    let mut eps_list = setup.eps_list.clone();
    if !eps_list.contains(&eps) {
        eps_list.push(eps);
    }
    let sweep = SplittingSetup {
        initial: setup.initial,
        expanding: setup.expanding,
        limit: setup.limit,
        transverse: setup.transverse.clone(),
        k_max: setup.k_max,
        eps_list,
    };
    let domination = domination_report(spec, &sweep, &region.lattice(proto.lattice))?;
    let frames = orthonormal_pullback_frames(spec, c0, setup.k_max)?.split_off(1);
    let fields: Vec<TransportedField> = (1..=setup.k_max)
        .map(|k| TransportedField {
            spec,
            initial: setup.initial,
            k,
        })
        .collect();
    let field_refs: Vec<&dyn PlaneField> = fields.iter().map(|f| f as &dyn PlaneField).collect();
    let involutivity = asymptotic_involutivity_trace(&frames, &field_refs, eps, region, proto)?;
    let regularity = exterior_regularity_trace(&frames, limit, limit_frame, eps, region, proto)?;
    Ok(PipelineReport {
        status: if domination.dominated {
            PipelineStatus::Applicable
        } else {
            PipelineStatus::NotApplicable
        },
        eps,
        involutivity,
        regularity,
        domination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn cat() -> DiffeoSpec {
        DiffeoSpec::parse(
            names(&["x1", "x2"]),
            &["2*x1 + x2".into(), "x1 + x2".into()],
            &["x1 - x2".into(), "-x1 + 2*x2".into()],
            true,
        )
        .unwrap()
    }

    const LAMBDA_MINUS: f64 = 0.381_966_011_250_105_1;
    const LAMBDA_PLUS: f64 = 2.618_033_988_749_895;

    fn eigvec(lambda: f64) -> Vec<f64> {
        // (A − λ)v = 0 with A = [[2,1],[1,1]] gives v = (1, λ − 2)
        vec![1.0, lambda - 2.0]
    }

    #[test]
    fn cat_map_transport_reaches_contracting_direction() {
        let spec = cat();
        let horizontal = ConstantPlane::from_columns(2, &[vec![1.0, 0.0]]).unwrap();
        let stable = ConstantPlane::from_columns(2, &[eigvec(LAMBDA_MINUS)]).unwrap();
        let unstable = ConstantPlane::from_columns(2, &[eigvec(LAMBDA_PLUS)]).unwrap();
        let pts = BoxDomain::cube(2, 0.0, 1.0).lattice(3);
        let tr = transport(&spec, &horizontal, 10, &pts, Some(&unstable)).unwrap();
        for (b0, p) in tr.bases[0].iter().zip(&pts) {
            assert_eq!(b0, &horizontal.basis_at(p).unwrap());
        }
        for b in &tr.bases[10] {
            assert!(subspace_angle(b, &stable.basis_at(&[0.0, 0.0]).unwrap()) < 1e-3);
        }
    }

    #[test]
    fn cat_map_rates() {
        let spec = cat();
        let stable = ConstantPlane::from_columns(2, &[eigvec(LAMBDA_MINUS)]).unwrap();
        let unstable = ConstantPlane::from_columns(2, &[eigvec(LAMBDA_PLUS)]).unwrap();
        let setup = SplittingSetup {
            initial: &stable,
            expanding: &unstable,
            limit: None,
            transverse: vec![1],
            k_max: 15,
            eps_list: vec![0.1, 0.5, 1.0],
        };
        let pts = BoxDomain::cube(2, 0.0, 1.0).lattice(3);
        let rep = domination_report(&spec, &setup, &pts).unwrap();
        assert!(rep.dominated);
        for k in 5..=15 {
            let n = rep.norm_e[k - 1].powf(1.0 / k as f64);
            let m = rep.conorm_f[k - 1].powf(1.0 / k as f64);
            assert!((n / LAMBDA_MINUS - 1.0).abs() < 0.05, "k={k} n={n}");
            assert!((m / LAMBDA_PLUS - 1.0).abs() < 1e-9, "k={k} m={m}");
        }
        for r in &rep.involutivity_ratios(2)[2..] {
            assert!(*r < 0.2, "{r}");
        }
    }

    #[test]
    fn identity_is_not_dominated() {
        let spec = DiffeoSpec::parse(names(&["a", "b"]), &["a".into(), "b".into()], &["a".into(), "b".into()], false).unwrap();
        let e = ConstantPlane::from_columns(2, &[vec![1.0, 0.0]]).unwrap();
        let f = ConstantPlane::from_columns(2, &[vec![0.0, 1.0]]).unwrap();
        let setup = SplittingSetup {
            initial: &e,
            expanding: &f,
            limit: None,
            transverse: vec![1],
            k_max: 4,
            eps_list: vec![1.0],
        };
        let rep = domination_report(&spec, &setup, &[vec![0.3, 0.4]]).unwrap();
        assert!(!rep.dominated);
        assert!(rep.norm_e.iter().chain(&rep.conorm_f).all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn bad_inverse_is_rejected() {
        let r = DiffeoSpec::parse(names(&["a"]), &["2*a".into()], &["a".into()], false);
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn cone_violation_is_reported() {
        let spec = cat();
        let unstable = ConstantPlane::from_columns(2, &[eigvec(LAMBDA_PLUS)]).unwrap();
        let r = transport(&spec, &unstable, 2, &[vec![0.1, 0.2]], Some(&unstable));
        assert!(matches!(r, Err(Error::Cone { .. })));
    }

    #[test]
    fn pulled_back_frames_stay_compatible() {
        let spec = cat();
        let n = spec.names().to_vec();
        let c0 = FrameSection::parse(&["dx2".into()], &n).unwrap();
        let c1 = FrameSection::parse(&["-dx2".into()], &n).unwrap();
        let a = orthonormal_pullback_frames(&spec, &c0, 6).unwrap();
        let b = orthonormal_pullback_frames(&spec, &c1, 6).unwrap();
        let pts = BoxDomain::cube(2, 0.0, 1.0).lattice(4);
        assert_eq!(a[0].rows(), c0.rows());
        for (x, y) in a.iter().zip(&b) {
            assert!(compatibility_defect(x, y, &pts).unwrap() < 1e-8);
        }
        let horizontal = ConstantPlane::from_columns(2, &[vec![1.0, 0.0]]).unwrap();
        let e6 = TransportedField { spec: &spec, initial: &horizontal, k: 6 };
        for p in &pts {
            let r = a[6].matrix_at(p) * e6.basis_at(p).unwrap();
            assert!(r.norm() < 1e-8 * a[6].matrix_at(p).norm());
        }
    }
}
