//! First-order systems `∂yⁱ/∂xʲ = Fⁱʲ(x, y)`: the extended matrix and its
//! uniqueness criterion, and the separable family
//! `Fⁱʲ = G_i(yⁱ)·∂_j H_i(x)` with a quadrature solver and mollified frames.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::geometry::{annihilator_frame, BoxDomain, Distribution, Form, FrameSection, PlaneField};
use crate::moduli::{default_limit_grid, limit_condition_check, CriterionReport, Modulus, Verdict};
use crate::mollify::{mollify, GridFunction};
use crate::numeric::{find_root, integrate};
use crate::report::{fmt_f64, Csv};
use crate::surface::{build_surface, converge_surfaces, ConvergenceReport, FlowConfig, SurfacePatch};

/// Determinants at or below this magnitude count as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-9;
/// Largest finite-difference residual accepted from [`special_solve`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

/// `∂yⁱ/∂xʲ = Fⁱʲ(x, y)` over ambient coordinates `(x¹..x^m, y¹..yⁿ)`.
#[derive(Clone, Debug)]
pub struct PdeSpec {
    names: Vec<String>,
    m: usize,
    /// `rhs[i][j] = Fⁱʲ`.
    rhs: Vec<Vec<Expr>>,
    domain: BoxDomain,
    moduli: Vec<Modulus>,
    overall: Option<Modulus>,
}

impl PdeSpec {
    pub fn new(names: Vec<String>, m: usize, rhs: Vec<Vec<Expr>>, domain: BoxDomain) -> Result<PdeSpec> {
        let n = rhs.len();
        if m == 0 || n == 0 || names.len() != m + n || rhs.iter().any(|r| r.len() != m) {
            return Err(Error::Shape(format!(
                "{} names do not fit an {n}×{m} right-hand side",
                names.len()
            )));
        }
        if domain.dim() != m + n {
            return Err(Error::Shape("domain dimension differs from the variable count".into()));
        }
        for p in domain.lattice(5) {
            for e in rhs.iter().flatten() {
                e.try_eval(&p)?;
            }
        }
        Ok(PdeSpec {
            names,
            m,
            rhs,
            domain,
            moduli: Vec::new(),
            overall: None,
        })
    }

    /// `rhs[i][j]` is the source of `Fⁱʲ`.
    pub fn parse(names: Vec<String>, m: usize, rhs: &[Vec<String>], domain: BoxDomain) -> Result<PdeSpec> {
        let exprs = rhs
            .iter()
            .map(|row| row.iter().map(|s| parse_expr(s, &names)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        PdeSpec::new(names, m, exprs, domain)
    }

    /// Moduli per ambient variable `(x¹..x^m, y¹..yⁿ)`.
    pub fn with_moduli(mut self, per_variable: Vec<Modulus>, overall: Option<Modulus>) -> Result<PdeSpec> {
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

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    pub fn rhs(&self) -> &[Vec<Expr>] {
        &self.rhs
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn overall_modulus(&self) -> Option<&Modulus> {
        self.overall.as_ref()
    }

    /// The graph distribution `X_j = ∂_{xʲ} + Σ_i Fⁱʲ ∂_{yⁱ}`.
    pub fn distribution(&self) -> Result<Distribution> {
        let coeffs = (0..self.m)
            .map(|j| self.rhs.iter().map(|row| row[j].clone()).collect())
            .collect();
        Distribution::new(self.names.clone(), self.m, coeffs, self.domain.clone())
    }
}

/// `F̂ = [Iₙ | F]`, an `n × (n+m)` matrix.
pub fn hat_matrix(spec: &PdeSpec) -> Vec<Vec<Expr>> {
    let n = spec.n();
    spec.rhs
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut out: Vec<Expr> = (0..n).map(|c| if c == i { Expr::one() } else { Expr::zero() }).collect();
            out.extend(row.iter().cloned());
            out
        })
        .collect()
}

/// Ambient variable index of column `c` of [`hat_matrix`]: the identity
/// block stands for `y`, the `F` block for `x`.
pub fn hat_column_variable(m: usize, n: usize, c: usize) -> usize {
    if c < n {
        m + c
    } else {
        c - n
    }
}

fn check_columns(cols: &[usize], n: usize, width: usize) -> Result<()> {
    if cols.len() != n || cols.windows(2).any(|w| w[1] <= w[0]) || cols.iter().any(|&c| c >= width) {
        return Err(Error::Invalid(format!(
            "column set {cols:?} must be {n} strictly increasing indices below {width}"
        )));
    }
    Ok(())
}

/// Columns `cols` (0-based) of `hat`.
pub fn submatrix(hat: &[Vec<Expr>], cols: &[usize]) -> Result<Vec<Vec<Expr>>> {
    let width = hat.first().map_or(0, Vec::len);
    check_columns(cols, hat.len(), width)?;
    Ok(hat.iter().map(|row| cols.iter().map(|&c| row[c].clone()).collect()).collect())
}

/// Symbolic determinant by cofactor expansion.
pub fn determinant(mat: &[Vec<Expr>]) -> Expr {
    match mat.len() {
        0 => Expr::one(),
        1 => mat[0][0].clone(),
        n => {
            let mut terms = Vec::with_capacity(n);
            for c in 0..n {
                if mat[0][c].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Expr>> = mat[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, e)| e.clone()).collect())
                    .collect();
                let t = mat[0][c].clone() * determinant(&minor);
                terms.push(if c % 2 == 0 { t } else { -t });
            }
            Expr::sum(terms)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdeVerdict {
    Holds,
    Fails,
    Inconclusive,
    NotApplicable,
}

impl From<Verdict> for PdeVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Holds => PdeVerdict::Holds,
            Verdict::Fails => PdeVerdict::Fails,
            Verdict::Inconclusive => PdeVerdict::Inconclusive,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PdeCertificate {
    pub point: Vec<f64>,
    pub columns: Vec<usize>,
    pub determinant: f64,
    pub verdict: PdeVerdict,
    /// Absent when the selected submatrix is singular.
    pub report: Option<CriterionReport>,
    pub w1: Option<Modulus>,
    pub w2: Option<Modulus>,
}

impl PdeCertificate {
    pub fn to_csv(&self) -> Csv {
        let mut csv = match &self.report {
            Some(r) => r.to_csv(),
            None => Csv::new(["s", "quantity", "log_quantity"]),
        };
        csv.meta("point", format!("{:?}", self.point));
        csv.meta("columns", format!("{:?}", self.columns.iter().map(|c| c + 1).collect::<Vec<_>>()));
        csv.meta("determinant", fmt_f64(self.determinant));
        csv.meta("certificate", format!("{:?}", self.verdict));
        csv
    }
}

fn max_of<'a>(mut it: impl Iterator<Item = &'a Modulus>) -> Option<Modulus> {
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, w| Modulus::max(acc, w.clone())))
}

/// Uniqueness criterion at `ξ` for the column set `cols` (0-based) of `F̂`.
pub fn theorem2_check(spec: &PdeSpec, xi: &[f64], cols: &[usize]) -> Result<PdeCertificate> {
    if xi.len() != spec.names.len() {
        return Err(Error::Shape("point dimension differs from the variable count".into()));
    }
    if !spec.domain.contains(xi) {
        return Err(Error::Domain(format!("{xi:?} lies outside the domain")));
    }
    let det = determinant(&submatrix(&hat_matrix(spec), cols)?).eval(xi);
    if !(det.abs() > SINGULAR_THRESHOLD) {
        return Ok(PdeCertificate {
            point: xi.to_vec(),
            columns: cols.to_vec(),
            determinant: det,
            verdict: PdeVerdict::NotApplicable,
            report: None,
            w1: None,
            w2: None,
        });
    }
    let none = || Error::InsufficientData("no moduli declared".into());
    let w1 = match &spec.overall {
        Some(w) => w.clone(),
        None => max_of(spec.moduli.iter()).ok_or_else(none)?,
    };
    let (m, n) = (spec.m, spec.n());
    let w2 = max_of(cols.iter().map(|&c| &spec.moduli[hat_column_variable(m, n, c)])).ok_or_else(none)?;
    let report = limit_condition_check(&w1, &w2, &default_limit_grid(&w1, &w2))?;
    Ok(PdeCertificate {
        point: xi.to_vec(),
        columns: cols.to_vec(),
        determinant: det,
        verdict: report.verdict.into(),
        report: Some(report),
        w1: Some(w1),
        w2: Some(w2),
    })
}

/// `Fⁱʲ = G_i(yⁱ)·∂H_i/∂xʲ`. Each `G_i` is an expression in the single
/// variable 0; each `H_i` is over `x¹..x^m`.
#[derive(Clone, Debug)]
pub struct SpecialFormSpec {
    m: usize,
    g: Vec<Expr>,
    h: Vec<Expr>,
}

impl SpecialFormSpec {
    pub fn new(m: usize, g: Vec<Expr>, h: Vec<Expr>) -> Result<SpecialFormSpec> {
        if g.len() != h.len() || g.is_empty() || m == 0 {
            return Err(Error::Shape("need one G and one H per unknown".into()));
        }
        if g.iter().any(|e| e.variables().iter().any(|&v| v != 0)) {
            return Err(Error::Invalid("each G_i must depend on its own yⁱ only".into()));
        }
        if h.iter().any(|e| e.variables().iter().any(|&v| v >= m)) {
            return Err(Error::Invalid("each H_i must depend on x only".into()));
        }
        Ok(SpecialFormSpec { m, g, h })
    }

    /// `G_i` is parsed in the variable `y_names[i]`; `H_i` in `x_names`.
    pub fn parse(x_names: &[String], y_names: &[String], g: &[String], h: &[String]) -> Result<SpecialFormSpec> {
        if g.len() != y_names.len() {
            return Err(Error::Shape("need one G per unknown".into()));
        }
        let g = g
            .iter()
            .zip(y_names)
            .map(|(s, y)| parse_expr(s, std::slice::from_ref(y)))
            .collect::<Result<Vec<_>>>()?;
        let h = h.iter().map(|s| parse_expr(s, x_names)).collect::<Result<Vec<_>>>()?;
        SpecialFormSpec::new(x_names.len(), g, h)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn g(&self) -> &[Expr] {
        &self.g
    }

    pub fn h(&self) -> &[Expr] {
        &self.h
    }

    fn rhs_exprs(&self, g: &[Expr], h: &[Expr]) -> Vec<Vec<Expr>> {
        let (m, n) = (self.m, self.n());
        let mut subst: Vec<Expr> = vec![Expr::zero()];
        (0..n)
            .map(|i| {
                subst[0] = Expr::var(m + i);
                let gi = g[i].substitute(&subst);
                (0..m).map(|j| gi.clone() * h[i].diff(j)).collect()
            })
            .collect()
    }

    /// The induced system over ambient coordinates `(x, y)`.
    pub fn induced(&self, names: Vec<String>, domain: BoxDomain) -> Result<PdeSpec> {
        PdeSpec::new(names, self.m, self.rhs_exprs(&self.g, &self.h), domain)
    }

    /// Largest `|Fⁱʲ − G_i ∂_j H_i|` over a lattice of `spec`'s domain.
    pub fn mismatch(&self, spec: &PdeSpec, per_axis: usize) -> Result<f64> {
        if spec.m != self.m || spec.n() != self.n() {
            return Err(Error::Shape("system shapes differ".into()));
        }
        let ours = self.rhs_exprs(&self.g, &self.h);
        let mut worst = 0.0f64;
        for p in spec.domain.lattice(per_axis) {
            for (a, b) in ours.iter().flatten().zip(spec.rhs.iter().flatten()) {
                worst = worst.max((a.eval(&p) - b.eval(&p)).abs());
            }
        }
        Ok(worst)
    }
}

/// Solutions of a separable system at target points.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecialSolution {
    pub targets: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    /// Max over `(i, j)` of `|∂yⁱ/∂xʲ − Fⁱʲ|` by central differences.
    pub residuals: Vec<f64>,
}

impl SpecialSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self, x_names: &[String], y_names: &[String]) -> Csv {
        let mut cols: Vec<String> = x_names.to_vec();
        cols.extend(y_names.iter().cloned());
        cols.push("residual".into());
        let mut csv = Csv::new(cols);
        csv.meta("max_residual", fmt_f64(self.max_residual()));
        for ((x, y), r) in self.targets.iter().zip(&self.values).zip(&self.residuals) {
            let mut row = x.clone();
            row.extend(y);
            row.push(*r);
            csv.push_numbers(&row);
        }
        csv
    }
}

const FD_STEP: f64 = 1e-4;
const ROOT_TOL: f64 = 1e-13;

/// Solves `∫_{y₀}^{y} ds/G(s) = Δ` on the branch of `y₀`, with `y`
/// confined to `bounds`.
fn solve_separable(g: &Expr, component: usize, y0: f64, delta: f64, bounds: (f64, f64)) -> Result<f64> {
    let gv = |s: f64| g.eval(&[s]);
    let g0 = gv(y0);
    if g0 == 0.0 || delta == 0.0 {
        return Ok(y0);
    }
    let dir = (delta * g0).signum();
    let cap = if dir > 0.0 { bounds.1 } else { bounds.0 };
    let piece = |a: f64, b: f64| integrate(|s| 1.0 / gv(s), a, b, 1e-14);
    let mut lo = y0;
    let mut phi_lo = 0.0;
    let mut step = 1e-3 * y0.abs().max(1e-2);
    loop {
        let mut hi = lo + dir * step;
        let capped = (hi - cap) * dir >= 0.0;
        if capped {
            hi = cap;
        }
        if (hi - lo) * dir <= 0.0 {
            return Err(Error::BranchCrossing { component });
        }
        // a sign change of G inside the step means the solution would leave the branch
        let crosses = (1..=32).any(|k| {
            let s = lo + (hi - lo) * k as f64 / 32.0;
            gv(s) * g0 < 0.0
        });
        if crosses {
            return Err(Error::BranchCrossing { component });
        }
        let phi_hi = phi_lo + piece(lo, hi);
        if phi_hi.is_nan() || (phi_hi - delta) * (phi_lo - delta) <= 0.0 || phi_hi.is_infinite() {
            return find_root(|y| phi_lo + piece(lo, y) - delta, lo, hi, ROOT_TOL);
        }
        if capped {
            return Err(Error::BranchCrossing { component });
        }
        lo = hi;
        phi_lo = phi_hi;
        step *= 2.0;
    }
}

/// Solves the separable system through `(x₀, y₀)` at each target `x` by
/// quadrature of `1/G_i` against `H_i(x) − H_i(x₀)`, and checks the PDE
/// residual by central differences.
pub fn special_solve(
    sf: &SpecialFormSpec,
    x0: &[f64],
    y0: &[f64],
    targets: &[Vec<f64>],
    y_bounds: &BoxDomain,
) -> Result<SpecialSolution> {
    let (m, n) = (sf.m, sf.n());
    if x0.len() != m || y0.len() != n || y_bounds.dim() != n || targets.iter().any(|t| t.len() != m) {
        return Err(Error::Shape("point dimensions do not match the system".into()));
    }
    let h0: Vec<f64> = sf.h.iter().map(|h| h.eval(x0)).collect();
    let solve_at = |x: &[f64]| -> Result<Vec<f64>> {
        (0..n)
            .map(|i| {
                let delta = sf.h[i].eval(x) - h0[i];
                solve_separable(&sf.g[i], i, y0[i], delta, (y_bounds.lo[i], y_bounds.hi[i]))
            })
            .collect()
    };
    let dh: Vec<Vec<Expr>> = sf.h.iter().map(|h| (0..m).map(|j| h.diff(j)).collect()).collect();
    let results: Vec<(Vec<f64>, f64)> = targets
        .par_iter()
        .map(|x| {
            let y = solve_at(x)?;
            let mut worst = 0.0f64;
            for j in 0..m {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += FD_STEP;
                xm[j] -= FD_STEP;
                let (yp, ym) = (solve_at(&xp)?, solve_at(&xm)?);
                for i in 0..n {
                    let fd = (yp[i] - ym[i]) / (2.0 * FD_STEP);
                    let exact = sf.g[i].eval(&[y[i]]) * dh[i][j].eval(x);
                    worst = worst.max((fd - exact).abs());
                }
            }
            Ok((y, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let (values, residuals): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let sol = SpecialSolution {
        targets: targets.to_vec(),
        values,
        residuals,
    };
    if sol.max_residual() > RESIDUAL_TOLERANCE {
        return Err(Error::Resolution(format!(
            "finite-difference residual {} exceeds {RESIDUAL_TOLERANCE}",
            sol.max_residual()
        )));
    }
    Ok(sol)
}

/// One member of the mollified family.
#[derive(Clone, Debug)]
pub struct MollifiedFrame {
    pub eps: f64,
    pub distribution: Distribution,
    pub frame: FrameSection,
    /// Largest `|η₁∧⋯∧ηₙ∧dη_ℓ|` over a lattice (0 when it vanishes
    /// symbolically).
    pub wedge_max: f64,
    pub wedge_symbolic_zero: bool,
}

/// Grid cells per mollifier radius used by [`involutive_mollified_frames`].
pub const CELLS_PER_RADIUS: usize = 8;

fn mollified_table(f: &Expr, lo: &[f64], hi: &[f64], eps: f64, args: Vec<Expr>) -> Result<Expr> {
    let h = eps / CELLS_PER_RADIUS as f64;
    let pad = eps + 4.0 * h;
    let axes = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| GridFunction::axis_covering(a - pad, b + pad, h))
        .collect();
    let sampled = GridFunction::sample(axes, |p| f.eval(p))?;
    let smooth = mollify(&sampled, eps)?;
    Expr::sampled(smooth.to_table()?, args)
}

/// Wedge of the frame rows with each `dη_ℓ`.
pub fn strong_wedges(frame: &FrameSection) -> Vec<Form> {
    let rows = frame.rows();
    let base = rows[1..].iter().fold(rows[0].clone(), |acc, r| acc.wedge(r));
    frame.d_rows().iter().map(|d| base.wedge(d)).collect()
}

/// Frames `ηᵢᵏ = dyⁱ − G_iᵏ(yⁱ)·d_x H_iᵏ` from mollified `G_i`, `H_i` on
/// the box `x_box × y_box`, one per radius in `eps_list`.
pub fn involutive_mollified_frames(
    sf: &SpecialFormSpec,
    names: &[String],
    x_box: &BoxDomain,
    y_box: &BoxDomain,
    eps_list: &[f64],
) -> Result<Vec<MollifiedFrame>> {
    let (m, n) = (sf.m, sf.n());
    if x_box.dim() != m || y_box.dim() != n || names.len() != m + n {
        return Err(Error::Shape("box dimensions do not match the system".into()));
    }
    let mut lo = x_box.lo.clone();
    lo.extend(&y_box.lo);
    let mut hi = x_box.hi.clone();
    hi.extend(&y_box.hi);
    let domain = BoxDomain::new(lo, hi)?;
    let lattice = domain.lattice(4);
    let x_args: Vec<Expr> = (0..m).map(Expr::var).collect();
    eps_list
        .iter()
        .map(|&eps| {
            let g = (0..n)
                .map(|i| mollified_table(&sf.g[i], &y_box.lo[i..=i], &y_box.hi[i..=i], eps, vec![Expr::var(0)]))
                .collect::<Result<Vec<_>>>()?;
            let h = (0..n)
                .map(|i| mollified_table(&sf.h[i], &x_box.lo, &x_box.hi, eps, x_args.clone()))
                .collect::<Result<Vec<_>>>()?;
            let rhs = sf.rhs_exprs(&g, &h);
            let coeffs = (0..m).map(|j| rhs.iter().map(|row| row[j].clone()).collect()).collect();
            let distribution = Distribution::new(names.to_vec(), m, coeffs, domain.clone())?;
            let frame = annihilator_frame(&distribution);
            let wedges = strong_wedges(&frame);
            let symbolic = wedges.iter().all(Form::is_zero);
            let wedge_max = if symbolic {
                0.0
            } else {
                lattice
                    .par_iter()
                    .map(|p| wedges.iter().map(|w| w.eval(p).norm()).fold(0.0, f64::max))
                    .reduce(|| 0.0, f64::max)
            };
            Ok(MollifiedFrame {
                eps,
                distribution,
                frame,
                wedge_max,
                wedge_symbolic_zero: symbolic,
            })
        })
        .collect()
}

/// Closed form for `G_i = −βᵢ y ln y`, `H_i = Σ_j (xʲ)^{a_ij+1}/(a_ij+1)`:
/// `yⁱ = exp(ln y₀ⁱ · e^{−βᵢ(H_i(x) − H_i(x₀))})`.
pub fn log_family_solution(alpha: &[Vec<f64>], beta: &[f64], x0: &[f64], y0: &[f64], x: &[f64]) -> Vec<f64> {
    let h = |i: usize, p: &[f64]| -> f64 {
        alpha[i]
            .iter()
            .zip(p)
            .map(|(a, xj)| xj.abs().powf(a + 1.0) / (a + 1.0))
            .sum()
    };
    (0..beta.len())
        .map(|i| (y0[i].ln() * (-beta[i] * (h(i, x) - h(i, x0))).exp()).exp())
        .collect()
}

/// Result of rebuilding the separable solution from mollified frames.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub eps_list: Vec<f64>,
    pub wedge_max: Vec<f64>,
    pub convergence: ConvergenceReport,
    /// `sup |y_patch − y_exact|` per mollification radius.
    pub errors: Vec<f64>,
}

impl OracleReport {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().unwrap_or(&f64::NAN)
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(["eps", "wedge_max", "angle", "displacement", "sup_error"]);
        csv.meta("verdict", format!("{:?}", self.convergence.verdict));
        csv.meta("final_angle", fmt_f64(self.convergence.final_angle));
        for (k, e) in self.eps_list.iter().enumerate() {
            let disp = if k == 0 { f64::NAN } else { self.convergence.displacement[k - 1] };
            csv.push_numbers(&[*e, self.wedge_max[k], self.convergence.angles[k], disp, self.errors[k]]);
        }
        csv
    }
}

/// Settings of [`special_form_oracle`].
#[derive(Clone, Debug)]
pub struct OracleSetup {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub eps1: f64,
    pub grid: usize,
    pub x_box: BoxDomain,
    pub y_box: BoxDomain,
    pub eps_list: Vec<f64>,
    pub flow: FlowConfig,
}

/// Composed-flow surfaces of the mollified frames through `(x₀, y₀)`,
/// their convergence, and their distance to [`special_solve`] on the grid.
pub fn special_form_oracle(sf: &SpecialFormSpec, names: &[String], setup: &OracleSetup) -> Result<OracleReport> {
    let frames = involutive_mollified_frames(sf, names, &setup.x_box, &setup.y_box, &setup.eps_list)?;
    let mut base = setup.x0.clone();
    base.extend(&setup.y0);
    let patches = frames
        .iter()
        .map(|f| build_surface(&f.distribution, &base, setup.eps1, setup.grid, &setup.flow))
        .collect::<Result<Vec<SurfacePatch>>>()?;
    let m = sf.m;
    let targets: Vec<Vec<f64>> = patches[0].points.iter().map(|p| p[..m].to_vec()).collect();
    let exact = special_solve(sf, &setup.x0, &setup.y0, &targets, &setup.y_box)?;
    let errors = patches
        .iter()
        .map(|patch| {
            patch
                .points
                .iter()
                .zip(&exact.values)
                .map(|(p, y)| p[m..].iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut domain_lo = setup.x_box.lo.clone();
    domain_lo.extend(&setup.y_box.lo);
    let mut domain_hi = setup.x_box.hi.clone();
    domain_hi.extend(&setup.y_box.hi);
    let limit = sf.induced(names.to_vec(), BoxDomain::new(domain_lo, domain_hi)?)?.distribution()?;
    let fields: Vec<&dyn PlaneField> = frames.iter().map(|f| &f.distribution as &dyn PlaneField).collect();
    let convergence = converge_surfaces(&patches, &fields, &limit)?;
    Ok(OracleReport {
        eps_list: setup.eps_list.clone(),
        wedge_max: frames.iter().map(|f| f.wedge_max).collect(),
        convergence,
        errors,
    })
}
