//! Candidate integral manifolds built by composing flows of the spanning
//! fields, and the tangency, pushforward and convergence diagnostics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::VectorField;
use crate::geometry::{
    annihilator_frame, involutivity_constant, inverse_norm_sup, restricted_dnorm, BoxDomain,
    Distribution, FrameSection, PlaneField, SupProtocol,
};
use crate::linalg::{orthonormalize, subspace_angle};
use crate::report::{fmt_f64, Csv};
use nalgebra::DMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    Symbolic,
    FiniteDifference,
}

/// Fixed-step RK4 settings.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub h: f64,
    pub max_time: f64,
    pub jacobian: JacobianMode,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            h: 1e-3,
            max_time: 10.0,
            jacobian: JacobianMode::Symbolic,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.max_time > 0.0) {
            return Err(Error::Domain("flow step and max_time must be positive".into()));
        }
        Ok(())
    }
}

fn jacobian(x: &VectorField, p: &[f64], mode: JacobianMode) -> Vec<f64> {
    match mode {
        JacobianMode::Symbolic => x.jacobian_at(p),
        JacobianMode::FiniteDifference => {
            let dim = x.dim();
            let mut out = vec![0.0; dim * dim];
            let mut q = p.to_vec();
            for j in 0..dim {
                let h = 1e-6 * p[j].abs().max(1.0);
                q[j] = p[j] + h;
                let fp = x.eval(&q);
                q[j] = p[j] - h;
                let fm = x.eval(&q);
                q[j] = p[j];
                for i in 0..dim {
                    out[i * dim + j] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            out
        }
    }
}

/// Integrates `ẋ = X(x)` and, for each tangent, `Ẏ = DX(x)·Y` over time `t`.
fn integrate(
    x: &VectorField,
    x0: &[f64],
    t: f64,
    cfg: &FlowConfig,
    domain: Option<&BoxDomain>,
    tangents: &mut [Vec<f64>],
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if t.abs() > cfg.max_time {
        return Err(Error::Domain(format!("|t| = {} exceeds max_time {}", t.abs(), cfg.max_time)));
    }
    let dim = x.dim();
    let mut p = x0.to_vec();
    if t == 0.0 {
        return Ok(p);
    }
    let steps = (t.abs() / cfg.h).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let nt = tangents.len();
    let width = dim * (1 + nt);
    let mut state = vec![0.0; width];
    let rhs = |s: &[f64], out: &mut [f64]| {
        let pos = &s[..dim];
        x.eval_into(pos, &mut out[..dim]);
        if nt > 0 {
            let j = jacobian(x, pos, cfg.jacobian);
            for k in 0..nt {
                let y = &s[dim * (1 + k)..dim * (2 + k)];
                for r in 0..dim {
                    out[dim * (1 + k) + r] = (0..dim).map(|c| j[r * dim + c] * y[c]).sum();
                }
            }
        }
    };
    state[..dim].copy_from_slice(&p);
    for (k, y) in tangents.iter().enumerate() {
        state[dim * (1 + k)..dim * (2 + k)].copy_from_slice(y);
    }
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![0.0; width], vec![0.0; width], vec![0.0; width], vec![0.0; width]);
    let mut tmp = vec![0.0; width];
    for step in 0..steps {
        rhs(&state, &mut k1);
        for i in 0..width {
            tmp[i] = state[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..width {
            tmp[i] = state[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..width {
            tmp[i] = state[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..width {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let pos = &state[..dim];
        let elapsed = dt * (step + 1) as f64;
        if pos.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point: pos.to_vec() });
        }
        if let Some(d) = domain {
            if !d.contains(pos) {
                return Err(Error::Escape {
                    time: elapsed,
                    point: pos.to_vec(),
                });
            }
        }
    }
    p.copy_from_slice(&state[..dim]);
    for (k, y) in tangents.iter_mut().enumerate() {
        y.copy_from_slice(&state[dim * (1 + k)..dim * (2 + k)]);
    }
    Ok(p)
}

/// `e^{tX}(x0)` by fixed-step RK4.
pub fn flow(
    x: &VectorField,
    x0: &[f64],
    t: f64,
    cfg: &FlowConfig,
    domain: Option<&BoxDomain>,
) -> Result<Vec<f64>> {
    integrate(x, x0, t, cfg, domain, &mut [])
}

/// `(e^{tX}(x0), De^{tX}_{x0}·y0)` from the variational equation.
pub fn variational_flow(
    x: &VectorField,
    x0: &[f64],
    t: f64,
    y0: &[f64],
    cfg: &FlowConfig,
    domain: Option<&BoxDomain>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut tangents = [y0.to_vec()];
    let p = integrate(x, x0, t, cfg, domain, &mut tangents)?;
    let [y] = tangents;
    Ok((p, y))
}

/// Samples of `W(t₁..t_m) = e^{t_m X_m}∘⋯∘e^{t₁X₁}(x₀)` on the lattice
/// `grid^m`, row-major in `(t₁, …, t_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePatch {
    pub m: usize,
    pub eps1: f64,
    pub grid: Vec<f64>,
    pub basepoint: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// `tangents[node][i] ≈ ∂W/∂t_i` by finite differences on the grid.
    pub tangents: Vec<Vec<Vec<f64>>>,
    /// Composition order of the flows (identity for the standard build).
    pub order: Vec<usize>,
}

impl SurfacePatch {
    pub fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let g = self.grid.len();
        let mut idx = vec![0; self.m];
        let mut rem = flat;
        for d in (0..self.m).rev() {
            idx[d] = rem % g;
            rem /= g;
        }
        idx
    }

    pub fn params(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().map(|&i| self.grid[i]).collect()
    }

    pub fn center_index(&self) -> usize {
        let c = self.grid.len() / 2;
        (0..self.m).fold(0, |acc, _| acc * self.grid.len() + c)
    }

    /// Tangent-plane basis at a node (`dim × m`).
    pub fn tangent_matrix(&self, flat: usize) -> DMatrix<f64> {
        let dim = self.basepoint.len();
        DMatrix::from_fn(dim, self.m, |r, c| self.tangents[flat][c][r])
    }

    /// Node parameters, coordinates and (given the distribution) the
    /// per-direction tangency defect.
    pub fn to_csv(&self, d: Option<&Distribution>, names: &[String]) -> Csv {
        let mut cols: Vec<String> = (1..=self.m).map(|i| format!("t{i}")).collect();
        cols.extend(names.iter().cloned());
        if d.is_some() {
            cols.extend((1..=self.m).map(|i| format!("defect{i}")));
        }
        let mut csv = Csv::new(cols);
        csv.meta("eps1", fmt_f64(self.eps1));
        csv.meta("grid", self.grid.len());
        csv.meta("basepoint", format!("{:?}", self.basepoint));
        csv.meta("order", format!("{:?}", self.order));
        for flat in 0..self.points.len() {
            let mut row = self.params(flat);
            row.extend(&self.points[flat]);
            if let Some(d) = d {
                row.extend(node_defects(self, d, flat));
            }
            csv.push_numbers(&row);
        }
        csv
    }
}

/// Symmetric parameter grid on `[−ε₁, ε₁]` with `t = 0` exactly at the centre.
pub fn parameter_grid(eps1: f64, res: usize) -> Result<Vec<f64>> {
    if res < 3 || res.is_multiple_of(2) {
        return Err(Error::Domain(format!("grid resolution must be odd and ≥ 3, got {res}")));
    }
    let c = res / 2;
    let step = eps1 / c as f64;
    Ok((0..res).map(|i| (i as f64 - c as f64) * step).collect())
}

/// Integrates one field from a point over the parameter grid.
type FlowLine<'a> = dyn Fn(&VectorField, &[f64]) -> Result<Vec<Vec<f64>>> + Sync + 'a;

/// Builds the composed-flow surface through `x0` with the flows applied in
/// `order` (`order[0]` first). Flows along each parameter axis proceed
/// outward from `t = 0` node by node.
pub fn build_surface_ordered(
    d: &Distribution,
    x0: &[f64],
    eps1: f64,
    res: usize,
    cfg: &FlowConfig,
    order: &[usize],
) -> Result<SurfacePatch> {
    cfg.validate()?;
    let m = d.m();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..m).collect::<Vec<_>>() {
        return Err(Error::Invalid(format!("{order:?} is not a permutation of 0..{m}")));
    }
    if x0.len() != d.ambient() {
        return Err(Error::Shape("basepoint dimension differs from the distribution".into()));
    }
    if cfg.h > eps1 / 16.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("flow step {} exceeds ε₁/16 = {}", cfg.h, eps1 / 16.0)));
    }
    let grid = parameter_grid(eps1, res)?;
    let fields = d.fields();
    let domain = d.domain();
    let c = res / 2;
    let step = grid[1] - grid[0];

    // points along one axis, outward from the centre
    let line = |field: &VectorField, start: &[f64]| -> Result<Vec<Vec<f64>>> {
        let mut out = vec![Vec::new(); res];
        out[c] = start.to_vec();
        for k in c + 1..res {
            out[k] = flow(field, &out[k - 1], step, cfg, Some(domain))?;
        }
        for k in (0..c).rev() {
            out[k] = flow(field, &out[k + 1], -step, cfg, Some(domain))?;
        }
        Ok(out)
    };

    // nodes are produced in composition order, then permuted to (t₁..t_m)
    fn expand(
        level: usize,
        start: &[f64],
        order: &[usize],
        fields: &[VectorField],
        line: &FlowLine<'_>,
    ) -> Result<Vec<Vec<f64>>> {
        let pts = line(&fields[order[level]], start)?;
        if level + 1 == order.len() {
            return Ok(pts);
        }
        let mut out = Vec::new();
        for p in &pts {
            out.extend(expand(level + 1, p, order, fields, line)?);
        }
        Ok(out)
    }

    let first = line(&fields[order[0]], x0)?;
    let chunks: Vec<Vec<Vec<f64>>> = if m == 1 {
        first.into_iter().map(|p| vec![p]).collect()
    } else {
        first
            .par_iter()
            .map(|p| expand(1, p, order, fields, &line))
            .collect::<Result<Vec<_>>>()?
    };
    let by_order: Vec<Vec<f64>> = chunks.into_iter().flatten().collect();
    let total = by_order.len();
    let mut points = vec![Vec::new(); total];
    for (k, p) in by_order.into_iter().enumerate() {
        // k enumerates indices of (t_{order[0]}, …, t_{order[m-1]}) row-major
        let mut rem = k;
        let mut idx = vec![0; m];
        for lvl in (0..m).rev() {
            idx[order[lvl]] = rem % res;
            rem /= res;
        }
        let flat = idx.iter().fold(0, |acc, &i| acc * res + i);
        points[flat] = p;
    }
    let mut patch = SurfacePatch {
        m,
        eps1,
        grid,
        basepoint: x0.to_vec(),
        points,
        tangents: Vec::new(),
        order: order.to_vec(),
    };
    let centre = patch.center_index();
    patch.points[centre] = x0.to_vec();
    patch.tangents = finite_difference_tangents(&patch);
    Ok(patch)
}

/// [`build_surface_ordered`] with the standard order `X₁` first.
pub fn build_surface(
    d: &Distribution,
    x0: &[f64],
    eps1: f64,
    res: usize,
    cfg: &FlowConfig,
) -> Result<SurfacePatch> {
    let order: Vec<usize> = (0..d.m()).collect();
    build_surface_ordered(d, x0, eps1, res, cfg, &order)
}

fn finite_difference_tangents(patch: &SurfacePatch) -> Vec<Vec<Vec<f64>>> {
    let g = patch.grid.len();
    let h = patch.spacing();
    let dim = patch.basepoint.len();
    let strides: Vec<usize> = (0..patch.m).map(|i| g.pow((patch.m - 1 - i) as u32)).collect();
    (0..patch.points.len())
        .map(|flat| {
            let idx = patch.multi_index(flat);
            (0..patch.m)
                .map(|i| {
                    let s = strides[i];
                    let at = |off: isize| &patch.points[(flat as isize + off * s as isize) as usize];
                    (0..dim)
                        .map(|r| {
                            if idx[i] == 0 {
                                (-3.0 * at(0)[r] + 4.0 * at(1)[r] - at(2)[r]) / (2.0 * h)
                            } else if idx[i] == g - 1 {
                                (3.0 * at(0)[r] - 4.0 * at(-1)[r] + at(-2)[r]) / (2.0 * h)
                            } else {
                                (at(1)[r] - at(-1)[r]) / (2.0 * h)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn node_defects(patch: &SurfacePatch, d: &Distribution, flat: usize) -> Vec<f64> {
    let p = &patch.points[flat];
    (0..patch.m)
        .map(|i| {
            let x = d.field(i).eval(p);
            patch.tangents[flat][i]
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Both sides of the tangency estimate
/// `|∂W/∂t_i − X_i(W)| ≤ mε₁‖dA|_Δ‖_∞‖A^{-1}‖_∞ e^{mε₁M_A}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangencyReport {
    /// `defects[node][i]`.
    pub defects: Vec<Vec<f64>>,
    pub max_defect: f64,
    pub rhs: f64,
    pub dnorm: f64,
    pub inv_norm: f64,
    pub m_a: f64,
    /// `10·h²` for the grid spacing `h`.
    pub fd_tolerance: f64,
    /// `max(defect − rhs − fd_tolerance)`; nonpositive when the bound holds.
    pub max_violation: f64,
    pub protocol: String,
}

impl TangencyReport {
    pub fn holds(&self) -> bool {
        self.max_violation <= 0.0
    }
}

/// Sup-norms are taken over the bounding box of the patch.
pub fn tangency_defect(
    patch: &SurfacePatch,
    d: &Distribution,
    proto: &SupProtocol,
) -> Result<TangencyReport> {
    let frame = annihilator_frame(d);
    let region = BoxDomain::bounding(&patch.points)?;
    let dnorm = restricted_dnorm(&frame, d, &region, proto)?.value;
    let inv_norm = inverse_norm_sup(&frame, &region, proto.lattice)?.value;
    let m_a = involutivity_constant(&frame, d, &region, proto)?.value;
    let m = patch.m as f64;
    let rhs = m * patch.eps1 * dnorm * inv_norm * (m * patch.eps1 * m_a).exp();
    let h = patch.spacing();
    let fd_tolerance = 10.0 * h * h;
    let defects: Vec<Vec<f64>> = (0..patch.node_count())
        .map(|f| node_defects(patch, d, f))
        .collect();
    let max_defect = defects.iter().flatten().copied().fold(0.0, f64::max);
    Ok(TangencyReport {
        max_violation: max_defect - rhs - fd_tolerance,
        defects,
        max_defect,
        rhs,
        dnorm,
        inv_norm,
        m_a,
        fd_tolerance,
        protocol: proto.describe(),
    })
}

/// Shared ingredients of the pushforward estimate for one distribution.
#[derive(Clone, Debug)]
pub struct PushforwardContext {
    pub frame: FrameSection,
    pub eps1: f64,
    pub m_a: f64,
    pub protocol: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushforwardCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// The pushed-forward vector, for the 𝒴-invariance check.
    pub image: Vec<f64>,
    pub endpoint: Vec<f64>,
}

impl PushforwardContext {
    /// `M_A` is estimated once over `region`.
    pub fn new(
        d: &Distribution,
        frame: FrameSection,
        region: &BoxDomain,
        eps1: f64,
        proto: &SupProtocol,
    ) -> Result<PushforwardContext> {
        let m_a = involutivity_constant(&frame, d, region, proto)?.value;
        Ok(PushforwardContext {
            frame,
            eps1,
            m_a,
            protocol: proto.describe(),
        })
    }

    /// `|De^{t_mX_m}∘⋯∘De^{t₁X₁}_{x₀}Y| ≤ |A_{x₀}Y|·‖A^{-1}_{x_m}‖·e^{mε₁M_A}`.
    pub fn check(
        &self,
        d: &Distribution,
        x0: &[f64],
        times: &[f64],
        y0: &[f64],
        cfg: &FlowConfig,
    ) -> Result<PushforwardCheck> {
        let m = d.m();
        if times.len() != m {
            return Err(Error::Shape(format!("{} times for rank {m}", times.len())));
        }
        if times.iter().any(|t| t.abs() > self.eps1 * (1.0 + 1e-12)) {
            return Err(Error::Domain("flow times must satisfy |t_i| ≤ ε₁".into()));
        }
        if y0[..m].iter().any(|v| *v != 0.0) {
            return Err(Error::Invalid("Y must lie in the transverse subspace".into()));
        }
        let mut p = x0.to_vec();
        let mut y = y0.to_vec();
        for (i, &t) in times.iter().enumerate() {
            let (np, ny) = variational_flow(d.field(i), &p, t, &y, cfg, Some(d.domain()))?;
            p = np;
            y = ny;
        }
        let lhs = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a_y = self.frame.matrix_at(x0) * nalgebra::DVector::from_column_slice(y0);
        let inv = self.frame.restricted_inverse(&p)?.norm;
        let rhs = a_y.norm() * inv * (m as f64 * self.eps1 * self.m_a).exp();
        Ok(PushforwardCheck {
            lhs,
            rhs,
            pass: lhs <= rhs * (1.0 + 1e-3),
            image: y,
            endpoint: p,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergenceVerdict {
    Converged,
    NotConverged,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// Max node displacement between patches k and k+1.
    pub displacement: Vec<f64>,
    /// Max angle (radians) between patch k's tangent planes and `E^k`.
    pub angles: Vec<f64>,
    /// Max angle between the last patch and the limit field.
    pub final_angle: f64,
    pub verdict: ConvergenceVerdict,
    pub limit: SurfacePatch,
}

pub const ANGLE_TOLERANCE: f64 = 1e-3;

fn max_angle(patch: &SurfacePatch, field: &dyn PlaneField) -> Result<f64> {
    (0..patch.node_count())
        .into_par_iter()
        .map(|f| {
            let t = orthonormalize(&patch.tangent_matrix(f))?;
            let e = orthonormalize(&field.basis_at(&patch.points[f])?)?;
            Ok(subspace_angle(&t, &e))
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max))
}

/// Cauchy trace of a patch sequence and the tangent-plane alignment with
/// the approximating and limit distributions.
pub fn converge_surfaces(
    patches: &[SurfacePatch],
    fields: &[&dyn PlaneField],
    limit: &dyn PlaneField,
) -> Result<ConvergenceReport> {
    let first = patches.first().ok_or_else(|| Error::Shape("no patches".into()))?;
    if fields.len() != patches.len() {
        return Err(Error::Shape("one distribution per patch required".into()));
    }
    for p in patches {
        if p.grid != first.grid || p.basepoint != first.basepoint || p.m != first.m {
            return Err(Error::Shape("patches do not share basepoint and grid".into()));
        }
    }
    let displacement: Vec<f64> = patches
        .windows(2)
        .map(|w| {
            w[0].points
                .iter()
                .zip(&w[1].points)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
        })
        .collect();
    let angles = patches
        .iter()
        .zip(fields)
        .map(|(p, f)| max_angle(p, *f))
        .collect::<Result<Vec<f64>>>()?;
    let last = patches.last().unwrap();
    let final_angle = max_angle(last, limit)?;
    let cauchy = match (displacement.first(), displacement.last()) {
        (Some(&a), Some(&b)) => displacement.iter().all(|d| *d <= 1e-15) || a >= 10.0 * b,
        _ => true,
    };
    let aligned = final_angle <= ANGLE_TOLERANCE;
    let angle_stuck = angles.last().copied().unwrap_or(0.0) >= 0.5 * angles[0];
    let verdict = if cauchy && aligned {
        ConvergenceVerdict::Converged
    } else if !aligned && (angle_stuck || cauchy) {
        ConvergenceVerdict::NotConverged
    } else {
        ConvergenceVerdict::Inconclusive
    };
    Ok(ConvergenceReport {
        displacement,
        angles,
        final_angle,
        verdict,
        limit: last.clone(),
    })
}

/// Max node distance between two patches on the same grid.
pub fn patch_distance(a: &SurfacePatch, b: &SurfacePatch) -> f64 {
    a.points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}
