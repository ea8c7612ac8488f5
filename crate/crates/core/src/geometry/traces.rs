use rayon::prelude::*;

use super::sup::{involutivity_constant, inverse_norm_sup, restricted_dnorm, restriction_norm};
use super::{BoxDomain, FrameSection, KernelField, PlaneField, SupProtocol};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, spectral_norm};
use crate::report::Csv;

/// One step of an involutivity or regularity trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub k: usize,
    /// `‖dA^k|_{E^k}‖_∞` (involutivity) or `‖B^k|_E‖_∞` (regularity).
    pub norm: f64,
    pub inv_norm: f64,
    pub m_a: f64,
    /// `norm · inv_norm · e^{ε·m_a}`.
    pub q: f64,
    /// Strong-form surrogate (NaN when not computable).
    pub strong: f64,
}

fn check_annihilates(frame: &FrameSection, field: &dyn PlaneField, points: &[Vec<f64>]) -> Result<()> {
    let worst = points
        .par_iter()
        .map(|p| -> Result<f64> {
            let a = frame.matrix_at(p);
            let b = orthonormalize(&field.basis_at(p)?)?;
            Ok(spectral_norm(&(&a * b)) / spectral_norm(&a).max(1.0))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if worst > 1e-8 {
        return Err(Error::Invalid(format!(
            "frame does not annihilate its distribution (residual {worst:e})"
        )));
    }
    Ok(())
}

fn lattice_max(points: &[Vec<f64>], f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    points.par_iter().map(|p| f(p)).reduce(|| 0.0, f64::max)
}

/// `q_k = ‖dA^k|_{E^k}‖_∞ · ‖A^{-k}‖_∞ · e^{ε M^k_A}` and the strong
/// surrogate `max_j |η₁^k∧⋯∧ηₙ^k∧dη_j^k|_∞ · e^{ε max_i |dη_i^k|_∞}`.
pub fn asymptotic_involutivity_trace(
    frames: &[FrameSection],
    fields: &[&dyn PlaneField],
    eps: f64,
    region: &BoxDomain,
    proto: &SupProtocol,
) -> Result<Vec<TraceEntry>> {
    if frames.len() != fields.len() {
        return Err(Error::Shape(format!(
            "{} frames but {} distributions",
            frames.len(),
            fields.len()
        )));
    }
    let points = region.lattice(proto.lattice);
    let mut out = Vec::with_capacity(frames.len());
    for (k, (frame, field)) in frames.iter().zip(fields).enumerate() {
        check_annihilates(frame, *field, &points)?;
        let norm = restricted_dnorm(frame, *field, region, proto)?.value;
        let inv_norm = inverse_norm_sup(frame, region, proto.lattice)?.value;
        let m_a = involutivity_constant(frame, *field, region, proto)?.value;
        let defect = lattice_max(&points, |p| frame.defect_at(p));
        let dmax = lattice_max(&points, |p| frame.d_norm_at(p));
        out.push(TraceEntry {
            k: k + 1,
            norm,
            inv_norm,
            m_a,
            q: norm * inv_norm * (eps * m_a).exp(),
            strong: defect * (eps * dmax).exp(),
        });
    }
    Ok(out)
}

/// `q_k = ‖B^k|_E‖_∞ · ‖B^{-k}‖_∞ · e^{ε M^k_B}` against the limit field
/// `E`, and, when the limit frame `β` is given, the strong surrogate
/// `max_j |β_j^k − β_j|_∞ · e^{ε max_i |dβ_i^k|_∞}`.
pub fn exterior_regularity_trace(
    frames: &[FrameSection],
    limit: &dyn PlaneField,
    limit_frame: Option<&FrameSection>,
    eps: f64,
    region: &BoxDomain,
    proto: &SupProtocol,
) -> Result<Vec<TraceEntry>> {
    let points = region.lattice(proto.lattice);
    let mut out = Vec::with_capacity(frames.len());
    for (k, frame) in frames.iter().enumerate() {
        let norm = restriction_norm(frame, limit, region, proto.lattice)?.value;
        let inv_norm = inverse_norm_sup(frame, region, proto.lattice)?.value;
        let m_a = involutivity_constant(frame, &KernelField(frame), region, proto)?.value;
        let strong = match limit_frame {
            Some(beta) => {
                if beta.n() != frame.n() {
                    return Err(Error::Shape("limit frame has a different number of rows".into()));
                }
                let gap = lattice_max(&points, |p| {
                    let diff = frame.matrix_at(p) - beta.matrix_at(p);
                    diff.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
                });
                let dmax = lattice_max(&points, |p| frame.d_norm_at(p));
                gap * (eps * dmax).exp()
            }
            None => f64::NAN,
        };
        out.push(TraceEntry {
            k: k + 1,
            norm,
            inv_norm,
            m_a,
            q: norm * inv_norm * (eps * m_a).exp(),
            strong,
        });
    }
    Ok(out)
}

pub fn traces_to_csv(entries: &[TraceEntry]) -> Csv {
    let mut csv = Csv::new(["k", "norm", "inv_norm", "m_a", "q", "strong"]);
    for e in entries {
        csv.push_numbers(&[e.k as f64, e.norm, e.inv_norm, e.m_a, e.q, e.strong]);
    }
    csv
}
