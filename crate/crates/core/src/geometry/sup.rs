use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{BoxDomain, FrameSection, PlaneField, SupProtocol};
use crate::error::Result;
use crate::linalg::{orthonormalize, spectral_norm};

/// A sampled supremum (a lower bound for the true one).
#[derive(Clone, Debug, PartialEq)]
pub struct SupEstimate {
    pub value: f64,
    /// Lattice point attaining the value.
    pub at: Vec<f64>,
    pub protocol: String,
}

fn unit<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 && n.is_finite() {
        v.iter_mut().for_each(|x| *x /= n);
        true
    } else {
        false
    }
}

/// `sup_{|a|=|b|=1} |(aᵀ S_r b)_r|` for a family of p×q matrices.
///
/// When either sphere is a point (p = 1 or q = 1) the sup is a singular
/// value and is computed exactly. Otherwise `n_dirs` random starting pairs
/// are each refined by `rounds` of alternating power steps, and the largest
/// value found is returned; starting pairs are drawn in a fixed order, so
/// the estimate is nondecreasing in `n_dirs`.
pub fn bilinear_sup<R: Rng>(mats: &[DMatrix<f64>], n_dirs: usize, rounds: usize, rng: &mut R) -> f64 {
    let Some(first) = mats.first() else {
        return 0.0;
    };
    let (p, q) = first.shape();
    if p == 0 || q == 0 {
        return 0.0;
    }
    if p == 1 || q == 1 {
        let len = if p == 1 { q } else { p };
        let mut g = DMatrix::zeros(mats.len(), len);
        for (r, s) in mats.iter().enumerate() {
            for k in 0..len {
                g[(r, k)] = if p == 1 { s[(0, k)] } else { s[(k, 0)] };
            }
        }
        return spectral_norm(&g);
    }
    let value = |a: &[f64], b: &[f64]| -> f64 {
        mats.iter()
            .map(|s| {
                let mut t = 0.0;
                for i in 0..p {
                    for j in 0..q {
                        t += a[i] * s[(i, j)] * b[j];
                    }
                }
                t * t
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut best = 0.0f64;
    for _ in 0..n_dirs.max(1) {
        let mut a = unit(rng, p);
        let mut b = unit(rng, q);
        best = best.max(value(&a, &b));
        for _ in 0..rounds {
            for _ in 0..4 {
                // a ← Σ_r (S_r b)(S_r b)ᵀ a
                let mut next = vec![0.0; p];
                for s in mats {
                    let g: Vec<f64> = (0..p).map(|i| (0..q).map(|j| s[(i, j)] * b[j]).sum()).collect();
                    let c: f64 = g.iter().zip(&a).map(|(x, y)| x * y).sum();
                    next.iter_mut().zip(&g).for_each(|(n, x)| *n += c * x);
                }
                if normalize(&mut next) {
                    a = next;
                }
            }
            for _ in 0..4 {
                let mut next = vec![0.0; q];
                for s in mats {
                    let h: Vec<f64> = (0..q).map(|j| (0..p).map(|i| s[(i, j)] * a[i]).sum()).collect();
                    let c: f64 = h.iter().zip(&b).map(|(x, y)| x * y).sum();
                    next.iter_mut().zip(&h).for_each(|(n, x)| *n += c * x);
                }
                if normalize(&mut next) {
                    b = next;
                }
            }
            best = best.max(value(&a, &b));
        }
    }
    best
}

fn sup_over<F>(points: &[Vec<f64>], protocol: String, f: F) -> Result<SupEstimate>
where
    F: Fn(usize, &[f64]) -> Result<f64> + Sync,
{
    let values: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| f(i, p))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = SupEstimate {
        value: 0.0,
        at: points.first().cloned().unwrap_or_default(),
        protocol,
    };
    for (v, p) in values.into_iter().zip(points) {
        if v > best.value || v.is_nan() {
            best.value = v;
            best.at = p.clone();
        }
    }
    Ok(best)
}

/// `max_j |η₁∧⋯∧ηₙ∧dη_j|` at each point.
pub fn frobenius_defect(frame: &FrameSection, points: &[Vec<f64>]) -> Vec<f64> {
    points.par_iter().map(|p| frame.defect_at(p)).collect()
}

/// `M_A = sup |dA_p(A_p^{-1} w, v)|` over unit `w ∈ ℝⁿ`, unit `v ∈ E_p` and
/// lattice points `p` of the region.
pub fn involutivity_constant(
    frame: &FrameSection,
    field: &dyn PlaneField,
    region: &BoxDomain,
    proto: &SupProtocol,
) -> Result<SupEstimate> {
    let points = region.lattice(proto.lattice);
    sup_over(&points, proto.describe(), |i, p| {
        let inv = frame.restricted_inverse(p)?.embedded(frame.dim(), frame.transverse());
        let b = orthonormalize(&field.basis_at(p)?)?;
        let mats: Vec<DMatrix<f64>> = frame
            .d_matrices_at(p)
            .iter()
            .map(|om| inv.transpose() * om * &b)
            .collect();
        Ok(bilinear_sup(&mats, proto.n_dirs, proto.rounds, &mut proto.rng_for(i)))
    })
}

/// `‖dA|_E‖_∞ = sup |dA_p(u, v)|` over unit `u, v ∈ E_p`.
pub fn restricted_dnorm(
    frame: &FrameSection,
    field: &dyn PlaneField,
    region: &BoxDomain,
    proto: &SupProtocol,
) -> Result<SupEstimate> {
    let points = region.lattice(proto.lattice);
    sup_over(&points, proto.describe(), |i, p| {
        let b = orthonormalize(&field.basis_at(p)?)?;
        let mats: Vec<DMatrix<f64>> = frame
            .d_matrices_at(p)
            .iter()
            .map(|om| b.transpose() * om * &b)
            .collect();
        Ok(bilinear_sup(&mats, proto.n_dirs, proto.rounds, &mut proto.rng_for(i)))
    })
}

/// `‖A^{-1}‖_∞` over the lattice.
pub fn inverse_norm_sup(frame: &FrameSection, region: &BoxDomain, lattice: usize) -> Result<SupEstimate> {
    let points = region.lattice(lattice);
    sup_over(&points, format!("lattice={lattice}"), |_, p| {
        Ok(frame.restricted_inverse(p)?.norm)
    })
}

/// `‖A|_E‖_∞ = sup |A_p v|` over unit `v ∈ E_p`.
pub fn restriction_norm(
    frame: &FrameSection,
    field: &dyn PlaneField,
    region: &BoxDomain,
    lattice: usize,
) -> Result<SupEstimate> {
    let points = region.lattice(lattice);
    sup_over(&points, format!("lattice={lattice}"), |_, p| {
        let b = orthonormalize(&field.basis_at(p)?)?;
        Ok(spectral_norm(&(frame.matrix_at(p) * b)))
    })
}

/// `‖A1_p ∘ (A2_p|_𝒴)^{-1}‖`.
pub fn compatibility_norm(a1: &FrameSection, a2: &FrameSection, p: &[f64]) -> Result<f64> {
    let inv = a2.restricted_inverse(p)?.embedded(a2.dim(), a2.transverse());
    Ok(spectral_norm(&(a1.matrix_at(p) * inv)))
}
