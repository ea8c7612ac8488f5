//! Exterior calculus on coordinate boxes: forms, graph-form distributions,
//! annihilator frames and the sup-norm functionals built from them.

mod distribution;
mod forms;
mod sup;
mod traces;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use distribution::{annihilator_frame, Distribution, FrameSection, KernelField, RestrictedInverse};
pub use forms::{Form, FormValue};
pub use sup::{
    bilinear_sup, compatibility_norm, frobenius_defect, involutivity_constant, inverse_norm_sup,
    restricted_dnorm, restriction_norm, SupEstimate,
};
pub use traces::{asymptotic_involutivity_trace, exterior_regularity_trace, traces_to_csv, TraceEntry};

use crate::error::{Error, Result};
use crate::numeric::linspace;

/// Axis-aligned box `[lo, hi]` in ℝ^dim.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<BoxDomain> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Shape("box corners differ in dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::Domain(format!("empty box {lo:?} .. {hi:?}")));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> BoxDomain {
        BoxDomain {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Tensor lattice with `per_axis` points per axis (corners included;
    /// degenerate axes contribute one point).
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                if a == b || per_axis <= 1 {
                    vec![0.5 * (a + b)]
                } else {
                    linspace(*a, *b, per_axis)
                }
            })
            .collect();
        let mut out = vec![Vec::with_capacity(self.dim())];
        for axis in &axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for p in &out {
                for v in axis {
                    let mut q = p.clone();
                    q.push(*v);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    /// Smallest box containing the points.
    pub fn bounding(points: &[Vec<f64>]) -> Result<BoxDomain> {
        let first = points.first().ok_or_else(|| Error::Shape("no points".into()))?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            for d in 0..p.len() {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        BoxDomain::new(lo, hi)
    }
}

/// A field of m-planes in ℝ^dim, queried pointwise.
pub trait PlaneField: Sync {
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    /// Columns spanning the plane at `p` (not necessarily orthonormal).
    fn basis_at(&self, p: &[f64]) -> Result<DMatrix<f64>>;
}

/// Sampling protocol for sup-norm estimates; recorded in every report.
#[derive(Clone, Debug, PartialEq)]
pub struct SupProtocol {
    /// Lattice points per axis over the region.
    pub lattice: usize,
    /// Random direction pairs per lattice point.
    pub n_dirs: usize,
    /// Alternating refinement rounds per direction pair.
    pub rounds: usize,
    pub seed: u64,
}

impl Default for SupProtocol {
    fn default() -> Self {
        SupProtocol {
            lattice: 17,
            n_dirs: 256,
            rounds: 3,
            seed: 0,
        }
    }
}

impl SupProtocol {
    pub fn describe(&self) -> String {
        format!(
            "lattice={} n_dirs={} rounds={} seed={}",
            self.lattice, self.n_dirs, self.rounds, self.seed
        )
    }

    pub(crate) fn rng_for(&self, index: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(
            self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        )
    }
}
