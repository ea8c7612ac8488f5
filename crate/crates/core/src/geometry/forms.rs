use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::expr::Expr;

/// A differential k-form on ℝ^dim. Components are keyed by bitmask
/// multi-indices, so only increasing index sets are stored and
/// antisymmetry is structural.
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    dim: usize,
    degree: usize,
    terms: BTreeMap<u32, Expr>,
}

/// A form evaluated at a point: `(multi-index mask, value)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct FormValue {
    pub degree: usize,
    pub comps: Vec<(u32, f64)>,
}

impl FormValue {
    /// Euclidean norm over increasing multi-index components.
    pub fn norm(&self) -> f64 {
        self.comps.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// For a 2-form, the antisymmetric matrix `Ω` with `ω(u, v) = uᵀΩv`.
    pub fn two_form_matrix(&self, dim: usize) -> DMatrix<f64> {
        assert_eq!(self.degree, 2, "not a 2-form");
        let mut m = DMatrix::zeros(dim, dim);
        for &(mask, v) in &self.comps {
            let i = mask.trailing_zeros() as usize;
            let j = (mask & !(1 << i)).trailing_zeros() as usize;
            m[(i, j)] += v;
            m[(j, i)] -= v;
        }
        m
    }

    /// For a 1-form, its component row.
    pub fn covector(&self, dim: usize) -> Vec<f64> {
        assert_eq!(self.degree, 1, "not a 1-form");
        let mut row = vec![0.0; dim];
        for &(mask, v) in &self.comps {
            row[mask.trailing_zeros() as usize] += v;
        }
        row
    }
}

fn indices(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask & (1 << i) != 0)
}

impl Form {
    pub fn zero(dim: usize, degree: usize) -> Form {
        assert!(dim <= 32, "at most 32 coordinates");
        Form {
            dim,
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// `Σ coeffs[i] dx^i`.
    pub fn one_form(coeffs: Vec<Expr>) -> Form {
        let mut f = Form::zero(coeffs.len(), 1);
        for (i, c) in coeffs.into_iter().enumerate() {
            f.add_term(1 << i, c);
        }
        f
    }

    pub fn coordinate(dim: usize, i: usize) -> Form {
        let mut f = Form::zero(dim, 1);
        f.add_term(1 << i, Expr::one());
        f
    }

    /// The 0-form `f`.
    pub fn function(dim: usize, f: Expr) -> Form {
        let mut out = Form::zero(dim, 0);
        out.add_term(0, f);
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &Expr)> {
        self.terms.iter().map(|(m, e)| (*m, e))
    }

    pub fn component(&self, mask: u32) -> Expr {
        self.terms.get(&mask).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, mask: u32, e: Expr) {
        if e.is_zero() {
            return;
        }
        let merged = match self.terms.remove(&mask) {
            Some(prev) => prev + e,
            None => e,
        };
        if !merged.is_zero() {
            self.terms.insert(mask, merged);
        }
    }

    pub fn add(&self, other: &Form) -> Form {
        assert_eq!((self.dim, self.degree), (other.dim, other.degree));
        let mut out = self.clone();
        for (m, e) in &other.terms {
            out.add_term(*m, e.clone());
        }
        out
    }

    pub fn scale(&self, f: &Expr) -> Form {
        let mut out = Form::zero(self.dim, self.degree);
        for (m, e) in &self.terms {
            out.add_term(*m, f.clone() * e.clone());
        }
        out
    }

    pub fn wedge(&self, other: &Form) -> Form {
        assert_eq!(self.dim, other.dim);
        let degree = self.degree + other.degree;
        let mut out = Form::zero(self.dim, degree);
        if degree > self.dim {
            return out;
        }
        for (&m1, e1) in &self.terms {
            for (&m2, e2) in &other.terms {
                if m1 & m2 != 0 {
                    continue;
                }
                // sign of sorting the concatenated index list
                let swaps: u32 = indices(m2).map(|j| (m1 >> (j + 1)).count_ones()).sum();
                let prod = e1.clone() * e2.clone();
                let term = if swaps.is_multiple_of(2) { prod } else { -prod };
                out.add_term(m1 | m2, term);
            }
        }
        out
    }

    /// Exterior derivative by exact symbolic differentiation.
    pub fn d(&self) -> Form {
        let mut out = Form::zero(self.dim, self.degree + 1);
        if self.degree >= self.dim {
            return out;
        }
        for (&m, e) in &self.terms {
            for v in 0..self.dim {
                if m & (1 << v) != 0 {
                    continue;
                }
                let de = e.diff(v);
                if de.is_zero() {
                    continue;
                }
                let below = (m & ((1u32 << v) - 1)).count_ones();
                out.add_term(m | (1 << v), if below.is_multiple_of(2) { de } else { -de });
            }
        }
        out
    }

    /// Pairing of a 1-form with a vector field given by component expressions.
    pub fn contract(&self, field: &[Expr]) -> Expr {
        assert_eq!(self.degree, 1);
        Expr::sum(
            self.terms
                .iter()
                .map(|(m, e)| e.clone() * field[m.trailing_zeros() as usize].clone())
                .collect(),
        )
    }

    pub fn eval(&self, p: &[f64]) -> FormValue {
        FormValue {
            degree: self.degree,
            comps: self.terms.iter().map(|(m, e)| (*m, e.eval(p))).collect(),
        }
    }

    pub fn substitute(&self, values: &[Expr]) -> Form {
        let mut out = Form::zero(self.dim, self.degree);
        for (m, e) in &self.terms {
            out.add_term(*m, e.substitute(values));
        }
        out
    }

    /// Component-wise text such as `-y*dx + dz` or `(1.0)*dx^dy`.
    pub fn render(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (m, e) in &self.terms {
            let basis: Vec<String> = indices(*m)
                .map(|i| format!("d{}", names.get(i).cloned().unwrap_or_else(|| format!("x{i}"))))
                .collect();
            let basis = basis.join("^");
            let coef = e.display(names).to_string();
            parts.push(if *m == 0 {
                coef
            } else if e.as_const() == Some(1.0) {
                basis
            } else {
                format!("({coef})*{basis}")
            });
        }
        parts.join(" + ")
    }
}
