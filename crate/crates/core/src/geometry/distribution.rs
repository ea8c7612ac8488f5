use nalgebra::DMatrix;

use super::{BoxDomain, Form, PlaneField};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, VectorField};

/// Rank-m distribution in graph form over coordinates
/// `(x¹..x^m, y¹..yⁿ)`: spanned by `X_i = ∂/∂x^i + Σ_j a_ij ∂/∂y^j`.
#[derive(Clone, Debug)]
pub struct Distribution {
    names: Vec<String>,
    m: usize,
    n: usize,
    /// `coeffs[i][j] = a_ij`.
    coeffs: Vec<Vec<Expr>>,
    domain: BoxDomain,
    fields: Vec<VectorField>,
}

impl Distribution {
    pub fn new(
        names: Vec<String>,
        m: usize,
        coeffs: Vec<Vec<Expr>>,
        domain: BoxDomain,
    ) -> Result<Distribution> {
        let dim = names.len();
        if m == 0 || m >= dim {
            return Err(Error::Shape(format!("rank {m} in dimension {dim}")));
        }
        let n = dim - m;
        if coeffs.len() != m || coeffs.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("coefficient matrix must be {m}×{n}")));
        }
        if domain.dim() != dim {
            return Err(Error::Shape("domain dimension differs from coordinates".into()));
        }
        let fields = coeffs
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut comps = vec![Expr::zero(); dim];
                comps[i] = Expr::one();
                for (j, a) in row.iter().enumerate() {
                    comps[m + j] = a.clone();
                }
                VectorField::new(comps)
            })
            .collect();
        Ok(Distribution {
            names,
            m,
            n,
            coeffs,
            domain,
            fields,
        })
    }

    /// Parses `a_ij` from `sources[i][j]`.
    pub fn parse(
        names: Vec<String>,
        m: usize,
        sources: &[Vec<String>],
        domain: BoxDomain,
    ) -> Result<Distribution> {
        let coeffs = sources
            .iter()
            .map(|row| row.iter().map(|s| parse_expr(s, &names)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Distribution::new(names, m, coeffs, domain)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn ambient(&self) -> usize {
        self.m + self.n
    }
    pub fn coeff(&self, i: usize, j: usize) -> &Expr {
        &self.coeffs[i][j]
    }
    pub fn coeffs(&self) -> &[Vec<Expr>] {
        &self.coeffs
    }
    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }
    pub fn field(&self, i: usize) -> &VectorField {
        &self.fields[i]
    }
    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Result<Distribution> {
        if domain.dim() != self.ambient() {
            return Err(Error::Shape("domain dimension differs from coordinates".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    /// Transverse (vertical) coordinate indices `m..m+n`.
    pub fn vertical(&self) -> Vec<usize> {
        (self.m..self.m + self.n).collect()
    }
}

impl PlaneField for Distribution {
    fn dim(&self) -> usize {
        self.ambient()
    }

    fn rank(&self) -> usize {
        self.m
    }

    fn basis_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let dim = self.ambient();
        let mut b = DMatrix::zeros(dim, self.m);
        for i in 0..self.m {
            b[(i, i)] = 1.0;
            for j in 0..self.n {
                let v = self.coeffs[i][j].eval(p);
                if !v.is_finite() {
                    return Err(Error::NonFinite { point: p.to_vec() });
                }
                b[(self.m + j, i)] = v;
            }
        }
        Ok(b)
    }
}

/// An n×(m+n) matrix of 1-forms together with its exterior derivative and
/// the designated transverse coordinates `𝒴 = span{∂/∂y}`.
#[derive(Clone, Debug)]
pub struct FrameSection {
    dim: usize,
    rows: Vec<Form>,
    d_rows: Vec<Form>,
    defect_forms: Vec<Form>,
    transverse: Vec<usize>,
}

/// `(A_p|_𝒴)^{-1}`: maps `w ∈ ℝⁿ` to the transverse components of a vector.
#[derive(Clone, Debug)]
pub struct RestrictedInverse {
    pub matrix: DMatrix<f64>,
    pub norm: f64,
}

impl RestrictedInverse {
    /// The inverse as a `dim × n` map into ℝ^dim.
    pub fn embedded(&self, dim: usize, transverse: &[usize]) -> DMatrix<f64> {
        let n = transverse.len();
        let mut out = DMatrix::zeros(dim, n);
        for (r, &t) in transverse.iter().enumerate() {
            for c in 0..n {
                out[(t, c)] = self.matrix[(r, c)];
            }
        }
        out
    }
}

impl FrameSection {
    pub fn new(rows: Vec<Form>, transverse: Vec<usize>) -> Result<FrameSection> {
        let dim = rows.first().map(|r| r.dim()).ok_or_else(|| Error::Shape("empty frame".into()))?;
        if rows.iter().any(|r| r.degree() != 1 || r.dim() != dim) {
            return Err(Error::Shape("frame rows must be 1-forms on the same space".into()));
        }
        if transverse.len() != rows.len() || transverse.iter().any(|&t| t >= dim) {
            return Err(Error::Shape("need one transverse coordinate per row".into()));
        }
        let d_rows: Vec<Form> = rows.iter().map(Form::d).collect();
        let mut top = rows[0].clone();
        for r in &rows[1..] {
            top = top.wedge(r);
        }
        let defect_forms = d_rows.iter().map(|d| top.wedge(d)).collect();
        Ok(FrameSection {
            dim,
            rows,
            d_rows,
            defect_forms,
            transverse,
        })
    }

    /// Rows parsed from 1-form text such as `dz - y*dx`; the transverse
    /// coordinates default to the last n.
    pub fn parse(sources: &[String], names: &[String]) -> Result<FrameSection> {
        let rows = sources
            .iter()
            .map(|s| Ok(Form::one_form(crate::expr::parse_one_form(s, names)?)))
            .collect::<Result<Vec<_>>>()?;
        let dim = names.len();
        let n = rows.len();
        if n >= dim {
            return Err(Error::Shape(format!("{n} rows in dimension {dim}")));
        }
        FrameSection::new(rows, (dim - n..dim).collect())
    }

    /// The same rows with different transverse coordinates.
    pub fn with_transverse(self, transverse: Vec<usize>) -> Result<FrameSection> {
        FrameSection::new(self.rows, transverse)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n(&self) -> usize {
        self.rows.len()
    }
    pub fn rows(&self) -> &[Form] {
        &self.rows
    }
    pub fn d_rows(&self) -> &[Form] {
        &self.d_rows
    }
    pub fn transverse(&self) -> &[usize] {
        &self.transverse
    }

    /// `η₁∧⋯∧ηₙ∧dη_j` for each j.
    pub fn defect_forms(&self) -> &[Form] {
        &self.defect_forms
    }

    pub fn scaled(&self, c: &Expr) -> Result<FrameSection> {
        FrameSection::new(
            self.rows.iter().map(|r| r.scale(c)).collect(),
            self.transverse.clone(),
        )
    }

    pub fn matrix_at(&self, p: &[f64]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n(), self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for (c, v) in row.eval(p).covector(self.dim).into_iter().enumerate() {
                a[(r, c)] = v;
            }
        }
        a
    }

    /// Antisymmetric matrices of `dη_r` at `p`.
    pub fn d_matrices_at(&self, p: &[f64]) -> Vec<DMatrix<f64>> {
        self.d_rows
            .iter()
            .map(|d| d.eval(p).two_form_matrix(self.dim))
            .collect()
    }

    pub fn restricted_inverse(&self, p: &[f64]) -> Result<RestrictedInverse> {
        let a = self.matrix_at(p);
        let n = self.n();
        let mut block = DMatrix::zeros(n, n);
        for r in 0..n {
            for (c, &t) in self.transverse.iter().enumerate() {
                block[(r, c)] = a[(r, t)];
            }
        }
        let sv = block.singular_values();
        let (smin, smax) = (sv.min(), sv.max());
        if !(smin > 1e-12 * smax.max(1e-300)) || !smin.is_finite() {
            return Err(Error::Transversality { point: p.to_vec() });
        }
        let matrix = block
            .try_inverse()
            .ok_or_else(|| Error::Transversality { point: p.to_vec() })?;
        Ok(RestrictedInverse {
            matrix,
            norm: 1.0 / smin,
        })
    }

    /// `max_j |η₁∧⋯∧ηₙ∧dη_j(p)|`.
    pub fn defect_at(&self, p: &[f64]) -> f64 {
        self.defect_forms
            .iter()
            .map(|f| f.eval(p).norm())
            .fold(0.0, f64::max)
    }

    /// `max_i |dη_i(p)|`.
    pub fn d_norm_at(&self, p: &[f64]) -> f64 {
        self.d_rows.iter().map(|f| f.eval(p).norm()).fold(0.0, f64::max)
    }

    /// Symbolic pairings `η_j(X_i)`, which vanish identically for an
    /// annihilator of the distribution.
    pub fn pairings(&self, d: &Distribution) -> Vec<Vec<Expr>> {
        d.fields()
            .iter()
            .map(|x| self.rows.iter().map(|r| r.contract(x.components())).collect())
            .collect()
    }

    pub fn render(&self, names: &[String]) -> Vec<String> {
        self.rows.iter().map(|r| r.render(names)).collect()
    }
}

/// `η_j = dy^j − Σ_i a_ij dx^i`.
pub fn annihilator_frame(d: &Distribution) -> FrameSection {
    let (m, n) = (d.m(), d.n());
    let dim = m + n;
    let rows = (0..n)
        .map(|j| {
            let mut coeffs = vec![Expr::zero(); dim];
            coeffs[m + j] = Expr::one();
            for (i, c) in coeffs.iter_mut().enumerate().take(m) {
                *c = -d.coeff(i, j).clone();
            }
            Form::one_form(coeffs)
        })
        .collect();
    FrameSection::new(rows, d.vertical()).expect("annihilator frame shape is valid by construction")
}

/// The plane field `ker A`, in graph form over the non-transverse
/// coordinates.
pub struct KernelField<'a>(pub &'a FrameSection);

impl PlaneField for KernelField<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn rank(&self) -> usize {
        self.0.dim() - self.0.n()
    }

    fn basis_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let f = self.0;
        let a = f.matrix_at(p);
        let inv = f.restricted_inverse(p)?;
        let free: Vec<usize> = (0..f.dim()).filter(|c| !f.transverse().contains(c)).collect();
        let mut b = DMatrix::zeros(f.dim(), free.len());
        for (k, &c) in free.iter().enumerate() {
            b[(c, k)] = 1.0;
            let rhs = a.column(c);
            let y = &inv.matrix * rhs;
            for (r, &t) in f.transverse().iter().enumerate() {
                b[(t, k)] = -y[r];
            }
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn annihilator_examples() {
        let d = Distribution::parse(
            names(&["x", "y"]),
            1,
            &[vec!["y".into()]],
            BoxDomain::cube(2, -1.0, 1.0),
        )
        .unwrap();
        let f = annihilator_frame(&d);
        assert_eq!(f.render(d.names()), vec!["(-y)*dx + dy"]);
        assert!(f.pairings(&d).iter().flatten().all(Expr::is_zero));

        let d = Distribution::parse(
            names(&["x1", "x2", "y"]),
            2,
            &[vec!["y".into()], vec!["0".into()]],
            BoxDomain::cube(3, -1.0, 1.0),
        )
        .unwrap();
        assert_eq!(annihilator_frame(&d).render(d.names()), vec!["(-y)*dx1 + dy"]);

        let d = Distribution::parse(
            names(&["x", "y1", "y2"]),
            1,
            &[vec!["0".into(), "0".into()]],
            BoxDomain::cube(3, -1.0, 1.0),
        )
        .unwrap();
        assert_eq!(annihilator_frame(&d).render(d.names()), vec!["dy1", "dy2"]);
    }

    #[test]
    fn restricted_inverse_norms() {
        let n = names(&["x", "y1", "y2"]);
        let f = FrameSection::parse(&["dy1".into(), "dy2".into()], &n).unwrap();
        assert!((f.restricted_inverse(&[0.0; 3]).unwrap().norm - 1.0).abs() < 1e-15);
        let f2 = f.scaled(&Expr::c(2.0)).unwrap();
        assert!((f2.restricted_inverse(&[0.0; 3]).unwrap().norm - 0.5).abs() < 1e-15);
        let g = FrameSection::parse(&["dy1".into(), "0.01*dy2".into()], &n).unwrap();
        assert!((g.restricted_inverse(&[0.0; 3]).unwrap().norm - 100.0).abs() < 1e-9);
        let s = FrameSection::parse(&["dy1".into(), "dx".into()], &n).unwrap();
        assert!(matches!(
            s.restricted_inverse(&[0.0; 3]),
            Err(Error::Transversality { .. })
        ));
    }

    #[test]
    fn kernel_field_spans_kernel() {
        let n = names(&["x", "y", "z"]);
        let f = FrameSection::parse(&["dz - y*dx".into()], &n).unwrap();
        let p = [0.3, -0.7, 0.2];
        let b = KernelField(&f).basis_at(&p).unwrap();
        let prod = f.matrix_at(&p) * b;
        assert!(prod.norm() < 1e-15);
    }
}
