//! Symbolic scalar fields over indexed coordinates.
//!
//! Expressions are kept in a canonical form by the smart constructors
//! ([`Expr::sum`], [`Expr::product`], [`Expr::pow`], ...): sums and products
//! are flattened, constants folded, like terms and like powers collected,
//! products distributed over sums and operands sorted. Two expressions that
//! are equal as polynomials in their atoms therefore compare equal, which is
//! what makes `d(dω) == 0` hold structurally.

mod display;
mod parse;
mod table;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

pub use display::ExprDisplay;
pub use parse::{parse_expr, parse_one_form};
pub use table::{Axis, Table};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Abs,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Log => {
                if v < 0.0 {
                    f64::NAN
                } else {
                    v.ln()
                }
            }
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A tabulated function of some of the expression's arguments, together with
/// the partial-derivative multi-index to evaluate.
#[derive(Clone, Debug)]
pub struct Sampled {
    pub table: Arc<Table>,
    pub order: Vec<u8>,
    pub args: Vec<Expr>,
}

#[derive(Clone, Debug)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Apply(Func, Box<Expr>),
    Sampled(Sampled),
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        // normalise -0.0 so that structural comparison is not sign-sensitive
        Expr::Const(if v == 0.0 { 0.0 } else { v })
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(terms.len());
        let mut constant = 0.0;
        let mut stack: Vec<Expr> = terms;
        while let Some(t) = stack.pop() {
            match t {
                Expr::Sum(inner) => stack.extend(inner),
                Expr::Const(v) => constant += v,
                other => flat.push(split_coefficient(other)),
            }
        }
        flat.sort_by(|a, b| a.1.cmp(&b.1));
        let mut out: Vec<Expr> = Vec::with_capacity(flat.len() + 1);
        let mut iter = flat.into_iter().peekable();
        while let Some((mut coef, key)) = iter.next() {
            while let Some((c2, _)) = iter.next_if(|(_, k)| *k == key) {
                coef += c2;
            }
            if coef != 0.0 {
                out.push(with_coefficient(coef, key));
            }
        }
        if constant != 0.0 {
            out.insert(0, Expr::c(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::Sum(out),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut coef = 1.0;
        let mut plain: Vec<Expr> = Vec::with_capacity(factors.len());
        let mut sums: Vec<Vec<Expr>> = Vec::new();
        let mut stack = factors;
        while let Some(f) = stack.pop() {
            match f {
                Expr::Product(inner) => stack.extend(inner),
                Expr::Const(v) => coef *= v,
                Expr::Sum(terms) => sums.push(terms),
                other => plain.push(other),
            }
        }
        if coef == 0.0 {
            return Expr::zero();
        }
        if !sums.is_empty() {
            let mut head = plain;
            if coef != 1.0 {
                head.push(Expr::c(coef));
            }
            let mut acc = vec![Expr::product(head)];
            for terms in sums {
                let mut next = Vec::with_capacity(acc.len() * terms.len());
                for a in &acc {
                    for t in &terms {
                        next.push(Expr::product(vec![a.clone(), t.clone()]));
                    }
                }
                acc = next;
            }
            return Expr::sum(acc);
        }

        // collect powers of equal bases
        let mut based: Vec<(Expr, Expr)> = plain
            .into_iter()
            .map(|f| match f {
                Expr::Pow(b, e) => (*b, *e),
                other => (other, Expr::one()),
            })
            .collect();
        based.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<Expr> = Vec::with_capacity(based.len());
        let mut reopened = false;
        let mut iter = based.into_iter().peekable();
        while let Some((base, exp)) = iter.next() {
            let mut exps = vec![exp];
            while let Some((_, e2)) = iter.next_if(|(b, _)| *b == base) {
                exps.push(e2);
            }
            let exp = if exps.len() == 1 {
                exps.pop().unwrap()
            } else {
                Expr::sum(exps)
            };
            match Expr::pow(base, exp) {
                Expr::Const(v) => coef *= v,
                Expr::Product(inner) => {
                    for f in inner {
                        match f {
                            Expr::Const(v) => coef *= v,
                            other => out.push(other),
                        }
                    }
                }
                sum @ Expr::Sum(_) => {
                    // a power of a sum collapsed to the sum itself
                    reopened = true;
                    out.push(sum);
                }
                other => out.push(other),
            }
        }
        if coef == 0.0 {
            return Expr::zero();
        }
        if reopened {
            out.push(Expr::c(coef));
            return Expr::product(out);
        }
        out.sort();
        if coef != 1.0 {
            out.insert(0, Expr::c(coef));
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Expr::Product(out),
        }
    }

    pub fn pow(base: Expr, exp: Expr) -> Expr {
        if let Some(e) = exp.as_const() {
            if e == 0.0 {
                return Expr::one();
            }
            if e == 1.0 {
                return base;
            }
            if let Some(b) = base.as_const() {
                return Expr::c(b.powf(e));
            }
            let integral = e.fract() == 0.0;
            match base {
                Expr::Pow(b2, e2) if integral => {
                    return Expr::pow(*b2, Expr::product(vec![*e2, Expr::c(e)]));
                }
                Expr::Product(fs) if integral => {
                    return Expr::product(
                        fs.into_iter().map(|f| Expr::pow(f, Expr::c(e))).collect(),
                    );
                }
                base => return Expr::Pow(Box::new(base), Box::new(exp)),
            }
        }
        if base.as_const() == Some(1.0) {
            return Expr::one();
        }
        Expr::Pow(Box::new(base), Box::new(exp))
    }

    pub fn powf(self, e: f64) -> Expr {
        Expr::pow(self, Expr::c(e))
    }

    pub fn recip(self) -> Expr {
        Expr::pow(self, Expr::c(-1.0))
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        if let Some(v) = arg.as_const() {
            let r = f.apply(v);
            if r.is_finite() {
                return Expr::c(r);
            }
        }
        match (f, &arg) {
            (Func::Log, Expr::Apply(Func::Exp, inner)) => return (**inner).clone(),
            (Func::Abs, Expr::Apply(Func::Abs, _)) => return arg,
            _ => {}
        }
        Expr::Apply(f, Box::new(arg))
    }

    pub fn exp(self) -> Expr {
        Expr::apply(Func::Exp, self)
    }
    pub fn ln(self) -> Expr {
        Expr::apply(Func::Log, self)
    }
    pub fn sin(self) -> Expr {
        Expr::apply(Func::Sin, self)
    }
    pub fn cos(self) -> Expr {
        Expr::apply(Func::Cos, self)
    }
    pub fn abs(self) -> Expr {
        Expr::apply(Func::Abs, self)
    }
    pub fn sign(self) -> Expr {
        Expr::apply(Func::Sign, self)
    }

    pub fn sampled(table: Arc<Table>, args: Vec<Expr>) -> Result<Expr> {
        if args.len() != table.dims() {
            return Err(Error::Shape(format!(
                "table of dimension {} applied to {} arguments",
                table.dims(),
                args.len()
            )));
        }
        let order = vec![0; args.len()];
        Ok(Expr::Sampled(Sampled { table, order, args }))
    }

    fn rank(&self) -> u8 {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(_) => 1,
            Expr::Pow(..) => 2,
            Expr::Apply(..) => 3,
            Expr::Sampled(_) => 4,
            Expr::Product(_) => 5,
            Expr::Sum(_) => 6,
        }
    }

    /// Whether the expression mentions coordinate `v`.
    pub fn depends_on(&self, v: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => *i == v,
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().any(|t| t.depends_on(v)),
            Expr::Pow(b, e) => b.depends_on(v) || e.depends_on(v),
            Expr::Apply(_, a) => a.depends_on(v),
            Expr::Sampled(s) => s.args.iter().any(|a| a.depends_on(v)),
        }
    }

    pub fn variables(&self) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        self.collect_vars(&mut set);
        set
    }

    fn collect_vars(&self, set: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                set.insert(*i);
            }
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().for_each(|t| t.collect_vars(set)),
            Expr::Pow(b, e) => {
                b.collect_vars(set);
                e.collect_vars(set);
            }
            Expr::Apply(_, a) => a.collect_vars(set),
            Expr::Sampled(s) => s.args.iter().for_each(|a| a.collect_vars(set)),
        }
    }

    /// Exact partial derivative with respect to coordinate `v`.
    pub fn diff(&self, v: usize) -> Expr {
        if !self.depends_on(v) {
            return Expr::zero();
        }
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(i) => {
                if *i == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Sum(ts) => Expr::sum(ts.iter().map(|t| t.diff(v)).collect()),
            Expr::Product(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    let df = f.diff(v);
                    if df.is_zero() {
                        continue;
                    }
                    let mut parts: Vec<Expr> = Vec::with_capacity(fs.len());
                    parts.extend(fs[..i].iter().cloned());
                    parts.push(df);
                    parts.extend(fs[i + 1..].iter().cloned());
                    terms.push(Expr::product(parts));
                }
                Expr::sum(terms)
            }
            Expr::Pow(b, e) => {
                if let Some(c) = e.as_const() {
                    Expr::product(vec![
                        Expr::c(c),
                        Expr::pow((**b).clone(), Expr::c(c - 1.0)),
                        b.diff(v),
                    ])
                } else if let Some(c) = b.as_const() {
                    Expr::product(vec![self.clone(), Expr::c(c.ln()), e.diff(v)])
                } else {
                    let inner = Expr::sum(vec![
                        Expr::product(vec![e.diff(v), (**b).clone().ln()]),
                        Expr::product(vec![(**e).clone(), b.diff(v), (**b).clone().recip()]),
                    ]);
                    Expr::product(vec![self.clone(), inner])
                }
            }
            Expr::Apply(f, a) => {
                let da = a.diff(v);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Log => (**a).clone().recip(),
                    Func::Sin => (**a).clone().cos(),
                    Func::Cos => -(**a).clone().sin(),
                    Func::Abs => (**a).clone().sign(),
                    Func::Sign => Expr::zero(),
                };
                Expr::product(vec![outer, da])
            }
            Expr::Sampled(s) => {
                let mut terms = Vec::new();
                for (a, arg) in s.args.iter().enumerate() {
                    let da = arg.diff(v);
                    if da.is_zero() {
                        continue;
                    }
                    let mut order = s.order.clone();
                    order[a] += 1;
                    let part = Expr::Sampled(Sampled {
                        table: s.table.clone(),
                        order,
                        args: s.args.clone(),
                    });
                    terms.push(Expr::product(vec![part, da]));
                }
                Expr::sum(terms)
            }
        }
    }

    pub fn gradient(&self, dim: usize) -> Vec<Expr> {
        (0..dim).map(|v| self.diff(v)).collect()
    }

    /// Replaces every coordinate `i` by `values[i]`, re-canonicalising.
    pub fn substitute(&self, values: &[Expr]) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(i) => values.get(*i).cloned().unwrap_or_else(|| self.clone()),
            Expr::Sum(ts) => Expr::sum(ts.iter().map(|t| t.substitute(values)).collect()),
            Expr::Product(fs) => Expr::product(fs.iter().map(|f| f.substitute(values)).collect()),
            Expr::Pow(b, e) => Expr::pow(b.substitute(values), e.substitute(values)),
            Expr::Apply(f, a) => Expr::apply(*f, a.substitute(values)),
            Expr::Sampled(s) => Expr::Sampled(Sampled {
                table: s.table.clone(),
                order: s.order.clone(),
                args: s.args.iter().map(|a| a.substitute(values)).collect(),
            }),
        }
    }

    /// Numerical value at `p`. Products containing an exact zero factor are
    /// zero even when another factor is infinite, which gives `s·log s` its
    /// continuous value at `s = 0`.
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => p[*i],
            Expr::Sum(ts) => ts.iter().map(|t| t.eval(p)).sum(),
            Expr::Product(fs) => {
                let mut acc = 1.0;
                let mut zero = false;
                for f in fs {
                    let v = f.eval(p);
                    if v.is_nan() {
                        return f64::NAN;
                    }
                    if v == 0.0 {
                        zero = true;
                    } else {
                        acc *= v;
                    }
                }
                if zero {
                    0.0
                } else {
                    acc
                }
            }
            Expr::Pow(b, e) => {
                let bv = b.eval(p);
                let ev = e.eval(p);
                if ev == 2.0 {
                    bv * bv
                } else {
                    bv.powf(ev)
                }
            }
            Expr::Apply(f, a) => f.apply(a.eval(p)),
            Expr::Sampled(s) => {
                let args: Vec<f64> = s.args.iter().map(|a| a.eval(p)).collect();
                s.table.eval(&s.order, &args)
            }
        }
    }

    /// [`Expr::eval`] with a finiteness check.
    pub fn try_eval(&self, p: &[f64]) -> Result<f64> {
        let v = self.eval(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: p.to_vec() })
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay::new(self, names)
    }
}

fn split_coefficient(e: Expr) -> (f64, Expr) {
    match e {
        Expr::Product(mut fs) => {
            if let Expr::Const(c) = fs[0] {
                fs.remove(0);
                let key = if fs.len() == 1 {
                    fs.pop().unwrap()
                } else {
                    Expr::Product(fs)
                };
                (c, key)
            } else {
                (1.0, Expr::Product(fs))
            }
        }
        other => (1.0, other),
    }
}

fn with_coefficient(coef: f64, key: Expr) -> Expr {
    if coef == 1.0 {
        return key;
    }
    match key {
        Expr::Product(mut fs) => {
            fs.insert(0, Expr::c(coef));
            Expr::Product(fs)
        }
        other => Expr::Product(vec![Expr::c(coef), other]),
    }
}

fn cmp_slices(a: &[Expr], b: &[Expr]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a.total_cmp(b),
            (Expr::Var(a), Expr::Var(b)) => a.cmp(b),
            (Expr::Sum(a), Expr::Sum(b)) | (Expr::Product(a), Expr::Product(b)) => {
                cmp_slices(a, b)
            }
            (Expr::Pow(b1, e1), Expr::Pow(b2, e2)) => b1.cmp(b2).then_with(|| e1.cmp(e2)),
            (Expr::Apply(f, a), Expr::Apply(g, b)) => f.cmp(g).then_with(|| a.cmp(b)),
            (Expr::Sampled(a), Expr::Sampled(b)) => {
                let pa = Arc::as_ptr(&a.table) as usize;
                let pb = Arc::as_ptr(&b.table) as usize;
                pa.cmp(&pb)
                    .then_with(|| a.order.cmp(&b.order))
                    .then_with(|| cmp_slices(&a.args, &b.args))
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Expr {}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::c(v)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, rhs])
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, -rhs])
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product(vec![self, rhs])
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::product(vec![self, rhs.recip()])
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::product(vec![Expr::c(-1.0), self])
    }
}

/// Symbolic vector field: one component expression per coordinate.
#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> VectorField {
        let dim = comps.len();
        let jacobian = comps.iter().map(|c| c.gradient(dim)).collect();
        VectorField { comps, jacobian }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn eval_into(&self, p: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.eval(p);
        }
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.eval(p)).collect()
    }

    /// Row-major jacobian `J[i][j] = ∂X^i/∂p^j`.
    pub fn jacobian_at(&self, p: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let mut out = vec![0.0; dim * dim];
        for (i, row) in self.jacobian.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if !e.is_zero() {
                    out[i * dim + j] = e.eval(p);
                }
            }
        }
        out
    }
}
