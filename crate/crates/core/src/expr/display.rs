use std::fmt;

use super::Expr;

/// Plain-text rendering of an expression with coordinate names, in the
/// grammar accepted by [`super::parse_expr`] (sampled tables excepted).
pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl<'a> ExprDisplay<'a> {
    pub(crate) fn new(expr: &'a Expr, names: &'a [String]) -> Self {
        ExprDisplay { expr, names }
    }
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Sum(_) => PREC_SUM,
        Expr::Product(_) => PREC_PRODUCT,
        Expr::Const(v) if *v < 0.0 => PREC_PRODUCT,
        Expr::Pow(..) => PREC_POW,
        _ => PREC_ATOM,
    }
}

fn number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_finite() {
        write!(f, "{v:?}").map(|_| ())
    } else {
        write!(f, "{v}")
    }
}

impl ExprDisplay<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
        let wrap = precedence(e) < min_prec;
        if wrap {
            f.write_str("(")?;
        }
        match e {
            Expr::Const(v) => number(f, *v)?,
            Expr::Var(i) => match self.names.get(*i) {
                Some(n) => f.write_str(n)?,
                None => write!(f, "x{i}")?,
            },
            Expr::Sum(ts) => {
                for (k, t) in ts.iter().enumerate() {
                    let (negative, body) = negated(t);
                    match (k, negative) {
                        (0, true) => f.write_str("-")?,
                        (0, false) => {}
                        (_, true) => f.write_str(" - ")?,
                        (_, false) => f.write_str(" + ")?,
                    }
                    match body {
                        Some(b) => self.write(f, &b, PREC_PRODUCT)?,
                        None => self.write(f, t, PREC_PRODUCT)?,
                    }
                }
            }
            Expr::Product(fs) => {
                let mut rest: &[Expr] = fs;
                if let Some(Expr::Const(c)) = fs.first() {
                    if *c == -1.0 {
                        f.write_str("-")?;
                        rest = &fs[1..];
                    }
                }
                for (k, x) in rest.iter().enumerate() {
                    if k > 0 {
                        f.write_str("*")?;
                    }
                    self.write(f, x, PREC_POW)?;
                }
            }
            Expr::Pow(b, x) => {
                self.write(f, b, PREC_ATOM)?;
                f.write_str("^")?;
                self.write(f, x, PREC_ATOM)?;
            }
            Expr::Apply(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(f, a, 0)?;
                f.write_str(")")?;
            }
            Expr::Sampled(s) => {
                write!(f, "sampled{:?}(", s.order)?;
                for (k, a) in s.args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    self.write(f, a, 0)?;
                }
                f.write_str(")")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Splits a leading negative coefficient off a sum term.
fn negated(t: &Expr) -> (bool, Option<Expr>) {
    match t {
        Expr::Const(v) if *v < 0.0 => (true, Some(Expr::c(-v))),
        Expr::Product(fs) => match fs.first() {
            Some(Expr::Const(c)) if *c < 0.0 => {
                let mut rest = fs.clone();
                if *c == -1.0 {
                    rest.remove(0);
                } else {
                    rest[0] = Expr::c(-c);
                }
                let body = if rest.len() == 1 {
                    rest.pop().unwrap()
                } else {
                    Expr::Product(rest)
                };
                (true, Some(body))
            }
            _ => (false, None),
        },
        _ => (false, None),
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.expr, 0)
    }
}
