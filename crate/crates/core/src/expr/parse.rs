use super::{Expr, Func};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(src: &str) -> Result<Lexer> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                line: tl,
                column: tc,
                message: format!("malformed number `{text}`"),
            })?;
            col += i - start;
            toks.push((Tok::Num(v), tl, tc));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            toks.push((Tok::Ident(chars[start..i].iter().collect()), tl, tc));
            continue;
        }
        if "+-*/^(),".contains(c) {
            toks.push((Tok::Op(c), tl, tc));
            i += 1;
            col += 1;
            continue;
        }
        return Err(Error::Parse {
            line: tl,
            column: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    toks.push((Tok::End, line, col));
    Ok(Lexer { toks })
}

struct Parser<'a> {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let (_, line, column) = self.toks[self.pos];
        Err(Error::Parse {
            line,
            column,
            message: message.into(),
        })
    }

    fn eat(&mut self, op: char) -> bool {
        if *self.peek() == Tok::Op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(-self.term()?);
            } else {
                break;
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat('*') {
                factors.push(self.unary()?);
            } else if self.eat('/') {
                factors.push(self.unary()?.recip());
            } else {
                break;
            }
        }
        Ok(Expr::product(factors))
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::c(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.error("expected `)`");
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    self.pos += 1;
                    return Ok(Expr::var(i));
                }
                if name == "pi" {
                    self.pos += 1;
                    return Ok(Expr::c(std::f64::consts::PI));
                }
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "log" | "ln" => Some(Func::Log),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "abs" => Some(Func::Abs),
                    "sign" => Some(Func::Sign),
                    "sqrt" => None,
                    _ => return self.error(format!("unknown identifier `{name}`")),
                };
                self.pos += 1;
                if !self.eat('(') {
                    return self.error(format!("expected `(` after `{name}`"));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return self.error("expected `)`");
                }
                Ok(match func {
                    Some(f) => Expr::apply(f, arg),
                    None => arg.powf(0.5),
                })
            }
            Tok::End => self.error("unexpected end of input"),
            Tok::Op(c) => self.error(format!("unexpected `{c}`")),
        }
    }
}

/// Parses an expression over the coordinates `names` (coordinate `i` is
/// `names[i]`).
///
/// Grammar: numbers, identifiers, `+ - * / ^` (right-associative `^`),
/// parentheses and the functions `exp log ln sin cos abs sign sqrt`.
pub fn parse_expr(src: &str, names: &[String]) -> Result<Expr> {
    let lexer = lex(src)?;
    let mut p = Parser {
        toks: lexer.toks,
        pos: 0,
        names,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error("trailing input");
    }
    Ok(e)
}

/// Parses a 1-form such as `dz - y*dx` into its coefficients on
/// `d names[0], d names[1], ...`.
pub fn parse_one_form(src: &str, names: &[String]) -> Result<Vec<Expr>> {
    let dim = names.len();
    let mut ext: Vec<String> = names.to_vec();
    ext.extend(names.iter().map(|n| format!("d{n}")));
    let e = parse_expr(src, &ext)?;
    let coeffs: Vec<Expr> = (0..dim).map(|j| e.diff(dim + j)).collect();
    let not_linear = || Error::Parse {
        line: 1,
        column: 1,
        message: "expression is not linear in the differentials".into(),
    };
    for c in &coeffs {
        if (dim..2 * dim).any(|v| c.depends_on(v)) {
            return Err(not_linear());
        }
    }
    let mut residual = vec![e];
    for (j, c) in coeffs.iter().enumerate() {
        residual.push(-(c.clone() * Expr::var(dim + j)));
    }
    if !Expr::sum(residual).is_zero() {
        return Err(not_linear());
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precedence_and_associativity() {
        let n = names(&["x", "y"]);
        let e = parse_expr("2^3^2 - -x*y/4", &n).unwrap();
        assert!((e.eval(&[2.0, 3.0]) - (512.0 + 1.5)).abs() < 1e-12);
        let e = parse_expr("-x^2", &n).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0]), -9.0);
        let e = parse_expr("sqrt(x) + ln(exp(y))", &n).unwrap();
        assert!((e.eval(&[4.0, 1.5]) - 3.5).abs() < 1e-14);
    }

    #[test]
    fn errors_carry_position() {
        let n = names(&["x"]);
        match parse_expr("x +\n  q", &n) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr("(x", &n).is_err());
        assert!(parse_expr("x $", &n).is_err());
    }

    #[test]
    fn one_forms() {
        let n = names(&["x", "y", "z"]);
        let c = parse_one_form("dz - y*dx", &n).unwrap();
        assert_eq!(c[0], -Expr::var(1));
        assert!(c[1].is_zero());
        assert_eq!(c[2], Expr::one());
        assert!(parse_one_form("dz*dx", &n).is_err());
        assert!(parse_one_form("dz + 1", &n).is_err());
    }

    #[test]
    fn display_round_trip() {
        let n = names(&["x", "y"]);
        for src in ["x - 2*y^(-1.5) + sin(x*y)", "-(x+y)^2.5 * abs(x)", "exp(-x) - 3", "x/(1+y)"] {
            let e = parse_expr(src, &n).unwrap();
            let text = e.display(&n).to_string();
            let back = parse_expr(&text, &n).unwrap();
            assert_eq!(e, back, "{src} -> {text}");
        }
    }
}
