//! Moduli of continuity, their algebra, and the two uniqueness criteria
//! (Osgood divergence and the limit condition `w1(s)·e^{w2(s)/s} → 0`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{integrate, linspace};
use crate::report::{fmt_f64, Csv};

const INV_E: f64 = 0.367_879_441_171_442_33;

#[derive(Clone, Debug, PartialEq)]
pub enum ModulusKind {
    Lipschitz { k: f64 },
    Hoelder { alpha: f64, k: f64 },
    /// `s ↦ −k·β·s·ln s`, valid on `(0, 1/e]`.
    LogLip { beta: f64, k: f64 },
    Sum(Box<Modulus>, Box<Modulus>),
    Scale(f64, Box<Modulus>),
    Max(Box<Modulus>, Box<Modulus>),
    /// Ascending `(s, w(s))` breakpoints.
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Modulus {
    kind: ModulusKind,
    cap: f64,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Modulus {
    pub fn lipschitz(k: f64) -> Result<Modulus> {
        Ok(Modulus {
            kind: ModulusKind::Lipschitz { k: positive("k", k)? },
            cap: 1.0,
        })
    }

    pub fn hoelder(alpha: f64, k: f64) -> Result<Modulus> {
        Ok(Modulus {
            kind: ModulusKind::Hoelder {
                alpha: positive("alpha", alpha)?,
                k: positive("k", k)?,
            },
            cap: 1.0,
        })
    }

    pub fn log_lip(beta: f64, k: f64) -> Result<Modulus> {
        Ok(Modulus {
            kind: ModulusKind::LogLip {
                beta: positive("beta", beta)?,
                k: positive("k", k)?,
            },
            cap: INV_E,
        })
    }

    pub fn sum(a: Modulus, b: Modulus) -> Modulus {
        let cap = a.cap.min(b.cap);
        Modulus {
            kind: ModulusKind::Sum(Box::new(a), Box::new(b)),
            cap,
        }
    }

    pub fn scale(c: f64, w: Modulus) -> Result<Modulus> {
        let cap = w.cap;
        Ok(Modulus {
            kind: ModulusKind::Scale(positive("scale", c)?, Box::new(w)),
            cap,
        })
    }

    pub fn max(a: Modulus, b: Modulus) -> Modulus {
        let cap = a.cap.min(b.cap);
        Modulus {
            kind: ModulusKind::Max(Box::new(a), Box::new(b)),
            cap,
        }
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Modulus> {
        if points.len() < 2 {
            return Err(Error::InsufficientData("tabulated modulus needs ≥ 2 breakpoints".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(Error::Domain(
                    "breakpoints must be strictly ascending in s and nondecreasing in w".into(),
                ));
            }
        }
        if points[0].0 <= 0.0 || points[0].1 < 0.0 || points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::Domain("breakpoints need s > 0 and finite w ≥ 0".into()));
        }
        let cap = points.last().unwrap().0;
        Ok(Modulus {
            kind: ModulusKind::Tabulated(points),
            cap,
        })
    }

    /// Restricts (or, for closed forms, sets) the largest valid argument.
    pub fn with_cap(mut self, cap: f64) -> Result<Modulus> {
        positive("cap", cap)?;
        let limit = match &self.kind {
            ModulusKind::LogLip { .. } => INV_E,
            ModulusKind::Lipschitz { .. } | ModulusKind::Hoelder { .. } => f64::INFINITY,
            _ => self.cap,
        };
        if cap > limit * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("cap {cap} exceeds the formula's range {limit}")));
        }
        self.cap = cap;
        Ok(self)
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    pub fn domain_cap(&self) -> f64 {
        self.cap
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("modulus argument {s} is negative")));
        }
        if s > self.cap * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "modulus argument {s} exceeds domain cap {}",
                self.cap
            )));
        }
        Ok(self.value(s))
    }

    fn value(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        match &self.kind {
            ModulusKind::Lipschitz { k } => k * s,
            ModulusKind::Hoelder { alpha, k } => k * s.powf(*alpha),
            ModulusKind::LogLip { beta, k } => -k * beta * s * s.ln(),
            ModulusKind::Sum(a, b) => a.value(s) + b.value(s),
            ModulusKind::Scale(c, w) => c * w.value(s),
            ModulusKind::Max(a, b) => a.value(s).max(b.value(s)),
            ModulusKind::Tabulated(pts) => tabulated_value(pts, s),
        }
    }

    /// `ln w(s)`, accurate where `w(s)` itself would underflow.
    pub fn ln_eval(&self, s: f64) -> Result<f64> {
        self.eval(s)?;
        Ok(self.ln_value(s))
    }

    fn ln_value(&self, s: f64) -> f64 {
        match &self.kind {
            ModulusKind::Lipschitz { k } => k.ln() + s.ln(),
            ModulusKind::Hoelder { alpha, k } => k.ln() + alpha * s.ln(),
            ModulusKind::LogLip { beta, k } => (k * beta).ln() + s.ln() + (-s.ln()).ln(),
            ModulusKind::Scale(c, w) => c.ln() + w.ln_value(s),
            ModulusKind::Max(a, b) => a.ln_value(s).max(b.ln_value(s)),
            ModulusKind::Sum(a, b) => {
                let (la, lb) = (a.ln_value(s), b.ln_value(s));
                let hi = la.max(lb);
                if hi == f64::NEG_INFINITY {
                    hi
                } else {
                    hi + ((la - hi).exp() + (lb - hi).exp()).ln()
                }
            }
            ModulusKind::Tabulated(_) => self.value(s).ln(),
        }
    }
}

fn tabulated_value(pts: &[(f64, f64)], s: f64) -> f64 {
    let (s0, w0) = pts[0];
    if s < s0 {
        if w0 == 0.0 {
            return 0.0;
        }
        let (s1, w1) = pts[1];
        let p = ((w1 / w0).ln() / (s1 / s0).ln()).clamp(0.05, 1.0);
        return w0 * (s / s0).powf(p);
    }
    let i = pts.partition_point(|(x, _)| *x <= s);
    if i >= pts.len() {
        return pts[pts.len() - 1].1;
    }
    let (sa, wa) = pts[i - 1];
    let (sb, wb) = pts[i];
    wa + (wb - wa) * (s - sa) / (sb - sa)
}

/// Modulus of `f + g`.
pub fn algebra_sum(wf: Modulus, wg: Modulus) -> Modulus {
    Modulus::sum(wf, wg)
}

/// Modulus of `f·g` where `|f|, |g| ≤ bound`.
pub fn algebra_product(wf: Modulus, wg: Modulus, bound: f64) -> Result<Modulus> {
    Modulus::scale(bound, Modulus::sum(wf, wg))
}

/// Modulus of `f / g` where `|f| ≤ bound` and `g ≥ inf_g > 0`: `1/g` has
/// modulus `w_g / inf_g²`, then the product rule applies.
pub fn algebra_quotient(wf: Modulus, wg: Modulus, bound: f64, inf_g: f64) -> Result<Modulus> {
    if !(inf_g > 0.0) {
        return Err(Error::Domain(format!(
            "quotient needs a positive lower bound on the denominator, got {inf_g}"
        )));
    }
    let recip = Modulus::scale(1.0 / (inf_g * inf_g), wg)?;
    Modulus::scale(bound.max(1.0 / inf_g), Modulus::sum(wf, recip))
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cap = fmt_f64(self.cap);
        match &self.kind {
            ModulusKind::Lipschitz { k } => write!(f, "lipschitz(k={}, cap={cap})", fmt_f64(*k)),
            ModulusKind::Hoelder { alpha, k } => write!(
                f,
                "hoelder(alpha={}, k={}, cap={cap})",
                fmt_f64(*alpha),
                fmt_f64(*k)
            ),
            ModulusKind::LogLip { beta, k } => write!(
                f,
                "loglip(beta={}, k={}, cap={cap})",
                fmt_f64(*beta),
                fmt_f64(*k)
            ),
            ModulusKind::Sum(a, b) => write!(f, "sum(cap={cap}, {a}, {b})"),
            ModulusKind::Max(a, b) => write!(f, "max(cap={cap}, {a}, {b})"),
            ModulusKind::Scale(c, w) => write!(f, "scale(c={}, cap={cap}, {w})", fmt_f64(*c)),
            ModulusKind::Tabulated(pts) => {
                write!(f, "tabulated(cap={cap}, points=[")?;
                for (i, (s, w)) in pts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{} {}", fmt_f64(*s), fmt_f64(*w))?;
                }
                f.write_str("])")
            }
        }
    }
}

struct RecordParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl RecordParser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: 1,
            column: self.pos + 1,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected identifier");
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || b".+-".contains(&self.src[self.pos]))
        {
            self.pos += 1;
        }
        let text = String::from_utf8_lossy(&self.src[start..self.pos]);
        match text.parse() {
            Ok(v) => Ok(v),
            Err(_) => {
                self.pos = start;
                self.err(format!("malformed number `{text}`"))
            }
        }
    }

    fn record(&mut self) -> Result<Modulus> {
        let kind = self.ident()?;
        self.expect(b'(')?;
        let mut params: Vec<(String, f64)> = Vec::new();
        let mut children: Vec<Modulus> = Vec::new();
        let mut points: Option<Vec<(f64, f64)>> = None;
        if !self.eat(b')') {
            loop {
                let save = self.pos;
                let name = self.ident()?;
                if self.eat(b'=') {
                    if name == "points" {
                        self.expect(b'[')?;
                        let mut pts = Vec::new();
                        while !self.eat(b']') {
                            let s = self.number()?;
                            let w = self.number()?;
                            pts.push((s, w));
                            self.eat(b';');
                        }
                        points = Some(pts);
                    } else {
                        let v = self.number()?;
                        params.push((name, v));
                    }
                } else if name.starts_with(|c: char| c.is_ascii_digit()) {
                    self.pos = save;
                    return self.err("expected `name=value` or a nested modulus");
                } else {
                    self.pos = save;
                    children.push(self.record()?);
                }
                if self.eat(b')') {
                    break;
                }
                self.expect(b',')?;
            }
        }
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        let allowed: &[&str] = match kind.as_str() {
            "lipschitz" => &["k", "cap"],
            "hoelder" => &["alpha", "k", "cap"],
            "loglip" => &["beta", "k", "cap"],
            "scale" => &["c", "cap"],
            _ => &["cap"],
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return self.err(format!("unknown parameter `{k}` for `{kind}`"));
        }
        let need = |key: &str| {
            get(key).ok_or_else(|| Error::Parse {
                line: 1,
                column: self.pos,
                message: format!("`{kind}` needs parameter `{key}`"),
            })
        };
        let arity = |n: usize| -> Result<()> {
            if children.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    line: 1,
                    column: self.pos,
                    message: format!("`{kind}` takes {n} nested moduli"),
                })
            }
        };
        let w = match kind.as_str() {
            "lipschitz" => Modulus::lipschitz(get("k").unwrap_or(1.0))?,
            "hoelder" => Modulus::hoelder(need("alpha")?, get("k").unwrap_or(1.0))?,
            "loglip" => Modulus::log_lip(need("beta")?, get("k").unwrap_or(1.0))?,
            "sum" | "max" => {
                arity(2)?;
                let b = children.pop().unwrap();
                let a = children.pop().unwrap();
                if kind == "sum" {
                    Modulus::sum(a, b)
                } else {
                    Modulus::max(a, b)
                }
            }
            "scale" => {
                arity(1)?;
                Modulus::scale(need("c")?, children.pop().unwrap())?
            }
            "tabulated" => match points {
                Some(p) => Modulus::tabulated(p)?,
                None => return self.err("`tabulated` needs `points=[...]`"),
            },
            other => return self.err(format!("unknown modulus kind `{other}`")),
        };
        match get("cap") {
            Some(c) => w.with_cap(c),
            None => Ok(w),
        }
    }
}

impl FromStr for Modulus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Modulus> {
        let mut p = RecordParser {
            src: s.as_bytes(),
            pos: 0,
        };
        let w = p.record()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return p.err("trailing input");
        }
        Ok(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    Osgood,
    LimitCondition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "Holds",
            Verdict::Fails => "Fails",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

/// Outcome of a criterion check with the probe trace it was decided on.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub verdict: Verdict,
    /// `(scale, quantity)`: partial sums for Osgood, `q(s)` for the limit
    /// condition (possibly `inf` when `q` overflows).
    pub trace: Vec<(f64, f64)>,
    /// `ln` of the traced quantity.
    pub log_trace: Vec<f64>,
    pub parameters: Vec<(String, String)>,
}

impl CriterionReport {
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(["s", "quantity", "log_quantity"]);
        csv.meta("criterion", format!("{:?}", self.criterion));
        csv.meta("verdict", self.verdict);
        for (k, v) in &self.parameters {
            csv.meta(k.clone(), v);
        }
        for ((s, q), lq) in self.trace.iter().zip(&self.log_trace) {
            csv.push_numbers(&[*s, *q, *lq]);
        }
        csv
    }

    /// Least-squares slope of `ln q` against `ln s` over `lo ≤ s ≤ hi`.
    pub fn log_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .trace
            .iter()
            .zip(&self.log_trace)
            .filter(|((s, _), lq)| *s >= lo && *s <= hi && lq.is_finite())
            .map(|((s, _), lq)| (s.ln(), *lq))
            .unzip();
        if xs.len() < 2 {
            return None;
        }
        Some(crate::numeric::fit_line(&xs, &ys).slope)
    }
}

/// Divergence cap on Osgood partial sums.
pub const OSGOOD_DIVERGENCE_CAP: f64 = 1e6;
/// Relative tail size at which a geometric Osgood series counts as settled.
pub const OSGOOD_SETTLE_TOL: f64 = 1e-6;
/// Decay factor required by the limit condition.
pub const LIMIT_DECAY: f64 = 1e-3;
const OSGOOD_MAX_DEPTH: usize = 1000;

/// Integrates `1/w` over `[ε·2^{-k}, ε]` for growing `k`.
///
/// `Holds` means the integral diverges (uniqueness in Osgood's sense).
pub fn osgood_check(w: &Modulus, eps: f64, depth: usize) -> Result<CriterionReport> {
    if depth < 8 {
        return Err(Error::Domain(format!("Osgood depth must be ≥ 8, got {depth}")));
    }
    if !(eps > 0.0) || eps > w.domain_cap() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "Osgood scale {eps} outside (0, {}]",
            w.domain_cap()
        )));
    }
    let inv = |s: f64| 1.0 / w.value(s);
    let mut trace = vec![(eps, 0.0)];
    let mut increments: Vec<f64> = Vec::new();
    let mut total = 0.0;
    let mut verdict = None;
    let mut upper = eps;
    let mut k = 0;
    while k < OSGOOD_MAX_DEPTH {
        k += 1;
        let lower = eps * 0.5f64.powi(k as i32);
        for probe in [lower, 0.5 * (lower + upper)] {
            let v = w.value(probe);
            if !(v > 0.0) {
                return Err(Error::SingularIntegrand(probe));
            }
        }
        let guess = (upper - lower) * (inv(lower) + inv(upper)) * 0.5;
        let inc = integrate(inv, lower, upper, 1e-10 * guess.abs().max(1e-300));
        increments.push(inc);
        total += inc;
        trace.push((lower, total));
        upper = lower;
        if total > OSGOOD_DIVERGENCE_CAP || !total.is_finite() {
            verdict = Some(Verdict::Holds);
            break;
        }
        if k < depth {
            continue;
        }
        match geometric_tail(&increments) {
            Some(ratio) => {
                let tail = increments[increments.len() - 1] * ratio / (1.0 - ratio);
                if tail <= OSGOOD_SETTLE_TOL * total {
                    verdict = Some(Verdict::Fails);
                    break;
                }
            }
            None => {
                verdict = Some(Verdict::Holds);
                break;
            }
        }
    }
    // the depth cap is only reached while the increments still shrink geometrically
    let verdict = verdict.unwrap_or(Verdict::Fails);
    let log_trace = trace.iter().map(|(_, v)| v.ln()).collect();
    Ok(CriterionReport {
        criterion: Criterion::Osgood,
        verdict,
        trace,
        log_trace,
        parameters: vec![
            ("modulus".into(), w.to_string()),
            ("eps".into(), fmt_f64(eps)),
            ("depth".into(), depth.to_string()),
            ("probed_depth".into(), k.to_string()),
            ("divergence_cap".into(), fmt_f64(OSGOOD_DIVERGENCE_CAP)),
            ("settle_tol".into(), fmt_f64(OSGOOD_SETTLE_TOL)),
            (
                "convention".into(),
                "Holds = integral of ds/w diverges (classical Osgood); a finite integral gives Fails".into(),
            ),
        ],
    })
}

/// Ratio of successive increments if they shrink geometrically: the
/// recent ratio is below one and its gap to one is not closing (a ratio
/// creeping up to one, as for `∫ds/(s|ln s|)`, means divergence).
fn geometric_tail(inc: &[f64]) -> Option<f64> {
    let n = inc.len();
    let ratio_at = |i: usize| inc[i] / inc[i - 1];
    let window = |end: usize| -> f64 { (end - 4..=end).map(ratio_at).sum::<f64>() / 5.0 };
    if n < 8 {
        return None;
    }
    let recent = window(n - 1);
    let earlier = window((n / 2).max(5));
    if recent < 1.0 - 1e-6 && (1.0 - recent) >= 0.75 * (1.0 - earlier) {
        Some(recent)
    } else {
        None
    }
}

/// Geometric probe scales from `top` down to `bottom` with `per_decade`
/// points per factor of ten.
pub fn geometric_grid(top: f64, bottom: f64, per_decade: usize) -> Vec<f64> {
    let decades = (top / bottom).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1) + 1;
    linspace(top.ln(), bottom.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Default grid for [`limit_condition_check`]: from the smaller cap down to
/// `1e-12`, four points per decade.
pub fn default_limit_grid(w1: &Modulus, w2: &Modulus) -> Vec<f64> {
    geometric_grid(w1.domain_cap().min(w2.domain_cap()), 1e-12, 4)
}

/// Evaluates `q(s) = w1(s)·e^{w2(s)/s}` (in the log domain) on a
/// descending geometric grid.
pub fn limit_condition_check(w1: &Modulus, w2: &Modulus, grid: &[f64]) -> Result<CriterionReport> {
    if grid.len() < 20 {
        return Err(Error::Domain(format!(
            "limit grid needs ≥ 20 points, got {}",
            grid.len()
        )));
    }
    let cap = w1.domain_cap().min(w2.domain_cap());
    if grid.windows(2).any(|p| !(p[1] < p[0])) || !(grid[grid.len() - 1] > 0.0) {
        return Err(Error::Domain("limit grid must be strictly descending and positive".into()));
    }
    if grid[0] > cap * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("limit grid starts above the domain cap {cap}")));
    }
    let mut trace = Vec::with_capacity(grid.len());
    let mut log_trace = Vec::with_capacity(grid.len());
    for &s in grid {
        let lq = w1.ln_eval(s)? + w2.eval(s)? / s;
        trace.push((s, lq.exp()));
        log_trace.push(lq);
    }
    let n = log_trace.len();
    let tail_len = (n / 4).max(5);
    let tail = &log_trace[n - tail_len..];
    let decreasing = tail.windows(2).all(|p| p[1] < p[0]);
    let nondecreasing = tail.windows(2).all(|p| p[1] >= p[0]);
    let verdict = if decreasing {
        if log_trace[n - 1] < log_trace[0] + LIMIT_DECAY.ln() {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    } else if nondecreasing {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    Ok(CriterionReport {
        criterion: Criterion::LimitCondition,
        verdict,
        trace,
        log_trace,
        parameters: vec![
            ("w1".into(), w1.to_string()),
            ("w2".into(), w2.to_string()),
            ("grid_points".into(), n.to_string()),
            ("grid_top".into(), fmt_f64(grid[0])),
            ("grid_bottom".into(), fmt_f64(grid[n - 1])),
            ("decay_factor".into(), fmt_f64(LIMIT_DECAY)),
            ("tail_points".into(), tail_len.to_string()),
        ],
    })
}

/// Empirical modulus of a sampled (vector-valued) function along the
/// coordinates in `mask`, bucketed by factors of two in distance.
pub fn estimate_modulus(
    points: &[Vec<f64>],
    values: &[Vec<f64>],
    mask: &[usize],
    max_buckets: usize,
) -> Result<Modulus> {
    if points.len() != values.len() {
        return Err(Error::Shape("points and values differ in length".into()));
    }
    if points.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "need ≥ 100 samples, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    let in_mask: Vec<bool> = (0..dim).map(|d| mask.contains(&d)).collect();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for i in 0..points.len() {
        'pair: for j in i + 1..points.len() {
            let mut d2 = 0.0;
            for d in 0..dim {
                let delta = points[i][d] - points[j][d];
                if in_mask[d] {
                    d2 += delta * delta;
                } else if delta.abs() > 1e-12 {
                    continue 'pair;
                }
            }
            if d2 == 0.0 {
                continue;
            }
            let dv: f64 = values[i]
                .iter()
                .zip(&values[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            pairs.push((d2.sqrt(), dv));
        }
    }
    if pairs.len() < 2 {
        return Err(Error::InsufficientData("fewer than 2 eligible pairs".into()));
    }
    let dmax = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let dmin = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let buckets = (((dmax / dmin).log2().floor() as usize) + 1).clamp(1, max_buckets.max(1));
    // bucket b holds distances in (dmax·2^{-b-1}, dmax·2^{-b}]; the last bucket is open below
    let mut rep = vec![0.0f64; buckets];
    let mut sup = vec![0.0f64; buckets];
    let mut count = vec![0usize; buckets];
    for &(d, dv) in &pairs {
        let b = ((dmax / d).log2().floor().max(0.0) as usize).min(buckets - 1);
        count[b] += 1;
        rep[b] = rep[b].max(d);
        sup[b] = sup[b].max(dv);
    }
    if let Some(b) = count.iter().position(|&c| c < 2) {
        return Err(Error::InsufficientData(format!(
            "bucket at scale {} has {} pairs",
            dmax * 0.5f64.powi(b as i32),
            count[b]
        )));
    }
    let mut table: Vec<(f64, f64)> = Vec::with_capacity(buckets);
    let mut running = 0.0f64;
    for b in (0..buckets).rev() {
        running = running.max(sup[b]);
        table.push((rep[b], running));
    }
    if table.len() == 1 {
        let (s, w) = table[0];
        table.insert(0, (0.5 * s, w * 0.5));
    }
    Modulus::tabulated(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(Modulus::lipschitz(2.0).unwrap().eval(0.5).unwrap(), 1.0);
        let ll = Modulus::log_lip(1.0, 1.0).unwrap();
        assert!((ll.eval(INV_E).unwrap() - INV_E).abs() < 1e-15);
        assert_eq!(ll.eval(0.0).unwrap(), 0.0);
        assert_eq!(Modulus::hoelder(0.5, 1.0).unwrap().eval(0.25).unwrap(), 0.5);
        assert!(ll.eval(0.5).is_err());
        assert!(ll.eval(-1e-3).is_err());
    }

    #[test]
    fn algebra() {
        let a = Modulus::lipschitz(1.0).unwrap();
        let b = Modulus::hoelder(0.5, 1.0).unwrap();
        assert_eq!(algebra_sum(a.clone(), b.clone()).eval(0.25).unwrap(), 0.75);
        let p = algebra_product(a.clone(), a.clone(), 3.0).unwrap();
        assert!((p.eval(0.1).unwrap() - 0.6).abs() < 1e-15);
        let q = algebra_quotient(a.clone(), a.clone(), 1.0, 0.5).unwrap();
        // max(1, 2)·(s + 4s)
        assert!((q.eval(0.1).unwrap() - 1.0).abs() < 1e-15);
        assert!(algebra_quotient(a.clone(), b, 1.0, 0.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let w = Modulus::max(
            Modulus::scale(3.0, Modulus::log_lip(0.5, 2.0).unwrap()).unwrap(),
            Modulus::sum(
                Modulus::hoelder(0.7, 1.0).unwrap(),
                Modulus::tabulated(vec![(0.1, 0.2), (0.2, 0.3)]).unwrap(),
            ),
        );
        let text = w.to_string();
        assert_eq!(text.parse::<Modulus>().unwrap(), w);
        assert!("lipschitz(k=1, bogus=2)".parse::<Modulus>().is_err());
        assert!("sum(lipschitz(k=1))".parse::<Modulus>().is_err());
    }

    #[test]
    fn osgood_examples() {
        let lip = Modulus::lipschitz(1.0).unwrap();
        assert_eq!(osgood_check(&lip, 0.5, 16).unwrap().verdict, Verdict::Holds);
        let h = Modulus::hoelder(0.5, 1.0).unwrap();
        assert_eq!(osgood_check(&h, 0.5, 16).unwrap().verdict, Verdict::Fails);
    }

    #[test]
    fn osgood_loglip_matches_antiderivative() {
        let ll = Modulus::log_lip(1.0, 1.0).unwrap();
        let eps = 0.25;
        let r = osgood_check(&ll, eps, 40).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        for &(d, s) in r.trace.iter().skip(1).take(40) {
            let exact = d.ln().abs().ln() - eps.ln().abs().ln();
            assert!((s - exact).abs() < 1e-7 * exact.max(1.0), "{d} {s} {exact}");
        }
    }

    #[test]
    fn limit_examples() {
        let w1 = Modulus::hoelder(0.9, 1.0).unwrap();
        let w2 = Modulus::log_lip(0.5, 1.0).unwrap();
        let r = limit_condition_check(&w1, &w2, &default_limit_grid(&w1, &w2)).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!((r.log_slope(1e-8, 1e-3).unwrap() - 0.4).abs() < 1e-9);

        let l = Modulus::lipschitz(1.0).unwrap();
        let r = limit_condition_check(&l, &l, &default_limit_grid(&l, &l)).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);

        let h = Modulus::hoelder(0.5, 1.0).unwrap();
        let r = limit_condition_check(&h, &h, &default_limit_grid(&h, &h)).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        // independent oracle: 0.5·ln s + s^{-1/2}, increasing as s ↓ below 1e-2
        for (&(s, _), lq) in r.trace.iter().zip(&r.log_trace) {
            assert!((lq - (0.5 * s.ln() + s.powf(-0.5))).abs() < 1e-9 * lq.abs().max(1.0));
        }
        let below: Vec<f64> = r
            .trace
            .iter()
            .zip(&r.log_trace)
            .filter(|((s, _), _)| *s < 1e-2)
            .map(|(_, l)| *l)
            .collect();
        assert!(below.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn estimate_linear_and_masked() {
        let pts: Vec<Vec<f64>> = (0..120).map(|i| vec![i as f64 / 119.0]).collect();
        let vals: Vec<Vec<f64>> = pts.iter().map(|p| vec![3.0 * p[0]]).collect();
        let w = estimate_modulus(&pts, &vals, &[0], 8).unwrap();
        for s in [0.01, 0.1, 0.5, 1.0] {
            let v = w.eval(s).unwrap();
            assert!((v / (3.0 * s) - 1.0).abs() < 0.5, "{s} {v}");
        }

        let mut pts2 = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                pts2.push(vec![i as f64 / 11.0, j as f64 / 11.0]);
            }
        }
        let vals2: Vec<Vec<f64>> = pts2.iter().map(|p| vec![p[1]]).collect();
        let w = estimate_modulus(&pts2, &vals2, &[0], 8).unwrap();
        assert_eq!(w.eval(w.domain_cap()).unwrap(), 0.0);
        assert!(estimate_modulus(&pts2[..50], &vals2[..50], &[0], 8).is_err());
    }

    #[test]
    fn estimate_sqrt_is_hoelder_half() {
        let pts: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 199.0]).collect();
        let vals: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0].sqrt()]).collect();
        let w = estimate_modulus(&pts, &vals, &[0], 8).unwrap();
        if let ModulusKind::Tabulated(t) = w.kind() {
            for &(s, v) in t {
                assert!((v / s.sqrt() - 1.0).abs() < 0.1, "{s} {v}");
            }
        } else {
            panic!("expected a table");
        }
    }
}
