//! Named example systems with their declared moduli.

use std::f64::consts::PI;

use crate::dynsys::{ConstantPlane, DiffeoSpec};
use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Distribution, FrameSection};
use crate::moduli::Modulus;
use crate::odelab::OdeSpec;
use crate::pdelab::{OracleSetup, PdeSpec, SpecialFormSpec};
use crate::surface::FlowConfig;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn unit_interval(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Parameters of the log-Hölder planar ODE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogHoelderOde {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LogHoelderOde {
    fn default() -> Self {
        LogHoelderOde {
            alpha: 0.9,
            beta: 0.5,
            gamma: 0.5,
            delta: 0.5,
        }
    }
}

impl LogHoelderOde {
    /// `ẋ = −t ln|t|^β − x ln|x|^γ`, `ẏ = 1 + |y|^α − x ln|x|^δ`, with
    /// moduli `LogLip(β)` in `t`, `LogLip(max(γ, δ))` in `x`, `Hoelder(α)`
    /// in `y` and `Hoelder(α)` overall.
    pub fn spec(&self) -> Result<OdeSpec> {
        let a = unit_interval("alpha", self.alpha)?;
        let b = unit_interval("beta", self.beta)?;
        let g = unit_interval("gamma", self.gamma)?;
        let d = unit_interval("delta", self.delta)?;
        let rhs = [
            format!("-t*log(abs(t)^{b:?}) - x*log(abs(x)^{g:?})"),
            format!("1 + abs(y)^{a:?} - x*log(abs(x)^{d:?})"),
        ];
        let domain = BoxDomain::new(vec![-0.5, -0.5, -0.5], vec![1.0, 0.5, 1.5])?;
        OdeSpec::parse(names(&["t", "x", "y"]), &rhs, domain)?.with_moduli(
            vec![
                Modulus::log_lip(b, 1.0)?,
                Modulus::log_lip(g.max(d), 1.0)?,
                Modulus::hoelder(a, 1.0)?,
            ],
            Some(Modulus::hoelder(a, 1.0)?),
        )
    }
}

/// `ẏ = |y|^{2/3}`, the classical non-unique example.
pub fn peano() -> Result<OdeSpec> {
    let w = Modulus::hoelder(2.0 / 3.0, 1.0)?;
    OdeSpec::parse(
        names(&["t", "y"]),
        &["abs(y)^(2/3)".into()],
        BoxDomain::new(vec![-0.5, -2.0], vec![2.0, 2.0])?,
    )?
    .with_moduli(vec![Modulus::lipschitz(1.0)?, w.clone()], Some(w))
}

/// `∂yⁱ/∂xʲ = −|xʲ|^{α} yⁱ ln|yⁱ|^{β}` on two unknowns of two variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogFamilyPde {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LogFamilyPde {
    fn default() -> Self {
        LogFamilyPde { alpha: 0.8, beta: 0.4 }
    }
}

impl LogFamilyPde {
    pub fn names() -> Vec<String> {
        names(&["x1", "x2", "y1", "y2"])
    }

    pub fn x_box() -> BoxDomain {
        BoxDomain::cube(2, 0.35, 0.65)
    }

    pub fn y_box() -> BoxDomain {
        BoxDomain::cube(2, 0.3, 0.7)
    }

    pub fn domain() -> BoxDomain {
        BoxDomain::new(vec![0.35, 0.35, 0.3, 0.3], vec![0.65, 0.65, 0.7, 0.7]).expect("valid box")
    }

    pub fn special_form(&self) -> Result<SpecialFormSpec> {
        let a = unit_interval("alpha", self.alpha)?;
        let b = unit_interval("beta", self.beta)?;
        let h = format!("abs(x1)^{p:?}/{p:?} + abs(x2)^{p:?}/{p:?}", p = a + 1.0);
        SpecialFormSpec::parse(
            &names(&["x1", "x2"]),
            &names(&["y1", "y2"]),
            &[format!("-y1*log(abs(y1)^{b:?})"), format!("-y2*log(abs(y2)^{b:?})")],
            &[h.clone(), h],
        )
    }

    /// Moduli: `Hoelder(α)` in each `x`, `LogLip(β)` in each `y`, and
    /// `max(LogLip(β), Hoelder(α))` overall.
    pub fn spec(&self) -> Result<PdeSpec> {
        let sf = self.special_form()?;
        let (a, b) = (self.alpha, self.beta);
        let hx = Modulus::hoelder(a, 1.0)?;
        let ly = Modulus::log_lip(b, 1.0)?;
        sf.induced(Self::names(), Self::domain())?.with_moduli(
            vec![hx.clone(), hx.clone(), ly.clone(), ly.clone()],
            Some(Modulus::max(ly, hx)),
        )
    }

    pub fn alpha_matrix(&self) -> Vec<Vec<f64>> {
        vec![vec![self.alpha; 2]; 2]
    }

    /// Surface and mollification settings of the oracle comparison.
    pub fn oracle_setup() -> OracleSetup {
        OracleSetup {
            x0: vec![0.5, 0.5],
            y0: vec![0.5, 0.5],
            eps1: 0.1,
            grid: 17,
            x_box: Self::x_box(),
            y_box: Self::y_box(),
            eps_list: (1..=6).map(|k| 0.5f64.powi(k)).collect(),
            flow: FlowConfig {
                h: 0.1 / 16.0,
                ..FlowConfig::default()
            },
        }
    }
}

/// Mixed log-Lipschitz/Hölder system with a separable right-hand side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedPde {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for MixedPde {
    /// Log-Lipschitz exponents below the Hölder ones, so the limit
    /// condition holds.
    fn default() -> Self {
        MixedPde {
            a11: 0.3,
            a21: 0.3,
            b2: 0.3,
            a12: 0.7,
            a22: 0.7,
            b1: 0.7,
        }
    }
}

impl MixedPde {
    /// Columns 2 and 3 of the extended matrix (0-based 1 and 2).
    pub const COLUMNS: [usize; 2] = [1, 2];

    pub fn spec(&self) -> Result<PdeSpec> {
        let p = [self.a11, self.a12, self.a21, self.a22, self.b1, self.b2];
        for (n, v) in ["a11", "a12", "a21", "a22", "b1", "b2"].iter().zip(p) {
            unit_interval(n, v)?;
        }
        let MixedPde { a11, a12, a21, a22, b1, b2 } = *self;
        let rhs = vec![
            vec![
                format!("(1 - x1*log(abs(x1)^{a11:?}))*(abs(y1)^{b1:?} + 1)"),
                format!("abs(x2)^{a12:?}*(1 + abs(y1)^{b1:?})"),
            ],
            vec![
                format!("y2*log(abs(y2)^{b2:?})*x1*log(abs(x1)^{a21:?})"),
                format!("-y2*log(abs(y2)^{b2:?})*abs(x2)^{a22:?}"),
            ],
        ];
        let hoelder = a12.min(a22).min(b1);
        PdeSpec::parse(
            names(&["x1", "x2", "y1", "y2"]),
            2,
            &rhs,
            BoxDomain::cube(4, -0.3, 0.3),
        )?
        .with_moduli(
            vec![
                Modulus::log_lip(a11.max(a21), 1.0)?,
                Modulus::hoelder(a12.min(a22), 1.0)?,
                Modulus::hoelder(b1, 1.0)?,
                Modulus::log_lip(b2, 1.0)?,
            ],
            Some(Modulus::hoelder(hoelder, 1.0)?),
        )
    }
}

/// `X₁ = ∂x + y∂z`, `X₂ = ∂y`: annihilated by `dz − y dx`.
pub fn contact_distribution() -> Result<Distribution> {
    Distribution::parse(
        names(&["x", "y", "z"]),
        2,
        &[vec!["y".into()], vec!["0".into()]],
        BoxDomain::cube(3, -1.0, 1.0),
    )
}

/// `X₁ = ∂x + x∂z`, `X₂ = ∂y`: annihilated by `dz − x dx`.
pub fn involutive_distribution() -> Result<Distribution> {
    Distribution::parse(
        names(&["x", "y", "z"]),
        2,
        &[vec!["x".into()], vec!["0".into()]],
        BoxDomain::cube(3, -1.0, 1.0),
    )
}

pub const LAMBDA_MINUS: f64 = 0.381_966_011_250_105_1;
pub const LAMBDA_PLUS: f64 = 2.618_033_988_749_895;

/// Everything the dynamics experiments need for one map.
pub struct DynPreset {
    pub spec: DiffeoSpec,
    /// Starting plane field `E⁰` for transport and the trace pipeline.
    pub initial: ConstantPlane,
    /// The invariant bundle `E` the iterates approach.
    pub invariant: ConstantPlane,
    pub expanding: ConstantPlane,
    pub transverse: Vec<usize>,
    /// Orthonormal annihilator of `E⁰`.
    pub c0: FrameSection,
    /// Orthonormal annihilator of `E`.
    pub limit_frame: FrameSection,
}

fn eigvec(lambda: f64) -> [f64; 2] {
    [1.0, lambda - 2.0]
}

fn normal_covector(v: [f64; 2]) -> String {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    format!("({:?})*dx1 + ({:?})*dx2", -v[1] / n, v[0] / n)
}

/// `[[2,1],[1,1]]` on the 2-torus, `E⁰` horizontal.
pub fn cat_map() -> Result<DynPreset> {
    let n = names(&["x1", "x2"]);
    let spec = DiffeoSpec::parse(
        n.clone(),
        &["2*x1 + x2".into(), "x1 + x2".into()],
        &["x1 - x2".into(), "-x1 + 2*x2".into()],
        true,
    )?;
    let s = eigvec(LAMBDA_MINUS);
    let u = eigvec(LAMBDA_PLUS);
    Ok(DynPreset {
        spec,
        initial: ConstantPlane::from_columns(2, &[vec![1.0, 0.0]])?,
        invariant: ConstantPlane::from_columns(2, &[s.to_vec()])?,
        expanding: ConstantPlane::from_columns(2, &[u.to_vec()])?,
        transverse: vec![1],
        c0: FrameSection::parse(&["dx2".into()], &n)?,
        limit_frame: FrameSection::parse(&[normal_covector(s)], &n)?,
    })
}

/// `(x, θ) ↦ (Ax, θ + 0.1 sin 2πx¹)` on the 3-torus with `A` the cat
/// matrix; `E⁰ = span{∂x¹, ∂θ}`, `E = E^s ⊕ ∂θ`.
pub fn skew_product() -> Result<DynPreset> {
    let n = names(&["x1", "x2", "th"]);
    let tau = |arg: &str| format!("0.1*sin({:?}*({arg}))", 2.0 * PI);
    let spec = DiffeoSpec::parse(
        n.clone(),
        &["2*x1 + x2".into(), "x1 + x2".into(), format!("th + {}", tau("x1"))],
        &["x1 - x2".into(), "-x1 + 2*x2".into(), format!("th - {}", tau("x1 - x2"))],
        true,
    )?;
    let s = eigvec(LAMBDA_MINUS);
    let u = eigvec(LAMBDA_PLUS);
    Ok(DynPreset {
        spec,
        initial: ConstantPlane::from_columns(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]])?,
        invariant: ConstantPlane::from_columns(3, &[vec![s[0], s[1], 0.0], vec![0.0, 0.0, 1.0]])?,
        expanding: ConstantPlane::from_columns(3, &[vec![u[0], u[1], 0.0]])?,
        transverse: vec![1],
        c0: FrameSection::parse(&["dx2".into()], &n)?.with_transverse(vec![1])?,
        limit_frame: FrameSection::parse(&[normal_covector(s)], &n)?.with_transverse(vec![1])?,
    })
}
