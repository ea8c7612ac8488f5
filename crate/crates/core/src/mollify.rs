//! Sampled functions on uniform grids, the compactly supported bump
//! mollifier and the sup-norm bounds it satisfies.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{Axis, Table};
use crate::moduli::Modulus;
use crate::numeric::integrate;
use crate::report::{fmt_f64, Csv};

/// Values on a tensor grid with a rectangular validity region
/// (`valid[a] = (first, last)` node indices, inclusive).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    axes: Vec<Axis>,
    values: Vec<f64>,
    valid: Vec<(usize, usize)>,
}

impl GridFunction {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<GridFunction> {
        let count: usize = axes.iter().map(|a| a.len).product();
        if axes.is_empty() || count != values.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {count} nodes",
                values.len()
            )));
        }
        if axes.iter().any(|a| !(a.step > 0.0) || a.len == 0) {
            return Err(Error::Shape("grid axes need positive spacing and length".into()));
        }
        let valid = axes.iter().map(|a| (0, a.len - 1)).collect();
        Ok(GridFunction {
            axes,
            values,
            valid,
        })
    }

    /// Samples `f` at every node.
    pub fn sample(axes: Vec<Axis>, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<GridFunction> {
        let count: usize = axes.iter().map(|a| a.len).product();
        let probe = GridFunction::new(axes, vec![0.0; count])?;
        let values = (0..count)
            .into_par_iter()
            .map(|flat| f(&probe.coords(flat)))
            .collect();
        Ok(GridFunction { values, ..probe })
    }

    /// Axis covering `[lo, hi]` with spacing at most `h`.
    pub fn axis_covering(lo: f64, hi: f64, h: f64) -> Axis {
        let cells = ((hi - lo) / h).ceil().max(1.0) as usize;
        Axis {
            origin: lo,
            step: (hi - lo) / cells as f64,
            len: cells + 1,
        }
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[(usize, usize)] {
        &self.valid
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.axes.len()];
        for d in (0..self.axes.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * self.axes[d + 1].len;
        }
        s
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        let mut idx = vec![0; self.axes.len()];
        for d in (0..self.axes.len()).rev() {
            idx[d] = rem % self.axes[d].len;
            rem /= self.axes[d].len;
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.node(i))
            .collect()
    }

    pub fn in_valid(&self, idx: &[usize], margin: usize) -> bool {
        idx.iter()
            .zip(&self.valid)
            .all(|(&i, &(lo, hi))| i >= lo + margin && i + margin <= hi)
    }

    /// Flat indices of the validity region shrunk by `margin` nodes.
    pub fn interior(&self, margin: usize) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&f| self.in_valid(&self.index(f), margin))
            .collect()
    }

    /// The validity region as an interpolation table.
    pub fn to_table(&self) -> Result<Arc<Table>> {
        let axes: Vec<Axis> = self
            .axes
            .iter()
            .zip(&self.valid)
            .map(|(a, &(lo, hi))| Axis {
                origin: a.node(lo),
                step: a.step,
                len: hi - lo + 1,
            })
            .collect();
        let count: usize = axes.iter().map(|a| a.len).product();
        let strides = self.strides();
        let mut values = Vec::with_capacity(count);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..count {
            let flat: usize = idx
                .iter()
                .zip(&self.valid)
                .zip(&strides)
                .map(|((&i, &(lo, _)), &s)| (i + lo) * s)
                .sum();
            values.push(self.values[flat]);
            for d in (0..axes.len()).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].len {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Arc::new(Table::new(axes, values)?))
    }

    /// Binary layout: `GRDF`, u32 dims, per axis (f64 origin, f64 step,
    /// u64 len, u64 valid_lo, u64 valid_hi), then row-major f64 values; all
    /// little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 40 * self.axes.len() + 8 * self.values.len());
        out.extend_from_slice(b"GRDF");
        out.extend_from_slice(&(self.axes.len() as u32).to_le_bytes());
        for (a, &(lo, hi)) in self.axes.iter().zip(&self.valid) {
            out.extend_from_slice(&a.origin.to_le_bytes());
            out.extend_from_slice(&a.step.to_le_bytes());
            out.extend_from_slice(&(a.len as u64).to_le_bytes());
            out.extend_from_slice(&(lo as u64).to_le_bytes());
            out.extend_from_slice(&(hi as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<GridFunction> {
        let bad = |m: &str| Error::Invalid(format!("grid binary: {m}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != b"GRDF" {
            return Err(bad("missing magic"));
        }
        let dims = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
        let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().unwrap()) as usize;
        let mut axes = Vec::with_capacity(dims);
        let mut valid = Vec::with_capacity(dims);
        for _ in 0..dims {
            let origin = f64_at(take(8)?);
            let step = f64_at(take(8)?);
            let len = u64_at(take(8)?);
            let lo = u64_at(take(8)?);
            let hi = u64_at(take(8)?);
            axes.push(Axis { origin, step, len });
            valid.push((lo, hi));
        }
        let count: usize = axes.iter().map(|a| a.len).product();
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(f64_at(take(8)?));
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let mut g = GridFunction::new(axes, values)?;
        if valid.iter().zip(&g.axes).any(|(&(lo, hi), a)| lo > hi || hi >= a.len) {
            return Err(bad("validity region out of range"));
        }
        g.valid = valid;
        Ok(g)
    }

    /// CSV with one row per node (coordinates, then value); 1-d and 2-d only.
    pub fn to_csv(&self) -> Result<Csv> {
        let names: Vec<String> = match self.dims() {
            1 => vec!["x".into(), "value".into()],
            2 => vec!["x".into(), "y".into(), "value".into()],
            d => return Err(Error::Shape(format!("CSV export supports 1-d and 2-d grids, got {d}"))),
        };
        let mut csv = Csv::new(names);
        for (d, (a, &(lo, hi))) in self.axes.iter().zip(&self.valid).enumerate() {
            csv.meta(
                format!("axis{d}"),
                format!("{} {} {} {lo} {hi}", fmt_f64(a.origin), fmt_f64(a.step), a.len),
            );
        }
        for flat in 0..self.values.len() {
            let mut row = self.coords(flat);
            row.push(self.values[flat]);
            csv.push_numbers(&row);
        }
        Ok(csv)
    }

    pub fn from_csv(text: &str) -> Result<GridFunction> {
        let bad = |m: String| Error::Invalid(format!("grid CSV: {m}"));
        let mut axes = Vec::new();
        let mut valid = Vec::new();
        let mut values = Vec::new();
        let mut seen_columns = false;
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# axis") {
                let (_, spec) = rest.split_once('=').ok_or_else(|| bad(line.into()))?;
                let parts: Vec<&str> = spec.split_whitespace().collect();
                if parts.len() != 5 {
                    return Err(bad(format!("axis line `{line}`")));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("number `{s}`")));
                let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("integer `{s}`")));
                axes.push(Axis {
                    origin: num(parts[0])?,
                    step: num(parts[1])?,
                    len: int(parts[2])?,
                });
                valid.push((int(parts[3])?, int(parts[4])?));
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else if !seen_columns {
                seen_columns = true;
            } else {
                let last = line.rsplit(',').next().unwrap_or("");
                values.push(last.trim().parse::<f64>().map_err(|_| bad(format!("value `{last}`")))?);
            }
        }
        let mut g = GridFunction::new(axes, values)?;
        g.valid = valid;
        Ok(g)
    }
}

/// The bump `φ_ε(y) ∝ exp(ε²/(|y|² − ε²))` on `|y| < ε`, sampled at
/// offsets `i·h_a` and renormalised so that its discrete mass is exactly one.
pub fn kernel(eps: f64, steps: &[f64]) -> Result<GridFunction> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("mollifier radius must be positive, got {eps}")));
    }
    let mut axes = Vec::with_capacity(steps.len());
    for &h in steps {
        let r = (eps / h * (1.0 + 1e-12)).floor() as usize;
        if r < 8 {
            return Err(Error::Resolution(format!(
                "spacing {h} gives {r} cells per radius {eps}; need ≥ 8"
            )));
        }
        axes.push(Axis {
            origin: -(r as f64) * h,
            step: h,
            len: 2 * r + 1,
        });
    }
    let count: usize = axes.iter().map(|a| a.len).product();
    let mut raw = GridFunction::new(axes, vec![0.0; count])?;
    let e2 = eps * eps;
    for flat in 0..count {
        // integer offsets keep the samples exactly symmetric
        let r2: f64 = raw
            .index(flat)
            .iter()
            .zip(&raw.axes)
            .zip(steps)
            .map(|((&i, a), &h)| {
                let y = (i as f64 - (a.len / 2) as f64) * h;
                y * y
            })
            .sum();
        raw.values[flat] = if r2 < e2 { (e2 / (r2 - e2)).exp() } else { 0.0 };
    }
    let cell: f64 = steps.iter().product();
    let mass: f64 = raw.values.iter().sum::<f64>() * cell;
    let values = raw.values.iter().map(|v| v / mass).collect();
    Ok(GridFunction { values, ..raw })
}

/// Discrete convolution `f^ε = φ_ε * f`. Nodes closer than `ε` to the edge
/// of `f`'s validity region are marked invalid (and hold `NaN`).
pub fn mollify(f: &GridFunction, eps: f64) -> Result<GridFunction> {
    let steps: Vec<f64> = f.axes.iter().map(|a| a.step).collect();
    let k = kernel(eps, &steps)?;
    let radius: Vec<usize> = k.axes.iter().map(|a| a.len / 2).collect();
    let mut valid = Vec::with_capacity(f.dims());
    for (d, &(lo, hi)) in f.valid.iter().enumerate() {
        if hi < lo + 2 * radius[d] + 1 {
            return Err(Error::Margin(format!(
                "radius {eps} leaves no interior along axis {d}"
            )));
        }
        valid.push((lo + radius[d], hi - radius[d]));
    }
    let strides = f.strides();
    // kernel offsets with nonzero weight, as flat displacements
    let mut taps: Vec<(isize, f64)> = Vec::new();
    let cell: f64 = steps.iter().product();
    for kf in 0..k.values.len() {
        let w = k.values[kf];
        if w == 0.0 {
            continue;
        }
        let kidx = k.index(kf);
        let disp: isize = kidx
            .iter()
            .zip(&radius)
            .zip(&strides)
            .map(|((&i, &r), &s)| (i as isize - r as isize) * s as isize)
            .sum();
        taps.push((disp, w * cell));
    }
    let out = GridFunction {
        axes: f.axes.clone(),
        values: vec![0.0; f.values.len()],
        valid,
    };
    let values: Vec<f64> = (0..f.values.len())
        .into_par_iter()
        .map(|flat| {
            if !out.in_valid(&out.index(flat), 0) {
                return f64::NAN;
            }
            let mut acc = 0.0;
            for &(disp, w) in &taps {
                // f(x − y) with y = disp: the kernel is symmetric so the sign is immaterial
                acc += w * f.values[(flat as isize - disp) as usize];
            }
            acc
        })
        .collect();
    Ok(GridFunction { values, ..out })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MollifyReport {
    pub eps: f64,
    /// `|f^ε − f|_∞` over the validity region.
    pub sup_dist: f64,
    /// Per-axis `|∂f^ε/∂x^j|_∞` by centred differences.
    pub deriv_sup: Vec<f64>,
    /// `ε^{-n} ∫_0^ε s^{n-1} w(s) ds`.
    pub dist_integral: f64,
    /// `ε^{-n-1} ∫_0^ε s^{n-1} w_j(s) ds` per axis.
    pub deriv_integrals: Vec<f64>,
    /// Smallest constant making every inequality hold at this ε.
    pub k_fit: f64,
    pub bound_dist: f64,
    pub bound_deriv: Vec<f64>,
}

/// Measures both sides of the mollification bounds for each radius.
pub fn verify_bounds(
    f: &GridFunction,
    w: &Modulus,
    per_axis_w: &[Modulus],
    eps_list: &[f64],
) -> Result<Vec<MollifyReport>> {
    let n = f.dims();
    if per_axis_w.len() != n {
        return Err(Error::Shape(format!(
            "{} per-axis moduli for a {n}-d grid",
            per_axis_w.len()
        )));
    }
    let strides = f.strides();
    let mut reports = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        for a in &f.axes {
            if a.step >= eps / 8.0 {
                return Err(Error::Resolution(format!(
                    "spacing {} is not below ε/8 = {}",
                    a.step,
                    eps / 8.0
                )));
            }
        }
        let fe = mollify(f, eps)?;
        let inner = fe.interior(1);
        let sup_dist = inner
            .iter()
            .map(|&i| (fe.values[i] - f.values[i]).abs())
            .fold(0.0, f64::max);
        let deriv_sup: Vec<f64> = (0..n)
            .map(|d| {
                let h = f.axes[d].step;
                inner
                    .iter()
                    .map(|&i| {
                        ((fe.values[i + strides[d]] - fe.values[i - strides[d]]) / (2.0 * h)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let moment = |m: &Modulus| -> Result<f64> {
            let top = eps.min(m.domain_cap());
            if top < eps {
                return Err(Error::Domain(format!(
                    "modulus cap {} below mollifier radius {eps}",
                    m.domain_cap()
                )));
            }
            let g = |s: f64| s.powi(n as i32 - 1) * m.eval(s).unwrap_or(f64::NAN);
            let scale = g(eps).abs().max(1e-300) * eps;
            Ok(integrate(g, 0.0, eps, 1e-12 * scale))
        };
        let dist_integral = moment(w)? / eps.powi(n as i32);
        let deriv_integrals = per_axis_w
            .iter()
            .map(|m| Ok(moment(m)? / eps.powi(n as i32 + 1)))
            .collect::<Result<Vec<f64>>>()?;
        let mut k_fit = sup_dist / dist_integral;
        for (ds, di) in deriv_sup.iter().zip(&deriv_integrals) {
            k_fit = k_fit.max(ds / di);
        }
        reports.push(MollifyReport {
            eps,
            sup_dist,
            bound_dist: k_fit * dist_integral,
            bound_deriv: deriv_integrals.iter().map(|d| k_fit * d).collect(),
            deriv_sup,
            dist_integral,
            deriv_integrals,
            k_fit,
        });
    }
    Ok(reports)
}

pub fn reports_to_csv(reports: &[MollifyReport]) -> Csv {
    let n = reports.first().map_or(0, |r| r.deriv_sup.len());
    let mut cols = vec!["eps".to_string(), "sup_dist".into(), "bound_dist".into()];
    for j in 0..n {
        cols.push(format!("deriv_sup_{j}"));
        cols.push(format!("bound_deriv_{j}"));
    }
    cols.push("k_fit".into());
    let mut csv = Csv::new(cols);
    for r in reports {
        let mut row = vec![r.eps, r.sup_dist, r.bound_dist];
        for j in 0..n {
            row.push(r.deriv_sup[j]);
            row.push(r.bound_deriv[j]);
        }
        row.push(r.k_fit);
        csv.push_numbers(&row);
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lo: f64, hi: f64, h: f64) -> Vec<Axis> {
        vec![GridFunction::axis_covering(lo, hi, h)]
    }

    #[test]
    fn kernel_mass_symmetry_support() {
        let k = kernel(0.1, &[0.01]).unwrap();
        let mass: f64 = k.values().iter().sum::<f64>() * 0.01;
        assert!((mass - 1.0).abs() < 1e-8);
        let n = k.values().len();
        for i in 0..n {
            assert_eq!(k.values()[i], k.values()[n - 1 - i]);
        }
        // the outermost nodes sit at |y| = ε
        assert_eq!(k.values()[0], 0.0);
        assert!(kernel(0.1, &[0.02]).is_err());

        let k2 = kernel(0.1, &[0.0125, 0.0125]).unwrap();
        let side = k2.axes()[0].len;
        for i in 0..side {
            for j in 0..side {
                assert_eq!(k2.values()[i * side + j], k2.values()[j * side + i]);
            }
        }
    }

    #[test]
    fn constants_and_linear_preserved() {
        let c = GridFunction::sample(line(-1.0, 1.0, 0.005), |_| 2.5).unwrap();
        let m = mollify(&c, 0.1).unwrap();
        for i in m.interior(0) {
            assert!((m.values()[i] - 2.5).abs() < 1e-8);
        }
        let lin = GridFunction::sample(line(-1.0, 1.0, 0.005), |x| x[0]).unwrap();
        let m = mollify(&lin, 0.1).unwrap();
        for i in m.interior(0) {
            assert!((m.values()[i] - lin.values()[i]).abs() < 1e-6);
        }
        assert!(mollify(&lin, 1.5).is_err());
    }

    #[test]
    fn abs_value_bound_at_origin() {
        let f = GridFunction::sample(line(-1.0, 1.0, 0.001), |x| x[0].abs()).unwrap();
        let m = mollify(&f, 0.1).unwrap();
        let mut worst = (0.0, 0.0);
        for i in m.interior(0) {
            let d = (m.values()[i] - f.values()[i]).abs();
            if d > worst.0 {
                worst = (d, f.coords(i)[0]);
            }
        }
        assert!(worst.0 <= 0.1 && worst.1.abs() < 1e-9);
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let axes = vec![
            GridFunction::axis_covering(0.0, 1.0, 0.25),
            GridFunction::axis_covering(-1.0, 1.0, 0.5),
        ];
        let g = GridFunction::sample(axes, |p| p[0] * 3.0 - p[1].powi(3) / 7.0).unwrap();
        assert_eq!(GridFunction::from_bytes(&g.to_bytes()).unwrap(), g);
        let text = g.to_csv().unwrap().render();
        assert_eq!(GridFunction::from_csv(&text).unwrap(), g);
        assert!(GridFunction::from_bytes(&g.to_bytes()[..20]).is_err());
    }
}
