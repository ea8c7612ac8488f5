use crate::error::{Error, Result};

/// Uniform grid axis: nodes `origin + i·step`, `i < len`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }
}

/// Row-major samples on a tensor grid, interpolated with tensor-product
/// Catmull-Rom cubics. Derivatives of the interpolant are exact.
///
/// Evaluation needs one node of padding on each side; outside that the
/// value is `NaN`.
#[derive(Clone, Debug)]
pub struct Table {
    axes: Vec<Axis>,
    values: Vec<f64>,
    strides: Vec<usize>,
}

impl Table {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Table> {
        let count: usize = axes.iter().map(|a| a.len).product();
        if axes.is_empty() || count != values.len() {
            return Err(Error::Shape(format!(
                "{} values for axes of total size {count}",
                values.len()
            )));
        }
        if axes.iter().any(|a| a.len < 4 || !(a.step > 0.0)) {
            return Err(Error::Shape("each table axis needs ≥ 4 nodes and positive step".into()));
        }
        let mut strides = vec![1; axes.len()];
        for d in (0..axes.len() - 1).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].len;
        }
        Ok(Table {
            axes,
            values,
            strides,
        })
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

    pub fn eval(&self, order: &[u8], x: &[f64]) -> f64 {
        let mut base = Vec::with_capacity(self.axes.len());
        let mut weights = Vec::with_capacity(self.axes.len());
        for ((axis, &xi), &d) in self.axes.iter().zip(x).zip(order) {
            let t = (xi - axis.origin) / axis.step;
            if !t.is_finite() {
                return f64::NAN;
            }
            let mut cell = t.floor();
            let mut u = t - cell;
            let last = (axis.len - 3) as f64;
            if cell == last + 1.0 && u == 0.0 {
                cell = last;
                u = 1.0;
            }
            if cell < 1.0 || cell > last {
                return f64::NAN;
            }
            base.push(cell as usize - 1);
            weights.push(catmull_rom(u, d, axis.step));
        }
        let dims = self.axes.len();
        let mut total = 0.0;
        let mut idx = vec![0usize; dims];
        loop {
            let mut w = 1.0;
            let mut flat = 0;
            for d in 0..dims {
                w *= weights[d][idx[d]];
                flat += (base[d] + idx[d]) * self.strides[d];
            }
            if w != 0.0 {
                total += w * self.values[flat];
            }
            let mut d = dims;
            loop {
                if d == 0 {
                    return total;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < 4 {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

/// Weights of the four neighbouring nodes for the `order`-th derivative.
fn catmull_rom(u: f64, order: u8, h: f64) -> [f64; 4] {
    let (u2, u3) = (u * u, u * u * u);
    let w = match order {
        0 => [
            (-u3 + 2.0 * u2 - u) / 2.0,
            (3.0 * u3 - 5.0 * u2 + 2.0) / 2.0,
            (-3.0 * u3 + 4.0 * u2 + u) / 2.0,
            (u3 - u2) / 2.0,
        ],
        1 => [
            (-3.0 * u2 + 4.0 * u - 1.0) / 2.0,
            (9.0 * u2 - 10.0 * u) / 2.0,
            (-9.0 * u2 + 8.0 * u + 1.0) / 2.0,
            (3.0 * u2 - 2.0 * u) / 2.0,
        ],
        2 => [-3.0 * u + 2.0, 9.0 * u - 5.0, -9.0 * u + 4.0, 3.0 * u - 1.0],
        3 => [-3.0, 9.0, -9.0, 3.0],
        _ => [0.0; 4],
    };
    let scale = h.powi(-(order as i32));
    w.map(|v| v * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_derivatives() {
        // Catmull-Rom reproduces quadratics exactly
        let axis = Axis {
            origin: -1.0,
            step: 0.1,
            len: 21,
        };
        let f = |x: f64| 0.5 * x * x - x + 2.0;
        let values = (0..21).map(|i| f(axis.node(i))).collect();
        let t = Table::new(vec![axis], values).unwrap();
        for &x in &[-0.8, -0.33, 0.0, 0.41, 0.8] {
            assert!((t.eval(&[0], &[x]) - f(x)).abs() < 1e-12);
            assert!((t.eval(&[1], &[x]) - (x - 1.0)).abs() < 1e-10);
        }
        assert!(t.eval(&[0], &[-0.95]).is_nan());
        assert!(t.eval(&[0], &[0.9]).is_finite());
    }

    #[test]
    fn tensor_product_2d() {
        let ax = Axis {
            origin: 0.0,
            step: 0.25,
            len: 9,
        };
        let f = |x: f64, y: f64| x * y + y;
        let mut v = Vec::new();
        for i in 0..9 {
            for j in 0..9 {
                v.push(f(ax.node(i), ax.node(j)));
            }
        }
        let t = Table::new(vec![ax.clone(), ax], v).unwrap();
        assert!((t.eval(&[0, 0], &[0.6, 1.1]) - f(0.6, 1.1)).abs() < 1e-12);
        assert!((t.eval(&[1, 1], &[0.6, 1.1]) - 1.0).abs() < 1e-10);
        assert!((t.eval(&[0, 1], &[0.6, 1.1]) - 1.6).abs() < 1e-10);
    }
}
