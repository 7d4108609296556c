use std::path::Path;

use crate::error::{Error, Result};

/// Cubic Hermite interpolant through `(x_i, y_i)` with prescribed slopes.
#[derive(Clone, Debug)]
pub struct HermiteCurve {
    x: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
}

/// Natural cubic spline through `(x_i, y_i)`.
#[derive(Clone, Debug)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

fn locate(x: &[f64], v: f64) -> usize {
    let last = x.len() - 2;
    match x.binary_search_by(|p| p.total_cmp(&v)) {
        Ok(i) => i.min(last),
        Err(0) => 0,
        Err(i) => (i - 1).min(last),
    }
}

impl HermiteCurve {
    pub fn new(x: Vec<f64>, y: Vec<f64>, dy: Vec<f64>) -> Self {
        Self { x, y, dy }
    }

    /// Value, first and second derivative.
    pub fn eval(&self, v: f64) -> (f64, f64, f64) {
        let i = locate(&self.x, v);
        let h = self.x[i + 1] - self.x[i];
        let t = (v - self.x[i]) / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.dy[i] * h, self.dy[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        let d1 = (6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1;
        let d2 = (12.0 * t - 6.0) * y0 + (6.0 * t - 4.0) * m0 + (-12.0 * t + 6.0) * y1 + (6.0 * t - 2.0) * m1;
        (val, d1 / h, d2 / (h * h))
    }
}

impl NaturalSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second-derivative system.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for j in 0..k {
                let i = j + 1;
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[j] = 2.0 * (h0 + h1);
                upper[j] = h1;
                rhs[j] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for j in 1..k {
                let lower = x[j + 1] - x[j];
                let w = lower / diag[j - 1];
                diag[j] -= w * upper[j - 1];
                rhs[j] -= w * rhs[j - 1];
            }
            for j in (0..k).rev() {
                let next = if j + 1 < k { m[j + 2] } else { 0.0 };
                m[j + 1] = (rhs[j] - upper[j] * next) / diag[j];
            }
        }
        Self { x, y, m }
    }

    /// Value and first derivative.
    pub fn eval(&self, v: f64) -> (f64, f64) {
        let i = locate(&self.x, v);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - v) / h;
        let b = (v - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let val = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (self.y[i + 1] - self.y[i]) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (val, d1)
    }
}

/// Tabulated offset model read from CSV columns `rho, p, dp, h_1 .. h_d`.
#[derive(Clone, Debug)]
pub struct ModelTable {
    pub(crate) rho: Vec<f64>,
    pub(crate) pressure: HermiteCurve,
    pub(crate) offset: Vec<NaturalSpline>,
}

impl ModelTable {
    pub fn from_columns(rho: Vec<f64>, p: Vec<f64>, dp: Vec<f64>, h: Vec<Vec<f64>>) -> Result<Self> {
        if rho.len() < 4 {
            return Err(Error::InvalidModel("a model table needs at least 4 rows".into()));
        }
        if rho.windows(2).any(|w| w[1] <= w[0]) || rho[0] <= 0.0 {
            return Err(Error::InvalidModel("table densities must be positive and strictly increasing".into()));
        }
        if p.len() != rho.len() || dp.len() != rho.len() || h.iter().any(|c| c.len() != rho.len()) {
            return Err(Error::InvalidModel("table columns differ in length".into()));
        }
        Ok(Self {
            pressure: HermiteCurve::new(rho.clone(), p, dp),
            offset: h.into_iter().map(|c| NaturalSpline::new(rho.clone(), c)).collect(),
            rho,
        })
    }

    pub fn read_csv(path: &Path, dim: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut cols = vec![Vec::new(); 3 + dim];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 + dim {
                return Err(Error::InvalidModel(format!(
                    "{}: row {} has {} columns, expected {} (rho, p, dp, h_1..h_{dim})",
                    path.display(),
                    row + 2,
                    rec.len(),
                    3 + dim
                )));
            }
            for (c, field) in cols.iter_mut().zip(rec.iter()) {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidModel(format!("{}: row {}: '{field}' is not a number", path.display(), row + 2))
                })?;
                c.push(v);
            }
        }
        let mut it = cols.into_iter();
        let rho = it.next().expect("column");
        let p = it.next().expect("column");
        let dp = it.next().expect("column");
        Self::from_columns(rho, p, dp, it.collect())
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.rho[0], *self.rho.last().expect("non-empty"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubic() {
        let x: Vec<f64> = (0..6).map(|i| 1.0 + 0.5 * i as f64).collect();
        let f = |v: f64| v * v * v - 2.0 * v;
        let df = |v: f64| 3.0 * v * v - 2.0;
        let c = HermiteCurve::new(x.clone(), x.iter().map(|&v| f(v)).collect(), x.iter().map(|&v| df(v)).collect());
        for v in [1.1, 1.77, 2.5, 3.3] {
            let (a, b, s) = c.eval(v);
            assert!((a - f(v)).abs() < 1e-12);
            assert!((b - df(v)).abs() < 1e-11);
            assert!((s - 6.0 * v).abs() < 1e-10);
        }
    }

    #[test]
    fn spline_reproduces_line() {
        let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let s = NaturalSpline::new(x.clone(), x.iter().map(|v| 2.0 * v + 1.0).collect());
        let (v, d) = s.eval(2.3);
        assert!((v - 5.6).abs() < 1e-13 && (d - 2.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_unsorted_table() {
        let r = ModelTable::from_columns(vec![1.0, 0.5, 2.0, 3.0], vec![0.0; 4], vec![0.0; 4], vec![]);
        assert!(r.is_err());
    }
}
