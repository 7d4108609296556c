//! Small symmetric matrices and their largest eigenvalue in closed form.

use crate::error::{Error, Result};

/// Symmetric `d x d` matrix, `d` in {2, 3}, stored densely.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    a: [[f64; 3]; 3],
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim));
        Self { dim, a: [[0.0; 3]; 3] }
    }

    /// Symmetric part of the given rows.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.a[i][j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i][i] = v;
        }
        m
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&[1.0; 3][..dim])
    }

    /// `w w^T`.
    pub fn outer(w: &[f64]) -> Self {
        let mut m = Self::zeros(w.len());
        for i in 0..w.len() {
            for j in 0..w.len() {
                m.a[i][j] = w[i] * w[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.entries().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).flat_map(move |i| (0..self.dim).map(move |j| self.a[i][j]))
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |x, y| x + y)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |x, y| x - y)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.zip(self, |x, _| s * x)
    }

    fn zip(&self, o: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.dim, o.dim);
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] = f(self.a[i][j], o.a[i][j]);
            }
        }
        m
    }

    /// `w^T A w`.
    pub fn quad_form(&self, w: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += w[i] * self.a[i][j] * w[j];
            }
        }
        s
    }

    pub fn mul_vec(&self, w: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..self.dim).map(|j| self.a[i][j] * w[j]).sum();
        }
        out
    }

    /// Largest eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        lambda_max(self)
    }
}

/// Largest eigenvalue of a symmetric matrix: quadratic formula for `d = 2`,
/// trigonometric form of Cardano's solution for `d = 3`.
pub fn lambda_max(m: &SymMatrix) -> f64 {
    let a = &m.a;
    match m.dim {
        1 => a[0][0],
        2 => {
            let mid = 0.5 * (a[0][0] + a[1][1]);
            let half = 0.5 * (a[0][0] - a[1][1]);
            mid + half.hypot(a[0][1])
        }
        3 => {
            let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            if p1 == 0.0 {
                return a[0][0].max(a[1][1]).max(a[2][2]);
            }
            let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
            let (d0, d1, d2) = (a[0][0] - q, a[1][1] - q, a[2][2] - q);
            let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            // det((A - qI) / p) / 2
            let det = d0 * (d1 * d2 - a[1][2] * a[1][2]) - a[0][1] * (a[0][1] * d2 - a[1][2] * a[0][2])
                + a[0][2] * (a[0][1] * a[1][2] - d1 * a[0][2]);
            let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            q + 2.0 * p * phi.cos()
        }
        _ => unreachable!("dimension checked on construction"),
    }
}

/// Slack of `|w|^2 / 2 <= d * lambda_max(w w^T - B)` for trace-free
/// symmetric `B`. The inequality holds whenever the slack is non-negative.
pub fn pointwise_inequality_slack(w: &[f64], b: &SymMatrix) -> Result<f64> {
    let d = b.dim();
    let trace = b.trace();
    if trace.abs() > 1e-12 * b.max_abs().max(1.0) {
        return Err(Error::NotTraceless { trace });
    }
    let w2: f64 = w.iter().map(|v| v * v).sum();
    let lhs = 0.5 * w2;
    let rhs = d as f64 * SymMatrix::outer(w).sub(b).lambda_max();
    Ok(rhs - lhs)
}
