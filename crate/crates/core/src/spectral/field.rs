use crate::eigen::SymMatrix;
use crate::error::{Error, Result};
use crate::reduce::max_abs;

/// Real scalar samples on a [`Grid`](super::Grid), row-major with the last
/// axis varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self::constant(len, 0.0)
    }

    pub fn constant(len: usize, c: f64) -> Self {
        Self {
            values: vec![c; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `d` scalar components sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = comps.first() else {
            return Err(Error::ShapeMismatch("vector field needs at least one component".into()));
        };
        if comps.iter().any(|c| c.len() != first.len()) {
            return Err(Error::ShapeMismatch("vector components differ in length".into()));
        }
        Ok(Self { comps })
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            comps: vec![ScalarField::zeros(len); dim],
        }
    }

    /// Spatially constant field.
    pub fn constant(len: usize, c: &[f64]) -> Self {
        Self {
            comps: c.iter().map(|&ci| ScalarField::constant(len, ci)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn comp(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<ScalarField> {
        self.comps
    }

    /// Value at a flat grid index, padded with zeros to three entries.
    pub fn at(&self, idx: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.values[idx];
        }
        out
    }

    pub fn map_comps(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self {
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn zip_comps(&self, other: &Self, f: impl Fn(&ScalarField, &ScalarField) -> ScalarField) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_comps(other, ScalarField::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_comps(other, ScalarField::sub)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_comps(|c| c.scale(s))
    }

    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_comps(other, |a, b| a.axpy(s, b))
    }

    /// Multiply every component by a scalar field.
    pub fn mul_scalar(&self, f: &ScalarField) -> Self {
        self.map_comps(|c| c.mul(f))
    }

    pub fn add_constant(&self, c: &[f64]) -> Self {
        Self {
            comps: self
                .comps
                .iter()
                .zip(c)
                .map(|(f, &ci)| f.map(|v| v + ci))
                .collect(),
        }
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> ScalarField {
        let mut out = ScalarField::zeros(self.len());
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, &x), &y) in out.values.iter_mut().zip(&a.values).zip(&b.values) {
                *o += x * y;
            }
        }
        out
    }

    pub fn norm_squared(&self) -> ScalarField {
        self.dot(self)
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        self.norm_squared().max().max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
    }
}

/// Full `d x d` tensor field, row-major components (`comp(i, j)`).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    dim: usize,
    comps: Vec<ScalarField>,
}

impl MatrixField {
    pub fn new(dim: usize, comps: Vec<ScalarField>) -> Result<Self> {
        if comps.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "matrix field of dimension {dim} needs {} components, got {}",
                dim * dim,
                comps.len()
            )));
        }
        Ok(Self { dim, comps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn comp(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i * self.dim + j]
    }

    pub fn trace(&self) -> ScalarField {
        let mut out = self.comp(0, 0).clone();
        for i in 1..self.dim {
            out = out.add(self.comp(i, i));
        }
        out
    }

    /// Largest pointwise Frobenius norm.
    pub fn max_frobenius(&self) -> f64 {
        let len = self.comps[0].len();
        (0..len)
            .map(|idx| self.comps.iter().map(|c| c.values[idx].powi(2)).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }
}

/// Symmetric, trace-free `d x d` tensor field.
///
/// Only the `d(d+1)/2 - 1` independent entries are stored (see
/// [`SymTensorField0::component_names`]); the last diagonal entry is minus the
/// sum of the others, so symmetry and zero trace hold by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField0 {
    dim: usize,
    entries: Vec<ScalarField>,
}

impl SymTensorField0 {
    /// Independent entries in storage order.
    pub fn component_names(dim: usize) -> &'static [&'static str] {
        match dim {
            2 => &["11", "12"],
            3 => &["11", "12", "13", "22", "23"],
            _ => &[],
        }
    }

    fn slots(dim: usize) -> &'static [(usize, usize)] {
        match dim {
            2 => &[(0, 0), (0, 1)],
            3 => &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)],
            _ => &[],
        }
    }

    pub fn new(dim: usize, entries: Vec<ScalarField>) -> Result<Self> {
        let expected = Self::component_names(dim).len();
        if expected == 0 || entries.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "trace-free symmetric tensor of dimension {dim} needs {expected} entries, got {}",
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            dim,
            entries: vec![ScalarField::zeros(len); Self::component_names(dim).len()],
        }
    }

    /// Project a full tensor onto its symmetric trace-free part.
    pub fn from_matrix_field(m: &MatrixField) -> Self {
        let dim = m.dim();
        let tr = m.trace();
        let entries = Self::slots(dim)
            .iter()
            .map(|&(i, j)| {
                let sym = m.comp(i, j).add(m.comp(j, i)).scale(0.5);
                if i == j {
                    sym.axpy(-1.0 / dim as f64, &tr)
                } else {
                    sym
                }
            })
            .collect();
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    /// Full component `(i, j)`.
    pub fn comp(&self, i: usize, j: usize) -> ScalarField {
        let last = self.dim - 1;
        if i == last && j == last {
            let mut out = ScalarField::zeros(self.len());
            for k in 0..last {
                out = out.sub(&self.comp(k, k));
            }
            return out;
        }
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let pos = Self::slots(self.dim)
            .iter()
            .position(|&s| s == (a, b))
            .expect("slot exists for every off-last entry");
        self.entries[pos].clone()
    }

    /// Full matrix at a flat grid index.
    pub fn at(&self, idx: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim);
        for (&(i, j), e) in Self::slots(self.dim).iter().zip(&self.entries) {
            m.set(i, j, e.values()[idx]);
        }
        let last = self.dim - 1;
        let tr: f64 = (0..last).map(|k| m.get(k, k)).sum();
        m.set(last, last, -tr);
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|a| a.scale(s)).collect(),
        }
    }

    /// Largest pointwise entry magnitude, including the implied last diagonal.
    pub fn max_abs(&self) -> f64 {
        (0..self.len())
            .map(|idx| self.at(idx).max_abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_storage_is_traceless_and_symmetric() {
        let e = vec![ScalarField::new(vec![1.0]), ScalarField::new(vec![2.0]), ScalarField::new(vec![3.0]),
            ScalarField::new(vec![-4.0]), ScalarField::new(vec![5.0])];
        let t = SymTensorField0::new(3, e).unwrap();
        let m = t.at(0);
        assert_eq!(m.trace(), 0.0);
        assert_eq!(m.get(2, 1), 5.0);
        assert_eq!(m.get(2, 2), 3.0);
        assert_eq!(t.comp(2, 2).values(), &[3.0]);
        assert_eq!(t.comp(1, 0).values(), &[2.0]);
    }

    #[test]
    fn projection_removes_trace_and_antisymmetry() {
        let c = |v: f64| ScalarField::new(vec![v]);
        let m = MatrixField::new(2, vec![c(3.0), c(1.0), c(5.0), c(1.0)]).unwrap();
        let t = SymTensorField0::from_matrix_field(&m).at(0);
        assert_eq!(t.get(0, 0), 1.0);
        assert_eq!(t.get(1, 1), -1.0);
        assert_eq!(t.get(0, 1), 3.0);
    }

    #[test]
    fn rejects_wrong_entry_count() {
        assert!(SymTensorField0::new(2, vec![ScalarField::zeros(4); 3]).is_err());
        assert!(VectorField::new(vec![ScalarField::zeros(4), ScalarField::zeros(5)]).is_err());
    }
}
