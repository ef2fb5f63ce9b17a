//! Dense row-major arrays of `f64`.

use std::fmt;

use crate::error::{contract, Result};

/// Ordered list of positive dimensions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        contract!(!dims.is_empty(), "shape must have rank >= 1");
        contract!(
            dims.iter().all(|&d| d > 0),
            "shape dims must be positive, got {dims:?}"
        );
        Ok(Shape(dims.to_vec()))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

#[derive(Clone, PartialEq)]
pub struct Array {
    shape: Shape,
    data: Vec<f64>,
}

impl fmt::Debug for Array {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Array")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl Array {
    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        contract!(
            shape.numel() == data.len(),
            "shape {shape} needs {} elements, got {}",
            shape.numel(),
            data.len()
        );
        Ok(Array { shape, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let n = shape.numel();
        Ok(Array {
            shape,
            data: vec![0.0; n],
        })
    }

    pub fn full(dims: &[usize], value: f64) -> Result<Self> {
        let mut a = Self::zeros(dims)?;
        a.data.fill(value);
        Ok(a)
    }

    pub fn scalar(value: f64) -> Self {
        Array {
            shape: Shape(vec![1]),
            data: vec![value],
        }
    }

    /// Builds a 2-D array from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        contract!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        contract!(
            rows.iter().all(|r| r.len() == cols),
            "ragged rows in from_rows"
        );
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_vec(&[rows.len(), cols], data)
    }

    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Array { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// `(rows, cols)` of a rank-2 array.
    pub fn matrix_dims(&self) -> Result<(usize, usize)> {
        contract!(
            self.shape.rank() == 2,
            "expected a matrix, got shape {}",
            self.shape
        );
        Ok((self.shape.0[0], self.shape.0[1]))
    }

    pub fn get2(&self, row: usize, col: usize) -> f64 {
        let cols = self.shape.0[self.shape.rank() - 1];
        self.data[row * cols + col]
    }

    /// Value of a single-element array.
    pub fn item(&self) -> Result<f64> {
        contract!(
            self.data.len() == 1,
            "item() on array of shape {}",
            self.shape
        );
        Ok(self.data[0])
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Self> {
        Self::from_vec(dims, self.data.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row `i` of a rank-2 array.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape.0[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn matmul(&self, other: &Array) -> Result<Array> {
        let (n, k) = self.matrix_dims()?;
        let (k2, m) = other.matrix_dims()?;
        contract!(
            k == k2,
            "matmul inner dims differ: {} vs {}",
            self.shape,
            other.shape
        );
        let mut out = vec![0.0; n * m];
        matmul_into(&self.data, &other.data, &mut out, n, k, m);
        Ok(Array::from_parts(Shape(vec![n, m]), out))
    }

    pub fn transpose(&self) -> Result<Array> {
        let (r, c) = self.matrix_dims()?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Array::from_parts(Shape(vec![c, r]), out))
    }

    pub(crate) fn add_assign(&mut self, other: &Array) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `out += a[n×k] · b[k×m]`, row-major.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * m..(p + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// `out += aᵀ · b` where `a` is `[k×n]` and `b` is `[k×m]`.
pub(crate) fn matmul_at_b_into(
    a: &[f64],
    b: &[f64],
    out: &mut [f64],
    k: usize,
    n: usize,
    m: usize,
) {
    for p in 0..k {
        let a_row = &a[p * n..(p + 1) * n];
        let b_row = &b[p * m..(p + 1) * m];
        for (i, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let out_row = &mut out[i * m..(i + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// `out += a · bᵀ` where `a` is `[n×k]` and `b` is `[m×k]`.
pub(crate) fn matmul_a_bt_into(
    a: &[f64],
    b: &[f64],
    out: &mut [f64],
    n: usize,
    k: usize,
    m: usize,
) {
    for i in 0..n {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let b_row = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for (x, y) in a_row.iter().zip(b_row) {
                s += x * y;
            }
            out[i * m + j] += s;
        }
    }
}
