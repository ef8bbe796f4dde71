use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order-3 tensor of shape `(H, W, D)`, stored height-major with the channel
/// index fastest: element `(i, j, c)` lives at `(i * W + j) * D + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

/// `(height, width, depth)`. Flat vectors use `(1, 1, len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub h: usize,
    pub w: usize,
    pub d: usize,
}

impl Dims {
    pub const fn new(h: usize, w: usize, d: usize) -> Self {
        Self { h, w, d }
    }

    pub const fn flat(len: usize) -> Self {
        Self { h: 1, w: 1, d: len }
    }

    pub const fn len(&self) -> usize {
        self.h * self.w * self.d
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn is_flat(&self) -> bool {
        self.h == 1 && self.w == 1
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_flat() {
            write!(f, "{}", self.d)
        } else {
            write!(f, "{}x{}x{}", self.h, self.w, self.d)
        }
    }
}

impl Tensor3 {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Shape(format!("tensor dims {dims} have a zero extent")));
        }
        if data.len() != dims.len() {
            return Err(Error::Shape(format!(
                "tensor {dims} needs {} values, got {}",
                dims.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("tensor values must be finite".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn from_vector(v: Vec<f64>) -> Result<Self> {
        Self::new(Dims::flat(v.len()), v)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[(i * self.dims.w + j) * self.dims.d + c]
    }

    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        self.data[(i * self.dims.w + j) * self.dims.d + c] = v;
    }
}

/// A batch of equally shaped samples stored back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBatch {
    pub(crate) n: usize,
    pub(crate) dims: Dims,
    pub(crate) data: Vec<f64>,
}

impl TensorBatch {
    pub fn from_samples(samples: &[Tensor3]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidInput("empty batch".into()))?
            .dims();
        let mut data = Vec::with_capacity(first.len() * samples.len());
        for s in samples {
            if s.dims() != first {
                return Err(Error::Shape(format!("batch mixes {first} and {}", s.dims())));
            }
            data.extend_from_slice(s.data());
        }
        Ok(Self {
            n: samples.len(),
            dims: first,
            data,
        })
    }

    pub(crate) fn from_raw(n: usize, dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(n * dims.len(), data.len());
        Self { n, dims, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        let len = self.dims.len();
        &self.data[k * len..(k + 1) * len]
    }

    pub fn to_samples(&self) -> Vec<Tensor3> {
        (0..self.n)
            .map(|k| Tensor3 {
                dims: self.dims,
                data: self.sample(k).to_vec(),
            })
            .collect()
    }
}

/// `C = A' B' + beta C` for row-major operands, where `A'` is `A` or its
/// transpose (`m x k` after transposition) and likewise `B'` (`k x n`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the assertions above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], at: bool, b: &[f64], bt: bool) -> Vec<f64> {
        let av = |i: usize, p: usize| if at { a[p * m + i] } else { a[i * k + p] };
        let bv = |p: usize, j: usize| if bt { b[j * k + p] } else { b[p * n + j] };
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| av(i, p) * bv(p, j)).sum();
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_in_every_transpose_mode() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64).sin()).collect();
        for at in [false, true] {
            for bt in [false, true] {
                let mut c = vec![1.0; m * n];
                gemm(m, k, n, &a, at, &b, bt, 0.0, &mut c);
                let want = naive(m, k, n, &a, at, &b, bt);
                for (x, y) in c.iter().zip(&want) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tensor_validation() {
        assert!(Tensor3::new(Dims::new(2, 2, 1), vec![0.0; 3]).is_err());
        assert!(Tensor3::new(Dims::new(1, 1, 1), vec![f64::NAN]).is_err());
        let mut t = Tensor3::zeros(Dims::new(2, 3, 2));
        t.set(1, 2, 1, 5.0);
        assert_eq!(t.data()[11], 5.0);
        assert_eq!(t.get(1, 2, 1), 5.0);
    }

    #[test]
    fn batch_rejects_mixed_shapes() {
        let a = Tensor3::zeros(Dims::new(2, 2, 1));
        let b = Tensor3::zeros(Dims::new(2, 1, 2));
        assert!(TensorBatch::from_samples(&[a.clone(), b]).is_err());
        assert!(TensorBatch::from_samples(&[]).is_err());
        let batch = TensorBatch::from_samples(&[a.clone(), a]).unwrap();
        assert_eq!(batch.len(), 2);
        assert_eq!(batch.to_samples().len(), 2);
    }
}
