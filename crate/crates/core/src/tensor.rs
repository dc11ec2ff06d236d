//! Row-major dense tensors of `f64`.

use crate::error::{shape, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(shape_err(shape, data.len()));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Outer product `v_1 ⊗ v_2 ⊗ … ⊗ v_m`.
    pub fn outer(factors: &[&[f64]]) -> Self {
        let shape: Vec<usize> = factors.iter().map(|f| f.len()).collect();
        let mut data = vec![1.0];
        for f in factors {
            let mut next = Vec::with_capacity(data.len() * f.len());
            for &a in &data {
                next.extend(f.iter().map(|&b| a * b));
            }
            data = next;
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
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

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[flat_index(&self.shape, index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let k = flat_index(&self.shape, index);
        self.data[k] = value;
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.data)
    }

    /// Frobenius distance to a tensor of equal shape.
    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(shape(format!("shape {:?} differs from {:?}", self.shape, other.shape)));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }
}

fn shape_err(shape: &[usize], len: usize) -> crate::error::Error {
    crate::error::shape(format!(
        "shape {:?} needs {} entries, got {}",
        shape,
        shape.iter().product::<usize>(),
        len
    ))
}

pub fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

pub fn flat_index(shape: &[usize], index: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), index.len());
    index.iter().zip(shape).fold(0, |acc, (&i, &n)| {
        debug_assert!(i < n);
        acc * n + i
    })
}

pub fn frobenius(data: &[f64]) -> f64 {
    data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Advances a row-major multi-index; returns `false` after the last index.
pub fn next_index(index: &mut [usize], shape: &[usize]) -> bool {
    for k in (0..shape.len()).rev() {
        index[k] += 1;
        if index[k] < shape[k] {
            return true;
        }
        index[k] = 0;
    }
    false
}

/// Applies `op` to every 1D fibre of `data` along `axis`.
pub(crate) fn for_each_fibre(data: &mut [f64], shape: &[usize], axis: usize, mut op: impl FnMut(&mut [f64])) {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut fibre = vec![0.0; n];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for (k, v) in fibre.iter_mut().enumerate() {
                *v = data[base + k * inner];
            }
            op(&mut fibre);
            for (k, v) in fibre.iter().enumerate() {
                data[base + k * inner] = *v;
            }
        }
    }
}
