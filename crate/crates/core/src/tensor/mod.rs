//! Dense n-dimensional arrays with row-major layout.
//!
//! `ComplexTensor` is the carrier for fields and spectra throughout the
//! crate; `RealTensor` holds real-valued fields (datasets, extensions,
//! power spectra).

pub mod fft;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense n-dimensional complex array, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

/// Dense n-dimensional real array, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::ShapeMismatch("empty shape".into()));
    }
    if shape.iter().any(|&n| n == 0) {
        return Err(Error::ShapeMismatch(format!(
            "shape extents must be >= 1, got {shape:?}"
        )));
    }
    Ok(())
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl ComplexTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        check_shape(shape).expect("valid shape");
        let len = shape.iter().product();
        ComplexTensor {
            shape: shape.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_data(shape: &[usize], data: Vec<Complex64>) -> Result<Self> {
        check_shape(shape)?;
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} implies {len} entries, got {}",
                data.len()
            )));
        }
        Ok(ComplexTensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn from_vec(data: Vec<Complex64>) -> Self {
        let n = data.len();
        Self::from_data(&[n], data).expect("non-empty vector")
    }

    pub fn from_real_slice(shape: &[usize], values: &[f64]) -> Result<Self> {
        let data = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_data(shape, data)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        check_shape(shape).expect("valid shape");
        let len: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            // advance the multi-index, last axis fastest
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        ComplexTensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn scalar(v: Complex64) -> Self {
        ComplexTensor {
            shape: vec![1],
            data: vec![v],
        }
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

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let strides = self.strides();
        idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum()
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        ComplexTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(ComplexTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        self.map(|z| z * alpha)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn real_part(&self) -> RealTensor {
        RealTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }

    pub fn imag_part(&self) -> RealTensor {
        RealTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// <self, other> = sum conj(self_i) * other_i.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Extract the block `start[ax] .. start[ax] + size[ax]` along each axis.
    pub fn slice(&self, start: &[usize], size: &[usize]) -> Result<Self> {
        if start.len() != self.shape.len() || size.len() != self.shape.len() {
            return Err(Error::ShapeMismatch(
                "slice start/size rank mismatch".into(),
            ));
        }
        for ax in 0..self.shape.len() {
            if start[ax] + size[ax] > self.shape[ax] {
                return Err(Error::ShapeMismatch(format!(
                    "slice [{}, {}) out of bounds for axis {ax} of extent {}",
                    start[ax],
                    start[ax] + size[ax],
                    self.shape[ax]
                )));
            }
        }
        let mut out = ComplexTensor::zeros(size);
        let out_len = out.len();
        let in_strides = self.strides();
        let mut idx = vec![0usize; size.len()];
        for o in 0..out_len {
            let mut off = 0usize;
            for ax in 0..size.len() {
                off += (start[ax] + idx[ax]) * in_strides[ax];
            }
            out.data[o] = self.data[off];
            for ax in (0..size.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < size[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(out)
    }

    /// Embed this tensor into a zero tensor of `shape` at `offset`
    /// (adjoint of `slice`).
    pub fn pad_embed(&self, shape: &[usize], offset: &[usize]) -> Result<Self> {
        if offset.len() != self.shape.len() || shape.len() != self.shape.len() {
            return Err(Error::ShapeMismatch("pad rank mismatch".into()));
        }
        for ax in 0..shape.len() {
            if offset[ax] + self.shape[ax] > shape[ax] {
                return Err(Error::ShapeMismatch(format!(
                    "pad target {shape:?} too small on axis {ax}"
                )));
            }
        }
        let mut out = ComplexTensor::zeros(shape);
        let out_strides = out.strides();
        let mut idx = vec![0usize; shape.len()];
        for i in 0..self.data.len() {
            let mut off = 0usize;
            for ax in 0..shape.len() {
                off += (offset[ax] + idx[ax]) * out_strides[ax];
            }
            out.data[off] = self.data[i];
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < self.shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(out)
    }

    /// Reorder axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.shape.len() {
            return Err(Error::ShapeMismatch("permutation rank mismatch".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidArg(format!("invalid permutation {perm:?}")));
            }
            seen[p] = true;
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let in_strides = self.strides();
        let mut out = ComplexTensor::zeros(&out_shape);
        let out_len = out.len();
        let mut idx = vec![0usize; out_shape.len()];
        for o in 0..out_len {
            let mut off = 0usize;
            for ax in 0..out_shape.len() {
                off += idx[ax] * in_strides[perm[ax]];
            }
            out.data[o] = self.data[off];
            for ax in (0..out_shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < out_shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(out)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        Ok(ComplexTensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Base offsets of all 1-d lanes along `axis`; each lane has
    /// `shape[axis]` elements spaced by `strides[axis]`.
    pub(crate) fn lane_offsets(&self, axis: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = Vec::with_capacity(self.data.len() / self.shape[axis]);
        let mut idx = vec![0usize; self.shape.len()];
        let total: usize = self
            .shape
            .iter()
            .enumerate()
            .filter(|&(ax, _)| ax != axis)
            .map(|(_, &n)| n)
            .product();
        for _ in 0..total {
            let off: usize = idx
                .iter()
                .zip(&strides)
                .enumerate()
                .filter(|&(ax, _)| ax != axis)
                .map(|(_, (&i, &s))| i * s)
                .sum();
            offsets.push(off);
            for ax in (0..self.shape.len()).rev() {
                if ax == axis {
                    continue;
                }
                idx[ax] += 1;
                if idx[ax] < self.shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        offsets
    }

    pub(crate) fn read_lane(&self, base: usize, stride: usize, out: &mut [Complex64]) {
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.data[base + i * stride];
        }
    }

    pub(crate) fn write_lane(&mut self, base: usize, stride: usize, vals: &[Complex64]) {
        for (i, &v) in vals.iter().enumerate() {
            self.data[base + i * stride] = v;
        }
    }
}

impl RealTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        check_shape(shape).expect("valid shape");
        RealTensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_data(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} implies {len} entries, got {}",
                data.len()
            )));
        }
        Ok(RealTensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::from_data(&[n], data).expect("non-empty vector")
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let c = ComplexTensor::from_fn(shape, |idx| Complex64::new(f(idx), 0.0));
        c.real_part()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn get(&self, idx: &[usize]) -> f64 {
        let strides = row_major_strides(&self.shape);
        let off: usize = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
        self.data[off]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let strides = row_major_strides(&self.shape);
        let off: usize = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
        self.data[off] = v;
    }

    pub fn to_complex(&self) -> ComplexTensor {
        ComplexTensor::from_real_slice(&self.shape, &self.data).expect("consistent shape")
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}
