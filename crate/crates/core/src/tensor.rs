//! Dense row-major tensors.
//!
//! Data tensors (images, scenes, datasets) are stored as `f32`; model
//! parameters and gradient arithmetic use `f64`. Rotation code only needs
//! `T: Copy`, so it works on index tensors as well.

use num_traits::Float;

use crate::error::{Error, Result};

/// Scalar types that can be stored in a TSR file.
pub trait Element: Float + Default + std::fmt::Debug + Send + Sync + 'static {
    /// Dtype code written to the TSR header.
    const DTYPE: u8;
    const SIZE: usize;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Element for f32 {
    const DTYPE: u8 = 0;
    const SIZE: usize = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Element for f64 {
    const DTYPE: u8 = 1;
    const SIZE: usize = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// A `3×H×W` (or `1×H×W`) tensor with values in `[0, 1]`.
pub type Image = Tensor<f32>;

/// A `C×D×H×W` scene representation.
pub type SceneTensor<T = f32> = Tensor<T>;

impl<T> Tensor<T> {
    pub fn from_vec(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        check_shape(&shape)?;
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidShape {
                shape,
                reason: format!("product is {expected} but data has {} elements", data.len()),
            });
        }
        Ok(Tensor { shape, data })
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Same data, new shape with the same element count.
    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        Tensor::from_vec(shape, self.data)
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(f).collect() }
    }

    pub fn ensure_same_shape<U>(&self, other: &Tensor<U>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { left: self.shape.clone(), right: other.shape.clone() });
        }
        Ok(())
    }
}

impl<T: Clone> Tensor<T> {
    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Result<Self> {
        let shape = shape.into();
        check_shape(&shape)?;
        let len = shape.iter().product();
        Ok(Tensor { shape, data: vec![value; len] })
    }
}

impl<T: Element> Tensor<T> {
    pub fn zeros(shape: impl Into<Vec<usize>>) -> Result<Self> {
        Tensor::full(shape, T::zero())
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        self.map(|&v| U::from(v).expect("float cast"))
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).sum()
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::InvalidShape { shape: shape.to_vec(), reason: "no dimensions".into() });
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape { shape: shape.to_vec(), reason: "zero-sized dimension".into() });
    }
    Ok(())
}

/// Returns `n` for a `C×n×n` tensor.
pub fn square_side<T>(t: &Tensor<T>) -> Result<usize> {
    match t.shape() {
        [_, h, w] if h == w => Ok(*h),
        s => Err(Error::NotSquare(s.to_vec())),
    }
}

/// Returns `n` for a `C×n×n×n` tensor.
pub fn cubic_side<T>(t: &Tensor<T>) -> Result<usize> {
    match t.shape() {
        [_, d, h, w] if d == h && h == w => Ok(*d),
        s => Err(Error::NotCubic(s.to_vec())),
    }
}
