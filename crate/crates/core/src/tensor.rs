//! Dense 4-D arrays in batch/channel/height/width order.
//!
//! Data is row-major with the batch outermost and the width innermost, so a
//! single channel plane is contiguous and flattened-index sampling over it is
//! a contiguous gather. All arithmetic is `f64`: finite-difference checks need
//! the headroom, and the desk-scale training runs are cheap enough not to care.

use crate::{Error, Result};

/// Flattened position of spatial coordinate `(h, w)` in a plane of width `width`.
///
/// No bounds are enforced; callers that sample outside a plane handle the
/// range themselves.
#[inline]
pub fn flat_index(h: usize, w: usize, width: usize) -> usize {
    h * width + w
}

/// Dense 4-D tensor, shape `(batch, channels, height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Tensor {
        Tensor::filled(shape, 0.0)
    }

    pub fn filled(shape: [usize; 4], fill: f64) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![fill; len],
        }
    }

    /// Builds a tensor from explicit values in linearized (row-major) order.
    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.shape[2]
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.shape[3]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Linearized index of `(b, c, h, w)`: `((b*C + c)*H + h)*W + w`.
    #[inline]
    pub fn index_of(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        ((b * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.index_of(b, c, h, w)]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, h: usize, w: usize) -> &mut f64 {
        let i = self.index_of(b, c, h, w);
        &mut self.data[i]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Contiguous slice of one channel plane.
    #[inline]
    pub fn plane_slice(&self, b: usize, c: usize) -> &[f64] {
        let hw = self.shape[2] * self.shape[3];
        let start = (b * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }

    #[inline]
    pub fn plane_slice_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let hw = self.shape[2] * self.shape[3];
        let start = (b * self.shape[1] + c) * hw;
        &mut self.data[start..start + hw]
    }

    /// Flattened view of one channel plane.
    #[inline]
    pub fn plane(&self, b: usize, c: usize) -> FlatView<'_> {
        FlatView {
            data: self.plane_slice(b, c),
            width: self.shape[3],
        }
    }

    fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.shape),
                got: format!("{:?}", other.shape),
            });
        }
        Ok(())
    }

    /// Pointwise sum; shapes must match.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape,
            data,
        })
    }

    /// Pointwise product; shapes must match.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Tensor {
            shape: self.shape,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn relu(&self) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| v.max(0.0)).collect(),
        }
    }
}

/// Flattened view of one `(b, c)` channel plane: position `p` corresponds to
/// spatial `(p / width, p % width)`.
#[derive(Debug, Clone, Copy)]
pub struct FlatView<'a> {
    data: &'a [f64],
    width: usize,
}

impl<'a> FlatView<'a> {
    pub fn new(data: &'a [f64], width: usize) -> FlatView<'a> {
        debug_assert!(width > 0 && data.len() % width == 0);
        FlatView { data, width }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, p: usize) -> f64 {
        self.data[p]
    }

    #[inline]
    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }

    /// Spatial coordinates of flattened position `p`.
    #[inline]
    pub fn coords(&self, p: usize) -> (usize, usize) {
        (p / self.width, p % self.width)
    }
}
