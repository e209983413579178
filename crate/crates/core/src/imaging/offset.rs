use ndarray::{Array2, Array3};

use super::{ImageTensor, Scale};
use crate::error::Result;

/// `s×s` kernel with a single one in its top-left corner. Used as a
/// fractionally strided (stride `1/s`) convolution it spreads LR pixels onto
/// an HR grid and leaves every other HR position empty.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetKernel {
    scale: Scale,
    weights: Array2<f64>,
}

impl OffsetKernel {
    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }
}

pub fn offset_kernel(scale: Scale) -> OffsetKernel {
    let s = scale.factor();
    let mut weights = Array2::zeros((s, s));
    weights[[0, 0]] = 1.0;
    OffsetKernel { scale, weights }
}

/// Transposed convolution of `lr` with the offset kernel at stride `s`:
/// `out[s*i + ky][s*j + kx] = lr[i][j] * K[ky][kx]`.
pub fn offset_upsample(lr: &ImageTensor, scale: Scale) -> Result<ImageTensor> {
    let kernel = offset_kernel(scale);
    let s = scale.factor();
    let (h, w, c) = lr.dim();
    let mut out = Array3::zeros((h * s, w * s, c));
    for ((y, x, ch), &v) in lr.data().indexed_iter() {
        for ((ky, kx), &k) in kernel.weights().indexed_iter() {
            if k != 0.0 {
                out[[s * y + ky, s * x + kx, ch]] += k * v;
            }
        }
    }
    ImageTensor::new(out)
}
