use ndarray::{Array3, Axis};

use super::ImageTensor;
use crate::error::{invalid, Result};

/// Normalized 1-D Gaussian taps over `[-r, r]` with `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid!("gaussian sigma must be positive, got {sigma}"));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / denom).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    Ok(taps)
}

/// Mirror index into `0..n` without repeating the border sample
/// (`d c b | a b c d | c b a`).
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Correlates every row (axis 1) or column (axis 0) of each channel with a
/// symmetric kernel under reflect padding.
pub(crate) fn convolve_axis(data: &Array3<f64>, taps: &[f64], axis: Axis) -> Array3<f64> {
    let radius = (taps.len() / 2) as isize;
    let (h, w, c) = data.dim();
    let n = if axis == Axis(0) { h } else { w };
    let mut out = Array3::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            let pos = if axis == Axis(0) { y } else { x } as isize;
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, t) in taps.iter().enumerate() {
                    let src = reflect_index(pos + k as isize - radius, n);
                    let v = if axis == Axis(0) {
                        data[[src, x, ch]]
                    } else {
                        data[[y, src, ch]]
                    };
                    acc += t * v;
                }
                out[[y, x, ch]] = acc;
            }
        }
    }
    out
}

/// Separable Gaussian blur with reflect padding, channel by channel.
pub fn gaussian_blur(img: &ImageTensor, sigma: f64) -> Result<ImageTensor> {
    let taps = gaussian_kernel(sigma)?;
    let rows = convolve_axis(img.data(), &taps, Axis(1));
    let both = convolve_axis(&rows, &taps, Axis(0));
    ImageTensor::from_clamped(both)
}

/// Keeps pixels whose row and column indices are multiples of `scale`.
pub fn subsample(img: &ImageTensor, scale: usize) -> Result<ImageTensor> {
    if scale == 0 {
        return Err(invalid!("scale must be positive"));
    }
    let (h, w, c) = img.dim();
    if h % scale != 0 || w % scale != 0 {
        return Err(invalid!(
            "{h}x{w} image is not divisible by scale {scale}; crop it first"
        ));
    }
    let out = Array3::from_shape_fn((h / scale, w / scale, c), |(y, x, ch)| {
        img.get(y * scale, x * scale, ch)
    });
    ImageTensor::new(out)
}

/// Gaussian blur followed by subsampling at phase 0.
///
/// `sigma == 0` disables the blur; negative values are rejected.
pub fn degrade(hr: &ImageTensor, scale: usize, sigma: f64) -> Result<ImageTensor> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(invalid!("degradation sigma must be >= 0, got {sigma}"));
    }
    if scale == 0 || !hr.height().is_multiple_of(scale) || !hr.width().is_multiple_of(scale) {
        return Err(invalid!(
            "{}x{} image is not divisible by scale {scale}; crop it first",
            hr.height(),
            hr.width()
        ));
    }
    if sigma == 0.0 {
        subsample(hr, scale)
    } else {
        subsample(&gaussian_blur(hr, sigma)?, scale)
    }
}
