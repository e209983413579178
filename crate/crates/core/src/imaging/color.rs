use ndarray::{Array3, Axis};

use super::ImageTensor;
use crate::error::{invalid, Result};

/// BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Weighted luminance of an RGB image.
pub fn to_grayscale(img: &ImageTensor) -> Result<ImageTensor> {
    if img.channels() != 3 {
        return Err(invalid!(
            "grayscale conversion needs 3 channels, got {}",
            img.channels()
        ));
    }
    let (h, w, _) = img.dim();
    let mut out = Array3::zeros((h, w, 1));
    for ((y, x, _), v) in out.indexed_iter_mut() {
        let px = img.data().slice(ndarray::s![y, x, ..]);
        *v = LUMA_WEIGHTS
            .iter()
            .zip(px.iter())
            .map(|(w, c)| w * c)
            .sum::<f64>();
    }
    ImageTensor::from_clamped(out)
}

/// Replicates a single channel into RGB.
pub fn gray_to_rgb(img: &ImageTensor) -> Result<ImageTensor> {
    match img.channels() {
        3 => Ok(img.clone()),
        1 => {
            let plane = img.data().index_axis(Axis(2), 0);
            let stacked = ndarray::stack(Axis(2), &[plane, plane, plane])
                .expect("identical plane shapes");
            ImageTensor::new(stacked)
        }
        c => Err(invalid!("unexpected channel count {c}")),
    }
}
