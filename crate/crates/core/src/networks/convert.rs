use candle_core::{DType, Device, Tensor};
use ndarray::{Array2, Array3};

use crate::error::{shape_err, Result};
use crate::imaging::{EdgeMap, ImageTensor};

/// `H×W×C` image to a `(1, C, H, W)` tensor.
pub fn image_to_tensor(img: &ImageTensor, device: &Device, dtype: DType) -> Result<Tensor> {
    let (h, w, c) = img.dim();
    let values: Vec<f64> = img.data().iter().copied().collect();
    Ok(Tensor::from_vec(values, (1, h, w, c), device)?
        .permute((0, 3, 1, 2))?
        .contiguous()?
        .to_dtype(dtype)?)
}

/// Edge map to a `(1, 1, H, W)` tensor.
pub fn edges_to_tensor(edges: &EdgeMap, device: &Device, dtype: DType) -> Result<Tensor> {
    let (h, w) = edges.data().dim();
    let values: Vec<f64> = edges.data().iter().copied().collect();
    Ok(Tensor::from_vec(values, (1, 1, h, w), device)?.to_dtype(dtype)?)
}

fn to_hwc(t: &Tensor, index: usize) -> Result<Array3<f64>> {
    let (_, c, h, w) = t.dims4()?;
    let values: Vec<f64> = t
        .get(index)?
        .permute((1, 2, 0))?
        .to_dtype(DType::F64)?
        .flatten_all()?
        .to_vec1()?;
    Array3::from_shape_vec((h, w, c), values).map_err(|e| shape_err!("{e}"))
}

/// Batch item `index` of a `(B, C, H, W)` tensor as an image, clamped to
/// `[0, 1]`.
pub fn tensor_to_image(t: &Tensor, index: usize) -> Result<ImageTensor> {
    ImageTensor::from_clamped(to_hwc(t, index)?)
}

/// Batch item `index` of a `(B, 1, H, W)` tensor as a soft edge map.
pub fn tensor_to_edges(t: &Tensor, index: usize) -> Result<EdgeMap> {
    let (_, c, h, w) = t.dims4()?;
    if c != 1 {
        return Err(shape_err!("edge tensor must have 1 channel, got {c}"));
    }
    let plane = to_hwc(t, index)?
        .into_shape_with_order((h, w))
        .map_err(|e| shape_err!("{e}"))?;
    let plane: Array2<f64> = plane.mapv(|v| v.clamp(0.0, 1.0));
    EdgeMap::soft(plane)
}
