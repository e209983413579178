//! Generators, PatchGAN discriminators and the layers they are built from.
//!
//! Networks operate on `(B, C, H, W)` candle tensors. Each network owns a
//! [`ParamStore`] holding its trainable parameters and spectral-norm buffers.

mod checkpoint;
mod convert;
mod discriminator;
mod generator;
mod layers;
pub mod ops;
mod params;

use candle_core::{DType, Device, Tensor};

use crate::error::{shape_err, Result};
use crate::imaging::{EdgeMap, ImageTensor};

pub use checkpoint::{Checkpoint, FORMAT_TAG};
pub use convert::{edges_to_tensor, image_to_tensor, tensor_to_edges, tensor_to_image};
pub use discriminator::{Discriminator, DiscriminatorSpec, PatchOutput, LEAKY_SLOPE};
pub use generator::{Generator, GeneratorSpec, DOWNSAMPLE_STEPS, RESIDUAL_BLOCKS};
pub use layers::{Conv2d, InstanceNorm, Padding, SpectralNorm, INIT_STD};
pub use params::{Init, ParamStore};

/// Training mode updates spectral-norm estimates and builds gradients;
/// evaluation mode does neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn check_same_size(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(shape_err!(
            "inputs differ in size: {}x{} vs {}x{}",
            a.0,
            a.1,
            b.0,
            b.1
        ));
    }
    Ok(())
}

fn eval_detached(g: &Generator, input: &Tensor) -> Result<Tensor> {
    Ok(g.forward(input, Mode::Eval)?.detach())
}

/// Predicts a soft HR edge map from the upscaled gray image and upscaled LR
/// edges.
pub fn g1_forward(g1: &Generator, gray_up: &ImageTensor, edges_up: &EdgeMap) -> Result<EdgeMap> {
    if gray_up.channels() != 1 {
        return Err(shape_err!("gray input must have 1 channel, got {}", gray_up.channels()));
    }
    check_same_size(
        (gray_up.height(), gray_up.width()),
        (edges_up.height(), edges_up.width()),
    )?;
    let (dev, dt) = (g1.store().device().clone(), g1.store().dtype());
    let x = Tensor::cat(
        &[
            &image_to_tensor(gray_up, &dev, dt)?,
            &edges_to_tensor(edges_up, &dev, dt)?,
        ],
        1,
    )?;
    tensor_to_edges(&eval_detached(g1, &x)?, 0)
}

/// Fills the zero positions of an offset-upsampled RGB image guided by edges.
pub fn g2_forward(g2: &Generator, incomplete: &ImageTensor, edges: &EdgeMap) -> Result<ImageTensor> {
    if incomplete.channels() != 3 {
        return Err(shape_err!(
            "incomplete image must have 3 channels, got {}",
            incomplete.channels()
        ));
    }
    check_same_size(
        (incomplete.height(), incomplete.width()),
        (edges.height(), edges.width()),
    )?;
    let (dev, dt) = (g2.store().device().clone(), g2.store().dtype());
    let x = Tensor::cat(
        &[
            &image_to_tensor(incomplete, &dev, dt)?,
            &edges_to_tensor(edges, &dev, dt)?,
        ],
        1,
    )?;
    tensor_to_image(&eval_detached(g2, &x)?, 0)
}

/// Default device and precision for training and inference.
pub fn default_device() -> (Device, DType) {
    (Device::Cpu, DType::F32)
}
