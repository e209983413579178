use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use super::layers::{Conv2d, InstanceNorm, Padding};
use super::ops::upsample_nearest2x;
use super::params::{Init, ParamStore};
use super::{ops, Mode};
use crate::error::{invalid, Result};

pub const RESIDUAL_BLOCKS: usize = 8;
pub const DOWNSAMPLE_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_width: usize,
    pub n_residual_blocks: usize,
    pub residual_dilation: usize,
    pub downsample_steps: usize,
    pub use_spectral_norm: bool,
}

impl GeneratorSpec {
    /// Gray image plus edge map in, edge probabilities out.
    pub fn edge() -> Self {
        Self::with_channels(2, 1)
    }

    /// Zero-filled RGB plus edge map in, RGB out.
    pub fn completion() -> Self {
        Self::with_channels(4, 3)
    }

    fn with_channels(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            base_width: 64,
            n_residual_blocks: RESIDUAL_BLOCKS,
            residual_dilation: 2,
            downsample_steps: DOWNSAMPLE_STEPS,
            use_spectral_norm: true,
        }
    }

    pub fn with_width(mut self, base_width: usize) -> Self {
        self.base_width = base_width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(invalid!(
                "generator channels must be positive, got {} -> {}",
                self.in_channels,
                self.out_channels
            ));
        }
        if self.base_width == 0 {
            return Err(invalid!("generator base width must be positive"));
        }
        if self.n_residual_blocks != RESIDUAL_BLOCKS {
            return Err(invalid!(
                "generator uses {RESIDUAL_BLOCKS} residual blocks, got {}",
                self.n_residual_blocks
            ));
        }
        if self.downsample_steps != DOWNSAMPLE_STEPS {
            return Err(invalid!(
                "generator downsamples {DOWNSAMPLE_STEPS} times, got {}",
                self.downsample_steps
            ));
        }
        if self.residual_dilation == 0 {
            return Err(invalid!("residual dilation must be positive"));
        }
        Ok(())
    }

    /// Spatial dims must be divisible by this.
    pub fn size_multiple(&self) -> usize {
        1 << self.downsample_steps
    }
}

#[derive(Debug, Clone)]
struct ConvNorm {
    conv: Conv2d,
    norm: InstanceNorm,
}

impl ConvNorm {
    fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        self.norm.forward(&self.conv.forward(x, mode)?, mode)
    }
}

#[derive(Debug, Clone)]
struct ResidualBlock {
    first: ConvNorm,
    second: ConvNorm,
}

/// Encoder, dilated residual blocks, resize-convolution decoder and a sigmoid
/// head. Fully convolutional and size-preserving.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    store: ParamStore,
    encoder: Vec<ConvNorm>,
    blocks: Vec<ResidualBlock>,
    decoder: Vec<ConvNorm>,
    head: Conv2d,
}

impl Generator {
    pub fn new(spec: GeneratorSpec, seed: u64, device: &Device, dtype: DType) -> Result<Self> {
        spec.validate()?;
        let mut store = ParamStore::new(device.clone(), dtype);
        let mut init = Init::new(seed);
        let sn = spec.use_spectral_norm;
        let w = spec.base_width;

        let conv_norm = |store: &mut ParamStore,
                             init: &mut Init,
                             name: &str,
                             cin: usize,
                             cout: usize,
                             k: usize,
                             stride: usize,
                             pad: Padding,
                             dil: usize|
         -> Result<ConvNorm> {
            Ok(ConvNorm {
                conv: Conv2d::new(store, init, name, cin, cout, k, stride, pad, dil, sn)?,
                norm: InstanceNorm::new(store, &format!("{name}.norm"), cout)?,
            })
        };

        let mut encoder = vec![conv_norm(
            &mut store,
            &mut init,
            "encoder.0",
            spec.in_channels,
            w,
            7,
            1,
            Padding::Reflect(3),
            1,
        )?];
        let mut width = w;
        for i in 0..spec.downsample_steps {
            encoder.push(conv_norm(
                &mut store,
                &mut init,
                &format!("encoder.{}", i + 1),
                width,
                width * 2,
                4,
                2,
                Padding::Zero(1),
                1,
            )?);
            width *= 2;
        }

        let d = spec.residual_dilation;
        let mut blocks = Vec::with_capacity(spec.n_residual_blocks);
        for i in 0..spec.n_residual_blocks {
            let first = conv_norm(
                &mut store,
                &mut init,
                &format!("blocks.{i}.0"),
                width,
                width,
                3,
                1,
                Padding::Reflect(d),
                d,
            )?;
            let second = conv_norm(
                &mut store,
                &mut init,
                &format!("blocks.{i}.1"),
                width,
                width,
                3,
                1,
                Padding::Reflect(1),
                1,
            )?;
            blocks.push(ResidualBlock { first, second });
        }

        let mut decoder = Vec::with_capacity(spec.downsample_steps);
        for i in 0..spec.downsample_steps {
            decoder.push(conv_norm(
                &mut store,
                &mut init,
                &format!("decoder.{i}"),
                width,
                width / 2,
                3,
                1,
                Padding::Reflect(1),
                1,
            )?);
            width /= 2;
        }

        let head = Conv2d::new(
            &mut store,
            &mut init,
            "head",
            width,
            spec.out_channels,
            7,
            1,
            Padding::Reflect(3),
            1,
            sn,
        )?;

        Ok(Self {
            spec,
            store,
            encoder,
            blocks,
            decoder,
            head,
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// Maps `(B, in_channels, H, W)` to `(B, out_channels, H, W)` in `[0, 1]`.
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let (_, c, h, w) = x.dims4()?;
        let m = self.spec.size_multiple();
        if c != self.spec.in_channels {
            return Err(invalid!(
                "generator expects {} input channels, got {c}",
                self.spec.in_channels
            ));
        }
        if h % m != 0 || w % m != 0 {
            return Err(invalid!("generator input {h}x{w} must be divisible by {m}"));
        }
        let mut y = x.clone();
        for layer in &self.encoder {
            y = layer.forward(&y, mode)?.relu()?;
        }
        for block in &self.blocks {
            let r = block.first.forward(&y, mode)?.relu()?;
            let r = block.second.forward(&r, mode)?;
            y = (y + r)?;
        }
        for layer in &self.decoder {
            y = layer.forward(&upsample_nearest2x(&y)?, mode)?.relu()?;
        }
        let y = self.head.forward(&y, mode)?;
        Ok(ops::sigmoid(&y)?)
    }

    /// Every convolution, in construction order.
    pub fn convolutions(&self) -> Vec<&Conv2d> {
        let mut out: Vec<&Conv2d> = self.encoder.iter().map(|l| &l.conv).collect();
        for b in &self.blocks {
            out.push(&b.first.conv);
            out.push(&b.second.conv);
        }
        out.extend(self.decoder.iter().map(|l| &l.conv));
        out.push(&self.head);
        out
    }
}
