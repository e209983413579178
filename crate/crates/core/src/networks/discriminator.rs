use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use super::layers::{Conv2d, Padding};
use super::ops::{leaky_relu, ConvGeometry};
use super::params::{Init, ParamStore};
use super::Mode;
use crate::error::{invalid, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub in_channels: usize,
    pub base_width: usize,
    pub use_spectral_norm: bool,
}

impl DiscriminatorSpec {
    pub fn new(in_channels: usize) -> Self {
        Self {
            in_channels,
            base_width: 64,
            use_spectral_norm: true,
        }
    }

    /// Judges an edge map conditioned on a gray image.
    pub fn edge() -> Self {
        Self::new(2)
    }

    /// Judges an RGB image conditioned on an edge map.
    pub fn completion() -> Self {
        Self::new(4)
    }

    pub fn with_width(mut self, base_width: usize) -> Self {
        self.base_width = base_width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_width == 0 {
            return Err(invalid!(
                "discriminator needs positive channels and width, got {} and {}",
                self.in_channels,
                self.base_width
            ));
        }
        Ok(())
    }

    /// `(in, out, geometry)` for each convolution, input to output.
    pub fn layers(&self) -> Vec<(usize, usize, ConvGeometry)> {
        let w = self.base_width;
        vec![
            (self.in_channels, w, ConvGeometry::new(4, 2, 1, 1)),
            (w, 2 * w, ConvGeometry::new(4, 2, 1, 1)),
            (2 * w, 4 * w, ConvGeometry::new(4, 2, 1, 1)),
            (4 * w, 8 * w, ConvGeometry::new(4, 1, 1, 1)),
            (8 * w, 1, ConvGeometry::new(4, 1, 1, 1)),
        ]
    }

    /// Side length of the input window that influences one output score.
    pub fn receptive_field(&self) -> usize {
        self.layers()
            .iter()
            .rev()
            .fold(1, |rf, (_, _, g)| (rf - 1) * g.stride + g.dilation * (g.kernel - 1) + 1)
    }

    /// Score-map side length for a square input, if the input is large enough.
    pub fn output_size(&self, input: usize) -> Option<usize> {
        self.layers()
            .iter()
            .try_fold(input, |n, (_, _, g)| g.output_len(n).filter(|&m| m > 0))
    }
}

/// Patch scores plus the intermediate activations used for feature matching.
#[derive(Debug, Clone)]
pub struct PatchOutput {
    pub scores: Tensor,
    pub features: Vec<Tensor>,
}

/// Fully convolutional PatchGAN critic.
#[derive(Debug, Clone)]
pub struct Discriminator {
    spec: DiscriminatorSpec,
    store: ParamStore,
    convs: Vec<Conv2d>,
}

impl Discriminator {
    pub fn new(spec: DiscriminatorSpec, seed: u64, device: &Device, dtype: DType) -> Result<Self> {
        spec.validate()?;
        let mut store = ParamStore::new(device.clone(), dtype);
        let mut init = Init::new(seed);
        let convs = spec
            .layers()
            .into_iter()
            .enumerate()
            .map(|(i, (cin, cout, g))| {
                Conv2d::new(
                    &mut store,
                    &mut init,
                    &format!("conv.{i}"),
                    cin,
                    cout,
                    g.kernel,
                    g.stride,
                    Padding::Zero(g.padding),
                    g.dilation,
                    spec.use_spectral_norm,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, store, convs })
    }

    pub fn spec(&self) -> &DiscriminatorSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn convolutions(&self) -> Vec<&Conv2d> {
        self.convs.iter().collect()
    }

    /// Scores `(B, in_channels, H, W)`; raw (unbounded) scores, one per patch.
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<PatchOutput> {
        let (_, c, h, w) = x.dims4()?;
        if c != self.spec.in_channels {
            return Err(invalid!(
                "discriminator expects {} channels, got {c}",
                self.spec.in_channels
            ));
        }
        if self.spec.output_size(h.min(w)).is_none() {
            return Err(invalid!("discriminator input {h}x{w} is too small"));
        }
        let last = self.convs.len() - 1;
        let mut features = Vec::with_capacity(last);
        let mut y = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            y = conv.forward(&y, mode)?;
            if i < last {
                y = leaky_relu(&y, LEAKY_SLOPE)?;
                features.push(y.clone());
            }
        }
        Ok(PatchOutput {
            scores: y,
            features,
        })
    }

    /// Concatenates `judged` and `condition` along channels and scores them.
    pub fn judge(&self, judged: &Tensor, condition: &Tensor, mode: Mode) -> Result<PatchOutput> {
        self.forward(&Tensor::cat(&[judged, condition], 1)?, mode)
    }
}
