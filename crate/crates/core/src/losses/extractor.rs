use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::networks::ops::{conv2d, ConvGeometry};

pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// Frozen network mapping `(B, 3, H, W)` images in `[0, 1]` to a fixed list
/// of activation maps.
pub trait FeatureExtractor {
    fn features(&self, x: &Tensor) -> Result<Vec<Tensor>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Conv(usize),
    Pool,
    Tap,
}

/// Indices of the convolutions in the torchvision `features` sequence, up to
/// the last tapped layer.
const CONV_INDICES: [usize; 13] = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28];
/// Output channels of those convolutions at full width.
const CONV_WIDTHS: [usize; 13] = [64, 64, 128, 128, 256, 256, 256, 256, 512, 512, 512, 512, 512];
/// Layer names of the tapped activations.
pub const VGG_TAPS: [&str; 5] = ["relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu5_1"];

fn plan() -> Vec<Step> {
    use Step::*;
    vec![
        Conv(0), Tap, Conv(1), Pool,
        Conv(2), Tap, Conv(3), Pool,
        Conv(4), Tap, Conv(5), Conv(6), Conv(7), Pool,
        Conv(8), Tap, Conv(9), Conv(10), Conv(11), Pool,
        Conv(12), Tap,
    ]
}

/// VGG-19 convolutional trunk through `relu5_1`, tapping the first ReLU of
/// each block. Weights use the torchvision names `features.<i>.weight` and
/// `features.<i>.bias`.
#[derive(Debug, Clone)]
pub struct Vgg19 {
    convs: Vec<(Tensor, Tensor)>,
    mean: Tensor,
    std: Tensor,
}

const GEOM: ConvGeometry = ConvGeometry {
    kernel: 3,
    stride: 1,
    padding: 1,
    dilation: 1,
};

impl Vgg19 {
    fn from_convs(convs: Vec<(Tensor, Tensor)>, device: &Device, dtype: DType) -> Result<Self> {
        let mut cin = 3;
        for (i, (w, b)) in convs.iter().enumerate() {
            let (o, c, kh, kw) = w.dims4()?;
            if c != cin || kh != 3 || kw != 3 || b.dims() != [o] {
                return Err(Error::Config(format!(
                    "feature extractor layer features.{} has incompatible shape {:?}",
                    CONV_INDICES[i],
                    w.dims()
                )));
            }
            cin = o;
        }
        let mean = Tensor::new(&IMAGENET_MEAN, device)?
            .to_dtype(dtype)?
            .reshape((1, 3, 1, 1))?;
        let std = Tensor::new(&IMAGENET_STD, device)?
            .to_dtype(dtype)?
            .reshape((1, 3, 1, 1))?;
        Ok(Self { convs, mean, std })
    }

    /// Loads weights from a safetensors file. A missing file is a
    /// configuration error.
    pub fn load(path: &Path, device: &Device, dtype: DType) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::Config(format!(
                "feature extractor weights not found at {}; set extractor_weights to a \
                 VGG-19 safetensors file (or create one with `edgesr init-extractor`)",
                path.display()
            )));
        }
        let tensors = candle_core::safetensors::load(path, device)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let convs = CONV_INDICES
            .iter()
            .map(|i| {
                let get = |kind: &str| -> Result<Tensor> {
                    let name = format!("features.{i}.{kind}");
                    let t = tensors.get(&name).ok_or_else(|| {
                        Error::Config(format!("{}: missing tensor {name}", path.display()))
                    })?;
                    Ok(t.to_dtype(dtype)?)
                };
                Ok((get("weight")?, get("bias")?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_convs(convs, device, dtype)
    }

    /// Randomly initialized trunk with every width divided by
    /// `width_divisor`. He-normal weights, zero biases.
    pub fn random(width_divisor: usize, seed: u64, device: &Device, dtype: DType) -> Result<Self> {
        if width_divisor == 0 || 64 % width_divisor != 0 {
            return Err(invalid!("width divisor must divide 64, got {width_divisor}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cin = 3;
        let mut convs = Vec::with_capacity(CONV_WIDTHS.len());
        for full in CONV_WIDTHS {
            let o = full / width_divisor;
            let fan_in = (cin * 9) as f64;
            let dist = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("finite std");
            let values: Vec<f64> = (0..o * cin * 9).map(|_| dist.sample(&mut rng)).collect();
            let w = Tensor::from_vec(values, (o, cin, 3, 3), device)?.to_dtype(dtype)?;
            let b = Tensor::zeros(o, dtype, device)?;
            convs.push((w, b));
            cin = o;
        }
        Self::from_convs(convs, device, dtype)
    }

    /// Writes the weights under torchvision names as `f32` safetensors.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut map = HashMap::new();
        for (i, (w, b)) in CONV_INDICES.iter().zip(&self.convs) {
            map.insert(format!("features.{i}.weight"), w.to_dtype(DType::F32)?);
            map.insert(format!("features.{i}.bias"), b.to_dtype(DType::F32)?);
        }
        candle_core::safetensors::save(&map, path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Output channels of each tapped layer.
    pub fn tap_widths(&self) -> Vec<usize> {
        plan()
            .windows(2)
            .filter_map(|w| match w {
                [Step::Conv(i), Step::Tap] => Some(self.convs[*i].0.dims()[0]),
                _ => None,
            })
            .collect()
    }
}

impl FeatureExtractor for Vgg19 {
    fn features(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let (_, c, h, w) = x.dims4()?;
        if c != 3 {
            return Err(invalid!("feature extractor expects RGB input, got {c} channels"));
        }
        if h < 16 || w < 16 {
            return Err(invalid!("feature extractor needs at least 16x16 input, got {h}x{w}"));
        }
        let mut y = x.broadcast_sub(&self.mean)?.broadcast_div(&self.std)?;
        let mut taps = Vec::with_capacity(VGG_TAPS.len());
        for step in plan() {
            match step {
                Step::Conv(i) => {
                    let (wt, b) = &self.convs[i];
                    y = conv2d(&y, wt, Some(b), GEOM)?.relu()?;
                }
                Step::Pool => y = y.max_pool2d(2)?,
                Step::Tap => taps.push(y.clone()),
            }
        }
        Ok(taps)
    }
}
