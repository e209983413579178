//! Training objectives.
//!
//! All losses take candle tensors and return scalar tensors so they can be
//! differentiated. Expectations are means over the batch and spatial
//! positions.

mod extractor;

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};

pub use extractor::{FeatureExtractor, Vgg19, IMAGENET_MEAN, IMAGENET_STD, VGG_TAPS};

/// Weights of the two joint generator objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_g1: f64,
    pub lambda_fm: f64,
    pub lambda_l1: f64,
    pub lambda_g2: f64,
    pub lambda_p: f64,
    pub lambda_s: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_g1: 1.0,
            lambda_fm: 10.0,
            lambda_l1: 1.0,
            lambda_g2: 0.1,
            lambda_p: 0.1,
            lambda_s: 250.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_g1", self.lambda_g1),
            ("lambda_fm", self.lambda_fm),
            ("lambda_l1", self.lambda_l1),
            ("lambda_g2", self.lambda_g2),
            ("lambda_p", self.lambda_p),
            ("lambda_s", self.lambda_s),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        Ok(())
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(shape_err!("{what}: {:?} vs {:?}", a.dims(), b.dims()));
    }
    Ok(())
}

/// `|x|` whose gradient is `sign(x)` with `sign(0) = 0`.
pub fn abs(x: &Tensor) -> Result<Tensor> {
    let pos = x.gt(0.0)?.to_dtype(x.dtype())?;
    let neg = x.lt(0.0)?.to_dtype(x.dtype())?;
    let sign = (pos - neg)?.detach();
    Ok((x * sign)?)
}

/// Discriminator hinge loss: `mean(relu(1 - real)) + mean(relu(1 + fake))`.
pub fn hinge_d(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    same_shape(real, fake, "hinge_d score maps")?;
    let r = (1.0 - real)?.relu()?.mean_all()?;
    let f = (fake + 1.0)?.relu()?.mean_all()?;
    Ok((r + f)?)
}

/// Generator hinge loss: `-mean(fake)`.
pub fn hinge_g(fake: &Tensor) -> Result<Tensor> {
    Ok(fake.mean_all()?.neg()?)
}

/// Mean absolute difference.
pub fn l1(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b, "l1 inputs")?;
    Ok(abs(&(a - b)?)?.mean_all()?)
}

fn sum_of_layer_means(real: &[Tensor], fake: &[Tensor], what: &str) -> Result<Tensor> {
    if real.len() != fake.len() {
        return Err(shape_err!("{what}: {} vs {} layers", real.len(), fake.len()));
    }
    let Some(first) = real.first() else {
        return Err(invalid!("{what}: no layers"));
    };
    let mut total = Tensor::zeros((), first.dtype(), first.device())?;
    for (r, f) in real.iter().zip(fake) {
        total = (total + l1(r, f)?)?;
    }
    Ok(total)
}

/// `Σ_i mean |real_i - fake_i|` over discriminator activations.
pub fn feature_matching(real: &[Tensor], fake: &[Tensor]) -> Result<Tensor> {
    sum_of_layer_means(real, fake, "feature matching")
}

/// `(B, C, H, W)` activations to `(B, C, C)` Gram matrices divided by `C·H·W`.
pub fn gram_matrix(act: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = act.dims4()?;
    let flat = act.reshape((b, c, h * w))?;
    let g = flat.matmul(&flat.t()?)?;
    Ok((g / (c * h * w) as f64)?)
}

/// `Σ_j mean |φ_j(gt) - φ_j(pred)|` over precomputed feature stacks.
pub fn perceptual_from_features(gt: &[Tensor], pred: &[Tensor]) -> Result<Tensor> {
    sum_of_layer_means(gt, pred, "perceptual features")
}

/// `Σ_j ‖G_j(gt) - G_j(pred)‖₁` (entrywise sum, averaged over the batch) over
/// precomputed feature stacks.
pub fn style_from_features(gt: &[Tensor], pred: &[Tensor]) -> Result<Tensor> {
    if gt.len() != pred.len() {
        return Err(shape_err!("style features: {} vs {} layers", gt.len(), pred.len()));
    }
    let Some(first) = gt.first() else {
        return Err(invalid!("style features: no layers"));
    };
    let mut total = Tensor::zeros((), first.dtype(), first.device())?;
    for (a, b) in gt.iter().zip(pred) {
        same_shape(a, b, "style features")?;
        let batch = a.dim(0)? as f64;
        let d = (gram_matrix(a)? - gram_matrix(b)?)?;
        total = (total + (abs(&d)?.sum_all()? / batch)?)?;
    }
    Ok(total)
}

fn check_images(gt: &Tensor, pred: &Tensor) -> Result<()> {
    same_shape(gt, pred, "images")?;
    let (_, c, _, _) = gt.dims4()?;
    if c != 3 {
        return Err(shape_err!("feature losses need RGB input, got {c} channels"));
    }
    Ok(())
}

pub fn perceptual_loss(gt: &Tensor, pred: &Tensor, extractor: &dyn FeatureExtractor) -> Result<Tensor> {
    check_images(gt, pred)?;
    perceptual_from_features(&extractor.features(gt)?, &extractor.features(pred)?)
}

pub fn style_loss(gt: &Tensor, pred: &Tensor, extractor: &dyn FeatureExtractor) -> Result<Tensor> {
    check_images(gt, pred)?;
    style_from_features(&extractor.features(gt)?, &extractor.features(pred)?)
}

/// Something that can be scaled by a weight and summed: plain numbers for
/// reporting and tensors for backpropagation.
pub trait LossTerm: Sized {
    fn weighted_sum(terms: &[(f64, &Self)]) -> Result<Self>;
}

impl LossTerm for f64 {
    fn weighted_sum(terms: &[(f64, &Self)]) -> Result<Self> {
        Ok(terms.iter().map(|(w, v)| w * **v).sum())
    }
}

impl LossTerm for Tensor {
    fn weighted_sum(terms: &[(f64, &Self)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(invalid!("empty weighted sum"));
        };
        let mut total = Tensor::zeros((), first.dtype(), first.device())?;
        for (w, v) in terms {
            total = (total + (*v * *w)?)?;
        }
        Ok(total)
    }
}

/// `λ_G1·adv + λ_FM·fm`.
pub fn joint_g1<T: LossTerm>(adv: &T, fm: &T, w: &LossWeights) -> Result<T> {
    T::weighted_sum(&[(w.lambda_g1, adv), (w.lambda_fm, fm)])
}

/// `λ_ℓ1·l1 + λ_G2·adv + λ_p·perc + λ_s·style`.
pub fn joint_g2<T: LossTerm>(l1: &T, adv: &T, perc: &T, style: &T, w: &LossWeights) -> Result<T> {
    T::weighted_sum(&[
        (w.lambda_l1, l1),
        (w.lambda_g2, adv),
        (w.lambda_p, perc),
        (w.lambda_s, style),
    ])
}

/// Reads a scalar tensor as `f64`.
pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}
