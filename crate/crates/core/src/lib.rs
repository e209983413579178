//! Edge-informed single-image super-resolution.
//!
//! Super-resolution is recast as inpainting: the low-resolution image is
//! spread onto the high-resolution grid by zero insertion, an edge generator
//! predicts the high-resolution edge map from upscaled low-resolution edges,
//! and a completion generator fills the empty pixels guided by those edges.
//!
//! Modules:
//! - [`imaging`]: color conversion, blur/degradation, Canny, interpolation and
//!   pixel-offset upsampling.
//! - [`metrics`]: PSNR, SSIM and edge precision/recall, plus reports.
//! - [`networks`]: generators, PatchGAN discriminators, spectral and instance
//!   normalization, checkpoints.
//! - [`losses`]: adversarial hinge, feature matching, l1, perceptual, style.
//! - [`training`]: sample preparation and the two training stages.
//! - [`pipeline`]: inference from a low-resolution image.

pub mod error;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod pipeline;
pub mod reference;
pub mod training;

pub use error::{Error, Result};
pub use imaging::{EdgeKind, EdgeMap, ImageTensor, Method, OffsetKernel, Scale};
pub use losses::{FeatureExtractor, LossWeights, Vgg19};
pub use metrics::{edge_precision_recall, psnr, ssim, MetricsReport};
pub use networks::{Checkpoint, Discriminator, DiscriminatorSpec, Generator, GeneratorSpec, Mode};
pub use pipeline::{baseline_upscale, degrade_pair, Prediction, SuperResolver};
pub use training::{make_sample, SamplePair, TrainConfig};
