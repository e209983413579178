//! Inference: LR image to edge map to HR image.

use crate::error::{Error, Result};
use crate::imaging::{degrade, gray_to_rgb, offset_upsample, resample, EdgeMap, Grid, ImageTensor, Method, Scale};
use crate::networks::{default_device, g1_forward, g2_forward, Checkpoint, Generator};
use crate::training::{lr_inputs, TrainConfig};

/// Everything produced for one LR input.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// The super-resolved RGB image.
    pub sr: ImageTensor,
    /// Predicted soft HR edge map.
    pub edges: EdgeMap,
    /// Canny edges of the LR gray image, enlarged by nearest neighbor.
    pub lr_edges_up: EdgeMap,
    /// The offset-upsampled LR image the completion generator fills in.
    pub incomplete: ImageTensor,
}

/// A trained edge generator and completion generator for one scale.
#[derive(Debug, Clone)]
pub struct SuperResolver {
    scale: Scale,
    canny_sigma: f64,
    g1: Generator,
    g2: Generator,
}

impl SuperResolver {
    pub fn new(g1: Generator, g2: Generator, scale: Scale, canny_sigma: f64) -> Self {
        Self {
            scale,
            canny_sigma,
            g1,
            g2,
        }
    }

    /// Rebuilds both generators from a checkpoint holding their weights and
    /// the config they were trained with.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let cfg = TrainConfig::from_toml_str(&ckpt.config)
            .map_err(|e| Error::Checkpoint(format!("config snapshot: {e}")))?;
        for section in ["g1", "g2"] {
            if !ckpt.has_section(section) {
                return Err(Error::Checkpoint(format!(
                    "checkpoint (stage {:?}) has no {section} weights; inference needs both generators",
                    ckpt.stage
                )));
            }
        }
        let (dev, dt) = default_device();
        let g1 = Generator::new(cfg.edge_generator(), 0, &dev, dt)?;
        let g2 = Generator::new(cfg.completion_generator(), 0, &dev, dt)?;
        ckpt.restore_store("g1", g1.store())?;
        ckpt.restore_store("g2", g2.store())?;
        Ok(Self::new(g1, g2, cfg.scale, cfg.canny_sigma))
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn canny_sigma(&self) -> f64 {
        self.canny_sigma
    }

    pub fn edge_generator(&self) -> &Generator {
        &self.g1
    }

    pub fn completion_generator(&self) -> &Generator {
        &self.g2
    }

    /// Super-resolves `lr` (gray or RGB) by the resolver's scale.
    ///
    /// When the HR size is not a multiple of 4, the LR image is extended by
    /// edge replication and the outputs are cropped back.
    pub fn predict(&self, lr: &ImageTensor) -> Result<Prediction> {
        let lr = if lr.channels() == 1 { gray_to_rgb(lr)? } else { lr.clone() };
        let s = self.scale.factor();
        let (h, w) = (lr.height(), lr.width());
        let m = 4 / s.min(4);
        let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
        let padded = if (ph, pw) == (h, w) {
            lr
        } else {
            ImageTensor::from_fn(ph, pw, 3, |(y, x, c)| lr.get(y.min(h - 1), x.min(w - 1), c))?
        };

        let (_, _, gray_up, c_lr_up) = lr_inputs(&padded, self.scale, self.canny_sigma)?;
        let edges = g1_forward(&self.g1, &gray_up, &c_lr_up)?;
        let incomplete = offset_upsample(&padded, self.scale)?;
        let sr = g2_forward(&self.g2, &incomplete, &edges)?;

        let (oh, ow) = (h * s, w * s);
        if (ph, pw) == (h, w) {
            return Ok(Prediction {
                sr,
                edges,
                lr_edges_up: c_lr_up,
                incomplete,
            });
        }
        let crop_edges = |e: &EdgeMap| -> Result<EdgeMap> {
            EdgeMap::soft(e.data().slice(ndarray::s![..oh, ..ow]).to_owned())
        };
        Ok(Prediction {
            sr: sr.crop(0, 0, oh, ow)?,
            edges: crop_edges(&edges)?,
            lr_edges_up: crop_edges(&c_lr_up)?.binarize(0.5),
            incomplete: incomplete.crop(0, 0, oh, ow)?,
        })
    }
}

/// Crops `hr` to a multiple of the scale and degrades it: Gaussian blur with
/// `sigma` (0 disables it) followed by subsampling. Returns `(hr, lr)`.
pub fn degrade_pair(hr: &ImageTensor, scale: Scale, sigma: f64) -> Result<(ImageTensor, ImageTensor)> {
    let hr = hr.mod_crop(scale.factor())?;
    let lr = degrade(&hr, scale.factor(), sigma)?;
    Ok((hr, lr))
}

/// Classical upscale of `lr` on the grid where LR pixel `i` lands on HR
/// pixel `s·i`, matching the subsampling phase used by [`degrade`].
pub fn baseline_upscale(lr: &ImageTensor, scale: Scale, method: Method) -> Result<ImageTensor> {
    let s = scale.factor();
    resample(lr, lr.height() * s, lr.width() * s, method, Grid::SamplePhase)
}
