use crate::error::{invalid, Result};
use crate::imaging::{canny, degrade, interpolate, to_grayscale, EdgeMap, ImageTensor, Method, Scale};

use super::TrainConfig;

/// One HR crop and everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub scale: Scale,
    pub hr: ImageTensor,
    pub lr: ImageTensor,
    pub hr_gray: ImageTensor,
    pub lr_gray: ImageTensor,
    /// Canny edges of the HR gray image.
    pub c_gt: EdgeMap,
    /// Canny edges of the LR gray image.
    pub c_lr: EdgeMap,
    /// `lr_gray` enlarged to HR size by nearest neighbor.
    pub lr_gray_up: ImageTensor,
    /// `c_lr` enlarged to HR size by nearest neighbor.
    pub c_lr_up: EdgeMap,
}

/// Builds the LR-side fields from an LR image alone, as inference does.
pub(crate) fn lr_inputs(
    lr: &ImageTensor,
    scale: Scale,
    canny_sigma: f64,
) -> Result<(ImageTensor, EdgeMap, ImageTensor, EdgeMap)> {
    let s = scale.factor();
    let (h, w) = (lr.height() * s, lr.width() * s);
    let lr_gray = to_grayscale(lr)?;
    let c_lr = canny(&lr_gray, canny_sigma)?;
    let lr_gray_up = interpolate(&lr_gray, h, w, Method::Nearest)?;
    let c_lr_up = c_lr.resize_nearest(h, w)?;
    Ok((lr_gray, c_lr, lr_gray_up, c_lr_up))
}

/// Center-crops `hr` to `hr_size` and derives the full training sample.
pub fn make_sample(hr: &ImageTensor, cfg: &TrainConfig) -> Result<SamplePair> {
    check_size(hr, cfg.hr_size)?;
    let top = (hr.height() - cfg.hr_size) / 2;
    let left = (hr.width() - cfg.hr_size) / 2;
    make_sample_at(hr, cfg, top, left)
}

/// Like [`make_sample`] with an explicit crop origin.
pub fn make_sample_at(hr: &ImageTensor, cfg: &TrainConfig, top: usize, left: usize) -> Result<SamplePair> {
    check_size(hr, cfg.hr_size)?;
    if hr.channels() != 3 {
        return Err(invalid!("training images must be RGB, got {} channels", hr.channels()));
    }
    let hr = hr.crop(top, left, cfg.hr_size, cfg.hr_size)?;
    from_hr(hr, cfg.scale, cfg.degrade_sigma, cfg.canny_sigma)
}

/// Derives a sample from an HR image that is already the final size.
pub fn from_hr(hr: ImageTensor, scale: Scale, degrade_sigma: f64, canny_sigma: f64) -> Result<SamplePair> {
    let lr = degrade(&hr, scale.factor(), degrade_sigma)?;
    let hr_gray = to_grayscale(&hr)?;
    let c_gt = canny(&hr_gray, canny_sigma)?;
    let (lr_gray, c_lr, lr_gray_up, c_lr_up) = lr_inputs(&lr, scale, canny_sigma)?;
    Ok(SamplePair {
        scale,
        hr,
        lr,
        hr_gray,
        lr_gray,
        c_gt,
        c_lr,
        lr_gray_up,
        c_lr_up,
    })
}

fn check_size(hr: &ImageTensor, size: usize) -> Result<()> {
    if hr.height() < size || hr.width() < size {
        return Err(invalid!(
            "image {}x{} is smaller than the {size}x{size} training crop",
            hr.height(),
            hr.width()
        ));
    }
    Ok(())
}
