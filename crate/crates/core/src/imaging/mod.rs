//! Pure image-processing operations.
//!
//! Images are stored as `H×W×C` arrays of `f64` intensities in `[0, 1]`.
//! Every constructor validates that range, and every operation in this module
//! returns a value that satisfies it again, so downstream code never needs to
//! re-check.

mod blur;
mod canny;
mod color;
mod io;
mod offset;
mod resample;

use ndarray::{Array2, Array3};

use crate::error::{invalid, Error, Result};

pub(crate) use blur::reflect_index;
pub use blur::{degrade, gaussian_blur, gaussian_kernel, subsample};
pub use canny::{canny, canny_with_thresholds, CannyThresholds};
pub use color::{gray_to_rgb, to_grayscale, LUMA_WEIGHTS};
pub use io::{read_edge_png, read_png, write_edge_png, write_png};
pub use offset::{offset_kernel, offset_upsample, OffsetKernel};
pub use resample::{interpolate, resample, Grid, Method};

/// Super-resolution zoom factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Scale {
    X2,
    X4,
    X8,
}

impl Scale {
    pub const ALL: [Scale; 3] = [Scale::X2, Scale::X4, Scale::X8];

    pub fn new(factor: usize) -> Result<Self> {
        match factor {
            2 => Ok(Scale::X2),
            4 => Ok(Scale::X4),
            8 => Ok(Scale::X8),
            other => Err(Error::UnsupportedScale(other)),
        }
    }

    pub fn factor(self) -> usize {
        match self {
            Scale::X2 => 2,
            Scale::X4 => 4,
            Scale::X8 => 8,
        }
    }
}

impl TryFrom<usize> for Scale {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        Scale::new(value)
    }
}

impl From<Scale> for usize {
    fn from(s: Scale) -> usize {
        s.factor()
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "x{}", self.factor())
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches(['x', 'X']);
        let factor: usize = digits
            .parse()
            .map_err(|_| invalid!("cannot parse scale factor from {s:?}"))?;
        Scale::new(factor)
    }
}

/// An `H×W×C` image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    data: Array3<f64>,
}

impl ImageTensor {
    /// Wraps an `H×W×C` array, rejecting empty shapes, channel counts other
    /// than 1 or 3, and any element outside `[0, 1]`.
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (h, w, c) = data.dim();
        if h == 0 || w == 0 {
            return Err(invalid!("image dimensions must be at least 1x1, got {h}x{w}"));
        }
        if c != 1 && c != 3 {
            return Err(invalid!("images have 1 or 3 channels, got {c}"));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid!("intensity {v} outside [0, 1]"));
        }
        Ok(Self { data })
    }

    /// Like [`ImageTensor::new`] but clamps finite values into `[0, 1]`
    /// instead of rejecting them. Non-finite values are still rejected.
    pub fn from_clamped(mut data: Array3<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("image contains non-finite intensities"));
        }
        data.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Self::new(data)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(Array3::from_elem((height, width, channels), value))
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl FnMut((usize, usize, usize)) -> f64,
    ) -> Result<Self> {
        Self::new(Array3::from_shape_fn((height, width, channels), f))
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    /// `(height, width, channels)`.
    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array3<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[[y, x, c]]
    }

    /// Copies the `height×width` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || top + height > self.height() || left + width > self.width()
        {
            return Err(invalid!(
                "crop {height}x{width}+{top}+{left} outside {}x{} image",
                self.height(),
                self.width()
            ));
        }
        let view = self
            .data
            .slice(ndarray::s![top..top + height, left..left + width, ..]);
        Ok(Self {
            data: view.to_owned(),
        })
    }

    /// Centered `height×width` crop.
    pub fn center_crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height() || width > self.width() {
            return Err(invalid!(
                "cannot center-crop {}x{} image to {height}x{width}",
                self.height(),
                self.width()
            ));
        }
        self.crop(
            (self.height() - height) / 2,
            (self.width() - width) / 2,
            height,
            width,
        )
    }

    /// Crops the bottom/right remainder so both dimensions are multiples of
    /// `factor`.
    pub fn mod_crop(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(invalid!("mod-crop factor must be positive"));
        }
        let h = self.height() - self.height() % factor;
        let w = self.width() - self.width() % factor;
        self.crop(0, 0, h, w)
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, c: usize) -> Result<Self> {
        if c >= self.channels() {
            return Err(invalid!("channel {c} out of range for {}-channel image", self.channels()));
        }
        let plane = self.data.slice(ndarray::s![.., .., c..c + 1]).to_owned();
        Ok(Self { data: plane })
    }
}

/// Whether an edge map holds hard decisions or probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Binary,
    Soft,
}

/// `H×W` edge map in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    data: Array2<f64>,
    kind: EdgeKind,
}

impl EdgeMap {
    /// A binary map; every element must be exactly 0 or 1.
    pub fn binary(data: Array2<f64>) -> Result<Self> {
        check_nonempty(&data)?;
        if let Some(v) = data.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(invalid!("binary edge map contains {v}"));
        }
        Ok(Self {
            data,
            kind: EdgeKind::Binary,
        })
    }

    /// A soft map with values in `[0, 1]`.
    pub fn soft(data: Array2<f64>) -> Result<Self> {
        check_nonempty(&data)?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid!("edge probability {v} outside [0, 1]"));
        }
        Ok(Self {
            data,
            kind: EdgeKind::Soft,
        })
    }

    pub fn from_mask(mask: &Array2<bool>) -> Self {
        Self {
            data: mask.mapv(|b| if b { 1.0 } else { 0.0 }),
            kind: EdgeKind::Binary,
        }
    }

    pub fn kind(&self) -> EdgeKind {
        self.kind
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Number of pixels with value 1 (binary) or above one half (soft).
    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v > 0.5).count()
    }

    /// Hard decision `value >= threshold`.
    pub fn binarize(&self, threshold: f64) -> Self {
        Self {
            data: self.data.mapv(|v| if v >= threshold { 1.0 } else { 0.0 }),
            kind: EdgeKind::Binary,
        }
    }

    /// Views the map as a one-channel image.
    pub fn to_image(&self) -> ImageTensor {
        let (h, w) = self.data.dim();
        let data = self
            .data
            .clone()
            .into_shape_with_order((h, w, 1))
            .expect("reshape of contiguous array");
        ImageTensor { data }
    }

    /// Nearest-neighbor enlargement that keeps the map's kind.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Result<Self> {
        let up = interpolate(&self.to_image(), height, width, Method::Nearest)?;
        let plane = up.into_inner().index_axis_move(ndarray::Axis(2), 0);
        Ok(Self {
            data: plane,
            kind: self.kind,
        })
    }
}

fn check_nonempty(data: &Array2<f64>) -> Result<()> {
    let (h, w) = data.dim();
    if h == 0 || w == 0 {
        return Err(invalid!("edge map dimensions must be at least 1x1, got {h}x{w}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_channels() {
        assert!(ImageTensor::filled(2, 2, 3, 1.5).is_err());
        assert!(ImageTensor::filled(2, 2, 2, 0.5).is_err());
        assert!(ImageTensor::filled(0, 2, 1, 0.5).is_err());
        assert!(ImageTensor::from_clamped(Array3::from_elem((1, 1, 1), f64::NAN)).is_err());
        let c = ImageTensor::from_clamped(Array3::from_elem((1, 1, 1), 1.2)).unwrap();
        assert_eq!(c.get(0, 0, 0), 1.0);
    }

    #[test]
    fn binary_map_rejects_fractions() {
        assert!(EdgeMap::binary(Array2::from_elem((2, 2), 0.5)).is_err());
        assert!(EdgeMap::soft(Array2::from_elem((2, 2), 0.5)).is_ok());
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("x4".parse::<Scale>().unwrap(), Scale::X4);
        assert_eq!("8".parse::<Scale>().unwrap(), Scale::X8);
        assert!("3".parse::<Scale>().is_err());
    }

    #[test]
    fn crops() {
        let img = ImageTensor::from_fn(5, 7, 1, |(y, x, _)| (y * 7 + x) as f64 / 35.0).unwrap();
        let m = img.mod_crop(2).unwrap();
        assert_eq!(m.dim(), (4, 6, 1));
        let c = img.center_crop(3, 3).unwrap();
        assert_eq!(c.get(0, 0, 0), img.get(1, 2, 0));
        assert!(img.center_crop(6, 3).is_err());
    }
}
