use ndarray::Array3;

use super::ImageTensor;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Nearest,
    Bilinear,
    Bicubic,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nearest" => Ok(Method::Nearest),
            "bilinear" => Ok(Method::Bilinear),
            "bicubic" => Ok(Method::Bicubic),
            other => Err(invalid!("unknown interpolation method {other:?}")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Nearest => "nearest",
            Method::Bilinear => "bilinear",
            Method::Bicubic => "bicubic",
        })
    }
}

/// How output pixel coordinates map back onto the source grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grid {
    /// Pixel centers at `i + 0.5`; `src = (dst + 0.5) * in / out - 0.5`.
    #[default]
    HalfPixel,
    /// Source sample `i` sits on destination pixel `i * out / in`, matching
    /// phase-0 subsampling; `src = dst * in / out`.
    SamplePhase,
}

/// Resamples to `target_h × target_w` using half-pixel centers.
pub fn interpolate(
    img: &ImageTensor,
    target_h: usize,
    target_w: usize,
    method: Method,
) -> Result<ImageTensor> {
    resample(img, target_h, target_w, method, Grid::HalfPixel)
}

pub fn resample(
    img: &ImageTensor,
    target_h: usize,
    target_w: usize,
    method: Method,
    grid: Grid,
) -> Result<ImageTensor> {
    if target_h == 0 || target_w == 0 {
        return Err(invalid!("target size must be at least 1x1"));
    }
    let (h, w, c) = img.dim();
    let rows = taps_for(h, target_h, method, grid);
    let cols = taps_for(w, target_w, method, grid);

    let mut tmp = Array3::<f64>::zeros((h, target_w, c));
    for y in 0..h {
        for (x, taps) in cols.iter().enumerate() {
            for ch in 0..c {
                tmp[[y, x, ch]] = taps.iter().map(|&(i, wt)| wt * img.get(y, i, ch)).sum();
            }
        }
    }
    let mut out = Array3::<f64>::zeros((target_h, target_w, c));
    for (y, taps) in rows.iter().enumerate() {
        for x in 0..target_w {
            for ch in 0..c {
                out[[y, x, ch]] = taps.iter().map(|&(i, wt)| wt * tmp[[i, x, ch]]).sum();
            }
        }
    }
    ImageTensor::from_clamped(out)
}

/// Keys cubic convolution kernel with `a = -0.5`.
fn cubic(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

fn taps_for(input: usize, output: usize, method: Method, grid: Grid) -> Vec<Vec<(usize, f64)>> {
    let ratio = input as f64 / output as f64;
    let last = input as isize - 1;
    let clamp = |i: isize| i.clamp(0, last) as usize;
    (0..output)
        .map(|d| {
            let d = d as f64;
            match method {
                Method::Nearest => {
                    let src = match grid {
                        Grid::HalfPixel => ((d + 0.5) * ratio).floor(),
                        Grid::SamplePhase => (d * ratio).floor(),
                    };
                    vec![(clamp(src as isize), 1.0)]
                }
                Method::Bilinear => {
                    let src = source_coord(d, ratio, grid).max(0.0);
                    let i0 = src.floor();
                    let t = src - i0;
                    let i0 = i0 as isize;
                    vec![(clamp(i0), 1.0 - t), (clamp(i0 + 1), t)]
                }
                Method::Bicubic => {
                    let src = source_coord(d, ratio, grid);
                    let i0 = src.floor();
                    let t = src - i0;
                    let i0 = i0 as isize;
                    (-1..=2)
                        .map(|k| (clamp(i0 + k), cubic(t - k as f64)))
                        .collect()
                }
            }
        })
        .collect()
}

fn source_coord(d: f64, ratio: f64, grid: Grid) -> f64 {
    match grid {
        Grid::HalfPixel => (d + 0.5) * ratio - 0.5,
        Grid::SamplePhase => d * ratio,
    }
}
