use std::collections::VecDeque;

use ndarray::{Array2, Axis};

use super::blur::{convolve_axis, gaussian_kernel, reflect_index};
use super::{EdgeMap, ImageTensor};
use crate::error::{invalid, Result};

/// Hysteresis thresholds as fractions of the largest gradient magnitude in
/// the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyThresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for CannyThresholds {
    fn default() -> Self {
        Self {
            low: 0.1,
            high: 0.2,
        }
    }
}

/// Canny edge detector with default relative thresholds.
pub fn canny(gray: &ImageTensor, sigma: f64) -> Result<EdgeMap> {
    canny_with_thresholds(gray, sigma, CannyThresholds::default())
}

pub fn canny_with_thresholds(
    gray: &ImageTensor,
    sigma: f64,
    thresholds: CannyThresholds,
) -> Result<EdgeMap> {
    if gray.channels() != 1 {
        return Err(invalid!(
            "canny expects a single-channel image, got {} channels",
            gray.channels()
        ));
    }
    if !(0.0..=1.0).contains(&thresholds.low) || thresholds.low > thresholds.high {
        return Err(invalid!("invalid hysteresis thresholds {thresholds:?}"));
    }
    let taps = gaussian_kernel(sigma)?;
    // Unclamped smoothing; only relative magnitudes matter from here on.
    let smooth = convolve_axis(&convolve_axis(gray.data(), &taps, Axis(1)), &taps, Axis(0))
        .index_axis_move(Axis(2), 0);
    let (h, w) = smooth.dim();

    let at = |y: isize, x: isize| smooth[[reflect_index(y, h), reflect_index(x, w)]];
    let mut gx = Array2::zeros((h, w));
    let mut gy = Array2::zeros((h, w));
    for y in 0..h as isize {
        for x in 0..w as isize {
            gx[[y as usize, x as usize]] = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            gy[[y as usize, x as usize]] = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
        }
    }
    let magnitude = Array2::from_shape_fn((h, w), |(y, x)| gx[[y, x]].hypot(gy[[y, x]]));
    let peak = magnitude.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(EdgeMap::from_mask(&Array2::from_elem((h, w), false)));
    }

    let thin = non_maximum_suppression(&magnitude, &gx, &gy);
    let mask = hysteresis(
        &thin,
        thresholds.low * peak,
        thresholds.high * peak,
    );
    Ok(EdgeMap::from_mask(&mask))
}

/// Keeps a pixel when its magnitude beats both neighbors along the quantized
/// gradient direction. Ties go to the neighbor on the positive side, so a
/// symmetric ridge two pixels wide collapses to a single pixel.
fn non_maximum_suppression(mag: &Array2<f64>, gx: &Array2<f64>, gy: &Array2<f64>) -> Array2<f64> {
    let (h, w) = mag.dim();
    let mut out = Array2::zeros((h, w));
    let get = |y: isize, x: isize| {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            mag[[y as usize, x as usize]]
        }
    };
    for y in 0..h {
        for x in 0..w {
            let m = mag[[y, x]];
            if m <= 0.0 {
                continue;
            }
            // Angle folded into [0, 180).
            let mut angle = gy[[y, x]].atan2(gx[[y, x]]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (dy, dx) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let (yi, xi) = (y as isize, x as isize);
            let ahead = get(yi + dy, xi + dx);
            let behind = get(yi - dy, xi - dx);
            // Differences within rounding noise count as ties.
            let tol = m * 1e-9;
            if m - ahead > tol && m - behind >= -tol {
                out[[y, x]] = m;
            }
        }
    }
    out
}

/// Strong pixels seed an 8-connected flood fill through weak pixels.
fn hysteresis(thin: &Array2<f64>, low: f64, high: f64) -> Array2<bool> {
    let (h, w) = thin.dim();
    let mut edges = Array2::from_elem((h, w), false);
    let mut queue = VecDeque::new();
    for ((y, x), &m) in thin.indexed_iter() {
        if m >= high && m > 0.0 {
            edges[[y, x]] = true;
            queue.push_back((y, x));
        }
    }
    while let Some((y, x)) = queue.pop_front() {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let ny = y as isize + dy;
                let nx = x as isize + dx;
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    continue;
                }
                let (ny, nx) = (ny as usize, nx as usize);
                if !edges[[ny, nx]] && thin[[ny, nx]] >= low && thin[[ny, nx]] > 0.0 {
                    edges[[ny, nx]] = true;
                    queue.push_back((ny, nx));
                }
            }
        }
    }
    edges
}
