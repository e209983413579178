use std::path::Path;

use image::{GrayImage, RgbImage};
use ndarray::{Array2, Array3};

use super::{EdgeMap, ImageTensor};
use crate::error::{invalid, Error, Result};

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads an 8-bit image. Grayscale files give one channel, everything else
/// is converted to RGB.
pub fn read_png(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let dynamic = image::open(path).map_err(|e| image_err(path, e))?;
    let gray = matches!(
        dynamic.color(),
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
    );
    if gray {
        let g = dynamic.to_luma8();
        let (w, h) = g.dimensions();
        let data = Array3::from_shape_fn((h as usize, w as usize, 1), |(y, x, _)| {
            g.get_pixel(x as u32, y as u32)[0] as f64 / 255.0
        });
        ImageTensor::new(data)
    } else {
        let rgb = dynamic.to_rgb8();
        let (w, h) = rgb.dimensions();
        let data = Array3::from_shape_fn((h as usize, w as usize, 3), |(y, x, c)| {
            rgb.get_pixel(x as u32, y as u32)[c] as f64 / 255.0
        });
        ImageTensor::new(data)
    }
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn write_png(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w, c) = img.dim();
    let res = match c {
        1 => GrayImage::from_fn(w as u32, h as u32, |x, y| {
            image::Luma([quantize(img.get(y as usize, x as usize, 0))])
        })
        .save(path),
        3 => RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let px = |ch| quantize(img.get(y as usize, x as usize, ch));
            image::Rgb([px(0), px(1), px(2)])
        })
        .save(path),
        other => return Err(invalid!("cannot write {other}-channel image")),
    };
    res.map_err(|e| image_err(path, e))
}

pub fn write_edge_png(edges: &EdgeMap, path: impl AsRef<Path>) -> Result<()> {
    write_png(&edges.to_image(), path)
}

/// Reads an edge map written as an 8-bit image; values above one half count
/// as edges.
pub fn read_edge_png(path: impl AsRef<Path>) -> Result<EdgeMap> {
    let img = read_png(path)?;
    let img = if img.channels() == 3 {
        super::to_grayscale(&img)?
    } else {
        img
    };
    let plane: Array2<f64> = img.into_inner().index_axis_move(ndarray::Axis(2), 0);
    Ok(EdgeMap::from_mask(&plane.mapv(|v| v > 0.5)))
}
