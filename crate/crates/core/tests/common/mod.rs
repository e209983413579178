#![allow(dead_code)]

use edgesr::ImageTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A seeded RGB test image: a smooth background with a few flat-colored
/// rectangles and discs.
pub fn synthetic_image(seed: u64, size: usize) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = [rng.random_range(0.1..0.5), rng.random_range(0.1..0.5), rng.random_range(0.1..0.5)];
    let tilt: [f64; 3] = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
    let n = size as f64;
    let mut shapes = Vec::new();
    for _ in 0..rng.random_range(3..7) {
        let disc = rng.random_bool(0.5);
        let cy = rng.random_range(0.1..0.9) * n;
        let cx = rng.random_range(0.1..0.9) * n;
        let ry = rng.random_range(0.08..0.3) * n;
        let rx = rng.random_range(0.08..0.3) * n;
        let color: [f64; 3] = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        shapes.push((disc, cy, cx, ry, rx, color));
    }
    ImageTensor::from_fn(size, size, 3, |(y, x, c)| {
        let (fy, fx) = (y as f64 + 0.5, x as f64 + 0.5);
        let mut v = base[c] + tilt[c] * (fx / n - 0.5) + 0.5 * tilt[(c + 1) % 3] * (fy / n - 0.5);
        for (disc, cy, cx, ry, rx, color) in &shapes {
            let inside = if *disc {
                ((fy - cy) / ry).powi(2) + ((fx - cx) / rx).powi(2) <= 1.0
            } else {
                (fy - cy).abs() <= *ry && (fx - cx).abs() <= *rx
            };
            if inside {
                v = color[c];
            }
        }
        v.clamp(0.0, 1.0)
    })
    .expect("values clamped into range")
}

/// `count` synthetic images named `img00`, `img01`, ...
pub fn synthetic_set(count: usize, size: usize, seed: u64) -> Vec<(String, ImageTensor)> {
    (0..count)
        .map(|i| (format!("img{i:02}"), synthetic_image(seed + i as u64, size)))
        .collect()
}
