//! Inputs shared by the benchmarks.

use edgesr::ImageTensor;

/// Deterministic RGB test card: diagonal ramps with a bright disc.
pub fn test_card(size: usize) -> ImageTensor {
    let r = size as f64 / 4.0;
    let c = size as f64 / 2.0;
    ImageTensor::from_fn(size, size, 3, |(y, x, ch)| {
        let (dy, dx) = (y as f64 - c, x as f64 - c);
        if dy * dy + dx * dx < r * r {
            0.85
        } else {
            ((x + 2 * y + 17 * ch) % size) as f64 / size as f64
        }
    })
    .expect("values lie in [0, 1]")
}
