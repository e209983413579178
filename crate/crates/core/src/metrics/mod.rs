//! PSNR, SSIM and edge precision/recall.
//!
//! Conventions: intensities are compared in `[0, 1]` with peak 1; color
//! images are compared over all RGB channels without border cropping; SSIM on
//! color images is the mean of the per-channel indices.

mod report;

use ndarray::{Array2, Axis};

use crate::error::{invalid, shape_err, Result};
use crate::imaging::{EdgeKind, EdgeMap, ImageTensor};

pub use report::{Aggregate, ImageMetrics, MetricsReport};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn same_shape(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(shape_err!("{:?} vs {:?}", a.dim(), b.dim()));
    }
    Ok(())
}

/// Mean squared error over every element.
pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    same_shape(a, b)?;
    let n = a.data().len() as f64;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n)
}

/// Peak signal-to-noise ratio in dB for peak value 1. Identical images give
/// `f64::INFINITY`.
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / m).log10())
    }
}

/// Normalized 11-tap Gaussian, sigma 1.5.
pub fn ssim_window_1d() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let x = (i as isize - r) as f64;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// "Valid" separable filtering: output is `(h - 10) × (w - 10)`.
fn filter_valid(plane: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let (h, w) = plane.dim();
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = Array2::<f64>::zeros((h, ow));
    for y in 0..h {
        for x in 0..ow {
            rows[[y, x]] = (0..k).map(|i| taps[i] * plane[[y, x + i]]).sum();
        }
    }
    let mut out = Array2::zeros((oh, ow));
    for y in 0..oh {
        for x in 0..ow {
            out[[y, x]] = (0..k).map(|i| taps[i] * rows[[y + i, x]]).sum();
        }
    }
    out
}

fn ssim_plane(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let taps = ssim_window_1d();
    let mu_a = filter_valid(a, &taps);
    let mu_b = filter_valid(b, &taps);
    let aa = filter_valid(&(a * a), &taps);
    let bb = filter_valid(&(b * b), &taps);
    let ab = filter_valid(&(a * b), &taps);
    let mut total = 0.0;
    for ((((ma, mb), saa), sbb), sab) in mu_a.iter().zip(&mu_b).zip(&aa).zip(&bb).zip(&ab) {
        let var_a = saa - ma * ma;
        let var_b = sbb - mb * mb;
        let cov = sab - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2));
    }
    total / mu_a.len() as f64
}

/// Mean structural similarity over all fully contained 11×11 windows,
/// averaged across channels.
pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    same_shape(a, b)?;
    let (h, w, c) = a.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(invalid!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        ));
    }
    let mut sum = 0.0;
    for ch in 0..c {
        let pa = a.data().index_axis(Axis(2), ch).to_owned();
        let pb = b.data().index_axis(Axis(2), ch).to_owned();
        sum += ssim_plane(&pa, &pb);
    }
    Ok(sum / c as f64)
}

/// Exact per-pixel precision and recall of `pred` against `gt`.
///
/// Empty prediction: precision is 1 when `gt` is also empty, else 0.
/// Empty ground truth: recall is 1.
pub fn edge_precision_recall(pred: &EdgeMap, gt: &EdgeMap) -> Result<(f64, f64)> {
    if pred.kind() != EdgeKind::Binary || gt.kind() != EdgeKind::Binary {
        return Err(invalid!("precision/recall needs binary edge maps"));
    }
    if pred.data().dim() != gt.data().dim() {
        return Err(shape_err!(
            "edge maps {:?} vs {:?}",
            pred.data().dim(),
            gt.data().dim()
        ));
    }
    let mut hits = 0usize;
    let mut n_pred = 0usize;
    let mut n_gt = 0usize;
    for (p, g) in pred.data().iter().zip(gt.data()) {
        let (p, g) = (*p == 1.0, *g == 1.0);
        n_pred += p as usize;
        n_gt += g as usize;
        hits += (p && g) as usize;
    }
    let precision = if n_pred == 0 {
        if n_gt == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        hits as f64 / n_pred as f64
    };
    let recall = if n_gt == 0 {
        1.0
    } else {
        hits as f64 / n_gt as f64
    };
    Ok((precision, recall))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_image(seed: u64, h: usize, w: usize, c: usize) -> ImageTensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_fn(h, w, c, |_| rng.random()).unwrap()
    }

    #[test]
    fn psnr_identity_and_half_offset() {
        let a = random_image(1, 8, 8, 3);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let zeros = ImageTensor::filled(4, 4, 1, 0.0).unwrap();
        let halves = ImageTensor::filled(4, 4, 1, 0.5).unwrap();
        assert!((psnr(&zeros, &halves).unwrap() - 6.020_599_913_279_624).abs() < 1e-12);
    }

    #[test]
    fn psnr_shape_mismatch() {
        let a = ImageTensor::filled(4, 4, 1, 0.0).unwrap();
        let b = ImageTensor::filled(4, 5, 1, 0.0).unwrap();
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn ssim_identity_and_constants() {
        let a = random_image(2, 16, 16, 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let x = ImageTensor::filled(12, 12, 1, 0.2).unwrap();
        let y = ImageTensor::filled(12, 12, 1, 0.8).unwrap();
        let expected = (2.0 * 0.2 * 0.8 + SSIM_C1) / (0.2 * 0.2 + 0.8 * 0.8 + SSIM_C1);
        assert!((ssim(&x, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = ImageTensor::filled(10, 20, 1, 0.2).unwrap();
        assert!(ssim(&a, &a).is_err());
    }

    fn map(rows: &[&str]) -> EdgeMap {
        let h = rows.len();
        let w = rows[0].len();
        EdgeMap::from_mask(&Array2::from_shape_fn((h, w), |(y, x)| {
            rows[y].as_bytes()[x] == b'#'
        }))
    }

    #[test]
    fn precision_recall_examples() {
        let gt = map(&["..#..", "..#..", "..#.."]);
        assert_eq!(edge_precision_recall(&gt, &gt).unwrap(), (1.0, 1.0));
        let wide = map(&[".##..", ".##..", ".##.."]);
        assert_eq!(edge_precision_recall(&wide, &gt).unwrap(), (0.5, 1.0));
        let shifted = map(&["...#.", "...#.", "...#."]);
        assert_eq!(edge_precision_recall(&shifted, &gt).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn precision_recall_degenerate_counts() {
        let empty = map(&["...", "..."]);
        let some = map(&["#..", "..."]);
        assert_eq!(edge_precision_recall(&empty, &empty).unwrap(), (1.0, 1.0));
        assert_eq!(edge_precision_recall(&empty, &some).unwrap(), (0.0, 0.0));
        assert_eq!(edge_precision_recall(&some, &empty).unwrap(), (0.0, 1.0));
        let soft = EdgeMap::soft(Array2::from_elem((2, 3), 0.3)).unwrap();
        assert!(edge_precision_recall(&soft, &empty).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn symmetric(seed in 0u64..10_000) {
            let a = random_image(seed, 12, 13, 1);
            let b = random_image(seed + 1, 12, 13, 1);
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
            prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(ssim(&a, &b).unwrap() <= 1.0);
        }

        #[test]
        fn psnr_decreases_with_perturbation(base in 0.2f64..0.4, d in 0.01f64..0.2) {
            let a = ImageTensor::filled(4, 4, 1, base).unwrap();
            let b = ImageTensor::filled(4, 4, 1, base + d).unwrap();
            let c = ImageTensor::filled(4, 4, 1, base + 1.5 * d).unwrap();
            prop_assert!(psnr(&a, &b).unwrap() > psnr(&a, &c).unwrap());
        }

        #[test]
        fn precision_recall_swap(bits_a in prop::collection::vec(any::<bool>(), 30),
                                 bits_b in prop::collection::vec(any::<bool>(), 30)) {
            let a = EdgeMap::from_mask(&Array2::from_shape_vec((5, 6), bits_a).unwrap());
            let b = EdgeMap::from_mask(&Array2::from_shape_vec((5, 6), bits_b).unwrap());
            let (pa, ra) = edge_precision_recall(&a, &b).unwrap();
            let (pb, rb) = edge_precision_recall(&b, &a).unwrap();
            if a.count() > 0 && b.count() > 0 {
                prop_assert_eq!(pa, rb);
                prop_assert_eq!(ra, pb);
            }
        }
    }

    #[test]
    fn ssim_of_3d_matches_mean_of_planes() {
        let a = random_image(5, 14, 14, 3);
        let b = random_image(6, 14, 14, 3);
        let per: f64 = (0..3)
            .map(|c| ssim(&a.channel(c).unwrap(), &b.channel(c).unwrap()).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((ssim(&a, &b).unwrap() - per).abs() < 1e-12);
    }
}
