//! Published PSNR/SSIM and edge precision/recall figures, embedded for side by
//! side comparison with locally computed reports. Values are immutable.

use crate::imaging::Scale;

pub const PROVENANCE: &str =
    "published comparison of bicubic, ENet, EDSR, no-edge baseline and edge-informed model";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub method: &'static str,
    pub dataset: &'static str,
    pub scale: Scale,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeReferenceRow {
    pub dataset: &'static str,
    pub scale: Scale,
    /// Percent.
    pub precision: f64,
    /// Percent.
    pub recall: f64,
}

pub const METHODS: [&str; 5] = ["bicubic", "enet", "edsr", "baseline", "ours"];
pub const DATASETS: [&str; 4] = ["Set5", "Set14", "BSD100", "Celeb-HQ"];

// (dataset, scale, psnr per method, ssim per method); NaN marks "not reported".
const N: f64 = f64::NAN;
#[rustfmt::skip]
const RAW: [(&str, usize, [f64; 5], [f64; 5]); 12] = [
    ("Set5",     2, [33.66, 33.89, 38.20, 27.32, 33.60], [0.930, 0.928, 0.961, 0.974, 0.985]),
    ("Set14",    2, [30.24, 30.45, 34.02, 24.86, 29.24], [0.869, 0.862, 0.920, 0.930, 0.954]),
    ("BSD100",   2, [29.56, 28.30, 32.37, 23.97, 28.12], [0.843, 0.873, 0.902, 0.909, 0.932]),
    ("Celeb-HQ", 2, [33.25, N,     N,     31.33, 32.12], [0.967, N,     N,     0.957, 0.968]),
    ("Set5",     4, [28.42, 28.56, 32.62, 24.22, 28.59], [0.810, 0.809, 0.898, 0.929, 0.965]),
    ("Set14",    4, [25.99, 25.77, 28.94, 21.56, 25.19], [0.703, 0.678, 0.790, 0.832, 0.894]),
    ("BSD100",   4, [25.96, 24.93, 27.79, 20.78, 24.25], [0.668, 0.627, 0.744, 0.773, 0.851]),
    ("Celeb-HQ", 4, [29.59, N,     N,     27.94, 28.23], [0.834, N,     N,     0.910, 0.912]),
    ("Set5",     8, [23.80, N,     N,     19.32, 23.73], [0.646, N,     N,     0.801, 0.904]),
    ("Set14",    8, [22.37, N,     N,     18.47, 21.44], [0.552, N,     N,     0.708, 0.793]),
    // The source prints the last SSIM as "0752".
    ("BSD100",   8, [22.11, N,     N,     18.65, 21.63], [0.532, N,     N,     0.663, 0.752]),
    ("Celeb-HQ", 8, [26.66, N,     N,     25.46, 25.56], [0.782, N,     N,     0.841, 0.857]),
];

#[rustfmt::skip]
const EDGE_RAW: [(&str, usize, f64, f64); 6] = [
    ("Celeb-HQ", 2, 74.27, 73.21),
    ("Celeb-HQ", 4, 45.14, 43.04),
    ("Celeb-HQ", 8, 23.23, 19.09),
    ("Places2",  2, 79.18, 80.24),
    ("Places2",  4, 60.80, 58.19),
    ("Places2",  8, 31.06, 23.93),
];

fn opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// The full PSNR/SSIM table, one row per (method, dataset, scale).
pub fn table() -> Vec<ReferenceRow> {
    let mut rows = Vec::with_capacity(RAW.len() * METHODS.len());
    for (dataset, scale, psnr, ssim) in RAW {
        let scale = Scale::new(scale).expect("table scales are valid");
        for (m, method) in METHODS.iter().enumerate() {
            rows.push(ReferenceRow {
                method,
                dataset,
                scale,
                psnr: opt(psnr[m]),
                ssim: opt(ssim[m]),
            });
        }
    }
    rows
}

pub fn edge_table() -> Vec<EdgeReferenceRow> {
    EDGE_RAW
        .iter()
        .map(|&(dataset, scale, precision, recall)| EdgeReferenceRow {
            dataset,
            scale: Scale::new(scale).expect("table scales are valid"),
            precision,
            recall,
        })
        .collect()
}

/// Rows for a dataset (case-insensitive) and scale, in method order.
pub fn lookup(dataset: &str, scale: Scale) -> Vec<ReferenceRow> {
    table()
        .into_iter()
        .filter(|r| r.dataset.eq_ignore_ascii_case(dataset) && r.scale == scale)
        .collect()
}

pub fn lookup_method(method: &str, dataset: &str, scale: Scale) -> Option<ReferenceRow> {
    lookup(dataset, scale)
        .into_iter()
        .find(|r| r.method.eq_ignore_ascii_case(method))
}
