use std::fmt::Write as _;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::imaging::Scale;
use crate::reference::ReferenceRow;

/// One evaluated image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMetrics {
    pub image_id: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Arithmetic means over a report's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub psnr_db: f64,
    pub ssim: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dataset_name: String,
    pub scale: Scale,
    pub method_name: String,
    rows: Vec<ImageMetrics>,
}

impl MetricsReport {
    pub fn new(dataset_name: impl Into<String>, scale: Scale, method_name: impl Into<String>) -> Self {
        Self {
            dataset_name: dataset_name.into(),
            scale,
            method_name: method_name.into(),
            rows: Vec::new(),
        }
    }

    /// Adds a row after checking value ranges. Edge columns must be present
    /// on every row or on none.
    pub fn push(&mut self, row: ImageMetrics) -> Result<()> {
        if !(row.psnr_db > 0.0) {
            return Err(invalid!("{}: PSNR {} is not positive", row.image_id, row.psnr_db));
        }
        if !(-1.0..=1.0).contains(&row.ssim) {
            return Err(invalid!("{}: SSIM {} outside [-1, 1]", row.image_id, row.ssim));
        }
        for v in [row.precision, row.recall].into_iter().flatten() {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid!("{}: edge score {v} outside [0, 1]", row.image_id));
            }
        }
        if row.precision.is_some() != row.recall.is_some() {
            return Err(invalid!("{}: precision and recall must come together", row.image_id));
        }
        if let Some(first) = self.rows.first() {
            if first.precision.is_some() != row.precision.is_some() {
                return Err(invalid!("edge columns must be present on all rows or none"));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[ImageMetrics] {
        &self.rows
    }

    pub fn has_edge_metrics(&self) -> bool {
        self.rows.first().is_some_and(|r| r.precision.is_some())
    }

    pub fn aggregate(&self) -> Option<Aggregate> {
        if self.rows.is_empty() {
            return None;
        }
        let n = self.rows.len() as f64;
        let mean = |f: &dyn Fn(&ImageMetrics) -> f64| self.rows.iter().map(f).sum::<f64>() / n;
        let edges = self.has_edge_metrics();
        Some(Aggregate {
            psnr_db: mean(&|r| r.psnr_db),
            ssim: mean(&|r| r.ssim),
            precision: edges.then(|| mean(&|r| r.precision.unwrap_or(0.0))),
            recall: edges.then(|| mean(&|r| r.recall.unwrap_or(0.0))),
            count: self.rows.len(),
        })
    }

    /// CSV with one row per image and a final `mean` row. Columns:
    /// `image_id,psnr_db,ssim,precision,recall`; the edge columns stay empty
    /// without edge maps.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["image_id", "psnr_db", "ssim", "precision", "recall"])
            .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut emit = |id: &str, psnr: f64, ssim: f64, p: Option<f64>, r: Option<f64>| {
            w.write_record([id.to_string(), fmt_psnr(psnr), format!("{ssim:.6}"), opt(p), opt(r)])
                .map_err(csv_err)
        };
        for r in &self.rows {
            emit(&r.image_id, r.psnr_db, r.ssim, r.precision, r.recall)?;
        }
        if let Some(agg) = self.aggregate() {
            emit("mean", agg.psnr_db, agg.ssim, agg.precision, agg.recall)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Human-readable report, with any matching reference rows listed under
    /// the aggregate.
    pub fn render_text(&self, references: &[ReferenceRow]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset: {}", self.dataset_name);
        let _ = writeln!(s, "scale: {}", self.scale);
        let _ = writeln!(s, "method: {}", self.method_name);
        let _ = writeln!(s, "images: {}", self.rows.len());
        let edges = self.has_edge_metrics();
        let _ = writeln!(s);
        let _ = write!(s, "{:<24} {:>10} {:>8}", "image_id", "psnr_db", "ssim");
        if edges {
            let _ = write!(s, " {:>9} {:>9}", "precision", "recall");
        }
        let _ = writeln!(s);
        let mut line = |id: &str, psnr: f64, ssim: f64, p: Option<f64>, r: Option<f64>| {
            let _ = write!(s, "{:<24} {:>10} {:>8.4}", id, fmt_psnr(psnr), ssim);
            if let (Some(p), Some(r)) = (p, r) {
                let _ = write!(s, " {:>9.4} {:>9.4}", p, r);
            }
            let _ = writeln!(s);
        };
        for r in &self.rows {
            line(&r.image_id, r.psnr_db, r.ssim, r.precision, r.recall);
        }
        if let Some(agg) = self.aggregate() {
            line("mean", agg.psnr_db, agg.ssim, agg.precision, agg.recall);
        }
        if !references.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "published reference values ({} {}):", self.dataset_name, self.scale);
            for r in references {
                let _ = writeln!(
                    s,
                    "  {:<10} psnr_db={:<7} ssim={}",
                    r.method,
                    r.psnr.map_or("-".into(), |v| format!("{v:.2}")),
                    r.ssim.map_or("-".into(), |v| format!("{v:.3}")),
                );
            }
        }
        s
    }
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}
