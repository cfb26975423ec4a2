//! Per-image metrics and dataset summaries.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::measures::{ber, f_measure, mae, THRESHOLDS};
use super::structure::s_measure;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CSV_HEADER: [&str; 6] = ["image", "fbeta_max", "fbeta_adaptive", "smeasure", "mae", "ber"];

/// Threshold for the binary decision behind BER.
pub const BER_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub image: String,
    /// `None` when the mask has no foreground.
    pub fbeta_max: Option<f64>,
    pub fbeta_adaptive: Option<f64>,
    pub smeasure: f64,
    pub mae: f64,
    pub ber: f64,
    pub ber_flagged: bool,
    #[serde(skip)]
    pub precision: Option<Vec<f64>>,
    #[serde(skip)]
    pub recall: Option<Vec<f64>>,
}

impl ImageMetrics {
    pub fn evaluate(image: impl Into<String>, pred: &Tensor<f32>, gt: &Tensor<f32>) -> Result<Self> {
        let f = f_measure(pred, gt)?;
        let b = ber(pred, gt, BER_THRESHOLD)?;
        Ok(Self {
            image: image.into(),
            fbeta_max: f.as_ref().map(|f| f.max),
            fbeta_adaptive: f.as_ref().map(|f| f.adaptive),
            smeasure: s_measure(pred, gt)?,
            mae: mae(pred, gt)?,
            ber: b.value,
            ber_flagged: b.flagged,
            precision: f.as_ref().map(|f| f.precision.clone()),
            recall: f.map(|f| f.recall),
        })
    }

    pub fn defined(&self) -> bool {
        self.fbeta_max.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub images: usize,
    /// Images excluded from every mean because their mask is empty.
    pub undefined: usize,
    pub ber_flagged: usize,
    pub fbeta_max: Option<f64>,
    pub fbeta_adaptive: Option<f64>,
    pub smeasure: Option<f64>,
    pub mae: Option<f64>,
    pub ber: Option<f64>,
    /// Mean precision and recall at thresholds `i / 255`.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub images: Vec<ImageMetrics>,
    pub summary: Summary,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl EvalReport {
    /// Evaluates `(id, prediction, mask)` triples in parallel; the report
    /// keeps input order.
    pub fn evaluate(pairs: &[(String, Tensor<f32>, Tensor<f32>)]) -> Result<Self> {
        let images = pairs
            .par_iter()
            .map(|(id, p, g)| ImageMetrics::evaluate(id.clone(), p, g))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_images(images))
    }

    pub fn from_images(images: Vec<ImageMetrics>) -> Self {
        let defined: Vec<&ImageMetrics> = images.iter().filter(|m| m.defined()).collect();
        let curve = |pick: fn(&ImageMetrics) -> &Option<Vec<f64>>| -> Vec<f64> {
            if defined.is_empty() {
                return Vec::new();
            }
            (0..THRESHOLDS)
                .map(|i| defined.iter().map(|m| pick(m).as_ref().map_or(0.0, |c| c[i])).sum::<f64>() / defined.len() as f64)
                .collect()
        };
        let summary = Summary {
            images: images.len(),
            undefined: images.len() - defined.len(),
            ber_flagged: images.iter().filter(|m| m.ber_flagged).count(),
            fbeta_max: mean(defined.iter().filter_map(|m| m.fbeta_max)),
            fbeta_adaptive: mean(defined.iter().filter_map(|m| m.fbeta_adaptive)),
            smeasure: mean(defined.iter().map(|m| m.smeasure)),
            mae: mean(defined.iter().map(|m| m.mae)),
            ber: mean(defined.iter().map(|m| m.ber)),
            precision: curve(|m| &m.precision),
            recall: curve(|m| &m.recall),
        };
        Self { images, summary }
    }

    /// One row per image; undefined F values are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::invalid("eval csv", e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(err)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for m in &self.images {
            w.write_record([
                m.image.clone(),
                opt(m.fbeta_max),
                opt(m.fbeta_adaptive),
                m.smeasure.to_string(),
                m.mae.to_string(),
                m.ber.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::invalid("eval csv", e.to_string()))
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Writes `metrics.csv` and `summary.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("metrics.csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        let json_path = dir.join("summary.json");
        std::fs::write(&json_path, self.summary_json() + "\n").map_err(|e| Error::io(&json_path, e))
    }
}
