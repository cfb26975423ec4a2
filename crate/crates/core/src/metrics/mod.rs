//! Saliency evaluation metrics on `(1, 1, h, w)` maps.

mod measures;
mod report;
mod structure;

pub use measures::{
    ber, f_measure, fbeta, level, mae, precision_recall, Ber, FMeasure, BETA2, THRESHOLDS,
};
pub use report::{EvalReport, ImageMetrics, Summary, BER_THRESHOLD, CSV_HEADER};
pub use structure::{s_measure, LAMBDA_S};
