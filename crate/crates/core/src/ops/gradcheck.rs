//! Central finite-difference gradient checking.
//!
//! The objective is always evaluated in `f64`; the analytic gradient may come
//! from either precision. Entries whose finite difference changes when the
//! step is halved straddle a non-differentiable point (a ReLU kink or a scan
//! sign change) and are excluded and counted rather than scored.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Denominator floor: errors are `|a - n| / max(|a|, |n|, floor)`.
    pub floor: f64,
    /// Largest fraction of entries that may be excluded as non-smooth.
    pub max_skip_fraction: f64,
}

impl GradCheckConfig {
    pub fn f64_default() -> Self {
        GradCheckConfig {
            step: 1e-6,
            tolerance: 1e-5,
            floor: 1e-8,
            max_skip_fraction: 0.02,
        }
    }

    /// Analytic gradient computed in `f32`, differences taken in `f64`.
    pub fn f32_default() -> Self {
        GradCheckConfig {
            step: 1e-6,
            tolerance: 1e-3,
            floor: 1e-3,
            max_skip_fraction: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
    pub skipped: usize,
    pub tolerance: f64,
    pub max_skip_fraction: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        let total = self.checked + self.skipped;
        self.max_rel_error <= self.tolerance
            && (total == 0 || self.skipped as f64 <= self.max_skip_fraction * total as f64)
    }

    /// Folds another report into this one, keeping the worst entry.
    pub fn merge(&mut self, other: &GradCheckReport) {
        if other.max_rel_error > self.max_rel_error || self.worst_index.is_none() {
            self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
            self.worst_index = other.worst_index;
            self.worst_analytic = other.worst_analytic;
            self.worst_numeric = other.worst_numeric;
        }
        self.checked += other.checked;
        self.skipped += other.skipped;
    }

    pub fn empty(cfg: &GradCheckConfig) -> Self {
        GradCheckReport {
            max_rel_error: 0.0,
            worst_index: None,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
            checked: 0,
            skipped: 0,
            tolerance: cfg.tolerance,
            max_skip_fraction: cfg.max_skip_fraction,
        }
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max_rel_err={:.3e} checked={} skipped={} [{}]",
            self.max_rel_error,
            self.checked,
            self.skipped,
            if self.passed() { "ok" } else { "FAIL" }
        )?;
        if let Some(i) = self.worst_index {
            write!(
                f,
                " worst@{i}: analytic={:.6e} numeric={:.6e}",
                self.worst_analytic, self.worst_numeric
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Checks `analytic` against central differences of `f` at `point`.
pub fn grad_check(
    f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    cfg: &GradCheckConfig,
) -> GradCheckReport {
    let all: Vec<usize> = (0..point.len()).collect();
    grad_check_entries(f, point, analytic, &all, cfg)
}

/// Like [`grad_check`] but only over the listed entry indices.
pub fn grad_check_entries(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    entries: &[usize],
    cfg: &GradCheckConfig,
) -> GradCheckReport {
    assert_eq!(point.len(), analytic.len(), "gradient length mismatch");
    let mut report = GradCheckReport::empty(cfg);
    let mut x = point.to_vec();
    let mut central = |x: &mut Vec<f64>, i: usize, h: f64| {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(x);
        x[i] = orig - h;
        let fm = f(x);
        x[i] = orig;
        (fp - fm) / (2.0 * h)
    };
    for &i in entries {
        let a = analytic[i];
        let n = central(&mut x, i, cfg.step);
        let mut err = relative_error(a, n, cfg.floor);
        if err > cfg.tolerance {
            let n_half = central(&mut x, i, cfg.step / 2.0);
            if relative_error(n, n_half, cfg.floor) > cfg.tolerance {
                report.skipped += 1;
                continue;
            }
            err = err.min(relative_error(a, n_half, cfg.floor));
        }
        report.checked += 1;
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst_index = Some(i);
            report.worst_analytic = a;
            report.worst_numeric = n;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::activation::relu;
    use crate::tensor::Tensor;

    #[test]
    fn linear_op_has_no_error() {
        let point = [0.3, -1.2, 4.0];
        let r = grad_check(
            |v| v.iter().map(|x| 3.0 * x).sum(),
            &point,
            &[3.0, 3.0, 3.0],
            &GradCheckConfig::f64_default(),
        );
        assert!(r.passed());
        assert!(r.max_rel_error < 1e-9, "{r}");
    }

    #[test]
    fn wrong_gradient_fails() {
        let r = grad_check(
            |v| v[0] * v[0],
            &[2.0],
            &[3.0],
            &GradCheckConfig::f64_default(),
        );
        assert!(!r.passed());
        assert_eq!(r.worst_index, Some(0));
    }

    #[test]
    fn relu_away_from_kink() {
        let xs: Vec<f64> = (0..40).map(|i| -1.0 + 0.05 * i as f64 + 0.013).collect();
        assert!(xs.iter().all(|v| v.abs() > 1e-2));
        let x = Tensor::from_vec((1, 1, 5, 8), xs.clone()).unwrap();
        let (_, vjp) = relu(&x);
        let g = vjp.backward(&Tensor::full(x.shape(), 1.0));
        let r = grad_check(
            |v| v.iter().map(|&a| a.max(0.0)).sum(),
            &xs,
            g.data(),
            &GradCheckConfig::f64_default(),
        );
        assert!(r.passed(), "{r}");
        assert_eq!(r.skipped, 0);
    }

    #[test]
    fn kink_is_skipped_not_scored() {
        // max(x, 0) evaluated just right of the kink: the step straddles it.
        let r = grad_check(
            |v| v[0].max(0.0) + v[1] * 2.0,
            &[3e-7, 1.0],
            &[1.0, 2.0],
            &GradCheckConfig {
                max_skip_fraction: 0.5,
                ..GradCheckConfig::f64_default()
            },
        );
        assert_eq!((r.checked, r.skipped), (1, 1));
        assert!(r.passed(), "{r}");
    }
}
