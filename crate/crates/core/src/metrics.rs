//! Empirical cost metrics of a dataset whose bands are scaled by `k`.
//!
//! A record counts as captured at scale `k` when `y` lies in the closed
//! interval `[y_hat - k z_lower, y_hat + k z_upper]`. The test is carried out
//! through the record's critical scale (`critical_scale <= k`), which is
//! the same condition without boundary rounding, so metrics evaluated at a
//! critical scale always agree with the curve built from those scales.

use thiserror::Error;

use crate::data::{Dataset, PredictionRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("scale must be finite and nonnegative, got {0}")]
    InvalidScale(f64),
    #[error("bands are asymmetric (first at record {0})")]
    AsymmetricBands(usize),
    #[error("interval score level must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
}

/// The dataset with every band multiplied by `k`, evaluated lazily.
#[derive(Debug, Clone, Copy)]
pub struct ScaledView<'a> {
    base: &'a Dataset,
    k: f64,
}

impl<'a> ScaledView<'a> {
    pub fn new(base: &'a Dataset, k: f64) -> Result<Self, MetricsError> {
        if !k.is_finite() || k < 0.0 {
            return Err(MetricsError::InvalidScale(k));
        }
        Ok(Self { base, k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn base(&self) -> &'a Dataset {
        self.base
    }

    fn n(&self) -> f64 {
        self.base.len() as f64
    }

    fn captured(&self, r: &PredictionRecord) -> bool {
        r.critical_scale() <= self.k
    }

    /// Fraction of records outside their scaled interval.
    pub fn miss_rate(&self) -> f64 {
        let missed = self.base.records().iter().filter(|r| !self.captured(r)).count();
        missed as f64 / self.n()
    }

    /// Half the mean interval width. Exactly `k * bandwidth(1)`.
    pub fn bandwidth(&self) -> f64 {
        self.k * self.base.mean_half_width()
    }

    /// Mean interval width, `2 * bandwidth`.
    pub fn full_width(&self) -> f64 {
        2.0 * self.bandwidth()
    }

    /// Mean slack of the nearer bound over captured records.
    pub fn excess(&self) -> f64 {
        let k = self.k;
        let sum: f64 = self
            .base
            .records()
            .iter()
            .map(|r| {
                if self.captured(r) {
                    let slack_lo = r.y - r.lower_bound(k);
                    let slack_up = r.upper_bound(k) - r.y;
                    slack_lo.min(slack_up).max(0.0)
                } else {
                    0.0
                }
            })
            .sum();
        sum / self.n()
    }

    /// Mean distance to the nearer bound over missed records.
    pub fn deficit(&self) -> f64 {
        let k = self.k;
        let sum: f64 = self
            .base
            .records()
            .iter()
            .map(|r| {
                if self.captured(r) {
                    0.0
                } else {
                    (r.y - r.lower_bound(k)).abs().min((r.y - r.upper_bound(k)).abs())
                }
            })
            .sum();
        sum / self.n()
    }

    /// Interval Score at level `alpha`: width plus `2/alpha` times the
    /// shortfall outside the interval, averaged over records.
    pub fn interval_score(&self, alpha: f64) -> Result<f64, MetricsError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(MetricsError::InvalidAlpha(alpha));
        }
        let k = self.k;
        let sum: f64 = self
            .base
            .records()
            .iter()
            .map(|r| {
                let (l, u) = (r.lower_bound(k), r.upper_bound(k));
                (u - l) + (2.0 / alpha) * (l - r.y).max(0.0) + (2.0 / alpha) * (r.y - u).max(0.0)
            })
            .sum();
        Ok(sum / self.n())
    }
}

/// Mean absolute difference between `|y - y_hat|` and the scaled band.
/// Requires symmetric bands.
pub fn mae_at_scale(ds: &Dataset, k: f64) -> Result<f64, MetricsError> {
    if !k.is_finite() || k < 0.0 {
        return Err(MetricsError::InvalidScale(k));
    }
    if let Some(i) = ds.records().iter().position(|r| !r.is_symmetric()) {
        return Err(MetricsError::AsymmetricBands(i));
    }
    let sum: f64 = ds
        .records()
        .iter()
        .map(|r| (r.error().abs() - k * r.z_upper).abs())
        .sum();
    Ok(sum / ds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PredictionRecord as R;

    fn t1() -> Dataset {
        Dataset::validate(vec![
            R::new(1.0, 0.0, 1.0, 1.0),
            R::new(2.0, 0.0, 1.0, 1.0),
            R::new(-0.5, 0.0, 0.5, 0.5),
            R::new(0.0, 0.0, 2.0, 2.0),
        ])
        .unwrap()
    }

    fn view(ds: &Dataset, k: f64) -> ScaledView<'_> {
        ScaledView::new(ds, k).unwrap()
    }

    #[test]
    fn miss_rate_t1() {
        let ds = t1();
        assert_eq!(view(&ds, 1.0).miss_rate(), 0.25);
        assert_eq!(view(&ds, 0.0).miss_rate(), 0.75);
        assert_eq!(view(&ds, 1e9).miss_rate(), 0.0);
    }

    #[test]
    fn bandwidth_t1() {
        let ds = t1();
        assert_eq!(view(&ds, 1.0).bandwidth(), 1.125);
        assert_eq!(view(&ds, 2.0).bandwidth(), 2.25);
        let zero = Dataset::validate(vec![R::new(1.0, 0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(view(&zero, 3.0).bandwidth(), 0.0);
    }

    #[test]
    fn excess_t1() {
        let ds = t1();
        assert_eq!(view(&ds, 1.0).excess(), 0.5);
        // every record missed
        let far = Dataset::validate(vec![R::new(5.0, 0.0, 1.0, 1.0), R::new(-5.0, 0.0, 1.0, 1.0)]).unwrap();
        assert_eq!(view(&far, 1.0).excess(), 0.0);
    }

    #[test]
    fn excess_epsilon_perfect() {
        let eps = 0.01;
        let ys = [0.3, -1.2, 2.0, 0.0];
        let recs = ys
            .iter()
            .map(|&y| R::new(y, 0.1, (y - 0.1f64).abs() + eps, (y - 0.1f64).abs() + eps))
            .collect();
        let ds = Dataset::validate(recs).unwrap();
        let v = view(&ds, 1.0);
        assert_eq!(v.miss_rate(), 0.0);
        assert!(v.excess() <= eps + 1e-15);
    }

    #[test]
    fn deficit_t1() {
        let ds = t1();
        assert_eq!(view(&ds, 1.0).deficit(), 0.25);
        assert_eq!(view(&ds, 0.0).deficit(), 0.875);
        assert_eq!(view(&ds, 2.0).deficit(), 0.0);
    }

    #[test]
    fn mae_t1() {
        let ds = t1();
        assert_eq!(mae_at_scale(&ds, 1.0).unwrap(), 0.75);
        let matched = Dataset::validate(vec![R::new(1.0, 0.0, 1.0, 1.0), R::new(-2.0, 0.0, 2.0, 2.0)]).unwrap();
        assert_eq!(mae_at_scale(&matched, 1.0).unwrap(), 0.0);
        let asym = Dataset::validate(vec![R::new(1.0, 0.0, 1.0, 2.0)]).unwrap();
        assert_eq!(mae_at_scale(&asym, 1.0).unwrap_err(), MetricsError::AsymmetricBands(0));
    }

    #[test]
    fn interval_score_t1() {
        let ds = t1();
        // Independent per-record sum: widths {2,2,1,4}; only y=2 exceeds u=1 by 1.
        let per_record = [2.0, 2.0 + 2.0 * 1.0, 1.0, 4.0];
        let expected: f64 = per_record.iter().sum::<f64>() / 4.0;
        assert_eq!(expected, 2.75);
        assert_eq!(view(&ds, 1.0).interval_score(1.0).unwrap(), expected);
    }

    #[test]
    fn interval_score_without_misses_is_width() {
        let ds = t1();
        let v = view(&ds, 2.0);
        assert_eq!(v.interval_score(0.05).unwrap(), v.full_width());
    }

    #[test]
    fn interval_score_diverges_with_small_alpha() {
        let ds = t1();
        let v = view(&ds, 1.0);
        let coarse = v.interval_score(0.1).unwrap();
        let fine = v.interval_score(1e-9).unwrap();
        assert!(fine > 1e8 && fine > coarse);
        assert!(v.interval_score(0.0).is_err());
    }

    #[test]
    fn invalid_scale_rejected() {
        let ds = t1();
        assert!(ScaledView::new(&ds, -1.0).is_err());
        assert!(ScaledView::new(&ds, f64::INFINITY).is_err());
        assert!(ScaledView::new(&ds, f64::NAN).is_err());
    }
}
