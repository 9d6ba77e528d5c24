//! Reference band constructions sharing a dataset's `(y, y_hat)`.
//!
//! * constant: every band is 1.0. Any positive constant yields the same
//!   curve, because the scale sweep absorbs it.
//! * random: symmetric bands drawn uniformly from
//!   `[sigma_yhat / 3, 3 sigma_yhat]`, a deliberately uninformative interval.
//! * epsilon-perfect: `|y - y_hat| + u` with `u ~ U(0, epsilon]`, a near
//!   oracle that captures every record at `k = 1` with excess at most epsilon.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("standard deviation of the predictions is zero")]
    ZeroVariance,
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReferenceSpec {
    Constant,
    Random { seed: u64 },
    EpsilonPerfect { epsilon: f64, seed: u64 },
}

impl ReferenceSpec {
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset, ReferenceError> {
        match *self {
            ReferenceSpec::Constant => Ok(constant_band(ds)),
            ReferenceSpec::Random { seed } => random_band(ds, seed),
            ReferenceSpec::EpsilonPerfect { epsilon, seed } => epsilon_perfect_band(ds, epsilon, seed),
        }
    }
}

pub const CONSTANT_BAND: f64 = 1.0;

pub fn constant_band(ds: &Dataset) -> Dataset {
    let ones = vec![CONSTANT_BAND; ds.len()];
    ds.with_bands(&ones, &ones)
        .expect("constant bands are valid")
        .renamed(format!("{} (constant)", ds.name()))
}

pub fn random_band(ds: &Dataset, seed: u64) -> Result<Dataset, ReferenceError> {
    let s = ds.prediction_std();
    if !s.is_finite() || s <= 0.0 {
        return Err(ReferenceError::ZeroVariance);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bands: Vec<f64> = (0..ds.len()).map(|_| rng.random_range(s / 3.0..=3.0 * s)).collect();
    Ok(ds.with_bands(&bands, &bands)?.renamed(format!("{} (random)", ds.name())))
}

pub fn epsilon_perfect_band(ds: &Dataset, epsilon: f64, seed: u64) -> Result<Dataset, ReferenceError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(ReferenceError::InvalidEpsilon(epsilon));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bands: Vec<f64> = ds
        .records()
        .iter()
        .map(|r| {
            // random::<f64>() is in [0, 1); flip to (0, 1]
            let u = epsilon * (1.0 - rng.random::<f64>());
            r.error().abs() + u
        })
        .collect();
    Ok(ds
        .with_bands(&bands, &bands)?
        .renamed(format!("{} (epsilon-perfect)", ds.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{auucc, build_ucc, AxisPair};
    use crate::data::PredictionRecord as R;
    use crate::metrics::ScaledView;

    fn t1() -> Dataset {
        Dataset::validate(vec![
            R::new(1.0, 0.0, 1.0, 1.0),
            R::new(2.0, 0.0, 1.0, 1.0),
            R::new(-0.5, 0.0, 0.5, 0.5),
            R::new(0.0, 0.0, 2.0, 2.0),
        ])
        .unwrap()
    }

    fn spread() -> Dataset {
        let recs = (0..50)
            .map(|i| {
                let x = i as f64 / 5.0;
                R::new(x.sin() * x + 0.3 * (i % 7) as f64 - 1.0, x.sin() * x, 0.5, 0.5)
            })
            .collect();
        Dataset::validate(recs).unwrap()
    }

    #[test]
    fn constant_t1() {
        let c = constant_band(&t1());
        assert!(c.records().iter().all(|r| r.z_lower == 1.0 && r.z_upper == 1.0));
        let curve = build_ucc(&c, AxisPair::BANDWIDTH_MISS_RATE).unwrap();
        let pts: Vec<_> = curve.points.iter().map(|p| (p.k, p.x, p.y)).collect();
        assert_eq!(pts, vec![(0.0, 0.0, 0.75), (0.5, 0.5, 0.5), (1.0, 1.0, 0.25), (2.0, 2.0, 0.0)]);
    }

    #[test]
    fn constant_idempotent() {
        let once = constant_band(&t1());
        let twice = constant_band(&once);
        assert_eq!(once.records(), twice.records());
    }

    #[test]
    fn constant_gain_against_itself() {
        let c = build_ucc(&constant_band(&t1()), AxisPair::BANDWIDTH_MISS_RATE).unwrap();
        assert_eq!(crate::curve::auucc_gain(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn random_deterministic_and_bounded() {
        let ds = spread();
        let a = random_band(&ds, 11).unwrap();
        let b = random_band(&ds, 11).unwrap();
        assert_eq!(a.records(), b.records());
        let c = random_band(&ds, 12).unwrap();
        assert_ne!(a.records(), c.records());

        let s = ds.prediction_std();
        for r in a.records() {
            assert!(r.z_lower >= s / 3.0 && r.z_lower <= 3.0 * s);
            assert_eq!(r.z_lower, r.z_upper);
        }
        assert!(a.shares_base_with(&ds));
    }

    #[test]
    fn random_needs_prediction_variance() {
        assert_eq!(random_band(&t1(), 0).unwrap_err(), ReferenceError::ZeroVariance);
    }

    #[test]
    fn epsilon_perfect_captures_at_one() {
        let ds = spread();
        let eps = 0.05;
        let e = epsilon_perfect_band(&ds, eps, 3).unwrap();
        let v = ScaledView::new(&e, 1.0).unwrap();
        assert_eq!(v.miss_rate(), 0.0);
        assert!(v.excess() <= eps);
        assert!(e.shares_base_with(&ds));
        // every critical scale lies in (0, 1]
        assert!(e.critical_scales().iter().all(|&k| k <= 1.0));
        assert!(epsilon_perfect_band(&ds, 0.0, 3).is_err());
    }

    #[test]
    fn epsilon_perfect_area_shrinks_with_epsilon() {
        let ds = spread();
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01, 0.001] {
            let e = epsilon_perfect_band(&ds, eps, 5).unwrap();
            let a = auucc(&build_ucc(&e, AxisPair::EXCESS_MISS_RATE).unwrap()).unwrap();
            assert!(a < last, "eps={eps} area={a} last={last}");
            assert!(a <= eps);
            last = a;
        }
    }
}
