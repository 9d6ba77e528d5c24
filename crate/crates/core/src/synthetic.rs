//! Seeded synthetic fixtures and the dense-grid area oracle.
//!
//! Two tasks are provided:
//!
//! * `xsinx`: training pairs `y = x sin x + eta` with `x ~ U(0, 20)` and
//!   per-sample noise `eta ~ N(0, s_i^2)`, `s_i = noise_scale + noise_spread * U(0, 1)`;
//!   test targets are the noise-free function on an equidistant grid over
//!   `[0, 20]`. Nearest-neighbour stand-ins play the role of trained
//!   interval predictors.
//! * `heteroskedastic`: `y = x sin x + sigma(x) eps` with
//!   `sigma(x) = noise_scale * (1 + (noise_spread - 1) x / 20)`, so sigma
//!   grows linearly by the factor `noise_spread` over the range. The
//!   dataset carries the oracle prediction `x sin x` and oracle bands
//!   `sigma(x)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{AxisPair, XMetric, YMetric};
use crate::data::{DataError, Dataset, PredictionRecord};

pub const X_RANGE: (f64, f64) = (0.0, 20.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntheticError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("grid size must be at least 10, got {0}")]
    GridTooSmall(usize),
    #[error("{0} record(s) have an infinite critical scale")]
    InfiniteScalesPresent(usize),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Xsinx,
    Heteroskedastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_train: usize,
    pub n_test: usize,
    pub noise_scale: f64,
    pub noise_spread: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Defaults for the x sin x task: 4000 training points, 1000 test points.
    pub fn xsinx(seed: u64) -> Self {
        Self {
            kind: SyntheticKind::Xsinx,
            n_train: 4000,
            n_test: 1000,
            noise_scale: 1.5,
            noise_spread: 1.0,
            seed,
        }
    }

    /// `n` test records with sigma rising from 0.5 to 2.5 across the range.
    pub fn heteroskedastic(n: usize, seed: u64) -> Self {
        Self {
            kind: SyntheticKind::Heteroskedastic,
            n_train: 0,
            n_test: n,
            noise_scale: 0.5,
            noise_spread: 5.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: &str| Err(SyntheticError::InvalidSpec(m.to_string()));
        if self.n_test < 1 {
            return bad("n_test must be at least 1");
        }
        if !self.noise_scale.is_finite() || self.noise_scale <= 0.0 {
            return bad("noise_scale must be positive");
        }
        match self.kind {
            SyntheticKind::Xsinx => {
                if self.n_train < 1 {
                    return bad("n_train must be at least 1");
                }
                if !self.noise_spread.is_finite() || self.noise_spread < 0.0 {
                    return bad("noise_spread must be nonnegative");
                }
            }
            SyntheticKind::Heteroskedastic => {
                if !self.noise_spread.is_finite() || self.noise_spread < 1.0 {
                    return bad("noise_spread (sigma max/min ratio) must be >= 1");
                }
            }
        }
        Ok(())
    }

    /// Human-readable description of the generating process, one line each.
    pub fn describe(&self) -> Vec<String> {
        match self.kind {
            SyntheticKind::Xsinx => vec![
                "task=xsinx x~U(0,20) f(x)=x*sin(x)".to_string(),
                format!(
                    "train noise sd_i = {} + {} * U(0,1); test = noise-free f on {} equidistant points",
                    self.noise_scale, self.noise_spread, self.n_test
                ),
                format!("n_train={} seed={}", self.n_train, self.seed),
            ],
            SyntheticKind::Heteroskedastic => vec![
                "task=heteroskedastic x~U(0,20) f(x)=x*sin(x) y=f(x)+sigma(x)*N(0,1)".to_string(),
                format!(
                    "sigma(x) = {} * (1 + {} * x / 20)",
                    self.noise_scale,
                    self.noise_spread - 1.0
                ),
                format!("n={} seed={}", self.n_test, self.seed),
            ],
        }
    }
}

pub fn xsinx(x: f64) -> f64 {
    x * x.sin()
}

/// Noisy training pairs and the noise-free equidistant test set.
#[derive(Debug, Clone, PartialEq)]
pub struct XsinxSample {
    pub train: Vec<(f64, f64)>,
    pub test_x: Vec<f64>,
    pub test_y: Vec<f64>,
}

pub fn gen_xsinx(spec: &SyntheticSpec) -> Result<XsinxSample, SyntheticError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = X_RANGE;
    let train = (0..spec.n_train)
        .map(|_| {
            let x = rng.random_range(lo..hi);
            let sd = spec.noise_scale + spec.noise_spread * rng.random::<f64>();
            let eta: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
            (x, xsinx(x) + eta)
        })
        .collect();
    let test_x: Vec<f64> = if spec.n_test == 1 {
        vec![lo]
    } else {
        let step = (hi - lo) / (spec.n_test - 1) as f64;
        (0..spec.n_test).map(|i| lo + step * i as f64).collect()
    };
    let test_y = test_x.iter().map(|&x| xsinx(x)).collect();
    Ok(XsinxSample { train, test_x, test_y })
}

/// Nearest-neighbour stand-ins for trained interval predictors. Bands are
/// the 5%/95% quantile spread of the neighbours' targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandIn {
    /// Local 5%/95% quantiles over a narrow neighbourhood.
    Tuned,
    /// The same quantiles over a neighbourhood twenty times wider.
    Weak,
}

impl StandIn {
    fn neighbours(self, n_train: usize) -> usize {
        let tuned = (n_train / 100).max(5).min(n_train);
        match self {
            StandIn::Tuned => tuned,
            StandIn::Weak => (tuned * 20).min(n_train),
        }
    }
}

/// Test-set dataset for the x sin x task. The point prediction is always
/// the tuned neighbourhood mean; `bands` selects which neighbourhood
/// supplies the quantile bands.
pub fn xsinx_dataset(sample: &XsinxSample, bands: StandIn) -> Result<Dataset, SyntheticError> {
    let mut train = sample.train.clone();
    train.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k_mean = StandIn::Tuned.neighbours(train.len());
    let k_band = bands.neighbours(train.len());

    let records = sample
        .test_x
        .iter()
        .zip(&sample.test_y)
        .map(|(&x, &y)| {
            let near = nearest(&train, x, k_mean);
            let y_hat = near.iter().sum::<f64>() / near.len() as f64;
            let mut wide = nearest(&train, x, k_band);
            wide.sort_by(f64::total_cmp);
            // spread of the neighbourhood around its own median, so the
            // bands stay positive even where the mean is off-centre
            let med = quantile_sorted(&wide, 0.5);
            let z_lower = med - quantile_sorted(&wide, 0.05);
            let z_upper = quantile_sorted(&wide, 0.95) - med;
            PredictionRecord::new(y, y_hat, z_lower, z_upper)
        })
        .collect();
    let name = match bands {
        StandIn::Tuned => "xsinx-tuned",
        StandIn::Weak => "xsinx-weak",
    };
    Ok(Dataset::with_name(name, records)?)
}

/// Targets of the `k` training points closest in x to `x` (sorted input).
fn nearest(train: &[(f64, f64)], x: f64, k: usize) -> Vec<f64> {
    let pos = train.partition_point(|p| p.0 < x);
    let (mut left, mut right) = (pos, pos);
    let mut out = Vec::with_capacity(k);
    while out.len() < k && (left > 0 || right < train.len()) {
        let take_left = match (left > 0, right < train.len()) {
            (true, true) => x - train[left - 1].0 <= train[right].0 - x,
            (l, _) => l,
        };
        if take_left {
            left -= 1;
            out.push(train[left].1);
        } else {
            out.push(train[right].1);
            right += 1;
        }
    }
    out
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

pub fn heteroskedastic_sigma(spec: &SyntheticSpec, x: f64) -> f64 {
    spec.noise_scale * (1.0 + (spec.noise_spread - 1.0) * (x - X_RANGE.0) / (X_RANGE.1 - X_RANGE.0))
}

/// Dataset with oracle prediction `f(x)` and oracle bands `sigma(x)`.
pub fn gen_heteroskedastic(spec: &SyntheticSpec) -> Result<Dataset, SyntheticError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let records = (0..spec.n_test)
        .map(|_| {
            let x = rng.random_range(X_RANGE.0..X_RANGE.1);
            let sigma = heteroskedastic_sigma(spec, x);
            let f = xsinx(x);
            let y = f + sigma * std_normal.sample(&mut rng);
            PredictionRecord::new(y, f, sigma, sigma)
        })
        .collect();
    Ok(Dataset::with_name("heteroskedastic-oracle", records)?)
}

/// Random instance with positive bands for property checks: errors are
/// standard normal, bands uniform on `[0.2, 2]` (asymmetric unless
/// `symmetric`).
pub fn random_instance(n: usize, seed: u64, symmetric: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n.max(1))
        .map(|_| {
            let y_hat: f64 = rng.random_range(-3.0..3.0);
            let e: f64 = rng.sample(StandardNormal);
            let lo = rng.random_range(0.2..2.0);
            let up = if symmetric { lo } else { rng.random_range(0.2..2.0) };
            PredictionRecord::new(y_hat + e, y_hat, lo, up)
        })
        .collect();
    Dataset::with_name(format!("random-{seed}"), records).expect("valid by construction")
}

/// The four-record worked example used throughout the tests.
pub fn toy_dataset() -> Dataset {
    Dataset::with_name(
        "toy",
        vec![
            PredictionRecord::new(1.0, 0.0, 1.0, 1.0),
            PredictionRecord::new(2.0, 0.0, 1.0, 1.0),
            PredictionRecord::new(-0.5, 0.0, 0.5, 0.5),
            PredictionRecord::new(0.0, 0.0, 2.0, 2.0),
        ],
    )
    .expect("valid toy data")
}

/// Dense-grid area oracle.
///
/// Evaluates both axis metrics straight from their definitions (bounds
/// compared against `y`) at `grid_size` equally spaced scales from 0 to the
/// largest finite critical scale, then integrates `y dx` over the sampled
/// polyline with the trapezoid rule. It shares nothing with the curve
/// builder apart from the scale range.
pub fn brute_force_auucc(ds: &Dataset, axes: AxisPair, grid_size: usize) -> Result<f64, SyntheticError> {
    if grid_size < 10 {
        return Err(SyntheticError::GridTooSmall(grid_size));
    }
    let mut k_max = 0.0f64;
    let mut n_inf = 0;
    for r in ds.records() {
        let z = r.y - r.y_hat;
        let band = if z >= 0.0 { r.z_upper } else { r.z_lower };
        if z == 0.0 {
            continue;
        }
        if band == 0.0 {
            n_inf += 1;
        } else {
            k_max = k_max.max(z.abs() / band);
        }
    }
    if n_inf > 0 {
        return Err(SyntheticError::InfiniteScalesPresent(n_inf));
    }
    if k_max == 0.0 {
        return Ok(0.0);
    }

    let step = k_max / (grid_size - 1) as f64;
    let samples: Vec<(f64, f64)> = (0..grid_size)
        .into_par_iter()
        .map(|j| {
            let k = if j == grid_size - 1 { k_max } else { step * j as f64 };
            oracle_point(ds, axes, k)
        })
        .collect();
    Ok(samples
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum())
}

fn oracle_point(ds: &Dataset, axes: AxisPair, k: f64) -> (f64, f64) {
    let n = ds.len() as f64;
    let (mut width, mut excess, mut missed, mut deficit) = (0.0, 0.0, 0usize, 0.0);
    for r in ds.records() {
        let l = r.y_hat - k * r.z_lower;
        let u = r.y_hat + k * r.z_upper;
        width += u - l;
        if l <= r.y && r.y <= u {
            excess += (r.y - l).min(u - r.y);
        } else {
            missed += 1;
            deficit += (r.y - l).abs().min((r.y - u).abs());
        }
    }
    let x = match axes.x() {
        XMetric::Bandwidth => width / (2.0 * n),
        XMetric::Excess => excess / n,
    };
    let y = match axes.y() {
        YMetric::MissRate => missed as f64 / n,
        YMetric::Deficit => deficit / n,
    };
    (x, y)
}
