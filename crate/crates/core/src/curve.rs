//! Uncertainty Characteristics Curves.
//!
//! A curve is the set of operating points `(k, x(k), y(k))` obtained by
//! sweeping one common scale `k` over both bands. Every record has a
//! critical scale at which it becomes captured; the curve only changes
//! shape at those scales, so one point per distinct finite critical scale
//! (plus the `k = 0` anchor) describes it completely. On excess/deficit
//! axes the excess of a captured record can also kink between critical
//! scales when its bands are asymmetric; those kinks are added as extra
//! points so that consecutive points are joined by straight segments.
//!
//! Areas:
//! * miss-rate curves are step functions; the area is the left-endpoint
//!   rectangle sum, which equals the mean of the x-metric over the records'
//!   critical scales.
//! * deficit curves are continuous polylines; the area is the exact
//!   trapezoid sum over the points.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Normalization};
use crate::metrics::ScaledView;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("unsupported axis pair {0}; use bandwidth:miss_rate, excess:deficit or excess:miss_rate")]
    UnsupportedAxes(String),
    #[error("every record has an infinite critical scale (zero band with nonzero error)")]
    AllScalesInfinite,
    #[error("{0} record(s) have an infinite critical scale; exclude them explicitly to compute an area")]
    InfiniteScalesPresent(usize),
    #[error("invalid y range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("curves were built on different ground truth / predictions")]
    MismatchedBase,
    #[error("curves use different axes ({0} vs {1})")]
    MismatchedAxes(AxisPair, AxisPair),
    #[error("reference area is zero")]
    ZeroReferenceArea,
    #[error("miss rate {target} is not reachable (floor {floor})")]
    TargetUnreachable { target: f64, floor: f64 },
    #[error("operation requires the miss-rate y-axis, curve uses {0}")]
    WrongAxis(AxisPair),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XMetric {
    Bandwidth,
    Excess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YMetric {
    MissRate,
    Deficit,
}

impl XMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            XMetric::Bandwidth => "bandwidth",
            XMetric::Excess => "excess",
        }
    }

    pub fn eval(self, view: &ScaledView<'_>) -> f64 {
        match self {
            XMetric::Bandwidth => view.bandwidth(),
            XMetric::Excess => view.excess(),
        }
    }
}

impl YMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            YMetric::MissRate => "miss_rate",
            YMetric::Deficit => "deficit",
        }
    }

    pub fn eval(self, view: &ScaledView<'_>) -> f64 {
        match self {
            YMetric::MissRate => view.miss_rate(),
            YMetric::Deficit => view.deficit(),
        }
    }
}

/// A supported `(x, y)` metric pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxisPair {
    x: XMetric,
    y: YMetric,
}

impl AxisPair {
    pub const BANDWIDTH_MISS_RATE: AxisPair = AxisPair {
        x: XMetric::Bandwidth,
        y: YMetric::MissRate,
    };
    pub const EXCESS_DEFICIT: AxisPair = AxisPair {
        x: XMetric::Excess,
        y: YMetric::Deficit,
    };
    pub const EXCESS_MISS_RATE: AxisPair = AxisPair {
        x: XMetric::Excess,
        y: YMetric::MissRate,
    };

    pub fn new(x: XMetric, y: YMetric) -> Result<Self, CurveError> {
        match (x, y) {
            (XMetric::Bandwidth, YMetric::Deficit) => {
                Err(CurveError::UnsupportedAxes("bandwidth:deficit".into()))
            }
            _ => Ok(Self { x, y }),
        }
    }

    pub fn x(self) -> XMetric {
        self.x
    }

    pub fn y(self) -> YMetric {
        self.y
    }

    fn is_step(self) -> bool {
        self.y == YMetric::MissRate
    }
}

impl Default for AxisPair {
    fn default() -> Self {
        Self::BANDWIDTH_MISS_RATE
    }
}

impl fmt::Display for AxisPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.x.as_str(), self.y.as_str())
    }
}

impl FromStr for AxisPair {
    type Err = CurveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CurveError::UnsupportedAxes(s.to_string());
        let (xs, ys) = s.split_once(':').ok_or_else(bad)?;
        let x = match xs.trim() {
            "bandwidth" => XMetric::Bandwidth,
            "excess" => XMetric::Excess,
            _ => return Err(bad()),
        };
        let y = match ys.trim() {
            "miss_rate" | "missrate" => YMetric::MissRate,
            "deficit" => YMetric::Deficit,
            _ => return Err(bad()),
        };
        AxisPair::new(x, y)
    }
}

impl Serialize for AxisPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AxisPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub k: f64,
    pub x: f64,
    pub y: f64,
}

impl OperatingPoint {
    /// Linear cost `c * x + (1 - c) * y`.
    pub fn cost(&self, c: f64) -> f64 {
        c * self.x + (1.0 - c) * self.y
    }
}

/// Per-record critical scales, in record order.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalScaleSet {
    scales: Vec<f64>,
}

impl CriticalScaleSet {
    pub fn as_slice(&self) -> &[f64] {
        &self.scales
    }

    pub fn n_infinite(&self) -> usize {
        self.scales.iter().filter(|k| k.is_infinite()).count()
    }

    pub fn max_finite(&self) -> Option<f64> {
        self.scales
            .iter()
            .copied()
            .filter(|k| k.is_finite())
            .fold(None, |m, k| Some(m.map_or(k, |m: f64| m.max(k))))
    }

    /// Distinct finite scales in ascending order.
    pub fn distinct_finite(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.scales.iter().copied().filter(|k| k.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

pub fn critical_scales(ds: &Dataset) -> CriticalScaleSet {
    CriticalScaleSet {
        scales: ds.critical_scales(),
    }
}

/// How records with an infinite critical scale are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InfinitePolicy {
    /// Keep them; they form a miss-rate floor and make the area undefined.
    #[default]
    Keep,
    /// Drop them before building the curve and remember how many.
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UccCurve {
    pub label: String,
    pub axes: AxisPair,
    /// Records the curve was built on.
    pub n: usize,
    pub n_infinite: usize,
    pub excluded_infinite: bool,
    pub normalization: Normalization,
    pub points: Vec<OperatingPoint>,
    #[serde(skip)]
    base_digest: u64,
}

impl UccCurve {
    /// The y-value past the last point (`n_infinite / n` on a kept floor).
    pub fn y_floor(&self) -> f64 {
        self.points.last().map(|p| p.y).unwrap_or(0.0)
    }

    fn area_defined(&self) -> Result<(), CurveError> {
        if self.n_infinite > 0 && !self.excluded_infinite {
            return Err(CurveError::InfiniteScalesPresent(self.n_infinite));
        }
        Ok(())
    }

    /// CSV block: comment line, `k,x,y` header, one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# axes={} n={} n_infinite={}\nk,x,y\n",
            self.axes, self.n, self.n_infinite
        );
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.k, p.x, p.y));
        }
        out
    }
}

fn digest(ds: &Dataset) -> u64 {
    let mut h = DefaultHasher::new();
    for r in ds.records() {
        r.y.to_bits().hash(&mut h);
        r.y_hat.to_bits().hash(&mut h);
    }
    h.finish()
}

pub fn build_ucc(ds: &Dataset, axes: AxisPair) -> Result<UccCurve, CurveError> {
    build_ucc_with(ds, axes, InfinitePolicy::Keep)
}

pub fn build_ucc_with(
    ds: &Dataset,
    axes: AxisPair,
    policy: InfinitePolicy,
) -> Result<UccCurve, CurveError> {
    let (kept, excluded) = match policy {
        InfinitePolicy::Keep => (None, 0),
        InfinitePolicy::Exclude => {
            let (kept, dropped) = ds.retain_finite_scales();
            (Some(kept.ok_or(CurveError::AllScalesInfinite)?), dropped)
        }
    };
    let ds = kept.as_ref().unwrap_or(ds);
    let scales = critical_scales(ds);
    let distinct = scales.distinct_finite();
    if distinct.is_empty() {
        return Err(CurveError::AllScalesInfinite);
    }

    let points = if axes == AxisPair::BANDWIDTH_MISS_RATE {
        bandwidth_miss_rate_points(ds, &scales)
    } else {
        let mut ks = distinct;
        if ks[0] != 0.0 {
            ks.insert(0, 0.0);
        }
        if axes == AxisPair::EXCESS_DEFICIT {
            add_excess_kinks(ds, &mut ks);
        }
        ks.par_iter()
            .map(|&k| {
                let view = ScaledView::new(ds, k).expect("finite nonnegative scale");
                OperatingPoint {
                    k,
                    x: axes.x.eval(&view),
                    y: axes.y.eval(&view),
                }
            })
            .collect()
    };

    Ok(UccCurve {
        label: ds.name().to_string(),
        axes,
        n: ds.len(),
        n_infinite: if policy == InfinitePolicy::Exclude {
            excluded
        } else {
            scales.n_infinite()
        },
        excluded_infinite: policy == InfinitePolicy::Exclude,
        normalization: ds.normalization(),
        points,
        base_digest: digest(ds),
    })
}

/// Sort-based construction: bandwidth is `k * mean_half_width` and the miss
/// rate at `k` is the fraction of scales strictly above `k`.
fn bandwidth_miss_rate_points(ds: &Dataset, scales: &CriticalScaleSet) -> Vec<OperatingPoint> {
    let n = ds.len();
    let mut sorted = scales.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let hw = ds.mean_half_width();

    let mut points = Vec::new();
    if sorted[0] != 0.0 {
        points.push(OperatingPoint {
            k: 0.0,
            x: 0.0,
            y: 1.0,
        });
    }
    let mut i = 0;
    while i < n && sorted[i].is_finite() {
        let k = sorted[i];
        // ties collapse: advance past every record sharing this scale
        let mut j = i + 1;
        while j < n && sorted[j] == k {
            j += 1;
        }
        points.push(OperatingPoint {
            k,
            x: k * hw,
            y: (n - j) as f64 / n as f64,
        });
        i = j;
    }
    points
}

/// Scales between critical scales where a captured record's nearer bound
/// switches sides, making its excess bend.
fn add_excess_kinks(ds: &Dataset, ks: &mut Vec<f64>) {
    let k_max = *ks.last().expect("nonempty");
    let mut kinks: Vec<f64> = ds
        .records()
        .iter()
        .filter_map(|r| {
            let z = r.error();
            let kink = if z > 0.0 && r.z_upper > r.z_lower {
                2.0 * z / (r.z_upper - r.z_lower)
            } else if z < 0.0 && r.z_lower > r.z_upper {
                -2.0 * z / (r.z_lower - r.z_upper)
            } else {
                return None;
            };
            (kink.is_finite() && kink > 0.0 && kink < k_max).then_some(kink)
        })
        .collect();
    if kinks.is_empty() {
        return;
    }
    ks.append(&mut kinks);
    ks.sort_by(f64::total_cmp);
    ks.dedup();
}

/// Canonical area under the curve.
///
/// For miss-rate curves this is `sum_j y_{j-1} (x_j - x_{j-1})`, identical
/// to the mean x-metric over the records' critical scales. For deficit
/// curves it is the trapezoid sum over the polyline.
pub fn auucc(curve: &UccCurve) -> Result<f64, CurveError> {
    curve.area_defined()?;
    if curve.axes.is_step() {
        Ok(riemann(curve, Endpoint::Left))
    } else {
        Ok(curve
            .points
            .windows(2)
            .map(|w| 0.5 * (w[0].y + w[1].y) * (w[1].x - w[0].x))
            .sum())
    }
}

/// Which end of each x-interval supplies the height in a rectangle sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

/// Rectangle-rule area over consecutive points. `Right` uses the
/// post-capture height of each interval and underestimates a step curve by
/// `O(1/N)`.
pub fn auucc_riemann(curve: &UccCurve, endpoint: Endpoint) -> Result<f64, CurveError> {
    curve.area_defined()?;
    Ok(riemann(curve, endpoint))
}

fn riemann(curve: &UccCurve, endpoint: Endpoint) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| {
            let h = match endpoint {
                Endpoint::Left => w[0].y,
                Endpoint::Right => w[1].y,
            };
            h * (w[1].x - w[0].x)
        })
        .sum()
}

/// Area of the part of the curve whose y-value lies in `[y_lo, y_hi]`.
///
/// Step curves are integrated as-is: a flat step counts iff its height is
/// in range. Polylines are clipped to the band.
pub fn partial_auucc(curve: &UccCurve, y_lo: f64, y_hi: f64) -> Result<f64, CurveError> {
    let max_hi = if curve.axes.is_step() { 1.0 } else { f64::INFINITY };
    if !(y_lo >= 0.0 && y_lo < y_hi && y_hi <= max_hi) {
        return Err(CurveError::InvalidRange { lo: y_lo, hi: y_hi });
    }
    let floor = curve.y_floor();
    if curve.n_infinite > 0 && !curve.excluded_infinite && floor > 0.0 && floor >= y_lo && floor <= y_hi {
        return Err(CurveError::InfiniteScalesPresent(curve.n_infinite));
    }
    let in_range = |y: f64| y >= y_lo && y <= y_hi;
    let area = if curve.axes.is_step() {
        curve
            .points
            .windows(2)
            .filter(|w| in_range(w[0].y))
            .map(|w| w[0].y * (w[1].x - w[0].x))
            .sum()
    } else {
        curve
            .points
            .windows(2)
            .map(|w| clipped_trapezoid(w[0], w[1], y_lo, y_hi))
            .sum()
    };
    Ok(area)
}

fn clipped_trapezoid(a: OperatingPoint, b: OperatingPoint, lo: f64, hi: f64) -> f64 {
    if a.y == b.y {
        return if a.y >= lo && a.y <= hi { a.y * (b.x - a.x) } else { 0.0 };
    }
    // y falls from a.y to b.y; t parametrizes the segment
    let t_at = |level: f64| (a.y - level) / (a.y - b.y);
    let t0 = t_at(hi).max(0.0);
    let t1 = t_at(lo).min(1.0);
    if t1 <= t0 {
        return 0.0;
    }
    let lerp = |t: f64, u: f64, v: f64| {
        if t == 0.0 {
            u
        } else if t == 1.0 {
            v
        } else {
            u + t * (v - u)
        }
    };
    let (x0, y0) = (lerp(t0, a.x, b.x), lerp(t0, a.y, b.y));
    let (x1, y1) = (lerp(t1, a.x, b.x), lerp(t1, a.y, b.y));
    0.5 * (y0 + y1) * (x1 - x0)
}

/// Percent reduction of `model_area` relative to `reference_area`.
pub fn gain_from_areas(model_area: f64, reference_area: f64) -> Result<f64, CurveError> {
    if reference_area == 0.0 {
        return Err(CurveError::ZeroReferenceArea);
    }
    Ok((reference_area - model_area) / reference_area * 100.0)
}

fn check_comparable(model: &UccCurve, reference: &UccCurve) -> Result<(), CurveError> {
    if model.axes != reference.axes {
        return Err(CurveError::MismatchedAxes(model.axes, reference.axes));
    }
    if model.n != reference.n || model.base_digest != reference.base_digest {
        return Err(CurveError::MismatchedBase);
    }
    Ok(())
}

/// AUUCC gain in percent; positive when the model's area is smaller.
pub fn auucc_gain(model: &UccCurve, reference: &UccCurve) -> Result<f64, CurveError> {
    check_comparable(model, reference)?;
    gain_from_areas(auucc(model)?, auucc(reference)?)
}

/// Gain computed on partial areas over `[y_lo, y_hi]`.
pub fn partial_auucc_gain(
    model: &UccCurve,
    reference: &UccCurve,
    y_lo: f64,
    y_hi: f64,
) -> Result<f64, CurveError> {
    check_comparable(model, reference)?;
    gain_from_areas(
        partial_auucc(model, y_lo, y_hi)?,
        partial_auucc(reference, y_lo, y_hi)?,
    )
}

pub fn cost(point: &OperatingPoint, c: f64) -> f64 {
    point.cost(c)
}

/// Curve point with the smallest linear cost; ties go to the smaller `k`.
pub fn optimal_operating_point(curve: &UccCurve, c: f64) -> (OperatingPoint, f64) {
    let mut best = curve.points[0];
    let mut best_cost = best.cost(c);
    for p in &curve.points[1..] {
        let cp = p.cost(c);
        if cp < best_cost {
            best = *p;
            best_cost = cp;
        }
    }
    (best, best_cost)
}

/// Smallest-`k` point whose miss rate does not exceed `target`.
pub fn op_at_miss_rate(curve: &UccCurve, target: f64) -> Result<OperatingPoint, CurveError> {
    if curve.axes.y != YMetric::MissRate {
        return Err(CurveError::WrongAxis(curve.axes));
    }
    curve
        .points
        .iter()
        .find(|p| p.y <= target)
        .copied()
        .ok_or(CurveError::TargetUnreachable {
            target,
            floor: curve.y_floor(),
        })
}
