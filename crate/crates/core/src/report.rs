//! Versioned JSON evaluation report.
//!
//! Every number in a report is a pure function of the inputs and the flags
//! recorded under `provenance`, so replaying those arguments reproduces the
//! report byte for byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{
    auucc, build_ucc_with, gain_from_areas, op_at_miss_rate, optimal_operating_point,
    partial_auucc, AxisPair, CurveError, InfinitePolicy, UccCurve,
};
use crate::data::{Dataset, Normalization};
use crate::metrics::{mae_at_scale, MetricsError};
use crate::references::constant_band;
use crate::stats::PermutationResult;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub tool: Tool,
    pub provenance: Provenance,
    pub models: Vec<ModelEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairwise: Vec<PairwiseEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

impl Default for Tool {
    fn default() -> Self {
        Self {
            name: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// Subcommand name.
    pub command: String,
    /// Arguments after the subcommand, without `--out`. Replaying
    /// `<tool> <command> <args...>` regenerates the report.
    pub args: Vec<String>,
    pub inputs: Vec<String>,
    pub seed: u64,
    pub normalization: String,
    /// Divisor convention used for standard deviations.
    pub std_convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialEntry {
    pub y_lo: f64,
    pub y_hi: f64,
    pub auucc: f64,
    pub reference_auucc: f64,
    pub gain_vs_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtMissRateEntry {
    pub target: f64,
    pub k: f64,
    pub x: f64,
    pub y: f64,
    pub cost: f64,
    /// Only for symmetric bands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub axes: AxisPair,
    pub n: usize,
    pub n_infinite: usize,
    pub excluded_infinite: bool,
    pub auucc: f64,
    pub reference_auucc: f64,
    /// Percent area reduction relative to constant bands.
    pub gain_vs_constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<PartialEntry>,
    pub cost_c: f64,
    pub optimal_cost: f64,
    pub optimal_k: f64,
    pub optimal_x: f64,
    pub optimal_y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_missrate: Option<AtMissRateEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_divisor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseEntry {
    pub model_a: String,
    pub model_b: String,
    pub axes: AxisPair,
    pub delta_auucc: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

impl PairwiseEntry {
    pub fn new(model_a: &str, model_b: &str, axes: AxisPair, r: &PermutationResult) -> Self {
        Self {
            model_a: model_a.to_string(),
            model_b: model_b.to_string(),
            axes,
            delta_auucc: r.observed_delta,
            p_value: r.p_value,
            n_permutations: r.n_permutations,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub axes: AxisPair,
    pub partial: Option<(f64, f64)>,
    pub cost_c: f64,
    pub at_missrate: Option<f64>,
    pub allow_infinite: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            axes: AxisPair::default(),
            partial: None,
            cost_c: 0.1,
            at_missrate: None,
            allow_infinite: false,
        }
    }
}

/// A model curve together with its constant-band reference curve, both
/// built on the same records.
#[derive(Debug, Clone)]
pub struct CurvePair {
    pub model: UccCurve,
    pub reference: UccCurve,
    /// Records the curves were built on (finite scales only when excluding).
    pub used: Dataset,
}

pub fn curve_pair(ds: &Dataset, axes: AxisPair, allow_infinite: bool) -> Result<CurvePair, CurveError> {
    let policy = if allow_infinite {
        InfinitePolicy::Exclude
    } else {
        InfinitePolicy::Keep
    };
    let model = build_ucc_with(ds, axes, policy)?;
    let used = if allow_infinite {
        ds.retain_finite_scales().0.ok_or(CurveError::AllScalesInfinite)?
    } else {
        ds.clone()
    };
    let reference = build_ucc_with(&constant_band(&used), axes, InfinitePolicy::Keep)?;
    Ok(CurvePair { model, reference, used })
}

pub fn evaluate_model(ds: &Dataset, opts: &EvalOptions) -> Result<ModelEntry, ReportError> {
    let CurvePair { model, reference, used } = curve_pair(ds, opts.axes, opts.allow_infinite)?;
    let area = auucc(&model)?;
    let reference_area = auucc(&reference)?;
    let gain = gain_from_areas(area, reference_area)?;

    let partial = opts
        .partial
        .map(|(lo, hi)| -> Result<PartialEntry, ReportError> {
            let a = partial_auucc(&model, lo, hi)?;
            let r = partial_auucc(&reference, lo, hi)?;
            Ok(PartialEntry {
                y_lo: lo,
                y_hi: hi,
                auucc: a,
                reference_auucc: r,
                gain_vs_constant: gain_from_areas(a, r)?,
            })
        })
        .transpose()?;

    let (opt, opt_cost) = optimal_operating_point(&model, opts.cost_c);

    let at_missrate = opts
        .at_missrate
        .map(|target| -> Result<AtMissRateEntry, ReportError> {
            let p = op_at_miss_rate(&model, target)?;
            let mae = if used.is_symmetric() {
                Some(mae_at_scale(&used, p.k)?)
            } else {
                None
            };
            Ok(AtMissRateEntry {
                target,
                k: p.k,
                x: p.x,
                y: p.y,
                cost: p.cost(opts.cost_c),
                mae,
            })
        })
        .transpose()?;

    Ok(ModelEntry {
        name: ds.name().to_string(),
        axes: opts.axes,
        n: model.n,
        n_infinite: model.n_infinite,
        excluded_infinite: model.excluded_infinite,
        auucc: area,
        reference_auucc: reference_area,
        gain_vs_constant: gain,
        partial,
        cost_c: opts.cost_c,
        optimal_cost: opt_cost,
        optimal_k: opt.k,
        optimal_x: opt.x,
        optimal_y: opt.y,
        at_missrate,
        std_divisor: match ds.normalization() {
            Normalization::None => None,
            Normalization::StdUnits { divisor } => Some(divisor),
        },
    })
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Flat CSV rendering, one row per model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "name,axes,n,n_infinite,auucc,reference_auucc,gain_vs_constant,cost_c,optimal_cost,optimal_k,optimal_x,optimal_y\n",
        );
        for m in &self.models {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                m.name,
                m.axes,
                m.n,
                m.n_infinite,
                m.auucc,
                m.reference_auucc,
                m.gain_vs_constant,
                m.cost_c,
                m.optimal_cost,
                m.optimal_k,
                m.optimal_x,
                m.optimal_y
            ));
        }
        if !self.pairwise.is_empty() {
            out.push_str("\nmodel_a,model_b,axes,delta_auucc,p_value,n_permutations,seed\n");
            for p in &self.pairwise {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    p.model_a, p.model_b, p.axes, p.delta_auucc, p.p_value, p.n_permutations, p.seed
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::toy_dataset;

    fn report(models: Vec<ModelEntry>) -> EvaluationReport {
        EvaluationReport {
            schema_version: SCHEMA_VERSION,
            tool: Tool::default(),
            provenance: Provenance {
                command: "evaluate".into(),
                args: vec!["toy.csv".into()],
                inputs: vec!["toy.csv".into()],
                seed: 0,
                normalization: "none".into(),
                std_convention: "population".into(),
            },
            models,
            pairwise: vec![],
        }
    }

    #[test]
    fn toy_entry() {
        let m = evaluate_model(&toy_dataset(), &EvalOptions::default()).unwrap();
        assert_eq!(m.auucc, 1.125);
        assert_eq!(m.reference_auucc, 0.875);
        assert!((m.gain_vs_constant + 28.571428571428573).abs() < 1e-9);
        assert_eq!(m.n, 4);
        assert!(m.partial.is_none());
    }

    #[test]
    fn toy_excess_deficit_cost() {
        let opts = EvalOptions {
            axes: AxisPair::EXCESS_DEFICIT,
            cost_c: 0.5,
            at_missrate: None,
            ..EvalOptions::default()
        };
        let m = evaluate_model(&toy_dataset(), &opts).unwrap();
        assert!(m.auucc > 0.0);
        let pair = curve_pair(&toy_dataset(), AxisPair::EXCESS_DEFICIT, false).unwrap();
        let at_one = pair.model.points.iter().find(|p| p.k == 1.0).unwrap();
        assert_eq!(2.0 * at_one.cost(0.5), 0.75);
    }

    #[test]
    fn at_missrate_with_mae() {
        let opts = EvalOptions {
            at_missrate: Some(0.25),
            ..EvalOptions::default()
        };
        let m = evaluate_model(&toy_dataset(), &opts).unwrap();
        let a = m.at_missrate.unwrap();
        assert_eq!((a.k, a.y), (1.0, 0.25));
        assert_eq!(a.mae, Some(0.75));
    }

    #[test]
    fn json_round_trip_rejects_unknown_fields() {
        let m = evaluate_model(&toy_dataset(), &EvalOptions::default()).unwrap();
        let r = report(vec![m]);
        let text = r.to_json();
        assert_eq!(EvaluationReport::from_json(&text).unwrap(), r);
        let tampered = text.replacen("\"schema_version\"", "\"extra\": 1, \"schema_version\"", 1);
        assert!(EvaluationReport::from_json(&tampered).is_err());
    }
}
