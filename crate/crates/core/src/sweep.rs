//! One-parameter scans of the closed-form chain rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ParamError;
use crate::rate::{swap_chain, ChainParams, RateError};

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("unknown chain parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid grid: {0}")]
    Grid(&'static str),
}

/// Names accepted by [`sweep`], matching the configuration keys.
pub const PARAMETERS: [&str; 11] = [
    "l0_km",
    "l_att_km",
    "n_levels",
    "fiber_speed_km_per_s",
    "eta_fc",
    "eta_td",
    "chi",
    "mode_count",
    "r0",
    "tau0_s",
    "swap_intrinsic_factor",
];

/// Returns a copy of `base` with `name` set to `value`.
///
/// Integer parameters are rounded to the nearest integer.
pub fn with_parameter(base: &ChainParams, name: &str, value: f64) -> Result<ChainParams, SweepError> {
    let mut p = base.clone();
    let integer = |v: f64| -> Result<u32, SweepError> {
        if !(v.is_finite() && v >= 0.0 && v <= u32::MAX as f64) {
            return Err(ParamError::new("value", v, "not a valid count").into());
        }
        Ok(v.round() as u32)
    };
    match name {
        "l0_km" => p.l0 = value,
        "l_att_km" => p.l_att = value,
        "n_levels" => p.n_levels = integer(value)?,
        "fiber_speed_km_per_s" => p.fiber_speed = value,
        "eta_fc" => p.eta_fc = value,
        "eta_td" => p.eta_td = value,
        "chi" => p.chi = value,
        "mode_count" => p.mode_count = integer(value)?,
        "r0" => p.r0 = value,
        "tau0_s" => p.tau0 = value,
        "swap_intrinsic_factor" => p.swap_intrinsic_factor = value,
        other => return Err(SweepError::UnknownParameter(other.to_string())),
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub l0_km: f64,
    pub n_levels: u32,
    pub rate_hz: f64,
    /// The chain stalled and the rate was reported as zero.
    pub stalled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub non_decreasing: bool,
    pub non_increasing: bool,
    pub strictly_increasing: bool,
    pub strictly_decreasing: bool,
}

impl Monotonicity {
    pub fn of(values: &[f64]) -> Self {
        let pairs = || values.windows(2).map(|w| (w[0], w[1]));
        Self {
            non_decreasing: pairs().all(|(a, b)| b >= a),
            non_increasing: pairs().all(|(a, b)| b <= a),
            strictly_increasing: pairs().all(|(a, b)| b > a),
            strictly_decreasing: pairs().all(|(a, b)| b < a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub monotonicity: Monotonicity,
    /// Row with the largest rate (first one on ties).
    pub argmax: usize,
    /// The maximum lies strictly inside the grid and beats both ends.
    pub interior_maximum: bool,
}

fn evaluate(value: f64, p: &ChainParams) -> Result<SweepRow, SweepError> {
    let (rate_hz, stalled) = match swap_chain(p) {
        Ok(r) => (r.rate_hz, false),
        Err(RateError::Stalled { .. }) => (0.0, true),
        Err(RateError::Param(e)) => return Err(e.into()),
    };
    Ok(SweepRow {
        value,
        l0_km: p.l0,
        n_levels: p.n_levels,
        rate_hz,
        stalled,
    })
}

fn report(parameter: &str, rows: Vec<SweepRow>) -> SweepReport {
    let rates: Vec<f64> = rows.iter().map(|r| r.rate_hz).collect();
    let argmax = rates
        .iter()
        .enumerate()
        .fold(0, |best, (i, &r)| if r > rates[best] { i } else { best });
    let interior_maximum = argmax > 0
        && argmax + 1 < rates.len()
        && rates[argmax] > rates[0]
        && rates[argmax] > rates[rates.len() - 1];
    SweepReport {
        parameter: parameter.to_string(),
        monotonicity: Monotonicity::of(&rates),
        argmax,
        interior_maximum,
        rows,
    }
}

/// Evenly spaced scan of `parameter` over `[min, max]` in `steps` points.
pub fn sweep(
    base: &ChainParams,
    parameter: &str,
    min: f64,
    max: f64,
    steps: usize,
) -> Result<SweepReport, SweepError> {
    if !PARAMETERS.contains(&parameter) {
        return Err(SweepError::UnknownParameter(parameter.to_string()));
    }
    if steps == 0 {
        return Err(SweepError::Grid("at least one step is needed"));
    }
    if !(min.is_finite() && max.is_finite() && min <= max) {
        return Err(SweepError::Grid("need finite bounds with min <= max"));
    }
    let rows = (0..steps)
        .map(|k| {
            let value = if steps == 1 {
                min
            } else {
                min + (max - min) * k as f64 / (steps - 1) as f64
            };
            let p = with_parameter(base, parameter, value)?;
            evaluate(value, &p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(report(parameter, rows))
}

/// Scan of the link length at a fixed end-to-end distance.
///
/// Only lengths `total / 2ⁿ` split the distance into a nested chain, so the
/// grid runs over every integer `n` with `L₀` inside `[l0_min, l0_max]`,
/// from long links to short ones.
pub fn sweep_fixed_total(
    base: &ChainParams,
    total_km: f64,
    l0_min: f64,
    l0_max: f64,
) -> Result<SweepReport, SweepError> {
    crate::error::positive("fixed_total_km", total_km)?;
    if !(l0_min > 0.0 && l0_min <= l0_max) {
        return Err(SweepError::Grid("need 0 < min <= max"));
    }
    let rows = (0..=40u32)
        .filter_map(|n| {
            let l0 = total_km / (1u64 << n) as f64;
            (l0 >= l0_min * (1.0 - 1e-12) && l0 <= l0_max * (1.0 + 1e-12)).then_some((n, l0))
        })
        .map(|(n, l0)| {
            let p = ChainParams { l0, n_levels: n, ..base.clone() };
            evaluate(l0, &p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Err(SweepError::Grid("no nesting depth puts L0 inside the range"));
    }
    Ok(report("l0_km", rows))
}
