//! Fits the unobserved knobs of the link model to measured quantities.
//!
//! Three numbers are matched:
//!
//! * the single-mode Stokes detection probability fixes the Stokes-path
//!   efficiency `eta_td`;
//! * fringe visibilities at two or more storage times fix the visibility
//!   cap and the crosstalk probability by weighted least squares.
//!
//! The anti-Stokes detection efficiency is not observable from these data;
//! it is either kept from the base parameters or set equal to the Stokes
//! path efficiency.

use serde::{Deserialize, Serialize};

use super::analytic::{fringe_model, window_detection_probability};
use super::{LinkError, LinkParams};
use crate::error::ParamError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityTarget {
    pub storage_time: f64,
    pub visibility: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    /// Stokes detection probability of one mode, both detectors summed.
    pub single_mode_detection: f64,
    pub visibilities: Vec<VisibilityTarget>,
    /// Use the fitted Stokes efficiency for the anti-Stokes path too.
    pub tie_detection_efficiencies: bool,
}

impl CalibrationTargets {
    /// Values measured on the 12-mode cold-atom link at χ = 1 %.
    pub fn measured_link() -> Self {
        Self {
            single_mode_detection: 2.5e-3,
            visibilities: vec![
                VisibilityTarget {
                    storage_time: 1e-6,
                    visibility: 0.795,
                    uncertainty: 0.015,
                },
                VisibilityTarget {
                    storage_time: 150e-6,
                    visibility: 0.7,
                    uncertainty: 0.024,
                },
            ],
            tie_detection_efficiencies: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: LinkParams,
    /// Model visibility at each target storage time.
    pub visibilities: Vec<f64>,
    pub chi2: f64,
}

/// Golden-section minimum of `f` on `[lo, hi]`.
fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    // the bracket ends are candidates too when the optimum sits on a bound
    [lo, 0.5 * (lo + hi), hi]
        .into_iter()
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let rising = f(hi) > f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn calibrate(base: &LinkParams, targets: &CalibrationTargets) -> Result<Calibration, LinkError> {
    base.validate()?;
    let mut params = base.clone();

    let detection = |eta: f64| {
        let p = LinkParams {
            stokes_detection_eff: eta,
            ..params.clone()
        };
        window_detection_probability(&p) - targets.single_mode_detection
    };
    if detection(0.0) > 0.0 || detection(1.0) < 0.0 {
        return Err(ParamError::new(
            "single_mode_detection",
            targets.single_mode_detection,
            "not reachable with any Stokes efficiency",
        )
        .into());
    }
    params.stokes_detection_eff = bisect(0.0, 1.0, detection);
    if targets.tie_detection_efficiencies {
        params.detection_eff = params.stokes_detection_eff;
    }

    let fixed = params.clone();
    let chi2 = |cap: f64, eps: f64| -> f64 {
        let p = LinkParams {
            visibility_cap: cap,
            crosstalk_eps: eps,
            ..fixed.clone()
        };
        targets
            .visibilities
            .iter()
            .map(|t| ((fringe_model(t.storage_time, &p).visibility - t.visibility) / t.uncertainty).powi(2))
            .sum()
    };
    let best_eps = |cap: f64| golden_min(0.0, 1.0, |eps| chi2(cap, eps));
    let cap = golden_min(0.0, 1.0, |cap| chi2(cap, best_eps(cap)));
    params.visibility_cap = cap;
    params.crosstalk_eps = best_eps(cap);

    let visibilities = targets
        .visibilities
        .iter()
        .map(|t| fringe_model(t.storage_time, &params).visibility)
        .collect();
    Ok(Calibration {
        chi2: chi2(params.visibility_cap, params.crosstalk_eps),
        params,
        visibilities,
    })
}
